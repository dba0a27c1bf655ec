//! The run configuration document: one structured key-value file binding the
//! cavity geometry, mirror stacks, emitter model, dipole block and per-command
//! parameters. Unknown keys are rejected with line/column diagnostics, and
//! validation reports every problem at once before any computation starts.

use crate::cavity::CavityGeometry;
use crate::dbr::{Layer, LayerStack, QuarterWaveOrder};
use crate::dipole::{self, DipoleSolution};
use crate::purcell::{CouplingLineshape, DipoleCoupling};
use crate::spectrum::{EmitterModel, GaussianPeak, PhononSideband, ReplicaParams, SampledSpectrum};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A value that may be deferred to the toolkit ("auto" / "optimal").
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Keyword(String),
}

impl<T: Copy> AutoOr<T> {
    fn as_value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Keyword(_) => None,
        }
    }

    fn check_keyword(&self, allowed: &str, key: &str, problems: &mut Vec<String>) {
        if let AutoOr::Keyword(k) = self {
            if k != allowed {
                problems.push(format!("{key}: unknown keyword '{k}' (expected '{allowed}' or a value)"));
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavitySection,
    pub mirror: MirrorPair,
    pub emitter: EmitterSection,
    pub dipole: DipoleSection,
    pub coupling: CouplingSection,
    pub inhom: InhomSection,
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub roc_um: f64,
    pub gap_um: f64,
    pub penetration_um: AutoOr<[f64; 2]>,
    #[serde(default = "one")]
    pub medium_index: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorPair {
    pub concave: StackSection,
    pub planar: StackSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSection {
    pub ambient: f64,
    pub substrate: f64,
    pub pairs: PairSpec,
    #[serde(default)]
    pub extra_layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub n_high: f64,
    pub n_low: f64,
    pub count: AutoOr<usize>,
    /// Reflectivity target for the pair-count search when count = "auto".
    #[serde(default)]
    pub target_r: Option<f64>,
    pub lambda0_nm: f64,
    pub order: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub index: f64,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub debye_waller: f64,
    pub zpl_window_nm: Option<[f64; 2]>,
    pub zpl: ZplSection,
    pub psb: PsbSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZplSection {
    pub peaks: Vec<PeakSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    /// Omit to use the thermal branching factors × Debye-Waller fraction.
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsbSection {
    /// Tabulated template CSV (`wavelength_nm,density`).
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub replicas: Option<ReplicaSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSpec {
    pub count: usize,
    pub spacing_mev: f64,
    pub first_fwhm_nm: f64,
    pub width_growth: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleSection {
    pub theta_deg: f64,
    pub measured_ratio: f64,
    pub delta_e_mev: f64,
    pub temperature_k: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub lambda_cav_nm: AutoOr<f64>,
    pub linewidth_nm: f64,
    pub mode_volume_um3: AutoOr<f64>,
    #[serde(default = "one")]
    pub medium_index: f64,
    pub f_psb: f64,
    #[serde(default)]
    pub lineshape: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InhomSection {
    pub cavity_fwhm_nm: f64,
    pub spread_fwhm_nm: f64,
    pub center_nm: AutoOr<f64>,
    pub gamma0_per_ns: f64,
    #[serde(default = "default_t_max")]
    pub t_max_ns: f64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_t_max() -> f64 {
    60.0
}
fn default_t_steps() -> usize {
    121
}

/// The bundled reference configuration (also shipped at configs/paper.toml).
pub const PAPER_CONFIG_TOML: &str = include_str!("../../../configs/paper.toml");

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The bundled reference configuration.
    pub fn paper() -> Self {
        Self::from_toml(PAPER_CONFIG_TOML).expect("bundled configuration must parse")
    }

    /// Validate everything and build the runtime objects. `base_dir` anchors
    /// relative file references. All problems are reported together.
    pub fn resolve(&self, base_dir: &Path) -> Result<Resolved, ConfigError> {
        let mut problems = Vec::new();

        // ---- scalar sanity ----
        if !(self.cavity.roc_um > 0.0) {
            problems.push("cavity.roc_um must be positive".into());
        }
        if !(self.cavity.gap_um > 0.0) {
            problems.push("cavity.gap_um must be positive".into());
        }
        if self.cavity.medium_index < 1.0 {
            problems.push("cavity.medium_index must be >= 1".into());
        }
        self.cavity.penetration_um.check_keyword("auto", "cavity.penetration_um", &mut problems);
        self.coupling.lambda_cav_nm.check_keyword("optimal", "coupling.lambda_cav_nm", &mut problems);
        self.coupling.mode_volume_um3.check_keyword("auto", "coupling.mode_volume_um3", &mut problems);
        self.inhom.center_nm.check_keyword("optimal", "inhom.center_nm", &mut problems);
        if !(self.coupling.linewidth_nm > 0.0) {
            problems.push("coupling.linewidth_nm must be positive".into());
        }
        if self.coupling.f_psb < 0.0 {
            problems.push("coupling.f_psb must be non-negative".into());
        }
        if !(self.inhom.cavity_fwhm_nm > 0.0) {
            problems.push("inhom.cavity_fwhm_nm must be positive".into());
        }
        if self.inhom.spread_fwhm_nm < 0.0 {
            problems.push("inhom.spread_fwhm_nm must be non-negative".into());
        }
        if !(self.inhom.gamma0_per_ns > 0.0) {
            problems.push("inhom.gamma0_per_ns must be positive".into());
        }
        if self.scan.steps < 2 {
            problems.push("scan.steps must be at least 2".into());
        }
        if !(self.scan.start_nm < self.scan.stop_nm) {
            problems.push("scan.start_nm must lie below scan.stop_nm".into());
        }

        let lineshape = match self.coupling.lineshape.as_deref() {
            None | Some("homogeneous-lorentzian") => CouplingLineshape::HomogeneousLorentzian,
            Some("as-modelled") => CouplingLineshape::AsModelled,
            Some(other) => {
                problems.push(format!(
                    "coupling.lineshape: unknown value '{other}' (expected 'homogeneous-lorentzian' or 'as-modelled')"
                ));
                CouplingLineshape::HomogeneousLorentzian
            }
        };

        // ---- mirrors ----
        let concave = build_stack("mirror.concave", &self.mirror.concave, &mut problems);
        let planar = build_stack("mirror.planar", &self.mirror.planar, &mut problems);

        // ---- dipoles ----
        let dipoles = match dipole::solve_orientation(
            self.dipole.theta_deg,
            self.dipole.measured_ratio,
            self.dipole.delta_e_mev,
            self.dipole.temperature_k,
        ) {
            Ok(sol) => Some(sol),
            Err(e) => {
                problems.push(format!("dipole: {e}"));
                None
            }
        };

        // ---- emitter ----
        let model = self.build_emitter(base_dir, dipoles.as_ref(), &mut problems);

        let (Some(concave), Some(planar), Some(dipoles), Some(model)) =
            (concave, planar, dipoles, model)
        else {
            return Err(ConfigError::Validation(problems));
        };

        // ---- geometry (needs the mirrors for "auto" penetration) ----
        let design_nm = self.mirror.concave.pairs.lambda0_nm;
        let penetration = match self.cavity.penetration_um.as_value() {
            Some([a, b]) => (a, b),
            None => {
                let pa = concave.stack.penetration_depth_nm(design_nm);
                let pb = planar.stack.penetration_depth_nm(design_nm);
                match (pa, pb) {
                    (Ok(a), Ok(b)) => (a / 1000.0, b / 1000.0),
                    (a, b) => {
                        for r in [a, b] {
                            if let Err(e) = r {
                                problems.push(format!("cavity.penetration_um auto: {e}"));
                            }
                        }
                        (0.0, 0.0)
                    }
                }
            }
        };
        let geometry = match CavityGeometry::new(
            self.cavity.roc_um,
            self.cavity.gap_um,
            penetration,
            self.cavity.medium_index,
        ) {
            Ok(g) => Some(g),
            Err(e) => {
                problems.push(format!("cavity: {e}"));
                None
            }
        };

        if !problems.is_empty() {
            return Err(ConfigError::Validation(problems));
        }
        let geometry = geometry.expect("geometry checked above");

        let mode_volume = self
            .coupling
            .mode_volume_um3
            .as_value()
            .unwrap_or_else(|| crate::cavity::mode_volume_gaussian_um3(&geometry, design_nm));

        Ok(Resolved {
            model,
            dipole_solution: dipoles,
            coupling_dipoles: DipoleCoupling::from_solution(&dipoles),
            concave,
            planar,
            geometry,
            design_nm,
            mode_volume_um3: mode_volume,
            coupling_medium_index: self.coupling.medium_index,
            linewidth_nm: self.coupling.linewidth_nm,
            lambda_cav_nm: self.coupling.lambda_cav_nm.as_value(),
            f_psb: self.coupling.f_psb,
            lineshape,
            inhom: self.inhom.clone(),
            scan: self.scan.clone(),
            out_dir: self.output.dir.clone(),
        })
    }

    fn build_emitter(
        &self,
        base_dir: &Path,
        dipoles: Option<&DipoleSolution>,
        problems: &mut Vec<String>,
    ) -> Option<EmitterModel> {
        let e = &self.emitter;
        if !(e.debye_waller > 0.0 && e.debye_waller < 1.0) {
            problems.push(format!("emitter.debye_waller {} outside (0, 1)", e.debye_waller));
            return None;
        }
        if e.zpl.peaks.is_empty() {
            problems.push("emitter.zpl.peaks must not be empty".into());
            return None;
        }
        let explicit: Vec<bool> = e.zpl.peaks.iter().map(|p| p.weight.is_some()).collect();
        let weights: Option<Vec<f64>> = if explicit.iter().all(|&x| x) {
            Some(e.zpl.peaks.iter().map(|p| p.weight.unwrap()).collect())
        } else if explicit.iter().any(|&x| x) {
            problems.push("emitter.zpl.peaks: give weights for all peaks or for none".into());
            None
        } else if e.zpl.peaks.len() == 2 {
            dipoles.map(|d| vec![d.branching.0 * e.debye_waller, d.branching.1 * e.debye_waller])
        } else {
            problems.push("emitter.zpl.peaks: thermal weights need exactly 2 peaks".into());
            None
        };
        let weights = weights?;

        let mut peaks = Vec::new();
        for (spec, w) in e.zpl.peaks.iter().zip(&weights) {
            match GaussianPeak::new(spec.center_nm, spec.fwhm_nm, *w) {
                Ok(p) => peaks.push(p),
                Err(err) => problems.push(format!("emitter.zpl.peaks: {err}")),
            }
        }
        if peaks.len() != e.zpl.peaks.len() {
            return None;
        }

        let psb = match (&e.psb.file, &e.psb.replicas) {
            (Some(path), None) => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                match std::fs::read_to_string(&full) {
                    Ok(text) => match crate::spectrum::read_spectrum_csv(&text) {
                        Ok(s) => match normalize_template(s) {
                            Ok(t) => Some(PhononSideband::Tabulated(t)),
                            Err(err) => {
                                problems.push(format!("emitter.psb.file {}: {err}", full.display()));
                                None
                            }
                        },
                        Err(err) => {
                            problems.push(format!("emitter.psb.file {}: {err}", full.display()));
                            None
                        }
                    },
                    Err(err) => {
                        problems.push(format!("emitter.psb.file {}: {err}", full.display()));
                        None
                    }
                }
            }
            (None, Some(spec)) => {
                let anchor = peaks.iter().map(|p| p.center_nm).fold(f64::NEG_INFINITY, f64::max);
                let params = ReplicaParams {
                    count: spec.count,
                    spacing_mev: spec.spacing_mev,
                    first_fwhm_nm: spec.first_fwhm_nm,
                    width_growth: spec.width_growth,
                    weights: spec.weights.clone(),
                };
                match PhononSideband::from_replicas(anchor, &params) {
                    Ok(p) => Some(p),
                    Err(err) => {
                        problems.push(format!("emitter.psb.replicas: {err}"));
                        None
                    }
                }
            }
            (Some(_), Some(_)) => {
                problems.push("emitter.psb: give either file or replicas, not both".into());
                None
            }
            (None, None) => {
                problems.push("emitter.psb: expected a file or a replicas block".into());
                None
            }
        }?;

        let window = e.zpl_window_nm.map(|w| (w[0], w[1])).unwrap_or_else(|| {
            let mid = peaks.iter().map(|p| p.center_nm).sum::<f64>() / peaks.len() as f64;
            (mid - 1.5, mid + 1.5)
        });

        match EmitterModel::new(peaks, psb, e.debye_waller, window) {
            Ok(m) => Some(m),
            Err(err) => {
                problems.push(format!("emitter: {err}"));
                None
            }
        }
    }
}

fn normalize_template(s: SampledSpectrum) -> Result<SampledSpectrum, crate::spectrum::SpectrumError> {
    s.normalized()
}

/// A mirror stack with the metadata produced while building it.
#[derive(Debug, Clone)]
pub struct ResolvedStack {
    pub stack: LayerStack,
    pub pairs: usize,
    /// Set when the pair count was searched for a target reflectivity.
    pub reflectivity_at_design: f64,
}

fn build_stack(key: &str, section: &StackSection, problems: &mut Vec<String>) -> Option<ResolvedStack> {
    let p = &section.pairs;
    let order = match p.order.as_str() {
        "high-first" => QuarterWaveOrder::HighFirst,
        "low-first" => QuarterWaveOrder::LowFirst,
        other => {
            problems.push(format!("{key}.pairs.order: unknown value '{other}'"));
            return None;
        }
    };
    if !(p.lambda0_nm > 0.0) {
        problems.push(format!("{key}.pairs.lambda0_nm must be positive"));
        return None;
    }
    let build = |count: usize| -> Result<LayerStack, crate::dbr::DbrError> {
        let mut stack = LayerStack::quarter_wave(
            section.ambient,
            p.n_high,
            p.n_low,
            count,
            p.lambda0_nm,
            order,
            section.substrate,
        )?;
        for extra in &section.extra_layers {
            stack.layers.push(Layer { index: extra.index, thickness_nm: extra.thickness_nm });
        }
        LayerStack::new(stack.ambient_index, stack.layers, stack.substrate_index)
    };
    let count = match p.count.as_value() {
        Some(c) => c,
        None => {
            let Some(target) = p.target_r else {
                problems.push(format!("{key}.pairs.target_r required when count = \"auto\""));
                return None;
            };
            // nearest reflectivity over a 5..=15 pair search
            let mut best = (5usize, f64::INFINITY);
            for c in 5..=15 {
                if let Ok(stack) = build(c) {
                    let (r, _) = stack.reflectivity(p.lambda0_nm);
                    let miss = (r - target).abs();
                    if miss < best.1 {
                        best = (c, miss);
                    }
                }
            }
            best.0
        }
    };
    match build(count) {
        Ok(stack) => {
            let (r, _) = stack.reflectivity(p.lambda0_nm);
            Some(ResolvedStack { stack, pairs: count, reflectivity_at_design: r })
        }
        Err(e) => {
            problems.push(format!("{key}: {e}"));
            None
        }
    }
}

/// Everything a command needs, validated and resolved.
pub struct Resolved {
    pub model: EmitterModel,
    pub dipole_solution: DipoleSolution,
    pub coupling_dipoles: DipoleCoupling,
    pub concave: ResolvedStack,
    pub planar: ResolvedStack,
    pub geometry: CavityGeometry,
    /// Design wavelength shared by the mirror coatings.
    pub design_nm: f64,
    pub mode_volume_um3: f64,
    pub coupling_medium_index: f64,
    pub linewidth_nm: f64,
    /// None = tune for maximum f_zpl.
    pub lambda_cav_nm: Option<f64>,
    pub f_psb: f64,
    pub lineshape: CouplingLineshape,
    pub inhom: InhomSection,
    pub scan: ScanSection,
    pub out_dir: PathBuf,
}

impl Resolved {
    /// Filter template at the design wavelength; retarget with
    /// [`crate::purcell::filter_at`].
    pub fn filter_template(&self) -> Result<crate::purcell::ModeFilter, crate::purcell::PurcellError> {
        crate::purcell::ModeFilter::from_linewidth(
            self.design_nm,
            self.linewidth_nm,
            self.mode_volume_um3,
            self.coupling_medium_index,
        )
    }

    /// The coupling wavelength: explicit, or the optimum over the ZPL window.
    pub fn resolve_lambda_cav(&self) -> Result<f64, crate::purcell::PurcellError> {
        if let Some(lc) = self.lambda_cav_nm {
            return Ok(lc);
        }
        let window = self.model.zpl_window_nm();
        crate::purcell::optimal_tuning(
            &self.model,
            &self.coupling_dipoles,
            &self.filter_template()?,
            window,
            self.lineshape,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bundled_config_parses_and_resolves() {
        let cfg = RunConfig::paper();
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.planar.pairs, 8, "pair-count search should settle on 8");
        assert!(r.planar.reflectivity_at_design > 0.99);
        assert!(r.concave.reflectivity_at_design > 0.9999);
        // auto penetration: concave ≈ 0.275 µm, planar ≈ 0.66 µm
        assert_abs_diff_eq!(r.geometry.penetration_um.0, 0.2746, epsilon = 0.01);
        assert_abs_diff_eq!(r.geometry.penetration_um.1, 0.6595, epsilon = 0.01);
        // thermal ZPL weights
        let w: f64 = r.model.zpl_peaks().iter().map(|p| p.weight).sum();
        assert_abs_diff_eq!(w, 0.044, epsilon = 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let mut text = PAPER_CONFIG_TOML.to_string();
        text.push_str("\n[cavity2]\nbogus = 1\n");
        let err = RunConfig::from_toml(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cavity2") || msg.contains("unknown"), "got: {msg}");

        let bad_key = PAPER_CONFIG_TOML.replace("roc_um = 7.6", "roc_woops = 7.6");
        let err = RunConfig::from_toml(&bad_key).unwrap_err();
        assert!(err.to_string().contains("roc_woops") || err.to_string().contains("unknown field"));
    }

    #[test]
    fn validation_collects_all_problems() {
        let text = PAPER_CONFIG_TOML
            .replace("roc_um = 7.6", "roc_um = -1.0")
            .replace("linewidth_nm = 0.7", "linewidth_nm = 0.0")
            .replace("steps = 81", "steps = 1");
        let cfg = RunConfig::from_toml(&text).unwrap();
        match cfg.resolve(Path::new(".")) {
            Err(ConfigError::Validation(problems)) => {
                assert!(problems.len() >= 3, "expected all problems listed, got {problems:?}");
            }
            other => panic!("expected a validation error, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn missing_psb_file_fails_fast() {
        let text = PAPER_CONFIG_TOML.replace(
            "[emitter.psb.replicas]",
            "[emitter.psb]\nfile = \"does-not-exist.csv\"\n[emitter.psb.replicas_unused]",
        );
        // the replacement corrupts the replicas block header; build a cleaner variant instead
        let _ = text;
        let mut cfg = RunConfig::paper();
        cfg.emitter.psb.replicas = None;
        cfg.emitter.psb.file = Some(PathBuf::from("does-not-exist.csv"));
        match cfg.resolve(Path::new("/tmp")) {
            Err(ConfigError::Validation(problems)) => {
                assert!(problems.iter().any(|p| p.contains("does-not-exist.csv")));
            }
            _ => panic!("expected validation failure for a missing file"),
        }
    }

    #[test]
    fn explicit_weights_must_match_debye_waller() {
        let mut cfg = RunConfig::paper();
        cfg.emitter.zpl.peaks[0].weight = Some(0.03);
        cfg.emitter.zpl.peaks[1].weight = Some(0.03);
        match cfg.resolve(Path::new(".")) {
            Err(ConfigError::Validation(problems)) => {
                assert!(problems.iter().any(|p| p.contains("debye_waller") || p.contains("weights")));
            }
            _ => panic!("expected the weight-sum invariant to fail"),
        }
    }

    #[test]
    fn manual_override_reproduces_published_volume() {
        let mut cfg = RunConfig::paper();
        // back-derived optical length 2.25 µm
        cfg.cavity.penetration_um = AutoOr::Value([0.57, 0.57]);
        let r = cfg.resolve(Path::new(".")).unwrap();
        let v = crate::cavity::mode_volume_gaussian_um3(&r.geometry, 637.0);
        assert_abs_diff_eq!(v, 1.243, epsilon = 0.002);
    }
}
