//! The coupling model: single-mode Lorentzian enhancement, the axial emission
//! spectrum, the ZPL coupling integral, cavity-filtered spectra, tuning scans,
//! effective-Q estimates and total-rate composition.
//!
//! Two line treatments are supported for the coupling integrals. The measured
//! doublet components are Gaussian (inhomogeneously broadened), but the rate
//! arithmetic of the reference chain treats the emitter width as homogeneous —
//! linewidths add, equivalent to Lorentzian components in the integral. That
//! treatment is the default here; `AsModelled` keeps the Gaussian shapes.

use crate::dipole::DipoleSolution;
use crate::spectrum::{build_grid, trapezoid, EmitterModel, SampledSpectrum, SpectrumError};
use thiserror::Error;

/// Samples per component fwhm on coupling grids. High enough that halving the
/// spacing moves the coupling integral by well under 1e-4 relative.
const COUPLING_SAMPLES_PER_FWHM: f64 = 128.0;

#[derive(Debug, Error)]
pub enum PurcellError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
}

/// Line treatment for the coupling integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingLineshape {
    /// Treat each ZPL component as a homogeneous Lorentzian of the same fwhm.
    /// Equivalent to the effective-Q shortcut at resonance.
    #[default]
    HomogeneousLorentzian,
    /// Use the model's Gaussian components as measured.
    AsModelled,
}

/// A single cavity mode acting as a Lorentzian spectral filter.
#[derive(Debug, Clone, Copy)]
pub struct ModeFilter {
    pub lambda_cav_nm: f64,
    pub q_factor: f64,
    pub f_max: f64,
}

impl ModeFilter {
    pub fn new(lambda_cav_nm: f64, q_factor: f64, f_max: f64) -> Result<Self, PurcellError> {
        if !(lambda_cav_nm > 0.0 && q_factor > 0.0 && f_max >= 0.0) {
            return Err(PurcellError::InvalidFilter(format!(
                "lambda {lambda_cav_nm}, Q {q_factor}, F_max {f_max}"
            )));
        }
        Ok(Self { lambda_cav_nm, q_factor, f_max })
    }

    /// Filter with Q = λ/δλ and F_max from the mode volume.
    pub fn from_linewidth(
        lambda_cav_nm: f64,
        fwhm_nm: f64,
        mode_volume_um3: f64,
        medium_index: f64,
    ) -> Result<Self, PurcellError> {
        if !(fwhm_nm > 0.0) {
            return Err(PurcellError::InvalidFilter(format!("linewidth {fwhm_nm} nm")));
        }
        let q = lambda_cav_nm / fwhm_nm;
        let fm = crate::cavity::f_max(lambda_cav_nm, medium_index, q, mode_volume_um3);
        Self::new(lambda_cav_nm, q, fm)
    }

    pub fn fwhm_nm(&self) -> f64 {
        self.lambda_cav_nm / self.q_factor
    }

    /// Peak-normalised Lorentzian response at `lambda_nm`.
    pub fn lorentzian(&self, lambda_nm: f64) -> f64 {
        let detune = lambda_nm / self.lambda_cav_nm - 1.0;
        1.0 / (1.0 + 4.0 * self.q_factor * self.q_factor * detune * detune)
    }
}

/// Wavelength-dependent enhancement of one dipole: ξ·F_max·Lorentzian.
pub fn lorentzian_enhancement(lambda_nm: f64, filter: &ModeFilter, xi: f64) -> f64 {
    xi * filter.f_max * filter.lorentzian(lambda_nm)
}

/// Effective quality factor folding the emitter width into the cavity width.
pub fn q_eff(lambda_nm: f64, fwhm_cavity_nm: f64, fwhm_emitter_nm: f64) -> f64 {
    lambda_nm / (fwhm_cavity_nm + fwhm_emitter_nm)
}

/// Branching factors and overlap factors of the two dipoles feeding the doublet,
/// ordered like the model's ZPL peaks (ascending center wavelength).
#[derive(Debug, Clone, Copy)]
pub struct DipoleCoupling {
    pub branching: (f64, f64),
    pub xi: (f64, f64),
}

impl DipoleCoupling {
    pub fn new(branching: (f64, f64), xi: (f64, f64)) -> Result<Self, PurcellError> {
        if (branching.0 + branching.1 - 1.0).abs() > 1e-9 {
            return Err(PurcellError::ConfigMismatch(format!(
                "branching factors sum to {}, expected 1",
                branching.0 + branching.1
            )));
        }
        for xi in [xi.0, xi.1] {
            if !(0.0..=1.0).contains(&xi) {
                return Err(PurcellError::ConfigMismatch(format!("xi {xi} outside [0, 1]")));
            }
        }
        Ok(Self { branching, xi })
    }

    /// The X' dipole feeds the bluer peak (peak 2), Y' the redder (peak 3).
    pub fn from_solution(sol: &DipoleSolution) -> Self {
        Self { branching: sol.branching, xi: sol.xi }
    }

    pub fn sum_n_xi(&self) -> f64 {
        self.branching.0 * self.xi.0 + self.branching.1 * self.xi.1
    }
}

/// Per-dipole view of the model: (branching, xi, peak), checked for consistency
/// between the peak weights and the branching factors.
fn dipole_peaks<'m>(
    model: &'m EmitterModel,
    dipoles: &DipoleCoupling,
) -> Result<Vec<(f64, f64, &'m crate::spectrum::GaussianPeak)>, PurcellError> {
    let peaks = model.zpl_peaks();
    if peaks.len() != 2 {
        return Err(PurcellError::ConfigMismatch(format!(
            "model carries {} ZPL peaks, the dipole pair needs exactly 2",
            peaks.len()
        )));
    }
    let mut order: Vec<usize> = vec![0, 1];
    if peaks[0].center_nm > peaks[1].center_nm {
        order.swap(0, 1);
    }
    let n = [dipoles.branching.0, dipoles.branching.1];
    let xi = [dipoles.xi.0, dipoles.xi.1];
    let dw = model.debye_waller();
    for (slot, &idx) in order.iter().enumerate() {
        let expected = n[slot] * dw;
        if (peaks[idx].weight - expected).abs() > 1e-6 {
            return Err(PurcellError::ConfigMismatch(format!(
                "peak at {} nm has weight {}, but branching factor {} implies {}",
                peaks[idx].center_nm, peaks[idx].weight, n[slot], expected
            )));
        }
    }
    Ok(order
        .iter()
        .enumerate()
        .map(|(slot, &idx)| (n[slot], xi[slot], &peaks[idx]))
        .collect())
}

/// Density of one ZPL component under the chosen line treatment (unit area).
fn component_density(peak: &crate::spectrum::GaussianPeak, lineshape: CouplingLineshape, x: f64) -> f64 {
    match lineshape {
        CouplingLineshape::AsModelled => peak.density_at(x) / peak.weight.max(1e-300),
        CouplingLineshape::HomogeneousLorentzian => {
            let g = peak.fwhm_nm / 2.0;
            g / std::f64::consts::PI / ((x - peak.center_nm).powi(2) + g * g)
        }
    }
}

fn model_psb_density(model: &EmitterModel, x: f64) -> f64 {
    // unit-weight sideband density; scale by (1 - DW) at use sites
    (model.density_at(x) - model.zpl_peaks().iter().map(|p| p.density_at(x)).sum::<f64>())
        .max(0.0)
        / model.psb_weight()
}

/// Wavelength grid for the coupling quadratures: model components plus the
/// filter core, densified to fwhm/128. A filter far wider than the model span
/// (the Q → 0 limit) is capped so the grid stays bounded.
fn coupling_grid(model: &EmitterModel, filter: &ModeFilter, refine: u32) -> Vec<f64> {
    let mut extents = model.component_extents();
    let span = extents.iter().map(|(c, f)| c + 4.0 * f).fold(f64::NEG_INFINITY, f64::max)
        - extents.iter().map(|(c, f)| c - 4.0 * f).fold(f64::INFINITY, f64::min);
    extents.push((filter.lambda_cav_nm, filter.fwhm_nm().min(span.max(1.0))));
    build_grid_fine(&extents, refine)
}

fn build_grid_fine(extents: &[(f64, f64)], refine: u32) -> Vec<f64> {
    // build_grid samples 16 points per fwhm; scale the refinement to reach
    // COUPLING_SAMPLES_PER_FWHM × refine.
    build_grid(extents, (COUPLING_SAMPLES_PER_FWHM / 16.0) as u32 * refine.max(1))
}

/// Normalised spectrum emitted along the cavity axis: the doublet reweighted by
/// n·ξ, the sideband shared between both dipoles.
pub fn s_axial(model: &EmitterModel, dipoles: &DipoleCoupling) -> Result<SampledSpectrum, PurcellError> {
    let grid = model.default_grid(8);
    let density = s_axial_density(model, dipoles, CouplingLineshape::AsModelled, &grid)?;
    Ok(SampledSpectrum::new(grid, density)?.normalized()?)
}

/// Unnormalised axial density on `grid` (analytic unit-integral construction).
fn s_axial_density(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    lineshape: CouplingLineshape,
    grid: &[f64],
) -> Result<Vec<f64>, PurcellError> {
    let parts = dipole_peaks(model, dipoles)?;
    let sum_n_xi = dipoles.sum_n_xi();
    if sum_n_xi <= 0.0 {
        return Err(PurcellError::ConfigMismatch("both dipoles are fully decoupled (ξ = 0)".into()));
    }
    let dw = model.debye_waller();
    Ok(grid
        .iter()
        .map(|&x| {
            let zpl: f64 = parts
                .iter()
                .map(|(n, xi, peak)| n * xi * dw * component_density(peak, lineshape, x))
                .sum();
            zpl / sum_n_xi + (1.0 - dw) * model_psb_density(model, x)
        })
        .collect())
}

/// Fractional rate increase from the ZPL coupling, factorised form:
/// F_max·[Σ n ξ]·∫ S_axial·Lorentzian dλ, trapezoidal quadrature on the grid.
pub fn f_zpl(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    filter: &ModeFilter,
    lineshape: CouplingLineshape,
) -> Result<f64, PurcellError> {
    f_zpl_refined(model, dipoles, filter, lineshape, 1)
}

/// Same as [`f_zpl`] with a grid-refinement multiplier (for convergence checks).
pub fn f_zpl_refined(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    filter: &ModeFilter,
    lineshape: CouplingLineshape,
    refine: u32,
) -> Result<f64, PurcellError> {
    let grid = coupling_grid(model, filter, refine);
    let axial = s_axial_density(model, dipoles, lineshape, &grid)?;
    let integrand: Vec<f64> = grid
        .iter()
        .zip(&axial)
        .map(|(&x, &s)| s * filter.lorentzian(x))
        .collect();
    Ok(filter.f_max * dipoles.sum_n_xi() * trapezoid(&grid, &integrand))
}

/// Direct per-dipole sum: Σ_μ n_μ ∫ S_μ(λ)·ξ_μ·F_max·Lorentzian dλ, where each
/// S_μ is the dipole's full normalised spectrum (ZPL share = DW, sideband 1-DW).
/// Algebraically identical to [`f_zpl`]; kept as an independent code path.
pub fn f_zpl_direct(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    filter: &ModeFilter,
    lineshape: CouplingLineshape,
) -> Result<f64, PurcellError> {
    let grid = coupling_grid(model, filter, 1);
    let parts = dipole_peaks(model, dipoles)?;
    let dw = model.debye_waller();
    let mut total = 0.0;
    for (n, xi, peak) in parts {
        let integrand: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let s_mu = dw * component_density(peak, lineshape, x)
                    + (1.0 - dw) * model_psb_density(model, x);
                s_mu * lorentzian_enhancement(x, filter, xi)
            })
            .collect();
        total += n * trapezoid(&grid, &integrand);
    }
    Ok(total)
}

/// A cavity-filtered emission spectrum with its pre-normalisation integral.
#[derive(Debug, Clone)]
pub struct CavityFilteredSpectrum {
    /// Display-normalised spectrum (unit integral).
    pub spectrum: SampledSpectrum,
    /// ∫ S_axial·Lorentzian dλ before renormalisation; equals
    /// f_zpl / (F_max·Σ n ξ).
    pub raw_integral: f64,
}

/// Spectrum emitted into the cavity mode: S_axial filtered by the Lorentzian.
pub fn cavity_spectrum(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    filter: &ModeFilter,
    lineshape: CouplingLineshape,
) -> Result<CavityFilteredSpectrum, PurcellError> {
    let grid = coupling_grid(model, filter, 1);
    let axial = s_axial_density(model, dipoles, lineshape, &grid)?;
    let filtered: Vec<f64> = grid
        .iter()
        .zip(&axial)
        .map(|(&x, &s)| s * filter.lorentzian(x))
        .collect();
    let raw_integral = trapezoid(&grid, &filtered);
    let spectrum = SampledSpectrum::new(grid, filtered)?.normalized()?;
    Ok(CavityFilteredSpectrum { spectrum, raw_integral })
}

/// One tuning scan: a cavity spectrum row and an f_zpl value per filter position.
#[derive(Debug, Clone)]
pub struct TuningScan {
    pub lambda_cav_nm: Vec<f64>,
    /// Shared emission-wavelength grid of the spectra rows.
    pub emission_nm: Vec<f64>,
    /// One row of spectral density per scan step, on `emission_nm`.
    pub spectra: Vec<Vec<f64>>,
    pub f_zpl: Vec<f64>,
}

/// Evaluate a ladder of filter positions (monotone in wavelength) sharing the
/// linewidth and F_max recipe of `template`. Steps are independent; results
/// are assembled in input order.
pub fn tuning_scan(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    template: &ModeFilter,
    lambda_cav_nm: &[f64],
    lineshape: CouplingLineshape,
) -> Result<TuningScan, PurcellError> {
    if lambda_cav_nm.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PurcellError::ConfigMismatch("scan positions must increase monotonically".into()));
    }
    // One shared grid densified across the whole scanned range.
    let mut extents = model.component_extents();
    let fwhm = template.fwhm_nm();
    for &lc in lambda_cav_nm {
        extents.push((lc, fwhm));
    }
    let grid = build_grid_fine(&extents, 1);
    let axial = s_axial_density(model, dipoles, lineshape, &grid)?;
    let mut spectra = Vec::with_capacity(lambda_cav_nm.len());
    let mut f_values = Vec::with_capacity(lambda_cav_nm.len());
    for &lc in lambda_cav_nm {
        let filter = filter_at(template, lc);
        let row: Vec<f64> = grid
            .iter()
            .zip(&axial)
            .map(|(&x, &s)| s * filter.lorentzian(x))
            .collect();
        f_values.push(filter.f_max * dipoles.sum_n_xi() * trapezoid(&grid, &row));
        spectra.push(row);
    }
    Ok(TuningScan {
        lambda_cav_nm: lambda_cav_nm.to_vec(),
        emission_nm: grid,
        spectra,
        f_zpl: f_values,
    })
}

/// Retarget a filter to a new center, keeping its linewidth (in nm) and
/// rescaling F_max with λ³·Q.
pub fn filter_at(template: &ModeFilter, lambda_cav_nm: f64) -> ModeFilter {
    let fwhm = template.fwhm_nm();
    let q = lambda_cav_nm / fwhm;
    let scale = (lambda_cav_nm / template.lambda_cav_nm).powi(3) * (q / template.q_factor);
    ModeFilter {
        lambda_cav_nm,
        q_factor: q,
        f_max: template.f_max * scale,
    }
}

/// λ_cav maximising f_zpl over [lo, hi] at 0.01 nm pitch.
pub fn optimal_tuning(
    model: &EmitterModel,
    dipoles: &DipoleCoupling,
    template: &ModeFilter,
    range_nm: (f64, f64),
    lineshape: CouplingLineshape,
) -> Result<f64, PurcellError> {
    let mut best = (range_nm.0, f64::NEG_INFINITY);
    let mut lc = range_nm.0;
    while lc <= range_nm.1 + 1e-12 {
        let f = f_zpl(model, dipoles, &filter_at(template, lc), lineshape)?;
        if f > best.1 {
            best = (lc, f);
        }
        lc += 0.01;
    }
    Ok(best.0)
}

/// Enhancement of one doublet line referred to its share of the total emission.
pub fn peak_enhancement(f_zpl: f64, dw: f64, branching_n: f64) -> Result<f64, PurcellError> {
    if !(dw * branching_n > 0.0) {
        return Err(PurcellError::ConfigMismatch("dw·n must be positive".into()));
    }
    Ok(f_zpl / (dw * branching_n))
}

/// Total relative emission rate: f_zpl + (1 - DW)·f_psb.
pub fn total_rate(f_zpl: f64, f_psb: f64, dw: f64) -> f64 {
    f_zpl + (1.0 - dw) * f_psb
}

/// Composed coupling result with the weighted total-rate rule baked in.
#[derive(Debug, Clone)]
pub struct CouplingResult {
    pub f_zpl: f64,
    pub f_psb: f64,
    pub f_total: f64,
    /// f_zpl referred to each peak's emission share dw·n_μ.
    pub per_peak_enhancement: Vec<f64>,
}

impl CouplingResult {
    pub fn compose(
        f_zpl_value: f64,
        f_psb: f64,
        dw: f64,
        branching: (f64, f64),
    ) -> Result<Self, PurcellError> {
        if f_zpl_value < 0.0 || f_psb < 0.0 {
            return Err(PurcellError::ConfigMismatch("rate components must be non-negative".into()));
        }
        Ok(Self {
            f_zpl: f_zpl_value,
            f_psb,
            f_total: total_rate(f_zpl_value, f_psb, dw),
            per_peak_enhancement: vec![
                peak_enhancement(f_zpl_value, dw, branching.0)?,
                peak_enhancement(f_zpl_value, dw, branching.1)?,
            ],
        })
    }
}

/// Crude multimode sideband estimator: a background floor plus Lorentzian mode
/// filters summed over a (q,m,n) ladder (even transverse orders only). The
/// background is chosen by the caller; with an empty ladder and background 1
/// the free-space limit is recovered exactly. Qualitative tool — its filtered
/// spectrum locates the modes the sideband couples to.
#[derive(Debug, Clone)]
pub struct MultimodeEstimator {
    pub filters: Vec<ModeFilter>,
    /// Mean orientation factor applied to every mode.
    pub xi_bar: f64,
    pub background: f64,
}

impl MultimodeEstimator {
    pub fn free_space() -> Self {
        Self { filters: Vec::new(), xi_bar: 1.0, background: 1.0 }
    }

    /// Relative sideband emission factor for a unit-normalised sideband spectrum.
    pub fn estimate_f_psb(&self, psb: &SampledSpectrum) -> f64 {
        let xs = psb.wavelengths_nm();
        let mut acc = 0.0;
        for f in &self.filters {
            let integrand: Vec<f64> = xs
                .iter()
                .zip(psb.density())
                .map(|(&x, &d)| d * lorentzian_enhancement(x, f, self.xi_bar))
                .collect();
            acc += trapezoid(xs, &integrand);
        }
        self.background + acc
    }

    /// Sideband spectrum seen through the mode ladder (for mode-position checks).
    pub fn filtered_spectrum(&self, psb: &SampledSpectrum) -> Result<SampledSpectrum, PurcellError> {
        let xs = psb.wavelengths_nm().to_vec();
        let density: Vec<f64> = xs
            .iter()
            .zip(psb.density())
            .map(|(&x, &d)| {
                let gain: f64 = self
                    .filters
                    .iter()
                    .map(|f| lorentzian_enhancement(x, f, self.xi_bar))
                    .sum();
                d * (self.background + gain)
            })
            .collect();
        Ok(SampledSpectrum::new(xs, density)?)
    }
}
