//! Hermite-Gauss mode structure of the plano-concave open cavity: Rayleigh range,
//! Gaussian mode volume, the resonance ladder with Gouy-shifted transverse modes,
//! finesse/linewidth relations, and the maximum rate enhancement F_max.
//!
//! Lengths are in µm, wavelengths in nm, volumes in µm³.

use thiserror::Error;

pub const NM_PER_UM: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum CavityError {
    #[error("unstable geometry: optical length {l_opt_um} µm must lie in (0, roc = {roc_um} µm)")]
    Unstable { l_opt_um: f64, roc_um: f64 },
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("reflectivity must lie strictly inside (0, 1), got {0}")]
    ReflectivityRange(f64),
    #[error("linewidth must be positive, got {0}")]
    NonPositiveLinewidth(f64),
    #[error("invalid mode parameters: {0}")]
    InvalidMode(String),
}

/// How the standing wave terminates at the two mirror surfaces, set by the
/// outermost coating layers. Determines the antinode count in the physical gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapTermination {
    /// Low-index-terminated planar mirror (antinode) facing a high-index-terminated
    /// concave mirror (node): gap = (2q-1)·λ/4.
    AntinodeNode,
    /// Both surfaces low-index-terminated: gap = q·λ/2.
    AntinodeAntinode,
}

/// Plano-concave resonator parameters. The optical length is the physical gap
/// plus the per-mirror field penetration depths.
#[derive(Debug, Clone, Copy)]
pub struct CavityGeometry {
    pub roc_um: f64,
    pub gap_um: f64,
    pub penetration_um: (f64, f64),
    pub medium_index: f64,
    pub termination: GapTermination,
}

impl CavityGeometry {
    pub fn new(
        roc_um: f64,
        gap_um: f64,
        penetration_um: (f64, f64),
        medium_index: f64,
    ) -> Result<Self, CavityError> {
        let g = Self {
            roc_um,
            gap_um,
            penetration_um,
            medium_index,
            termination: GapTermination::AntinodeNode,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), CavityError> {
        if !(self.gap_um > 0.0) || self.penetration_um.0 < 0.0 || self.penetration_um.1 < 0.0 {
            return Err(CavityError::Invalid("gap and penetration depths must be non-negative".into()));
        }
        if self.medium_index < 1.0 {
            return Err(CavityError::Invalid(format!("medium index {} below 1", self.medium_index)));
        }
        let l = self.optical_length_um();
        if !(l > 0.0 && l < self.roc_um) {
            return Err(CavityError::Unstable { l_opt_um: l, roc_um: self.roc_um });
        }
        Ok(())
    }

    pub fn optical_length_um(&self) -> f64 {
        self.gap_um + self.penetration_um.0 + self.penetration_um.1
    }
}

/// Rayleigh range z_R = L·sqrt(roc/L − 1) of the stable resonator.
pub fn rayleigh_range_um(g: &CavityGeometry) -> f64 {
    let l = g.optical_length_um();
    l * (g.roc_um / l - 1.0).sqrt()
}

/// Gaussian-beam mode volume V = λ·z_R·L/4.
pub fn mode_volume_gaussian_um3(g: &CavityGeometry, wavelength_nm: f64) -> f64 {
    wavelength_nm / NM_PER_UM * rayleigh_range_um(g) * g.optical_length_um() / 4.0
}

/// One-way Gouy phase increment ψ = arccos(sqrt(1 − L/roc)).
pub fn gouy_phase(g: &CavityGeometry) -> f64 {
    (1.0 - g.optical_length_um() / g.roc_um).sqrt().acos()
}

/// A resolved resonance of the ladder: 2πL/λ = qπ + (m+n+1)·ψ.
#[derive(Debug, Clone, Copy)]
pub struct ModeResonance {
    /// Total-phase longitudinal index (the q in the phase condition).
    pub q_phase: u32,
    /// Antinode count in the physical gap under the geometry's termination
    /// convention — the index used for display.
    pub q_gap: u32,
    pub m: u32,
    pub n: u32,
    pub wavelength_nm: f64,
    /// Transverse modes with odd m+n have a field zero on the cavity axis.
    pub dark_on_axis: bool,
}

/// All resonances inside `band_nm` with transverse order m+n ≤ `max_transverse`.
///
/// Wavelengths satisfy the phase condition exactly; the list is sorted by
/// ascending wavelength, ties broken by (m, n).
pub fn resonant_wavelengths(
    g: &CavityGeometry,
    band_nm: (f64, f64),
    max_transverse: u32,
) -> Result<Vec<ModeResonance>, CavityError> {
    g.validate()?;
    if band_nm.0 >= band_nm.1 || band_nm.0 <= 0.0 {
        return Ok(Vec::new());
    }
    let l_nm = g.optical_length_um() * NM_PER_UM * g.medium_index;
    let psi = gouy_phase(g);
    let mut out = Vec::new();
    for order in 0..=max_transverse {
        for m in 0..=order {
            let n = order - m;
            let gouy = (order as f64 + 1.0) * psi;
            // q range covering the band: q = (2πL/λ − gouy)/π
            let q_hi = (2.0 * std::f64::consts::PI * l_nm / band_nm.0 - gouy) / std::f64::consts::PI;
            let q_lo = (2.0 * std::f64::consts::PI * l_nm / band_nm.1 - gouy) / std::f64::consts::PI;
            let q_min = q_lo.ceil().max(1.0) as u64;
            let q_max = q_hi.floor() as u64;
            for q in q_min..=q_max.min(q_min + 10_000) {
                let lambda = 2.0 * std::f64::consts::PI * l_nm / (q as f64 * std::f64::consts::PI + gouy);
                if lambda < band_nm.0 || lambda > band_nm.1 {
                    continue;
                }
                out.push(ModeResonance {
                    q_phase: q as u32,
                    q_gap: gap_antinode_index(g, lambda),
                    m,
                    n,
                    wavelength_nm: lambda,
                    dark_on_axis: (m + n) % 2 == 1,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.wavelength_nm
            .total_cmp(&b.wavelength_nm)
            .then(a.m.cmp(&b.m))
            .then(a.n.cmp(&b.n))
    });
    Ok(out)
}

/// Antinode count in the physical gap for a standing wave at `wavelength_nm`.
fn gap_antinode_index(g: &CavityGeometry, wavelength_nm: f64) -> u32 {
    let half_waves = 2.0 * g.gap_um * NM_PER_UM * g.medium_index / wavelength_nm;
    let q = match g.termination {
        // antinode at one surface, node at the other: gap = (2q-1)λ/4
        GapTermination::AntinodeNode => (half_waves + 0.5) / 1.0,
        // antinodes at both surfaces: gap = qλ/2, q interior-1 counting
        GapTermination::AntinodeAntinode => half_waves,
    };
    q.round().max(1.0) as u32
}

/// Residual of the plano-concave phase condition for a candidate resonance.
pub fn phase_condition_residual(g: &CavityGeometry, mode: &ModeResonance) -> f64 {
    let l_nm = g.optical_length_um() * NM_PER_UM * g.medium_index;
    let psi = gouy_phase(g);
    2.0 * std::f64::consts::PI * l_nm / mode.wavelength_nm
        - mode.q_phase as f64 * std::f64::consts::PI
        - (mode.m + mode.n + 1) as f64 * psi
}

/// Q = λ/δλ.
pub fn q_from_linewidth(wavelength_nm: f64, fwhm_nm: f64) -> Result<f64, CavityError> {
    if !(fwhm_nm > 0.0) {
        return Err(CavityError::NonPositiveLinewidth(fwhm_nm));
    }
    Ok(wavelength_nm / fwhm_nm)
}

/// Finesse of a two-mirror resonator from the intensity reflectivities.
pub fn finesse_from_reflectivity(r1: f64, r2: f64) -> Result<f64, CavityError> {
    for r in [r1, r2] {
        if !(r > 0.0 && r < 1.0) {
            return Err(CavityError::ReflectivityRange(r));
        }
    }
    let root = (r1 * r2).sqrt();
    Ok(std::f64::consts::PI * (r1 * r2).powf(0.25) / (1.0 - root))
}

/// Linewidth (FWHM, nm) from the finesse: δλ = λ²/(2·L_opt·F).
pub fn linewidth_from_finesse(wavelength_nm: f64, l_opt_um: f64, finesse: f64) -> f64 {
    wavelength_nm * wavelength_nm / (2.0 * l_opt_um * NM_PER_UM * finesse)
}

/// Maximum rate enhancement for a perfectly placed, perfectly aligned dipole:
/// F_max = (3/4π²)·(λ/n)³·Q/V.
pub fn f_max(wavelength_nm: f64, medium_index: f64, q_factor: f64, mode_volume_um3: f64) -> f64 {
    let lam_um = wavelength_nm / NM_PER_UM / medium_index;
    3.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI) * lam_um.powi(3) * q_factor
        / mode_volume_um3
}

/// A fully resolved cavity mode: indices, wavelength, linewidth and volume.
#[derive(Debug, Clone, Copy)]
pub struct CavityMode {
    pub resonance: ModeResonance,
    pub fwhm_nm: f64,
    pub q_factor: f64,
    pub mode_volume_um3: f64,
}

impl CavityMode {
    pub fn new(resonance: ModeResonance, fwhm_nm: f64, mode_volume_um3: f64) -> Result<Self, CavityError> {
        if !(fwhm_nm > 0.0) {
            return Err(CavityError::NonPositiveLinewidth(fwhm_nm));
        }
        if !(mode_volume_um3 > 0.0) {
            return Err(CavityError::InvalidMode(format!("mode volume {mode_volume_um3}")));
        }
        Ok(Self {
            resonance,
            fwhm_nm,
            q_factor: resonance.wavelength_nm / fwhm_nm,
            mode_volume_um3,
        })
    }
}
