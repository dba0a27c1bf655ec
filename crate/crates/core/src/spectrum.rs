//! Emitter spectra: the ZPL doublet, the phonon sideband, synthesis onto wavelength
//! grids, band integrals, Debye-Waller extraction and Gaussian peak fitting.
//!
//! All integrals use the trapezoidal rule on the stored grid. Synthesised spectra are
//! renormalised to unit integral, so band integrals of a synthesised spectrum are
//! fractions of the total emission.

use crate::fit::{self, FitError, LeastSquares};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("wavelength grid must be strictly increasing, finite, and hold at least 2 samples")]
    InvalidGrid,
    #[error("spectral density must be non-negative and finite")]
    InvalidDensity,
    #[error("band [{lo}, {hi}] nm is outside the grid [{grid_lo}, {grid_hi}] nm")]
    BandOutsideGrid { lo: f64, hi: f64, grid_lo: f64, grid_hi: f64 },
    #[error("grid does not cover the component centered at {center_nm} nm")]
    GridNotCovering { center_nm: f64 },
    #[error("grid too coarse near {center_nm} nm: max spacing {max_step_nm:.4} nm exceeds fwhm/8 = {required_nm:.4} nm")]
    GridTooCoarse { center_nm: f64, max_step_nm: f64, required_nm: f64 },
    #[error("ZPL window [{window_lo}, {window_hi}] nm overlaps phonon-sideband support starting at {support_lo} nm")]
    WindowOverlapsSideband { window_lo: f64, window_hi: f64, support_lo: f64 },
    #[error("invalid peak: {0}")]
    InvalidPeak(String),
    #[error("invalid emitter model: {0}")]
    InvalidModel(String),
    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
    #[error("csv: {0}")]
    Csv(String),
}

/// A spectrum sampled on a strictly increasing wavelength grid (nm), with a
/// non-negative spectral density per nm at each sample.
#[derive(Debug, Clone)]
pub struct SampledSpectrum {
    wavelengths_nm: Vec<f64>,
    density: Vec<f64>,
}

impl SampledSpectrum {
    pub fn new(wavelengths_nm: Vec<f64>, density: Vec<f64>) -> Result<Self, SpectrumError> {
        if wavelengths_nm.len() < 2
            || wavelengths_nm.len() != density.len()
            || wavelengths_nm.iter().any(|w| !w.is_finite())
            || wavelengths_nm.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SpectrumError::InvalidGrid);
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(SpectrumError::InvalidDensity);
        }
        Ok(Self { wavelengths_nm, density })
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees >= 2 samples
    }

    /// Trapezoidal integral over the full grid.
    pub fn total(&self) -> f64 {
        trapezoid(&self.wavelengths_nm, &self.density)
    }

    /// Trapezoidal integral over [lo, hi], with linear interpolation at the cut
    /// points. Both bounds must lie inside the grid.
    pub fn integrate_band(&self, lo: f64, hi: f64) -> Result<f64, SpectrumError> {
        let (grid_lo, grid_hi) = (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap());
        if !(lo < hi) || lo < grid_lo || hi > grid_hi {
            return Err(SpectrumError::BandOutsideGrid { lo, hi, grid_lo, grid_hi });
        }
        let mut acc = 0.0;
        for i in 0..self.len() - 1 {
            let (x0, x1) = (self.wavelengths_nm[i], self.wavelengths_nm[i + 1]);
            if x1 <= lo || x0 >= hi {
                continue;
            }
            let a = x0.max(lo);
            let b = x1.min(hi);
            let ya = interp(x0, x1, self.density[i], self.density[i + 1], a);
            let yb = interp(x0, x1, self.density[i], self.density[i + 1], b);
            acc += 0.5 * (ya + yb) * (b - a);
        }
        Ok(acc)
    }

    /// Rescale the density so the full-grid integral is exactly 1.
    pub fn normalized(mut self) -> Result<Self, SpectrumError> {
        let total = self.total();
        if total <= 0.0 || !total.is_finite() {
            return Err(SpectrumError::InvalidDensity);
        }
        for d in &mut self.density {
            *d /= total;
        }
        Ok(self)
    }

    /// Pointwise sum with another spectrum on the identical grid.
    pub fn weighted_sum(&self, other: &Self, w_self: f64, w_other: f64) -> Result<Self, SpectrumError> {
        if self.wavelengths_nm != other.wavelengths_nm {
            return Err(SpectrumError::InvalidGrid);
        }
        let density = self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| w_self * a + w_other * b)
            .collect();
        SampledSpectrum::new(self.wavelengths_nm.clone(), density)
    }

    /// Wavelength of the maximum density sample.
    pub fn argmax_nm(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.len() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        self.wavelengths_nm[best]
    }
}

fn interp(x0: f64, x1: f64, y0: f64, y1: f64, x: f64) -> f64 {
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        acc += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
    }
    acc
}

/// A Gaussian spectral component. The analytic area equals `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPeak {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub weight: f64,
}

pub const FWHM_TO_SIGMA: f64 = 2.354820045030949; // 2 sqrt(2 ln 2)

impl GaussianPeak {
    pub fn new(center_nm: f64, fwhm_nm: f64, weight: f64) -> Result<Self, SpectrumError> {
        if !(fwhm_nm > 0.0) || !center_nm.is_finite() || !(weight >= 0.0) || !weight.is_finite() {
            return Err(SpectrumError::InvalidPeak(format!(
                "center {center_nm}, fwhm {fwhm_nm}, weight {weight}"
            )));
        }
        Ok(Self { center_nm, fwhm_nm, weight })
    }

    pub fn sigma_nm(&self) -> f64 {
        self.fwhm_nm / FWHM_TO_SIGMA
    }

    /// Density at `x` (area-normalised Gaussian times the weight).
    pub fn density_at(&self, x_nm: f64) -> f64 {
        let s = self.sigma_nm();
        let z = (x_nm - self.center_nm) / s;
        self.weight * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Phonon sideband component: either a tabulated template (rescaled to the
/// declared weight) or a parametric sum of Gaussian phonon replicas.
#[derive(Debug, Clone)]
pub enum PhononSideband {
    /// Unit-area template; the model scales it by (1 - DW).
    Tabulated(SampledSpectrum),
    /// Gaussian replicas whose weights sum to 1; the model scales by (1 - DW).
    Replicas(Vec<GaussianPeak>),
}

/// Parameters for the default parametric sideband: Gaussian replicas spaced by
/// a fixed phonon energy, with widths growing by `width_growth` per replica.
#[derive(Debug, Clone)]
pub struct ReplicaParams {
    pub count: usize,
    pub spacing_mev: f64,
    pub first_fwhm_nm: f64,
    pub width_growth: f64,
    /// Relative weights, normalised internally.
    pub weights: Vec<f64>,
}

impl Default for ReplicaParams {
    fn default() -> Self {
        // First width 8 nm: the fourth replica (64 nm wide) then stays clear of
        // the ZPL region, keeping the window integrals clean.
        Self {
            count: 4,
            spacing_mev: 65.0,
            first_fwhm_nm: 8.0,
            width_growth: 2.0,
            weights: vec![0.4, 0.3, 0.2, 0.1],
        }
    }
}

impl PhononSideband {
    /// Build the parametric replica ladder red-shifted from `zpl_center_nm`.
    pub fn from_replicas(zpl_center_nm: f64, p: &ReplicaParams) -> Result<Self, SpectrumError> {
        if p.count == 0 || p.weights.len() != p.count {
            return Err(SpectrumError::InvalidModel(format!(
                "replica count {} does not match {} weights",
                p.count,
                p.weights.len()
            )));
        }
        let total: f64 = p.weights.iter().sum();
        if !(total > 0.0) {
            return Err(SpectrumError::InvalidModel("replica weights must sum to a positive value".into()));
        }
        let e0_mev = crate::HC_EV_NM / zpl_center_nm * 1000.0;
        let mut peaks = Vec::with_capacity(p.count);
        for k in 0..p.count {
            let e_mev = e0_mev - (k as f64 + 1.0) * p.spacing_mev;
            if e_mev <= 0.0 {
                return Err(SpectrumError::InvalidModel("replica energy fell below zero".into()));
            }
            let center = crate::HC_EV_NM * 1000.0 / e_mev;
            let fwhm = p.first_fwhm_nm * p.width_growth.powi(k as i32);
            peaks.push(GaussianPeak::new(center, fwhm, p.weights[k] / total)?);
        }
        Ok(PhononSideband::Replicas(peaks))
    }

    /// Wavelength intervals treated as sideband support, used by the ambiguity
    /// check in [`debye_waller`]. Replicas claim center ± fwhm; a tabulated
    /// template claims the span of its non-zero samples.
    pub fn support_nm(&self) -> Vec<(f64, f64)> {
        match self {
            PhononSideband::Replicas(peaks) => peaks
                .iter()
                .map(|p| (p.center_nm - p.fwhm_nm, p.center_nm + p.fwhm_nm))
                .collect(),
            PhononSideband::Tabulated(s) => {
                let xs = s.wavelengths_nm();
                let ds = s.density();
                let first = ds.iter().position(|&d| d > 0.0);
                let last = ds.iter().rposition(|&d| d > 0.0);
                match (first, last) {
                    (Some(a), Some(b)) => vec![(xs[a], xs[b])],
                    _ => vec![],
                }
            }
        }
    }

    /// Density of the unit-weight sideband at `x`, interpolating templates linearly.
    pub(crate) fn density_at(&self, x_nm: f64) -> f64 {
        match self {
            PhononSideband::Replicas(peaks) => peaks.iter().map(|p| p.density_at(x_nm)).sum(),
            PhononSideband::Tabulated(s) => {
                let xs = s.wavelengths_nm();
                if x_nm < xs[0] || x_nm > *xs.last().unwrap() {
                    return 0.0;
                }
                let i = match xs.binary_search_by(|w| w.total_cmp(&x_nm)) {
                    Ok(i) => return s.density()[i],
                    Err(i) => i,
                };
                interp(xs[i - 1], xs[i], s.density()[i - 1], s.density()[i], x_nm)
            }
        }
    }

    /// All Gaussian-like components with their scaled weights, for grid construction.
    fn component_extents(&self) -> Vec<(f64, f64)> {
        match self {
            PhononSideband::Replicas(peaks) => peaks.iter().map(|p| (p.center_nm, p.fwhm_nm)).collect(),
            PhononSideband::Tabulated(s) => {
                let xs = s.wavelengths_nm();
                let span = xs.last().unwrap() - xs[0];
                vec![(0.5 * (xs[0] + xs.last().unwrap()), span / 3.0)]
            }
        }
    }
}

/// Parametric emitter: ZPL doublet + phonon sideband + Debye-Waller weighting.
///
/// Invariants: the ZPL peak weights sum to the Debye-Waller factor (1e-9), the
/// sideband carries 1 - DW, and every ZPL center lies inside the declared window.
#[derive(Debug, Clone)]
pub struct EmitterModel {
    zpl_peaks: Vec<GaussianPeak>,
    psb: PhononSideband,
    debye_waller: f64,
    zpl_window_nm: (f64, f64),
}

impl EmitterModel {
    pub fn new(
        zpl_peaks: Vec<GaussianPeak>,
        psb: PhononSideband,
        debye_waller: f64,
        zpl_window_nm: (f64, f64),
    ) -> Result<Self, SpectrumError> {
        if zpl_peaks.is_empty() {
            return Err(SpectrumError::InvalidModel("at least one ZPL peak required".into()));
        }
        if !(debye_waller > 0.0 && debye_waller < 1.0) {
            return Err(SpectrumError::InvalidModel(format!("debye_waller {debye_waller} outside (0,1)")));
        }
        let wsum: f64 = zpl_peaks.iter().map(|p| p.weight).sum();
        if (wsum - debye_waller).abs() > 1e-9 {
            return Err(SpectrumError::InvalidModel(format!(
                "ZPL weights sum to {wsum}, expected debye_waller {debye_waller}"
            )));
        }
        if zpl_window_nm.0 >= zpl_window_nm.1 {
            return Err(SpectrumError::InvalidModel("ZPL window is empty".into()));
        }
        for p in &zpl_peaks {
            if p.center_nm < zpl_window_nm.0 || p.center_nm > zpl_window_nm.1 {
                return Err(SpectrumError::InvalidModel(format!(
                    "ZPL center {} nm outside the declared window [{}, {}]",
                    p.center_nm, zpl_window_nm.0, zpl_window_nm.1
                )));
            }
        }
        Ok(Self { zpl_peaks, psb, debye_waller, zpl_window_nm })
    }

    /// Model without a sideband (the `debye_waller` = 1 limit, represented by
    /// an empty replica list carrying the vanishing residual weight).
    pub fn zpl_only(zpl_peaks: Vec<GaussianPeak>, zpl_window_nm: (f64, f64)) -> Result<Self, SpectrumError> {
        let wsum: f64 = zpl_peaks.iter().map(|p| p.weight).sum();
        let dw = wsum.min(1.0 - 1e-12);
        let peaks = zpl_peaks
            .into_iter()
            .map(|p| GaussianPeak { weight: p.weight * dw / wsum, ..p })
            .collect();
        Self::new(peaks, PhononSideband::Replicas(Vec::new()), dw, zpl_window_nm)
    }

    pub fn zpl_peaks(&self) -> &[GaussianPeak] {
        &self.zpl_peaks
    }

    pub fn psb(&self) -> &PhononSideband {
        &self.psb
    }

    pub fn debye_waller(&self) -> f64 {
        self.debye_waller
    }

    pub fn zpl_window_nm(&self) -> (f64, f64) {
        self.zpl_window_nm
    }

    pub fn psb_weight(&self) -> f64 {
        1.0 - self.debye_waller
    }

    /// Free-space density at `x`: ZPL peaks plus the weighted sideband.
    pub fn density_at(&self, x_nm: f64) -> f64 {
        let zpl: f64 = self.zpl_peaks.iter().map(|p| p.density_at(x_nm)).sum();
        zpl + self.psb_weight() * self.psb.density_at(x_nm)
    }

    /// (center, fwhm) extents of every component, ZPL and sideband alike.
    pub fn component_extents(&self) -> Vec<(f64, f64)> {
        let mut ext: Vec<(f64, f64)> = self.zpl_peaks.iter().map(|p| (p.center_nm, p.fwhm_nm)).collect();
        ext.extend(self.psb.component_extents());
        ext
    }

    /// Build a wavelength grid covering every component to ±4×fwhm, densified
    /// to fwhm/(16·refine) around each component and fwhm_max/(16·refine)
    /// elsewhere. `refine` = 1 is the default working resolution.
    pub fn default_grid(&self, refine: u32) -> Vec<f64> {
        let ext = self.component_extents();
        build_grid(&ext, refine)
    }
}

/// Grid builder shared with the coupling module: dense near each (center, fwhm)
/// component, coarse in between. Region boundaries are grid knots, so a walk
/// can never step across a narrow core.
pub fn build_grid(extents: &[(f64, f64)], refine: u32) -> Vec<f64> {
    let refine = refine.max(1) as f64;
    let lo = extents
        .iter()
        .map(|(c, f)| c - 4.0 * f)
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    let hi = extents.iter().map(|(c, f)| c + 4.0 * f).fold(f64::NEG_INFINITY, f64::max);
    let coarse = extents.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min).max((hi - lo) / 4096.0);
    let mut knots: Vec<f64> = vec![lo, hi];
    for &(c, f) in extents {
        for edge in [c - 4.0 * f, c + 4.0 * f] {
            if edge > lo && edge < hi {
                knots.push(edge);
            }
        }
    }
    knots.sort_by(|a, b| a.total_cmp(b));
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let step_at = |x: f64| -> f64 {
        let mut s = coarse / 4.0; // background step
        for &(c, f) in extents {
            if (x - c).abs() <= 4.0 * f {
                s = s.min(f / (16.0 * refine));
            }
        }
        s
    };

    let mut grid = vec![knots[0]];
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-12 {
            continue;
        }
        // one refinement regime per segment: its boundaries are the knots
        let step = step_at(0.5 * (a + b));
        let n = ((b - a) / step).ceil().max(1.0) as usize;
        for k in 1..n {
            grid.push(a + (b - a) * k as f64 / n as f64);
        }
        grid.push(b);
    }
    grid
}

/// Synthesize the normalised free-space spectrum of `model` on `grid`.
pub fn synthesize_spectrum(model: &EmitterModel, grid: &[f64]) -> Result<SampledSpectrum, SpectrumError> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectrumError::InvalidGrid);
    }
    let (glo, ghi) = (grid[0], *grid.last().unwrap());
    for p in &model.zpl_peaks {
        check_component(grid, glo, ghi, p.center_nm, p.fwhm_nm)?;
    }
    if let PhononSideband::Replicas(peaks) = &model.psb {
        for p in peaks {
            check_component(grid, glo, ghi, p.center_nm, p.fwhm_nm)?;
        }
    }
    let density: Vec<f64> = grid.iter().map(|&x| model.density_at(x)).collect();
    SampledSpectrum::new(grid.to_vec(), density)?.normalized()
}

fn check_component(grid: &[f64], glo: f64, ghi: f64, center: f64, fwhm: f64) -> Result<(), SpectrumError> {
    if center < glo || center > ghi {
        return Err(SpectrumError::GridNotCovering { center_nm: center });
    }
    // Resolution: at least 8 samples per fwhm near the component.
    let lo = (center - 1.5 * fwhm).max(glo);
    let hi = (center + 1.5 * fwhm).min(ghi);
    let mut max_step: f64 = 0.0;
    for w in grid.windows(2) {
        if w[1] > lo && w[0] < hi {
            max_step = max_step.max(w[1] - w[0]);
        }
    }
    if max_step > fwhm / 8.0 {
        return Err(SpectrumError::GridTooCoarse {
            center_nm: center,
            max_step_nm: max_step,
            required_nm: fwhm / 8.0,
        });
    }
    Ok(())
}

/// Fraction of the spectrum inside the ZPL window, rejecting windows that
/// overlap the declared sideband support.
pub fn debye_waller(
    s: &SampledSpectrum,
    zpl_window_nm: (f64, f64),
    psb_support_nm: &[(f64, f64)],
) -> Result<f64, SpectrumError> {
    for &(a, b) in psb_support_nm {
        if zpl_window_nm.0 < b && zpl_window_nm.1 > a {
            return Err(SpectrumError::WindowOverlapsSideband {
                window_lo: zpl_window_nm.0,
                window_hi: zpl_window_nm.1,
                support_lo: a,
            });
        }
    }
    s.integrate_band(zpl_window_nm.0, zpl_window_nm.1)
}

/// Result of [`fit_gaussian_peaks`].
#[derive(Debug, Clone)]
pub struct PeakFit {
    pub peaks: Vec<GaussianPeak>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Set when the requested peak count exceeds what the data resolves
    /// (collapsed centers or vanishing weights).
    pub ill_posed: bool,
}

struct GaussianSumModel<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
}

impl LeastSquares for GaussianSumModel<'_> {
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.xs
            .iter()
            .zip(self.ys)
            .map(|(&x, &y)| {
                let mut v = 0.0;
                for t in p.chunks_exact(3) {
                    v += eval_peak(t, x);
                }
                v - y
            })
            .collect()
    }

    fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.xs
            .iter()
            .map(|&x| {
                let mut row = Vec::with_capacity(p.len());
                for t in p.chunks_exact(3) {
                    let (c, f, w) = (t[0], t[1], t[2]);
                    let s = f / FWHM_TO_SIGMA;
                    let z = (x - c) / s;
                    let g = (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                    // d/dc, d/dfwhm, d/dweight
                    row.push(w * g * z / s);
                    row.push(w * g * (z * z - 1.0) / f);
                    row.push(g);
                }
                row
            })
            .collect()
    }
}

fn eval_peak(t: &[f64], x: f64) -> f64 {
    let s = t[1] / FWHM_TO_SIGMA;
    let z = (x - t[0]) / s;
    t[2] * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Least-squares fit of `k` Gaussian peaks to the sampled spectrum.
///
/// Initial guesses must have positive widths, distinct centers inside the grid,
/// and there must be one guess per requested peak.
pub fn fit_gaussian_peaks(
    s: &SampledSpectrum,
    k: usize,
    init: &[GaussianPeak],
) -> Result<PeakFit, SpectrumError> {
    if k == 0 || init.len() != k {
        return Err(SpectrumError::InvalidPeak(format!("need {k} initial guesses, got {}", init.len())));
    }
    let (glo, ghi) = (s.wavelengths_nm[0], *s.wavelengths_nm.last().unwrap());
    for (i, p) in init.iter().enumerate() {
        if !(p.fwhm_nm > 0.0) {
            return Err(SpectrumError::InvalidPeak(format!("guess {i} has non-positive width")));
        }
        if p.center_nm < glo || p.center_nm > ghi {
            return Err(SpectrumError::InvalidPeak(format!("guess {i} center outside the grid")));
        }
        for q in &init[..i] {
            if (p.center_nm - q.center_nm).abs() < 1e-12 {
                return Err(SpectrumError::InvalidPeak("coincident initial centers".into()));
            }
        }
    }
    let p0: Vec<f64> = init.iter().flat_map(|p| [p.center_nm, p.fwhm_nm, p.weight]).collect();
    let model = GaussianSumModel { xs: &s.wavelengths_nm, ys: &s.density };
    let out = fit::levenberg_marquardt(&model, &p0)?;
    let peaks: Vec<GaussianPeak> = out
        .params
        .chunks_exact(3)
        .map(|t| GaussianPeak { center_nm: t[0], fwhm_nm: t[1].abs(), weight: t[2] })
        .collect();
    let total_w: f64 = peaks.iter().map(|p| p.weight.abs()).sum();
    let mut ill_posed = false;
    for (i, p) in peaks.iter().enumerate() {
        if p.weight.abs() < 1e-9 * total_w.max(1e-300) {
            ill_posed = true;
        }
        for q in &peaks[..i] {
            if (p.center_nm - q.center_nm).abs() < 0.25 * p.fwhm_nm.min(q.fwhm_nm) {
                ill_posed = true;
            }
        }
    }
    Ok(PeakFit { peaks, residual_norm: out.residual_norm, iterations: out.iterations, ill_posed })
}

/// Read a two-column `wavelength_nm,density` CSV (header required).
pub fn read_spectrum_csv(text: &str) -> Result<SampledSpectrum, SpectrumError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| SpectrumError::Csv("empty file".into()))?;
    if header.trim() != "wavelength_nm,density" {
        return Err(SpectrumError::Csv(format!("expected header 'wavelength_nm,density', got '{header}'")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let x: f64 = parts
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| SpectrumError::Csv(format!("row {}: bad wavelength", i + 2)))?;
        let y: f64 = parts
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| SpectrumError::Csv(format!("row {}: bad density", i + 2)))?;
        xs.push(x);
        ys.push(y);
    }
    SampledSpectrum::new(xs, ys)
}

/// Serialize a spectrum in the same two-column format.
pub fn write_spectrum_csv(s: &SampledSpectrum) -> String {
    let mut out = String::from("wavelength_nm,density\n");
    for (x, y) in s.wavelengths_nm.iter().zip(&s.density) {
        out.push_str(&format!("{},{}\n", crate::output::sig9(*x), crate::output::sig9(*y)));
    }
    out
}
