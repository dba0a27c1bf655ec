//! One-dimensional transfer-matrix electromagnetics for the dielectric Bragg
//! mirrors and the mirror/gap/mirror assembly: reflectivity spectra, stop bands,
//! reflection phase, penetration depths and standing-wave field profiles.
//!
//! Normal incidence, lossless real indices. Forward waves carry exp(-ikz), so
//! a mirror plane buried a depth d inside the stack appears as a reflection
//! phase slope dφ/dλ = +4πd/λ².

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DbrError {
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("wavelength {wavelength_nm} nm is outside the stop band (R = {reflectivity:.4})")]
    OutsideStopBand { wavelength_nm: f64, reflectivity: f64 },
    #[error("no resonance found within ±{window_nm} nm of {center_nm} nm")]
    ResonanceNotFound { center_nm: f64, window_nm: f64 },
    #[error("invalid field region: {0}")]
    InvalidRegion(String),
}

/// One dielectric layer: real refractive index and physical thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub index: f64,
    pub thickness_nm: f64,
}

/// Which index faces the ambient medium in a quarter-wave stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarterWaveOrder {
    /// High-index outermost: maximal reflectivity, field node at the surface.
    HighFirst,
    /// Low-index outermost: field antinode at the surface.
    LowFirst,
}

/// Ordered dielectric stack between two semi-infinite media. Layers run from
/// the ambient side to the substrate side.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub ambient_index: f64,
    pub layers: Vec<Layer>,
    pub substrate_index: f64,
}

impl LayerStack {
    pub fn new(ambient_index: f64, layers: Vec<Layer>, substrate_index: f64) -> Result<Self, DbrError> {
        if ambient_index < 1.0 || substrate_index < 1.0 {
            return Err(DbrError::InvalidStack("ambient and substrate indices must be >= 1".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.index < 1.0 {
                return Err(DbrError::InvalidStack(format!("layer {i} index {} below 1", l.index)));
            }
            if !(l.thickness_nm > 0.0) {
                return Err(DbrError::InvalidStack(format!("layer {i} thickness {} nm", l.thickness_nm)));
            }
        }
        Ok(Self { ambient_index, layers, substrate_index })
    }

    /// Quarter-wave mirror: `pairs` (high, low) index pairs at design wavelength
    /// `lambda0_nm`, each layer λ0/(4n) thick.
    pub fn quarter_wave(
        ambient_index: f64,
        n_high: f64,
        n_low: f64,
        pairs: usize,
        lambda0_nm: f64,
        order: QuarterWaveOrder,
        substrate_index: f64,
    ) -> Result<Self, DbrError> {
        if pairs == 0 {
            return Err(DbrError::InvalidStack("at least one pair required".into()));
        }
        let dh = lambda0_nm / (4.0 * n_high);
        let dl = lambda0_nm / (4.0 * n_low);
        let mut layers = Vec::with_capacity(2 * pairs);
        for _ in 0..pairs {
            match order {
                QuarterWaveOrder::HighFirst => {
                    layers.push(Layer { index: n_high, thickness_nm: dh });
                    layers.push(Layer { index: n_low, thickness_nm: dl });
                }
                QuarterWaveOrder::LowFirst => {
                    layers.push(Layer { index: n_low, thickness_nm: dl });
                    layers.push(Layer { index: n_high, thickness_nm: dh });
                }
            }
        }
        Self::new(ambient_index, layers, substrate_index)
    }

    /// Same stack seen from the substrate side.
    pub fn reversed(&self) -> Self {
        Self {
            ambient_index: self.substrate_index,
            layers: self.layers.iter().rev().copied().collect(),
            substrate_index: self.ambient_index,
        }
    }

    /// Total physical thickness.
    pub fn thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// Complex reflection amplitude at normal incidence.
    pub fn amplitude_r(&self, wavelength_nm: f64) -> Complex64 {
        let (r, _) = self.amplitudes(wavelength_nm);
        r
    }

    fn amplitudes(&self, wavelength_nm: f64) -> (Complex64, Complex64) {
        let mut m = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                     [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        for l in &self.layers {
            let lm = layer_matrix(l, wavelength_nm);
            m = mat_mul(&m, &lm);
        }
        let p0 = Complex64::new(self.ambient_index, 0.0);
        let ps = Complex64::new(self.substrate_index, 0.0);
        let top = m[0][0] + m[0][1] * ps;
        let bot = m[1][0] + m[1][1] * ps;
        let r = (p0 * top - bot) / (p0 * top + bot);
        let t = 2.0 * p0 / (p0 * top + bot);
        (r, t)
    }

    /// Intensity reflectivity and reflection phase.
    pub fn reflectivity(&self, wavelength_nm: f64) -> (f64, f64) {
        let r = self.amplitude_r(wavelength_nm);
        (r.norm_sqr(), r.arg())
    }

    /// Intensity transmittance (lossless: R + T = 1).
    pub fn transmittance(&self, wavelength_nm: f64) -> f64 {
        let (_, t) = self.amplitudes(wavelength_nm);
        self.substrate_index / self.ambient_index * t.norm_sqr()
    }

    /// Widest contiguous interval inside `band_nm` with R ≥ `threshold`,
    /// scanned at `step_nm`. `None` when nothing reaches the threshold.
    pub fn stop_band(&self, band_nm: (f64, f64), threshold: f64, step_nm: f64) -> Option<(f64, f64)> {
        if !(threshold > 0.0 && threshold < 1.0) || band_nm.0 >= band_nm.1 || !(step_nm > 0.0) {
            return None;
        }
        let mut best: Option<(f64, f64)> = None;
        let mut run_start: Option<f64> = None;
        let mut lam = band_nm.0;
        let mut prev = band_nm.0;
        while lam <= band_nm.1 + 0.5 * step_nm {
            let (r, _) = self.reflectivity(lam.min(band_nm.1));
            if r >= threshold {
                run_start.get_or_insert(lam.min(band_nm.1));
                prev = lam.min(band_nm.1);
            } else if let Some(start) = run_start.take() {
                if best.map_or(true, |(a, b)| prev - start > b - a) {
                    best = Some((start, prev));
                }
            }
            lam += step_nm;
        }
        if let Some(start) = run_start {
            if best.map_or(true, |(a, b)| prev - start > b - a) {
                best = Some((start, prev));
            }
        }
        best
    }

    /// Field penetration depth from the reflection-phase dispersion:
    /// L_pen = (λ²/4π)·dφ/dλ, central difference with a 0.01 nm step.
    ///
    /// The design wavelength must lie inside the stop band (R ≥ 0.5 here).
    pub fn penetration_depth_nm(&self, lambda0_nm: f64) -> Result<f64, DbrError> {
        let (r0, _) = self.reflectivity(lambda0_nm);
        if r0 < 0.5 {
            return Err(DbrError::OutsideStopBand { wavelength_nm: lambda0_nm, reflectivity: r0 });
        }
        let h = 0.01;
        let rp = self.amplitude_r(lambda0_nm + h);
        let rm = self.amplitude_r(lambda0_nm - h);
        // arg of the product is wrap-safe
        let dphi = (rp * rm.conj()).arg() / (2.0 * h);
        Ok(lambda0_nm * lambda0_nm / (4.0 * std::f64::consts::PI) * dphi)
    }

    /// Energy penetration depth: the extra gap-equivalent length stored in the
    /// mirror, 2·∫ ε|E|² dz / |E|²_antinode for unit-amplitude incidence. For
    /// quarter-wave mirrors this agrees with the phase penetration depth.
    pub fn energy_penetration_depth_nm(&self, lambda0_nm: f64) -> Result<f64, DbrError> {
        let (r0, _) = self.reflectivity(lambda0_nm);
        if r0 < 0.5 {
            return Err(DbrError::OutsideStopBand { wavelength_nm: lambda0_nm, reflectivity: r0 });
        }
        let r = self.amplitude_r(lambda0_nm);
        let peak = (1.0 + r.norm()).powi(2) * self.ambient_index;
        let mut field = FieldWalker::new(self, lambda0_nm);
        let mut integral = 0.0;
        for l in &self.layers {
            integral += field.integrate_layer(l, 0.25);
        }
        Ok(2.0 * integral / peak)
    }
}

fn layer_matrix(l: &Layer, wavelength_nm: f64) -> [[Complex64; 2]; 2] {
    let delta = 2.0 * std::f64::consts::PI * l.index * l.thickness_nm / wavelength_nm;
    let (s, c) = delta.sin_cos();
    let i = Complex64::new(0.0, 1.0);
    [
        [Complex64::new(c, 0.0), i * s / l.index],
        [i * l.index * s, Complex64::new(c, 0.0)],
    ]
}

fn mat_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Determinant of a layer's characteristic matrix (should be 1 for lossless layers).
pub fn layer_matrix_determinant(index: f64, thickness_nm: f64, wavelength_nm: f64) -> Complex64 {
    let m = layer_matrix(&Layer { index, thickness_nm }, wavelength_nm);
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Walks [E, H] through a stack from the ambient surface, evaluating |E|² inside layers.
struct FieldWalker {
    e: Complex64,
    h: Complex64,
    wavelength_nm: f64,
}

impl FieldWalker {
    fn new(stack: &LayerStack, wavelength_nm: f64) -> Self {
        let r = stack.amplitude_r(wavelength_nm);
        Self {
            e: 1.0 + r,
            h: stack.ambient_index * (1.0 - r),
            wavelength_nm,
        }
    }

    fn at(&self, l: &Layer, z_nm: f64) -> Complex64 {
        let delta = 2.0 * std::f64::consts::PI * l.index * z_nm / self.wavelength_nm;
        let (s, c) = delta.sin_cos();
        let i = Complex64::new(0.0, 1.0);
        // inverse slice matrix applied to the entry fields
        c * self.e - i * s / l.index * self.h
    }

    fn advance(&mut self, l: &Layer) {
        let delta = 2.0 * std::f64::consts::PI * l.index * l.thickness_nm / self.wavelength_nm;
        let (s, c) = delta.sin_cos();
        let i = Complex64::new(0.0, 1.0);
        let e = c * self.e - i * s / l.index * self.h;
        let h = -i * l.index * s * self.e + c * self.h;
        self.e = e;
        self.h = h;
    }

    /// ∫ ε|E|² dz across one layer (midpoint rule at `pitch_nm`), then step past it.
    fn integrate_layer(&mut self, l: &Layer, pitch_nm: f64) -> f64 {
        let steps = (l.thickness_nm / pitch_nm).ceil().max(1.0) as usize;
        let w = l.thickness_nm / steps as f64;
        let mut acc = 0.0;
        for k in 0..steps {
            let z = (k as f64 + 0.5) * w;
            acc += l.index * l.index * self.at(l, z).norm_sqr() * w;
        }
        self.advance(l);
        acc
    }

    /// Sample |E|² at `pitch_nm` across one layer (positions measured from the
    /// layer entry), then step past it.
    fn sample_layer(&mut self, l: &Layer, pitch_nm: f64, z0: f64, out: &mut Vec<(f64, f64)>) {
        let steps = (l.thickness_nm / pitch_nm).ceil().max(1.0) as usize;
        let w = l.thickness_nm / steps as f64;
        for k in 0..=steps {
            let z = (k as f64 * w).min(l.thickness_nm);
            out.push((z0 + z, self.at(l, z).norm_sqr()));
        }
        self.advance(l);
    }
}

/// Standing-wave intensity |E|² along the stack normal, normalised to unit
/// incident amplitude. Positions in nm from the first sampled point.
#[derive(Debug, Clone)]
pub struct FieldProfile {
    pub positions_nm: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Interval occupied by the cavity gap, when the profile came from an assembly.
    pub gap_nm: Option<(f64, f64)>,
}

impl FieldProfile {
    /// Strict local maxima of |E|² inside the open interval `region_nm`.
    pub fn antinode_count(&self, region_nm: (f64, f64)) -> usize {
        self.antinode_positions(region_nm).len()
    }

    /// Positions of the strict local maxima inside `region_nm`.
    pub fn antinode_positions(&self, region_nm: (f64, f64)) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 1..self.positions_nm.len().saturating_sub(1) {
            let z = self.positions_nm[i];
            if z <= region_nm.0 || z >= region_nm.1 {
                continue;
            }
            if self.intensity[i] > self.intensity[i - 1] && self.intensity[i] > self.intensity[i + 1] {
                out.push(z);
            }
        }
        out
    }

    /// True when a local maximum lies within `within_nm` of `z_nm`.
    pub fn has_antinode_near(&self, z_nm: f64, within_nm: f64) -> bool {
        !self
            .antinode_positions((z_nm - within_nm - 1.0, z_nm + within_nm + 1.0))
            .iter()
            .all(|p| (p - z_nm).abs() > within_nm)
    }

    pub fn peak_intensity(&self) -> f64 {
        self.intensity.iter().copied().fold(0.0, f64::max)
    }
}

/// Field profile of a bare mirror stack with an ambient lead-in region, for
/// surface-antinode checks. z = 0 at the ambient surface.
pub fn mirror_field_profile(stack: &LayerStack, wavelength_nm: f64, pitch_nm: f64, lead_in_nm: f64) -> FieldProfile {
    let r = stack.amplitude_r(wavelength_nm);
    let mut positions = Vec::new();
    let mut intensity = Vec::new();
    // ambient standing wave: E(z) = exp(-ikz) + r exp(ikz) for z < 0
    let k = 2.0 * std::f64::consts::PI * stack.ambient_index / wavelength_nm;
    let mut z = -lead_in_nm;
    while z < 0.0 {
        let e = Complex64::from_polar(1.0, -k * z) + r * Complex64::from_polar(1.0, k * z);
        positions.push(z);
        intensity.push(e.norm_sqr());
        z += pitch_nm;
    }
    let mut walker = FieldWalker::new(stack, wavelength_nm);
    let mut samples = Vec::new();
    let mut z0 = 0.0;
    for l in &stack.layers {
        walker.sample_layer(l, pitch_nm, z0, &mut samples);
        z0 += l.thickness_nm;
    }
    for (z, v) in samples {
        positions.push(z);
        intensity.push(v);
    }
    FieldProfile { positions_nm: positions, intensity, gap_nm: None }
}

/// The mirror/gap/mirror assembly. The planar mirror is traversed from its
/// substrate (excitation enters through it); the concave mirror sits across the gap.
#[derive(Debug, Clone)]
pub struct CavityAssembly {
    combined: LayerStack,
    gap_span_nm: (f64, f64),
}

impl CavityAssembly {
    /// `planar` and `concave` are given gap-side-first (ambient = gap medium).
    pub fn new(planar: &LayerStack, gap_nm: f64, gap_index: f64, concave: &LayerStack) -> Result<Self, DbrError> {
        if !(gap_nm > 0.0) {
            return Err(DbrError::InvalidStack("gap must be positive".into()));
        }
        let planar_rev = planar.reversed(); // substrate side first
        let mut layers = planar_rev.layers.clone();
        layers.push(Layer { index: gap_index, thickness_nm: gap_nm });
        layers.extend(concave.layers.iter().copied());
        let combined = LayerStack::new(planar_rev.ambient_index, layers, concave.substrate_index)?;
        let z0 = planar_rev.thickness_nm();
        Ok(Self { combined, gap_span_nm: (z0, z0 + gap_nm) })
    }

    pub fn gap_span_nm(&self) -> (f64, f64) {
        self.gap_span_nm
    }

    pub fn transmittance(&self, wavelength_nm: f64) -> f64 {
        self.combined.transmittance(wavelength_nm)
    }

    /// Locate the transmission resonance nearest `center_nm`: 1 pm scan over
    /// ±`window_nm`, then golden-section refinement. Errors when the window
    /// holds no clear peak (contrast < 100× the window median).
    pub fn find_resonance(&self, center_nm: f64, window_nm: f64) -> Result<f64, DbrError> {
        let step = 0.001;
        let n = (2.0 * window_nm / step).ceil() as usize;
        let mut best = (center_nm - window_nm, 0.0);
        let mut values = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let lam = center_nm - window_nm + i as f64 * step;
            let t = self.transmittance(lam);
            values.push(t);
            if t > best.1 {
                best = (lam, t);
            }
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        if best.1 < 100.0 * median.max(1e-300) {
            return Err(DbrError::ResonanceNotFound { center_nm, window_nm });
        }
        Ok(self.refine_peak(best.0 - step, best.0 + step))
    }

    fn refine_peak(&self, mut a: f64, mut b: f64) -> f64 {
        let inv_phi = 0.618_033_988_749_894_9;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.transmittance(c);
        let mut fd = self.transmittance(d);
        for _ in 0..80 {
            if (b - a).abs() < 1e-9 {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.transmittance(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.transmittance(d);
            }
        }
        0.5 * (a + b)
    }

    /// Standing-wave profile through the whole assembly at `wavelength_nm`
    /// (usually a resonance from [`Self::find_resonance`]).
    pub fn field_profile(&self, wavelength_nm: f64, pitch_nm: f64) -> FieldProfile {
        let mut walker = FieldWalker::new(&self.combined, wavelength_nm);
        let mut samples = Vec::new();
        let mut z0 = 0.0;
        for l in &self.combined.layers {
            walker.sample_layer(l, pitch_nm, z0, &mut samples);
            z0 += l.thickness_nm;
        }
        let (positions, intensity) = samples.into_iter().unzip();
        FieldProfile { positions_nm: positions, intensity, gap_nm: Some(self.gap_span_nm) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const LAMBDA0: f64 = 637.0;

    fn concave_stack() -> LayerStack {
        LayerStack::quarter_wave(1.0, 2.10, 1.52, 20, LAMBDA0, QuarterWaveOrder::HighFirst, 1.46).unwrap()
    }

    fn planar_stack() -> LayerStack {
        LayerStack::quarter_wave(1.0, 2.40, 1.52, 8, LAMBDA0, QuarterWaveOrder::LowFirst, 1.46).unwrap()
    }

    #[test]
    fn quarter_wave_thicknesses() {
        let s = concave_stack();
        assert_relative_eq!(s.layers[0].thickness_nm, LAMBDA0 / (4.0 * 2.10), max_relative = 1e-12);
        assert_relative_eq!(s.layers[1].thickness_nm, LAMBDA0 / (4.0 * 1.52), max_relative = 1e-12);
    }

    #[test]
    fn empty_stack_between_identical_media() {
        let s = LayerStack::new(1.0, vec![], 1.0).unwrap();
        let (r, _) = s.reflectivity(LAMBDA0);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fresnel_single_interface() {
        let s = LayerStack::new(1.0, vec![], 1.52).unwrap();
        let (r, _) = s.reflectivity(LAMBDA0);
        assert_abs_diff_eq!(r, (0.52f64 / 2.52).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn zero_thickness_layer_rejected() {
        assert!(LayerStack::new(1.0, vec![Layer { index: 1.5, thickness_nm: 0.0 }], 1.0).is_err());
    }

    #[test]
    fn twenty_pair_mirror_reflectivity() {
        let s = concave_stack();
        let (r, phase) = s.reflectivity(LAMBDA0);
        assert!(r > 0.9999, "R = {r}");
        // closed-form oracle for a (HL)^N quarter-wave stack at design:
        // R = ((ns·X - n0)/(ns·X + n0))² with X = (nH/nL)^(2N)
        let x = (2.10f64 / 1.52).powi(40);
        let oracle = ((1.46 * x - 1.0) / (1.46 * x + 1.0)).powi(2);
        assert_relative_eq!(r, oracle, max_relative = 1e-9);
        // high-index termination puts a node at the surface: phase π
        assert_abs_diff_eq!(phase.abs(), std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn low_first_has_antinode_phase() {
        let (r, phase) = planar_stack().reflectivity(LAMBDA0);
        assert!(r > 0.99, "R = {r}");
        assert_abs_diff_eq!(phase, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn stop_band_matches_analytic_width() {
        let s = concave_stack();
        let (lo, hi) = s.stop_band((500.0, 800.0), 0.99, 0.25).unwrap();
        // analytic half-width (2λ0/π)·asin(Δn/(nH+nL)) = 65.3 nm; the true band
        // is asymmetric in wavelength and a 20-pair stack holds R ≥ 0.99
        // slightly past the ideal edges, so compare within ±10 nm.
        let half = 2.0 * LAMBDA0 / std::f64::consts::PI * (0.58f64 / 3.62).asin();
        assert_abs_diff_eq!(lo, LAMBDA0 - half, epsilon = 10.0);
        assert_abs_diff_eq!(hi, LAMBDA0 + half, epsilon = 10.0);
        // frozen from this implementation at 0.25 nm scan resolution
        assert_abs_diff_eq!(lo, 579.25, epsilon = 0.5);
        assert_abs_diff_eq!(hi, 707.5, epsilon = 0.5);
    }

    #[test]
    fn stop_band_impossible_threshold() {
        let s = concave_stack();
        // a 20-pair stack tops out near 1 - 7e-6
        assert!(s.stop_band((500.0, 800.0), 0.999999999, 0.5).is_none());
        // unity threshold is unreachable for any finite stack
        assert!(s.stop_band((500.0, 800.0), 1.0, 0.5).is_none());
    }

    #[test]
    fn stop_band_grows_with_pairs() {
        let mut prev = 0.0;
        for pairs in [10, 15, 20, 25] {
            let s = LayerStack::quarter_wave(1.0, 2.10, 1.52, pairs, LAMBDA0, QuarterWaveOrder::HighFirst, 1.46)
                .unwrap();
            let (lo, hi) = s.stop_band((500.0, 800.0), 0.99, 0.5).unwrap();
            let width = hi - lo;
            assert!(width >= prev - 1e-9, "width shrank at {pairs} pairs");
            prev = width;
        }
    }

    #[test]
    fn penetration_metal_like_mirror_is_zero() {
        // single interface to a huge index: R → 1 with a constant phase
        let s = LayerStack::new(1.0, vec![], 1e4).unwrap();
        let p = s.penetration_depth_nm(LAMBDA0).unwrap();
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn penetration_quarter_wave_oracle() {
        // hard-mirror approximation λ0/(4Δn) for a high-first stack
        let p = concave_stack().penetration_depth_nm(LAMBDA0).unwrap();
        let oracle = LAMBDA0 / (4.0 * (2.10 - 1.52));
        assert!((p - oracle).abs() / oracle < 0.2, "pen {p} vs oracle {oracle}");
        assert_abs_diff_eq!(p, 274.57, epsilon = 0.5);
    }

    #[test]
    fn penetration_decreases_with_contrast() {
        let low_contrast = concave_stack(); // Δn 0.58
        let high_contrast =
            LayerStack::quarter_wave(1.0, 2.40, 1.52, 20, LAMBDA0, QuarterWaveOrder::HighFirst, 1.46).unwrap(); // Δn 0.88
        let p_low = low_contrast.penetration_depth_nm(LAMBDA0).unwrap();
        let p_high = high_contrast.penetration_depth_nm(LAMBDA0).unwrap();
        assert!(p_high < p_low, "expected {p_high} < {p_low}");
        let oracle = LAMBDA0 / (4.0 * (2.40 - 1.52));
        assert!((p_high - oracle).abs() / oracle < 0.2);
    }

    #[test]
    fn penetration_outside_band_rejected() {
        assert!(matches!(
            concave_stack().penetration_depth_nm(900.0),
            Err(DbrError::OutsideStopBand { .. })
        ));
    }

    #[test]
    fn energy_penetration_agrees_with_phase_penetration() {
        for stack in [concave_stack(), planar_stack()] {
            let p_phase = stack.penetration_depth_nm(LAMBDA0).unwrap();
            let p_energy = stack.energy_penetration_depth_nm(LAMBDA0).unwrap();
            assert_relative_eq!(p_phase, p_energy, max_relative = 0.01);
        }
    }

    #[test]
    fn planar_low_first_penetration_value() {
        // the low-index-terminated mirror penetrates much deeper than λ0/(4Δn)
        let p = planar_stack().penetration_depth_nm(LAMBDA0).unwrap();
        assert_abs_diff_eq!(p, 659.5, epsilon = 2.0);
    }

    fn paper_assembly() -> CavityAssembly {
        CavityAssembly::new(&planar_stack(), 1110.0, 1.0, &concave_stack()).unwrap()
    }

    #[test]
    fn assembly_resonance_and_antinodes() {
        let asm = paper_assembly();
        let res = asm.find_resonance(637.0, 2.0).unwrap();
        assert_abs_diff_eq!(res, 635.5, epsilon = 0.3);
        let profile = asm.field_profile(res, 1.0);
        let gap = asm.gap_span_nm();
        let interior = profile.antinode_count((gap.0 + 20.0, gap.1 - 20.0));
        assert_eq!(interior, 3, "expected 3 interior antinodes");
        // antinode at the low-index-terminated planar surface
        assert!(profile.has_antinode_near(gap.0, 20.0));
    }

    #[test]
    fn off_resonance_rejected() {
        let asm = paper_assembly();
        assert!(matches!(
            asm.find_resonance(660.0, 1.0),
            Err(DbrError::ResonanceNotFound { .. })
        ));
    }

    #[test]
    fn bare_low_index_mirror_has_surface_antinode() {
        let profile = mirror_field_profile(&planar_stack(), LAMBDA0, 1.0, 400.0);
        assert!(profile.has_antinode_near(0.0, 5.0));
    }

    #[test]
    fn ideal_cavity_interior_antinode_count() {
        // Two antinode-terminated mirrors, gap = q·λ/2 → q−1 interior antinodes.
        let mirror = planar_stack();
        for q in [2usize, 3, 4, 5] {
            let gap = q as f64 * LAMBDA0 / 2.0;
            let asm = CavityAssembly::new(&mirror, gap, 1.0, &mirror).unwrap();
            let res = asm.find_resonance(LAMBDA0, 1.5).unwrap();
            assert_abs_diff_eq!(res, LAMBDA0, epsilon = 0.05);
            let g = asm.gap_span_nm();
            let count = asm.field_profile(res, 1.0).antinode_count((g.0 + 30.0, g.1 - 30.0));
            assert_eq!(count, q - 1, "gap of {q} half-waves");
        }
    }

    #[test]
    fn field_sampling_pitch_convergence() {
        let asm = paper_assembly();
        let res = asm.find_resonance(637.0, 2.0).unwrap();
        let gap = asm.gap_span_nm();
        let coarse = asm.field_profile(res, 1.0);
        let fine = asm.field_profile(res, 0.5);
        assert_eq!(
            coarse.antinode_count((gap.0 + 20.0, gap.1 - 20.0)),
            fine.antinode_count((gap.0 + 20.0, gap.1 - 20.0))
        );
        let rel = (coarse.peak_intensity() - fine.peak_intensity()).abs() / fine.peak_intensity();
        assert!(rel < 1e-4, "peak intensity moved by {rel} on refinement");
    }

    #[test]
    fn field_continuity_across_boundaries() {
        // tangential E is continuous: sampled values at each interface agree
        let asm = paper_assembly();
        let res = asm.find_resonance(637.0, 2.0).unwrap();
        let profile = asm.field_profile(res, 1.0);
        let mut by_pos: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
        for (z, v) in profile.positions_nm.iter().zip(&profile.intensity) {
            by_pos.entry((z * 1e6).round() as i64).or_default().push(*v);
        }
        let mut boundary_pairs = 0;
        for (_, vs) in by_pos {
            if vs.len() >= 2 {
                boundary_pairs += 1;
                for pair in vs.windows(2) {
                    assert_abs_diff_eq!(pair[0], pair[1], epsilon = 1e-9 * vs[0].max(1.0));
                }
            }
        }
        assert!(boundary_pairs > 10);
    }

    #[test]
    fn determinant_is_unity() {
        for (n, d, lam) in [(1.52, 104.8, 637.0), (2.4, 66.4, 600.0), (1.0, 1110.0, 660.0)] {
            let det = layer_matrix_determinant(n, d, lam);
            assert_abs_diff_eq!(det.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(det.im, 0.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn energy_conservation(
            n1 in 1.0..3.0f64,
            n2 in 1.0..3.0f64,
            d1 in 20.0..300.0f64,
            d2 in 20.0..300.0f64,
            ns in 1.0..2.5f64,
            lam in 450.0..900.0f64,
        ) {
            let s = LayerStack::new(
                1.0,
                vec![Layer { index: n1, thickness_nm: d1 }, Layer { index: n2, thickness_nm: d2 }],
                ns,
            ).unwrap();
            let (r, _) = s.reflectivity(lam);
            let t = s.transmittance(lam);
            prop_assert!((r + t - 1.0).abs() < 1e-9);
        }

        #[test]
        fn reciprocity(
            n1 in 1.0..3.0f64,
            n2 in 1.0..3.0f64,
            d1 in 20.0..300.0f64,
            d2 in 20.0..300.0f64,
            lam in 450.0..900.0f64,
        ) {
            let s = LayerStack::new(
                1.3,
                vec![Layer { index: n1, thickness_nm: d1 }, Layer { index: n2, thickness_nm: d2 }],
                1.7,
            ).unwrap();
            let (r_fwd, _) = s.reflectivity(lam);
            let (r_bwd, _) = s.reversed().reflectivity(lam);
            prop_assert!((r_fwd - r_bwd).abs() < 1e-9);
        }
    }
}
