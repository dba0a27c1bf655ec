//! Dipole-pair geometry: orientation of the two orthogonal excited-state dipoles
//! from polarisation measurements, thermal branching between them, and the
//! cavity overlap factors ξ = cos²(angle to the mirror plane).
//!
//! Conventions: θ is the polar angle of the defect axis against the cavity
//! optical axis; β is the azimuthal rotation of the dipole pair about that
//! axis; φ angles are measured from the mirror plane (0° = in-plane, maximal
//! coupling). All angles in degrees at the interface, radians internally.

use crate::fit::FitError;
use crate::K_B_MEV_PER_K;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DipoleError {
    #[error("minimum intensity {imin} exceeds maximum {imax}")]
    ExtremaOrder { imin: f64, imax: f64 },
    #[error("intensities must be non-negative with i_max > 0")]
    InvalidExtrema,
    #[error("projection ratio {ratio:.4} outside the attainable interval [{lo:.4}, {hi:.4}] at theta = {theta_deg}°")]
    InfeasibleRatio { ratio: f64, lo: f64, hi: f64, theta_deg: f64 },
    #[error("theta = 0°: the azimuth is unobservable (degenerate geometry)")]
    DegenerateTheta,
    #[error("thermal ratio must be positive")]
    ZeroThermalRatio,
    #[error("temperature must be positive")]
    InvalidTemperature,
    #[error("angle out of range: {0}")]
    AngleRange(String),
    #[error("polarisation scan: {0}")]
    Scan(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Orientation of the orthogonal dipole pair plus the thermal state that sets
/// the branching between the two transitions.
#[derive(Debug, Clone, Copy)]
pub struct DipolePair {
    pub theta_deg: f64,
    pub beta_deg: f64,
    pub delta_e_mev: f64,
    pub temperature_k: f64,
}

impl DipolePair {
    pub fn new(theta_deg: f64, beta_deg: f64, delta_e_mev: f64, temperature_k: f64) -> Result<Self, DipoleError> {
        if !(0.0..=90.0).contains(&theta_deg) || !(0.0..=90.0).contains(&beta_deg) {
            return Err(DipoleError::AngleRange(format!("theta {theta_deg}°, beta {beta_deg}°")));
        }
        if !(temperature_k > 0.0) {
            return Err(DipoleError::InvalidTemperature);
        }
        Ok(Self { theta_deg, beta_deg, delta_e_mev, temperature_k })
    }

    /// Out-of-plane angles (φ_X', φ_Y') of the two rotated dipoles, degrees.
    pub fn out_of_plane_deg(&self) -> (f64, f64) {
        out_of_plane_angles(self.theta_deg, self.beta_deg)
    }

    /// Overlap factors (ξ_X', ξ_Y') = cos²(φ).
    pub fn xi_pair(&self) -> (f64, f64) {
        let (px, py) = self.out_of_plane_deg();
        (xi_overlap(px), xi_overlap(py))
    }

    pub fn thermal_ratio(&self) -> f64 {
        thermal_ratio(self.delta_e_mev, self.temperature_k)
    }

    /// Branching factors (n_X', n_Y') — the thermal populations feeding the
    /// two transitions, normalised to 1.
    pub fn branching(&self) -> (f64, f64) {
        branching_factors(self.thermal_ratio())
    }
}

/// Combined axial-then-polar rotation matrix.
pub fn rotation_matrix(theta_deg: f64, beta_deg: f64) -> [[f64; 3]; 3] {
    let t = theta_deg.to_radians();
    let b = beta_deg.to_radians();
    [
        [b.cos(), -b.sin(), 0.0],
        [t.cos() * b.sin(), t.cos() * b.cos(), -t.sin()],
        [t.sin() * b.sin(), t.sin() * b.cos(), t.cos()],
    ]
}

/// Polar angle from the extrema of the summed polarisation distribution,
/// I_min = I_max cos²θ.
pub fn polar_from_extrema(i_min: f64, i_max: f64) -> Result<f64, DipoleError> {
    if !(i_max > 0.0) || i_min < 0.0 {
        return Err(DipoleError::InvalidExtrema);
    }
    if i_min > i_max {
        return Err(DipoleError::ExtremaOrder { imin: i_min, imax: i_max });
    }
    Ok((i_min / i_max).sqrt().acos().to_degrees())
}

/// Boltzmann population ratio of the upper to lower doublet level.
pub fn thermal_ratio(delta_e_mev: f64, temperature_k: f64) -> f64 {
    (-delta_e_mev / (K_B_MEV_PER_K * temperature_k)).exp()
}

/// Normalised branching factors (n_upper, n_lower) from the population ratio.
pub fn branching_factors(ratio: f64) -> (f64, f64) {
    (ratio / (1.0 + ratio), 1.0 / (1.0 + ratio))
}

/// Strip the thermal weighting from a measured doublet intensity ratio, leaving
/// the purely geometric projection ratio R.
pub fn equivalent_circle_ratio(measured_ratio: f64, thermal_ratio: f64) -> Result<f64, DipoleError> {
    if !(thermal_ratio > 0.0) {
        return Err(DipoleError::ZeroThermalRatio);
    }
    if !(measured_ratio > 0.0) {
        return Err(DipoleError::Scan("measured ratio must be positive".into()));
    }
    Ok(measured_ratio / thermal_ratio)
}

/// Squared in-plane projections of the rotated unit dipoles:
/// X'² = 1 − sin²θ sin²β and Y'² = 1 − sin²θ cos²β.
pub fn projected_intensities(theta_deg: f64, beta_deg: f64) -> (f64, f64) {
    let k = theta_deg.to_radians().sin().powi(2);
    let sb = beta_deg.to_radians().sin().powi(2);
    (1.0 - k * sb, 1.0 - k * (1.0 - sb))
}

/// Solve X'²/Y'² = R for β in [0°, 90°].
pub fn solve_beta(theta_deg: f64, r: f64) -> Result<f64, DipoleError> {
    if theta_deg <= 0.0 {
        return Err(DipoleError::DegenerateTheta);
    }
    if theta_deg >= 90.0 {
        return Err(DipoleError::AngleRange("theta must lie strictly below 90°".into()));
    }
    let k = theta_deg.to_radians().sin().powi(2);
    let lo = 1.0 - k; // cos²θ
    let hi = 1.0 / lo;
    if !(r >= lo && r <= hi) {
        return Err(DipoleError::InfeasibleRatio { ratio: r, lo, hi, theta_deg });
    }
    let s = (1.0 - r * (1.0 - k)) / (k * (1.0 + r));
    Ok(s.clamp(0.0, 1.0).sqrt().asin().to_degrees())
}

/// Out-of-plane angles of the rotated dipoles, degrees from the mirror plane.
pub fn out_of_plane_angles(theta_deg: f64, beta_deg: f64) -> (f64, f64) {
    let (x2, y2) = projected_intensities(theta_deg, beta_deg);
    (x2.sqrt().acos().to_degrees(), y2.sqrt().acos().to_degrees())
}

/// Cavity overlap factor ξ = cos²(φ) for a dipole at angle φ from the mirror plane.
pub fn xi_overlap(phi_deg: f64) -> f64 {
    phi_deg.to_radians().cos().powi(2)
}

/// Full inversion chain from scalar measurements: measured doublet ratio +
/// thermal state + polar angle → β, out-of-plane angles and ξ factors.
#[derive(Debug, Clone, Copy)]
pub struct DipoleSolution {
    pub theta_deg: f64,
    pub beta_deg: f64,
    pub thermal_ratio: f64,
    pub branching: (f64, f64),
    pub projection_ratio: f64,
    pub phi_deg: (f64, f64),
    pub xi: (f64, f64),
}

pub fn solve_orientation(
    theta_deg: f64,
    measured_ratio: f64,
    delta_e_mev: f64,
    temperature_k: f64,
) -> Result<DipoleSolution, DipoleError> {
    if !(temperature_k > 0.0) {
        return Err(DipoleError::InvalidTemperature);
    }
    let tr = thermal_ratio(delta_e_mev, temperature_k);
    let r = equivalent_circle_ratio(measured_ratio, tr)?;
    let beta = solve_beta(theta_deg, r)?;
    let phi = out_of_plane_angles(theta_deg, beta);
    Ok(DipoleSolution {
        theta_deg,
        beta_deg: beta,
        thermal_ratio: tr,
        branching: branching_factors(tr),
        projection_ratio: r,
        phi_deg: phi,
        xi: (xi_overlap(phi.0), xi_overlap(phi.1)),
    })
}

/// One fitted cos² polarisation lobe: I(α) = offset + amplitude·cos²(α − α0).
#[derive(Debug, Clone, Copy)]
pub struct CosSquaredFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase_deg: f64,
}

impl CosSquaredFit {
    pub fn max(&self) -> f64 {
        self.offset + self.amplitude
    }
    pub fn min(&self) -> f64 {
        self.offset
    }
}

/// Fit I(α) = a + b·cos2α + c·sin2α by linear least squares and convert to the
/// cos² form. Closed-form normal equations; no iteration required.
pub fn fit_cos_squared(samples: &[(f64, f64)]) -> Result<CosSquaredFit, DipoleError> {
    if samples.len() < 3 {
        return Err(DipoleError::Scan("need at least 3 polarisation samples".into()));
    }
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(angle_deg, intensity) in samples {
        let a2 = 2.0 * angle_deg.to_radians();
        let row = [1.0, a2.cos(), a2.sin()];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * intensity;
        }
    }
    let sol = solve3(m, rhs).ok_or_else(|| DipoleError::Scan("degenerate scan geometry".into()))?;
    let (a, b, c) = (sol[0], sol[1], sol[2]);
    let amp2 = (b * b + c * c).sqrt();
    let phase = 0.5 * c.atan2(b);
    Ok(CosSquaredFit {
        offset: a - amp2,
        amplitude: 2.0 * amp2,
        phase_deg: phase.to_degrees(),
    })
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Reduction of a polar-plot scan (`angle_deg,intensity_peak2,intensity_peak3`):
/// fits the two cos² lobes and the summed distribution, then extracts θ and the
/// measured doublet ratio from the fitted extrema.
#[derive(Debug, Clone, Copy)]
pub struct PolarScanReduction {
    pub peak2: CosSquaredFit,
    pub peak3: CosSquaredFit,
    pub theta_deg: f64,
    pub measured_ratio: f64,
}

pub fn reduce_polar_scan(samples: &[(f64, f64, f64)]) -> Result<PolarScanReduction, DipoleError> {
    let s2: Vec<(f64, f64)> = samples.iter().map(|&(a, i2, _)| (a, i2)).collect();
    let s3: Vec<(f64, f64)> = samples.iter().map(|&(a, _, i3)| (a, i3)).collect();
    let sum: Vec<(f64, f64)> = samples.iter().map(|&(a, i2, i3)| (a, i2 + i3)).collect();
    let f2 = fit_cos_squared(&s2)?;
    let f3 = fit_cos_squared(&s3)?;
    let fs = fit_cos_squared(&sum)?;
    if !(f3.max() > 0.0) {
        return Err(DipoleError::Scan("peak-3 lobe has no intensity".into()));
    }
    Ok(PolarScanReduction {
        peak2: f2,
        peak3: f3,
        theta_deg: polar_from_extrema(fs.min().max(0.0), fs.max())?,
        measured_ratio: f2.max() / f3.max(),
    })
}

/// Parse `angle_deg,intensity_peak2,intensity_peak3` CSV (header required).
pub fn read_polar_csv(text: &str) -> Result<Vec<(f64, f64, f64)>, DipoleError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| DipoleError::Scan("empty file".into()))?;
    if header.trim() != "angle_deg,intensity_peak2,intensity_peak3" {
        return Err(DipoleError::Scan(format!(
            "expected header 'angle_deg,intensity_peak2,intensity_peak3', got '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DipoleError::Scan(format!("row {}: {e}", i + 2)))?;
        if vals.len() != 3 {
            return Err(DipoleError::Scan(format!("row {}: expected 3 columns", i + 2)));
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn identity_rotation() {
        let a = rotation_matrix(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[i][j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn paper_projection_value() {
        // theta 49°, beta 56.5°: X'² = 1 − sin²θ sin²β ≈ 0.603
        let (x2, _) = projected_intensities(49.0, 56.5);
        assert_abs_diff_eq!(x2, 0.603, epsilon = 0.002);
    }

    #[test]
    fn polar_extrema_examples() {
        assert_abs_diff_eq!(polar_from_extrema(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(polar_from_extrema(0.0, 1.0).unwrap(), 90.0, epsilon = 1e-12);
        let c = 49f64.to_radians().cos().powi(2);
        assert_abs_diff_eq!(polar_from_extrema(c, 1.0).unwrap(), 49.0, epsilon = 1e-9);
        assert!(polar_from_extrema(1.1, 1.0).is_err());
    }

    #[test]
    fn thermal_examples() {
        let r = thermal_ratio(1.5, 77.0);
        assert_abs_diff_eq!(r, 0.798, epsilon = 0.002);
        let (n2, n3) = branching_factors(0.8);
        assert_abs_diff_eq!(n2, 0.444, epsilon = 0.001);
        assert_abs_diff_eq!(n3, 0.556, epsilon = 0.001);
        let (a, b) = branching_factors(thermal_ratio(0.0, 77.0));
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn circle_ratio_examples() {
        assert_abs_diff_eq!(equivalent_circle_ratio(0.58, 0.8).unwrap(), 0.725, epsilon = 1e-12);
        assert_abs_diff_eq!(equivalent_circle_ratio(0.8, 0.8).unwrap(), 1.0, epsilon = 1e-12);
        assert!(equivalent_circle_ratio(0.58, 0.0).is_err());
    }

    #[test]
    fn ratio_round_trip_through_projection() {
        // R → β → forward projection reproduces the measured ratio exactly.
        let theta = 49.0;
        let tr = thermal_ratio(1.5, 77.0);
        let r = equivalent_circle_ratio(0.58, tr).unwrap();
        let beta = solve_beta(theta, r).unwrap();
        let (x2, y2) = projected_intensities(theta, beta);
        let (n2, n3) = branching_factors(tr);
        let measured = (n2 * x2) / (n3 * y2);
        assert_relative_eq!(measured, 0.58, max_relative = 1e-9);
    }

    #[test]
    fn beta_and_angles_at_paper_values() {
        let beta = solve_beta(49.0, 0.73).unwrap();
        assert_abs_diff_eq!(beta, 56.54, epsilon = 0.01);
        let (px, py) = out_of_plane_angles(49.0, beta);
        assert_abs_diff_eq!(px, 39.03, epsilon = 0.01);
        assert_abs_diff_eq!(py, 24.59, epsilon = 0.01);
    }

    #[test]
    fn unit_ratio_gives_symmetric_pair() {
        let beta = solve_beta(49.0, 1.0).unwrap();
        assert_abs_diff_eq!(beta, 45.0, epsilon = 1e-9);
        let (px, py) = out_of_plane_angles(49.0, beta);
        assert_abs_diff_eq!(px, py, epsilon = 1e-9);
    }

    #[test]
    fn brute_force_scan_agrees_with_closed_form() {
        let theta = 49.0;
        let r = 0.73;
        let closed = solve_beta(theta, r).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let mut b = 0.0;
        while b <= 90.0 {
            let (x2, y2) = projected_intensities(theta, b);
            let err = (x2 / y2 - r).abs();
            if err < best.0 {
                best = (err, b);
            }
            b += 0.001;
        }
        assert_abs_diff_eq!(closed, best.1, epsilon = 0.002);
    }

    #[test]
    fn infeasible_ratio_reports_interval() {
        match solve_beta(49.0, 0.1) {
            Err(DipoleError::InfeasibleRatio { lo, hi, .. }) => {
                assert_abs_diff_eq!(lo, 49f64.to_radians().cos().powi(2), epsilon = 1e-12);
                assert_abs_diff_eq!(hi, 1.0 / lo, epsilon = 1e-12);
            }
            other => panic!("expected infeasible-ratio error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_theta_rejected() {
        assert!(matches!(solve_beta(0.0, 1.0), Err(DipoleError::DegenerateTheta)));
    }

    #[test]
    fn xi_values() {
        assert_abs_diff_eq!(xi_overlap(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xi_overlap(90.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xi_overlap(24.6), 0.8267, epsilon = 0.0002);
        assert_abs_diff_eq!(xi_overlap(39.0), 0.6040, epsilon = 0.0002);
    }

    #[test]
    fn full_chain_matches_reported_angles() {
        let sol = solve_orientation(49.0, 0.58, 1.5, 77.0).unwrap();
        assert_abs_diff_eq!(sol.projection_ratio, 0.727, epsilon = 0.002);
        assert_abs_diff_eq!(sol.phi_deg.0, 39.1, epsilon = 0.1);
        assert_abs_diff_eq!(sol.phi_deg.1, 24.49, epsilon = 0.1);
        assert_abs_diff_eq!(sol.branching.0, 0.4437, epsilon = 0.001);
        assert_abs_diff_eq!(sol.branching.1, 0.5563, epsilon = 0.001);
    }

    #[test]
    fn polar_scan_reduction_round_trip() {
        // Forward-simulate the polarisation lobes and invert.
        let theta = 49.0;
        let beta = 56.5;
        let (n2, n3) = branching_factors(thermal_ratio(1.5, 77.0));
        let (x2, y2) = projected_intensities(theta, beta);
        // Plane azimuths of the two projected dipoles.
        let b = beta.to_radians();
        let t = theta.to_radians();
        let ax = (t.cos() * b.sin()).atan2(b.cos());
        let ay = (t.cos() * b.cos()).atan2(-b.sin());
        let samples: Vec<(f64, f64, f64)> = (0..72)
            .map(|i| {
                let alpha = i as f64 * 5.0;
                let ar = alpha.to_radians();
                let i2 = n2 * x2 * (ar - ax).cos().powi(2);
                let i3 = n3 * y2 * (ar - ay).cos().powi(2);
                (alpha, i2, i3)
            })
            .collect();
        let red = reduce_polar_scan(&samples).unwrap();
        assert_abs_diff_eq!(red.measured_ratio, n2 * x2 / (n3 * y2), epsilon = 1e-9);
        // Oracle for the summed lobe: I2+I3 = A + |B| cos(2a - phase), so the
        // extrema are A±|B| and theta follows from the extrema relation.
        let a = 0.5 * (n2 * x2 + n3 * y2);
        let re = 0.5 * (n2 * x2 * (2.0 * ax).cos() + n3 * y2 * (2.0 * ay).cos());
        let im = 0.5 * (n2 * x2 * (2.0 * ax).sin() + n3 * y2 * (2.0 * ay).sin());
        let bmag = (re * re + im * im).sqrt();
        let expected_theta = polar_from_extrema(a - bmag, a + bmag).unwrap();
        assert_abs_diff_eq!(red.theta_deg, expected_theta, epsilon = 1e-6);
    }

    #[test]
    fn polar_csv_parses() {
        let text = "angle_deg,intensity_peak2,intensity_peak3\n0,1.0,0.5\n45,0.8,0.7\n90,0.2,1.0\n";
        let rows = read_polar_csv(text).unwrap();
        assert_eq!(rows.len(), 3);
        assert_abs_diff_eq!(rows[1].2, 0.7, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rotation_is_orthogonal(theta in 0.0..90.0f64, beta in 0.0..90.0f64) {
            let a = rotation_matrix(theta, beta);
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| a[i][k] * a[j][k]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - expected).abs() < 1e-12);
                }
            }
            let det = a[0][0]*(a[1][1]*a[2][2]-a[1][2]*a[2][1])
                - a[0][1]*(a[1][0]*a[2][2]-a[1][2]*a[2][0])
                + a[0][2]*(a[1][0]*a[2][1]-a[1][1]*a[2][0]);
            prop_assert!((det - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotated_dipoles_stay_orthogonal(theta in 0.0..90.0f64, beta in 0.0..90.0f64) {
            let a = rotation_matrix(theta, beta);
            // images of X and Y
            let x = [a[0][0], a[1][0], a[2][0]];
            let y = [a[0][1], a[1][1], a[2][1]];
            let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
            prop_assert!(dot.abs() < 1e-12);
        }

        #[test]
        fn forward_inverse_consistency(theta in 5.0..85.0f64, beta in 0.0..90.0f64) {
            // project, then recover beta from the geometric ratio
            let (x2, y2) = projected_intensities(theta, beta);
            let r = x2 / y2;
            let rec = solve_beta(theta, r).unwrap();
            prop_assert!((rec - beta).abs() < 1e-6, "theta {theta} beta {beta} rec {rec}");
        }

        #[test]
        fn branching_scale_invariance(scale in 0.1..10.0f64, ratio in 0.05..1.0f64) {
            // scaling both intensities leaves the ratio-derived branching untouched
            let measured = 0.58 * scale / scale;
            let r1 = equivalent_circle_ratio(measured, ratio).unwrap();
            let r2 = equivalent_circle_ratio(0.58, ratio).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-12);
        }
    }
}
