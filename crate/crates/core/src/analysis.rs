//! Experimental-data reductions: saturation-curve fitting, exponential lifetime
//! fitting with rate-change arithmetic, and photon-correlation background
//! correction with the single-emitter fraction.

use crate::fit::{self, FitError, LeastSquares};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("fitted lifetime is not positive ({0} ns)")]
    NonPositiveTau(f64),
    #[error("domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Saturation fit I = I_sat·P/(P_sat + P).
#[derive(Debug, Clone, Copy)]
pub struct SaturationFit {
    pub i_sat: f64,
    pub p_sat_mw: f64,
    /// rms residual in counts/s.
    pub residual_rms: f64,
    pub i_sat_err: f64,
    pub p_sat_err: f64,
}

struct SaturationModel<'a> {
    data: &'a [(f64, f64)],
}

impl LeastSquares for SaturationModel<'_> {
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.data
            .iter()
            .map(|&(pw, i)| p[0] * pw / (p[1] + pw) - i)
            .collect()
    }
    fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.data
            .iter()
            .map(|&(pw, _)| {
                let denom = p[1] + pw;
                vec![pw / denom, -p[0] * pw / (denom * denom)]
            })
            .collect()
    }
}

/// Fit the saturation function to (power mW, intensity counts/s) data.
pub fn fit_saturation(data: &[(f64, f64)]) -> Result<SaturationFit, AnalysisError> {
    if data.len() < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: data.len() });
    }
    let mut powers: Vec<f64> = data.iter().map(|d| d.0).collect();
    powers.sort_by(|a, b| a.total_cmp(b));
    if powers[0] <= 0.0 {
        return Err(AnalysisError::Domain("powers must be positive".into()));
    }
    if powers.windows(2).any(|w| w[1] == w[0]) {
        return Err(AnalysisError::Domain("powers must be distinct".into()));
    }
    let i_max = data.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    if i_max <= 0.0 {
        return Err(AnalysisError::Degenerate("all intensities are zero".into()));
    }
    let p_median = powers[powers.len() / 2];
    let model = SaturationModel { data };
    let out = fit::levenberg_marquardt(&model, &[i_max, p_median])?;
    let n = data.len() as f64;
    Ok(SaturationFit {
        i_sat: out.params[0],
        p_sat_mw: out.params[1],
        residual_rms: out.residual_norm / n.sqrt(),
        i_sat_err: out.param_errors[0],
        p_sat_err: out.param_errors[1],
    })
}

/// Exponential decay fit I = A·exp(−t/τ) (+ baseline when flagged).
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub tau_ns: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub residual_rms: f64,
    pub tau_err_ns: f64,
}

struct DecayModel<'a> {
    data: &'a [(f64, f64)],
    with_baseline: bool,
}

impl LeastSquares for DecayModel<'_> {
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        let b = if self.with_baseline { p[2] } else { 0.0 };
        self.data
            .iter()
            .map(|&(t, y)| p[0] * (-t / p[1]).exp() + b - y)
            .collect()
    }
    fn jacobian(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.data
            .iter()
            .map(|&(t, _)| {
                let e = (-t / p[1]).exp();
                let mut row = vec![e, p[0] * t * e / (p[1] * p[1])];
                if self.with_baseline {
                    row.push(1.0);
                }
                row
            })
            .collect()
    }
}

/// Fit a (baseline-)exponential to (t ns, counts) data (ascending t).
pub fn fit_exponential(data: &[(f64, f64)], with_baseline: bool) -> Result<DecayFit, AnalysisError> {
    if data.len() < 4 {
        return Err(AnalysisError::TooFewPoints { needed: 4, got: data.len() });
    }
    if data.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(AnalysisError::Domain("times must ascend".into()));
    }
    let baseline0 = if with_baseline {
        data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min).max(0.0)
    } else {
        0.0
    };
    // log-linear initialisation on the early (upper) half of the decay
    let t_mid = 0.5 * (data[0].0 + data[data.len() - 1].0);
    let upper: Vec<(f64, f64)> = data
        .iter()
        .filter(|&&(t, y)| t <= t_mid && y - baseline0 > 0.0)
        .map(|&(t, y)| (t, (y - baseline0).ln()))
        .collect();
    if upper.len() < 2 {
        return Err(AnalysisError::Degenerate("too few positive counts for initialisation".into()));
    }
    let n = upper.len() as f64;
    let sx: f64 = upper.iter().map(|p| p.0).sum();
    let sy: f64 = upper.iter().map(|p| p.1).sum();
    let sxx: f64 = upper.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = upper.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(AnalysisError::Degenerate("times are collinear".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    if slope.abs() < 1e-12 {
        return Err(AnalysisError::Degenerate("counts show no decay trend".into()));
    }
    // Rising data initialises with a negative constant; the sign check on the
    // fitted lifetime below then reports it.
    let tau0 = -1.0 / slope;
    let a0 = intercept.exp();

    let model = DecayModel { data, with_baseline };
    let mut p0 = vec![a0, tau0];
    if with_baseline {
        p0.push(baseline0);
    }
    let out = fit::levenberg_marquardt(&model, &p0)?;
    let tau = out.params[1];
    if !(tau > 0.0) {
        return Err(AnalysisError::NonPositiveTau(tau));
    }
    Ok(DecayFit {
        tau_ns: tau,
        amplitude: out.params[0],
        baseline: if with_baseline { out.params[2] } else { 0.0 },
        residual_rms: out.residual_norm / (data.len() as f64).sqrt(),
        tau_err_ns: out.param_errors[1],
    })
}

/// Percent increase of the emission rate between two lifetimes:
/// (τ_out/τ_in − 1)·100.
pub fn rate_change_percent(tau_out_ns: f64, tau_in_ns: f64) -> f64 {
    (tau_out_ns / tau_in_ns - 1.0) * 100.0
}

/// Background-corrected zero-delay correlation. A corrected value below zero
/// (over-subtraction) is reported as-is with the flag set, never clamped.
#[derive(Debug, Clone, Copy)]
pub struct G2Correction {
    pub corrected: f64,
    pub over_subtracted: bool,
}

/// g²(0) corrected for uncorrelated background: (g² − (1 − ρ²))/ρ², where ρ is
/// the signal fraction of the total counts.
pub fn g2_background_correct(g2_raw: f64, rho: f64) -> Result<G2Correction, AnalysisError> {
    if g2_raw < 0.0 {
        return Err(AnalysisError::Domain(format!("g2 must be non-negative, got {g2_raw}")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(AnalysisError::Domain(format!("signal fraction {rho} outside (0, 1]")));
    }
    let corrected = (g2_raw - (1.0 - rho * rho)) / (rho * rho);
    Ok(G2Correction { corrected, over_subtracted: corrected < 0.0 })
}

/// Inverse of [`g2_background_correct`].
pub fn g2_background_uncorrect(g2_corrected: f64, rho: f64) -> Result<f64, AnalysisError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(AnalysisError::Domain(format!("signal fraction {rho} outside (0, 1]")));
    }
    Ok(g2_corrected * rho * rho + (1.0 - rho * rho))
}

/// Fraction of the fluorescence attributable to a single emitter,
/// sqrt(1 − g²) for g² in [0, 1].
pub fn single_emitter_fraction(g2: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&g2) {
        return Err(AnalysisError::Domain(format!(
            "antibunching formula needs g2 in [0, 1], got {g2}"
        )));
    }
    Ok((1.0 - g2).sqrt())
}

/// Parse `power_mW,counts_per_s` CSV (header required).
pub fn read_saturation_csv(text: &str) -> Result<Vec<(f64, f64)>, AnalysisError> {
    read_two_column(text, "power_mW,counts_per_s")
}

/// Parse `t_ns,counts` CSV (header required).
pub fn read_decay_csv(text: &str) -> Result<Vec<(f64, f64)>, AnalysisError> {
    read_two_column(text, "t_ns,counts")
}

fn read_two_column(text: &str, expected_header: &str) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AnalysisError::Domain("empty file".into()))?;
    if header.trim() != expected_header {
        return Err(AnalysisError::Domain(format!(
            "expected header '{expected_header}', got '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a: f64 = parts
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| AnalysisError::Domain(format!("row {}: bad first column", i + 2)))?;
        let b: f64 = parts
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| AnalysisError::Domain(format!("row {}: bad second column", i + 2)))?;
        rows.push((a, b));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn saturation_data(i_sat: f64, p_sat: f64) -> Vec<(f64, f64)> {
        (1..=20)
            .map(|k| {
                let p = 0.2 * k as f64;
                (p, i_sat * p / (p_sat + p))
            })
            .collect()
    }

    #[test]
    fn saturation_round_trip_cavity_values() {
        let data = saturation_data(15_100.0, 1.89);
        let fit = fit_saturation(&data).unwrap();
        assert_relative_eq!(fit.i_sat, 15_100.0, max_relative = 1e-6);
        assert_relative_eq!(fit.p_sat_mw, 1.89, max_relative = 1e-6);
        assert!(fit.residual_rms < 1e-6 * 15_100.0);
    }

    #[test]
    fn saturation_round_trip_free_space_values() {
        let data = saturation_data(154_000.0, 1.02);
        let fit = fit_saturation(&data).unwrap();
        assert_relative_eq!(fit.i_sat, 154_000.0, max_relative = 1e-6);
        assert_relative_eq!(fit.p_sat_mw, 1.02, max_relative = 1e-6);
    }

    #[test]
    fn saturation_half_intensity_at_p_sat() {
        let (i_sat, p_sat) = (1000.0, 1.5);
        let i_at = i_sat * p_sat / (p_sat + p_sat);
        assert_relative_eq!(i_at, i_sat / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn saturation_local_optimality_on_coarse_grid() {
        // residual at the optimum is no worse than any point of a 50×50 grid around it
        let truth = (15_100.0, 1.89);
        let data = saturation_data(truth.0, truth.1);
        let fit = fit_saturation(&data).unwrap();
        let cost = |i_sat: f64, p_sat: f64| -> f64 {
            data.iter()
                .map(|&(p, y)| {
                    let r = i_sat * p / (p_sat + p) - y;
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        };
        let best = cost(fit.i_sat, fit.p_sat_mw);
        for a in 0..50 {
            for b in 0..50 {
                let i_s = fit.i_sat * (0.5 + a as f64 / 49.0);
                let p_s = fit.p_sat_mw * (0.5 + b as f64 / 49.0);
                assert!(cost(i_s, p_s) + 1e-12 >= best);
            }
        }
    }

    #[test]
    fn saturation_degenerate_inputs() {
        assert!(matches!(
            fit_saturation(&[(1.0, 2.0), (2.0, 3.0)]),
            Err(AnalysisError::TooFewPoints { .. })
        ));
        let zeros = vec![(0.5, 0.0), (1.0, 0.0), (2.0, 0.0)];
        assert!(matches!(fit_saturation(&zeros), Err(AnalysisError::Degenerate(_))));
        let dup = vec![(1.0, 5.0), (1.0, 6.0), (2.0, 8.0)];
        assert!(fit_saturation(&dup).is_err());
    }

    #[test]
    fn exponential_round_trip() {
        let data: Vec<(f64, f64)> = (0..60)
            .map(|k| {
                let t = k as f64;
                (t, 5000.0 * (-t / 25.0f64).exp())
            })
            .collect();
        let fit = fit_exponential(&data, false).unwrap();
        assert_relative_eq!(fit.tau_ns, 25.0, max_relative = 1e-9);
        assert_relative_eq!(fit.amplitude, 5000.0, max_relative = 1e-9);
    }

    #[test]
    fn exponential_with_baseline() {
        let data: Vec<(f64, f64)> = (0..80)
            .map(|k| {
                let t = k as f64;
                (t, 3000.0 * (-t / 22.1f64).exp() + 40.0)
            })
            .collect();
        let fit = fit_exponential(&data, true).unwrap();
        assert_relative_eq!(fit.tau_ns, 22.1, max_relative = 1e-6);
        assert_relative_eq!(fit.baseline, 40.0, max_relative = 1e-4);
    }

    #[test]
    fn exponential_rejects_bad_input() {
        let too_few = vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.2)];
        assert!(matches!(
            fit_exponential(&too_few, false),
            Err(AnalysisError::TooFewPoints { .. })
        ));
        let unsorted = vec![(0.0, 1.0), (2.0, 0.5), (1.0, 0.2), (3.0, 0.1)];
        assert!(fit_exponential(&unsorted, false).is_err());
        // rising data has no positive decay constant
        let rising: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, (k as f64 / 3.0).exp())).collect();
        assert!(fit_exponential(&rising, false).is_err());
    }

    #[test]
    fn rate_change_reference_values() {
        assert_abs_diff_eq!(rate_change_percent(30.8, 22.1), 39.4, epsilon = 0.05);
    }

    #[test]
    fn g2_corrections() {
        // identity at rho = 1
        let c = g2_background_correct(0.38, 1.0).unwrap();
        assert_abs_diff_eq!(c.corrected, 0.38, epsilon = 1e-15);
        assert!(!c.over_subtracted);
        // the reference chain: raw 0.38 → 0.05 at the implied signal fraction
        let rho = (0.62f64 / 0.95).sqrt();
        let c = g2_background_correct(0.38, rho).unwrap();
        assert_abs_diff_eq!(c.corrected, 0.05, epsilon = 1e-12);
        // over-subtraction flagged, not clamped
        let c = g2_background_correct(0.1, 0.5).unwrap();
        assert!(c.over_subtracted && c.corrected < 0.0);
    }

    #[test]
    fn single_emitter_fraction_values() {
        assert_abs_diff_eq!(single_emitter_fraction(0.05).unwrap(), 0.9747, epsilon = 0.0001);
        assert_abs_diff_eq!(single_emitter_fraction(0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(single_emitter_fraction(1.2).is_err());
    }

    #[test]
    fn csv_parsers() {
        let sat = read_saturation_csv("power_mW,counts_per_s\n0.5,100\n1.0,180\n").unwrap();
        assert_eq!(sat.len(), 2);
        let dec = read_decay_csv("t_ns,counts\n0,1000\n1,900\n").unwrap();
        assert_eq!(dec.len(), 2);
        assert!(read_saturation_csv("t_ns,counts\n0,1\n").is_err());
    }

    proptest! {
        #[test]
        fn rate_change_antisymmetry(a in 1.0..100.0f64, b in 1.0..100.0f64) {
            let r_ab = rate_change_percent(a, b);
            let r_ba = rate_change_percent(b, a);
            prop_assert!(((1.0 + r_ab / 100.0) * (1.0 + r_ba / 100.0) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn g2_correct_uncorrect_identity(g2 in 0.0..1.0f64, rho in 0.05..1.0f64) {
            let c = g2_background_correct(g2, rho).unwrap();
            let back = g2_background_uncorrect(c.corrected, rho).unwrap();
            prop_assert!((back - g2).abs() < 1e-12);
        }

        #[test]
        fn saturation_noiseless_residual_is_zero(
            i_sat in 100.0..1e6f64,
            p_sat in 0.05..20.0f64,
        ) {
            let data = saturation_data(i_sat, p_sat);
            let fit = fit_saturation(&data).unwrap();
            prop_assert!(fit.residual_rms <= 1e-9 * i_sat.max(1.0));
        }
    }
}
