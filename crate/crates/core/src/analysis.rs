//! Independent Gaussian demands: closed-form non-shared optimum, an explicit
//! feasible shared configuration, and the capacity gap between the two.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::planner::BatteryConfig;
use crate::reliability::{chernoff_epsilon, DEFAULT_DELTA};
use crate::rng::rng_from;

const MC_BLOCK: usize = 2048;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation (relative error about 1e-9) followed by a
/// Halley correction against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64, AnalysisError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * std::f64::consts::TAU.sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFleetSpec {
    pub n_drivers: usize,
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
}

impl GaussianFleetSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_drivers == 0 {
            return Err(AnalysisError::InvalidParameter(
                "fleet must have at least one driver".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.mu.is_finite() {
            return Err(AnalysisError::InvalidParameter(format!(
                "need finite mu and sigma > 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AnalysisError::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Pooling term of the feasible construction: `c·σ·√N·ln(1/(1−α))`.
    pub fn concentration_margin(&self, c: f64) -> f64 {
        c * self.sigma * (self.n_drivers as f64).sqrt() * (1.0 / (1.0 - self.alpha)).ln()
    }

    /// Expected aggregate shortfall with personal capacity `μ`: `Nσ/√(2π)`.
    pub fn expected_aggregate_shortfall(&self) -> f64 {
        self.n_drivers as f64 * self.sigma * INV_SQRT_2PI
    }
}

/// Non-shared optimum `N·(μ + σ·z_α)`.
pub fn gaussian_nonshared_opt(spec: &GaussianFleetSpec) -> Result<f64, AnalysisError> {
    spec.validate()?;
    Ok(spec.n_drivers as f64 * (spec.mu + spec.sigma * normal_quantile(spec.alpha)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFeasibility {
    pub config: BatteryConfig,
    /// Fraction of Monte Carlo days whose aggregate shortfall fit in the pool.
    pub coverage: f64,
    pub epsilon: f64,
    pub verified: bool,
}

/// Runs `samples` Monte Carlo days and applies `f` to the aggregate
/// shortfall `Σ_i (w_i − μ)_+` of each, in parallel blocks.
fn rectified_sums<T, F>(spec: &GaussianFleetSpec, samples: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(f64) -> T + Sync,
{
    let n_blocks = samples.div_ceil(MC_BLOCK);
    (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng_from(seed, &[spec.n_drivers as u64, b as u64]);
            let len = MC_BLOCK.min(samples - b * MC_BLOCK);
            (0..len)
                .map(|_| {
                    let total: f64 = (0..spec.n_drivers)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (spec.sigma * z).max(0.0)
                        })
                        .sum();
                    f(total)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Monte Carlo mean of the aggregate shortfall when every driver carries `μ`.
pub fn mc_rectified_sum_mean(
    spec: &GaussianFleetSpec,
    samples: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    spec.validate()?;
    if samples == 0 {
        return Err(AnalysisError::InvalidParameter(
            "need at least one sample".into(),
        ));
    }
    let sums = rectified_sums(spec, samples, seed, |s| s);
    Ok(sums.iter().sum::<f64>() / samples as f64)
}

/// Builds `p_i = μ`, `shared = Nσ/√(2π) + c·σ√N·ln(1/(1−α))` and checks by
/// Monte Carlo that the aggregate shortfall fits with frequency `≥ α − ε`.
/// `c` is never adjusted; a failed check is reported through `verified`.
pub fn gaussian_shared_feasible(
    spec: &GaussianFleetSpec,
    c: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<GaussianFeasibility, AnalysisError> {
    spec.validate()?;
    if !(c > 0.0 && c.is_finite()) || mc_samples == 0 {
        return Err(AnalysisError::InvalidParameter(format!(
            "need c > 0 and mc_samples ≥ 1, got c={c} mc_samples={mc_samples}"
        )));
    }
    let shared = spec.expected_aggregate_shortfall() + spec.concentration_margin(c);
    let hits = rectified_sums(spec, mc_samples, seed, |s| s <= shared)
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let coverage = hits as f64 / mc_samples as f64;
    let epsilon = chernoff_epsilon(1, mc_samples, DEFAULT_DELTA);
    Ok(GaussianFeasibility {
        config: BatteryConfig {
            personal: vec![spec.mu; spec.n_drivers],
            shared,
        },
        coverage,
        epsilon,
        verified: coverage >= spec.alpha - epsilon,
    })
}

/// Closed-form gap `N(μ + σz_α) − (Nμ + Nσ/√(2π) + c·σ√N·ln(1/(1−α)))`.
pub fn gaussian_gap(spec: &GaussianFleetSpec, c: f64) -> Result<f64, AnalysisError> {
    let nonshared = gaussian_nonshared_opt(spec)?;
    let shared_total = spec.n_drivers as f64 * spec.mu
        + spec.expected_aggregate_shortfall()
        + spec.concentration_margin(c);
    Ok(nonshared - shared_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianGapConfig {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c: f64,
    pub mc_samples: usize,
}

impl Default for GaussianGapConfig {
    fn default() -> Self {
        Self {
            mu: 10.0,
            sigma: 2.0,
            alpha: 0.9,
            c: 2.0,
            mc_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n_drivers: usize,
    pub gap: f64,
    /// `gap(2N)/gap(N)` from the closed forms.
    pub ratio: f64,
    pub nonshared_total: f64,
    pub shared_total: f64,
    pub coverage: f64,
    pub verified: bool,
}

/// One row per fleet size in `n_values` (which must be ascending).
pub fn gaussian_gap_experiment(
    n_values: &[usize],
    config: &GaussianGapConfig,
    seed: u64,
) -> Result<Vec<GapRow>, AnalysisError> {
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::InvalidParameter(
            "fleet sizes must be non-empty and strictly ascending".into(),
        ));
    }
    n_values
        .iter()
        .map(|&n| {
            let spec = GaussianFleetSpec {
                n_drivers: n,
                mu: config.mu,
                sigma: config.sigma,
                alpha: config.alpha,
            };
            let feasible = gaussian_shared_feasible(&spec, config.c, config.mc_samples, seed)?;
            let gap = gaussian_gap(&spec, config.c)?;
            let doubled = gaussian_gap(
                &GaussianFleetSpec {
                    n_drivers: 2 * n,
                    ..spec
                },
                config.c,
            )?;
            Ok(GapRow {
                n_drivers: n,
                gap,
                ratio: doubled / gap,
                nonshared_total: gaussian_nonshared_opt(&spec)?,
                shared_total: feasible.config.total(),
                coverage: feasible.coverage,
                verified: feasible.verified,
            })
        })
        .collect()
}

pub fn write_gap_csv<W: Write>(rows: &[GapRow], writer: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "n_drivers",
        "gap",
        "ratio",
        "nonshared_total",
        "shared_total",
        "coverage",
        "verified",
    ])?;
    for r in rows {
        w.write_record([
            r.n_drivers.to_string(),
            r.gap.to_string(),
            r.ratio.to_string(),
            r.nonshared_total.to_string(),
            r.shared_total.to_string(),
            r.coverage.to_string(),
            r.verified.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, alpha: f64) -> GaussianFleetSpec {
        GaussianFleetSpec {
            n_drivers: n,
            mu: 10.0,
            sigma: 2.0,
            alpha,
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-8);
        assert!(normal_quantile(0.9).unwrap() < normal_quantile(0.95).unwrap());
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn nonshared_examples() {
        assert!((gaussian_nonshared_opt(&spec(1, 0.5)).unwrap() - 10.0).abs() < 1e-12);
        let v = gaussian_nonshared_opt(&spec(100, 0.975)).unwrap();
        assert!((v - 1391.99).abs() < 0.01);
        let a = gaussian_nonshared_opt(&spec(7, 0.8)).unwrap();
        let b = gaussian_nonshared_opt(&spec(21, 0.8)).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-9);
    }

    #[test]
    fn feasible_shared_example() {
        let f = gaussian_shared_feasible(&spec(100, 0.9), 2.0, 20_000, 3).unwrap();
        assert!((f.config.shared - 171.89).abs() < 0.01);
        assert!(f.verified);
        assert!(f.config.personal.iter().all(|&p| p == 10.0));
    }

    #[test]
    fn vanishing_sigma() {
        let s = GaussianFleetSpec {
            n_drivers: 10,
            mu: 5.0,
            sigma: 1e-6,
            alpha: 0.99,
        };
        let f = gaussian_shared_feasible(&s, 2.0, 5_000, 1).unwrap();
        assert!(f.config.shared < 1e-4);
        assert!(f.verified);
    }

    #[test]
    fn gap_closed_form() {
        let s = spec(100, 0.9);
        let z = normal_quantile(0.9).unwrap();
        let expected = 100.0 * 2.0 * z - 200.0 * INV_SQRT_2PI - 2.0 * 2.0 * 10.0 * 10f64.ln();
        assert!((gaussian_gap(&s, 2.0).unwrap() - expected).abs() < 1e-9);
        assert!(gaussian_gap(&s, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn gap_table_rows() {
        let cfg = GaussianGapConfig {
            mc_samples: 200,
            ..Default::default()
        };
        let rows = gaussian_gap_experiment(&[100], &cfg, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(gaussian_gap_experiment(&[100, 50], &cfg, 0).is_err());
        let mut buf = Vec::new();
        write_gap_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("n_drivers,gap,ratio,"));
    }
}
