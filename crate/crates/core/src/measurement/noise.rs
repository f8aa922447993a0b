//! Binomial shot noise and the doubling/bisection shot calibration.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::completion::SampleSet;
use crate::error::{Error, Result};

/// Estimate of `<Q>` from `m` single-shot outcomes: `k ~ Binomial(m,
/// (1+q)/2)`, returned as `2k/m - 1`. `q` is clamped into `[-1, 1]`.
pub fn simulate_shots<R: Rng + ?Sized>(q_true: f64, m: u64, rng: &mut R) -> f64 {
    assert!(m >= 1, "at least one shot");
    let p = (0.5 * (1.0 + q_true)).clamp(0.0, 1.0);
    let k = Binomial::new(m, p)
        .expect("probability in [0, 1]")
        .sample(rng);
    2.0 * k as f64 / m as f64 - 1.0
}

/// Variance of [`simulate_shots`], `(1 + q)(1 - q)/m`.
pub fn shot_variance(q: f64, m: u64) -> f64 {
    (1.0 + q) * (1.0 - q) / m as f64
}

/// Deterministic generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Element-wise measurement of a plain symmetric matrix: every sampled
/// entry is read as one observable `v / max|M|` with `m` shots and scaled
/// back. Used for synthetic matrices that have no Pauli structure.
pub fn measure_elements(
    matrix: &DMatrix<f64>,
    sample: &SampleSet,
    m: u64,
    seed: u64,
) -> DMatrix<f64> {
    let scale = matrix.amax();
    let d = matrix.nrows();
    let mut out = DMatrix::zeros(d, d);
    if scale == 0.0 {
        return out;
    }
    for &(i, j) in sample.indices() {
        let mut rng = stream_rng(seed, (i * d + j) as u64);
        let v = simulate_shots(matrix[(i, j)] / scale, m, &mut rng) * scale;
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

/// Settings of the shot-count search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub n_trials: usize,
    /// Largest shot count tried per string.
    pub cap: u64,
    /// Bisection steps after the doubling phase.
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_trials: 10,
            cap: 10_000_000_000,
            refine_steps: 1,
            seed: 0,
        }
    }
}

/// Outcome of a shot-count search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    /// Smallest tried shot count meeting the target.
    pub m0: u64,
    /// Every evaluated `(m, mean error)` in evaluation order.
    pub curve: Vec<(u64, f64)>,
}

/// Doubling search on `m` from 1 until `mean_error(m) < eps0`, followed by
/// bisection between the last failing and first passing counts.
pub fn calibrate<F>(mut mean_error: F, eps0: f64, cfg: &CalibrationConfig) -> Result<Calibration>
where
    F: FnMut(u64) -> Result<f64>,
{
    let mut curve = Vec::new();
    let mut m = 1u64;
    let mut fail = 0u64;
    loop {
        let e = mean_error(m)?;
        curve.push((m, e));
        if e < eps0 {
            break;
        }
        fail = m;
        m = m.checked_mul(2).ok_or(Error::BudgetCap(cfg.cap))?;
        if m > cfg.cap {
            return Err(Error::BudgetCap(cfg.cap));
        }
    }
    let mut pass = m;
    for _ in 0..cfg.refine_steps {
        if pass - fail <= 1 {
            break;
        }
        let mid = fail + (pass - fail) / 2;
        let e = mean_error(mid)?;
        curve.push((mid, e));
        if e < eps0 {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(Calibration { m0: pass, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::{sample_uniform, synthetic_low_rank};

    #[test]
    fn endpoints_are_exact() {
        let mut rng = stream_rng(1, 0);
        for m in [1, 7, 1000] {
            assert_eq!(simulate_shots(1.0, m, &mut rng), 1.0);
            assert_eq!(simulate_shots(-1.0, m, &mut rng), -1.0);
        }
        assert_eq!(shot_variance(0.0, 1), 1.0);
    }

    #[test]
    fn variance_matches_binomial_formula() {
        let draws = 100_000;
        for (i, &q) in [0.0, 0.5, -0.5].iter().enumerate() {
            for m in [10u64, 100] {
                let mut rng = stream_rng(7, (i * 1000) as u64 + m);
                let xs: Vec<f64> = (0..draws).map(|_| simulate_shots(q, m, &mut rng)).collect();
                let mean = xs.iter().sum::<f64>() / draws as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
                let expected = shot_variance(q, m);
                assert!(
                    (var / expected - 1.0).abs() < 0.05,
                    "q {q} m {m}: {var} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn element_noise_shrinks_with_shots() {
        let m = synthetic_low_rank(12, 2, 3);
        let s = sample_uniform(12, 78, 1).unwrap();
        let err = |shots| (measure_elements(&m, &s, shots, 5) - &m).norm() / m.norm();
        assert!(err(100) > err(10_000));
        let exact = measure_elements(&m, &s, 1, 5);
        assert!(exact
            .iter()
            .zip(m.iter())
            .all(|(a, b)| a.abs() <= m.amax() + 1e-15 && b.is_finite()));
    }

    #[test]
    fn calibration_doubles_then_bisects() {
        // error 10/sqrt(m): passes 0.5 first at m = 512 by doubling, the
        // exact threshold is 400
        let cfg = CalibrationConfig {
            refine_steps: 20,
            ..Default::default()
        };
        let cal = calibrate(|m| Ok(10.0 / (m as f64).sqrt()), 0.5, &cfg).unwrap();
        assert_eq!(cal.m0, 401);
        let cal = calibrate(
            |m| Ok(10.0 / (m as f64).sqrt()),
            0.5,
            &CalibrationConfig::default(),
        )
        .unwrap();
        assert_eq!(cal.m0, 512);
        let loose = calibrate(|_| Ok(0.1), 1.0, &cfg).unwrap();
        assert_eq!(loose.m0, 1);
        let capped = calibrate(|_| Ok(1.0), 0.5, &CalibrationConfig { cap: 64, ..cfg });
        assert!(matches!(capped, Err(Error::BudgetCap(64))));
    }
}
