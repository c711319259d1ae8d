use rand::Rng as _;

use super::{key_matrix, stability_verdict, LinearMrp, Verdict};
use crate::envs::{mrp_matrices, MrpSpec};
use crate::{Error, Result, Rng};

/// The two-state MRP with sampling distribution `(d₁, 1 − d₁)`.
pub fn two_state_mrp(d1: f64, p: f64, discount: f64) -> Result<LinearMrp> {
    if !(0.0..=1.0).contains(&d1) {
        return Err(Error::InvalidArgument(format!("d1 = {d1} outside [0, 1]")));
    }
    let spec = MrpSpec::new(p, discount)?;
    let (dynamics, features) = mrp_matrices(&spec);
    LinearMrp::new(features, dynamics, vec![d1, 1.0 - d1], discount, vec![0.0, 0.0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub d1: f64,
    pub p: f64,
    pub a: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct RegionSweep {
    pub discount: f64,
    pub step_size: f64,
    pub d1_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Row-major over `(d1, p)`: index `i * p_values.len() + j`.
    pub cells: Vec<RegionCell>,
}

impl RegionSweep {
    pub fn cell(&self, i: usize, j: usize) -> &RegionCell {
        &self.cells[i * self.p_values.len() + j]
    }

    pub fn divergent_count(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict.is_divergent()).count()
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Stability verdict for every `(d₁, p)` on a uniform grid over `[0, 1]²`.
pub fn divergence_region_sweep(
    discount: f64,
    step_size: f64,
    d1_resolution: usize,
    p_resolution: usize,
) -> Result<RegionSweep> {
    if d1_resolution < 2 || p_resolution < 2 {
        return Err(Error::InvalidArgument("grid resolutions must be at least 2".into()));
    }
    let d1_values = grid(d1_resolution);
    let p_values = grid(p_resolution);
    let mut cells = Vec::with_capacity(d1_resolution * p_resolution);
    for &d1 in &d1_values {
        for &p in &p_values {
            let (a, _) = key_matrix(&two_state_mrp(d1, p, discount)?)?;
            let report = stability_verdict(&a, step_size)?;
            cells.push(RegionCell {
                d1,
                p,
                a: a[(0, 0)],
                verdict: report.verdict,
            });
        }
    }
    Ok(RegionSweep {
        discount,
        step_size,
        d1_values,
        p_values,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodPoint {
    pub samples: usize,
    pub trials: usize,
    pub divergent_trials: usize,
}

impl LikelihoodPoint {
    pub fn likelihood(&self) -> f64 {
        self.divergent_trials as f64 / self.trials as f64
    }

    /// Binomial standard error of [`LikelihoodPoint::likelihood`].
    pub fn std_error(&self) -> f64 {
        let q = self.likelihood();
        (q * (1.0 - q) / self.trials as f64).sqrt()
    }
}

/// Fraction of trials in which a sampling distribution estimated from `N`
/// i.i.d. draws of the stationary chain, combined with the true dynamics,
/// gives a divergent expected TD update.
pub fn empirical_divergence_likelihood(
    p: f64,
    discount: f64,
    step_size: f64,
    sample_sizes: &[usize],
    trials: usize,
    rng: &mut Rng,
) -> Result<Vec<LikelihoodPoint>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if sample_sizes.contains(&0) {
        return Err(Error::InvalidArgument("sample sizes must be positive".into()));
    }
    let stationary_first = MrpSpec::new(p, discount)?.stationary_distribution()[0];
    sample_sizes
        .iter()
        .map(|&n| {
            let mut divergent = 0;
            for _ in 0..trials {
                let k = (0..n).filter(|_| rng.random::<f64>() < stationary_first).count();
                let d1 = k as f64 / n as f64;
                let (a, _) = key_matrix(&two_state_mrp(d1, p, discount)?)?;
                if stability_verdict(&a, step_size)?.verdict.is_divergent() {
                    divergent += 1;
                }
            }
            Ok(LikelihoodPoint {
                samples: n,
                trials,
                divergent_trials: divergent,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_must_be_two() {
        assert!(divergence_region_sweep(0.99, 0.01, 1, 5).is_err());
    }

    #[test]
    fn small_sweep_corners() {
        let s = divergence_region_sweep(0.99, 0.01, 3, 3).unwrap();
        // d1 = 1, p = 0 is the divergent corner
        assert_eq!(s.cell(2, 0).verdict, Verdict::Divergent);
        assert!((s.cell(2, 0).a + 0.98).abs() < 1e-12);
        // d1 = 0 is never divergent
        assert!((0..3).all(|j| !s.cell(0, j).verdict.is_divergent()));
    }

    #[test]
    fn likelihood_rejects_zero_trials() {
        let mut rng = crate::rng_from_seed(0);
        assert!(empirical_divergence_likelihood(0.5, 0.99, 0.01, &[1], 0, &mut rng).is_err());
    }
}
