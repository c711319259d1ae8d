//! Expected linear TD analysis.
//!
//! For features `X`, column-stochastic dynamics `P`, sampling distribution
//! `D` and discount `γ`, the expected TD(0) update is
//! `w ← (I − αA)w + αb` with `A = XᵀD(I − γPᵀ)X` and `b = XᵀD r̄`.
//! The update is stable when the symmetric part of `A` is positive
//! semi-definite and `ρ(I − αA) ≤ 1`.

mod lstd;
mod sweep;

pub use lstd::{fit_and_solve_linear_model, lstd_solve, DEFAULT_RIDGE};
pub use sweep::{
    divergence_region_sweep, empirical_divergence_likelihood, two_state_mrp, LikelihoodPoint,
    RegionCell, RegionSweep,
};

use crate::linalg::Matrix;
use crate::{Error, Result, Transition};

/// Eigenvalue tolerance for definiteness and spectral-radius comparisons.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const BLOW_UP_THRESHOLD: f64 = 1e6;
pub const ITERATION_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LinearMrp {
    features: Matrix,
    dynamics: Matrix,
    sampling: Vec<f64>,
    discount: f64,
    rewards: Vec<f64>,
}

impl LinearMrp {
    /// `features` has one row per state; `dynamics` is `[P]ᵢⱼ = Pr(i | j)`.
    pub fn new(
        features: Matrix,
        dynamics: Matrix,
        sampling: Vec<f64>,
        discount: f64,
        rewards: Vec<f64>,
    ) -> Result<LinearMrp> {
        let n = features.rows();
        if dynamics.rows() != n || dynamics.cols() != n || sampling.len() != n || rewards.len() != n
        {
            return Err(Error::Shape(format!(
                "{n} feature rows, {}x{} dynamics, {} sampling weights, {} rewards",
                dynamics.rows(),
                dynamics.cols(),
                sampling.len(),
                rewards.len()
            )));
        }
        for j in 0..n {
            let col: f64 = (0..n).map(|i| dynamics[(i, j)]).sum();
            if (col - 1.0).abs() > 1e-9 || (0..n).any(|i| dynamics[(i, j)] < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "dynamics column {j} is not a distribution (sums to {col})"
                )));
            }
        }
        let total: f64 = sampling.iter().sum();
        if sampling.iter().any(|&d| d < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "sampling weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!("discount {discount} outside [0, 1]")));
        }
        Ok(LinearMrp {
            features,
            dynamics,
            sampling,
            discount,
            rewards,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn dynamics(&self) -> &Matrix {
        &self.dynamics
    }

    pub fn sampling(&self) -> &[f64] {
        &self.sampling
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Same sampling distribution and features, different dynamics: the
    /// setting of planning with a learnt model from replayed states.
    pub fn with_dynamics(&self, dynamics: Matrix) -> Result<LinearMrp> {
        LinearMrp::new(
            self.features.clone(),
            dynamics,
            self.sampling.clone(),
            self.discount,
            self.rewards.clone(),
        )
    }
}

/// `A = XᵀD(I − γPᵀ)X` and `b = XᵀD r̄`.
pub fn key_matrix(m: &LinearMrp) -> Result<(Matrix, Vec<f64>)> {
    let n = m.features.rows();
    let d = Matrix::from_diagonal(&m.sampling);
    let xt_d = m.features.transpose().matmul(&d)?;
    let inner = Matrix::identity(n).sub(&m.dynamics.transpose().scale(m.discount))?;
    let a = xt_d.matmul(&inner)?.matmul(&m.features)?;
    let b = xt_d.matvec(&m.rewards)?;
    Ok((a, b))
}

/// Sample-average route to the same quantities:
/// `A = (1/N) Σ x(s)(x(s) − γₜ x(s′))ᵀ`, `b = (1/N) Σ r x(s)`.
pub fn sample_key_matrix(
    transitions: &[Transition],
    features: impl Fn(usize) -> Vec<f64>,
) -> Result<(Matrix, Vec<f64>)> {
    if transitions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let k = features(transitions[0].state).len();
    let mut a = Matrix::zeros(k, k);
    let mut b = vec![0.0; k];
    for t in transitions {
        let x = features(t.state);
        let x_next = features(t.next_state);
        if x.len() != k || x_next.len() != k {
            return Err(Error::Shape("feature vectors of differing length".into()));
        }
        for i in 0..k {
            b[i] += t.reward * x[i];
            for j in 0..k {
                a[(i, j)] += x[i] * (x[j] - t.discount * x_next[j]);
            }
        }
    }
    let n = transitions.len() as f64;
    Ok((a.scale(1.0 / n), b.iter().map(|v| v / n).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    /// Not divergent, but singular or on the unit circle within tolerance.
    Marginal,
    Divergent,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Divergent => "divergent",
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Verdict::Divergent)
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub a: Matrix,
    pub min_symmetric_eigenvalue: f64,
    pub step_size: f64,
    /// `ρ(I − αA)`.
    pub update_spectral_radius: f64,
    pub verdict: Verdict,
}

pub fn stability_verdict(a: &Matrix, step_size: f64) -> Result<StabilityReport> {
    if !a.is_square() {
        return Err(Error::Shape(format!("{}x{} key matrix", a.rows(), a.cols())));
    }
    if step_size <= 0.0 || !step_size.is_finite() {
        return Err(Error::InvalidArgument(format!("step size {step_size} must be positive")));
    }
    let n = a.rows();
    let min_eig = a
        .symmetric_part()?
        .symmetric_eigenvalues()?
        .first()
        .copied()
        .unwrap_or(0.0);
    let update = Matrix::identity(n).sub(&a.scale(step_size))?;
    let rho = update.spectral_radius()?;
    let divergent = min_eig < -EIGEN_TOLERANCE || rho > 1.0 + EIGEN_TOLERANCE;
    let verdict = if divergent {
        Verdict::Divergent
    } else if min_eig.abs() <= EIGEN_TOLERANCE || (rho - 1.0).abs() <= EIGEN_TOLERANCE {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };
    Ok(StabilityReport {
        a: a.clone(),
        min_symmetric_eigenvalue: min_eig,
        step_size,
        update_spectral_radius: rho,
        verdict,
    })
}

#[derive(Debug, Clone)]
pub struct TdTrajectory {
    /// `w₀, w₁, …` up to the last iterate computed.
    pub weights: Vec<Vec<f64>>,
    pub diverged: bool,
}

/// Summary of an expected-TD run without the per-step record.
#[derive(Debug, Clone)]
pub struct TdOutcome {
    pub steps_run: usize,
    pub diverged: bool,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub final_weights: Vec<f64>,
}

impl TdOutcome {
    /// True if the iterate blew up or ended farther from the origin than it
    /// started. With `b = 0` this is exactly `ρ(I − αA) > 1` along `w₀`.
    pub fn expanding(&self) -> bool {
        self.diverged || self.final_norm > self.initial_norm
    }
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn run_expected_td(
    a: &Matrix,
    b: &[f64],
    w0: &[f64],
    step_size: f64,
    steps: usize,
    threshold: f64,
    mut observe: impl FnMut(&[f64]),
) -> Result<TdOutcome> {
    let k = a.rows();
    if !a.is_square() || b.len() != k || w0.len() != k {
        return Err(Error::Shape(format!(
            "{}x{} A, b of length {}, w0 of length {}",
            a.rows(),
            a.cols(),
            b.len(),
            w0.len()
        )));
    }
    if step_size <= 0.0 {
        return Err(Error::InvalidArgument(format!("step size {step_size} must be positive")));
    }
    let mut w = w0.to_vec();
    let mut next = vec![0.0; k];
    observe(&w);
    let mut steps_run = 0;
    let mut diverged = false;
    while steps_run < steps {
        for i in 0..k {
            let aw: f64 = a.row(i).iter().zip(&w).map(|(x, y)| x * y).sum();
            next[i] = w[i] - step_size * (aw - b[i]);
        }
        std::mem::swap(&mut w, &mut next);
        steps_run += 1;
        observe(&w);
        let n = norm(&w);
        if n > threshold || !n.is_finite() {
            diverged = true;
            break;
        }
    }
    Ok(TdOutcome {
        steps_run,
        diverged,
        initial_norm: norm(w0),
        final_norm: norm(&w),
        final_weights: w,
    })
}

/// Iterates `w ← w − α(Aw − b)` for up to `steps` steps, stopping early once
/// `‖w‖` exceeds `threshold`.
pub fn iterate_expected_td(
    a: &Matrix,
    b: &[f64],
    w0: &[f64],
    step_size: f64,
    steps: usize,
    threshold: f64,
) -> Result<TdTrajectory> {
    let mut weights = Vec::new();
    let outcome = run_expected_td(a, b, w0, step_size, steps, threshold, |w| {
        weights.push(w.to_vec())
    })?;
    Ok(TdTrajectory {
        weights,
        diverged: outcome.diverged,
    })
}

/// As [`iterate_expected_td`] but only keeps the end state.
pub fn expected_td_outcome(
    a: &Matrix,
    b: &[f64],
    w0: &[f64],
    step_size: f64,
    steps: usize,
    threshold: f64,
) -> Result<TdOutcome> {
    run_expected_td(a, b, w0, step_size, steps, threshold, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[vec![v]]).unwrap()
    }

    #[test]
    fn identity_is_stable() {
        let r = stability_verdict(&Matrix::identity(3), 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Stable);
        assert!((r.update_spectral_radius - 0.9).abs() < 1e-14);
    }

    #[test]
    fn negative_scalar_diverges_for_any_step() {
        for alpha in [1e-4, 0.01, 0.1, 1.0] {
            let r = stability_verdict(&scalar(-0.98), alpha).unwrap();
            assert_eq!(r.verdict, Verdict::Divergent);
            assert!((r.update_spectral_radius - (1.0 + 0.98 * alpha)).abs() < 1e-14);
        }
    }

    #[test]
    fn psd_but_large_step_is_divergent() {
        // ρ(I − αA) = |1 − 3| = 2
        let r = stability_verdict(&scalar(1.0), 3.0).unwrap();
        assert_eq!(r.verdict, Verdict::Divergent);
    }

    #[test]
    fn singular_key_matrix_is_marginal() {
        let a = Matrix::from_diagonal(&[1.0, 0.0]);
        assert_eq!(stability_verdict(&a, 0.1).unwrap().verdict, Verdict::Marginal);
    }

    #[test]
    fn bad_inputs() {
        assert!(stability_verdict(&Matrix::zeros(2, 3), 0.1).is_err());
        assert!(stability_verdict(&scalar(1.0), 0.0).is_err());
    }

    #[test]
    fn contraction_decays_geometrically() {
        let tr = iterate_expected_td(&scalar(0.01), &[0.0], &[1.0], 0.1, 50, 1e6).unwrap();
        assert!(!tr.diverged);
        for (t, w) in tr.weights.iter().enumerate() {
            assert!((w[0] - 0.999f64.powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_is_constant() {
        let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.1, 1.0]]).unwrap();
        let b = vec![1.0, -2.0];
        let w_star = a.solve(&b).unwrap();
        let tr = iterate_expected_td(&a, &b, &w_star, 0.1, 100, 1e6).unwrap();
        for w in &tr.weights {
            for (x, y) in w.iter().zip(&w_star) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_stops_early() {
        let out = expected_td_outcome(&scalar(-0.98), &[0.0], &[1e-3], 0.1, ITERATION_CAP, 1e6)
            .unwrap();
        assert!(out.diverged && out.expanding());
        // 1e-3 · 1.098ᵗ > 1e6 first at t = ⌈ln(1e9)/ln(1.098)⌉
        let expected = (1e9f64.ln() / 1.098f64.ln()).ceil() as usize;
        assert_eq!(out.steps_run, expected);
    }

    #[test]
    fn key_matrix_shape_errors() {
        let bad = LinearMrp::new(
            Matrix::identity(2),
            Matrix::identity(3),
            vec![0.5, 0.5],
            0.9,
            vec![0.0, 0.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn non_stochastic_dynamics_rejected() {
        let p = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.4, 0.5]]).unwrap();
        let bad = LinearMrp::new(Matrix::identity(2), p, vec![0.5, 0.5], 0.9, vec![0.0, 0.0]);
        assert!(bad.is_err());
    }
}
