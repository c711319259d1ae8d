//! Least-squares TD and the "fit a linear model, then solve it" route.
//!
//! Both take transitions over state indices plus a feature matrix with one
//! row per state. Discounts are per transition, so terminal transitions
//! contribute no bootstrap.

use crate::linalg::Matrix;
use crate::{Error, Result, Transition};

/// Ridge added to every least-squares system.
pub const DEFAULT_RIDGE: f64 = 1e-8;

fn feature_row(features: &Matrix, s: usize) -> Result<&[f64]> {
    if s >= features.rows() {
        return Err(Error::Shape(format!(
            "state {s} has no feature row ({} rows)",
            features.rows()
        )));
    }
    Ok(features.row(s))
}

/// LSTD(λ): accumulates `Â = Σ zₜ(xₜ − γₜ x′ₜ)ᵀ`, `b̂ = Σ zₜ rₜ` with the
/// eligibility trace `zₜ = λγₜ₋₁ zₜ₋₁ + xₜ` and solves `(Â + ridge·I) w = b̂`.
/// The trace is cut whenever consecutive transitions do not chain.
pub fn lstd_solve(
    transitions: &[Transition],
    features: &Matrix,
    lambda: f64,
    ridge: f64,
) -> Result<Vec<f64>> {
    if transitions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    let k = features.cols();
    let mut a = Matrix::identity(k).scale(ridge);
    let mut b = vec![0.0; k];
    let mut z = vec![0.0; k];
    let mut prev: Option<&Transition> = None;
    for t in transitions {
        let x = feature_row(features, t.state)?;
        let x_next = feature_row(features, t.next_state)?;
        let decay = match prev {
            Some(p) if p.next_state == t.state => lambda * p.discount,
            _ => 0.0,
        };
        for i in 0..k {
            z[i] = decay * z[i] + x[i];
        }
        for i in 0..k {
            b[i] += z[i] * t.reward;
            for j in 0..k {
                a[(i, j)] += z[i] * (x[j] - t.discount * x_next[j]);
            }
        }
        prev = Some(t);
    }
    a.solve(&b)
}

/// Fits next-feature dynamics `F` and reward weights `r̂` by (ridge) least
/// squares, `Φ F ≈ Φ′_γ` and `Φ r̂ ≈ R` with `Φ′_γ` the discounted next
/// features, then solves the model's fixed point `w = r̂ + F w`.
pub fn fit_and_solve_linear_model(
    transitions: &[Transition],
    features: &Matrix,
    ridge: f64,
) -> Result<Vec<f64>> {
    if transitions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let k = features.cols();
    let mut gram = Matrix::identity(k).scale(ridge);
    let mut cross = Matrix::zeros(k, k);
    let mut phi_r = vec![0.0; k];
    for t in transitions {
        let x = feature_row(features, t.state)?;
        let x_next = feature_row(features, t.next_state)?;
        for i in 0..k {
            phi_r[i] += x[i] * t.reward;
            for j in 0..k {
                gram[(i, j)] += x[i] * x[j];
                cross[(i, j)] += x[i] * t.discount * x_next[j];
            }
        }
    }
    let reward_weights = gram.solve(&phi_r)?;
    let mut f = Matrix::zeros(k, k);
    for j in 0..k {
        let col: Vec<f64> = (0..k).map(|i| cross[(i, j)]).collect();
        for (i, v) in gram.solve(&col)?.into_iter().enumerate() {
            f[(i, j)] = v;
        }
    }
    Matrix::identity(k).sub(&f)?.solve(&reward_weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loop_value() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let data = vec![Transition::new(0, 0, 1.0, 0.5, 0); 10];
        let w = lstd_solve(&data, &x, 0.0, 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
        let w = fit_and_solve_linear_model(&data, &x, 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_weights() {
        let x = Matrix::identity(3);
        let data: Vec<Transition> = (0..30)
            .map(|i| Transition::new(i % 3, 0, 0.0, 0.9, (i + 1) % 3))
            .collect();
        for lambda in [0.0, 0.5, 1.0] {
            let w = lstd_solve(&data, &x, lambda, DEFAULT_RIDGE).unwrap();
            assert!(w.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn unvisited_feature_without_ridge_is_singular() {
        let x = Matrix::identity(2);
        let data = vec![Transition::new(0, 0, 1.0, 0.5, 0); 3];
        assert!(matches!(lstd_solve(&data, &x, 0.0, 0.0), Err(Error::Singular(_))));
        assert!(lstd_solve(&data, &x, 0.0, DEFAULT_RIDGE).is_ok());
    }

    #[test]
    fn chain_with_terminal_matches_returns() {
        // 0 → 1 → terminal, reward 1 at the end, γ = 0.9: v(1) = 1, v(0) = 0.9
        let x = Matrix::identity(2);
        let data = vec![
            Transition::new(0, 0, 0.0, 0.9, 1),
            Transition::new(1, 0, 1.0, 0.0, 0),
        ];
        for lambda in [0.0, 1.0] {
            let w = lstd_solve(&data, &x, lambda, 0.0).unwrap();
            assert!((w[0] - 0.9).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
        }
    }
}
