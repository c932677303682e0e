//! Box-constrained concave quadratic maximization.
//!
//! Maximizes `<linear, x> - 1/2 <curvature x, x>` over `[0, c]^d` by projected
//! gradient ascent with step `1 / r`, `r` the largest absolute row sum of the
//! curvature. Every iteration also tries the face suggested by the current
//! iterate: variables pinned at a bound with a blocking gradient stay fixed and
//! the remaining ones are solved exactly. A face solution is accepted only if it
//! passes the same projected-gradient test as the plain iterates.

use crate::divisions::Bundle;
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::SymMatrix;

pub const DEFAULT_QP_TOLERANCE: f64 = 1e-7;
pub const DEFAULT_QP_ITERATION_CAP: usize = 100_000;

pub fn box_qp_maximize(linear: &[f64], curvature: &SymMatrix, c: f64, tol: f64) -> Result<Bundle> {
    box_qp_maximize_capped(linear, curvature, c, tol, DEFAULT_QP_ITERATION_CAP)
}

pub fn box_qp_maximize_capped(
    linear: &[f64],
    curvature: &SymMatrix,
    c: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<Bundle> {
    let d = curvature.dim();
    ensure_dim(d, linear.len())?;
    ensure_finite(linear, "quadratic program linear term")?;
    if !(tol > 0.0) || !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("box QP needs tol > 0 and c > 0, got tol={tol}, c={c}")));
    }
    let row_bound = curvature.max_abs_row_sum();
    if !(row_bound > 0.0) {
        return Err(Error::DegenerateModulus(row_bound));
    }
    let step = 1.0 / row_bound;

    let mut x = vec![0.0; d];
    for _ in 0..=max_iterations {
        let grad = ascent_gradient(linear, curvature, &x);
        if projected_gradient_norm(&x, &grad, c) <= tol {
            return Ok(Bundle(x));
        }
        if let Some(candidate) = face_solution(linear, curvature, &x, &grad, c) {
            let cand_grad = ascent_gradient(linear, curvature, &candidate);
            if projected_gradient_norm(&candidate, &cand_grad, c) <= tol {
                return Ok(Bundle(candidate));
            }
        }
        for (xk, gk) in x.iter_mut().zip(&grad) {
            *xk = (*xk + step * gk).clamp(0.0, c);
        }
    }
    Err(Error::NonConvergence { solver: "box_qp_maximize", iterations: max_iterations })
}

/// `linear - curvature * x`, the gradient of the maximized objective.
pub fn ascent_gradient(linear: &[f64], curvature: &SymMatrix, x: &[f64]) -> Vec<f64> {
    curvature.mul_vec(x).iter().zip(linear).map(|(qx, l)| l - qx).collect()
}

/// Norm of the gradient with the components blocked by active bounds removed.
pub fn projected_gradient_norm(x: &[f64], grad: &[f64], c: f64) -> f64 {
    x.iter()
        .zip(grad)
        .map(|(&xk, &gk)| {
            let g = if xk <= 0.0 {
                gk.max(0.0)
            } else if xk >= c {
                gk.min(0.0)
            } else {
                gk
            };
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

fn face_solution(linear: &[f64], curvature: &SymMatrix, x: &[f64], grad: &[f64], c: f64) -> Option<Vec<f64>> {
    let d = x.len();
    let free: Vec<usize> = (0..d)
        .filter(|&k| !((x[k] <= 0.0 && grad[k] <= 0.0) || (x[k] >= c && grad[k] >= 0.0)))
        .collect();
    let mut candidate = x.to_vec();
    if free.is_empty() {
        return Some(candidate);
    }
    // Bound variables keep their values; move their contribution to the right-hand side.
    let rhs: Vec<f64> = free
        .iter()
        .map(|&k| {
            let row = curvature.row(k);
            linear[k]
                - (0..d)
                    .filter(|j| !free.contains(j))
                    .map(|j| row[j] * x[j])
                    .sum::<f64>()
        })
        .collect();
    let z = curvature.solve_principal(&free, &rhs)?;
    let slack = 1e-12 * c;
    for (&k, &zk) in free.iter().zip(&z) {
        if zk < -slack || zk > c + slack {
            return None;
        }
        // Snap round-off next to a bound onto it.
        candidate[k] = if zk <= slack {
            0.0
        } else if zk >= c - slack {
            c
        } else {
            zk
        };
    }
    Some(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(linear: &[f64], q: &SymMatrix, x: &[f64]) -> f64 {
        crate::linalg::dot(linear, x) - 0.5 * q.quad_form(x)
    }

    fn assert_kkt(linear: &[f64], q: &SymMatrix, x: &[f64], c: f64, tol: f64) {
        let g = ascent_gradient(linear, q, x);
        for k in 0..x.len() {
            if x[k] <= 0.0 {
                assert!(g[k] <= tol, "lower bound, gradient {}", g[k]);
            } else if x[k] >= c {
                assert!(g[k] >= -tol, "upper bound, gradient {}", g[k]);
            } else {
                assert!(g[k].abs() <= tol, "interior, gradient {}", g[k]);
            }
        }
    }

    #[test]
    fn zero_linear_term_gives_origin() {
        let q = SymMatrix::from_rows(&[vec![2.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let x = box_qp_maximize(&[0.0, 0.0], &q, 10.0, 1e-9).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn interior_stationary_point() {
        let q = SymMatrix::diagonal(&[1.0, 1.0]);
        let x = box_qp_maximize(&[2.0, 3.0], &q, 10.0, 1e-9).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn clipped_to_upper_corner() {
        let q = SymMatrix::diagonal(&[1.0, 1.0]);
        let x = box_qp_maximize(&[50.0, 50.0], &q, 10.0, 1e-9).unwrap();
        assert_eq!(x.as_slice(), &[10.0, 10.0]);
        assert_kkt(&[50.0, 50.0], &q, &x, 10.0, 1e-9);
    }

    #[test]
    fn coupled_face_beats_grid() {
        // Optimum sits on the face x1 = 0 with x0 interior.
        let q = SymMatrix::from_rows(&[vec![2.0, 1.5], vec![1.5, 2.0]]).unwrap();
        let lin = [3.0, -1.0];
        let x = box_qp_maximize(&lin, &q, 4.0, 1e-10).unwrap();
        assert_kkt(&lin, &q, &x, 4.0, 1e-10);
        let best = objective(&lin, &q, &x);
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let p = [4.0 * i as f64 / n as f64, 4.0 * j as f64 / n as f64];
                assert!(objective(&lin, &q, &p) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn plain_projected_gradient_agrees() {
        let q = SymMatrix::from_rows(&[vec![1.3, -0.4, 0.2], vec![-0.4, 0.9, 0.1], vec![0.2, 0.1, 0.5]]).unwrap();
        let lin = [1.0, -2.0, 7.0];
        let c = 5.0;
        let x = box_qp_maximize(&lin, &q, c, 1e-10).unwrap();
        let mut y = vec![0.0; 3];
        let step = 1.0 / q.max_abs_row_sum();
        for _ in 0..200_000 {
            let g = ascent_gradient(&lin, &q, &y);
            for k in 0..3 {
                y[k] = (y[k] + step * g[k]).clamp(0.0, c);
            }
        }
        for k in 0..3 {
            assert!((x[k] - y[k]).abs() < 1e-8, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        // The unconstrained optimum (250.4, -249.9) is outside the box, so the
        // first face guess is rejected and a zero cap stops immediately.
        let q = SymMatrix::from_rows(&[vec![1.0, 0.999], vec![0.999, 1.0]]).unwrap();
        let err = box_qp_maximize_capped(&[1.0, 0.5], &q, 100.0, 1e-14, 0);
        assert!(matches!(err, Err(Error::NonConvergence { iterations: 0, .. })));
        let x = box_qp_maximize(&[1.0, 0.5], &q, 100.0, 1e-10).unwrap();
        assert_kkt(&[1.0, 0.5], &q, &x, 100.0, 1e-10);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let q = SymMatrix::diagonal(&[1.0]);
        assert!(box_qp_maximize(&[1.0], &q, 1.0, 0.0).is_err());
        assert!(box_qp_maximize(&[1.0, 2.0], &q, 1.0, 1e-6).is_err());
    }
}
