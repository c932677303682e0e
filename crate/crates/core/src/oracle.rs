//! Reference solutions of the firm problem and the right-hand sides of the
//! convergence bounds. Nothing here depends on the coordinators.

use serde::{Deserialize, Serialize};

use crate::divisions::{regularity_constants, PriceVector, RegularityConstants};
use crate::error::{Error, Result};
use crate::firm::{FirmInstance, Plan};
use crate::linalg::norm;
use crate::scenario::{SamplerSpec, ScenarioStream};

pub const TOLERANCE_1D: f64 = 1e-9;
pub const TOLERANCE_ND: f64 = 1e-7;
/// Bisection also stops once the bracket is this narrow.
pub const BRACKET_WIDTH: f64 = 1e-12;
pub const DESCENT_ITERATION_CAP: usize = 10_000_000;
/// Largest grid `grid_bruteforce_primal` will enumerate.
pub const GRID_POINT_CAP: f64 = 1e8;

pub fn default_tolerance(d: usize) -> f64 {
    if d == 1 {
        TOLERANCE_1D
    } else {
        TOLERANCE_ND
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub lambda_star: PriceVector,
    pub plan_star: Plan,
    #[serde(rename = "F_star")]
    pub f_star: f64,
    #[serde(rename = "G_star")]
    pub g_star: f64,
    /// `||excess(lambda_star)||`.
    pub residual: f64,
    /// Set when the excess supply is already non-negative at the zero price.
    pub boundary: bool,
    pub iterations: usize,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")))
    }
}

fn solution_at(instance: &FirmInstance, lambda: Vec<f64>, boundary: bool, iterations: usize) -> Result<OracleSolution> {
    let resp = instance.respond(&lambda)?;
    Ok(OracleSolution {
        lambda_star: PriceVector::new(lambda)?,
        residual: norm(&resp.excess),
        f_star: resp.primal,
        g_star: resp.dual,
        plan_star: resp.plan,
        boundary,
        iterations,
    })
}

/// Bisection on the non-decreasing map `lambda -> excess(lambda)` over `[0, K' + 1]`.
pub fn dual_bisection_1d(instance: &FirmInstance, tol: f64) -> Result<OracleSolution> {
    if instance.d() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: instance.d() });
    }
    check_tol(tol)?;
    let excess = |l: f64| -> Result<f64> { Ok(instance.excess_supply(&[l])?[0]) };
    if excess(0.0)? >= 0.0 {
        return solution_at(instance, vec![0.0], true, 0);
    }
    let mut lo = 0.0;
    let mut hi = instance.max_sales_lipschitz() + 1.0;
    // Sales stop above K', so the upper end brackets for any valid instance.
    let mut widen = 0;
    while excess(hi)? < 0.0 {
        widen += 1;
        if widen > 64 {
            return Err(Error::NonConvergence { solver: "dual bisection", iterations: widen });
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        let g = excess(mid)?;
        if g.abs() <= tol || hi - lo <= BRACKET_WIDTH || mid <= lo || mid >= hi {
            return solution_at(instance, vec![mid], false, iterations);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Gradient descent on the dual with step `1 / kappa` from the origin.
pub fn dual_descent_nd(instance: &FirmInstance, tol: f64) -> Result<OracleSolution> {
    check_tol(tol)?;
    let step = 1.0 / regularity_constants(instance)?.kappa;
    let mut lambda = vec![0.0; instance.d()];
    for it in 0..=DESCENT_ITERATION_CAP {
        let g = instance.excess_supply(&lambda)?;
        if norm(&g) <= tol {
            return solution_at(instance, lambda, false, it);
        }
        for (l, gk) in lambda.iter_mut().zip(&g) {
            *l -= step * gk;
        }
    }
    Err(Error::NonConvergence { solver: "dual descent", iterations: DESCENT_ITERATION_CAP })
}

/// Bisection for one commodity, descent otherwise.
pub fn solve(instance: &FirmInstance, tol: f64) -> Result<OracleSolution> {
    if instance.d() == 1 {
        dual_bisection_1d(instance, tol)
    } else {
        dual_descent_nd(instance, tol)
    }
}

/// Exhaustive search over balanced plans `x = y` on a grid of the box.
/// Only for one sales and one production division.
pub fn grid_bruteforce_primal(instance: &FirmInstance, step: f64) -> Result<(Plan, f64)> {
    if instance.m() != 1 || instance.n() != 1 || instance.d() > 2 {
        return Err(Error::InvalidParameter("grid search needs m = n = 1 and d <= 2".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
    }
    let c = instance.c();
    let d = instance.d();
    let full_steps = (c / step).floor();
    if (full_steps + 2.0).powi(d as i32) > GRID_POINT_CAP {
        return Err(Error::InvalidParameter(format!("grid with step {step} is too large")));
    }
    let full_steps = full_steps as usize;
    let mut axis: Vec<f64> = (0..=full_steps).map(|i| (i as f64 * step).min(c)).collect();
    if *axis.last().unwrap() < c {
        axis.push(c);
    }
    let (f, g) = (&instance.sales()[0], &instance.production()[0]);
    let profit = |q: &[f64]| f.value_unchecked(q) - g.value_unchecked(q);
    let mut best = (vec![0.0; d], f64::NEG_INFINITY);
    let mut q = vec![0.0; d];
    let mut consider = |q: &[f64]| {
        let v = profit(q);
        if v > best.1 {
            best = (q.to_vec(), v);
        }
    };
    if d == 1 {
        for &a in &axis {
            q[0] = a;
            consider(&q);
        }
    } else {
        for &a in &axis {
            for &b in &axis {
                q[0] = a;
                q[1] = b;
                consider(&q);
            }
        }
    }
    let (q, value) = best;
    let bundle = crate::divisions::Bundle::new(q)?;
    Ok((Plan { x: vec![bundle.clone()], y: vec![bundle] }, value))
}

/// Optimality-gap and feasibility bounds after `t` accelerated steps.
pub fn accelerated_bounds(consts: &RegularityConstants, eta: f64, lambda0_dist: f64, t: u64) -> Result<(f64, f64)> {
    if !(eta > 0.0) || eta * consts.kappa > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("step {eta} exceeds 1/kappa = {}", 1.0 / consts.kappa)));
    }
    let denom = (t + 1) as f64;
    let gap = 2.0 * consts.lipschitz / (consts.sigma * eta).sqrt() * lambda0_dist / denom;
    let feasibility = 2.0 * (consts.kappa / eta).sqrt() * lambda0_dist / denom;
    Ok((gap, feasibility))
}

/// Gap and residual bounds at the average SOLO price after `rounds` rounds.
pub fn average_price_bounds(
    consts: &RegularityConstants,
    m: usize,
    n: usize,
    c: f64,
    d: usize,
    lambda_star_norm: f64,
    rounds: u64,
) -> Result<(f64, f64)> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("at least one round required".into()));
    }
    let mc = (m + n) as f64 * c;
    let tail = (lambda_star_norm.powi(2) + 12.5).sqrt() * (d as f64 / rounds as f64).powf(0.25);
    let gap = consts.lipschitz * (mc / consts.sigma).sqrt() * tail;
    let residual = (consts.kappa * mc).sqrt() * tail;
    Ok((gap, residual))
}

/// Upper bound on SOLO regret against a comparator of norm `lambda_norm`.
pub fn solo_regret_rhs(lambda_norm: f64, sq_sum: f64, max_grad: f64, rounds: u64) -> Result<f64> {
    if rounds < 1 {
        return Err(Error::InvalidParameter("at least one round required".into()));
    }
    Ok((lambda_norm.powi(2) / 2.0 + 2.75) * sq_sum.sqrt() + 3.5 * ((rounds - 1) as f64).sqrt() * max_grad)
}

/// Minimizer of the sample-average dual over the first `samples` instances of
/// the stream. A diagnostic estimate of the minimizer of the expected dual.
pub fn expected_dual_saa(spec: &SamplerSpec, samples: usize, tol: f64) -> Result<PriceVector> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample required".into()));
    }
    check_tol(tol)?;
    let stream = ScenarioStream::new(spec.clone())?;
    let pool = (0..samples as u64).map(|r| stream.instance_at(r)).collect::<Result<Vec<_>>>()?;
    let mut kappa = 0.0;
    for inst in &pool {
        kappa += regularity_constants(inst)?.kappa;
    }
    let step = samples as f64 / kappa;
    let mut lambda = vec![0.0; spec.d];
    for _ in 0..=DESCENT_ITERATION_CAP {
        let g = pool_gradient(&pool, &lambda)?;
        if norm(&g) <= tol {
            return PriceVector::new(lambda);
        }
        for (l, gk) in lambda.iter_mut().zip(&g) {
            *l -= step * gk;
        }
    }
    Err(Error::NonConvergence { solver: "sample-average descent", iterations: DESCENT_ITERATION_CAP })
}

/// Mean excess supply over a pool of instances.
pub fn pool_gradient(pool: &[FirmInstance], lambda: &[f64]) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; lambda.len()];
    for inst in pool {
        for (s, g) in sum.iter_mut().zip(inst.excess_supply(lambda)?) {
            *s += g;
        }
    }
    Ok(sum.into_iter().map(|s| s / pool.len() as f64).collect())
}
