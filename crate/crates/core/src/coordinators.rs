//! Transfer-price update rules.
//!
//! Each coordinator only sees the excess supply reported by the divisions at
//! the prices it posts. Step functions are pure; [`run_static`] drives them on a
//! fixed firm instance.

use serde::{Deserialize, Serialize};

use crate::divisions::{regularity_constants, PriceVector};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::firm::{FirmInstance, Response};
use crate::linalg::dot;
use crate::trace::{RunningMean, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Nesterov,
    Solo,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Self::Gd),
            "nesterov" => Ok(Self::Nesterov),
            "solo" => Ok(Self::Solo),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub eta: f64,
}

impl GdConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta.is_finite() {
            Ok(Self { eta })
        } else {
            Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")))
        }
    }
}

/// `lambda - eta * gradient`.
pub fn gd_step(lambda: &PriceVector, gradient: &[f64], cfg: GdConfig) -> Result<PriceVector> {
    ensure_dim(lambda.dim(), gradient.len())?;
    ensure_finite(gradient, "gradient")?;
    PriceVector::new(lambda.iter().zip(gradient).map(|(l, g)| l - cfg.eta * g).collect())
}

/// Accelerated gradient state. The next gradient must be evaluated at `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NesterovState {
    pub lambda_prev: PriceVector,
    pub lambda_cur: PriceVector,
    pub mu: PriceVector,
    pub t: u64,
    pub eta: f64,
}

impl NesterovState {
    pub fn new(lambda0: PriceVector, eta: f64) -> Result<Self> {
        GdConfig::new(eta)?;
        Ok(Self { lambda_prev: lambda0.clone(), lambda_cur: lambda0.clone(), mu: lambda0, t: 0, eta })
    }
}

pub fn nesterov_step(state: &NesterovState, gradient_at_mu: &[f64]) -> Result<NesterovState> {
    ensure_dim(state.mu.dim(), gradient_at_mu.len())?;
    ensure_finite(gradient_at_mu, "gradient")?;
    let t = state.t + 1;
    let lambda: Vec<f64> = state.mu.iter().zip(gradient_at_mu).map(|(m, g)| m - state.eta * g).collect();
    let momentum = (t as f64 - 1.0) / (t as f64 + 2.0);
    let mu: Vec<f64> = lambda
        .iter()
        .zip(state.lambda_cur.iter())
        .map(|(l, old)| l + momentum * (l - old))
        .collect();
    Ok(NesterovState {
        lambda_prev: state.lambda_cur.clone(),
        lambda_cur: PriceVector::new(lambda)?,
        mu: PriceVector::new(mu)?,
        t,
        eta: state.eta,
    })
}

/// Scale-free follow-the-regularized-leader state: the running gradient sum and
/// the running sum of squared gradient norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoloState {
    pub grad_sum: Vec<f64>,
    pub sq_sum: f64,
    pub t: u64,
}

impl SoloState {
    pub fn new(d: usize) -> Self {
        Self { grad_sum: vec![0.0; d], sq_sum: 0.0, t: 0 }
    }

    /// `-grad_sum / sqrt(sq_sum)`, or the origin before any non-zero gradient.
    pub fn price(&self) -> PriceVector {
        if self.sq_sum > 0.0 {
            let scale = self.sq_sum.sqrt();
            PriceVector::new(self.grad_sum.iter().map(|g| -g / scale).collect())
                .expect("finite sums give finite prices")
        } else {
            PriceVector::zeros(self.grad_sum.len())
        }
    }
}

/// Folds in the gradient observed at the last emitted price and emits the next price.
pub fn solo_step(state: &SoloState, gradient: &[f64]) -> Result<(SoloState, PriceVector)> {
    ensure_dim(state.grad_sum.len(), gradient.len())?;
    ensure_finite(gradient, "gradient")?;
    let next = SoloState {
        grad_sum: state.grad_sum.iter().zip(gradient).map(|(s, g)| s + g).collect(),
        sq_sum: state.sq_sum + dot(gradient, gradient),
        t: state.t + 1,
    };
    let price = next.price();
    Ok((next, price))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticConfig {
    pub algorithm: Algorithm,
    pub rounds: usize,
    /// Step size for GD and Nesterov; defaults to `1 / kappa`.
    pub eta: Option<f64>,
    /// Starting price for GD and Nesterov; defaults to the origin.
    pub initial_price: Option<PriceVector>,
}

impl StaticConfig {
    pub fn new(algorithm: Algorithm, rounds: usize) -> Self {
        Self { algorithm, rounds, eta: None, initial_price: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub final_price: PriceVector,
    /// Mean of the logged prices.
    pub average_price: PriceVector,
    /// Starting price of the run.
    pub initial_price: PriceVector,
    /// Step size used by GD and Nesterov.
    pub eta: Option<f64>,
    /// Points where Nesterov queried the divisions (`mu_{t-1}` for round `t`).
    pub eval_points: Vec<PriceVector>,
    /// Set when a zero gradient certified optimality and the run stopped early.
    pub converged: bool,
}

impl RunResult {
    pub(crate) fn from_trace(
        trace: Vec<TraceRecord>,
        initial_price: PriceVector,
        eta: Option<f64>,
        eval_points: Vec<PriceVector>,
        converged: bool,
    ) -> Result<Self> {
        let last = trace.last().ok_or_else(|| Error::InvalidConfig("empty trace".into()))?;
        let final_price = PriceVector::new(last.lambda.clone())?;
        let mut mean = RunningMean::new(final_price.dim());
        for rec in &trace {
            mean.push(&rec.lambda);
        }
        Ok(Self {
            average_price: PriceVector::new(mean.mean())?,
            final_price,
            initial_price,
            eta,
            eval_points,
            converged,
            trace,
        })
    }
}

pub(crate) fn record(t: usize, lambda: &[f64], resp: &Response, avg: &mut RunningMean) -> TraceRecord {
    avg.push(&resp.excess);
    TraceRecord {
        t: t as u64,
        lambda: lambda.to_vec(),
        excess: resp.excess.clone(),
        primal: resp.primal,
        dual: resp.dual,
        running_avg_excess: avg.mean(),
        oracle_gap: None,
    }
}

/// Runs a coordinator for `rounds` rounds on a fixed instance.
///
/// Round `t` logs the price `lambda_t` together with the divisions' response to
/// it. For SOLO, `lambda_1` is the origin. For GD and Nesterov, `lambda_t` is the
/// iterate after `t` updates from the starting price.
pub fn run_static(instance: &FirmInstance, cfg: &StaticConfig) -> Result<RunResult> {
    if cfg.rounds == 0 {
        return Err(Error::InvalidConfig("at least one round required".into()));
    }
    let d = instance.d();
    let start = match &cfg.initial_price {
        Some(p) => {
            ensure_dim(d, p.dim())?;
            p.clone()
        }
        None => PriceVector::zeros(d),
    };
    let eta = match cfg.algorithm {
        Algorithm::Solo => None,
        _ => Some(match cfg.eta {
            Some(eta) => GdConfig::new(eta)?.eta,
            None => 1.0 / regularity_constants(instance)?.kappa,
        }),
    };
    let mut trace = Vec::with_capacity(cfg.rounds);
    let mut avg = RunningMean::new(d);
    let mut eval_points = Vec::new();
    let mut converged = false;

    match cfg.algorithm {
        Algorithm::Gd => {
            let step = GdConfig::new(eta.unwrap())?;
            let mut lambda = start.clone();
            let mut grad = instance.excess_supply(&lambda)?;
            for t in 1..=cfg.rounds {
                lambda = gd_step(&lambda, &grad, step)?;
                let resp = instance.respond(&lambda)?;
                grad = resp.excess.clone();
                trace.push(record(t, &lambda, &resp, &mut avg));
            }
        }
        Algorithm::Nesterov => {
            let mut state = NesterovState::new(start.clone(), eta.unwrap())?;
            for t in 1..=cfg.rounds {
                let grad = instance.excess_supply(&state.mu)?;
                eval_points.push(state.mu.clone());
                state = nesterov_step(&state, &grad)?;
                let resp = instance.respond(&state.lambda_cur)?;
                trace.push(record(t, &state.lambda_cur, &resp, &mut avg));
            }
        }
        Algorithm::Solo => {
            let mut state = SoloState::new(d);
            let mut lambda = state.price();
            for t in 1..=cfg.rounds {
                let resp = instance.respond(&lambda)?;
                trace.push(record(t, &lambda, &resp, &mut avg));
                let (next, price) = solo_step(&state, &resp.excess)?;
                if next.sq_sum == 0.0 {
                    // The origin clears the market.
                    converged = true;
                    break;
                }
                state = next;
                lambda = price;
            }
        }
    }
    RunResult::from_trace(trace, start, eta, eval_points, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PriceVector {
        PriceVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gd_step_examples() {
        let cfg = GdConfig::new(0.05).unwrap();
        let next = gd_step(&pv(&[2.0]), &[4.0], cfg).unwrap();
        assert!((next[0] - 1.8).abs() < 1e-15);
        assert_eq!(gd_step(&pv(&[2.0]), &[0.0], cfg).unwrap(), pv(&[2.0]));
        let first = gd_step(&pv(&[0.0, 0.0]), &[-150.0, -150.0], GdConfig::new(0.1).unwrap()).unwrap();
        assert!((first[0] - 15.0).abs() < 1e-12 && (first[1] - 15.0).abs() < 1e-12);
        assert!(gd_step(&pv(&[0.0]), &[f64::NAN], cfg).is_err());
        assert!(GdConfig::new(0.0).is_err());
    }

    #[test]
    fn nesterov_step_examples() {
        let s0 = NesterovState::new(pv(&[0.0]), 0.1).unwrap();
        let s1 = nesterov_step(&s0, &[-5.0]).unwrap();
        assert!((s1.lambda_cur[0] - 0.5).abs() < 1e-15);
        assert!((s1.mu[0] - 0.5).abs() < 1e-15);
        let s2 = nesterov_step(&s1, &[-1.0]).unwrap();
        assert!((s2.lambda_cur[0] - 0.6).abs() < 1e-15);
        assert!((s2.mu[0] - 0.625).abs() < 1e-15);
        assert_eq!(s2.lambda_prev, s1.lambda_cur);
        assert_eq!(s2.t, 2);
    }

    #[test]
    fn nesterov_zero_gradient_is_stationary() {
        let mut s = NesterovState::new(pv(&[1.5, -2.0]), 0.3).unwrap();
        for _ in 0..50 {
            s = nesterov_step(&s, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(s.lambda_cur, pv(&[1.5, -2.0]));
        assert_eq!(s.mu, pv(&[1.5, -2.0]));
    }

    #[test]
    fn solo_step_examples() {
        let s0 = SoloState::new(1);
        assert_eq!(s0.price(), pv(&[0.0]));
        let (s1, l1) = solo_step(&s0, &[-5.0]).unwrap();
        assert_eq!(l1[0], 1.0);
        let (_, l2) = solo_step(&s1, &[3.0]).unwrap();
        let expected = 2.0 / 34f64.sqrt();
        assert!((l2[0] - expected).abs() < 1e-15);
        assert!((l2[0] - 0.34300).abs() < 1e-5);

        let (s1b, _) = solo_step(&s0, &[-50.0]).unwrap();
        let (_, l2b) = solo_step(&s1b, &[30.0]).unwrap();
        assert!((l2b[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn solo_rejects_bad_input() {
        assert!(solo_step(&SoloState::new(2), &[1.0]).is_err());
        assert!(solo_step(&SoloState::new(1), &[f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn solo_scale_invariance(grads in prop::collection::vec(prop::array::uniform2(-100.0f64..100.0), 1..40),
                                 scale in prop::sample::select(vec![0.5, 2.0, 4.0, 1024.0])) {
            // Power-of-two scales keep every floating-point operation exact up to the final division.
            let mut a = SoloState::new(2);
            let mut b = SoloState::new(2);
            for g in &grads {
                let gs = [g[0] * scale, g[1] * scale];
                let (na, pa) = solo_step(&a, g).unwrap();
                let (nb, pb) = solo_step(&b, &gs).unwrap();
                prop_assert_eq!(&pa, &pb);
                a = na;
                b = nb;
            }
        }

        #[test]
        fn solo_scale_invariance_general(grads in prop::collection::vec(-100.0f64..100.0, 1..40), scale in 0.01f64..100.0) {
            let mut a = SoloState::new(1);
            let mut b = SoloState::new(1);
            for g in &grads {
                let (na, pa) = solo_step(&a, &[*g]).unwrap();
                let (nb, pb) = solo_step(&b, &[*g * scale]).unwrap();
                prop_assert!((pa[0] - pb[0]).abs() <= 1e-12 * (1.0 + pa[0].abs()));
                a = na;
                b = nb;
            }
        }
    }
}
