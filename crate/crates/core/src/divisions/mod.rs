//! Division (agent) models.
//!
//! A sales division earns revenue `f(x)` and pays the transfer price for what it
//! sells; a production division is paid the transfer price and bears the cost
//! `g(y)`. Both pick the unique maximizer of their payoff over the box `[0, c]^d`.

mod qp;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub use qp::{
    ascent_gradient, box_qp_maximize, box_qp_maximize_capped, projected_gradient_norm, DEFAULT_QP_ITERATION_CAP,
    DEFAULT_QP_TOLERANCE,
};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::firm::FirmInstance;
use crate::linalg::{dot, norm, SymMatrix};

/// Transfer price vector. Components may be negative during online iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        ensure_finite(&components, "price vector")?;
        Ok(Self(components))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &PriceVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl Deref for PriceVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Commodity quantities chosen by one division.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(pub(crate) Vec<f64>);

impl Bundle {
    pub fn new(quantities: Vec<f64>) -> Result<Self> {
        ensure_finite(&quantities, "bundle")?;
        Ok(Self(quantities))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn filled(d: usize, value: f64) -> Self {
        Self(vec![value; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check_box(&self, c: f64) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, &q)| !(0.0..=c).contains(&q)) {
            Some((index, &value)) => Err(Error::OutOfBox { index, value, upper: c }),
            None => Ok(()),
        }
    }
}

impl Deref for Bundle {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Shifted power revenue `(A/alpha) ((x + eps)^alpha - eps^alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSalesParams {
    pub scale: f64,
    pub alpha: f64,
    pub shift: f64,
}

impl PowerSalesParams {
    pub fn new(scale: f64, alpha: f64, shift: f64) -> Result<Self> {
        let p = Self { scale, alpha, shift };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.scale > 0.0 && self.alpha > 0.0 && self.alpha < 1.0 && self.shift > 0.0 && self.shift.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("power sales parameters {self:?}")))
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        self.scale * (x + self.shift).powf(self.alpha - 1.0)
    }
}

/// Shifted power cost `(B/beta) ((y + eps)^beta - eps^beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProductionParams {
    pub scale: f64,
    pub beta: f64,
    pub shift: f64,
}

impl PowerProductionParams {
    pub fn new(scale: f64, beta: f64, shift: f64) -> Result<Self> {
        let p = Self { scale, beta, shift };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.scale > 0.0 && self.beta > 1.0 && self.beta.is_finite() && self.shift > 0.0 && self.shift.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("power production parameters {self:?}")))
        }
    }

    pub fn marginal(&self, y: f64) -> f64 {
        self.scale * (y + self.shift).powf(self.beta - 1.0)
    }
}

/// Quadratic revenue `<a, x> - 1/2 <A x, x>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSalesParams {
    pub linear: Vec<f64>,
    pub curvature: SymMatrix,
}

/// Quadratic cost `<b, y> + 1/2 <B y, y>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadProductionParams {
    pub linear: Vec<f64>,
    pub curvature: SymMatrix,
}

fn validate_quadratic(linear: &[f64], curvature: &SymMatrix) -> Result<()> {
    ensure_dim(curvature.dim(), linear.len())?;
    ensure_finite(linear, "quadratic linear term")?;
    let lmin = curvature.min_eigenvalue();
    if lmin > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateModulus(lmin))
    }
}

impl QuadSalesParams {
    pub fn new(linear: Vec<f64>, curvature: SymMatrix) -> Result<Self> {
        validate_quadratic(&linear, &curvature)?;
        Ok(Self { linear, curvature })
    }
}

impl QuadProductionParams {
    pub fn new(linear: Vec<f64>, curvature: SymMatrix) -> Result<Self> {
        validate_quadratic(&linear, &curvature)?;
        Ok(Self { linear, curvature })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sales,
    Production,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivisionModel {
    PowerSales(PowerSalesParams),
    PowerProduction(PowerProductionParams),
    QuadSales(QuadSalesParams),
    QuadProduction(QuadProductionParams),
}

impl DivisionModel {
    pub fn role(&self) -> Role {
        match self {
            Self::PowerSales(_) | Self::QuadSales(_) => Role::Sales,
            Self::PowerProduction(_) | Self::QuadProduction(_) => Role::Production,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::PowerSales(_) | Self::PowerProduction(_) => Family::Power,
            Self::QuadSales(_) | Self::QuadProduction(_) => Family::Quadratic,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::PowerSales(_) | Self::PowerProduction(_) => 1,
            Self::QuadSales(p) => p.linear.len(),
            Self::QuadProduction(p) => p.linear.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerSales(p) => p.validate(),
            Self::PowerProduction(p) => p.validate(),
            Self::QuadSales(p) => validate_quadratic(&p.linear, &p.curvature),
            Self::QuadProduction(p) => validate_quadratic(&p.linear, &p.curvature),
        }
    }

    /// Checks that the revenue or cost is non-decreasing in every argument on `[0, c]^d`.
    pub fn check_monotone(&self, c: f64) -> Result<()> {
        let offending = match self {
            Self::PowerSales(_) | Self::PowerProduction(_) => None,
            Self::QuadSales(p) => (0..p.linear.len()).find(|&k| {
                let pos: f64 = p.curvature.row(k).iter().filter(|v| **v > 0.0).sum();
                p.linear[k] < c * pos
            }),
            Self::QuadProduction(p) => (0..p.linear.len()).find(|&k| {
                let neg: f64 = p.curvature.row(k).iter().filter(|v| **v < 0.0).sum();
                p.linear[k] < -c * neg
            }),
        };
        match offending {
            Some(k) => Err(Error::InvalidParameter(format!(
                "{:?} division is decreasing in commodity {k} on [0, {c}]",
                self.role()
            ))),
            None => Ok(()),
        }
    }

    /// Revenue `f(q)` for sales or cost `g(q)` for production.
    pub fn evaluate(&self, q: &[f64], c: f64) -> Result<f64> {
        ensure_dim(self.dim(), q.len())?;
        ensure_finite(q, "bundle")?;
        if let Some((index, &value)) = q.iter().enumerate().find(|(_, &v)| !(0.0..=c).contains(&v)) {
            return Err(Error::OutOfBox { index, value, upper: c });
        }
        Ok(self.value_unchecked(q))
    }

    pub(crate) fn value_unchecked(&self, q: &[f64]) -> f64 {
        match self {
            Self::PowerSales(p) => {
                p.scale / p.alpha * ((q[0] + p.shift).powf(p.alpha) - p.shift.powf(p.alpha))
            }
            Self::PowerProduction(p) => {
                p.scale / p.beta * ((q[0] + p.shift).powf(p.beta) - p.shift.powf(p.beta))
            }
            Self::QuadSales(p) => dot(&p.linear, q) - 0.5 * p.curvature.quad_form(q),
            Self::QuadProduction(p) => dot(&p.linear, q) + 0.5 * p.curvature.quad_form(q),
        }
    }

    /// The division's own payoff at price `lambda`: `f(x) - <lambda, x>` or `<lambda, y> - g(y)`.
    pub fn payoff(&self, lambda: &[f64], q: &[f64]) -> f64 {
        let value = self.value_unchecked(q);
        match self.role() {
            Role::Sales => value - dot(lambda, q),
            Role::Production => dot(lambda, q) - value,
        }
    }

    /// Unique payoff maximizer over `[0, c]^d`.
    pub fn best_response(&self, lambda: &[f64], c: f64) -> Result<Bundle> {
        self.best_response_with_tol(lambda, c, DEFAULT_QP_TOLERANCE)
    }

    pub fn best_response_with_tol(&self, lambda: &[f64], c: f64, tol: f64) -> Result<Bundle> {
        ensure_dim(self.dim(), lambda.len())?;
        ensure_finite(lambda, "price vector")?;
        match self {
            Self::PowerSales(p) => Ok(Bundle(vec![power_sales_response(p, lambda[0], c)])),
            Self::PowerProduction(p) => Ok(Bundle(vec![power_production_response(p, lambda[0], c)])),
            Self::QuadSales(p) => {
                let lin: Vec<f64> = p.linear.iter().zip(lambda).map(|(a, l)| a - l).collect();
                box_qp_maximize(&lin, &p.curvature, c, tol)
            }
            Self::QuadProduction(p) => {
                let lin: Vec<f64> = p.linear.iter().zip(lambda).map(|(b, l)| l - b).collect();
                box_qp_maximize(&lin, &p.curvature, c, tol)
            }
        }
    }

    /// Strong concavity (sales) or strong convexity (production) modulus on `[0, c]^d`.
    pub fn strong_modulus(&self, c: f64) -> f64 {
        match self {
            Self::PowerSales(p) => p.scale * (1.0 - p.alpha) * (c + p.shift).powf(p.alpha - 2.0),
            Self::PowerProduction(p) => {
                let e = p.beta - 2.0;
                p.scale * (p.beta - 1.0) * p.shift.powf(e).min((c + p.shift).powf(e))
            }
            Self::QuadSales(p) => p.curvature.min_eigenvalue(),
            Self::QuadProduction(p) => p.curvature.min_eigenvalue(),
        }
    }

    /// Lipschitz constant of the revenue or cost on `[0, c]^d`.
    ///
    /// Quadratic gradients are affine, so the supremum of their norm over the box
    /// is attained at a vertex.
    pub fn lipschitz(&self, c: f64) -> f64 {
        match self {
            Self::PowerSales(p) => p.marginal(0.0),
            Self::PowerProduction(p) => p.marginal(c),
            Self::QuadSales(p) => max_affine_norm_on_box(&p.linear, &p.curvature, -1.0, c),
            Self::QuadProduction(p) => max_affine_norm_on_box(&p.linear, &p.curvature, 1.0, c),
        }
    }
}

const VERTEX_ENUMERATION_MAX_DIM: usize = 16;

/// `max over x in [0, c]^d of || linear + sign * M x ||`.
fn max_affine_norm_on_box(linear: &[f64], m: &SymMatrix, sign: f64, c: f64) -> f64 {
    let d = linear.len();
    if d <= VERTEX_ENUMERATION_MAX_DIM {
        let mut best = 0.0f64;
        let mut vertex = vec![0.0; d];
        for mask in 0u32..(1u32 << d) {
            for (k, v) in vertex.iter_mut().enumerate() {
                *v = if mask >> k & 1 == 1 { c } else { 0.0 };
            }
            let mv = m.mul_vec(&vertex);
            let sq: f64 = linear.iter().zip(&mv).map(|(l, v)| (l + sign * v).powi(2)).sum();
            best = best.max(sq);
        }
        best.sqrt()
    } else {
        // Componentwise bound: each coordinate is affine and extremal at a vertex.
        linear
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let row = m.row(k);
                let pos: f64 = row.iter().filter(|v| **v > 0.0).sum();
                let neg: f64 = row.iter().filter(|v| **v < 0.0).sum();
                let hi = l + sign * c * if sign > 0.0 { pos } else { neg };
                let lo = l + sign * c * if sign > 0.0 { neg } else { pos };
                hi.abs().max(lo.abs()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn power_sales_response(p: &PowerSalesParams, lambda: f64, c: f64) -> f64 {
    let k = 1.0 - p.alpha;
    // f'(0) and f'(c) delimit the interior branch.
    let choke = p.scale / p.shift.powf(k);
    let saturate = p.scale / (c + p.shift).powf(k);
    if lambda >= choke {
        0.0
    } else if lambda <= saturate {
        c
    } else {
        ((p.scale / lambda).powf(1.0 / k) - p.shift).clamp(0.0, c)
    }
}

fn power_production_response(p: &PowerProductionParams, lambda: f64, c: f64) -> f64 {
    let k = p.beta - 1.0;
    let idle = p.scale * p.shift.powf(k);
    let capacity = p.scale * (c + p.shift).powf(k);
    if lambda <= idle {
        0.0
    } else if lambda >= capacity {
        c
    } else {
        ((lambda / p.scale).powf(1.0 / k) - p.shift).clamp(0.0, c)
    }
}

pub fn evaluate(model: &DivisionModel, q: &[f64], c: f64) -> Result<f64> {
    model.evaluate(q, c)
}

pub fn best_response_sales(model: &DivisionModel, lambda: &PriceVector, c: f64) -> Result<Bundle> {
    if model.role() != Role::Sales {
        return Err(Error::InvalidParameter("best_response_sales called on a production model".into()));
    }
    model.best_response(lambda, c)
}

pub fn best_response_production(model: &DivisionModel, lambda: &PriceVector, c: f64) -> Result<Bundle> {
    if model.role() != Role::Production {
        return Err(Error::InvalidParameter("best_response_production called on a sales model".into()));
    }
    model.best_response(lambda, c)
}

/// Curvature and Lipschitz constants of a firm instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Strong concavity modulus of the total profit.
    pub sigma: f64,
    /// Lipschitz constant of the total profit.
    #[serde(rename = "K")]
    pub lipschitz: f64,
    /// Smoothness of the dual function.
    pub kappa: f64,
    /// Largest sales Lipschitz constant.
    #[serde(rename = "Kprime")]
    pub max_sales_lipschitz: f64,
    /// Upper bound on online price components, `Kprime + 1`.
    pub b_bound: f64,
}

pub fn regularity_constants(instance: &FirmInstance) -> Result<RegularityConstants> {
    let c = instance.c();
    let mut sigma = f64::INFINITY;
    let mut kappa = 0.0;
    let mut lipschitz_sq = 0.0;
    let mut max_sales_lipschitz = 0.0f64;
    for model in instance.sales().iter().chain(instance.production()) {
        let modulus = model.strong_modulus(c);
        if !(modulus > 0.0) || !modulus.is_finite() {
            return Err(Error::DegenerateModulus(modulus));
        }
        sigma = sigma.min(modulus);
        kappa += 1.0 / modulus;
        let lip = model.lipschitz(c);
        lipschitz_sq += lip * lip;
        if model.role() == Role::Sales {
            max_sales_lipschitz = max_sales_lipschitz.max(lip);
        }
    }
    Ok(RegularityConstants {
        sigma,
        lipschitz: lipschitz_sq.sqrt(),
        kappa,
        max_sales_lipschitz,
        b_bound: max_sales_lipschitz + 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sales_example() -> DivisionModel {
        DivisionModel::PowerSales(PowerSalesParams::new(2.0, 0.5, 0.5).unwrap())
    }

    fn production_example() -> DivisionModel {
        DivisionModel::PowerProduction(PowerProductionParams::new(1.0, 2.0, 0.1).unwrap())
    }

    /// Dense grid maximizer of a 1-D payoff, used as an independent check of the closed forms.
    fn grid_argmax(model: &DivisionModel, lambda: f64, c: f64, step: f64) -> f64 {
        let n = (c / step).round() as usize;
        (0..=n)
            .map(|i| (i as f64 * step).min(c))
            .max_by(|a, b| model.payoff(&[lambda], &[*a]).total_cmp(&model.payoff(&[lambda], &[*b])))
            .unwrap()
    }

    #[test]
    fn power_sales_values() {
        let m = sales_example();
        assert_eq!(m.evaluate(&[0.0], 10.0).unwrap(), 0.0);
        let v = m.evaluate(&[3.5], 10.0).unwrap();
        // (2/0.5)(4^0.5 - 0.5^0.5)
        let expected = 4.0 * (2.0 - 0.5f64.sqrt());
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 5.17157).abs() < 1e-5);
    }

    #[test]
    fn quadratic_production_value() {
        let m = DivisionModel::QuadProduction(
            QuadProductionParams::new(vec![0.0, 0.0], SymMatrix::diagonal(&[1.0, 1.0])).unwrap(),
        );
        assert_eq!(m.evaluate(&[2.0, 3.0], 10.0).unwrap(), 6.5);
    }

    #[test]
    fn evaluate_errors() {
        let m = sales_example();
        assert!(matches!(m.evaluate(&[11.0], 10.0), Err(Error::OutOfBox { .. })));
        assert!(matches!(m.evaluate(&[1.0, 1.0], 10.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.evaluate(&[-0.1], 10.0), Err(Error::OutOfBox { .. })));
    }

    #[test]
    fn power_best_responses() {
        let lam = PriceVector::scalar(1.0).unwrap();
        let x = best_response_sales(&sales_example(), &lam, 10.0).unwrap();
        assert!((x[0] - 3.5).abs() < 1e-12);
        let grid = grid_argmax(&sales_example(), 1.0, 10.0, 1e-4);
        assert!((x[0] - grid).abs() <= 1e-4);

        let y = best_response_production(&production_example(), &lam, 10.0).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-12);
        let grid = grid_argmax(&production_example(), 1.0, 10.0, 1e-4);
        assert!((y[0] - grid).abs() <= 1e-4);

        let zero = PriceVector::zeros(1);
        assert_eq!(best_response_sales(&sales_example(), &zero, 10.0).unwrap()[0], 10.0);
        assert_eq!(best_response_production(&production_example(), &zero, 10.0).unwrap()[0], 0.0);
    }

    #[test]
    fn role_mismatch_is_rejected() {
        let lam = PriceVector::scalar(1.0).unwrap();
        assert!(best_response_sales(&production_example(), &lam, 10.0).is_err());
        assert!(best_response_production(&sales_example(), &lam, 10.0).is_err());
    }

    #[test]
    fn non_finite_price_is_rejected() {
        assert!(PriceVector::new(vec![f64::NAN]).is_err());
        assert!(matches!(sales_example().best_response(&[f64::INFINITY], 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn quadratic_best_responses() {
        let sales = DivisionModel::QuadSales(
            QuadSalesParams::new(vec![3.0, 4.0], SymMatrix::diagonal(&[1.0, 2.0])).unwrap(),
        );
        let x = sales.best_response(&[1.0, 1.0], 10.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 1.5).abs() < 1e-9);

        let prod = DivisionModel::QuadProduction(
            QuadProductionParams::new(vec![0.0, 0.0], SymMatrix::diagonal(&[1.0, 1.0])).unwrap(),
        );
        let y = prod.best_response(&[2.0, 3.0], 10.0).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-9 && (y[1] - 3.0).abs() < 1e-9);
        assert_eq!(prod.best_response(&[0.0, 0.0], 10.0).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn closed_form_breakpoints_match_grid() {
        let c = 10.0;
        let s = PowerSalesParams::new(2.0, 0.5, 0.5).unwrap();
        let p = PowerProductionParams::new(1.0, 2.0, 0.1).unwrap();
        let sales = DivisionModel::PowerSales(s.clone());
        let prod = DivisionModel::PowerProduction(p.clone());
        // Breakpoints of both closed forms.
        for lam in [s.marginal(0.0), s.marginal(c)] {
            let x = sales.best_response(&[lam], c).unwrap()[0];
            let fine = refine_argmax(&sales, lam, c);
            assert!((x - fine).abs() < 1e-6, "sales at {lam}: {x} vs {fine}");
        }
        for lam in [p.marginal(0.0), p.marginal(c)] {
            let y = prod.best_response(&[lam], c).unwrap()[0];
            let fine = refine_argmax(&prod, lam, c);
            assert!((y - fine).abs() < 1e-6, "production at {lam}: {y} vs {fine}");
        }
    }

    /// Grid search followed by golden-section refinement on the bracketing cell.
    fn refine_argmax(model: &DivisionModel, lambda: f64, c: f64) -> f64 {
        let step = 1e-3;
        let g = grid_argmax(model, lambda, c, step);
        let (mut lo, mut hi) = ((g - step).max(0.0), (g + step).min(c));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if model.payoff(&[lambda], &[a]) >= model.payoff(&[lambda], &[b]) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let mid = 0.5 * (lo + hi);
        // Endpoints win ties with the interior.
        [0.0, c, mid]
            .into_iter()
            .max_by(|a, b| model.payoff(&[lambda], &[*a]).total_cmp(&model.payoff(&[lambda], &[*b])))
            .unwrap()
    }

    #[test]
    fn sales_lipschitz_of_power_example() {
        let k = sales_example().lipschitz(10.0);
        assert!((k - 2.0 * 0.5f64.powf(-0.5)).abs() < 1e-14);
        // Grid maximum of |f'|.
        let p = PowerSalesParams::new(2.0, 0.5, 0.5).unwrap();
        let grid_max = (0..=100_000).map(|i| p.marginal(i as f64 * 1e-4)).fold(0.0, f64::max);
        assert!((k - grid_max).abs() < 1e-12);
    }

    #[test]
    fn quadratic_modulus_is_smallest_eigenvalue() {
        let m = DivisionModel::QuadSales(
            QuadSalesParams::new(vec![5.0, 5.0], SymMatrix::scaled_identity(2, 0.1)).unwrap(),
        );
        assert!((m.strong_modulus(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn quadratic_lipschitz_uses_worst_vertex() {
        // Negative coupling makes the gradient a - A x exceed ||a|| at x = (0, c).
        let a = SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let m = DivisionModel::QuadSales(QuadSalesParams::new(vec![10.0, 10.0], a).unwrap());
        let k = m.lipschitz(10.0);
        let expected = (15.0f64.powi(2) + 0.0f64.powi(2)).sqrt();
        assert!((k - expected).abs() < 1e-12, "{k}");
        assert!(k > norm(&[10.0, 10.0]));
    }

    #[test]
    fn monotonicity_check() {
        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let ok = DivisionModel::QuadSales(QuadSalesParams::new(vec![15.0, 15.5], a.clone()).unwrap());
        assert!(ok.check_monotone(10.0).is_ok());
        let bad = DivisionModel::QuadSales(QuadSalesParams::new(vec![14.9, 15.5], a).unwrap());
        assert!(bad.check_monotone(10.0).is_err());
        let b = SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let prod = DivisionModel::QuadProduction(QuadProductionParams::new(vec![4.0, 5.0], b).unwrap());
        assert!(prod.check_monotone(10.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PowerSalesParams::new(1.0, 1.0, 0.5).is_err());
        assert!(PowerSalesParams::new(0.0, 0.5, 0.5).is_err());
        assert!(PowerProductionParams::new(1.0, 1.0, 0.5).is_err());
        assert!(PowerProductionParams::new(1.0, 2.0, 0.0).is_err());
        let singular = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(QuadSalesParams::new(vec![1.0, 1.0], singular).is_err());
    }

    fn arb_power_sales() -> impl Strategy<Value = PowerSalesParams> {
        (0.1f64..15.0, 0.01f64..0.99, 0.1f64..1.1).prop_map(|(a, al, e)| PowerSalesParams::new(a, al, e).unwrap())
    }

    fn arb_power_production() -> impl Strategy<Value = PowerProductionParams> {
        (0.1f64..10.0, 1.01f64..4.0, 0.1f64..1.1)
            .prop_map(|(b, be, e)| PowerProductionParams::new(b, be, e).unwrap())
    }

    fn arb_quadratic(sign: f64) -> impl Strategy<Value = (Vec<f64>, SymMatrix)> {
        (prop::array::uniform4(-1.5f64..1.5), 0.05f64..0.5, prop::array::uniform2(0.0f64..1.0)).prop_map(
            move |(cm, delta, margin)| {
                let (c00, c01, c10, c11) = (cm[0], cm[1], cm[2], cm[3]);
                let m = SymMatrix::from_rows(&[
                    vec![c00 * c00 + c10 * c10 + delta, c00 * c01 + c10 * c11],
                    vec![c00 * c01 + c10 * c11, c01 * c01 + c11 * c11 + delta],
                ])
                .unwrap();
                let lin = (0..2)
                    .map(|k| {
                        let row = m.row(k);
                        if sign < 0.0 {
                            10.0 * row.iter().filter(|v| **v > 0.0).sum::<f64>() + margin[k]
                        } else {
                            -10.0 * row.iter().filter(|v| **v < 0.0).sum::<f64>() + margin[k]
                        }
                    })
                    .collect();
                (lin, m)
            },
        )
    }

    proptest! {
        #[test]
        fn power_responses_are_optimal(p in arb_power_sales(), q in arb_power_production(),
                                       lam in -1.0f64..20.0, probes in prop::collection::vec(0.0f64..10.0, 100)) {
            let c = 10.0;
            let s = DivisionModel::PowerSales(p);
            let x = s.best_response(&[lam], c).unwrap();
            let best = s.payoff(&[lam], &x);
            let g = DivisionModel::PowerProduction(q);
            let y = g.best_response(&[lam], c).unwrap();
            let best_y = g.payoff(&[lam], &y);
            for probe in &probes {
                prop_assert!(best >= s.payoff(&[lam], &[*probe]) - 1e-9);
                prop_assert!(best_y >= g.payoff(&[lam], &[*probe]) - 1e-9);
            }
        }

        #[test]
        fn quadratic_responses_are_optimal((a, am) in arb_quadratic(-1.0), (b, bm) in arb_quadratic(1.0),
                                           lam in prop::array::uniform2(-1.0f64..25.0),
                                           probes in prop::collection::vec(prop::array::uniform2(0.0f64..10.0), 100)) {
            let c = 10.0;
            let s = DivisionModel::QuadSales(QuadSalesParams::new(a, am).unwrap());
            let g = DivisionModel::QuadProduction(QuadProductionParams::new(b, bm).unwrap());
            prop_assert!(s.check_monotone(c).is_ok() && g.check_monotone(c).is_ok());
            let x = s.best_response(&lam, c).unwrap();
            let y = g.best_response(&lam, c).unwrap();
            let (bx, by) = (s.payoff(&lam, &x), g.payoff(&lam, &y));
            for probe in &probes {
                prop_assert!(bx >= s.payoff(&lam, probe) - 1e-7);
                prop_assert!(by >= g.payoff(&lam, probe) - 1e-7);
            }
        }

        #[test]
        fn power_comparative_statics(p in arb_power_sales(), q in arb_power_production(),
                                     l1 in -1.0f64..20.0, dl in 0.0f64..5.0) {
            let c = 10.0;
            let s = DivisionModel::PowerSales(p);
            let g = DivisionModel::PowerProduction(q);
            let l2 = l1 + dl;
            prop_assert!(s.best_response(&[l2], c).unwrap()[0] <= s.best_response(&[l1], c).unwrap()[0]);
            prop_assert!(g.best_response(&[l2], c).unwrap()[0] >= g.best_response(&[l1], c).unwrap()[0]);
        }

        #[test]
        fn modulus_satisfies_strong_concavity(p in arb_power_sales(), q in arb_power_production(),
                                              (a, am) in arb_quadratic(-1.0),
                                              u in prop::array::uniform2(0.0f64..10.0),
                                              v in prop::array::uniform2(0.0f64..10.0)) {
            let c = 10.0;
            let models = [
                DivisionModel::PowerSales(p),
                DivisionModel::PowerProduction(q),
                DivisionModel::QuadSales(QuadSalesParams::new(a, am).unwrap()),
            ];
            for m in &models {
                let sigma = m.strong_modulus(c);
                let (x, y): (Vec<f64>, Vec<f64>) = (u[..m.dim()].to_vec(), v[..m.dim()].to_vec());
                let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                // Work with the convex function h = -f for sales and h = g for production.
                let h = |z: &[f64]| match m.role() {
                    Role::Sales => -m.value_unchecked(z),
                    Role::Production => m.value_unchecked(z),
                };
                for t in [0.25, 0.5, 0.75] {
                    let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                    let rhs = t * h(&x) + (1.0 - t) * h(&y) - 0.5 * sigma * t * (1.0 - t) * dist_sq;
                    prop_assert!(h(&mid) <= rhs + 1e-9 * (1.0 + rhs.abs()));
                }
            }
        }
    }
}
