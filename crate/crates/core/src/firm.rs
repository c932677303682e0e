//! Firm-level aggregation of division responses: primal profit, Lagrangian,
//! dual function and excess supply (the dual gradient).

use serde::{Deserialize, Serialize};

use crate::divisions::{Bundle, DivisionModel, Family, PriceVector, Role};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmInstance {
    d: usize,
    c: f64,
    eps: f64,
    sales: Vec<DivisionModel>,
    production: Vec<DivisionModel>,
}

impl FirmInstance {
    /// Builds an instance and checks every model, including monotonicity on the box.
    pub fn new(d: usize, c: f64, eps: f64, sales: Vec<DivisionModel>, production: Vec<DivisionModel>) -> Result<Self> {
        let inst = Self::new_relaxed(d, c, eps, sales, production)?;
        for model in inst.sales.iter().chain(&inst.production) {
            model.check_monotone(c)?;
        }
        Ok(inst)
    }

    /// Like [`FirmInstance::new`] but without the monotonicity requirement on
    /// quadratic models. Curvature and dimension checks still apply.
    pub fn new_relaxed(
        d: usize,
        c: f64,
        eps: f64,
        sales: Vec<DivisionModel>,
        production: Vec<DivisionModel>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("at least one commodity required".into()));
        }
        if !(c > 0.0 && c.is_finite()) || !(eps > 0.0 && eps <= c) {
            return Err(Error::InvalidParameter(format!("need 0 < eps <= c, got eps={eps}, c={c}")));
        }
        if sales.is_empty() || production.is_empty() {
            return Err(Error::InvalidParameter("need at least one sales and one production division".into()));
        }
        for (models, role) in [(&sales, Role::Sales), (&production, Role::Production)] {
            for model in models {
                if model.role() != role {
                    return Err(Error::InvalidParameter(format!("{:?} model in the {role:?} list", model.role())));
                }
                if model.family() == Family::Power && d != 1 {
                    return Err(Error::InvalidParameter("power models require d = 1".into()));
                }
                ensure_dim(d, model.dim())?;
                model.validate()?;
            }
        }
        Ok(Self { d, c, eps, sales, production })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sales(&self) -> &[DivisionModel] {
        &self.sales
    }

    pub fn production(&self) -> &[DivisionModel] {
        &self.production
    }

    pub fn m(&self) -> usize {
        self.sales.len()
    }

    pub fn n(&self) -> usize {
        self.production.len()
    }

    /// `(m + n) c sqrt(d)`, a bound on the norm of any excess-supply vector.
    pub fn gradient_bound(&self) -> f64 {
        (self.m() + self.n()) as f64 * self.c * (self.d as f64).sqrt()
    }

    fn check_price(&self, lambda: &[f64]) -> Result<()> {
        ensure_dim(self.d, lambda.len())?;
        ensure_finite(lambda, "price vector")
    }

    fn check_plan(&self, plan: &Plan) -> Result<()> {
        ensure_dim(self.m(), plan.x.len())?;
        ensure_dim(self.n(), plan.y.len())?;
        for b in plan.x.iter().chain(&plan.y) {
            ensure_dim(self.d, b.len())?;
            ensure_finite(b, "plan")?;
            b.check_box(self.c)?;
        }
        Ok(())
    }

    pub fn stimulated_plan(&self, lambda: &[f64]) -> Result<Plan> {
        self.check_price(lambda)?;
        let x = self.sales.iter().map(|s| s.best_response(lambda, self.c)).collect::<Result<Vec<_>>>()?;
        let y = self.production.iter().map(|p| p.best_response(lambda, self.c)).collect::<Result<Vec<_>>>()?;
        Ok(Plan { x, y })
    }

    pub fn excess_supply(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        Ok(self.stimulated_plan(lambda)?.excess(self.d))
    }

    pub fn primal_value(&self, plan: &Plan) -> Result<f64> {
        self.check_plan(plan)?;
        Ok(self.primal_unchecked(plan))
    }

    fn primal_unchecked(&self, plan: &Plan) -> f64 {
        let revenue: f64 = self.sales.iter().zip(&plan.x).map(|(f, x)| f.value_unchecked(x)).sum();
        let cost: f64 = self.production.iter().zip(&plan.y).map(|(g, y)| g.value_unchecked(y)).sum();
        revenue - cost
    }

    pub fn lagrangian(&self, plan: &Plan, lambda: &[f64]) -> Result<f64> {
        self.check_price(lambda)?;
        self.check_plan(plan)?;
        Ok(self.lagrangian_unchecked(plan, lambda))
    }

    fn lagrangian_unchecked(&self, plan: &Plan, lambda: &[f64]) -> f64 {
        self.primal_unchecked(plan) + dot(lambda, &plan.excess(self.d))
    }

    pub fn dual_value(&self, lambda: &[f64]) -> Result<f64> {
        let plan = self.stimulated_plan(lambda)?;
        self.lagrangian(&plan, lambda)
    }

    /// Stimulated plan together with everything derived from it, from a single
    /// round of best responses.
    pub fn respond(&self, lambda: &[f64]) -> Result<Response> {
        let plan = self.stimulated_plan(lambda)?;
        let excess = plan.excess(self.d);
        let primal = self.primal_unchecked(&plan);
        let dual = self.lagrangian_unchecked(&plan, lambda);
        Ok(Response { plan, excess, primal, dual })
    }

    /// Largest sales Lipschitz constant; prices at or above it plus one stop all sales.
    pub fn max_sales_lipschitz(&self) -> f64 {
        self.sales.iter().map(|s| s.lipschitz(self.c)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub x: Vec<Bundle>,
    pub y: Vec<Bundle>,
}

impl Plan {
    pub fn zeros(m: usize, n: usize, d: usize) -> Self {
        Self { x: vec![Bundle::zeros(d); m], y: vec![Bundle::zeros(d); n] }
    }

    /// Total production minus total sales.
    pub fn excess(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for y in &self.y {
            for (o, v) in out.iter_mut().zip(y.iter()) {
                *o += v;
            }
        }
        for x in &self.x {
            for (o, v) in out.iter_mut().zip(x.iter()) {
                *o -= v;
            }
        }
        out
    }

    /// Concatenated quantities, used for distances between plans.
    pub fn flatten(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).flat_map(|b| b.iter().copied()).collect()
    }

    pub fn distance(&self, other: &Plan) -> f64 {
        let (a, b) = (self.flatten(), other.flatten());
        let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        norm(&diff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub plan: Plan,
    /// Excess supply, equal to the dual gradient.
    pub excess: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
}

pub fn stimulated_plan(instance: &FirmInstance, lambda: &PriceVector) -> Result<Plan> {
    instance.stimulated_plan(lambda)
}

pub fn excess_supply(instance: &FirmInstance, lambda: &PriceVector) -> Result<Vec<f64>> {
    instance.excess_supply(lambda)
}

pub fn primal_value(instance: &FirmInstance, plan: &Plan) -> Result<f64> {
    instance.primal_value(plan)
}

pub fn dual_value(instance: &FirmInstance, lambda: &PriceVector) -> Result<f64> {
    instance.dual_value(lambda)
}

pub fn lagrangian(instance: &FirmInstance, plan: &Plan, lambda: &PriceVector) -> Result<f64> {
    instance.lagrangian(plan, lambda)
}
