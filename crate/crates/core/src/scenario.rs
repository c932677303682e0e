//! Random firm instances and the dynamic (resampled every round) setting.
//!
//! Streams are split deterministically: the parameters of division `i` with a
//! given role in round `r` come from their own ChaCha8 stream, selected from the
//! base seed by `(r, role, i)`. Within that stream the parameters are drawn in a
//! fixed order, so changing `m` or `n` never shifts another division's draws.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coordinators::{record, solo_step, RunResult, SoloState};
use crate::divisions::{
    DivisionModel, PriceVector, PowerProductionParams, PowerSalesParams, QuadProductionParams, QuadSalesParams, Role,
};
use crate::error::{Error, Result};
use crate::firm::FirmInstance;
use crate::linalg::{norm, SymMatrix};
use crate::oracle;
use crate::trace::RunningMean;

/// Uniform law on the open interval `(lo, hi)`; `lo == hi` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.sample(Open01);
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }

    /// Every draw lies strictly inside `(min, max)`.
    fn within(&self, min: f64, max: f64) -> bool {
        let ordered = self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi;
        let strict_point = self.lo > min && self.hi < max;
        ordered && self.lo >= min && self.hi <= max && (self.lo < self.hi || strict_point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLaws {
    pub sales_scale: UniformRange,
    pub sales_alpha: UniformRange,
    pub sales_shift: UniformRange,
    pub production_scale: UniformRange,
    pub production_beta: UniformRange,
    pub production_shift: UniformRange,
}

impl Default for PowerLaws {
    fn default() -> Self {
        Self {
            sales_scale: UniformRange::new(0.0, 15.0),
            sales_alpha: UniformRange::new(0.0, 1.0),
            sales_shift: UniformRange::new(0.1, 1.1),
            production_scale: UniformRange::new(0.0, 10.0),
            production_beta: UniformRange::new(1.0, 4.0),
            production_shift: UniformRange::new(0.1, 1.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticLaws {
    /// Ridge added to `C^T C`.
    pub delta: f64,
    /// Standard deviation of the entries of `C`.
    pub normal_scale: f64,
    /// Slack above the smallest linear term that keeps revenue non-decreasing.
    pub sales_margin: UniformRange,
    /// Slack above the smallest linear term that keeps cost non-decreasing.
    pub production_margin: UniformRange,
}

impl QuadraticLaws {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            normal_scale: 1.0,
            sales_margin: UniformRange::new(0.0, 1.0),
            production_margin: UniformRange::new(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilySpec {
    Power(PowerLaws),
    Quadratic(QuadraticLaws),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub family: FamilySpec,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub seed: u64,
}

impl SamplerSpec {
    /// One commodity, shifted power revenues and costs, 15 sales and 25 production divisions.
    pub fn power_preset(seed: u64) -> Self {
        Self { family: FamilySpec::Power(PowerLaws::default()), d: 1, m: 15, n: 25, c: 10.0, seed }
    }

    /// Two commodities, quadratic revenues and costs, `delta = 0.1`.
    pub fn quadratic_preset(seed: u64) -> Self {
        Self { family: FamilySpec::Quadratic(QuadraticLaws::with_delta(0.1)), d: 2, m: 15, n: 25, c: 10.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.d == 0 || self.m == 0 || self.n == 0 {
            return bad("d, m and n must be positive");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive");
        }
        match &self.family {
            FamilySpec::Power(laws) => {
                if self.d != 1 {
                    return bad("the power family requires d = 1");
                }
                let inf = f64::INFINITY;
                let ok = laws.sales_scale.within(0.0, inf)
                    && laws.sales_alpha.within(0.0, 1.0)
                    && laws.sales_shift.within(0.0, inf)
                    && laws.production_scale.within(0.0, inf)
                    && laws.production_beta.within(1.0, inf)
                    && laws.production_shift.within(0.0, inf);
                if !ok {
                    return bad("power parameter ranges leave the admissible region");
                }
            }
            FamilySpec::Quadratic(laws) => {
                if !(laws.delta > 0.0 && laws.delta.is_finite()) {
                    return bad("delta must be positive");
                }
                if !(laws.normal_scale >= 0.0 && laws.normal_scale.is_finite()) {
                    return bad("normal_scale must be non-negative");
                }
                let inf = f64::INFINITY;
                let margins_ok = |r: &UniformRange| {
                    r.lo.is_finite() && r.hi.is_finite() && r.lo >= 0.0 && r.lo <= r.hi && r.hi < inf
                };
                if !margins_ok(&laws.sales_margin) || !margins_ok(&laws.production_margin) {
                    return bad("monotonicity margins must be non-negative ranges");
                }
            }
        }
        Ok(())
    }
}

/// Deterministic source of firm instances, one per round.
#[derive(Debug, Clone)]
pub struct ScenarioStream {
    spec: SamplerSpec,
    round: u64,
}

impl ScenarioStream {
    pub fn new(spec: SamplerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, round: 0 })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Draws the next instance and advances the stream.
    pub fn sample_instance(&mut self) -> Result<FirmInstance> {
        let inst = self.instance_at(self.round)?;
        self.round += 1;
        Ok(inst)
    }

    /// The instance the stream yields for `round`, without advancing.
    pub fn instance_at(&self, round: u64) -> Result<FirmInstance> {
        let s = &self.spec;
        let sales = (0..s.m).map(|i| self.draw(round, Role::Sales, i)).collect::<Result<Vec<_>>>()?;
        let production = (0..s.n).map(|i| self.draw(round, Role::Production, i)).collect::<Result<Vec<_>>>()?;
        FirmInstance::new(s.d, s.c, s.c, sales, production)
    }

    fn substream(&self, round: u64, role: Role, index: usize) -> ChaCha8Rng {
        let role_bit = match role {
            Role::Sales => 0u64,
            Role::Production => 1u64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream((round << 24) | (role_bit << 23) | (index as u64 & 0x7f_ffff));
        rng
    }

    fn draw(&self, round: u64, role: Role, index: usize) -> Result<DivisionModel> {
        let mut rng = self.substream(round, role, index);
        let s = &self.spec;
        match (&s.family, role) {
            (FamilySpec::Power(l), Role::Sales) => {
                let scale = l.sales_scale.sample(&mut rng);
                let alpha = l.sales_alpha.sample(&mut rng);
                let shift = l.sales_shift.sample(&mut rng);
                Ok(DivisionModel::PowerSales(PowerSalesParams::new(scale, alpha, shift)?))
            }
            (FamilySpec::Power(l), Role::Production) => {
                let scale = l.production_scale.sample(&mut rng);
                let beta = l.production_beta.sample(&mut rng);
                let shift = l.production_shift.sample(&mut rng);
                Ok(DivisionModel::PowerProduction(PowerProductionParams::new(scale, beta, shift)?))
            }
            (FamilySpec::Quadratic(l), role) => {
                let curvature = sample_curvature(&mut rng, s.d, l.normal_scale, l.delta)?;
                let margin = match role {
                    Role::Sales => l.sales_margin,
                    Role::Production => l.production_margin,
                };
                let linear: Vec<f64> = (0..s.d)
                    .map(|k| {
                        let row = curvature.row(k);
                        let floor = match role {
                            Role::Sales => s.c * row.iter().filter(|v| **v > 0.0).sum::<f64>(),
                            Role::Production => -s.c * row.iter().filter(|v| **v < 0.0).sum::<f64>(),
                        };
                        floor + margin.sample(&mut rng)
                    })
                    .collect();
                Ok(match role {
                    Role::Sales => DivisionModel::QuadSales(QuadSalesParams::new(linear, curvature)?),
                    Role::Production => DivisionModel::QuadProduction(QuadProductionParams::new(linear, curvature)?),
                })
            }
        }
    }
}

/// `C^T C + delta I` with `C` having i.i.d. `N(0, scale^2)` entries.
fn sample_curvature(rng: &mut ChaCha8Rng, d: usize, scale: f64, delta: f64) -> Result<SymMatrix> {
    let cm: Vec<f64> = (0..d * d)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        })
        .collect();
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += cm[l * d + i] * cm[l * d + j];
            }
            data[i * d + j] = acc + if i == j { delta } else { 0.0 };
        }
    }
    SymMatrix::from_row_major(d, data)
}

pub fn sample_instance(stream: &mut ScenarioStream) -> Result<FirmInstance> {
    stream.sample_instance()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRun {
    pub run: RunResult,
    /// Largest sales Lipschitz constant over all sampled rounds.
    pub realized_max_sales_lipschitz: f64,
}

impl DynamicRun {
    /// Realized `b = K' + 1`.
    pub fn realized_b(&self) -> f64 {
        self.realized_max_sales_lipschitz + 1.0
    }
}

/// SOLO FTRL against a freshly sampled firm in every round.
///
/// Round `t` posts a price computed from the excess supplies of rounds before
/// `t`, then observes the round-`t` firm's response to it. With `with_oracle`
/// each record also carries `F_t(z_t*) - F_t(z_t(lambda_t))`.
pub fn run_dynamic(spec: &SamplerSpec, rounds: usize, with_oracle: bool) -> Result<DynamicRun> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("at least one round required".into()));
    }
    let mut stream = ScenarioStream::new(spec.clone())?;
    let d = spec.d;
    let mut state = SoloState::new(d);
    let mut lambda = state.price();
    let mut avg = RunningMean::new(d);
    let mut trace = Vec::with_capacity(rounds);
    let mut kprime = 0.0f64;
    for t in 1..=rounds {
        let inst = stream.sample_instance()?;
        kprime = kprime.max(inst.max_sales_lipschitz());
        let resp = inst.respond(&lambda)?;
        let mut rec = record(t, &lambda, &resp, &mut avg);
        if with_oracle {
            let sol = oracle::solve(&inst, oracle::default_tolerance(d))?;
            rec.oracle_gap = Some(sol.f_star - resp.primal);
        }
        trace.push(rec);
        let (next, price) = solo_step(&state, &resp.excess)?;
        state = next;
        lambda = price;
    }
    let run = RunResult::from_trace(trace, PriceVector::zeros(d), None, Vec::new(), false)?;
    Ok(DynamicRun { run, realized_max_sales_lipschitz: kprime })
}


/// `||(1/T) sum_t excess_t||` for the first `t` rounds of a trace.
pub fn average_excess_norm(run: &RunResult, t: usize) -> Option<f64> {
    run.trace.get(t.checked_sub(1)?).map(|r| norm(&r.running_avg_excess))
}
