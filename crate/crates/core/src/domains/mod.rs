//! Synthetic planning domains standing in for robot experiments.

pub mod audit;
pub mod grid;
pub mod nav;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::experience::{score_plan, ConstraintSet};
use crate::policy::{PlanResult, PlannerOracle};

pub use audit::{correlation_audit, CorrelationAudit};
pub use grid::{GridDomain, GridParams, GridPickInstance};
pub use nav::{NavDomain, NavInstance, NavParams};

/// Outcome of one planner call before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub feasible: bool,
    pub waypoints: Vec<[f64; 2]>,
    pub cost_units: f64,
}

/// A seedable instance distribution plus a planner that accepts an optional
/// solution constraint given as a parameter vector.
pub trait Domain: Send + Sync {
    type Instance: Clone + Send + Sync + Serialize + DeserializeOwned;

    fn name(&self) -> &'static str;

    fn sample_instance(&self, seed: u64) -> Self::Instance;

    /// Plans under an explicit constraint.
    fn plan(&self, instance: &Self::Instance, constraint: &[f64]) -> Plan;

    /// One unconstrained attempt: samples a constraint from the domain's
    /// original constraint space and plans with it. Returns the sampled
    /// constraint alongside the plan.
    fn plan_raw(&self, instance: &Self::Instance, seed: u64) -> (Plan, Option<Vec<f64>>);

    /// Stable identifier for the constraint at `index` with `params`.
    fn constraint_id(&self, index: usize, params: &[f64]) -> String;

    /// Unconstrained attempts allowed per solution during data generation.
    fn raw_budget(&self) -> usize;
}

/// Planner oracle over a fixed constraint set of a domain, scoring
/// infeasible plans with `sentinel`.
pub struct DomainOracle<'a, D: Domain> {
    pub domain: &'a D,
    pub constraints: &'a ConstraintSet,
    pub sentinel: f64,
}

impl<D: Domain> DomainOracle<'_, D> {
    fn to_result(&self, plan: Plan, constraint: Option<Vec<f64>>) -> PlanResult {
        PlanResult {
            score: score_plan(&plan.waypoints, plan.feasible, self.sentinel),
            feasible: plan.feasible,
            plan: plan.waypoints,
            cost_units: plan.cost_units,
            constraint,
        }
    }
}

impl<D: Domain> PlannerOracle for DomainOracle<'_, D> {
    type Instance = D::Instance;

    fn evaluate(&self, instance: &D::Instance, constraint: usize) -> Result<PlanResult> {
        if constraint >= self.constraints.len() {
            return Err(crate::Error::OutOfRange {
                index: constraint,
                len: self.constraints.len(),
            });
        }
        let params = self.constraints.params(constraint);
        let plan = self.domain.plan(instance, params);
        Ok(self.to_result(plan, Some(params.to_vec())))
    }

    fn unconstrained_solve(&self, instance: &D::Instance, seed: u64) -> Result<PlanResult> {
        let (plan, constraint) = self.domain.plan_raw(instance, seed);
        Ok(self.to_result(plan, constraint))
    }
}
