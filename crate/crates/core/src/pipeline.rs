//! End-to-end analytical evaluation.
//!
//! The chain is split into four subsystems solved in dependency order:
//! the two tandem pairs `(Q1, Q2)` and `(Q3, Q4)` (independent of each
//! other), then `Q5` fed by `Q4`, then `Q6` fed by `Q2` and `Q5`. Each
//! downstream subsystem only sees the upstream one through its effective
//! departure probability.

use thiserror::Error;

use crate::birth_death::{bd_steady_state, BirthDeathParams};
use crate::dtmc::{SolveError, SteadyState};
use crate::infinite_chain::{
    check_stability, hessenberg_coefficients, q6_arrivals, solve_ztransform, Q6Error, Q6Inputs,
    Q6Solution,
};
use crate::metrics::{aggregate, drop_probabilities, mean_lengths, ArrivalRates};
use crate::model::{ParamError, SystemMetrics, SystemParams};
use crate::qbd::{solve_subsystem, TandemSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Invalid(#[from] ParamError),
    /// `Q6` has no stationary distribution. The finite-queue figures in
    /// `partial` are still valid; its `Q6`, total and delay fields are empty.
    #[error("unstable: lambda6 = {lambda6} >= mu6 = {mu6}")]
    Unstable { lambda6: f64, mu6: f64, partial: Box<SystemMetrics> },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Q6(Q6Error),
}

/// Every intermediate result of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub params: SystemParams,
    /// `(Q1, Q2)`.
    pub subsystem1: TandemSolution,
    /// `(Q3, Q4)`.
    pub subsystem2: TandemSolution,
    /// `Q5`.
    pub subsystem3: SteadyState,
    pub rates: ArrivalRates,
    pub q6_inputs: Q6Inputs,
    /// `None` when `Q6` is unstable.
    pub q6: Option<Q6Solution>,
    pub metrics: SystemMetrics,
}

impl Analysis {
    pub fn is_stable(&self) -> bool {
        self.q6.is_some()
    }
}

/// Run the whole decomposition. An unstable `Q6` is not an error here; it
/// shows up as `q6 == None`.
pub fn evaluate(params: &SystemParams) -> Result<Analysis, AnalysisError> {
    let params = params.validate()?;
    let SystemParams { mu, buffer, .. } = params;

    let (sub1, sub2) = rayon::join(
        || solve_subsystem(params.lambda1(), mu[0], mu[1], buffer[0], buffer[1]),
        || solve_subsystem(params.lambda3(), mu[2], mu[3], buffer[2], buffer[3]),
    );
    let (sub1, sub2) = (sub1?, sub2?);

    let lambda5 = sub2.rates.lambda_next;
    let sub3 = bd_steady_state(&BirthDeathParams::new(lambda5, mu[4], buffer[4]))?;

    let rates = ArrivalRates {
        lambda: [
            params.lambda1(),
            sub1.rates.lambda_out,
            params.lambda3(),
            sub2.rates.lambda_out,
            lambda5,
        ],
    };
    let q6_inputs = q6_arrivals(&sub1, &sub3, mu[1], mu[4], mu[5]);
    let q6 = match check_stability(&q6_inputs) {
        Err(_) => None,
        Ok(()) => match solve_ztransform(&hessenberg_coefficients(&q6_inputs)) {
            Ok(solution) => Some(solution),
            // Rounding at the stability boundary.
            Err(Q6Error::Unstable { .. }) => None,
            Err(e) => return Err(AnalysisError::Q6(e)),
        },
    };

    let drops = drop_probabilities(&sub1, &sub2, &sub3, &rates, &mu);
    let means = mean_lengths(&sub1, &sub2, &sub3);
    let metrics = aggregate(drops, means, q6.as_ref().map(|s| s.mean), params.p);
    Ok(Analysis {
        params,
        subsystem1: sub1,
        subsystem2: sub2,
        subsystem3: sub3,
        rates,
        q6_inputs,
        q6,
        metrics,
    })
}

/// Analytical metrics, failing with [`AnalysisError::Unstable`] when
/// `lambda6 >= mu6`.
pub fn analyze(params: &SystemParams) -> Result<SystemMetrics, AnalysisError> {
    let analysis = evaluate(params)?;
    if analysis.is_stable() {
        Ok(analysis.metrics)
    } else {
        Err(AnalysisError::Unstable {
            lambda6: analysis.q6_inputs.lambda6(),
            mu6: analysis.q6_inputs.mu6,
            partial: Box::new(analysis.metrics),
        })
    }
}
