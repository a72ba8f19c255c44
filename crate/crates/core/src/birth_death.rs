//! Finite-buffer transmission queue fed by a Bernoulli stream (Subsystem 3).

use crate::dtmc::{self, SolveError, SteadyState, StochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthDeathParams {
    /// Arrival probability per slot.
    pub lambda: f64,
    /// Service completion probability per slot.
    pub mu: f64,
    /// Buffer capacity.
    pub capacity: usize,
}

impl BirthDeathParams {
    pub fn new(lambda: f64, mu: f64, capacity: usize) -> Self {
        BirthDeathParams { lambda, mu, capacity }
    }

    /// Ratio `pi_{i+1} / pi_i` for `i >= 1`.
    pub fn tail_ratio(&self) -> f64 {
        self.lambda * (1.0 - self.mu) / ((1.0 - self.lambda) * self.mu)
    }
}

/// Tridiagonal `(M + 1) x (M + 1)` transition matrix.
pub fn bd_transition_matrix(params: &BirthDeathParams) -> Result<StochasticMatrix, SolveError> {
    let BirthDeathParams { lambda, mu, capacity: m } = *params;
    let (lb, mb) = (1.0 - lambda, 1.0 - mu);
    let n = m + 1;
    let mut data = vec![0.0; n * n];
    data[0] = lb;
    data[1] = lambda;
    for i in 1..n {
        data[i * n + i - 1] = lb * mu;
        if i < m {
            data[i * n + i] = lambda * mu + lb * mb;
            data[i * n + i + 1] = lambda * mb;
        } else {
            data[i * n + i] = lb * mb + lambda;
        }
    }
    StochasticMatrix::new(n, data)
}

/// Stationary distribution from the product-form balance solution
/// `pi_i = lambda^i (1-mu)^(i-1) / ((1-lambda)^i mu^i) * pi_0`.
///
/// `lambda = 1` has no product form (it divides by `1 - lambda`) and is
/// solved from the matrix instead.
pub fn bd_steady_state(params: &BirthDeathParams) -> Result<SteadyState, SolveError> {
    let BirthDeathParams { lambda, mu, capacity } = *params;
    if lambda >= 1.0 {
        return dtmc::solve_steady_state(&bd_transition_matrix(params)?);
    }
    let mut weights = Vec::with_capacity(capacity + 1);
    weights.push(1.0);
    let first = lambda / ((1.0 - lambda) * mu);
    let ratio = params.tail_ratio();
    let mut w = first;
    for _ in 1..=capacity {
        weights.push(w);
        w *= ratio;
    }
    let total: f64 = weights.iter().sum();
    Ok(SteadyState::new(weights.into_iter().map(|w| w / total).collect()))
}
