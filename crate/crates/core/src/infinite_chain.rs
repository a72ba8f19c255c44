//! Unbounded core-processing queue fed by two independent Bernoulli streams
//! (Subsystem 4).
//!
//! Each slot the queue receives 0, 1 or 2 tasks and, when non-empty,
//! completes one service with probability `mu6`. From the empty state the
//! chain moves up by `0..=2` with probabilities `a0..a2`; from an occupied
//! state it moves by `-1..=2` with probabilities `b0..b3`.
//!
//! With `w = 1/z` the generating function of the stationary distribution is
//! `Pi(w) = pi0 (w A(w) - B(w)) / (w - B(w))`. Both polynomials vanish at
//! `w = 1`; after removing that root the expression in `z` is a ratio of two
//! quadratics, so the tail is `pi_i = sum_j r_j p_j^(i-1)` for `i >= 1`
//! with the (always real) poles `p_j` of `b0 z^2 - (b2 + b3) z - b3`.

use thiserror::Error;

use crate::dtmc::{self, BandedMatrix, SolveError, SteadyState};
use crate::qbd::TandemSolution;

/// Poles closer than this are treated as repeated.
pub const REPEATED_POLE_TOL: f64 = 1e-9;
/// Probability mass allowed beyond a truncation level.
pub const TAIL_TOL: f64 = 1e-10;
/// Largest truncation level chosen automatically.
pub const MAX_TRUNCATION: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Q6Error {
    #[error("Q6 is unstable: arrival rate {lambda6} >= service rate {mu6}")]
    Unstable { lambda6: f64, mu6: f64 },
    #[error("truncation at {n} states leaves tail mass {tail:e}")]
    Truncation { n: usize, tail: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Feed probabilities into `Q6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q6Inputs {
    /// Departure probability of `Q2` per slot.
    pub lambda_62: f64,
    /// Departure probability of `Q5` per slot.
    pub lambda_65: f64,
    pub mu6: f64,
}

impl Q6Inputs {
    pub fn lambda6(&self) -> f64 {
        self.lambda_62 + self.lambda_65
    }
}

/// Feed rates from the solved upstream subsystems: `Pr{Q2 > 0} mu2` and
/// `Pr{Q5 > 0} mu5`.
pub fn q6_arrivals(
    subsystem1: &TandemSolution,
    subsystem3: &SteadyState,
    mu2: f64,
    mu5: f64,
    mu6: f64,
) -> Q6Inputs {
    Q6Inputs {
        lambda_62: subsystem1.tx_busy() * mu2,
        lambda_65: (1.0 - subsystem3.get(0)) * mu5,
        mu6,
    }
}

/// `Ok` iff `lambda6 < mu6` strictly.
pub fn check_stability(inputs: &Q6Inputs) -> Result<(), Q6Error> {
    let lambda6 = inputs.lambda6();
    if lambda6 < inputs.mu6 {
        Ok(())
    } else {
        Err(Q6Error::Unstable { lambda6, mu6: inputs.mu6 })
    }
}

/// One-slot transition probabilities of the `Q6` chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessenbergCoefficients {
    /// From the empty state: up by 0, 1, 2.
    pub a: [f64; 3],
    /// From an occupied state: down by 1, stay, up by 1, up by 2.
    pub b: [f64; 4],
}

pub fn hessenberg_coefficients(inputs: &Q6Inputs) -> HessenbergCoefficients {
    let (l2, l5, mu) = (inputs.lambda_62, inputs.lambda_65, inputs.mu6);
    let (l2b, l5b, mub) = (1.0 - l2, 1.0 - l5, 1.0 - mu);
    HessenbergCoefficients {
        a: [l2b * l5b, l2 * l5b + l5 * l2b, l2 * l5],
        b: [
            l2b * l5b * mu,
            l5b * l2b * mub + l5b * l2 * mu + l5 * l2b * mu,
            l2 * l5b * mub + l2b * l5 * mub + l2 * l5 * mu,
            l2 * l5 * mub,
        ],
    }
}

impl HessenbergCoefficients {
    /// Mean arrivals per slot, `A'(1)` in `w`.
    pub fn arrival_rate(&self) -> f64 {
        self.a[1] + 2.0 * self.a[2]
    }

    /// Expected change per slot from an occupied state.
    pub fn drift(&self) -> f64 {
        self.b[2] + 2.0 * self.b[3] - self.b[0]
    }

    /// Service rate implied by the coefficients.
    pub fn service_rate(&self) -> f64 {
        self.arrival_rate() - self.drift()
    }

    /// `A'(1)` and `B'(1)` with `A(z) = sum a_i z^-i`, `B(z) = sum b_i z^-i`.
    pub fn z_derivatives(&self) -> (f64, f64) {
        let da = -(self.a[1] + 2.0 * self.a[2]);
        let db = -(self.b[1] + 2.0 * self.b[2] + 3.0 * self.b[3]);
        (da, db)
    }

    /// `(1 + B'(1)) / (1 + B'(1) - A'(1))`.
    pub fn empty_probability(&self) -> f64 {
        let (da, db) = self.z_derivatives();
        (1.0 + db) / (1.0 + db - da)
    }

    fn check_stable(&self) -> Result<(), Q6Error> {
        if self.drift() < 0.0 {
            Ok(())
        } else {
            Err(Q6Error::Unstable { lambda6: self.arrival_rate(), mu6: self.service_rate() })
        }
    }
}

/// How `pi_i` is evaluated for `i >= 1`.
#[derive(Debug, Clone, PartialEq)]
enum Tail {
    Poles,
    /// Truncated-chain probabilities, used when poles coincide.
    Table(Vec<f64>),
}

/// Stationary distribution of `Q6`.
#[derive(Debug, Clone, PartialEq)]
pub struct Q6Solution {
    pub pi0: f64,
    /// Polynomial part of the expansion; only `c_0` can be nonzero here.
    pub direct: Vec<f64>,
    pub poles: Vec<f64>,
    pub residues: Vec<f64>,
    tail: Tail,
    /// Mean queue length.
    pub mean: f64,
}

impl Q6Solution {
    /// `pi_i`.
    pub fn pi(&self, i: usize) -> f64 {
        if i == 0 {
            return self.pi0;
        }
        match &self.tail {
            Tail::Poles => {
                let direct = self.direct.get(i).copied().unwrap_or(0.0);
                let exp = (i - 1) as i32;
                direct
                    + self.poles.iter().zip(&self.residues).map(|(p, r)| r * p.powi(exp)).sum::<f64>()
            }
            Tail::Table(probs) => probs.get(i).copied().unwrap_or(0.0),
        }
    }

    /// Whether the tail comes from the pole expansion (as opposed to the
    /// truncated-chain fallback).
    pub fn uses_poles(&self) -> bool {
        matches!(self.tail, Tail::Poles)
    }

    /// Largest pole magnitude; the tail decays like this power.
    pub fn decay_rate(&self) -> f64 {
        self.poles.iter().map(|p| p.abs()).fold(0.0, f64::max)
    }

    /// `sum_{i >= 1} i pi_i` from the pole expansion in closed form.
    pub fn mean_from_poles(&self) -> Option<f64> {
        self.uses_poles().then(|| {
            self.poles.iter().zip(&self.residues).map(|(p, r)| r / ((1.0 - p) * (1.0 - p))).sum()
        })
    }

    /// Probabilities `pi_0 .. pi_{n-1}`.
    pub fn head(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.pi(i)).collect()
    }
}

/// Solve the `Q6` chain through its generating function.
///
/// Falls back to a truncated chain when the two poles coincide, which
/// only happens when `b2 = b3 = 0` (no arrivals, or `mu6 = 1` with one feed
/// idle).
pub fn solve_ztransform(coeffs: &HessenbergCoefficients) -> Result<Q6Solution, Q6Error> {
    coeffs.check_stable()?;
    let [a0, _, a2] = coeffs.a;
    let [b0, b1, b2, b3] = coeffs.b;
    let pi0 = coeffs.empty_probability();

    // Denominator b0 z^2 - (b2 + b3) z - b3; numerator n0 z^2 + n1 z + n2.
    let (qa, qb, qc) = (b0, -(b2 + b3), -b3);
    let num = [b0, b0 + b1 - a0, a2 - b3];
    let disc = qb * qb - 4.0 * qa * qc;
    let q = -0.5 * (qb + qb.signum() * disc.max(0.0).sqrt());
    let poles = if q == 0.0 { [0.0, 0.0] } else { [q / qa, qc / q] };

    if (poles[0] - poles[1]).abs() < REPEATED_POLE_TOL {
        let n = truncation_level(poles[0].abs().max(poles[1].abs()))?;
        let table = truncated_solve(coeffs, n)?;
        let mut solution = Q6Solution {
            pi0,
            direct: vec![pi0],
            poles: poles.to_vec(),
            residues: vec![],
            tail: Tail::Table(table.probs().to_vec()),
            mean: 0.0,
        };
        solution.mean = q6_mean(&solution);
        return Ok(solution);
    }
    for &p in &poles {
        if p.abs() >= 1.0 {
            return Err(Q6Error::Unstable { lambda6: coeffs.arrival_rate(), mu6: coeffs.service_rate() });
        }
    }

    let eval = |z: f64| (num[0] * z + num[1]) * z + num[2];
    let residues = vec![
        pi0 * eval(poles[0]) / (qa * (poles[0] - poles[1])),
        pi0 * eval(poles[1]) / (qa * (poles[1] - poles[0])),
    ];
    let mut solution = Q6Solution {
        pi0,
        // Equal numerator and denominator degree: the direct term is
        // pi0 * n0 / b0 = pi0.
        direct: vec![pi0 * num[0] / qa],
        poles: poles.to_vec(),
        residues,
        tail: Tail::Poles,
        mean: 0.0,
    };
    solution.mean = q6_mean(&solution);
    Ok(solution)
}

/// Truncation level whose geometric tail `rate^n` is negligible.
fn truncation_level(rate: f64) -> Result<usize, Q6Error> {
    if rate <= 0.0 {
        return Ok(64);
    }
    let n = (30.0 / -rate.ln()).ceil() + 64.0;
    if !n.is_finite() || n > MAX_TRUNCATION as f64 {
        return Err(Q6Error::Truncation { n: MAX_TRUNCATION, tail: rate.powf(MAX_TRUNCATION as f64) });
    }
    Ok(n as usize)
}

/// Banded `n`-state truncation; jumps past the last state land on it.
pub fn truncated_matrix(coeffs: &HessenbergCoefficients, n: usize) -> BandedMatrix {
    assert!(n >= 1, "truncation needs at least one state");
    let last = n - 1;
    let mut band = BandedMatrix::zeros(n, 1, 2);
    for (k, &a) in coeffs.a.iter().enumerate() {
        band.add(0, k.min(last), a);
    }
    for i in 1..n {
        for (k, &b) in coeffs.b.iter().enumerate() {
            band.add(i, (i + k - 1).min(last), b);
        }
    }
    band
}

/// Stationary distribution of the `n`-state truncation.
///
/// The mass beyond `n` is extrapolated from the decay observed in the middle
/// of the solution and must stay below [`TAIL_TOL`].
pub fn truncated_solve(coeffs: &HessenbergCoefficients, n: usize) -> Result<SteadyState, Q6Error> {
    coeffs.check_stable()?;
    let state = dtmc::solve_banded(&truncated_matrix(coeffs, n))?;
    let tail = tail_estimate(state.probs());
    if tail > TAIL_TOL {
        return Err(Q6Error::Truncation { n, tail });
    }
    Ok(state)
}

fn tail_estimate(probs: &[f64]) -> f64 {
    let n = probs.len();
    if n < 8 {
        return probs[n - 1];
    }
    let mid = n / 2;
    let (x, y) = (probs[mid], probs[mid + 1]);
    // Already underflowed: the ratio of denormals is noise, and the mass
    // left is bounded by what remains in the upper half.
    if x < 1e-250 {
        return probs[mid..].iter().sum();
    }
    let ratio = y / x;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    x * ratio.powi((n - mid) as i32) / (1.0 - ratio)
}

/// Mean length by direct summation of `i * pi_i`, carried until the
/// geometric tail bound is below `1e-14`.
pub fn q6_mean(solution: &Q6Solution) -> f64 {
    let limit = match &solution.tail {
        Tail::Table(probs) => probs.len(),
        Tail::Poles => {
            let rate = solution.decay_rate();
            if rate <= 0.0 {
                3
            } else {
                // i * rate^i < 1e-14 with room for the factor i.
                ((40.0 / -rate.ln()) * 1.5).ceil() as usize + 64
            }
        }
    };
    (1..limit).map(|i| i as f64 * solution.pi(i)).sum()
}
