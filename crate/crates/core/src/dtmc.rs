//! Finite discrete-time Markov chains and their stationary distributions.
//!
//! Two solvers are provided. [`solve_steady_state`] is a dense direct solve
//! (one balance equation replaced by normalization) and serves as the
//! reference for every structured construction in this crate.
//! [`solve_banded`] runs the Grassmann-Taksar-Heyman state reduction on a
//! banded matrix; it needs no subtractions, is O(n * lower * upper) and is
//! what the pipeline uses for the tandem and truncated chains.

use thiserror::Error;

/// Tolerance on row sums of a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on `|pi P - pi|_inf` for an accepted solution.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("matrix is not square: {len} entries for dimension {n}")]
    Shape { n: usize, len: usize },
    #[error("entry ({row}, {col}) = {value} is not a probability")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("linear system is singular at pivot {0}")]
    Singular(usize),
    #[error("state {0} cannot reach any lower-indexed state; the chain is reducible")]
    Reducible(usize),
    #[error("solution residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("solution entry {index} = {value} is negative")]
    Negative { index: usize, value: f64 },
    #[error("steady state has no (level, phase) shape")]
    MissingShape,
}

/// Dense row-stochastic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Wrap row-major `data`, checking entries and row sums.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, SolveError> {
        if data.len() != n * n || n == 0 {
            return Err(SolveError::Shape { n, len: data.len() });
        }
        for (row, chunk) in data.chunks(n).enumerate() {
            for (col, &value) in chunk.iter().enumerate() {
                if !(0.0..=1.0 + ROW_SUM_TOL).contains(&value) {
                    return Err(SolveError::Entry { row, col, value });
                }
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(SolveError::RowSum { row, sum });
            }
        }
        Ok(StochasticMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SolveError> {
        let n = rows.len();
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(n, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        StochasticMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_defect(&self) -> f64 {
        self.data
            .chunks(self.n)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `pi P` for a row vector `pi`.
    pub fn left_mul(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += w * p;
            }
        }
        out
    }

    /// Banded copy with the smallest bandwidths that hold every nonzero.
    pub fn to_banded(&self) -> BandedMatrix {
        let (mut lower, mut upper) = (0, 0);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) != 0.0 {
                    lower = lower.max(i.saturating_sub(j));
                    upper = upper.max(j.saturating_sub(i));
                }
            }
        }
        let mut band = BandedMatrix::zeros(self.n, lower, upper);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    band.set(i, j, v);
                }
            }
        }
        band
    }
}

/// Square matrix storing only the diagonals `j - i` in `[-lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandedMatrix { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.lower >= i && i + self.upper >= j
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.cols(i).map(|j| self.get(i, j)).sum()
    }

    /// Check entries and row sums as [`StochasticMatrix::new`] does.
    pub fn check_stochastic(&self) -> Result<(), SolveError> {
        for i in 0..self.n {
            for j in self.cols(i) {
                let value = self.get(i, j);
                if !(0.0..=1.0 + ROW_SUM_TOL).contains(&value) {
                    return Err(SolveError::Entry { row: i, col: j, value });
                }
            }
            let sum = self.row_sum(i);
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(SolveError::RowSum { row: i, sum });
            }
        }
        Ok(())
    }

    /// `|pi P - pi|_inf`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; self.n];
        for (i, &w) in pi.iter().enumerate() {
            for j in self.cols(i) {
                out[j] += w * self.get(i, j);
            }
        }
        out.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Result<StochasticMatrix, SolveError> {
        let mut data = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in self.cols(i) {
                data[i * self.n + j] = self.get(i, j);
            }
        }
        StochasticMatrix::new(self.n, data)
    }
}

/// Which coordinate of a joint `(level, phase)` state to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Level,
    Phase,
}

/// Stationary distribution, optionally carrying a level-major
/// `(levels, phases)` shape for two-queue chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    probs: Vec<f64>,
    shape: Option<(usize, usize)>,
}

impl SteadyState {
    pub fn new(probs: Vec<f64>) -> Self {
        SteadyState { probs, shape: None }
    }

    /// Point mass on state `index` of an `n`-state chain.
    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        SteadyState::new(probs)
    }

    /// Attach a `(levels, phases)` shape. State `(i, j)` is at `i * phases + j`.
    ///
    /// # Panics
    /// If the shape does not cover the vector exactly.
    pub fn with_shape(mut self, levels: usize, phases: usize) -> Self {
        assert_eq!(levels * phases, self.probs.len(), "shape does not match length");
        self.shape = Some((levels, phases));
        self
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Joint probability of `(level, phase)`.
    ///
    /// # Panics
    /// If the state carries no shape.
    pub fn joint(&self, level: usize, phase: usize) -> f64 {
        let (_, phases) = self.shape.expect("steady state has no shape");
        self.probs[level * phases + phase]
    }

    /// Sum the joint distribution over the other axis.
    pub fn marginal(&self, axis: Axis) -> Result<Vec<f64>, SolveError> {
        let (levels, phases) = self.shape.ok_or(SolveError::MissingShape)?;
        let mut out = match axis {
            Axis::Level => vec![0.0; levels],
            Axis::Phase => vec![0.0; phases],
        };
        for (k, &p) in self.probs.iter().enumerate() {
            let idx = match axis {
                Axis::Level => k / phases,
                Axis::Phase => k % phases,
            };
            out[idx] += p;
        }
        Ok(out)
    }

    /// `sum_i i * pi_i` over a one-dimensional chain.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    /// `|pi P - pi|_inf` against a dense matrix.
    pub fn residual(&self, matrix: &StochasticMatrix) -> f64 {
        matrix
            .left_mul(&self.probs)
            .iter()
            .zip(&self.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense direct solve of `pi P = pi`, `pi 1 = 1`.
///
/// The transposed balance system `(P^T - I) x = 0` has its last equation
/// replaced by the normalization and is solved by Gaussian elimination with
/// partial pivoting.
pub fn solve_steady_state(matrix: &StochasticMatrix) -> Result<SteadyState, SolveError> {
    let n = matrix.dim();
    if n == 1 {
        return Ok(SteadyState::new(vec![1.0]));
    }
    // a[r][c] = P[c][r] - delta(r, c); the last row is all ones.
    let mut a = vec![0.0; n * n];
    for r in 0..n - 1 {
        for c in 0..n {
            a[r * n + c] = matrix.get(c, r) - if r == c { 1.0 } else { 0.0 };
        }
    }
    a[(n - 1) * n..].fill(1.0);
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;

    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))
            .expect("non-empty range");
        if a[pivot * n + k].abs() < 1e-300 {
            return Err(SolveError::Singular(k));
        }
        if pivot != k {
            for c in 0..n {
                a.swap(k * n + c, pivot * n + c);
            }
            b.swap(k, pivot);
        }
        let diag = a[k * n + k];
        for r in k + 1..n {
            let factor = a[r * n + k] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in k..n {
                a[r * n + c] -= factor * a[k * n + c];
            }
            b[r] -= factor * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
        x[k] = (b[k] - tail) / a[k * n + k];
    }

    let pi = clean_distribution(x)?;
    let state = SteadyState::new(pi);
    let residual = state.residual(matrix);
    if residual > RESIDUAL_TOL {
        return Err(SolveError::Residual(residual));
    }
    Ok(state)
}

/// Stationary distribution of a banded stochastic matrix by GTH state
/// reduction.
///
/// Eliminating the highest state first keeps all fill-in inside the band,
/// so the matrix is reduced in place.
///
/// Chains with transient states that cannot reach state 0 (for example a
/// queue that is never empty again once it receives a task) are restricted
/// to their unique closed class first; transient states get probability 0.
pub fn solve_banded(matrix: &BandedMatrix) -> Result<SteadyState, SolveError> {
    match gth_banded(matrix) {
        Err(SolveError::Reducible(_)) => solve_on_closed_class(matrix),
        other => other,
    }
}

fn gth_banded(matrix: &BandedMatrix) -> Result<SteadyState, SolveError> {
    let n = matrix.dim();
    let (lower, upper) = matrix.bandwidths();
    let mut m = matrix.clone();
    // Outflow of state k towards states < k, kept for the back substitution.
    let mut out_low = vec![0.0; n];
    for k in (1..n).rev() {
        let lo_j = k.saturating_sub(lower);
        let s: f64 = (lo_j..k).map(|j| m.get(k, j)).sum();
        if s <= 0.0 {
            return Err(SolveError::Reducible(k));
        }
        out_low[k] = s;
        for i in k.saturating_sub(upper)..k {
            let into_k = m.get(i, k);
            if into_k == 0.0 {
                continue;
            }
            let scale = into_k / s;
            for j in lo_j..k {
                let v = m.get(k, j);
                if v != 0.0 {
                    m.add(i, j, scale * v);
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    for k in 1..n {
        let inflow: f64 = (k.saturating_sub(upper)..k).map(|i| x[i] * m.get(i, k)).sum();
        x[k] = inflow / out_low[k];
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    let residual = matrix.residual(&x);
    if residual > RESIDUAL_TOL {
        return Err(SolveError::Residual(residual));
    }
    Ok(SteadyState::new(x))
}

fn solve_on_closed_class(matrix: &BandedMatrix) -> Result<SteadyState, SolveError> {
    let n = matrix.dim();
    let class = closed_class(matrix)?;
    let (lower, upper) = matrix.bandwidths();
    // Dropping states only shrinks index distances, so the band still fits.
    let mut sub = BandedMatrix::zeros(class.len(), lower, upper);
    let mut position = vec![usize::MAX; n];
    for (k, &s) in class.iter().enumerate() {
        position[s] = k;
    }
    for (k, &s) in class.iter().enumerate() {
        for j in matrix.cols(s) {
            let v = matrix.get(s, j);
            if v != 0.0 {
                if position[j] == usize::MAX {
                    return Err(SolveError::Reducible(s));
                }
                sub.add(k, position[j], v);
            }
        }
    }
    let reduced = gth_banded(&sub)?;
    let mut probs = vec![0.0; n];
    for (k, &s) in class.iter().enumerate() {
        probs[s] = reduced.get(k);
    }
    Ok(SteadyState::new(probs))
}

/// States of the unique closed communicating class, in increasing order.
fn closed_class(matrix: &BandedMatrix) -> Result<Vec<usize>, SolveError> {
    let n = matrix.dim();
    let succ = |i: usize| matrix.cols(i).filter(move |&j| matrix.get(i, j) != 0.0);
    let pred = |j: usize| {
        let (lower, upper) = matrix.bandwidths();
        (j.saturating_sub(upper)..(j + lower + 1).min(n)).filter(move |&i| matrix.get(i, j) != 0.0)
    };

    // Kosaraju: finishing order on the forward graph, then components on
    // the reverse graph in decreasing finishing time.
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, succ(root).collect::<Vec<_>>().into_iter())];
        while let Some((node, iter)) = stack.last_mut() {
            if let Some(next) = iter.next() {
                if !seen[next] {
                    seen[next] = true;
                    stack.push((next, succ(next).collect::<Vec<_>>().into_iter()));
                }
            } else {
                order.push(*node);
                stack.pop();
            }
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut count = 0;
    for &root in order.iter().rev() {
        if component[root] != usize::MAX {
            continue;
        }
        component[root] = count;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            for prev in pred(node) {
                if component[prev] == usize::MAX {
                    component[prev] = count;
                    stack.push(prev);
                }
            }
        }
        count += 1;
    }
    let mut closed = vec![true; count];
    for i in 0..n {
        if succ(i).any(|j| component[j] != component[i]) {
            closed[component[i]] = false;
        }
    }
    let mut classes = closed.iter().enumerate().filter(|(_, c)| **c).map(|(k, _)| k);
    let (Some(class), None) = (classes.next(), classes.next()) else {
        return Err(SolveError::Reducible(0));
    };
    Ok((0..n).filter(|&i| component[i] == class).collect())
}

/// Zero out rounding-level negatives and renormalize.
fn clean_distribution(mut x: Vec<f64>) -> Result<Vec<f64>, SolveError> {
    for (index, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -1e-13 {
                return Err(SolveError::Negative { index, value: *v });
            }
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    Ok(x)
}
