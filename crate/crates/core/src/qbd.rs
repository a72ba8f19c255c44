//! Finite quasi-birth-death model of a processing queue feeding a
//! transmission queue (Subsystems 1 and 2).
//!
//! The level is the processing-queue length and the phase is the
//! transmission-queue length; states are ordered level-major. Within a slot
//! both queues may complete service at the start, and the task released by
//! the processing queue joins the transmission queue at the end of the same
//! slot.

use crate::dtmc::{self, BandedMatrix, SolveError, SteadyState, StochasticMatrix};

/// Small dense square matrix used for the QBD blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    n: usize,
    data: Vec<f64>,
}

impl Block {
    pub fn zeros(n: usize) -> Self {
        Block { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Block {
        Block { n: self.n, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// `self + other`.
    pub fn plus(&self, other: &Block) -> Block {
        assert_eq!(self.n, other.n);
        Block {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// Phase transitions of the transmission queue over one slot: `(no_feed,
/// feed)`. `no_feed` is used when the processing queue releases nothing,
/// `feed` when it hands over one task.
///
/// A full transmission queue that is fed and completes no service drops the
/// fed task, so the last row of `feed` is a unit vector on the last phase.
pub fn intra_phase_matrices(mu_tx: f64, capacity: usize) -> (Block, Block) {
    let n = capacity + 1;
    let stay = 1.0 - mu_tx;
    let mut no_feed = Block::zeros(n);
    let mut feed = Block::zeros(n);
    no_feed.set(0, 0, 1.0);
    feed.set(0, 1, 1.0);
    for j in 1..n {
        no_feed.set(j, j - 1, mu_tx);
        no_feed.set(j, j, stay);
        let up = (j + 1).min(capacity);
        feed.set(j, j, mu_tx);
        feed.data[j * n + up] += stay;
    }
    (no_feed, feed)
}

/// Block matrices of a level-structured transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocks {
    /// Level 0 to level 0.
    pub b: Block,
    /// Level 0 to level 1.
    pub c: Block,
    /// Level 1 to level 0.
    pub e: Block,
    /// One level up.
    pub a0: Block,
    /// Same level.
    pub a1: Block,
    /// One level down.
    pub a2: Block,
}

impl QbdBlocks {
    pub fn phases(&self) -> usize {
        self.b.dim()
    }

    /// Largest row-sum defect over the boundary, interior and final block
    /// row groups.
    pub fn max_row_defect(&self) -> f64 {
        let last = self.a0.plus(&self.a1);
        let groups: [Vec<&Block>; 4] = [
            vec![&self.b, &self.c],
            vec![&self.e, &self.a1, &self.a0],
            vec![&self.a2, &self.a1, &self.a0],
            vec![&self.a2, &last],
        ];
        let mut worst: f64 = 0.0;
        for group in &groups {
            for i in 0..self.phases() {
                let s: f64 = group.iter().map(|blk| blk.row_sum(i)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// Blocks for arrival probability `lambda_in` into the processing queue.
pub fn build_blocks(lambda_in: f64, mu_proc: f64, mu_tx: f64, tx_capacity: usize) -> QbdBlocks {
    let (no_feed, feed) = intra_phase_matrices(mu_tx, tx_capacity);
    let lambda_bar = 1.0 - lambda_in;
    let mu_bar = 1.0 - mu_proc;
    QbdBlocks {
        b: no_feed.scaled(lambda_bar),
        c: no_feed.scaled(lambda_in),
        e: feed.scaled(lambda_bar * mu_proc),
        a0: no_feed.scaled(lambda_in * mu_bar),
        a1: no_feed.scaled(lambda_bar * mu_bar).plus(&feed.scaled(lambda_in * mu_proc)),
        a2: feed.scaled(lambda_bar * mu_proc),
    }
}

/// Blocks in block position `(level, level + offset)`, `offset` in {-1, 0, 1}.
fn block_at(blocks: &QbdBlocks, levels: usize, level: usize, offset: isize) -> Option<Block> {
    let last = levels - 1;
    match (level, offset) {
        (0, 0) => Some(blocks.b.clone()),
        (0, 1) => Some(blocks.c.clone()),
        (0, _) => None,
        (1, -1) => Some(blocks.e.clone()),
        (_, -1) => Some(blocks.a2.clone()),
        (l, 0) if l == last => Some(blocks.a0.plus(&blocks.a1)),
        (l, 1) if l == last => None,
        (_, 0) => Some(blocks.a1.clone()),
        (_, 1) => Some(blocks.a0.clone()),
        _ => None,
    }
}

fn for_each_entry(blocks: &QbdBlocks, max_level: usize, mut f: impl FnMut(usize, usize, f64)) {
    let m = blocks.phases();
    let levels = max_level + 1;
    for level in 0..levels {
        for offset in -1isize..=1 {
            let Some(block) = block_at(blocks, levels, level, offset) else { continue };
            let col_level = (level as isize + offset) as usize;
            for i in 0..m {
                for j in 0..m {
                    let v = block.get(i, j);
                    if v != 0.0 {
                        f(level * m + i, col_level * m + j, v);
                    }
                }
            }
        }
    }
}

/// Dense block-tridiagonal transition matrix with levels `0..=max_level`.
///
/// First block row `[B C]`, second `[E A1 A0]`, interior `[A2 A1 A0]`,
/// last `[A2 (A0 + A1)]`.
pub fn assemble(blocks: &QbdBlocks, max_level: usize) -> Result<StochasticMatrix, SolveError> {
    assert!(max_level >= 1, "need at least two levels");
    let n = (max_level + 1) * blocks.phases();
    let mut data = vec![0.0; n * n];
    for_each_entry(blocks, max_level, |r, c, v| data[r * n + c] += v);
    StochasticMatrix::new(n, data)
}

/// Same matrix as [`assemble`], in banded storage.
pub fn assemble_banded(blocks: &QbdBlocks, max_level: usize) -> Result<BandedMatrix, SolveError> {
    assert!(max_level >= 1, "need at least two levels");
    let m = blocks.phases();
    let n = (max_level + 1) * m;
    // Phase moves by at most one, so a level step spans at most m + 1 states.
    let mut band = BandedMatrix::zeros(n, m + 1, m + 1);
    for_each_entry(blocks, max_level, |r, c, v| band.add(r, c, v));
    band.check_stochastic()?;
    Ok(band)
}

/// Effective rates around one tandem subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TandemRates {
    /// External arrival probability into the processing queue.
    pub lambda_in: f64,
    /// Effective arrival probability into the transmission queue,
    /// `Pr{processing > 0} * mu_proc`.
    pub lambda_out: f64,
    /// Effective departure probability of the transmission queue,
    /// `Pr{transmission > 0} * mu_tx`, feeding the next hop.
    pub lambda_next: f64,
}

/// Solved tandem subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct TandemSolution {
    /// Joint distribution shaped `(proc_capacity + 1, tx_capacity + 1)`.
    pub state: SteadyState,
    pub rates: TandemRates,
}

impl TandemSolution {
    /// `Pr{processing queue > 0}`.
    pub fn proc_busy(&self) -> f64 {
        let (_, phases) = self.state.shape().expect("tandem state is shaped");
        self.state.probs()[phases..].iter().sum()
    }

    /// `Pr{transmission queue > 0}`.
    pub fn tx_busy(&self) -> f64 {
        let (_, phases) = self.state.shape().expect("tandem state is shaped");
        self.state
            .probs()
            .iter()
            .enumerate()
            .filter(|(k, _)| k % phases != 0)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Build the tandem chain, solve it, and derive the downstream rates.
pub fn solve_subsystem(
    lambda_in: f64,
    mu_proc: f64,
    mu_tx: f64,
    proc_capacity: usize,
    tx_capacity: usize,
) -> Result<TandemSolution, SolveError> {
    let levels = proc_capacity + 1;
    let phases = tx_capacity + 1;
    let state = if lambda_in == 0.0 {
        // Empty forever once drained; the chain is not irreducible here.
        SteadyState::point_mass(levels * phases, 0)
    } else {
        let blocks = build_blocks(lambda_in, mu_proc, mu_tx, tx_capacity);
        dtmc::solve_banded(&assemble_banded(&blocks, proc_capacity)?)?
    };
    let mut solution = TandemSolution {
        state: state.with_shape(levels, phases),
        rates: TandemRates { lambda_in, lambda_out: 0.0, lambda_next: 0.0 },
    };
    solution.rates.lambda_out = solution.proc_busy() * mu_proc;
    solution.rates.lambda_next = solution.tx_busy() * mu_tx;
    Ok(solution)
}
