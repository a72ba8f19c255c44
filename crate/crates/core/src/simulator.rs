//! Slot-accurate simulation of the full six-queue chain.
//!
//! Each slot:
//! 1. every non-empty queue completes one service with its own probability
//!    (independent draws); the completed task is in flight to its successor;
//! 2. a task reaches the base station with probability `p` and is routed to
//!    `Q1` with probability `alpha`, else to `Q3`;
//! 3. in-flight and external tasks are appended. A task whose target is
//!    still full after this slot's departures is dropped and charged to the
//!    target queue. `Q6` may receive two tasks in one slot.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`;
//! replication `k` uses stream `k` of that seed, so run 0 of a replication
//! equals a plain [`simulate`] call.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::model::{ParamError, QueueId, SystemMetrics, SystemParams, NUM_FINITE, NUM_QUEUES};

/// Identifier of the generator and stream-derivation rule, recorded with
/// every result.
pub const RNG_ID: &str = "chacha8:seed_from_u64(seed):stream=run_index";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] ParamError),
    #[error("warmup {warmup} must be smaller than slots {slots}")]
    Warmup { warmup: u64, slots: u64 },
    #[error("need at least 2 runs for a replication, got {0}")]
    Runs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Total slots, warmup included.
    pub slots: u64,
    /// Leading slots excluded from statistics.
    pub warmup: u64,
    pub seed: u64,
    /// Occupancies of `Q6` at or above this share the last histogram bin.
    pub q6_cap: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { slots: 1_000_000, warmup: 10_000, seed: 1, q6_cap: None }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.warmup >= self.slots {
            return Err(SimError::Warmup { warmup: self.warmup, slots: self.slots });
        }
        Ok(())
    }

    pub fn measured_slots(&self) -> u64 {
        self.slots - self.warmup
    }
}

/// Event counts over the measurement window, indexed by queue.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimCounters {
    /// Tasks reaching the base station.
    pub external_arrivals: u64,
    /// Tasks arriving at each queue.
    pub offered: [u64; NUM_QUEUES],
    pub accepted: [u64; NUM_QUEUES],
    pub dropped: [u64; NUM_QUEUES],
    pub departures: [u64; NUM_QUEUES],
    /// Slots in which `Q6` received 0, 1 and 2 tasks.
    pub q6_batches: [u64; 3],
}

/// Task conservation over the whole run, starting from an empty system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlowAccount {
    pub external_arrivals: u64,
    pub system_departures: u64,
    pub drops: u64,
    pub final_occupancy: u64,
}

impl FlowAccount {
    /// `arrivals - (departures + drops + occupancy)`; zero for every run.
    pub fn residual(&self) -> i128 {
        i128::from(self.external_arrivals)
            - i128::from(self.system_departures)
            - i128::from(self.drops)
            - i128::from(self.final_occupancy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub params: SystemParams,
    pub config: SimConfig,
    /// Stream index within the seed.
    pub stream: u64,
    pub rng: &'static str,
    /// Empirical counterparts of the analytical metrics, per measured slot.
    pub metrics: SystemMetrics,
    pub counters: SimCounters,
    /// Occupancy histograms sampled at the end of each measured slot.
    pub histograms: Vec<Vec<u64>>,
    pub flow: FlowAccount,
}

impl SimResult {
    pub fn measured_slots(&self) -> u64 {
        self.config.measured_slots()
    }

    /// Empirical feed probabilities into `Q6` from `Q2` and `Q5`.
    pub fn q6_feed_rates(&self) -> (f64, f64) {
        let n = self.measured_slots() as f64;
        let d = &self.counters.departures;
        (d[QueueId::Q2.index()] as f64 / n, d[QueueId::Q5.index()] as f64 / n)
    }

    /// Fraction of slots with 0, 1 and 2 arrivals at `Q6`.
    pub fn q6_batch_distribution(&self) -> [f64; 3] {
        let n = self.measured_slots() as f64;
        self.counters.q6_batches.map(|c| c as f64 / n)
    }

    /// Long-run departure probability of queue `q`.
    pub fn departure_rate(&self, q: QueueId) -> f64 {
        self.counters.departures[q.index()] as f64 / self.measured_slots() as f64
    }

    /// Normalized occupancy histogram of queue `q`.
    pub fn occupancy(&self, q: QueueId) -> Vec<f64> {
        let n = self.measured_slots() as f64;
        self.histograms[q.index()].iter().map(|&c| c as f64 / n).collect()
    }
}

/// One simulation run on stream 0 of `config.seed`.
pub fn simulate(params: &SystemParams, config: &SimConfig) -> Result<SimResult, SimError> {
    run(params, config, 0)
}

fn run(params: &SystemParams, config: &SimConfig, stream: u64) -> Result<SimResult, SimError> {
    let params = params.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let mu = params.mu;
    let cap = params.buffer;
    let q6 = QueueId::Q6.index();

    let mut len = [0u64; NUM_QUEUES];
    let mut counters = SimCounters::default();
    let mut flow = FlowAccount::default();
    let mut occupancy_sum = [0u128; NUM_QUEUES];
    let mut histograms: Vec<Vec<u64>> = cap.iter().map(|&m| vec![0; m + 1]).collect();
    histograms.push(vec![0; 1]);

    for slot in 0..config.slots {
        let measuring = slot >= config.warmup;

        let mut done = [false; NUM_QUEUES];
        for q in 0..NUM_QUEUES {
            if len[q] > 0 && rng.random_bool(mu[q]) {
                len[q] -= 1;
                done[q] = true;
            }
        }
        let external = rng.random_bool(params.p);
        let to_route1 = external && rng.random_bool(params.alpha);

        // Arrivals per finite queue this slot (at most one each).
        let incoming: [bool; NUM_FINITE] = [
            external && to_route1,
            done[0],
            external && !to_route1,
            done[2],
            done[3],
        ];
        let q6_batch = usize::from(done[1]) + usize::from(done[4]);

        flow.external_arrivals += u64::from(external);
        if done[q6] {
            flow.system_departures += 1;
        }
        for (q, &arrives) in incoming.iter().enumerate() {
            if !arrives {
                continue;
            }
            let accepted = len[q] < cap[q] as u64;
            if accepted {
                len[q] += 1;
            } else {
                flow.drops += 1;
            }
            if measuring {
                counters.offered[q] += 1;
                if accepted {
                    counters.accepted[q] += 1;
                } else {
                    counters.dropped[q] += 1;
                }
            }
        }
        len[q6] += q6_batch as u64;

        if measuring {
            counters.external_arrivals += u64::from(external);
            counters.offered[q6] += q6_batch as u64;
            counters.accepted[q6] += q6_batch as u64;
            counters.q6_batches[q6_batch] += 1;
            for q in 0..NUM_QUEUES {
                counters.departures[q] += u64::from(done[q]);
                occupancy_sum[q] += u128::from(len[q]);
            }
            for (hist, &l) in histograms[..NUM_FINITE].iter_mut().zip(&len) {
                hist[l as usize] += 1;
            }
            let mut bin = len[q6] as usize;
            if let Some(c) = config.q6_cap {
                bin = bin.min(c);
            }
            let hist = &mut histograms[q6];
            if bin >= hist.len() {
                hist.resize(bin + 1, 0);
            }
            hist[bin] += 1;
        }
    }
    flow.final_occupancy = len.iter().sum();

    let n = config.measured_slots() as f64;
    let mut drop_per_queue = [0.0; NUM_FINITE];
    let mut mean_len_finite = [0.0; NUM_FINITE];
    for q in 0..NUM_FINITE {
        drop_per_queue[q] = counters.dropped[q] as f64 / n;
        mean_len_finite[q] = occupancy_sum[q] as f64 / n;
    }
    let mean_q6 = occupancy_sum[q6] as f64 / n;
    let mean_total = mean_len_finite.iter().sum::<f64>() + mean_q6;
    let throughput = counters.departures[q6] as f64 / n;
    let metrics = SystemMetrics {
        drop_per_queue,
        drop_total: drop_per_queue.iter().sum(),
        mean_len_finite,
        mean_len_q6: Some(mean_q6),
        mean_total: Some(mean_total),
        throughput,
        delay: (throughput > 0.0).then(|| mean_total / throughput),
    };
    Ok(SimResult {
        params,
        config: *config,
        stream,
        rng: RNG_ID,
        metrics,
        counters,
        histograms,
        flow,
    })
}

/// Sample mean, sample standard deviation and 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_dev: f64,
    pub half_width: f64,
}

impl Estimate {
    /// # Panics
    /// With fewer than two samples.
    pub fn from_samples(samples: &[f64]) -> Estimate {
        assert!(samples.len() >= 2, "need two samples");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std_dev = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .expect("valid degrees of freedom")
            .inverse_cdf(0.975);
        Estimate { mean, std_dev, half_width: t * std_dev / n.sqrt() }
    }
}

/// Independent replications with per-metric estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub runs: Vec<SimResult>,
    pub drop_per_queue: [Estimate; NUM_FINITE],
    pub drop_total: Estimate,
    pub mean_len: [Estimate; NUM_QUEUES],
    pub mean_total: Estimate,
    pub throughput: Estimate,
    /// `None` if any run had zero throughput.
    pub delay: Option<Estimate>,
}

/// `n_runs` runs on streams `0..n_runs` of `config.seed`, executed in
/// parallel. Results are ordered by stream, so the outcome does not depend
/// on scheduling.
pub fn replicate(
    params: &SystemParams,
    config: &SimConfig,
    n_runs: usize,
) -> Result<Replication, SimError> {
    if n_runs < 2 {
        return Err(SimError::Runs(n_runs));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| run(params, config, k))
        .collect::<Result<Vec<_>, _>>()?;

    let est = |f: &dyn Fn(&SystemMetrics) -> f64| {
        Estimate::from_samples(&runs.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
    };
    let drop_per_queue = std::array::from_fn(|q| est(&|m| m.drop_per_queue[q]));
    let mean_len = std::array::from_fn(|q| {
        est(&|m| m.mean_len(QueueId::ALL[q]).expect("simulated means are always present"))
    });
    let delays: Option<Vec<f64>> = runs.iter().map(|r| r.metrics.delay).collect();
    Ok(Replication {
        drop_per_queue,
        drop_total: est(&|m| m.drop_total),
        mean_len,
        mean_total: est(&|m| m.mean_total.expect("present")),
        throughput: est(&|m| m.throughput),
        delay: delays.map(|d| Estimate::from_samples(&d)),
        runs,
    })
}
