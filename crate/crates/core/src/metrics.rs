//! Drop rates and mean queue lengths from the solved subsystems.
//!
//! "Drop rate" is the expected number of tasks dropped per slot.

use crate::dtmc::SteadyState;
use crate::model::{SystemMetrics, NUM_FINITE};
use crate::qbd::TandemSolution;

/// Effective per-slot arrival probabilities into `Q1..Q5`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArrivalRates {
    pub lambda: [f64; NUM_FINITE],
}

/// Drop probabilities per slot for `Q1..Q5`.
///
/// For the processing queues the drop needs a full buffer, an arrival and
/// no service completion. For the transmission queues `Q2` and `Q4` the
/// full-buffer probability sums over processing levels `i >= 1`, the only
/// levels from which a task can be handed over.
pub fn drop_probabilities(
    sub1: &TandemSolution,
    sub2: &TandemSolution,
    sub3: &SteadyState,
    rates: &ArrivalRates,
    mu: &[f64],
) -> [f64; NUM_FINITE] {
    let (l1, tx1) = sub1.state.shape().expect("shaped");
    let (l2, tx2) = sub2.state.shape().expect("shaped");
    let (m1, m2) = (l1 - 1, tx1 - 1);
    let (m3, m4) = (l2 - 1, tx2 - 1);
    let lam = &rates.lambda;

    let full_proc = |s: &TandemSolution, m: usize, phases: usize| -> f64 {
        (0..phases).map(|j| s.state.joint(m, j)).sum()
    };
    let full_tx = |s: &TandemSolution, levels: usize, m: usize| -> f64 {
        (1..levels).map(|i| s.state.joint(i, m)).sum()
    };
    let m5 = sub3.len() - 1;
    [
        lam[0] * (1.0 - mu[0]) * full_proc(sub1, m1, tx1),
        lam[1] * (1.0 - mu[1]) * full_tx(sub1, l1, m2),
        lam[2] * (1.0 - mu[2]) * full_proc(sub2, m3, tx2),
        lam[3] * (1.0 - mu[3]) * full_tx(sub2, l2, m4),
        lam[4] * (1.0 - mu[4]) * sub3.get(m5),
    ]
}

fn level_mean(s: &TandemSolution) -> f64 {
    let (_, phases) = s.state.shape().expect("shaped");
    s.state.probs().iter().enumerate().map(|(k, p)| (k / phases) as f64 * p).sum()
}

fn phase_mean(s: &TandemSolution) -> f64 {
    let (_, phases) = s.state.shape().expect("shaped");
    s.state.probs().iter().enumerate().map(|(k, p)| (k % phases) as f64 * p).sum()
}

/// Mean lengths of `Q1..Q5`; `Q6` comes from its own solution.
pub fn mean_lengths(
    sub1: &TandemSolution,
    sub2: &TandemSolution,
    sub3: &SteadyState,
) -> [f64; NUM_FINITE] {
    [level_mean(sub1), phase_mean(sub1), level_mean(sub2), phase_mean(sub2), sub3.mean()]
}

/// Combine per-queue figures. Throughput is `p - P_D`; delay follows from
/// Little's law and is absent when throughput is zero or `Q6` has no mean.
pub fn aggregate(
    drops: [f64; NUM_FINITE],
    means: [f64; NUM_FINITE],
    q6_mean: Option<f64>,
    p: f64,
) -> SystemMetrics {
    let drop_total: f64 = drops.iter().sum();
    let mean_total = q6_mean.map(|q6| means.iter().sum::<f64>() + q6);
    let throughput = (p - drop_total).max(0.0);
    let delay = mean_total.filter(|_| throughput > 0.0).map(|q| q / throughput);
    SystemMetrics {
        drop_per_queue: drops,
        drop_total,
        mean_len_finite: means,
        mean_len_q6: q6_mean,
        mean_total,
        throughput,
        delay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::{bd_steady_state, BirthDeathParams};
    use crate::qbd::solve_subsystem;

    #[test]
    fn empty_system() {
        let m = aggregate([0.0; 5], [0.0; 5], Some(0.0), 0.0);
        assert_eq!(m.drop_total, 0.0);
        assert_eq!(m.mean_total, Some(0.0));
        assert_eq!(m.throughput, 0.0);
        assert_eq!(m.delay, None);
    }

    #[test]
    fn sums_are_exact() {
        let drops = [0.01, 0.02, 0.0, 0.005, 0.001];
        let means = [1.0, 2.0, 0.5, 0.25, 3.0];
        let m = aggregate(drops, means, Some(0.75), 0.8);
        assert_eq!(m.drop_total, drops.iter().sum::<f64>());
        assert_eq!(m.mean_total, Some(7.5));
        assert!((m.throughput - (0.8 - 0.036)).abs() < 1e-15);
        assert!((m.delay.unwrap() - 7.5 / m.throughput).abs() < 1e-12);
        assert_eq!(aggregate(drops, means, None, 0.8).delay, None);
    }

    #[test]
    fn hand_solved_q5_mean() {
        let sub = solve_subsystem(0.0, 0.5, 0.5, 2, 2).unwrap();
        let sub3 = bd_steady_state(&BirthDeathParams::new(0.5, 0.5, 2)).unwrap();
        let means = mean_lengths(&sub, &sub, &sub3);
        assert!((means[4] - 1.2).abs() < 1e-14);
        assert_eq!(means[0], 0.0);
    }

    #[test]
    fn idle_route_has_no_drops() {
        let idle = solve_subsystem(0.0, 0.5, 0.5, 3, 3).unwrap();
        let busy = solve_subsystem(0.8, 0.5, 0.5, 3, 3).unwrap();
        let sub3 = bd_steady_state(&BirthDeathParams::new(0.4, 0.5, 3)).unwrap();
        let rates = ArrivalRates { lambda: [0.0, 0.0, 0.8, busy.rates.lambda_out, 0.4] };
        let drops = drop_probabilities(&idle, &busy, &sub3, &rates, &[0.5; 6]);
        assert_eq!(drops[0], 0.0);
        assert_eq!(drops[1], 0.0);
        for (d, l) in drops.iter().zip(rates.lambda) {
            assert!(*d >= 0.0 && *d <= l);
        }
        assert!(drops[2] > 0.0);
    }

    #[test]
    fn ample_buffer_has_negligible_drops() {
        let sub3 = bd_steady_state(&BirthDeathParams::new(0.3, 0.6, 60)).unwrap();
        let idle = solve_subsystem(0.0, 0.5, 0.5, 1, 1).unwrap();
        let rates = ArrivalRates { lambda: [0.0, 0.0, 0.0, 0.0, 0.3] };
        let drops = drop_probabilities(&idle, &idle, &sub3, &rates, &[0.5, 0.5, 0.5, 0.5, 0.6, 0.9]);
        assert!(drops[4] < 1e-12);
    }
}
