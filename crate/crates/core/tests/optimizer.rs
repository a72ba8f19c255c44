use proptest::prelude::*;

use vnfchain::optimizer::{performance_region, sweep_alpha, tradeoff_curve, Objective};
use vnfchain::SystemParams;

fn baseline() -> SystemParams {
    SystemParams { p: 0.8, alpha: 0.5, mu: [0.5, 0.5, 0.5, 0.5, 0.5, 0.9], buffer: [10; 5] }
}

#[test]
fn sweep_does_not_depend_on_scheduling() {
    let parallel = sweep_alpha(&baseline(), 0.05, Objective::Tasks).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| sweep_alpha(&baseline(), 0.05, Objective::Tasks)).unwrap();
    assert_eq!(parallel, serial);
}

#[test]
fn symmetric_routes_do_not_favor_either_extreme() {
    let s = sweep_alpha(&baseline(), 0.05, Objective::Drop).unwrap();
    assert!(s.best_alpha() > 0.0 && s.best_alpha() < 1.0);
}

#[test]
fn fast_servers_carry_the_full_load() {
    let base = SystemParams::uniform(0.8, 0.5, 0.99, 0.99, 10);
    for cell in performance_region(&[0.99], &[2, 10, 40], &base).unwrap() {
        assert!((cell.throughput - 0.8).abs() < 1e-3, "{cell:?}");
        assert!(cell.delay.unwrap() < 10.0);
    }
}

#[test]
fn unstable_region_cells_are_flagged() {
    let base = SystemParams::uniform(0.8, 0.5, 0.9, 0.2, 10);
    let cells = performance_region(&[0.9], &[10], &base).unwrap();
    assert_eq!(cells.len(), 1);
    assert!(!cells[0].stable);
    assert!(cells[0].delay.is_none());
}

#[test]
fn tradeoff_has_a_pareto_point() {
    let curve = tradeoff_curve(&SystemParams::uniform(0.8, 0.5, 0.45, 0.9, 10), 0.1).unwrap();
    assert_eq!(curve.len(), 11);
    assert!(curve.iter().any(|p| p.pareto));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refining_the_grid_never_hurts(mu1 in 0.1f64..1.0, mu2 in 0.1f64..1.0, k in 1usize..4) {
        let mut params = baseline();
        params.mu[0] = mu1;
        params.mu[1] = mu2;
        let step = 0.5 / k as f64;
        let coarse = sweep_alpha(&params, step, Objective::Weighted(0.5)).unwrap();
        let fine = sweep_alpha(&params, step / 2.0, Objective::Weighted(0.5)).unwrap();
        prop_assert!(fine.best_value() <= coarse.best_value());
    }
}
