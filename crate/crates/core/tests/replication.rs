use vnfchain::{analyze, replicate, SimConfig, SystemParams};

fn tradeoff() -> SystemParams {
    SystemParams::uniform(0.8, 0.5, 0.45, 0.9, 10)
}

#[test]
fn tradeoff_point_replications_are_tight() {
    let cfg = SimConfig { seed: 7, ..SimConfig::default() };
    let rep = replicate(&tradeoff(), &cfg, 10).unwrap();
    assert!(rep.drop_total.std_dev < 0.002, "std {}", rep.drop_total.std_dev);
    assert!(rep.runs.iter().all(|r| r.flow.residual() == 0));
    let ana = analyze(&tradeoff()).unwrap();
    assert!((rep.drop_total.mean - ana.drop_total).abs() < 0.01);
}

#[test]
fn replication_is_order_independent() {
    let cfg = SimConfig { slots: 50_000, warmup: 500, seed: 3, q6_cap: None };
    let a = replicate(&tradeoff(), &cfg, 4).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| replicate(&tradeoff(), &cfg, 4)).unwrap();
    assert_eq!(a, b);
}
