use dads_core::diagnostics::{basic_iterate_slack, GlobalDual};
use dads_core::engine::{project_to_m, run, EngineConfig};
use dads_core::linalg::{dist, norm};
use dads_core::scenario::resolve;
use dads_core::Parallelism;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn short_config(name: &str, rounds: usize) -> (dads_core::scenario::LoadedScenario, EngineConfig) {
    let loaded = resolve(name).unwrap();
    let mut cfg = loaded.scenario.engine_config(Parallelism::Sequential);
    cfg.rounds = rounds;
    (loaded, cfg)
}

#[test]
fn basic_iterate_relation_holds_every_round() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for name in ["paper_example", "constrained_line", "planar_pair"] {
        let (loaded, cfg) = short_config(name, 60);
        let trace = run(&loaded.spec, &loaded.schedule, &cfg).unwrap();
        let radius = trace.init.radius;
        for _ in 0..3 {
            let mut probe = GlobalDual::zeros(&loaded.spec);
            let mut c: Vec<f64> = probe.coords().iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            // the whole vector inside the ball keeps every agent block inside too
            let scale = rng.gen_range(0.1..1.0) * radius / norm(&c).max(1e-12);
            c.iter_mut().for_each(|v| *v *= scale);
            let m = loaded.spec.constraint_dim();
            let mut it = c.into_iter();
            for mu in &mut probe.mu {
                mu.iter_mut().for_each(|v| *v = it.next().unwrap());
            }
            probe
                .lambda
                .iter_mut()
                .chain(probe.w.iter_mut())
                .for_each(|v| *v = it.next().unwrap());
            for b in probe.to_blocks() {
                assert!(b.norm() <= radius + 1e-12 && b.mu.len() == m);
            }
            for r in &trace.rounds {
                let slack = basic_iterate_slack(r, &probe);
                assert!(slack >= -1e-6, "{name} round {}: slack {slack}", r.round);
            }
        }
    }
}

#[test]
fn stored_iterates_respect_domains() {
    for name in ["paper_example", "constrained_line", "planar_pair"] {
        let (loaded, cfg) = short_config(name, 300);
        let trace = run(&loaded.spec, &loaded.schedule, &cfg).unwrap();
        let radius = trace.init.radius;
        for r in &trace.rounds {
            for a in &r.agents {
                assert!(loaded.spec.domain.contains(&a.primal));
                for d in [&a.dual_before, &a.mixed, &a.dual_after] {
                    assert!(d.is_nonnegative());
                    assert!(d.norm() <= radius + 1e-9);
                }
            }
        }
    }
}

#[test]
fn primal_is_constant_after_settling() {
    let (loaded, cfg) = short_config("constrained_line", 1500);
    let trace = run(&loaded.spec, &loaded.schedule, &cfg).unwrap();
    for (i, t) in trace.settle_rounds.iter().enumerate() {
        let from = t.map_or(0, |t| t);
        let settled = &trace.rounds[from].agents[i].primal;
        for r in &trace.rounds[from..] {
            assert_eq!(&r.agents[i].primal, settled);
            assert!(r.round == from || !r.agents[i].changed);
        }
    }
}

#[test]
fn dual_disagreement_shrinks() {
    let (loaded, cfg) = short_config("paper_example", 6000);
    let trace = run(&loaded.spec, &loaded.schedule, &cfg).unwrap();
    let at = |k: usize| trace.rounds[k].lambda_disagreement.max(trace.rounds[k].w_disagreement);
    assert!(at(5999) < at(1499) && at(1499) < at(149));
    assert!(at(5999) < 1e-3);
}

#[test]
fn stall_detector_respects_minimum() {
    let (loaded, mut cfg) = short_config("paper_example", 500);
    cfg.stall.dual_tol = f64::INFINITY;
    cfg.stall.window = 1;
    cfg.stall.min_rounds = 150;
    let trace = run(&loaded.spec, &loaded.schedule, &cfg).unwrap();
    assert_eq!(trace.stopped_early, Some(150));
    assert_eq!(trace.rounds.len(), 150);
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        z in prop::collection::vec(-5.0f64..5.0, 1..20),
        w in prop::collection::vec(-5.0f64..5.0, 20),
        radius in 0.1f64..4.0,
    ) {
        let p = project_to_m(&z, radius);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        prop_assert!(norm(&p) <= radius * (1.0 + 1e-12));
        prop_assert!(dist(&project_to_m(&p, radius), &p) <= 1e-12 * (1.0 + radius));
        let q = project_to_m(&w[..z.len()], radius);
        prop_assert!(dist(&p, &q) <= dist(&z, &w[..z.len()]) + 1e-12);
    }
}
