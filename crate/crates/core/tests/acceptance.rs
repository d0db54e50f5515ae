//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use dads_core::consensus::{disagreement, dynamic_average_step, lex_max, max_consensus};
use dads_core::diagnostics::{
    brute_force_primal_optimum, brute_force_primal_optimum_p, complementary_slackness_report, feasibility_report,
    joint_grid_infimum, GlobalDual,
};
use dads_core::engine::{build_supgradient, project_to_m};
use dads_core::graph::{directed_ring_schedule, pairwise_gossip_schedule, validate_periodic_connectivity};
use dads_core::harness::{self, trace_csv};
use dads_core::linalg::{dist, dot, norm, sub};
use dads_core::local_solver::{local_lagrangian, solve_local};
use dads_core::scenario::{paper_example_problem, resolve, LoadedScenario, Scenario};
use dads_core::{make_cycle, CyclicGraph, DualBlock, Parallelism, ProblemSpec, SolverResolution, WeightSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "four-agent example converges to a feasible point inside the interval",
            c1_example_run,
        ),
        ("grid oracles recover both optimal values", c2_oracle_values),
        ("dual function decomposes across agents", c3_decomposition),
        ("approximate supgradient inequality", c4_supgradient),
        ("projection onto the truncated orthant", c5_projection),
        ("max-consensus finishes within (N-1)B rounds", c6_max_consensus),
        ("dynamic average consensus", c7_dynamic_average),
        ("dual iterates stay in the truncated orthant", c8_containment),
        ("complementary slackness at the limit", c9_slackness),
        (
            "traces are byte-identical across runs and thread counts",
            c10_determinism,
        ),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {title} [{secs:.2}s]: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn example_run() -> (LoadedScenario, harness::RunOutput, Duration) {
    let loaded = resolve("paper_example").expect("bundled scenario");
    let started = Instant::now();
    let out = harness::execute(&loaded, Parallelism::Sequential).expect("run");
    (loaded, out, started.elapsed())
}

fn c1_example_run() -> Outcome {
    let (loaded, out, took) = example_run();
    let rounds = out.trace.rounds.len();
    let cycle = make_cycle(4).unwrap();
    let x = out.trace.final_primal();
    let feas = feasibility_report(&loaded.spec, &cycle, &x).unwrap();
    let objective: f64 = x.iter().zip(&loaded.spec.objectives).map(|(x, f)| f.eval(x)).sum();
    let reference = [0.2436, 0.0, 0.0, 0.1509];
    let detail = format!(
        "{rounds} rounds in {:.3}s, limit {:?}, objective {objective:.6} (published 1.1844 at {reference:?}), violation {:.1e}",
        took.as_secs_f64(),
        x.iter().map(|v| v[0]).collect::<Vec<_>>(),
        feas.max_violation
    );
    check(
        rounds >= 150
            && feas.max_violation <= 1e-9
            && (0.6625..=1.4625).contains(&objective)
            && took <= Duration::from_secs(10),
        detail,
    )
}

fn c2_oracle_values() -> Outcome {
    let spec = paper_example_problem();
    let cycle = make_cycle(4).unwrap();
    let started = Instant::now();
    let bf = brute_force_primal_optimum(&spec, &cycle, 201, Parallelism::Sequential).unwrap();
    let (p, z) = brute_force_primal_optimum_p(&spec, 10_001, Parallelism::Sequential).unwrap();
    let took = started.elapsed();
    let detail = format!(
        "banded optimum {:.6} at {:?}, unrelaxed optimum {p:.6} at z = {:.4}, {:.2}s",
        bf.value,
        bf.minimizer.iter().map(|v| v[0]).collect::<Vec<_>>(),
        z[0],
        took.as_secs_f64()
    );
    check(
        (bf.value - 17.0 / 16.0).abs() <= 1e-3
            && (p - 41.0 / 32.0).abs() <= 1e-3
            && (z[0] - 0.125).abs() <= 1e-2
            && took <= Duration::from_secs(60),
        detail,
    )
}

fn bundled_spec(name: &str) -> ProblemSpec {
    resolve(name).unwrap().spec
}

fn random_global(spec: &ProblemSpec, rng: &mut ChaCha8Rng, mu_hi: f64, hi: f64) -> GlobalDual {
    let mut xi = GlobalDual::zeros(spec);
    for mu in &mut xi.mu {
        mu.iter_mut().for_each(|v| *v = rng.gen_range(0.0..mu_hi));
    }
    xi.lambda
        .iter_mut()
        .chain(xi.w.iter_mut())
        .for_each(|v| *v = rng.gen_range(0.0..hi));
    xi
}

/// Gradient-norm bound of `L_i(·, ξ)` over the box, built from the pieces.
fn lagrangian_lipschitz(spec: &ProblemSpec, cycle: &CyclicGraph, i: usize, xi: &GlobalDual) -> f64 {
    let n = spec.dim();
    let up = cycle.up(i);
    let linear: Vec<f64> = (0..n)
        .map(|k| -xi.lambda[i * n + k] + xi.lambda[up * n + k] + xi.w[i * n + k] - xi.w[up * n + k])
        .collect();
    spec.objectives[i].lipschitz_on(&spec.domain)
        + xi.mu[i]
            .iter()
            .zip(&spec.constraints)
            .map(|(m, g)| m * g.lipschitz_on(&spec.domain))
            .sum::<f64>()
        + norm(&linear)
}

fn c3_decomposition() -> Outcome {
    let instances = [
        ("four-agent line", paper_example_problem(), 21usize),
        ("constrained line", bundled_spec("constrained_line"), 61),
        ("planar pair", bundled_spec("planar_pair"), 21),
    ];
    let res = SolverResolution::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_split = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut checked = 0;
    for (name, spec, points) in &instances {
        let cycle = make_cycle(spec.n_agents()).unwrap();
        assert!(spec.n_agents() * spec.dim() <= 4, "{name} too large");
        let grid_pts: Vec<Vec<f64>> = (0..points.pow(spec.dim() as u32))
            .map(|p| spec.domain.grid_point(p, *points))
            .collect();
        let h: f64 = (0..spec.dim())
            .map(|k| spec.domain.grid_step(k, *points).powi(2))
            .sum::<f64>()
            .sqrt();
        for _ in 0..20 {
            let xi = random_global(spec, &mut rng, 2.0, 1.0);
            let blocks = xi.to_blocks();
            let (joint, _) = joint_grid_infimum(spec, &cycle, &xi, *points, Parallelism::Sequential).unwrap();
            let mut q_sum = 0.0;
            let mut grid_sum = 0.0;
            let mut tol = 0.0;
            for (i, block) in blocks.iter().enumerate() {
                let sol = solve_local(spec, &cycle, i, block, &res).unwrap();
                q_sum += sol.value;
                tol += sol.certified_gap + lagrangian_lipschitz(spec, &cycle, i, &xi) * h / 2.0;
                grid_sum += grid_pts
                    .iter()
                    .map(|x| local_lagrangian(spec, &cycle, i, x, &blocks[i]).unwrap())
                    .fold(f64::INFINITY, f64::min);
            }
            let split = (joint - grid_sum).abs() / (1.0 + joint.abs());
            worst_split = worst_split.max(split);
            if joint < q_sum - 1e-9 || joint - q_sum > tol + 1e-9 || split > 1e-9 {
                return Err(format!(
                    "{name}: joint {joint}, sum of local minima {q_sum}, per-agent grid sum {grid_sum}, tolerance {tol}"
                ));
            }
            worst_ratio = worst_ratio.max((joint - q_sum) / tol.max(1e-300));
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} dual points on 3 instances; joint grid equals per-agent grid sum to {worst_split:.1e}, gap to exact sum at most {:.0}% of the grid tolerance",
        100.0 * worst_ratio
    ))
}

fn approx_minimizer(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    i: usize,
    dual: &DualBlock,
    q: f64,
    base: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut r = rng.gen_range(0.0..2.0);
    for _ in 0..30 {
        let mut x: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-r..=r)).collect();
        spec.domain.clamp(&mut x);
        if local_lagrangian(spec, cycle, i, &x, dual).unwrap() <= q + spec.epsilon {
            return x;
        }
        r /= 2.0;
    }
    base.to_vec()
}

fn c4_supgradient() -> Outcome {
    let res = SolverResolution::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut triples = 0;
    let mut worst = f64::NEG_INFINITY;
    for spec in [paper_example_problem(), bundled_spec("constrained_line")] {
        let cycle = make_cycle(spec.n_agents()).unwrap();
        let len = spec.dual_len();
        let m = spec.constraint_dim();
        for _ in 0..300 {
            let i = rng.gen_range(0..spec.n_agents());
            let draw = |rng: &mut ChaCha8Rng| {
                let v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2.0)).collect();
                DualBlock::from_stacked(m, &v).unwrap()
            };
            let (bar, xi) = (draw(&mut rng), draw(&mut rng));
            let sol = solve_local(&spec, &cycle, i, &bar, &res).unwrap();
            let x_bar = approx_minimizer(&spec, &cycle, i, &bar, sol.value, &sol.minimizer, &mut rng);
            let d = build_supgradient(&spec, &cycle, i, &x_bar).unwrap();
            let q_xi = solve_local(&spec, &cycle, i, &xi, &res).unwrap().value;
            let excess = q_xi - sol.value - dot(&d, &sub(&xi.stacked(), &bar.stacked())) - spec.epsilon;
            worst = worst.max(excess);
            if excess > 1e-9 {
                return Err(format!("agent {} violates the inequality by {excess:e}", i + 1));
            }
            triples += 1;
        }
    }
    Ok(format!(
        "{triples} triples on two instances, largest excess over the epsilon slack {worst:.3e}"
    ))
}

/// Dykstra's alternating projections between the orthant and the ball.
fn dykstra(z: &[f64], radius: f64) -> Vec<f64> {
    let n = z.len();
    let mut x = z.to_vec();
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..100_000 {
        let y: Vec<f64> = (0..n).map(|k| (x[k] + p[k]).max(0.0)).collect();
        for k in 0..n {
            p[k] = x[k] + p[k] - y[k];
        }
        let s: Vec<f64> = (0..n).map(|k| y[k] + q[k]).collect();
        let ns = norm(&s);
        let next: Vec<f64> = if ns > radius {
            s.iter().map(|v| v * radius / ns).collect()
        } else {
            s.clone()
        };
        for k in 0..n {
            q[k] = s[k] - next[k];
        }
        let moved = dist(&next, &x);
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

fn c5_projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let samples = 240;
    for s in 0..samples {
        let dim = rng.gen_range(5..=20);
        let radius = rng.gen_range(0.2..5.0);
        let scale = if s % 3 == 0 { 0.3 } else { 4.0 };
        let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
        let p = project_to_m(&z, radius);
        let oracle = dykstra(&z, radius);
        let gap = dist(&p, &oracle);
        worst = worst.max(gap);
        if gap > 1e-6 {
            return Err(format!("sample {s}: distance to oracle {gap:e}"));
        }
        for _ in 0..3 {
            let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let shrink = rng.gen_range(0.0..1.0) * radius / norm(&raw).max(1e-12);
            let y: Vec<f64> = raw.iter().map(|v| v * shrink).collect();
            let lhs = dist(&p, &y).powi(2);
            let rhs = dist(&z, &y).powi(2) - dist(&p, &z).powi(2);
            if lhs > rhs + 1e-9 * (1.0 + rhs.abs()) {
                return Err(format!("sample {s}: nonexpansion fails, {lhs} > {rhs}"));
            }
        }
    }
    Ok(format!(
        "{samples} inputs of dimension 5-20, largest distance to the iterative oracle {worst:.2e}"
    ))
}

fn c6_max_consensus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_ratio = 0.0f64;
    let mut cases = 0;
    for n in 2..=8usize {
        for seed in 0..10u64 {
            let sched = pairwise_gossip_schedule(n, seed, 0.5).unwrap();
            let b = sched.period_hint();
            if !validate_periodic_connectivity(&sched, b, 4 * b).unwrap() {
                return Err(format!("N={n} seed={seed}: schedule not {b}-periodically connected"));
            }
            let init: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(0..3) as f64, rng.gen_range(-1.0..1.0)])
                .collect();
            let expected = init
                .iter()
                .skip(1)
                .fold(init[0].clone(), |a, v| lex_max(&a, v).unwrap());
            let bound = (n - 1) * b;
            match max_consensus(&init, &sched, bound) {
                Ok((v, r)) if v == expected => worst_ratio = worst_ratio.max(r as f64 / bound as f64),
                Ok((v, _)) => return Err(format!("N={n} seed={seed}: agreed on {v:?}, expected {expected:?}")),
                Err(e) => return Err(format!("N={n} seed={seed}: {e}")),
            }
            cases += 1;
        }
    }
    Ok(format!(
        "{cases} schedules, worst case used {:.0}% of the (N-1)B budget",
        100.0 * worst_ratio
    ))
}

fn c7_dynamic_average() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut schedules: Vec<(String, WeightSchedule)> = Vec::new();
    for n in 2..=8usize {
        for seed in 0..10u64 {
            schedules.push((
                format!("gossip N={n} seed={seed}"),
                pairwise_gossip_schedule(n, seed, 0.5).unwrap(),
            ));
        }
        schedules.push((format!("ring N={n}"), directed_ring_schedule(n).unwrap()));
    }
    let mut worst = 0.0f64;
    for (name, sched) in &schedules {
        let n = sched.n_agents();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-10.0..10.0)]).collect();
        for k in 0..2000 {
            let eta: Vec<Vec<f64>> = c.iter().map(|ci| vec![ci / ((k + 1) as f64).powi(2)]).collect();
            x = dynamic_average_step(&x, &eta, sched.at(k)).unwrap();
        }
        let d = disagreement(&x);
        worst = worst.max(d);
        if d >= 1e-3 {
            return Err(format!("{name}: disagreement {d:e} after 2000 rounds"));
        }
    }
    Ok(format!(
        "{} schedules, largest disagreement after 2000 rounds {worst:.2e}",
        schedules.len()
    ))
}

fn c8_containment() -> Outcome {
    let (_, out, _) = example_run();
    let radius = out.trace.init.radius;
    let duals = out.trace.init.agents.iter().map(|a| &a.dual).chain(
        out.trace
            .rounds
            .iter()
            .flat_map(|r| r.agents.iter().map(|a| &a.dual_after)),
    );
    let (mut count, mut worst, mut nonneg) = (0, 0.0f64, true);
    for d in duals {
        count += 1;
        worst = worst.max(d.norm());
        nonneg &= d.is_nonnegative();
    }
    check(
        (radius - 3.0).abs() < 1e-12 && nonneg && worst <= 3.0 + 1e-9,
        format!("{count} dual estimates, radius {radius}, largest norm {worst:.6}, nonnegative {nonneg}"),
    )
}

fn c9_slackness() -> Outcome {
    let (loaded, out, _) = example_run();
    let cycle = make_cycle(4).unwrap();
    let averaged = GlobalDual::averaged(&out.trace.final_duals()).unwrap();
    let r = complementary_slackness_report(&loaded.spec, &cycle, &out.trace.final_primal(), &averaged, 1e-2).unwrap();
    check(
        r.passed,
        format!("largest residual {:.3e} over {} agents", r.max_abs, r.per_agent.len()),
    )
}

const CUBIC_SCENARIO: &str = r#"
name = "cubic_ring"
[problem]
delta = 0.4
epsilon = 0.05
theta = 0.5
slater_point = [0.0]
[problem.domain]
lower = [-2.0]
upper = [2.0]
[[problem.objectives]]
kind = "polynomial"
coefficients = [0.0, -1.0, 0.0, 0.5]
[[problem.objectives]]
kind = "polynomial"
coefficients = [0.2, 1.0, -0.3, 0.4]
[[problem.objectives]]
kind = "polynomial"
coefficients = [0.0, 0.5, 1.0, -0.2, 0.1]
[network]
kind = "gossip"
seed = 11
[engine]
rounds = 120
[solver]
grid_points = 30001
"#;

fn traces_for(loaded: &LoadedScenario, threads: usize) -> Vec<String> {
    (0..2)
        .map(|_| {
            let out = harness::execute(loaded, Parallelism::from_threads(threads)).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let files = harness::write_outputs(dir.path(), loaded, &out).unwrap();
            let on_disk = std::fs::read_to_string(files.trace).unwrap();
            assert_eq!(on_disk, trace_csv(&loaded.spec, &out.trace));
            on_disk
        })
        .collect()
}

fn c10_determinism() -> Outcome {
    let cubic = LoadedScenario::from_scenario(Scenario::from_toml_str(CUBIC_SCENARIO, "cubic").unwrap(), None).unwrap();
    let mut notes = Vec::new();
    for loaded in [resolve("paper_example").unwrap(), cubic] {
        let n = loaded.spec.n_agents();
        let mut all = traces_for(&loaded, 1);
        all.extend(traces_for(&loaded, n));
        if all.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{}: traces differ", loaded.scenario.name));
        }
        notes.push(format!("{} ({} bytes)", loaded.scenario.name, all[0].len()));
    }
    Ok(format!("identical at 1 and N threads: {}", notes.join(", ")))
}
