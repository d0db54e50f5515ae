use dads_core::diagnostics::DiagnosticsOptions;
use dads_core::engine::{StallConfig, StepSize};
use dads_core::graph::{format_matrix_blocks, pairwise_gossip_schedule};
use dads_core::scenario::{load_scenario, EngineSection, NetworkSection, ProblemSection, Scenario};
use dads_core::{Assumption, BoxSet, DadsError, ScalarFunction, SolverResolution};
use proptest::prelude::*;

fn function() -> impl Strategy<Value = ScalarFunction> {
    prop_oneof![
        (-3.0f64..3.0, -3.0f64..3.0, -1.0f64..1.0).prop_map(|(a, c, b)| ScalarFunction::quadratic_1d(a, c, b)),
        prop::collection::vec(-2.0f64..2.0, 2..5).prop_map(|vals| {
            let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(k, v)| (k as f64 * 0.5, *v)).collect();
            ScalarFunction::piecewise_linear(&pts)
        }),
        prop::collection::vec(-2.0f64..2.0, 1..5).prop_map(|c| ScalarFunction::Polynomial { coefficients: c }),
        (-2.0f64..2.0, -1.0f64..1.0).prop_map(|(w, b)| ScalarFunction::affine(vec![w], b)),
    ]
}

prop_compose! {
    fn scenario()(
        objectives in prop::collection::vec(function(), 2..6),
        delta in 0.01f64..2.0,
        epsilon in 0.01f64..1.0,
        theta in 0.01f64..1.0,
        gamma in prop::option::of(0.1f64..5.0),
        seed in any::<u64>(),
        rounds in 0usize..500,
        a in 0.1f64..3.0,
        p in 0.51f64..1.0,
        cs in 1e-4f64..1e-1,
    ) -> Scenario {
        Scenario {
            name: "generated".into(),
            description: "round trip".into(),
            problem: ProblemSection {
                delta,
                epsilon,
                theta,
                gamma_override: gamma,
                slater_point: Some(vec![0.25]),
                slater_proposals: None,
                constraints: vec![ScalarFunction::affine(vec![1.0], -0.5)],
                domain: BoxSet::new(vec![-1.0], vec![1.0]).unwrap(),
                objectives,
            },
            network: NetworkSection::Gossip { seed, alpha_min: 0.5 },
            engine: EngineSection {
                rounds,
                step: StepSize::Power { a, p },
                stall: StallConfig::default(),
                ..EngineSection::default()
            },
            solver: SolverResolution::default(),
            diagnostics: DiagnosticsOptions { cs_tolerance: cs, ..DiagnosticsOptions::default() },
        }
    }
}

proptest! {
    #[test]
    fn toml_round_trip_is_field_for_field(s in scenario()) {
        let text = s.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text, "generated").unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn file_network_resolves_relative_to_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sched = pairwise_gossip_schedule(3, 5, 0.5).unwrap();
    std::fs::write(dir.path().join("net.txt"), format_matrix_blocks(&sched)).unwrap();
    let scenario = r#"
name = "from_file"
[problem]
delta = 0.5
epsilon = 0.1
theta = 0.2
slater_point = [0.0]
[problem.domain]
lower = [-1.0]
upper = [1.0]
[[problem.objectives]]
kind = "quadratic"
curvature = [1.0]
center = [0.5]
[[problem.objectives]]
kind = "quadratic"
curvature = [1.0]
center = [-0.5]
[[problem.objectives]]
kind = "affine"
weights = [0.2]
[network]
kind = "file"
period = 2
alpha_min = 0.5
path = "net.txt"
"#;
    let path = dir.path().join("s.toml");
    std::fs::write(&path, scenario).unwrap();
    let loaded = load_scenario(&path).unwrap();
    assert_eq!(loaded.schedule.matrices(), sched.matrices());
}

#[test]
fn broken_connectivity_names_the_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"
name = "split"
[problem]
delta = 0.5
epsilon = 0.1
theta = 0.2
slater_point = [0.0]
[problem.domain]
lower = [-1.0]
upper = [1.0]
[[problem.objectives]]
kind = "quadratic"
curvature = [1.0]
center = [0.5]
[[problem.objectives]]
kind = "quadratic"
curvature = [1.0]
center = [-0.5]
[network]
kind = "matrices"
period = 3
alpha_min = 0.5
matrices = [[[1.0, 0.0], [0.0, 1.0]]]
"#;
    let path = dir.path().join("s.toml");
    std::fs::write(&path, scenario).unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert!(
        matches!(
            err,
            DadsError::Assumption {
                which: Assumption::PeriodicConnectivity,
                ..
            }
        ),
        "{err}"
    );
    assert!(err.to_string().contains("Assumption 3"));
}

#[test]
fn unknown_fields_are_reported() {
    let err = Scenario::from_toml_str("name = \"x\"\nbogus = 1\n", "typo.toml").unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
}
