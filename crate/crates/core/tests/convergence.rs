//! Refinement behaviour of front-tracking runs with data resolved at the
//! front-tracking accuracy.

use bvtrack::harness::{self, parse_config, RunConfig, Simulation};

fn config(model: &str, h: f64, t_final: f64) -> RunConfig {
    let cells = (1.0 / h).round() as usize;
    parse_config(&format!(
        "model = \"{model}\"\na = 0.3\nh = {h}\nt_final = {t_final}\n\
         [initial_data]\nkind = \"sine\"\namplitude = 0.02\ncells = {cells}\nmode = 1\ndirection = [1.0, 1.0]\n"
    ))
    .unwrap()
}

fn run(model: &str, h: f64, t_final: f64) -> Simulation {
    let sim = harness::simulate(&config(model, h, t_final)).unwrap();
    assert!(sim.summary.monitors_passed, "monitors failed at h = {h}");
    sim
}

#[test]
fn l1_self_convergence() {
    for model in ["coupled_drift", "decoupled_burgers"] {
        let states: Vec<_> = [0.08, 0.04, 0.02, 0.01, 0.005]
            .iter()
            .map(|&h| run(model, h, 1.0).result.trajectory.state_at(1.0))
            .collect();
        let d: Vec<f64> = states.windows(2).map(|w| w[0].l1_distance(&w[1])).collect();
        for w in d.windows(2) {
            assert!(w[0] / w[1] >= 1.5, "{model}: distances {d:?}");
        }
    }
}

#[test]
fn sideways_variation_is_stable_under_refinement() {
    let sup: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&h| {
            let sim = run("coupled_drift", h, 10.0);
            (1..20)
                .map(|i| sim.result.trajectory.sideways_tv(i as f64 / 20.0, 10.0))
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(sup[0] > 0.0);
    assert!((sup[1] / sup[0] - 1.0).abs() <= 0.1, "{sup:?}");
}
