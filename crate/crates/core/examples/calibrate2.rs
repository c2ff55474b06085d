use ncsim_core::engine::{run, NullSink};
use ncsim_core::experiments::topo;
use ncsim_core::model::NodeSpec;
use ncsim_core::scenario::{compile, Overrides, ScenarioFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn capacity(seed: u64, i: u64) -> f64 {
    let key = splitmix64(seed ^ splitmix64(i));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.gen_range(80.0..=300.0)
}

fn with_caps(mut file: ScenarioFile) -> ScenarioFile {
    for (i, n) in file.nodes.iter_mut().enumerate() {
        *n = NodeSpec { capacity: capacity(42, i as u64), ..n.clone() };
    }
    file
}

fn main() {
    print!("caps: ");
    for i in 0..9 { print!("{:.0} ", capacity(42, i)); }
    println!();
    for kdag in 1..=5usize {
        let dags: Vec<_> = (0..kdag).map(|i| topo::fork_join_dag(&format!("fj{i}"), 0.5 * i as f64, 10.0)).collect();
        let mut out = Vec::new();
        for model in ["none", "csma_bianchi"] {
            let file = with_caps(topo::grid_scenario_multi(3, 42, dags.clone(), "heft", "shortest_path", model));
            let sc = compile(&file, &Overrides::default()).unwrap();
            let rep = run(&sc.input, &mut NullSink).unwrap();
            if kdag == 1 && model == "none" {
                println!("plan: {:?}", rep.plans["fj0"]);
            }
            out.push(rep.makespan_s);
        }
        println!("k={kdag}: none={:.3} bianchi={:.3} slowdown={:.3}", out[0], out[1], out[1]/out[0]);
    }
}
