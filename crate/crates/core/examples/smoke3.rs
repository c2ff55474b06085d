use ncsim_core::experiments::topo;
use ncsim_core::scenario::{compile, Overrides};
use ncsim_core::engine::{run, NullSink};

fn main() {
    for i in 0..9u64 {
        print!("C(n{i})={:.0} ", topo::heterogeneous_capacity(42, i));
    }
    println!();
    for model in ["none", "csma_bianchi"] {
        let file = topo::grid_scenario(3, 42, topo::fork_join_dag("fj0", 0.0, 10.0), "heft", "shortest_path", model);
        let sc = compile(&file, &Overrides::default()).unwrap();
        let rep = run(&sc.input, &mut NullSink).unwrap();
        println!("{model}: makespan={:.3} plan={:?} transfers={} routed={}",
            rep.makespan_s, rep.plans["fj0"], rep.transfers.len(),
            rep.transfers.iter().filter(|t| !t.route_nodes.is_empty()).count());
    }
}
