use ncsim_core::experiments::*;

fn main() {
    let cells = factorial_study().unwrap();
    println!("slowdowns (bianchi/none):");
    for net in ["grid2x2", "grid3x3", "grid4x4"] {
        for dag in ["fj5", "diamond10", "pipeline20"] {
            for routing in ["widest_path", "shortest_path"] {
                for sched in ["heft", "cpop", "round_robin"] {
                    let none = cells.iter().find(|c| c.network == net && c.dag == dag && c.routing == routing && c.scheduler == sched && c.interference == "none").unwrap();
                    let intf = cells.iter().find(|c| c.network == net && c.dag == dag && c.routing == routing && c.scheduler == sched && c.interference == "csma_bianchi").unwrap();
                    print!("{:.2} ", intf.makespan_s / none.makespan_s);
                }
            }
            println!("  {net}/{dag} [w:h,c,rr | s:h,c,rr]");
        }
    }
}
