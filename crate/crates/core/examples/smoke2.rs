use ncsim_core::experiments::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let cells = factorial_study().unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let slowest = cells.iter().map(|c| c.wall_ms).fold(0.0f64, f64::max);
    println!("factorial: {} cells in {:.2}s, slowest cell {:.0} ms", cells.len(), elapsed, slowest);
    let ordered = cells.iter().filter(|c| c.interference == "csma_bianchi").all(|c| {
        cells.iter().any(|o| o.network == c.network && o.dag == c.dag && o.scheduler == c.scheduler
            && o.routing == c.routing && o.interference == "none" && c.makespan_s >= o.makespan_s)
    });
    println!("  makespan(bianchi) >= makespan(none) everywhere: {}", ordered);
    // HEFT vs CPOP identity on 5-task cells
    let mut fj_match = true;
    for c in cells.iter().filter(|c| c.dag == "fj5" && c.scheduler == "heft") {
        let twin = cells.iter().find(|o| o.dag == "fj5" && o.scheduler == "cpop"
            && o.network == c.network && o.routing == c.routing && o.interference == c.interference).unwrap();
        if twin.plan != c.plan {
            fj_match = false;
            println!("  fj5 plan mismatch at {}/{}/{}: heft={:?} cpop={:?}", c.network, c.routing, c.interference, c.plan, twin.plan);
        }
    }
    println!("  heft==cpop plans on all fj5 cells: {}", fj_match);
    let (records, summary) = regret_analysis(&cells).unwrap();
    println!("regret: triples={} inversions={} rate={:.3} mean={:.3} max={:.3}",
        summary.triples, summary.inversions, summary.inversion_rate, summary.mean_regret, summary.max_regret);
    for r in records.iter().filter(|r| r.inversion) {
        println!("  inversion {}/{}/{}: {} -> {} regret {:.2}", r.network, r.dag, r.routing, r.winner_none, r.winner_interference, r.regret_ratio);
    }
    let t1 = Instant::now();
    let ccr = ccr_sweep().unwrap();
    println!("ccr in {:.2}s: peaks={:?}", t1.elapsed().as_secs_f64(), ccr.peak_data_mb);
    for p in ccr.points.iter().filter(|p| p.dag == "pipeline20") {
        println!("  pipeline20 mb={} slowdown={:.3}", p.data_mb, p.slowdown);
    }
    let t2 = Instant::now();
    let md = multidag_sweep().unwrap();
    println!("multidag in {:.2}s: slowdowns={:?}", t2.elapsed().as_secs_f64(),
        md.iter().map(|p| (p.k, (p.slowdown*1000.0).round()/1000.0)).collect::<Vec<_>>());
}
