use ncsim_core::experiments::*;

fn main() {
    for (name, r) in [
        ("exp1", exp_distance_sweep().unwrap()),
        ("exp2", exp_parallel_separation(2).unwrap()),
        ("exp4", exp_parallel_separation(3).unwrap()),
        ("exp7", exp_nway_contention().unwrap()),
    ] {
        let worst = r.rows.iter().map(|x| x.abs_err()).fold(0.0f64, f64::max);
        println!("{name}: rows={} pass={} worst_abs_err={:.2e}", r.rows.len(), r.passed(), worst);
        for row in r.rows.iter().filter(|x| x.abs_err() > r.tolerance) {
            println!("  FAIL {} pred={:.6} sim={:.6}", row.label, row.predicted, row.simulated);
        }
    }
    let b = bianchi_reproduction().unwrap();
    println!("bianchi: pass={} w32decr={} w128nonmono={} iters={} resid={:.1e}",
        b.table3.passed(), b.w32_m5_strictly_decreasing, b.w128_m3_nonmonotonic_5_to_10,
        b.max_iterations, b.max_residual);
}
