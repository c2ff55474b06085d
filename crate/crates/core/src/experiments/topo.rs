//! Scenario generators: validation topologies (link pairs, parallel link
//! groups), grid meshes, random geometric graphs, and the DAG templates
//! used by the evaluation studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DagEdge, DagSpec, NodeSpec, TaskSpec};
use crate::scenario::{AutoLink, LinkEntry, RfSection, ScenarioFile};

pub const DEFAULT_SEED: u64 = 42;

/// Node capacity drawn uniformly from [80, 300] units/s, keyed on
/// (seed, node index) so the draw order never matters.
pub fn heterogeneous_capacity(seed: u64, index: u64) -> f64 {
    let key = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.gen_range(80.0..=300.0)
}

/// Compute cost that rounds to a single microsecond of runtime, for source
/// tasks that exist only to launch a transfer.
fn instant_cost(capacity: f64) -> f64 {
    capacity * 1e-6
}

fn tx_rx_dag(id: &str, tx: &str, rx: &str, size_mb: f64, capacity: f64) -> DagSpec {
    DagSpec {
        id: id.to_string(),
        tasks: vec![
            TaskSpec {
                id: "src".into(),
                compute_cost: instant_cost(capacity),
                pinned_to: Some(tx.to_string()),
            },
            TaskSpec {
                id: "dst".into(),
                compute_cost: instant_cost(capacity),
                pinned_to: Some(rx.to_string()),
            },
        ],
        edges: vec![DagEdge {
            src_task: "src".into(),
            dst_task: "dst".into(),
            data_size: size_mb,
        }],
        inject_at: 0.0,
    }
}

/// Two nodes at the given distance with a single directed RF link carrying
/// one transfer.
pub fn transfer_pair_scenario(distance_m: f64, size_mb: f64) -> ScenarioFile {
    let capacity = 100.0;
    ScenarioFile {
        name: format!("pair-{distance_m}m"),
        seed: Some(DEFAULT_SEED),
        event_cap: None,
        nodes: vec![
            NodeSpec { id: "tx".into(), capacity, position: Some((0.0, 0.0)) },
            NodeSpec { id: "rx".into(), capacity, position: Some((distance_m, 0.0)) },
        ],
        links: vec![LinkEntry {
            src: "tx".into(),
            dst: "rx".into(),
            bandwidth: None,
            latency: 0.0,
            undirected: false,
        }],
        auto_link: None,
        rf: Some(RfSection::default()),
        interference: "csma_bianchi".into(),
        routing: "direct".into(),
        scheduler: "manual".into(),
        dags: vec![tx_rx_dag("d0", "tx", "rx", size_mb, capacity)],
        output: None,
    }
}

/// `count` parallel horizontal links of the given length, vertically
/// separated by `sep`; each carries one transfer of `size_mb`.
pub fn parallel_links_scenario(count: usize, length: f64, sep: f64, size_mb: f64) -> ScenarioFile {
    let capacity = 100.0;
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut dags = Vec::new();
    for i in 0..count {
        let y = sep * i as f64;
        let tx = format!("tx{i}");
        let rx = format!("rx{i}");
        nodes.push(NodeSpec { id: tx.clone(), capacity, position: Some((0.0, y)) });
        nodes.push(NodeSpec { id: rx.clone(), capacity, position: Some((length, y)) });
        links.push(LinkEntry {
            src: tx.clone(),
            dst: rx.clone(),
            bandwidth: None,
            latency: 0.0,
            undirected: false,
        });
        dags.push(tx_rx_dag(&format!("d{i}"), &tx, &rx, size_mb, capacity));
    }
    ScenarioFile {
        name: format!("parallel-{count}x{length}m-sep{sep}"),
        seed: Some(DEFAULT_SEED),
        event_cap: None,
        nodes,
        links,
        auto_link: None,
        rf: Some(RfSection::default()),
        interference: "csma_bianchi".into(),
        routing: "direct".into(),
        scheduler: "manual".into(),
        dags,
        output: None,
    }
}

/// k x k grid mesh at 40 m spacing with 8-neighbor adjacency and
/// heterogeneous capacities. The 3x3 grid has 20 undirected links and the
/// 4x4 grid 42 under this rule.
pub fn grid_scenario(
    k: usize,
    seed: u64,
    dag: DagSpec,
    scheduler: &str,
    routing: &str,
    interference: &str,
) -> ScenarioFile {
    grid_scenario_multi(k, seed, vec![dag], scheduler, routing, interference)
}

pub fn grid_scenario_multi(
    k: usize,
    seed: u64,
    dags: Vec<DagSpec>,
    scheduler: &str,
    routing: &str,
    interference: &str,
) -> ScenarioFile {
    const SPACING: f64 = 40.0;
    let mut nodes = Vec::new();
    for r in 0..k {
        for c in 0..k {
            let i = r * k + c;
            nodes.push(NodeSpec {
                id: format!("n{i}"),
                capacity: heterogeneous_capacity(seed, i as u64),
                position: Some((c as f64 * SPACING, r as f64 * SPACING)),
            });
        }
    }
    let mut links = Vec::new();
    for r in 0..k {
        for c in 0..k {
            // emit each undirected pair once: E, S, SE, SW neighbors
            for (dr, dc) in [(0i64, 1i64), (1, 0), (1, 1), (1, -1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= k as i64 || nc >= k as i64 {
                    continue;
                }
                links.push(LinkEntry {
                    src: format!("n{}", r * k + c),
                    dst: format!("n{}", nr as usize * k + nc as usize),
                    bandwidth: None,
                    latency: 0.0,
                    undirected: true,
                });
            }
        }
    }
    ScenarioFile {
        name: format!("grid{k}x{k}"),
        seed: Some(seed),
        event_cap: None,
        nodes,
        links,
        auto_link: None,
        rf: Some(RfSection::default()),
        interference: interference.into(),
        routing: routing.into(),
        scheduler: scheduler.into(),
        dags,
        output: None,
    }
}

pub struct RggStats {
    pub seed: u64,
    pub rejected_seeds: Vec<u64>,
    pub undirected_links: usize,
    pub average_degree: f64,
}

/// 100 nodes uniform in a 500 m x 500 m area, linked within 80 m WiFi
/// range. Disconnected draws are rejected and the next seed tried.
pub fn rgg_scenario(
    start_seed: u64,
    dag: DagSpec,
    scheduler: &str,
    routing: &str,
    interference: &str,
) -> (ScenarioFile, RggStats) {
    const N: usize = 100;
    const AREA: f64 = 500.0;
    const RANGE: f64 = 80.0;
    let mut rejected = Vec::new();
    let mut seed = start_seed;
    let (positions, undirected) = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<(f64, f64)> = (0..N)
            .map(|_| (rng.gen_range(0.0..AREA), rng.gen_range(0.0..AREA)))
            .collect();
        let mut adjacency = vec![Vec::new(); N];
        let mut undirected = 0usize;
        for i in 0..N {
            for j in (i + 1)..N {
                if crate::rfphy::euclidean(positions[i], positions[j]) <= RANGE {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                    undirected += 1;
                }
            }
        }
        // connectivity check
        let mut seen = vec![false; N];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        if count == N {
            break (positions, undirected);
        }
        rejected.push(seed);
        seed += 1;
    };
    let nodes: Vec<NodeSpec> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| NodeSpec {
            id: format!("n{i}"),
            capacity: heterogeneous_capacity(DEFAULT_SEED, i as u64),
            position: Some(p),
        })
        .collect();
    let stats = RggStats {
        seed,
        rejected_seeds: rejected,
        undirected_links: undirected,
        average_degree: 2.0 * undirected as f64 / N as f64,
    };
    let file = ScenarioFile {
        name: format!("rgg100-seed{seed}"),
        seed: Some(DEFAULT_SEED),
        event_cap: None,
        nodes,
        links: Vec::new(),
        auto_link: Some(AutoLink { max_distance_m: RANGE }),
        rf: Some(RfSection::default()),
        interference: interference.into(),
        routing: routing.into(),
        scheduler: scheduler.into(),
        dags: vec![dag],
        output: None,
    };
    (file, stats)
}

const TEMPLATE_COST: f64 = 500.0;

fn tasks(n: usize) -> Vec<TaskSpec> {
    (0..n)
        .map(|i| TaskSpec {
            id: format!("T{i}"),
            compute_cost: TEMPLATE_COST,
            pinned_to: None,
        })
        .collect()
}

fn edge(src: usize, dst: usize, mb: f64) -> DagEdge {
    DagEdge {
        src_task: format!("T{src}"),
        dst_task: format!("T{dst}"),
        data_size: mb,
    }
}

/// 5-task fork-join: T0 -> {T1,T2,T3} -> T4.
pub fn fork_join_dag(id: &str, inject_at: f64, data_mb: f64) -> DagSpec {
    let mut edges = Vec::new();
    for i in 1..4 {
        edges.push(edge(0, i, data_mb));
        edges.push(edge(i, 4, data_mb));
    }
    DagSpec { id: id.into(), tasks: tasks(5), edges, inject_at }
}

/// 10-task diamond with cross-links:
/// T0 -> {T1..T4}; T1->{T5,T6}, T2->{T6,T7}, T3->{T7,T8}, T4->{T8,T5};
/// {T5..T8} -> T9.
pub fn diamond_dag(id: &str, data_mb: f64) -> DagSpec {
    let mut edges = Vec::new();
    for i in 1..=4 {
        edges.push(edge(0, i, data_mb));
    }
    for (src, pair) in [(1, (5, 6)), (2, (6, 7)), (3, (7, 8)), (4, (8, 5))] {
        edges.push(edge(src, pair.0, data_mb));
        edges.push(edge(src, pair.1, data_mb));
    }
    for i in 5..=8 {
        edges.push(edge(i, 9, data_mb));
    }
    DagSpec { id: id.into(), tasks: tasks(10), edges, inject_at: 0.0 }
}

/// Multi-level pipeline. The 20-task instance uses layers 1/4/6/6/3; larger
/// instances scale the inner layers proportionally. Task j of a layer feeds
/// tasks (j mod W) and ((j+1) mod W) of the next layer of width W.
pub fn pipeline_dag(id: &str, task_count: usize, data_mb: f64) -> DagSpec {
    assert!(task_count >= 10);
    let l2 = (task_count as f64 * 0.2).round() as usize;
    let l3 = (task_count as f64 * 0.3).round() as usize;
    let l4 = l3;
    let l5 = task_count - 1 - l2 - l3 - l4;
    let widths = [1, l2, l3, l4, l5];
    let mut start = [0usize; 5];
    for i in 1..5 {
        start[i] = start[i - 1] + widths[i - 1];
    }
    let mut edges = Vec::new();
    for layer in 0..4 {
        let w_next = widths[layer + 1];
        let mut covered = vec![false; w_next];
        for j in 0..widths[layer] {
            let src = start[layer] + j;
            let a = j % w_next;
            let b = (j + 1) % w_next;
            edges.push(edge(src, start[layer + 1] + a, data_mb));
            covered[a] = true;
            if b != a {
                edges.push(edge(src, start[layer + 1] + b, data_mb));
                covered[b] = true;
            }
        }
        // keep the pipeline single-rooted: a widening layer leaves some
        // tasks without a producer under the mod rule; feed each from the
        // (k mod W) task of the previous layer
        for (k, done) in covered.iter().enumerate() {
            if !done {
                let src = start[layer] + (k % widths[layer]);
                edges.push(edge(src, start[layer + 1] + k, data_mb));
            }
        }
    }
    DagSpec { id: id.into(), tasks: tasks(task_count), edges, inject_at: 0.0 }
}

/// The three evaluation DAG shapes by name.
pub fn dag_template(name: &str, data_mb: f64) -> DagSpec {
    match name {
        "fj5" => fork_join_dag("fj5", 0.0, data_mb),
        "diamond10" => diamond_dag("diamond10", data_mb),
        "pipeline20" => pipeline_dag("pipeline20", 20, data_mb),
        other => panic!("unknown dag template '{other}'"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{compile, Overrides};

    #[test]
    fn capacities_are_in_range_and_stable() {
        for i in 0..64 {
            let c = heterogeneous_capacity(42, i);
            assert!((80.0..=300.0).contains(&c));
            assert_eq!(c, heterogeneous_capacity(42, i));
        }
        assert_ne!(heterogeneous_capacity(42, 0), heterogeneous_capacity(42, 1));
        assert_ne!(heterogeneous_capacity(42, 0), heterogeneous_capacity(43, 0));
    }

    #[test]
    fn grid_link_counts_follow_eight_neighbor_rule() {
        for (k, expected) in [(2, 6), (3, 20), (4, 42)] {
            let file = grid_scenario(
                k,
                42,
                fork_join_dag("fj5", 0.0, 10.0),
                "heft",
                "shortest_path",
                "none",
            );
            assert_eq!(file.links.len(), expected, "k={k}");
            let sc = compile(&file, &Overrides::default()).unwrap();
            assert_eq!(sc.input.network.links.len(), 2 * expected);
        }
    }

    #[test]
    fn grid_links_have_positive_derived_rates() {
        let file = grid_scenario(
            3,
            42,
            fork_join_dag("fj5", 0.0, 10.0),
            "heft",
            "shortest_path",
            "csma_bianchi",
        );
        let sc = compile(&file, &Overrides::default()).unwrap();
        for l in &sc.input.network.links {
            assert!(l.bandwidth > 0.0, "{} -> {}", l.src, l.dst);
        }
    }

    #[test]
    fn dag_templates_have_documented_shapes() {
        let fj = dag_template("fj5", 10.0);
        assert_eq!(fj.tasks.len(), 5);
        assert_eq!(fj.edges.len(), 6);
        let dm = dag_template("diamond10", 10.0);
        assert_eq!(dm.tasks.len(), 10);
        assert_eq!(dm.edges.len(), 16);
        let pl = dag_template("pipeline20", 10.0);
        assert_eq!(pl.tasks.len(), 20);
        // layers 1/4/6/6/3
        for n in [20usize, 30, 40, 50] {
            let p = pipeline_dag("p", n, 10.0);
            assert_eq!(p.tasks.len(), n);
            crate::model::validate_scenario(
                &[NodeSpec { id: "n0".into(), capacity: 1.0, position: None }],
                &[],
                &[p],
                false,
            )
            .unwrap();
        }
    }

    #[test]
    fn parallel_scenarios_compile() {
        for count in [2, 3, 8] {
            let file = parallel_links_scenario(count, 30.0, 5.0, 10.0);
            let sc = compile(&file, &Overrides::default()).unwrap();
            assert_eq!(sc.input.network.links.len(), count);
            assert_eq!(sc.input.dags.len(), count);
            for l in &sc.input.network.links {
                assert_eq!(l.bandwidth, 8.6);
            }
        }
    }

    #[test]
    fn rgg_is_connected_with_plausible_density() {
        let (file, stats) = rgg_scenario(
            DEFAULT_SEED,
            pipeline_dag("p30", 30, 10.0),
            "heft",
            "shortest_path",
            "none",
        );
        assert_eq!(file.nodes.len(), 100);
        let sc = compile(&file, &Overrides::default()).unwrap();
        assert_eq!(sc.input.network.links.len(), 2 * stats.undirected_links);
        assert!(stats.undirected_links >= 250 && stats.undirected_links <= 400,
            "links = {}", stats.undirected_links);
        assert!(stats.average_degree >= 5.0 && stats.average_degree <= 8.0);
    }
}
