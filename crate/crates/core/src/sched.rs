//! Pluggable schedulers. Each maps DAG tasks onto nodes from a
//! [`NetworkSnapshot`] (plus the virtual network HEFT/CPOP consume); none of
//! them can observe conflict graphs or interference factors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_scenario, DagSpec, NetworkSnapshot, NodeSpec, PlacementPlan};
use crate::routing::RoutingModel;

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("manual scheduler requires a pin on task '{0}'")]
    UnpinnedTask(String),
    #[error("unknown scheduler '{0}'")]
    UnknownScheduler(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Manual,
    RoundRobin,
    Heft,
    Cpop,
}

impl SchedulerKind {
    pub fn from_name(name: &str) -> Result<Self, SchedError> {
        match name {
            "manual" => Ok(Self::Manual),
            "round_robin" => Ok(Self::RoundRobin),
            "heft" => Ok(Self::Heft),
            "cpop" => Ok(Self::Cpop),
            other => Err(SchedError::UnknownScheduler(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Manual => "manual",
            Self::RoundRobin => "round_robin",
            Self::Heft => "heft",
            Self::Cpop => "cpop",
        }
    }
}

/// Complete graph over nodes with end-to-end bottleneck bandwidths.
/// Unreachable pairs carry 0.001 MB/s so list schedulers avoid them;
/// co-located transfers are free.
#[derive(Debug, Clone)]
pub struct VirtualNetwork {
    n: usize,
    bandwidth: Vec<f64>,
    latency: Vec<f64>,
}

pub const UNREACHABLE_BANDWIDTH: f64 = 0.001;

impl VirtualNetwork {
    pub fn bandwidth(&self, u: usize, v: usize) -> f64 {
        self.bandwidth[u * self.n + v]
    }

    pub fn latency(&self, u: usize, v: usize) -> f64 {
        self.latency[u * self.n + v]
    }

    /// Estimated seconds to move `mb` from node `u` to node `v`.
    pub fn comm_cost(&self, u: usize, v: usize, mb: f64) -> f64 {
        if u == v {
            0.0
        } else {
            mb / self.bandwidth(u, v) + self.latency(u, v)
        }
    }
}

/// Build the fully-connected virtual network the list schedulers see, using
/// the routing model's interference-free path choices over the snapshot.
pub fn build_virtual_network(snapshot: &NetworkSnapshot, routing: RoutingModel) -> VirtualNetwork {
    let nodes: Vec<NodeSpec> = snapshot
        .nodes
        .iter()
        .map(|n| NodeSpec {
            id: n.id.clone(),
            capacity: n.capacity,
            position: None,
        })
        .collect();
    let links: Vec<crate::model::LinkSpec> = snapshot
        .links
        .iter()
        .map(|l| crate::model::LinkSpec {
            src: l.src.clone(),
            dst: l.dst.clone(),
            bandwidth: l.bandwidth,
            latency: l.latency,
        })
        .collect();
    let net = validate_scenario(&nodes, &links, &[], false)
        .expect("snapshot reflects an already-validated network");
    let n = nodes.len();
    let metrics = crate::routing::route_metrics_all_pairs(routing, &net);
    let mut bandwidth = vec![0.0; n * n];
    let mut latency = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let (bw, lat) = if u == v {
                (f64::INFINITY, 0.0)
            } else {
                match metrics[u][v] {
                    Some((bottleneck, lat_us)) => (bottleneck, lat_us as f64 / 1e6),
                    None => (UNREACHABLE_BANDWIDTH, 0.0),
                }
            };
            bandwidth[u * n + v] = bw;
            latency[u * n + v] = lat;
        }
    }
    VirtualNetwork { n, bandwidth, latency }
}

/// Produce a placement plan for one DAG.
pub fn make_plan(
    kind: SchedulerKind,
    dag: &DagSpec,
    snapshot: &NetworkSnapshot,
    vnet: &VirtualNetwork,
) -> Result<PlacementPlan, SchedError> {
    match kind {
        SchedulerKind::Manual => schedule_manual(dag),
        SchedulerKind::RoundRobin => Ok(schedule_round_robin(dag, snapshot)),
        SchedulerKind::Heft => Ok(schedule_heft(dag, snapshot, vnet)),
        SchedulerKind::Cpop => Ok(schedule_cpop(dag, snapshot, vnet)),
    }
}

pub fn schedule_manual(dag: &DagSpec) -> Result<PlacementPlan, SchedError> {
    let mut plan = PlacementPlan::new();
    for t in &dag.tasks {
        let pin = t
            .pinned_to
            .clone()
            .ok_or_else(|| SchedError::UnpinnedTask(t.id.clone()))?;
        plan.insert(t.id.clone(), pin);
    }
    Ok(plan)
}

/// Tasks in declaration order onto nodes in declaration order; pinned tasks
/// keep their pin and do not advance the cycle.
pub fn schedule_round_robin(dag: &DagSpec, snapshot: &NetworkSnapshot) -> PlacementPlan {
    let mut plan = PlacementPlan::new();
    let mut cursor = 0usize;
    for t in &dag.tasks {
        if let Some(pin) = &t.pinned_to {
            plan.insert(t.id.clone(), pin.clone());
        } else {
            plan.insert(t.id.clone(), snapshot.nodes[cursor].id.clone());
            cursor = (cursor + 1) % snapshot.nodes.len();
        }
    }
    plan
}

/// Shared precomputation for the list schedulers.
struct DagView {
    task_count: usize,
    succ: Vec<Vec<(usize, f64)>>,
    pred: Vec<Vec<(usize, f64)>>,
    order: Vec<usize>,
}

fn dag_view(dag: &DagSpec) -> DagView {
    let task_count = dag.tasks.len();
    let index: HashMap<&str, usize> = dag
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    let mut succ = vec![Vec::new(); task_count];
    let mut pred = vec![Vec::new(); task_count];
    let mut adjacency = vec![Vec::new(); task_count];
    let mut indegree = vec![0usize; task_count];
    for e in &dag.edges {
        let s = index[e.src_task.as_str()];
        let d = index[e.dst_task.as_str()];
        succ[s].push((d, e.data_size));
        pred[d].push((s, e.data_size));
        adjacency[s].push(d);
        indegree[d] += 1;
    }
    let order = crate::model::topological_order(&adjacency, &indegree)
        .expect("validated DAG is acyclic");
    DagView { task_count, succ, pred, order }
}

/// Mean execution seconds of each task over all nodes, and the mean
/// communication cost of a payload over all ordered node pairs.
fn mean_costs<'a>(
    dag: &DagSpec,
    snapshot: &NetworkSnapshot,
    vnet: &'a VirtualNetwork,
) -> (Vec<f64>, impl Fn(f64) -> f64 + 'a) {
    let n = snapshot.nodes.len();
    let mean_inverse_capacity =
        snapshot.nodes.iter().map(|x| 1.0 / x.capacity).sum::<f64>() / n as f64;
    let w_mean: Vec<f64> = dag
        .tasks
        .iter()
        .map(|t| t.compute_cost * mean_inverse_capacity)
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let comm_mean = move |mb: f64| -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        pairs
            .iter()
            .map(|&(u, v)| vnet.comm_cost(u, v, mb))
            .sum::<f64>()
            / pairs.len() as f64
    };
    (w_mean, comm_mean)
}

fn upward_ranks(dag: &DagSpec, view: &DagView, w_mean: &[f64], comm: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut rank = vec![0.0; view.task_count];
    for &t in view.order.iter().rev() {
        let tail = view.succ[t]
            .iter()
            .map(|&(s, mb)| comm(mb) + rank[s])
            .fold(0.0, f64::max);
        rank[t] = w_mean[t] + tail;
    }
    let _ = dag;
    rank
}

fn downward_ranks(view: &DagView, w_mean: &[f64], comm: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut rank = vec![0.0; view.task_count];
    for &t in &view.order {
        rank[t] = view.pred[t]
            .iter()
            .map(|&(p, mb)| rank[p] + w_mean[p] + comm(mb))
            .fold(0.0, f64::max);
    }
    rank
}

/// Per-node occupied intervals, for insertion-based slot search.
#[derive(Default, Clone)]
struct Timeline {
    busy: Vec<(f64, f64)>,
}

impl Timeline {
    /// Earliest start at or after `ready` that fits `dur`, considering gaps.
    fn earliest_fit(&self, ready: f64, dur: f64) -> f64 {
        let mut candidate = ready;
        for &(s, e) in &self.busy {
            if candidate + dur <= s {
                return candidate;
            }
            candidate = candidate.max(e);
        }
        candidate
    }

    fn insert(&mut self, start: f64, end: f64) {
        let pos = self
            .busy
            .partition_point(|&(s, _)| s < start || (s == start && true));
        self.busy.insert(pos.min(self.busy.len()), (start, end));
        self.busy.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
}

struct EftState<'a> {
    snapshot: &'a NetworkSnapshot,
    vnet: &'a VirtualNetwork,
    timelines: Vec<Timeline>,
    /// (node, finish time) per placed task.
    placed: Vec<Option<(usize, f64)>>,
}

impl<'a> EftState<'a> {
    fn new(snapshot: &'a NetworkSnapshot, vnet: &'a VirtualNetwork, tasks: usize) -> Self {
        Self {
            snapshot,
            vnet,
            timelines: vec![Timeline::default(); snapshot.nodes.len()],
            placed: vec![None; tasks],
        }
    }

    /// Earliest finish time of `task` on `node` with insertion-based search.
    fn eft_on(&self, dag: &DagSpec, view: &DagView, task: usize, node: usize) -> (f64, f64) {
        let ready = view.pred[task]
            .iter()
            .map(|&(p, mb)| {
                let (pn, pf) = self.placed[p].expect("preds placed before succs");
                pf + self.vnet.comm_cost(pn, node, mb)
            })
            .fold(0.0, f64::max);
        let dur = dag.tasks[task].compute_cost / self.snapshot.nodes[node].capacity;
        let start = self.timelines[node].earliest_fit(ready, dur);
        (start, start + dur)
    }

    /// Place `task` on the node minimizing EFT (declaration order breaks
    /// ties); honors pins.
    fn place_best(&mut self, dag: &DagSpec, view: &DagView, task: usize) -> usize {
        let pin = dag.tasks[task]
            .pinned_to
            .as_ref()
            .map(|p| self.snapshot.nodes.iter().position(|n| &n.id == p).unwrap());
        let mut best: Option<(f64, usize, f64)> = None;
        for node in 0..self.snapshot.nodes.len() {
            if let Some(p) = pin {
                if node != p {
                    continue;
                }
            }
            let (start, finish) = self.eft_on(dag, view, task, node);
            if best.is_none_or(|(bf, _, _)| finish < bf) {
                best = Some((finish, node, start));
            }
        }
        let (finish, node, start) = best.expect("at least one node");
        self.timelines[node].insert(start, finish);
        self.placed[task] = Some((node, finish));
        node
    }

    fn place_on(&mut self, dag: &DagSpec, view: &DagView, task: usize, node: usize) {
        let (start, finish) = self.eft_on(dag, view, task, node);
        self.timelines[node].insert(start, finish);
        self.placed[task] = Some((node, finish));
    }
}

/// Heterogeneous earliest-finish-time list scheduling with upward ranks and
/// insertion-based slot search.
pub fn schedule_heft(dag: &DagSpec, snapshot: &NetworkSnapshot, vnet: &VirtualNetwork) -> PlacementPlan {
    let view = dag_view(dag);
    let (w_mean, comm) = mean_costs(dag, snapshot, vnet);
    let rank = upward_ranks(dag, &view, &w_mean, &comm);

    let mut order: Vec<usize> = (0..view.task_count).collect();
    order.sort_by(|&a, &b| {
        rank[b]
            .partial_cmp(&rank[a])
            .unwrap()
            .then_with(|| dag.tasks[a].id.cmp(&dag.tasks[b].id))
    });

    let mut state = EftState::new(snapshot, vnet, view.task_count);
    let mut plan = PlacementPlan::new();
    for t in order {
        let node = state.place_best(dag, &view, t);
        plan.insert(dag.tasks[t].id.clone(), snapshot.nodes[node].id.clone());
    }
    plan
}

/// Critical-path-on-processor scheduling: critical-path tasks go to the node
/// minimizing the path's compute time, the rest by earliest finish time.
pub fn schedule_cpop(dag: &DagSpec, snapshot: &NetworkSnapshot, vnet: &VirtualNetwork) -> PlacementPlan {
    let view = dag_view(dag);
    let (w_mean, comm) = mean_costs(dag, snapshot, vnet);
    let rank_u = upward_ranks(dag, &view, &w_mean, &comm);
    let rank_d = downward_ranks(&view, &w_mean, &comm);
    let priority: Vec<f64> = (0..view.task_count).map(|t| rank_u[t] + rank_d[t]).collect();

    // Walk the maximal-priority chain from the best entry task.
    let better = |a: usize, b: usize| -> bool {
        priority[a] > priority[b]
            || (priority[a] == priority[b] && dag.tasks[a].id < dag.tasks[b].id)
    };
    let mut cursor = (0..view.task_count)
        .filter(|&t| view.pred[t].is_empty())
        .reduce(|a, b| if better(b, a) { b } else { a })
        .expect("dag has an entry task");
    let mut on_cp = vec![false; view.task_count];
    on_cp[cursor] = true;
    while !view.succ[cursor].is_empty() {
        cursor = view.succ[cursor]
            .iter()
            .map(|&(s, _)| s)
            .reduce(|a, b| if better(b, a) { b } else { a })
            .unwrap();
        on_cp[cursor] = true;
    }

    // Critical-path node: minimal total compute time, declaration order ties.
    let cp_cost: f64 = (0..view.task_count)
        .filter(|&t| on_cp[t])
        .map(|t| dag.tasks[t].compute_cost)
        .sum();
    let cp_node = (0..snapshot.nodes.len())
        .map(|v| (cp_cost / snapshot.nodes[v].capacity, v))
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .unwrap()
        .1;

    // Priority-ordered list scheduling over ready tasks.
    let mut state = EftState::new(snapshot, vnet, view.task_count);
    let mut plan = PlacementPlan::new();
    let mut unplaced_preds: Vec<usize> = (0..view.task_count).map(|t| view.pred[t].len()).collect();
    let mut ready: Vec<usize> = (0..view.task_count).filter(|&t| unplaced_preds[t] == 0).collect();
    while !ready.is_empty() {
        let (pos, _) = ready
            .iter()
            .enumerate()
            .reduce(|a, b| if better(*b.1, *a.1) { b } else { a })
            .unwrap();
        let t = ready.swap_remove(pos);
        let node = if on_cp[t] && dag.tasks[t].pinned_to.is_none() {
            state.place_on(dag, &view, t, cp_node);
            cp_node
        } else {
            state.place_best(dag, &view, t)
        };
        plan.insert(dag.tasks[t].id.clone(), snapshot.nodes[node].id.clone());
        for &(s, _) in &view.succ[t] {
            unplaced_preds[s] -= 1;
            if unplaced_preds[s] == 0 {
                ready.push(s);
            }
        }
        ready.sort_unstable();
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DagEdge, TaskSpec};

    fn snapshot(capacities: &[f64]) -> NetworkSnapshot {
        NetworkSnapshot {
            nodes: capacities
                .iter()
                .enumerate()
                .map(|(i, &c)| crate::model::SnapshotNode {
                    id: format!("n{i}"),
                    capacity: c,
                    queue_depth: 0,
                })
                .collect(),
            links: Vec::new(),
        }
    }

    fn full_mesh_snapshot(capacities: &[f64], bw: f64) -> NetworkSnapshot {
        let mut s = snapshot(capacities);
        for i in 0..capacities.len() {
            for j in 0..capacities.len() {
                if i != j {
                    s.links.push(crate::model::SnapshotLink {
                        src: format!("n{i}"),
                        dst: format!("n{j}"),
                        bandwidth: bw,
                        latency: 0.0,
                        active_transfers: 0,
                    });
                }
            }
        }
        s
    }

    fn fork_join(data: f64) -> DagSpec {
        let tasks = (0..5)
            .map(|i| TaskSpec {
                id: format!("T{i}"),
                compute_cost: 500.0,
                pinned_to: None,
            })
            .collect();
        let mut edges = Vec::new();
        for i in 1..4 {
            edges.push(DagEdge { src_task: "T0".into(), dst_task: format!("T{i}"), data_size: data });
            edges.push(DagEdge { src_task: format!("T{i}"), dst_task: "T4".into(), data_size: data });
        }
        DagSpec { id: "d".into(), tasks, edges, inject_at: 0.0 }
    }

    #[test]
    fn manual_uses_pins_and_rejects_unpinned() {
        let mut dag = fork_join(0.0);
        for t in &mut dag.tasks {
            t.pinned_to = Some("n0".into());
        }
        let plan = schedule_manual(&dag).unwrap();
        assert!(plan.values().all(|n| n == "n0"));

        dag.tasks[2].pinned_to = None;
        assert_eq!(
            schedule_manual(&dag),
            Err(SchedError::UnpinnedTask("T2".into()))
        );
    }

    #[test]
    fn round_robin_cycles_nodes() {
        let dag = fork_join(10.0);
        let snap = snapshot(&[100.0, 100.0, 100.0, 100.0]);
        let plan = schedule_round_robin(&dag, &snap);
        assert_eq!(plan["T0"], "n0");
        assert_eq!(plan["T1"], "n1");
        assert_eq!(plan["T2"], "n2");
        assert_eq!(plan["T3"], "n3");
        assert_eq!(plan["T4"], "n0");
    }

    #[test]
    fn round_robin_pins_do_not_advance_cycle() {
        let mut dag = fork_join(0.0);
        dag.tasks[1].pinned_to = Some("n3".into()); // T1 pinned
        let snap = snapshot(&[100.0, 100.0]);
        let plan = schedule_round_robin(&dag, &snap);
        assert_eq!(plan["T0"], "n0");
        assert_eq!(plan["T1"], "n3");
        assert_eq!(plan["T2"], "n1");
        assert_eq!(plan["T3"], "n0");
        assert_eq!(plan["T4"], "n1");
    }

    #[test]
    fn single_node_collapses_all_schedulers() {
        let dag = fork_join(10.0);
        let snap = snapshot(&[150.0]);
        let vnet = build_virtual_network(&snap, RoutingModel::Direct);
        for kind in [SchedulerKind::RoundRobin, SchedulerKind::Heft, SchedulerKind::Cpop] {
            let plan = make_plan(kind, &dag, &snap, &vnet).unwrap();
            assert_eq!(plan.len(), dag.tasks.len());
            assert!(plan.values().all(|n| n == "n0"), "{kind:?}");
        }
    }

    #[test]
    fn near_zero_bandwidth_collapses_onto_fastest_node() {
        let dag = fork_join(10.0);
        let snap = full_mesh_snapshot(&[100.0, 200.0], UNREACHABLE_BANDWIDTH);
        let vnet = build_virtual_network(&snap, RoutingModel::WidestPath);
        let heft = schedule_heft(&dag, &snap, &vnet);
        assert!(heft.values().all(|n| n == "n1"), "{heft:?}");
        let cpop = schedule_cpop(&dag, &snap, &vnet);
        assert!(cpop.values().all(|n| n == "n1"), "{cpop:?}");
    }

    #[test]
    fn chain_with_zero_data_runs_on_fastest_node() {
        let dag = DagSpec {
            id: "chain".into(),
            tasks: (0..3)
                .map(|i| TaskSpec { id: format!("T{i}"), compute_cost: 100.0, pinned_to: None })
                .collect(),
            edges: vec![
                DagEdge { src_task: "T0".into(), dst_task: "T1".into(), data_size: 0.0 },
                DagEdge { src_task: "T1".into(), dst_task: "T2".into(), data_size: 0.0 },
            ],
            inject_at: 0.0,
        };
        let snap = full_mesh_snapshot(&[100.0, 250.0, 120.0], 8.6);
        let vnet = build_virtual_network(&snap, RoutingModel::WidestPath);
        let plan = schedule_cpop(&dag, &snap, &vnet);
        assert!(plan.values().all(|n| n == "n1"), "{plan:?}");
        let plan = schedule_heft(&dag, &snap, &vnet);
        assert!(plan.values().all(|n| n == "n1"), "{plan:?}");
    }

    #[test]
    fn virtual_network_uses_bottleneck_and_marks_unreachable() {
        // n0 -> n1 -> n2 chain, 8.6 then 4.3; n3 isolated
        let mut snap = snapshot(&[100.0; 4]);
        for (s, d, bw) in [(0, 1, 8.6), (1, 0, 8.6), (1, 2, 4.3), (2, 1, 4.3)] {
            snap.links.push(crate::model::SnapshotLink {
                src: format!("n{s}"),
                dst: format!("n{d}"),
                bandwidth: bw,
                latency: 0.0,
                active_transfers: 0,
            });
        }
        let vnet = build_virtual_network(&snap, RoutingModel::WidestPath);
        assert_eq!(vnet.bandwidth(0, 1), 8.6);
        assert_eq!(vnet.bandwidth(0, 2), 4.3);
        assert_eq!(vnet.bandwidth(0, 3), UNREACHABLE_BANDWIDTH);
        assert_eq!(vnet.bandwidth(3, 0), UNREACHABLE_BANDWIDTH);
        assert_eq!(vnet.bandwidth(2, 2), f64::INFINITY);
        assert_eq!(vnet.comm_cost(2, 2, 50.0), 0.0);
        // symmetric for the symmetric topology
        for u in 0..4 {
            for v in 0..4 {
                assert_eq!(vnet.bandwidth(u, v), vnet.bandwidth(v, u));
            }
        }
    }

    #[test]
    fn plans_are_deterministic() {
        let dag = fork_join(10.0);
        let snap = full_mesh_snapshot(&[80.0, 300.0, 150.0, 220.0], 3.2);
        let vnet = build_virtual_network(&snap, RoutingModel::WidestPath);
        let a = schedule_heft(&dag, &snap, &vnet);
        let b = schedule_heft(&dag, &snap, &vnet);
        assert_eq!(a, b);
        let a = schedule_cpop(&dag, &snap, &vnet);
        let b = schedule_cpop(&dag, &snap, &vnet);
        assert_eq!(a, b);
    }

    #[test]
    fn pins_are_respected_by_all_schedulers() {
        let mut dag = fork_join(10.0);
        dag.tasks[2].pinned_to = Some("n0".into());
        let snap = full_mesh_snapshot(&[80.0, 300.0], 3.2);
        let vnet = build_virtual_network(&snap, RoutingModel::WidestPath);
        for kind in [SchedulerKind::RoundRobin, SchedulerKind::Heft, SchedulerKind::Cpop] {
            let plan = make_plan(kind, &dag, &snap, &vnet).unwrap();
            assert_eq!(plan["T2"], "n0", "{kind:?}");
        }
    }
}
