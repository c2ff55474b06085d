//! Domain types shared by the scheduler, router, and event engine: nodes,
//! links, DAG workflows, task lifecycle, snapshots, and placement plans.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in declaration order.
pub type NodeId = usize;
/// Index of a directed link in declaration order.
pub type LinkId = usize;

/// A compute node. `capacity` is in compute units per second; `position`
/// is required whenever the scenario derives link rates from RF geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(f64, f64)>,
}

/// A directed link. Bandwidth is MB/s, latency is seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub src: String,
    pub dst: String,
    pub bandwidth: f64,
    pub latency: f64,
}

/// A task inside a DAG. `compute_cost` is in compute units; execution time
/// on node v is `compute_cost / capacity(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub compute_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_to: Option<String>,
}

/// A data dependency between two tasks; `data_size` is MB that must reach
/// the consumer's node before it may start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagEdge {
    pub src_task: String,
    pub dst_task: String,
    pub data_size: f64,
}

/// A workflow injected at `inject_at` simulation seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagSpec {
    pub id: String,
    pub tasks: Vec<TaskSpec>,
    pub edges: Vec<DagEdge>,
    #[serde(default)]
    pub inject_at: f64,
}

impl DagSpec {
    /// Namespaced task id used internally so multi-DAG runs stay unambiguous.
    pub fn scoped_task_id(&self, task: &str) -> String {
        format!("{}/{}", self.id, task)
    }

    pub fn task_index(&self, task: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == task)
    }
}

/// Five-state task lifecycle. Queued is skipped when the target node is idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskState {
    Pending,
    Ready,
    Queued,
    Running,
    Completed,
}

/// Lifecycle triggers consumed by [`transition_task`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskEvent {
    /// Every input edge has been delivered.
    InputsDelivered,
    /// The target node was busy when the task became ready.
    NodeBusy,
    /// The node picked this task to run.
    Started,
    /// Execution finished.
    Finished,
}

#[derive(Debug, Error, PartialEq)]
#[error("illegal task transition: {state:?} on {event:?}")]
pub struct IllegalTransition {
    pub state: TaskState,
    pub event: TaskEvent,
}

/// Advance the task lifecycle. Any pair outside the lifecycle order is an
/// engine logic bug and is reported as [`IllegalTransition`].
pub fn transition_task(state: TaskState, event: TaskEvent) -> Result<TaskState, IllegalTransition> {
    use TaskEvent::*;
    use TaskState::*;
    match (state, event) {
        (Pending, InputsDelivered) => Ok(Ready),
        (Ready, NodeBusy) => Ok(Queued),
        (Ready, Started) => Ok(Running),
        (Queued, Started) => Ok(Running),
        (Running, Finished) => Ok(Completed),
        _ => Err(IllegalTransition { state, event }),
    }
}

/// Immutable view of the network handed to schedulers. Field order is fixed
/// so serialized snapshots compare byte-for-byte across interference modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSnapshot {
    pub nodes: Vec<SnapshotNode>,
    pub links: Vec<SnapshotLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotNode {
    pub id: String,
    pub capacity: f64,
    pub queue_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotLink {
    pub src: String,
    pub dst: String,
    pub bandwidth: f64,
    pub latency: f64,
    pub active_transfers: usize,
}

impl NetworkSnapshot {
    /// Canonical byte form used by the snapshot-equality tests.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("snapshot serialization")
    }
}

/// Total mapping task id -> node id for one DAG.
pub type PlacementPlan = BTreeMap<String, String>;

/// Validated network: nodes and directed links with index lookups and
/// per-node sorted adjacency.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    node_index: HashMap<String, NodeId>,
    link_index: HashMap<(NodeId, NodeId), LinkId>,
    /// Outgoing links per node, sorted by destination id string.
    out_links: Vec<Vec<LinkId>>,
}

impl Network {
    pub fn node_id(&self, id: &str) -> Option<NodeId> {
        self.node_index.get(id).copied()
    }

    pub fn link_between(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.link_index.get(&(src, dst)).copied()
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node]
    }

    pub fn link_endpoints(&self, link: LinkId) -> (NodeId, NodeId) {
        let l = &self.links[link];
        (self.node_index[&l.src], self.node_index[&l.dst])
    }

    pub fn positions_required(&self) -> bool {
        self.nodes.iter().any(|n| n.position.is_none())
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<f64> {
        let (xa, ya) = self.nodes[a].position?;
        let (xb, yb) = self.nodes[b].position?;
        Some(((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt())
    }
}

/// A single validation failure. `validate_scenario` reports all of them
/// rather than stopping at the first.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("cycle detected in DAG '{dag}'")]
    CyclicDag { dag: String },
    #[error("unknown node reference '{reference}' in {context}")]
    UnknownNodeReference { reference: String, context: String },
    #[error("unknown task reference '{reference}' in DAG '{dag}'")]
    UnknownTaskReference { reference: String, dag: String },
    #[error("duplicate id '{id}' in {context}")]
    DuplicateId { id: String, context: String },
    #[error("node '{node}' is missing a position required by the RF link model")]
    MissingPosition { node: String },
    #[error("nodes '{a}' and '{b}' share the same position")]
    CoincidentNodes { a: String, b: String },
    #[error("{context}: value out of range: {detail}")]
    OutOfRange { context: String, detail: String },
    #[error("link '{src}' -> '{dst}' is a self-loop")]
    SelfLoopLink { src: String, dst: String },
}

/// Validate a raw scenario into a [`Network`], checking id uniqueness, DAG
/// acyclicity, pin targets, link endpoints, and (when `rf_mode`) positions.
pub fn validate_scenario(
    nodes: &[NodeSpec],
    links: &[LinkSpec],
    dags: &[DagSpec],
    rf_mode: bool,
) -> Result<Network, Vec<Violation>> {
    let mut violations = Vec::new();

    let mut node_index = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if node_index.insert(n.id.clone(), i).is_some() {
            violations.push(Violation::DuplicateId {
                id: n.id.clone(),
                context: "nodes".into(),
            });
        }
        if !(n.capacity > 0.0) {
            violations.push(Violation::OutOfRange {
                context: format!("node '{}'", n.id),
                detail: format!("capacity {} must be > 0", n.capacity),
            });
        }
        if rf_mode && n.position.is_none() {
            violations.push(Violation::MissingPosition { node: n.id.clone() });
        }
    }

    if rf_mode {
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if let (Some(a), Some(b)) = (nodes[i].position, nodes[j].position) {
                    if a == b {
                        violations.push(Violation::CoincidentNodes {
                            a: nodes[i].id.clone(),
                            b: nodes[j].id.clone(),
                        });
                    }
                }
            }
        }
    }

    let mut link_index = HashMap::new();
    for (i, l) in links.iter().enumerate() {
        let src = node_index.get(&l.src);
        let dst = node_index.get(&l.dst);
        if src.is_none() {
            violations.push(Violation::UnknownNodeReference {
                reference: l.src.clone(),
                context: format!("link {} -> {}", l.src, l.dst),
            });
        }
        if dst.is_none() {
            violations.push(Violation::UnknownNodeReference {
                reference: l.dst.clone(),
                context: format!("link {} -> {}", l.src, l.dst),
            });
        }
        if l.src == l.dst {
            violations.push(Violation::SelfLoopLink {
                src: l.src.clone(),
                dst: l.dst.clone(),
            });
        }
        if l.bandwidth < 0.0 || l.latency < 0.0 {
            violations.push(Violation::OutOfRange {
                context: format!("link {} -> {}", l.src, l.dst),
                detail: "bandwidth and latency must be >= 0".into(),
            });
        }
        if let (Some(&s), Some(&d)) = (src, dst) {
            if link_index.insert((s, d), i).is_some() {
                violations.push(Violation::DuplicateId {
                    id: format!("{} -> {}", l.src, l.dst),
                    context: "links".into(),
                });
            }
        }
    }

    let mut dag_ids = HashSet::new();
    for dag in dags {
        if !dag_ids.insert(dag.id.clone()) {
            violations.push(Violation::DuplicateId {
                id: dag.id.clone(),
                context: "dags".into(),
            });
        }
        validate_dag(dag, &node_index, &mut violations);
    }

    if !violations.is_empty() {
        return Err(violations);
    }

    let mut out_links: Vec<Vec<LinkId>> = vec![Vec::new(); nodes.len()];
    for (i, l) in links.iter().enumerate() {
        out_links[node_index[&l.src]].push(i);
    }
    for adj in &mut out_links {
        adj.sort_by(|a, b| links[*a].dst.cmp(&links[*b].dst));
    }

    Ok(Network {
        nodes: nodes.to_vec(),
        links: links.to_vec(),
        node_index,
        link_index,
        out_links,
    })
}

fn validate_dag(
    dag: &DagSpec,
    node_index: &HashMap<String, NodeId>,
    violations: &mut Vec<Violation>,
) {
    let mut task_index = HashMap::new();
    for (i, t) in dag.tasks.iter().enumerate() {
        if task_index.insert(t.id.clone(), i).is_some() {
            violations.push(Violation::DuplicateId {
                id: t.id.clone(),
                context: format!("tasks of DAG '{}'", dag.id),
            });
        }
        if !(t.compute_cost > 0.0) {
            violations.push(Violation::OutOfRange {
                context: format!("task '{}/{}'", dag.id, t.id),
                detail: format!("compute_cost {} must be > 0", t.compute_cost),
            });
        }
        if let Some(pin) = &t.pinned_to {
            if !node_index.contains_key(pin) {
                violations.push(Violation::UnknownNodeReference {
                    reference: pin.clone(),
                    context: format!("pin of task '{}/{}'", dag.id, t.id),
                });
            }
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); dag.tasks.len()];
    let mut indegree = vec![0usize; dag.tasks.len()];
    let mut edges_ok = true;
    for e in &dag.edges {
        if e.data_size < 0.0 {
            violations.push(Violation::OutOfRange {
                context: format!("edge {} -> {} of DAG '{}'", e.src_task, e.dst_task, dag.id),
                detail: "data_size must be >= 0".into(),
            });
        }
        let s = task_index.get(&e.src_task);
        let d = task_index.get(&e.dst_task);
        for (r, present) in [(&e.src_task, s.is_some()), (&e.dst_task, d.is_some())] {
            if !present {
                violations.push(Violation::UnknownTaskReference {
                    reference: r.clone(),
                    dag: dag.id.clone(),
                });
                edges_ok = false;
            }
        }
        if let (Some(&s), Some(&d)) = (s, d) {
            if s == d {
                violations.push(Violation::CyclicDag { dag: dag.id.clone() });
                edges_ok = false;
            } else {
                adjacency[s].push(d);
                indegree[d] += 1;
            }
        }
    }

    if edges_ok && topological_order(&adjacency, &indegree).is_none() {
        violations.push(Violation::CyclicDag { dag: dag.id.clone() });
    }
}

/// Kahn topological sort; `None` when the graph has a cycle. Ready vertices
/// are taken in index order so the result is deterministic.
pub fn topological_order(adjacency: &[Vec<usize>], indegree: &[usize]) -> Option<Vec<usize>> {
    let mut indeg = indegree.to_vec();
    let mut ready: Vec<usize> = (0..indeg.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(indeg.len());
    let mut cursor = 0;
    ready.sort_unstable();
    while cursor < ready.len() {
        let u = ready[cursor];
        cursor += 1;
        order.push(u);
        let mut newly = Vec::new();
        for &v in &adjacency[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                newly.push(v);
            }
        }
        newly.sort_unstable();
        ready.extend(newly);
    }
    if order.len() == indeg.len() {
        Some(order)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: usize) -> Vec<NodeSpec> {
        (0..n)
            .map(|i| NodeSpec {
                id: format!("n{i}"),
                capacity: 100.0,
                position: Some((i as f64 * 10.0, 0.0)),
            })
            .collect()
    }

    fn fork_join() -> DagSpec {
        let tasks = (0..5)
            .map(|i| TaskSpec {
                id: format!("T{i}"),
                compute_cost: 500.0,
                pinned_to: None,
            })
            .collect();
        let mut edges = Vec::new();
        for i in 1..4 {
            edges.push(DagEdge {
                src_task: "T0".into(),
                dst_task: format!("T{i}"),
                data_size: 10.0,
            });
            edges.push(DagEdge {
                src_task: format!("T{i}"),
                dst_task: "T4".into(),
                data_size: 10.0,
            });
        }
        DagSpec {
            id: "dag0".into(),
            tasks,
            edges,
            inject_at: 0.0,
        }
    }

    #[test]
    fn fork_join_on_four_nodes_is_valid() {
        let net = validate_scenario(&nodes(4), &[], &[fork_join()], false);
        assert!(net.is_ok());
    }

    #[test]
    fn self_loop_edge_is_cyclic() {
        let mut dag = fork_join();
        dag.edges.push(DagEdge {
            src_task: "T1".into(),
            dst_task: "T1".into(),
            data_size: 0.0,
        });
        let err = validate_scenario(&nodes(4), &[], &[dag], false).unwrap_err();
        assert!(err.iter().any(|v| matches!(v, Violation::CyclicDag { .. })));
    }

    #[test]
    fn two_task_cycle_is_detected() {
        let dag = DagSpec {
            id: "d".into(),
            tasks: vec![
                TaskSpec { id: "A".into(), compute_cost: 1.0, pinned_to: None },
                TaskSpec { id: "B".into(), compute_cost: 1.0, pinned_to: None },
            ],
            edges: vec![
                DagEdge { src_task: "A".into(), dst_task: "B".into(), data_size: 0.0 },
                DagEdge { src_task: "B".into(), dst_task: "A".into(), data_size: 0.0 },
            ],
            inject_at: 0.0,
        };
        let err = validate_scenario(&nodes(2), &[], &[dag], false).unwrap_err();
        assert!(err.iter().any(|v| matches!(v, Violation::CyclicDag { .. })));
    }

    #[test]
    fn unknown_pin_target_is_reported() {
        let mut dag = fork_join();
        dag.tasks[0].pinned_to = Some("n9".into());
        let err = validate_scenario(&nodes(4), &[], &[dag], false).unwrap_err();
        assert!(err
            .iter()
            .any(|v| matches!(v, Violation::UnknownNodeReference { reference, .. } if reference == "n9")));
    }

    #[test]
    fn rf_mode_requires_positions() {
        let mut ns = nodes(2);
        ns[1].position = None;
        let err = validate_scenario(&ns, &[], &[], true).unwrap_err();
        assert_eq!(
            err,
            vec![Violation::MissingPosition { node: "n1".into() }]
        );
    }

    #[test]
    fn coincident_nodes_rejected_in_rf_mode() {
        let mut ns = nodes(2);
        ns[1].position = ns[0].position;
        let err = validate_scenario(&ns, &[], &[], true).unwrap_err();
        assert!(err.iter().any(|v| matches!(v, Violation::CoincidentNodes { .. })));
    }

    #[test]
    fn lifecycle_transitions() {
        use TaskEvent::*;
        use TaskState::*;
        assert_eq!(transition_task(Pending, InputsDelivered), Ok(Ready));
        assert_eq!(transition_task(Ready, Started), Ok(Running));
        assert_eq!(transition_task(Ready, NodeBusy), Ok(Queued));
        assert_eq!(transition_task(Queued, Started), Ok(Running));
        assert_eq!(transition_task(Running, Finished), Ok(Completed));
        assert!(transition_task(Completed, InputsDelivered).is_err());
        assert!(transition_task(Completed, Started).is_err());
        assert!(transition_task(Pending, Started).is_err());
    }

    #[test]
    fn duplicate_node_id_reported() {
        let mut ns = nodes(2);
        ns[1].id = "n0".into();
        let err = validate_scenario(&ns, &[], &[], false).unwrap_err();
        assert!(err.iter().any(|v| matches!(v, Violation::DuplicateId { .. })));
    }
}
