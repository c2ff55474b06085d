//! Deterministic discrete-event core: six event kinds with a fixed
//! same-time priority order, microsecond clock, flow-level transfers with
//! fair-share rates, and the bandwidth recalculation cascade.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::{
    build_conflict_graph, BianchiParams, ConflictGraph, ContentionModel, HiddenModel, MacError,
    FACTOR_FLOOR,
};
use crate::model::{
    transition_task, DagSpec, LinkId, Network, NetworkSnapshot, NodeId, PlacementPlan,
    SnapshotLink, SnapshotNode, TaskEvent, TaskState,
};
use crate::rfphy::{carrier_sense_range, dbm_to_mw, received_power_dbm, McsTable, RfConfig};
use crate::routing::{find_route, RoutingModel};
use crate::sched::{build_virtual_network, make_plan, SchedError, SchedulerKind};

/// Round seconds to the nearest microsecond, half up.
pub fn round_time(t: f64) -> f64 {
    round_us(t) as f64 / 1e6
}

/// Seconds to integer microseconds, half up.
pub fn round_us(t: f64) -> u64 {
    debug_assert!(t >= 0.0, "simulation times are nonnegative");
    (t * 1e6 + 0.5).floor() as u64
}

pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    None,
    CsmaBianchi,
}

impl InterferenceMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Self::None),
            "csma_bianchi" => Some(Self::CsmaBianchi),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::CsmaBianchi => "csma_bianchi",
        }
    }
}

/// Precomputed wireless context for the interference-aware mode.
#[derive(Debug)]
pub struct MacSetup {
    pub rf: RfConfig,
    pub mcs: McsTable,
    pub graph: ConflictGraph,
    pub contention: ContentionModel,
    pub hidden_model: HiddenModel,
    pub cs_range: f64,
    /// Linear rx power (mW) from every node's transmitter at every node.
    rx_mw: Vec<f64>,
    noise_mw: f64,
    n_nodes: usize,
}

impl MacSetup {
    pub fn new(
        network: &Network,
        rf: RfConfig,
        mcs: McsTable,
        params: BianchiParams,
        hidden_model: HiddenModel,
        solo_overhead: bool,
        rts_cts: bool,
    ) -> Result<Self, MacError> {
        let cs_range = carrier_sense_range(&rf);
        let graph = build_conflict_graph(network, cs_range, rts_cts)?;
        let n = network.nodes.len();
        let mut rx_mw = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let d = network.distance(a, b).expect("positions validated");
                    rx_mw[a * n + b] = dbm_to_mw(received_power_dbm(&rf, d));
                }
            }
        }
        let mut contention = ContentionModel::new(params);
        contention.solo_overhead = solo_overhead;
        let noise_mw = dbm_to_mw(rf.noise_floor_dbm);
        Ok(Self {
            rf,
            mcs,
            graph,
            contention,
            hidden_model,
            cs_range,
            rx_mw,
            noise_mw,
            n_nodes: n,
        })
    }

    fn rx_mw(&self, tx: NodeId, rx: NodeId) -> f64 {
        self.rx_mw[tx * self.n_nodes + rx]
    }
}

/// Everything the engine needs for one run.
#[derive(Debug)]
pub struct SimInput {
    pub network: Network,
    pub dags: Vec<DagSpec>,
    pub interference: InterferenceMode,
    pub routing: RoutingModel,
    pub scheduler: SchedulerKind,
    pub mac: Option<MacSetup>,
    pub seed: u64,
    pub event_cap: u64,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("deadlock: no events pending but tasks incomplete: {stuck:?}")]
    Deadlock {
        stuck: Vec<String>,
        report: Box<RunReport>,
    },
    #[error("event cap of {cap} exceeded; simulation did not quiesce")]
    NonQuiescent { cap: u64 },
    #[error(transparent)]
    Scheduler(#[from] SchedError),
    #[error("plan for dag '{dag}' is missing task '{task}'")]
    PlanIncomplete { dag: String, task: String },
    #[error("plan for dag '{dag}' places pinned task '{task}' on '{actual}' instead of '{pin}'")]
    PinViolation {
        dag: String,
        task: String,
        pin: String,
        actual: String,
    },
    #[error("interference model csma_bianchi requires RF geometry")]
    MissingMacSetup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    DagInject,
    TaskComplete,
    TransferComplete,
    TaskReady,
    TaskStart,
    TransferStart,
    RateChange,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DagInject => "dag_inject",
            Self::TaskComplete => "task_complete",
            Self::TransferComplete => "transfer_complete",
            Self::TaskReady => "task_ready",
            Self::TaskStart => "task_start",
            Self::TransferStart => "transfer_start",
            Self::RateChange => "rate_change",
        }
    }
}

/// One effective simulation event, as handed to the trace sink.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t_us: u64,
    pub kind: TraceKind,
    pub dag: Option<String>,
    pub task: Option<String>,
    pub flow: Option<u64>,
    pub node: Option<String>,
    pub link: Option<String>,
    pub rate: Option<f64>,
    pub old_rate: Option<f64>,
    pub remaining_mb: Option<f64>,
    pub placement: Option<PlacementPlan>,
    /// Interference factor components of the route bottleneck link.
    pub f_ht: Option<f64>,
    pub eta: Option<f64>,
    pub contenders: Option<u32>,
    pub flows_on_link: Option<u32>,
}

impl TraceRecord {
    fn at(t_us: u64, kind: TraceKind) -> Self {
        Self {
            t_us,
            kind,
            dag: None,
            task: None,
            flow: None,
            node: None,
            link: None,
            rate: None,
            old_rate: None,
            remaining_mb: None,
            placement: None,
            f_ht: None,
            eta: None,
            contenders: None,
            flows_on_link: None,
        }
    }
}

pub trait TraceSink {
    fn record(&mut self, rec: TraceRecord);
}

/// Discards every record.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: TraceRecord) {}
}

/// Buffers records in memory.
#[derive(Default)]
pub struct VecSink(pub Vec<TraceRecord>);

impl TraceSink for VecSink {
    fn record(&mut self, rec: TraceRecord) {
        self.0.push(rec);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub node: String,
    pub ready_s: f64,
    pub start_s: f64,
    pub complete_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub flow: u64,
    pub dag: String,
    pub src_task: String,
    pub dst_task: String,
    pub src_node: String,
    pub dst_node: String,
    pub route_nodes: Vec<String>,
    pub total_mb: f64,
    pub start_s: f64,
    /// Time the latency head ends and bytes start moving.
    pub head_s: f64,
    pub complete_s: Option<f64>,
    /// total / (complete - start); None for instantaneous transfers.
    pub avg_rate: Option<f64>,
    /// (time a rate became effective, rate MB/s)
    pub phases: Vec<(f64, f64)>,
    pub stalled: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub makespan_s: f64,
    pub event_count: u64,
    pub plans: BTreeMap<String, PlacementPlan>,
    pub tasks: BTreeMap<String, TaskReport>,
    pub transfers: Vec<TransferReport>,
    /// Canonical snapshot bytes per dag id, as handed to the scheduler.
    pub snapshots: BTreeMap<String, Vec<u8>>,
}

const RANK_DAG_INJECT: u8 = 0;
const RANK_TASK_COMPLETE: u8 = 1;
const RANK_TRANSFER_COMPLETE: u8 = 2;
const RANK_TASK_READY: u8 = 3;
const RANK_TASK_START: u8 = 4;
const RANK_TRANSFER_START: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventBody {
    DagInject(usize),
    TaskComplete(usize),
    TransferComplete(usize),
    TaskReady(usize),
    TaskStart(NodeId),
    TransferStart(usize),
}

impl EventBody {
    fn rank(&self) -> u8 {
        match self {
            Self::DagInject(_) => RANK_DAG_INJECT,
            Self::TaskComplete(_) => RANK_TASK_COMPLETE,
            Self::TransferComplete(_) => RANK_TRANSFER_COMPLETE,
            Self::TaskReady(_) => RANK_TASK_READY,
            Self::TaskStart(_) => RANK_TASK_START,
            Self::TransferStart(_) => RANK_TRANSFER_START,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Event {
    time_us: u64,
    rank: u8,
    seq: u64,
    body: EventBody,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed: BinaryHeap is a max-heap, we need the earliest first
        (other.time_us, other.rank, other.seq).cmp(&(self.time_us, self.rank, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct TaskRt {
    dag: usize,
    dag_id: String,
    task_id: String,
    scoped_id: String,
    compute_cost: f64,
    state: TaskState,
    node: Option<NodeId>,
    pending_inputs: usize,
    ready_us: u64,
    start_us: u64,
    complete_us: u64,
}

struct FlowRt {
    id: u64,
    dag: usize,
    src_task: usize,
    dst_task: usize,
    src_node: NodeId,
    dst_node: NodeId,
    total_mb: f64,
    transferred_mb: f64,
    rate: f64,
    rate_is_set: bool,
    /// Last instant progress was frozen at (never before the latency head).
    rate_since_us: u64,
    head_until_us: u64,
    start_us: u64,
    complete_us: Option<u64>,
    route: Option<crate::routing::Route>,
    live_completion_seq: u64,
    stalled: bool,
    phases: Vec<(u64, f64)>,
}

struct NodeRt {
    running: Option<usize>,
    queue: BTreeSet<(u64, String, String, usize)>,
}

struct Engine<'a> {
    input: &'a SimInput,
    clock_us: u64,
    seq: u64,
    heap: BinaryHeap<Event>,
    tasks: Vec<TaskRt>,
    flows: Vec<FlowRt>,
    nodes: Vec<NodeRt>,
    /// Concurrent flows per directed link.
    link_flows: Vec<u32>,
    /// dag-local (task idx -> global idx) maps.
    task_base: Vec<usize>,
    completed: usize,
    makespan_us: u64,
    event_count: u64,
    plans: BTreeMap<String, PlacementPlan>,
    snapshots: BTreeMap<String, Vec<u8>>,
    sink: RefCell<&'a mut dyn TraceSink>,
}

/// Per-link interference factor and its components.
#[derive(Clone, Copy)]
struct LinkFactor {
    share: f64,
    f_ht: f64,
    eta: f64,
    contenders: u32,
    flows: u32,
}

pub fn run(input: &SimInput, sink: &mut dyn TraceSink) -> Result<RunReport, EngineError> {
    if input.interference == InterferenceMode::CsmaBianchi && input.mac.is_none() {
        return Err(EngineError::MissingMacSetup);
    }
    let mut tasks = Vec::new();
    let mut task_base = Vec::new();
    for (di, dag) in input.dags.iter().enumerate() {
        task_base.push(tasks.len());
        let mut pending = vec![0usize; dag.tasks.len()];
        for e in &dag.edges {
            let d = dag.task_index(&e.dst_task).expect("validated");
            pending[d] += 1;
        }
        for (ti, t) in dag.tasks.iter().enumerate() {
            tasks.push(TaskRt {
                dag: di,
                dag_id: dag.id.clone(),
                task_id: t.id.clone(),
                scoped_id: dag.scoped_task_id(&t.id),
                compute_cost: t.compute_cost,
                state: TaskState::Pending,
                node: None,
                pending_inputs: pending[ti],
                ready_us: 0,
                start_us: 0,
                complete_us: 0,
            });
        }
    }

    let mut engine = Engine {
        input,
        clock_us: 0,
        seq: 0,
        heap: BinaryHeap::new(),
        tasks,
        flows: Vec::new(),
        nodes: (0..input.network.nodes.len())
            .map(|_| NodeRt {
                running: None,
                queue: BTreeSet::new(),
            })
            .collect(),
        link_flows: vec![0; input.network.links.len()],
        task_base,
        completed: 0,
        makespan_us: 0,
        event_count: 0,
        plans: BTreeMap::new(),
        snapshots: BTreeMap::new(),
        sink: RefCell::new(sink),
    };

    for (di, dag) in input.dags.iter().enumerate() {
        let t = round_us(dag.inject_at);
        engine.push(t, EventBody::DagInject(di));
    }

    engine.run_loop()
}

impl<'a> Engine<'a> {
    fn push(&mut self, time_us: u64, body: EventBody) -> u64 {
        self.seq += 1;
        self.heap.push(Event {
            time_us,
            rank: body.rank(),
            seq: self.seq,
            body,
        });
        self.seq
    }

    fn trace(&self, rec: TraceRecord) {
        self.sink.borrow_mut().record(rec);
    }

    fn run_loop(mut self) -> Result<RunReport, EngineError> {
        while let Some(ev) = self.heap.pop() {
            debug_assert!(ev.time_us >= self.clock_us, "event heap is monotone");
            if self.stale(&ev) {
                continue;
            }
            self.clock_us = ev.time_us;
            self.event_count += 1;
            if self.event_count > self.input.event_cap {
                return Err(EngineError::NonQuiescent {
                    cap: self.input.event_cap,
                });
            }
            match ev.body {
                EventBody::DagInject(d) => self.on_dag_inject(d)?,
                EventBody::TaskComplete(t) => self.on_task_complete(t),
                EventBody::TransferComplete(f) => self.on_transfer_complete(f, ev.seq),
                EventBody::TaskReady(t) => self.on_task_ready(t),
                EventBody::TaskStart(n) => self.on_task_start(n),
                EventBody::TransferStart(f) => self.on_transfer_start(f),
            }
        }
        let report = self.report();
        if self.completed < self.tasks.len() {
            let stuck: Vec<String> = self
                .tasks
                .iter()
                .filter(|t| t.state != TaskState::Completed)
                .map(|t| t.scoped_id.clone())
                .collect();
            return Err(EngineError::Deadlock {
                stuck,
                report: Box::new(report),
            });
        }
        Ok(report)
    }

    /// Lazily-cancelled events are discarded without side effects.
    fn stale(&self, ev: &Event) -> bool {
        match ev.body {
            EventBody::TransferComplete(f) => {
                let flow = &self.flows[f];
                flow.complete_us.is_some() || flow.live_completion_seq != ev.seq
            }
            EventBody::TaskStart(n) => {
                self.nodes[n].running.is_some() || self.nodes[n].queue.is_empty()
            }
            _ => false,
        }
    }

    fn build_snapshot(&self) -> NetworkSnapshot {
        let net = &self.input.network;
        NetworkSnapshot {
            nodes: net
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| SnapshotNode {
                    id: n.id.clone(),
                    capacity: n.capacity,
                    queue_depth: self.nodes[i].queue.len(),
                })
                .collect(),
            links: net
                .links
                .iter()
                .enumerate()
                .map(|(i, l)| SnapshotLink {
                    src: l.src.clone(),
                    dst: l.dst.clone(),
                    bandwidth: l.bandwidth,
                    latency: l.latency,
                    active_transfers: self.link_flows[i] as usize,
                })
                .collect(),
        }
    }

    fn on_dag_inject(&mut self, di: usize) -> Result<(), EngineError> {
        let dag = &self.input.dags[di];
        let snapshot = self.build_snapshot();
        let vnet = build_virtual_network(&snapshot, self.input.routing);
        let plan = make_plan(self.input.scheduler, dag, &snapshot, &vnet)?;
        for t in &dag.tasks {
            let node_id = plan.get(&t.id).ok_or_else(|| EngineError::PlanIncomplete {
                dag: dag.id.clone(),
                task: t.id.clone(),
            })?;
            if let Some(pin) = &t.pinned_to {
                if node_id != pin {
                    return Err(EngineError::PinViolation {
                        dag: dag.id.clone(),
                        task: t.id.clone(),
                        pin: pin.clone(),
                        actual: node_id.clone(),
                    });
                }
            }
            let node = self
                .input
                .network
                .node_id(node_id)
                .expect("plan nodes validated");
            let gt = self.task_base[di] + dag.task_index(&t.id).unwrap();
            self.tasks[gt].node = Some(node);
        }
        self.snapshots
            .insert(dag.id.clone(), snapshot.canonical_bytes());
        let mut rec = TraceRecord::at(self.clock_us, TraceKind::DagInject);
        rec.dag = Some(dag.id.clone());
        rec.placement = Some(plan.clone());
        self.trace(rec);
        self.plans.insert(dag.id.clone(), plan);

        for (ti, _) in dag.tasks.iter().enumerate() {
            let gt = self.task_base[di] + ti;
            if self.tasks[gt].pending_inputs == 0 {
                self.push(self.clock_us, EventBody::TaskReady(gt));
            }
        }
        Ok(())
    }

    fn on_task_ready(&mut self, gt: usize) {
        let now = self.clock_us;
        let node = self.tasks[gt].node.expect("scheduled before ready");
        {
            let task = &mut self.tasks[gt];
            task.state = transition_task(task.state, TaskEvent::InputsDelivered)
                .expect("ready follows pending");
            task.ready_us = now;
        }
        let key = (
            now,
            self.tasks[gt].dag_id.clone(),
            self.tasks[gt].task_id.clone(),
            gt,
        );
        self.nodes[node].queue.insert(key);
        let mut rec = TraceRecord::at(now, TraceKind::TaskReady);
        rec.dag = Some(self.tasks[gt].dag_id.clone());
        rec.task = Some(self.tasks[gt].task_id.clone());
        rec.node = Some(self.input.network.nodes[node].id.clone());
        self.trace(rec);
        if self.nodes[node].running.is_none() {
            self.push(now, EventBody::TaskStart(node));
        } else {
            let task = &mut self.tasks[gt];
            task.state =
                transition_task(task.state, TaskEvent::NodeBusy).expect("ready task can queue");
        }
    }

    fn on_task_start(&mut self, node: NodeId) {
        let now = self.clock_us;
        debug_assert!(self.nodes[node].running.is_none());
        let first = self
            .nodes[node]
            .queue
            .iter()
            .next()
            .cloned()
            .expect("staleness check guarantees a queued task");
        self.nodes[node].queue.remove(&first);
        let gt = first.3;
        {
            let task = &mut self.tasks[gt];
            task.state =
                transition_task(task.state, TaskEvent::Started).expect("queued or ready can start");
            task.start_us = now;
        }
        self.nodes[node].running = Some(gt);
        // anything left waiting has now observed a busy node
        let waiting: Vec<usize> = self.nodes[node].queue.iter().map(|k| k.3).collect();
        for w in waiting {
            if self.tasks[w].state == TaskState::Ready {
                self.tasks[w].state = transition_task(TaskState::Ready, TaskEvent::NodeBusy)
                    .expect("ready task can queue");
            }
        }
        let capacity = self.input.network.nodes[node].capacity;
        let dur = round_us(self.tasks[gt].compute_cost / capacity);
        self.push(now + dur, EventBody::TaskComplete(gt));
        let mut rec = TraceRecord::at(now, TraceKind::TaskStart);
        rec.dag = Some(self.tasks[gt].dag_id.clone());
        rec.task = Some(self.tasks[gt].task_id.clone());
        rec.node = Some(self.input.network.nodes[node].id.clone());
        self.trace(rec);
    }

    fn on_task_complete(&mut self, gt: usize) {
        let now = self.clock_us;
        let node = self.tasks[gt].node.expect("running task has a node");
        {
            let task = &mut self.tasks[gt];
            task.state =
                transition_task(task.state, TaskEvent::Finished).expect("running task finishes");
            task.complete_us = now;
        }
        debug_assert_eq!(self.nodes[node].running, Some(gt));
        self.nodes[node].running = None;
        self.completed += 1;
        self.makespan_us = self.makespan_us.max(now);
        let mut rec = TraceRecord::at(now, TraceKind::TaskComplete);
        rec.dag = Some(self.tasks[gt].dag_id.clone());
        rec.task = Some(self.tasks[gt].task_id.clone());
        rec.node = Some(self.input.network.nodes[node].id.clone());
        self.trace(rec);
        if !self.nodes[node].queue.is_empty() {
            self.push(now, EventBody::TaskStart(node));
        }

        // spawn output transfers in edge declaration order
        let di = self.tasks[gt].dag;
        let dag = &self.input.dags[di];
        let local = gt - self.task_base[di];
        let edges: Vec<(usize, f64)> = dag
            .edges
            .iter()
            .filter(|e| dag.task_index(&e.src_task).unwrap() == local)
            .map(|e| (dag.task_index(&e.dst_task).unwrap(), e.data_size))
            .collect();
        for (dst_local, mb) in edges {
            let dst_gt = self.task_base[di] + dst_local;
            let dst_node = self.tasks[dst_gt].node.expect("whole dag scheduled");
            let id = self.flows.len() as u64;
            self.flows.push(FlowRt {
                id,
                dag: di,
                src_task: gt,
                dst_task: dst_gt,
                src_node: node,
                dst_node,
                total_mb: mb,
                transferred_mb: 0.0,
                rate: 0.0,
                rate_is_set: false,
                rate_since_us: now,
                head_until_us: now,
                start_us: now,
                complete_us: None,
                route: None,
                live_completion_seq: 0,
                stalled: false,
                phases: Vec::new(),
            });
            let f = self.flows.len() - 1;
            if dst_node == node || mb == 0.0 {
                // co-located or empty payload: readiness signal only
                let seq = self.push(now, EventBody::TransferComplete(f));
                self.flows[f].live_completion_seq = seq;
            } else {
                self.push(now, EventBody::TransferStart(f));
            }
        }
    }

    fn on_transfer_start(&mut self, f: usize) {
        let now = self.clock_us;
        let (src, dst) = (self.flows[f].src_node, self.flows[f].dst_node);
        match find_route(self.input.routing, src, dst, &self.input.network) {
            Ok(route) => {
                for &l in &route.links {
                    self.link_flows[l] += 1;
                }
                let head = now + route.latency_us;
                let flow = &mut self.flows[f];
                flow.head_until_us = head;
                flow.rate_since_us = head;
                flow.route = Some(route);
                self.recalc_cascade(now, Some(f));
                let flow = &self.flows[f];
                let mut rec = TraceRecord::at(now, TraceKind::TransferStart);
                rec.dag = Some(self.input.dags[flow.dag].id.clone());
                rec.task = Some(self.tasks[flow.dst_task].task_id.clone());
                rec.flow = Some(flow.id);
                rec.rate = Some(flow.rate);
                rec.remaining_mb = Some(flow.total_mb);
                self.trace(rec);
            }
            Err(_) => {
                // unroutable: the flow stalls and deadlock reporting names it
                let flow = &mut self.flows[f];
                flow.stalled = true;
                let mut rec = TraceRecord::at(now, TraceKind::TransferStart);
                rec.dag = Some(self.input.dags[flow.dag].id.clone());
                rec.task = Some(self.tasks[flow.dst_task].task_id.clone());
                rec.flow = Some(flow.id);
                rec.rate = Some(0.0);
                rec.remaining_mb = Some(flow.total_mb);
                self.trace(rec);
            }
        }
    }

    fn on_transfer_complete(&mut self, f: usize, _seq: u64) {
        let now = self.clock_us;
        let had_route = self.flows[f].route.is_some();
        if had_route {
            let links: Vec<LinkId> = self.flows[f].route.as_ref().unwrap().links.clone();
            for l in links {
                debug_assert!(self.link_flows[l] > 0);
                self.link_flows[l] -= 1;
            }
        }
        {
            let flow = &mut self.flows[f];
            flow.transferred_mb = flow.total_mb;
            flow.complete_us = Some(now);
        }
        let flow_id = self.flows[f].id;
        let dst = self.flows[f].dst_task;
        let mut rec = TraceRecord::at(now, TraceKind::TransferComplete);
        rec.dag = Some(self.tasks[dst].dag_id.clone());
        rec.task = Some(self.tasks[dst].task_id.clone());
        rec.flow = Some(flow_id);
        rec.remaining_mb = Some(0.0);
        self.trace(rec);
        self.tasks[dst].pending_inputs -= 1;
        if self.tasks[dst].pending_inputs == 0 && self.tasks[dst].state == TaskState::Pending {
            self.push(now, EventBody::TaskReady(dst));
        }
        if had_route {
            self.recalc_cascade(now, None);
        }
    }

    /// Interference factor and per-flow share of one active link.
    fn link_factor(&self, link: LinkId, active: &[LinkId]) -> LinkFactor {
        let bw = self.input.network.links[link].bandwidth;
        let n_flows = self.link_flows[link];
        debug_assert!(n_flows > 0);
        let mut lf = LinkFactor {
            share: 0.0,
            f_ht: 1.0,
            eta: 1.0,
            contenders: 0,
            flows: n_flows,
        };
        if bw <= 0.0 {
            return lf;
        }
        let f = match self.input.interference {
            InterferenceMode::None => 1.0,
            InterferenceMode::CsmaBianchi => {
                let mac = self.input.mac.as_ref().expect("checked in run()");
                let mut interference_mw = 0.0;
                let mut contenders = 0u32;
                let (_, rx_node) = self.input.network.link_endpoints(link);
                for &a in active {
                    if a == link {
                        continue;
                    }
                    if mac.graph.conflicts(link, a) {
                        contenders += 1;
                    } else {
                        let (tx, _) = self.input.network.link_endpoints(a);
                        interference_mw += mac.rx_mw(tx, rx_node);
                    }
                }
                let n_stations = 1 + contenders;
                let cont = mac.contention.contention_factor(n_stations);
                let f_ht = if interference_mw > 0.0 {
                    let (tx, _) = self.input.network.link_endpoints(link);
                    let p_rx = mac.rx_mw(tx, rx_node);
                    let sinr = 10.0 * (p_rx / (mac.noise_mw + interference_mw)).log10();
                    let snr = 10.0 * (p_rx / mac.noise_mw).log10();
                    crate::mac::hidden_factor_from_sinr(
                        sinr,
                        snr,
                        bw,
                        &mac.mcs,
                        mac.rf.capture_margin_db,
                        mac.hidden_model,
                    )
                } else {
                    1.0
                };
                lf.f_ht = f_ht;
                lf.eta = if n_stations > 1 {
                    mac.contention.eta(n_stations)
                } else {
                    1.0
                };
                lf.contenders = contenders;
                (f_ht * cont).clamp(FACTOR_FLOOR, 1.0)
            }
        };
        lf.share = bw * f / f64::from(n_flows);
        lf
    }

    /// Recompute the rate of every in-flight transfer after link activity
    /// changed; reschedule completions whose rate moved. `fresh` marks a
    /// transfer receiving its initial rate (its trace line is the
    /// transfer_start, not a rate_change).
    fn recalc_cascade(&mut self, now_us: u64, fresh: Option<usize>) {
        let active: Vec<LinkId> = (0..self.link_flows.len())
            .filter(|&l| self.link_flows[l] > 0)
            .collect();
        let mut factors: Vec<Option<LinkFactor>> = vec![None; self.link_flows.len()];
        for &l in &active {
            factors[l] = Some(self.link_factor(l, &active));
        }
        for f in 0..self.flows.len() {
            if self.flows[f].complete_us.is_some() || self.flows[f].stalled {
                continue;
            }
            let Some(route) = self.flows[f].route.as_ref() else {
                continue;
            };
            let mut new_rate = f64::INFINITY;
            let mut bottleneck: Option<(LinkId, LinkFactor)> = None;
            for &l in &route.links {
                let lf = factors[l].expect("route links are active");
                if lf.share < new_rate {
                    new_rate = lf.share;
                    bottleneck = Some((l, lf));
                }
            }
            let (bl, blf) = bottleneck.expect("routes are non-empty");
            let is_fresh = fresh == Some(f);
            if !is_fresh && self.flows[f].rate_is_set && new_rate == self.flows[f].rate {
                continue;
            }
            let old_rate = self.flows[f].rate;
            let rate_was_set = self.flows[f].rate_is_set;
            // freeze progress at the unrounded old rate
            {
                let flow = &mut self.flows[f];
                let from = flow.rate_since_us.max(flow.head_until_us);
                if rate_was_set && now_us > from {
                    flow.transferred_mb += flow.rate * (now_us - from) as f64 / 1e6;
                }
                flow.rate_since_us = now_us.max(flow.head_until_us);
                flow.rate = new_rate;
                flow.rate_is_set = true;
                flow.phases.push((now_us, new_rate));
            }
            if new_rate > 0.0 {
                let remaining = (self.flows[f].total_mb - self.flows[f].transferred_mb).max(0.0);
                let finish = self.flows[f].rate_since_us + round_us(remaining / new_rate);
                let seq = self.push(finish, EventBody::TransferComplete(f));
                self.flows[f].live_completion_seq = seq;
            } else {
                // dead link (zero bandwidth): no completion can be scheduled
                self.flows[f].live_completion_seq = 0;
                self.flows[f].stalled = true;
            }
            if !is_fresh {
                let flow = &self.flows[f];
                let mut rec = TraceRecord::at(now_us, TraceKind::RateChange);
                rec.dag = Some(self.input.dags[flow.dag].id.clone());
                rec.task = Some(self.tasks[flow.dst_task].task_id.clone());
                rec.flow = Some(flow.id);
                rec.rate = Some(new_rate);
                rec.old_rate = rate_was_set.then_some(old_rate);
                rec.remaining_mb = Some((flow.total_mb - flow.transferred_mb).max(0.0));
                rec.link = Some(format!(
                    "{}->{}",
                    self.input.network.links[bl].src, self.input.network.links[bl].dst
                ));
                rec.f_ht = Some(blf.f_ht);
                rec.eta = Some(blf.eta);
                rec.contenders = Some(blf.contenders);
                rec.flows_on_link = Some(blf.flows);
                self.trace(rec);
            }
        }
    }

    fn report(&self) -> RunReport {
        let net = &self.input.network;
        let tasks = self
            .tasks
            .iter()
            .map(|t| {
                (
                    t.scoped_id.clone(),
                    TaskReport {
                        node: t
                            .node
                            .map(|n| net.nodes[n].id.clone())
                            .unwrap_or_default(),
                        ready_s: t.ready_us as f64 / 1e6,
                        start_s: t.start_us as f64 / 1e6,
                        complete_s: t.complete_us as f64 / 1e6,
                    },
                )
            })
            .collect();
        let transfers = self
            .flows
            .iter()
            .map(|f| {
                let avg_rate = f.complete_us.and_then(|c| {
                    let dur = (c - f.start_us) as f64 / 1e6;
                    (dur > 0.0 && f.total_mb > 0.0).then(|| f.total_mb / dur)
                });
                TransferReport {
                    flow: f.id,
                    dag: self.input.dags[f.dag].id.clone(),
                    src_task: self.tasks[f.src_task].task_id.clone(),
                    dst_task: self.tasks[f.dst_task].task_id.clone(),
                    src_node: net.nodes[f.src_node].id.clone(),
                    dst_node: net.nodes[f.dst_node].id.clone(),
                    route_nodes: f
                        .route
                        .as_ref()
                        .map(|r| r.nodes.iter().map(|&n| net.nodes[n].id.clone()).collect())
                        .unwrap_or_default(),
                    total_mb: f.total_mb,
                    start_s: f.start_us as f64 / 1e6,
                    head_s: f.head_until_us as f64 / 1e6,
                    complete_s: f.complete_us.map(|c| c as f64 / 1e6),
                    avg_rate,
                    phases: f
                        .phases
                        .iter()
                        .map(|&(t, r)| (t as f64 / 1e6, r))
                        .collect(),
                    stalled: f.stalled,
                }
            })
            .collect();
        RunReport {
            makespan_s: self.makespan_us as f64 / 1e6,
            event_count: self.event_count,
            plans: self.plans.clone(),
            tasks,
            transfers,
            snapshots: self.snapshots.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scenario, DagEdge, LinkSpec, NodeSpec, TaskSpec};

    fn static_input(
        nodes: Vec<NodeSpec>,
        links: Vec<LinkSpec>,
        dags: Vec<DagSpec>,
        scheduler: SchedulerKind,
    ) -> SimInput {
        let network = validate_scenario(&nodes, &links, &dags, false).unwrap();
        SimInput {
            network,
            dags,
            interference: InterferenceMode::None,
            routing: RoutingModel::Direct,
            scheduler,
            mac: None,
            seed: 42,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    fn node(id: &str, capacity: f64) -> NodeSpec {
        NodeSpec {
            id: id.into(),
            capacity,
            position: None,
        }
    }

    fn task(id: &str, w: f64, pin: &str) -> TaskSpec {
        TaskSpec {
            id: id.into(),
            compute_cost: w,
            pinned_to: Some(pin.into()),
        }
    }

    #[test]
    fn round_time_half_up() {
        assert_eq!(round_time(1.2345678), 1.234568);
        assert_eq!(round_time(0.0), 0.0);
        assert_eq!(round_time(2.0000004999), 2.000000);
        assert_eq!(round_us(2.0000004999), 2_000_000);
        assert_eq!(round_us(0.0000005), 1);
    }

    #[test]
    fn single_task_makespan_is_w_over_c() {
        let input = static_input(
            vec![node("n0", 200.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("T0", 500.0, "n0")],
                edges: vec![],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        assert_eq!(report.makespan_s, 2.5);
        let t = &report.tasks["d/T0"];
        assert_eq!(t.start_s, 0.0);
        assert_eq!(t.complete_s, 2.5);
    }

    #[test]
    fn lifecycle_trace_for_single_task() {
        let input = static_input(
            vec![node("n0", 100.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("T0", 100.0, "n0")],
                edges: vec![],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let mut sink = VecSink::default();
        run(&input, &mut sink).unwrap();
        let kinds: Vec<&str> = sink.0.iter().map(|r| r.kind.name()).collect();
        assert_eq!(
            kinds,
            vec!["dag_inject", "task_ready", "task_start", "task_complete"]
        );
    }

    #[test]
    fn colocated_transfer_is_instantaneous() {
        let input = static_input(
            vec![node("n0", 100.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("A", 100.0, "n0"), task("B", 100.0, "n0")],
                edges: vec![DagEdge {
                    src_task: "A".into(),
                    dst_task: "B".into(),
                    data_size: 50.0,
                }],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        assert_eq!(report.makespan_s, 2.0);
        let f = &report.transfers[0];
        assert_eq!(f.complete_s, Some(f.start_s));
    }

    #[test]
    fn transfer_time_is_latency_plus_bytes_over_rate() {
        let input = static_input(
            vec![node("n0", 100.0), node("n1", 100.0)],
            vec![LinkSpec {
                src: "n0".into(),
                dst: "n1".into(),
                bandwidth: 5.0,
                latency: 0.25,
            }],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("A", 100.0, "n0"), task("B", 100.0, "n1")],
                edges: vec![DagEdge {
                    src_task: "A".into(),
                    dst_task: "B".into(),
                    data_size: 10.0,
                }],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        // A: 1s, transfer: 0.25 + 2 = 2.25, B: 1s
        assert_eq!(report.makespan_s, 4.25);
    }

    #[test]
    fn fair_share_halves_rate_and_reschedules() {
        // flow b (n2 -> n1 via n0) and flow a (n0 -> n1) share the n0->n1
        // link once both are in flight.
        let input = SimInput {
            routing: RoutingModel::WidestPath,
            ..static_input(
                vec![node("n0", 100.0), node("n1", 100.0), node("n2", 100.0)],
                vec![
                    LinkSpec { src: "n2".into(), dst: "n0".into(), bandwidth: 100.0, latency: 0.0 },
                    LinkSpec { src: "n0".into(), dst: "n1".into(), bandwidth: 8.0, latency: 0.0 },
                ],
                vec![
                    DagSpec {
                        id: "a".into(),
                        tasks: vec![task("P", 100.0, "n0"), task("C", 100.0, "n1")],
                        edges: vec![DagEdge {
                            src_task: "P".into(),
                            dst_task: "C".into(),
                            data_size: 8.0,
                        }],
                        inject_at: 0.0,
                    },
                    DagSpec {
                        id: "b".into(),
                        tasks: vec![task("P", 50.0, "n2"), task("C", 100.0, "n1")],
                        edges: vec![DagEdge {
                            src_task: "P".into(),
                            dst_task: "C".into(),
                            data_size: 8.0,
                        }],
                        inject_at: 0.0,
                    },
                ],
                SchedulerKind::Manual,
            )
        };
        let mut sink = VecSink::default();
        let report = run(&input, &mut sink).unwrap();
        // flow b alone 0.5..1.0 at 8 MB/s (4 MB), then shares at 4 MB/s
        // flow a shares 1.0..2.0 at 4 MB/s, then finishes alone at 8 MB/s
        let fa = report.transfers.iter().find(|t| t.dag == "a").unwrap();
        let fb = report.transfers.iter().find(|t| t.dag == "b").unwrap();
        assert_eq!(fb.complete_s, Some(2.0));
        assert_eq!(fb.phases, vec![(0.5, 8.0), (1.0, 4.0)]);
        assert_eq!(fa.complete_s, Some(2.5));
        assert_eq!(fa.phases, vec![(1.0, 4.0), (2.0, 8.0)]);
        // the reschedule produced rate_change trace lines both ways
        let changes: Vec<_> = sink.0.iter().filter(|r| r.kind == TraceKind::RateChange).collect();
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[0].old_rate, Some(8.0));
        assert_eq!(changes[0].rate, Some(4.0));
        assert_eq!(changes[1].old_rate, Some(4.0));
        assert_eq!(changes[1].rate, Some(8.0));
        assert!(report
            .transfers
            .iter()
            .all(|t| (phase_bytes(t) - t.total_mb).abs() < 1e-3));
    }

    fn phase_bytes(t: &TransferReport) -> f64 {
        let mut sum = 0.0;
        for (i, &(start, rate)) in t.phases.iter().enumerate() {
            let from = start.max(t.head_s);
            let until = if i + 1 < t.phases.len() {
                t.phases[i + 1].0.max(t.head_s)
            } else {
                t.complete_s.unwrap_or(from)
            };
            sum += rate * (until - from);
        }
        sum
    }

    #[test]
    fn freed_node_immediately_serves_same_time_ready_task() {
        // B becomes ready exactly when A completes on the same node.
        let input = static_input(
            vec![node("n0", 100.0), node("n1", 100.0)],
            vec![LinkSpec {
                src: "n1".into(),
                dst: "n0".into(),
                bandwidth: 10.0,
                latency: 0.0,
            }],
            vec![
                DagSpec {
                    id: "a".into(),
                    tasks: vec![task("A", 100.0, "n0")],
                    edges: vec![],
                    inject_at: 0.0,
                },
                DagSpec {
                    id: "b".into(),
                    tasks: vec![task("P", 50.0, "n1"), task("B", 100.0, "n0")],
                    edges: vec![DagEdge {
                        src_task: "P".into(),
                        dst_task: "B".into(),
                        data_size: 5.0,
                    }],
                    inject_at: 0.0,
                },
            ],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        // P done at 0.5, transfer 0.5s -> B ready at exactly 1.0 = A's completion
        assert_eq!(report.tasks["a/A"].complete_s, 1.0);
        assert_eq!(report.tasks["b/B"].ready_s, 1.0);
        assert_eq!(report.tasks["b/B"].start_s, 1.0);
        assert_eq!(report.makespan_s, 2.0);
    }

    #[test]
    fn fifo_queue_orders_equal_time_readiness_by_dag_then_task() {
        // two tasks ready at the same instant on one node
        let mk = |dag: &str, t: &str| DagSpec {
            id: dag.into(),
            tasks: vec![task(t, 100.0, "n0")],
            edges: vec![],
            inject_at: 0.0,
        };
        let input = static_input(
            vec![node("n0", 100.0)],
            vec![],
            vec![mk("z", "T"), mk("a", "T")],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        assert_eq!(report.tasks["a/T"].start_s, 0.0);
        assert_eq!(report.tasks["z/T"].start_s, 1.0);
    }

    #[test]
    fn node_never_runs_two_tasks_concurrently() {
        let input = static_input(
            vec![node("n0", 100.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: (0..4).map(|i| task(&format!("T{i}"), 100.0, "n0")).collect(),
                edges: vec![],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        let mut intervals: Vec<(f64, f64)> = report
            .tasks
            .values()
            .map(|t| (t.start_s, t.complete_s))
            .collect();
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in intervals.windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
        assert_eq!(report.makespan_s, 4.0);
    }

    #[test]
    fn unroutable_transfer_deadlocks_with_stuck_tasks() {
        let input = static_input(
            vec![node("n0", 100.0), node("n1", 100.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("A", 100.0, "n0"), task("B", 100.0, "n1")],
                edges: vec![DagEdge {
                    src_task: "A".into(),
                    dst_task: "B".into(),
                    data_size: 1.0,
                }],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        match run(&input, &mut NullSink) {
            Err(EngineError::Deadlock { stuck, report }) => {
                assert_eq!(stuck, vec!["d/B".to_string()]);
                assert!(report.transfers[0].stalled);
            }
            other => panic!("expected deadlock, got {other:?}"),
        }
    }

    #[test]
    fn zero_byte_edge_signals_readiness_immediately() {
        let input = static_input(
            vec![node("n0", 100.0), node("n1", 100.0)],
            vec![LinkSpec {
                src: "n0".into(),
                dst: "n1".into(),
                bandwidth: 1.0,
                latency: 0.5,
            }],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("A", 100.0, "n0"), task("B", 100.0, "n1")],
                edges: vec![DagEdge {
                    src_task: "A".into(),
                    dst_task: "B".into(),
                    data_size: 0.0,
                }],
                inject_at: 0.0,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        assert_eq!(report.tasks["d/B"].ready_s, 1.0);
        assert_eq!(report.makespan_s, 2.0);
    }

    #[test]
    fn trace_is_deterministic_across_runs() {
        let build = || {
            static_input(
                vec![node("n0", 130.0), node("n1", 90.0)],
                vec![
                    LinkSpec { src: "n0".into(), dst: "n1".into(), bandwidth: 4.0, latency: 0.001 },
                    LinkSpec { src: "n1".into(), dst: "n0".into(), bandwidth: 4.0, latency: 0.001 },
                ],
                vec![DagSpec {
                    id: "d".into(),
                    tasks: vec![
                        task("A", 100.0, "n0"),
                        task("B", 130.0, "n1"),
                        task("C", 55.0, "n0"),
                    ],
                    edges: vec![
                        DagEdge { src_task: "A".into(), dst_task: "B".into(), data_size: 3.0 },
                        DagEdge { src_task: "A".into(), dst_task: "C".into(), data_size: 1.0 },
                        DagEdge { src_task: "B".into(), dst_task: "C".into(), data_size: 2.0 },
                    ],
                    inject_at: 0.25,
                }],
                SchedulerKind::Manual,
            )
        };
        let mut s1 = VecSink::default();
        let mut s2 = VecSink::default();
        let r1 = run(&build(), &mut s1).unwrap();
        let r2 = run(&build(), &mut s2).unwrap();
        assert_eq!(s1.0, s2.0);
        assert_eq!(r1.makespan_s, r2.makespan_s);
    }

    #[test]
    fn dag_injection_time_offsets_the_run() {
        let input = static_input(
            vec![node("n0", 100.0)],
            vec![],
            vec![DagSpec {
                id: "d".into(),
                tasks: vec![task("T", 100.0, "n0")],
                edges: vec![],
                inject_at: 1.5,
            }],
            SchedulerKind::Manual,
        );
        let report = run(&input, &mut NullSink).unwrap();
        assert_eq!(report.makespan_s, 2.5);
    }
}
