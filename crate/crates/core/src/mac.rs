//! MAC-layer interference: conflict graph construction, the Bianchi DCF
//! saturation solver, hidden-terminal SINR, and the combined per-link
//! degradation factor.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinkId, Network};
use crate::rfphy::{dbm_to_mw, received_power_dbm, McsTable, RfConfig};

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("node '{0}' has no position; conflict graph needs geometry")]
    MissingPosition(String),
    #[error("bianchi bisection failed to converge for n={n}")]
    NoConvergence { n: u32 },
    #[error("unknown bianchi profile '{0}'")]
    UnknownProfile(String),
}

/// Undirected conflict relation over directed links. An edge means the two
/// links cannot transmit concurrently and must share the channel via CSMA.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    neighbors: Vec<Vec<LinkId>>,
}

impl ConflictGraph {
    pub fn link_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, link: LinkId) -> &[LinkId] {
        &self.neighbors[link]
    }

    pub fn conflicts(&self, a: LinkId, b: LinkId) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Build the conflict graph. Without RTS/CTS two links conflict when either
/// transmitter is within `cs_range` of any endpoint of the other link; with
/// RTS/CTS any endpoint pairing within range conflicts.
pub fn build_conflict_graph(
    network: &Network,
    cs_range: f64,
    rts_cts: bool,
) -> Result<ConflictGraph, MacError> {
    for n in &network.nodes {
        if n.position.is_none() {
            return Err(MacError::MissingPosition(n.id.clone()));
        }
    }
    let m = network.links.len();
    let endpoints: Vec<(usize, usize)> = (0..m).map(|l| network.link_endpoints(l)).collect();
    let dist = |a: usize, b: usize| network.distance(a, b).expect("positions checked");

    let mut neighbors = vec![Vec::new(); m];
    for i in 0..m {
        for j in (i + 1)..m {
            let (tx_i, rx_i) = endpoints[i];
            let (tx_j, rx_j) = endpoints[j];
            let conflict = if rts_cts {
                [tx_i, rx_i]
                    .iter()
                    .any(|&a| [tx_j, rx_j].iter().any(|&b| dist(a, b) <= cs_range))
            } else {
                dist(tx_i, tx_j) <= cs_range
                    || dist(tx_i, rx_j) <= cs_range
                    || dist(tx_j, rx_i) <= cs_range
            };
            if conflict {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for adj in &mut neighbors {
        adj.sort_unstable();
    }
    Ok(ConflictGraph { neighbors })
}

/// Active contenders and hidden terminals of a link, given the set of
/// currently active links.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSets {
    pub contenders: Vec<LinkId>,
    pub hidden: Vec<LinkId>,
}

pub fn active_sets(link: LinkId, active: &[LinkId], graph: &ConflictGraph) -> ActiveSets {
    let mut contenders = Vec::new();
    let mut hidden = Vec::new();
    for &a in active {
        if a == link {
            continue;
        }
        if graph.conflicts(link, a) {
            contenders.push(a);
        } else {
            hidden.push(a);
        }
    }
    ActiveSets { contenders, hidden }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    Basic,
}

/// DCF timing and frame parameters for the Bianchi saturation analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BianchiParams {
    pub w_min: u32,
    pub max_backoff_stage: u32,
    pub slot_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub prop_delay_us: f64,
    pub payload_bits: u32,
    pub mac_header_bits: u32,
    pub phy_header_bits: u32,
    pub ack_bits: u32,
    pub channel_bitrate_bps: f64,
    pub access: AccessMode,
    /// Charge an EIFS-style deferral (SIFS + ACK time) after collisions.
    pub eifs_on_collision: bool,
}

impl BianchiParams {
    /// FHSS PHY constants from the original 1997/2000 DCF analysis; basic
    /// access at 1 Mbit/s.
    pub fn fhss_1997(w_min: u32, max_backoff_stage: u32) -> Self {
        Self {
            w_min,
            max_backoff_stage,
            slot_us: 50.0,
            sifs_us: 28.0,
            difs_us: 128.0,
            prop_delay_us: 1.0,
            payload_bits: 8184,
            mac_header_bits: 272,
            phy_header_bits: 128,
            ack_bits: 112,
            channel_bitrate_bps: 1.0e6,
            access: AccessMode::Basic,
            eifs_on_collision: false,
        }
    }

    /// Default OFDM profile used by the simulator's contention factor.
    /// 9 us slots, 40 us preamble (1350 bits at the 33.75 Mbit/s effective
    /// payload rate), EIFS deferral after collisions.
    pub fn ofdm_default() -> Self {
        Self {
            w_min: 16,
            max_backoff_stage: 6,
            slot_us: 9.0,
            sifs_us: 16.0,
            difs_us: 34.0,
            prop_delay_us: 1.0,
            payload_bits: 12_000,
            mac_header_bits: 288,
            phy_header_bits: 1350,
            ack_bits: 112,
            channel_bitrate_bps: 33.75e6,
            access: AccessMode::Basic,
            eifs_on_collision: true,
        }
    }

    pub fn by_name(name: &str) -> Result<Self, MacError> {
        match name {
            "bianchi-fhss-1997" => Ok(Self::fhss_1997(32, 3)),
            "ofdm-default" => Ok(Self::ofdm_default()),
            other => Err(MacError::UnknownProfile(other.to_string())),
        }
    }

    fn us_per_bit(&self) -> f64 {
        1.0e6 / self.channel_bitrate_bps
    }

    fn payload_us(&self) -> f64 {
        f64::from(self.payload_bits) * self.us_per_bit()
    }

    fn header_us(&self) -> f64 {
        f64::from(self.phy_header_bits + self.mac_header_bits) * self.us_per_bit()
    }

    fn ack_us(&self) -> f64 {
        f64::from(self.phy_header_bits + self.ack_bits) * self.us_per_bit()
    }

    /// Duration of a slot containing a successful transmission.
    pub fn t_success_us(&self) -> f64 {
        self.header_us()
            + self.payload_us()
            + self.sifs_us
            + self.prop_delay_us
            + self.ack_us()
            + self.difs_us
            + self.prop_delay_us
    }

    /// Duration of a slot wasted by a collision.
    pub fn t_collision_us(&self) -> f64 {
        let eifs = if self.eifs_on_collision {
            self.sifs_us + self.ack_us()
        } else {
            0.0
        };
        self.header_us() + self.payload_us() + eifs + self.difs_us + self.prop_delay_us
    }
}

/// Per-station transmission probability for a given conditional collision
/// probability. The p = 1/2 singularity is removed analytically.
fn tau_of_p(p: f64, w: u32, m: u32) -> f64 {
    let w = f64::from(w);
    let m_f = f64::from(m);
    if m == 0 {
        return 2.0 / (w + 1.0);
    }
    let one_minus_2p = 1.0 - 2.0 * p;
    if one_minus_2p.abs() < 1e-12 {
        // limit of the closed form as p -> 1/2
        return 4.0 / (2.0 * (w + 1.0) + m_f * w);
    }
    2.0 * one_minus_2p / (one_minus_2p * (w + 1.0) + p * w * (1.0 - (2.0 * p).powi(m as i32)))
}

const BISECTION_EPS: f64 = 1e-12;
const BISECTION_MAX_ITERS: u32 = 64;

/// Equilibrium `(tau, p, iterations)` of the coupled DCF equations, found by
/// bisection on p. `n = 1` is the collision-free case.
pub fn solve_bianchi(params: &BianchiParams, n: u32) -> Result<(f64, f64, u32), MacError> {
    assert!(n >= 1, "station count must be >= 1");
    let w = params.w_min;
    let m = params.max_backoff_stage;
    if n == 1 {
        return Ok((tau_of_p(0.0, w, m), 0.0, 0));
    }
    let g = |p: f64| {
        let tau = tau_of_p(p, w, m);
        p - (1.0 - (1.0 - tau).powi(n as i32 - 1))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iters = 0u32;
    while hi - lo > BISECTION_EPS {
        if iters >= BISECTION_MAX_ITERS {
            return Err(MacError::NoConvergence { n });
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let p = 0.5 * (lo + hi);
    Ok((tau_of_p(p, w, m), p, iters))
}

/// Full saturation analysis for `n` contending stations.
#[derive(Debug, Clone, PartialEq)]
pub struct BianchiSolution {
    pub tau: f64,
    pub p: f64,
    /// Probability that at least one station transmits in a slot.
    pub p_tr: f64,
    /// Probability a transmission slot is a success.
    pub p_success: f64,
    pub t_success_us: f64,
    pub t_collision_us: f64,
    pub expected_slot_us: f64,
    /// Normalized saturation throughput (payload airtime fraction).
    pub s: f64,
    /// MAC efficiency: fraction of channel time inside successful
    /// transmission slots.
    pub eta: f64,
    pub iterations: u32,
}

pub fn saturation_throughput(params: &BianchiParams, n: u32) -> Result<BianchiSolution, MacError> {
    let (tau, p, iterations) = solve_bianchi(params, n)?;
    let p_tr = 1.0 - (1.0 - tau).powi(n as i32);
    let succ_joint = f64::from(n) * tau * (1.0 - tau).powi(n as i32 - 1);
    let p_success = if p_tr > 0.0 { succ_joint / p_tr } else { 0.0 };
    let t_s = params.t_success_us();
    let t_c = params.t_collision_us();
    let expected_slot_us =
        (1.0 - p_tr) * params.slot_us + succ_joint * t_s + (p_tr - succ_joint) * t_c;
    let s = succ_joint * params.payload_us() / expected_slot_us;
    let eta = succ_joint * t_s / expected_slot_us;
    Ok(BianchiSolution {
        tau,
        p,
        p_tr,
        p_success,
        t_success_us: t_s,
        t_collision_us: t_c,
        expected_slot_us,
        s,
        eta,
        iterations,
    })
}

/// Memoized MAC-efficiency source for the contention factor.
#[derive(Debug)]
pub struct ContentionModel {
    params: BianchiParams,
    /// Uncontended flows keep the raw MCS rate by default; this switches
    /// contention_factor(1) to eta(1) instead.
    pub solo_overhead: bool,
    cache: RefCell<BTreeMap<u32, f64>>,
}

impl ContentionModel {
    pub fn new(params: BianchiParams) -> Self {
        Self {
            params,
            solo_overhead: false,
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn params(&self) -> &BianchiParams {
        &self.params
    }

    pub fn eta(&self, n: u32) -> f64 {
        if let Some(&v) = self.cache.borrow().get(&n) {
            return v;
        }
        let v = saturation_throughput(&self.params, n)
            .expect("bisection converges for valid params")
            .eta;
        self.cache.borrow_mut().insert(n, v);
        v
    }

    /// Fair channel share of one station among `n` contenders.
    pub fn contention_factor(&self, n: u32) -> f64 {
        assert!(n >= 1);
        if n == 1 {
            return if self.solo_overhead { self.eta(1) } else { 1.0 };
        }
        self.eta(n) / f64::from(n)
    }
}

/// SINR in dB from a received-power level and hidden-interferer levels.
pub fn sinr_from_powers(p_rx_dbm: f64, interferers_dbm: &[f64], noise_dbm: f64) -> f64 {
    let denom_mw =
        dbm_to_mw(noise_dbm) + interferers_dbm.iter().map(|&d| dbm_to_mw(d)).sum::<f64>();
    10.0 * (dbm_to_mw(p_rx_dbm) / denom_mw).log10()
}

/// SINR at the receiver of `link` while `hidden` transmitters are active.
/// Positions are (tx, rx) pairs in meters.
pub fn sinr(
    link: ((f64, f64), (f64, f64)),
    hidden_tx: &[(f64, f64)],
    cfg: &RfConfig,
) -> Result<f64, crate::rfphy::RfError> {
    let (tx, rx) = link;
    let d = crate::rfphy::euclidean(tx, rx);
    if !(d > 0.0) {
        return Err(crate::rfphy::RfError::NonPositiveDistance(d));
    }
    let p_rx = received_power_dbm(cfg, d);
    let interferers: Vec<f64> = hidden_tx
        .iter()
        .map(|&h| received_power_dbm(cfg, crate::rfphy::euclidean(h, rx)))
        .collect();
    Ok(sinr_from_powers(p_rx, &interferers, cfg.noise_floor_dbm))
}

/// How SINR degradation maps to a rate factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenModel {
    /// Re-select the MCS from the SINR; factor is the rate ratio.
    McsReselect,
    /// Frame is kept at full rate iff SINR clears the decode threshold
    /// (selection threshold minus the capture margin), else floored.
    BinaryCapture,
}

pub const FACTOR_FLOOR: f64 = 0.01;

/// Hidden-terminal factor in [0.01, 1.0] given the already-computed SINR,
/// the link's interference-free SNR, and its base rate.
pub fn hidden_factor_from_sinr(
    sinr_db: f64,
    snr_db: f64,
    base_rate: f64,
    table: &McsTable,
    capture_margin_db: f64,
    model: HiddenModel,
) -> f64 {
    debug_assert!(base_rate > 0.0, "hidden factor needs a live link");
    let f = match model {
        HiddenModel::McsReselect => {
            let eff = table.rate_for_snr(sinr_db);
            if eff > 0.0 {
                eff / base_rate
            } else {
                FACTOR_FLOOR
            }
        }
        HiddenModel::BinaryCapture => {
            let select = table
                .select_rate(snr_db)
                .expect("base rate nonzero implies a selectable MCS");
            if sinr_db >= select.min_snr_db - capture_margin_db {
                1.0
            } else {
                FACTOR_FLOOR
            }
        }
    };
    f.clamp(FACTOR_FLOOR, 1.0)
}

/// Combined interference factor f = f_HT * eta(n)/n, clamped to [0.01, 1].
pub fn combined_factor(f_hidden: f64, contention: f64) -> f64 {
    (f_hidden * contention).clamp(FACTOR_FLOOR, 1.0)
}

/// Maximal cliques of the conflict graph (Bron-Kerbosch with pivoting).
/// Diagnostic only; the interference factor uses neighborhoods.
pub fn maximal_cliques(graph: &ConflictGraph) -> Vec<Vec<LinkId>> {
    let n = graph.link_count();
    let mut cliques = Vec::new();
    let mut r = Vec::new();
    let mut p: Vec<LinkId> = (0..n).collect();
    let mut x: Vec<LinkId> = Vec::new();
    bron_kerbosch(graph, &mut r, &mut p, &mut x, &mut cliques);
    cliques.sort();
    cliques
}

fn bron_kerbosch(
    g: &ConflictGraph,
    r: &mut Vec<LinkId>,
    p: &mut Vec<LinkId>,
    x: &mut Vec<LinkId>,
    out: &mut Vec<Vec<LinkId>>,
) {
    if p.is_empty() && x.is_empty() {
        let mut clique = r.clone();
        clique.sort_unstable();
        out.push(clique);
        return;
    }
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| g.neighbors(u).len())
        .unwrap();
    let candidates: Vec<LinkId> = p
        .iter()
        .copied()
        .filter(|&v| !g.conflicts(pivot, v))
        .collect();
    for v in candidates {
        let keep = |set: &[LinkId]| -> Vec<LinkId> {
            set.iter().copied().filter(|&u| g.conflicts(v, u)).collect()
        };
        let mut p2 = keep(p);
        let mut x2 = keep(x);
        r.push(v);
        bron_kerbosch(g, r, &mut p2, &mut x2, out);
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
}
