//! Declarative YAML scenarios and their compilation into engine inputs.
//!
//! Static scenarios list explicit link bandwidths; RF scenarios derive
//! every link rate from node geometry and an `rf:` section, either from an
//! explicit link list or from an `auto_link` distance rule.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{InterferenceMode, MacSetup, SimInput, DEFAULT_EVENT_CAP};
use crate::mac::{BianchiParams, HiddenModel, MacError};
use crate::model::{validate_scenario, DagSpec, LinkSpec, NodeSpec, Violation};
use crate::rfphy::{snr_at_distance, McsTable, RfConfig, RfError, WifiStandard};
use crate::routing::RoutingModel;
use crate::sched::SchedulerKind;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid scenario:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Rf(#[from] RfError),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A link as written in a scenario file. Bandwidth is required in static
/// mode and forbidden in RF mode; `undirected: true` expands into two
/// directed links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub latency: f64,
    #[serde(default)]
    pub undirected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoLink {
    #[serde(default = "default_auto_link_distance")]
    pub max_distance_m: f64,
}

fn default_auto_link_distance() -> f64 {
    80.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfSection {
    #[serde(default = "d_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "d_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "d_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "d_ref_distance")]
    pub reference_distance_m: f64,
    #[serde(default = "d_noise")]
    pub noise_floor_dbm: f64,
    #[serde(default = "d_cca")]
    pub cca_threshold_dbm: f64,
    #[serde(default = "d_capture")]
    pub capture_margin_db: f64,
    #[serde(default = "d_width")]
    pub channel_width_mhz: f64,
    #[serde(default = "d_standard")]
    pub standard: WifiStandard,
    /// Optional MCS override file: `index,min_snr_db,rate_mbps` records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs_file: Option<String>,
    #[serde(default = "d_hidden_model")]
    pub hidden_model: HiddenModel,
    #[serde(default = "d_mac_profile")]
    pub mac_profile: String,
    #[serde(default)]
    pub solo_overhead: bool,
    #[serde(default)]
    pub rts_cts: bool,
}

fn d_tx_power() -> f64 { 20.0 }
fn d_frequency() -> f64 { 5.0e9 }
fn d_exponent() -> f64 { 3.0 }
fn d_ref_distance() -> f64 { 1.0 }
fn d_noise() -> f64 { -95.0 }
fn d_cca() -> f64 { -82.0 }
fn d_capture() -> f64 { 5.0 }
fn d_width() -> f64 { 20.0 }
fn d_standard() -> WifiStandard { WifiStandard::Ax }
fn d_hidden_model() -> HiddenModel { HiddenModel::McsReselect }
fn d_mac_profile() -> String { "ofdm-default".into() }

impl Default for RfSection {
    fn default() -> Self {
        serde_yaml::from_str("{}").expect("all fields defaulted")
    }
}

impl RfSection {
    pub fn to_config(&self) -> RfConfig {
        RfConfig {
            tx_power_dbm: self.tx_power_dbm,
            frequency_hz: self.frequency_hz,
            path_loss_exponent: self.path_loss_exponent,
            reference_distance_m: self.reference_distance_m,
            noise_floor_dbm: self.noise_floor_dbm,
            cca_threshold_dbm: self.cca_threshold_dbm,
            capture_margin_db: self.capture_margin_db,
            channel_width_mhz: self.channel_width_mhz,
            standard: self.standard,
        }
    }
}

/// A parsed scenario document. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_cap: Option<u64>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_link: Option<AutoLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf: Option<RfSection>,
    #[serde(default = "d_interference")]
    pub interference: String,
    #[serde(default = "d_routing")]
    pub routing: String,
    #[serde(default = "d_scheduler")]
    pub scheduler: String,
    pub dags: Vec<DagSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn d_interference() -> String { "none".into() }
fn d_routing() -> String { "direct".into() }
fn d_scheduler() -> String { "round_robin".into() }

/// Parse a scenario document, classifying schema violations (unknown or
/// ill-typed keys) separately from YAML syntax errors.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    serde_yaml::from_str(text).map_err(|e| {
        let msg = match e.location() {
            Some(loc) => format!("{} (line {}, column {})", e, loc.line(), loc.column()),
            None => e.to_string(),
        };
        if msg.contains("unknown field") || msg.contains("missing field") || msg.contains("invalid type")
        {
            ScenarioError::Schema(msg)
        } else {
            ScenarioError::Parse(msg)
        }
    })
}

pub fn serialize_scenario(file: &ScenarioFile) -> String {
    serde_yaml::to_string(file).expect("scenario files serialize")
}

/// CLI-level overrides; each takes precedence over the scenario field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub interference: Option<String>,
    pub seed: Option<u64>,
}

/// A compiled scenario ready to run.
pub struct Scenario {
    pub name: String,
    pub input: SimInput,
    pub output: Option<String>,
    /// FNV-1a hash of the source document, echoed into the trace header.
    pub hash: u64,
}

pub fn compile(file: &ScenarioFile, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    compile_with_base(file, overrides, None)
}

/// Compile with a base directory for resolving relative `mcs_file` paths.
pub fn compile_with_base(
    file: &ScenarioFile,
    overrides: &Overrides,
    base_dir: Option<&Path>,
) -> Result<Scenario, ScenarioError> {
    let interference_name = overrides
        .interference
        .clone()
        .unwrap_or_else(|| file.interference.clone());
    let interference = InterferenceMode::from_name(&interference_name).ok_or_else(|| {
        ScenarioError::Schema(format!("unknown interference model '{interference_name}'"))
    })?;
    let routing = RoutingModel::from_name(&file.routing)
        .map_err(|e| ScenarioError::Schema(e.to_string()))?;
    let scheduler = SchedulerKind::from_name(&file.scheduler)
        .map_err(|e| ScenarioError::Schema(e.to_string()))?;

    let rf_mode = file.rf.is_some();
    if interference == InterferenceMode::CsmaBianchi && !rf_mode {
        return Err(ScenarioError::Schema(
            "interference csma_bianchi requires an rf section".into(),
        ));
    }
    if file.auto_link.is_some() && !rf_mode {
        return Err(ScenarioError::Schema(
            "auto_link requires an rf section (static links need explicit bandwidths)".into(),
        ));
    }

    // Expand undirected entries and check bandwidth presence per mode.
    let mut raw_links: Vec<(String, String, Option<f64>, f64)> = Vec::new();
    for l in &file.links {
        if rf_mode && l.bandwidth.is_some() {
            return Err(ScenarioError::Schema(format!(
                "link {} -> {}: bandwidth is derived from RF geometry and must be omitted",
                l.src, l.dst
            )));
        }
        if !rf_mode && l.bandwidth.is_none() {
            return Err(ScenarioError::Schema(format!(
                "link {} -> {}: bandwidth is required without an rf section",
                l.src, l.dst
            )));
        }
        raw_links.push((l.src.clone(), l.dst.clone(), l.bandwidth, l.latency));
        if l.undirected {
            raw_links.push((l.dst.clone(), l.src.clone(), l.bandwidth, l.latency));
        }
    }
    if let Some(auto) = &file.auto_link {
        for (i, a) in file.nodes.iter().enumerate() {
            for b in file.nodes.iter().skip(i + 1) {
                if let (Some(pa), Some(pb)) = (a.position, b.position) {
                    if crate::rfphy::euclidean(pa, pb) <= auto.max_distance_m {
                        raw_links.push((a.id.clone(), b.id.clone(), None, 0.0));
                        raw_links.push((b.id.clone(), a.id.clone(), None, 0.0));
                    }
                }
            }
        }
    }

    let rf_cfg = file.rf.as_ref().map(RfSection::to_config);
    let mcs = match file.rf.as_ref().and_then(|r| r.mcs_file.as_ref()) {
        Some(path) => {
            let resolved = match base_dir {
                Some(dir) => dir.join(path),
                None => Path::new(path).to_path_buf(),
            };
            McsTable::from_records(&std::fs::read_to_string(resolved)?)?
        }
        None => McsTable::default_11ax_20mhz(),
    };

    // Node positions are needed to derive bandwidths, so look them up from
    // the raw list before full validation.
    let position_of = |id: &str| file.nodes.iter().find(|n| n.id == id).and_then(|n| n.position);
    let mut links: Vec<LinkSpec> = Vec::with_capacity(raw_links.len());
    for (src, dst, bandwidth, latency) in raw_links {
        let bandwidth = match (rf_mode, bandwidth) {
            (false, Some(bw)) => bw,
            (true, _) => match (position_of(&src), position_of(&dst)) {
                (Some(a), Some(b)) => {
                    let cfg = rf_cfg.as_ref().expect("rf mode");
                    let d = crate::rfphy::euclidean(a, b);
                    if d > 0.0 {
                        mcs.rate_for_snr(snr_at_distance(cfg, d)?)
                    } else {
                        0.0 // coincident nodes are rejected below
                    }
                }
                // missing positions are rejected below with a proper violation
                _ => 0.0,
            },
            (false, None) => unreachable!("checked above"),
        };
        links.push(LinkSpec { src, dst, bandwidth, latency });
    }

    let network = validate_scenario(&file.nodes, &links, &file.dags, rf_mode)
        .map_err(ScenarioError::Invalid)?;

    let mac = if interference == InterferenceMode::CsmaBianchi {
        let section = file.rf.as_ref().expect("checked above");
        let params = BianchiParams::by_name(&section.mac_profile)?;
        Some(MacSetup::new(
            &network,
            section.to_config(),
            mcs,
            params,
            section.hidden_model,
            section.solo_overhead,
            section.rts_cts,
        )?)
    } else {
        None
    };

    let seed = overrides
        .seed
        .or(file.seed)
        .or_else(|| std::env::var("NCSIM_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0);

    let source = serialize_scenario(file);
    Ok(Scenario {
        name: if file.name.is_empty() {
            "scenario".into()
        } else {
            file.name.clone()
        },
        input: SimInput {
            network,
            dags: file.dags.clone(),
            interference,
            routing,
            scheduler,
            mac,
            seed,
            event_cap: file.event_cap.unwrap_or(DEFAULT_EVENT_CAP),
        },
        output: file.output.clone(),
        hash: fnv1a64(source.as_bytes()),
    })
}

pub fn load_file(path: &Path, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let file = parse_scenario(&text)?;
    compile_with_base(&file, overrides, path.parent())
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
name: two-node
nodes:
  - id: n0
    capacity: 100
  - id: n1
    capacity: 100
links:
  - src: n0
    dst: n1
    bandwidth: 8.6
scheduler: manual
dags:
  - id: d
    tasks:
      - id: A
        compute_cost: 100
        pinned_to: n0
      - id: B
        compute_cost: 100
        pinned_to: n1
    edges:
      - src_task: A
        dst_task: B
        data_size: 10
";

    #[test]
    fn minimal_static_scenario_parses_and_compiles() {
        let file = parse_scenario(MINIMAL).unwrap();
        let sc = compile(&file, &Overrides::default()).unwrap();
        assert_eq!(sc.input.network.links[0].bandwidth, 8.6);
        assert_eq!(sc.input.scheduler, SchedulerKind::Manual);
        let report = crate::engine::run(&sc.input, &mut crate::engine::NullSink).unwrap();
        assert!((report.makespan_s - (1.0 + 10.0 / 8.6 + 1.0)).abs() < 1e-5);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let bad = MINIMAL.replace("name: two-node", "name: x\nbogus_key: 1");
        match parse_scenario(&bad) {
            Err(ScenarioError::Schema(msg)) => assert!(msg.contains("bogus_key"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_yaml_is_a_parse_error() {
        match parse_scenario("nodes: [\n") {
            Err(ScenarioError::Parse(_)) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rf_scenario_with_missing_position_is_invalid() {
        let text = "\
nodes:
  - id: n0
    capacity: 100
    position: [0, 0]
  - id: n1
    capacity: 100
links:
  - src: n0
    dst: n1
rf: {}
dags: []
";
        let file = parse_scenario(text).unwrap();
        match compile(&file, &Overrides::default()) {
            Err(ScenarioError::Invalid(v)) => {
                assert!(v.iter().any(|x| matches!(x, Violation::MissingPosition { .. })))
            }
            other => panic!("expected invalid, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn rf_scenario_derives_bandwidth_from_distance() {
        let text = "\
nodes:
  - id: n0
    capacity: 100
    position: [0, 0]
  - id: n1
    capacity: 100
    position: [30, 0]
links:
  - src: n0
    dst: n1
rf: {}
routing: direct
scheduler: manual
dags: []
";
        let file = parse_scenario(text).unwrap();
        let sc = compile(&file, &Overrides::default()).unwrap();
        assert_eq!(sc.input.network.links[0].bandwidth, 8.6);
    }

    #[test]
    fn static_link_without_bandwidth_is_rejected() {
        let text = MINIMAL.replace("    bandwidth: 8.6\n", "");
        let file = parse_scenario(&text).unwrap();
        assert!(matches!(
            compile(&file, &Overrides::default()),
            Err(ScenarioError::Schema(_))
        ));
    }

    #[test]
    fn explicit_bandwidth_in_rf_mode_is_rejected() {
        let text = "\
nodes:
  - id: n0
    capacity: 100
    position: [0, 0]
  - id: n1
    capacity: 100
    position: [30, 0]
links:
  - src: n0
    dst: n1
    bandwidth: 5
rf: {}
dags: []
";
        let file = parse_scenario(text).unwrap();
        assert!(matches!(
            compile(&file, &Overrides::default()),
            Err(ScenarioError::Schema(_))
        ));
    }

    #[test]
    fn names_resolve_to_models() {
        let text = MINIMAL
            .replace("scheduler: manual", "scheduler: heft\nrouting: shortest_path");
        let file = parse_scenario(&text).unwrap();
        let sc = compile(&file, &Overrides::default()).unwrap();
        assert_eq!(sc.input.scheduler, SchedulerKind::Heft);
        assert_eq!(sc.input.routing, RoutingModel::ShortestPath);
    }

    #[test]
    fn round_trip_preserves_the_document() {
        let file = parse_scenario(MINIMAL).unwrap();
        let text = serialize_scenario(&file);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(file, again);
    }

    #[test]
    fn auto_link_connects_nodes_within_range() {
        let text = "\
nodes:
  - id: a
    capacity: 100
    position: [0, 0]
  - id: b
    capacity: 100
    position: [50, 0]
  - id: c
    capacity: 100
    position: [200, 0]
auto_link:
  max_distance_m: 80
rf: {}
dags: []
";
        let file = parse_scenario(text).unwrap();
        let sc = compile(&file, &Overrides::default()).unwrap();
        // a<->b within 80 m; c is isolated
        assert_eq!(sc.input.network.links.len(), 2);
    }

    #[test]
    fn overrides_take_precedence() {
        let text = MINIMAL.to_string() + "seed: 7\n";
        let file = parse_scenario(&text).unwrap();
        let sc = compile(
            &file,
            &Overrides {
                interference: None,
                seed: Some(99),
            },
        )
        .unwrap();
        assert_eq!(sc.input.seed, 99);
        let sc = compile(&file, &Overrides::default()).unwrap();
        assert_eq!(sc.input.seed, 7);
    }

    #[test]
    fn csma_without_rf_is_rejected() {
        let text = MINIMAL.to_string() + "interference: csma_bianchi\n";
        let file = parse_scenario(&text).unwrap();
        assert!(matches!(
            compile(&file, &Overrides::default()),
            Err(ScenarioError::Schema(_))
        ));
    }
}
