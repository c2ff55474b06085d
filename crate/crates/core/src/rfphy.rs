//! Physical-layer math: log-distance path loss, SNR, MCS rate selection,
//! and the carrier-sense range that drives conflict-graph construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum RfError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid MCS table: {0}")]
    InvalidMcsTable(String),
    #[error("MCS table parse error at line {line}: {detail}")]
    McsParse { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WifiStandard {
    #[serde(rename = "11n")]
    N,
    #[serde(rename = "11ac")]
    Ac,
    #[serde(rename = "11ax")]
    Ax,
}

/// RF parameters for deriving link rates from geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub tx_power_dbm: f64,
    pub frequency_hz: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    pub noise_floor_dbm: f64,
    pub cca_threshold_dbm: f64,
    pub capture_margin_db: f64,
    pub channel_width_mhz: f64,
    pub standard: WifiStandard,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            frequency_hz: 5.0e9,
            path_loss_exponent: 3.0,
            reference_distance_m: 1.0,
            noise_floor_dbm: -95.0,
            cca_threshold_dbm: -82.0,
            capture_margin_db: 5.0,
            channel_width_mhz: 20.0,
            standard: WifiStandard::Ax,
        }
    }
}

/// Friis free-space loss at the reference distance, in dB.
pub fn reference_loss(frequency_hz: f64, d0: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d0 * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Log-distance path loss at distance `d` meters.
pub fn path_loss(cfg: &RfConfig, d: f64) -> f64 {
    reference_loss(cfg.frequency_hz, cfg.reference_distance_m)
        + 10.0 * cfg.path_loss_exponent * (d / cfg.reference_distance_m).log10()
}

/// Received power in dBm at distance `d`.
pub fn received_power_dbm(cfg: &RfConfig, d: f64) -> f64 {
    cfg.tx_power_dbm - path_loss(cfg, d)
}

/// SNR in dB at distance `d`; pure subtraction in the dB domain.
pub fn snr_at_distance(cfg: &RfConfig, d: f64) -> Result<f64, RfError> {
    if !(d > 0.0) {
        return Err(RfError::NonPositiveDistance(d));
    }
    Ok(received_power_dbm(cfg, d) - cfg.noise_floor_dbm)
}

/// Maximum distance at which a transmission still trips clear channel
/// assessment at `cca_threshold_dbm`.
pub fn carrier_sense_range(cfg: &RfConfig) -> f64 {
    let pl0 = reference_loss(cfg.frequency_hz, cfg.reference_distance_m);
    cfg.reference_distance_m
        * 10f64.powf((cfg.tx_power_dbm - cfg.cca_threshold_dbm - pl0) / (10.0 * cfg.path_loss_exponent))
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// One modulation-and-coding scheme. `rate_mbps` is the flow-level data
/// rate in megabytes per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u8,
    pub min_snr_db: f64,
    pub rate_mbps: f64,
}

/// Ordered MCS ladder; thresholds and rates strictly increase with index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self, RfError> {
        if entries.is_empty() {
            return Err(RfError::InvalidMcsTable("table is empty".into()));
        }
        for pair in entries.windows(2) {
            if pair[1].min_snr_db <= pair[0].min_snr_db {
                return Err(RfError::InvalidMcsTable(format!(
                    "min SNR not strictly increasing at index {}",
                    pair[1].index
                )));
            }
            if pair[1].rate_mbps <= pair[0].rate_mbps {
                return Err(RfError::InvalidMcsTable(format!(
                    "rate not strictly increasing at index {}",
                    pair[1].index
                )));
            }
        }
        Ok(Self { entries })
    }

    /// 802.11ax 20 MHz single stream, long guard interval. Rates in MB/s.
    pub fn default_11ax_20mhz() -> Self {
        let min_snr = [5.0, 8.0, 11.0, 14.0, 18.0, 21.0, 25.0, 29.0, 33.0, 35.0, 38.0, 41.0];
        let rate = [
            1.075, 2.15, 3.225, 4.3, 6.45, 8.6, 9.675, 10.75, 12.9, 14.338, 16.125, 17.925,
        ];
        let entries = min_snr
            .iter()
            .zip(rate.iter())
            .enumerate()
            .map(|(i, (&s, &r))| McsEntry {
                index: i as u8,
                min_snr_db: s,
                rate_mbps: r,
            })
            .collect();
        Self::new(entries).expect("builtin table is valid")
    }

    /// Parse a table from text: one `index,min_snr_db,rate_mbps` record per
    /// line, `#` comments and blank lines ignored.
    pub fn from_records(text: &str) -> Result<Self, RfError> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(RfError::McsParse {
                    line: lineno + 1,
                    detail: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64, RfError> {
                s.parse::<f64>().map_err(|e| RfError::McsParse {
                    line: lineno + 1,
                    detail: format!("bad {what}: {e}"),
                })
            };
            entries.push(McsEntry {
                index: parse(fields[0], "index")? as u8,
                min_snr_db: parse(fields[1], "min_snr_db")?,
                rate_mbps: parse(fields[2], "rate_mbps")?,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Highest-rate entry whose threshold the SNR meets; `None` below MCS 0.
    pub fn select_rate(&self, snr_db: f64) -> Option<McsEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| snr_db >= e.min_snr_db)
            .copied()
    }

    /// Flow rate in MB/s for the given SNR; 0.0 when no MCS decodes.
    pub fn rate_for_snr(&self, snr_db: f64) -> f64 {
        self.select_rate(snr_db).map_or(0.0, |e| e.rate_mbps)
    }
}

pub fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_loss_at_5ghz_matches_expected() {
        assert_abs_diff_eq!(reference_loss(5.0e9, 1.0), 46.42, epsilon = 0.05);
        assert_abs_diff_eq!(reference_loss(5.0e9, 1.0), 46.427183309, epsilon = 1e-6);
    }

    #[test]
    fn reference_loss_is_zero_when_log_argument_is_one() {
        let f = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(reference_loss(f, 1.0), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn reference_loss_at_2_4ghz() {
        assert_abs_diff_eq!(reference_loss(2.4e9, 1.0), 40.05, epsilon = 0.05);
    }

    #[test]
    fn snr_matches_link_length_table() {
        let cfg = RfConfig::default();
        // (distance m, published SNR dB)
        let rows = [
            (1.0, 68.58),
            (12.0, 36.20),
            (30.0, 24.27),
            (50.0, 17.61),
            (75.0, 12.33),
            (105.0, 7.94),
            (140.0, 4.19),
        ];
        for (d, snr) in rows {
            assert_abs_diff_eq!(snr_at_distance(&cfg, d).unwrap(), snr, epsilon = 0.05);
        }
    }

    #[test]
    fn snr_at_reference_distance_is_exact_subtraction() {
        let cfg = RfConfig::default();
        let expected = cfg.tx_power_dbm
            - reference_loss(cfg.frequency_hz, cfg.reference_distance_m)
            - cfg.noise_floor_dbm;
        assert_eq!(snr_at_distance(&cfg, 1.0).unwrap(), expected);
    }

    #[test]
    fn snr_rejects_zero_distance() {
        let cfg = RfConfig::default();
        assert_eq!(
            snr_at_distance(&cfg, 0.0),
            Err(RfError::NonPositiveDistance(0.0))
        );
    }

    #[test]
    fn rate_selection_matches_link_length_table() {
        let t = McsTable::default_11ax_20mhz();
        assert_eq!(t.select_rate(24.27).map(|e| (e.index, e.rate_mbps)), Some((5, 8.6)));
        assert_eq!(t.select_rate(68.58).map(|e| (e.index, e.rate_mbps)), Some((11, 17.925)));
        assert_eq!(t.select_rate(36.20).map(|e| e.index), Some(9));
        assert_eq!(t.select_rate(17.61).map(|e| e.index), Some(3));
        assert_eq!(t.select_rate(12.33).map(|e| e.index), Some(2));
        assert_eq!(t.select_rate(18.3).map(|e| e.index), Some(4));
        assert_eq!(t.select_rate(7.94).map(|e| e.index), Some(0));
        assert_eq!(t.select_rate(4.19), None);
        assert_eq!(t.rate_for_snr(4.19), 0.0);
    }

    #[test]
    fn carrier_sense_range_matches_defaults() {
        let cfg = RfConfig::default();
        assert_abs_diff_eq!(carrier_sense_range(&cfg), 71.2, epsilon = 0.2);
    }

    #[test]
    fn carrier_sense_range_degenerates_to_d0() {
        let mut cfg = RfConfig::default();
        cfg.cca_threshold_dbm =
            cfg.tx_power_dbm - reference_loss(cfg.frequency_hz, cfg.reference_distance_m);
        assert_abs_diff_eq!(carrier_sense_range(&cfg), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn carrier_sense_range_with_exponent_two() {
        let cfg = RfConfig {
            path_loss_exponent: 2.0,
            ..RfConfig::default()
        };
        assert_abs_diff_eq!(carrier_sense_range(&cfg), 601.0, epsilon = 1.0);
    }

    #[test]
    fn snr_is_strictly_decreasing_in_distance() {
        let cfg = RfConfig::default();
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let snr = snr_at_distance(&cfg, i as f64).unwrap();
            assert!(snr < prev);
            prev = snr;
        }
    }

    #[test]
    fn rate_staircase_is_monotone_in_distance() {
        let cfg = RfConfig::default();
        let t = McsTable::default_11ax_20mhz();
        let mut prev = f64::INFINITY;
        for i in 1..300 {
            let d = i as f64 * 0.5;
            let r = t.rate_for_snr(snr_at_distance(&cfg, d).unwrap());
            assert!(r <= prev, "rate increased at d={d}");
            prev = r;
        }
    }

    #[test]
    fn threshold_round_trip() {
        let t = McsTable::default_11ax_20mhz();
        let eps = 1e-9;
        for (k, e) in t.entries().iter().enumerate() {
            assert_eq!(t.select_rate(e.min_snr_db).map(|x| x.index), Some(e.index));
            let below = t.select_rate(e.min_snr_db - eps).map(|x| x.index);
            if k == 0 {
                assert_eq!(below, None);
            } else {
                assert_eq!(below, Some(t.entries()[k - 1].index));
            }
        }
    }

    #[test]
    fn mcs_table_from_records_round_trips() {
        let text = "# idx, snr, rate\n0, 5, 1.075\n1, 8, 2.15\n";
        let t = McsTable::from_records(text).unwrap();
        assert_eq!(t.entries().len(), 2);
        assert_eq!(t.select_rate(9.0).map(|e| e.index), Some(1));
        assert!(McsTable::from_records("0,5\n").is_err());
        assert!(McsTable::from_records("0,5,2\n1,4,3\n").is_err());
    }
}
