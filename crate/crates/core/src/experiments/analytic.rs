//! Closed-form predictors for the validation experiments. These never touch
//! the event engine: rates come from the RF/MAC formulas and a fluid phase
//! analysis, so engine comparisons are not self-referential.

use crate::mac::{hidden_factor_from_sinr, ContentionModel, HiddenModel, FACTOR_FLOOR};
use crate::rfphy::{
    carrier_sense_range, dbm_to_mw, euclidean, received_power_dbm, snr_at_distance, McsTable,
    RfConfig,
};

/// Interference-free flow rate of a single link of the given length.
pub fn solo_rate(cfg: &RfConfig, mcs: &McsTable, distance_m: f64) -> f64 {
    match snr_at_distance(cfg, distance_m) {
        Ok(snr) => mcs.rate_for_snr(snr),
        Err(_) => 0.0,
    }
}

/// Transmitter/receiver positions of one link.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeom {
    pub tx: (f64, f64),
    pub rx: (f64, f64),
}

/// `count` horizontal links of `length`, stacked `sep` apart.
pub fn parallel_links(count: usize, length: f64, sep: f64) -> Vec<LinkGeom> {
    (0..count)
        .map(|i| {
            let y = sep * i as f64;
            LinkGeom { tx: (0.0, y), rx: (length, y) }
        })
        .collect()
}

/// Average per-link rates for simultaneous equal-size transfers, from a
/// fluid multi-phase analysis: piecewise-constant rates between transfer
/// completions, no event queue, no rounding.
pub fn fluid_average_rates(
    links: &[LinkGeom],
    cfg: &RfConfig,
    mcs: &McsTable,
    contention: &ContentionModel,
    hidden_model: HiddenModel,
    size_mb: f64,
) -> Vec<f64> {
    let cs_range = carrier_sense_range(cfg);
    let n = links.len();
    let conflicts = |a: usize, b: usize| -> bool {
        euclidean(links[a].tx, links[b].tx) <= cs_range
            || euclidean(links[a].tx, links[b].rx) <= cs_range
            || euclidean(links[b].tx, links[a].rx) <= cs_range
    };
    let mut remaining: Vec<f64> = vec![size_mb; n];
    let mut done: Vec<bool> = vec![false; n];
    let mut finish_time: Vec<f64> = vec![f64::INFINITY; n];
    let mut clock = 0.0f64;
    while done.iter().any(|d| !d) {
        let active: Vec<usize> = (0..n).filter(|&i| !done[i]).collect();
        let mut rates = vec![0.0; n];
        for &i in &active {
            let base = solo_rate(cfg, mcs, euclidean(links[i].tx, links[i].rx));
            if base <= 0.0 {
                continue;
            }
            let contenders = active.iter().filter(|&&j| j != i && conflicts(i, j)).count();
            let hidden: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&j| j != i && !conflicts(i, j))
                .collect();
            let cont = contention.contention_factor(1 + contenders as u32);
            let f_ht = if hidden.is_empty() {
                1.0
            } else {
                let p_rx = dbm_to_mw(received_power_dbm(cfg, euclidean(links[i].tx, links[i].rx)));
                let noise = dbm_to_mw(cfg.noise_floor_dbm);
                let interference: f64 = hidden
                    .iter()
                    .map(|&j| {
                        dbm_to_mw(received_power_dbm(cfg, euclidean(links[j].tx, links[i].rx)))
                    })
                    .sum();
                let sinr = 10.0 * (p_rx / (noise + interference)).log10();
                let snr = 10.0 * (p_rx / noise).log10();
                hidden_factor_from_sinr(sinr, snr, base, mcs, cfg.capture_margin_db, hidden_model)
            };
            rates[i] = base * (f_ht * cont).clamp(FACTOR_FLOOR, 1.0);
        }
        let dt = active
            .iter()
            .filter(|&&i| rates[i] > 0.0)
            .map(|&i| remaining[i] / rates[i])
            .fold(f64::INFINITY, f64::min);
        if !dt.is_finite() {
            // every remaining link is dead; they never finish
            break;
        }
        clock += dt;
        for &i in &active {
            if rates[i] <= 0.0 {
                continue;
            }
            remaining[i] -= rates[i] * dt;
            if remaining[i] <= 1e-9 {
                remaining[i] = 0.0;
                done[i] = true;
                finish_time[i] = clock;
            }
        }
    }
    (0..n)
        .map(|i| {
            if finish_time[i].is_finite() {
                size_mb / finish_time[i]
            } else {
                0.0
            }
        })
        .collect()
}
