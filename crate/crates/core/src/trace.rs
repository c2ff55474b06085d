//! JSONL trace serialization: one JSON object per event with fixed key
//! order and fixed-precision numbers, so identical runs produce
//! byte-identical traces on any platform.

use std::fmt::Write as _;
use std::io::Write;

use crate::engine::{TraceRecord, TraceSink};

/// Times print with six decimal places, built from integer microseconds.
pub fn format_time_us(us: u64) -> String {
    format!("{}.{:06}", us / 1_000_000, us % 1_000_000)
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Render one record with a stable field order.
pub fn trace_line(rec: &TraceRecord) -> String {
    let mut out = String::with_capacity(128);
    let _ = write!(
        out,
        "{{\"t\":{},\"kind\":{}",
        format_time_us(rec.t_us),
        json_str(rec.kind.name())
    );
    if let Some(dag) = &rec.dag {
        let _ = write!(out, ",\"dag\":{}", json_str(dag));
    }
    if let Some(task) = &rec.task {
        let _ = write!(out, ",\"task\":{}", json_str(task));
    }
    if let Some(flow) = rec.flow {
        let _ = write!(out, ",\"flow\":{flow}");
    }
    if let Some(node) = &rec.node {
        let _ = write!(out, ",\"node\":{}", json_str(node));
    }
    if let Some(link) = &rec.link {
        let _ = write!(out, ",\"link\":{}", json_str(link));
    }
    let mut detail = String::new();
    if let Some(rate) = rec.rate {
        let _ = write!(detail, "\"rate\":{}", fmt3(rate));
    }
    if let Some(old) = rec.old_rate {
        if !detail.is_empty() {
            detail.push(',');
        }
        let _ = write!(detail, "\"old_rate\":{}", fmt3(old));
    }
    if let Some(rem) = rec.remaining_mb {
        if !detail.is_empty() {
            detail.push(',');
        }
        let _ = write!(detail, "\"remaining_mb\":{}", fmt3(rem));
    }
    if let Some(f_ht) = rec.f_ht {
        if !detail.is_empty() {
            detail.push(',');
        }
        let _ = write!(
            detail,
            "\"f_ht\":{},\"eta\":{},\"contenders\":{},\"flows\":{}",
            fmt3(f_ht),
            fmt3(rec.eta.unwrap_or(1.0)),
            rec.contenders.unwrap_or(0),
            rec.flows_on_link.unwrap_or(0)
        );
    }
    if let Some(plan) = &rec.placement {
        if !detail.is_empty() {
            detail.push(',');
        }
        let _ = write!(
            detail,
            "\"placement\":{}",
            serde_json::to_string(plan).expect("plans serialize")
        );
    }
    if !detail.is_empty() {
        let _ = write!(out, ",\"detail\":{{{detail}}}");
    }
    out.push('}');
    out
}

/// Metadata echoed as the first line of a trace file.
#[derive(Debug, Clone)]
pub struct TraceMeta {
    pub scenario: String,
    pub hash: u64,
    pub seed: u64,
    pub interference: String,
    pub routing: String,
    pub scheduler: String,
}

pub fn header_line(meta: &TraceMeta) -> String {
    format!(
        "{{\"meta\":{{\"scenario\":{},\"hash\":\"{:016x}\",\"seed\":{},\"interference\":{},\"routing\":{},\"scheduler\":{},\"version\":{}}}}}",
        json_str(&meta.scenario),
        meta.hash,
        meta.seed,
        json_str(&meta.interference),
        json_str(&meta.routing),
        json_str(&meta.scheduler),
        json_str(env!("CARGO_PKG_VERSION")),
    )
}

/// Serialize events only (no header); an empty run yields an empty stream.
pub fn emit_trace<'a>(
    events: impl IntoIterator<Item = &'a TraceRecord>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    for ev in events {
        out.write_all(trace_line(ev).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Header plus events, LF line endings.
pub fn write_trace(
    meta: &TraceMeta,
    events: &[TraceRecord],
    out: &mut impl Write,
) -> std::io::Result<()> {
    out.write_all(header_line(meta).as_bytes())?;
    out.write_all(b"\n")?;
    emit_trace(events.iter(), out)
}

/// Streaming sink: renders each record as it is produced.
pub struct JsonlSink<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(mut out: W, meta: &TraceMeta) -> std::io::Result<Self> {
        out.write_all(header_line(meta).as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Self { out, error: None })
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for JsonlSink<W> {
    fn record(&mut self, rec: TraceRecord) {
        if self.error.is_some() {
            return;
        }
        let line = trace_line(&rec);
        if let Err(e) = self
            .out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
        {
            self.error = Some(e);
        }
    }
}
