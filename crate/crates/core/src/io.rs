//! File formats: CSV candle ingestion, JSON signal scripts, the
//! finer-resolution data provider backing the exact policy, and report
//! serialization (JSON round-trippable, CSV per section).

use crate::candle::{
    price_to_ticks, round_levels, validate_candle, BracketLevels, Candle, CandleError, EntryOrder,
    EntryTrigger, RawLevels, Side, Ticks, TimeInForce,
};
use crate::resolver::{FinerDataSource, RefineError};
use crate::runner::{BacktestReport, PolicyComparison, ScriptAction, ScriptEvent, SignalScript};
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("row {row}: timestamps not strictly ascending")]
    NonMonotonicTimestamps { row: usize },
    #[error("row {row}: price {price} is off the {tick_size} tick grid")]
    OffGridPrice {
        row: usize,
        price: f64,
        tick_size: f64,
    },
    #[error("missing column {0:?} in header")]
    MissingColumn(String),
    #[error("bad resolution {0:?}: expected e.g. 1d, 4h, 15m, 30s")]
    BadResolution(String),
    #[error("script: {0}")]
    Script(String),
    #[error(transparent)]
    Level(#[from] CandleError),
}

/// Header names for the five candle columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            timestamp: "timestamp".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
        }
    }
}

/// Where and how to read one candle series.
#[derive(Debug, Clone)]
pub struct CandleFileSpec {
    pub path: PathBuf,
    pub tick_size: f64,
    pub columns: ColumnMap,
    /// Period length of each row, e.g. 86400 for daily bars.
    pub period_secs: i64,
    pub resolution_label: String,
}

impl CandleFileSpec {
    pub fn new(
        path: impl Into<PathBuf>,
        tick_size: f64,
        resolution: &str,
    ) -> Result<Self, DataError> {
        Ok(CandleFileSpec {
            path: path.into(),
            tick_size,
            columns: ColumnMap::default(),
            period_secs: parse_resolution(resolution)?,
            resolution_label: resolution.to_string(),
        })
    }
}

/// Parses "1d" / "4h" / "15m" / "30s" (or a plain second count) to seconds.
pub fn parse_resolution(s: &str) -> Result<i64, DataError> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        if secs > 0 {
            return Ok(secs);
        }
    }
    let (num, unit) = s.split_at(s.len().saturating_sub(1));
    let n: i64 = num
        .parse()
        .map_err(|_| DataError::BadResolution(s.to_string()))?;
    if n <= 0 {
        return Err(DataError::BadResolution(s.to_string()));
    }
    let mult = match unit {
        "s" => 1,
        "m" => 60,
        "h" => 3_600,
        "d" => 86_400,
        _ => return Err(DataError::BadResolution(s.to_string())),
    };
    Ok(n * mult)
}

/// ISO-8601 timestamps in UTC; seconds and zone designator optional,
/// date-only rows mean midnight.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(date.and_hms_opt(0, 0, 0)?.and_utc());
    }
    None
}

/// Loads and validates a candle series: header required, prices exactly on
/// the tick grid, timestamps strictly ascending.
pub fn load_candles(spec: &CandleFileSpec) -> Result<Vec<Candle>, DataError> {
    let file = std::fs::File::open(&spec.path).map_err(|e| DataError::Io {
        path: spec.path.clone(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| DataError::ParseError {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let (its, io_, ih, il, ic) = (
        col(&spec.columns.timestamp)?,
        col(&spec.columns.open)?,
        col(&spec.columns.high)?,
        col(&spec.columns.low)?,
        col(&spec.columns.close)?,
    );

    let mut candles = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header
        let record = record.map_err(|e| DataError::ParseError {
            row,
            message: e.to_string(),
        })?;
        let field = |ix: usize| -> Result<&str, DataError> {
            record.get(ix).ok_or(DataError::ParseError {
                row,
                message: "short row".into(),
            })
        };
        let timestamp = parse_timestamp(field(its)?).ok_or_else(|| DataError::ParseError {
            row,
            message: format!("bad timestamp {:?}", record.get(its).unwrap_or("")),
        })?;
        let price_at = |ix: usize| -> Result<Ticks, DataError> {
            let raw = field(ix)?;
            let price: f64 = raw.parse().map_err(|_| DataError::ParseError {
                row,
                message: format!("bad price {raw:?}"),
            })?;
            price_to_ticks(price, spec.tick_size).map_err(|_| DataError::OffGridPrice {
                row,
                price,
                tick_size: spec.tick_size,
            })
        };
        let candle = Candle {
            open: price_at(io_)?,
            high: price_at(ih)?,
            low: price_at(il)?,
            close: price_at(ic)?,
            timestamp,
            period_secs: spec.period_secs,
        };
        validate_candle(&candle).map_err(|e| DataError::ParseError {
            row,
            message: e.to_string(),
        })?;
        if let Some(prev) = candles.last() {
            let prev: &Candle = prev;
            if candle.timestamp <= prev.timestamp {
                return Err(DataError::NonMonotonicTimestamps { row });
            }
        }
        candles.push(candle);
    }
    Ok(candles)
}

/// Writes candles back to CSV with the default columns; inverse of
/// [`load_candles`] up to formatting.
pub fn write_candles_csv(candles: &[Candle], tick_size: f64) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "open", "high", "low", "close"])
        .unwrap();
    for c in candles {
        w.write_record([
            c.timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            c.open.to_price(tick_size).to_string(),
            c.high.to_price(tick_size).to_string(),
            c.low.to_price(tick_size).to_string(),
            c.close.to_price(tick_size).to_string(),
        ])
        .unwrap();
    }
    w.into_inner().unwrap()
}

/// SHA-256 over the canonical tick encoding of a candle series; identical
/// data yields identical fingerprints regardless of file formatting.
pub fn fingerprint_candles(candles: &[Candle]) -> String {
    let mut hasher = Sha256::new();
    for c in candles {
        hasher.update(c.timestamp.timestamp().to_le_bytes());
        hasher.update(c.period_secs.to_le_bytes());
        for v in [c.open, c.high, c.low, c.close] {
            hasher.update(v.0.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// --- signal scripts ---------------------------------------------------------

#[derive(Debug, Deserialize)]
struct RawTrigger {
    #[serde(rename = "type")]
    kind: String,
    stop: Option<f64>,
    limit: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawOrder {
    side: String,
    trigger: RawTrigger,
    stop_loss: Option<f64>,
    target: Option<f64>,
    #[serde(default)]
    tif: Option<String>,
    id: Option<String>,
    quantity: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct RawEvent {
    at: String,
    action: String,
    order: Option<RawOrder>,
    order_id: Option<String>,
}

/// Parses the JSON script format and snaps all price levels to the tick
/// grid with side-aware rounding.
pub fn load_script(path: &Path, tick_size: f64) -> Result<SignalScript, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::Io {
        path: path.into(),
        source: e,
    })?;
    parse_script(&bytes, tick_size)
}

pub fn parse_script(bytes: &[u8], tick_size: f64) -> Result<SignalScript, DataError> {
    let raw: Vec<RawEvent> =
        serde_json::from_slice(bytes).map_err(|e| DataError::Script(e.to_string()))?;
    let mut events = Vec::with_capacity(raw.len());
    for (n, ev) in raw.into_iter().enumerate() {
        let at = parse_timestamp(&ev.at)
            .ok_or_else(|| DataError::Script(format!("event {n}: bad timestamp {:?}", ev.at)))?;
        let action = match ev.action.as_str() {
            "submit" => {
                let order = ev
                    .order
                    .ok_or_else(|| DataError::Script(format!("event {n}: submit without order")))?;
                ScriptAction::Submit {
                    order: convert_order(order, n, tick_size)?,
                }
            }
            "cancel" => ScriptAction::Cancel {
                order_id: ev.order_id.ok_or_else(|| {
                    DataError::Script(format!("event {n}: cancel without order_id"))
                })?,
            },
            other => {
                return Err(DataError::Script(format!(
                    "event {n}: unknown action {other:?}"
                )))
            }
        };
        events.push(ScriptEvent { at, action });
    }
    Ok(SignalScript { events })
}

fn convert_order(raw: RawOrder, n: usize, tick_size: f64) -> Result<EntryOrder, DataError> {
    let side = match raw.side.as_str() {
        "long" => Side::Long,
        "short" => Side::Short,
        other => {
            return Err(DataError::Script(format!(
                "event {n}: unknown side {other:?}"
            )))
        }
    };
    let rounded = round_levels(
        &RawLevels {
            limit: raw.trigger.limit,
            stop: raw.trigger.stop,
            stop_loss: raw.stop_loss,
            target: raw.target,
        },
        side,
        tick_size,
    )?;
    let trigger = match raw.trigger.kind.as_str() {
        "limit" => EntryTrigger::Limit {
            limit: rounded.limit.ok_or_else(|| {
                DataError::Script(format!("event {n}: limit trigger needs limit"))
            })?,
        },
        "stop" => EntryTrigger::Stop {
            stop: rounded
                .stop
                .ok_or_else(|| DataError::Script(format!("event {n}: stop trigger needs stop")))?,
        },
        "stop_limit" => EntryTrigger::StopLimit {
            stop: rounded
                .stop
                .ok_or_else(|| DataError::Script(format!("event {n}: stop_limit needs stop")))?,
            limit: rounded
                .limit
                .ok_or_else(|| DataError::Script(format!("event {n}: stop_limit needs limit")))?,
        },
        other => {
            return Err(DataError::Script(format!(
                "event {n}: unknown trigger {other:?}"
            )))
        }
    };
    let time_in_force = match raw.tif.as_deref() {
        None | Some("gtc") => TimeInForce::GoodTillCancelled,
        Some("next_bar") => TimeInForce::NextBarOnly,
        Some(other) => {
            return Err(DataError::Script(format!(
                "event {n}: unknown tif {other:?}"
            )))
        }
    };
    Ok(EntryOrder {
        id: raw.id.unwrap_or_else(|| format!("order-{n}")),
        side,
        trigger,
        brackets: BracketLevels {
            stop_loss: rounded.stop_loss,
            target: rounded.target,
        },
        time_in_force,
        quantity: raw.quantity.unwrap_or(1),
    })
}

// --- finer data -------------------------------------------------------------

/// One rung of the refinement ladder, e.g. ("1h", 3600).
#[derive(Debug, Clone)]
pub struct LadderLevel {
    pub label: String,
    pub period_secs: i64,
}

/// Finer-resolution candles loaded from `<dir>/<label>.csv`, one file per
/// ladder rung, finest last. Sub-candles must tile the requested parent
/// period exactly; gaps are reported as such.
pub struct CsvFinerSource {
    levels: Vec<(LadderLevel, Vec<Candle>)>,
}

impl CsvFinerSource {
    pub fn from_dir(
        dir: &Path,
        tick_size: f64,
        ladder: &[String],
        columns: &ColumnMap,
    ) -> Result<CsvFinerSource, DataError> {
        let mut levels = Vec::with_capacity(ladder.len());
        for label in ladder {
            let spec = CandleFileSpec {
                path: dir.join(format!("{label}.csv")),
                tick_size,
                columns: columns.clone(),
                period_secs: parse_resolution(label)?,
                resolution_label: label.clone(),
            };
            let candles = load_candles(&spec)?;
            levels.push((
                LadderLevel {
                    label: label.clone(),
                    period_secs: spec.period_secs,
                },
                candles,
            ));
        }
        Ok(CsvFinerSource { levels })
    }

    pub fn from_memory(levels: Vec<(LadderLevel, Vec<Candle>)>) -> CsvFinerSource {
        CsvFinerSource { levels }
    }
}

impl FinerDataSource for CsvFinerSource {
    fn sub_candles(
        &self,
        start: DateTime<Utc>,
        period_secs: i64,
        level: u32,
    ) -> Result<Vec<Candle>, RefineError> {
        let (rung, candles) = self
            .levels
            .get(level as usize)
            .ok_or(RefineError::DataGap {
                start,
                detail: format!("no ladder level {level}"),
            })?;
        let end = start + chrono::Duration::seconds(period_secs);
        let from = candles.partition_point(|c| c.timestamp < start);
        let to = candles.partition_point(|c| c.timestamp < end);
        let subs = &candles[from..to];
        // The rung must tile the window exactly: start-aligned, contiguous.
        let expected = (period_secs / rung.period_secs).max(0) as usize;
        let contiguous = subs.windows(2).all(|w| {
            w[1].timestamp == w[0].timestamp + chrono::Duration::seconds(rung.period_secs)
        });
        if subs.len() != expected || subs.first().map(|c| c.timestamp) != Some(start) || !contiguous
        {
            return Err(RefineError::DataGap {
                start,
                detail: format!(
                    "{} rows of {} at {} do not tile {period_secs}s",
                    subs.len(),
                    rung.label,
                    rung.period_secs
                ),
            });
        }
        Ok(subs.to_vec())
    }

    fn levels(&self) -> u32 {
        self.levels.len() as u32
    }
}

// --- reports ----------------------------------------------------------------

pub fn write_report_json(report: &BacktestReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serialization is total");
    bytes.push(b'\n');
    bytes
}

pub fn read_report_json(bytes: &[u8]) -> Result<BacktestReport, DataError> {
    serde_json::from_slice(bytes).map_err(|e| DataError::Script(e.to_string()))
}

pub fn write_comparison_json(comparison: &PolicyComparison) -> Vec<u8> {
    let mut bytes =
        serde_json::to_vec_pretty(comparison).expect("comparison serialization is total");
    bytes.push(b'\n');
    bytes
}

/// CSV rendering of a report, one byte blob per section.
pub struct CsvReportSections {
    pub trades: Vec<u8>,
    pub snu_log: Vec<u8>,
    pub summary: Vec<u8>,
}

pub fn write_report_csv(report: &BacktestReport) -> CsvReportSections {
    let mut trades = csv::Writer::from_writer(Vec::new());
    trades
        .write_record([
            "order_id",
            "side",
            "quantity",
            "entry_time",
            "entry_ticks",
            "entry_price",
            "exit_time",
            "exit_ticks",
            "exit_price",
            "exit_reason",
            "gross_ticks",
            "net_ticks",
            "snu_ids",
        ])
        .unwrap();
    for t in &report.trades {
        trades
            .write_record([
                t.order_id.clone(),
                format!("{:?}", t.side).to_lowercase(),
                t.quantity.to_string(),
                t.entry_time.to_rfc3339(),
                t.entry_ticks.to_string(),
                t.entry_price.to_string(),
                t.exit_time.to_rfc3339(),
                t.exit_ticks.to_string(),
                t.exit_price.to_string(),
                format!("{:?}", t.exit_reason).to_lowercase(),
                t.gross_ticks.to_string(),
                t.net_ticks.to_string(),
                t.snu_ids.join(";"),
            ])
            .unwrap();
    }

    let mut snu = csv::Writer::from_writer(Vec::new());
    snu.write_record([
        "candle_time",
        "snu_id",
        "policy",
        "chosen",
        "refinement_depth",
        "candidates",
    ])
    .unwrap();
    for e in &report.snu_log {
        let chosen = match &e.chosen {
            crate::resolver::Resolution::Outcome { outcome } => outcome.to_string(),
            crate::resolver::Resolution::Cancelled => "cancelled".to_string(),
        };
        let candidates = e
            .candidates
            .iter()
            .map(|(o, v)| format!("{o}: {v}"))
            .collect::<Vec<_>>()
            .join(";");
        snu.write_record([
            e.candle_time.to_rfc3339(),
            e.snu_id.clone(),
            e.policy.clone(),
            chosen,
            e.refinement_depth
                .map(|d| d.to_string())
                .unwrap_or_default(),
            candidates,
        ])
        .unwrap();
    }

    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["metric", "value"]).unwrap();
    let s = &report.summary;
    let pf = match s.profit_factor {
        crate::runner::ProfitFactor::Undefined => "undefined".to_string(),
        crate::runner::ProfitFactor::Infinite => "inf".to_string(),
        crate::runner::ProfitFactor::Value(v) => v.to_string(),
    };
    for (k, v) in [
        ("trade_count", s.trade_count.to_string()),
        ("win_count", s.win_count.to_string()),
        ("loss_count", s.loss_count.to_string()),
        ("win_rate", s.win_rate.to_string()),
        ("gross_total_ticks", s.gross_total_ticks.to_string()),
        ("net_total_ticks", s.net_total_ticks.to_string()),
        ("profit_factor", pf),
        ("average_trade_ticks", s.average_trade_ticks.to_string()),
        ("max_drawdown_ticks", s.max_drawdown_ticks.to_string()),
    ] {
        summary.write_record([k, &v]).unwrap();
    }

    CsvReportSections {
        trades: trades.into_inner().unwrap(),
        snu_log: snu.into_inner().unwrap(),
        summary: summary.into_inner().unwrap(),
    }
}
