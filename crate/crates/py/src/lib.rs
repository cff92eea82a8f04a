//! Python bindings: candle and order types, per-candle evaluation, the
//! path oracle, policy resolution and whole-backtest runs.
//!
//! Prices at this boundary are integer ticks except where a tick size is
//! taken explicitly (run_backtest, which reads real-price files).

use candlebt_core::io::{
    fingerprint_candles, load_candles, load_script, parse_resolution, write_report_json,
    CandleFileSpec, ColumnMap, CsvFinerSource,
};
use candlebt_core::resolver::{
    resolve as resolve_impl, Fallback, FinerDataSource, Resolution, SnuPolicy,
};
use candlebt_core::runner::{run as run_impl, RunConfig};
use candlebt_core::sweep::{run_sweep, SweepConfig};
use candlebt_core::{
    evaluate_subject, oracle_outcomes, BracketLevels, CandleOutcome, EntryOrder, EntryTrigger,
    EvalState, EvaluationResult, Mirror, Side, Subject, Ticks, TimeInForce,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::PathBuf;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One OHLC candle in integer ticks.
#[pyclass(name = "Candle", skip_from_py_object)]
#[derive(Clone)]
struct PyCandle {
    inner: candlebt_core::Candle,
}

#[pymethods]
impl PyCandle {
    #[new]
    #[pyo3(signature = (open, high, low, close, timestamp=0, period_secs=86_400))]
    fn new(
        open: i64,
        high: i64,
        low: i64,
        close: i64,
        timestamp: i64,
        period_secs: i64,
    ) -> PyResult<Self> {
        let inner = candlebt_core::Candle {
            open: Ticks(open),
            high: Ticks(high),
            low: Ticks(low),
            close: Ticks(close),
            timestamp: chrono::DateTime::from_timestamp(timestamp, 0)
                .ok_or_else(|| value_err("bad timestamp"))?,
            period_secs,
        };
        candlebt_core::validate_candle(&inner).map_err(value_err)?;
        Ok(PyCandle { inner })
    }

    #[getter]
    fn open(&self) -> i64 {
        self.inner.open.0
    }

    #[getter]
    fn high(&self) -> i64 {
        self.inner.high.0
    }

    #[getter]
    fn low(&self) -> i64 {
        self.inner.low.0
    }

    #[getter]
    fn close(&self) -> i64 {
        self.inner.close.0
    }

    fn mirror(&self) -> PyCandle {
        PyCandle {
            inner: self.inner.mirror(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Candle(open={}, high={}, low={}, close={})",
            self.inner.open, self.inner.high, self.inner.low, self.inner.close
        )
    }
}

fn parse_side(side: &str) -> PyResult<Side> {
    match side {
        "long" => Ok(Side::Long),
        "short" => Ok(Side::Short),
        other => Err(value_err(format!("unknown side {other:?}"))),
    }
}

/// An entry order: trigger levels in ticks, optional brackets.
#[pyclass(name = "Order", skip_from_py_object)]
#[derive(Clone)]
struct PyOrder {
    inner: EntryOrder,
}

#[pymethods]
impl PyOrder {
    #[staticmethod]
    #[pyo3(signature = (limit, stop_loss=None, target=None, side="long", id="order"))]
    fn limit(
        limit: i64,
        stop_loss: Option<i64>,
        target: Option<i64>,
        side: &str,
        id: &str,
    ) -> PyResult<Self> {
        Ok(PyOrder {
            inner: EntryOrder {
                id: id.to_string(),
                side: parse_side(side)?,
                trigger: EntryTrigger::Limit {
                    limit: Ticks(limit),
                },
                brackets: BracketLevels::with(stop_loss, target),
                time_in_force: TimeInForce::GoodTillCancelled,
                quantity: 1,
            },
        })
    }

    #[staticmethod]
    #[pyo3(signature = (stop, stop_loss=None, target=None, side="long", id="order"))]
    fn stop(
        stop: i64,
        stop_loss: Option<i64>,
        target: Option<i64>,
        side: &str,
        id: &str,
    ) -> PyResult<Self> {
        Ok(PyOrder {
            inner: EntryOrder {
                id: id.to_string(),
                side: parse_side(side)?,
                trigger: EntryTrigger::Stop { stop: Ticks(stop) },
                brackets: BracketLevels::with(stop_loss, target),
                time_in_force: TimeInForce::GoodTillCancelled,
                quantity: 1,
            },
        })
    }

    #[staticmethod]
    #[pyo3(signature = (stop, limit, stop_loss=None, target=None, side="long", id="order"))]
    fn stop_limit(
        stop: i64,
        limit: i64,
        stop_loss: Option<i64>,
        target: Option<i64>,
        side: &str,
        id: &str,
    ) -> PyResult<Self> {
        Ok(PyOrder {
            inner: EntryOrder {
                id: id.to_string(),
                side: parse_side(side)?,
                trigger: EntryTrigger::StopLimit {
                    stop: Ticks(stop),
                    limit: Ticks(limit),
                },
                brackets: BracketLevels::with(stop_loss, target),
                time_in_force: TimeInForce::GoodTillCancelled,
                quantity: 1,
            },
        })
    }

    fn mirror(&self) -> PyOrder {
        PyOrder {
            inner: self.inner.mirror(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Order({:?})", self.inner.trigger)
    }
}

/// One realizable outcome of a candle evaluation.
#[pyclass(name = "Outcome", skip_from_py_object)]
#[derive(Clone)]
struct PyOutcome {
    inner: CandleOutcome,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            CandleOutcome::NoTrigger => "no_trigger",
            CandleOutcome::ArmedOnly => "armed_only",
            CandleOutcome::OpenAtClose { .. } => "open_at_close",
            CandleOutcome::ExitStop { .. } => "exit_stop",
            CandleOutcome::ExitTarget { .. } => "exit_target",
            CandleOutcome::ImmediateRoundTrip { .. } => "immediate_round_trip",
            CandleOutcome::StillOpen => "still_open",
            CandleOutcome::StoppedOut { .. } => "stopped_out",
            CandleOutcome::TargetHit { .. } => "target_hit",
        }
    }

    #[getter]
    fn entry(&self) -> Option<i64> {
        match self.inner {
            CandleOutcome::OpenAtClose { entry }
            | CandleOutcome::ExitStop { entry, .. }
            | CandleOutcome::ExitTarget { entry, .. } => Some(entry.0),
            CandleOutcome::ImmediateRoundTrip { price } => Some(price.0),
            _ => None,
        }
    }

    #[getter]
    fn exit(&self) -> Option<i64> {
        match self.inner {
            CandleOutcome::ExitStop { exit, .. }
            | CandleOutcome::ExitTarget { exit, .. }
            | CandleOutcome::StoppedOut { exit }
            | CandleOutcome::TargetHit { exit } => Some(exit.0),
            CandleOutcome::ImmediateRoundTrip { price } => Some(price.0),
            _ => None,
        }
    }

    fn __repr__(&self) -> String {
        format!("Outcome({})", self.inner)
    }

    fn __eq__(&self, other: &PyOutcome) -> bool {
        self.inner == other.inner
    }
}

/// Result of evaluating one order or position against one candle.
#[pyclass(name = "EvalResult", skip_from_py_object)]
#[derive(Clone)]
struct PyEvalResult {
    inner: EvaluationResult,
}

#[pymethods]
impl PyEvalResult {
    #[getter]
    fn unique(&self) -> bool {
        !self.inner.is_ambiguous()
    }

    #[getter]
    fn outcomes(&self) -> Vec<PyOutcome> {
        self.inner
            .outcomes()
            .iter()
            .map(|o| PyOutcome { inner: *o })
            .collect()
    }

    #[getter]
    fn snu_id(&self) -> Option<String> {
        match &self.inner {
            EvaluationResult::Ambiguous { snu_id, .. } => Some(snu_id.to_string()),
            EvaluationResult::Unique(_) => None,
        }
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            EvaluationResult::Unique(o) => format!("EvalResult(unique, {o})"),
            EvaluationResult::Ambiguous { outcomes, snu_id } => format!(
                "EvalResult(SNU {snu_id}: {})",
                outcomes
                    .iter()
                    .map(|o| o.to_string())
                    .collect::<Vec<_>>()
                    .join(" | ")
            ),
        }
    }
}

fn subject_for(order: &PyOrder, armed: bool) -> Subject {
    Subject::Order {
        order: order.inner.clone(),
        state: if armed {
            EvalState::Armed
        } else {
            EvalState::Pending
        },
    }
}

/// Evaluates an entry order against one candle.
#[pyfunction]
#[pyo3(signature = (candle, order, armed=false))]
fn evaluate(candle: &PyCandle, order: &PyOrder, armed: bool) -> PyResult<PyEvalResult> {
    let subject = subject_for(order, armed);
    let inner = evaluate_subject(&candle.inner, &subject).map_err(value_err)?;
    Ok(PyEvalResult { inner })
}

/// Evaluates an open position (exit logic) against one candle.
#[pyfunction]
#[pyo3(signature = (candle, entry, stop_loss=None, target=None, side="long"))]
fn evaluate_position(
    candle: &PyCandle,
    entry: i64,
    stop_loss: Option<i64>,
    target: Option<i64>,
    side: &str,
) -> PyResult<PyEvalResult> {
    let position = candlebt_core::Position {
        side: parse_side(side)?,
        entry_price: Ticks(entry),
        entry_time: candle.inner.timestamp,
        brackets: BracketLevels::with(stop_loss, target),
        quantity: 1,
    };
    let inner = candlebt_core::evaluate_position(&candle.inner, &position).map_err(value_err)?;
    Ok(PyEvalResult { inner })
}

/// Exact set of outcomes realizable by some admissible tick path.
#[pyfunction]
#[pyo3(signature = (candle, order, armed=false, max_segments=candlebt_core::DEFAULT_MAX_SEGMENTS))]
fn oracle(candle: &PyCandle, order: &PyOrder, armed: bool, max_segments: usize) -> Vec<PyOutcome> {
    oracle_outcomes(&candle.inner, &subject_for(order, armed), max_segments)
        .into_iter()
        .map(|o| PyOutcome { inner: o })
        .collect()
}

fn parse_policy(policy: &str) -> PyResult<SnuPolicy> {
    match policy {
        "wc" => Ok(SnuPolicy::WorstCase),
        "bc" => Ok(SnuPolicy::BestCase),
        "ig" => Ok(SnuPolicy::Ignore),
        other => Err(value_err(format!(
            "unknown policy {other:?} (wc, bc or ig here; exact runs via run_backtest)"
        ))),
    }
}

/// Resolves an evaluation result under wc/bc/ig. Returns the chosen outcome,
/// or None when the ignore policy drops the order.
#[pyfunction]
#[pyo3(signature = (result, policy, candle, order, armed=false))]
fn resolve(
    result: &PyEvalResult,
    policy: &str,
    candle: &PyCandle,
    order: &PyOrder,
    armed: bool,
) -> PyResult<Option<PyOutcome>> {
    let subject = subject_for(order, armed);
    let (resolution, _log) = resolve_impl(
        &result.inner,
        parse_policy(policy)?,
        &candle.inner,
        &subject,
        None,
    )
    .map_err(value_err)?;
    Ok(match resolution {
        Resolution::Outcome { outcome } => Some(PyOutcome { inner: outcome }),
        Resolution::Cancelled => None,
    })
}

/// Runs a full backtest from files and returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (candles_csv, script_json, tick_size, policy="wc", resolution="1d",
                    slippage=0, fees=0, finer_dir=None, ladder=None, fallback="wc", max_depth=3))]
#[allow(clippy::too_many_arguments)]
fn run_backtest(
    candles_csv: PathBuf,
    script_json: PathBuf,
    tick_size: f64,
    policy: &str,
    resolution: &str,
    slippage: i64,
    fees: i64,
    finer_dir: Option<PathBuf>,
    ladder: Option<Vec<String>>,
    fallback: &str,
    max_depth: u32,
) -> PyResult<String> {
    let snu_policy = match policy {
        "ex" => {
            let fallback = match fallback {
                "wc" => Fallback::WorstCase,
                "bc" => Fallback::BestCase,
                other => return Err(value_err(format!("unknown fallback {other:?}"))),
            };
            SnuPolicy::Exact {
                fallback,
                max_depth,
            }
        }
        other => parse_policy(other)?,
    };
    let spec = CandleFileSpec {
        path: candles_csv,
        tick_size,
        columns: ColumnMap::default(),
        period_secs: parse_resolution(resolution).map_err(value_err)?,
        resolution_label: resolution.to_string(),
    };
    let candles = load_candles(&spec).map_err(value_err)?;
    let script = load_script(&script_json, tick_size).map_err(value_err)?;
    let refiner = match (finer_dir, ladder) {
        (Some(dir), Some(ladder)) if !ladder.is_empty() => Some(
            CsvFinerSource::from_dir(&dir, tick_size, &ladder, &ColumnMap::default())
                .map_err(value_err)?,
        ),
        _ => {
            if policy == "ex" {
                return Err(value_err("exact policy requires finer_dir and ladder"));
            }
            None
        }
    };
    let mut config = RunConfig::new(snu_policy, tick_size);
    config.slippage_ticks = slippage;
    config.fees_ticks = fees;
    config.data_fingerprint = fingerprint_candles(&candles);
    let report = run_impl(
        &candles,
        &script,
        &config,
        refiner.as_ref().map(|r| r as &dyn FinerDataSource),
    )
    .map_err(value_err)?;
    Ok(String::from_utf8(write_report_json(&report)).expect("reports are utf-8"))
}

/// Exhaustive engine-vs-oracle check; returns the counters as a dict-like
/// tuple of (cases, discrepancies, mirror_mismatches, saturation_mismatches).
#[pyfunction]
#[pyo3(signature = (radius=4, max_segments=candlebt_core::DEFAULT_MAX_SEGMENTS, saturation=true))]
fn verify_sweep(radius: i64, max_segments: usize, saturation: bool) -> (u64, u64, u64, u64) {
    let report = run_sweep(&SweepConfig {
        radius,
        max_segments,
        check_saturation: saturation,
        check_policies: true,
        max_reports: 5,
    });
    (
        report.cases,
        report.discrepancy_count,
        report.mirror_mismatches,
        report.saturation_mismatches,
    )
}

#[pymodule]
fn candlebt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCandle>()?;
    m.add_class::<PyOrder>()?;
    m.add_class::<PyOutcome>()?;
    m.add_class::<PyEvalResult>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_position, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_backtest, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sweep, m)?)?;
    Ok(())
}
