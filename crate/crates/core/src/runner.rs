//! Full historical simulation: threads order and position state across
//! candles, applies the SNU policy at every decision point, books trades
//! with slippage and fees, and emits a self-consistent report.
//!
//! Orders are submitted at a candle's close and first evaluated on the next
//! candle. The engine holds at most one order-or-position context at a
//! time; overlapping submissions are rejected and logged.

use crate::candle::{
    classify_degenerate, resolve_open_dependent, validate_candle, Candle, Degeneracy, DoneReason,
    EntryOrder, EntryTrigger, OpenDependentAction, OrderState, Position, Side, Ticks, TimeInForce,
};
use crate::engine::{evaluate_order, evaluate_position, CandleOutcome, EvalState, Subject};
use crate::resolver::{resolve, FinerDataSource, Resolution, ResolveError, SnuLogEntry, SnuPolicy};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptAction {
    Submit { order: EntryOrder },
    Cancel { order_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub action: ScriptAction,
}

/// The strategy input: a time-ordered list of order submissions and
/// cancellations. Signal generation itself is out of scope; scripts are
/// data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalScript {
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Stop,
    Target,
    EndOfData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub order_id: String,
    pub side: Side,
    pub quantity: u32,
    pub entry_time: DateTime<Utc>,
    pub entry_ticks: Ticks,
    pub entry_price: f64,
    pub exit_time: DateTime<Utc>,
    pub exit_ticks: Ticks,
    pub exit_price: f64,
    pub exit_reason: ExitReason,
    pub gross_ticks: i64,
    /// gross - 2 * slippage - fees, per round trip.
    pub net_ticks: i64,
    /// SNU ids resolved during this trade's life, entry and exits.
    pub snu_ids: Vec<String>,
}

/// Profit factor with explicit markers for the degenerate cases: no trades
/// at all (undefined) and no losing trades (infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfitFactor {
    Undefined,
    Infinite,
    Value(f64),
}

impl Serialize for ProfitFactor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ProfitFactor::Undefined => s.serialize_none(),
            ProfitFactor::Infinite => s.serialize_str("inf"),
            ProfitFactor::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ProfitFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Option::<serde_json::Value>::deserialize(d)?;
        match raw {
            None | Some(serde_json::Value::Null) => Ok(ProfitFactor::Undefined),
            Some(serde_json::Value::String(s)) if s == "inf" => Ok(ProfitFactor::Infinite),
            Some(serde_json::Value::Number(n)) => {
                Ok(ProfitFactor::Value(n.as_f64().ok_or_else(|| {
                    serde::de::Error::custom("bad profit factor")
                })?))
            }
            other => Err(serde::de::Error::custom(format!(
                "bad profit factor: {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trade_count: u64,
    pub win_count: u64,
    pub loss_count: u64,
    pub win_rate: f64,
    pub gross_total_ticks: i64,
    pub net_total_ticks: i64,
    pub profit_factor: ProfitFactor,
    pub average_trade_ticks: f64,
    /// Largest peak-to-trough dip of cumulative net P&L, in ticks.
    pub max_drawdown_ticks: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub policy: String,
    pub tick_size: f64,
    pub slippage_ticks: i64,
    pub fees_ticks: i64,
    pub data_fingerprint: String,
    /// Tie-break rule applied on equal-value SNU candidates.
    pub tie_break: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: ConfigEcho,
    pub trades: Vec<TradeRecord>,
    pub snu_log: Vec<SnuLogEntry>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub policy: SnuPolicy,
    pub tick_size: f64,
    pub slippage_ticks: i64,
    pub fees_ticks: i64,
    pub data_fingerprint: String,
}

impl RunConfig {
    pub fn new(policy: SnuPolicy, tick_size: f64) -> RunConfig {
        RunConfig {
            policy,
            tick_size,
            slippage_ticks: 0,
            fees_ticks: 0,
            data_fingerprint: String::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("script event at {at} is outside the candle series")]
    ScriptOutOfRange { at: DateTime<Utc> },
    #[error("invalid candle data: {0}")]
    InvalidData(String),
    #[error("SNU resolution failed: {0}")]
    Resolve(#[from] ResolveError),
}

struct OpenTrade {
    order_id: String,
    side: Side,
    quantity: u32,
    entry_time: DateTime<Utc>,
    entry: Ticks,
    snu_ids: Vec<String>,
}

/// The single live order-or-position context. `trade` is present exactly
/// while the state is Filled.
struct Context {
    order: EntryOrder,
    state: OrderState,
    trade: Option<OpenTrade>,
}

impl Context {
    fn advance(&mut self, next: OrderState) {
        debug_assert!(
            self.state.can_transition(&next),
            "illegal order state transition {:?} -> {:?}",
            self.state,
            next
        );
        self.state = next;
    }
}

struct RunState<'a> {
    config: &'a RunConfig,
    context: Option<Context>,
    trades: Vec<TradeRecord>,
    snu_log: Vec<SnuLogEntry>,
    warnings: Vec<String>,
}

impl<'a> RunState<'a> {
    fn book(&mut self, open: OpenTrade, exit_time: DateTime<Utc>, exit: Ticks, reason: ExitReason) {
        let dir = open.side.dir();
        let gross = dir * (exit - open.entry) * open.quantity as i64;
        let net = gross - 2 * self.config.slippage_ticks - self.config.fees_ticks;
        self.trades.push(TradeRecord {
            order_id: open.order_id,
            side: open.side,
            quantity: open.quantity,
            entry_time: open.entry_time,
            entry_ticks: open.entry,
            entry_price: open.entry.to_price(self.config.tick_size),
            exit_time,
            exit_ticks: exit,
            exit_price: exit.to_price(self.config.tick_size),
            exit_reason: reason,
            gross_ticks: gross,
            net_ticks: net,
            snu_ids: open.snu_ids,
        });
    }

    fn log_snu(&mut self, entry: Option<SnuLogEntry>) -> Option<String> {
        entry.map(|e| {
            let id = e.snu_id.clone();
            self.snu_log.push(e);
            id
        })
    }
}

/// Runs one backtest. `refiner` is required when the policy is exact and
/// SNUs occur.
pub fn run(
    candles: &[Candle],
    script: &SignalScript,
    config: &RunConfig,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<BacktestReport, RunError> {
    for c in candles {
        validate_candle(c).map_err(|e| RunError::InvalidData(e.to_string()))?;
    }
    if candles.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(RunError::InvalidData(
            "timestamps not strictly ascending".into(),
        ));
    }

    // Map each event to the index of the candle at whose close it applies.
    let mut events_by_index: Vec<Vec<&ScriptAction>> = vec![Vec::new(); candles.len()];
    for ev in &script.events {
        let idx =
            candle_index_for(candles, ev.at).ok_or(RunError::ScriptOutOfRange { at: ev.at })?;
        events_by_index[idx].push(&ev.action);
    }

    let mut st = RunState {
        config,
        context: None,
        trades: Vec::new(),
        snu_log: Vec::new(),
        warnings: Vec::new(),
    };

    for (i, candle) in candles.iter().enumerate() {
        if let Some(ctx) = st.context.take() {
            step_context(&mut st, candle, ctx, refiner)?;
        }
        for action in &events_by_index[i] {
            apply_script_action(&mut st, action, candle);
        }
    }

    // End of data: close any open position at the last close, flagged.
    if let Some(ctx) = st.context.take() {
        if let Some(open) = ctx.trade {
            let last = candles.last().expect("position implies candles");
            st.book(open, last.timestamp, last.close, ExitReason::EndOfData);
            st.warnings
                .push("open position closed out at end of data".to_string());
        }
    }

    let summary = compute_summary(&st.trades);
    Ok(BacktestReport {
        config: ConfigEcho {
            policy: config.policy.short_name().to_string(),
            tick_size: config.tick_size,
            slippage_ticks: config.slippage_ticks,
            fees_ticks: config.fees_ticks,
            data_fingerprint: config.data_fingerprint.clone(),
            tie_break: "equal-value SNU candidates prefer the flat outcome".to_string(),
        },
        trades: st.trades,
        snu_log: st.snu_log,
        summary,
        warnings: st.warnings,
    })
}

/// Index of the last candle whose period start is <= `at`, provided `at`
/// falls before the end of the series.
fn candle_index_for(candles: &[Candle], at: DateTime<Utc>) -> Option<usize> {
    if candles.is_empty() {
        return None;
    }
    let last = candles.last().unwrap();
    if at < candles[0].timestamp || at >= last.period_end() {
        return None;
    }
    let idx = candles.partition_point(|c| c.timestamp <= at);
    Some(idx - 1)
}

fn filled_context(
    candle: &Candle,
    order: EntryOrder,
    entry: Ticks,
    snu_ids: Vec<String>,
) -> Context {
    let position = Position {
        side: order.side,
        entry_price: entry,
        entry_time: candle.timestamp,
        brackets: order.brackets,
        quantity: order.quantity,
    };
    let trade = OpenTrade {
        order_id: order.id.clone(),
        side: order.side,
        quantity: order.quantity,
        entry_time: candle.timestamp,
        entry,
        snu_ids,
    };
    let mut ctx = Context {
        order,
        state: OrderState::Pending,
        trade: Some(trade),
    };
    ctx.state = OrderState::Filled(position);
    ctx
}

/// Advances the live context by one candle.
fn step_context(
    st: &mut RunState,
    candle: &Candle,
    ctx: Context,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<(), RunError> {
    match &ctx.state {
        OrderState::Filled(_) => step_filled(st, candle, ctx, refiner),
        OrderState::Pending | OrderState::Armed => step_waiting(st, candle, ctx, refiner),
        OrderState::Done(_) => unreachable!("done contexts are dropped immediately"),
    }
}

fn step_filled(
    st: &mut RunState,
    candle: &Candle,
    mut ctx: Context,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<(), RunError> {
    let OrderState::Filled(position) = ctx.state.clone() else {
        unreachable!()
    };
    let subject = Subject::Active(position.clone());
    let result =
        evaluate_position(candle, &position).expect("runner positions always have valid brackets");
    let (resolution, log) = resolve(&result, st.config.policy, candle, &subject, refiner)?;
    if let Some(id) = st.log_snu(log) {
        if let Some(trade) = &mut ctx.trade {
            trade.snu_ids.push(id);
        }
    }
    match resolution {
        Resolution::Outcome { outcome } => {
            let open = ctx.trade.take().expect("filled context carries a trade");
            match outcome {
                CandleOutcome::StillOpen => {
                    ctx.trade = Some(open);
                    st.context = Some(ctx);
                }
                CandleOutcome::StoppedOut { exit } => {
                    ctx.advance(OrderState::Done(DoneReason::Filled));
                    st.book(open, candle.timestamp, exit, ExitReason::Stop);
                }
                CandleOutcome::TargetHit { exit } => {
                    ctx.advance(OrderState::Done(DoneReason::Filled));
                    st.book(open, candle.timestamp, exit, ExitReason::Target);
                }
                other => unreachable!("active position produced {other:?}"),
            }
        }
        Resolution::Cancelled => unreachable!("resolver never cancels active positions"),
    }
    Ok(())
}

fn step_waiting(
    st: &mut RunState,
    candle: &Candle,
    mut ctx: Context,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<(), RunError> {
    if classify_degenerate(&ctx.order) == Degeneracy::OpenDependent {
        return step_open_dependent(st, candle, ctx, refiner);
    }
    let eval_state = match ctx.state {
        OrderState::Pending => EvalState::Pending,
        OrderState::Armed => EvalState::Armed,
        _ => unreachable!(),
    };
    let subject = Subject::Order {
        order: ctx.order.clone(),
        state: eval_state,
    };
    let result = evaluate_order(candle, &ctx.order, eval_state)
        .expect("degenerate orders are filtered at submission");
    let (resolution, log) = resolve(&result, st.config.policy, candle, &subject, refiner)?;
    let snu_id = st.log_snu(log);
    match resolution {
        Resolution::Cancelled => {
            ctx.advance(OrderState::Done(DoneReason::IgnoredSnu));
            st.warnings.push(format!(
                "order {}: entry SNU ignored, order dropped",
                ctx.order.id
            ));
        }
        Resolution::Outcome { outcome } => match outcome {
            CandleOutcome::NoTrigger => {
                if ctx.order.time_in_force == TimeInForce::GoodTillCancelled {
                    st.context = Some(ctx);
                } else {
                    ctx.advance(OrderState::Done(DoneReason::Expired));
                }
            }
            CandleOutcome::ArmedOnly => {
                if ctx.order.time_in_force == TimeInForce::GoodTillCancelled {
                    if ctx.state == OrderState::Pending {
                        ctx.advance(OrderState::Armed);
                    }
                    st.context = Some(ctx);
                } else {
                    ctx.advance(OrderState::Done(DoneReason::Expired));
                }
            }
            CandleOutcome::OpenAtClose { entry } => {
                let ids = snu_id.into_iter().collect();
                st.context = Some(filled_context(candle, ctx.order, entry, ids));
            }
            CandleOutcome::ExitStop { entry, exit } => {
                let ids = snu_id.into_iter().collect();
                let open = filled_context(candle, ctx.order, entry, ids)
                    .trade
                    .expect("fresh fill carries a trade");
                st.book(open, candle.timestamp, exit, ExitReason::Stop);
            }
            CandleOutcome::ExitTarget { entry, exit } => {
                let ids = snu_id.into_iter().collect();
                let open = filled_context(candle, ctx.order, entry, ids)
                    .trade
                    .expect("fresh fill carries a trade");
                st.book(open, candle.timestamp, exit, ExitReason::Target);
            }
            other => unreachable!("entry order produced {other:?}"),
        },
    }
    Ok(())
}

/// Degenerate-but-tradable orders (limit with t* <= l*, stop with b* <= s*):
/// gap opens make them market entries, otherwise any fill closes instantly.
fn step_open_dependent(
    st: &mut RunState,
    candle: &Candle,
    mut ctx: Context,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<(), RunError> {
    match resolve_open_dependent(&ctx.order, candle) {
        OpenDependentAction::MarketEquivalent => {
            let filled = filled_context(candle, ctx.order, candle.open, Vec::new());
            // Brackets are live within the entry candle itself.
            step_filled(st, candle, filled, refiner)
        }
        OpenDependentAction::ImmediateExitAt(price) => {
            let reason = match ctx.order.trigger {
                EntryTrigger::Limit { .. } => ExitReason::Target,
                _ => ExitReason::Stop,
            };
            let open = filled_context(candle, ctx.order, price, Vec::new())
                .trade
                .expect("fresh fill carries a trade");
            st.book(open, candle.timestamp, price, reason);
            Ok(())
        }
        OpenDependentAction::NotTriggered => {
            if ctx.order.time_in_force == TimeInForce::GoodTillCancelled {
                st.context = Some(ctx);
            } else {
                ctx.advance(OrderState::Done(DoneReason::Expired));
            }
            Ok(())
        }
    }
}

fn apply_script_action(st: &mut RunState, action: &ScriptAction, candle: &Candle) {
    match action {
        ScriptAction::Submit { order } => {
            if classify_degenerate(order) == Degeneracy::CancelOrder {
                st.warnings.push(format!(
                    "order {}: degenerate levels, cancelled at submission",
                    order.id
                ));
                return;
            }
            if st.context.is_some() {
                st.warnings.push(format!(
                    "order {}: overlapping position request at {} rejected",
                    order.id, candle.timestamp
                ));
                return;
            }
            st.context = Some(Context {
                order: order.clone(),
                state: OrderState::Pending,
                trade: None,
            });
        }
        ScriptAction::Cancel { order_id } => match &st.context {
            Some(ctx)
                if ctx.order.id == *order_id
                    && matches!(ctx.state, OrderState::Pending | OrderState::Armed) =>
            {
                let mut ctx = st.context.take().expect("matched above");
                ctx.advance(OrderState::Done(DoneReason::Cancelled));
            }
            Some(ctx) if ctx.order.id == *order_id => {
                st.warnings
                    .push(format!("cancel for filled order {order_id} ignored"));
            }
            _ => {
                st.warnings
                    .push(format!("cancel for unknown order {order_id} ignored"));
            }
        },
    }
}

/// Deterministic aggregation of a trade list.
pub fn compute_summary(trades: &[TradeRecord]) -> Summary {
    let trade_count = trades.len() as u64;
    let win_count = trades.iter().filter(|t| t.net_ticks > 0).count() as u64;
    let loss_count = trades.iter().filter(|t| t.net_ticks < 0).count() as u64;
    let gross_total_ticks: i64 = trades.iter().map(|t| t.gross_ticks).sum();
    let net_total_ticks: i64 = trades.iter().map(|t| t.net_ticks).sum();
    let winnings: i64 = trades.iter().map(|t| t.net_ticks.max(0)).sum();
    let losses: i64 = trades.iter().map(|t| t.net_ticks.min(0)).sum();
    let profit_factor = if trade_count == 0 {
        ProfitFactor::Undefined
    } else if losses == 0 {
        ProfitFactor::Infinite
    } else {
        ProfitFactor::Value(winnings as f64 / losses.abs() as f64)
    };
    let mut peak = 0i64;
    let mut equity = 0i64;
    let mut max_drawdown_ticks = 0i64;
    for t in trades {
        equity += t.net_ticks;
        peak = peak.max(equity);
        max_drawdown_ticks = max_drawdown_ticks.max(peak - equity);
    }
    Summary {
        trade_count,
        win_count,
        loss_count,
        win_rate: if trade_count == 0 {
            0.0
        } else {
            win_count as f64 / trade_count as f64
        },
        gross_total_ticks,
        net_total_ticks,
        profit_factor,
        average_trade_ticks: if trade_count == 0 {
            0.0
        } else {
            net_total_ticks as f64 / trade_count as f64
        },
        max_drawdown_ticks,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandleSnuRow {
    pub timestamp: DateTime<Utc>,
    /// SNU count per policy, aligned with `PolicyComparison::policies`.
    pub counts: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Divergence {
    pub per_candle_snu: Vec<CandleSnuRow>,
    pub trade_counts: Vec<u64>,
    pub net_totals: Vec<i64>,
    /// Best-case total minus worst-case total, when both policies ran.
    pub band_width_ticks: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub policies: Vec<String>,
    pub reports: Vec<BacktestReport>,
    pub divergence: Divergence,
}

/// Runs each policy on identical inputs and tabulates how they diverge.
pub fn run_policy_comparison(
    candles: &[Candle],
    script: &SignalScript,
    policies: &[SnuPolicy],
    config: &RunConfig,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<PolicyComparison, RunError> {
    let mut reports = Vec::with_capacity(policies.len());
    for policy in policies {
        let cfg = RunConfig {
            policy: *policy,
            ..config.clone()
        };
        reports.push(run(candles, script, &cfg, refiner)?);
    }
    let names: Vec<String> = policies
        .iter()
        .map(|p| p.short_name().to_string())
        .collect();

    let mut stamps: Vec<DateTime<Utc>> = reports
        .iter()
        .flat_map(|r| r.snu_log.iter().map(|e| e.candle_time))
        .collect();
    stamps.sort();
    stamps.dedup();
    let per_candle_snu = stamps
        .into_iter()
        .map(|ts| CandleSnuRow {
            timestamp: ts,
            counts: reports
                .iter()
                .map(|r| r.snu_log.iter().filter(|e| e.candle_time == ts).count() as u64)
                .collect(),
        })
        .collect();

    let wc = policies.iter().position(|p| *p == SnuPolicy::WorstCase);
    let bc = policies.iter().position(|p| *p == SnuPolicy::BestCase);
    let band_width_ticks = match (wc, bc) {
        (Some(w), Some(b)) => {
            Some(reports[b].summary.net_total_ticks - reports[w].summary.net_total_ticks)
        }
        _ => None,
    };

    Ok(PolicyComparison {
        divergence: Divergence {
            per_candle_snu,
            trade_counts: reports.iter().map(|r| r.summary.trade_count).collect(),
            net_totals: reports.iter().map(|r| r.summary.net_total_ticks).collect(),
            band_width_ticks,
        },
        policies: names,
        reports,
    })
}
