//! Core market data types: tick-integer prices, candles, orders and the
//! long/short mirror transform.
//!
//! All engine arithmetic happens on integer tick counts; real prices exist
//! only at the I/O boundary (`price = ticks * tick_size`).

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A price expressed as a signed count of minimum price increments.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Ticks(pub i64);

impl Ticks {
    pub fn to_price(self, tick_size: f64) -> f64 {
        self.0 as f64 * tick_size
    }
}

impl std::fmt::Display for Ticks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::ops::Neg for Ticks {
    type Output = Ticks;
    fn neg(self) -> Ticks {
        Ticks(-self.0)
    }
}

impl std::ops::Sub for Ticks {
    type Output = i64;
    fn sub(self, rhs: Ticks) -> i64 {
        self.0 - rhs.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CandleError {
    #[error("malformed candle: {0}")]
    MalformedCandle(String),
    #[error("tick size must be positive, got {0}")]
    NonPositiveTickSize(f64),
    #[error("price {price} is not on the {tick_size} tick grid")]
    OffGridPrice { price: f64, tick_size: f64 },
}

/// One OHLC period. Prices are integer ticks; `timestamp` is the period start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candle {
    pub open: Ticks,
    pub high: Ticks,
    pub low: Ticks,
    pub close: Ticks,
    pub timestamp: DateTime<Utc>,
    pub period_secs: i64,
}

impl Candle {
    /// Candle with a placeholder timestamp, for tests and sweeps where only
    /// the OHLC shape matters.
    pub fn bare(open: i64, high: i64, low: i64, close: i64) -> Candle {
        Candle {
            open: Ticks(open),
            high: Ticks(high),
            low: Ticks(low),
            close: Ticks(close),
            timestamp: Utc.timestamp_opt(0, 0).unwrap(),
            period_secs: 86_400,
        }
    }

    pub fn period_end(&self) -> DateTime<Utc> {
        self.timestamp + chrono::Duration::seconds(self.period_secs)
    }

    pub fn contains_instant(&self, t: DateTime<Utc>) -> bool {
        t >= self.timestamp && t < self.period_end()
    }
}

/// Checks the OHLC ordering invariants: low <= min(open, close),
/// high >= max(open, close), low <= high.
pub fn validate_candle(c: &Candle) -> Result<Candle, CandleError> {
    if c.low > c.high {
        return Err(CandleError::MalformedCandle(format!(
            "low {} above high {}",
            c.low, c.high
        )));
    }
    if c.open < c.low || c.open > c.high {
        return Err(CandleError::MalformedCandle(format!(
            "open {} outside [{}, {}]",
            c.open, c.low, c.high
        )));
    }
    if c.close < c.low || c.close > c.high {
        return Err(CandleError::MalformedCandle(format!(
            "close {} outside [{}, {}]",
            c.close, c.low, c.high
        )));
    }
    Ok(*c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    /// +1 for long, -1 for short; comparisons against levels multiply by this.
    pub fn dir(self) -> i64 {
        match self {
            Side::Long => 1,
            Side::Short => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeInForce {
    NextBarOnly,
    #[default]
    GoodTillCancelled,
}

/// Optional protective exit levels attached to an entry order or position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct BracketLevels {
    pub stop_loss: Option<Ticks>,
    pub target: Option<Ticks>,
}

impl BracketLevels {
    pub fn none() -> BracketLevels {
        BracketLevels::default()
    }

    pub fn with(stop_loss: Option<i64>, target: Option<i64>) -> BracketLevels {
        BracketLevels {
            stop_loss: stop_loss.map(Ticks),
            target: target.map(Ticks),
        }
    }
}

/// The entry condition of an order. Levels are already-rounded tick values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntryTrigger {
    /// Fills once price trades at the limit level or beyond (below, for longs).
    Limit { limit: Ticks },
    /// Fills once price trades at the stop level or beyond (above, for longs).
    Stop { stop: Ticks },
    /// Touching the stop level arms a limit order at `limit`.
    StopLimit { stop: Ticks, limit: Ticks },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryOrder {
    pub id: String,
    pub side: Side,
    pub trigger: EntryTrigger,
    pub brackets: BracketLevels,
    pub time_in_force: TimeInForce,
    /// Carried through to the trade log; decision logic is quantity-independent.
    pub quantity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Filled,
    Cancelled,
    Expired,
    IgnoredSnu,
}

/// Lifecycle of a pending entry order. Transitions only move forward:
/// Pending -> Armed (stop-limit) -> Filled -> Done.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderState {
    Pending,
    Armed,
    Filled(Position),
    Done(DoneReason),
}

impl OrderState {
    /// Whether moving to `next` is a legal forward transition.
    pub fn can_transition(&self, next: &OrderState) -> bool {
        match (self, next) {
            (_, OrderState::Done(_)) => !matches!(self, OrderState::Done(_)),
            (OrderState::Pending, OrderState::Armed) => true,
            (OrderState::Pending | OrderState::Armed, OrderState::Filled(_)) => true,
            _ => false,
        }
    }
}

/// An open position carried across candles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub side: Side,
    pub entry_price: Ticks,
    pub entry_time: DateTime<Utc>,
    pub brackets: BracketLevels,
    pub quantity: u32,
}

/// Role a raw price level plays in an order; determines its rounding direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelRole {
    EntryLimit,
    EntryStop,
    StopLoss,
    Target,
}

/// Snaps one raw price to the tick grid. For longs, entry stops and targets
/// round up while limits and stop losses round down; short sides are
/// exchanged. Values already on the grid are unchanged.
pub fn round_level(
    price: f64,
    role: LevelRole,
    side: Side,
    tick_size: f64,
) -> Result<Ticks, CandleError> {
    if tick_size <= 0.0 || tick_size.is_nan() {
        return Err(CandleError::NonPositiveTickSize(tick_size));
    }
    let scaled = price / tick_size;
    let nearest = scaled.round();
    if (scaled - nearest).abs() < 1e-6 {
        return Ok(Ticks(nearest as i64));
    }
    let up = match (side, role) {
        (Side::Long, LevelRole::EntryStop | LevelRole::Target) => true,
        (Side::Long, LevelRole::EntryLimit | LevelRole::StopLoss) => false,
        (Side::Short, LevelRole::EntryStop | LevelRole::Target) => false,
        (Side::Short, LevelRole::EntryLimit | LevelRole::StopLoss) => true,
    };
    let rounded = if up { scaled.ceil() } else { scaled.floor() };
    Ok(Ticks(rounded as i64))
}

/// Raw (real-price) order levels prior to grid snapping.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawLevels {
    pub limit: Option<f64>,
    pub stop: Option<f64>,
    pub stop_loss: Option<f64>,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundedLevels {
    pub limit: Option<Ticks>,
    pub stop: Option<Ticks>,
    pub stop_loss: Option<Ticks>,
    pub target: Option<Ticks>,
}

/// Rounds every present level per its role and the order side.
pub fn round_levels(
    raw: &RawLevels,
    side: Side,
    tick_size: f64,
) -> Result<RoundedLevels, CandleError> {
    Ok(RoundedLevels {
        limit: raw
            .limit
            .map(|p| round_level(p, LevelRole::EntryLimit, side, tick_size))
            .transpose()?,
        stop: raw
            .stop
            .map(|p| round_level(p, LevelRole::EntryStop, side, tick_size))
            .transpose()?,
        stop_loss: raw
            .stop_loss
            .map(|p| round_level(p, LevelRole::StopLoss, side, tick_size))
            .transpose()?,
        target: raw
            .target
            .map(|p| round_level(p, LevelRole::Target, side, tick_size))
            .transpose()?,
    })
}

/// Converts an exact on-grid price to ticks; rejects off-grid values.
/// Tolerance is 1e-6 of a tick.
pub fn price_to_ticks(price: f64, tick_size: f64) -> Result<Ticks, CandleError> {
    if tick_size <= 0.0 || tick_size.is_nan() {
        return Err(CandleError::NonPositiveTickSize(tick_size));
    }
    let scaled = price / tick_size;
    let nearest = scaled.round();
    if (scaled - nearest).abs() > 1e-6 {
        return Err(CandleError::OffGridPrice { price, tick_size });
    }
    Ok(Ticks(nearest as i64))
}

/// How an order's level configuration relates to the normal decision trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    Normal,
    /// The levels can never produce a sensible trade; reject at submission.
    CancelOrder,
    /// Limit with t* <= l*, or stop with b* <= s*: behaves like a market
    /// entry or an immediate round trip depending on the evaluation candle's
    /// open (see [`resolve_open_dependent`]).
    OpenDependent,
}

/// What an open-dependent order does on a concrete candle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenDependentAction {
    /// Position opens at the candle open; hand over to active-position logic.
    MarketEquivalent,
    /// Entry and exit coincide at `price` once the entry level is touched.
    ImmediateExitAt(Ticks),
    /// Entry level not touched this candle; the order stays pending.
    NotTriggered,
}

/// Classifies degenerate bracket configurations. Total: every order maps to
/// exactly one class. Short orders are classified via their mirror.
pub fn classify_degenerate(order: &EntryOrder) -> Degeneracy {
    if order.side == Side::Short {
        return classify_degenerate(&order.mirror());
    }
    let BracketLevels { stop_loss, target } = order.brackets;
    if let (Some(s), Some(t)) = (stop_loss, target) {
        if t <= s {
            return Degeneracy::CancelOrder;
        }
    }
    match order.trigger {
        EntryTrigger::Limit { limit } => {
            if stop_loss.is_some_and(|s| s >= limit) {
                Degeneracy::CancelOrder
            } else if target.is_some_and(|t| t <= limit) {
                Degeneracy::OpenDependent
            } else {
                Degeneracy::Normal
            }
        }
        EntryTrigger::Stop { stop } => {
            if target.is_some_and(|t| t <= stop) {
                Degeneracy::CancelOrder
            } else if stop_loss.is_some_and(|s| stop <= s) {
                Degeneracy::OpenDependent
            } else {
                Degeneracy::Normal
            }
        }
        EntryTrigger::StopLimit { stop, limit } => {
            let min_entry = stop.min(limit);
            if stop_loss.is_some_and(|s| s >= min_entry) || target.is_some_and(|t| t <= limit) {
                Degeneracy::CancelOrder
            } else {
                Degeneracy::Normal
            }
        }
    }
}

/// Decides what an [`Degeneracy::OpenDependent`] order does on `c`.
pub fn resolve_open_dependent(order: &EntryOrder, c: &Candle) -> OpenDependentAction {
    if order.side == Side::Short {
        return match resolve_open_dependent(&order.mirror(), &c.mirror()) {
            OpenDependentAction::ImmediateExitAt(p) => OpenDependentAction::ImmediateExitAt(-p),
            other => other,
        };
    }
    match order.trigger {
        // t* <= l*: an open below t* is a plain market entry; otherwise any
        // fill is at or above the target and closes on the spot.
        EntryTrigger::Limit { limit } => {
            let t = order
                .brackets
                .target
                .expect("open-dependent limit has a target");
            if c.open < t {
                OpenDependentAction::MarketEquivalent
            } else if c.low <= limit {
                OpenDependentAction::ImmediateExitAt(c.open.min(limit))
            } else {
                OpenDependentAction::NotTriggered
            }
        }
        // b* <= s*: an open above b* is a market entry; otherwise a touch of
        // b* is instantly stopped out.
        EntryTrigger::Stop { stop } => {
            if c.open > stop {
                OpenDependentAction::MarketEquivalent
            } else if c.high >= stop {
                OpenDependentAction::ImmediateExitAt(stop)
            } else {
                OpenDependentAction::NotTriggered
            }
        }
        EntryTrigger::StopLimit { .. } => OpenDependentAction::NotTriggered,
    }
}

/// Price-axis reflection around tick 0. Mirroring maps long to short while
/// preserving every level's role, and is an involution.
pub trait Mirror {
    fn mirror(&self) -> Self;
}

impl Mirror for Ticks {
    fn mirror(&self) -> Ticks {
        -*self
    }
}

impl Mirror for Candle {
    fn mirror(&self) -> Candle {
        Candle {
            open: -self.open,
            high: -self.low,
            low: -self.high,
            close: -self.close,
            timestamp: self.timestamp,
            period_secs: self.period_secs,
        }
    }
}

impl Mirror for Side {
    fn mirror(&self) -> Side {
        match self {
            Side::Long => Side::Short,
            Side::Short => Side::Long,
        }
    }
}

impl Mirror for BracketLevels {
    fn mirror(&self) -> BracketLevels {
        BracketLevels {
            stop_loss: self.stop_loss.map(|s| -s),
            target: self.target.map(|t| -t),
        }
    }
}

impl Mirror for EntryTrigger {
    fn mirror(&self) -> EntryTrigger {
        match *self {
            EntryTrigger::Limit { limit } => EntryTrigger::Limit { limit: -limit },
            EntryTrigger::Stop { stop } => EntryTrigger::Stop { stop: -stop },
            EntryTrigger::StopLimit { stop, limit } => EntryTrigger::StopLimit {
                stop: -stop,
                limit: -limit,
            },
        }
    }
}

impl Mirror for EntryOrder {
    fn mirror(&self) -> EntryOrder {
        EntryOrder {
            id: self.id.clone(),
            side: self.side.mirror(),
            trigger: self.trigger.mirror(),
            brackets: self.brackets.mirror(),
            time_in_force: self.time_in_force,
            quantity: self.quantity,
        }
    }
}

impl Mirror for Position {
    fn mirror(&self) -> Position {
        Position {
            side: self.side.mirror(),
            entry_price: -self.entry_price,
            entry_time: self.entry_time,
            brackets: self.brackets.mirror(),
            quantity: self.quantity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn limit_order(limit: i64, stop_loss: Option<i64>, target: Option<i64>) -> EntryOrder {
        EntryOrder {
            id: "t".into(),
            side: Side::Long,
            trigger: EntryTrigger::Limit {
                limit: Ticks(limit),
            },
            brackets: BracketLevels::with(stop_loss, target),
            time_in_force: TimeInForce::GoodTillCancelled,
            quantity: 1,
        }
    }

    fn stop_order(stop: i64, stop_loss: Option<i64>, target: Option<i64>) -> EntryOrder {
        EntryOrder {
            trigger: EntryTrigger::Stop { stop: Ticks(stop) },
            ..limit_order(0, stop_loss, target)
        }
    }

    #[test]
    fn validate_accepts_normal_candle() {
        assert!(validate_candle(&Candle::bare(10, 12, 9, 11)).is_ok());
    }

    #[test]
    fn validate_rejects_high_below_open() {
        let err = validate_candle(&Candle::bare(10, 9, 9, 9)).unwrap_err();
        assert!(matches!(err, CandleError::MalformedCandle(_)));
    }

    #[test]
    fn validate_accepts_doji() {
        assert!(validate_candle(&Candle::bare(5, 5, 5, 5)).is_ok());
    }

    #[test]
    fn round_long_target_up() {
        let t = round_level(10.10, LevelRole::Target, Side::Long, 0.25).unwrap();
        assert_eq!(t, Ticks(41)); // 10.25
    }

    #[test]
    fn round_long_stop_loss_down() {
        let s = round_level(9.87, LevelRole::StopLoss, Side::Long, 0.25).unwrap();
        assert_eq!(s, Ticks(39)); // 9.75
    }

    #[test]
    fn round_on_grid_unchanged() {
        let l = round_level(8.00, LevelRole::EntryLimit, Side::Long, 0.25).unwrap();
        assert_eq!(l, Ticks(32));
    }

    #[test]
    fn round_rejects_bad_tick_size() {
        assert_eq!(
            round_level(1.0, LevelRole::Target, Side::Long, 0.0),
            Err(CandleError::NonPositiveTickSize(0.0))
        );
    }

    #[test]
    fn price_to_ticks_rejects_off_grid() {
        assert!(matches!(
            price_to_ticks(10.03, 0.25),
            Err(CandleError::OffGridPrice { .. })
        ));
        assert_eq!(price_to_ticks(10.0, 0.25).unwrap(), Ticks(40));
    }

    #[test]
    fn classify_limit_stop_loss_above_limit_cancels() {
        assert_eq!(
            classify_degenerate(&limit_order(8, Some(9), None)),
            Degeneracy::CancelOrder
        );
    }

    #[test]
    fn classify_limit_target_below_limit_is_open_dependent() {
        let order = limit_order(8, None, Some(7));
        assert_eq!(classify_degenerate(&order), Degeneracy::OpenDependent);
        // Next candle opening below the target: plain market entry.
        assert_eq!(
            resolve_open_dependent(&order, &Candle::bare(6, 8, 5, 7)),
            OpenDependentAction::MarketEquivalent
        );
    }

    #[test]
    fn classify_stop_with_stop_loss_above_is_market_equivalent_on_gap() {
        let order = stop_order(12, Some(13), None);
        assert_eq!(classify_degenerate(&order), Degeneracy::OpenDependent);
        assert_eq!(
            resolve_open_dependent(&order, &Candle::bare(14, 15, 13, 14)),
            OpenDependentAction::MarketEquivalent
        );
    }

    #[test]
    fn classify_stop_target_at_or_below_trigger_cancels() {
        assert_eq!(
            classify_degenerate(&stop_order(12, None, Some(12))),
            Degeneracy::CancelOrder
        );
    }

    #[test]
    fn order_state_transitions_only_move_forward() {
        let position = Position {
            side: Side::Long,
            entry_price: Ticks(10),
            entry_time: Utc.timestamp_opt(0, 0).unwrap(),
            brackets: BracketLevels::none(),
            quantity: 1,
        };
        let pending = OrderState::Pending;
        let armed = OrderState::Armed;
        let filled = OrderState::Filled(position);
        let done = OrderState::Done(DoneReason::Filled);
        assert!(pending.can_transition(&armed));
        assert!(pending.can_transition(&filled));
        assert!(armed.can_transition(&filled));
        assert!(pending.can_transition(&done));
        assert!(filled.can_transition(&done));
        // Nothing moves backwards, and done is terminal.
        assert!(!armed.can_transition(&pending));
        assert!(!filled.can_transition(&armed));
        assert!(!filled.can_transition(&pending));
        assert!(!done.can_transition(&pending));
        assert!(!done.can_transition(&OrderState::Done(DoneReason::Cancelled)));
    }

    #[test]
    fn mirror_candle_swaps_extremes() {
        let m = Candle::bare(10, 12, 9, 11).mirror();
        assert_eq!(
            (m.open, m.high, m.low, m.close),
            (Ticks(-10), Ticks(-9), Ticks(-12), Ticks(-11))
        );
    }

    #[test]
    fn mirror_long_limit_to_short() {
        let m = limit_order(8, None, None).mirror();
        assert_eq!(m.side, Side::Short);
        assert_eq!(m.trigger, EntryTrigger::Limit { limit: Ticks(-8) });
    }

    proptest! {
        #[test]
        fn mirror_is_involution_on_candles(o in -20i64..20, spread_h in 0i64..8, spread_l in 0i64..8, c_off in -8i64..8) {
            let high = o.max(o + c_off) + spread_h;
            let low = o.min(o + c_off) - spread_l;
            let candle = Candle::bare(o, high, low, o + c_off);
            prop_assert!(validate_candle(&candle.mirror()).is_ok());
            prop_assert_eq!(candle.mirror().mirror(), candle);
        }

        #[test]
        fn mirror_is_involution_on_orders(limit in -10i64..10, sl in -20i64..-11, tp in 11i64..20) {
            let order = limit_order(limit, Some(sl), Some(tp));
            prop_assert_eq!(order.mirror().mirror(), order);
        }

        #[test]
        fn rounding_is_idempotent(price in -50.0f64..50.0, role_ix in 0usize..4, short in proptest::bool::ANY) {
            let role = [LevelRole::EntryLimit, LevelRole::EntryStop, LevelRole::StopLoss, LevelRole::Target][role_ix];
            let side = if short { Side::Short } else { Side::Long };
            let tick = 0.25;
            let once = round_level(price, role, side, tick).unwrap();
            let twice = round_level(once.to_price(tick), role, side, tick).unwrap();
            prop_assert_eq!(once, twice);
        }

        // Rounding must not flip any decision predicate: comparing a candle
        // price against the raw level and against the snapped level agrees.
        #[test]
        fn rounding_preserves_decisions(level in -12.0f64..12.0, candle_ticks in -12i64..12) {
            let tick = 1.0;
            let p = Ticks(candle_ticks);
            // Long entry limit / stop loss fire at price <= level: floor keeps it.
            for role in [LevelRole::EntryLimit, LevelRole::StopLoss] {
                let snapped = round_level(level, role, Side::Long, tick).unwrap();
                prop_assert_eq!((p.0 as f64) <= level + 1e-9, p <= snapped);
            }
            // Long entry stop / target fire at price >= level: ceil keeps it.
            for role in [LevelRole::EntryStop, LevelRole::Target] {
                let snapped = round_level(level, role, Side::Long, tick).unwrap();
                prop_assert_eq!((p.0 as f64) >= level - 1e-9, p >= snapped);
            }
        }
    }
}
