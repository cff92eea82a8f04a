//! Per-candle decision trees for entry orders and active positions.
//!
//! Each evaluator answers, from OHLC alone, what happened to one order (or
//! position) during one candle. When the four values do not pin down the
//! answer, the result is `Ambiguous` with the exact set of outcomes some
//! admissible intra-candle tick path can realize. That set is certified
//! against the brute-force path oracle (`crate::oracle`), which is the
//! correctness contract for every branch below.
//!
//! All trees are written for long orders; short orders evaluate as
//! `mirror(eval(mirror(order), mirror(candle)))`.
//!
//! Fill conventions:
//! - a limit buy fills at the first price at or below l*, so at min(open, l*);
//! - a stop buy triggers at the first price at or above b*, so at max(open, b*);
//! - brackets fire at the first post-entry touch of s*/t*, filling at the
//!   level, except when the candle already opens beyond it (fill at open);
//! - the open is processed first, and brackets are live from the instant of
//!   entry within the same candle.

use crate::candle::{
    BracketLevels, Candle, EntryOrder, EntryTrigger, Mirror, Position, Side, Ticks,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What one candle did to the order or position under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandleOutcome {
    /// Entry level never touched; order unchanged.
    NoTrigger,
    /// Stop-limit only: stop leg consumed, limit order live at the close.
    ArmedOnly,
    /// Position opened and still open at the close.
    OpenAtClose { entry: Ticks },
    /// Entered and stopped out within the candle.
    ExitStop { entry: Ticks, exit: Ticks },
    /// Entered and reached the target within the candle.
    ExitTarget { entry: Ticks, exit: Ticks },
    /// Degenerate open-and-close at one price.
    ImmediateRoundTrip { price: Ticks },
    /// Active position: no exit level touched.
    StillOpen,
    /// Active position: stop loss hit.
    StoppedOut { exit: Ticks },
    /// Active position: target hit.
    TargetHit { exit: Ticks },
}

impl CandleOutcome {
    /// True when the outcome leaves an open position at the candle close.
    pub fn leaves_position_open(&self) -> bool {
        matches!(
            self,
            CandleOutcome::OpenAtClose { .. } | CandleOutcome::StillOpen
        )
    }
}

impl std::fmt::Display for CandleOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use CandleOutcome::*;
        match self {
            NoTrigger => write!(f, "no trigger"),
            ArmedOnly => write!(f, "armed only"),
            OpenAtClose { entry } => write!(f, "open at close (entry {entry})"),
            ExitStop { entry, exit } => write!(f, "entry {entry}, stopped out at {exit}"),
            ExitTarget { entry, exit } => write!(f, "entry {entry}, target hit at {exit}"),
            ImmediateRoundTrip { price } => write!(f, "immediate round trip at {price}"),
            StillOpen => write!(f, "still open"),
            StoppedOut { exit } => write!(f, "stopped out at {exit}"),
            TargetHit { exit } => write!(f, "target hit at {exit}"),
        }
    }
}

impl Mirror for CandleOutcome {
    fn mirror(&self) -> CandleOutcome {
        use CandleOutcome::*;
        match *self {
            NoTrigger => NoTrigger,
            ArmedOnly => ArmedOnly,
            OpenAtClose { entry } => OpenAtClose { entry: -entry },
            ExitStop { entry, exit } => ExitStop {
                entry: -entry,
                exit: -exit,
            },
            ExitTarget { entry, exit } => ExitTarget {
                entry: -entry,
                exit: -exit,
            },
            ImmediateRoundTrip { price } => ImmediateRoundTrip { price: -price },
            StillOpen => StillOpen,
            StoppedOut { exit } => StoppedOut { exit: -exit },
            TargetHit { exit } => TargetHit { exit: -exit },
        }
    }
}

/// Stable identifier of an ambiguous decision-tree leaf, e.g. `LIMIT+TARGET/A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SnuId {
    pub family: &'static str,
    pub leaf: &'static str,
}

impl std::fmt::Display for SnuId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.family, self.leaf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluationResult {
    Unique(CandleOutcome),
    /// At least two distinct outcomes are realizable; sorted, no duplicates.
    Ambiguous {
        outcomes: Vec<CandleOutcome>,
        snu_id: SnuId,
    },
}

impl EvaluationResult {
    pub fn is_ambiguous(&self) -> bool {
        matches!(self, EvaluationResult::Ambiguous { .. })
    }

    pub fn outcomes(&self) -> &[CandleOutcome] {
        match self {
            EvaluationResult::Unique(o) => std::slice::from_ref(o),
            EvaluationResult::Ambiguous { outcomes, .. } => outcomes,
        }
    }
}

impl Mirror for EvaluationResult {
    fn mirror(&self) -> EvaluationResult {
        match self {
            EvaluationResult::Unique(o) => EvaluationResult::Unique(o.mirror()),
            EvaluationResult::Ambiguous { outcomes, snu_id } => EvaluationResult::Ambiguous {
                outcomes: {
                    let mut v: Vec<_> = outcomes.iter().map(Mirror::mirror).collect();
                    v.sort();
                    v
                },
                snu_id: *snu_id,
            },
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("degenerate order levels: {0}")]
    DegenerateOrder(String),
    #[error("invalid bracket levels: stop loss must lie below target")]
    InvalidBrackets,
    #[error("order state {0} cannot be evaluated for this trigger")]
    InvalidState(&'static str),
}

fn unique(o: CandleOutcome) -> EvaluationResult {
    EvaluationResult::Unique(o)
}

fn ambiguous(snu_id: SnuId, mut outcomes: Vec<CandleOutcome>) -> EvaluationResult {
    outcomes.sort();
    outcomes.dedup();
    debug_assert!(outcomes.len() >= 2, "ambiguous set must have >= 2 outcomes");
    EvaluationResult::Ambiguous { outcomes, snu_id }
}

fn family(trigger: &EntryTrigger, br: &BracketLevels) -> &'static str {
    let sl = br.stop_loss.is_some();
    let tp = br.target.is_some();
    match trigger {
        EntryTrigger::Limit { .. } => match (sl, tp) {
            (false, false) => "LIMIT",
            (true, false) => "LIMIT+SL",
            (false, true) => "LIMIT+TARGET",
            (true, true) => "LIMIT+SL+TARGET",
        },
        EntryTrigger::Stop { .. } => match (sl, tp) {
            (false, false) => "STOP",
            (true, false) => "STOP+SL",
            (false, true) => "STOP+TARGET",
            (true, true) => "STOP+SL+TARGET",
        },
        EntryTrigger::StopLimit { .. } => match (sl, tp) {
            (false, false) => "STOPLIMIT",
            (true, false) => "STOPLIMIT+SL",
            (false, true) => "STOPLIMIT+TARGET",
            (true, true) => "STOPLIMIT+SL+TARGET",
        },
    }
}

pub const FAMILY_ACTIVE_SL: &str = "ACTIVE+SL";
pub const FAMILY_ACTIVE_TARGET: &str = "ACTIVE+TARGET";
pub const FAMILY_ACTIVE_BOTH: &str = "ACTIVE+SL+TARGET";

/// Position live from the candle open at `entry` (gap fill or market-style
/// entry). Shared by the gap branches of all entry trees.
fn open_entry(c: &Candle, entry: Ticks, br: &BracketLevels, fam: &'static str) -> EvaluationResult {
    use CandleOutcome::*;
    if let Some(s) = br.stop_loss {
        if c.open <= s {
            return unique(ExitStop {
                entry,
                exit: c.open,
            });
        }
    }
    if let Some(t) = br.target {
        if c.open >= t {
            return unique(ExitTarget {
                entry,
                exit: c.open,
            });
        }
    }
    let stop_hit = br.stop_loss.is_some_and(|s| c.low <= s);
    let target_hit = br.target.is_some_and(|t| c.high >= t);
    match (stop_hit, target_hit) {
        (true, true) => ambiguous(
            SnuId {
                family: fam,
                leaf: "OPEN-BOTH",
            },
            vec![
                ExitStop {
                    entry,
                    exit: br.stop_loss.unwrap(),
                },
                ExitTarget {
                    entry,
                    exit: br.target.unwrap(),
                },
            ],
        ),
        (true, false) => unique(ExitStop {
            entry,
            exit: br.stop_loss.unwrap(),
        }),
        (false, true) => unique(ExitTarget {
            entry,
            exit: br.target.unwrap(),
        }),
        (false, false) => unique(OpenAtClose { entry }),
    }
}

/// Limit fill strictly below the open: entry happens mid-candle at l* (if at
/// all), so the candle high may precede the fill. `no_fill` distinguishes a
/// plain pending limit (NoTrigger) from an armed stop-limit (ArmedOnly).
fn mid_entry_limit(
    c: &Candle,
    limit: Ticks,
    br: &BracketLevels,
    fam: &'static str,
    no_fill: CandleOutcome,
) -> EvaluationResult {
    use CandleOutcome::*;
    debug_assert!(c.open > limit);
    if c.low > limit {
        return unique(no_fill);
    }
    let stop_hit = br.stop_loss.is_some_and(|s| c.low <= s);
    let target_reachable = br.target.is_some_and(|t| c.high >= t);
    let target_forced = br.target.is_some_and(|t| c.close >= t);
    match (stop_hit, target_reachable) {
        // Reaching the low fires the stop unless the target fired first.
        (true, true) => ambiguous(
            SnuId {
                family: fam,
                leaf: "B",
            },
            vec![
                ExitStop {
                    entry: limit,
                    exit: br.stop_loss.unwrap(),
                },
                ExitTarget {
                    entry: limit,
                    exit: br.target.unwrap(),
                },
            ],
        ),
        (true, false) => unique(ExitStop {
            entry: limit,
            exit: br.stop_loss.unwrap(),
        }),
        (false, true) if target_forced => unique(ExitTarget {
            entry: limit,
            exit: br.target.unwrap(),
        }),
        // High may have come before the fill: target or open position.
        (false, true) => ambiguous(
            SnuId {
                family: fam,
                leaf: "A",
            },
            vec![
                ExitTarget {
                    entry: limit,
                    exit: br.target.unwrap(),
                },
                OpenAtClose { entry: limit },
            ],
        ),
        (false, false) => unique(OpenAtClose { entry: limit }),
    }
}

/// Stop trigger strictly above the open: entry at b* is forced once H >= b*,
/// but the low may have been visited before the trigger.
fn mid_entry_stop(
    c: &Candle,
    stop: Ticks,
    br: &BracketLevels,
    fam: &'static str,
) -> EvaluationResult {
    use CandleOutcome::*;
    debug_assert!(c.open < stop && c.high >= stop);
    let target_hit = br.target.is_some_and(|t| c.high >= t);
    let stop_reachable = br.stop_loss.is_some_and(|s| c.low <= s);
    let stop_forced = br.stop_loss.is_some_and(|s| c.close <= s);
    match (target_hit, stop_reachable) {
        (true, true) => ambiguous(
            SnuId {
                family: fam,
                leaf: "B",
            },
            vec![
                ExitStop {
                    entry: stop,
                    exit: br.stop_loss.unwrap(),
                },
                ExitTarget {
                    entry: stop,
                    exit: br.target.unwrap(),
                },
            ],
        ),
        (true, false) => unique(ExitTarget {
            entry: stop,
            exit: br.target.unwrap(),
        }),
        (false, true) if stop_forced => unique(ExitStop {
            entry: stop,
            exit: br.stop_loss.unwrap(),
        }),
        // Low may have been made before the trigger: stop-out or still open.
        (false, true) => ambiguous(
            SnuId {
                family: fam,
                leaf: "P",
            },
            vec![
                ExitStop {
                    entry: stop,
                    exit: br.stop_loss.unwrap(),
                },
                OpenAtClose { entry: stop },
            ],
        ),
        (false, false) => unique(OpenAtClose { entry: stop }),
    }
}

/// Evaluates a long limit-buy entry on one candle.
pub fn eval_limit_entry(
    c: &Candle,
    limit: Ticks,
    br: &BracketLevels,
) -> Result<EvaluationResult, EvalError> {
    if br.stop_loss.is_some_and(|s| s >= limit) {
        return Err(EvalError::DegenerateOrder(format!(
            "stop loss >= limit {limit}"
        )));
    }
    if br.target.is_some_and(|t| t <= limit) {
        return Err(EvalError::DegenerateOrder(format!(
            "target <= limit {limit}"
        )));
    }
    let fam = family(&EntryTrigger::Limit { limit }, br);
    if c.low > limit {
        return Ok(unique(CandleOutcome::NoTrigger));
    }
    if c.open <= limit {
        Ok(open_entry(c, c.open, br, fam))
    } else {
        Ok(mid_entry_limit(c, limit, br, fam, CandleOutcome::NoTrigger))
    }
}

/// Evaluates a long stop-buy entry on one candle.
pub fn eval_stop_entry(
    c: &Candle,
    stop: Ticks,
    br: &BracketLevels,
) -> Result<EvaluationResult, EvalError> {
    if br.stop_loss.is_some_and(|s| s >= stop) {
        return Err(EvalError::DegenerateOrder(format!(
            "stop loss >= stop {stop}"
        )));
    }
    if br.target.is_some_and(|t| t <= stop) {
        return Err(EvalError::DegenerateOrder(format!("target <= stop {stop}")));
    }
    let fam = family(&EntryTrigger::Stop { stop }, br);
    if c.high < stop {
        return Ok(unique(CandleOutcome::NoTrigger));
    }
    if c.open >= stop {
        Ok(open_entry(c, c.open, br, fam))
    } else {
        Ok(mid_entry_stop(c, stop, br, fam))
    }
}

/// Order state relevant for evaluation: has the stop leg been consumed?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalState {
    Pending,
    Armed,
}

/// Armed stop-limit = a live limit order; the full limit tree applies, with
/// no-fill reported as ArmedOnly (the limit stays live at the close).
fn armed_limit(
    c: &Candle,
    limit: Ticks,
    br: &BracketLevels,
    fam: &'static str,
) -> EvaluationResult {
    if c.low > limit {
        return unique(CandleOutcome::ArmedOnly);
    }
    if c.open <= limit {
        open_entry(c, c.open, br, fam)
    } else {
        mid_entry_limit(c, limit, br, fam, CandleOutcome::ArmedOnly)
    }
}

/// Arming mid-candle with the limit below the stop leg. The low of the
/// post-arming phase is not pinned by OHLC: it ranges over [L, min(b*, C)],
/// because the candle low may have been made before arming. The candidate
/// set is the union over the three depth classes of that free low:
///   (a) dips to s* or lower (possible iff L <= s*),
///   (b) dips into (s*, l*] (possible iff L <= l* and C > s*),
///   (c) stays above l* (possible iff C > l*).
fn mid_arm_union(
    c: &Candle,
    stop: Ticks,
    limit: Ticks,
    br: &BracketLevels,
    fam: &'static str,
) -> EvaluationResult {
    use CandleOutcome::*;
    debug_assert!(c.open < stop && c.high >= stop && limit < stop);
    let target_reachable = br.target.is_some_and(|t| c.high >= t);
    let target_forced = br.target.is_some_and(|t| c.close >= t);

    let class_a = br.stop_loss.is_some_and(|s| c.low <= s);
    let class_b = c.low <= limit && br.stop_loss.is_none_or(|s| c.close > s);
    let class_c = c.close > limit;

    let mut outcomes = Vec::new();
    if class_a {
        outcomes.push(ExitStop {
            entry: limit,
            exit: br.stop_loss.unwrap(),
        });
        if target_reachable {
            outcomes.push(ExitTarget {
                entry: limit,
                exit: br.target.unwrap(),
            });
        }
    }
    if class_b {
        if target_reachable {
            outcomes.push(ExitTarget {
                entry: limit,
                exit: br.target.unwrap(),
            });
            if !target_forced {
                outcomes.push(OpenAtClose { entry: limit });
            }
        } else {
            outcomes.push(OpenAtClose { entry: limit });
        }
    }
    if class_c {
        outcomes.push(ArmedOnly);
    }
    outcomes.sort();
    outcomes.dedup();
    debug_assert!(!outcomes.is_empty());
    if outcomes.len() == 1 {
        return unique(outcomes[0]);
    }
    let leaf = match (class_a, class_b, class_c, target_reachable, target_forced) {
        (false, true, true, false, _) => "E",
        (false, true, true, true, true) => "F1",
        (false, true, true, true, false) => "F2",
        (false, true, false, true, false) => "F3",
        (true, true, true, true, false) => "F4",
        (true, true, true, true, true) => "F5",
        (true, true, true, false, _) => "F6",
        (true, true, false, false, _) => "F7",
        (true, true, false, true, true) => "F8",
        (true, true, false, true, false) => "F9",
        (true, false, false, true, _) => "F10",
        _ => "F0",
    };
    ambiguous(SnuId { family: fam, leaf }, outcomes)
}

/// Evaluates a long stop-limit entry on one candle.
///
/// Pending: the stop leg must be touched first; from that moment the limit
/// leg behaves as a live limit order. When b* <= l*, arming and filling
/// coincide (the price at b* is already at or below the limit), so the tree
/// degenerates to the stop-entry tree with entry at b*.
pub fn eval_stop_limit_entry(
    c: &Candle,
    stop: Ticks,
    limit: Ticks,
    br: &BracketLevels,
    state: EvalState,
) -> Result<EvaluationResult, EvalError> {
    let min_entry = stop.min(limit);
    if br.stop_loss.is_some_and(|s| s >= min_entry) {
        return Err(EvalError::DegenerateOrder(format!(
            "stop loss >= min(stop {stop}, limit {limit})"
        )));
    }
    if br.target.is_some_and(|t| t <= limit) {
        return Err(EvalError::DegenerateOrder(format!(
            "target <= limit {limit}"
        )));
    }
    let fam = family(&EntryTrigger::StopLimit { stop, limit }, br);

    if state == EvalState::Armed {
        return Ok(armed_limit(c, limit, br, fam));
    }
    if c.high < stop {
        return Ok(unique(CandleOutcome::NoTrigger));
    }
    if limit < stop {
        if c.open >= stop {
            // Armed at the open; O > l*, so the plain mid-candle limit tree.
            Ok(mid_entry_limit(c, limit, br, fam, CandleOutcome::ArmedOnly))
        } else {
            Ok(mid_arm_union(c, stop, limit, br, fam))
        }
    } else {
        // b* <= l*: arming implies an instant fill at the current price.
        if c.open < stop {
            Ok(mid_entry_stop(c, stop, br, fam))
        } else if c.open <= limit {
            Ok(open_entry(c, c.open, br, fam))
        } else {
            Ok(mid_entry_limit(c, limit, br, fam, CandleOutcome::ArmedOnly))
        }
    }
}

/// Evaluates an open long position against one candle (exit logic only).
pub fn eval_active_position(c: &Candle, br: &BracketLevels) -> Result<EvaluationResult, EvalError> {
    use CandleOutcome::*;
    if let (Some(s), Some(t)) = (br.stop_loss, br.target) {
        if s >= t {
            return Err(EvalError::InvalidBrackets);
        }
    }
    if let Some(s) = br.stop_loss {
        if c.open <= s {
            return Ok(unique(StoppedOut { exit: c.open }));
        }
    }
    if let Some(t) = br.target {
        if c.open >= t {
            return Ok(unique(TargetHit { exit: c.open }));
        }
    }
    let stop_hit = br.stop_loss.is_some_and(|s| c.low <= s);
    let target_hit = br.target.is_some_and(|t| c.high >= t);
    match (stop_hit, target_hit) {
        (true, true) => Ok(ambiguous(
            SnuId {
                family: FAMILY_ACTIVE_BOTH,
                leaf: "BOTH",
            },
            vec![
                StoppedOut {
                    exit: br.stop_loss.unwrap(),
                },
                TargetHit {
                    exit: br.target.unwrap(),
                },
            ],
        )),
        (true, false) => Ok(unique(StoppedOut {
            exit: br.stop_loss.unwrap(),
        })),
        (false, true) => Ok(unique(TargetHit {
            exit: br.target.unwrap(),
        })),
        (false, false) => Ok(unique(StillOpen)),
    }
}

/// Anything the engine can evaluate against a candle.
#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Order { order: EntryOrder, state: EvalState },
    Active(Position),
}

impl Subject {
    pub fn side(&self) -> Side {
        match self {
            Subject::Order { order, .. } => order.side,
            Subject::Active(p) => p.side,
        }
    }
}

impl Mirror for Subject {
    fn mirror(&self) -> Subject {
        match self {
            Subject::Order { order, state } => Subject::Order {
                order: order.mirror(),
                state: *state,
            },
            Subject::Active(p) => Subject::Active(p.mirror()),
        }
    }
}

/// Side-aware entry-order evaluation: shorts run through the mirror.
pub fn evaluate_order(
    c: &Candle,
    order: &EntryOrder,
    state: EvalState,
) -> Result<EvaluationResult, EvalError> {
    if order.side == Side::Short {
        return Ok(evaluate_order(&c.mirror(), &order.mirror(), state)?.mirror());
    }
    match order.trigger {
        EntryTrigger::Limit { limit } => {
            if state == EvalState::Armed {
                return Err(EvalError::InvalidState("armed limit order"));
            }
            eval_limit_entry(c, limit, &order.brackets)
        }
        EntryTrigger::Stop { stop } => {
            if state == EvalState::Armed {
                return Err(EvalError::InvalidState("armed stop order"));
            }
            eval_stop_entry(c, stop, &order.brackets)
        }
        EntryTrigger::StopLimit { stop, limit } => {
            eval_stop_limit_entry(c, stop, limit, &order.brackets, state)
        }
    }
}

/// Side-aware active-position evaluation.
pub fn evaluate_position(c: &Candle, p: &Position) -> Result<EvaluationResult, EvalError> {
    if p.side == Side::Short {
        return Ok(evaluate_position(&c.mirror(), &p.mirror())?.mirror());
    }
    eval_active_position(c, &p.brackets)
}

/// Evaluates any [`Subject`].
pub fn evaluate_subject(c: &Candle, subject: &Subject) -> Result<EvaluationResult, EvalError> {
    match subject {
        Subject::Order { order, state } => evaluate_order(c, order, *state),
        Subject::Active(p) => evaluate_position(c, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candle::{BracketLevels, Candle};
    use CandleOutcome::*;

    fn br(stop_loss: Option<i64>, target: Option<i64>) -> BracketLevels {
        BracketLevels::with(stop_loss, target)
    }

    fn assert_ambiguous(r: EvaluationResult, expected: &[CandleOutcome], id: &str) {
        match r {
            EvaluationResult::Ambiguous { outcomes, snu_id } => {
                let mut want = expected.to_vec();
                want.sort();
                assert_eq!(outcomes, want);
                assert_eq!(snu_id.to_string(), id);
            }
            EvaluationResult::Unique(o) => panic!("expected ambiguous, got unique {o:?}"),
        }
    }

    #[test]
    fn limit_fill_no_brackets_stays_open() {
        let r = eval_limit_entry(&Candle::bare(10, 12, 5, 8), Ticks(7), &br(None, None)).unwrap();
        assert_eq!(r, EvaluationResult::Unique(OpenAtClose { entry: Ticks(7) }));
    }

    #[test]
    fn limit_untouched_is_no_trigger() {
        let r = eval_limit_entry(&Candle::bare(10, 12, 8, 11), Ticks(7), &br(None, None)).unwrap();
        assert_eq!(r, EvaluationResult::Unique(NoTrigger));
    }

    #[test]
    fn limit_with_reachable_target_is_snu_a() {
        // Touch order of entry (8) and target (14) is undetermined.
        let r =
            eval_limit_entry(&Candle::bare(10, 15, 7, 9), Ticks(8), &br(None, Some(14))).unwrap();
        assert_ambiguous(
            r,
            &[
                ExitTarget {
                    entry: Ticks(8),
                    exit: Ticks(14),
                },
                OpenAtClose { entry: Ticks(8) },
            ],
            "LIMIT+TARGET/A",
        );
    }

    #[test]
    fn limit_with_both_brackets_is_snu_b() {
        let r = eval_limit_entry(
            &Candle::bare(10, 15, 4, 9),
            Ticks(8),
            &br(Some(5), Some(14)),
        )
        .unwrap();
        assert_ambiguous(
            r,
            &[
                ExitStop {
                    entry: Ticks(8),
                    exit: Ticks(5),
                },
                ExitTarget {
                    entry: Ticks(8),
                    exit: Ticks(14),
                },
            ],
            "LIMIT+SL+TARGET/B",
        );
    }

    #[test]
    fn limit_degenerate_errors() {
        assert!(
            eval_limit_entry(&Candle::bare(10, 12, 5, 8), Ticks(8), &br(Some(9), None)).is_err()
        );
        assert!(
            eval_limit_entry(&Candle::bare(10, 12, 5, 8), Ticks(8), &br(None, Some(7))).is_err()
        );
    }

    #[test]
    fn stop_fill_no_brackets_stays_open() {
        let r = eval_stop_entry(&Candle::bare(10, 14, 9, 13), Ticks(12), &br(None, None)).unwrap();
        assert_eq!(
            r,
            EvaluationResult::Unique(OpenAtClose { entry: Ticks(12) })
        );
    }

    #[test]
    fn stop_with_reachable_stop_loss_is_snu() {
        let r =
            eval_stop_entry(&Candle::bare(10, 14, 5, 9), Ticks(12), &br(Some(6), None)).unwrap();
        assert_ambiguous(
            r,
            &[
                ExitStop {
                    entry: Ticks(12),
                    exit: Ticks(6),
                },
                OpenAtClose { entry: Ticks(12) },
            ],
            "STOP+SL/P",
        );
    }

    #[test]
    fn stop_gap_open_fills_at_open() {
        let r =
            eval_stop_entry(&Candle::bare(13, 14, 13, 14), Ticks(12), &br(Some(6), None)).unwrap();
        assert_eq!(
            r,
            EvaluationResult::Unique(OpenAtClose { entry: Ticks(13) })
        );
    }

    #[test]
    fn stop_entry_is_structural_mirror_of_limit_entry() {
        // eval_stop(c, b, {s, t}) == mirror(eval_limit(mirror(c), -b, {-t as stop, -s as target}))
        for (o, h, l, c, b, s, t) in [
            (10, 14, 5, 9, 12i64, 6i64, 20i64),
            (10, 15, 9, 14, 12, 8, 14),
            (13, 14, 8, 9, 12, 6, 14),
            (10, 11, 9, 10, 12, 6, 14),
        ] {
            let candle = Candle::bare(o, h, l, c);
            let stop_res = eval_stop_entry(&candle, Ticks(b), &br(Some(s), Some(t))).unwrap();
            let limit_res =
                eval_limit_entry(&candle.mirror(), Ticks(-b), &br(Some(-t), Some(-s))).unwrap();
            assert_eq!(
                stop_res.outcomes().len(),
                limit_res.mirror().outcomes().len()
            );
            // Outcome kinds correspond with stop/target roles exchanged, so
            // compare through the realized prices.
            let mut a: Vec<(Ticks, Option<Ticks>)> = stop_res
                .outcomes()
                .iter()
                .map(|o| match *o {
                    OpenAtClose { entry } => (entry, None),
                    ExitStop { entry, exit } | ExitTarget { entry, exit } => (entry, Some(exit)),
                    NoTrigger => (Ticks(i64::MIN), None),
                    _ => panic!("unexpected outcome"),
                })
                .collect();
            let mut bvals: Vec<(Ticks, Option<Ticks>)> = limit_res
                .mirror()
                .outcomes()
                .iter()
                .map(|o| match *o {
                    OpenAtClose { entry } => (entry, None),
                    ExitStop { entry, exit } | ExitTarget { entry, exit } => (entry, Some(exit)),
                    NoTrigger => (Ticks(i64::MIN), None),
                    _ => panic!("unexpected outcome"),
                })
                .collect();
            a.sort();
            bvals.sort();
            assert_eq!(a, bvals);
        }
    }

    #[test]
    fn stop_limit_arm_without_fill_possible() {
        let r = eval_stop_limit_entry(
            &Candle::bare(10, 14, 9, 13),
            Ticks(12),
            Ticks(11),
            &br(None, None),
            EvalState::Pending,
        )
        .unwrap();
        assert_ambiguous(
            r,
            &[OpenAtClose { entry: Ticks(11) }, ArmedOnly],
            "STOPLIMIT/E",
        );
    }

    #[test]
    fn stop_limit_stop_never_touched() {
        let r = eval_stop_limit_entry(
            &Candle::bare(10, 11, 9, 10),
            Ticks(12),
            Ticks(11),
            &br(None, None),
            EvalState::Pending,
        )
        .unwrap();
        assert_eq!(r, EvaluationResult::Unique(NoTrigger));
    }

    #[test]
    fn stop_limit_gap_armed_fill_forced() {
        let r = eval_stop_limit_entry(
            &Candle::bare(13, 14, 8, 9),
            Ticks(12),
            Ticks(11),
            &br(None, None),
            EvalState::Pending,
        )
        .unwrap();
        assert_eq!(
            r,
            EvaluationResult::Unique(OpenAtClose { entry: Ticks(11) })
        );
    }

    #[test]
    fn stop_limit_armed_state_behaves_as_limit() {
        let r = eval_stop_limit_entry(
            &Candle::bare(10, 12, 8, 11),
            Ticks(14),
            Ticks(9),
            &br(None, None),
            EvalState::Armed,
        )
        .unwrap();
        assert_eq!(r, EvaluationResult::Unique(OpenAtClose { entry: Ticks(9) }));
        // No fill leaves the limit live.
        let r = eval_stop_limit_entry(
            &Candle::bare(10, 12, 10, 11),
            Ticks(14),
            Ticks(9),
            &br(None, None),
            EvalState::Armed,
        )
        .unwrap();
        assert_eq!(r, EvaluationResult::Unique(ArmedOnly));
    }

    #[test]
    fn active_position_target_only_touch() {
        let r = eval_active_position(&Candle::bare(10, 15, 7, 9), &br(Some(6), Some(14))).unwrap();
        assert_eq!(r, EvaluationResult::Unique(TargetHit { exit: Ticks(14) }));
    }

    #[test]
    fn active_position_both_touched_is_snu() {
        let r = eval_active_position(&Candle::bare(10, 15, 5, 9), &br(Some(6), Some(14))).unwrap();
        assert_ambiguous(
            r,
            &[StoppedOut { exit: Ticks(6) }, TargetHit { exit: Ticks(14) }],
            "ACTIVE+SL+TARGET/BOTH",
        );
    }

    #[test]
    fn active_position_gap_below_stop_exits_at_open() {
        let r = eval_active_position(&Candle::bare(5, 15, 5, 9), &br(Some(6), Some(14))).unwrap();
        assert_eq!(r, EvaluationResult::Unique(StoppedOut { exit: Ticks(5) }));
    }

    #[test]
    fn short_evaluation_mirrors_long() {
        let candle = Candle::bare(10, 15, 7, 9);
        let long = EntryOrder {
            id: "a".into(),
            side: Side::Long,
            trigger: EntryTrigger::Limit { limit: Ticks(8) },
            brackets: br(None, Some(14)),
            time_in_force: Default::default(),
            quantity: 1,
        };
        let short = long.mirror();
        let long_res = evaluate_order(&candle, &long, EvalState::Pending).unwrap();
        let short_res = evaluate_order(&candle.mirror(), &short, EvalState::Pending).unwrap();
        assert_eq!(short_res, long_res.mirror());
    }
}
