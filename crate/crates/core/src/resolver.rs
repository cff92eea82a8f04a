//! Resolution of ambiguous evaluation results under the four policies:
//! worst case, best case, ignore, exact (reload finer data).
//!
//! Worst/best are judged per period by the trade value metric: realized
//! difference for exits, close minus entry for positions still open, zero
//! for anything not invested.

use crate::candle::{Candle, Position, Side, Ticks};
use crate::engine::{evaluate_subject, CandleOutcome, EvalState, EvaluationResult, Subject};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which way to settle an SNU that survives exact refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    WorstCase,
    BestCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SnuPolicy {
    WorstCase,
    BestCase,
    Ignore,
    Exact { fallback: Fallback, max_depth: u32 },
}

impl SnuPolicy {
    pub const DEFAULT_EXACT_DEPTH: u32 = 3;

    pub fn short_name(&self) -> &'static str {
        match self {
            SnuPolicy::WorstCase => "wc",
            SnuPolicy::BestCase => "bc",
            SnuPolicy::Ignore => "ig",
            SnuPolicy::Exact { .. } => "ex",
        }
    }
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("exact policy requires a finer data source")]
    RefinerUnavailable,
    #[error("outcome references prices outside the candle range")]
    InconsistentOutcome,
    #[error(transparent)]
    Refine(#[from] RefineError),
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("sub-candles do not aggregate to the parent candle: {0}")]
    InconsistentSubCandles(String),
    #[error("missing finer data for {start} ({detail})")]
    DataGap {
        start: DateTime<Utc>,
        detail: String,
    },
}

/// Supplies sub-candles partitioning a parent period, one resolution level
/// per refinement depth. Implementations must be safe for concurrent reads.
pub trait FinerDataSource: Sync {
    /// Ordered sub-candles tiling `[start, start + period_secs)` at `level`
    /// (0 = first rung below the base resolution).
    fn sub_candles(
        &self,
        start: DateTime<Utc>,
        period_secs: i64,
        level: u32,
    ) -> Result<Vec<Candle>, RefineError>;

    /// How many resolution levels are available.
    fn levels(&self) -> u32;
}

/// Per-period trade value of an outcome, in ticks, from the trader's side.
/// Exits value at the realized difference, open positions at close minus
/// entry, everything not invested at zero.
pub fn outcome_value(
    outcome: &CandleOutcome,
    candle: &Candle,
    side: Side,
    position_entry: Option<Ticks>,
) -> Result<i64, ResolveError> {
    use CandleOutcome::*;
    let dir = side.dir();
    let in_range = |p: Ticks| p >= candle.low && p <= candle.high;
    let value = match *outcome {
        NoTrigger | ArmedOnly | ImmediateRoundTrip { .. } => 0,
        OpenAtClose { entry } => {
            if !in_range(entry) {
                return Err(ResolveError::InconsistentOutcome);
            }
            dir * (candle.close - entry)
        }
        ExitStop { entry, exit } | ExitTarget { entry, exit } => {
            if !in_range(entry) || !in_range(exit) {
                return Err(ResolveError::InconsistentOutcome);
            }
            dir * (exit - entry)
        }
        StillOpen => {
            let entry = position_entry.ok_or(ResolveError::InconsistentOutcome)?;
            dir * (candle.close - entry)
        }
        StoppedOut { exit } | TargetHit { exit } => {
            if !in_range(exit) {
                return Err(ResolveError::InconsistentOutcome);
            }
            let entry = position_entry.ok_or(ResolveError::InconsistentOutcome)?;
            dir * (exit - entry)
        }
    };
    Ok(value)
}

/// What a resolution decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Resolution {
    Outcome {
        outcome: CandleOutcome,
    },
    /// Ignore policy on an entry-candle SNU: the order is dropped.
    Cancelled,
}

/// One warning record per resolved SNU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnuLogEntry {
    pub candle_time: DateTime<Utc>,
    pub snu_id: String,
    /// Candidate outcomes with their per-period values in ticks.
    pub candidates: Vec<(CandleOutcome, i64)>,
    pub chosen: Resolution,
    pub policy: String,
    /// Refinement depth reached (exact policy only).
    pub refinement_depth: Option<u32>,
}

/// Ranks candidates: lower is "more final". On equal value both policies
/// prefer a flat outcome over an open position, because an open position
/// carries forward risk the per-period metric cannot see.
fn invested_rank(o: &CandleOutcome) -> u8 {
    u8::from(o.leaves_position_open())
}

fn pick_candidate(candidates: &[(CandleOutcome, i64)], best: bool) -> CandleOutcome {
    let key = |c: &(CandleOutcome, i64)| {
        let v = if best { -c.1 } else { c.1 };
        (v, invested_rank(&c.0), c.0)
    };
    candidates
        .iter()
        .min_by_key(|c| key(c))
        .expect("ambiguous sets are non-empty")
        .0
}

/// Resolves an evaluation result under `policy`. Unique results pass
/// through unlogged; every ambiguous input yields exactly one log entry.
/// `refiner` is only consulted by the exact policy.
pub fn resolve(
    result: &EvaluationResult,
    policy: SnuPolicy,
    candle: &Candle,
    subject: &Subject,
    refiner: Option<&dyn FinerDataSource>,
) -> Result<(Resolution, Option<SnuLogEntry>), ResolveError> {
    let (outcomes, snu_id) = match result {
        EvaluationResult::Unique(o) => return Ok((Resolution::Outcome { outcome: *o }, None)),
        EvaluationResult::Ambiguous { outcomes, snu_id } => (outcomes, snu_id),
    };
    let side = subject.side();
    let position_entry = match subject {
        Subject::Active(p) => Some(p.entry_price),
        Subject::Order { .. } => None,
    };
    let candidates: Vec<(CandleOutcome, i64)> = outcomes
        .iter()
        .map(|o| outcome_value(o, candle, side, position_entry).map(|v| (*o, v)))
        .collect::<Result<_, _>>()?;

    let mut refinement_depth = None;
    let chosen = match policy {
        SnuPolicy::WorstCase => Resolution::Outcome {
            outcome: pick_candidate(&candidates, false),
        },
        SnuPolicy::BestCase => Resolution::Outcome {
            outcome: pick_candidate(&candidates, true),
        },
        SnuPolicy::Ignore => match subject {
            // An existing trade cannot be un-happened; fall back to worst
            // case and let the log carry the flag.
            Subject::Active(_) => Resolution::Outcome {
                outcome: pick_candidate(&candidates, false),
            },
            Subject::Order { .. } => Resolution::Cancelled,
        },
        SnuPolicy::Exact {
            fallback,
            max_depth,
        } => {
            let src = refiner.ok_or(ResolveError::RefinerUnavailable)?;
            let depth_budget = max_depth.min(src.levels());
            let (refined, depth) = refine_exact(candle, subject, src, depth_budget, 0)?;
            refinement_depth = Some(depth);
            match refined {
                EvaluationResult::Unique(o) => Resolution::Outcome { outcome: o },
                EvaluationResult::Ambiguous { outcomes, .. } => {
                    let remaining: Vec<(CandleOutcome, i64)> = outcomes
                        .iter()
                        .map(|o| outcome_value(o, candle, side, position_entry).map(|v| (*o, v)))
                        .collect::<Result<_, _>>()?;
                    Resolution::Outcome {
                        outcome: pick_candidate(&remaining, fallback == Fallback::BestCase),
                    }
                }
            }
        }
    };

    let entry = SnuLogEntry {
        candle_time: candle.timestamp,
        snu_id: snu_id.to_string(),
        candidates,
        chosen: chosen.clone(),
        policy: policy.short_name().to_string(),
        refinement_depth,
    };
    Ok((chosen, Some(entry)))
}

/// Re-evaluates an ambiguous candle on its sub-candles, threading order and
/// position state sequentially; recurses into any sub-candle that is itself
/// ambiguous while depth remains. Returns the refined result for the parent
/// candle plus the deepest level used (1 = first sub-resolution).
pub fn refine_exact(
    parent: &Candle,
    subject: &Subject,
    src: &dyn FinerDataSource,
    max_depth: u32,
    level: u32,
) -> Result<(EvaluationResult, u32), RefineError> {
    if level >= max_depth {
        let result = evaluate_subject(parent, subject)
            .expect("a result that reached refinement must be evaluable");
        return Ok((result, level));
    }
    let subs = src.sub_candles(parent.timestamp, parent.period_secs, level)?;
    check_aggregate(parent, &subs)?;

    let side = subject.side();
    let mut deepest = level + 1;

    // Threaded state: an order (pending/armed) that may become a position.
    enum Thread {
        Order(crate::candle::EntryOrder, EvalState),
        Holding(Position, Option<Ticks>), // position + entry if from an order
    }
    let mut thread = match subject {
        Subject::Order { order, state } => Thread::Order(order.clone(), *state),
        Subject::Active(p) => Thread::Holding(p.clone(), None),
    };
    // Entry recorded when the parent subject is an order, used to stitch
    // position exits back into entry-order outcome vocabulary.
    let from_order = matches!(subject, Subject::Order { .. });

    for sub in &subs {
        let (sub_subject, entry_so_far) = match &thread {
            Thread::Order(order, state) => (
                Subject::Order {
                    order: order.clone(),
                    state: *state,
                },
                None,
            ),
            Thread::Holding(p, entry) => (Subject::Active(p.clone()), *entry),
        };
        let mut result = evaluate_subject(sub, &sub_subject)
            .expect("threaded refinement state is always evaluable");
        if result.is_ambiguous() {
            let (refined, d) = refine_exact(sub, &sub_subject, src, max_depth, level + 1)?;
            deepest = deepest.max(d);
            result = refined;
        }
        let outcome = match result {
            EvaluationResult::Unique(o) => o,
            EvaluationResult::Ambiguous { outcomes, snu_id } => {
                // Still ambiguous at the depth budget: surface the candidate
                // set in the parent's vocabulary for the fallback to settle.
                let stitched: Vec<CandleOutcome> = outcomes
                    .iter()
                    .map(|o| stitch_outcome(*o, entry_so_far, from_order))
                    .collect();
                return Ok((
                    EvaluationResult::Ambiguous {
                        outcomes: dedup_sorted(stitched),
                        snu_id,
                    },
                    deepest,
                ));
            }
        };
        match outcome {
            CandleOutcome::NoTrigger => {}
            CandleOutcome::ArmedOnly => {
                if let Thread::Order(_, state) = &mut thread {
                    *state = EvalState::Armed;
                }
            }
            CandleOutcome::OpenAtClose { entry } => {
                if let Thread::Order(order, _) = &thread {
                    let position = Position {
                        side,
                        entry_price: entry,
                        entry_time: sub.timestamp,
                        brackets: order.brackets,
                        quantity: order.quantity,
                    };
                    thread = Thread::Holding(position, Some(entry));
                }
            }
            terminal @ (CandleOutcome::ExitStop { .. }
            | CandleOutcome::ExitTarget { .. }
            | CandleOutcome::ImmediateRoundTrip { .. }) => {
                return Ok((EvaluationResult::Unique(terminal), deepest));
            }
            CandleOutcome::StillOpen => {}
            exit @ (CandleOutcome::StoppedOut { .. } | CandleOutcome::TargetHit { .. }) => {
                let entry = match &thread {
                    Thread::Holding(_, e) => *e,
                    Thread::Order(..) => unreachable!("position exit without a position"),
                };
                return Ok((
                    EvaluationResult::Unique(stitch_outcome(exit, entry, from_order)),
                    deepest,
                ));
            }
        }
    }

    let final_outcome = match thread {
        Thread::Order(_, EvalState::Pending) => CandleOutcome::NoTrigger,
        Thread::Order(_, EvalState::Armed) => CandleOutcome::ArmedOnly,
        Thread::Holding(_, entry) => {
            if from_order {
                CandleOutcome::OpenAtClose {
                    entry: entry.expect("order-held position has an entry"),
                }
            } else {
                CandleOutcome::StillOpen
            }
        }
    };
    Ok((EvaluationResult::Unique(final_outcome), deepest))
}

/// Maps a position-vocabulary outcome back into entry-order vocabulary when
/// the refined subject was an entry order that filled in an earlier
/// sub-candle.
fn stitch_outcome(o: CandleOutcome, entry: Option<Ticks>, from_order: bool) -> CandleOutcome {
    if !from_order {
        return o;
    }
    match (o, entry) {
        (CandleOutcome::StoppedOut { exit }, Some(entry)) => {
            CandleOutcome::ExitStop { entry, exit }
        }
        (CandleOutcome::TargetHit { exit }, Some(entry)) => {
            CandleOutcome::ExitTarget { entry, exit }
        }
        (CandleOutcome::StillOpen, Some(entry)) => CandleOutcome::OpenAtClose { entry },
        _ => o,
    }
}

fn dedup_sorted(mut v: Vec<CandleOutcome>) -> Vec<CandleOutcome> {
    v.sort();
    v.dedup();
    v
}

fn check_aggregate(parent: &Candle, subs: &[Candle]) -> Result<(), RefineError> {
    if subs.is_empty() {
        return Err(RefineError::DataGap {
            start: parent.timestamp,
            detail: "no sub-candles".into(),
        });
    }
    let first_open = subs[0].open;
    let last_close = subs.last().unwrap().close;
    let max_high = subs.iter().map(|s| s.high).max().unwrap();
    let min_low = subs.iter().map(|s| s.low).min().unwrap();
    if first_open != parent.open
        || last_close != parent.close
        || max_high != parent.high
        || min_low != parent.low
    {
        return Err(RefineError::InconsistentSubCandles(format!(
            "parent O/H/L/C {}/{}/{}/{} vs aggregate {}/{}/{}/{}",
            parent.open,
            parent.high,
            parent.low,
            parent.close,
            first_open,
            max_high,
            min_low,
            last_close
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candle::{BracketLevels, Candle, EntryOrder, EntryTrigger, TimeInForce};
    use chrono::TimeZone;
    use std::collections::HashMap;

    fn limit_subject(limit: i64, stop_loss: Option<i64>, target: Option<i64>) -> Subject {
        Subject::Order {
            order: EntryOrder {
                id: "o1".into(),
                side: Side::Long,
                trigger: EntryTrigger::Limit {
                    limit: Ticks(limit),
                },
                brackets: BracketLevels::with(stop_loss, target),
                time_in_force: TimeInForce::GoodTillCancelled,
                quantity: 1,
            },
            state: EvalState::Pending,
        }
    }

    fn active_subject(entry: i64, stop_loss: Option<i64>, target: Option<i64>) -> Subject {
        Subject::Active(Position {
            side: Side::Long,
            entry_price: Ticks(entry),
            entry_time: Utc.timestamp_opt(0, 0).unwrap(),
            brackets: BracketLevels::with(stop_loss, target),
            quantity: 1,
        })
    }

    #[test]
    fn value_of_exits_and_open_positions() {
        let c = Candle::bare(10, 15, 7, 9);
        let et = CandleOutcome::ExitTarget {
            entry: Ticks(8),
            exit: Ticks(14),
        };
        assert_eq!(outcome_value(&et, &c, Side::Long, None).unwrap(), 6);
        let oac = CandleOutcome::OpenAtClose { entry: Ticks(12) };
        assert_eq!(outcome_value(&oac, &c, Side::Long, None).unwrap(), -3);
        assert_eq!(
            outcome_value(&CandleOutcome::ArmedOnly, &c, Side::Long, None).unwrap(),
            0
        );
    }

    #[test]
    fn value_flips_for_shorts() {
        let c = Candle::bare(10, 15, 7, 9);
        let es = CandleOutcome::ExitStop {
            entry: Ticks(8),
            exit: Ticks(14),
        };
        assert_eq!(outcome_value(&es, &c, Side::Short, None).unwrap(), -6);
    }

    #[test]
    fn value_rejects_out_of_range_prices() {
        let c = Candle::bare(10, 15, 7, 9);
        let bad = CandleOutcome::OpenAtClose { entry: Ticks(99) };
        assert!(matches!(
            outcome_value(&bad, &c, Side::Long, None),
            Err(ResolveError::InconsistentOutcome)
        ));
    }

    fn snu_a_fixture() -> (Candle, Subject, EvaluationResult) {
        let c = Candle::bare(10, 15, 7, 9);
        let subject = limit_subject(8, None, Some(14));
        let result = evaluate_subject(&c, &subject).unwrap();
        assert!(result.is_ambiguous());
        (c, subject, result)
    }

    #[test]
    fn worst_case_takes_minimum_value() {
        let (c, subject, result) = snu_a_fixture();
        let (chosen, log) = resolve(&result, SnuPolicy::WorstCase, &c, &subject, None).unwrap();
        // ExitTarget is +6, OpenAtClose is (9-8)=+1: worst is the open trade.
        assert_eq!(
            chosen,
            Resolution::Outcome {
                outcome: CandleOutcome::OpenAtClose { entry: Ticks(8) }
            }
        );
        let log = log.unwrap();
        assert_eq!(log.snu_id, "LIMIT+TARGET/A");
        assert_eq!(log.candidates.len(), 2);
    }

    #[test]
    fn best_case_takes_maximum_value() {
        let (c, subject, result) = snu_a_fixture();
        let (chosen, _) = resolve(&result, SnuPolicy::BestCase, &c, &subject, None).unwrap();
        assert_eq!(
            chosen,
            Resolution::Outcome {
                outcome: CandleOutcome::ExitTarget {
                    entry: Ticks(8),
                    exit: Ticks(14)
                }
            }
        );
    }

    #[test]
    fn ignore_cancels_entry_snus_but_not_positions() {
        let (c, subject, result) = snu_a_fixture();
        let (chosen, _) = resolve(&result, SnuPolicy::Ignore, &c, &subject, None).unwrap();
        assert_eq!(chosen, Resolution::Cancelled);

        let c2 = Candle::bare(10, 15, 5, 9);
        let active = active_subject(10, Some(6), Some(14));
        let result = evaluate_subject(&c2, &active).unwrap();
        let (chosen, log) = resolve(&result, SnuPolicy::Ignore, &c2, &active, None).unwrap();
        // Falls back to worst case for an existing trade.
        assert_eq!(
            chosen,
            Resolution::Outcome {
                outcome: CandleOutcome::StoppedOut { exit: Ticks(6) }
            }
        );
        assert!(log.is_some());
    }

    #[test]
    fn unique_results_pass_through_unlogged() {
        let c = Candle::bare(10, 12, 8, 11);
        let subject = limit_subject(7, None, None);
        let result = evaluate_subject(&c, &subject).unwrap();
        let (chosen, log) = resolve(&result, SnuPolicy::WorstCase, &c, &subject, None).unwrap();
        assert_eq!(
            chosen,
            Resolution::Outcome {
                outcome: CandleOutcome::NoTrigger
            }
        );
        assert!(log.is_none());
    }

    #[test]
    fn exact_without_refiner_errors() {
        let (c, subject, result) = snu_a_fixture();
        let policy = SnuPolicy::Exact {
            fallback: Fallback::WorstCase,
            max_depth: 3,
        };
        assert!(matches!(
            resolve(&result, policy, &c, &subject, None),
            Err(ResolveError::RefinerUnavailable)
        ));
    }

    #[test]
    fn tie_break_prefers_flat_outcome() {
        // Construct candidates with equal value: close == target would do it,
        // but simplest is a synthetic pair.
        let candidates = vec![
            (CandleOutcome::OpenAtClose { entry: Ticks(8) }, 4),
            (
                CandleOutcome::ExitTarget {
                    entry: Ticks(8),
                    exit: Ticks(12),
                },
                4,
            ),
        ];
        assert_eq!(
            pick_candidate(&candidates, false),
            CandleOutcome::ExitTarget {
                entry: Ticks(8),
                exit: Ticks(12)
            }
        );
        assert_eq!(
            pick_candidate(&candidates, true),
            CandleOutcome::ExitTarget {
                entry: Ticks(8),
                exit: Ticks(12)
            }
        );
    }

    /// In-memory finer data: maps (level, period start) to sub-candles.
    pub struct MapSource {
        pub levels: u32,
        pub data: HashMap<(u32, DateTime<Utc>), Vec<Candle>>,
    }

    impl FinerDataSource for MapSource {
        fn sub_candles(
            &self,
            start: DateTime<Utc>,
            _period_secs: i64,
            level: u32,
        ) -> Result<Vec<Candle>, RefineError> {
            self.data
                .get(&(level, start))
                .cloned()
                .ok_or(RefineError::DataGap {
                    start,
                    detail: format!("level {level}"),
                })
        }

        fn levels(&self) -> u32 {
            self.levels
        }
    }

    fn sub(ts: i64, secs: i64, o: i64, h: i64, l: i64, c: i64) -> Candle {
        Candle {
            timestamp: Utc.timestamp_opt(ts, 0).unwrap(),
            period_secs: secs,
            ..Candle::bare(o, h, l, c)
        }
    }

    #[test]
    fn refinement_fixes_touch_order() {
        // Daily candle where both brackets are touched; hourly data shows the
        // low came first.
        let day = sub(0, 14_400, 10, 15, 5, 9);
        let subs = vec![
            sub(0, 3_600, 10, 11, 5, 7),
            sub(3_600, 3_600, 7, 12, 7, 12),
            sub(7_200, 3_600, 12, 15, 11, 13),
            sub(10_800, 3_600, 13, 14, 9, 9),
        ];
        let src = MapSource {
            levels: 1,
            data: HashMap::from([((0, day.timestamp), subs)]),
        };
        let active = active_subject(10, Some(6), Some(14));
        let result = evaluate_subject(&day, &active).unwrap();
        assert!(result.is_ambiguous());
        let policy = SnuPolicy::Exact {
            fallback: Fallback::WorstCase,
            max_depth: 3,
        };
        let (chosen, log) = resolve(&result, policy, &day, &active, Some(&src)).unwrap();
        assert_eq!(
            chosen,
            Resolution::Outcome {
                outcome: CandleOutcome::StoppedOut { exit: Ticks(6) }
            }
        );
        assert_eq!(log.unwrap().refinement_depth, Some(1));
    }

    #[test]
    fn refinement_rejects_inconsistent_aggregates() {
        let day = sub(0, 7_200, 10, 15, 5, 9);
        // Max high is 14, not 15.
        let subs = vec![sub(0, 3_600, 10, 14, 5, 7), sub(3_600, 3_600, 7, 14, 6, 9)];
        let src = MapSource {
            levels: 1,
            data: HashMap::from([((0, day.timestamp), subs)]),
        };
        let active = active_subject(10, Some(6), Some(14));
        let result = evaluate_subject(&day, &active).unwrap();
        let policy = SnuPolicy::Exact {
            fallback: Fallback::WorstCase,
            max_depth: 3,
        };
        let err = resolve(&result, policy, &day, &active, Some(&src)).unwrap_err();
        assert!(matches!(
            err,
            ResolveError::Refine(RefineError::InconsistentSubCandles(_))
        ));
    }

    #[test]
    fn persistent_snu_falls_back() {
        // The single sub-candle reproduces the parent: still ambiguous at
        // max depth, resolved by the fallback.
        let day = sub(0, 3_600, 10, 15, 5, 9);
        let subs = vec![sub(0, 3_600, 10, 15, 5, 9)];
        let src = MapSource {
            levels: 1,
            data: HashMap::from([((0, day.timestamp), subs)]),
        };
        let active = active_subject(10, Some(6), Some(14));
        let result = evaluate_subject(&day, &active).unwrap();
        for (fallback, want) in [
            (
                Fallback::WorstCase,
                CandleOutcome::StoppedOut { exit: Ticks(6) },
            ),
            (
                Fallback::BestCase,
                CandleOutcome::TargetHit { exit: Ticks(14) },
            ),
        ] {
            let policy = SnuPolicy::Exact {
                fallback,
                max_depth: 1,
            };
            let (chosen, log) = resolve(&result, policy, &day, &active, Some(&src)).unwrap();
            assert_eq!(chosen, Resolution::Outcome { outcome: want });
            assert_eq!(log.unwrap().refinement_depth, Some(1));
        }
    }

    #[test]
    fn refinement_stays_within_original_candidates() {
        // Entry order whose SNU refines to a unique outcome; the refined
        // outcome must be one of the original candidates.
        let day = sub(0, 7_200, 10, 15, 7, 9);
        let subs = vec![sub(0, 3_600, 10, 15, 9, 9), sub(3_600, 3_600, 9, 9, 7, 9)];
        let src = MapSource {
            levels: 1,
            data: HashMap::from([((0, day.timestamp), subs)]),
        };
        let subject = limit_subject(8, None, Some(14));
        let result = evaluate_subject(&day, &subject).unwrap();
        let original: Vec<_> = result.outcomes().to_vec();
        let (refined, depth) = refine_exact(&day, &subject, &src, 1, 0).unwrap();
        assert_eq!(depth, 1);
        match refined {
            EvaluationResult::Unique(o) => assert!(original.contains(&o)),
            other => panic!("expected unique refinement, got {other:?}"),
        }
    }
}
