//! Brute-force ground truth: enumerate every admissible intra-candle tick
//! path and collect the outcomes an order can realize on it.
//!
//! A path is piecewise monotone, summarized by its turning points. Since
//! price moves tick by tick with no intra-period gaps, outcomes only change
//! at level touches, and the order of first touches is fully determined by
//! the sequence of segment extremes — bounded-segment zigzags are therefore
//! exhaustive for outcome classification. The walker below is deliberately
//! naive: it expands each path to +-1 tick steps and feeds them one by one
//! through a tiny order state machine, independent of the decision trees it
//! certifies.

use crate::candle::{Candle, EntryTrigger, Ticks};
use crate::engine::{CandleOutcome, EvalState, EvaluationResult, Subject};
use std::collections::BTreeSet;

/// Default number of monotone segments: approach, reverse, approach,
/// reverse, finish covers every entry/bracket interaction. The acceptance
/// suite asserts outcome sets are saturated at this depth (5 vs 6).
pub const DEFAULT_MAX_SEGMENTS: usize = 5;

/// One admissible intra-candle price trajectory, as its turning points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickPath {
    pub turning_points: Vec<Ticks>,
}

impl TickPath {
    pub fn segments(&self) -> usize {
        self.turning_points.len().saturating_sub(1)
    }

    /// Expands the turning points into the full +-1 tick walk.
    pub fn expand(&self) -> Vec<Ticks> {
        let mut ticks = vec![self.turning_points[0]];
        for w in self.turning_points.windows(2) {
            let (from, to) = (w[0].0, w[1].0);
            let step = if to > from { 1 } else { -1 };
            let mut p = from;
            while p != to {
                p += step;
                ticks.push(Ticks(p));
            }
        }
        ticks
    }

    /// Structural invariants: starts at open, ends at close, stays within
    /// [low, high], alternates strictly, and realizes both extremes.
    pub fn is_valid_for(&self, c: &Candle) -> bool {
        let pts = &self.turning_points;
        if pts.is_empty() || pts[0] != c.open || *pts.last().unwrap() != c.close {
            return false;
        }
        if pts.iter().any(|p| *p < c.low || *p > c.high) {
            return false;
        }
        for w in pts.windows(3) {
            if (w[1] > w[0]) == (w[2] > w[1]) || w[1] == w[0] || w[2] == w[1] {
                return false;
            }
        }
        if pts.len() >= 2 && pts[0] == pts[1] {
            return false;
        }
        pts.iter().min() == Some(&c.low) && pts.iter().max() == Some(&c.high)
    }
}

/// Every piecewise-monotone path with at most `max_segments` segments.
pub fn enumerate_paths(c: &Candle, max_segments: usize) -> Vec<TickPath> {
    let mut out = Vec::new();
    let mut seq = vec![c.open];
    // Zero-segment path: only for a zero-range candle.
    if c.open == c.close && c.open == c.low && c.open == c.high {
        out.push(TickPath {
            turning_points: seq.clone(),
        });
    }
    extend_paths(c, max_segments, &mut seq, &mut out);
    out
}

fn extend_paths(c: &Candle, budget: usize, seq: &mut Vec<Ticks>, out: &mut Vec<TickPath>) {
    if budget == 0 {
        return;
    }
    let last = *seq.last().unwrap();
    // Direction of the last segment, if any; the next must flip.
    let prev_dir = if seq.len() >= 2 {
        Some(last > seq[seq.len() - 2])
    } else {
        None
    };
    let (lo, hi) = match prev_dir {
        Some(true) => (c.low.0, last.0 - 1),
        Some(false) => (last.0 + 1, c.high.0),
        None => (c.low.0, c.high.0),
    };
    for next in lo..=hi {
        let next = Ticks(next);
        if next == last {
            continue;
        }
        seq.push(next);
        if next == c.close && seq.iter().min() == Some(&c.low) && seq.iter().max() == Some(&c.high)
        {
            out.push(TickPath {
                turning_points: seq.clone(),
            });
        }
        extend_paths(c, budget - 1, seq, out);
        seq.pop();
    }
}

/// Walks one expanded tick sequence through the order state machine and
/// returns the single outcome this path realizes. The first element is the
/// open and is processed like any other price, which reproduces the
/// gap-at-open fill rules.
pub fn simulate_ticks(ticks: &[Ticks], subject: &Subject) -> CandleOutcome {
    enum Phase {
        Pending,
        Armed,
        Holding(Ticks),
    }

    let (side, trigger, brackets, mut phase, is_order) = match subject {
        Subject::Order { order, state } => (
            order.side,
            Some(order.trigger),
            order.brackets,
            match state {
                EvalState::Pending => Phase::Pending,
                EvalState::Armed => Phase::Armed,
            },
            true,
        ),
        Subject::Active(p) => (
            p.side,
            None,
            p.brackets,
            Phase::Holding(p.entry_price),
            false,
        ),
    };
    let dir = side.dir();
    let at_or_below = |p: Ticks, level: Ticks| dir * (p - level) <= 0;
    let at_or_above = |p: Ticks, level: Ticks| dir * (p - level) >= 0;

    for &p in ticks {
        if let Phase::Pending = phase {
            match trigger.expect("pending phase implies an entry order") {
                EntryTrigger::Limit { limit } => {
                    if at_or_below(p, limit) {
                        phase = Phase::Holding(p);
                    }
                }
                EntryTrigger::Stop { stop } => {
                    if at_or_above(p, stop) {
                        phase = Phase::Holding(p);
                    }
                }
                EntryTrigger::StopLimit { stop, .. } => {
                    if at_or_above(p, stop) {
                        phase = Phase::Armed;
                    }
                }
            }
        }
        if let Phase::Armed = phase {
            let limit = match trigger.expect("armed phase implies a stop-limit order") {
                EntryTrigger::StopLimit { limit, .. } | EntryTrigger::Limit { limit } => limit,
                EntryTrigger::Stop { .. } => unreachable!("plain stop orders never arm"),
            };
            if at_or_below(p, limit) {
                phase = Phase::Holding(p);
            }
        }
        if let Phase::Holding(entry) = phase {
            if let Some(s) = brackets.stop_loss {
                if at_or_below(p, s) {
                    return if is_order {
                        CandleOutcome::ExitStop { entry, exit: p }
                    } else {
                        CandleOutcome::StoppedOut { exit: p }
                    };
                }
            }
            if let Some(t) = brackets.target {
                if at_or_above(p, t) {
                    return if is_order {
                        CandleOutcome::ExitTarget { entry, exit: p }
                    } else {
                        CandleOutcome::TargetHit { exit: p }
                    };
                }
            }
        }
    }
    match phase {
        Phase::Pending => CandleOutcome::NoTrigger,
        Phase::Armed => CandleOutcome::ArmedOnly,
        Phase::Holding(entry) => {
            if is_order {
                CandleOutcome::OpenAtClose { entry }
            } else {
                CandleOutcome::StillOpen
            }
        }
    }
}

/// Convenience wrapper: simulate a [`TickPath`] directly.
pub fn simulate_path(path: &TickPath, subject: &Subject) -> CandleOutcome {
    simulate_ticks(&path.expand(), subject)
}

/// The exact set of outcomes realizable on `c` for the subject.
pub fn oracle_outcomes(
    c: &Candle,
    subject: &Subject,
    max_segments: usize,
) -> BTreeSet<CandleOutcome> {
    enumerate_paths(c, max_segments)
        .iter()
        .map(|p| simulate_path(p, subject))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyOutcome {
    Match,
    Discrepancy {
        engine: EvaluationResult,
        oracle: BTreeSet<CandleOutcome>,
    },
}

/// Match iff the engine's unique outcome is the oracle singleton, or the
/// engine's ambiguous set equals the oracle set exactly.
pub fn results_agree(engine: &EvaluationResult, oracle: &BTreeSet<CandleOutcome>) -> bool {
    match engine {
        EvaluationResult::Unique(o) => oracle.len() == 1 && oracle.contains(o),
        EvaluationResult::Ambiguous { outcomes, .. } => {
            outcomes.len() == oracle.len() && outcomes.iter().all(|o| oracle.contains(o))
        }
    }
}

/// Runs the engine and the oracle on the same case and compares.
pub fn verify_engine(c: &Candle, subject: &Subject, max_segments: usize) -> VerifyOutcome {
    let engine = match crate::engine::evaluate_subject(c, subject) {
        Ok(r) => r,
        Err(e) => panic!("verify_engine called on an invalid case: {e}"),
    };
    let oracle = oracle_outcomes(c, subject, max_segments);
    if results_agree(&engine, &oracle) {
        VerifyOutcome::Match
    } else {
        VerifyOutcome::Discrepancy { engine, oracle }
    }
}
