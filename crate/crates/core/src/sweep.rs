//! Exhaustive engine-vs-oracle verification over all small candle shapes
//! and level placements. This is the artifact's honesty mechanism: every
//! decision branch is certified against brute-force path enumeration, and
//! the per-family unique/ambiguous counts give a machine-generated census
//! of which setups are decidable from OHLC alone.

use crate::candle::{
    BracketLevels, Candle, EntryOrder, EntryTrigger, Mirror, Position, Side, Ticks, TimeInForce,
};
use crate::engine::{evaluate_subject, CandleOutcome, EvalState, EvaluationResult, Subject};
use crate::oracle::enumerate_paths;
use crate::resolver::{outcome_value, resolve, Resolution, SnuPolicy};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Maximum candle range (high - low) to enumerate.
    pub radius: i64,
    /// Oracle segment budget for the equivalence check.
    pub max_segments: usize,
    /// Also compare outcome sets at max_segments + 1.
    pub check_saturation: bool,
    /// Check wc/bc value bounds on every ambiguous case.
    pub check_policies: bool,
    /// Cap on rendered discrepancy dumps.
    pub max_reports: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            radius: 6,
            max_segments: crate::oracle::DEFAULT_MAX_SEGMENTS,
            check_saturation: false,
            check_policies: false,
            max_reports: 20,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FamilyCount {
    pub cases: u64,
    pub unique: u64,
    pub ambiguous: u64,
}

#[derive(Debug, Default)]
pub struct SweepReport {
    pub cases: u64,
    pub families: BTreeMap<String, FamilyCount>,
    pub discrepancy_count: u64,
    pub discrepancies: Vec<String>,
    pub mirror_mismatches: u64,
    pub saturation_mismatches: u64,
    pub policy_violations: u64,
    /// Reported entry/exit prices outside [low, high].
    pub price_bound_violations: u64,
    /// Limit entries with no target, or an unreachable one, that came back
    /// ambiguous (claim: impossible).
    pub limit_unforced_ambiguous: u64,
    /// Ambiguous limit cases seen per leaf A / B (claim: both occur).
    pub limit_snu_a: u64,
    pub limit_snu_b: u64,
    /// Stop entries ambiguous without a reachable stop loss (claim: impossible).
    pub stop_ambiguous_without_sl: u64,
    pub stop_ambiguous: u64,
    pub elapsed: Duration,
}

impl SweepReport {
    fn absorb(&mut self, other: SweepReport) {
        self.cases += other.cases;
        for (fam, c) in other.families {
            let e = self.families.entry(fam).or_default();
            e.cases += c.cases;
            e.unique += c.unique;
            e.ambiguous += c.ambiguous;
        }
        self.discrepancy_count += other.discrepancy_count;
        self.discrepancies.extend(other.discrepancies);
        self.mirror_mismatches += other.mirror_mismatches;
        self.saturation_mismatches += other.saturation_mismatches;
        self.policy_violations += other.policy_violations;
        self.price_bound_violations += other.price_bound_violations;
        self.limit_unforced_ambiguous += other.limit_unforced_ambiguous;
        self.limit_snu_a += other.limit_snu_a;
        self.limit_snu_b += other.limit_snu_b;
        self.stop_ambiguous_without_sl += other.stop_ambiguous_without_sl;
        self.stop_ambiguous += other.stop_ambiguous;
    }

    pub fn clean(&self) -> bool {
        self.discrepancy_count == 0
            && self.mirror_mismatches == 0
            && self.saturation_mismatches == 0
            && self.policy_violations == 0
            && self.price_bound_violations == 0
    }
}

/// All candle shapes with range <= radius. Levels and decisions are
/// translation invariant, so low is pinned to 0.
pub fn sweep_candles(radius: i64) -> Vec<Candle> {
    let mut out = Vec::new();
    for range in 0..=radius {
        for open in 0..=range {
            for close in 0..=range {
                out.push(Candle::bare(open, range, 0, close));
            }
        }
    }
    out
}

fn order_subject(trigger: EntryTrigger, brackets: BracketLevels, state: EvalState) -> Subject {
    Subject::Order {
        order: EntryOrder {
            id: String::new(),
            side: Side::Long,
            trigger,
            brackets,
            time_in_force: TimeInForce::GoodTillCancelled,
            quantity: 1,
        },
        state,
    }
}

/// Every valid long subject for a candle: each order family with each
/// bracket subset, levels ranging over [low-2, high+2], plus active
/// positions. Stop-limit orders are enumerated in both Pending and Armed
/// states.
pub fn sweep_subjects(c: &Candle) -> Vec<Subject> {
    let lo = c.low.0 - 2;
    let hi = c.high.0 + 2;
    let mut subs = Vec::new();

    for l in lo..=hi {
        let trigger = EntryTrigger::Limit { limit: Ticks(l) };
        subs.push(order_subject(
            trigger,
            BracketLevels::none(),
            EvalState::Pending,
        ));
        for t in (l + 1)..=hi {
            subs.push(order_subject(
                trigger,
                BracketLevels::with(None, Some(t)),
                EvalState::Pending,
            ));
        }
        for s in lo..l {
            subs.push(order_subject(
                trigger,
                BracketLevels::with(Some(s), None),
                EvalState::Pending,
            ));
            for t in (l + 1)..=hi {
                subs.push(order_subject(
                    trigger,
                    BracketLevels::with(Some(s), Some(t)),
                    EvalState::Pending,
                ));
            }
        }
    }
    for b in lo..=hi {
        let trigger = EntryTrigger::Stop { stop: Ticks(b) };
        subs.push(order_subject(
            trigger,
            BracketLevels::none(),
            EvalState::Pending,
        ));
        for t in (b + 1)..=hi {
            subs.push(order_subject(
                trigger,
                BracketLevels::with(None, Some(t)),
                EvalState::Pending,
            ));
        }
        for s in lo..b {
            subs.push(order_subject(
                trigger,
                BracketLevels::with(Some(s), None),
                EvalState::Pending,
            ));
            for t in (b + 1)..=hi {
                subs.push(order_subject(
                    trigger,
                    BracketLevels::with(Some(s), Some(t)),
                    EvalState::Pending,
                ));
            }
        }
    }
    for b in lo..=hi {
        for l in lo..=hi {
            let trigger = EntryTrigger::StopLimit {
                stop: Ticks(b),
                limit: Ticks(l),
            };
            for state in [EvalState::Pending, EvalState::Armed] {
                subs.push(order_subject(trigger, BracketLevels::none(), state));
                for t in (l + 1)..=hi {
                    subs.push(order_subject(
                        trigger,
                        BracketLevels::with(None, Some(t)),
                        state,
                    ));
                }
                for s in lo..b.min(l) {
                    subs.push(order_subject(
                        trigger,
                        BracketLevels::with(Some(s), None),
                        state,
                    ));
                    for t in (l + 1)..=hi {
                        subs.push(order_subject(
                            trigger,
                            BracketLevels::with(Some(s), Some(t)),
                            state,
                        ));
                    }
                }
            }
        }
    }
    // Active positions; the entry price only matters for value metrics.
    let position = |brackets| {
        Subject::Active(Position {
            side: Side::Long,
            entry_price: c.open,
            entry_time: c.timestamp,
            brackets,
            quantity: 1,
        })
    };
    for s in lo..=hi {
        subs.push(position(BracketLevels::with(Some(s), None)));
        for t in (s + 1)..=hi {
            subs.push(position(BracketLevels::with(Some(s), Some(t))));
        }
    }
    for t in lo..=hi {
        subs.push(position(BracketLevels::with(None, Some(t))));
    }
    subs
}

/// Vec-backed outcome set; candidate sets are tiny.
#[derive(Clone, Copy)]
struct SmallSet {
    items: [CandleOutcome; 8],
    len: usize,
}

impl SmallSet {
    fn new() -> SmallSet {
        SmallSet {
            items: [CandleOutcome::NoTrigger; 8],
            len: 0,
        }
    }

    fn insert(&mut self, o: CandleOutcome) {
        if !self.items[..self.len].contains(&o) {
            self.items[self.len] = o;
            self.len += 1;
        }
    }

    fn as_slice(&self) -> &[CandleOutcome] {
        &self.items[..self.len]
    }

    fn sorted(&self) -> Vec<CandleOutcome> {
        let mut v = self.as_slice().to_vec();
        v.sort();
        v
    }

    fn agrees_with(&self, engine: &EvaluationResult) -> bool {
        let outcomes = engine.outcomes();
        outcomes.len() == self.len && outcomes.iter().all(|o| self.as_slice().contains(o))
    }

    fn same_as(&self, other: &SmallSet) -> bool {
        self.len == other.len && self.as_slice().iter().all(|o| other.as_slice().contains(o))
    }
}

fn family_label(subject: &Subject) -> String {
    match subject {
        Subject::Order { order, state } => {
            let base = match order.trigger {
                EntryTrigger::Limit { .. } => "LIMIT",
                EntryTrigger::Stop { .. } => "STOP",
                EntryTrigger::StopLimit { .. } => "STOPLIMIT",
            };
            let sl = if order.brackets.stop_loss.is_some() {
                "+SL"
            } else {
                ""
            };
            let tp = if order.brackets.target.is_some() {
                "+TARGET"
            } else {
                ""
            };
            let armed = if *state == EvalState::Armed {
                " (armed)"
            } else {
                ""
            };
            format!("{base}{sl}{tp}{armed}")
        }
        Subject::Active(p) => {
            let sl = if p.brackets.stop_loss.is_some() {
                "+SL"
            } else {
                ""
            };
            let tp = if p.brackets.target.is_some() {
                "+TARGET"
            } else {
                ""
            };
            format!("ACTIVE{sl}{tp}")
        }
    }
}

fn dump_case(
    c: &Candle,
    subject: &Subject,
    engine: &EvaluationResult,
    oracle: &SmallSet,
) -> String {
    format!(
        "candle O={} H={} L={} C={} subject={:?}\n  engine: {:?}\n  oracle: {:?}",
        c.open,
        c.high,
        c.low,
        c.close,
        subject,
        engine,
        oracle.sorted()
    )
}

fn check_case(
    c: &Candle,
    subject: &Subject,
    base_paths: &[(Vec<Ticks>, usize)],
    cfg: &SweepConfig,
    stats: &mut SweepReport,
) {
    let engine = evaluate_subject(c, subject).expect("sweep generates only valid subjects");
    let mut base_set = SmallSet::new();
    let mut sat_set = SmallSet::new();
    for (ticks, segments) in base_paths {
        let outcome = crate::oracle::simulate_ticks(ticks, subject);
        if *segments <= cfg.max_segments {
            base_set.insert(outcome);
        }
        if cfg.check_saturation {
            sat_set.insert(outcome);
        }
    }
    stats.cases += 1;
    let fam = stats.families.entry(family_label(subject)).or_default();
    fam.cases += 1;
    if engine.is_ambiguous() {
        fam.ambiguous += 1;
    } else {
        fam.unique += 1;
    }

    if !base_set.agrees_with(&engine) {
        stats.discrepancy_count += 1;
        if stats.discrepancies.len() < cfg.max_reports {
            stats
                .discrepancies
                .push(dump_case(c, subject, &engine, &base_set));
        }
    }
    // Every reported fill price must be attainable within the candle.
    for o in engine.outcomes() {
        use CandleOutcome::*;
        let prices: [Option<Ticks>; 2] = match *o {
            OpenAtClose { entry } => [Some(entry), None],
            ExitStop { entry, exit } | ExitTarget { entry, exit } => [Some(entry), Some(exit)],
            ImmediateRoundTrip { price } => [Some(price), None],
            StoppedOut { exit } | TargetHit { exit } => [Some(exit), None],
            NoTrigger | ArmedOnly | StillOpen => [None, None],
        };
        for p in prices.into_iter().flatten() {
            if p < c.low || p > c.high {
                stats.price_bound_violations += 1;
            }
        }
    }
    if cfg.check_saturation && !base_set.same_as(&sat_set) {
        stats.saturation_mismatches += 1;
        if stats.discrepancies.len() < cfg.max_reports {
            stats.discrepancies.push(format!(
                "saturation: {} vs {} segments differ: {}",
                cfg.max_segments,
                cfg.max_segments + 1,
                dump_case(c, subject, &engine, &sat_set)
            ));
        }
    }

    // Textual claims about where ambiguity can arise.
    if let Subject::Order { order, .. } = subject {
        let has_sl = order.brackets.stop_loss.is_some();
        match order.trigger {
            EntryTrigger::Limit { .. } => {
                // Reachable = the favorable extreme attains the level.
                let target_reachable = order.brackets.target.is_some_and(|t| {
                    let fav = if order.side == Side::Long {
                        c.high
                    } else {
                        c.low
                    };
                    order.side.dir() * (fav - t) >= 0
                });
                if engine.is_ambiguous() {
                    if !target_reachable {
                        stats.limit_unforced_ambiguous += 1;
                    }
                    if let EvaluationResult::Ambiguous { snu_id, .. } = &engine {
                        match snu_id.leaf {
                            "A" => stats.limit_snu_a += 1,
                            "B" => stats.limit_snu_b += 1,
                            _ => {}
                        }
                    }
                }
            }
            EntryTrigger::Stop { .. } => {
                if engine.is_ambiguous() {
                    stats.stop_ambiguous += 1;
                    let sl_reachable = order.brackets.stop_loss.is_some_and(|s| {
                        let adv = if order.side == Side::Long {
                            c.low
                        } else {
                            c.high
                        };
                        order.side.dir() * (adv - s) <= 0
                    });
                    if !has_sl || !sl_reachable {
                        stats.stop_ambiguous_without_sl += 1;
                    }
                }
            }
            EntryTrigger::StopLimit { .. } => {}
        }
    }

    // Policy bounds: every candidate's value sits between wc and bc choices.
    if cfg.check_policies && engine.is_ambiguous() {
        let side = subject.side();
        let position_entry = match subject {
            Subject::Active(p) => Some(p.entry_price),
            _ => None,
        };
        let values: Vec<i64> = engine
            .outcomes()
            .iter()
            .map(|o| {
                outcome_value(o, c, side, position_entry).expect("sweep outcomes are in range")
            })
            .collect();
        let wc = resolve(&engine, SnuPolicy::WorstCase, c, subject, None)
            .expect("wc resolution cannot fail");
        let bc = resolve(&engine, SnuPolicy::BestCase, c, subject, None)
            .expect("bc resolution cannot fail");
        let value_of = |r: &Resolution| match r {
            Resolution::Outcome { outcome } => {
                outcome_value(outcome, c, side, position_entry).unwrap()
            }
            Resolution::Cancelled => unreachable!("wc/bc never cancel"),
        };
        let wc_v = value_of(&wc.0);
        let bc_v = value_of(&bc.0);
        if values.iter().any(|v| *v < wc_v || *v > bc_v) {
            stats.policy_violations += 1;
        }
    }
}

/// Runs the full verification sweep, parallel over candles.
pub fn run_sweep(cfg: &SweepConfig) -> SweepReport {
    let started = Instant::now();
    let candles = sweep_candles(cfg.radius);
    let segs = cfg.max_segments + usize::from(cfg.check_saturation);
    let mut report = candles
        .par_iter()
        .map(|candle| {
            let mut stats = SweepReport::default();
            let paths: Vec<(Vec<Ticks>, usize)> = enumerate_paths(candle, segs)
                .iter()
                .map(|p| (p.expand(), p.segments()))
                .collect();
            let mirrored_paths: Vec<(Vec<Ticks>, usize)> = paths
                .iter()
                .map(|(ticks, s)| (ticks.iter().map(|t| -*t).collect(), *s))
                .collect();
            let mirrored_candle = candle.mirror();
            for subject in sweep_subjects(candle) {
                check_case(candle, &subject, &paths, cfg, &mut stats);
                // Short duals: mirrored subject on the mirrored candle, with
                // the oracle running natively on the mirrored paths.
                let short_subject = subject.mirror();
                check_case(
                    &mirrored_candle,
                    &short_subject,
                    &mirrored_paths,
                    cfg,
                    &mut stats,
                );
                // Mirror symmetry of the engine itself.
                let long_res = evaluate_subject(candle, &subject).unwrap();
                let short_res = evaluate_subject(&mirrored_candle, &short_subject).unwrap();
                if short_res != long_res.mirror() {
                    stats.mirror_mismatches += 1;
                }
            }
            stats
        })
        .reduce(SweepReport::default, |mut a, b| {
            a.absorb(b);
            a
        });
    report.elapsed = started.elapsed();
    report
}
