//! Backtest evaluation engine for OHLC candle data.
//!
//! Given only a candle's four prices, the fill-or-no-fill question for
//! limit, stop and stop-limit entries (and bracket exits) is sometimes not
//! uniquely decidable: different admissible intra-candle paths produce
//! different trades. This crate makes those situations (SNUs) explicit,
//! resolves them under a user-selected policy (worst case, best case,
//! ignore, exact via finer data), and ships an exhaustive tick-path oracle
//! that certifies every decision branch.

pub mod candle;
pub mod engine;
pub mod io;
pub mod oracle;
pub mod resolver;
pub mod runner;
pub mod sweep;

pub use candle::{
    classify_degenerate, price_to_ticks, round_level, round_levels, validate_candle, BracketLevels,
    Candle, CandleError, Degeneracy, EntryOrder, EntryTrigger, LevelRole, Mirror, OrderState,
    Position, RawLevels, RoundedLevels, Side, Ticks, TimeInForce,
};
pub use engine::{
    eval_active_position, eval_limit_entry, eval_stop_entry, eval_stop_limit_entry, evaluate_order,
    evaluate_position, evaluate_subject, CandleOutcome, EvalError, EvalState, EvaluationResult,
    SnuId, Subject,
};
pub use oracle::{
    enumerate_paths, oracle_outcomes, simulate_path, simulate_ticks, verify_engine, TickPath,
    VerifyOutcome, DEFAULT_MAX_SEGMENTS,
};
