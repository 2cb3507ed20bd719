//! Exact-gradient PG / NPG / Gauss–Newton methods: update rules for both
//! loops, the double-loop driver, stepsize bounds and the single-loop
//! descent–ascent schemes.

mod drivers;
mod gda;
mod rules;
mod trace;

pub use drivers::{
    double_loop, solve_inner, DoubleLoopOutcome, InnerOutcome, InnerStop, LoopConfig, ASCENT_SLACK, IR_LAMBDA_SLACK,
    IR_P_SLACK, STALL_EPS, STALL_WINDOW,
};
pub use gda::{gda_variant, GdaConfig, GdaOutcome, GdaScheme};
pub use rules::{
    inner_update, outer_update, stepsize_bounds, InnerBounds, OuterBounds, StepsizeBounds, UpdateRule, PROBE_RADIUS,
    PROBE_SAMPLES,
};
pub(crate) use rules::right_solve_sigma;
pub use trace::{RunStatus, RunTrace, TraceRecord, ZoColumns};
