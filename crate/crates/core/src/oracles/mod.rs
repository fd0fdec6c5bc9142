//! Independent solvers used to cross-check the engine.

pub mod compare;
pub mod ctm;
pub mod front_tracking;
pub mod lp;

pub use compare::{compare_curves, thread_pool, LinkComparison, OracleReport, THREADS_VAR};
pub use ctm::{ctm_run, CtmConfig, CtmError, CtmOutput};
pub use front_tracking::{
    front_track, front_track_capped, solve_riemann, Front, FrontTrackError, FrontTrackingSolution, Interaction,
    LinkInitial,
};
pub use lp::{lp_diverge, lp_merge};
