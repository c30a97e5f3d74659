//! Controllers and the solvers behind them.

pub mod anticipative;
pub mod lookahead;
pub mod mpc;
pub mod sdp;
pub mod vfile;

pub use anticipative::{anticipative_cost, anticipative_plan, Anticipative};
pub use lookahead::{solve_lookahead, solve_plan, LookaheadPlan, LookaheadProblem, LookaheadSolution};
pub use mpc::{Mpc, Olfc, DEFAULT_HORIZON};
pub use sdp::{
    control_candidates, monotonicity_violations, sdp_backward, sdp_decide, sdp_value_function,
    sdpar_backward, sdpar_decide, sdpar_value_function, GridConfig, Sdp, SdpAr, ValueFunction,
};
pub use crate::model::Dummy;
