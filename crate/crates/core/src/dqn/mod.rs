//! LSTM Q-network, optimiser, replay memory and the training loop.

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod lstm;
pub mod replay;

pub use adam::Adam;
pub use agent::{
    argmax, discounted_return, eval_summary_csv, evaluate, reward_log_csv, reward_log_row, run_episode,
    select_action, td_targets, train, Agent, EpisodeLog, EvalRecord, QFunction, Schedule, EVAL_SUMMARY_HEADER,
    REWARD_LOG_HEADER,
};
pub use lstm::{NetShape, QNetwork};
pub use replay::{ReplayBuffer, Transition};
