//! The controller side: a sprite gridworld, goals from the generator, a
//! goal-matching reward and tabular Q-learning.

mod env;
mod episode;
mod goal;
mod qtable;
mod reward;

pub use env::{Action, GridConfig, GridEnv, StepOutcome};
pub use episode::{
    episode_rng, random_returns, returns_csv, run_episode, table_csv, train_controller,
    trajectory_csv, Control, ControllerConfig, ControllerRun, Episode, StateKey, StepRecord,
};
pub use goal::{compute_progress, propose_goal, refresh_goal, Goal};
pub use qtable::{learn_mdp, QTable};
pub use reward::{reward, Distance, RewardConfig, RewardReport};
