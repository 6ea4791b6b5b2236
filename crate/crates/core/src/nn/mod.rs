//! Small function-approximation stack: MLPs with hand-written
//! backpropagation, Adam, a replay buffer, TD3 training and Monte-Carlo
//! critic refitting.

mod adam;
pub mod checkpoint;
mod env;
mod finetune;
mod fit;
mod mlp;
mod replay;
mod td;
mod td3;

pub use adam::Adam;
pub use env::{EnvStep, Environment, SpecEnv, SpecSnapshot};
pub use finetune::{finetune_q_montecarlo, mean_and_se, rollout_return, FinetuneConfig, FinetuneReport, McLabel};
pub use fit::{fit_advantage_estimator, mse, regress, AdvantageEstimator, AdvantageSample, RegressionConfig};
pub use mlp::{Activation, ForwardTrace, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use td::{td_error, QFunction, TabularQ, TabularValue, ValueFunction};
pub use td3::{train_td3, train_td3_from, ActorCritic, EpisodeLog, Td3Config, TrainingLog};
