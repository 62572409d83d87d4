//! Algorithm layer shared by every learner: what an agent sees, what it is
//! rewarded with, how returns and losses are formed, and how actions are
//! chosen.

mod a2c;
mod iql;
mod observe;
mod policy;
mod reward;

pub use a2c::{actor_loss, advantages, critic_loss, n_step_returns, ActorLoss, CriticLoss};
pub use iql::{epsilon_greedy, epsilon_schedule, iql_update, LinearQ, QModel, EPSILON_FINAL};
pub use observe::{fingerprint_dim, ia2c_observe, ma2c_observe, normalized_wave, wave_dim, Observation, DEFAULT_WAVE_NORM};
pub use policy::{act, greedy_action, greedy_phase, sample_action, uniform_policy, Action};
pub use reward::{global_average_reward, local_reward, normalize_reward, spatial_reward, DEFAULT_REWARD_NORM};
