//! C-V2X layer: channel gains, SINR and rates, CAM queues, observation
//! delay, communication rewards and policies, and the coupled simulator.
//!
//! `M` V2I links each own one uplink sub-channel; `L` V2V links may reuse
//! them. Every control interval of length `T` is split into `T_slots`
//! communication intervals of length `dt`.

mod channel;
mod config;
mod eval;
mod ivoi;
mod link;
mod policy;
mod reward;
mod sim;
mod ssdp;

pub use channel::{path_gain, sample_channel, ChannelState, LargeScale};
pub use config::{dbm_to_watts, ChannelConfig, Geometry, HowVoiWeight, NetworkConfig};
pub use eval::{objective_jcm, static_decision_eval, DecisionScore, DecisionSetup, Estimate};
pub use ivoi::{CommIvoi, LevelIvoiTable};
pub use link::{delay_step, queue_step, rates, shannon, sinr_v2i, sinr_v2v, CamQueue, CommAction, Rates};
pub use policy::{
    policy_always_transmit, policy_voi_gated, predecessor_inputs, CommDecision, CommPolicy, CommSignal, DEFAULT_GATE,
};
pub use reward::{comm_reward_how, comm_reward_when, discounted_slot_sum};
pub use sim::{
    full_information_returns, simulate_coupled, write_run_csv, ControlSide, CoupledConfig, CoupledRun, IntervalRecord,
    RunSummary, SlotRecord,
};
pub use ssdp::{build_comm_ssdp, CommEnvHandles, CommLayout, CommSsdpKind};

const MODULE: &str = "comm";
