//! Value of information: expected and immediate utility-based VoI with
//! Monte-Carlo, regression, critic and TD estimators, the information-
//! theoretic ITVoI, and the EVoI/IVoI consistency check.

mod itvoi;
mod lemma;
mod record;
mod utility;

pub use itvoi::{itvoi, itvoi_vehicle, occupancy_weighting, ItvoiOptions, ItvoiReport, JointModel, PredictabilityModel};
pub use lemma::{lemma2_check, lemma2_montecarlo, Lemma2Report, EXACT_TOL};
pub use record::{write_voi_csv, InfoScenario, VoiKind, VoiMethod, VoiRecord};
pub use utility::{
    collect_inferior_transitions, evoi, evoi_montecarlo, ivoi, ivoi_method_a, ivoi_method_b, ivoi_method_c, ivoi_trajectory,
    t_interval, AdvantageSource, EvoiEstimate, MethodAConfig, MethodALabel, MethodAResult, MethodB, PairMode, PolicyPair,
    QFunctionSync, SupTransition, TabularCritic,
};
