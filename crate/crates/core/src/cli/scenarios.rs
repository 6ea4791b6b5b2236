//! Scenario runners. Each returns its results in memory; [`run`] writes
//! them to the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{module_error, Controller, ExperimentConfig, ModuleConfigs, Scenario};
use super::plot::{write_tidy, TidyRow};
use crate::comm::{
    comm_reward_how, comm_reward_when, delay_step, discounted_slot_sum, full_information_returns, objective_jcm,
    policy_always_transmit, policy_voi_gated, queue_step, simulate_coupled, write_run_csv, CamQueue, ControlSide, CoupledConfig, CoupledRun, NetworkConfig,
};
use crate::dp::{exact_performance, value_iteration, PolicyTable, TabularSsdp};
use crate::error::{Error, Result};
use crate::nn::{train_td3, Environment};
use crate::rng::{derive_seed, rng_from_seed, with_pool};
use crate::ssdp::Policy;
use crate::vehicle::{
    dynamics_step, load_trajectory, synth_stop_and_go, Axis, FollowingEnv, PredecessorSource, VehicleGridConfig,
    VehicleGridModel, VehicleState,
};
use crate::voi::{
    evoi_montecarlo, ivoi_method_b, ivoi_trajectory, itvoi, itvoi_vehicle, lemma2_check, write_voi_csv, AdvantageSource,
    ItvoiOptions, JointModel, PolicyPair, PredictabilityModel, VoiKind, VoiMethod, VoiRecord,
};

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub pass: bool,
    /// 0 when every check passed, 2 otherwise.
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    scenario: Scenario,
    seed: i64,
    episodes: usize,
    out_dir: &'a Path,
    modules: &'a ModuleConfigs,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// Validates, runs the scenario and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let report = cfg.validate();
    if !report.valid {
        return Err(Error::Config(report.violations.join("; ")));
    }
    let seed = cfg.seed()?;
    let modules = cfg.modules()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut artifacts = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, &bytes)?;
        artifacts.push(p);
        Ok(())
    };
    let effective = EffectiveConfig {
        scenario: cfg.scenario,
        seed: cfg.seed,
        episodes: cfg.episodes,
        out_dir: &cfg.out_dir,
        modules: &modules,
    };
    emit(
        "effective_config.toml",
        toml::to_string_pretty(&effective).map_err(|e| Error::Config(e.to_string()))?.into_bytes(),
    )?;
    let pass = match cfg.scenario {
        Scenario::TabularProperties => {
            let s = tabular_properties(&modules, seed)?;
            emit("summary.json", to_json(&s)?)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["suite", "cases", "worst", "tolerance", "pass"])?;
            for r in &s.suites {
                w.write_record([r.name.clone(), r.cases.to_string(), r.worst.to_string(), r.tolerance.to_string(), r.pass.to_string()])?;
            }
            emit("suites.csv", w.into_inner().map_err(|e| Error::Config(e.to_string()))?)?;
            s.pass
        }
        Scenario::Case8Voi | Scenario::Custom => {
            let a = case8_voi(&modules, cfg.scenario, cfg.episodes, seed)?;
            emit("summary.json", to_json(&a.summary)?)?;
            let mut buf = Vec::new();
            write_voi_csv(&a.records, &mut buf)?;
            emit("voi.csv", buf)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["episode", "return_difference"])?;
            for (e, d) in a.episode_differences.iter().enumerate() {
                w.write_record([e.to_string(), d.to_string()])?;
            }
            emit("episodes.csv", w.into_inner().map_err(|e| Error::Config(e.to_string()))?)?;
            let mut buf = Vec::new();
            write_tidy(&a.series, &mut buf)?;
            emit("trajectory.csv", buf)?;
            a.summary.pass
        }
        Scenario::Case11Comm => {
            let a = case11_comm(&modules, cfg.episodes, seed)?;
            emit("summary.json", to_json(&a.summary)?)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "run", "policy", "discounted_throughput", "throughput_term", "voi_term", "rms_e_p", "transmissions",
                "deliveries", "zero_acc_fraction", "control_return", "evoi",
            ])?;
            for r in &a.runs {
                w.write_record([
                    r.run.to_string(),
                    r.policy.clone(),
                    r.discounted_throughput.to_string(),
                    r.throughput_term.to_string(),
                    r.voi_term.to_string(),
                    r.rms_e_p.to_string(),
                    r.transmissions.to_string(),
                    r.deliveries.to_string(),
                    r.zero_acc_fraction.to_string(),
                    r.control_return.to_string(),
                    r.evoi.to_string(),
                ])?;
            }
            emit("episodes.csv", w.into_inner().map_err(|e| Error::Config(e.to_string()))?)?;
            let mut buf = Vec::new();
            write_run_csv(&a.first_gated, &modules.network, &mut buf)?;
            emit("comm_log_gated.csv", buf)?;
            let mut buf = Vec::new();
            write_run_csv(&a.first_always, &modules.network, &mut buf)?;
            emit("comm_log_always.csv", buf)?;
            let mut buf = Vec::new();
            write_voi_csv(&a.records, &mut buf)?;
            emit("voi.csv", buf)?;
            let mut buf = Vec::new();
            write_tidy(&a.series, &mut buf)?;
            emit("trajectory.csv", buf)?;
            a.summary.pass
        }
    };
    Ok(RunOutcome {
        pass,
        exit_code: if pass { 0 } else { 2 },
        out_dir: dir,
        artifacts,
    })
}

// ---------------------------------------------------------------------------
// tabular_properties

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    /// Worst observed deviation in the suite's own units.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertiesSummary {
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
}

fn suite(name: &str, cases: usize, worst: f64, tolerance: f64, pass: bool) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        cases,
        worst,
        tolerance,
        pass,
    }
}

/// `J*` via value iteration, evaluated exactly for the greedy policy.
fn optimal_performance(mdp: &crate::dp::TabularMdp) -> Result<f64> {
    let sol = value_iteration(mdp, 1e-12)?;
    exact_performance(mdp, &sol.policy_table())
}

/// Worst `J*(augmented) − J*(original)` over random instances.
pub fn augmentation_dominance(n: usize, seed: u64) -> Result<f64> {
    let margins: Vec<Result<f64>> = with_pool(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let inst = TabularSsdp::random(derive_seed(seed, 0, i as u64), 50, 4, 4, true)?;
                Ok(optimal_performance(&inst.augmented_mdp()?)? - optimal_performance(&inst.to_mdp()?)?)
            })
            .collect()
    });
    margins.into_iter().try_fold(f64::INFINITY, |m, r| Ok(m.min(r?)))
}

/// Worst `|(J_inf − J_sup) − weighted IVoI|` over random instances with a
/// random deterministic inferior policy against the optimal one.
pub fn lemma2_identity(n: usize, seed: u64) -> Result<f64> {
    let gaps: Vec<Result<f64>> = with_pool(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mdp = TabularSsdp::random(derive_seed(seed, 1, i as u64), 50, 4, 4, true)?.to_mdp()?;
                let sup = value_iteration(&mdp, 1e-10)?.policy_table();
                let mut rng = rng_from_seed(derive_seed(seed, 2, i as u64));
                let inf = if i % 2 == 0 {
                    PolicyTable::Deterministic((0..mdp.n_states()).map(|_| rng.random_range(0..mdp.n_actions())).collect())
                } else {
                    PolicyTable::uniform(mdp.n_states(), mdp.n_actions())
                };
                Ok(lemma2_check(&mdp, &inf, &sup)?.gap)
            })
            .collect()
    });
    gaps.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}

/// Information that evolves independently of the state: ITVoI is zero.
pub fn itvoi_independent_model() -> JointModel {
    let (n_s, n_i, n_a) = (2, 2, 2);
    let ps = [[0.3, 0.7], [0.6, 0.4]];
    let pi = [[0.9, 0.1], [0.2, 0.8]];
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..n_s {
        for i in 0..n_i {
            for a in 0..n_a {
                let row_s = if a == 0 { ps[s] } else { ps[1 - s] };
                let mut row = Vec::new();
                for (sn, &p) in row_s.iter().enumerate() {
                    for (inx, &q) in pi[i].iter().enumerate() {
                        row.push(((sn, inx), p * q));
                    }
                }
                transitions.push(row);
                rewards.push(vec![((s + a) as f64, 1.0)]);
            }
        }
    }
    JointModel {
        n_s,
        n_i,
        n_a,
        transitions,
        rewards,
    }
}

/// The next state copies the current information bit: ITVoI is ln 2 under
/// uniform weighting of the bit.
pub fn itvoi_coupled_model() -> JointModel {
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for _s in 0..2 {
        for i in 0..2 {
            transitions.push(vec![((i, i), 1.0)]);
            rewards.push(vec![(0.0, 1.0)]);
        }
    }
    JointModel {
        n_s: 2,
        n_i: 2,
        n_a: 1,
        transitions,
        rewards,
    }
}

/// Worst absolute deviation of simulated free decay from `acc_0 (1 − T/ρ)^n`.
pub fn free_decay_error(params: &crate::vehicle::VehicleParams, steps: usize) -> f64 {
    let mut x = VehicleState::new(0.0, 0.0, 1.5);
    let d = 1.0 - params.t / params.rho;
    let mut worst = 0.0f64;
    for n in 1..=steps {
        x = dynamics_step(x, 0.0, 0.0, params).0;
        worst = worst.max((x.acc - 1.5 * d.powi(n as i32)).abs());
    }
    worst
}

/// Mismatches between the queue and delay laws and a direct transcription.
pub fn queue_delay_mismatches(cases: usize, cfg: &NetworkConfig, seed: u64) -> Result<usize> {
    let mut rng = rng_from_seed(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let q: f64 = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..=1.0) };
        let phi = rng.random_bool(0.5);
        let tau = rng.random_range(1..100usize);
        let rate = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..300.0) };
        let t = rng.random_range(0..=cfg.t_slots);
        let got = queue_step(CamQueue { q, phi, tau }, rate, cfg, t)?;
        let want = if t == 0 {
            if phi {
                1.0
            } else {
                0.0
            }
        } else {
            f64::max(0.0, q - rate * cfg.dt)
        };
        let want_tau = if phi && want == 0.0 { 1 } else { tau + 1 };
        if got.q != want || got.phi != phi || got.tau != tau || delay_step(&got) != want_tau {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Worst relative gap between the discounted how-reward sum and the
/// when-reward over random control intervals.
pub fn decomposition_gap(cases: usize, cfg: &NetworkConfig, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let v2i: Vec<Vec<f64>> = (0..cfg.t_slots)
            .map(|_| (0..cfg.m).map(|_| rng.random_range(0.0..5e6)).collect())
            .collect();
        let xi: Vec<f64> = (0..cfg.l).map(|_| -rng.random_range(0.0..3.0)).collect();
        let how: Vec<f64> = v2i.iter().enumerate().map(|(t, r)| comm_reward_how(r, t, &xi, cfg)).collect();
        let when = comm_reward_when(&v2i, &xi, cfg);
        worst = worst.max((discounted_slot_sum(&how, cfg.gamma_cm) - when).abs() / when.abs().max(1.0));
    }
    worst
}

pub fn tabular_properties(m: &ModuleConfigs, seed: u64) -> Result<PropertiesSummary> {
    let n = m.tabular_instances;
    let dom = augmentation_dominance(n, derive_seed(seed, 100, 0))?;
    let gap = lemma2_identity(n, derive_seed(seed, 101, 0))?;
    let ind = itvoi_independent_model();
    let ind_total = itvoi(&ind, &vec![1.0; ind.n_cells()], ItvoiOptions::default())?.total;
    let cpl = itvoi_coupled_model();
    let cpl_total = itvoi(&cpl, &vec![1.0; cpl.n_cells()], ItvoiOptions::default())?.total;
    let constant = PredictabilityModel::from_samples(3, &[(0, 0.8), (1, 0.8), (2, 0.8), (1, 0.8)])?;
    let const_total = itvoi_vehicle(&constant)?;
    let decay = free_decay_error(&m.vehicle, 100);
    let fuzz = queue_delay_mismatches(m.fuzz_cases, &m.network, derive_seed(seed, 102, 0))?;
    let dec = decomposition_gap(1000, &m.network, derive_seed(seed, 103, 0));
    let ln2 = std::f64::consts::LN_2;
    let suites = vec![
        suite("augmentation_dominance", n, dom, -1e-10, dom >= -1e-10),
        suite("lemma2_identity", n, gap, 1e-8, gap <= 1e-8),
        suite("itvoi_independent", 1, ind_total.abs(), 1e-12, ind_total.abs() <= 1e-12),
        suite("itvoi_coupled", 1, (cpl_total - ln2).abs(), 1e-12, (cpl_total - ln2).abs() <= 1e-12),
        suite("itvoi_constant_acceleration", 1, const_total.abs(), 1e-12, const_total.abs() <= 1e-12),
        suite("free_decay", 100, decay, 1e-12, decay <= 1e-12),
        suite("queue_delay_fuzz", m.fuzz_cases, fuzz as f64, 0.0, fuzz == 0),
        suite("reward_decomposition", 1000, dec, 1e-12, dec <= 1e-12),
    ];
    let pass = suites.iter().all(|s| s.pass);
    Ok(PropertiesSummary { suites, pass })
}

// ---------------------------------------------------------------------------
// case8_voi

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case8Summary {
    pub scenario: String,
    pub controller: Controller,
    pub horizon: usize,
    pub episodes: usize,
    pub grid_states: usize,
    pub evomi: f64,
    pub evomi_ci: (f64, f64),
    pub mean_return_inf: f64,
    pub mean_return_sup: f64,
    pub ivomi_mean_abs_zero: f64,
    pub ivomi_mean_abs_active: f64,
    pub n_zero_steps: usize,
    pub n_active_steps: usize,
    /// Zero-segment over active-segment mean |IVoMI|.
    pub ivomi_ratio: f64,
    pub zero_acc_fraction: f64,
    /// `E[−ln p(acc | S, u)]` along the superior trajectory.
    pub itvoi_predictability: f64,
    pub pass: bool,
}

pub struct Case8Artifacts {
    pub summary: Case8Summary,
    pub records: Vec<VoiRecord>,
    /// Per-episode `J_inf − J_sup` with paired seeds.
    pub episode_differences: Vec<f64>,
    pub series: Vec<TidyRow>,
}

fn snap(axis: &Axis, x: f64) -> usize {
    if axis.n <= 1 {
        return 0;
    }
    let r = ((x - axis.lo) / (axis.hi - axis.lo) * (axis.n - 1) as f64).round();
    r.clamp(0.0, (axis.n - 1) as f64) as usize
}

/// `(follower state, control)` cell on the configured grid.
fn control_cell(g: &VehicleGridConfig, obs: &[f64], u: f64) -> usize {
    let s = (snap(&g.e_p, obs[0]) * g.e_v.n + snap(&g.e_v, obs[1])) * g.acc.n + snap(&g.acc, obs[2]);
    s * g.actions.n + snap(&g.actions, u)
}

/// States and actions along one episode.
fn episode_path<E: Environment>(env: &E, policy: &dyn Policy, inferior: bool, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut env = env.clone();
    let mut rng = rng_from_seed(seed);
    env.reset(&mut rng)?;
    let mut out = Vec::new();
    loop {
        let obs = env.observation();
        let view = if inferior { env.inferior_observation() } else { obs.clone() };
        let a = policy.act(&view);
        out.push((obs, a[0]));
        if env.step(&a, &mut rng)?.done {
            break;
        }
    }
    Ok(out)
}

fn case8_trace(m: &ModuleConfigs, scenario: Scenario, seed: u64) -> Result<(Arc<Vec<f64>>, usize)> {
    if scenario == Scenario::Custom {
        let path = m
            .trajectory_path
            .as_ref()
            .ok_or_else(|| module_error("the custom scenario needs trajectory_path"))?;
        let tr = load_trajectory(path, &m.trajectory_columns, m.vehicle.t, m.vehicle.acc_max)?;
        if tr.acc.len() < 2 {
            return Err(module_error("recorded trajectory has fewer than two samples"));
        }
        let horizon = m.horizon.min(tr.acc.len() - 1);
        Ok((Arc::new(tr.acc), horizon))
    } else {
        let tr = synth_stop_and_go(&m.trajectory, derive_seed(seed, 1, 0))?;
        Ok((Arc::new(tr.acc), m.horizon))
    }
}

pub fn case8_voi(m: &ModuleConfigs, scenario: Scenario, episodes: usize, seed: u64) -> Result<Case8Artifacts> {
    let (trace, horizon) = case8_trace(m, scenario, seed)?;
    let gamma = m.grid.gamma;
    let env = FollowingEnv::new(m.vehicle, m.reward, PredecessorSource::Trace(trace.clone()), horizon, gamma)?
        .with_dummy_value(m.dummy_value);
    match m.controller {
        Controller::Dp => {
            let model = VehicleGridModel::build(&m.vehicle, &m.reward, &m.grid, derive_seed(seed, 2, 0))?;
            case8_dp(m, scenario, &env, &model, &trace, horizon, episodes, seed)
        }
        Controller::Td3 => {
            let train_env = FollowingEnv::new(
                m.vehicle,
                m.reward,
                PredecessorSource::StopAndGo(m.trajectory.clone()),
                horizon.min(m.trajectory.duration - 1),
                gamma,
            )?;
            let (ac, _) = train_td3(&train_env, &m.td3, derive_seed(seed, 3, 0))?;
            let dummy = m.dummy_value;
            let ac_ref = &ac;
            let inf = move |o: &[f64]| {
                let mut o = o.to_vec();
                o[3] = dummy;
                Policy::act(ac_ref, &o)
            };
            let critic = ivoi_method_b(&ac, &ac, true)?;
            case8_core(m, scenario, &env, &ac, &inf, &critic, 0, &trace, horizon, episodes, seed)
        }
    }
}

/// The DP-controller branch of [`case8_voi`] with an already built vehicle
/// model.
pub fn case8_with_model(
    m: &ModuleConfigs,
    scenario: Scenario,
    model: &VehicleGridModel,
    episodes: usize,
    seed: u64,
) -> Result<Case8Artifacts> {
    let (trace, horizon) = case8_trace(m, scenario, seed)?;
    let env = FollowingEnv::new(m.vehicle, m.reward, PredecessorSource::Trace(trace.clone()), horizon, m.grid.gamma)?
        .with_dummy_value(m.dummy_value);
    case8_dp(m, scenario, &env, model, &trace, horizon, episodes, seed)
}

#[allow(clippy::too_many_arguments)]
fn case8_dp(
    m: &ModuleConfigs,
    scenario: Scenario,
    env: &FollowingEnv,
    model: &VehicleGridModel,
    trace: &[f64],
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<Case8Artifacts> {
    let sup = model.sup_policy();
    let inf = model.inf_policy(m.dummy_value);
    case8_core(m, scenario, env, &sup, &inf, model, model.n_states(), trace, horizon, episodes, seed)
}

#[allow(clippy::too_many_arguments)]
fn case8_core(
    m: &ModuleConfigs,
    scenario: Scenario,
    env: &FollowingEnv,
    sup: &dyn Policy,
    inf: &dyn Policy,
    critic: &dyn AdvantageSource,
    grid_states: usize,
    trace: &[f64],
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<Case8Artifacts> {
    let pair = PolicyPair::new(inf, sup).with_critic(critic);
    let est = evoi_montecarlo(env, &pair, episodes, horizon, derive_seed(seed, 4, 0))?;
    let method = if m.controller == Controller::Dp { VoiMethod::ExactDp } else { VoiMethod::B };
    let ivomi = ivoi_trajectory(env, &pair, method, horizon, derive_seed(seed, 5, 0))?;
    let (mut z, mut zn, mut a, mut an) = (0.0, 0usize, 0.0, 0usize);
    for r in &ivomi {
        let acc = r.state[3];
        if acc.abs() < 1e-12 {
            z += r.value.abs();
            zn += 1;
        } else if acc.abs() >= 0.5 {
            a += r.value.abs();
            an += 1;
        }
    }
    let z_mean = if zn > 0 { z / zn as f64 } else { 0.0 };
    let a_mean = if an > 0 { a / an as f64 } else { 0.0 };
    let ratio = if a_mean > 0.0 { z_mean / a_mean } else { f64::NAN };

    let path_seed = derive_seed(seed, 6, 0);
    let sup_path = episode_path(env, sup, false, path_seed)?;
    let inf_path = episode_path(env, inf, true, path_seed)?;
    let samples: Vec<(usize, f64)> = sup_path.iter().map(|(o, u)| (control_cell(&m.grid, o, *u), o[3])).collect();
    let n_cells = m.grid.e_p.n * m.grid.e_v.n * m.grid.acc.n * m.grid.actions.n;
    let itv = itvoi_vehicle(&PredictabilityModel::from_samples(n_cells, &samples)?)?;

    let mut series = Vec::new();
    for (policy, path) in [("sup", &sup_path), ("inf", &inf_path)] {
        for (k, (o, _)) in path.iter().enumerate() {
            for (name, v) in [("acc_pred", o[3]), ("e_p", o[0]), ("e_v", o[1]), ("acc_follower", o[2])] {
                series.push(TidyRow::new(k, name, policy, v));
            }
        }
    }
    for r in &ivomi {
        series.push(TidyRow::new(r.k.unwrap_or(0), "ivoi", "inf", r.value));
    }

    let (lo, hi) = est.record.ci.unwrap_or((f64::NAN, f64::NAN));
    let mut records = vec![est.record.clone()];
    records.push(
        VoiRecord::aggregate(VoiKind::ITVoI, VoiMethod::KlBruteForce, itv).with_note("predictability of acc_pred given (S, u)"),
    );
    records.extend(ivomi);
    let zero_frac = trace[..horizon].iter().filter(|x| x.abs() < 1e-12).count() as f64 / horizon as f64;
    let summary = Case8Summary {
        scenario: scenario.name().into(),
        controller: m.controller,
        horizon,
        episodes,
        grid_states,
        evomi: est.record.value,
        evomi_ci: (lo, hi),
        mean_return_inf: est.mean_inf,
        mean_return_sup: est.mean_sup,
        ivomi_mean_abs_zero: z_mean,
        ivomi_mean_abs_active: a_mean,
        n_zero_steps: zn,
        n_active_steps: an,
        ivomi_ratio: ratio,
        zero_acc_fraction: zero_frac,
        itvoi_predictability: itv,
        pass: ratio <= 0.1 && hi < 0.0,
    };
    Ok(Case8Artifacts {
        summary,
        records,
        episode_differences: est.differences.clone(),
        series,
    })
}

// ---------------------------------------------------------------------------
// case11_comm

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case11Run {
    pub run: usize,
    pub policy: String,
    pub discounted_throughput: f64,
    pub throughput_term: f64,
    pub voi_term: f64,
    pub rms_e_p: f64,
    pub transmissions: usize,
    pub deliveries: usize,
    pub zero_acc_fraction: f64,
    pub control_return: f64,
    /// `J_inf − J_sup` of the run against full information.
    pub evoi: f64,
    /// `objective_jcm` with this run's EVoI.
    pub jcm: f64,
    /// Largest `|Σ γ^t how-reward − when-reward|` over the control intervals.
    pub max_decomposition_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub mean_discounted_throughput: f64,
    pub mean_rms_e_p: f64,
    pub mean_jcm: f64,
    pub mean_evoi: f64,
    pub mean_transmissions: f64,
    pub throughput_term: f64,
    pub voi_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case11Summary {
    pub runs: usize,
    pub horizon: usize,
    pub gate: f64,
    pub gated: PolicyStats,
    pub always: PolicyStats,
    /// Gated minus always-transmit mean discounted throughput.
    pub throughput_gain: f64,
    /// `|rms_gated − rms_always| / rms_always` of the mean RMS position error.
    pub rms_e_p_relative_difference: f64,
    pub mean_zero_acc_fraction: f64,
    pub min_zero_acc_fraction: f64,
    pub max_decomposition_gap: f64,
    pub throughput_ge_always: bool,
    pub strictly_greater_where_required: bool,
    pub pass: bool,
}

pub struct Case11Artifacts {
    pub summary: Case11Summary,
    pub runs: Vec<Case11Run>,
    pub first_gated: CoupledRun,
    pub first_always: CoupledRun,
    pub records: Vec<VoiRecord>,
    pub series: Vec<TidyRow>,
}

fn run_stats(run: usize, r: &CoupledRun, sup: &[f64], net: &NetworkConfig) -> Case11Run {
    let evoi: f64 = r.summary.control_return.iter().zip(sup).map(|(i, s)| i - s).sum();
    let gap = r
        .intervals
        .iter()
        .map(|iv| (iv.reward_how_sum - iv.reward_when).abs())
        .fold(0.0f64, f64::max);
    Case11Run {
        run,
        policy: r.summary.policy.clone(),
        discounted_throughput: r.summary.discounted_throughput,
        throughput_term: r.summary.throughput_term,
        voi_term: r.summary.voi_term,
        rms_e_p: r.summary.rms_e_p,
        transmissions: r.summary.transmissions,
        deliveries: r.summary.deliveries,
        zero_acc_fraction: r.summary.zero_acc_fraction,
        control_return: r.summary.control_return.iter().sum(),
        evoi,
        jcm: objective_jcm(&r.intervals, &[evoi], net),
        max_decomposition_gap: gap,
    }
}

fn policy_stats(runs: &[&Case11Run]) -> PolicyStats {
    let n = runs.len().max(1) as f64;
    let mean = |f: fn(&Case11Run) -> f64| runs.iter().map(|r| f(r)).sum::<f64>() / n;
    PolicyStats {
        mean_discounted_throughput: mean(|r| r.discounted_throughput),
        mean_rms_e_p: mean(|r| r.rms_e_p),
        mean_jcm: mean(|r| r.jcm),
        mean_evoi: mean(|r| r.evoi),
        mean_transmissions: mean(|r| r.transmissions as f64),
        throughput_term: mean(|r| r.throughput_term),
        voi_term: mean(|r| r.voi_term),
    }
}

/// Shared control side for the communication experiments.
pub fn control_side(m: &ModuleConfigs, model: Arc<VehicleGridModel>) -> ControlSide {
    ControlSide {
        policy: Arc::new(model.sup_policy()),
        gamma: model.config.gamma,
        critic: model,
        params: m.vehicle,
        weights: m.reward,
        dummy_value: m.dummy_value,
    }
}

pub fn case11_comm(m: &ModuleConfigs, episodes: usize, seed: u64) -> Result<Case11Artifacts> {
    let model = Arc::new(VehicleGridModel::build(&m.vehicle, &m.reward, &m.grid, derive_seed(seed, 2, 0))?);
    case11_with_model(m, model, episodes, seed)
}

/// [`case11_comm`] with an already built vehicle model.
pub fn case11_with_model(m: &ModuleConfigs, model: Arc<VehicleGridModel>, episodes: usize, seed: u64) -> Result<Case11Artifacts> {
    let control = control_side(m, model);
    let cfg = CoupledConfig {
        network: m.network.clone(),
        geometry: None,
        horizon: m.horizon,
    };
    let gated = policy_voi_gated(m.gate);
    let always = policy_always_transmit();
    let l_n = m.network.l;
    type Pair = (Vec<Arc<Vec<f64>>>, CoupledRun, CoupledRun, Vec<f64>);
    let per_run: Vec<Result<Pair>> = with_pool(|| {
        (0..episodes)
            .into_par_iter()
            .map(|r| {
                let traces: Vec<Arc<Vec<f64>>> = (0..l_n)
                    .map(|l| synth_stop_and_go(&m.trajectory, derive_seed(seed, 10, (r * l_n + l) as u64)).map(|t| Arc::new(t.acc)))
                    .collect::<Result<_>>()?;
                let s = derive_seed(seed, 11, r as u64);
                let g = simulate_coupled(&traces, &control, &gated, &cfg, s)?;
                let a = simulate_coupled(&traces, &control, &always, &cfg, s)?;
                let sup = full_information_returns(&traces, &control, cfg.horizon, s)?;
                Ok((traces, g, a, sup))
            })
            .collect()
    });
    let per_run: Vec<Pair> = per_run.into_iter().collect::<Result<_>>()?;
    let mut runs = Vec::with_capacity(2 * episodes);
    for (r, (_, g, a, sup)) in per_run.iter().enumerate() {
        runs.push(run_stats(r, g, sup, &m.network));
        runs.push(run_stats(r, a, sup, &m.network));
    }
    let g_runs: Vec<&Case11Run> = runs.iter().step_by(2).collect();
    let a_runs: Vec<&Case11Run> = runs.iter().skip(1).step_by(2).collect();
    let gs = policy_stats(&g_runs);
    let as_ = policy_stats(&a_runs);
    let strict_ok = g_runs
        .iter()
        .zip(&a_runs)
        .all(|(g, a)| g.zero_acc_fraction < 0.2 || g.discounted_throughput > a.discounted_throughput);
    let zero: Vec<f64> = g_runs.iter().map(|r| r.zero_acc_fraction).collect();
    let rel = (gs.mean_rms_e_p - as_.mean_rms_e_p).abs() / as_.mean_rms_e_p.max(f64::MIN_POSITIVE);
    let max_gap = runs.iter().map(|r| r.max_decomposition_gap).fold(0.0f64, f64::max);
    let ge = gs.mean_discounted_throughput >= as_.mean_discounted_throughput;
    let mean_zero = zero.iter().sum::<f64>() / zero.len().max(1) as f64;
    let strict_mean = mean_zero < 0.2 || gs.mean_discounted_throughput > as_.mean_discounted_throughput;
    let summary = Case11Summary {
        runs: episodes,
        horizon: m.horizon,
        gate: m.gate,
        throughput_gain: gs.mean_discounted_throughput - as_.mean_discounted_throughput,
        rms_e_p_relative_difference: rel,
        mean_zero_acc_fraction: mean_zero,
        min_zero_acc_fraction: zero.iter().copied().fold(f64::INFINITY, f64::min),
        max_decomposition_gap: max_gap,
        throughput_ge_always: ge,
        strictly_greater_where_required: strict_ok && strict_mean,
        pass: ge && strict_ok && strict_mean && rel <= 0.05 && max_gap <= 1e-12,
        gated: gs,
        always: as_,
    };

    let (_, first_g, first_a, _) = per_run.into_iter().next().ok_or_else(|| module_error("no runs"))?;
    let mut series = Vec::new();
    let mut records = Vec::new();
    for (name, run) in [("gated", &first_g), ("always", &first_a)] {
        for iv in &run.intervals {
            let slots = &run.slots[iv.k * m.network.t_slots..(iv.k + 1) * m.network.t_slots];
            let mean_rate = slots.iter().map(|s| s.rate_v2i.iter().sum::<f64>()).sum::<f64>() / slots.len() as f64;
            series.push(TidyRow::new(iv.k, "throughput", name, mean_rate));
            series.push(TidyRow::new(iv.k, "ivoi", name, iv.ivoi.iter().sum()));
            series.push(TidyRow::new(iv.k, "e_p", name, iv.e_p.iter().sum::<f64>() / iv.e_p.len() as f64));
            series.push(TidyRow::new(iv.k, "phi", name, iv.phi.iter().filter(|&&p| p).count() as f64));
            if name == "gated" {
                let state = vec![iv.e_p[0], iv.e_v[0], iv.acc[0], iv.acc_pred[0]];
                records.push(
                    VoiRecord::aggregate(VoiKind::IVoMI, VoiMethod::ExactDp, iv.ivoi.iter().sum())
                        .at(iv.k, state, iv.u.clone())
                        .with_note("gated"),
                );
            }
        }
    }
    records.insert(
        0,
        VoiRecord::aggregate(VoiKind::EVoMI, VoiMethod::MonteCarlo, summary.gated.mean_evoi).with_note("gated vs full information"),
    );
    records.insert(
        1,
        VoiRecord::aggregate(VoiKind::EVoMI, VoiMethod::MonteCarlo, summary.always.mean_evoi).with_note("always vs full information"),
    );
    Ok(Case11Artifacts {
        summary,
        runs,
        first_gated: first_g,
        first_always: first_a,
        records,
        series,
    })
}
