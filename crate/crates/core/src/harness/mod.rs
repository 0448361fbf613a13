//! Training loop, detection-delay evaluation over replications, experiment
//! presets, and report files.

pub mod config;
pub mod report;

pub use config::{
    AlarmDof, CpeRefresh, CpeSource, DiscoverySettings, ExperimentConfig, Mode,
    MonitorSettings, NetConfig,
};
pub use report::{svg_line_chart, ResultRow};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::discovery::{cpe_from_weighted_dag, discover_cpe_on_subset, CpeMatrix};
use crate::envir::{reset, MonitorConfig, RewardConfig};
use crate::linalg::Mat;
use crate::mix_seed;
use crate::monitor::{alarm_check, CausalState};
use crate::stats::chi2_quantile;
use crate::qnet::{
    boltzmann, clip_grad, forward, loss_and_grad, sample_distinct, select_top_m, sgd_step,
    sync_target, NetParams, ReplayBuffer, SyncMode, Transition,
};
use crate::streams::{
    assign_sem_weights, generate_streams, sample_er_dag, CausalGraph, ShiftPattern, ShiftSpec,
    WeightedDag,
};
use crate::{Error, Result};

const TAG_DAG: u64 = 1;
const TAG_WEIGHTS: u64 = 2;
const TAG_STREAMS: u64 = 3;
const TAG_EXPLORE: u64 = 4;
const TAG_INIT: u64 = 5;
const TAG_REPLAY: u64 = 6;
const TAG_EVAL: u64 = 7;
const TAG_PERM: u64 = 8;
const TAG_ONSET: u64 = 9;
const TAG_CALIB: u64 = 10;

/// Default SEM edge-weight magnitude range.
const WEIGHT_LOW: f64 = 0.3;
const WEIGHT_HIGH: f64 = 0.8;

/// Trained artifact: final online parameters, per-episode cumulative
/// rewards, and the propagation matrix in effect at the end of training.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: NetParams,
    pub curve: Vec<f64>,
    pub cpe: CpeMatrix,
}

/// Detection-delay summary over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AddReport {
    pub mean_add: f64,
    pub stderr: f64,
    pub replications: usize,
    /// Horizon-censored delays, one per replication.
    pub per_rep: Vec<f64>,
    pub false_alarm_rate: f64,
}

/// The ground-truth system for an experiment seed: one DAG shared by every
/// episode and evaluation replication.
pub fn experiment_system(cfg: &ExperimentConfig) -> Result<WeightedDag> {
    let graph = sample_er_dag(cfg.p, cfg.edge_prob, mix_seed(cfg.seed, TAG_DAG, 0))?;
    assign_sem_weights(&graph, WEIGHT_LOW, WEIGHT_HIGH, mix_seed(cfg.seed, TAG_WEIGHTS, 0))
}

/// Label-permuted copy of the system: every edge exists between the wrong
/// pair of streams.
fn permuted_system(dag: &WeightedDag, seed: u64) -> WeightedDag {
    let p = dag.graph.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let mut adjacency = vec![vec![false; p]; p];
    let mut weights = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if dag.graph.adjacency[i][j] {
                adjacency[perm[i]][perm[j]] = true;
                weights[perm[i]][perm[j]] = dag.weights[i][j];
            }
        }
    }
    let topo_order: Vec<usize> = dag.graph.topo_order.iter().map(|&v| perm[v]).collect();
    WeightedDag {
        graph: CausalGraph { p, adjacency, topo_order },
        weights,
    }
}

fn shift_spec(cfg: &ExperimentConfig, delta: f64, onset: usize) -> ShiftSpec {
    ShiftSpec {
        shifted_indices: (0..cfg.k).collect(),
        pattern: cfg.pattern,
        delta,
        onset,
        duration: cfg.horizon.saturating_sub(onset),
        noise_sigma: cfg.noise_sigma,
    }
}

/// Monitor covariance: either `sigma * I`, or a phase-I calibrated diagonal
/// estimated from a no-shift batch of the same system (so the null law of
/// the statistic matches the chi-square threshold).
pub fn calibrated_monitor(cfg: &ExperimentConfig, dag: &WeightedDag) -> Result<MonitorConfig> {
    let mut sigma = Mat::identity(cfg.p);
    if cfg.monitor.calibrate {
        let null_spec = ShiftSpec {
            shifted_indices: vec![],
            pattern: cfg.pattern,
            delta: 0.0,
            onset: cfg.horizon,
            duration: 0,
            noise_sigma: cfg.noise_sigma,
        };
        let rows = cfg.horizon.max(200);
        let batch =
            generate_streams(dag, &null_spec, rows, mix_seed(cfg.seed, TAG_CALIB, 0))?;
        for j in 0..cfg.p {
            let mean: f64 = batch.values.iter().map(|r| r[j]).sum::<f64>() / rows as f64;
            let var: f64 = batch
                .values
                .iter()
                .map(|r| (r[j] - mean) * (r[j] - mean))
                .sum::<f64>()
                / (rows as f64 - 1.0);
            sigma.set(j, j, var.max(1e-6));
        }
    }
    sigma.scale(cfg.monitor.sigma);
    Ok(MonitorConfig { sigma, lambda: cfg.monitor.lambda })
}

fn episode_gradient_budget(cfg: &ExperimentConfig) -> usize {
    cfg.horizon.clamp(200, 400)
}

/// Fixed input normalization for the policy network.
///
/// The statistic rows are expressed in units of the per-stream alarm level
/// (threshold / p) and staleness in full-rotation units (y / p), so network
/// inputs stay O(1) regardless of horizon or dimension. Both training and
/// evaluation apply the same map; it is a deterministic function of the
/// config.
pub fn policy_input(cfg: &ExperimentConfig, state: &CausalState) -> Vec<f64> {
    let p = cfg.p as f64;
    let stat_scale = chi2_quantile(cfg.p, 1.0 - cfg.monitor.zeta) / p;
    let mut flat = state.flatten();
    for v in flat.iter_mut().take(2 * cfg.p) {
        *v /= stat_scale;
    }
    for v in flat.iter_mut().skip(2 * cfg.p) {
        *v /= p;
    }
    flat
}

/// Train the double Q-network on freshly generated episodes.
///
/// Each episode draws a new stream batch with a random onset in
/// `[horizon/4, horizon/2]`, refreshes the propagation matrix according to
/// the configured source, explores with a Boltzmann policy over per-stream
/// Q-values, and interleaves gradient steps with environment steps (200-400
/// updates per episode). Fully deterministic for a fixed config.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let dag = experiment_system(cfg)?;
    let alpha_ent = cfg.effective_alpha_ent();
    let causal = cfg.mode == Mode::Causal;

    let fixed_cpe: Option<CpeMatrix> = if !causal {
        Some(CpeMatrix::identity(cfg.p))
    } else {
        match cfg.cpe_source {
            CpeSource::GroundTruth => Some(cpe_from_weighted_dag(&dag)),
            CpeSource::Adversarial => Some(cpe_from_weighted_dag(&permuted_system(
                &dag,
                mix_seed(cfg.seed, TAG_PERM, 0),
            ))),
            CpeSource::Identity => Some(CpeMatrix::identity(cfg.p)),
            CpeSource::Discovered => None,
        }
    };

    let monitor_cfg = calibrated_monitor(cfg, &dag)?;
    let mut online = NetParams::init(&cfg.net_layout(), mix_seed(cfg.seed, TAG_INIT, 0));
    let mut target = online.clone();
    let mut replay = ReplayBuffer::new(cfg.net.replay_capacity, mix_seed(cfg.seed, TAG_REPLAY, 0));
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut cpe = fixed_cpe.clone().unwrap_or_else(|| CpeMatrix::identity(cfg.p));
    // rolling buffer of recent in-control rows + which streams have been
    // observed, for discovery
    let mut window_rows: Vec<Vec<f64>> = Vec::new();
    let mut window_observed: Vec<bool> = vec![false; cfg.p];
    let mut estimated_once = false;
    let mut opt_steps_total: usize = 0;
    let budget = episode_gradient_budget(cfg);

    for episode in 0..cfg.episodes {
        // propagation refresh from past episodes' in-control observations
        if causal && fixed_cpe.is_none() {
            let refresh_now = match cfg.discovery.cpe_refresh {
                CpeRefresh::PerEpisode => episode > 0 && window_rows.len() >= 10,
                // wait until the rolling buffer has filled once
                CpeRefresh::Once => {
                    !estimated_once && window_rows.len() >= cfg.discovery.window.max(10)
                }
                CpeRefresh::Never => false,
            };
            if refresh_now {
                let subset: Vec<usize> =
                    (0..cfg.p).filter(|&i| window_observed[i]).collect();
                cpe = discover_cpe_on_subset(
                    &window_rows,
                    &subset,
                    cfg.discovery.alpha_sig,
                    cfg.discovery.max_cond,
                )?;
                estimated_once = true;
            }
        }

        let mut episode_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, TAG_EXPLORE, episode as u64));
        let onset_lo = (cfg.horizon / 4).max(1);
        let onset_hi = (cfg.horizon / 2).max(onset_lo + 1);
        let onset = {
            use rand::RngExt;
            let mut r = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, TAG_ONSET, episode as u64));
            r.random_range(onset_lo..onset_hi)
        };
        let spec = shift_spec(cfg, cfg.delta_train, onset);
        let batch = generate_streams(
            &dag,
            &spec,
            cfg.horizon,
            mix_seed(cfg.seed, TAG_STREAMS, episode as u64),
        )?;
        let window_src = batch.values.clone();
        let reward_cfg = RewardConfig::for_shift(cfg.p, &spec.shifted_indices, onset, spec.duration);
        let (mut env, s0) = reset(batch, reward_cfg, &monitor_cfg, cpe.clone())?;
        env.zero_phi = !causal;

        let tau = (cfg.net.tau0 * cfg.net.tau_decay.powi(episode as i32))
            .max(cfg.net.tau_floor);
        let mut flat = policy_input(cfg, &s0);
        let mut total_reward = 0.0;
        let mut episode_steps = 0usize;
        let mut selected_any: Vec<bool> = vec![false; cfg.p];
        for t in 1..=cfg.horizon {
            let q = forward(&online, &flat)?;
            let pi = boltzmann(&q, tau);
            let action = sample_distinct(&pi, cfg.m, &mut episode_rng)?;
            let out = env.step(&action).map_err(|e| {
                Error::Invalid(format!("episode {episode}, step {t}: {e}"))
            })?;
            for &i in &action {
                selected_any[i] = true;
            }
            let mask = if causal { out.truth_mask.clone() } else { vec![0u8; cfg.p] };
            let next_flat = policy_input(cfg, &out.causal_state);
            total_reward += out.reward;
            replay.push(Transition {
                state: flat,
                action,
                reward: out.reward,
                next_state: next_flat.clone(),
                causal_mask: mask,
            });
            flat = next_flat;

            // keep the per-episode optimizer work inside the 200-400 band
            let due = budget * t / cfg.horizon;
            while episode_steps < due && replay.len() >= cfg.net.batch {
                let minibatch = replay.sample(cfg.net.batch);
                let mut lg = loss_and_grad(&online, &target, &minibatch, alpha_ent, tau, cfg.net.gamma)
                    .map_err(|e| {
                        Error::NonFinite(format!(
                            "episode {episode}, optimizer step {opt_steps_total}: {e}"
                        ))
                    })?;
                clip_grad(&mut lg.grad, cfg.net.grad_clip);
                online = sgd_step(&online, &lg.grad, cfg.net.lr)?;
                episode_steps += 1;
                opt_steps_total += 1;
                if opt_steps_total.is_multiple_of(cfg.net.sync_period) {
                    target = sync_target(&online, &target, SyncMode::Hard);
                }
            }
        }
        curve.push(total_reward);

        if causal && fixed_cpe.is_none() {
            // discovery consumes in-control rows only: each episode
            // contributes its pre-onset rows (the changepoint would inject
            // spurious cross-correlation among co-shifted streams), rolled
            // into a buffer capped at the configured window
            let end = (onset - 1).min(window_src.len());
            let start = end.saturating_sub(cfg.discovery.window);
            window_rows.extend_from_slice(&window_src[start..end]);
            let overflow = window_rows.len().saturating_sub(cfg.discovery.window);
            if overflow > 0 {
                window_rows.drain(..overflow);
            }
            for (seen, sel) in window_observed.iter_mut().zip(selected_any.iter()) {
                *seen |= *sel;
            }
        }
    }
    Ok(TrainResult { params: online, curve, cpe })
}

/// Evaluate detection delay with a greedy top-m policy.
///
/// Each replication generates a fresh test batch (onset at `horizon/4`),
/// rolls the policy forward, and records the first alarm at or after onset;
/// replications with no alarm are censored at the horizon, and alarms
/// strictly before onset count toward the false-alarm rate. Replications
/// are split across `cfg.workers` threads; the result only depends on the
/// replication index, never on the worker count.
pub fn evaluate_add(
    params: &NetParams,
    cpe: &CpeMatrix,
    cfg: &ExperimentConfig,
    replications: usize,
) -> Result<AddReport> {
    cfg.validate()?;
    if replications == 0 {
        return Err(Error::Invalid("need at least one replication".into()));
    }
    let dag = experiment_system(cfg)?;
    let monitor_cfg = calibrated_monitor(cfg, &dag)?;
    let onset = (cfg.horizon / 4).max(1);
    let workers = cfg.workers.min(replications).max(1);
    let mut results: Vec<Option<(f64, bool)>> = vec![None; replications];

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for chunk_start in (0..replications).step_by(replications.div_ceil(workers)) {
            let chunk_end = (chunk_start + replications.div_ceil(workers)).min(replications);
            let dag_ref = &dag;
            let mc_ref = &monitor_cfg;
            let handle = scope.spawn(move || -> Result<Vec<(usize, f64, bool)>> {
                let mut out = Vec::new();
                for rep in chunk_start..chunk_end {
                    let (delay, false_alarm) =
                        run_single_eval(params, cpe, cfg, dag_ref, mc_ref, onset, rep)?;
                    out.push((rep, delay, false_alarm));
                }
                Ok(out)
            });
            handles.push(handle);
        }
        for handle in handles {
            let chunk = handle.join().expect("evaluation worker panicked")?;
            for (rep, delay, fa) in chunk {
                results[rep] = Some((delay, fa));
            }
        }
        Ok(())
    })?;

    let per_rep: Vec<f64> = results.iter().map(|r| r.unwrap().0).collect();
    let false_alarms = results.iter().filter(|r| r.unwrap().1).count();
    let n = replications as f64;
    let mean_add = per_rep.iter().sum::<f64>() / n;
    let stderr = if replications > 1 {
        let var = per_rep.iter().map(|d| (d - mean_add) * (d - mean_add)).sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(AddReport {
        mean_add,
        stderr,
        replications,
        per_rep,
        false_alarm_rate: false_alarms as f64 / n,
    })
}

/// Roll one greedy replication and record the per-step trace.
pub fn trace_single_eval(
    params: &NetParams,
    cpe: &CpeMatrix,
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<Vec<crate::envir::TraceRow>> {
    cfg.validate()?;
    let dag = experiment_system(cfg)?;
    let monitor_cfg = calibrated_monitor(cfg, &dag)?;
    let onset = (cfg.horizon / 4).max(1);
    let spec = shift_spec(cfg, cfg.delta_test, onset);
    let batch = generate_streams(
        &dag,
        &spec,
        cfg.horizon,
        mix_seed(cfg.seed, TAG_EVAL, rep as u64),
    )?;
    let reward_cfg = RewardConfig::for_shift(cfg.p, &spec.shifted_indices, onset, spec.duration);
    let (mut env, s0) = reset(batch, reward_cfg, &monitor_cfg, cpe.clone())?;
    env.zero_phi = cfg.mode == Mode::NonCausal;
    let dof = match cfg.monitor.alarm_dof {
        AlarmDof::FullP => cfg.p,
        AlarmDof::SelectedM => cfg.m,
    };
    let mut flat = policy_input(cfg, &s0);
    let mut rows = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let q = forward(params, &flat)?;
        let action = select_top_m(&q, cfg.m)?;
        let out = env.step(&action)?;
        let lam_total: f64 = action.iter().map(|&i| out.causal_state.lam_row[i]).sum();
        rows.push(crate::envir::TraceRow {
            t,
            selected: action.clone(),
            reward: out.reward,
            lam_total,
            alarm: alarm_check(lam_total, dof, cfg.monitor.zeta),
        });
        flat = policy_input(cfg, &out.causal_state);
    }
    Ok(rows)
}

fn run_single_eval(
    params: &NetParams,
    cpe: &CpeMatrix,
    cfg: &ExperimentConfig,
    dag: &WeightedDag,
    monitor_cfg: &MonitorConfig,
    onset: usize,
    rep: usize,
) -> Result<(f64, bool)> {
    let spec = shift_spec(cfg, cfg.delta_test, onset);
    let batch = generate_streams(
        dag,
        &spec,
        cfg.horizon,
        mix_seed(cfg.seed, TAG_EVAL, rep as u64),
    )?;
    let reward_cfg = RewardConfig::for_shift(cfg.p, &spec.shifted_indices, onset, spec.duration);
    let (mut env, s0) = reset(batch, reward_cfg, monitor_cfg, cpe.clone())?;
    env.zero_phi = cfg.mode == Mode::NonCausal;
    let dof = match cfg.monitor.alarm_dof {
        AlarmDof::FullP => cfg.p,
        AlarmDof::SelectedM => cfg.m,
    };
    let mut flat = policy_input(cfg, &s0);
    let mut first_pre_onset_alarm = false;
    let mut delay: Option<f64> = None;
    for t in 1..=cfg.horizon {
        let q = forward(params, &flat)?;
        let action = select_top_m(&q, cfg.m)?;
        let out = env.step(&action)?;
        let lam_selected: f64 = action.iter().map(|&i| out.causal_state.lam_row[i]).sum();
        if alarm_check(lam_selected, dof, cfg.monitor.zeta) {
            if t < onset {
                first_pre_onset_alarm = true;
            } else if delay.is_none() {
                delay = Some((t - onset) as f64);
                break;
            }
        }
        flat = policy_input(cfg, &out.causal_state);
    }
    Ok((delay.unwrap_or(cfg.horizon as f64), first_pre_onset_alarm))
}

/// Episode curve smoothed by a trailing moving average.
pub fn smoothed_curve(curve: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    curve
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let start = i.saturating_sub(w - 1);
            let slice = &curve[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// First episode at which the smoothed curve reaches 90% of its maximum.
pub fn plateau_episode(curve: &[f64], window: usize) -> usize {
    let smooth = smoothed_curve(curve, window);
    let max = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.9 * max;
    smooth
        .iter()
        .position(|&v| v >= threshold)
        .unwrap_or(curve.len().saturating_sub(1))
}

/// One labeled run inside a preset.
#[derive(Debug, Clone)]
pub struct PresetRun {
    pub label: String,
    pub cfg: ExperimentConfig,
}

/// Expand a named preset into its runs.
///
/// Scenario presets sweep the shift grid for causal and non-causal modes;
/// noise presets additionally sweep sigma; ablation presets fix the
/// tabulated setup and vary the propagation source; extreme presets shrink
/// the sensor budget.
pub fn preset_runs(name: &str) -> Result<Vec<PresetRun>> {
    const DELTA_GRID: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];
    const NOISE_GRID: [f64; 3] = [0.05, 0.1, 0.15];
    const NOISE_DELTAS: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
    let mut runs = Vec::new();
    let scenario = |p: usize, pattern: ShiftPattern, noisy: bool| -> ExperimentConfig {
        let mut cfg = ExperimentConfig::tuned_for(p, noisy);
        cfg.pattern = pattern;
        cfg
    };
    match name {
        "p10-case-a" | "p10-case-b" | "p50-case-a" | "p50-case-b" | "p100-case-a"
        | "p100-case-b" => {
            let p = if name.starts_with("p10") {
                10
            } else if name.starts_with("p50") {
                50
            } else {
                100
            };
            let pattern = if name.ends_with("a") {
                ShiftPattern::AllPositive
            } else {
                ShiftPattern::Alternating
            };
            for mode in [Mode::Causal, Mode::NonCausal] {
                for &delta in &DELTA_GRID {
                    let mut cfg = scenario(p, pattern, false);
                    cfg.mode = mode;
                    cfg.delta_test = delta;
                    runs.push(PresetRun {
                        label: format!("{}-d{delta}", mode_label(mode)),
                        cfg,
                    });
                }
            }
        }
        "p50-noise" | "p100-noise" => {
            let p = if name.starts_with("p50") { 50 } else { 100 };
            for mode in [Mode::Causal, Mode::NonCausal] {
                for &sigma in &NOISE_GRID {
                    for &delta in &NOISE_DELTAS {
                        let mut cfg = scenario(p, ShiftPattern::AllPositive, true);
                        cfg.mode = mode;
                        cfg.noise_sigma = sigma;
                        cfg.delta_test = delta;
                        runs.push(PresetRun {
                            label: format!("{}-s{sigma}-d{delta}", mode_label(mode)),
                            cfg,
                        });
                    }
                }
            }
        }
        "mismatch-p10" | "mismatch-p50" | "mismatch-p100" => {
            let p = if name.ends_with("10") {
                10
            } else if name.ends_with("50") {
                50
            } else {
                100
            };
            for mode in [Mode::Causal, Mode::NonCausal] {
                for &dtrain in &[0.5, 1.0] {
                    for &dtest in &DELTA_GRID {
                        let mut cfg = scenario(p, ShiftPattern::AllPositive, false);
                        cfg.mode = mode;
                        cfg.delta_train = dtrain;
                        cfg.delta_test = dtest;
                        runs.push(PresetRun {
                            label: format!("{}-train{dtrain}-test{dtest}", mode_label(mode)),
                            cfg,
                        });
                    }
                }
            }
        }
        "extreme-p50" | "extreme-p100" => {
            let p = if name.ends_with("50") { 50 } else { 100 };
            for mode in [Mode::Causal, Mode::NonCausal] {
                for &delta in &[0.25, 0.5, 1.5, 2.0] {
                    let mut cfg = scenario(p, ShiftPattern::AllPositive, false);
                    cfg.mode = mode;
                    cfg.delta_test = delta;
                    cfg.horizon = 300;
                    if p == 50 {
                        cfg.k = 3;
                        cfg.m = 3;
                    } else {
                        cfg.k = 6;
                        cfg.m = 6;
                    }
                    runs.push(PresetRun {
                        label: format!("{}-d{delta}", mode_label(mode)),
                        cfg,
                    });
                }
            }
        }
        "ablation-ground-truth" | "ablation-standard" | "ablation-low-quality"
        | "ablation-no-graph" | "ablation-non-causal" => {
            let mut cfg = ExperimentConfig::tuned_for(50, true);
            cfg.noise_sigma = 0.1;
            cfg.delta_train = 1.0;
            cfg.delta_test = 1.0;
            match name {
                "ablation-ground-truth" => cfg.cpe_source = CpeSource::GroundTruth,
                "ablation-standard" => cfg.cpe_source = CpeSource::Discovered,
                "ablation-low-quality" => cfg.cpe_source = CpeSource::Adversarial,
                "ablation-no-graph" => cfg.cpe_source = CpeSource::Identity,
                _ => cfg.mode = Mode::NonCausal,
            }
            runs.push(PresetRun { label: name.trim_start_matches("ablation-").to_string(), cfg });
        }
        _ => {
            return Err(Error::Invalid(format!(
                "unknown preset {name:?}; known: p10-case-a/b, p50-case-a/b, p100-case-a/b, \
                 p50-noise, p100-noise, mismatch-p10/p50/p100, extreme-p50/p100, \
                 ablation-{{ground-truth,standard,low-quality,no-graph,non-causal}}"
            )))
        }
    }
    Ok(runs)
}

pub fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Causal => "causal",
        Mode::NonCausal => "non_causal",
    }
}

/// Train + evaluate one run and summarize it as a results row.
pub fn execute_run(run: &PresetRun) -> Result<(ResultRow, TrainResult)> {
    let trained = train(&run.cfg)?;
    let add = evaluate_add(&trained.params, &trained.cpe, &run.cfg, run.cfg.replications)?;
    Ok((
        ResultRow {
            method: run.label.clone(),
            p: run.cfg.p,
            m: run.cfg.m,
            delta: run.cfg.delta_test,
            sigma: run.cfg.noise_sigma,
            mean_add: add.mean_add,
            stderr: add.stderr,
            false_alarm_rate: add.false_alarm_rate,
            seed_count: add.replications,
        },
        trained,
    ))
}
