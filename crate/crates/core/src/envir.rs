//! Episodic POMDP environment: apply a sensor-selection action, reveal the
//! selected observations, update the causal state, and emit the causal
//! reward.

use crate::discovery::CpeMatrix;
use crate::monitor::{
    assemble_state, causal_statistic, init_monitor, local_contributions, update_monitor,
    update_staleness, CausalState, MonitorState,
};
use crate::linalg::Mat;
use crate::streams::StreamBatch;
use crate::{Error, Result};

/// Reward shape: per-stream weights, miss penalty, baselines, and the shift
/// window.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    /// Action-reward weights, positive only on truly shifted streams.
    pub y_vec: Vec<f64>,
    /// State-reward weights, positive only on truly shifted streams.
    pub w_vec: Vec<f64>,
    /// Penalty when no shifted stream is selected (negative).
    pub penalty: f64,
    /// Constant reward before the shift window.
    pub baseline_pre: f64,
    /// Constant reward after the shift window.
    pub baseline_post: f64,
    /// Shift onset T (1-based step).
    pub onset: usize,
    /// Shift persists over `[onset, onset + duration]`.
    pub duration: usize,
    /// Divide every reward by `sum(y + w) - penalty` so magnitudes stay
    /// within 1 (useful for bound checks).
    pub scale_to_unit: bool,
}

impl RewardConfig {
    /// Default weights (`y = 1`, `w = 0.5` on shifted streams, penalty -20)
    /// for a given shift support.
    pub fn for_shift(p: usize, shifted: &[usize], onset: usize, duration: usize) -> Self {
        let mut y_vec = vec![0.0; p];
        let mut w_vec = vec![0.0; p];
        for &i in shifted {
            y_vec[i] = 1.0;
            w_vec[i] = 0.5;
        }
        RewardConfig {
            y_vec,
            w_vec,
            penalty: -20.0,
            baseline_pre: 0.0,
            baseline_post: 0.0,
            onset,
            duration,
            scale_to_unit: false,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.y_vec.len() != p || self.w_vec.len() != p {
            return Err(Error::Invalid("reward weight lengths != p".into()));
        }
        if self.penalty >= 0.0 {
            return Err(Error::Invalid("penalty must be negative".into()));
        }
        if self.y_vec.iter().chain(self.w_vec.iter()).any(|&v| v < 0.0) {
            return Err(Error::Invalid("reward weights must be nonnegative".into()));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        if self.scale_to_unit {
            let total: f64 =
                self.y_vec.iter().sum::<f64>() + self.w_vec.iter().sum::<f64>();
            total - self.penalty
        } else {
            1.0
        }
    }
}

/// What one environment step reveals.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Values of the selected streams only, in ascending index order.
    pub observation: Vec<f64>,
    pub reward: f64,
    pub causal_state: CausalState,
    pub done: bool,
    /// 1 on streams currently shifted (inside the anomaly window).
    pub truth_mask: Vec<u8>,
}

/// Monitor configuration for an episode.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub sigma: Mat,
    pub lambda: f64,
}

impl MonitorConfig {
    pub fn identity(p: usize, lambda: f64) -> Self {
        MonitorConfig { sigma: Mat::identity(p), lambda }
    }
}

/// One row of an episode trace (for CSV export).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: usize,
    pub selected: Vec<usize>,
    pub reward: f64,
    pub lam_total: f64,
    pub alarm: bool,
}

/// Episode state. The raw stream values stay private: only the selected
/// coordinates ever leave through [`Env::step`].
pub struct Env {
    batch: StreamBatch,
    reward_cfg: RewardConfig,
    cpe: CpeMatrix,
    monitor: MonitorState,
    staleness: Vec<u32>,
    /// Next 1-based time step to play.
    t: usize,
    done: bool,
    /// Zero out the causal statistic row (non-causal ablation).
    pub zero_phi: bool,
}

/// Fresh environment plus the initial (all-zero) causal state.
pub fn reset(
    batch: StreamBatch,
    reward_cfg: RewardConfig,
    monitor_cfg: &MonitorConfig,
    cpe: CpeMatrix,
) -> Result<(Env, CausalState)> {
    let p = batch.p;
    if cpe.p != p {
        return Err(Error::Invalid(format!(
            "cpe dimension {} != stream dimension {p}",
            cpe.p
        )));
    }
    reward_cfg.validate(p)?;
    let monitor = init_monitor(p, monitor_cfg.sigma.clone(), monitor_cfg.lambda)?;
    let state = CausalState::zeros(p);
    Ok((
        Env {
            batch,
            reward_cfg,
            cpe,
            monitor,
            staleness: vec![0; p],
            t: 1,
            done: false,
            zero_phi: false,
        },
        state,
    ))
}

impl Env {
    pub fn p(&self) -> usize {
        self.batch.p
    }

    pub fn horizon(&self) -> usize {
        self.batch.horizon
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Streams currently shifted at 1-based step `t`.
    pub fn truth_mask_at(&self, t: usize) -> Vec<u8> {
        let p = self.batch.p;
        let mut mask = vec![0u8; p];
        if let Some((spec, _)) = &self.batch.truth {
            if spec.active_at(t) {
                for &i in &spec.shifted_indices {
                    mask[i] = 1;
                }
            }
        }
        mask
    }

    /// Advance one step with the given selection (|action| = m).
    pub fn step(&mut self, action: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Invalid("step after episode end".into()));
        }
        if action.is_empty() {
            return Err(Error::Invalid("action must select at least one stream".into()));
        }
        let t = self.t;
        let x = self.batch.at(t).to_vec();
        let mut selected: Vec<usize> = action.to_vec();
        selected.sort_unstable();
        selected.dedup();
        if selected.len() != action.len() {
            return Err(Error::Invalid("action contains duplicate indices".into()));
        }

        self.monitor = update_monitor(&self.monitor, &x, &selected)?;
        let contributions = local_contributions(&self.monitor);
        let phi = if self.zero_phi {
            vec![0.0; self.batch.p]
        } else {
            causal_statistic(&self.monitor, &self.cpe)?
        };
        self.staleness = update_staleness(&self.staleness, &selected);
        let causal_state =
            assemble_state(contributions.per_var, phi, self.staleness.clone())?;

        let truth_mask = self.truth_mask_at(t);
        let reward = reward_schedule(t, &self.reward_cfg, || {
            causal_reward(&selected, &truth_mask, &self.reward_cfg)
        });

        let observation: Vec<f64> = selected.iter().map(|&i| x[i]).collect();
        self.t += 1;
        if self.t > self.batch.horizon {
            self.done = true;
        }
        Ok(StepOutcome {
            observation,
            reward,
            causal_state,
            done: self.done,
            truth_mask,
        })
    }

    /// Sum of the monitor's per-variable contributions over `selected`.
    pub fn selected_statistic(&self, selected: &[usize]) -> f64 {
        let c = local_contributions(&self.monitor);
        selected.iter().map(|&i| c.per_var[i]).sum()
    }
}

/// Instantaneous in-window reward.
///
/// Misses every shifted stream: the penalty. Otherwise
/// `g = sum_i a_i y_i + w_i s_i` where both indicators mark the selected
/// streams and the weights are zero off the shift support.
pub fn causal_reward(action: &[usize], truth_mask: &[u8], cfg: &RewardConfig) -> f64 {
    let hit = action.iter().any(|&i| truth_mask[i] != 0);
    let raw = if !hit {
        cfg.penalty
    } else {
        action.iter().map(|&i| cfg.y_vec[i] + cfg.w_vec[i]).sum()
    };
    raw / cfg.scale()
}

/// The reward schedule around the shift window:
/// `baseline_pre` before onset, the in-window reward during
/// `[onset, onset + duration]`, `baseline_post` after.
pub fn reward_schedule<F: FnOnce() -> f64>(t: usize, cfg: &RewardConfig, r_t: F) -> f64 {
    if t < cfg.onset {
        cfg.baseline_pre / cfg.scale()
    } else if t <= cfg.onset + cfg.duration {
        r_t()
    } else {
        cfg.baseline_post / cfg.scale()
    }
}

/// Render an episode trace as CSV (`selected` cells use `;` separators).
pub fn format_trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,selected,reward,lam_total,alarm\n");
    for r in rows {
        let sel: Vec<String> = r.selected.iter().map(|i| (i + 1).to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            sel.join(";"),
            r.reward,
            r.lam_total,
            if r.alarm { 1 } else { 0 }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{generate_streams, ShiftPattern, ShiftSpec, WeightedDag};
    use crate::streams::CausalGraph;

    fn one_stream_batch(horizon: usize, delta: f64, onset: usize) -> StreamBatch {
        let dag = WeightedDag {
            graph: CausalGraph::empty(1),
            weights: vec![vec![0.0]],
        };
        let spec = ShiftSpec {
            shifted_indices: if delta > 0.0 { vec![0] } else { vec![] },
            pattern: ShiftPattern::AllPositive,
            delta,
            onset,
            duration: horizon - onset,
            noise_sigma: 0.0,
        };
        generate_streams(&dag, &spec, horizon, 3).unwrap()
    }

    fn small_cfg(p: usize, shifted: &[usize], onset: usize, duration: usize) -> RewardConfig {
        RewardConfig::for_shift(p, shifted, onset, duration)
    }

    #[test]
    fn reset_gives_zero_state_and_checks_dims() {
        let batch = one_stream_batch(10, 0.0, 10);
        let cfg = small_cfg(1, &[], 10, 0);
        let (_, s0) = reset(
            batch.clone(),
            cfg.clone(),
            &MonitorConfig::identity(1, 0.1),
            CpeMatrix::identity(1),
        )
        .unwrap();
        assert_eq!(s0, CausalState::zeros(1));
        // p mismatch between cpe and batch
        assert!(reset(batch, cfg, &MonitorConfig::identity(1, 0.1), CpeMatrix::identity(2))
            .is_err());
    }

    #[test]
    fn reset_deterministic() {
        let mk = || {
            let batch = one_stream_batch(10, 1.0, 5);
            reset(
                batch,
                small_cfg(1, &[0], 5, 5),
                &MonitorConfig::identity(1, 0.1),
                CpeMatrix::identity(1),
            )
            .unwrap()
            .1
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn staleness_grows_only_for_unselected() {
        let dag = WeightedDag {
            graph: CausalGraph::empty(3),
            weights: vec![vec![0.0; 3]; 3],
        };
        let spec = ShiftSpec {
            shifted_indices: vec![],
            pattern: ShiftPattern::AllPositive,
            delta: 0.0,
            onset: 20,
            duration: 0,
            noise_sigma: 0.0,
        };
        let batch = generate_streams(&dag, &spec, 20, 1).unwrap();
        let (mut env, _) = reset(
            batch,
            small_cfg(3, &[], 20, 0),
            &MonitorConfig::identity(3, 0.1),
            CpeMatrix::identity(3),
        )
        .unwrap();
        let mut last = None;
        for _ in 0..10 {
            last = Some(env.step(&[0, 2]).unwrap());
        }
        let s = last.unwrap().causal_state;
        assert_eq!(s.y_row, vec![0, 10, 0]);
    }

    #[test]
    fn rewards_follow_schedule() {
        // no shift anywhere: every reward is the pre-onset baseline
        let batch = one_stream_batch(10, 0.0, 10);
        let (mut env, _) = reset(
            batch,
            small_cfg(1, &[], 10, 0),
            &MonitorConfig::identity(1, 0.1),
            CpeMatrix::identity(1),
        )
        .unwrap();
        for _ in 0..9 {
            let out = env.step(&[0]).unwrap();
            assert_eq!(out.reward, 0.0);
        }

        // shifted stream selected through the window
        let batch = one_stream_batch(10, 1.0, 4);
        let (mut env, _) = reset(
            batch,
            small_cfg(1, &[0], 4, 6),
            &MonitorConfig::identity(1, 0.1),
            CpeMatrix::identity(1),
        )
        .unwrap();
        for t in 1..=10 {
            let out = env.step(&[0]).unwrap();
            if t < 4 {
                assert_eq!(out.reward, 0.0, "t={t}");
            } else {
                assert_eq!(out.reward, 1.5, "t={t}");
            }
        }
        assert!(env.is_done());
        assert!(env.step(&[0]).is_err());
    }

    #[test]
    fn causal_reward_examples() {
        let cfg = small_cfg(4, &[0, 1], 1, 10);
        // no shifted stream selected: the penalty
        assert_eq!(causal_reward(&[2, 3], &[1, 1, 0, 0], &cfg), -20.0);
        // both shifted selected: 2*1 + 2*0.5 = 3
        assert_eq!(causal_reward(&[0, 1], &[1, 1, 0, 0], &cfg), 3.0);
        // monotone: adding shifted streams never lowers the reward
        let r1 = causal_reward(&[0, 2], &[1, 1, 0, 0], &cfg);
        let r2 = causal_reward(&[0, 1, 2], &[1, 1, 0, 0], &cfg);
        assert!(r2 >= r1);
    }

    #[test]
    fn reward_bounds_inside_window() {
        let cfg = small_cfg(5, &[0, 1, 2], 1, 10);
        let hi: f64 = cfg.y_vec.iter().sum::<f64>() + cfg.w_vec.iter().sum::<f64>();
        for action in [&[0usize, 1][..], &[3, 4], &[0, 3], &[0, 1, 2]] {
            let r = causal_reward(action, &[1, 1, 1, 0, 0], &cfg);
            assert!(r >= cfg.penalty && r <= hi, "r={r}");
        }
    }

    #[test]
    fn scaled_rewards_stay_within_unit() {
        let mut cfg = small_cfg(4, &[0, 1], 1, 10);
        cfg.scale_to_unit = true;
        for action in [&[0usize, 1][..], &[2, 3]] {
            let r = causal_reward(action, &[1, 1, 0, 0], &cfg);
            assert!(r.abs() <= 1.0, "r={r}");
        }
    }

    #[test]
    fn truth_mask_matches_window() {
        let batch = one_stream_batch(12, 2.0, 5);
        let (env, _) = reset(
            batch,
            small_cfg(1, &[0], 5, 7),
            &MonitorConfig::identity(1, 0.1),
            CpeMatrix::identity(1),
        )
        .unwrap();
        for t in 1..=12 {
            let mask = env.truth_mask_at(t);
            if (5..=12).contains(&t) {
                assert_eq!(mask, vec![1], "t={t}");
            } else {
                assert_eq!(mask, vec![0], "t={t}");
            }
        }
    }

    #[test]
    fn observation_exposes_only_selected() {
        let dag = WeightedDag {
            graph: CausalGraph::empty(4),
            weights: vec![vec![0.0; 4]; 4],
        };
        let spec = ShiftSpec {
            shifted_indices: vec![],
            pattern: ShiftPattern::AllPositive,
            delta: 0.0,
            onset: 5,
            duration: 0,
            noise_sigma: 0.0,
        };
        let batch = generate_streams(&dag, &spec, 5, 8).unwrap();
        let raw = batch.values.clone();
        let (mut env, _) = reset(
            batch,
            small_cfg(4, &[], 5, 0),
            &MonitorConfig::identity(4, 0.1),
            CpeMatrix::identity(4),
        )
        .unwrap();
        let out = env.step(&[1, 3]).unwrap();
        assert_eq!(out.observation, vec![raw[0][1], raw[0][3]]);
        assert_eq!(out.observation.len(), 2);
    }

    /// Full pipeline on a 1-stream, 1-sensor toy equals hand-chained module
    /// calls.
    #[test]
    fn step_equals_hand_chained_modules() {
        let batch = one_stream_batch(6, 1.0, 3);
        let raw = batch.values.clone();
        let lambda = 0.2;
        let (mut env, _) = reset(
            batch,
            small_cfg(1, &[0], 3, 3),
            &MonitorConfig::identity(1, lambda),
            CpeMatrix::identity(1),
        )
        .unwrap();

        let mut m = init_monitor(1, Mat::identity(1), lambda).unwrap();
        let mut y = vec![0u32; 1];
        for t in 1..=6 {
            let out = env.step(&[0]).unwrap();
            m = update_monitor(&m, &raw[t - 1], &[0]).unwrap();
            let c = local_contributions(&m);
            let phi = causal_statistic(&m, &CpeMatrix::identity(1)).unwrap();
            y = update_staleness(&y, &[0]);
            let expect = assemble_state(c.per_var, phi, y.clone()).unwrap();
            assert_eq!(out.causal_state, expect, "t={t}");
        }
    }

    /// The causal state after a step is a deterministic function of the
    /// previous state, the action, and the revealed observation: replaying
    /// a recorded episode reproduces it bitwise.
    #[test]
    fn markov_replay_contract() {
        let dag = WeightedDag {
            graph: CausalGraph::empty(3),
            weights: vec![vec![0.0; 3]; 3],
        };
        let spec = ShiftSpec {
            shifted_indices: vec![0],
            pattern: ShiftPattern::AllPositive,
            delta: 1.0,
            onset: 4,
            duration: 6,
            noise_sigma: 0.0,
        };
        let batch = generate_streams(&dag, &spec, 10, 5).unwrap();
        let actions: Vec<Vec<usize>> = (0..10).map(|t| vec![t % 3, (t + 1) % 3]).collect();
        let run = |batch: StreamBatch| -> Vec<CausalState> {
            let (mut env, _) = reset(
                batch,
                small_cfg(3, &[0], 4, 6),
                &MonitorConfig::identity(3, 0.1),
                CpeMatrix::identity(3),
            )
            .unwrap();
            actions
                .iter()
                .map(|a| {
                    let mut a = a.clone();
                    a.sort_unstable();
                    env.step(&a).unwrap().causal_state
                })
                .collect()
        };
        let first = run(batch.clone());
        let second = run(batch);
        assert_eq!(first, second);
    }

    #[test]
    fn trace_csv_shape() {
        let rows = vec![
            TraceRow { t: 1, selected: vec![0, 2], reward: 0.5, lam_total: 1.25, alarm: false },
            TraceRow { t: 2, selected: vec![1], reward: -20.0, lam_total: 19.0, alarm: true },
        ];
        let text = format_trace_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,selected,reward,lam_total,alarm");
        assert_eq!(lines.next().unwrap(), "1,1;3,0.5,1.25,0");
        assert_eq!(lines.next().unwrap(), "2,2,-20,19,1");
    }
}
