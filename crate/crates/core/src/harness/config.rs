//! Experiment configuration: defaults, the flat `key = value` config-file
//! dialect with `[net]`/`[monitor]`/`[discovery]` sections, and `--key value`
//! overrides using dotted names.

use crate::streams::ShiftPattern;
use crate::{Error, Result};

/// Q-network hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Hidden layer widths (input is 3p, output is p).
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch: usize,
    pub alpha_ent: f64,
    /// Initial exploration temperature.
    pub tau0: f64,
    /// Per-episode multiplicative temperature decay.
    pub tau_decay: f64,
    pub tau_floor: f64,
    /// Hard target sync every this many optimizer steps.
    pub sync_period: usize,
    pub replay_capacity: usize,
    /// Global-norm gradient clip; 0 disables.
    pub grad_clip: f64,
}

/// Monitor settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSettings {
    pub lambda: f64,
    /// Scale applied to the monitor's diagonal covariance.
    pub sigma: f64,
    pub zeta: f64,
    pub alarm_dof: AlarmDof,
    /// Estimate per-stream variances from a no-shift calibration batch
    /// (phase-I style); when false the monitor runs with sigma * identity.
    pub calibrate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlarmDof {
    /// Chi-square threshold with p degrees of freedom.
    FullP,
    /// Chi-square threshold with m degrees of freedom.
    SelectedM,
}

/// Causal discovery settings used during training.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoverySettings {
    pub alpha_sig: f64,
    pub max_cond: usize,
    pub cpe_refresh: CpeRefresh,
    /// Rows of recent data fed to discovery.
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpeRefresh {
    /// Re-estimate from the previous episode's window at each episode start.
    PerEpisode,
    /// Estimate once after the first episode, then keep.
    Once,
    /// Never estimate (identity propagation).
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Causal,
    NonCausal,
}

/// Where the propagation matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpeSource {
    /// PC discovery on recent observed data.
    Discovered,
    /// Exact propagation of the generating DAG.
    GroundTruth,
    /// Propagation of a label-permuted DAG (deliberately wrong).
    Adversarial,
    /// No propagation information.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub m: usize,
    pub k: usize,
    pub pattern: ShiftPattern,
    pub delta_train: f64,
    pub delta_test: f64,
    pub noise_sigma: f64,
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
    pub replications: usize,
    /// Edge inclusion probability of the generated DAG.
    pub edge_prob: f64,
    pub workers: usize,
    pub net: NetConfig,
    pub monitor: MonitorSettings,
    pub discovery: DiscoverySettings,
    pub mode: Mode,
    pub cpe_source: CpeSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 10,
            m: 6,
            k: 5,
            pattern: ShiftPattern::AllPositive,
            delta_train: 1.0,
            delta_test: 1.0,
            noise_sigma: 0.0,
            horizon: 200,
            episodes: 600,
            seed: 1,
            replications: 100,
            edge_prob: 0.3,
            workers: 2,
            net: NetConfig {
                hidden: vec![256, 256, 256],
                lr: 5e-3,
                gamma: 0.9,
                batch: 32,
                alpha_ent: 0.05,
                tau0: 0.65,
                tau_decay: 0.99,
                tau_floor: 0.05,
                sync_period: 100,
                replay_capacity: 10_000,
                grad_clip: 10.0,
            },
            monitor: MonitorSettings {
                lambda: 0.1,
                sigma: 1.0,
                zeta: 0.05,
                alarm_dof: AlarmDof::FullP,
                calibrate: true,
            },
            discovery: DiscoverySettings {
                alpha_sig: 0.05,
                max_cond: 3,
                cpe_refresh: CpeRefresh::PerEpisode,
                window: 100,
            },
            mode: Mode::Causal,
            cpe_source: CpeSource::Discovered,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.horizon == 0 {
            return Err(Error::Invalid("p and horizon must be positive".into()));
        }
        if self.m == 0 || self.m > self.p {
            return Err(Error::Invalid(format!("m={} out of range 1..={}", self.m, self.p)));
        }
        if self.k > self.p {
            return Err(Error::Invalid(format!("k={} exceeds p={}", self.k, self.p)));
        }
        if self.delta_train < 0.0 || self.delta_test < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Invalid("delta and sigma must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Invalid("edge_prob outside [0,1]".into()));
        }
        if self.workers == 0 || self.replications == 0 {
            return Err(Error::Invalid("workers and replications must be positive".into()));
        }
        if self.net.hidden.is_empty() || self.net.hidden.contains(&0) {
            return Err(Error::Invalid("hidden layout must be nonempty positive".into()));
        }
        if self.net.lr <= 0.0 || !(0.0..1.0).contains(&self.net.gamma) {
            return Err(Error::Invalid("need lr > 0 and gamma in [0,1)".into()));
        }
        if self.net.batch == 0 || self.net.sync_period == 0 || self.net.replay_capacity == 0 {
            return Err(Error::Invalid("batch, sync period, replay capacity must be positive".into()));
        }
        if self.net.tau0 <= 0.0 || self.net.tau_floor <= 0.0 || self.net.tau_decay <= 0.0 {
            return Err(Error::Invalid("temperature schedule must be positive".into()));
        }
        if self.net.grad_clip < 0.0 {
            return Err(Error::Invalid("grad_clip must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.monitor.lambda) {
            return Err(Error::Invalid("lambda outside [0,1)".into()));
        }
        if self.monitor.sigma <= 0.0 {
            return Err(Error::Invalid("monitor sigma must be positive".into()));
        }
        if !(0.0 < self.monitor.zeta && self.monitor.zeta < 1.0) {
            return Err(Error::Invalid("zeta outside (0,1)".into()));
        }
        Ok(())
    }

    /// The non-causal ablation disables the entropy term, the causal
    /// statistic, and the mask purely through configuration.
    pub fn effective_alpha_ent(&self) -> f64 {
        match self.mode {
            Mode::Causal => self.net.alpha_ent,
            Mode::NonCausal => 0.0,
        }
    }

    /// Full network layout including input and output widths.
    pub fn net_layout(&self) -> Vec<usize> {
        let mut layout = Vec::with_capacity(self.net.hidden.len() + 2);
        layout.push(3 * self.p);
        layout.extend_from_slice(&self.net.hidden);
        layout.push(self.p);
        layout
    }

    /// Shorthand: hyperparameter presets from the tuning table, keyed by
    /// the dimension bucket and whether observation noise is present.
    pub fn tuned_for(p: usize, noisy: bool) -> Self {
        let mut cfg = ExperimentConfig { p, ..Default::default() };
        match p {
            0..=10 => {
                cfg.m = 6;
                cfg.k = 5;
                cfg.net.alpha_ent = 0.05;
                cfg.net.lr = 5e-3;
                cfg.net.gamma = 0.9;
                cfg.net.batch = if noisy { 64 } else { 32 };
                cfg.net.tau0 = 0.65;
            }
            11..=50 => {
                cfg.m = 12;
                cfg.k = 10;
                cfg.net.alpha_ent = 0.1;
                cfg.net.lr = 1e-3;
                cfg.net.gamma = 0.8;
                cfg.net.batch = if noisy { 128 } else { 64 };
                cfg.net.tau0 = 0.75;
            }
            _ => {
                cfg.m = 22;
                cfg.k = 20;
                cfg.net.alpha_ent = 0.1;
                cfg.net.lr = 1e-3;
                cfg.net.gamma = 0.8;
                cfg.net.batch = if noisy { 128 } else { 64 };
                cfg.net.tau0 = 0.9;
            }
        }
        cfg
    }

    /// Apply one dotted `key = value` assignment.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |key: &str, v: &str| Error::Invalid(format!("bad value {v:?} for key {key}"));
        macro_rules! num {
            ($t:ty) => {
                v.parse::<$t>().map_err(|_| bad(key, v))?
            };
        }
        match key {
            "p" => self.p = num!(usize),
            "m" => self.m = num!(usize),
            "k" => self.k = num!(usize),
            "pattern" => {
                self.pattern = match v {
                    "a" | "all_positive" => ShiftPattern::AllPositive,
                    "b" | "alternating" => ShiftPattern::Alternating,
                    _ => return Err(bad(key, v)),
                }
            }
            "delta_train" => self.delta_train = num!(f64),
            "delta_test" => self.delta_test = num!(f64),
            "noise_sigma" => self.noise_sigma = num!(f64),
            "horizon" => self.horizon = num!(usize),
            "episodes" => self.episodes = num!(usize),
            "seed" | "seeds" => self.seed = num!(u64),
            "replications" => self.replications = num!(usize),
            "edge_prob" => self.edge_prob = num!(f64),
            "workers" => self.workers = num!(usize),
            "mode" => {
                self.mode = match v {
                    "causal" => Mode::Causal,
                    "non_causal" | "non-causal" => Mode::NonCausal,
                    _ => return Err(bad(key, v)),
                }
            }
            "cpe_source" => {
                self.cpe_source = match v {
                    "discovered" => CpeSource::Discovered,
                    "ground_truth" | "ground-truth" => CpeSource::GroundTruth,
                    "adversarial" => CpeSource::Adversarial,
                    "identity" => CpeSource::Identity,
                    _ => return Err(bad(key, v)),
                }
            }
            "net.hidden" | "net.layout" => {
                let widths: std::result::Result<Vec<usize>, _> =
                    v.split(',').map(|t| t.trim().parse::<usize>()).collect();
                self.net.hidden = widths.map_err(|_| bad(key, v))?;
            }
            "net.lr" => self.net.lr = num!(f64),
            "net.gamma" => self.net.gamma = num!(f64),
            "net.batch" => self.net.batch = num!(usize),
            "net.alpha_ent" => self.net.alpha_ent = num!(f64),
            "net.tau0" => self.net.tau0 = num!(f64),
            "net.tau_decay" => self.net.tau_decay = num!(f64),
            "net.tau_floor" => self.net.tau_floor = num!(f64),
            "net.sync_period" => self.net.sync_period = num!(usize),
            "net.grad_clip" => self.net.grad_clip = num!(f64),
            "net.replay_capacity" => self.net.replay_capacity = num!(usize),
            "monitor.lambda" => self.monitor.lambda = num!(f64),
            "monitor.sigma" => self.monitor.sigma = num!(f64),
            "monitor.zeta" => self.monitor.zeta = num!(f64),
            "monitor.calibrate" => {
                self.monitor.calibrate = match v {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad(key, v)),
                }
            }
            "monitor.alarm_dof" => {
                self.monitor.alarm_dof = match v {
                    "p" | "full" => AlarmDof::FullP,
                    "m" | "selected" => AlarmDof::SelectedM,
                    _ => return Err(bad(key, v)),
                }
            }
            "discovery.alpha_sig" => self.discovery.alpha_sig = num!(f64),
            "discovery.max_cond" => self.discovery.max_cond = num!(usize),
            "discovery.window" => self.discovery.window = num!(usize),
            "discovery.cpe_refresh" => {
                self.discovery.cpe_refresh = match v {
                    "episode" | "per_episode" => CpeRefresh::PerEpisode,
                    "once" => CpeRefresh::Once,
                    "never" => CpeRefresh::Never,
                    _ => return Err(bad(key, v)),
                }
            }
            _ => return Err(Error::Invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

/// Parse the flat config dialect: `key = value` lines, `#` comments, and
/// `[net]` / `[monitor]` / `[discovery]` section headers that prefix the
/// keys that follow.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    apply_config_text(&mut cfg, text)?;
    Ok(cfg)
}

pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str) -> Result<()> {
    let mut section = String::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: line_no + 1,
            col: 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim();
        let full_key = if section.is_empty() || key.contains('.') {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        cfg.apply_kv(&full_key, value).map_err(|e| Error::Parse {
            row: line_no + 1,
            col: 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;

    #[test]
    fn default_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn config_text_round() {
        let text = "\
# experiment
p = 50
m = 12
k = 10
pattern = b
mode = non_causal
delta_train = 0.5

[net]
lr = 0.001
hidden = 64,64
gamma = 0.8

[monitor]
lambda = 0.2
alarm_dof = m

[discovery]
cpe_refresh = once
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.p, 50);
        assert_eq!(cfg.m, 12);
        assert_eq!(cfg.pattern, ShiftPattern::Alternating);
        assert_eq!(cfg.mode, Mode::NonCausal);
        assert_eq!(cfg.net.hidden, vec![64, 64]);
        assert_eq!(cfg.net.gamma, 0.8);
        assert_eq!(cfg.monitor.lambda, 0.2);
        assert_eq!(cfg.monitor.alarm_dof, AlarmDof::SelectedM);
        assert_eq!(cfg.discovery.cpe_refresh, CpeRefresh::Once);
        cfg.validate().unwrap();
    }

    #[test]
    fn dotted_overrides_and_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv("net.lr", "0.01").unwrap();
        assert_eq!(cfg.net.lr, 0.01);
        assert!(cfg.apply_kv("net.lr", "fast").is_err());
        assert!(cfg.apply_kv("nonsense", "1").is_err());
        cfg.apply_kv("seeds", "42").unwrap();
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn bad_lines_report_row() {
        let err = parse_config("p = 10\nwat\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut cfg = ExperimentConfig::default();
        cfg.m = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.m = cfg.p + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.net.gamma = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_causal_forces_zero_entropy() {
        let mut cfg = ExperimentConfig::default();
        cfg.net.alpha_ent = 0.7;
        cfg.mode = Mode::NonCausal;
        assert_eq!(cfg.effective_alpha_ent(), 0.0);
        cfg.mode = Mode::Causal;
        assert_eq!(cfg.effective_alpha_ent(), 0.7);
    }

    #[test]
    fn tuned_presets_follow_dimension_buckets() {
        let c10 = ExperimentConfig::tuned_for(10, false);
        assert_eq!((c10.m, c10.k, c10.net.batch), (6, 5, 32));
        assert_eq!(c10.net.gamma, 0.9);
        let c50 = ExperimentConfig::tuned_for(50, true);
        assert_eq!((c50.m, c50.k, c50.net.batch), (12, 10, 128));
        let c100 = ExperimentConfig::tuned_for(100, false);
        assert_eq!((c100.m, c100.k, c100.net.tau0), (22, 20, 0.9));
    }
}
