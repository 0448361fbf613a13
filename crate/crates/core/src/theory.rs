//! Tabular toy-MDP suite that numerically certifies the regularized
//! operator's contraction, the optimal-value bounds, error-decay and
//! convergence-time caps, and the finite-time expectation bound.
//!
//! Conventions in this module follow the analysis setting: the policy used
//! by the soft operator is the mask-restricted Boltzmann
//! `pi(a|s) = C(s,a) exp(tau Q(s,a)) / sum_{a': C} exp(tau Q(s,a'))`, and
//! the soft value is the masked log-sum-exp
//! `V_c(s) = (1/tau) ln sum_{a: C} exp(tau Q(s,a))`, which satisfies
//! `max_{a in C} Q <= V_c <= max_{a in C} Q + ln(sum C)/tau` with equality
//! on both sides when a state has a single admissible action.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Finite MDP with a per-state-action causal mask.
#[derive(Debug, Clone)]
pub struct ToyMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[s][a][s2]`, rows sum to 1.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]` with magnitude at most 1.
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
    /// `mask[s][a]` binary, at least one 1 per state.
    pub mask: Vec<Vec<u8>>,
    /// Fixed policy `policy[s][a]` used by the contraction check.
    pub policy: Vec<Vec<f64>>,
    pub tau: f64,
}

/// Outcome of one numeric certification.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub check: String,
    pub checked: usize,
    pub violations: usize,
    /// Worst margin by which the verified inequality held (negative values
    /// would be violations).
    pub max_slack: f64,
    /// Parameters echoed for the report line.
    pub params: String,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.check,
            self.checked,
            self.violations,
            self.max_slack,
            self.params.replace(',', ";")
        )
    }
}

impl ToyMdp {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Invalid("empty state or action space".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Invalid("gamma must be in [0,1)".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::Invalid("tau must be positive".into()));
        }
        for s in 0..self.n_states {
            if self.mask[s].iter().all(|&c| c == 0) {
                return Err(Error::Invalid(format!("state {s} has an all-zero mask")));
            }
            for a in 0..self.n_actions {
                let total: f64 = self.transition[s][a].iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!(
                        "transition row ({s},{a}) sums to {total}"
                    )));
                }
                if self.reward[s][a].abs() > 1.0 + 1e-12 {
                    return Err(Error::Invalid(format!(
                        "reward ({s},{a}) exceeds unit magnitude"
                    )));
                }
            }
            let ptotal: f64 = self.policy[s].iter().sum();
            if (ptotal - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("policy row {s} sums to {ptotal}")));
            }
        }
        Ok(())
    }

    /// Largest `ln(sum C)` over states.
    pub fn log_mask_sum(&self) -> f64 {
        (0..self.n_states)
            .map(|s| {
                let total: f64 = self.mask[s].iter().map(|&c| c as f64).sum();
                total.ln()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_reward_magnitude(&self) -> f64 {
        self.reward
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &r| acc.max(r.abs()))
    }
}

/// Random MDP with stochastic transitions, unit-bounded rewards, a random
/// mask (at least one admissible action per state), and a random fixed
/// policy.
pub fn random_mdp(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    tau: f64,
    seed: u64,
) -> ToyMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    let mut reward = vec![vec![0.0; n_actions]; n_states];
    let mut mask = vec![vec![0u8; n_actions]; n_states];
    let mut policy = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<f64> =
                (0..n_states).map(|_| rng.random_range(1e-3..1.0)).collect();
            let total: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= total;
            }
            transition[s][a] = row;
            reward[s][a] = rng.random_range(-1.0..1.0);
            mask[s][a] = if rng.random_range(0.0..1.0) < 0.6 { 1 } else { 0 };
        }
        if mask[s].iter().all(|&c| c == 0) {
            let a = rng.random_range(0..n_actions);
            mask[s][a] = 1;
        }
        let mut row: Vec<f64> = (0..n_actions).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
        policy[s] = row;
    }
    ToyMdp { n_states, n_actions, transition, reward, gamma, mask, policy, tau }
}

/// Masked entropy of a policy row at one state.
fn masked_entropy(policy_row: &[f64], mask_row: &[u8]) -> f64 {
    let mut h = 0.0;
    for (p, &c) in policy_row.iter().zip(mask_row.iter()) {
        if c != 0 && *p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Boltzmann policy on `q / tau` over all actions (the policy iteration
/// variant used when the softmax flag is set).
fn boltzmann_row(q: &[f64], tau: f64) -> Vec<f64> {
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut row: Vec<f64> = q.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    row
}

/// The regularized expected-policy operator:
/// `(T_c Q)(s,a) = r(s,a) + gamma E_{s'}[ sum_{a'} pi(a'|s') Q(s',a')
///  - tau H_c(pi(.|s')) ]`, with `pi` either the fixed policy or the
/// Boltzmann policy of `Q` itself.
pub fn causal_bellman(q: &[Vec<f64>], mdp: &ToyMdp, softmax_policy: bool) -> Vec<Vec<f64>> {
    let mut next_value = vec![0.0; mdp.n_states];
    for s2 in 0..mdp.n_states {
        let pi_row = if softmax_policy {
            boltzmann_row(&q[s2], mdp.tau)
        } else {
            mdp.policy[s2].clone()
        };
        let expect: f64 = pi_row.iter().zip(q[s2].iter()).map(|(p, v)| p * v).sum();
        let h = masked_entropy(&pi_row, &mdp.mask[s2]);
        next_value[s2] = expect - mdp.tau * h;
    }
    let mut out = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut exp_next = 0.0;
            for s2 in 0..mdp.n_states {
                exp_next += mdp.transition[s][a][s2] * next_value[s2];
            }
            out[s][a] = mdp.reward[s][a] + mdp.gamma * exp_next;
        }
    }
    out
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}

/// Contraction certificate for the fixed-policy operator: for random bounded
/// pairs, `||T Q - T Q'|| <= gamma ||Q - Q'|| + 1e-12`.
pub fn check_contraction(mdp: &ToyMdp, trials: usize, seed: u64) -> BoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for _ in 0..trials {
        let rand_q = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..mdp.n_states)
                .map(|_| (0..mdp.n_actions).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect()
        };
        let q1 = rand_q(&mut rng);
        let q2 = rand_q(&mut rng);
        let t1 = causal_bellman(&q1, mdp, false);
        let t2 = causal_bellman(&q2, mdp, false);
        let lhs = sup_diff(&t1, &t2);
        let rhs = mdp.gamma * sup_diff(&q1, &q2);
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
        if sup_diff(&q1, &q2) > 0.0 {
            max_ratio = max_ratio.max(lhs / sup_diff(&q1, &q2));
        }
    }
    BoundReport {
        check: "contraction".into(),
        checked: trials,
        violations,
        max_slack: mdp.gamma - max_ratio,
        params: format!("gamma={} max_ratio={max_ratio}", mdp.gamma),
    }
}

/// Masked soft value of `q` at every state.
pub fn soft_values(q: &[Vec<f64>], mdp: &ToyMdp) -> Vec<f64> {
    (0..mdp.n_states)
        .map(|s| {
            let masked: Vec<f64> = (0..mdp.n_actions)
                .filter(|&a| mdp.mask[s][a] != 0)
                .map(|a| mdp.tau * q[s][a])
                .collect();
            let max = masked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + masked.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse / mdp.tau
        })
        .collect()
}

fn soft_iteration_step(q: &[Vec<f64>], mdp: &ToyMdp) -> Vec<Vec<f64>> {
    let v = soft_values(q, mdp);
    let mut out = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut exp_next = 0.0;
            for s2 in 0..mdp.n_states {
                exp_next += mdp.transition[s][a][s2] * v[s2];
            }
            out[s][a] = mdp.reward[s][a] + mdp.gamma * exp_next;
        }
    }
    out
}

/// Fixed point of the masked soft operator.
#[derive(Debug, Clone)]
pub struct QStar {
    pub q: Vec<Vec<f64>>,
    /// Soft state values at the fixed point.
    pub v: Vec<f64>,
}

/// Iterate the masked soft operator to its fixed point.
///
/// The returned `v` is computed through the masked-entropy identity
/// `V_c = [H_c + tau sum_a C pi Q] / (tau w)` with `pi` the masked Boltzmann
/// policy of `Q*` and `w = sum_a C pi`; it agrees with the masked
/// log-sum-exp to roundoff.
pub fn solve_qstar(mdp: &ToyMdp, tol: f64) -> Result<QStar> {
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let cap = 200_000;
    for _ in 0..cap {
        let next = soft_iteration_step(&q, mdp);
        let change = sup_diff(&next, &q);
        q = next;
        if change < tol {
            // identity-based soft value
            let mut v = vec![0.0; mdp.n_states];
            for s in 0..mdp.n_states {
                // masked Boltzmann policy of Q* (multiplier convention)
                let masked: Vec<f64> = (0..mdp.n_actions)
                    .map(|a| {
                        if mdp.mask[s][a] != 0 {
                            (mdp.tau * q[s][a]).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let total: f64 = masked.iter().sum();
                let pi: Vec<f64> = masked.iter().map(|e| e / total).collect();
                let h = masked_entropy(&pi, &mdp.mask[s]);
                let w: f64 = pi
                    .iter()
                    .zip(mdp.mask[s].iter())
                    .filter(|(_, &c)| c != 0)
                    .map(|(p, _)| p)
                    .sum();
                let qterm: f64 = pi
                    .iter()
                    .zip(mdp.mask[s].iter())
                    .enumerate()
                    .filter(|(_, (_, &c))| c != 0)
                    .map(|(a, (p, _))| p * q[s][a])
                    .sum();
                v[s] = (h + mdp.tau * qterm) / (mdp.tau * w);
            }
            return Ok(QStar { q, v });
        }
    }
    Err(Error::NoConvergence(format!(
        "soft iteration did not reach tol {tol} within {cap} sweeps"
    )))
}

/// Optimal-value bound certificate: elementwise
/// `r + gamma E[max_{a' in C} Q*] <= Q* <= r + gamma E[max_{a' in C} Q*]
///  + gamma/(1-gamma) ln(sum C)/tau`.
pub fn check_qstar_bounds(mdp: &ToyMdp, qstar: &QStar) -> BoundReport {
    let log_c = mdp.log_mask_sum();
    let bias = mdp.gamma / (1.0 - mdp.gamma) * log_c / mdp.tau;
    // max over admissible actions per state
    let max_masked: Vec<f64> = (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .filter(|&a| mdp.mask[s][a] != 0)
                .map(|a| qstar.q[s][a])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut checked = 0;
    let mut violations = 0;
    let mut max_slack = f64::INFINITY;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut exp_max = 0.0;
            for s2 in 0..mdp.n_states {
                exp_max += mdp.transition[s][a][s2] * max_masked[s2];
            }
            let lower = mdp.reward[s][a] + mdp.gamma * exp_max;
            let upper = lower + bias;
            checked += 1;
            let slack_low = qstar.q[s][a] - lower;
            let slack_high = upper - qstar.q[s][a];
            if slack_low < -1e-8 || slack_high < -1e-8 {
                violations += 1;
            }
            max_slack = max_slack.min(slack_low.min(slack_high));
        }
    }
    BoundReport {
        check: "qstar-bounds".into(),
        checked,
        violations,
        max_slack,
        params: format!(
            "gamma={} tau={} lnSumC={log_c} bias={bias} (bounds coincide iff lnSumC=0)",
            mdp.gamma, mdp.tau
        ),
    }
}

/// Error-decay certificate: value iteration from zero satisfies
/// `||Q_t - Q*|| <= gamma^t ||V_0 - V*|| + gamma/(1-gamma) ln(sum C)/tau`
/// for every `t <= t_max`, plus the limiting cap
/// `min(gamma ln(sum C)/(tau (1-gamma)), 2 g/(1-gamma)^3)` at `t_max`
/// (the tighter square-denominator variant is reported in `params`).
pub fn check_error_decay(mdp: &ToyMdp, qstar: &QStar, t_max: usize) -> BoundReport {
    let log_c = mdp.log_mask_sum();
    let bias = mdp.gamma / (1.0 - mdp.gamma) * log_c / mdp.tau;
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let v0 = soft_values(&q, mdp);
    let v0_gap = v0
        .iter()
        .zip(qstar.v.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mut checked = 0;
    let mut violations = 0;
    let mut max_slack = f64::INFINITY;
    let mut final_err = 0.0;
    for t in 1..=t_max {
        q = soft_iteration_step(&q, mdp);
        let err = sup_diff(&q, &qstar.q);
        let bound = mdp.gamma.powi(t as i32) * v0_gap + bias;
        checked += 1;
        let slack = bound - err;
        if slack < -1e-10 {
            violations += 1;
        }
        max_slack = max_slack.min(slack);
        final_err = err;
    }
    // limiting caps
    let g = mdp.max_reward_magnitude();
    let cap_entropy = mdp.gamma * log_c / (mdp.tau * (1.0 - mdp.gamma));
    let cap_cubed = 2.0 * g / (1.0 - mdp.gamma).powi(3);
    let cap = cap_entropy.min(cap_cubed);
    checked += 1;
    if final_err > cap + 1e-10 {
        violations += 1;
    }
    let cap_squared = 2.0 * g / (1.0 - mdp.gamma).powi(2);
    let tighter_holds = final_err <= cap_entropy.min(cap_squared) + 1e-10;
    BoundReport {
        check: "error-decay".into(),
        checked,
        violations,
        max_slack: max_slack.min(cap - final_err),
        params: format!(
            "t_max={t_max} bias={bias} cap={cap} tighter_square_cap_holds={tighter_holds}"
        ),
    }
}

/// Convergence-time certificate: the first sweep bringing `||Q_t - Q*||`
/// under `eps` never exceeds
/// `ceil( ln((eps - bias)/||V_0 - V*||) / ln gamma ) + 1`.
pub fn check_convergence_time(mdp: &ToyMdp, qstar: &QStar, eps_grid: &[f64]) -> Result<BoundReport> {
    let log_c = mdp.log_mask_sum();
    let bias = mdp.gamma / (1.0 - mdp.gamma) * log_c / mdp.tau;
    for &eps in eps_grid {
        if eps <= bias {
            return Err(Error::Invalid(format!(
                "eps {eps} at or below the bias floor {bias}"
            )));
        }
    }
    let q0 = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let v0 = soft_values(&q0, mdp);
    let v0_gap = v0
        .iter()
        .zip(qstar.v.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mut checked = 0;
    let mut violations = 0;
    let mut max_slack = f64::INFINITY;
    for &eps in eps_grid {
        let cap = if v0_gap <= eps - bias {
            0
        } else {
            (((eps - bias) / v0_gap).ln() / mdp.gamma.ln()).ceil() as usize + 1
        };
        // measure the empirical first hitting sweep
        let mut q = q0.clone();
        let mut t_emp = 0;
        let mut err = sup_diff(&q, &qstar.q);
        while err > eps && t_emp <= cap + 1 {
            q = soft_iteration_step(&q, mdp);
            t_emp += 1;
            err = sup_diff(&q, &qstar.q);
        }
        checked += 1;
        if t_emp > cap {
            violations += 1;
        }
        max_slack = max_slack.min(cap as f64 - t_emp as f64);
    }
    Ok(BoundReport {
        check: "convergence-time".into(),
        checked,
        violations,
        max_slack,
        params: format!("bias={bias} v0_gap={v0_gap} eps_grid={eps_grid:?}"),
    })
}

/// Analytic cap from the convergence-time relation, exposed for property
/// checks on the formula itself.
pub fn convergence_time_cap(eps: f64, bias: f64, v0_gap: f64, gamma: f64) -> usize {
    if v0_gap <= eps - bias {
        0
    } else {
        (((eps - bias) / v0_gap).ln() / gamma.ln()).ceil() as usize + 1
    }
}

/// Right-hand side of the finite-time expectation bound at sweep `t`.
pub fn finite_time_rhs(
    mdp: &ToyMdp,
    alpha_lr: f64,
    omega_min: f64,
    omega_max: f64,
    log_mask_sum: f64,
    t: usize,
) -> f64 {
    let gamma = mdp.gamma;
    let tau = mdp.tau;
    let a_cnt = mdp.n_actions as f64;
    let rho = 1.0 - alpha_lr * omega_min * (1.0 - gamma);
    let tf = t as f64;
    let term1 = 4.0 * alpha_lr * gamma * omega_max * a_cnt / (1.0 - gamma)
        * tf
        * rho.powi(t as i32 - 1);
    let term2 = 2.0 * 6.0f64.sqrt() * alpha_lr.sqrt() * gamma * omega_max * a_cnt.sqrt()
        / (omega_min.powf(1.5) * (1.0 - gamma).powf(2.5));
    let geo_sum: f64 = if (1.0 - rho).abs() < 1e-15 {
        tf
    } else {
        (1.0 - rho.powi(t as i32)) / (1.0 - rho)
    };
    let term3 = log_mask_sum / tau
        * (2.0 * gamma * gamma * omega_max * omega_max
            / (omega_min * omega_min * (1.0 - gamma) * (1.0 - gamma))
            + 1.0 / (omega_min * (1.0 - gamma))
            + alpha_lr * gamma * omega_max * a_cnt.sqrt() * geo_sum);
    let term4 = (a_cnt.powf(2.0 / 3.0) * (2.0 / (1.0 - gamma)).powi(2) * rho.powi(2 * t as i32)
        + 6.0 * alpha_lr * a_cnt / (omega_min * (1.0 - gamma).powi(3)))
    .sqrt();
    term1 + term2 + term3 + term4
}

/// Finite-time certificate: asynchronous tabular updates with a constant
/// step stay below the four-term bound in expectation (sample mean plus two
/// standard errors) at the sampled sweep counts.
pub fn check_finite_time_bound(
    mdp: &ToyMdp,
    alpha_lr: f64,
    t_max: usize,
    trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    let qstar = solve_qstar(mdp, 1e-12)?;
    let checkpoints: Vec<usize> =
        [10usize, 100, 1000].iter().copied().filter(|&t| t <= t_max).collect();
    if checkpoints.is_empty() {
        return Err(Error::Invalid("t_max too small for any checkpoint".into()));
    }
    let mut errs: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); checkpoints.len()];
    let mut counts = vec![vec![0usize; mdp.n_actions]; mdp.n_states];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
        for t in 1..=t_max {
            let s = rng.random_range(0..mdp.n_states);
            let a = rng.random_range(0..mdp.n_actions);
            counts[s][a] += 1;
            // sample the next state
            let u: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut s2 = mdp.n_states - 1;
            for (k, &pr) in mdp.transition[s][a].iter().enumerate() {
                acc += pr;
                if u < acc {
                    s2 = k;
                    break;
                }
            }
            let v_next = {
                let masked: Vec<f64> = (0..mdp.n_actions)
                    .filter(|&a2| mdp.mask[s2][a2] != 0)
                    .map(|a2| mdp.tau * q[s2][a2])
                    .collect();
                let max = masked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (max + masked.iter().map(|v| (v - max).exp()).sum::<f64>().ln()) / mdp.tau
            };
            let target = mdp.reward[s][a] + mdp.gamma * v_next;
            q[s][a] += alpha_lr * (target - q[s][a]);
            if let Some(pos) = checkpoints.iter().position(|&c| c == t) {
                errs[pos].push(sup_diff(&q, &qstar.q));
            }
        }
    }
    let total: usize = counts.iter().flatten().sum();
    let omega_min =
        counts.iter().flatten().map(|&c| c as f64 / total as f64).fold(f64::INFINITY, f64::min);
    let omega_max =
        counts.iter().flatten().map(|&c| c as f64 / total as f64).fold(0.0f64, f64::max);
    if omega_min == 0.0 {
        return Err(Error::Invalid(
            "a state-action pair was never sampled (omega_min = 0)".into(),
        ));
    }
    let log_c = mdp.log_mask_sum();
    let mut checked = 0;
    let mut violations = 0;
    let mut max_slack = f64::INFINITY;
    for (pos, &t) in checkpoints.iter().enumerate() {
        let n = errs[pos].len() as f64;
        let mean: f64 = errs[pos].iter().sum::<f64>() / n;
        let var: f64 =
            errs[pos].iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        let rhs = finite_time_rhs(mdp, alpha_lr, omega_min, omega_max, log_c, t);
        checked += 1;
        let slack = rhs - (mean + 2.0 * stderr);
        if slack < 0.0 {
            violations += 1;
        }
        max_slack = max_slack.min(slack);
    }
    // term (I) must die off at large sweeps
    let rho = 1.0 - alpha_lr * omega_min * (1.0 - mdp.gamma);
    let term1_tail = 4.0 * alpha_lr * mdp.gamma * omega_max * mdp.n_actions as f64
        / (1.0 - mdp.gamma)
        * t_max as f64
        * rho.powi(t_max as i32 - 1);
    // masked bound never exceeds the action-space bound
    let rhs_causal =
        finite_time_rhs(mdp, alpha_lr, omega_min, omega_max, log_c, t_max);
    let rhs_action =
        finite_time_rhs(mdp, alpha_lr, omega_min, omega_max, (mdp.n_actions as f64).ln(), t_max);
    checked += 1;
    if log_c <= (mdp.n_actions as f64).ln() && rhs_causal > rhs_action + 1e-12 {
        violations += 1;
    }
    Ok(BoundReport {
        check: "finite-time".into(),
        checked,
        violations,
        max_slack,
        params: format!(
            "alpha={alpha_lr} omega_min={omega_min} omega_max={omega_max} rho={rho} \
             term1_at_tmax={term1_tail} trials={trials}"
        ),
    })
}

/// Convexity certificate for the negative masked entropy
/// `f(pi) = sum_i C_i pi_i ln pi_i` over the simplex.
pub fn check_convexity(n: usize, trials: usize, seed: u64) -> BoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_slack = f64::INFINITY;
    let f = |pi: &[f64], mask: &[u8]| -> f64 {
        pi.iter()
            .zip(mask.iter())
            .filter(|(p, &c)| c != 0 && **p > 0.0)
            .map(|(p, _)| p * p.ln())
            .sum()
    };
    let simplex = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut row: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
        let total: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
        row
    };
    for _ in 0..trials {
        let x = simplex(&mut rng);
        let y = simplex(&mut rng);
        let mut mask: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
        if mask.iter().all(|&c| c == 0) {
            mask[0] = 1;
        }
        let lam: f64 = rng.random_range(0.0..1.0);
        let z: Vec<f64> =
            x.iter().zip(y.iter()).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let lhs = f(&z, &mask);
        let rhs = lam * f(&x, &mask) + (1.0 - lam) * f(&y, &mask);
        let slack = rhs - lhs;
        if slack < -1e-10 {
            violations += 1;
        }
        max_slack = max_slack.min(slack);
    }
    BoundReport {
        check: "entropy-convexity".into(),
        checked: trials,
        violations,
        max_slack,
        params: format!("n={n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_mdp() -> ToyMdp {
        // 2 states, 2 actions
        ToyMdp {
            n_states: 2,
            n_actions: 2,
            transition: vec![
                vec![vec![0.7, 0.3], vec![0.2, 0.8]],
                vec![vec![0.5, 0.5], vec![0.9, 0.1]],
            ],
            reward: vec![vec![1.0, -0.5], vec![0.25, 0.0]],
            gamma: 0.9,
            mask: vec![vec![1, 0], vec![1, 1]],
            policy: vec![vec![0.6, 0.4], vec![0.3, 0.7]],
            tau: 1.0,
        }
    }

    #[test]
    fn bellman_hand_summation() {
        let mdp = hand_mdp();
        let q = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        // state values under the fixed policy
        let h0 = -(0.6f64 * 0.6f64.ln()); // only action 0 masked in state 0
        let h1 = -(0.3f64 * 0.3f64.ln()) - 0.7f64 * 0.7f64.ln();
        let v0 = 0.6 * 1.0 + 0.4 * 2.0 - h0;
        let v1 = -0.3 + 0.7 * 0.5 - h1;
        let t = causal_bellman(&q, &mdp, false);
        let want00 = 1.0 + 0.9 * (0.7 * v0 + 0.3 * v1);
        assert!((t[0][0] - want00).abs() < 1e-12, "{} vs {want00}", t[0][0]);
        let want11 = 0.0 + 0.9 * (0.9 * v0 + 0.1 * v1);
        assert!((t[1][1] - want11).abs() < 1e-12);
    }

    #[test]
    fn bellman_gamma_zero_returns_reward() {
        let mut mdp = hand_mdp();
        mdp.gamma = 0.0;
        let q = vec![vec![3.0, -2.0], vec![0.1, 7.0]];
        let t = causal_bellman(&q, &mdp, false);
        assert_eq!(t, mdp.reward);
    }

    #[test]
    fn bellman_zero_mask_is_expected_sarsa() {
        let mut mdp = hand_mdp();
        // an all-zero mask is outside the ToyMdp invariant but the operator
        // itself must then reduce to the plain expected-policy backup
        mdp.mask = vec![vec![0, 0], vec![0, 0]];
        let q = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let t = causal_bellman(&q, &mdp, false);
        let v0: f64 = 0.6 * 1.0 + 0.4 * 2.0;
        let v1: f64 = -0.3 + 0.7 * 0.5;
        assert!((t[0][0] - (1.0 + 0.9 * (0.7 * v0 + 0.3 * v1))).abs() < 1e-12);
    }

    #[test]
    fn bellman_softmax_policy_variant_is_finite_and_distinct() {
        let mdp = hand_mdp();
        let q = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let fixed = causal_bellman(&q, &mdp, false);
        let softmax = causal_bellman(&q, &mdp, true);
        for row in &softmax {
            assert!(row.iter().all(|v| v.is_finite()));
        }
        assert_ne!(fixed, softmax);
    }

    #[test]
    fn contraction_zero_for_equal_inputs() {
        let mdp = hand_mdp();
        let q = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let t1 = causal_bellman(&q, &mdp, false);
        let t2 = causal_bellman(&q, &mdp, false);
        assert_eq!(sup_diff(&t1, &t2), 0.0);
    }

    #[test]
    fn contraction_holds_on_random_mdps() {
        for seed in 0..5 {
            let mdp = random_mdp(5, 3, 0.85, 0.7, seed);
            mdp.validate().unwrap();
            let report = check_contraction(&mdp, 1000, seed + 9000);
            assert_eq!(report.violations, 0, "{report:?}");
            assert!(report.max_slack >= 0.0, "max ratio exceeded gamma");
        }
    }

    #[test]
    fn qstar_gamma_zero_is_reward() {
        let mut mdp = hand_mdp();
        mdp.gamma = 0.0;
        let qs = solve_qstar(&mdp, 1e-12).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!((qs.q[s][a] - mdp.reward[s][a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qstar_zero_reward_bounded_by_entropy_ceiling() {
        let mut mdp = hand_mdp();
        for row in mdp.reward.iter_mut() {
            for r in row.iter_mut() {
                *r = 0.0;
            }
        }
        let qs = solve_qstar(&mdp, 1e-12).unwrap();
        let ceiling = mdp.gamma / (1.0 - mdp.gamma) * mdp.log_mask_sum() / mdp.tau;
        for s in 0..2 {
            for a in 0..2 {
                assert!(qs.q[s][a].abs() <= ceiling + 1e-9, "{}", qs.q[s][a]);
            }
        }
    }

    #[test]
    fn qstar_residuals_decay_geometrically() {
        let mdp = hand_mdp();
        let mut q = vec![vec![0.0; 2]; 2];
        let mut last_residual = f64::INFINITY;
        for _ in 0..50 {
            let next = soft_iteration_step(&q, &mdp);
            let residual = sup_diff(&next, &q);
            assert!(residual <= mdp.gamma * last_residual + 1e-12);
            last_residual = residual;
            q = next;
        }
    }

    #[test]
    fn qstar_identity_value_matches_masked_logsumexp() {
        let mdp = random_mdp(6, 4, 0.8, 0.9, 3);
        let qs = solve_qstar(&mdp, 1e-12).unwrap();
        let direct = soft_values(&qs.q, &mdp);
        for (a, b) in qs.v.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn qstar_bounds_hold_and_coincide_for_single_mask() {
        for seed in 0..10 {
            let mdp = random_mdp(6, 4, 0.8, 0.9, seed + 40);
            let qs = solve_qstar(&mdp, 1e-12).unwrap();
            let report = check_qstar_bounds(&mdp, &qs);
            assert_eq!(report.violations, 0, "{report:?}");
        }
        // degenerate mask: exactly one admissible action per state
        let mut mdp = random_mdp(4, 3, 0.85, 1.1, 77);
        for s in 0..4 {
            mdp.mask[s] = vec![0; 3];
            mdp.mask[s][s % 3] = 1;
        }
        let qs = solve_qstar(&mdp, 1e-13).unwrap();
        let report = check_qstar_bounds(&mdp, &qs);
        assert_eq!(report.violations, 0);
        // upper and lower bounds coincide: slack collapses to ~0
        assert!(report.max_slack.abs() < 1e-7, "slack {}", report.max_slack);
    }

    #[test]
    fn causal_upper_bound_no_looser_than_action_space_bound() {
        let mdp = random_mdp(5, 4, 0.9, 1.0, 8);
        let log_c = mdp.log_mask_sum();
        let log_a = (mdp.n_actions as f64).ln();
        assert!(log_c <= log_a + 1e-12);
        let bias_causal = mdp.gamma / (1.0 - mdp.gamma) * log_c / mdp.tau;
        let bias_action = mdp.gamma / (1.0 - mdp.gamma) * log_a / mdp.tau;
        assert!(bias_causal <= bias_action);
    }

    #[test]
    fn error_decay_certificate() {
        for seed in 0..5 {
            let mdp = random_mdp(5, 3, 0.85, 0.8, seed + 200);
            let qs = solve_qstar(&mdp, 1e-13).unwrap();
            let report = check_error_decay(&mdp, &qs, 200);
            assert_eq!(report.violations, 0, "{report:?}");
        }
    }

    #[test]
    fn error_decay_pure_geometric_when_mask_singleton() {
        let mut mdp = random_mdp(4, 2, 0.8, 1.0, 5);
        for s in 0..4 {
            mdp.mask[s] = vec![1, 0];
        }
        assert_eq!(mdp.log_mask_sum(), 0.0);
        let qs = solve_qstar(&mdp, 1e-13).unwrap();
        // with zero bias the bound is pure geometric decay to zero
        let report = check_error_decay(&mdp, &qs, 300);
        assert_eq!(report.violations, 0, "{report:?}");
    }

    #[test]
    fn convergence_time_certificate_and_formula() {
        let mdp = random_mdp(5, 3, 0.8, 0.9, 31);
        let qs = solve_qstar(&mdp, 1e-13).unwrap();
        let bias = mdp.gamma / (1.0 - mdp.gamma) * mdp.log_mask_sum() / mdp.tau;
        let eps_grid = vec![bias + 0.05, bias + 0.2, bias + 1.0, bias + 10.0];
        let report = check_convergence_time(&mdp, &qs, &eps_grid).unwrap();
        assert_eq!(report.violations, 0, "{report:?}");
        // eps at or below the bias floor is rejected
        assert!(check_convergence_time(&mdp, &qs, &[bias]).is_err());
        // large eps: zero sweeps needed
        let big = vec![bias + 1e6];
        let report = check_convergence_time(&mdp, &qs, &big).unwrap();
        assert_eq!(report.violations, 0);

        // halving (eps - bias) grows the cap by about log 2 / log(1/gamma)
        let gamma: f64 = 0.8;
        let v0_gap = 10.0;
        let c1 = convergence_time_cap(bias + 0.4, bias, v0_gap, gamma);
        let c2 = convergence_time_cap(bias + 0.2, bias, v0_gap, gamma);
        let predicted = (2.0f64.ln() / (1.0 / gamma).ln()).round() as isize;
        assert!(
            ((c2 as isize - c1 as isize) - predicted).abs() <= 1,
            "cap grew by {} expected ~{predicted}",
            c2 as isize - c1 as isize
        );
    }

    #[test]
    fn finite_time_bound_certificate() {
        let mdp = random_mdp(3, 2, 0.8, 1.0, 55);
        let report = check_finite_time_bound(&mdp, 0.1, 1000, 200, 99).unwrap();
        assert_eq!(report.violations, 0, "{report:?}");
        // term (I) at t_max is negligible
        assert!(report.params.contains("term1_at_tmax"));
    }

    #[test]
    fn convexity_certificate() {
        let report = check_convexity(6, 10_000, 3);
        assert_eq!(report.violations, 0, "{report:?}");
    }

    #[test]
    fn random_mdp_validates() {
        for seed in 0..20 {
            random_mdp(8, 4, 0.9, 0.65, seed).validate().unwrap();
        }
    }
}
