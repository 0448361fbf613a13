//! Recursive Bayesian monitoring of partially observed streams.
//!
//! The posterior over the mean vector is tracked through its precision
//! `V_n^{-1}` and mean `mu_n`, decayed by `lambda` each step and updated
//! only on the observed coordinates. The quadratic form `mu' V^{-1} mu`
//! is the local statistic compared against a chi-square quantile.

use crate::discovery::CpeMatrix;
use crate::linalg::{cholesky, cholesky_solve, spd_inverse, Mat};
use crate::stats::chi2_quantile;
use crate::{Error, Result};

/// Posterior state of the stream-mean estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    pub p: usize,
    pub mu: Vec<f64>,
    /// Posterior precision `V_n^{-1}` (symmetric positive definite).
    pub precision: Mat,
    pub lambda: f64,
    /// Observation covariance of the streams.
    pub sigma: Mat,
    pub step: usize,
}

/// The three per-stream rows fed to the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalState {
    /// Per-variable contributions to the local statistic.
    pub lam_row: Vec<f64>,
    /// Causal statistic.
    pub phi_row: Vec<f64>,
    /// Steps since each stream was last observed.
    pub y_row: Vec<u32>,
}

impl CausalState {
    pub fn zeros(p: usize) -> Self {
        CausalState {
            lam_row: vec![0.0; p],
            phi_row: vec![0.0; p],
            y_row: vec![0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.lam_row.len()
    }

    /// Row-major flattening (`Lambda` row, then `Phi`, then `Y`): the
    /// network input contract.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.lam_row.len());
        out.extend_from_slice(&self.lam_row);
        out.extend_from_slice(&self.phi_row);
        out.extend(self.y_row.iter().map(|&y| y as f64));
        out
    }
}

/// Per-variable contributions to the local statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributions {
    pub total: f64,
    pub per_var: Vec<f64>,
}

/// Fresh monitor with `mu = 0` and identity precision.
pub fn init_monitor(p: usize, sigma: Mat, lambda: f64) -> Result<MonitorState> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("lambda {lambda} outside [0,1)")));
    }
    if sigma.rows != p || sigma.cols != p {
        return Err(Error::Invalid("sigma dimensions disagree with p".into()));
    }
    cholesky(&sigma).map_err(|_| Error::NotSpd("sigma must be SPD".into()))?;
    Ok(MonitorState {
        p,
        mu: vec![0.0; p],
        precision: Mat::identity(p),
        lambda,
        sigma,
        step: 0,
    })
}

/// One Bayes update revealing the coordinates in `selected` of `x`.
///
/// `V_n^{-1} = (1-lambda) V_{n-1}^{-1} + E_S' (Sigma_S)^{-1} E_S` and
/// `mu_n = V_n [ (1-lambda) V_{n-1}^{-1} mu_{n-1} + E_S' (Sigma_S)^{-1} x_S ]`,
/// where the `S` subscript restricts to the selected coordinates.
pub fn update_monitor(
    state: &MonitorState,
    x: &[f64],
    selected: &[usize],
) -> Result<MonitorState> {
    let p = state.p;
    if selected.is_empty() {
        return Err(Error::Invalid("selected set must be nonempty".into()));
    }
    if x.len() != p {
        return Err(Error::Invalid("observation length != p".into()));
    }
    if let Some(&bad) = selected.iter().find(|&&i| i >= p) {
        return Err(Error::Invalid(format!("selected index {bad} out of range")));
    }
    let decay = 1.0 - state.lambda;
    let sigma_s = state.sigma.submatrix(selected);
    let sigma_s_inv = spd_inverse(&sigma_s).map_err(|_| {
        Error::Singular(format!("restricted covariance over {selected:?}"))
    })?;

    // new precision: decay everything, add information on selected coords
    let mut precision = state.precision.clone();
    precision.scale(decay);
    for (a, &i) in selected.iter().enumerate() {
        for (b, &j) in selected.iter().enumerate() {
            precision.add_at(i, j, sigma_s_inv.get(a, b));
        }
    }

    // right-hand side: decayed prior information plus observed innovation
    let mut rhs = state.precision.mat_vec(&state.mu);
    for v in rhs.iter_mut() {
        *v *= decay;
    }
    let x_s: Vec<f64> = selected.iter().map(|&i| x[i]).collect();
    let info = sigma_s_inv.mat_vec(&x_s);
    for (a, &i) in selected.iter().enumerate() {
        rhs[i] += info[a];
    }

    let l = cholesky(&precision)
        .map_err(|_| Error::NotSpd("updated precision lost definiteness".into()))?;
    let mu = cholesky_solve(&l, &rhs);
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("posterior mean".into()));
    }
    Ok(MonitorState {
        p,
        mu,
        precision,
        lambda: state.lambda,
        sigma: state.sigma.clone(),
        step: state.step + 1,
    })
}

/// Local statistic and its per-variable split.
///
/// With `xi = V^{-1} mu`, the contribution of variable `i` is
/// `mu_i * xi_i` and the total is the quadratic form `mu' V^{-1} mu`.
pub fn local_contributions(state: &MonitorState) -> Contributions {
    let xi = state.precision.mat_vec(&state.mu);
    let per_var: Vec<f64> = state.mu.iter().zip(xi.iter()).map(|(m, x)| m * x).collect();
    let total = per_var.iter().sum();
    Contributions { total, per_var }
}

/// Causal statistic: `phi_i = mu_i^2 eta_ii + sum_{j != i} mu_i eta_ij mu_j`.
pub fn causal_statistic(state: &MonitorState, cpe: &CpeMatrix) -> Result<Vec<f64>> {
    if cpe.p != state.p {
        return Err(Error::Invalid("cpe dimension != p".into()));
    }
    let p = state.p;
    let mut phi = vec![0.0; p];
    for i in 0..p {
        let mut v = state.mu[i] * state.mu[i] * cpe.get(i, i);
        for j in 0..p {
            if j != i {
                v += state.mu[i] * cpe.get(i, j) * state.mu[j];
            }
        }
        phi[i] = v;
    }
    Ok(phi)
}

/// Reset observed streams' staleness to zero, grow the rest by one.
pub fn update_staleness(y: &[u32], selected: &[usize]) -> Vec<u32> {
    y.iter()
        .enumerate()
        .map(|(j, &v)| if selected.contains(&j) { 0 } else { v + 1 })
        .collect()
}

/// Stack the three rows into the network-facing state.
pub fn assemble_state(
    lam_row: Vec<f64>,
    phi_row: Vec<f64>,
    y_row: Vec<u32>,
) -> Result<CausalState> {
    if lam_row.len() != phi_row.len() || lam_row.len() != y_row.len() {
        return Err(Error::Invalid("causal state rows have unequal lengths".into()));
    }
    Ok(CausalState { lam_row, phi_row, y_row })
}

/// Alarm decision: trigger when the statistic exceeds the chi-square
/// quantile with `dof` degrees of freedom at confidence `1 - zeta`.
pub fn alarm_check(lam_selected_sum: f64, dof: usize, zeta: f64) -> bool {
    assert!(zeta > 0.0 && zeta < 1.0, "zeta must be in (0,1)");
    lam_selected_sum > chi2_quantile(dof, 1.0 - zeta)
}
