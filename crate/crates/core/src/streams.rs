//! Synthetic multivariate data streams over a known causal DAG, plus CSV
//! ingestion for external data.
//!
//! Streams follow a linear-Gaussian structural model: each variable is a
//! weighted sum of its parents plus unit-variance exogenous noise. Mean
//! shifts enter as exogenous offsets on the shifted variables so that the
//! shift propagates to causal descendants with path-weighted magnitude.

use rand::seq::SliceRandom;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Ground-truth directed acyclic graph over `p` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    pub p: usize,
    /// `adjacency[i][j]` is true iff there is an edge `i -> j` (0-based).
    pub adjacency: Vec<Vec<bool>>,
    /// Topological order: `topo_order[rank]` is the variable at that rank.
    pub topo_order: Vec<usize>,
}

impl CausalGraph {
    pub fn empty(p: usize) -> Self {
        CausalGraph {
            p,
            adjacency: vec![vec![false; p]; p],
            topo_order: (0..p).collect(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .sum()
    }

    /// Rank of each variable in the topological order.
    pub fn topo_rank(&self) -> Vec<usize> {
        let mut rank = vec![0usize; self.p];
        for (r, &v) in self.topo_order.iter().enumerate() {
            rank[v] = r;
        }
        rank
    }

    /// Acyclicity witness: every edge goes forward in the topological order.
    pub fn is_acyclic_by_order(&self) -> bool {
        let rank = self.topo_rank();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.adjacency[i][j] && rank[i] >= rank[j] {
                    return false;
                }
            }
        }
        true
    }
}

/// DAG with structural-equation edge coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDag {
    pub graph: CausalGraph,
    /// `weights[i][j]` is the coefficient of parent `i` in child `j`'s
    /// equation; zero where no edge exists.
    pub weights: Vec<Vec<f64>>,
}

/// Which streams shift, by how much, and when.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    /// 0-based indices of shifted streams.
    pub shifted_indices: Vec<usize>,
    pub pattern: ShiftPattern,
    /// Shift magnitude delta >= 0.
    pub delta: f64,
    /// First shifted time step (1-based).
    pub onset: usize,
    /// Shift persists over `[onset, onset + duration]`.
    pub duration: usize,
    /// Std-dev of observation noise added to every entry (0 disables).
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftPattern {
    /// All shifted streams move by `+delta`.
    AllPositive,
    /// Shifted streams alternate `+delta, -delta, +delta, ...`.
    Alternating,
}

impl ShiftSpec {
    /// Exogenous shift applied to each variable while the shift is active.
    pub fn shift_vector(&self, p: usize) -> Vec<f64> {
        let mut mu = vec![0.0; p];
        for (pos, &idx) in self.shifted_indices.iter().enumerate() {
            let sign = match self.pattern {
                ShiftPattern::AllPositive => 1.0,
                ShiftPattern::Alternating => {
                    if pos % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            mu[idx] = sign * self.delta;
        }
        mu
    }

    pub fn active_at(&self, t: usize) -> bool {
        t >= self.onset && t <= self.onset + self.duration
    }

    fn validate(&self, p: usize, horizon: usize) -> Result<()> {
        if self.delta < 0.0 {
            return Err(Error::Invalid("delta must be >= 0".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Invalid("noise_sigma must be >= 0".into()));
        }
        if self.shifted_indices.len() > p {
            return Err(Error::Invalid("more shifted indices than streams".into()));
        }
        if let Some(&bad) = self.shifted_indices.iter().find(|&&i| i >= p) {
            return Err(Error::Invalid(format!("shifted index {bad} out of range")));
        }
        if self.onset + self.duration > horizon {
            return Err(Error::Invalid(format!(
                "shift window {}..{} exceeds horizon {horizon}",
                self.onset,
                self.onset + self.duration
            )));
        }
        Ok(())
    }
}

/// A generated or ingested block of stream values.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBatch {
    pub horizon: usize,
    pub p: usize,
    /// `values[t][j]` for t in `0..horizon` (time step `t+1`), stream `j`.
    pub values: Vec<Vec<f64>>,
    /// Ground truth; absent for ingested data.
    pub truth: Option<(ShiftSpec, CausalGraph)>,
}

impl StreamBatch {
    /// Row for 1-based time step `t`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t - 1]
    }
}

/// Sample an Erdos-Renyi DAG: a random topological ordering, then each
/// order-respecting pair becomes an edge independently with `edge_prob`.
pub fn sample_er_dag(p: usize, edge_prob: f64, seed: u64) -> Result<CausalGraph> {
    if p == 0 {
        return Err(Error::Invalid("p must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Invalid(format!(
            "edge_prob {edge_prob} outside [0,1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topo_order: Vec<usize> = (0..p).collect();
    topo_order.shuffle(&mut rng);
    let mut adjacency = vec![vec![false; p]; p];
    for a in 0..p {
        for b in a + 1..p {
            let i = topo_order[a];
            let j = topo_order[b];
            if rng.random_range(0.0..1.0) < edge_prob {
                adjacency[i][j] = true;
            }
        }
    }
    Ok(CausalGraph { p, adjacency, topo_order })
}

/// Draw a coefficient with magnitude uniform in `[low, high]` and a random
/// sign for every edge.
pub fn assign_sem_weights(
    graph: &CausalGraph,
    low: f64,
    high: f64,
    seed: u64,
) -> Result<WeightedDag> {
    if !(low > 0.0 && low <= high) {
        return Err(Error::Invalid(format!(
            "need 0 < low <= high, got [{low}, {high}]"
        )));
    }
    let p = graph.p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![vec![0.0; p]; p];
    // iterate in a fixed order so the draw sequence is reproducible
    for i in 0..p {
        for j in 0..p {
            if graph.adjacency[i][j] {
                let mag = if low == high {
                    low
                } else {
                    rng.random_range(low..high)
                };
                let sign = if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
                weights[i][j] = sign * mag;
            }
        }
    }
    Ok(WeightedDag { graph: graph.clone(), weights })
}

/// Simulate the structural model over `horizon` steps.
///
/// Pre-onset every exogenous term is N(0,1); during the shift window the
/// shift vector is added to the exogenous terms of shifted variables, so
/// descendants move by the path-weighted amount. Optional observation noise
/// N(0, sigma^2) is added to every entry afterward.
pub fn generate_streams(
    dag: &WeightedDag,
    spec: &ShiftSpec,
    horizon: usize,
    seed: u64,
) -> Result<StreamBatch> {
    let p = dag.graph.p;
    spec.validate(p, horizon)?;
    for row in &dag.weights {
        if row.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("SEM weight".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = spec.shift_vector(p);
    let order = &dag.graph.topo_order;
    let mut values = Vec::with_capacity(horizon);
    for step in 1..=horizon {
        let mut eps: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if spec.active_at(step) && spec.delta != 0.0 {
            for j in 0..p {
                eps[j] += shift[j];
            }
        }
        let mut x = vec![0.0; p];
        for &j in order {
            let mut v = eps[j];
            for i in 0..p {
                let w = dag.weights[i][j];
                if w != 0.0 {
                    v += w * x[i];
                }
            }
            x[j] = v;
        }
        if spec.noise_sigma > 0.0 {
            for v in x.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *v += spec.noise_sigma * n;
            }
        }
        values.push(x);
    }
    Ok(StreamBatch {
        horizon,
        p,
        values,
        truth: Some((spec.clone(), dag.graph.clone())),
    })
}

/// Parse CSV text into a batch, keeping columns `first_col..=last_col`
/// (1-based, inclusive). A non-numeric first row is treated as a header.
pub fn parse_csv_streams(text: &str, first_col: usize, last_col: usize) -> Result<StreamBatch> {
    if first_col == 0 || last_col < first_col {
        return Err(Error::Invalid(format!(
            "bad column range {first_col}..{last_col} (1-based, inclusive)"
        )));
    }
    let p = last_col - first_col + 1;
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut header_skipped = false;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < last_col {
            return Err(Error::Parse {
                row: line_no + 1,
                col: fields.len() + 1,
                msg: format!("row has {} fields, need at least {last_col}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(p);
        let mut bad: Option<(usize, String)> = None;
        for (k, field) in fields[first_col - 1..last_col].iter().enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    bad = Some((first_col + k, format!("non-finite value {v}")));
                    break;
                }
                Err(_) => {
                    bad = Some((first_col + k, format!("not a number: {:?}", field.trim())));
                    break;
                }
            }
        }
        match bad {
            None => values.push(row),
            Some((col, msg)) => {
                // a non-numeric first data row is an auto-detected header
                if values.is_empty() && !header_skipped {
                    header_skipped = true;
                    continue;
                }
                return Err(Error::Parse { row: line_no + 1, col, msg });
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Parse { row: 1, col: 1, msg: "no data rows".into() });
    }
    Ok(StreamBatch { horizon: values.len(), p, values, truth: None })
}

/// Load a CSV file of streams; see [`parse_csv_streams`].
pub fn load_csv_streams(
    path: &std::path::Path,
    first_col: usize,
    last_col: usize,
) -> Result<StreamBatch> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_streams(&text, first_col, last_col)
}

/// Serialize a batch back to the same CSV dialect (no header, one row per
/// time step, full-precision values).
pub fn write_csv_streams(batch: &StreamBatch) -> String {
    let mut out = String::new();
    for row in &batch.values {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_dag_degenerate_probabilities() {
        let g = sample_er_dag(5, 0.0, 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = sample_er_dag(5, 1.0, 1).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert!(g.is_acyclic_by_order());
    }

    #[test]
    fn er_dag_rejects_bad_prob() {
        assert!(sample_er_dag(5, 1.5, 1).is_err());
        assert!(sample_er_dag(5, -0.1, 1).is_err());
        assert!(sample_er_dag(0, 0.5, 1).is_err());
    }

    #[test]
    fn er_dag_deterministic_and_mean_edges() {
        let a = sample_er_dag(10, 0.3, 7).unwrap();
        let b = sample_er_dag(10, 0.3, 7).unwrap();
        assert_eq!(a, b);
        // Monte-Carlo oracle over seeds: mean edge count ~= 45 * 0.3
        let mut total = 0usize;
        for seed in 0..1000u64 {
            total += sample_er_dag(10, 0.3, seed).unwrap().edge_count();
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 45.0 * 0.3).abs() < 2.0, "mean edges {mean}");
    }

    #[test]
    fn sem_weights_degenerate_interval_and_determinism() {
        let g = sample_er_dag(6, 0.5, 3).unwrap();
        let w = assign_sem_weights(&g, 0.5, 0.5, 11).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if g.adjacency[i][j] {
                    assert_eq!(w.weights[i][j].abs(), 0.5);
                } else {
                    assert_eq!(w.weights[i][j], 0.0);
                }
            }
        }
        let w2 = assign_sem_weights(&g, 0.5, 0.5, 11).unwrap();
        assert_eq!(w, w2);

        let empty = CausalGraph::empty(4);
        let w = assign_sem_weights(&empty, 0.3, 0.8, 5).unwrap();
        assert!(w.weights.iter().flatten().all(|&v| v == 0.0));
    }

    fn chain_dag(weights: &[f64]) -> WeightedDag {
        let p = weights.len() + 1;
        let mut g = CausalGraph::empty(p);
        let mut w = vec![vec![0.0; p]; p];
        for (i, &wi) in weights.iter().enumerate() {
            g.adjacency[i][i + 1] = true;
            w[i][i + 1] = wi;
        }
        WeightedDag { graph: g, weights: w }
    }

    fn null_spec(p: usize, horizon: usize) -> ShiftSpec {
        let _ = p;
        ShiftSpec {
            shifted_indices: vec![],
            pattern: ShiftPattern::AllPositive,
            delta: 0.0,
            onset: horizon,
            duration: 0,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn null_streams_have_zero_mean() {
        let dag = chain_dag(&[0.5]);
        let batch = generate_streams(&dag, &null_spec(2, 10_000), 10_000, 42).unwrap();
        for j in 0..2 {
            let mean: f64 =
                batch.values.iter().map(|r| r[j]).sum::<f64>() / batch.horizon as f64;
            assert!(mean.abs() < 0.05, "col {j} mean {mean}");
        }
    }

    #[test]
    fn shift_propagates_along_chain() {
        // 1 -> 2 with w = 0.5, delta = 2 on stream 1: E[X2] = 1.0 post-onset
        let dag = chain_dag(&[0.5]);
        let spec = ShiftSpec {
            shifted_indices: vec![0],
            pattern: ShiftPattern::AllPositive,
            delta: 2.0,
            onset: 1,
            duration: 9_999,
            noise_sigma: 0.0,
        };
        let batch = generate_streams(&dag, &spec, 10_000, 9).unwrap();
        let mean1: f64 = batch.values.iter().map(|r| r[0]).sum::<f64>() / 10_000.0;
        let mean2: f64 = batch.values.iter().map(|r| r[1]).sum::<f64>() / 10_000.0;
        assert!((mean1 - 2.0).abs() < 0.1, "shifted stream mean {mean1}");
        assert!((mean2 - 1.0).abs() < 0.1, "child stream mean {mean2}");
    }

    #[test]
    fn alternating_shift_vector_matches_pattern() {
        let spec = ShiftSpec {
            shifted_indices: vec![0, 1, 2, 3],
            pattern: ShiftPattern::Alternating,
            delta: 1.0,
            onset: 1,
            duration: 1,
            noise_sigma: 0.0,
        };
        let mu = spec.shift_vector(6);
        assert_eq!(mu, vec![1.0, -1.0, 1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_parse_basic_and_errors() {
        let batch = parse_csv_streams("1,2,3,4\n5,6,7,8\n9,10,11,12\n", 1, 4).unwrap();
        assert_eq!(batch.horizon, 3);
        assert_eq!(batch.p, 4);
        assert!(batch.truth.is_none());
        assert_eq!(batch.values[2], vec![9.0, 10.0, 11.0, 12.0]);

        let err = parse_csv_streams("", 1, 3).unwrap_err();
        assert!(err.to_string().contains("no data rows"), "{err}");

        let err = parse_csv_streams("1,2\n3,oops\n", 1, 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn csv_header_autodetected() {
        let batch = parse_csv_streams("a,b\n1,2\n3,4\n", 1, 2).unwrap();
        assert_eq!(batch.horizon, 2);
        assert_eq!(batch.values[0], vec![1.0, 2.0]);
    }

    #[test]
    fn csv_column_window() {
        // 55 columns, keep 5..=55 -> p = 51 (caller owns the off-by-one)
        let row: Vec<String> = (1..=55).map(|v| v.to_string()).collect();
        let text = format!("{}\n", row.join(","));
        let batch = parse_csv_streams(&text, 5, 55).unwrap();
        assert_eq!(batch.p, 51);
        assert_eq!(batch.values[0][0], 5.0);
    }

    #[test]
    fn csv_round_trip() {
        let dag = chain_dag(&[0.4, -0.6]);
        let batch = generate_streams(&dag, &null_spec(3, 25), 25, 77).unwrap();
        let text = write_csv_streams(&batch);
        let back = parse_csv_streams(&text, 1, 3).unwrap();
        assert_eq!(back.values, batch.values);
    }

    #[test]
    fn no_shift_before_onset() {
        let dag = chain_dag(&[0.5, 0.5]);
        let spec = ShiftSpec {
            shifted_indices: vec![0],
            pattern: ShiftPattern::AllPositive,
            delta: 3.0,
            onset: 5_001,
            duration: 4_999,
            noise_sigma: 0.0,
        };
        let batch = generate_streams(&dag, &spec, 10_000, 4).unwrap();
        for j in 0..3 {
            let pre: f64 =
                batch.values[..5_000].iter().map(|r| r[j]).sum::<f64>() / 5_000.0;
            // 3 * stderr with per-column sd <= ~1.25
            assert!(pre.abs() < 0.06, "col {j} pre-onset mean {pre}");
        }
    }
}
