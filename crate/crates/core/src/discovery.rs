//! Constraint-based causal discovery and the causal propagation effect.
//!
//! A PC-style pass removes edges by Fisher-z conditional independence tests,
//! v-structures and Meek rules orient what they can, and per-node least
//! squares on the resolved DAG yields standardized path coefficients whose
//! path products form the propagation matrix `eta`.

use std::collections::BTreeMap;

use crate::linalg::{cholesky, cholesky_solve, Mat};
use crate::stats::normal_cdf;
use crate::streams::{CausalGraph, WeightedDag};
use crate::{Error, Result};

/// Completed partially directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    pub p: usize,
    /// `directed[i][j]`: oriented edge `i -> j`.
    pub directed: Vec<Vec<bool>>,
    /// `undirected[i][j]` (symmetric): unresolved adjacency `i -- j`.
    pub undirected: Vec<Vec<bool>>,
}

impl Cpdag {
    pub fn empty(p: usize) -> Self {
        Cpdag {
            p,
            directed: vec![vec![false; p]; p],
            undirected: vec![vec![false; p]; p],
        }
    }

    /// Treat a ground-truth DAG as a fully oriented CPDAG.
    pub fn from_dag(g: &CausalGraph) -> Self {
        Cpdag {
            p: g.p,
            directed: g.adjacency.clone(),
            undirected: vec![vec![false; g.p]; g.p],
        }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.directed[i][j] || self.directed[j][i] || self.undirected[i][j]
    }

    pub fn directed_edge_count(&self) -> usize {
        self.directed
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn undirected_edge_count(&self) -> usize {
        let mut n = 0;
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.undirected[i][j] {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Causal propagation effect matrix.
///
/// `eta[i][j]` is the absolute total directed effect of stream `i` on
/// stream `j`: 1 on the diagonal, in `[0, 1)` off it, and 0 unless `i` is
/// an ancestor of `j` in the resolved DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct CpeMatrix {
    pub p: usize,
    pub eta: Mat,
}

impl CpeMatrix {
    pub fn identity(p: usize) -> Self {
        CpeMatrix { p, eta: Mat::identity(p) }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.eta.get(i, j)
    }
}

/// Structure recovery scores against a ground-truth DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub shd: usize,
    pub tpr: f64,
    pub fdr: f64,
    /// False when no edges were predicted (FDR is 0/0).
    pub fdr_defined: bool,
}

/// Fisher-z conditional independence verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherZ {
    pub p_value: f64,
    pub independent: bool,
}

/// Undirected skeleton with separating sets.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub p: usize,
    pub adjacency: Vec<Vec<bool>>,
    /// Keyed by (min, max) pair of a removed edge.
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
}

fn column_means(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len() as f64;
    let p = data[0].len();
    let mut means = vec![0.0; p];
    for row in data {
        for (m, v) in means.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    means
}

/// Sample covariance of the listed columns (n-1 normalization).
fn covariance_of(data: &[Vec<f64>], cols: &[usize]) -> Mat {
    let n = data.len();
    let means = column_means(data);
    let k = cols.len();
    let mut cov = Mat::zeros(k, k);
    for row in data {
        for (a, &ca) in cols.iter().enumerate() {
            let da = row[ca] - means[ca];
            for (b, &cb) in cols.iter().enumerate().skip(a) {
                cov.add_at(a, b, da * (row[cb] - means[cb]));
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = cov.get(a, b) / (n as f64 - 1.0);
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    cov
}

/// Partial correlation of columns `i` and `j` given `cond`, via residuals of
/// least-squares projections onto the conditioning block.
fn partial_correlation(
    data: &[Vec<f64>],
    i: usize,
    j: usize,
    cond: &[usize],
) -> Result<f64> {
    let n = data.len();
    let means = column_means(data);
    let mut resid_i: Vec<f64> = data.iter().map(|r| r[i] - means[i]).collect();
    let mut resid_j: Vec<f64> = data.iter().map(|r| r[j] - means[j]).collect();
    if !cond.is_empty() {
        let gram = covariance_of(data, cond);
        let l = cholesky(&gram).map_err(|_| {
            Error::Singular(format!("conditioning set {cond:?} has singular covariance"))
        })?;
        for (target, resid) in [(i, &mut resid_i), (j, &mut resid_j)] {
            let mut cross = vec![0.0; cond.len()];
            for row in data {
                let dt = row[target] - means[target];
                for (a, &c) in cond.iter().enumerate() {
                    cross[a] += dt * (row[c] - means[c]);
                }
            }
            for v in cross.iter_mut() {
                *v /= n as f64 - 1.0;
            }
            let beta = cholesky_solve(&l, &cross);
            for (r, row) in resid.iter_mut().zip(data.iter()) {
                for (a, &c) in cond.iter().enumerate() {
                    *r -= beta[a] * (row[c] - means[c]);
                }
            }
        }
    }
    let sii: f64 = resid_i.iter().map(|v| v * v).sum();
    let sjj: f64 = resid_j.iter().map(|v| v * v).sum();
    let sij: f64 = resid_i.iter().zip(resid_j.iter()).map(|(a, b)| a * b).sum();
    if sii <= 0.0 || sjj <= 0.0 {
        // a residual collapsed to zero: nothing left to correlate
        return Ok(0.0);
    }
    Ok((sij / (sii.sqrt() * sjj.sqrt())).clamp(-1.0, 1.0))
}

/// Fisher-z conditional independence test of columns `i` and `j` given the
/// conditioning columns `cond`.
pub fn fisher_z_test(
    data: &[Vec<f64>],
    i: usize,
    j: usize,
    cond: &[usize],
    alpha_sig: f64,
) -> Result<FisherZ> {
    let n = data.len();
    if n <= cond.len() + 3 {
        return Err(Error::Invalid(format!(
            "need n > |cond| + 3, got n={n}, |cond|={}",
            cond.len()
        )));
    }
    if i == j || cond.contains(&i) || cond.contains(&j) {
        return Err(Error::Invalid("test variables must be distinct from cond".into()));
    }
    let r = partial_correlation(data, i, j, cond)?;
    let r = r.clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * ((n - cond.len() - 3) as f64).sqrt();
    let p_value = 2.0 * (1.0 - normal_cdf(z.abs()));
    Ok(FisherZ { p_value, independent: p_value >= alpha_sig })
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > items.len() {
        return out;
    }
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // advance lexicographically
        let mut pos = k;
        let mut advanced = false;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + items.len() - k {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            return out;
        }
    }
}

/// PC-style skeleton discovery.
///
/// Conditioning sizes grow from 0 to `max_cond`; within one size level the
/// neighbor sets are frozen, so removals only take effect between levels.
pub fn discover_skeleton(
    data: &[Vec<f64>],
    alpha_sig: f64,
    max_cond: usize,
) -> Result<Skeleton> {
    let n = data.len();
    if n < 10 {
        return Err(Error::Invalid(format!("need n >= 10 rows, got {n}")));
    }
    let p = data[0].len();
    let mut adj = vec![vec![true; p]; p];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = false;
    }
    let mut sepsets = BTreeMap::new();
    for level in 0..=max_cond {
        if n <= level + 3 {
            break;
        }
        let frozen = adj.clone();
        let mut removals: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                if !frozen[i][j] {
                    continue;
                }
                let mut found = None;
                'sides: for (a, b) in [(i, j), (j, i)] {
                    let neigh: Vec<usize> =
                        (0..p).filter(|&k| frozen[a][k] && k != b).collect();
                    for subset in combinations(&neigh, level) {
                        let res = fisher_z_test(data, i, j, &subset, alpha_sig)?;
                        if res.independent {
                            found = Some(subset);
                            break 'sides;
                        }
                    }
                    if level == 0 {
                        break; // the empty set is the same from both sides
                    }
                }
                if let Some(sep) = found {
                    removals.push((i, j, sep));
                }
            }
        }
        for (i, j, sep) in removals {
            adj[i][j] = false;
            adj[j][i] = false;
            sepsets.insert((i, j), sep);
        }
        let max_degree = adj
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .max()
            .unwrap_or(0);
        if max_degree <= level + 1 {
            break;
        }
    }
    Ok(Skeleton { p, adjacency: adj, sepsets })
}

fn creates_directed_cycle(directed: &[Vec<bool>], from: usize, to: usize) -> bool {
    // orienting from -> to closes a cycle iff `from` is reachable from `to`
    let p = directed.len();
    let mut stack = vec![to];
    let mut seen = vec![false; p];
    while let Some(u) = stack.pop() {
        if u == from {
            return true;
        }
        if seen[u] {
            continue;
        }
        seen[u] = true;
        for (v, &e) in directed[u].iter().enumerate() {
            if e && !seen[v] {
                stack.push(v);
            }
        }
    }
    false
}

fn orient_apply(g: &mut Cpdag, a: usize, b: usize) -> bool {
    if g.undirected[a][b] && !creates_directed_cycle(&g.directed, a, b) {
        g.undirected[a][b] = false;
        g.undirected[b][a] = false;
        g.directed[a][b] = true;
        true
    } else {
        false
    }
}

/// Orient v-structures, then apply Meek rules R1-R3 to a fixpoint.
pub fn orient_edges(skeleton: &Skeleton) -> Cpdag {
    let p = skeleton.p;
    let mut g = Cpdag::empty(p);
    for i in 0..p {
        for j in 0..p {
            g.undirected[i][j] = skeleton.adjacency[i][j];
        }
    }
    // v-structures i -> k <- j for nonadjacent (i, j) with k not in sepset
    let mut claims: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    for k in 0..p {
        for i in 0..p {
            if i == k || !skeleton.adjacency[i][k] {
                continue;
            }
            for j in i + 1..p {
                if j == k || j == i || !skeleton.adjacency[j][k] || skeleton.adjacency[i][j]
                {
                    continue;
                }
                let sep = skeleton.sepsets.get(&(i.min(j), i.max(j)));
                let in_sep = sep.map(|s| s.contains(&k)).unwrap_or(false);
                if !in_sep {
                    claims.insert((i, k), true);
                    claims.insert((j, k), true);
                }
            }
        }
    }
    let keys: Vec<(usize, usize)> = claims.keys().copied().collect();
    for (from, to) in keys {
        if claims.contains_key(&(to, from)) {
            continue; // conflicting collider claims: stay undirected
        }
        orient_apply(&mut g, from, to);
    }
    // Meek rules R1-R3 to fixpoint
    loop {
        let mut changed = false;
        for a in 0..p {
            for b in 0..p {
                if a == b || !g.undirected[a][b] {
                    continue;
                }
                // R1: c -> a with c, b nonadjacent  =>  a -> b
                let r1 = (0..p).any(|c| c != b && g.directed[c][a] && !g.adjacent(c, b));
                if r1 {
                    changed |= orient_apply(&mut g, a, b);
                    continue;
                }
                // R2: a -> c -> b  =>  a -> b
                let r2 = (0..p).any(|c| g.directed[a][c] && g.directed[c][b]);
                if r2 {
                    changed |= orient_apply(&mut g, a, b);
                    continue;
                }
                // R3: a -- c, a -- d, c -> b, d -> b, c and d nonadjacent
                let mut r3 = false;
                'outer: for c in 0..p {
                    if !g.undirected[a][c] || !g.directed[c][b] {
                        continue;
                    }
                    for d in c + 1..p {
                        if g.undirected[a][d] && g.directed[d][b] && !g.adjacent(c, d) {
                            r3 = true;
                            break 'outer;
                        }
                    }
                }
                if r3 {
                    changed |= orient_apply(&mut g, a, b);
                }
            }
        }
        if !changed {
            break;
        }
    }
    g
}

/// Resolve a CPDAG to a DAG: topologically sort the directed part (lowest
/// index first among ready nodes) and orient undirected edges along that
/// order.
pub fn resolve_to_dag(graph: &Cpdag) -> Result<Vec<Vec<bool>>> {
    let p = graph.p;
    let mut indegree = vec![0usize; p];
    for i in 0..p {
        for j in 0..p {
            if graph.directed[i][j] {
                indegree[j] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(p);
    let mut remaining: Vec<bool> = vec![true; p];
    for _ in 0..p {
        let next = (0..p)
            .find(|&v| remaining[v] && indegree[v] == 0)
            .ok_or_else(|| Error::Invalid("directed part of CPDAG contains a cycle".into()))?;
        remaining[next] = false;
        order.push(next);
        for j in 0..p {
            if graph.directed[next][j] {
                indegree[j] -= 1;
            }
        }
    }
    let mut rank = vec![0usize; p];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut dag = graph.directed.clone();
    for i in 0..p {
        for j in i + 1..p {
            if graph.undirected[i][j] {
                if rank[i] < rank[j] {
                    dag[i][j] = true;
                } else {
                    dag[j][i] = true;
                }
            }
        }
    }
    Ok(dag)
}

fn standardize_columns(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let p = data[0].len();
    let means = column_means(data);
    let mut sds = vec![0.0; p];
    for row in data {
        for (s, (v, m)) in sds.iter_mut().zip(row.iter().zip(means.iter())) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in sds.iter_mut() {
        *s = (*s / (n as f64 - 1.0)).sqrt();
    }
    data.iter()
        .map(|row| {
            (0..p)
                .map(|j| {
                    if sds[j] > 0.0 {
                        (row[j] - means[j]) / sds[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Path-product totals over a DAG with edge coefficients `b[i][j]`:
/// `total[i][j]` sums the coefficient product along every directed path
/// `i => j`.
fn path_totals(dag: &[Vec<bool>], b: &Mat) -> Result<Mat> {
    let p = dag.len();
    let mut indegree = vec![0usize; p];
    for row in dag {
        for (j, &e) in row.iter().enumerate() {
            if e {
                indegree[j] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(p);
    let mut remaining = vec![true; p];
    for _ in 0..p {
        let next = (0..p)
            .find(|&v| remaining[v] && indegree[v] == 0)
            .ok_or_else(|| Error::Invalid("resolved graph contains a cycle".into()))?;
        remaining[next] = false;
        order.push(next);
        for j in 0..p {
            if dag[next][j] {
                indegree[j] -= 1;
            }
        }
    }
    let mut total = Mat::zeros(p, p);
    for &j in &order {
        for k in 0..p {
            if !dag[k][j] {
                continue;
            }
            let w = b.get(k, j);
            for i in 0..p {
                let through = total.get(i, k) + if i == k { 1.0 } else { 0.0 };
                if through != 0.0 {
                    total.add_at(i, j, w * through);
                }
            }
        }
    }
    Ok(total)
}

fn cpe_from_totals(p: usize, totals: &Mat) -> CpeMatrix {
    let mut eta = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                eta.set(i, j, 1.0);
            } else {
                eta.set(i, j, totals.get(i, j).abs().min(1.0 - 1e-6));
            }
        }
    }
    CpeMatrix { p, eta }
}

/// Estimate the causal propagation effect matrix from data and a discovered
/// graph.
///
/// Undirected edges are resolved along the index order's topological
/// extension; each node is regressed on its parents (standardized data,
/// ridge 1e-6 fallback on rank deficiency); `eta` collects absolute path
/// products clamped into `[0, 1)`.
pub fn estimate_cpe(data: &[Vec<f64>], graph: &Cpdag) -> Result<CpeMatrix> {
    let p = graph.p;
    if data.is_empty() || data[0].len() != p {
        return Err(Error::Invalid("data and graph dimensions disagree".into()));
    }
    let dag = resolve_to_dag(graph)?;
    let std_data = standardize_columns(data);
    let mut b = Mat::zeros(p, p);
    for j in 0..p {
        let parents: Vec<usize> = (0..p).filter(|&i| dag[i][j]).collect();
        if parents.is_empty() {
            continue;
        }
        let gram = covariance_of(&std_data, &parents);
        let mut cross = vec![0.0; parents.len()];
        for row in &std_data {
            for (a, &pa) in parents.iter().enumerate() {
                cross[a] += row[pa] * row[j];
            }
        }
        for v in cross.iter_mut() {
            *v /= std_data.len() as f64 - 1.0;
        }
        let l = match cholesky(&gram) {
            Ok(l) => l,
            Err(_) => {
                let mut ridge = gram.clone();
                for d in 0..parents.len() {
                    ridge.add_at(d, d, 1e-6);
                }
                cholesky(&ridge).map_err(|_| {
                    Error::Singular(format!("parent design for node {j} unusable"))
                })?
            }
        };
        let beta = cholesky_solve(&l, &cross);
        for (a, &pa) in parents.iter().enumerate() {
            b.set(pa, j, beta[a]);
        }
    }
    let totals = path_totals(&dag, &b)?;
    Ok(cpe_from_totals(p, &totals))
}

/// Exact propagation matrix of a ground-truth weighted DAG.
///
/// Standardized coefficients come from the analytic covariance of the
/// structural model (unit exogenous noise), not from data.
pub fn cpe_from_weighted_dag(dag: &WeightedDag) -> CpeMatrix {
    let p = dag.graph.p;
    let order = &dag.graph.topo_order;
    // covariance propagation in topological order
    let mut cov = Mat::zeros(p, p);
    let mut placed = vec![false; p];
    for &j in order {
        let parents: Vec<usize> = (0..p).filter(|&i| dag.weights[i][j] != 0.0).collect();
        for k in 0..p {
            if !placed[k] {
                continue;
            }
            let mut c = 0.0;
            for &i in &parents {
                c += dag.weights[i][j] * cov.get(i, k);
            }
            cov.set(j, k, c);
            cov.set(k, j, c);
        }
        let mut var = 1.0;
        for &i in &parents {
            for &i2 in &parents {
                var += dag.weights[i][j] * dag.weights[i2][j] * cov.get(i, i2);
            }
        }
        cov.set(j, j, var);
        placed[j] = true;
    }
    let mut b = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if dag.weights[i][j] != 0.0 {
                let sd_i = cov.get(i, i).sqrt();
                let sd_j = cov.get(j, j).sqrt();
                b.set(i, j, dag.weights[i][j] * sd_i / sd_j);
            }
        }
    }
    let totals = path_totals(&dag.graph.adjacency, &b).expect("ground-truth DAG is acyclic");
    cpe_from_totals(p, &totals)
}

/// Run skeleton + orientation + CPE on a column subset and embed the result
/// into a full-size matrix (identity rows/columns outside the subset).
pub fn discover_cpe_on_subset(
    data: &[Vec<f64>],
    subset: &[usize],
    alpha_sig: f64,
    max_cond: usize,
) -> Result<CpeMatrix> {
    let p = data[0].len();
    if subset.len() < 2 {
        return Ok(CpeMatrix::identity(p));
    }
    let restricted: Vec<Vec<f64>> = data
        .iter()
        .map(|row| subset.iter().map(|&c| row[c]).collect())
        .collect();
    let skeleton = discover_skeleton(&restricted, alpha_sig, max_cond)?;
    let graph = orient_edges(&skeleton);
    let small = estimate_cpe(&restricted, &graph)?;
    let mut full = CpeMatrix::identity(p);
    for (a, &i) in subset.iter().enumerate() {
        for (b, &j) in subset.iter().enumerate() {
            if a != b {
                full.eta.set(i, j, small.get(a, b));
            }
        }
    }
    Ok(full)
}

/// Score an estimated CPDAG against the ground-truth DAG.
///
/// SHD counts missing + extra + misdirected edges, where an undirected
/// estimated edge over a true adjacency is a correct adjacency. TPR counts a
/// true edge as recovered when it appears directed the right way or
/// undirected; a reversed edge is a false discovery. FDR is flagged
/// undefined when nothing was predicted.
pub fn graph_metrics(estimated: &Cpdag, truth: &CausalGraph) -> Result<GraphMetrics> {
    if estimated.p != truth.p {
        return Err(Error::Invalid(format!(
            "dimension mismatch: estimated p={}, truth p={}",
            estimated.p, truth.p
        )));
    }
    let p = truth.p;
    let mut shd = 0usize;
    let mut tp = 0usize;
    let mut true_edges = 0usize;
    let mut fp = 0usize;
    let mut predicted = 0usize;
    for i in 0..p {
        for j in 0..p {
            if truth.adjacency[i][j] {
                true_edges += 1;
                if estimated.directed[i][j] || estimated.undirected[i][j] {
                    tp += 1;
                }
            }
            if estimated.directed[i][j] {
                predicted += 1;
                if !truth.adjacency[i][j] {
                    fp += 1;
                }
            }
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            if estimated.undirected[i][j] {
                predicted += 1;
                if !truth.adjacency[i][j] && !truth.adjacency[j][i] {
                    fp += 1;
                }
            }
            let t_adj = truth.adjacency[i][j] || truth.adjacency[j][i];
            let e_adj = estimated.adjacent(i, j);
            if t_adj && !e_adj {
                shd += 1; // missing
            } else if !t_adj && e_adj {
                shd += 1; // extra
            } else if t_adj && e_adj {
                let (from, to) = if truth.adjacency[i][j] { (i, j) } else { (j, i) };
                if estimated.directed[to][from] {
                    shd += 1; // reversed
                }
            }
        }
    }
    let tpr = if true_edges == 0 { 1.0 } else { tp as f64 / true_edges as f64 };
    let (fdr, fdr_defined) = if predicted == 0 {
        (0.0, false)
    } else {
        (fp as f64 / predicted as f64, true)
    };
    Ok(GraphMetrics { shd, tpr, fdr, fdr_defined })
}

/// Serialize a CPDAG to the edge-list text format: a `p <n>` header, then
/// one `i j {->|--} weight` line per edge (1-based indices, weight 1 for
/// structure-only graphs).
pub fn format_cpdag(graph: &Cpdag) -> String {
    let mut out = format!("p {}\n", graph.p);
    for i in 0..graph.p {
        for j in 0..graph.p {
            if graph.directed[i][j] {
                out.push_str(&format!("{} {} -> 1\n", i + 1, j + 1));
            }
        }
    }
    for i in 0..graph.p {
        for j in i + 1..graph.p {
            if graph.undirected[i][j] {
                out.push_str(&format!("{} {} -- 1\n", i + 1, j + 1));
            }
        }
    }
    out
}

/// Serialize a propagation matrix: off-diagonal nonzero entries as directed
/// weighted edges.
pub fn format_cpe(cpe: &CpeMatrix) -> String {
    let mut out = format!("p {}\n", cpe.p);
    for i in 0..cpe.p {
        for j in 0..cpe.p {
            if i != j && cpe.get(i, j) != 0.0 {
                out.push_str(&format!("{} {} -> {}\n", i + 1, j + 1, cpe.get(i, j)));
            }
        }
    }
    out
}

/// One parsed edge-list entry (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListEntry {
    pub from: usize,
    pub to: usize,
    pub directed: bool,
    pub weight: f64,
}

/// Parse the edge-list text format, returning the declared size and entries.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<EdgeListEntry>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { row: 1, col: 1, msg: "empty edge list".into() })?;
    let p: usize = header
        .strip_prefix("p ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            row: 1,
            col: 1,
            msg: format!("expected `p <n>` header, got {header:?}"),
        })?;
    let mut entries = Vec::new();
    for (row_idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                row: row_idx + 1,
                col: 1,
                msg: format!("expected `i j {{->|--}} weight`, got {line:?}"),
            });
        }
        let from: usize = parts[0].parse().map_err(|_| Error::Parse {
            row: row_idx + 1,
            col: 1,
            msg: format!("bad index {:?}", parts[0]),
        })?;
        let to: usize = parts[1].parse().map_err(|_| Error::Parse {
            row: row_idx + 1,
            col: 2,
            msg: format!("bad index {:?}", parts[1]),
        })?;
        let directed = match parts[2] {
            "->" => true,
            "--" => false,
            other => {
                return Err(Error::Parse {
                    row: row_idx + 1,
                    col: 3,
                    msg: format!("expected -> or --, got {other:?}"),
                })
            }
        };
        let weight: f64 = parts[3].parse().map_err(|_| Error::Parse {
            row: row_idx + 1,
            col: 4,
            msg: format!("bad weight {:?}", parts[3]),
        })?;
        if from == 0 || to == 0 || from > p || to > p {
            return Err(Error::Parse {
                row: row_idx + 1,
                col: 1,
                msg: format!("index out of range 1..={p}"),
            });
        }
        if !weight.is_finite() {
            return Err(Error::Parse {
                row: row_idx + 1,
                col: 4,
                msg: "non-finite weight".into(),
            });
        }
        entries.push(EdgeListEntry { from: from - 1, to: to - 1, directed, weight });
    }
    Ok((p, entries))
}

/// Rebuild a propagation matrix from a parsed edge list.
pub fn cpe_from_edge_list(p: usize, entries: &[EdgeListEntry]) -> Result<CpeMatrix> {
    let mut cpe = CpeMatrix::identity(p);
    for e in entries {
        if !e.directed {
            return Err(Error::Invalid("propagation entries must be directed".into()));
        }
        if e.from == e.to {
            continue;
        }
        if !(0.0..1.0).contains(&e.weight) {
            return Err(Error::Invalid(format!("eta weight {} outside [0,1)", e.weight)));
        }
        cpe.eta.set(e.from, e.to, e.weight);
    }
    Ok(cpe)
}
