//! Gradient-boosted regression trees with squared-error loss and exact
//! greedy splits.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureLayout;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "metainf-gbm";
pub const MODEL_VERSION: u32 = 1;

/// Lower bound on every prediction, in seconds.
pub const MIN_PREDICTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmHyperparams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbmHyperparams {
    fn default() -> Self {
        GbmHyperparams {
            n_rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbmHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::invalid("n_rounds, max_depth and min_samples_leaf must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!("learning_rate {} outside (0, 1]", self.learning_rate)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid(format!("subsample {} outside (0, 1]", self.subsample)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Identity,
    Log,
}

impl TargetTransform {
    fn forward(self, y: f64) -> f64 {
        match self {
            TargetTransform::Identity => y,
            TargetTransform::Log => y.ln(),
        }
    }

    fn inverse(self, z: f64) -> f64 {
        match self {
            TargetTransform::Identity => z,
            TargetTransform::Log => z.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// Nodes in breadth-first order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub format: String,
    pub version: u32,
    pub base_prediction: f64,
    pub trees: Vec<Tree>,
    pub hyperparams: GbmHyperparams,
    pub layout: FeatureLayout,
    pub target_transform: TargetTransform,
    /// Training MSE in transformed space after each round.
    pub train_mse: Vec<f64>,
}

fn cmp_rows(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> Ordering {
    for (x, y) in a.0.iter().zip(&b.0) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.1.total_cmp(&b.1)
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Per-node accumulator used during a single feature scan.
#[derive(Clone, Copy)]
struct Scan {
    sum: f64,
    count: usize,
    last: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

fn sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (s, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return 0.0;
    }
    let mean = s / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

/// Grows one tree on `residual` over the rows in `sample` (canonical order).
fn grow_tree(
    x: &[Vec<f64>],
    residual: &[f64],
    sample: &[usize],
    sorted: &[Vec<usize>],
    in_sample: &[bool],
    hp: &GbmHyperparams,
) -> Tree {
    let n_features = x.first().map_or(0, Vec::len);
    let mut nodes = vec![Node::Leaf(0.0)];
    // node id per row; usize::MAX marks rows outside the sample.
    let mut node_of = vec![usize::MAX; x.len()];
    for &r in sample {
        node_of[r] = 0;
    }
    let mut frontier = vec![0usize];
    let mut members: Vec<Vec<usize>> = vec![sample.to_vec()];

    for _depth in 0..hp.max_depth {
        // Frontier nodes eligible for splitting, by local slot.
        let mut slot = vec![usize::MAX; nodes.len()];
        let mut active = Vec::new();
        for &nd in &frontier {
            let rows = &members[nd];
            if rows.len() < 2 * hp.min_samples_leaf {
                continue;
            }
            let s = sse(rows.iter().map(|&r| residual[r]));
            if s <= 1e-24 {
                continue;
            }
            slot[nd] = active.len();
            active.push(nd);
        }
        if active.is_empty() {
            break;
        }
        let totals: Vec<(f64, usize)> = active
            .iter()
            .map(|&nd| (members[nd].iter().map(|&r| residual[r]).sum(), members[nd].len()))
            .collect();
        let mut best: Vec<Option<Candidate>> = (0..active.len()).map(|_| None).collect();
        for f in 0..n_features {
            let mut scans = vec![
                Scan {
                    sum: 0.0,
                    count: 0,
                    last: f64::NAN
                };
                active.len()
            ];
            for &r in &sorted[f] {
                if !in_sample[r] {
                    continue;
                }
                let nd = node_of[r];
                let s = slot[nd];
                if s == usize::MAX {
                    continue;
                }
                let v = x[r][f];
                let sc = &mut scans[s];
                let (total, n) = totals[s];
                if sc.count >= hp.min_samples_leaf && n - sc.count >= hp.min_samples_leaf && v > sc.last {
                    let nl = sc.count as f64;
                    let nr = (n - sc.count) as f64;
                    let sr = total - sc.sum;
                    let gain = sc.sum * sc.sum / nl + sr * sr / nr - total * total / n as f64;
                    if best[s].as_ref().is_none_or(|b| gain > b.gain) {
                        best[s] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold: midpoint(sc.last, v),
                        });
                    }
                }
                sc.sum += residual[r];
                sc.count += 1;
                sc.last = v;
            }
        }
        let mut next = Vec::new();
        for (s, nd) in active.iter().copied().enumerate() {
            let Some(c) = best[s].take() else { continue };
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[nd] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right,
            };
            let (l, r): (Vec<usize>, Vec<usize>) = members[nd].iter().partition(|&&row| x[row][c.feature] <= c.threshold);
            for &row in &l {
                node_of[row] = left;
            }
            for &row in &r {
                node_of[row] = right;
            }
            members[nd] = Vec::new();
            members.push(l);
            members.push(r);
            next.push(left);
            next.push(right);
        }
        // Unsplit frontier nodes stay leaves.
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    for (nd, rows) in members.iter().enumerate() {
        if let Node::Leaf(_) = nodes[nd] {
            let mean = if rows.is_empty() {
                0.0
            } else {
                rows.iter().map(|&r| residual[r]).sum::<f64>() / rows.len() as f64
            };
            nodes[nd] = Node::Leaf(mean);
        }
    }
    Tree { nodes }
}

/// Fits a boosted ensemble on `(features, runtime)` rows.
pub fn train_gbm(
    rows: &[(Vec<f64>, f64)],
    hp: &GbmHyperparams,
    layout: FeatureLayout,
    transform: TargetTransform,
) -> Result<GbmModel> {
    hp.validate()?;
    if rows.len() < 2 {
        return Err(Error::invalid(format!("gbm needs at least 2 rows, got {}", rows.len())));
    }
    for (i, (x, y)) in rows.iter().enumerate() {
        layout.check(x)?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("row {i}: non-finite target")));
        }
        if transform == TargetTransform::Log && *y <= 0.0 {
            return Err(Error::invalid(format!("row {i}: target {y} must be positive")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i}: non-finite feature")));
        }
    }
    let mut ordered: Vec<(Vec<f64>, f64)> = rows.to_vec();
    ordered.sort_by(cmp_rows);
    let n = ordered.len();
    let x: Vec<Vec<f64>> = ordered.iter().map(|r| r.0.clone()).collect();
    let z: Vec<f64> = ordered.iter().map(|r| transform.forward(r.1)).collect();
    let n_features = layout.dim();

    let sorted: Vec<Vec<usize>> = (0..n_features)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let base = z.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(hp.n_rounds);
    let mut train_mse = Vec::with_capacity(hp.n_rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let sample_size = ((hp.subsample * n as f64).round() as usize).clamp(2.min(n), n);

    for _ in 0..hp.n_rounds {
        let residual: Vec<f64> = z.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let sample: Vec<usize> = if sample_size == n {
            (0..n).collect()
        } else {
            let mut s = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
            s.sort_unstable();
            s
        };
        let mut in_sample = vec![false; n];
        for &r in &sample {
            in_sample[r] = true;
        }
        let tree = grow_tree(&x, &residual, &sample, &sorted, &in_sample, hp);
        for (p, row) in pred.iter_mut().zip(&x) {
            *p += hp.learning_rate * tree.predict(row);
        }
        train_mse.push(z.iter().zip(&pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    Ok(GbmModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        base_prediction: base,
        trees,
        hyperparams: *hp,
        layout,
        target_transform: transform,
        train_mse,
    })
}

impl GbmModel {
    /// Raw ensemble output in transformed space.
    pub fn predict_transformed(&self, x: &[f64]) -> Result<f64> {
        self.layout.check(x)?;
        let lr = self.hyperparams.learning_rate;
        Ok(self.base_prediction + lr * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let y = self.target_transform.inverse(self.predict_transformed(x)?);
        Ok(if y.is_finite() { y.max(MIN_PREDICTION) } else if y > 0.0 { f64::MAX } else { MIN_PREDICTION })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GbmModel = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("not a gbm model file (format `{}`)", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(Error::Version {
                found: m.version,
                expected: MODEL_VERSION,
            });
        }
        Ok(m)
    }
}
