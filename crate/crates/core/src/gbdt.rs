//! Gradient-boosted decision trees for binary classification.
//!
//! Logistic loss, depth-limited regression trees fit to the negative
//! gradient by exact greedy variance reduction, Newton leaf values.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{FEATURE_LEN, FEATURE_SCHEMA_VERSION};
use crate::provenance::Provenance;
use crate::sim::Op;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: Vec<f64>,
    pub label: u8,
    pub op: Op,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    /// Where the sample came from, e.g. `s_wr_sq_1m/seed=3/c0.ost1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

fn unit_weight() -> f64 {
    1.0
}

impl TrainingSample {
    pub fn new(features: Vec<f64>, label: u8, op: Op) -> Self {
        TrainingSample {
            features,
            label,
            op,
            weight: 1.0,
            source: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            num_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            subsample_fraction: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Hyperparams(m.to_string()));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad("subsample_fraction must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Flat node array; node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub schema_version: u32,
    pub op: Op,
    pub feature_len: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub hyperparams: Hyperparams,
    pub trees: Vec<Tree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of raw score `f` for label `y`.
pub fn logistic_loss(y: f64, f: f64) -> f64 {
    // log(1 + e^f) - y f, evaluated stably
    let softplus = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
    softplus - y * f
}

/// Derivative of [`logistic_loss`] with respect to `f`: `p - y`.
pub fn logistic_gradient(y: f64, f: f64) -> f64 {
    sigmoid(f) - y
}

/// Second derivative of [`logistic_loss`]: `p (1 - p)`.
pub fn logistic_hessian(f: f64) -> f64 {
    let p = sigmoid(f);
    p * (1.0 - p)
}

fn check_features(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::SchemaMismatch {
            expected,
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature { index });
    }
    Ok(())
}

/// Validate a training set: schema, labels, weights, single op, both classes.
pub fn check_samples(samples: &[TrainingSample], feature_len: usize) -> Result<Op> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Hyperparams("training set is empty".into()))?;
    let mut seen = [false; 2];
    for s in samples {
        check_features(&s.features, feature_len)?;
        if s.op != first.op {
            return Err(Error::MixedOps(first.op, s.op));
        }
        if s.label > 1 {
            return Err(Error::Hyperparams(format!("label {} is not 0 or 1", s.label)));
        }
        if !(s.weight.is_finite() && s.weight > 0.0) {
            return Err(Error::Hyperparams("sample weights must be positive".into()));
        }
        seen[s.label as usize] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::SingleClass {
            missing: missing as u8,
        });
    }
    Ok(first.op)
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Running sums for one node during a split scan.
#[derive(Clone, Copy, Default)]
struct Acc {
    n: usize,
    g: f64,
    w: f64,
}

/// Per-node scan state for one feature.
#[derive(Clone, Copy)]
struct Scan {
    left: Acc,
    last: f64,
}

fn split_gain(l: Acc, total: Acc) -> f64 {
    let (rg, rw) = (total.g - l.g, total.w - l.w);
    if l.w <= 0.0 || rw <= 0.0 {
        return f64::NEG_INFINITY;
    }
    l.g * l.g / l.w + rg * rg / rw - total.g * total.g / total.w
}

/// Fit one regression tree to `target` (negative gradients) level by level.
///
/// `sorted[f]` lists sample indices in ascending order of feature `f`;
/// `in_bag` marks the rows this tree may use. Returns the tree with leaf
/// values left at zero plus each bagged row's leaf node index.
fn grow_tree(
    x: &[Vec<f64>],
    target: &[f64],
    weight: &[f64],
    sorted: &[Vec<u32>],
    in_bag: &[bool],
    hp: &Hyperparams,
) -> (Vec<Node>, Vec<usize>) {
    const NONE: usize = usize::MAX;
    let n = x.len();
    let d = sorted.len();
    let mut nodes = vec![Node::Leaf { leaf: 0.0 }];
    let mut node_of: Vec<usize> = (0..n).map(|i| if in_bag[i] { 0 } else { NONE }).collect();
    let mut frontier = vec![0usize];
    for _depth in 0..hp.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot = vec![NONE; nodes.len()];
        for (k, &nd) in frontier.iter().enumerate() {
            slot[nd] = k;
        }
        let mut totals = vec![Acc::default(); frontier.len()];
        for i in 0..n {
            let nd = node_of[i];
            if nd != NONE && slot[nd] != NONE {
                let t = &mut totals[slot[nd]];
                t.n += 1;
                t.g += weight[i] * target[i];
                t.w += weight[i];
            }
        }
        let mut best: Vec<Option<Split>> = (0..frontier.len()).map(|_| None).collect();
        for f in 0..d {
            let mut scans = vec![
                Scan {
                    left: Acc::default(),
                    last: f64::NEG_INFINITY,
                };
                frontier.len()
            ];
            for &i in &sorted[f] {
                let i = i as usize;
                let nd = node_of[i];
                if nd == NONE || slot[nd] == NONE {
                    continue;
                }
                let k = slot[nd];
                let v = x[i][f];
                let s = &mut scans[k];
                if v > s.last
                    && s.left.n >= hp.min_samples_leaf
                    && totals[k].n - s.left.n >= hp.min_samples_leaf
                {
                    let gain = split_gain(s.left, totals[k]);
                    if gain > 0.0 && best[k].as_ref().is_none_or(|b| gain > b.gain) {
                        best[k] = Some(Split {
                            feature: f,
                            threshold: s.last,
                            gain,
                        });
                    }
                }
                s.left.n += 1;
                s.left.g += weight[i] * target[i];
                s.left.w += weight[i];
                s.last = v;
            }
        }
        let mut next = Vec::new();
        let mut children = vec![(NONE, NONE); frontier.len()];
        for (k, &nd) in frontier.iter().enumerate() {
            if let Some(sp) = &best[k] {
                let left = nodes.len();
                nodes.push(Node::Leaf { leaf: 0.0 });
                nodes.push(Node::Leaf { leaf: 0.0 });
                nodes[nd] = Node::Split {
                    feature: sp.feature,
                    threshold: sp.threshold,
                    left,
                    right: left + 1,
                };
                children[k] = (left, left + 1);
                next.push(left);
                next.push(left + 1);
            }
        }
        for i in 0..n {
            let nd = node_of[i];
            if nd == NONE || slot.get(nd).is_none_or(|&s| s == NONE) {
                continue;
            }
            let k = slot[nd];
            if let Some(sp) = &best[k] {
                node_of[i] = if x[i][sp.feature] <= sp.threshold {
                    children[k].0
                } else {
                    children[k].1
                };
            }
        }
        frontier = next;
    }
    (nodes, node_of)
}

fn weighted_loss(y: &[f64], w: &[f64], f: &[f64]) -> f64 {
    y.iter()
        .zip(w)
        .zip(f)
        .map(|((&y, &w), &f)| w * logistic_loss(y, f))
        .sum::<f64>()
}

/// Training diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Weighted mean training loss after each boosting round (index 0 = base score only).
    pub loss_history: Vec<f64>,
}

pub fn train(samples: &[TrainingSample], hp: &Hyperparams) -> Result<GbdtModel> {
    train_with_report(samples, hp).map(|(m, _)| m)
}

pub fn train_with_report(samples: &[TrainingSample], hp: &Hyperparams) -> Result<(GbdtModel, TrainReport)> {
    hp.validate()?;
    let feature_len = samples.first().map_or(FEATURE_LEN, |s| s.features.len());
    if samples.len() < 2 {
        return Err(Error::Hyperparams("at least two samples are required".into()));
    }
    let op = check_samples(samples, feature_len)?;
    let x: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.label as f64).collect();
    let w: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let n = x.len();
    let total_w: f64 = w.iter().sum();
    let pos_w: f64 = y.iter().zip(&w).map(|(y, w)| y * w).sum();
    let base_score = (pos_w / (total_w - pos_w)).ln();

    let sorted: Vec<Vec<u32>> = (0..feature_len)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let bag_size = ((hp.subsample_fraction * n as f64).round() as usize).clamp(1, n);
    let mut f = vec![base_score; n];
    let mut loss = weighted_loss(&y, &w, &f);
    let mut report = TrainReport {
        loss_history: vec![loss / total_w],
    };
    let mut trees = Vec::with_capacity(hp.num_trees);
    for _ in 0..hp.num_trees {
        let in_bag = if bag_size == n {
            vec![true; n]
        } else {
            let mut b = vec![false; n];
            let mut picked = sample(&mut rng, n, bag_size).into_vec();
            picked.sort_unstable();
            for i in picked {
                b[i] = true;
            }
            b
        };
        let target: Vec<f64> = (0..n).map(|i| -logistic_gradient(y[i], f[i])).collect();
        let (mut nodes, node_of) = grow_tree(&x, &target, &w, &sorted, &in_bag, hp);
        let mut num = vec![0.0; nodes.len()];
        let mut den = vec![0.0; nodes.len()];
        for i in 0..n {
            if let Some(k) = node_of.get(i).copied().filter(|&k| k != usize::MAX) {
                num[k] += w[i] * target[i];
                den[k] += w[i] * logistic_hessian(f[i]);
            }
        }
        for (k, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { leaf } = node {
                *leaf = if den[k] > 0.0 { num[k] / den[k] } else { 0.0 };
            }
        }
        let mut tree = Tree { nodes };
        // Damped Newton step: halve the tree until the training loss does not rise.
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut new_loss;
        let mut halvings = 0;
        loop {
            candidate = (0..n)
                .map(|i| f[i] + hp.learning_rate * scale * tree.eval(&x[i]))
                .collect();
            new_loss = weighted_loss(&y, &w, &candidate);
            if new_loss <= loss || halvings >= 40 {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if new_loss > loss {
            scale = 0.0;
            candidate = f.clone();
            new_loss = loss;
        }
        if scale != 1.0 {
            for node in &mut tree.nodes {
                if let Node::Leaf { leaf } = node {
                    *leaf *= scale;
                }
            }
        }
        f = candidate;
        loss = new_loss;
        report.loss_history.push(loss / total_w);
        trees.push(tree);
    }
    let model = GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        schema_version: FEATURE_SCHEMA_VERSION,
        op,
        feature_len,
        base_score,
        learning_rate: hp.learning_rate,
        hyperparams: hp.clone(),
        trees,
        provenance: None,
    };
    Ok((model, report))
}

impl GbdtModel {
    /// Raw log-odds score.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_features(x, self.feature_len)?;
        Ok(self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.decision(x).map(sigmoid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and validate a model; nothing is returned unless every check passes.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: GbdtModel = serde_json::from_str(text).map_err(|e| Error::InvalidModel {
            path: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: String, reason: &str| {
            Err(Error::InvalidModel {
                path,
                reason: reason.to_string(),
            })
        };
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad("format_version".into(), "unsupported model format version");
        }
        if self.schema_version != FEATURE_SCHEMA_VERSION {
            return bad("schema_version".into(), "feature schema version does not match");
        }
        if self.feature_len == 0 {
            return bad("feature_len".into(), "must be positive");
        }
        if !self.base_score.is_finite() {
            return bad("base_score".into(), "must be finite");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate".into(), "must be in (0, 1]");
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return bad(format!("trees[{t}].nodes"), "tree has no nodes");
            }
            let mut parents = vec![0u32; tree.nodes.len()];
            for (i, node) in tree.nodes.iter().enumerate() {
                let path = format!("trees[{t}].nodes[{i}]");
                match *node {
                    Node::Leaf { leaf } => {
                        if !leaf.is_finite() {
                            return bad(path, "leaf value must be finite");
                        }
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if feature >= self.feature_len {
                            return bad(path, "feature index out of range");
                        }
                        if !threshold.is_finite() {
                            return bad(path, "threshold must be finite");
                        }
                        for c in [left, right] {
                            if c <= i || c >= tree.nodes.len() {
                                return bad(path, "child index must point forward inside the tree");
                            }
                            parents[c] += 1;
                        }
                        if left == right {
                            return bad(path, "children must differ");
                        }
                    }
                }
            }
            if let Some(i) = (1..tree.nodes.len()).find(|&i| parents[i] != 1) {
                return bad(format!("trees[{t}].nodes[{i}]"), "node must have exactly one parent");
            }
        }
        Ok(())
    }
}

/// Read a JSONL training set.
pub fn read_samples(path: &Path) -> Result<Vec<TrainingSample>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with("{\"provenance\"") {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Write a JSONL training set, optionally preceded by a provenance line.
pub fn write_samples(path: &Path, samples: &[TrainingSample], provenance: Option<&Provenance>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(p) = provenance {
        serde_json::to_writer(&mut out, &serde_json::json!({ "provenance": p }))?;
        out.write_all(b"\n")?;
    }
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Binary classification counts at threshold 0.5.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl Confusion {
    pub fn evaluate(model: &GbdtModel, samples: &[TrainingSample]) -> Result<Self> {
        let mut c = Confusion::default();
        for s in samples {
            let pred = model.predict_proba(&s.features)? >= 0.5;
            match (pred, s.label == 1) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn error_rate(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.false_pos + self.false_neg) as f64 / self.total() as f64
    }
}
