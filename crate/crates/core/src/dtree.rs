//! Binary decision trees over boolean features: CART training with Gini
//! impurity, prediction, traditional test metrics and a JSON file format.

use num_bigint::BigUint;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureVec, Sample};
use crate::metrics::Scores;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("expected {expected} features, got {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("max_depth must be at least 1")]
    MaxDepth,
    #[error("at {path}: {msg}")]
    Format { path: String, msg: String },
    #[error("invalid tree file: {0}")]
    Json(String),
}

/// Index of a node in a tree's arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Leaf {
        label: bool,
    },
    /// `low` is taken when the feature is 0, `high` when it is 1.
    Split {
        feature: usize,
        low: NodeId,
        high: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    feature_count: usize,
    nodes: Vec<Node>,
    root: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { max_depth: None, min_samples_split: 2 }
    }
}

impl DecisionTree {
    /// A tree with a single leaf.
    pub fn leaf(feature_count: usize, label: bool) -> Self {
        DecisionTree { feature_count, nodes: vec![Node::Leaf { label }], root: NodeId(0) }
    }

    /// Joins two subtrees under a split on `feature`.
    pub fn split(feature: usize, low: DecisionTree, high: DecisionTree) -> Result<Self, TreeError> {
        let fc = low.feature_count;
        if high.feature_count != fc {
            return Err(TreeError::FeatureCount { expected: fc, found: high.feature_count });
        }
        let mut nodes = vec![Node::Leaf { label: false }];
        let l = graft(&mut nodes, &low, low.root);
        let h = graft(&mut nodes, &high, high.root);
        nodes[0] = Node::Split { feature, low: l, high: h };
        let tree = DecisionTree { feature_count: fc, nodes, root: NodeId(0) };
        tree.validate()?;
        Ok(tree)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0)];
        while let Some((id, d)) = stack.pop() {
            match self.node(id) {
                Node::Leaf { .. } => best = best.max(d),
                Node::Split { low, high, .. } => {
                    stack.push((low, d + 1));
                    stack.push((high, d + 1));
                }
            }
        }
        best
    }

    /// Same structure with every leaf label inverted.
    pub fn flipped(&self) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { label } => Node::Leaf { label: !label },
                split => split,
            })
            .collect();
        DecisionTree { nodes, ..self.clone() }
    }

    fn reach(&self, value: impl Fn(usize) -> bool) -> bool {
        let mut id = self.root;
        loop {
            match self.node(id) {
                Node::Leaf { label } => return label,
                Node::Split { feature, low, high } => id = if value(feature) { high } else { low },
            }
        }
    }

    pub fn predict(&self, features: &[bool]) -> Result<bool, TreeError> {
        if features.len() != self.feature_count {
            return Err(TreeError::FeatureCount { expected: self.feature_count, found: features.len() });
        }
        Ok(self.reach(|k| features[k]))
    }

    pub fn predict_vec(&self, features: &FeatureVec) -> Result<bool, TreeError> {
        if features.len() != self.feature_count {
            return Err(TreeError::FeatureCount { expected: self.feature_count, found: features.len() });
        }
        Ok(self.reach(|k| features.get(k)))
    }

    fn validate(&self) -> Result<(), TreeError> {
        self.check(self.root, &mut Vec::new(), "root".to_string())
    }

    fn check(&self, id: NodeId, path: &mut Vec<usize>, at: String) -> Result<(), TreeError> {
        if let Node::Split { feature, low, high } = self.node(id) {
            if feature >= self.feature_count {
                return Err(TreeError::Format {
                    path: at,
                    msg: format!("feature {feature} out of range (feature_count {})", self.feature_count),
                });
            }
            if path.contains(&feature) {
                return Err(TreeError::Format { path: at, msg: format!("feature {feature} repeated on path") });
            }
            path.push(feature);
            self.check(low, path, format!("{at}.low"))?;
            self.check(high, path, format!("{at}.high"))?;
            path.pop();
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = json!({ "feature_count": self.feature_count, "root": self.node_json(self.root) });
        let mut s = doc.to_string();
        s.push('\n');
        s
    }

    fn node_json(&self, id: NodeId) -> Value {
        match self.node(id) {
            Node::Leaf { label } => json!({ "leaf": u8::from(label) }),
            Node::Split { feature, low, high } => {
                json!({ "feature": feature, "low": self.node_json(low), "high": self.node_json(high) })
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let doc: Value = serde::Deserialize::deserialize(&mut de).map_err(|e| TreeError::Json(e.to_string()))?;
        de.end().map_err(|e| TreeError::Json(e.to_string()))?;
        let obj = doc.as_object().ok_or_else(|| TreeError::Json("top level must be an object".into()))?;
        expect_keys(obj, &["feature_count", "root"], "$")?;
        let feature_count = obj["feature_count"].as_u64().ok_or_else(|| TreeError::Format {
            path: "feature_count".into(),
            msg: "must be a non-negative integer".into(),
        })? as usize;
        let mut tree = DecisionTree { feature_count, nodes: Vec::new(), root: NodeId(0) };
        tree.root = tree.parse_node(&obj["root"], "root".to_string())?;
        tree.validate()?;
        Ok(tree)
    }

    fn parse_node(&mut self, v: &Value, path: String) -> Result<NodeId, TreeError> {
        let bad = |msg: &str| TreeError::Format { path: path.clone(), msg: msg.to_string() };
        let obj = v.as_object().ok_or_else(|| bad("node must be an object"))?;
        let id = NodeId(self.nodes.len() as u32);
        if obj.contains_key("leaf") {
            expect_keys(obj, &["leaf"], &path)?;
            let label = match obj["leaf"].as_u64() {
                Some(0) => false,
                Some(1) => true,
                _ => return Err(bad("leaf must be 0 or 1")),
            };
            self.nodes.push(Node::Leaf { label });
            return Ok(id);
        }
        expect_keys(obj, &["feature", "high", "low"], &path)?;
        let feature = obj["feature"].as_u64().ok_or_else(|| bad("feature must be a non-negative integer"))? as usize;
        self.nodes.push(Node::Leaf { label: false });
        let low = self.parse_node(&obj["low"], format!("{path}.low"))?;
        let high = self.parse_node(&obj["high"], format!("{path}.high"))?;
        self.nodes[id.index()] = Node::Split { feature, low, high };
        Ok(id)
    }
}

fn expect_keys(obj: &Map<String, Value>, keys: &[&str], path: &str) -> Result<(), TreeError> {
    let mut found: Vec<&str> = obj.keys().map(String::as_str).collect();
    found.sort_unstable();
    let mut want = keys.to_vec();
    want.sort_unstable();
    if found != want {
        return Err(TreeError::Format {
            path: path.to_string(),
            msg: format!("expected keys {want:?}, found {found:?}"),
        });
    }
    Ok(())
}

fn graft(nodes: &mut Vec<Node>, src: &DecisionTree, id: NodeId) -> NodeId {
    let at = NodeId(nodes.len() as u32);
    match src.node(id) {
        leaf @ Node::Leaf { .. } => nodes.push(leaf),
        Node::Split { feature, low, high } => {
            nodes.push(Node::Leaf { label: false });
            let l = graft(nodes, src, low);
            let h = graft(nodes, src, high);
            nodes[at.index()] = Node::Split { feature, low: l, high: h };
        }
    }
    at
}

/// `a_num/a_den > b_num/b_den` for positive denominators.
fn frac_gt(a_num: u128, a_den: u128, b_num: u128, b_den: u128) -> bool {
    match (a_num.checked_mul(b_den), b_num.checked_mul(a_den)) {
        (Some(l), Some(r)) => l > r,
        _ => BigUint::from(a_num) * BigUint::from(b_den) > BigUint::from(b_num) * BigUint::from(a_den),
    }
}

struct Trainer<'a> {
    samples: &'a [Sample],
    feature_count: usize,
    params: TrainParams,
    nodes: Vec<Node>,
}

impl Trainer<'_> {
    fn build(&mut self, idx: &mut [u32], depth: usize) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node::Leaf { label: false });
        let n = idx.len() as u64;
        let pos = idx.iter().filter(|&&i| self.samples[i as usize].label).count() as u64;
        let majority = Node::Leaf { label: 2 * pos > n };
        let stop = pos == 0
            || pos == n
            || (n as usize) < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d);
        if stop {
            self.nodes[id.index()] = majority;
            return id;
        }
        let Some(feature) = self.best_split(idx, pos) else {
            self.nodes[id.index()] = majority;
            return id;
        };
        let mut split_at = 0;
        for i in 0..idx.len() {
            if !self.samples[idx[i] as usize].features.get(feature) {
                idx.swap(i, split_at);
                split_at += 1;
            }
        }
        let (lo, hi) = idx.split_at_mut(split_at);
        let low = self.build(lo, depth + 1);
        let high = self.build(hi, depth + 1);
        self.nodes[id.index()] = Node::Split { feature, low, high };
        id
    }

    /// Separating feature with the lowest weighted Gini impurity. Weighted
    /// impurity never exceeds the node's, so zero-gain splits are taken;
    /// None means every feature is constant on the node.
    /// Minimizing impurity is maximizing Σ (p_c² + q_c²)/n_c over children.
    fn best_split(&self, idx: &[u32], pos: u64) -> Option<usize> {
        let fc = self.feature_count;
        let mut ones = vec![0u64; fc];
        let mut ones_pos = vec![0u64; fc];
        for &i in idx {
            let s = &self.samples[i as usize];
            for (w, &word) in s.features.words().iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let k = 64 * w + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    ones[k] += 1;
                    if s.label {
                        ones_pos[k] += 1;
                    }
                }
            }
        }
        let n = idx.len() as u128;
        let (p, q) = (pos as u128, n - pos as u128);
        let mut best: Option<(usize, u128, u128)> = None;
        for k in 0..fc {
            let n1 = ones[k] as u128;
            let n0 = n - n1;
            if n1 == 0 || n0 == 0 {
                continue;
            }
            let p1 = ones_pos[k] as u128;
            let q1 = n1 - p1;
            let (p0, q0) = (p - p1, q - q1);
            let num = (p0 * p0 + q0 * q0) * n1 + (p1 * p1 + q1 * q1) * n0;
            let den = n0 * n1;
            if best.is_none_or(|(_, bn, bd)| frac_gt(num, den, bn, bd)) {
                best = Some((k, num, den));
            }
        }
        best.map(|(k, _, _)| k)
    }
}

/// Greedy top-down induction on `samples`.
pub fn train_samples(samples: &[Sample], feature_count: usize, params: TrainParams) -> Result<DecisionTree, TreeError> {
    if samples.is_empty() {
        return Err(TreeError::EmptyTraining);
    }
    if params.max_depth == Some(0) {
        return Err(TreeError::MaxDepth);
    }
    if let Some(s) = samples.iter().find(|s| s.features.len() != feature_count) {
        return Err(TreeError::FeatureCount { expected: feature_count, found: s.features.len() });
    }
    let mut t = Trainer { samples, feature_count, params, nodes: Vec::new() };
    let mut idx: Vec<u32> = (0..samples.len() as u32).collect();
    let root = t.build(&mut idx, 0);
    Ok(DecisionTree { feature_count, nodes: t.nodes, root })
}

pub fn train_cart(train: &Dataset, params: TrainParams) -> Result<DecisionTree, TreeError> {
    train_samples(&train.samples, train.feature_count(), params)
}

/// Confusion counts over a labeled test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraditionalMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl TraditionalMetrics {
    pub fn scores(&self) -> Scores {
        Scores::from_counts(
            &BigUint::from(self.tp),
            &BigUint::from(self.fp),
            &BigUint::from(self.tn),
            &BigUint::from(self.fn_),
        )
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn eval_samples(tree: &DecisionTree, samples: &[Sample]) -> Result<TraditionalMetrics, TreeError> {
    let mut m = TraditionalMetrics::default();
    for s in samples {
        match (tree.predict_vec(&s.features)?, s.label) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    Ok(m)
}

pub fn eval_traditional(tree: &DecisionTree, test: &Dataset) -> Result<TraditionalMetrics, TreeError> {
    eval_samples(tree, &test.samples)
}
