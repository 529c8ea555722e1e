//! M5-style model tree read out as rules.
//!
//! Growing: greedy binary splits `feature <= threshold` chosen by standard
//! deviation reduction. Each node gets a linear model built by forward
//! selection under the M5 error estimate `(n + v) / (n − v) · mean|residual|`,
//! and a subtree is pruned to its node model when that estimate is no worse
//! than the subtree's. Every root-to-leaf path becomes one rule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a candidate split's children are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitCriterion {
    /// Deviation of the targets around each child's mean (classic M5).
    Constant,
    /// Deviation of the targets around each child's least-squares line in
    /// the split feature; recovers breakpoints of piecewise-linear targets.
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubistOptions {
    pub min_leaf: usize,
    /// Blend leaf models with their ancestors (M5 smoothing, k = 15).
    pub smoothing: bool,
    pub criterion: SplitCriterion,
}

impl Default for CubistOptions {
    fn default() -> Self {
        Self { min_leaf: 10, smoothing: false, criterion: SplitCriterion::Linear }
    }
}

const SMOOTHING_K: f64 = 15.0;
/// Nodes whose target deviation falls below this fraction of the root's are
/// not split further.
const MIN_SD_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    LessEq,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub op: CmpOp,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.op {
            CmpOp::LessEq => x[self.feature] <= self.threshold,
            CmpOp::Greater => x[self.feature] > self.threshold,
        }
    }
}

/// Dense linear model `intercept + coefficients · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    fn blend(&self, other: &LinearModel, w_self: f64, w_other: f64) -> LinearModel {
        let total = w_self + w_other;
        LinearModel {
            intercept: (w_self * self.intercept + w_other * other.intercept) / total,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| (w_self * a + w_other * b) / total)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub model: LinearModel,
    /// Training samples covered by the rule.
    pub n_covered: usize,
}

impl Rule {
    pub fn covers(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubistModel {
    pub rules: Vec<Rule>,
    pub n_features: usize,
    pub min_leaf: usize,
    pub smoothing: bool,
}

impl CubistModel {
    /// Prediction of the first rule covering `x`; rules partition the input
    /// space so at most one applies.
    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, found: x.len() });
        }
        let rule = self
            .rules
            .iter()
            .find(|r| r.covers(x))
            .ok_or_else(|| Error::InvalidParams("no rule covers the input".into()))?;
        Ok(rule.model.eval(x))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, found: x.ncols() });
        }
        let mut row = vec![0.0; self.n_features];
        let mut out = DVector::zeros(x.nrows());
        for i in 0..x.nrows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            out[i] = self.predict_one(&row)?;
        }
        Ok(out)
    }
}

enum Node {
    Leaf {
        model: LinearModel,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        model: LinearModel,
        n: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct Trainer<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    opts: CubistOptions,
    root_sd: f64,
}

fn sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Running sums for the deviation of a sample set around its best constant
/// or best line in one variable.
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    t: f64,
    tt: f64,
    y: f64,
    yy: f64,
    ty: f64,
}

impl Moments {
    fn push(&mut self, t: f64, y: f64, sign: f64) {
        self.n += sign;
        self.t += sign * t;
        self.tt += sign * t * t;
        self.y += sign * y;
        self.yy += sign * y * y;
        self.ty += sign * t * y;
    }

    fn deviation(&self, criterion: SplitCriterion) -> f64 {
        let syy = (self.yy - self.y * self.y / self.n).max(0.0);
        let sse = match criterion {
            SplitCriterion::Constant => syy,
            SplitCriterion::Linear => {
                let stt = self.tt - self.t * self.t / self.n;
                let sty = self.ty - self.t * self.y / self.n;
                if stt > 1e-12 * self.tt.abs().max(1e-300) {
                    (syy - sty * sty / stt).max(0.0)
                } else {
                    syy
                }
            }
        };
        (sse / self.n).sqrt()
    }
}

impl<'a> Trainer<'a> {
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let min_leaf = self.opts.min_leaf;
        let node_sd = sd(idx.iter().map(|&i| self.y[i]));
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for j in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x[(a, j)].total_cmp(&self.x[(b, j)]).then(a.cmp(&b)));
            let mut right = Moments::default();
            for &i in &order {
                right.push(self.x[(i, j)], self.y[i], 1.0);
            }
            let mut left = Moments::default();
            for pos in 0..n - 1 {
                let i = order[pos];
                let (t, yv) = (self.x[(i, j)], self.y[i]);
                left.push(t, yv, 1.0);
                right.push(t, yv, -1.0);
                let n_left = pos + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let next = self.x[(order[pos + 1], j)];
                if next <= t {
                    continue;
                }
                let sdr = node_sd
                    - (n_left as f64 * left.deviation(self.opts.criterion)
                        + (n - n_left) as f64 * right.deviation(self.opts.criterion))
                        / n as f64;
                if best.is_none_or(|(_, _, b)| sdr > b) {
                    best = Some((j, 0.5 * (t + next), sdr));
                }
            }
        }
        best.filter(|&(_, _, sdr)| sdr > 1e-12 * self.root_sd.max(f64::MIN_POSITIVE))
    }

    fn grow(&self, idx: Vec<usize>) -> Node {
        let n = idx.len();
        let model = fit_node_model(self.x, self.y, &idx);
        let node_sd = sd(idx.iter().map(|&i| self.y[i]));
        if n < 2 * self.opts.min_leaf || node_sd <= MIN_SD_FRACTION * self.root_sd {
            return Node::Leaf { model, n };
        }
        let Some((feature, threshold, _)) = self.best_split(&idx) else {
            return Node::Leaf { model, n };
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = Box::new(self.grow(l));
        let right = Box::new(self.grow(r));
        Node::Split { feature, threshold, model, n, left, right }
    }

    /// Bottom-up pruning; returns the pruned node and its estimated error.
    fn prune(&self, node: Node, idx: &[usize]) -> (Node, f64) {
        match node {
            Node::Leaf { model, n } => {
                let err = estimated_error(self.x, self.y, idx, &model);
                (Node::Leaf { model, n }, err)
            }
            Node::Split { feature, threshold, model, n, left, right } => {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
                let (left, le) = self.prune(*left, &li);
                let (right, re) = self.prune(*right, &ri);
                let subtree = (li.len() as f64 * le + ri.len() as f64 * re) / n as f64;
                let own = estimated_error(self.x, self.y, idx, &model);
                if own <= subtree {
                    (Node::Leaf { model, n }, own)
                } else {
                    let node = Node::Split {
                        feature,
                        threshold,
                        model,
                        n,
                        left: Box::new(left),
                        right: Box::new(right),
                    };
                    (node, subtree)
                }
            }
        }
    }
}

/// Normal-equation statistics of one node over `[1, x_0, …, x_{k-1}]`.
struct NodeGram {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl NodeGram {
    fn new(x: &DMatrix<f64>, y: &[f64], idx: &[usize]) -> Self {
        let v = x.ncols() + 1;
        let a = DMatrix::from_fn(idx.len(), v, |r, c| if c == 0 { 1.0 } else { x[(idx[r], c - 1)] });
        let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]));
        Self { gram: a.tr_mul(&a), xty: a.tr_mul(&b) }
    }

    /// Least squares on the selected feature columns plus intercept.
    fn solve(&self, cols: &[usize], n_features: usize) -> Option<LinearModel> {
        let sel: Vec<usize> = std::iter::once(0).chain(cols.iter().map(|c| c + 1)).collect();
        let g = DMatrix::from_fn(sel.len(), sel.len(), |r, c| self.gram[(sel[r], sel[c])]);
        let b = DVector::from_fn(sel.len(), |r, _| self.xty[sel[r]]);
        let sol = match g.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => g.svd(true, true).solve(&b, 1e-12).ok()?,
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut coefficients = vec![0.0; n_features];
        for (k, &c) in cols.iter().enumerate() {
            coefficients[c] = sol[k + 1];
        }
        Some(LinearModel { intercept: sol[0], coefficients })
    }
}

fn mean_abs_residual(x: &DMatrix<f64>, y: &[f64], idx: &[usize], m: &LinearModel) -> f64 {
    let mut row = vec![0.0; x.ncols()];
    idx.iter()
        .map(|&i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            (y[i] - m.eval(&row)).abs()
        })
        .sum::<f64>()
        / idx.len() as f64
}

fn n_params(m: &LinearModel) -> usize {
    1 + m.coefficients.iter().filter(|c| **c != 0.0).count()
}

fn penalised(n: usize, v: usize, mae: f64) -> f64 {
    if n <= v {
        f64::INFINITY
    } else {
        (n + v) as f64 / (n - v) as f64 * mae
    }
}

fn estimated_error(x: &DMatrix<f64>, y: &[f64], idx: &[usize], m: &LinearModel) -> f64 {
    penalised(idx.len(), n_params(m), mean_abs_residual(x, y, idx, m))
}

/// Forward selection of features under the penalised error estimate.
fn fit_node_model(x: &DMatrix<f64>, y: &[f64], idx: &[usize]) -> LinearModel {
    let n = idx.len();
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let mut best = LinearModel { intercept: mean, coefficients: vec![0.0; x.ncols()] };
    let mut best_err = penalised(n, 1, mean_abs_residual(x, y, idx, &best));
    let mut selected: Vec<usize> = Vec::new();
    let gram = NodeGram::new(x, y, idx);
    loop {
        let mut round: Option<(usize, LinearModel, f64)> = None;
        for j in (0..x.ncols()).filter(|j| !selected.contains(j)) {
            if n <= selected.len() + 2 {
                break;
            }
            let mut cols = selected.clone();
            cols.push(j);
            let Some(m) = gram.solve(&cols, x.ncols()) else { continue };
            let err = penalised(n, cols.len() + 1, mean_abs_residual(x, y, idx, &m));
            if round.as_ref().is_none_or(|(_, _, e)| err < *e) {
                round = Some((j, m, err));
            }
        }
        match round {
            Some((j, m, err)) if err < best_err => {
                selected.push(j);
                best = m;
                best_err = err;
            }
            _ => break,
        }
    }
    best
}

fn collect_rules(
    node: &Node,
    path: &mut Vec<Condition>,
    ancestors: &mut Vec<(LinearModel, usize)>,
    smoothing: bool,
    out: &mut Vec<Rule>,
) {
    match node {
        Node::Leaf { model, n } => {
            let mut m = model.clone();
            if smoothing {
                // Walk back up the path, blending with each ancestor model
                // weighted by the size of the child it came from.
                let mut child_n = *n;
                for (anc, anc_n) in ancestors.iter().rev() {
                    m = m.blend(anc, child_n as f64, SMOOTHING_K);
                    child_n = *anc_n;
                }
            }
            out.push(Rule { conditions: simplify(path), model: m, n_covered: *n });
        }
        Node::Split { feature, threshold, model, n, left, right } => {
            ancestors.push((model.clone(), *n));
            path.push(Condition { feature: *feature, op: CmpOp::LessEq, threshold: *threshold });
            collect_rules(left, path, ancestors, smoothing, out);
            path.pop();
            path.push(Condition { feature: *feature, op: CmpOp::Greater, threshold: *threshold });
            collect_rules(right, path, ancestors, smoothing, out);
            path.pop();
            ancestors.pop();
        }
    }
}

/// Keep only the tightest bound per feature and direction.
fn simplify(path: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = Vec::new();
    for c in path {
        match out.iter_mut().find(|o| o.feature == c.feature && o.op == c.op) {
            Some(o) => {
                o.threshold = match c.op {
                    CmpOp::LessEq => o.threshold.min(c.threshold),
                    CmpOp::Greater => o.threshold.max(c.threshold),
                }
            }
            None => out.push(*c),
        }
    }
    out
}

pub fn cubist_fit(t: &DMatrix<f64>, y: &[f64]) -> Result<CubistModel> {
    cubist_fit_with(t, y, CubistOptions::default())
}

pub fn cubist_fit_with(t: &DMatrix<f64>, y: &[f64], opts: CubistOptions) -> Result<CubistModel> {
    let n = t.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if opts.min_leaf == 0 {
        return Err(Error::InvalidParams("min_leaf must be >= 1".into()));
    }
    if n < 2 * opts.min_leaf {
        return Err(Error::TooFewSamples { needed: 2 * opts.min_leaf, have: n });
    }
    let trainer = Trainer { x: t, y, opts, root_sd: sd(y.iter().copied()) };
    let idx: Vec<usize> = (0..n).collect();
    let tree = trainer.grow(idx.clone());
    let (tree, _) = trainer.prune(tree, &idx);
    let mut rules = Vec::new();
    collect_rules(&tree, &mut Vec::new(), &mut Vec::new(), opts.smoothing, &mut rules);
    Ok(CubistModel { rules, n_features: t.ncols(), min_leaf: opts.min_leaf, smoothing: opts.smoothing })
}
