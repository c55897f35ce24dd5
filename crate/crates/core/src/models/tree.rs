//! CART regression trees with variance-reduction splits and vector leaves.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_outputs: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn leaf_value(y: &[Vec<f64>], rows: &[usize], n_outputs: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_outputs];
    for &r in rows {
        for (a, b) in v.iter_mut().zip(&y[r]) {
            *a += b;
        }
    }
    v.iter_mut().for_each(|a| *a /= rows.len() as f64);
    v
}

/// Relative margin under which two split scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Lowest summed child SSE over all features and midpoint thresholds.
/// Earlier features, then lower thresholds, win ties.
fn best_split(x: &[Vec<f64>], y: &[Vec<f64>], rows: &[usize], n_outputs: usize) -> Option<BestSplit> {
    let n = rows.len();
    let n_features = x[rows[0]].len();
    let mut total = vec![0.0; n_outputs];
    let mut total_sq = 0.0;
    for &r in rows {
        for (m, v) in y[r].iter().enumerate() {
            total[m] += v;
            total_sq += v * v;
        }
    }

    let margin = TIE_TOLERANCE * (1.0 + total_sq);
    let mut best: Option<BestSplit> = None;
    let mut order = rows.to_vec();
    let mut left = vec![0.0; n_outputs];
    for f in 0..n_features {
        order.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]));
        left.iter_mut().for_each(|v| *v = 0.0);
        let mut left_sq = 0.0;
        for i in 0..n - 1 {
            let r = order[i];
            for (m, v) in y[r].iter().enumerate() {
                left[m] += v;
                left_sq += v * v;
            }
            let (lo, hi) = (x[r][f], x[order[i + 1]][f]);
            if lo >= hi {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let mut score = left_sq + (total_sq - left_sq);
            for m in 0..n_outputs {
                let right = total[m] - left[m];
                score -= left[m] * left[m] / nl + right * right / nr;
            }
            if best.as_ref().is_none_or(|b| score < b.score - margin) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

impl RegressionTree {
    /// Fit on the rows of `x`/`y` listed in `rows`; a row may repeat
    /// (bootstrap draws).
    pub fn fit(x: &[Vec<f64>], y: &[Vec<f64>], rows: &[usize], params: &TreeParams) -> Self {
        assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
        let n_features = x[rows[0]].len();
        let n_outputs = y[rows[0]].len();
        let mut nodes = vec![Node::Leaf { value: vec![] }];
        let mut stack = vec![(0usize, rows.to_vec(), 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let pure = rows.iter().all(|r| y[*r] == y[rows[0]]);
            let depth_ok = params.max_depth.is_none_or(|d| depth < d);
            let split = if !pure && depth_ok && rows.len() >= params.min_samples_split.max(2) {
                best_split(x, y, &rows, n_outputs)
            } else {
                None
            };
            match split {
                None => {
                    nodes[id] = Node::Leaf {
                        value: leaf_value(y, &rows, n_outputs),
                    }
                }
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|row| x[**row][s.feature] <= s.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: vec![] });
                    nodes.push(Node::Leaf { value: vec![] });
                    nodes[id] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Self {
            nodes,
            n_features,
            n_outputs,
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn stump_predicts_mean() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![vec![1.0, 10.0], vec![2.0, 20.0], vec![6.0, 30.0]];
        let t = RegressionTree::fit(&x, &y, &rows(3), &TreeParams { max_depth: Some(0), ..Default::default() });
        assert_eq!(t.predict(&[5.0]), &[3.0, 20.0]);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn xor_is_separable_at_depth_two() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y: Vec<Vec<f64>> = [0.0, 1.0, 1.0, 0.0].iter().map(|v| vec![*v]).collect();
        let t = RegressionTree::fit(&x, &y, &rows(4), &TreeParams { max_depth: Some(2), ..Default::default() });
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), yi.as_slice());
        }
        // Every root split has zero gain; the first feature wins.
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![4.0], vec![4.0]];
        let t = RegressionTree::fit(&x, &y, &rows(2), &TreeParams::default());
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn duplicate_features_cannot_split() {
        let x = vec![vec![1.0], vec![1.0]];
        let y = vec![vec![0.0], vec![2.0]];
        let t = RegressionTree::fit(&x, &y, &rows(2), &TreeParams::default());
        assert_eq!(t.predict(&[1.0]), &[1.0]);
    }

    #[test]
    fn unlimited_depth_interpolates() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i * 7 % 20) as f64]).collect();
        let y: Vec<Vec<f64>> = (0..20).map(|i| vec![(i * i) as f64 % 13.0]).collect();
        let t = RegressionTree::fit(&x, &y, &rows(20), &TreeParams::default());
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), yi.as_slice());
        }
    }
}
