use rand::Rng;

use super::ForestParams;
use crate::{Error, Result};

/// Feature index marking a leaf.
pub const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub feature: u32,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean target of the node's training samples.
    pub value: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

/// CART regression tree stored as a node array; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            let n = &self.nodes[k];
            if n.is_leaf() {
                return n.value;
            }
            k = if x[n.feature as usize] <= n.threshold {
                n.left
            } else {
                n.right
            } as usize;
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, k: usize) -> usize {
            let n = &t.nodes[k];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }

    /// Structural validity against an input dimension.
    pub fn validate(&self, features: usize) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (k, n) in self.nodes.iter().enumerate() {
            if n.is_leaf() {
                continue;
            }
            if n.feature as usize >= features {
                return Err(format!("node {k} splits on feature {} of {features}", n.feature));
            }
            // children follow their parent, so traversal always terminates
            for c in [n.left, n.right] {
                if c as usize <= k || c as usize >= self.nodes.len() {
                    return Err(format!("node {k} has invalid child {c}"));
                }
            }
        }
        Ok(())
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Midpoint of two consecutive distinct values that still separates them.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + 0.5 * (b - a);
    if m < b {
        m
    } else {
        a
    }
}

/// Best variance-reduction split on `feature`. Samples are ordered by `(x, y)`, so
/// the running sums and the result do not depend on the input order.
fn best_split_on(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    feature: usize,
    min_leaf: usize,
    buf: &mut Vec<(f64, f64)>,
) -> Option<Split> {
    buf.clear();
    buf.extend(idx.iter().map(|&i| (x[i][feature], y[i])));
    buf.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = buf.len();
    if buf[0].0 == buf[n - 1].0 {
        return None;
    }
    let (total, total_sq) = buf.iter().fold((0.0, 0.0), |(s, q), &(_, v)| (s + v, q + v * v));
    let parent = total_sq - total * total / n as f64;
    let mut best: Option<Split> = None;
    let (mut ls, mut lq) = (0.0, 0.0);
    for k in 0..n - 1 {
        let (xv, yv) = buf[k];
        ls += yv;
        lq += yv * yv;
        let nl = k + 1;
        let nr = n - nl;
        if xv == buf[k + 1].0 || nl < min_leaf || nr < min_leaf {
            continue;
        }
        let rs = total - ls;
        let rq = total_sq - lq;
        let sse = (lq - ls * ls / nl as f64) + (rq - rs * rs / nr as f64);
        let gain = parent - sse;
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                feature,
                threshold: midpoint(xv, buf[k + 1].0),
                gain,
            });
        }
    }
    best
}

fn is_constant(x: &[Vec<f64>], rows: &[usize], feature: usize) -> bool {
    let v = x[rows[0]][feature];
    rows.iter().all(|&i| x[i][feature] == v)
}

/// Mean summed in ascending order, independent of the row order.
fn ordered_mean(y: &[f64], rows: &[usize]) -> f64 {
    let mut v: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    v.sort_by(f64::total_cmp);
    if v[0] == v[v.len() - 1] {
        // pure node: exact value
        return v[0];
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Grows a tree on the rows `idx` (repeats allowed). At each node features are
/// drawn at random until `mtry` of them vary within the node or none are left; only
/// those are searched. Gain ties go to the lower feature index, then to the lower
/// threshold.
pub fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    idx: Vec<usize>,
    params: &ForestParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    if idx.is_empty() {
        return Err(Error::Empty("tree training data"));
    }
    let d = x[0].len();
    let mtry = params.mtry_for(d);
    let min_leaf = params.min_samples_leaf.max(1);
    let mut nodes = Vec::new();
    let mut buf = Vec::with_capacity(idx.len());
    let mut order: Vec<usize> = (0..d).collect();
    // (node slot, rows, depth)
    let mut stack = vec![(0usize, idx, 0usize)];
    nodes.push(Node {
        feature: LEAF,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: 0.0,
    });
    while let Some((slot, rows, depth)) = stack.pop() {
        nodes[slot].value = ordered_mean(y, &rows);
        let constant = rows.iter().all(|&i| y[i] == y[rows[0]]);
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        if constant || !depth_ok || rows.len() < 2 * min_leaf {
            continue;
        }
        let mut best: Option<Split> = None;
        // partial Fisher-Yates over the features; constant ones do not count toward mtry
        let mut visited = 0;
        let mut remaining = d;
        while visited < mtry && remaining > 0 {
            let pick = rng.random_range(0..remaining);
            remaining -= 1;
            order.swap(pick, remaining);
            let f = order[remaining];
            if is_constant(x, &rows, f) {
                continue;
            }
            visited += 1;
            if let Some(s) = best_split_on(x, y, &rows, f, min_leaf, &mut buf) {
                let better = best.as_ref().is_none_or(|b| {
                    s.gain > b.gain || (s.gain == b.gain && s.feature < b.feature)
                });
                if better {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best.filter(|s| s.gain > 0.0) else {
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| x[i][split.feature] <= split.threshold);
        let l = nodes.len();
        for _ in 0..2 {
            nodes.push(Node {
                feature: LEAF,
                threshold: 0.0,
                left: 0,
                right: 0,
                value: 0.0,
            });
        }
        nodes[slot].feature = split.feature as u32;
        nodes[slot].threshold = split.threshold;
        nodes[slot].left = l as u32;
        nodes[slot].right = l as u32 + 1;
        stack.push((l + 1, right, depth + 1));
        stack.push((l, left, depth + 1));
    }
    Ok(RegressionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    fn params() -> ForestParams {
        ForestParams {
            trees: 1,
            mtry: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: false,
        }
    }

    fn fit(x: &[Vec<f64>], y: &[f64], p: &ForestParams) -> RegressionTree {
        fit_tree_on(x, y, (0..y.len()).collect(), p, &mut rng(0)).unwrap()
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let x: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64]).collect();
        let t = fit(&x, &[0.3; 6], &params());
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[100.0]), 0.3);
    }

    #[test]
    fn step_is_split_at_the_gap() {
        let xs = [0.0, 1.0, 2.0, 5.0, 6.0, 7.0];
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = fit(&x, &y, &ForestParams {
            max_depth: Some(1),
            ..params()
        });
        assert_eq!(t.nodes[0].threshold, 3.5);
        assert_eq!(t.predict(&[3.4]), 0.0);
        assert_eq!(t.predict(&[3.6]), 1.0);
        // enumerate every midpoint: the gap split alone reaches zero error
        for k in 0..5 {
            let thr = 0.5 * (xs[k] + xs[k + 1]);
            let sse: f64 = [&y[..=k], &y[k + 1..]]
                .iter()
                .map(|s| {
                    let m = s.iter().sum::<f64>() / s.len() as f64;
                    s.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                })
                .sum();
            assert_eq!(sse == 0.0, thr == 3.5);
        }
    }

    #[test]
    fn min_leaf_equal_to_n_gives_global_mean() {
        let x: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64]).collect();
        let y = [0.0, 0.2, 0.6, 1.0];
        let t = fit(&x, &y, &ForestParams {
            min_samples_leaf: 4,
            ..params()
        });
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[0.0]), 0.45);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // two identical features: the split must use feature 0
        let x: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64, k as f64]).collect();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = fit(&x, &y, &params());
        assert_eq!(t.nodes[0].feature, 0);
        assert!(t.validate(2).is_ok());
        assert!(t.validate(0).is_err());
    }

    #[test]
    fn memorizes_distinct_inputs() {
        let x: Vec<Vec<f64>> = (0..20).map(|k| vec![(k * 7 % 20) as f64, (k % 3) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|k| ((k * 13) % 10) as f64 / 10.0).collect();
        let t = fit(&x, &y, &params());
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), *yi);
        }
    }
}
