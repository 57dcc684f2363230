//! CART decision tree used by the random forest.
//!
//! Splits minimize Gini impurity (classification) or variance (regression).
//! At each node a random subset of `max_features` columns is examined; if
//! none of them can split the node, the remaining columns are tried in the
//! same random order until one can. Among equally good splits the lowest
//! column index wins, then the lowest threshold.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[column] <= threshold` go left.
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `[P(0), P(1)]` for classification, `[mean]` for regression.
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

struct Stats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn of(y: &[f64], samples: &[usize]) -> Stats {
        let mut s = Stats {
            n: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
        };
        for &i in samples {
            s.add(y[i]);
        }
        s
    }

    fn add(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn impurity(&self, criterion: Criterion) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => {
                let p = self.sum / self.n;
                2.0 * p * (1.0 - p)
            }
            Criterion::Variance => (self.sum_sq / self.n - (self.sum / self.n).powi(2)).max(0.0),
        }
    }
}

struct Best {
    column: usize,
    threshold: f64,
    gain: f64,
}

impl DecisionTree {
    /// Grows a tree on `samples` (row indices into `x`, duplicates allowed).
    /// Returns the tree and the per-column total weighted impurity decrease.
    pub(crate) fn grow<R: Rng>(
        x: &DesignMatrix,
        y: &[f64],
        samples: Vec<usize>,
        cfg: &TreeConfig,
        rng: &mut R,
    ) -> (DecisionTree, Vec<f64>) {
        let mut tree = DecisionTree { nodes: Vec::new() };
        let mut decrease = vec![0.0; x.n_cols()];
        tree.build(x, y, samples, 0, cfg, rng, &mut decrease);
        (tree, decrease)
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng>(
        &mut self,
        x: &DesignMatrix,
        y: &[f64],
        samples: Vec<usize>,
        depth: usize,
        cfg: &TreeConfig,
        rng: &mut R,
        decrease: &mut [f64],
    ) -> usize {
        let stats = Stats::of(y, &samples);
        let impurity = stats.impurity(cfg.criterion);
        let id = self.nodes.len();
        self.nodes.push(leaf(&stats, cfg.criterion));

        if depth >= cfg.max_depth || impurity <= 0.0 || samples.len() < 2 * cfg.min_samples_leaf {
            return id;
        }
        let Some(best) = best_split(x, y, &samples, impurity, cfg, rng) else {
            return id;
        };
        decrease[best.column] += samples.len() as f64 * best.gain;
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| x.get(i, best.column) <= best.threshold);
        let l = self.build(x, y, left, depth + 1, cfg, rng, decrease);
        let r = self.build(x, y, right, depth + 1, cfg, rng, decrease);
        self.nodes[id] = Node::Split {
            column: best.column,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => id = if row[*column] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

fn leaf(stats: &Stats, criterion: Criterion) -> Node {
    let mean = if stats.n > 0.0 { stats.sum / stats.n } else { 0.0 };
    let value = match criterion {
        Criterion::Gini => vec![1.0 - mean, mean],
        Criterion::Variance => vec![mean],
    };
    Node::Leaf { value }
}

fn best_split<R: Rng>(
    x: &DesignMatrix,
    y: &[f64],
    samples: &[usize],
    parent: f64,
    cfg: &TreeConfig,
    rng: &mut R,
) -> Option<Best> {
    let mut order: Vec<usize> = (0..x.n_cols()).collect();
    order.shuffle(rng);
    let mut best: Option<Best> = None;
    let mut examined = 0;
    let n = samples.len() as f64;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(samples.len());

    for column in order {
        if examined >= cfg.max_features && best.is_some() {
            break;
        }
        sorted.clear();
        sorted.extend(samples.iter().map(|&i| (x.get(i, column), y[i])));
        if sorted.iter().all(|p| p.0 == sorted[0].0) {
            continue;
        }
        examined += 1;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let total = Stats {
            n,
            sum: sorted.iter().map(|p| p.1).sum(),
            sum_sq: sorted.iter().map(|p| p.1 * p.1).sum(),
        };
        let mut left = Stats {
            n: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
        };
        for k in 0..sorted.len() - 1 {
            left.add(sorted[k].1);
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let n_left = k + 1;
            if n_left < cfg.min_samples_leaf || sorted.len() - n_left < cfg.min_samples_leaf {
                continue;
            }
            let right = Stats {
                n: total.n - left.n,
                sum: total.sum - left.sum,
                sum_sq: total.sum_sq - left.sum_sq,
            };
            let child = (left.n * left.impurity(cfg.criterion) + right.n * right.impurity(cfg.criterion)) / n;
            let gain = parent - child;
            let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain
                        || (gain == b.gain && (column < b.column || (column == b.column && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Best {
                    column,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.map(|b| Best {
        gain: b.gain.max(0.0),
        ..b
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Feature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(criterion: Criterion, max_depth: usize) -> TreeConfig {
        TreeConfig {
            criterion,
            max_depth,
            min_samples_leaf: 1,
            max_features: 2,
        }
    }

    #[test]
    fn single_split_on_step() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i >= 6 { 1.0 } else { 0.0 }).collect();
        let x = DesignMatrix::from_rows(&rows, &[Feature::Tta, Feature::WaitingTime]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (tree, dec) = DecisionTree::grow(&x, &y, (0..10).collect(), &cfg(Criterion::Gini, 3), &mut rng);
        assert_eq!(tree.depth(), 1);
        match &tree.nodes[0] {
            Node::Split { column, threshold, .. } => {
                assert_eq!(*column, 0);
                assert_eq!(*threshold, 5.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.leaf_value(&[2.0, 0.0]), &[1.0, 0.0]);
        assert_eq!(tree.leaf_value(&[8.0, 0.0]), &[0.0, 1.0]);
        // root gini 2*0.4*0.6 = 0.48, children pure
        assert!((dec[0] - 10.0 * 0.48).abs() < 1e-12);
        assert_eq!(dec[1], 0.0);
    }

    #[test]
    fn ties_go_to_lowest_column() {
        // identical columns give identical gains
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i >= 4) as u8 as f64).collect();
        let x = DesignMatrix::from_rows(&rows, &[Feature::Tta, Feature::WaitingTime]).unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (tree, _) = DecisionTree::grow(&x, &y, (0..8).collect(), &cfg(Criterion::Gini, 1), &mut rng);
            assert!(matches!(tree.nodes[0], Node::Split { column: 0, .. }));
        }
    }

    #[test]
    fn regression_leaves_hold_means() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = [1.0, 1.0, 1.0, 5.0, 5.0, 7.0];
        let x = DesignMatrix::from_rows(&rows, &[Feature::Tta]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = TreeConfig {
            max_features: 1,
            ..cfg(Criterion::Variance, 1)
        };
        let (tree, _) = DecisionTree::grow(&x, &y, (0..6).collect(), &c, &mut rng);
        assert_eq!(tree.leaf_value(&[0.0]), &[1.0]);
        assert!((tree.leaf_value(&[5.0])[0] - 17.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn respects_depth_and_min_leaf() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![(i * 37 % 64) as f64, (i % 5) as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let x = DesignMatrix::from_rows(&rows, &[Feature::Tta, Feature::WaitingTime]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for depth in 1..6 {
            let (tree, _) = DecisionTree::grow(&x, &y, (0..64).collect(), &cfg(Criterion::Gini, depth), &mut rng);
            assert!(tree.depth() <= depth);
        }
    }
}
