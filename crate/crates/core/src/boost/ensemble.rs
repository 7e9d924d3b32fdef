//! Additive training and the tree-list text format.
//!
//! ```text
//! cfcast-trees 1
//! loss squared|logistic
//! num_rounds <K>
//! learning_rate <eta>
//! max_depth <depth>
//! lambda <f64>
//! gamma <f64>
//! min_child_weight <f64>
//! base_score <f64>
//! features <name> <name> ...
//! tree <node count>
//! split <feature index> <threshold> <gain>
//! leaf <weight>
//! ...
//! ```
//!
//! Each `tree` line is followed by its nodes in preorder: a `split` line is
//! followed by the whole left subtree, then the right subtree.

use std::io::{BufRead, Write};

use super::tree::build_tree;
use super::{grad_hess, sigmoid, BoostConfig, Loss, TreeNode};
use crate::error::{Error, Result};

pub const TREES_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "cfcast-trees";

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub config: BoostConfig,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    /// `base_score + eta * sum_t tree_t(row)`; log-odds under logistic loss.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.config.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict(r)).collect()
    }

    /// Class-1 probability; only meaningful for logistic ensembles.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.predict(row))
    }
}

fn check_matrix(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::Length(format!("boosting needs at least 2 rows, got {}", x.len())));
    }
    if x.len() != y.len() {
        return Err(Error::Length(format!("{} feature rows vs {} targets", x.len(), y.len())));
    }
    if let Some((i, r)) = x.iter().enumerate().find(|(_, r)| r.len() != names.len()) {
        return Err(Error::Length(format!(
            "row {i} has {} features, expected {}",
            r.len(),
            names.len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Range("features and targets must be finite".into()));
    }
    if let Some(bad) = names.iter().find(|n| n.is_empty() || n.contains(char::is_whitespace)) {
        return Err(Error::Config(format!("invalid feature name {bad:?}")));
    }
    Ok(())
}

/// Fits `config.num_rounds` trees, each on the gradients at the running predictions.
pub fn fit_boost(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    config: &BoostConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    check_matrix(x, y, feature_names)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let base_score = match config.loss {
        Loss::Squared => mean,
        Loss::Logistic => {
            if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Label("logistic labels must be 0 or 1".into()));
            }
            if mean == 0.0 || mean == 1.0 {
                return Err(Error::Label(format!(
                    "every label is {mean}; boosting needs both classes"
                )));
            }
            (mean / (1.0 - mean)).ln()
        }
    };

    let params = config.split_params();
    let rows: Vec<usize> = (0..x.len()).collect();
    let mut yhat = vec![base_score; y.len()];
    let mut trees = Vec::with_capacity(config.num_rounds);
    for _ in 0..config.num_rounds {
        let gh = grad_hess(config.loss, y, &yhat)?;
        let tree = build_tree(x, &gh.g, &gh.h, &rows, &params, config.max_depth)?;
        for (p, row) in yhat.iter_mut().zip(x) {
            *p += config.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        base_score,
        trees,
        config: *config,
        feature_names: feature_names.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature: String,
    /// Share of the total split gain; sums to 1 across features.
    pub gain: f64,
}

/// Total split gain per feature, normalized, highest first (ties by feature
/// order). Features that never split are omitted.
pub fn feature_importance(ens: &TreeEnsemble) -> Vec<FeatureImportance> {
    let mut totals = vec![0.0; ens.feature_names.len()];
    let mut any = vec![false; ens.feature_names.len()];
    for tree in &ens.trees {
        tree.visit(&mut |n| {
            if let TreeNode::Split { feature, gain, .. } = n {
                totals[*feature] += gain;
                any[*feature] = true;
            }
        });
    }
    let sum: f64 = totals.iter().sum();
    let mut out: Vec<(usize, FeatureImportance)> = totals
        .iter()
        .enumerate()
        .filter(|(i, _)| any[*i])
        .map(|(i, g)| {
            (
                i,
                FeatureImportance {
                    feature: ens.feature_names[i].clone(),
                    gain: g / sum,
                },
            )
        })
        .collect();
    out.sort_by(|a, b| b.1.gain.total_cmp(&a.1.gain).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(_, f)| f).collect()
}

/// `feature,gain` rows in the order given.
pub fn write_importance_csv<W: Write>(importance: &[FeatureImportance], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["feature", "gain"]).map_err(csv_err)?;
    for f in importance {
        w.write_record([f.feature.as_str(), &format!("{:?}", f.gain)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn write_ensemble<W: Write>(ens: &TreeEnsemble, mut out: W) -> std::io::Result<()> {
    let c = &ens.config;
    writeln!(out, "{MAGIC} {TREES_FORMAT_VERSION}")?;
    writeln!(out, "loss {}", c.loss.name())?;
    writeln!(out, "num_rounds {}", c.num_rounds)?;
    writeln!(out, "learning_rate {:?}", c.learning_rate)?;
    writeln!(out, "max_depth {}", c.max_depth)?;
    writeln!(out, "lambda {:?}", c.lambda)?;
    writeln!(out, "gamma {:?}", c.gamma)?;
    writeln!(out, "min_child_weight {:?}", c.min_child_weight)?;
    writeln!(out, "base_score {:?}", ens.base_score)?;
    writeln!(out, "features {}", ens.feature_names.join(" "))?;
    for tree in &ens.trees {
        let mut count = 0;
        tree.visit(&mut |_| count += 1);
        writeln!(out, "tree {count}")?;
        let mut result = Ok(());
        tree.visit(&mut |n| {
            if result.is_err() {
                return;
            }
            result = match n {
                TreeNode::Leaf { weight } => writeln!(out, "leaf {weight:?}"),
                TreeNode::Split { feature, threshold, gain, .. } => {
                    writeln!(out, "split {feature} {threshold:?} {gain:?}")
                }
            };
        });
        result?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<Vec<String>>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.number += 1;
                let line = line.map_err(|e| Error::Parse(e.to_string()))?;
                Ok(Some(line.split_whitespace().map(str::to_owned).collect()))
            }
        }
    }

    fn expect(&mut self, key: &str) -> Result<Vec<String>> {
        let parts = self
            .next_line()?
            .ok_or_else(|| Error::Parse(format!("tree file ends before {key}")))?;
        match parts.split_first() {
            Some((k, rest)) if k == key => Ok(rest.to_vec()),
            _ => Err(Error::Parse(format!("line {}: expected {key}", self.number))),
        }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.expect(key)?;
        match v.as_slice() {
            [one] => one
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {key} {one:?}", self.number))),
            _ => Err(Error::Parse(format!("line {}: {key} takes one value", self.number))),
        }
    }

    fn node(&mut self, features: usize) -> Result<TreeNode> {
        let line = self.number + 1;
        let parts = self
            .next_line()?
            .ok_or_else(|| Error::Parse("tree file ends inside a tree".into()))?;
        let bad = || Error::Parse(format!("line {line}: malformed node"));
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match parts.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["leaf", w] => Ok(TreeNode::Leaf { weight: float(w)? }),
            ["split", f, t, g] => {
                let feature: usize = f.parse().map_err(|_| bad())?;
                if feature >= features {
                    return Err(Error::Parse(format!("line {line}: feature {feature} out of range")));
                }
                let (threshold, gain) = (float(t)?, float(g)?);
                let left = Box::new(self.node(features)?);
                let right = Box::new(self.node(features)?);
                Ok(TreeNode::Split { feature, threshold, gain, left, right })
            }
            _ => Err(bad()),
        }
    }
}

pub fn read_ensemble<R: BufRead>(input: R) -> Result<TreeEnsemble> {
    let mut lines = Lines { inner: input.lines(), number: 0 };
    let version: u32 = lines.value(MAGIC)?;
    if version != TREES_FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported tree file version {version}")));
    }
    let loss = Loss::parse(&lines.value::<String>("loss")?)?;
    let config = BoostConfig {
        loss,
        num_rounds: lines.value("num_rounds")?,
        learning_rate: lines.value("learning_rate")?,
        max_depth: lines.value("max_depth")?,
        lambda: lines.value("lambda")?,
        gamma: lines.value("gamma")?,
        min_child_weight: lines.value("min_child_weight")?,
    };
    let base_score = lines.value("base_score")?;
    let feature_names = lines.expect("features")?;
    let mut trees = Vec::new();
    while let Some(parts) = lines.next_line()? {
        if parts.first().map(String::as_str) != Some("tree") || parts.len() != 2 {
            return Err(Error::Parse(format!("line {}: expected tree", lines.number)));
        }
        let start = lines.number;
        let tree = lines.node(feature_names.len())?;
        let mut count = 0;
        tree.visit(&mut |_| count += 1);
        if parts[1] != count.to_string() {
            return Err(Error::Parse(format!("line {start}: node count mismatch")));
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble { base_score, trees, config, feature_names })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    fn step_data(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| if r[0] > 0.5 { 5.0 } else { 0.0 } + rng.sample(normal))
            .collect();
        (x, y)
    }

    #[test]
    fn depth_zero_predicts_mean() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = [1.0, 5.0, 6.0];
        let cfg = BoostConfig {
            num_rounds: 1,
            learning_rate: 1.0,
            max_depth: 0,
            lambda: 0.0,
            ..Default::default()
        };
        let ens = fit_boost(&x, &y, &names(1), &cfg).unwrap();
        assert_eq!(ens.trees[0], TreeNode::Leaf { weight: 0.0 });
        for r in &x {
            assert_eq!(ens.predict(r), 4.0);
        }
        assert!(feature_importance(&ens).is_empty());
    }

    #[test]
    fn unlimited_depth_interpolates() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![((i * 7) % 20) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| ((i * i) % 11) as f64).collect();
        let cfg = BoostConfig {
            num_rounds: 1,
            learning_rate: 1.0,
            max_depth: 64,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
            loss: Loss::Squared,
        };
        let ens = fit_boost(&x, &y, &names(1), &cfg).unwrap();
        for (r, v) in x.iter().zip(&y) {
            assert!((ens.predict(r) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn training_loss_never_increases() {
        let (x, y) = step_data(3, 150);
        for eta in [0.3, 1.0] {
            let cfg = BoostConfig { num_rounds: 30, learning_rate: eta, ..Default::default() };
            let ens = fit_boost(&x, &y, &names(4), &cfg).unwrap();
            let mut yhat = vec![ens.base_score; y.len()];
            let mse = |p: &[f64]| p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let mut last = mse(&yhat);
            for tree in &ens.trees {
                for (p, r) in yhat.iter_mut().zip(&x) {
                    *p += eta * tree.predict(r);
                }
                let now = mse(&yhat);
                assert!(now <= last + 1e-9, "eta {eta}: {now} > {last}");
                last = now;
            }
        }
    }

    #[test]
    fn single_split_has_full_importance() {
        let x = vec![vec![0.0, 9.0], vec![1.0, 9.0]];
        let cfg = BoostConfig { num_rounds: 1, max_depth: 1, lambda: 0.0, min_child_weight: 0.0, ..Default::default() };
        let ens = fit_boost(&x, &[0.0, 2.0], &names(2), &cfg).unwrap();
        assert_eq!(
            feature_importance(&ens),
            vec![FeatureImportance { feature: "x0".into(), gain: 1.0 }]
        );
    }

    #[test]
    fn signal_feature_dominates_importance() {
        let (x, y) = step_data(11, 400);
        let ens = fit_boost(&x, &y, &names(4), &BoostConfig::default()).unwrap();
        let imp = feature_importance(&ens);
        assert_eq!(imp[0].feature, "x0");
        assert!(imp[0].gain >= 0.9, "{imp:?}");
        let total: f64 = imp.iter().map(|f| f.gain).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predictions_are_bounded_by_leaf_extremes() {
        let (x, y) = step_data(5, 120);
        let cfg = BoostConfig { num_rounds: 25, ..Default::default() };
        let ens = fit_boost(&x, &y, &names(4), &cfg).unwrap();
        let leaves: Vec<f64> = ens.trees.iter().flat_map(|t| t.leaf_weights()).collect();
        let lo = leaves.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = leaves.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = ens.trees.len() as f64 * cfg.learning_rate;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..2.0)).collect();
            let p = ens.predict(&r);
            assert!(p >= ens.base_score + k * lo - 1e-9 && p <= ens.base_score + k * hi + 1e-9);
        }
    }

    #[test]
    fn logistic_needs_two_classes() {
        let x = vec![vec![0.0], vec![1.0]];
        let cfg = BoostConfig { loss: Loss::Logistic, ..Default::default() };
        assert!(matches!(fit_boost(&x, &[1.0, 1.0], &names(1), &cfg), Err(Error::Label(_))));
        let ens = fit_boost(&x, &[0.0, 1.0], &names(1), &BoostConfig { num_rounds: 20, min_child_weight: 0.0, ..cfg }).unwrap();
        assert_eq!(ens.base_score, 0.0);
        assert!(ens.predict_proba(&[0.0]) < 0.5 && ens.predict_proba(&[1.0]) > 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = BoostConfig::default();
        assert!(fit_boost(&[vec![1.0]], &[1.0], &names(1), &cfg).is_err());
        assert!(fit_boost(&[vec![1.0], vec![2.0, 3.0]], &[1.0, 2.0], &names(1), &cfg).is_err());
        assert!(fit_boost(&[vec![f64::NAN], vec![2.0]], &[1.0, 2.0], &names(1), &cfg).is_err());
        let bad_cfg = BoostConfig { learning_rate: 1.5, ..cfg };
        assert!(matches!(
            fit_boost(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &names(1), &bad_cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_fit() {
        let (x, y) = step_data(8, 100);
        let cfg = BoostConfig { num_rounds: 10, ..Default::default() };
        let a = fit_boost(&x, &y, &names(4), &cfg).unwrap();
        let b = fit_boost(&x, &y, &names(4), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip() {
        let (x, y) = step_data(2, 60);
        let cfg = BoostConfig { num_rounds: 5, ..Default::default() };
        let ens = fit_boost(&x, &y, &names(4), &cfg).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        let back = read_ensemble(buf.as_slice()).unwrap();
        assert_eq!(back, ens);
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(read_ensemble(truncated.as_bytes()).is_err());
    }

    #[test]
    fn importance_csv() {
        let imp = vec![
            FeatureImportance { feature: "pm2_5".into(), gain: 0.75 },
            FeatureImportance { feature: "no2".into(), gain: 0.25 },
        ];
        let mut buf = Vec::new();
        write_importance_csv(&imp, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,gain\npm2_5,0.75\nno2,0.25\n");
    }
}
