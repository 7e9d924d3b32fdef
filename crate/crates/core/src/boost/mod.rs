//! Second-order gradient-boosted regression trees.
//!
//! Each round expands the loss to second order around the current
//! predictions, so a tree only needs the per-sample first and second
//! derivatives `g_i`, `h_i`. For a fixed tree structure with leaf sums
//! `G_j`, `H_j` the optimal leaf weight is `-G_j / (H_j + lambda)` and the
//! regularized objective collapses to `-1/2 sum G_j^2 / (H_j + lambda) + gamma T`.
//! Splits are chosen greedily by the reduction of that objective.

mod ensemble;
mod features;
mod forecast;
mod tree;

use crate::error::{Error, Result};

pub use ensemble::{
    feature_importance, fit_boost, read_ensemble, write_ensemble, write_importance_csv,
    FeatureImportance, TreeEnsemble,
};
pub use features::{aqi_influence, lag_features, InfluenceReport, LagMatrix};
pub use forecast::{GbtForecaster, GbtForecastConfig};
pub use tree::{best_split, build_tree, structure_score, Split, SplitParams, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `1/2 (y - yhat)^2`
    Squared,
    /// Binary cross-entropy with `yhat` on the log-odds scale.
    Logistic,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Loss::Squared),
            "logistic" => Ok(Loss::Logistic),
            other => Err(Error::Config(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub num_rounds: usize,
    /// Shrinkage applied to every tree.
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub loss: Loss,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            num_rounds: 200,
            learning_rate: 0.3,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            loss: Loss::Squared,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rounds == 0 {
            return Err(Error::Config("num_rounds must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(Error::Config("lambda, gamma and min_child_weight must be non-negative".into()));
        }
        Ok(())
    }

    pub(crate) fn split_params(&self) -> SplitParams {
        SplitParams {
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
        }
    }
}

/// Per-sample first and second derivatives of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivatives of `loss` with respect to the current predictions `yhat`.
pub fn grad_hess(loss: Loss, y: &[f64], yhat: &[f64]) -> Result<GradHess> {
    if y.len() != yhat.len() {
        return Err(Error::Length(format!(
            "{} targets vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    match loss {
        Loss::Squared => Ok(GradHess {
            g: y.iter().zip(yhat).map(|(y, p)| p - y).collect(),
            h: vec![1.0; y.len()],
        }),
        Loss::Logistic => {
            if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::Label(format!("logistic labels must be 0 or 1, got {bad}")));
            }
            let p: Vec<f64> = yhat.iter().map(|v| sigmoid(*v)).collect();
            Ok(GradHess {
                g: p.iter().zip(y).map(|(p, y)| p - y).collect(),
                h: p.iter().map(|p| p * (1.0 - p)).collect(),
            })
        }
    }
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> Result<f64> {
    let denom = h_sum + lambda;
    if !(denom > 0.0) {
        return Err(Error::DegenerateLeaf(denom));
    }
    Ok(-g_sum / denom)
}

/// Objective reduction from splitting one leaf into left and right children,
/// less the per-leaf penalty `gamma`.
pub fn split_gain(g_left: f64, h_left: f64, g_right: f64, h_right: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(g_left, h_left) + score(g_right, h_right)
        - score(g_left + g_right, h_left + h_right))
        - gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_derivatives() {
        let gh = grad_hess(Loss::Squared, &[3.0, 4.0], &[5.0, 4.0]).unwrap();
        assert_eq!(gh.g, vec![2.0, 0.0]);
        assert_eq!(gh.h, vec![1.0, 1.0]);
    }

    #[test]
    fn logistic_derivatives() {
        let gh = grad_hess(Loss::Logistic, &[1.0], &[0.0]).unwrap();
        assert_eq!(gh.g, vec![-0.5]);
        assert_eq!(gh.h, vec![0.25]);
        assert!(matches!(
            grad_hess(Loss::Logistic, &[2.0], &[0.0]),
            Err(Error::Label(_))
        ));
        assert!(grad_hess(Loss::Squared, &[1.0], &[]).is_err());
    }

    #[test]
    fn leaf_weights() {
        assert_eq!(leaf_weight(4.0, 2.0, 0.0).unwrap(), -2.0);
        assert_eq!(leaf_weight(0.0, 3.0, 1.0).unwrap(), 0.0);
        // squared loss, lambda 0: negative mean of g
        let g = [-1.0, -3.0];
        assert_eq!(leaf_weight(g.iter().sum(), 2.0, 0.0).unwrap(), 2.0);
        assert!(matches!(leaf_weight(1.0, 0.0, 0.0), Err(Error::DegenerateLeaf(_))));
    }

    #[test]
    fn gains() {
        assert_eq!(split_gain(2.0, 1.0, 2.0, 1.0, 0.0, 0.0), 0.0);
        assert_eq!(split_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 0.0), 4.0);
        let base = split_gain(1.3, 2.0, -0.7, 1.5, 0.5, 0.0);
        assert!((split_gain(1.3, 2.0, -0.7, 1.5, 0.5, 1.0) - (base - 1.0)).abs() < 1e-15);
    }
}
