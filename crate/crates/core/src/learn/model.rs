//! The two interpretable classifiers: multinomial logistic regression and
//! a one-vs-rest RBF-kernel max-margin model.
//!
//! Both train deterministically (the kernel model from an explicit seed)
//! and serialize to JSON with a schema version so stale artifacts are
//! rejected instead of silently misread.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{FeatureTable, Standardizer};
use crate::rng;

pub const MODEL_SCHEMA: &str = "papillae/model-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfConfig {
    pub c: f64,
    /// Kernel width; `None` means 1/(d · mean feature variance).
    pub gamma: Option<f64>,
    /// Stochastic subgradient steps per binary problem.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            max_iter: 60_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logistic(LogisticConfig),
    Rbf(RbfConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Rbf(RbfConfig::default())
    }
}

impl ModelConfig {
    /// Re-seed the stochastic part, if any (evaluation protocols derive a
    /// fresh seed per split).
    pub fn with_seed(&self, seed: u64) -> ModelConfig {
        match self {
            ModelConfig::Logistic(c) => ModelConfig::Logistic(c.clone()),
            ModelConfig::Rbf(c) => ModelConfig::Rbf(RbfConfig { seed, ..c.clone() }),
        }
    }
}

/// Trained parameters, tagged by family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    /// `weights[k]` holds the class-k coefficients, bias last.
    Logistic { weights: Vec<Vec<f64>> },
    /// Kernel expansion over the (standardized) training rows:
    /// score_k(x) = Σ_j coef[k][j] · exp(−γ‖support_j − x‖²).
    Rbf {
        gamma: f64,
        support: Vec<Vec<f64>>,
        coef: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub schema: String,
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub standardizer: Standardizer,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ClassifierModel {
    /// Per-class decision scores of one standardized row.
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ModelKind::Logistic { weights } => weights
                .iter()
                .map(|w| {
                    let (coef, bias) = w.split_at(w.len() - 1);
                    coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias[0]
                })
                .collect(),
            ModelKind::Rbf {
                gamma,
                support,
                coef,
            } => {
                let k: Vec<f64> = support
                    .iter()
                    .map(|s| {
                        let d2: f64 = s.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-gamma * d2).exp()
                    })
                    .collect();
                coef.iter()
                    .map(|c| c.iter().zip(&k).map(|(a, b)| a * b).sum())
                    .collect()
            }
        }
    }

    /// Predicted class plus its decision margin (winning score minus
    /// runner-up) for raw feature rows.
    pub fn predict_rows_scored(&self, rows: &[Vec<f64>]) -> Vec<(String, f64)> {
        rows.iter()
            .map(|r| {
                let x = self.standardizer.transform_row(r);
                let s = self.scores(&x);
                let mut best = 0;
                for (i, v) in s.iter().enumerate() {
                    if *v > s[best] {
                        best = i;
                    }
                }
                let runner_up = s
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, v)| *v)
                    .fold(f64::NEG_INFINITY, f64::max);
                (self.classes[best].clone(), s[best] - runner_up)
            })
            .collect()
    }

    /// Predict class labels for raw (unstandardized) feature rows.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<String> {
        self.predict_rows_scored(rows)
            .into_iter()
            .map(|(c, _)| c)
            .collect()
    }

    /// Predict for a table, insisting on the exact training feature set.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<String>> {
        if table.feature_names != self.feature_names {
            return Err(Error::invalid(format!(
                "feature names do not match the model (model: {:?}, table: {:?})",
                self.feature_names, table.feature_names
            )));
        }
        Ok(self.predict_rows(&table.rows))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ClassifierModel> {
        let text = std::fs::read_to_string(&path)?;
        let model: ClassifierModel = serde_json::from_str(&text)?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported model schema `{}` (this build reads `{MODEL_SCHEMA}`)",
                model.schema
            )));
        }
        Ok(model)
    }
}

/// Encode labels as indices into the sorted class list.
fn encode_labels(labels: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("training needs at least 2 classes"));
    }
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in class list"))
        .collect();
    Ok((classes, y))
}

/// Train a model of the configured family on the whole table; the
/// standardizer is fitted on the same rows.
pub fn train(table: &FeatureTable, label_col: &str, cfg: &ModelConfig) -> Result<ClassifierModel> {
    if table.is_empty() {
        return Err(Error::invalid("empty training table"));
    }
    if table
        .rows
        .iter()
        .any(|r| r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::numeric("non-finite feature values in training data"));
    }
    let (classes, y) = encode_labels(table.labels(label_col)?)?;
    let all: Vec<usize> = (0..table.len()).collect();
    let standardizer = Standardizer::fit(&table.rows, &all)?;
    let x = standardizer.transform(&table.rows);
    let kind = match cfg {
        ModelConfig::Logistic(c) => {
            let fit = fit_logistic(&x, &y, classes.len(), c)?;
            log::debug!(
                "logistic fit converged after {} evaluations (loss {:.6})",
                fit.loss_trace.len(),
                fit.loss_trace.last().copied().unwrap_or(f64::NAN)
            );
            ModelKind::Logistic { weights: fit.weights }
        }
        ModelConfig::Rbf(c) => fit_rbf(&x, &y, classes.len(), c),
    };
    Ok(ClassifierModel {
        schema: MODEL_SCHEMA.to_string(),
        feature_names: table.feature_names.clone(),
        classes,
        standardizer,
        kind,
    })
}

pub fn train_logistic(
    table: &FeatureTable,
    label_col: &str,
    cfg: &LogisticConfig,
) -> Result<ClassifierModel> {
    train(table, label_col, &ModelConfig::Logistic(cfg.clone()))
}

pub fn train_rbf(
    table: &FeatureTable,
    label_col: &str,
    cfg: &RbfConfig,
) -> Result<ClassifierModel> {
    train(table, label_col, &ModelConfig::Rbf(cfg.clone()))
}

pub(crate) struct LogisticFit {
    pub weights: Vec<Vec<f64>>,
    /// Objective value after every accepted step, for monotonicity checks.
    pub loss_trace: Vec<f64>,
}

/// Full-batch softmax regression with Armijo backtracking line search.
/// The bias column is not regularized.
pub(crate) fn fit_logistic(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    cfg: &LogisticConfig,
) -> Result<LogisticFit> {
    let n = x.len();
    let d = x[0].len();
    let lambda = cfg.l2_lambda;

    // Softmax probabilities and mean NLL + (λ/2n)‖W_feat‖².
    let loss_of = |w: &[Vec<f64>]| -> f64 {
        let mut nll = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let z: Vec<f64> = w
                .iter()
                .map(|wk| wk[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + wk[d])
                .collect();
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
            nll += lse - z[yi];
        }
        let reg: f64 = w
            .iter()
            .flat_map(|wk| wk[..d].iter())
            .map(|v| v * v)
            .sum();
        nll / n as f64 + lambda * reg / (2.0 * n as f64)
    };

    let grad_of = |w: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; d + 1]; k];
        for (xi, &yi) in x.iter().zip(y) {
            let z: Vec<f64> = w
                .iter()
                .map(|wk| wk[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + wk[d])
                .collect();
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for (c, gk) in g.iter_mut().enumerate() {
                let resid = exps[c] / sum - if c == yi { 1.0 } else { 0.0 };
                for (gj, xj) in gk[..d].iter_mut().zip(xi) {
                    *gj += resid * xj;
                }
                gk[d] += resid;
            }
        }
        for (gk, wk) in g.iter_mut().zip(w) {
            for j in 0..d {
                gk[j] = gk[j] / n as f64 + lambda * wk[j] / n as f64;
            }
            gk[d] /= n as f64;
        }
        g
    };

    let mut w = vec![vec![0.0; d + 1]; k];
    let mut loss = loss_of(&w);
    let mut trace = vec![loss];
    let mut eta = 1.0;
    for _ in 0..cfg.max_iter {
        let g = grad_of(&w);
        let gmax = g
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        if gmax < cfg.tol {
            break;
        }
        let gnorm2: f64 = g.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
        // Backtrack until the Armijo decrease condition holds.
        let mut step = eta;
        loop {
            let cand: Vec<Vec<f64>> = w
                .iter()
                .zip(&g)
                .map(|(wk, gk)| wk.iter().zip(gk).map(|(a, b)| a - step * b).collect())
                .collect();
            let cand_loss = loss_of(&cand);
            if cand_loss <= loss - 1e-4 * step * gnorm2 {
                w = cand;
                loss = cand_loss;
                trace.push(loss);
                eta = (step * 2.0).min(1e3);
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                // No descent direction at float precision: converged.
                return Ok(LogisticFit {
                    weights: w,
                    loss_trace: trace,
                });
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::numeric("logistic loss diverged"));
    }
    Ok(LogisticFit {
        weights: w,
        loss_trace: trace,
    })
}

/// One-vs-rest kernel hinge-loss minimization (Pegasos-style stochastic
/// subgradient on the kernel expansion) with a precomputed Gram matrix.
fn fit_rbf(x: &[Vec<f64>], y: &[usize], k: usize, cfg: &RbfConfig) -> ModelKind {
    let n = x.len();
    let d = x[0].len();
    let gamma = cfg.gamma.unwrap_or_else(|| {
        let mut var_sum = 0.0;
        for j in 0..d {
            let mean: f64 = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            var_sum += x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
        }
        let vbar = var_sum / d as f64;
        if vbar > 0.0 {
            1.0 / (d as f64 * vbar)
        } else {
            1.0 / d as f64
        }
    });

    let gram: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            x.iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect();

    let lambda = 1.0 / (cfg.c * n as f64);
    let steps = cfg.max_iter.max(n);
    let mut coef = vec![vec![0.0; n]; k];
    for (class, ck) in coef.iter_mut().enumerate() {
        let mut rng = rng::rng_from(rng::derive(cfg.seed, &format!("ovr-{class}")));
        let sign = |i: usize| if y[i] == class { 1.0 } else { -1.0 };
        // score[i] = Σ_j α_j y_j K[j][i], updated incrementally.
        let mut alpha = vec![0u32; n];
        let mut score = vec![0.0; n];
        for t in 1..=steps {
            let i = rng.gen_range(0..n);
            // Margin condition y_i f(x_i) < 1 with f = score / (λ t).
            if sign(i) * score[i] < lambda * t as f64 {
                alpha[i] += 1;
                let yi = sign(i);
                for (s, kij) in score.iter_mut().zip(&gram[i]) {
                    *s += yi * kij;
                }
            }
        }
        let norm = 1.0 / (lambda * steps as f64);
        for i in 0..n {
            ck[i] = alpha[i] as f64 * sign(i) * norm;
        }
    }
    ModelKind::Rbf {
        gamma,
        support: x.to_vec(),
        coef,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::eval::balanced_accuracy;
    use crate::learn::RowMeta;
    use rand::Rng;

    fn table_from(xs: &[Vec<f64>], labels: &[&str]) -> FeatureTable {
        let names: Vec<String> = (0..xs[0].len()).map(|j| format!("f{j}")).collect();
        let mut t = FeatureTable::new(names);
        for (i, (x, l)) in xs.iter().zip(labels).enumerate() {
            t.push_row(
                RowMeta {
                    id: format!("r{i}"),
                    participant: format!("p{}", i % 3),
                    label_type: l.to_string(),
                    label_gender: String::new(),
                    label_age_group: String::new(),
                },
                x.clone(),
            )
            .unwrap();
        }
        t
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let mut rng = crate::rng::rng_from(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let (cx, label) = if i % 2 == 0 { (-2.0, "a") } else { (2.0, "b") };
            xs.push(vec![
                cx + rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ]);
            ys.push(label);
        }
        (xs, ys)
    }

    fn xor(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let mut rng = crate::rng::rng_from(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let sx = if i % 2 == 0 { 1.0 } else { -1.0 };
            let sy = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            xs.push(vec![
                sx + rng.gen_range(-0.2..0.2),
                sy + rng.gen_range(-0.2..0.2),
            ]);
            ys.push(if sx * sy > 0.0 { "same" } else { "diff" });
        }
        (xs, ys)
    }

    #[test]
    fn logistic_separates_blobs() {
        let (xs, ys) = blobs(200, 1);
        let t = table_from(&xs, &ys);
        let m = train_logistic(&t, "label_type", &LogisticConfig::default()).unwrap();
        let acc = balanced_accuracy(&m.predict(&t).unwrap(), &t.label_type).unwrap();
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn logistic_cannot_separate_xor() {
        let (xs, ys) = xor(400, 2);
        let t = table_from(&xs, &ys);
        let m = train_logistic(&t, "label_type", &LogisticConfig::default()).unwrap();
        let acc = balanced_accuracy(&m.predict(&t).unwrap(), &t.label_type).unwrap();
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
    }

    #[test]
    fn rbf_separates_xor_and_blobs() {
        let (xs, ys) = xor(400, 3);
        let t = table_from(&xs, &ys);
        let m = train_rbf(&t, "label_type", &RbfConfig::default()).unwrap();
        let acc = balanced_accuracy(&m.predict(&t).unwrap(), &t.label_type).unwrap();
        assert!(acc >= 0.95, "xor {acc}");

        let (xs, ys) = blobs(200, 4);
        let t = table_from(&xs, &ys);
        let m = train_rbf(&t, "label_type", &RbfConfig::default()).unwrap();
        let acc = balanced_accuracy(&m.predict(&t).unwrap(), &t.label_type).unwrap();
        assert!(acc >= 0.95, "blobs {acc}");
    }

    #[test]
    fn training_point_prediction_matches_its_label_when_separated() {
        let (xs, ys) = blobs(40, 5);
        let t = table_from(&xs, &ys);
        let m = train_rbf(&t, "label_type", &RbfConfig::default()).unwrap();
        let pred = m.predict(&t).unwrap();
        assert_eq!(pred[0], t.label_type[0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let t = table_from(&[vec![1.0], vec![2.0]], &["a", "a"]);
        assert!(train_logistic(&t, "label_type", &LogisticConfig::default()).is_err());
        assert!(train_rbf(&t, "label_type", &RbfConfig::default()).is_err());
    }

    #[test]
    fn non_finite_features_are_a_numeric_error() {
        let t = table_from(&[vec![1.0], vec![f64::NAN]], &["a", "b"]);
        let err = train_logistic(&t, "label_type", &LogisticConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn logistic_loss_decreases_monotonically() {
        let (xs, ys) = blobs(100, 6);
        let all: Vec<usize> = (0..xs.len()).collect();
        let std = Standardizer::fit(&xs, &all).unwrap();
        let x = std.transform(&xs);
        let y: Vec<usize> = ys.iter().map(|&l| usize::from(l == "b")).collect();
        let fit = fit_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        assert!(fit.loss_trace.len() > 2);
        for w in fit.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rbf_training_is_deterministic_in_the_seed() {
        let (xs, ys) = xor(100, 7);
        let t = table_from(&xs, &ys);
        let cfg = RbfConfig {
            seed: 42,
            ..RbfConfig::default()
        };
        let (a, b) = (
            train_rbf(&t, "label_type", &cfg).unwrap(),
            train_rbf(&t, "label_type", &cfg).unwrap(),
        );
        match (&a.kind, &b.kind) {
            (ModelKind::Rbf { coef: ca, .. }, ModelKind::Rbf { coef: cb, .. }) => {
                assert_eq!(ca, cb)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn model_json_round_trip_preserves_predictions() {
        let (xs, ys) = blobs(60, 8);
        let t = table_from(&xs, &ys);
        let m = train_rbf(&t, "label_type", &RbfConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = ClassifierModel::load(&path).unwrap();
        assert_eq!(m.predict(&t).unwrap(), back.predict(&t).unwrap());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let (xs, ys) = blobs(20, 9);
        let t = table_from(&xs, &ys);
        let m = train_logistic(&t, "label_type", &LogisticConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut v = serde_json::to_value(&m).unwrap();
        v["schema"] = serde_json::Value::String("papillae/model-v999".into());
        std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        let err = ClassifierModel::load(&path).unwrap_err().to_string();
        assert!(err.contains("model-v1"), "{err}");
    }

    #[test]
    fn predict_rejects_mismatched_feature_names() {
        let (xs, ys) = blobs(20, 10);
        let t = table_from(&xs, &ys);
        let m = train_logistic(&t, "label_type", &LogisticConfig::default()).unwrap();
        let renamed = {
            let mut t2 = t.clone();
            t2.feature_names[0] = "other".into();
            t2
        };
        assert!(m.predict(&renamed).is_err());
    }
}
