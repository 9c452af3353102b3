//! Evaluation protocols: repeated random splits, leave-one-group-out,
//! permutation feature importance, and the PCA export.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::model::{train, ClassifierModel, ModelConfig};
use crate::learn::{standardize, FeatureTable};
use crate::linalg;
use crate::rng;

use rand::seq::SliceRandom;

/// Unweighted mean of per-class recall over the classes present in
/// `actual`.
pub fn balanced_accuracy(predicted: &[String], actual: &[String]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "prediction length {} does not match label length {}",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("no labels to score against"));
    }
    let mut classes: Vec<&String> = actual.iter().collect();
    classes.sort();
    classes.dedup();
    let mut recall_sum = 0.0;
    for class in &classes {
        let mut total = 0usize;
        let mut hit = 0usize;
        for (p, a) in predicted.iter().zip(actual) {
            if a == *class {
                total += 1;
                if p == a {
                    hit += 1;
                }
            }
        }
        recall_sum += hit as f64 / total as f64;
    }
    Ok(recall_sum / classes.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub test_frac: f64,
    pub repeats: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_frac: 0.2,
            repeats: 50,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    /// Per-fold balanced accuracies, sorted ascending so aggregation is
    /// independent of evaluation order.
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold scores.
    pub stdev: f64,
    pub folds: usize,
    /// LOGO folds dropped because their training half missed a class.
    pub skipped: usize,
}

impl EvalReport {
    fn from_scores(protocol: &str, mut scores: Vec<f64>, skipped: usize) -> Result<EvalReport> {
        if scores.is_empty() {
            return Err(Error::invalid(format!("{protocol}: no usable folds")));
        }
        scores.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Ok(EvalReport {
            protocol: protocol.to_string(),
            folds: scores.len(),
            scores,
            mean,
            stdev: var.sqrt(),
            skipped,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Split `n` rows into (train, test) with a seeded shuffle, retrying (new
/// derived shuffle) until every class in `classes` appears in the training
/// half. At most 100 attempts.
fn covered_split(
    labels: &[String],
    classes: &[String],
    test_len: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    for attempt in 0..100u64 {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut r = rng::rng_from(rng::derive(seed, &format!("shuffle-{attempt}")));
        idx.shuffle(&mut r);
        let (test, train) = idx.split_at(test_len);
        let covered = classes
            .iter()
            .all(|c| train.iter().any(|&i| &labels[i] == c));
        if covered {
            return Ok((train.to_vec(), test.to_vec()));
        }
    }
    Err(Error::invalid(
        "could not draw a training split covering every class in 100 attempts",
    ))
}

/// Train on `train` rows and score balanced accuracy on `test` rows.
fn score_fold(
    table: &FeatureTable,
    label_col: &str,
    train_idx: &[usize],
    test_idx: &[usize],
    model_cfg: &ModelConfig,
) -> Result<(f64, ClassifierModel)> {
    let train_table = table.subset_rows(train_idx);
    let model = train(&train_table, label_col, model_cfg)?;
    let test_table = table.subset_rows(test_idx);
    let pred = model.predict(&test_table)?;
    let score = balanced_accuracy(&pred, test_table.labels(label_col)?)?;
    Ok((score, model))
}

fn one_random_split(
    table: &FeatureTable,
    label_col: &str,
    classes: &[String],
    cfg: &EvalConfig,
    repeat: usize,
) -> Result<(f64, ClassifierModel, Vec<usize>)> {
    let labels = table.labels(label_col)?;
    let n = table.len();
    let test_len = ((n as f64 * cfg.test_frac).round() as usize).clamp(1, n - 1);
    let split_seed = rng::derive(cfg.seed, &format!("split-{repeat}"));
    let (train_idx, test_idx) = covered_split(labels, classes, test_len, split_seed)?;
    let model_cfg = cfg.model.with_seed(rng::derive(cfg.seed, &format!("model-{repeat}")));
    let (score, model) = score_fold(table, label_col, &train_idx, &test_idx, &model_cfg)?;
    Ok((score, model, test_idx))
}

/// Repeated random-split evaluation: `repeats` draws of a
/// `test_frac` holdout, a model trained per draw (standardization fitted
/// on the training half only), balanced accuracy aggregated as mean ±
/// population stdev.
pub fn random_split_eval(
    table: &FeatureTable,
    label_col: &str,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if !(cfg.test_frac > 0.0 && cfg.test_frac < 1.0) {
        return Err(Error::invalid("test_frac must be in (0, 1)"));
    }
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let classes = table.classes(label_col)?;
    let scores: Vec<f64> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| one_random_split(table, label_col, &classes, cfg, r).map(|(s, _, _)| s))
        .collect::<Result<_>>()?;
    EvalReport::from_scores("random-split", scores, 0)
}

/// The trained model and test rows of the best-scoring random split
/// (ties broken toward the earliest repeat). This mirrors reporting
/// feature importance "on the best split".
pub fn best_random_split(
    table: &FeatureTable,
    label_col: &str,
    cfg: &EvalConfig,
) -> Result<(ClassifierModel, Vec<usize>, f64)> {
    let classes = table.classes(label_col)?;
    let folds: Vec<(f64, ClassifierModel, Vec<usize>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| one_random_split(table, label_col, &classes, cfg, r))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, f) in folds.iter().enumerate() {
        if f.0 > folds[best].0 {
            best = i;
        }
    }
    let (score, model, test_idx) = folds.into_iter().nth(best).expect("nonempty folds");
    Ok((model, test_idx, score))
}

/// Leave-one-group-out: one fold per distinct value of `group_col`, the
/// fold's rows as test set, everything else as training set. Folds whose
/// training half does not cover every class are skipped with a warning.
pub fn logo_eval(
    table: &FeatureTable,
    label_col: &str,
    group_col: &str,
    model_cfg: &ModelConfig,
    seed: u64,
) -> Result<EvalReport> {
    let groups = table.classes(group_col)?;
    if groups.len() < 2 {
        return Err(Error::invalid("leave-one-group-out needs at least 2 groups"));
    }
    let classes = table.classes(label_col)?;
    let group_vals = table.labels(group_col)?;
    let labels = table.labels(label_col)?;

    let outcomes: Vec<Option<f64>> = groups
        .par_iter()
        .map(|g| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..table.len()).partition(|&i| &group_vals[i] == g);
            let covered = classes
                .iter()
                .all(|c| train_idx.iter().any(|&i| &labels[i] == c));
            if !covered {
                log::warn!("skipping group `{g}`: training fold lacks a class");
                return Ok(None);
            }
            let model_cfg = model_cfg.with_seed(rng::derive(seed, &format!("logo-{g}")));
            score_fold(table, label_col, &train_idx, &test_idx, &model_cfg)
                .map(|(s, _)| Some(s))
        })
        .collect::<Result<_>>()?;

    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let scores: Vec<f64> = outcomes.into_iter().flatten().collect();
    EvalReport::from_scores("logo", scores, skipped)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Base balanced accuracy minus the mean accuracy over permutations.
    pub importance: f64,
    /// Population stdev of the permuted accuracies.
    pub stdev: f64,
}

/// Permutation feature importance of a trained model on held-out rows,
/// ranked descending. A feature's column is shuffled `n_perm` times; the
/// importance is the mean resulting drop in balanced accuracy.
pub fn permutation_importance(
    model: &ClassifierModel,
    table: &FeatureTable,
    label_col: &str,
    n_perm: usize,
    seed: u64,
) -> Result<Vec<ImportanceEntry>> {
    if table.feature_names != model.feature_names {
        return Err(Error::invalid(
            "feature names do not match the model",
        ));
    }
    if n_perm == 0 {
        return Err(Error::invalid("n_perm must be >= 1"));
    }
    let labels = table.labels(label_col)?;
    let base = balanced_accuracy(&model.predict(table)?, labels)?;

    let mut entries: Vec<ImportanceEntry> = table
        .feature_names
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let scores: Vec<f64> = (0..n_perm)
                .map(|p| {
                    let mut col: Vec<f64> = table.rows.iter().map(|r| r[j]).collect();
                    let mut r = rng::rng_from(rng::derive(seed, &format!("{name}-{p}")));
                    col.shuffle(&mut r);
                    let rows: Vec<Vec<f64>> = table
                        .rows
                        .iter()
                        .zip(&col)
                        .map(|(row, &v)| {
                            let mut row = row.clone();
                            row[j] = v;
                            row
                        })
                        .collect();
                    balanced_accuracy(&model.predict_rows(&rows), labels)
                })
                .collect::<Result<_>>()?;
            let mean = scores.iter().sum::<f64>() / n_perm as f64;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
                / n_perm as f64;
            Ok(ImportanceEntry {
                feature: name.clone(),
                importance: base - mean,
                stdev: var.sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| {
        b.importance
            .partial_cmp(&a.importance)
            .expect("finite importances")
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Row coordinates, one `dims`-vector per table row.
    pub coords: Vec<Vec<f64>>,
    /// Fraction of total variance captured by each kept component.
    pub explained: Vec<f64>,
    /// Principal axes in feature space, one per kept component.
    pub components: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
}

/// Project standardized features onto their top `dims` principal
/// components. Deterministic: each component's largest-magnitude loading
/// is made positive.
pub fn pca_project(table: &FeatureTable, dims: usize) -> Result<PcaProjection> {
    let d = table.feature_names.len();
    let n = table.len();
    if dims == 0 || dims > d {
        return Err(Error::invalid(format!(
            "dims must be in 1..={d} (got {dims})"
        )));
    }
    if n < dims {
        return Err(Error::invalid("fewer rows than requested dimensions"));
    }
    let all: Vec<usize> = (0..n).collect();
    let (std_table, _) = standardize(table, &all)?;
    let x = &std_table.rows;

    let mut cov = vec![vec![0.0; d]; d];
    for row in x {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n as f64;
            cov[j][i] = cov[i][j];
        }
    }

    let eig = linalg::eigh_sym(&cov);
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let mut components = Vec::with_capacity(dims);
    let mut explained = Vec::with_capacity(dims);
    for k in 0..dims {
        let mut axis = eig.vectors[k].clone();
        let lead = (0..d)
            .max_by(|&a, &b| {
                axis[a]
                    .abs()
                    .partial_cmp(&axis[b].abs())
                    .expect("finite loadings")
            })
            .expect("nonempty axis");
        if axis[lead] < 0.0 {
            for v in &mut axis {
                *v = -*v;
            }
        }
        explained.push(if total > 0.0 {
            eig.values[k].max(0.0) / total
        } else {
            0.0
        });
        components.push(axis);
    }

    let coords = x
        .iter()
        .map(|row| {
            components
                .iter()
                .map(|axis| row.iter().zip(axis).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaProjection {
        coords,
        explained,
        components,
        feature_names: table.feature_names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::model::{LogisticConfig, RbfConfig};
    use crate::learn::RowMeta;
    use rand::Rng;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn table_with_groups(
        xs: &[Vec<f64>],
        labels: &[String],
        groups: &[String],
    ) -> FeatureTable {
        let names: Vec<String> = (0..xs[0].len()).map(|j| format!("f{j}")).collect();
        let mut t = FeatureTable::new(names);
        for (i, x) in xs.iter().enumerate() {
            t.push_row(
                RowMeta {
                    id: format!("r{i}"),
                    participant: groups[i].clone(),
                    label_type: labels[i].clone(),
                    label_gender: String::new(),
                    label_age_group: String::new(),
                },
                x.clone(),
            )
            .unwrap();
        }
        t
    }

    fn simple_table(xs: &[Vec<f64>], labels: &[String]) -> FeatureTable {
        let groups: Vec<String> = (0..xs.len()).map(|i| format!("p{}", i % 4)).collect();
        table_with_groups(xs, labels, &groups)
    }

    #[test]
    fn balanced_accuracy_hand_values() {
        let perfect = strings(&["a", "b", "a"]);
        assert_eq!(balanced_accuracy(&perfect, &perfect).unwrap(), 1.0);

        // Class a: 2/2 right. Class b: 1/2 right. Mean = 0.75.
        let actual = strings(&["a", "a", "b", "b"]);
        let pred = strings(&["a", "a", "b", "a"]);
        assert_eq!(balanced_accuracy(&pred, &actual).unwrap(), 0.75);

        // Constant predictor on three balanced classes: recalls 1, 0, 0.
        let actual = strings(&["a", "b", "c", "a", "b", "c"]);
        let pred = strings(&["a", "a", "a", "a", "a", "a"]);
        assert_eq!(balanced_accuracy(&pred, &actual).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn balanced_accuracy_is_relabel_invariant() {
        let actual = strings(&["a", "a", "b", "c", "c", "b"]);
        let pred = strings(&["a", "b", "b", "c", "a", "b"]);
        let swap = |v: &[String]| -> Vec<String> {
            v.iter()
                .map(|s| match s.as_str() {
                    "a" => "z".to_string(),
                    "b" => "a".to_string(),
                    _ => "b".to_string(),
                })
                .collect()
        };
        assert_eq!(
            balanced_accuracy(&pred, &actual).unwrap(),
            balanced_accuracy(&swap(&pred), &swap(&actual)).unwrap()
        );
    }

    #[test]
    fn balanced_accuracy_rejects_length_mismatch() {
        assert!(balanced_accuracy(&strings(&["a"]), &strings(&["a", "b"])).is_err());
    }

    /// Labels follow the sign of the first coordinate, with a margin so
    /// the classes are cleanly separable.
    fn threshold_table(n: usize, seed: u64) -> FeatureTable {
        let mut rng = crate::rng::rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                vec![sign * rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let labels: Vec<String> = xs
            .iter()
            .map(|x| if x[0] > 0.0 { "pos" } else { "neg" }.to_string())
            .collect();
        simple_table(&xs, &labels)
    }

    #[test]
    fn deterministic_label_reaches_near_perfect_split_score() {
        let t = threshold_table(200, 1);
        let cfg = EvalConfig {
            repeats: 10,
            model: ModelConfig::Logistic(LogisticConfig::default()),
            ..EvalConfig::default()
        };
        let rep = random_split_eval(&t, "label_type", &cfg).unwrap();
        assert!(rep.mean >= 0.99, "{}", rep.mean);
    }

    #[test]
    fn coin_flip_labels_score_near_chance() {
        let mut rng = crate::rng::rng_from(2);
        let xs: Vec<Vec<f64>> = (0..240)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels: Vec<String> = (0..240)
            .map(|_| if rng.gen::<bool>() { "h" } else { "t" }.to_string())
            .collect();
        let t = simple_table(&xs, &labels);
        let cfg = EvalConfig {
            repeats: 10,
            model: ModelConfig::Logistic(LogisticConfig::default()),
            ..EvalConfig::default()
        };
        let rep = random_split_eval(&t, "label_type", &cfg).unwrap();
        assert!((rep.mean - 0.5).abs() <= 0.1, "{}", rep.mean);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let t = threshold_table(60, 3);
        let cfg = EvalConfig {
            repeats: 3,
            model: ModelConfig::Rbf(RbfConfig {
                max_iter: 5_000,
                ..RbfConfig::default()
            }),
            ..EvalConfig::default()
        };
        let a = random_split_eval(&t, "label_type", &cfg).unwrap();
        let b = random_split_eval(&t, "label_type", &cfg).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn rare_class_forces_resampling_but_succeeds() {
        // One class with a single member: every usable split must keep it
        // in training, which only resampling can guarantee.
        let mut xs: Vec<Vec<f64>> = (0..39).map(|i| vec![i as f64]).collect();
        let mut labels: Vec<String> = (0..39).map(|_| "a".to_string()).collect();
        xs.push(vec![100.0]);
        labels.push("b".to_string());
        let t = simple_table(&xs, &labels);
        let cfg = EvalConfig {
            repeats: 8,
            model: ModelConfig::Logistic(LogisticConfig::default()),
            ..EvalConfig::default()
        };
        let rep = random_split_eval(&t, "label_type", &cfg).unwrap();
        assert_eq!(rep.folds, 8);
    }

    #[test]
    fn impossible_class_coverage_is_an_error() {
        // 90% test fraction leaves a 1-row training set that cannot cover
        // two classes.
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<String> = (0..10)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string())
            .collect();
        let t = simple_table(&xs, &labels);
        let cfg = EvalConfig {
            test_frac: 0.9,
            repeats: 2,
            model: ModelConfig::Logistic(LogisticConfig::default()),
            ..EvalConfig::default()
        };
        assert!(random_split_eval(&t, "label_type", &cfg).is_err());
    }

    /// Leak table: the only feature is the group identity. Row labels are
    /// the group's coin flip, 20% of them inverted. Random splits reward
    /// memorizing group coins (~0.8); on a held-out group the prediction
    /// is constant across the fold, and a constant prediction on a
    /// two-class fold scores exactly 0.5 balanced accuracy.
    fn leak_table(seed: u64) -> FeatureTable {
        let mut rng = crate::rng::rng_from(seed);
        let n_groups = 12;
        let per_group = 20;
        let mut group_coin: Vec<&str> = (0..n_groups)
            .map(|g| if g % 2 == 0 { "h" } else { "t" })
            .collect();
        group_coin.shuffle(&mut rng);
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for g in 0..n_groups {
            for _ in 0..per_group {
                let flip = rng.gen::<f64>() < 0.2;
                let label = match (group_coin[g], flip) {
                    ("h", false) | ("t", true) => "h",
                    _ => "t",
                };
                xs.push(vec![g as f64]);
                labels.push(label.to_string());
                groups.push(format!("g{g:02}"));
            }
        }
        table_with_groups(&xs, &labels, &groups)
    }

    #[test]
    fn logo_catches_the_group_leak() {
        let t = leak_table(4);
        let model = ModelConfig::Rbf(RbfConfig {
            gamma: Some(8.0),
            max_iter: 20_000,
            ..RbfConfig::default()
        });
        let split = random_split_eval(
            &t,
            "label_type",
            &EvalConfig {
                repeats: 5,
                model: model.clone(),
                ..EvalConfig::default()
            },
        )
        .unwrap();
        let logo = logo_eval(&t, "label_type", "participant", &model, 0).unwrap();
        assert!(split.mean >= 0.7, "random-split {}", split.mean);
        assert!((logo.mean - 0.5).abs() <= 0.1, "logo {}", logo.mean);
        assert!(split.mean - logo.mean >= 0.2);
    }

    #[test]
    fn group_independent_signal_survives_logo() {
        let t = threshold_table(160, 5);
        let model = ModelConfig::Logistic(LogisticConfig::default());
        let rep = logo_eval(&t, "label_type", "participant", &model, 0).unwrap();
        assert!(rep.mean >= 0.99, "{}", rep.mean);
        assert_eq!(rep.skipped, 0);
    }

    #[test]
    fn single_group_is_an_error() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<String> = (0..10)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string())
            .collect();
        let groups: Vec<String> = (0..10).map(|_| "only".to_string()).collect();
        let t = table_with_groups(&xs, &labels, &groups);
        assert!(logo_eval(
            &t,
            "label_type",
            "participant",
            &ModelConfig::Logistic(LogisticConfig::default()),
            0
        )
        .is_err());
    }

    /// Three features: an exact copy of the label, pure noise, and a
    /// constant.
    fn importance_table(seed: u64) -> FeatureTable {
        let mut rng = crate::rng::rng_from(seed);
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..120 {
            let class = i % 2;
            xs.push(vec![
                class as f64,
                rng.gen_range(-1.0..1.0),
                7.5,
            ]);
            labels.push(if class == 0 { "a" } else { "b" }.to_string());
        }
        let mut t = simple_table(&xs, &labels);
        t.feature_names = vec!["label_copy".into(), "noise".into(), "constant".into()];
        t
    }

    #[test]
    fn importance_ranks_label_copy_first() {
        let t = importance_table(6);
        let model =
            crate::learn::model::train_logistic(&t, "label_type", &LogisticConfig::default())
                .unwrap();
        let ranked = permutation_importance(&model, &t, "label_type", 30, 0).unwrap();
        assert_eq!(ranked[0].feature, "label_copy");
        assert!(ranked[0].importance >= 0.3, "{}", ranked[0].importance);
        let by_name = |n: &str| ranked.iter().find(|e| e.feature == n).unwrap();
        assert_eq!(by_name("constant").importance, 0.0);
        assert_eq!(by_name("constant").stdev, 0.0);
        assert!(by_name("noise").importance.abs() <= 0.05);
    }

    #[test]
    fn importance_top_rank_is_seed_stable() {
        let t = importance_table(7);
        let model =
            crate::learn::model::train_logistic(&t, "label_type", &LogisticConfig::default())
                .unwrap();
        for seed in 0..10 {
            let ranked = permutation_importance(&model, &t, "label_type", 10, seed).unwrap();
            assert_eq!(ranked[0].feature, "label_copy", "seed {seed}");
        }
    }

    #[test]
    fn importance_rejects_mismatched_features() {
        let t = importance_table(8);
        let model =
            crate::learn::model::train_logistic(&t, "label_type", &LogisticConfig::default())
                .unwrap();
        let narrowed = t.select_features(&["label_copy", "noise"]).unwrap();
        assert!(permutation_importance(&model, &narrowed, "label_type", 5, 0).is_err());
    }

    #[test]
    fn pca_recovers_a_two_plane() {
        // Five features, all exact linear functions of two latents.
        let mut rng = crate::rng::rng_from(9);
        let mut xs = Vec::new();
        for _ in 0..100 {
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            xs.push(vec![
                u,
                v,
                0.5 * u - v,
                2.0 * u + 0.3 * v,
                -u + 0.9 * v,
            ]);
        }
        let labels: Vec<String> = (0..100).map(|_| "x".to_string()).collect();
        let t = simple_table(&xs, &labels);
        let p = pca_project(&t, 2).unwrap();
        let captured: f64 = p.explained.iter().sum();
        assert!(captured > 0.999, "{captured}");
        // Reconstruction from two components matches the standardized data.
        let all: Vec<usize> = (0..t.len()).collect();
        let (std_t, _) = standardize(&t, &all).unwrap();
        for (row, coord) in std_t.rows.iter().zip(&p.coords) {
            for j in 0..5 {
                let recon: f64 = (0..2).map(|k| coord[k] * p.components[k][j]).sum();
                assert!((recon - row[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pca_on_isotropic_cloud_has_balanced_spectrum() {
        // Irwin–Hall approximation of a Gaussian per coordinate.
        let mut rng = crate::rng::rng_from(10);
        let mut gauss = || -> f64 { (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0 };
        let xs: Vec<Vec<f64>> = (0..5000)
            .map(|_| vec![gauss(), gauss(), gauss()])
            .collect();
        let labels: Vec<String> = (0..xs.len()).map(|_| "x".to_string()).collect();
        let t = simple_table(&xs, &labels);
        let p = pca_project(&t, 3).unwrap();
        let ratio = p.explained[0] / p.explained[2];
        assert!(ratio < 1.3, "{ratio}");
    }

    #[test]
    fn pca_of_a_repeated_point_is_all_zero() {
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vec![2.0, -1.0]).collect();
        let labels: Vec<String> = (0..5).map(|_| "x".to_string()).collect();
        let t = simple_table(&xs, &labels);
        let p = pca_project(&t, 2).unwrap();
        assert!(p.coords.iter().all(|c| c.iter().all(|&v| v == 0.0)));
        assert!(p.explained.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn pca_dims_overflow_is_an_error() {
        let t = threshold_table(10, 11);
        assert!(pca_project(&t, 3).is_err());
    }

    #[test]
    fn best_split_returns_a_usable_model() {
        let t = threshold_table(80, 12);
        let cfg = EvalConfig {
            repeats: 5,
            model: ModelConfig::Logistic(LogisticConfig::default()),
            ..EvalConfig::default()
        };
        let (model, test_idx, score) = best_random_split(&t, "label_type", &cfg).unwrap();
        assert!(!test_idx.is_empty());
        let rep = random_split_eval(&t, "label_type", &cfg).unwrap();
        assert!(score >= rep.scores[rep.scores.len() - 1] - 1e-12);
        let test = t.subset_rows(&test_idx);
        let ba = balanced_accuracy(&model.predict(&test).unwrap(), &test.label_type).unwrap();
        assert_eq!(ba, score);
    }
}
