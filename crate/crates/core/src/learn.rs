//! Feature tables, interpretable classifiers, and evaluation protocols.
//!
//! Everything here works on concrete `f64` tables: the on-disk CSV and
//! model JSON formats are f64, and the statistics do not benefit from the
//! scalar-generic treatment the geometry pipeline gets.
//!
//! A [`FeatureTable`] is the interchange format between featurization and
//! everything downstream: five metadata columns (id, participant, and the
//! three label columns), then feature columns in a fixed, declared order.

mod eval;
mod model;

pub use eval::{
    balanced_accuracy, best_random_split, logo_eval, pca_project, permutation_importance,
    random_split_eval, EvalConfig, EvalReport, ImportanceEntry, PcaProjection,
};
pub use model::{
    train, train_logistic, train_rbf, ClassifierModel, LogisticConfig, ModelConfig, ModelKind,
    RbfConfig,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metadata columns preceding the feature block, in file order.
pub const TABLE_META: [&str; 5] = [
    "id",
    "participant",
    "label_type",
    "label_gender",
    "label_age_group",
];

/// Label columns a model can be trained against.
pub const LABEL_COLUMNS: [&str; 3] = ["label_type", "label_gender", "label_age_group"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub participants: Vec<String>,
    pub label_type: Vec<String>,
    pub label_gender: Vec<String>,
    pub label_age_group: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major feature matrix; every row has `feature_names.len()` values.
    pub rows: Vec<Vec<f64>>,
}

/// One row's metadata, bundled so `push_row` stays readable.
#[derive(Debug, Clone, Default)]
pub struct RowMeta {
    pub id: String,
    pub participant: String,
    pub label_type: String,
    pub label_gender: String,
    pub label_age_group: String,
}

impl FeatureTable {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, meta: RowMeta, values: Vec<f64>) -> Result<()> {
        if values.len() != self.feature_names.len() {
            return Err(Error::invalid(format!(
                "row {} has {} values, table has {} features",
                meta.id,
                values.len(),
                self.feature_names.len()
            )));
        }
        self.ids.push(meta.id);
        self.participants.push(meta.participant);
        self.label_type.push(meta.label_type);
        self.label_gender.push(meta.label_gender);
        self.label_age_group.push(meta.label_age_group);
        self.rows.push(values);
        Ok(())
    }

    /// A label column by its header name.
    pub fn labels(&self, column: &str) -> Result<&[String]> {
        match column {
            "label_type" => Ok(&self.label_type),
            "label_gender" => Ok(&self.label_gender),
            "label_age_group" => Ok(&self.label_age_group),
            "participant" => Ok(&self.participants),
            other => Err(Error::invalid(format!("unknown label column `{other}`"))),
        }
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))
    }

    /// Single feature column, copied out.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.feature_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// New table with only the named features, in the given order.
    pub fn select_features(&self, names: &[&str]) -> Result<FeatureTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.feature_index(n))
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            ids: self.ids.clone(),
            participants: self.participants.clone(),
            label_type: self.label_type.clone(),
            label_gender: self.label_gender.clone(),
            label_age_group: self.label_age_group.clone(),
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        })
    }

    /// New table with only the given rows, in the given order.
    pub fn subset_rows(&self, idx: &[usize]) -> FeatureTable {
        let pick = |v: &[String]| idx.iter().map(|&i| v[i].clone()).collect();
        FeatureTable {
            ids: pick(&self.ids),
            participants: pick(&self.participants),
            label_type: pick(&self.label_type),
            label_gender: pick(&self.label_gender),
            label_age_group: pick(&self.label_age_group),
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Append a feature column (test scaffolding and derived features).
    pub fn add_feature(&mut self, name: impl Into<String>, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::invalid("column length does not match table"));
        }
        self.feature_names.push(name.into());
        for (row, &v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        self.write_csv_to(&mut out)?;
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: &mut impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(vec![]);
        let header: Vec<&str> = TABLE_META
            .iter()
            .copied()
            .chain(self.feature_names.iter().map(|s| s.as_str()))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.ids[i].clone(),
                self.participants[i].clone(),
                self.label_type[i].clone(),
                self.label_gender[i].clone(),
                self.label_age_group[i].clone(),
            ];
            rec.extend(self.rows[i].iter().map(|v| format_float(*v)));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        out.write_all(&bytes)?;
        Ok(())
    }

    /// Parse a feature table, rejecting files whose metadata header does
    /// not match the v1 schema.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let path = path.as_ref();
        let mut rd = csv::Reader::from_path(path)?;
        let header = rd.headers()?.clone();
        if header.len() < TABLE_META.len()
            || TABLE_META.iter().zip(header.iter()).any(|(a, b)| *a != b)
        {
            return Err(Error::invalid(format!(
                "{}: unsupported feature table schema (expected v1 header starting {:?})",
                path.display(),
                TABLE_META
            )));
        }
        let feature_names: Vec<String> = header
            .iter()
            .skip(TABLE_META.len())
            .map(|s| s.to_string())
            .collect();
        let mut table = FeatureTable::new(feature_names);
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::parse(
                    path.display().to_string(),
                    line + 2,
                    "wrong field count",
                ));
            }
            let values: Vec<f64> = rec
                .iter()
                .skip(TABLE_META.len())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::parse(
                            path.display().to_string(),
                            line + 2,
                            format!("not a number: `{s}`"),
                        )
                    })
                })
                .collect::<Result<_>>()?;
            table.push_row(
                RowMeta {
                    id: rec[0].to_string(),
                    participant: rec[1].to_string(),
                    label_type: rec[2].to_string(),
                    label_gender: rec[3].to_string(),
                    label_age_group: rec[4].to_string(),
                },
                values,
            )?;
        }
        Ok(table)
    }

    /// Sorted unique values of a label column.
    pub fn classes(&self, column: &str) -> Result<Vec<String>> {
        let mut cls: Vec<String> = self.labels(column)?.to_vec();
        cls.sort();
        cls.dedup();
        Ok(cls)
    }
}

/// Shortest round-trip float formatting (what `Display` gives for f64).
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Per-feature z-score parameters fitted on a chosen subset of rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fit on `fit_rows` only (population stdev; zero stdev becomes
    /// scale 1 so constant features pass through centred).
    pub fn fit(rows: &[Vec<f64>], fit_rows: &[usize]) -> Result<Standardizer> {
        if fit_rows.is_empty() {
            return Err(Error::invalid("standardizer needs at least one fit row"));
        }
        let d = rows[fit_rows[0]].len();
        let n = fit_rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in fit_rows {
            for (m, v) in mean.iter_mut().zip(&rows[i]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for &i in fit_rows {
            for j in 0..d {
                let dlt = rows[i][j] - mean[j];
                var[j] += dlt * dlt;
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Standardize every row of a table using parameters fitted on
/// `fit_rows` only, returning the transformed table and the parameters.
pub fn standardize(table: &FeatureTable, fit_rows: &[usize]) -> Result<(FeatureTable, Standardizer)> {
    let params = Standardizer::fit(&table.rows, fit_rows)?;
    let mut out = table.clone();
    out.rows = params.transform(&table.rows);
    Ok((out, params))
}

/// Pearson correlation of two equal-length columns; `None` when either
/// is constant.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

/// Drop every feature whose absolute correlation with an earlier kept
/// feature exceeds `threshold`. Constant columns correlate with nothing,
/// so they are kept (with a warning — they carry no signal).
pub fn correlation_filter(table: &FeatureTable, threshold: f64) -> Result<FeatureTable> {
    if table.len() < 2 {
        return Err(Error::invalid("correlation filter needs at least 2 rows"));
    }
    let cols: Vec<Vec<f64>> = (0..table.feature_names.len())
        .map(|j| table.rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..cols.len() {
        if pearson(&cols[j], &cols[j]).is_none() {
            log::warn!(
                "feature `{}` is constant; kept but uninformative",
                table.feature_names[j]
            );
            kept.push(j);
            continue;
        }
        let correlated = kept.iter().any(|&k| {
            pearson(&cols[j], &cols[k]).is_some_and(|r| r.abs() > threshold)
        });
        if !correlated {
            kept.push(j);
        }
    }
    let names: Vec<&str> = kept
        .iter()
        .map(|&j| table.feature_names[j].as_str())
        .collect();
    table.select_features(&names)
}
