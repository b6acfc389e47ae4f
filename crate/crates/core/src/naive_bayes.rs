//! Gaussian naive Bayes for two classes.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl ClassStats {
    fn log_score(&self, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut score = self.prior.ln();
        for ((&v, &mu), &var) in x.iter().zip(&self.means).zip(&self.variances) {
            let d = v - mu;
            score -= 0.5 * (ln_2pi + var.ln()) + d * d / (2.0 * var);
        }
        score
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub positive: ClassStats,
    pub negative: ClassStats,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    model: NaiveBayesModel,
}

fn class_stats(d: &Dataset, class: Label, total: usize) -> ClassStats {
    let n = d.feature_count();
    let rows: Vec<&[f64]> = d.rows().filter(|&(_, y)| y == class).map(|(x, _)| x).collect();
    let count = rows.len() as f64;
    let mut means = vec![0.0; n];
    for x in &rows {
        for (m, v) in means.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= count);
    let mut variances = vec![0.0; n];
    for x in &rows {
        for ((s, v), m) in variances.iter_mut().zip(x.iter()).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    variances
        .iter_mut()
        .for_each(|s| *s = (*s / count).max(VARIANCE_FLOOR));
    ClassStats {
        prior: count / total as f64,
        means,
        variances,
    }
}

impl NaiveBayesModel {
    /// Per-class sample means, population variances (floored at
    /// [`VARIANCE_FLOOR`]) and class-frequency priors.
    pub fn train(d: &Dataset) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::NoInstances);
        }
        if !d.has_both_classes() {
            return Err(Error::SingleClass);
        }
        Ok(NaiveBayesModel {
            positive: class_stats(d, Label::Positive, d.len()),
            negative: class_stats(d, Label::Negative, d.len()),
        })
    }

    pub fn feature_count(&self) -> usize {
        self.positive.means.len()
    }

    /// Log-space posterior scores (positive, negative), up to a shared
    /// constant.
    pub fn log_scores(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count(),
                found: x.len(),
            });
        }
        Ok((self.positive.log_score(x), self.negative.log_score(x)))
    }

    /// Argmax class; exact ties go to +1.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let (pos, neg) = self.log_scores(x)?;
        Ok(Label::from_sign(pos >= neg))
    }

    pub fn predict_all(&self, d: &Dataset) -> Result<Vec<Label>> {
        d.rows().map(|(x, _)| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedDocument(format!(
                "naive Bayes model version {}",
                doc.version
            )));
        }
        Ok(doc.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_feature(pos: &[f64], neg: &[f64]) -> Dataset {
        let rows = pos.iter().chain(neg).map(|&v| vec![v]).collect();
        let labels = pos
            .iter()
            .map(|_| Label::Positive)
            .chain(neg.iter().map(|_| Label::Negative))
            .collect();
        Dataset::new("nb", rows, labels).unwrap()
    }

    #[test]
    fn hand_computed_parameters() {
        let m = NaiveBayesModel::train(&one_feature(&[0.0, 2.0], &[10.0, 12.0])).unwrap();
        assert_eq!(m.positive.means, vec![1.0]);
        assert_eq!(m.negative.means, vec![11.0]);
        assert_eq!(m.positive.variances, vec![1.0]);
        assert_eq!(m.negative.variances, vec![1.0]);
        assert_eq!((m.positive.prior, m.negative.prior), (0.5, 0.5));

        assert_eq!(m.predict(&[0.0]).unwrap(), Label::Positive);
        assert_eq!(m.predict(&[11.0]).unwrap(), Label::Negative);
        // exact midpoint
        assert_eq!(m.predict(&[6.0]).unwrap(), Label::Positive);
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_class_hits_floor() {
        let m = NaiveBayesModel::train(&one_feature(&[3.0, 3.0, 3.0], &[1.0, 2.0])).unwrap();
        assert_eq!(m.positive.variances, vec![VARIANCE_FLOOR]);
        let (p, n) = m.log_scores(&[1e6]).unwrap();
        assert!(p.is_finite() && n.is_finite());
    }

    #[test]
    fn single_class_is_rejected() {
        let d = one_feature(&[1.0, 2.0], &[]);
        assert!(matches!(NaiveBayesModel::train(&d), Err(Error::SingleClass)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = NaiveBayesModel::train(&one_feature(&[0.1, 0.7, 1.3], &[5.0, 5.5])).unwrap();
        let back = NaiveBayesModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(NaiveBayesModel::from_json(&bad).is_err());
    }

    proptest! {
        #[test]
        fn nearest_mean_under_equal_priors_and_variances(
            mu_p in proptest::collection::vec(-5.0f64..5.0, 3),
            mu_n in proptest::collection::vec(-5.0f64..5.0, 3),
            var in proptest::collection::vec(0.1f64..4.0, 3),
            x in proptest::collection::vec(-8.0f64..8.0, 3),
        ) {
            let m = NaiveBayesModel {
                positive: ClassStats { prior: 0.5, means: mu_p.clone(), variances: var.clone() },
                negative: ClassStats { prior: 0.5, means: mu_n.clone(), variances: var.clone() },
            };
            let dist = |mu: &[f64]| -> f64 {
                x.iter().zip(mu).zip(&var).map(|((a, b), v)| (a - b) * (a - b) / v).sum()
            };
            let (dp, dn) = (dist(&mu_p), dist(&mu_n));
            prop_assume!((dp - dn).abs() > 1e-9);
            prop_assert_eq!(m.predict(&x).unwrap(), Label::from_sign(dp < dn));
        }

        #[test]
        fn priors_sum_to_one(n_pos in 1usize..30, n_neg in 1usize..30) {
            let pos: Vec<f64> = (0..n_pos).map(|i| i as f64).collect();
            let neg: Vec<f64> = (0..n_neg).map(|i| 100.0 + i as f64).collect();
            let m = NaiveBayesModel::train(&one_feature(&pos, &neg)).unwrap();
            prop_assert!((m.positive.prior + m.negative.prior - 1.0).abs() < 1e-12);
        }

        #[test]
        fn separated_classes_fit_perfectly(
            pos in proptest::collection::vec(-1.0f64..1.0, 2..20),
            neg in proptest::collection::vec(-1.0f64..1.0, 2..20),
        ) {
            // class sigma <= 1, gap between means 10
            let neg: Vec<f64> = neg.iter().map(|v| v + 10.0).collect();
            let d = one_feature(&pos, &neg);
            let m = NaiveBayesModel::train(&d).unwrap();
            for (x, y) in d.rows() {
                let _ = m.log_scores(x).unwrap();
                prop_assert_eq!(m.predict(x).unwrap(), y);
            }
        }
    }
}
