//! Report statistics: mean/std summaries, difference-to-best-baseline tables
//! and the Friedman rank test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean and sample standard deviation (divisor n-1, 0 for n=1).
pub fn summarize(scores: &[f64]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if scores.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Per-split accuracies of one method, keyed by dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub per_dataset: BTreeMap<String, Vec<f64>>,
}

impl MethodScores {
    pub fn new(method: impl Into<String>) -> Self {
        MethodScores {
            method: method.into(),
            per_dataset: BTreeMap::new(),
        }
    }

    pub fn with(mut self, dataset: impl Into<String>, scores: Vec<f64>) -> Self {
        self.per_dataset.insert(dataset.into(), scores);
        self
    }

    pub fn push(&mut self, dataset: &str, score: f64) {
        self.per_dataset.entry(dataset.to_string()).or_default().push(score);
    }

    pub fn mean(&self, dataset: &str) -> Result<f64> {
        let scores = self
            .per_dataset
            .get(dataset)
            .ok_or_else(|| Error::KeyMismatch(format!("{} has no scores for {dataset}", self.method)))?;
        Ok(summarize(scores)?.0)
    }
}

fn shared_datasets(all: &[&MethodScores]) -> Result<Vec<String>> {
    let first = all.first().ok_or(Error::EmptyInput)?;
    let keys: Vec<String> = first.per_dataset.keys().cloned().collect();
    for m in all {
        if !m.per_dataset.keys().eq(keys.iter()) {
            return Err(Error::KeyMismatch(format!(
                "{} covers a different dataset set than {}",
                m.method, first.method
            )));
        }
    }
    Ok(keys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffTable {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    /// `values[d][m]`: mean of proposed method `m` minus the best baseline
    /// mean on dataset `d`.
    pub values: Vec<Vec<f64>>,
    pub sums: Vec<f64>,
}

impl DiffTable {
    /// Proposed method with the largest column sum; first wins ties.
    pub fn recommended(&self) -> Option<&str> {
        let mut best: Option<usize> = None;
        for (i, s) in self.sums.iter().enumerate() {
            if best.is_none_or(|b| *s > self.sums[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.methods[i].as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset");
        for m in &self.methods {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for (d, row) in self.datasets.iter().zip(&self.values) {
            out.push_str(d);
            for v in row {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out.push_str("sum");
        for s in &self.sums {
            let _ = write!(out, ",{s:.6}");
        }
        out.push('\n');
        let _ = writeln!(out, "recommended,{}", self.recommended().unwrap_or(""));
        out
    }
}

pub fn diff_vs_best(proposed: &[MethodScores], baselines: &[MethodScores]) -> Result<DiffTable> {
    if proposed.is_empty() || baselines.is_empty() {
        return Err(Error::EmptyInput);
    }
    let all: Vec<&MethodScores> = proposed.iter().chain(baselines).collect();
    let datasets = shared_datasets(&all)?;
    let mut values = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let mut best = f64::NEG_INFINITY;
        for b in baselines {
            best = best.max(b.mean(d)?);
        }
        values.push(
            proposed
                .iter()
                .map(|p| Ok(p.mean(d)? - best))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let sums = (0..proposed.len())
        .map(|m| values.iter().map(|row| row[m]).sum())
        .collect();
    Ok(DiffTable {
        datasets,
        methods: proposed.iter().map(|p| p.method.clone()).collect(),
        values,
        sums,
    })
}

/// What forms one Friedman block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FriedmanBlocks {
    /// One block per dataset, scored by the mean over splits.
    #[default]
    DatasetMeans,
    /// One block per (dataset, split).
    PerSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub blocks: usize,
    pub mean_ranks: BTreeMap<String, f64>,
}

impl FriedmanResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        let _ = writeln!(out, "statistic,{:.6}", self.statistic);
        let _ = writeln!(out, "degrees_of_freedom,{}", self.degrees_of_freedom);
        let _ = writeln!(out, "p_value,{:.6e}", self.p_value);
        let _ = writeln!(out, "blocks,{}", self.blocks);
        for (m, r) in &self.mean_ranks {
            let _ = writeln!(out, "mean_rank:{m},{r:.6}");
        }
        out
    }
}

/// Ranks within one block, 1 = largest value, ties share the average rank.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Friedman statistic `12/(N k (k+1)) Σ R_j² − 3N(k+1)` over blocks of `k`
/// scores each, without tie correction. Returns the statistic and the rank
/// sums.
pub fn friedman_statistic(blocks: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let k = blocks.first().ok_or(Error::EmptyInput)?.len();
    let mut rank_sums = vec![0.0; k];
    for b in blocks {
        if b.len() != k {
            return Err(Error::KeyMismatch("blocks of unequal width".into()));
        }
        for (s, r) in rank_sums.iter_mut().zip(rank_descending(b)) {
            *s += r;
        }
    }
    let (n, kf) = (blocks.len() as f64, k as f64);
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let stat = 12.0 / (n * kf * (kf + 1.0)) * ss - 3.0 * n * (kf + 1.0);
    // an all-tied design is exactly zero; keep rounding from going negative
    Ok((stat.max(0.0), rank_sums))
}

pub fn friedman_test(scores: &[MethodScores], blocks: FriedmanBlocks) -> Result<FriedmanResult> {
    let k = scores.len();
    if k < 3 {
        return Err(Error::TooFewMethods(k));
    }
    let refs: Vec<&MethodScores> = scores.iter().collect();
    let datasets = shared_datasets(&refs)?;
    let mut matrix = Vec::new();
    for d in &datasets {
        match blocks {
            FriedmanBlocks::DatasetMeans => {
                matrix.push(scores.iter().map(|m| m.mean(d)).collect::<Result<Vec<_>>>()?);
            }
            FriedmanBlocks::PerSplit => {
                let splits = scores[0].per_dataset[d].len();
                if scores.iter().any(|m| m.per_dataset[d].len() != splits) {
                    return Err(Error::KeyMismatch(format!("unequal split counts on {d}")));
                }
                for s in 0..splits {
                    matrix.push(scores.iter().map(|m| m.per_dataset[d][s]).collect());
                }
            }
        }
    }
    if matrix.len() < 2 {
        return Err(Error::KeyMismatch(format!(
            "friedman test needs at least 2 blocks, got {}",
            matrix.len()
        )));
    }
    let (statistic, rank_sums) = friedman_statistic(&matrix)?;
    let n = matrix.len() as f64;
    Ok(FriedmanResult {
        statistic,
        degrees_of_freedom: k - 1,
        p_value: chi_squared_sf(statistic, (k - 1) as f64),
        blocks: matrix.len(),
        mean_ranks: scores
            .iter()
            .zip(rank_sums)
            .map(|(m, r)| (m.method.clone(), r / n))
            .collect(),
    })
}

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x). Series expansion of P for
/// `x < a + 1`, modified Lentz continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 1000;
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}
