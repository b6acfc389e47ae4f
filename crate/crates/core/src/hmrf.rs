//! The false-label matrix and its random-field energy.
//!
//! Row `i` of a [`LabelMatrix`] is the candidate labelling for member
//! classifier `i + 1` (member 0 is the original classifier), column `j` is
//! instance `j` of the labelled half. Each cell carries four local energy
//! terms; the global energy is their weighted double sum:
//!
//! * `ind`: fraction of the cell's row that matches the reference labels.
//! * `votes`: how far the column's correct-vote count `c` (the original
//!   classifier's vote included) is from the smallest strict majority `o`.
//! * `bad`: `-(d - o) / o` for `d` reference disagreements in the
//!   `(2q+1) x (2q+1)` window around the cell.
//! * `smooth`: `+beta` for every other row of the column holding a different
//!   label, `-beta` for every one holding the same label.
//!
//! The annealer maximizes the total.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Label>,
}

impl LabelMatrix {
    pub fn filled(rows: usize, cols: usize, value: Label) -> Result<Self> {
        if rows < 2 || cols < 1 {
            return Err(Error::InvalidShape { rows, cols });
        }
        Ok(LabelMatrix {
            rows,
            cols,
            cells: vec![value; rows * cols],
        })
    }

    pub fn from_rows(rows: Vec<Vec<Label>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r < 2 || c < 1 {
            return Err(Error::InvalidShape { rows: r, cols: c });
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: bad.len(),
            });
        }
        Ok(LabelMatrix {
            rows: r,
            cols: c,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Ensemble size implied by the matrix: one member per row plus the
    /// original classifier.
    pub fn ensemble_size(&self) -> usize {
        self.rows + 1
    }

    /// Smallest strict majority of the ensemble, `floor(L/2) + 1`.
    pub fn optimal_votes(&self) -> usize {
        self.ensemble_size() / 2 + 1
    }

    pub fn get(&self, i: usize, j: usize) -> Label {
        self.cells[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Label) {
        self.cells[i * self.cols + j] = value;
    }

    pub fn flip(&mut self, i: usize, j: usize) {
        let c = &mut self.cells[i * self.cols + j];
        *c = c.flipped();
    }

    pub fn row(&self, i: usize) -> &[Label] {
        &self.cells[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vectors(&self) -> impl Iterator<Item = &[Label]> + '_ {
        self.cells.chunks_exact(self.cols)
    }

    pub fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::OutOfBounds {
                row: i,
                col: j,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// One line per row, comma-separated `-1`/`1`, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.row_vectors() {
            let line: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let row = line
                .split(',')
                .map(|t| {
                    Label::parse_token(t)
                        .map(|(l, _)| l)
                        .ok_or_else(|| Error::BadLabel {
                            row: r + 1,
                            token: t.to_string(),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Whose labels count as "correct" inside the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Training labels of the labelled half.
    #[default]
    TrueLabels,
    /// Predictions of the original classifier.
    OrigPredictions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// `-|c - o| / o`: peaks when exactly `o` votes are correct.
    #[default]
    Target,
    /// `(c - o) / o`: grows with the number of correct votes.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyWeights {
    pub ind: f64,
    pub votes: f64,
    pub bad: f64,
    pub smooth: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            ind: 1.0,
            votes: 1.0,
            bad: 1.0,
            smooth: 1.0,
        }
    }
}

impl EnergyWeights {
    pub fn new(ind: f64, votes: f64, bad: f64, smooth: f64) -> Self {
        EnergyWeights {
            ind,
            votes,
            bad,
            smooth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergySettings {
    pub reference_mode: ReferenceMode,
    pub vote_mode: VoteMode,
    pub beta: f64,
    pub window_radius: usize,
    pub weights: EnergyWeights,
}

impl Default for EnergySettings {
    fn default() -> Self {
        EnergySettings {
            reference_mode: ReferenceMode::TrueLabels,
            vote_mode: VoteMode::Target,
            beta: 0.1,
            window_radius: 1,
            weights: EnergyWeights::default(),
        }
    }
}

impl EnergySettings {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius < 1 {
            return Err(Error::InvalidConfig("window_radius must be >= 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be finite and >= 0".into()));
        }
        let w = self.weights;
        if ![w.ind, w.votes, w.bad, w.smooth].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("energy weights must be finite".into()));
        }
        Ok(())
    }
}

/// Everything needed to score a [`LabelMatrix`] besides the matrix itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyContext {
    orig_labels: Vec<Label>,
    true_labels: Vec<Label>,
    reference: Vec<Label>,
    orig_vote: Vec<bool>,
    pub settings: EnergySettings,
}

impl EnergyContext {
    pub fn new(orig_labels: Vec<Label>, true_labels: Vec<Label>, settings: EnergySettings) -> Result<Self> {
        if orig_labels.len() != true_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: orig_labels.len(),
                found: true_labels.len(),
            });
        }
        if orig_labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        settings.validate()?;
        let reference = match settings.reference_mode {
            ReferenceMode::TrueLabels => true_labels.clone(),
            ReferenceMode::OrigPredictions => orig_labels.clone(),
        };
        let orig_vote = orig_labels.iter().zip(&reference).map(|(o, r)| o == r).collect();
        Ok(EnergyContext {
            orig_labels,
            true_labels,
            reference,
            orig_vote,
            settings,
        })
    }

    pub fn orig_labels(&self) -> &[Label] {
        &self.orig_labels
    }

    pub fn true_labels(&self) -> &[Label] {
        &self.true_labels
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    /// Label that counts as correct in column `j`.
    pub fn reference(&self, j: usize) -> Label {
        self.reference[j]
    }

    /// Whether the original classifier's implicit vote in column `j` is a
    /// correct one.
    pub fn orig_vote_counts(&self, j: usize) -> bool {
        self.orig_vote[j]
    }

    fn check(&self, mat: &LabelMatrix) -> Result<()> {
        if mat.cols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: mat.cols(),
            });
        }
        Ok(())
    }

    fn check_cell(&self, mat: &LabelMatrix, i: usize, j: usize) -> Result<()> {
        self.check(mat)?;
        mat.check(i, j)
    }

    fn agrees(&self, mat: &LabelMatrix, i: usize, j: usize) -> bool {
        mat.get(i, j) == self.reference[j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub u_ind: f64,
    pub u_votes: f64,
    pub u_bad: f64,
    pub u_smooth: f64,
    pub total: f64,
}

// Per-cell term values from counts. Both the per-cell operations and the
// global sum go through these so the two paths round identically.

fn ind_value(agree: usize, m: usize) -> f64 {
    agree as f64 / m as f64
}

fn votes_value(correct: usize, o: usize, mode: VoteMode) -> f64 {
    let (c, o) = (correct as f64, o as f64);
    match mode {
        VoteMode::Target => -(c - o).abs() / o,
        VoteMode::PaperLiteral => (c - o) / o,
    }
}

fn bad_value(disagree: usize, o: usize) -> f64 {
    -((disagree as f64 - o as f64) / o as f64)
}

fn smooth_value(differ: usize, same: usize, beta: f64) -> f64 {
    beta * (differ as f64 - same as f64)
}

fn window_bounds(n: usize, center: usize, q: usize) -> (usize, usize) {
    (center.saturating_sub(q), (center + q).min(n - 1))
}

/// Row `i` without `(i, j)`.
pub fn neighborhood_same_classifier(mat: &LabelMatrix, i: usize, j: usize) -> Result<Vec<Cell>> {
    mat.check(i, j)?;
    Ok((0..mat.cols()).filter(|&l| l != j).map(|l| (i, l)).collect())
}

/// Column `j` without `(i, j)`.
pub fn neighborhood_same_instance(mat: &LabelMatrix, i: usize, j: usize) -> Result<Vec<Cell>> {
    mat.check(i, j)?;
    Ok((0..mat.rows()).filter(|&r| r != i).map(|r| (r, j)).collect())
}

/// In-bounds cells within Chebyshev distance `q` of `(i, j)`, excluding it.
/// No wraparound.
pub fn neighborhood_window(mat: &LabelMatrix, i: usize, j: usize, q: usize) -> Result<Vec<Cell>> {
    mat.check(i, j)?;
    let (r0, r1) = window_bounds(mat.rows(), i, q);
    let (c0, c1) = window_bounds(mat.cols(), j, q);
    Ok((r0..=r1)
        .flat_map(|r| (c0..=c1).map(move |l| (r, l)))
        .filter(|&cell| cell != (i, j))
        .collect())
}

pub fn energy_ind(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> Result<f64> {
    ctx.check_cell(mat, i, j)?;
    let agree = (0..mat.cols()).filter(|&l| ctx.agrees(mat, i, l)).count();
    Ok(ind_value(agree, mat.cols()))
}

fn correct_votes(mat: &LabelMatrix, ctx: &EnergyContext, j: usize) -> usize {
    let rows = (0..mat.rows()).filter(|&r| ctx.agrees(mat, r, j)).count();
    rows + usize::from(ctx.orig_vote_counts(j))
}

pub fn energy_votes(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> Result<f64> {
    ctx.check_cell(mat, i, j)?;
    Ok(votes_value(
        correct_votes(mat, ctx, j),
        mat.optimal_votes(),
        ctx.settings.vote_mode,
    ))
}

pub fn energy_bad(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> Result<f64> {
    ctx.check_cell(mat, i, j)?;
    let disagree = neighborhood_window(mat, i, j, ctx.settings.window_radius)?
        .into_iter()
        .filter(|&(r, l)| !ctx.agrees(mat, r, l))
        .count();
    Ok(bad_value(disagree, mat.optimal_votes()))
}

fn column_split(mat: &LabelMatrix, i: usize, j: usize) -> (usize, usize) {
    let own = mat.get(i, j);
    let same = (0..mat.rows()).filter(|&r| r != i && mat.get(r, j) == own).count();
    (mat.rows() - 1 - same, same)
}

pub fn energy_smooth(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> Result<f64> {
    ctx.check_cell(mat, i, j)?;
    let (differ, same) = column_split(mat, i, j);
    Ok(smooth_value(differ, same, ctx.settings.beta))
}

/// Double sum of every per-cell term, in row-major order.
pub fn total_energy(mat: &LabelMatrix, ctx: &EnergyContext) -> Result<EnergyBreakdown> {
    ctx.check(mat)?;
    let (rows, cols) = (mat.rows(), mat.cols());
    let o = mat.optimal_votes();
    let q = ctx.settings.window_radius;

    let row_agree: Vec<usize> = (0..rows)
        .map(|i| (0..cols).filter(|&l| ctx.agrees(mat, i, l)).count())
        .collect();
    let col_votes: Vec<usize> = (0..cols).map(|j| correct_votes(mat, ctx, j)).collect();
    let col_pos: Vec<usize> = (0..cols)
        .map(|j| (0..rows).filter(|&r| mat.get(r, j) == Label::Positive).count())
        .collect();

    // prefix sums of the disagreement indicator for O(1) window counts
    let stride = cols + 1;
    let mut prefix = vec![0usize; (rows + 1) * stride];
    for r in 0..rows {
        for c in 0..cols {
            let miss = usize::from(!ctx.agrees(mat, r, c));
            prefix[(r + 1) * stride + c + 1] =
                miss + prefix[r * stride + c + 1] + prefix[(r + 1) * stride + c] - prefix[r * stride + c];
        }
    }

    let mut e = EnergyBreakdown::default();
    for (i, &agree) in row_agree.iter().enumerate() {
        let (r0, r1) = window_bounds(rows, i, q);
        for j in 0..cols {
            let (c0, c1) = window_bounds(cols, j, q);
            let boxed = prefix[(r1 + 1) * stride + c1 + 1] + prefix[r0 * stride + c0]
                - prefix[r0 * stride + c1 + 1]
                - prefix[(r1 + 1) * stride + c0];
            let disagree = boxed - usize::from(!ctx.agrees(mat, i, j));
            let same_incl = if mat.get(i, j) == Label::Positive {
                col_pos[j]
            } else {
                rows - col_pos[j]
            };
            let same = same_incl - 1;
            e.u_ind += ind_value(agree, cols);
            e.u_votes += votes_value(col_votes[j], o, ctx.settings.vote_mode);
            e.u_bad += bad_value(disagree, o);
            e.u_smooth += smooth_value(rows - 1 - same, same, ctx.settings.beta);
        }
    }
    let w = ctx.settings.weights;
    e.total = w.ind * e.u_ind + w.votes * e.u_votes + w.bad * e.u_bad + w.smooth * e.u_smooth;
    Ok(e)
}

/// Change in total energy if `(i, j)` were flipped. Touches only column `j`
/// and the window around the cell.
pub fn delta_energy(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> Result<f64> {
    ctx.check_cell(mat, i, j)?;
    Ok(delta_unchecked(mat, ctx, i, j))
}

pub(crate) fn delta_unchecked(mat: &LabelMatrix, ctx: &EnergyContext, i: usize, j: usize) -> f64 {
    let (rows, cols) = (mat.rows(), mat.cols());
    let o = mat.optimal_votes();
    let q = ctx.settings.window_radius;
    let was_correct = ctx.agrees(mat, i, j);
    // +1 when the flip makes the cell correct, -1 when it breaks it
    let gain: f64 = if was_correct { -1.0 } else { 1.0 };

    // every cell of row i changes by 1/m
    let d_ind = gain;

    let c = correct_votes(mat, ctx, j);
    let c_new = if was_correct { c - 1 } else { c + 1 };
    let mode = ctx.settings.vote_mode;
    let d_votes = rows as f64 * (votes_value(c_new, o, mode) - votes_value(c, o, mode));

    // every window neighbor sees one more (or one fewer) disagreement
    let (r0, r1) = window_bounds(rows, i, q);
    let (c0, c1) = window_bounds(cols, j, q);
    let neighbors = (r1 - r0 + 1) * (c1 - c0 + 1) - 1;
    let d_bad = gain * neighbors as f64 / o as f64;

    // the cell's own term and each column neighbor's pair term change sign
    let (differ, same) = column_split(mat, i, j);
    let d_smooth = -4.0 * smooth_value(differ, same, ctx.settings.beta);

    let w = ctx.settings.weights;
    w.ind * d_ind + w.votes * d_votes + w.bad * d_bad + w.smooth * d_smooth
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Negative as N, Positive as P};

    fn ctx_for(truth: Vec<Label>, orig: Vec<Label>, settings: EnergySettings) -> EnergyContext {
        EnergyContext::new(orig, truth, settings).unwrap()
    }

    #[test]
    fn same_classifier_neighborhood() {
        let m = LabelMatrix::filled(4, 6, N).unwrap();
        assert_eq!(
            neighborhood_same_classifier(&m, 2, 3).unwrap(),
            vec![(2, 0), (2, 1), (2, 2), (2, 4), (2, 5)]
        );
        let m = LabelMatrix::filled(2, 1, N).unwrap();
        assert!(neighborhood_same_classifier(&m, 0, 0).unwrap().is_empty());
        let m = LabelMatrix::filled(3, 2, N).unwrap();
        assert_eq!(neighborhood_same_classifier(&m, 1, 0).unwrap(), vec![(1, 1)]);
        assert!(neighborhood_same_classifier(&m, 3, 0).is_err());
    }

    #[test]
    fn same_instance_neighborhood() {
        let m = LabelMatrix::filled(4, 6, N).unwrap();
        assert_eq!(
            neighborhood_same_instance(&m, 2, 3).unwrap(),
            vec![(0, 3), (1, 3), (3, 3)]
        );
        let m = LabelMatrix::filled(2, 6, N).unwrap();
        assert_eq!(neighborhood_same_instance(&m, 0, 2).unwrap(), vec![(1, 2)]);
        let m = LabelMatrix::filled(2, 1, N).unwrap();
        assert_eq!(neighborhood_same_instance(&m, 1, 0).unwrap(), vec![(0, 0)]);
        assert!(neighborhood_same_instance(&m, 0, 1).is_err());
    }

    #[test]
    fn window_neighborhood() {
        let m = LabelMatrix::filled(4, 6, N).unwrap();
        assert_eq!(neighborhood_window(&m, 1, 1, 1).unwrap().len(), 8);
        assert_eq!(
            neighborhood_window(&m, 0, 0, 1).unwrap(),
            vec![(0, 1), (1, 0), (1, 1)]
        );
        assert_eq!(neighborhood_window(&m, 2, 2, 10).unwrap().len(), 23);
        assert!(neighborhood_window(&m, 4, 0, 1).is_err());
    }

    #[test]
    fn ind_examples() {
        let truth = vec![P, N, P, N];
        let ctx = ctx_for(truth.clone(), truth.clone(), EnergySettings::default());
        let negated: Vec<Label> = truth.iter().map(|l| l.flipped()).collect();
        let mut mat = LabelMatrix::from_rows(vec![truth.clone(), negated]).unwrap();
        assert_eq!(energy_ind(&mat, &ctx, 0, 2).unwrap(), 1.0);
        assert_eq!(energy_ind(&mat, &ctx, 1, 2).unwrap(), 0.0);
        mat.flip(0, 3);
        assert_eq!(energy_ind(&mat, &ctx, 0, 0).unwrap(), 0.75);
    }

    #[test]
    fn votes_examples() {
        // L = 5, o = 3, one column, D_orig correct
        let settings = EnergySettings::default();
        let ctx = ctx_for(vec![P], vec![P], settings.clone());
        let mat = LabelMatrix::from_rows(vec![vec![P], vec![P], vec![N], vec![N]]).unwrap();
        assert_eq!(energy_votes(&mat, &ctx, 0, 0).unwrap(), 0.0);

        let all = LabelMatrix::filled(4, 1, P).unwrap();
        assert!((energy_votes(&all, &ctx, 0, 0).unwrap() + 2.0 / 3.0).abs() < 1e-15);

        let literal = EnergySettings {
            vote_mode: VoteMode::PaperLiteral,
            ..settings
        };
        let ctx = ctx_for(vec![P], vec![P], literal);
        assert!((energy_votes(&all, &ctx, 0, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn orig_vote_follows_reference_mode() {
        // D_orig wrong on the only column
        let mat = LabelMatrix::filled(2, 1, P).unwrap();
        let ctx = ctx_for(vec![P], vec![N], EnergySettings::default());
        assert!(!ctx.orig_vote_counts(0));
        // L = 3, o = 2, c = 2
        assert_eq!(energy_votes(&mat, &ctx, 0, 0).unwrap(), 0.0);
        let ctx = ctx_for(
            vec![P],
            vec![N],
            EnergySettings {
                reference_mode: ReferenceMode::OrigPredictions,
                ..EnergySettings::default()
            },
        );
        assert!(ctx.orig_vote_counts(0));
        // reference is now N: rows wrong, D_orig right, c = 1
        assert_eq!(energy_votes(&mat, &ctx, 0, 0).unwrap(), -0.5);
    }

    #[test]
    fn bad_examples() {
        // L = 5, o = 3
        let truth = vec![P; 3];
        let ctx = ctx_for(truth.clone(), truth.clone(), EnergySettings::default());
        let mut mat = LabelMatrix::filled(4, 3, P).unwrap();
        assert_eq!(energy_bad(&mat, &ctx, 1, 1).unwrap(), 1.0);
        for &(r, c) in &[(0, 0), (0, 1), (0, 2)] {
            mat.flip(r, c);
        }
        assert_eq!(energy_bad(&mat, &ctx, 1, 1).unwrap(), 0.0);
        for &(r, c) in &[(1, 0), (2, 2)] {
            mat.flip(r, c);
        }
        assert!((energy_bad(&mat, &ctx, 1, 1).unwrap() + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_examples() {
        let ctx = ctx_for(vec![P], vec![P], EnergySettings::default());
        let mut mat = LabelMatrix::filled(4, 1, P).unwrap();
        for i in 0..4 {
            assert!((energy_smooth(&mat, &ctx, i, 0).unwrap() + 0.3).abs() < 1e-15);
        }
        mat.flip(2, 0);
        assert!((energy_smooth(&mat, &ctx, 2, 0).unwrap() - 0.3).abs() < 1e-15);
        let flat = EnergySettings {
            beta: 0.0,
            ..EnergySettings::default()
        };
        let ctx = ctx_for(vec![P], vec![P], flat);
        assert_eq!(energy_smooth(&mat, &ctx, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn total_energy_worked_example() {
        let truth = vec![P, N];
        let ctx = ctx_for(truth.clone(), truth.clone(), EnergySettings::default());
        let mat = LabelMatrix::from_rows(vec![truth.clone(), truth]).unwrap();
        let e = total_energy(&mat, &ctx).unwrap();
        assert!((e.u_ind - 4.0).abs() < 1e-12);
        assert!((e.u_votes + 2.0).abs() < 1e-12);
        assert!((e.u_bad - 4.0).abs() < 1e-12);
        assert!((e.u_smooth + 0.4).abs() < 1e-12);
        assert!((e.total - 5.6).abs() < 1e-12);
    }

    #[test]
    fn negated_weight_negates_contribution() {
        let truth = vec![P, N, N];
        let mat = LabelMatrix::from_rows(vec![vec![P, P, N], vec![N, N, P], vec![P, N, P]]).unwrap();
        let base = EnergySettings::default();
        let e = total_energy(&mat, &ctx_for(truth.clone(), truth.clone(), base.clone())).unwrap();
        let mut flipped = base;
        flipped.weights.smooth = -1.0;
        let f = total_energy(&mat, &ctx_for(truth.clone(), truth, flipped)).unwrap();
        assert!((e.total - f.total - 2.0 * e.u_smooth).abs() < 1e-12);
    }

    #[test]
    fn delta_on_ind_only() {
        let truth = vec![P, N, P, N, P];
        let settings = EnergySettings {
            beta: 0.0,
            weights: EnergyWeights::new(1.0, 0.0, 0.0, 0.0),
            ..EnergySettings::default()
        };
        let ctx = ctx_for(truth.clone(), truth.clone(), settings);
        let mat = LabelMatrix::from_rows(vec![truth.clone(), truth]).unwrap();
        // one row-agreement lost, spread over the m cells of the row
        assert!((delta_energy(&mat, &ctx, 0, 2).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ctx = ctx_for(vec![P, P], vec![P, P], EnergySettings::default());
        let mat = LabelMatrix::filled(2, 3, P).unwrap();
        assert!(total_energy(&mat, &ctx).is_err());
        assert!(delta_energy(&mat, &ctx, 0, 0).is_err());
        assert!(LabelMatrix::filled(1, 3, P).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mat = LabelMatrix::from_rows(vec![vec![P, N, P], vec![N, N, P]]).unwrap();
        assert_eq!(mat.to_csv(), "1,-1,1\n-1,-1,1\n");
        assert_eq!(LabelMatrix::from_csv(&mat.to_csv()).unwrap(), mat);
    }

    fn label() -> impl Strategy<Value = Label> {
        any::<bool>().prop_map(Label::from_sign)
    }

    fn instance() -> impl Strategy<Value = (LabelMatrix, EnergyContext)> {
        (2usize..6, 1usize..8).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(label(), r * c),
                proptest::collection::vec(label(), c),
                proptest::collection::vec(label(), c),
                any::<bool>(),
                any::<bool>(),
                0.0f64..1.0,
                1usize..4,
                proptest::collection::vec(-2.0f64..2.0, 4),
            )
                .prop_map(move |(cells, truth, orig, refm, vm, beta, q, w)| {
                    let rows = cells.chunks(c).map(<[Label]>::to_vec).collect();
                    let settings = EnergySettings {
                        reference_mode: if refm { ReferenceMode::TrueLabels } else { ReferenceMode::OrigPredictions },
                        vote_mode: if vm { VoteMode::Target } else { VoteMode::PaperLiteral },
                        beta,
                        window_radius: q,
                        weights: EnergyWeights::new(w[0], w[1], w[2], w[3]),
                    };
                    (LabelMatrix::from_rows(rows).unwrap(), EnergyContext::new(orig, truth, settings).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn total_is_sum_of_cell_terms((mat, ctx) in instance()) {
            let e = total_energy(&mat, &ctx).unwrap();
            let mut sums = [0.0; 4];
            for i in 0..mat.rows() {
                for j in 0..mat.cols() {
                    sums[0] += energy_ind(&mat, &ctx, i, j).unwrap();
                    sums[1] += energy_votes(&mat, &ctx, i, j).unwrap();
                    sums[2] += energy_bad(&mat, &ctx, i, j).unwrap();
                    sums[3] += energy_smooth(&mat, &ctx, i, j).unwrap();
                }
            }
            prop_assert_eq!([e.u_ind, e.u_votes, e.u_bad, e.u_smooth], sums);
            let w = ctx.settings.weights;
            let combined = w.ind * sums[0] + w.votes * sums[1] + w.bad * sums[2] + w.smooth * sums[3];
            prop_assert!((e.total - combined).abs() < 1e-12);
        }

        #[test]
        fn delta_matches_recompute_and_is_involutive((mat, ctx) in instance(), pick in any::<proptest::sample::Index>()) {
            let cell = pick.index(mat.rows() * mat.cols());
            let (i, j) = (cell / mat.cols(), cell % mat.cols());
            let before = total_energy(&mat, &ctx).unwrap().total;
            let d1 = delta_energy(&mat, &ctx, i, j).unwrap();
            let mut flipped = mat.clone();
            flipped.flip(i, j);
            let after = total_energy(&flipped, &ctx).unwrap().total;
            prop_assert!((after - before - d1).abs() < 1e-12);
            let d2 = delta_energy(&flipped, &ctx, i, j).unwrap();
            prop_assert!((d1 + d2).abs() < 1e-12);
        }

        #[test]
        fn window_is_symmetric(r in 2usize..6, c in 1usize..7, q in 1usize..4, a in any::<proptest::sample::Index>(), b in any::<proptest::sample::Index>()) {
            let mat = LabelMatrix::filled(r, c, P).unwrap();
            let (x, y) = (a.index(r * c), b.index(r * c));
            let (cx, cy) = ((x / c, x % c), (y / c, y % c));
            let fwd = neighborhood_window(&mat, cx.0, cx.1, q).unwrap().contains(&cy);
            let back = neighborhood_window(&mat, cy.0, cy.1, q).unwrap().contains(&cx);
            prop_assert_eq!(fwd, back);
            let row_fwd = neighborhood_same_classifier(&mat, cx.0, cx.1).unwrap().contains(&cy);
            let row_back = neighborhood_same_classifier(&mat, cy.0, cy.1).unwrap().contains(&cx);
            prop_assert_eq!(row_fwd, row_back);
            let col_fwd = neighborhood_same_instance(&mat, cx.0, cx.1).unwrap().contains(&cy);
            let col_back = neighborhood_same_instance(&mat, cy.0, cy.1).unwrap().contains(&cx);
            prop_assert_eq!(col_fwd, col_back);
        }

        #[test]
        fn column_smoothness_ignores_negation((mat, ctx) in instance(), pick in any::<proptest::sample::Index>()) {
            let j = pick.index(mat.cols());
            let column_sum = |m: &LabelMatrix| -> f64 {
                (0..m.rows()).map(|i| energy_smooth(m, &ctx, i, j).unwrap()).sum()
            };
            let mut neg = mat.clone();
            for i in 0..mat.rows() {
                neg.flip(i, j);
            }
            prop_assert!((column_sum(&mat) - column_sum(&neg)).abs() < 1e-12);
        }
    }
}
