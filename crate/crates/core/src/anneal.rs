//! Simulated annealing over label matrices, maximizing total energy.
//!
//! Each iteration flips `flips_per_step` distinct random cells and scores the
//! result incrementally. The move is kept when its energy reaches the
//! comparison level (the energy of the last kept state, or the best energy
//! so far when `compare_incumbent` is set) or when `exp((u - level) / T) > r`
//! for a fresh uniform `r`; otherwise the flips are undone. The best state
//! seen is tracked separately and returned. The temperature is multiplied by
//! `quotient` after every iteration and the loop runs while `T >= t_min`.

use std::time::Instant;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::hmrf::{delta_unchecked, total_energy, Cell, EnergyContext, LabelMatrix};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub t_initial: f64,
    pub t_min: f64,
    pub quotient: f64,
    pub flips_per_step: usize,
    pub seed: u64,
    /// Compare candidates against the best state seen instead of the last
    /// kept one.
    pub compare_incumbent: bool,
    /// Recompute the full energy every this many iterations and fail on
    /// drift above 1e-9.
    pub verify_every: Option<u64>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t_initial: 1.0,
            t_min: 1e-4,
            quotient: 0.999,
            flips_per_step: 1,
            seed: 0,
            compare_incumbent: false,
            verify_every: None,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSchedule(msg.to_string()));
        if !(self.t_initial > 0.0 && self.t_initial.is_finite()) {
            return bad("t_initial must be positive");
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_initial) {
            return bad("t_min must lie in (0, t_initial]");
        }
        if !(self.quotient > 0.0 && self.quotient < 1.0) {
            return bad("quotient must lie in (0, 1)");
        }
        if self.flips_per_step < 1 {
            return bad("flips_per_step must be >= 1");
        }
        Ok(())
    }

    /// Temperatures visited by the loop, in order.
    pub fn temperatures(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::successors(Some(self.t_initial), move |t| Some(t * self.quotient))
            .take_while(move |&t| t >= self.t_min)
    }

    pub fn iterations(&self) -> u64 {
        self.temperatures().count() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Every cell -1.
    #[default]
    AllNegative,
    /// Every row a copy of the original classifier's predictions.
    CopyOrig,
    /// I.i.d. uniform labels.
    Random,
}

pub fn initial_state(rows: usize, cols: usize, mode: InitMode, ctx: &EnergyContext, seed: u64) -> Result<LabelMatrix> {
    let mut mat = LabelMatrix::filled(rows, cols, Label::Negative)?;
    if ctx.len() != cols {
        return Err(Error::DimensionMismatch {
            expected: ctx.len(),
            found: cols,
        });
    }
    match mode {
        InitMode::AllNegative => {}
        InitMode::CopyOrig => {
            for i in 0..rows {
                for (j, &l) in ctx.orig_labels().iter().enumerate() {
                    mat.set(i, j, l);
                }
            }
        }
        InitMode::Random => {
            let mut rng = rng_from_seed(seed);
            for i in 0..rows {
                for j in 0..cols {
                    mat.set(i, j, Label::from_sign(rng.random::<bool>()));
                }
            }
        }
    }
    Ok(mat)
}

fn sample_cells(mat: &LabelMatrix, flips: usize, rng: &mut Rng) -> Result<Vec<Cell>> {
    let total = mat.rows() * mat.cols();
    if flips == 0 || flips > total {
        return Err(Error::InvalidSchedule(format!(
            "cannot flip {flips} of {total} cells"
        )));
    }
    Ok(index::sample(rng, total, flips)
        .into_iter()
        .map(|k| (k / mat.cols(), k % mat.cols()))
        .collect())
}

/// Negates `flips` distinct uniformly chosen cells and returns them.
pub fn change_state(mat: &mut LabelMatrix, flips: usize, rng: &mut Rng) -> Result<Vec<Cell>> {
    let cells = sample_cells(mat, flips, rng)?;
    for &(i, j) in &cells {
        mat.flip(i, j);
    }
    Ok(cells)
}

/// Reverts a flip list returned by [`change_state`].
pub fn undo(mat: &mut LabelMatrix, cells: &[Cell]) {
    for &(i, j) in cells {
        mat.flip(i, j);
    }
}

/// Metropolis-style test. `temperature` must be positive.
pub fn accept(u: f64, u_best: f64, temperature: f64, r: f64) -> bool {
    let exponent = ((u - u_best) / temperature).min(0.0);
    exponent.exp() > r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealTraceRow {
    pub iteration: u64,
    pub temperature: f64,
    pub best_energy: f64,
    pub current_energy: f64,
    pub ensemble_accuracy: f64,
    pub mean_abs_correlation: f64,
    pub elapsed_micros: u64,
}

impl AnnealTraceRow {
    pub const CSV_HEADER: &'static str =
        "iteration,temperature,best_energy,current_energy,ensemble_accuracy,mean_abs_correlation,elapsed_micros";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.temperature,
            self.best_energy,
            self.current_energy,
            self.ensemble_accuracy,
            self.mean_abs_correlation,
            self.elapsed_micros
        )
    }
}

pub fn trace_to_csv(rows: &[AnnealTraceRow]) -> String {
    let mut out = String::from(AnnealTraceRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub best_state: LabelMatrix,
    pub best_energy: f64,
    pub iterations: u64,
    /// Label statistics of the starting matrix.
    pub initial_accuracy: f64,
    pub initial_correlation: f64,
    pub trace: Vec<AnnealTraceRow>,
}

/// Running statistics of the label vectors `{orig} ∪ rows`: per-column
/// positive counts for the majority vote, plus per-vector sums and pairwise
/// dot products for Pearson correlations. Updated in O(L) per flip.
#[derive(Debug, Clone)]
struct LabelStats {
    m: usize,
    col_sum: Vec<i64>,
    sums: Vec<i64>,
    dots: Vec<i64>,
    vectors: usize,
}

impl LabelStats {
    fn new(mat: &LabelMatrix, orig: &[Label]) -> Self {
        let vectors = mat.rows() + 1;
        let m = mat.cols();
        let value = |v: usize, j: usize| -> i64 {
            if v == 0 {
                i64::from(orig[j].value())
            } else {
                i64::from(mat.get(v - 1, j).value())
            }
        };
        let col_sum = (0..m).map(|j| (0..vectors).map(|v| value(v, j)).sum()).collect();
        let sums = (0..vectors).map(|v| (0..m).map(|j| value(v, j)).sum()).collect();
        let mut dots = vec![0i64; vectors * vectors];
        for a in 0..vectors {
            for b in a..vectors {
                let d: i64 = (0..m).map(|j| value(a, j) * value(b, j)).sum();
                dots[a * vectors + b] = d;
                dots[b * vectors + a] = d;
            }
        }
        LabelStats {
            m,
            col_sum,
            sums,
            dots,
            vectors,
        }
    }

    /// Records that cell `(i, j)` of `mat` has just been flipped.
    fn flipped(&mut self, mat: &LabelMatrix, orig: &[Label], i: usize, j: usize) {
        let new = i64::from(mat.get(i, j).value());
        let v = i + 1;
        self.col_sum[j] += 2 * new;
        self.sums[v] += 2 * new;
        for other in 0..self.vectors {
            if other == v {
                continue;
            }
            let w = if other == 0 {
                i64::from(orig[j].value())
            } else {
                i64::from(mat.get(other - 1, j).value())
            };
            self.dots[v * self.vectors + other] += 2 * new * w;
            self.dots[other * self.vectors + v] += 2 * new * w;
        }
    }

    fn accuracy(&self, truth: &[Label]) -> f64 {
        let correct = self
            .col_sum
            .iter()
            .zip(truth)
            .filter(|&(&s, &y)| Label::from_sign(s >= 0) == y)
            .count();
        correct as f64 / self.m as f64
    }

    fn mean_abs_correlation(&self) -> f64 {
        let m = self.m as f64;
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..self.vectors {
            for b in a + 1..self.vectors {
                pairs += 1;
                let (sa, sb) = (self.sums[a] as f64, self.sums[b] as f64);
                // entries are +-1, so sum of squares is m
                let var_a = m * m - sa * sa;
                let var_b = m * m - sb * sb;
                if var_a <= 0.0 || var_b <= 0.0 {
                    continue;
                }
                let cov = m * self.dots[a * self.vectors + b] as f64 - sa * sb;
                total += (cov / (var_a * var_b).sqrt()).abs().min(1.0);
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        }
    }
}

/// Majority-vote accuracy against `truth` and mean absolute pairwise Pearson
/// correlation of `{orig} ∪ rows`. Constant vectors contribute correlation 0.
pub fn label_statistics(mat: &LabelMatrix, orig: &[Label], truth: &[Label]) -> (f64, f64) {
    let stats = LabelStats::new(mat, orig);
    (stats.accuracy(truth), stats.mean_abs_correlation())
}

pub type TraceHook<'a> = &'a mut dyn FnMut(&AnnealTraceRow);

pub fn anneal(
    ctx: &EnergyContext,
    schedule: &AnnealSchedule,
    init: LabelMatrix,
    mut hook: Option<TraceHook<'_>>,
) -> Result<AnnealResult> {
    schedule.validate()?;
    if init.cols() != ctx.len() {
        return Err(Error::DimensionMismatch {
            expected: ctx.len(),
            found: init.cols(),
        });
    }
    let cells = init.rows() * init.cols();
    if schedule.flips_per_step > cells {
        return Err(Error::InvalidSchedule(format!(
            "flips_per_step {} exceeds {cells} cells",
            schedule.flips_per_step
        )));
    }
    let mut flips: Vec<Cell>;

    let started = Instant::now();
    let mut rng = rng_from_seed(schedule.seed);
    let orig = ctx.orig_labels();
    let truth = ctx.true_labels();

    let mut current = init;
    let mut u_current = total_energy(&current, ctx)?.total;
    let mut stats = LabelStats::new(&current, orig);
    let initial_accuracy = stats.accuracy(truth);
    let initial_correlation = stats.mean_abs_correlation();

    let mut best = current.clone();
    let mut u_best = u_current;
    let mut best_summary = (initial_accuracy, initial_correlation);

    let mut trace = Vec::new();
    let mut iteration = 0u64;
    let mut temperature = schedule.t_initial;
    while temperature >= schedule.t_min {
        iteration += 1;
        flips = sample_cells(&current, schedule.flips_per_step, &mut rng)?;
        let mut u = u_current;
        for &(i, j) in &flips {
            u += delta_unchecked(&current, ctx, i, j);
            current.flip(i, j);
            stats.flipped(&current, orig, i, j);
        }
        let level = if schedule.compare_incumbent {
            u_best
        } else {
            u_current
        };
        let r: f64 = rng.random();
        if u >= level || accept(u, level, temperature, r) {
            u_current = u;
            if u >= u_best {
                best.clone_from(&current);
                u_best = u;
                best_summary = (stats.accuracy(truth), stats.mean_abs_correlation());
            }
        } else {
            for &(i, j) in flips.iter().rev() {
                current.flip(i, j);
                stats.flipped(&current, orig, i, j);
            }
        }

        if let Some(every) = schedule.verify_every {
            if every > 0 && iteration.is_multiple_of(every) {
                let exact = total_energy(&current, ctx)?.total;
                let drift = (exact - u_current).abs();
                if drift > 1e-9 {
                    return Err(Error::EnergyDrift { iteration, drift });
                }
            }
        }

        let row = AnnealTraceRow {
            iteration,
            temperature,
            best_energy: u_best,
            current_energy: u_current,
            ensemble_accuracy: best_summary.0,
            mean_abs_correlation: best_summary.1,
            elapsed_micros: started.elapsed().as_micros() as u64,
        };
        if let Some(h) = hook.as_mut() {
            h(&row);
        }
        trace.push(row);
        temperature *= schedule.quotient;
    }

    let best_energy = total_energy(&best, ctx)?.total;
    Ok(AnnealResult {
        best_state: best,
        best_energy,
        iterations: iteration,
        initial_accuracy,
        initial_correlation,
        trace,
    })
}
