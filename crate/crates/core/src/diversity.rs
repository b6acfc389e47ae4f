//! Majority voting and the good/bad diversity decomposition of the
//! majority-vote zero-one loss.
//!
//! For one input with truth `y` and member outputs `d_1..d_L`:
//!
//! ```text
//! e_maj = e_ind - [maj correct] * mean_t(delta_t) + [maj wrong] * mean_t(delta_t)
//! ```
//!
//! where `e_ind` is the mean member zero-one loss and `delta_t` is member
//! `t`'s disagreement with the majority. Averaging over a finite evaluation
//! set gives the four numbers in [`DecompositionReport`].

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Sign of the summed votes; a zero sum goes to +1.
pub fn majority_vote(outputs: &[Label]) -> Result<Label> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: i64 = outputs.iter().map(|l| i64::from(l.value())).sum();
    Ok(Label::from_sign(sum >= 0))
}

pub fn zero_one_loss(truth: Label, output: Label) -> f64 {
    0.5 * (1.0 - truth.as_f64() * output.as_f64())
}

pub fn disagreement(member_output: Label, ensemble_output: Label) -> f64 {
    0.5 * (1.0 - member_output.as_f64() * ensemble_output.as_f64())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteProfile {
    pub outputs: Vec<Label>,
    pub truth: Label,
}

impl VoteProfile {
    pub fn new(outputs: Vec<Label>, truth: Label) -> Self {
        VoteProfile { outputs, truth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub mean_individual_loss: f64,
    pub good_diversity: f64,
    pub bad_diversity: f64,
    pub ensemble_loss: f64,
}

impl DecompositionReport {
    pub const CSV_HEADER: &'static str =
        "mean_individual_loss,good_diversity,bad_diversity,ensemble_loss";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.mean_individual_loss, self.good_diversity, self.bad_diversity, self.ensemble_loss
        )
    }
}

/// Sample-mean decomposition over `profiles`. All four terms are built from
/// integer counts, so the identity holds up to one rounding per term.
pub fn decompose(profiles: &[VoteProfile]) -> Result<DecompositionReport> {
    let first = profiles.first().ok_or(Error::EmptyInput)?;
    let l = first.outputs.len();
    if l == 0 {
        return Err(Error::EmptyInput);
    }
    let (mut wrong_members, mut good, mut bad, mut wrong_ensemble) = (0u64, 0u64, 0u64, 0u64);
    for p in profiles {
        if p.outputs.len() != l {
            return Err(Error::RaggedProfiles {
                expected: l,
                found: p.outputs.len(),
            });
        }
        let maj = majority_vote(&p.outputs)?;
        let wrong = p.outputs.iter().filter(|&&d| d != p.truth).count() as u64;
        let dissent = p.outputs.iter().filter(|&&d| d != maj).count() as u64;
        wrong_members += wrong;
        if maj == p.truth {
            good += dissent;
        } else {
            bad += dissent;
            wrong_ensemble += 1;
        }
    }
    let n = profiles.len() as f64;
    let ln = n * l as f64;
    Ok(DecompositionReport {
        mean_individual_loss: wrong_members as f64 / ln,
        good_diversity: good as f64 / ln,
        bad_diversity: bad as f64 / ln,
        ensemble_loss: wrong_ensemble as f64 / n,
    })
}
