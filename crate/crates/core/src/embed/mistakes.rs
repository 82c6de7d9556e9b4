use serde::Serialize;

use super::{similarity, EmbedError, EmbeddingTable};
use crate::corpus::Derivation;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MistakeThreshold<T> {
    pub t: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport<T> {
    pub threshold: MistakeThreshold<T>,
    pub used: usize,
    /// Derivations with no correct transition.
    pub skipped: usize,
}

/// Cosine of each consecutive step pair.
fn transition_sims<T: Scalar>(d: &Derivation, table: &EmbeddingTable<T>) -> Result<Vec<T>, EmbedError> {
    d.steps.windows(2).map(|w| similarity(table, &w[0], &w[1])).collect()
}

/// Mean over derivations of the smallest similarity among correct
/// transitions. Derivations without a correct transition are skipped.
pub fn compute_threshold<T: Scalar>(
    derivations: &[Derivation],
    table: &EmbeddingTable<T>,
) -> Result<ThresholdReport<T>, EmbedError> {
    let mut minima = Vec::new();
    let mut skipped = 0;
    for d in derivations {
        let sims = transition_sims(d, table)?;
        let min = sims
            .iter()
            .enumerate()
            .filter(|(k, _)| !d.mistakes.contains(&(k + 1)))
            .map(|(_, &s)| s)
            .reduce(T::min);
        match min {
            Some(m) => minima.push(m),
            None => skipped += 1,
        }
    }
    if minima.is_empty() {
        return Err(EmbedError::AllDerivationsSkipped(skipped));
    }
    let sum = minima.iter().fold(T::zero(), |acc, &m| acc + m);
    let t = sum / T::from_usize(minima.len()).expect("count fits");
    Ok(ThresholdReport {
        threshold: MistakeThreshold { t },
        used: minima.len(),
        skipped,
    })
}

/// Flag per transition: `true` when its similarity is strictly below `t`.
/// Entry `k - 1` is the transition into step `k`.
pub fn detect_mistakes<T: Scalar>(
    d: &Derivation,
    table: &EmbeddingTable<T>,
    t: MistakeThreshold<T>,
) -> Result<Vec<bool>, EmbedError> {
    Ok(transition_sims(d, table)?.into_iter().map(|s| s < t.t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MistakeReport {
    pub mistake: ClassScores,
    pub no_mistake: ClassScores,
    pub transitions: usize,
}

/// Confusion counts over transitions, with the mistake class as positive.
#[derive(Debug, Clone, Copy, Default)]
pub struct MistakeScorer {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

fn scores(tp: usize, fp: usize, fn_: usize) -> ClassScores {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

impl MistakeScorer {
    pub fn add(&mut self, d: &Derivation, flags: &[bool]) {
        for (k, &flagged) in flags.iter().enumerate() {
            match (flagged, d.mistakes.contains(&(k + 1))) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => self.tn += 1,
            }
        }
    }

    pub fn report(&self) -> MistakeReport {
        MistakeReport {
            mistake: scores(self.tp, self.fp, self.fn_),
            no_mistake: scores(self.tn, self.fn_, self.fp),
            transitions: self.tp + self.fp + self.fn_ + self.tn,
        }
    }
}
