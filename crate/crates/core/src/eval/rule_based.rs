use serde::Serialize;

use crate::dataset::LabeledExcerpt;
use crate::degradations::DegradationId;
use crate::error::{Error, Result};
use crate::formats::{from_piano_roll, quantize, to_piano_roll, PianoRollPair};
use crate::note::Excerpt;
use crate::random::RandomSource;

/// Reference predictors that use only training-set statistics. Each
/// probability is turned into a hard decision at 0.5.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleBased {
    /// Fraction of degraded training items.
    pub degraded_rate: f64,
    /// Fraction of degraded frames over all training frames.
    pub frame_rate: f64,
    /// Probability that a clean roll cell is on given the degraded cell is off.
    pub p1_given0: f64,
    /// Probability that a clean roll cell is on given the degraded cell is on.
    pub p1_given1: f64,
    pub frame_ms: u64,
}

impl RuleBased {
    pub fn fit(train: &[LabeledExcerpt], frame_ms: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let degraded = train.iter().filter(|i| i.label != DegradationId::None).count();
        let frames: usize = train.iter().map(|i| i.frame_labels.len()).sum();
        let marked: usize = train
            .iter()
            .map(|i| i.frame_labels.iter().filter(|&&b| b).count())
            .sum();

        // cells[given][clean]
        let mut cells = [[0u64; 2]; 2];
        for item in train {
            let clean = to_piano_roll(&quantize(&item.clean, frame_ms));
            let given = to_piano_roll(&quantize(&item.degraded, frame_ms));
            let row = |r: &PianoRollPair, f: usize| {
                (
                    r.presence.get(f).copied().unwrap_or(0),
                    r.onsets.get(f).copied().unwrap_or(0),
                )
            };
            for f in 0..clean.frames().max(given.frames()) {
                let (cp, co) = row(&clean, f);
                let (gp, go) = row(&given, f);
                for (c, g) in [(cp, gp), (co, go)] {
                    let c11 = u64::from((c & g).count_ones());
                    let c10 = u64::from((c & !g).count_ones());
                    let on = u64::from(g.count_ones());
                    cells[1][1] += c11;
                    cells[1][0] += on - c11;
                    cells[0][1] += c10;
                    cells[0][0] += 128 - on - c10;
                }
            }
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Ok(RuleBased {
            degraded_rate: degraded as f64 / train.len() as f64,
            frame_rate: ratio(marked as u64, frames as u64),
            p1_given0: ratio(cells[0][1], cells[0][0] + cells[0][1]),
            p1_given1: ratio(cells[1][1], cells[1][0] + cells[1][1]),
            frame_ms,
        })
    }

    /// Task 1: the same answer for every excerpt.
    pub fn detect(&self) -> bool {
        self.degraded_rate >= 0.5
    }

    /// Task 2: every class is equally likely, so the argmax is a tie broken
    /// at random.
    pub fn classify(&self, rng: &mut RandomSource) -> DegradationId {
        DegradationId::LABELS[rng.index(DegradationId::LABELS.len())]
    }

    /// Task 3: the same answer for every frame.
    pub fn locate(&self, frames: usize) -> Vec<bool> {
        vec![self.frame_rate >= 0.5; frames]
    }

    /// Task 4: maps every roll cell of the input through the cell
    /// probabilities and decodes the result. Falls back to the quantized
    /// input if the thresholded roll does not decode.
    pub fn correct(&self, given: &Excerpt) -> Excerpt {
        let q = quantize(given, self.frame_ms);
        let roll = to_piano_roll(&q);
        let keep = if self.p1_given1 >= 0.5 { u128::MAX } else { 0 };
        let fill = if self.p1_given0 >= 0.5 { u128::MAX } else { 0 };
        let map = |row: &u128| (row & keep) | (!row & fill);
        let out = PianoRollPair {
            presence: roll.presence.iter().map(map).collect(),
            onsets: roll.onsets.iter().map(map).collect(),
        };
        from_piano_roll(&out, self.frame_ms).unwrap_or(q).to_excerpt()
    }
}
