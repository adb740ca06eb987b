use std::collections::BTreeSet;

use super::{inapplicable, pick_target, rebuild, same_voice, DegradationId, DegradationParams, DegradationResult};
use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

/// Changes the pitch of one random note.
///
/// The new pitch lies in `[min_pitch, max_pitch]`, differs from the old one
/// and is drawn uniformly, or from `interval_weights` around the old pitch
/// (out-of-range intervals dropped, the rest renormalized). With
/// `align_pitch` it must match the pitch of some other note.
pub fn pitch_shift(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    let id = DegradationId::PitchShift;
    if excerpt.is_empty() {
        return Err(inapplicable(id, "excerpt is empty"));
    }
    let candidates: Vec<_> = (0..excerpt.len())
        .map(|i| (i, candidate_pitches(excerpt, i, params)))
        .filter(|(_, c)| !c.is_empty())
        .collect();
    let (target, pitches) =
        pick_target(rng, candidates).ok_or_else(|| inapplicable(id, "no note has a valid replacement pitch"))?;

    let weights: Vec<f64> = pitches.iter().map(|(_, w)| *w).collect();
    let k = rng.weighted(&weights).expect("candidate weights are positive");
    let old = excerpt.notes()[target];
    let new = Note {
        pitch: pitches[k].0,
        ..old
    };
    Ok(rebuild(id, excerpt, &[target], vec![new]))
}

/// Feasible `(pitch, weight)` replacements for note `index`.
pub(crate) fn candidate_pitches(excerpt: &Excerpt, index: usize, params: &DegradationParams) -> Vec<(u8, f64)> {
    let note = excerpt.notes()[index];
    let in_range = |p: i64| (i64::from(params.min_pitch)..=i64::from(params.max_pitch)).contains(&p);

    let mut pitches: Vec<(u8, f64)> = match &params.interval_weights {
        Some(weights) => weights
            .iter()
            .filter(|(&interval, &w)| interval != 0 && w > 0.0)
            .map(|(&interval, &w)| (i64::from(note.pitch) + i64::from(interval), w))
            .filter(|(p, _)| in_range(*p))
            .map(|(p, w)| (p as u8, w))
            .collect(),
        None => (params.min_pitch..=params.max_pitch)
            .filter(|&p| p != note.pitch)
            .map(|p| (p, 1.0))
            .collect(),
    };

    if params.align_pitch {
        let others: BTreeSet<u8> = excerpt
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, n)| n.pitch)
            .collect();
        pitches.retain(|(p, _)| others.contains(p));
    }

    pitches.retain(|&(p, _)| {
        let moved = Note { pitch: p, ..note };
        !same_voice(excerpt, p, note.track, Some(index)).any(|q| q.overlaps(&moved))
    });
    pitches
}
