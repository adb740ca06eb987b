use std::collections::BTreeMap;

use super::{inapplicable, rebuild, DegradationId, DegradationParams, DegradationResult};
use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

/// Cuts one random note into `num_splits + 1` abutting pieces of the same
/// pitch, each at least `min_dur_ms` long. Cut points are uniform over all
/// valid combinations.
pub fn split_note(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    let id = DegradationId::SplitNote;
    let pieces = u64::from(params.num_splits) + 1;
    let needed = pieces * params.min_dur_ms;
    let candidates: Vec<usize> = (0..excerpt.len())
        .filter(|&i| excerpt.notes()[i].dur >= needed)
        .collect();
    if candidates.is_empty() {
        return Err(inapplicable(id, "no note is long enough to split"));
    }
    let target = candidates[rng.index(candidates.len())];
    let note = excerpt.notes()[target];

    // Stars and bars: piece lengths are min_dur + slack_i with the slacks
    // summing to `spare`; a uniform k-subset of `spare + k` positions picks
    // a uniform composition.
    let k = params.num_splits as usize;
    let spare = note.dur - needed;
    let bars = rng.sample_distinct(spare + k as u64, k);
    let mut cuts = Vec::with_capacity(k);
    let mut prev = 0u64;
    let mut at = note.onset;
    for (i, bar) in bars.into_iter().enumerate() {
        let slack = bar - prev - if i == 0 { 0 } else { 1 };
        at += params.min_dur_ms + slack;
        cuts.push(at);
        prev = bar;
    }
    Ok(rebuild(id, excerpt, &[target], split_at(note, &cuts)))
}

/// Splits `note` at the given absolute times (sorted, strictly inside).
pub(crate) fn split_at(note: Note, cuts: &[u64]) -> Vec<Note> {
    let bounds: Vec<u64> = std::iter::once(note.onset)
        .chain(cuts.iter().copied())
        .chain(std::iter::once(note.offset()))
        .collect();
    bounds
        .windows(2)
        .map(|w| Note {
            onset: w[0],
            dur: w[1] - w[0],
            ..note
        })
        .collect()
}

/// Joins a maximal run of consecutive same-pitch notes, each gap at most
/// `max_gap_ms`, into a single note from the first onset to the last offset.
/// The run is chosen uniformly among all such runs.
pub fn join_notes(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    let runs = joinable_runs(excerpt, params.max_gap_ms);
    if runs.is_empty() {
        return Err(inapplicable(
            DegradationId::JoinNotes,
            "no consecutive same-pitch notes within the gap",
        ));
    }
    let run = &runs[rng.index(runs.len())];
    let first = excerpt.notes()[run[0]];
    let last = excerpt.notes()[*run.last().unwrap()];
    let joined = Note {
        dur: last.offset() - first.onset,
        ..first
    };
    Ok(rebuild(DegradationId::JoinNotes, excerpt, run, vec![joined]))
}

/// Maximal runs (as note indices, length >= 2) of same-pitch, same-track
/// notes whose successive gaps lie in `[0, max_gap]`.
pub(crate) fn joinable_runs(excerpt: &Excerpt, max_gap: u64) -> Vec<Vec<usize>> {
    let mut voices: BTreeMap<(u32, u8), Vec<usize>> = BTreeMap::new();
    for (i, n) in excerpt.iter().enumerate() {
        voices.entry((n.track, n.pitch)).or_default().push(i);
    }
    let notes = excerpt.notes();
    let mut runs = Vec::new();
    for indices in voices.into_values() {
        let mut run = vec![indices[0]];
        for &i in &indices[1..] {
            let prev = notes[*run.last().unwrap()];
            let next = notes[i];
            let joinable = next.onset >= prev.offset() && next.onset - prev.offset() <= max_gap;
            if !joinable {
                if run.len() >= 2 {
                    runs.push(std::mem::take(&mut run));
                }
                run.clear();
            }
            run.push(i);
        }
        if run.len() >= 2 {
            runs.push(run);
        }
    }
    runs.sort();
    runs
}
