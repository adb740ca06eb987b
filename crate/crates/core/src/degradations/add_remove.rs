use std::collections::BTreeSet;

use super::{inapplicable, rebuild, same_voice, DegradationId, DegradationParams, DegradationResult};
use crate::interval::IntervalSet;
use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

/// Adds one random note inside the excerpt's time range.
///
/// A pitch is chosen uniformly among pitches that admit at least one legal
/// placement, then an onset uniformly among that pitch's legal onsets, then
/// a duration uniformly from `[min_dur, min(max_dur, end - onset)]`; if that
/// duration would run into the next same-pitch note it is shortened to end
/// at that note's onset. With `align_dur` the duration is drawn from the
/// existing durations that fit instead. When the excerpt is shorter than
/// `min_dur_ms` (including the empty excerpt) the note is placed at onset 0
/// with duration `min_dur_ms`.
pub fn add_note(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    let id = DegradationId::AddNote;
    let min_dur = params.min_dur_ms as i64;
    let max_dur = params.max_dur_ms.map_or(i64::MAX, |m| m as i64);
    let end = excerpt.max_offset() as i64;
    let track = excerpt.iter().map(|n| n.track).min().unwrap_or(0);

    let pitches: Vec<u8> = if params.align_pitch {
        excerpt
            .iter()
            .map(|n| n.pitch)
            .filter(|p| (params.min_pitch..=params.max_pitch).contains(p))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        (params.min_pitch..=params.max_pitch).collect()
    };

    if end < min_dur {
        let note_at = |pitch| Note {
            onset: 0,
            pitch,
            dur: params.min_dur_ms,
            track,
        };
        let free: Vec<u8> = pitches
            .into_iter()
            .filter(|&p| !same_voice(excerpt, p, track, None).any(|q| q.overlaps(&note_at(p))))
            .collect();
        if free.is_empty() {
            return Err(inapplicable(id, "no free pitch for the added note"));
        }
        let pitch = free[rng.index(free.len())];
        return Ok(rebuild(id, excerpt, &[], vec![note_at(pitch)]));
    }

    let aligned_durs: Vec<i64> = if params.align_dur {
        excerpt
            .iter()
            .map(|n| n.dur as i64)
            .filter(|d| (min_dur..=max_dur).contains(d))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        Vec::new()
    };
    // Shortest duration any placement must accommodate.
    let shortest = if params.align_dur {
        match aligned_durs.first() {
            Some(&d) => d,
            None => return Err(inapplicable(id, "no existing duration satisfies the bounds")),
        }
    } else {
        min_dur
    };
    let existing_onsets: Vec<i64> = excerpt.iter().map(|n| n.onset as i64).collect();

    let feasible: Vec<(u8, IntervalSet)> = pitches
        .into_iter()
        .map(|p| {
            let mut set = IntervalSet::range(0, end - shortest);
            for q in same_voice(excerpt, p, track, None) {
                // inside q, or too close before q to fit `shortest`
                set.remove(q.onset as i64 - shortest + 1, q.offset() as i64 - 1);
            }
            if params.align_onset {
                set = set.retain_points(existing_onsets.iter().copied());
            }
            (p, set)
        })
        .filter(|(_, set)| !set.is_empty())
        .collect();
    if feasible.is_empty() {
        return Err(inapplicable(id, "no legal placement for an added note"));
    }

    let (pitch, onsets) = &feasible[rng.index(feasible.len())];
    let onset = onsets.nth(rng.below(onsets.count())).expect("index within count");
    let room = same_voice(excerpt, *pitch, track, None)
        .map(|q| q.onset as i64)
        .filter(|&q| q > onset)
        .min()
        .unwrap_or(end)
        .min(end);

    let dur = if params.align_dur {
        let fitting: Vec<i64> = aligned_durs.iter().copied().filter(|&d| onset + d <= room).collect();
        fitting[rng.index(fitting.len())]
    } else {
        let hi = max_dur.min(end - onset);
        let drawn = min_dur + rng.below((hi - min_dur + 1) as u64) as i64;
        drawn.min(room - onset)
    };

    let note = Note {
        onset: onset as u64,
        pitch: *pitch,
        dur: dur as u64,
        track,
    };
    Ok(rebuild(id, excerpt, &[], vec![note]))
}

/// Deletes one uniformly chosen note.
pub fn remove_note(excerpt: &Excerpt, _params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    if excerpt.is_empty() {
        return Err(inapplicable(DegradationId::RemoveNote, "excerpt is empty"));
    }
    let target = rng.index(excerpt.len());
    Ok(rebuild(DegradationId::RemoveNote, excerpt, &[target], Vec::new()))
}
