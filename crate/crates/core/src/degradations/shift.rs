use super::{inapplicable, pick_target, rebuild, same_voice, DegradationId, DegradationParams, DegradationResult};
use crate::interval::IntervalSet;
use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

/// Moves one note's onset, keeping its offset.
pub fn onset_shift(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    shift_with(
        DegradationId::OnsetShift,
        excerpt,
        params,
        rng,
        onset_candidates,
        |n, onset| Note {
            onset,
            dur: n.offset() - onset,
            ..n
        },
    )
}

/// Moves one note's offset, keeping its onset. The new offset never exceeds
/// the excerpt's end.
pub fn offset_shift(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    shift_with(
        DegradationId::OffsetShift,
        excerpt,
        params,
        rng,
        offset_candidates,
        |n, offset| Note {
            dur: offset - n.onset,
            ..n
        },
    )
}

/// Translates one note in time, keeping its duration.
pub fn time_shift(excerpt: &Excerpt, params: &DegradationParams, rng: &mut RandomSource) -> DegradationResult {
    shift_with(
        DegradationId::TimeShift,
        excerpt,
        params,
        rng,
        time_candidates,
        |n, onset| Note { onset, ..n },
    )
}

fn shift_with(
    id: DegradationId,
    excerpt: &Excerpt,
    params: &DegradationParams,
    rng: &mut RandomSource,
    candidates: fn(&Excerpt, usize, &DegradationParams) -> IntervalSet,
    place: fn(Note, u64) -> Note,
) -> DegradationResult {
    if excerpt.is_empty() {
        return Err(inapplicable(id, "excerpt is empty"));
    }
    let feasible: Vec<_> = (0..excerpt.len())
        .map(|i| (i, candidates(excerpt, i, params)))
        .filter(|(_, set)| !set.is_empty())
        .collect();
    let (target, set) =
        pick_target(rng, feasible).ok_or_else(|| inapplicable(id, "no note can be shifted within the constraints"))?;
    let value = set.nth(rng.below(set.count())).expect("index within count") as u64;
    let new = place(excerpt.notes()[target], value);
    Ok(rebuild(id, excerpt, &[target], vec![new]))
}

/// Removes values closer than `min_shift_ms` (and at least 1) to `origin`
/// and, when bounded, further than `max_shift_ms`.
fn apply_shift_bounds(set: &mut IntervalSet, origin: i64, params: &DegradationParams) {
    let min_shift = params.min_shift_ms.max(1) as i64;
    set.remove(origin - min_shift + 1, origin + min_shift - 1);
    if let Some(max) = params.max_shift_ms {
        set.clamp(origin - max as i64, origin + max as i64);
    }
}

fn other_values(excerpt: &Excerpt, index: usize, f: impl Fn(&Note) -> i64) -> Vec<i64> {
    excerpt
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, n)| f(n))
        .collect()
}

/// Feasible new onsets for note `index`.
pub(crate) fn onset_candidates(excerpt: &Excerpt, index: usize, params: &DegradationParams) -> IntervalSet {
    let note = excerpt.notes()[index];
    let (onset, offset) = (note.onset as i64, note.offset() as i64);
    let lo = params.max_dur_ms.map_or(0, |max| (offset - max as i64).max(0));
    let mut set = IntervalSet::range(lo, offset - params.min_dur_ms as i64);
    apply_shift_bounds(&mut set, onset, params);

    for q in same_voice(excerpt, note.pitch, note.track, Some(index)) {
        // [new, offset) meets q unless new >= q.offset
        if (q.onset as i64) < offset {
            set.remove(i64::MIN, q.offset() as i64 - 1);
        }
    }
    if params.align_onset {
        set = set.retain_points(other_values(excerpt, index, |n| n.onset as i64));
    }
    if params.align_dur {
        set = set.retain_points(other_values(excerpt, index, |n| offset - n.dur as i64));
    }
    set
}

/// Feasible new offsets for note `index`.
pub(crate) fn offset_candidates(excerpt: &Excerpt, index: usize, params: &DegradationParams) -> IntervalSet {
    let note = excerpt.notes()[index];
    let (onset, offset) = (note.onset as i64, note.offset() as i64);
    let end = excerpt.max_offset() as i64;
    let hi = params.max_dur_ms.map_or(end, |max| end.min(onset + max as i64));
    let mut set = IntervalSet::range(onset + params.min_dur_ms as i64, hi);
    apply_shift_bounds(&mut set, offset, params);

    for q in same_voice(excerpt, note.pitch, note.track, Some(index)) {
        // [onset, new) meets q unless new <= q.onset
        if onset < q.offset() as i64 {
            set.remove(q.onset as i64 + 1, i64::MAX);
        }
    }
    if params.align_dur {
        set = set.retain_points(other_values(excerpt, index, |n| onset + n.dur as i64));
    }
    set
}

/// Feasible new onsets for translating note `index`.
pub(crate) fn time_candidates(excerpt: &Excerpt, index: usize, params: &DegradationParams) -> IntervalSet {
    let note = excerpt.notes()[index];
    let dur = note.dur as i64;
    let mut set = IntervalSet::range(0, excerpt.max_offset() as i64 - dur);
    apply_shift_bounds(&mut set, note.onset as i64, params);

    for q in same_voice(excerpt, note.pitch, note.track, Some(index)) {
        set.remove(q.onset as i64 - dur + 1, q.offset() as i64 - 1);
    }
    if params.align_onset {
        set = set.retain_points(other_values(excerpt, index, |n| n.onset as i64));
    }
    set
}
