//! Independent checks of the degradation contract. Shared with the
//! acceptance suite, so this file depends only on the public API.

use mdtk_core::{DegradationId, DegradationOutcome, DegradationParams, Excerpt, Note};

fn overlaps_somewhere(e: &Excerpt) -> bool {
    let notes = e.notes();
    (0..notes.len()).any(|i| {
        (i + 1..notes.len()).any(|j| {
            let (a, b) = (notes[i], notes[j]);
            a.pitch == b.pitch && a.track == b.track && a.onset < b.offset() && b.onset < a.offset()
        })
    })
}

fn multiset_minus(from: &[Note], remove: &[Note]) -> Option<Vec<Note>> {
    let mut rest = from.to_vec();
    for r in remove {
        let i = rest.iter().position(|n| n == r)?;
        rest.remove(i);
    }
    Some(rest)
}

/// Checks every contract clause for `outcome = id(input, params)`.
pub fn check_outcome(
    id: DegradationId,
    input: &Excerpt,
    params: &DegradationParams,
    outcome: &DegradationOutcome,
) -> Result<(), String> {
    let out = &outcome.excerpt;
    let before = &outcome.changed_before;
    let after = &outcome.changed_after;
    let fail = |msg: String| Err(format!("{id}: {msg}"));

    if outcome.label != id {
        return fail(format!("label {}", outcome.label));
    }
    if !out.notes().windows(2).all(|w| w[0] <= w[1]) {
        return fail("result not canonical".into());
    }
    if !overlaps_somewhere(input) && overlaps_somewhere(out) {
        return fail("introduced a same-pitch overlap".into());
    }
    let degenerate_add = id == DegradationId::AddNote && input.max_offset() < params.min_dur_ms;
    if !degenerate_add && out.max_offset() > input.max_offset() {
        return fail(format!("max offset {} > {}", out.max_offset(), input.max_offset()));
    }
    let Some(untouched) = multiset_minus(input.notes(), before) else {
        return fail("changed_before not drawn from the input".into());
    };
    let mut rebuilt = untouched;
    rebuilt.extend_from_slice(after);
    rebuilt.sort();
    if rebuilt != out.notes() {
        return fail("change set does not reproduce the result".into());
    }
    if outcome.replay(input) != *out {
        return fail("replay differs".into());
    }

    let expected_delta: i64 = match id {
        DegradationId::AddNote => 1,
        DegradationId::RemoveNote => -1,
        DegradationId::SplitNote => i64::from(params.num_splits),
        DegradationId::JoinNotes => -(before.len() as i64 - 1),
        _ => 0,
    };
    if out.len() as i64 - input.len() as i64 != expected_delta {
        return fail(format!("note count {} -> {}", input.len(), out.len()));
    }

    let in_pitch_range = |p: u8| (params.min_pitch..=params.max_pitch).contains(&p);
    let dur_ok = |d: u64| d >= params.min_dur_ms && params.max_dur_ms.is_none_or(|m| d <= m);
    let shift_ok = |d: u64| d >= params.min_shift_ms && params.max_shift_ms.is_none_or(|m| d <= m);

    match id {
        DegradationId::PitchShift => {
            let ([b], [a]) = (before.as_slice(), after.as_slice()) else {
                return fail("expected one note changed".into());
            };
            if a.onset != b.onset || a.dur != b.dur || a.track != b.track {
                return fail("pitch shift moved the note".into());
            }
            if a.pitch == b.pitch || !in_pitch_range(a.pitch) {
                return fail(format!("pitch {} -> {}", b.pitch, a.pitch));
            }
        }
        DegradationId::OnsetShift | DegradationId::OffsetShift | DegradationId::TimeShift => {
            let ([b], [a]) = (before.as_slice(), after.as_slice()) else {
                return fail("expected one note changed".into());
            };
            if a.pitch != b.pitch || a.track != b.track {
                return fail("shift changed pitch or track".into());
            }
            let moved = match id {
                DegradationId::OnsetShift => {
                    if a.offset() != b.offset() || !dur_ok(a.dur) {
                        return fail(format!("onset shift {b:?} -> {a:?}"));
                    }
                    a.onset.abs_diff(b.onset)
                }
                DegradationId::OffsetShift => {
                    if a.onset != b.onset || !dur_ok(a.dur) {
                        return fail(format!("offset shift {b:?} -> {a:?}"));
                    }
                    a.offset().abs_diff(b.offset())
                }
                _ => {
                    if a.dur != b.dur {
                        return fail("time shift changed duration".into());
                    }
                    a.onset.abs_diff(b.onset)
                }
            };
            if !shift_ok(moved) {
                return fail(format!("shift of {moved} ms"));
            }
        }
        DegradationId::AddNote => {
            let ([], [a]) = (before.as_slice(), after.as_slice()) else {
                return fail("expected one added note".into());
            };
            if !in_pitch_range(a.pitch) || a.dur < params.min_dur_ms {
                return fail(format!("added {a:?}"));
            }
        }
        DegradationId::RemoveNote => {
            if before.len() != 1 || !after.is_empty() {
                return fail("expected one removed note".into());
            }
        }
        DegradationId::SplitNote => {
            let [b] = before.as_slice() else {
                return fail("expected one split note".into());
            };
            let mut pieces = after.clone();
            pieces.sort();
            let contiguous = pieces.windows(2).all(|w| w[0].offset() == w[1].onset);
            let same_voice = pieces.iter().all(|p| p.pitch == b.pitch && p.track == b.track);
            if pieces.len() != params.num_splits as usize + 1
                || pieces[0].onset != b.onset
                || pieces.last().unwrap().offset() != b.offset()
                || !contiguous
                || !same_voice
                || pieces.iter().any(|p| p.dur < params.min_dur_ms)
            {
                return fail(format!("split {b:?} -> {pieces:?}"));
            }
        }
        DegradationId::JoinNotes => {
            let [a] = after.as_slice() else {
                return fail("expected one joined note".into());
            };
            let mut run = before.clone();
            run.sort();
            let gaps_ok = run
                .windows(2)
                .all(|w| w[1].onset >= w[0].offset() && w[1].onset - w[0].offset() <= params.max_gap_ms);
            let same_voice = run.iter().all(|p| p.pitch == a.pitch && p.track == a.track);
            if run.len() < 2
                || !gaps_ok
                || !same_voice
                || a.onset != run[0].onset
                || a.offset() != run.last().unwrap().offset()
            {
                return fail(format!("join {run:?} -> {a:?}"));
            }
        }
        DegradationId::None => return fail("`none` is not a degradation".into()),
    }
    Ok(())
}
