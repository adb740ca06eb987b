#![allow(dead_code)]

pub mod invariants;

use mdtk_core::{fix_overlaps, flatten_tracks, Excerpt, Note};
use proptest::prelude::*;

pub fn n(pitch: u8, onset: u64, dur: u64) -> Note {
    Note::new(pitch, onset, dur, 0).unwrap()
}

pub fn ex(notes: &[Note]) -> Excerpt {
    Excerpt::new(notes.to_vec()).unwrap()
}

pub fn arb_note(max_onset: u64, max_dur: u64, tracks: u32) -> impl Strategy<Value = Note> {
    (0u8..128, 0..max_onset, 1..max_dur, 0..tracks).prop_map(|(pitch, onset, dur, track)| Note {
        onset,
        pitch,
        dur,
        track,
    })
}

/// Arbitrary notes, overlaps allowed.
pub fn arb_excerpt(max_notes: usize) -> impl Strategy<Value = Excerpt> {
    prop::collection::vec(arb_note(5000, 1500, 3), 0..max_notes).prop_map(|v| Excerpt::new(v).unwrap())
}

/// Single-track, overlap-free, in a narrow pitch band so that same-pitch
/// interactions are common.
pub fn arb_clean_excerpt(max_notes: usize) -> impl Strategy<Value = Excerpt> {
    prop::collection::vec((48u8..60, 0u64..4000, 1u64..1200), 0..max_notes).prop_map(|v| {
        let notes = v.into_iter().map(|(p, o, d)| n(p, o, d)).collect();
        fix_overlaps(&flatten_tracks(&Excerpt::new(notes).unwrap()))
    })
}

/// Exhaustive check for same-pitch, same-track overlap.
pub fn has_overlap(e: &Excerpt) -> bool {
    let notes = e.notes();
    (0..notes.len()).any(|i| {
        (0..notes.len()).any(|j| {
            i != j
                && notes[i].pitch == notes[j].pitch
                && notes[i].track == notes[j].track
                && notes[i].onset <= notes[j].onset
                && notes[j].onset < notes[i].offset()
        })
    })
}

pub fn is_canonical(e: &Excerpt) -> bool {
    e.notes().windows(2).all(|w| w[0] <= w[1])
}
