//! The eight note-level degradations.
//!
//! Every degradation takes a canonical excerpt, its parameters and a random
//! source, and either returns the degraded excerpt together with the exact
//! change set, or [`Inapplicable`] when no valid target exists. Sampling is
//! exact: the target note is drawn uniformly among notes with at least one
//! feasible outcome, then the outcome is drawn uniformly (or by weight) from
//! the full feasible set. Results never leave the input's time range and
//! never introduce a same-pitch overlap.

mod add_remove;
mod params;
mod pitch;
mod shift;
mod split_join;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

pub use add_remove::{add_note, remove_note};
pub use params::{DegradationParams, ParamKey};
pub use pitch::pitch_shift;
pub use shift::{offset_shift, onset_shift, time_shift};
pub use split_join::{join_notes, split_note};

/// Label of a degradation; `None` marks an undegraded excerpt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationId {
    None,
    PitchShift,
    OnsetShift,
    OffsetShift,
    TimeShift,
    AddNote,
    RemoveNote,
    SplitNote,
    JoinNotes,
}

impl DegradationId {
    /// The eight real degradations, in their conventional order.
    pub const ALL: [DegradationId; 8] = [
        DegradationId::PitchShift,
        DegradationId::OnsetShift,
        DegradationId::OffsetShift,
        DegradationId::TimeShift,
        DegradationId::AddNote,
        DegradationId::RemoveNote,
        DegradationId::SplitNote,
        DegradationId::JoinNotes,
    ];

    /// All nine class labels, `none` first. Index in this array is the
    /// class index used by classification reports.
    pub const LABELS: [DegradationId; 9] = [
        DegradationId::None,
        DegradationId::PitchShift,
        DegradationId::OnsetShift,
        DegradationId::OffsetShift,
        DegradationId::TimeShift,
        DegradationId::AddNote,
        DegradationId::RemoveNote,
        DegradationId::SplitNote,
        DegradationId::JoinNotes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DegradationId::None => "none",
            DegradationId::PitchShift => "pitch_shift",
            DegradationId::OnsetShift => "onset_shift",
            DegradationId::OffsetShift => "offset_shift",
            DegradationId::TimeShift => "time_shift",
            DegradationId::AddNote => "add_note",
            DegradationId::RemoveNote => "remove_note",
            DegradationId::SplitNote => "split_note",
            DegradationId::JoinNotes => "join_notes",
        }
    }

    /// Class index, `none` = 0.
    pub fn class_index(self) -> usize {
        self as usize
    }

    /// Position within [`DegradationId::ALL`]; `None` for the clean label.
    pub fn degradation_index(self) -> Option<usize> {
        (self as usize).checked_sub(1)
    }

    /// Parameters this degradation reads.
    pub fn params(self) -> &'static [ParamKey] {
        use ParamKey::*;
        match self {
            DegradationId::None | DegradationId::RemoveNote => &[],
            DegradationId::PitchShift => &[MinPitch, MaxPitch, IntervalWeights, AlignPitch],
            DegradationId::OnsetShift => &[MinShiftMs, MaxShiftMs, MinDurMs, MaxDurMs, AlignOnset, AlignDur],
            DegradationId::OffsetShift => &[MinShiftMs, MaxShiftMs, MinDurMs, MaxDurMs, AlignDur],
            DegradationId::TimeShift => &[MinShiftMs, MaxShiftMs, AlignOnset],
            DegradationId::AddNote => &[MinPitch, MaxPitch, MinDurMs, MaxDurMs, AlignPitch, AlignOnset, AlignDur],
            DegradationId::SplitNote => &[MinDurMs, NumSplits],
            DegradationId::JoinNotes => &[MaxGapMs],
        }
    }
}

impl fmt::Display for DegradationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        DegradationId::LABELS
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// A degraded excerpt with its label and exact change set: the output equals
/// the input minus `changed_before` plus `changed_after`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegradationOutcome {
    pub excerpt: Excerpt,
    pub label: DegradationId,
    pub changed_before: Vec<Note>,
    pub changed_after: Vec<Note>,
}

impl DegradationOutcome {
    /// The undegraded outcome.
    pub fn clean(excerpt: &Excerpt) -> Self {
        DegradationOutcome {
            excerpt: excerpt.clone(),
            label: DegradationId::None,
            changed_before: Vec::new(),
            changed_after: Vec::new(),
        }
    }

    /// Applies the change set to `input`; equals `self.excerpt` for every
    /// outcome produced by this module.
    pub fn replay(&self, input: &Excerpt) -> Excerpt {
        let mut notes = input.notes().to_vec();
        for removed in &self.changed_before {
            if let Some(i) = notes.iter().position(|n| n == removed) {
                notes.swap_remove(i);
            }
        }
        notes.extend_from_slice(&self.changed_after);
        Excerpt::from_valid(notes)
    }
}

/// Returned when a degradation has no valid target in the given excerpt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{degradation} cannot be applied: {reason}")]
pub struct Inapplicable {
    pub degradation: DegradationId,
    pub reason: &'static str,
}

pub type DegradationResult = Result<DegradationOutcome, Inapplicable>;

/// Dispatches to the degradation named by `id`.
///
/// Panics if `id` is [`DegradationId::None`].
pub fn apply(
    id: DegradationId,
    excerpt: &Excerpt,
    params: &DegradationParams,
    rng: &mut RandomSource,
) -> DegradationResult {
    match id {
        DegradationId::PitchShift => pitch_shift(excerpt, params, rng),
        DegradationId::OnsetShift => onset_shift(excerpt, params, rng),
        DegradationId::OffsetShift => offset_shift(excerpt, params, rng),
        DegradationId::TimeShift => time_shift(excerpt, params, rng),
        DegradationId::AddNote => add_note(excerpt, params, rng),
        DegradationId::RemoveNote => remove_note(excerpt, params, rng),
        DegradationId::SplitNote => split_note(excerpt, params, rng),
        DegradationId::JoinNotes => join_notes(excerpt, params, rng),
        DegradationId::None => panic!("`none` is a label, not a degradation"),
    }
}

fn inapplicable(degradation: DegradationId, reason: &'static str) -> Inapplicable {
    Inapplicable { degradation, reason }
}

/// Replaces the notes at `removed` (indices into `excerpt`) with `added`.
fn rebuild(label: DegradationId, excerpt: &Excerpt, removed: &[usize], added: Vec<Note>) -> DegradationOutcome {
    let changed_before: Vec<Note> = removed.iter().map(|&i| excerpt.notes()[i]).collect();
    let mut notes: Vec<Note> = excerpt
        .notes()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, n)| *n)
        .collect();
    notes.extend_from_slice(&added);
    DegradationOutcome {
        excerpt: Excerpt::from_valid(notes),
        label,
        changed_before,
        changed_after: added,
    }
}

/// Notes other than `excluded` sharing pitch and track with `note`.
fn same_voice<'a>(
    excerpt: &'a Excerpt,
    pitch: u8,
    track: u32,
    excluded: Option<usize>,
) -> impl Iterator<Item = &'a Note> + 'a {
    excerpt
        .iter()
        .enumerate()
        .filter(move |(i, n)| Some(*i) != excluded && n.pitch == pitch && n.track == track)
        .map(|(_, n)| n)
}

/// Uniform choice among `(target, feasible set)` pairs with a non-empty set.
fn pick_target<T>(rng: &mut RandomSource, candidates: Vec<(usize, T)>) -> Option<(usize, T)> {
    if candidates.is_empty() {
        return None;
    }
    let k = rng.index(candidates.len());
    candidates.into_iter().nth(k)
}
