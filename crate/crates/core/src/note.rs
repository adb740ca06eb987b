//! Note and excerpt data model plus the preprocessing primitives every other
//! module builds on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_PITCH: u8 = 127;

/// A single pitched event. Times are integer milliseconds.
///
/// Field order matters: the derived `Ord` is the canonical excerpt ordering
/// `(onset, pitch, dur, track)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Note {
    pub onset: u64,
    pub pitch: u8,
    pub dur: u64,
    pub track: u32,
}

impl Note {
    /// Validating constructor: pitch must be in `0..=127` and `dur >= 1`.
    pub fn new(pitch: u8, onset: u64, dur: u64, track: u32) -> Result<Self> {
        let note = Note {
            onset,
            pitch,
            dur,
            track,
        };
        note.validate(0)?;
        Ok(note)
    }

    pub fn offset(&self) -> u64 {
        self.onset + self.dur
    }

    /// True when `self` and `other` share pitch and track and their
    /// half-open intervals intersect.
    pub fn overlaps(&self, other: &Note) -> bool {
        self.pitch == other.pitch
            && self.track == other.track
            && self.onset < other.offset()
            && other.onset < self.offset()
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        if self.pitch > MAX_PITCH {
            return Err(Error::InvalidNote {
                index,
                reason: format!("pitch {} outside 0..=127", self.pitch),
            });
        }
        if self.dur == 0 {
            return Err(Error::InvalidNote {
                index,
                reason: "duration must be at least 1 ms".into(),
            });
        }
        Ok(())
    }
}

/// An ordered collection of notes. Always kept in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Note>", into = "Vec<Note>")]
pub struct Excerpt {
    notes: Vec<Note>,
}

impl Excerpt {
    /// Validates every note and sorts into canonical order.
    pub fn new(notes: Vec<Note>) -> Result<Self> {
        for (index, note) in notes.iter().enumerate() {
            note.validate(index)?;
        }
        Ok(Self::from_valid(notes))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts without validation; callers guarantee the note invariants.
    pub(crate) fn from_valid(mut notes: Vec<Note>) -> Self {
        notes.sort_unstable();
        Excerpt { notes }
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Note> {
        self.notes.iter()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// End of the excerpt's time range, `max(offset)`, or 0 when empty.
    pub fn max_offset(&self) -> u64 {
        self.notes.iter().map(Note::offset).max().unwrap_or(0)
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    /// Shifts every note earlier by `origin` ms. `origin` must not exceed
    /// the first onset.
    pub fn rebased(&self, origin: u64) -> Excerpt {
        debug_assert!(self.notes.first().is_none_or(|n| n.onset >= origin));
        let notes = self
            .notes
            .iter()
            .map(|n| Note {
                onset: n.onset - origin,
                ..*n
            })
            .collect();
        Excerpt { notes }
    }

    /// Lists same-pitch, same-track pairs `(i, j)` with
    /// `notes[i].onset <= notes[j].onset < notes[i].offset`.
    pub fn overlapping_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (i, a) in self.notes.iter().enumerate() {
            for (j, b) in self.notes.iter().enumerate().skip(i + 1) {
                if b.onset >= a.offset() {
                    break;
                }
                if a.pitch == b.pitch && a.track == b.track {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn has_overlaps(&self) -> bool {
        !self.overlapping_pairs().is_empty()
    }
}

impl TryFrom<Vec<Note>> for Excerpt {
    type Error = Error;

    fn try_from(notes: Vec<Note>) -> Result<Self> {
        Excerpt::new(notes)
    }
}

impl From<Excerpt> for Vec<Note> {
    fn from(excerpt: Excerpt) -> Self {
        excerpt.notes
    }
}

impl<'a> IntoIterator for &'a Excerpt {
    type Item = &'a Note;
    type IntoIter = std::slice::Iter<'a, Note>;

    fn into_iter(self) -> Self::IntoIter {
        self.notes.iter()
    }
}

/// A named excerpt, usually one source file of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusItem {
    pub source_id: String,
    pub excerpt: Excerpt,
}

/// Moves every note onto track 0.
pub fn flatten_tracks(excerpt: &Excerpt) -> Excerpt {
    Excerpt::from_valid(excerpt.iter().map(|n| Note { track: 0, ..*n }).collect())
}

/// Resolves same-pitch overlaps: the earlier note is cut at the later note's
/// onset, and the later note is extended to the larger of the two original
/// offsets. Notes cut down to zero length are dropped.
pub fn fix_overlaps(excerpt: &Excerpt) -> Excerpt {
    let mut groups: BTreeMap<(u32, u8), Vec<Note>> = BTreeMap::new();
    for note in excerpt {
        groups.entry((note.track, note.pitch)).or_default().push(*note);
    }

    let mut fixed = Vec::with_capacity(excerpt.len());
    for notes in groups.into_values() {
        // Already in canonical order within a group.
        let mut iter = notes.into_iter();
        let Some(mut current) = iter.next() else {
            continue;
        };
        for mut next in iter {
            if next.onset < current.offset() {
                let max_offset = current.offset().max(next.offset());
                current.dur = next.onset - current.onset;
                next.dur = max_offset - next.onset;
                if current.dur > 0 {
                    fixed.push(current);
                }
            } else {
                fixed.push(current);
            }
            current = next;
        }
        fixed.push(current);
    }
    Excerpt::from_valid(fixed)
}
