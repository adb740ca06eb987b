//! Estimates which degradations would reproduce the errors found in a set of
//! transcriptions, given their ground truths.
//!
//! Notes are matched in stages, each stage only considering notes left
//! unmatched by the previous ones:
//!
//! 0. correct: same pitch, onset and offset each within the threshold
//!    (maximum matching, so the correct count only grows with the threshold);
//! 1. `split_note` (one truth note, a run of transcribed notes) and
//!    `join_notes` (a run of truth notes, one transcribed note); the run's
//!    outer onset or offset must match, and a mismatched end adds an
//!    `onset_shift` or `offset_shift`;
//! 2. `offset_shift`: pitch and onset match;
//! 3. `onset_shift`: pitch and offset match;
//! 4. `time_shift`: same pitch and the two notes overlap in time;
//! 5. `pitch_shift`: onset matches, plus an `offset_shift` if the offset
//!    does not;
//! 6. leftover transcribed notes are `add_note`, leftover truth notes
//!    `remove_note`.
//!
//! Within a stage, notes are visited in ascending onset order (ties by
//! pitch) and take their closest unmatched candidate.

use std::cmp::Reverse;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::degradations::DegradationId;
use crate::error::{Error, Result};
use crate::matching::maximum_matching;
use crate::note::{Excerpt, Note};

pub const DEFAULT_THRESHOLD_MS: u64 = 50;
/// Longest run considered when detecting splits and joins.
pub const MAX_RUN: usize = 8;

/// What a note was matched as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assignment {
    Correct,
    Degraded(DegradationId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// One entry per transcribed note, in canonical order.
    pub transcription: Vec<Assignment>,
    /// One entry per ground-truth note, in canonical order.
    pub ground_truth: Vec<Assignment>,
    /// Number of correct note pairs.
    pub correct: u64,
    /// Degradation event counts, indexed like [`DegradationId::ALL`].
    pub counts: [u64; 8],
}

impl MatchResult {
    pub fn count(&self, id: DegradationId) -> u64 {
        id.degradation_index().map_or(self.correct, |i| self.counts[i])
    }
}

/// Measured (or prescribed) degradation mix.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    /// Fraction per degradation, indexed like [`DegradationId::ALL`].
    pub proportions: [f64; 8],
    /// Fraction of correct notes.
    pub clean: f64,
    pub counts: [u64; 8],
    pub clean_count: u64,
    pub threshold_ms: u64,
}

impl ErrorProfile {
    /// Builds fractions from counts: each count over
    /// `clean_count + sum(counts)`. With no events at all the profile is
    /// entirely clean.
    pub fn from_counts(counts: [u64; 8], clean_count: u64, threshold_ms: u64) -> Self {
        let total = clean_count + counts.iter().sum::<u64>();
        let (proportions, clean) = if total == 0 {
            ([0.0; 8], 1.0)
        } else {
            (
                counts.map(|c| c as f64 / total as f64),
                clean_count as f64 / total as f64,
            )
        };
        ErrorProfile {
            proportions,
            clean,
            counts,
            clean_count,
            threshold_ms,
        }
    }

    pub fn proportion(&self, id: DegradationId) -> f64 {
        id.degradation_index().map_or(self.clean, |i| self.proportions[i])
    }

    /// Share of each degradation among all degradation events.
    pub fn degradation_shares(&self) -> [f64; 8] {
        let total: f64 = self.proportions.iter().sum();
        if total > 0.0 {
            self.proportions.map(|p| p / total)
        } else {
            [0.0; 8]
        }
    }
}

/// Matches one transcription against its ground truth.
pub fn match_notes(transcription: &Excerpt, ground_truth: &Excerpt, threshold_ms: u64) -> MatchResult {
    Matcher::new(transcription.notes(), ground_truth.notes(), threshold_ms).run()
}

/// Aggregates [`match_notes`] over `(transcription, ground_truth)` pairs.
pub fn measure_errors(pairs: &[(Excerpt, Excerpt)], threshold_ms: u64) -> Result<ErrorProfile> {
    if pairs.is_empty() {
        return Err(Error::Empty("no transcription/ground-truth pairs"));
    }
    let mut counts = [0u64; 8];
    let mut correct = 0;
    for (transcription, truth) in pairs {
        let m = match_notes(transcription, truth, threshold_ms);
        correct += m.correct;
        for (total, c) in counts.iter_mut().zip(m.counts) {
            *total += c;
        }
    }
    Ok(ErrorProfile::from_counts(counts, correct, threshold_ms))
}

struct Matcher<'a> {
    trans: &'a [Note],
    truth: &'a [Note],
    thr: u64,
    trans_assign: Vec<Option<Assignment>>,
    truth_assign: Vec<Option<Assignment>>,
    correct: u64,
    counts: [u64; 8],
}

fn diff(a: u64, b: u64) -> u64 {
    a.abs_diff(b)
}

fn intersects(a: &Note, b: &Note) -> bool {
    a.onset < b.offset() && b.onset < a.offset()
}

fn overlap_len(a: &Note, b: &Note) -> u64 {
    a.offset().min(b.offset()).saturating_sub(a.onset.max(b.onset))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Truth,
    Trans,
}

impl<'a> Matcher<'a> {
    fn new(trans: &'a [Note], truth: &'a [Note], thr: u64) -> Self {
        Matcher {
            trans,
            truth,
            thr,
            trans_assign: vec![None; trans.len()],
            truth_assign: vec![None; truth.len()],
            correct: 0,
            counts: [0; 8],
        }
    }

    fn run(mut self) -> MatchResult {
        self.match_correct();
        self.match_runs();
        self.match_pairs(DegradationId::OffsetShift);
        self.match_pairs(DegradationId::OnsetShift);
        self.match_pairs(DegradationId::TimeShift);
        self.match_pairs(DegradationId::PitchShift);

        for a in self.trans_assign.iter_mut().filter(|a| a.is_none()) {
            *a = Some(Assignment::Degraded(DegradationId::AddNote));
            self.counts[DegradationId::AddNote.degradation_index().unwrap()] += 1;
        }
        for a in self.truth_assign.iter_mut().filter(|a| a.is_none()) {
            *a = Some(Assignment::Degraded(DegradationId::RemoveNote));
            self.counts[DegradationId::RemoveNote.degradation_index().unwrap()] += 1;
        }
        MatchResult {
            transcription: self.trans_assign.into_iter().map(Option::unwrap).collect(),
            ground_truth: self.truth_assign.into_iter().map(Option::unwrap).collect(),
            correct: self.correct,
            counts: self.counts,
        }
    }

    fn bump(&mut self, id: DegradationId) {
        self.counts[id.degradation_index().expect("real degradation")] += 1;
    }

    fn match_correct(&mut self) {
        let thr = self.thr;
        let adjacency: Vec<Vec<usize>> = self
            .truth
            .iter()
            .map(|g| {
                let mut cands: Vec<usize> = (0..self.trans.len())
                    .filter(|&j| {
                        let t = &self.trans[j];
                        t.pitch == g.pitch && diff(t.onset, g.onset) <= thr && diff(t.offset(), g.offset()) <= thr
                    })
                    .collect();
                cands.sort_by_key(|&j| {
                    let t = &self.trans[j];
                    (diff(t.onset, g.onset) + diff(t.offset(), g.offset()), j)
                });
                cands
            })
            .collect();
        for (i, m) in maximum_matching(&adjacency, self.trans.len()).into_iter().enumerate() {
            if let Some(j) = m {
                self.truth_assign[i] = Some(Assignment::Correct);
                self.trans_assign[j] = Some(Assignment::Correct);
                self.correct += 1;
            }
        }
    }

    /// Split and join detection.
    fn match_runs(&mut self) {
        let mut anchors: Vec<(u64, u8, usize, Side)> = self
            .truth
            .iter()
            .enumerate()
            .map(|(i, n)| (n.onset, n.pitch, i, Side::Truth))
            .chain(
                self.trans
                    .iter()
                    .enumerate()
                    .map(|(j, n)| (n.onset, n.pitch, j, Side::Trans)),
            )
            .collect();
        anchors.sort_by_key(|&(onset, pitch, idx, side)| (onset, pitch, side == Side::Trans, idx));

        for (_, _, idx, side) in anchors {
            let (single, many, single_assign, many_assign, id) = match side {
                Side::Truth => (
                    self.truth,
                    self.trans,
                    &self.truth_assign,
                    &self.trans_assign,
                    DegradationId::SplitNote,
                ),
                Side::Trans => (
                    self.trans,
                    self.truth,
                    &self.trans_assign,
                    &self.truth_assign,
                    DegradationId::JoinNotes,
                ),
            };
            if single_assign[idx].is_some() {
                continue;
            }
            let Some((run, start_ok, end_ok)) = best_run(&single[idx], many, many_assign, self.thr) else {
                continue;
            };
            let label = Some(Assignment::Degraded(id));
            match side {
                Side::Truth => {
                    self.truth_assign[idx] = label;
                    run.iter().for_each(|&j| self.trans_assign[j] = label);
                }
                Side::Trans => {
                    self.trans_assign[idx] = label;
                    run.iter().for_each(|&j| self.truth_assign[j] = label);
                }
            }
            // runs longer than MAX_RUN count as several events
            for _ in 0..run.len().div_ceil(MAX_RUN) {
                self.bump(id);
            }
            if !start_ok {
                self.bump(DegradationId::OnsetShift);
            }
            if !end_ok {
                self.bump(DegradationId::OffsetShift);
            }
        }
    }

    /// One-to-one stages, ground-truth notes in canonical order.
    fn match_pairs(&mut self, id: DegradationId) {
        let thr = self.thr;
        for i in 0..self.truth.len() {
            if self.truth_assign[i].is_some() {
                continue;
            }
            let g = self.truth[i];
            let candidates = (0..self.trans.len()).filter(|&j| self.trans_assign[j].is_none());
            let best = match id {
                DegradationId::OffsetShift => candidates
                    .filter(|&j| self.trans[j].pitch == g.pitch && diff(self.trans[j].onset, g.onset) <= thr)
                    .min_by_key(|&j| {
                        let t = self.trans[j];
                        (diff(t.onset, g.onset), diff(t.offset(), g.offset()), j)
                    }),
                DegradationId::OnsetShift => candidates
                    .filter(|&j| self.trans[j].pitch == g.pitch && diff(self.trans[j].offset(), g.offset()) <= thr)
                    .min_by_key(|&j| {
                        let t = self.trans[j];
                        (diff(t.offset(), g.offset()), diff(t.onset, g.onset), j)
                    }),
                DegradationId::TimeShift => candidates
                    .filter(|&j| self.trans[j].pitch == g.pitch && intersects(&self.trans[j], &g))
                    .min_by_key(|&j| {
                        let t = self.trans[j];
                        (Reverse(overlap_len(&t, &g)), diff(t.onset, g.onset), j)
                    }),
                DegradationId::PitchShift => candidates
                    .filter(|&j| self.trans[j].pitch != g.pitch && diff(self.trans[j].onset, g.onset) <= thr)
                    .min_by_key(|&j| {
                        let t = self.trans[j];
                        (
                            diff(t.onset, g.onset),
                            diff(t.offset(), g.offset()),
                            t.pitch.abs_diff(g.pitch),
                            j,
                        )
                    }),
                _ => unreachable!("not a pairwise stage"),
            };
            let Some(j) = best else { continue };
            let label = Some(Assignment::Degraded(id));
            self.truth_assign[i] = label;
            self.trans_assign[j] = label;
            self.bump(id);
            if id == DegradationId::PitchShift && diff(self.trans[j].offset(), g.offset()) > thr {
                self.bump(DegradationId::OffsetShift);
            }
        }
    }
}

/// Best run of unassigned `many` notes that together replace `single`:
/// same pitch, consecutive among the unassigned notes of that pitch, each
/// overlapping `single`, with the outer onset or offset within `thr`.
/// Prefers both ends matching, then longer runs, then earlier runs. A run
/// of the maximum search length is extended through any further
/// overlapping notes.
fn best_run(
    single: &Note,
    many: &[Note],
    assigned: &[Option<Assignment>],
    thr: u64,
) -> Option<(Vec<usize>, bool, bool)> {
    let voice: Vec<usize> = (0..many.len())
        .filter(|&j| assigned[j].is_none() && many[j].pitch == single.pitch)
        .collect();
    let mut best: Option<(usize, usize, bool, bool)> = None;
    let rank = |r: &(usize, usize, bool, bool)| (r.2 && r.3, r.1);
    for start in 0..voice.len() {
        for len in 2..=MAX_RUN.min(voice.len() - start) {
            let run = &voice[start..start + len];
            if !run.iter().all(|&j| intersects(&many[j], single)) {
                break;
            }
            let start_ok = diff(many[run[0]].onset, single.onset) <= thr;
            let end_ok = diff(many[run[len - 1]].offset(), single.offset()) <= thr;
            if !(start_ok || end_ok) {
                continue;
            }
            let candidate = (start, len, start_ok, end_ok);
            if best.as_ref().is_none_or(|b| rank(&candidate) > rank(b)) {
                best = Some(candidate);
            }
        }
    }
    let (start, mut len, start_ok, mut end_ok) = best?;
    if len == MAX_RUN && !end_ok {
        while start + len < voice.len() && intersects(&many[voice[start + len]], single) {
            len += 1;
        }
        end_ok = diff(many[voice[start + len - 1]].offset(), single.offset()) <= thr;
    }
    Some((voice[start..start + len].to_vec(), start_ok, end_ok))
}

#[derive(Serialize)]
struct ProfileCounts {
    pitch_shift: u64,
    onset_shift: u64,
    offset_shift: u64,
    time_shift: u64,
    add_note: u64,
    remove_note: u64,
    split_note: u64,
    join_notes: u64,
    clean: u64,
}

#[derive(Serialize)]
struct ProfileFile {
    pitch_shift: f64,
    onset_shift: f64,
    offset_shift: f64,
    time_shift: f64,
    add_note: f64,
    remove_note: f64,
    split_note: f64,
    join_notes: f64,
    clean: f64,
    counts: ProfileCounts,
    threshold_ms: u64,
}

pub fn profile_to_json(profile: &ErrorProfile) -> String {
    let [p0, p1, p2, p3, p4, p5, p6, p7] = profile.proportions;
    let [c0, c1, c2, c3, c4, c5, c6, c7] = profile.counts;
    let file = ProfileFile {
        pitch_shift: p0,
        onset_shift: p1,
        offset_shift: p2,
        time_shift: p3,
        add_note: p4,
        remove_note: p5,
        split_note: p6,
        join_notes: p7,
        clean: profile.clean,
        counts: ProfileCounts {
            pitch_shift: c0,
            onset_shift: c1,
            offset_shift: c2,
            time_shift: c3,
            add_note: c4,
            remove_note: c5,
            split_note: c6,
            join_notes: c7,
            clean: profile.clean_count,
        },
        threshold_ms: profile.threshold_ms,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("profile serializes");
    s.push('\n');
    s
}

pub fn write_profile(profile: &ErrorProfile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, profile_to_json(profile)).map_err(|e| Error::io(path, e))
}

pub fn read_profile(path: impl AsRef<Path>) -> Result<ErrorProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    profile_from_json(&text)
}

/// Parses a profile, rejecting missing, unknown or mistyped keys by name.
pub fn profile_from_json(text: &str) -> Result<ErrorProfile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Profile {
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Profile {
        field: "<document>".into(),
        message: "expected a JSON object".into(),
    })?;

    let keys: Vec<&str> = DegradationId::ALL.iter().map(|d| d.name()).chain(["clean"]).collect();
    check_keys(obj, &[&keys[..], &["counts", "threshold_ms"]].concat(), "")?;

    let fraction = |key: &str| -> Result<f64> {
        let v = obj[key].as_f64().ok_or_else(|| Error::Profile {
            field: key.into(),
            message: "expected a number".into(),
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Profile {
                field: key.into(),
                message: format!("{v} outside [0, 1]"),
            });
        }
        Ok(v)
    };
    let counts_obj = obj["counts"].as_object().ok_or_else(|| Error::Profile {
        field: "counts".into(),
        message: "expected an object".into(),
    })?;
    check_keys(counts_obj, &keys, "counts.")?;
    let count = |key: &str| -> Result<u64> {
        counts_obj[key].as_u64().ok_or_else(|| Error::Profile {
            field: format!("counts.{key}"),
            message: "expected a nonnegative integer".into(),
        })
    };
    let threshold_ms = obj["threshold_ms"].as_u64().ok_or_else(|| Error::Profile {
        field: "threshold_ms".into(),
        message: "expected a nonnegative integer".into(),
    })?;

    let mut proportions = [0.0; 8];
    let mut counts = [0u64; 8];
    for (i, id) in DegradationId::ALL.iter().enumerate() {
        proportions[i] = fraction(id.name())?;
        counts[i] = count(id.name())?;
    }
    Ok(ErrorProfile {
        proportions,
        clean: fraction("clean")?,
        counts,
        clean_count: count("clean")?,
        threshold_ms,
    })
}

fn check_keys(obj: &Map<String, Value>, expected: &[&str], prefix: &str) -> Result<()> {
    if let Some(missing) = expected.iter().find(|k| !obj.contains_key(**k)) {
        return Err(Error::Profile {
            field: format!("{prefix}{missing}"),
            message: "missing".into(),
        });
    }
    if let Some(unknown) = obj.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(Error::Profile {
            field: format!("{prefix}{unknown}"),
            message: "unknown key".into(),
        });
    }
    Ok(())
}
