//! Metrics for the four benchmark tasks: error detection, classification,
//! location and correction.

mod rule_based;

pub use rule_based::RuleBased;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::degradations::DegradationId;
use crate::error::{Error, Result};
use crate::formats::{quantize, to_piano_roll};
use crate::matching::matching_size;
use crate::note::Excerpt;

pub const DEFAULT_ONSET_TOLERANCE_MS: u64 = 50;
const NUM_CLASSES: usize = DegradationId::LABELS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "u8")]
pub enum Task {
    /// Is the excerpt degraded?
    Detection,
    /// Which degradation was applied?
    Classification,
    /// Which frames are degraded?
    Location,
    /// Recover the clean excerpt.
    Correction,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Detection, Task::Classification, Task::Location, Task::Correction];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Task> {
        Task::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Detection => "reverse_f",
            Task::Classification => "accuracy",
            Task::Location => "f_measure",
            Task::Correction => "helpfulness",
        }
    }
}

impl From<Task> for u8 {
    fn from(t: Task) -> u8 {
        t.number()
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Precision, recall and F from counts. With no positives at all on either
/// side the result is a perfect 1; an undefined precision or recall
/// otherwise counts as 0.
pub fn prf_from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
    if tp + fp + fn_ == 0 {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f: 1.0,
        };
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// F-measure with "not degraded" as the positive class. Inputs are
/// `true` for degraded.
pub fn reverse_f_measure(predicted_degraded: &[bool], truly_degraded: &[bool]) -> Result<f64> {
    check_lengths(predicted_degraded.len(), truly_degraded.len())?;
    if truly_degraded.is_empty() {
        return Err(Error::Empty("detection labels"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in predicted_degraded.iter().zip(truly_degraded) {
        match (!p, !t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(prf_from_counts(tp, fp, fn_).f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`, classes ordered like
    /// [`DegradationId::LABELS`].
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ClassificationReport {
    /// Rows divided by their totals; empty rows stay zero.
    pub fn normalized(&self) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        self.confusion.map(|row| {
            let total: u64 = row.iter().sum();
            row.map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        })
    }

    /// Confusion matrix as CSV with a `true\predicted` header row.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for label in DegradationId::LABELS {
            out.push(',');
            out.push_str(label.name());
        }
        out.push('\n');
        for (label, row) in DegradationId::LABELS.iter().zip(&self.confusion) {
            out.push_str(label.name());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn classification_report(predicted: &[DegradationId], truth: &[DegradationId]) -> Result<ClassificationReport> {
    check_lengths(predicted.len(), truth.len())?;
    if truth.is_empty() {
        return Err(Error::Empty("classification labels"));
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in predicted.iter().zip(truth) {
        confusion[t.class_index()][p.class_index()] += 1;
    }
    let correct: u64 = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
    Ok(ClassificationReport {
        accuracy: correct as f64 / truth.len() as f64,
        confusion,
    })
}

pub fn frame_f_measure(predicted: &[bool], truth: &[bool]) -> Result<Prf> {
    check_lengths(predicted.len(), truth.len())?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(prf_from_counts(tp, fp, fn_))
}

/// Onset-only note F-measure: a maximum one-to-one matching of same-pitch
/// notes with onsets within `tolerance_ms`.
pub fn note_onset_f(estimate: &Excerpt, reference: &Excerpt, tolerance_ms: u64) -> f64 {
    let adjacency: Vec<Vec<usize>> = reference
        .iter()
        .map(|r| {
            estimate
                .iter()
                .enumerate()
                .filter(|(_, e)| e.pitch == r.pitch && e.onset.abs_diff(r.onset) <= tolerance_ms)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let matched = matching_size(&adjacency, estimate.len()) as u64;
    prf_from_counts(
        matched,
        estimate.len() as u64 - matched,
        reference.len() as u64 - matched,
    )
    .f
}

/// F-measure over active (frame, pitch) cells after quantization.
pub fn frame_based_f(estimate: &Excerpt, reference: &Excerpt, frame_ms: u64) -> f64 {
    let est = to_piano_roll(&quantize(estimate, frame_ms)).presence;
    let reference = to_piano_roll(&quantize(reference, frame_ms)).presence;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for f in 0..est.len().max(reference.len()) {
        let e = est.get(f).copied().unwrap_or(0);
        let r = reference.get(f).copied().unwrap_or(0);
        tp += u64::from((e & r).count_ones());
        fp += u64::from((e & !r).count_ones());
        fn_ += u64::from((!e & r).count_ones());
    }
    prf_from_counts(tp, fp, fn_).f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Helpfulness {
    pub h: f64,
    pub f_corrected: f64,
    pub f_given: f64,
}

/// Helpfulness of a correction with score `f_c` of an input scoring `f_g`:
/// 0.5 means no change in accuracy, 1 a perfect correction, 0 the worst.
pub fn helpfulness_from_scores(f_c: f64, f_g: f64) -> f64 {
    if f_g >= 1.0 {
        f_c
    } else if f_c >= f_g {
        1.0 - 0.5 * (1.0 - f_c) / (1.0 - f_g)
    } else {
        0.5 * f_c / f_g
    }
}

/// Mean of the frame-based and onset-only F-measures against `original`.
pub fn correction_score(excerpt: &Excerpt, original: &Excerpt, frame_ms: u64, tolerance_ms: u64) -> f64 {
    0.5 * (frame_based_f(excerpt, original, frame_ms) + note_onset_f(excerpt, original, tolerance_ms))
}

pub fn helpfulness(
    corrected: &Excerpt,
    given: &Excerpt,
    original: &Excerpt,
    frame_ms: u64,
    tolerance_ms: u64,
) -> Helpfulness {
    let f_corrected = correction_score(corrected, original, frame_ms, tolerance_ms);
    let f_given = correction_score(given, original, frame_ms, tolerance_ms);
    Helpfulness {
        h: helpfulness_from_scores(f_corrected, f_given),
        f_corrected,
        f_given,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScore {
    pub item_id: String,
    pub score: f64,
}

/// Result of evaluating one task; serializes to a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    pub model: String,
    pub items: usize,
    /// Aggregate metrics by name; the task's headline metric is
    /// [`Task::metric_name`].
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<[[u64; NUM_CLASSES]; NUM_CLASSES]>,
    pub per_item: Vec<ItemScore>,
}

impl EvalReport {
    pub fn headline(&self) -> f64 {
        self.metrics[self.task.metric_name()]
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn report(task: Task, model: &str, items: usize, metrics: &[(&str, f64)], per_item: Vec<ItemScore>) -> EvalReport {
    EvalReport {
        task,
        model: model.to_string(),
        items,
        metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        confusion: None,
        per_item,
    }
}

/// Task 1 over `(item_id, predicted, true)` labels.
pub fn evaluate_detection(model: &str, rows: &[(String, DegradationId, DegradationId)]) -> Result<EvalReport> {
    let pred: Vec<bool> = rows.iter().map(|r| r.1 != DegradationId::None).collect();
    let truth: Vec<bool> = rows.iter().map(|r| r.2 != DegradationId::None).collect();
    let reverse_f = reverse_f_measure(&pred, &truth)?;
    let per_item = rows
        .iter()
        .zip(pred.iter().zip(&truth))
        .map(|(r, (p, t))| ItemScore {
            item_id: r.0.clone(),
            score: if p == t { 1.0 } else { 0.0 },
        })
        .collect();
    Ok(report(
        Task::Detection,
        model,
        rows.len(),
        &[("reverse_f", reverse_f)],
        per_item,
    ))
}

/// Task 2 over `(item_id, predicted, true)` labels.
pub fn evaluate_classification(model: &str, rows: &[(String, DegradationId, DegradationId)]) -> Result<EvalReport> {
    let pred: Vec<DegradationId> = rows.iter().map(|r| r.1).collect();
    let truth: Vec<DegradationId> = rows.iter().map(|r| r.2).collect();
    let cr = classification_report(&pred, &truth)?;
    let per_item = rows
        .iter()
        .map(|r| ItemScore {
            item_id: r.0.clone(),
            score: if r.1 == r.2 { 1.0 } else { 0.0 },
        })
        .collect();
    let mut rep = report(
        Task::Classification,
        model,
        rows.len(),
        &[("accuracy", cr.accuracy)],
        per_item,
    );
    rep.confusion = Some(cr.confusion);
    Ok(rep)
}

/// Task 3: frames are pooled over all items.
pub fn evaluate_location(model: &str, rows: &[(String, Vec<bool>, Vec<bool>)]) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Empty("location labels"));
    }
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let mut per_item = Vec::with_capacity(rows.len());
    for (id, p, t) in rows {
        let item = frame_f_measure(p, t).map_err(|_| {
            Error::Config(format!(
                "{id}: {} predicted frames, {} labeled frames",
                p.len(),
                t.len()
            ))
        })?;
        per_item.push(ItemScore {
            item_id: id.clone(),
            score: item.f,
        });
        pred.extend_from_slice(p);
        truth.extend_from_slice(t);
    }
    let prf = frame_f_measure(&pred, &truth)?;
    Ok(report(
        Task::Location,
        model,
        rows.len(),
        &[
            ("precision", prf.precision),
            ("recall", prf.recall),
            ("f_measure", prf.f),
        ],
        per_item,
    ))
}

/// Task 4 over `(item_id, corrected, given, original)`.
pub fn evaluate_correction(
    model: &str,
    rows: &[(String, Excerpt, Excerpt, Excerpt)],
    frame_ms: u64,
    tolerance_ms: u64,
) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Empty("correction items"));
    }
    let scores: Vec<Helpfulness> = rows
        .iter()
        .map(|(_, c, g, o)| helpfulness(c, g, o, frame_ms, tolerance_ms))
        .collect();
    let mean = |f: fn(&Helpfulness) -> f64| scores.iter().map(f).sum::<f64>() / scores.len() as f64;
    let per_item = rows
        .iter()
        .zip(&scores)
        .map(|(r, s)| ItemScore {
            item_id: r.0.clone(),
            score: s.h,
        })
        .collect();
    Ok(report(
        Task::Correction,
        model,
        rows.len(),
        &[
            ("helpfulness", mean(|s| s.h)),
            ("f_corrected", mean(|s| s.f_corrected)),
            ("f_given", mean(|s| s.f_given)),
        ],
        per_item,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note::Note;

    fn n(pitch: u8, onset: u64, dur: u64) -> Note {
        Note::new(pitch, onset, dur, 0).unwrap()
    }

    fn ex(notes: &[Note]) -> Excerpt {
        Excerpt::new(notes.to_vec()).unwrap()
    }

    #[test]
    fn reverse_f_cases() {
        let truth: Vec<bool> = (0..9).map(|i| i != 0).collect();
        assert_eq!(reverse_f_measure(&[true; 9], &truth).unwrap(), 0.0);
        assert_eq!(reverse_f_measure(&truth, &truth).unwrap(), 1.0);
        let flipped: Vec<bool> = truth.iter().map(|b| !b).collect();
        assert_eq!(reverse_f_measure(&flipped, &truth).unwrap(), 0.0);
        assert!(reverse_f_measure(&[], &[]).is_err());
        assert!(reverse_f_measure(&[true], &[]).is_err());
    }

    #[test]
    fn classification_cases() {
        use DegradationId::*;
        let r = classification_report(&[None, None], &[PitchShift, None]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion[PitchShift.class_index()][None.class_index()], 1);
        assert_eq!(r.confusion[0][0], 1);
        let perfect = classification_report(&DegradationId::LABELS, &DegradationId::LABELS).unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(perfect.confusion[i][j], u64::from(i == j));
            }
        }
        assert!(r.confusion_csv().starts_with("true\\predicted,none,pitch_shift"));
    }

    #[test]
    fn frame_f_cases() {
        let p = [true, true, true, true, false, false];
        let t = [true, true, true, false, true, true];
        let prf = frame_f_measure(&p, &t).unwrap();
        assert_eq!(prf.precision, 0.75);
        assert_eq!(prf.recall, 0.6);
        assert!((prf.f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(frame_f_measure(&[false; 3], &[true, false, false]).unwrap().f, 0.0);
        assert_eq!(frame_f_measure(&[false; 3], &[false; 3]).unwrap().f, 1.0);
        assert!(frame_f_measure(&[false; 3], &[false; 2]).is_err());
    }

    #[test]
    fn note_onset_cases() {
        let reference = ex(&[n(60, 0, 10), n(60, 40, 10)]);
        let estimate = ex(&[n(60, 20, 10)]);
        assert!((note_onset_f(&estimate, &reference, 50) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(note_onset_f(&reference, &reference, 50), 1.0);
        assert_eq!(note_onset_f(&ex(&[n(61, 0, 10)]), &ex(&[n(60, 0, 10)]), 50), 0.0);
        assert_eq!(note_onset_f(&Excerpt::empty(), &Excerpt::empty(), 50), 1.0);
        assert_eq!(note_onset_f(&Excerpt::empty(), &reference, 50), 0.0);
    }

    #[test]
    fn frame_based_cases() {
        let reference = ex(&[n(60, 0, 400), n(64, 0, 400)]);
        assert_eq!(frame_based_f(&reference, &reference, 40), 1.0);
        assert_eq!(frame_based_f(&Excerpt::empty(), &reference, 40), 0.0);
        // one note halved: 15 shared cells, 5 missed
        let halved = ex(&[n(60, 0, 200), n(64, 0, 400)]);
        let expected = 2.0 * 15.0 / (15.0 + 20.0);
        assert!((frame_based_f(&halved, &reference, 40) - expected).abs() < 1e-12);
    }

    #[test]
    fn helpfulness_cases() {
        assert!((helpfulness_from_scores(0.9, 0.8) - 0.75).abs() < 1e-12);
        assert!((helpfulness_from_scores(0.8, 0.8) - 0.5).abs() < 1e-12);
        assert!((helpfulness_from_scores(0.4, 0.8) - 0.25).abs() < 1e-12);
        assert_eq!(helpfulness_from_scores(0.7, 1.0), 0.7);
        let original = ex(&[n(60, 0, 400), n(64, 400, 400)]);
        let given = ex(&[n(60, 0, 400)]);
        let h = helpfulness(&original, &given, &original, 40, 50);
        assert_eq!(h.h, 1.0);
        assert_eq!(helpfulness(&given, &given, &original, 40, 50).h, 0.5);
    }

    #[test]
    fn task_numbers() {
        for t in Task::ALL {
            assert_eq!(Task::from_number(t.number()), Some(t));
        }
        assert_eq!(Task::from_number(0), None);
        assert_eq!(Task::from_number(5), None);
    }
}
