//! Frame-quantized model encodings: command sequences, dual piano rolls and
//! per-frame degradation labels.
//!
//! Encodings are track-agnostic; same-pitch notes that collide after
//! quantization are merged the same way [`fix_overlaps`](crate::fix_overlaps)
//! merges them in time.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::note::{Excerpt, Note};

pub const DEFAULT_FRAME_MS: u64 = 40;
pub const NUM_PITCHES: usize = 128;
pub const MAX_SHIFT: u8 = 100;
pub const VOCAB_SIZE: u16 = 356;
/// Width of a concatenated presence + onset roll row.
pub const ROLL_WIDTH: usize = 2 * NUM_PITCHES;
pub const ROLL_MAGIC: &[u8; 8] = b"MDTKROLL";

/// A note on the frame grid; covers frames `onset..offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantizedNote {
    pub onset: u64,
    pub pitch: u8,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedExcerpt {
    frame_ms: u64,
    notes: Vec<QuantizedNote>,
}

impl QuantizedExcerpt {
    /// Builds a quantized excerpt from frame-level notes, sorting them and
    /// resolving same-pitch collisions. Zero-length notes are dropped.
    pub fn new(frame_ms: u64, notes: Vec<QuantizedNote>) -> Self {
        assert!(frame_ms > 0, "frame_ms must be positive");
        QuantizedExcerpt {
            frame_ms,
            notes: resolve(notes),
        }
    }

    pub fn frame_ms(&self) -> u64 {
        self.frame_ms
    }

    pub fn notes(&self) -> &[QuantizedNote] {
        &self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Number of frames, up to the last offset.
    pub fn frames(&self) -> u64 {
        self.notes.iter().map(|n| n.offset).max().unwrap_or(0)
    }

    /// Back to milliseconds, all notes on track 0.
    pub fn to_excerpt(&self) -> Excerpt {
        let notes = self
            .notes
            .iter()
            .map(|n| Note {
                onset: n.onset * self.frame_ms,
                pitch: n.pitch,
                dur: (n.offset - n.onset) * self.frame_ms,
                track: 0,
            })
            .collect();
        Excerpt::new(notes).expect("quantized notes are valid")
    }
}

fn resolve(mut notes: Vec<QuantizedNote>) -> Vec<QuantizedNote> {
    notes.retain(|n| n.offset > n.onset);
    let mut voices: BTreeMap<u8, Vec<QuantizedNote>> = BTreeMap::new();
    for n in notes {
        voices.entry(n.pitch).or_default().push(n);
    }
    let mut out = Vec::new();
    for mut voice in voices.into_values() {
        voice.sort();
        let mut kept: Vec<QuantizedNote> = Vec::with_capacity(voice.len());
        for n in voice {
            match kept.last_mut() {
                Some(prev) if n.onset < prev.offset => {
                    let end = prev.offset.max(n.offset);
                    prev.offset = n.onset;
                    if prev.offset == prev.onset {
                        kept.pop();
                    }
                    kept.push(QuantizedNote { offset: end, ..n });
                }
                _ => kept.push(n),
            }
        }
        out.extend(kept);
    }
    out.sort();
    out
}

fn round_to_frame(t: u64, frame_ms: u64) -> u64 {
    (2 * t + frame_ms) / (2 * frame_ms)
}

/// Rounds onsets and offsets to the nearest frame boundary (halves round
/// up). A note that collapses to zero length keeps one frame.
pub fn quantize(excerpt: &Excerpt, frame_ms: u64) -> QuantizedExcerpt {
    let notes = excerpt
        .iter()
        .map(|n| {
            let onset = round_to_frame(n.onset, frame_ms);
            let offset = round_to_frame(n.offset(), frame_ms).max(onset + 1);
            QuantizedNote {
                onset,
                pitch: n.pitch,
                offset,
            }
        })
        .collect();
    QuantizedExcerpt::new(frame_ms, notes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    NoteOn(u8),
    NoteOff(u8),
    /// Advance by 1 to 100 frames.
    Shift(u8),
}

impl Command {
    pub fn id(self) -> u16 {
        match self {
            Command::NoteOn(p) => u16::from(p),
            Command::NoteOff(p) => 128 + u16::from(p),
            Command::Shift(t) => 255 + u16::from(t),
        }
    }

    pub fn from_id(id: u16) -> Option<Command> {
        match id {
            0..=127 => Some(Command::NoteOn(id as u8)),
            128..=255 => Some(Command::NoteOff((id - 128) as u8)),
            256..=355 => Some(Command::Shift((id - 255) as u8)),
            _ => None,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::NoteOn(p) => write!(f, "note_on({p})"),
            Command::NoteOff(p) => write!(f, "note_off({p})"),
            Command::Shift(t) => write!(f, "shift({t})"),
        }
    }
}

fn push_shift(out: &mut Vec<Command>, mut frames: u64) {
    while frames > 0 {
        let step = frames.min(u64::from(MAX_SHIFT));
        out.push(Command::Shift(step as u8));
        frames -= step;
    }
}

/// Encodes as note_on / note_off / shift commands. Within a frame, offs
/// come before ons, each in ascending pitch.
pub fn to_commands(q: &QuantizedExcerpt) -> Vec<Command> {
    // (frame, is_on, pitch) sorts offs first within a frame
    let mut events: Vec<(u64, bool, u8)> = q
        .notes
        .iter()
        .flat_map(|n| [(n.onset, true, n.pitch), (n.offset, false, n.pitch)])
        .collect();
    events.sort_unstable();
    let mut out = Vec::with_capacity(events.len() * 2);
    let mut now = 0;
    for (frame, is_on, pitch) in events {
        push_shift(&mut out, frame - now);
        now = frame;
        out.push(if is_on {
            Command::NoteOn(pitch)
        } else {
            Command::NoteOff(pitch)
        });
    }
    out
}

fn decode_error(index: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        index,
        message: message.into(),
    }
}

/// Decodes a command sequence. Errors name the offending token index.
pub fn from_commands(commands: &[Command], frame_ms: u64) -> Result<QuantizedExcerpt> {
    let mut open: [Option<u64>; NUM_PITCHES] = [None; NUM_PITCHES];
    let mut notes = Vec::new();
    let mut now = 0u64;
    for (index, &cmd) in commands.iter().enumerate() {
        match cmd {
            Command::Shift(t) => {
                if !(1..=MAX_SHIFT).contains(&t) {
                    return Err(decode_error(index, format!("shift({t}) outside 1..=100")));
                }
                now += u64::from(t);
            }
            Command::NoteOn(p) => {
                let slot = open
                    .get_mut(usize::from(p))
                    .ok_or_else(|| decode_error(index, format!("pitch {p} out of range")))?;
                if slot.is_some() {
                    return Err(decode_error(
                        index,
                        format!("note_on({p}) while pitch {p} is already sounding"),
                    ));
                }
                *slot = Some(now);
            }
            Command::NoteOff(p) => {
                let slot = open
                    .get_mut(usize::from(p))
                    .ok_or_else(|| decode_error(index, format!("pitch {p} out of range")))?;
                let onset = slot
                    .take()
                    .ok_or_else(|| decode_error(index, format!("note_off({p}) with no sounding note")))?;
                if onset == now {
                    return Err(decode_error(index, format!("note_off({p}) closes a zero-length note")));
                }
                notes.push(QuantizedNote {
                    onset,
                    pitch: p,
                    offset: now,
                });
            }
        }
    }
    if let Some(p) = open.iter().position(Option::is_some) {
        return Err(decode_error(commands.len(), format!("pitch {p} is never released")));
    }
    Ok(QuantizedExcerpt::new(frame_ms, notes))
}

pub fn command_ids(commands: &[Command]) -> Vec<u16> {
    commands.iter().map(|c| c.id()).collect()
}

pub fn commands_from_ids(ids: &[u16]) -> Result<Vec<Command>> {
    ids.iter()
        .enumerate()
        .map(|(i, &id)| Command::from_id(id).ok_or_else(|| decode_error(i, format!("token id {id} outside 0..356"))))
        .collect()
}

/// Writes `id,token` rows, one per command.
pub fn write_commands_csv<W: Write>(writer: W, commands: &[Command]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let wrap = |e: csv::Error| Error::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["id", "token"]).map_err(wrap)?;
    for c in commands {
        w.write_record([c.id().to_string(), c.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Csv {
        line: 0,
        message: e.to_string(),
    })
}

/// Presence and onset rolls, one 128-bit row per frame (bit `p` is pitch `p`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PianoRollPair {
    pub presence: Vec<u128>,
    pub onsets: Vec<u128>,
}

impl PianoRollPair {
    pub fn frames(&self) -> usize {
        self.presence.len()
    }

    pub fn present(&self, frame: usize, pitch: u8) -> bool {
        self.presence[frame] >> pitch & 1 == 1
    }

    pub fn onset(&self, frame: usize, pitch: u8) -> bool {
        self.onsets[frame] >> pitch & 1 == 1
    }

    /// Row `frame` of the width-256 concatenation (presence then onsets).
    pub fn row(&self, frame: usize) -> [bool; ROLL_WIDTH] {
        let mut row = [false; ROLL_WIDTH];
        for p in 0..NUM_PITCHES {
            row[p] = self.presence[frame] >> p & 1 == 1;
            row[NUM_PITCHES + p] = self.onsets[frame] >> p & 1 == 1;
        }
        row
    }

    /// Row `frame`, or an all-zero row past the end.
    fn packed_row(&self, frame: usize) -> (u128, u128) {
        (
            self.presence.get(frame).copied().unwrap_or(0),
            self.onsets.get(frame).copied().unwrap_or(0),
        )
    }

    /// Number of active presence cells.
    pub fn active_cells(&self) -> u64 {
        self.presence.iter().map(|r| u64::from(r.count_ones())).sum()
    }
}

pub fn to_piano_roll(q: &QuantizedExcerpt) -> PianoRollPair {
    let frames = q.frames() as usize;
    let mut roll = PianoRollPair {
        presence: vec![0; frames],
        onsets: vec![0; frames],
    };
    for n in &q.notes {
        let bit = 1u128 << n.pitch;
        roll.onsets[n.onset as usize] |= bit;
        for row in &mut roll.presence[n.onset as usize..n.offset as usize] {
            *row |= bit;
        }
    }
    roll
}

/// Reads notes back from presence runs, starting a new note at every onset
/// mark. A run without an onset mark at its start is still a note.
pub fn from_piano_roll(roll: &PianoRollPair, frame_ms: u64) -> Result<QuantizedExcerpt> {
    if roll.presence.len() != roll.onsets.len() {
        return Err(Error::LengthMismatch {
            left: roll.presence.len(),
            right: roll.onsets.len(),
        });
    }
    let mut notes = Vec::new();
    for pitch in 0..NUM_PITCHES as u8 {
        let mut start: Option<usize> = None;
        for f in 0..=roll.frames() {
            let (present, onset) = if f < roll.frames() {
                (roll.present(f, pitch), roll.onset(f, pitch))
            } else {
                (false, false)
            };
            if onset && !present {
                return Err(decode_error(f, format!("onset mark without presence at pitch {pitch}")));
            }
            if let Some(s) = start {
                if !present || onset {
                    notes.push(QuantizedNote {
                        onset: s as u64,
                        pitch,
                        offset: f as u64,
                    });
                    start = None;
                }
            }
            if present && start.is_none() {
                start = Some(f);
            }
        }
    }
    Ok(QuantizedExcerpt::new(frame_ms, notes))
}

/// Writes the binary roll format: the magic bytes, frame count and width as
/// little-endian u32, then one 32-byte row per frame with bits packed
/// least-significant first.
pub fn write_roll<W: Write>(mut w: W, roll: &PianoRollPair) -> std::io::Result<()> {
    let frames = u32::try_from(roll.frames())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "too many frames"))?;
    w.write_all(ROLL_MAGIC)?;
    w.write_all(&frames.to_le_bytes())?;
    w.write_all(&(ROLL_WIDTH as u32).to_le_bytes())?;
    for f in 0..roll.frames() {
        w.write_all(&roll.presence[f].to_le_bytes())?;
        w.write_all(&roll.onsets[f].to_le_bytes())?;
    }
    w.flush()
}

pub fn read_roll<R: Read>(mut r: R) -> Result<PianoRollPair> {
    let corrupt = |offset: usize, message: &str| Error::Decode {
        index: offset,
        message: message.into(),
    };
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| corrupt(0, "truncated header"))?;
    if &header[..8] != ROLL_MAGIC {
        return Err(corrupt(0, "bad magic"));
    }
    let frames = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().unwrap());
    if width as usize != ROLL_WIDTH {
        return Err(corrupt(12, "unsupported roll width"));
    }
    let mut roll = PianoRollPair::default();
    let mut buf = [0u8; 16];
    for f in 0..frames {
        let at = 16 + f * 32;
        r.read_exact(&mut buf).map_err(|_| corrupt(at, "truncated row"))?;
        roll.presence.push(u128::from_le_bytes(buf));
        r.read_exact(&mut buf).map_err(|_| corrupt(at + 16, "truncated row"))?;
        roll.onsets.push(u128::from_le_bytes(buf));
    }
    Ok(roll)
}

pub fn save_roll(roll: &PianoRollPair, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_roll(std::io::BufWriter::new(file), roll).map_err(|e| Error::io(path, e))
}

/// Marks each frame whose presence or onset row differs between the two
/// quantized excerpts. The length is the larger frame count.
pub fn frame_labels(clean: &Excerpt, degraded: &Excerpt, frame_ms: u64) -> Vec<bool> {
    let a = to_piano_roll(&quantize(clean, frame_ms));
    let b = to_piano_roll(&quantize(degraded, frame_ms));
    (0..a.frames().max(b.frames()))
        .map(|f| a.packed_row(f) != b.packed_row(f))
        .collect()
}

pub fn labels_to_string(labels: &[bool]) -> String {
    labels.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn labels_from_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .enumerate()
        .map(|(i, c)| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(decode_error(i, format!("expected 0 or 1, found {c:?}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(pitch: u8, onset: u64, dur: u64) -> Note {
        Note::new(pitch, onset, dur, 0).unwrap()
    }

    fn q(notes: &[(u8, u64, u64)]) -> QuantizedExcerpt {
        QuantizedExcerpt::new(
            40,
            notes
                .iter()
                .map(|&(pitch, onset, offset)| QuantizedNote { onset, pitch, offset })
                .collect(),
        )
    }

    #[test]
    fn quantize_rounding() {
        let frames = |e: Excerpt| {
            quantize(&e, 40)
                .notes()
                .iter()
                .map(|n| (n.onset, n.offset))
                .collect::<Vec<_>>()
        };
        assert_eq!(frames(Excerpt::new(vec![n(60, 0, 80)]).unwrap()), vec![(0, 2)]);
        assert_eq!(frames(Excerpt::new(vec![n(60, 19, 2)]).unwrap()), vec![(0, 1)]);
        assert_eq!(frames(Excerpt::new(vec![n(60, 20, 10)]).unwrap()), vec![(1, 2)]);
    }

    #[test]
    fn quantize_merges_colliding_notes() {
        // both round onto frame 0..1 / 1..2 on different tracks
        let e = Excerpt::new(vec![n(60, 0, 30), Note::new(60, 10, 50, 1).unwrap()]).unwrap();
        assert_eq!(quantize(&e, 40), q(&[(60, 0, 2)]));
    }

    #[test]
    fn one_note_commands() {
        let c = to_commands(&q(&[(60, 0, 2)]));
        assert_eq!(c, vec![Command::NoteOn(60), Command::Shift(2), Command::NoteOff(60)]);
    }

    #[test]
    fn long_gap_is_chunked() {
        let c = to_commands(&q(&[(60, 0, 1), (60, 251, 252)]));
        assert_eq!(
            c,
            vec![
                Command::NoteOn(60),
                Command::Shift(1),
                Command::NoteOff(60),
                Command::Shift(100),
                Command::Shift(100),
                Command::Shift(50),
                Command::NoteOn(60),
                Command::Shift(1),
                Command::NoteOff(60),
            ]
        );
    }

    #[test]
    fn offs_before_ons() {
        let c = to_commands(&q(&[(62, 0, 2), (60, 0, 2), (60, 2, 3)]));
        assert_eq!(
            c,
            vec![
                Command::NoteOn(60),
                Command::NoteOn(62),
                Command::Shift(2),
                Command::NoteOff(60),
                Command::NoteOff(62),
                Command::NoteOn(60),
                Command::Shift(1),
                Command::NoteOff(60),
            ]
        );
    }

    #[test]
    fn decode_errors_name_the_token() {
        let err = from_commands(&[Command::NoteOff(60)], 40).unwrap_err();
        assert!(matches!(err, Error::Decode { index: 0, .. }));
        let err = from_commands(&[Command::NoteOn(60), Command::Shift(1), Command::NoteOn(60)], 40).unwrap_err();
        assert!(matches!(err, Error::Decode { index: 2, .. }));
        let err = from_commands(&[Command::NoteOn(60), Command::Shift(1)], 40).unwrap_err();
        assert!(matches!(err, Error::Decode { index: 2, .. }));
    }

    #[test]
    fn id_bijection() {
        for id in 0..VOCAB_SIZE {
            assert_eq!(Command::from_id(id).unwrap().id(), id);
        }
        assert_eq!(Command::from_id(VOCAB_SIZE), None);
        assert_eq!(Command::Shift(1).id(), 256);
        assert_eq!(Command::Shift(100).id(), 355);
    }

    #[test]
    fn roll_definition() {
        let roll = to_piano_roll(&q(&[(60, 0, 2)]));
        assert_eq!(roll.presence, vec![1u128 << 60, 1u128 << 60]);
        assert_eq!(roll.onsets, vec![1u128 << 60, 0]);
        assert_eq!(to_piano_roll(&q(&[])).frames(), 0);
    }

    #[test]
    fn abutting_notes_survive_the_roll() {
        let orig = q(&[(60, 0, 2), (60, 2, 4)]);
        let roll = to_piano_roll(&orig);
        assert_eq!(roll.presence, vec![1u128 << 60; 4]);
        assert_eq!(roll.onsets, vec![1u128 << 60, 0, 1u128 << 60, 0]);
        assert_eq!(from_piano_roll(&roll, 40).unwrap(), orig);
    }

    #[test]
    fn onset_without_presence() {
        let roll = PianoRollPair {
            presence: vec![0],
            onsets: vec![1],
        };
        assert!(matches!(
            from_piano_roll(&roll, 40),
            Err(Error::Decode { index: 0, .. })
        ));
    }

    #[test]
    fn binary_roll_round_trip() {
        let roll = to_piano_roll(&q(&[(0, 0, 3), (127, 1, 2)]));
        let mut buf = Vec::new();
        write_roll(&mut buf, &roll).unwrap();
        assert_eq!(&buf[..8], b"MDTKROLL");
        assert_eq!(&buf[8..16], &[3, 0, 0, 0, 0, 1, 0, 0]);
        assert_eq!(buf.len(), 16 + 3 * 32);
        // pitch 0 of frame 0 is the lowest bit of the first row byte
        assert_eq!(buf[16] & 1, 1);
        assert_eq!(read_roll(&buf[..]).unwrap(), roll);
        assert!(read_roll(&buf[..40]).is_err());
    }

    #[test]
    fn frame_labels_pitch_shift() {
        let clean = Excerpt::new(vec![n(60, 120, 120), n(40, 0, 400)]).unwrap();
        let degraded = Excerpt::new(vec![n(61, 120, 120), n(40, 0, 400)]).unwrap();
        let labels = frame_labels(&clean, &degraded, 40);
        let marked: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        assert_eq!(marked, vec![3, 4, 5]);
        assert_eq!(labels.len(), 10);
    }

    #[test]
    fn frame_labels_removal_extends_to_clean_end() {
        let clean = Excerpt::new(vec![n(60, 0, 200), n(62, 200, 200)]).unwrap();
        let degraded = Excerpt::new(vec![n(60, 0, 200)]).unwrap();
        let labels = frame_labels(&clean, &degraded, 40);
        assert_eq!(labels_to_string(&labels), "0000011111");
        assert_eq!(labels_from_string("0000011111").unwrap(), labels);
    }

    #[test]
    fn commands_csv() {
        let mut buf = Vec::new();
        write_commands_csv(&mut buf, &to_commands(&q(&[(60, 0, 2)]))).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,token\n60,note_on(60)\n257,shift(2)\n188,note_off(60)\n"
        );
    }
}
