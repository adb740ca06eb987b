//! Standard MIDI File (format 0 and 1) reader producing [`Excerpt`]s.
//!
//! Tick times are converted to milliseconds through the file's tempo map
//! (120 BPM until the first tempo event). The conversion accumulates exact
//! integer microsecond numerators per tempo segment and rounds to the nearest
//! millisecond only once per time point, so durations spanning tempo changes
//! equal the sum of their per-segment lengths.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::note::{Excerpt, Note};

const DEFAULT_TEMPO_US: u64 = 500_000;
const DRUM_CHANNEL: u8 = 9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MidiOptions {
    /// Skip notes on MIDI channel 10 (index 9).
    pub exclude_drums: bool,
}

pub fn load_midi(path: impl AsRef<Path>) -> Result<Excerpt> {
    load_midi_with(path, MidiOptions::default())
}

pub fn load_midi_with(path: impl AsRef<Path>, options: MidiOptions) -> Result<Excerpt> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_midi(&bytes, options)
}

/// Parses an in-memory Standard MIDI File.
pub fn parse_midi(bytes: &[u8], options: MidiOptions) -> Result<Excerpt> {
    let smf = SmfReader::new(bytes).read()?;
    let clock = Clock::new(smf.timing, &smf.tempos);

    let mut notes = Vec::new();
    for (track_index, track) in smf.tracks.iter().enumerate() {
        let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();
        for ev in &track.notes {
            if options.exclude_drums && ev.channel == DRUM_CHANNEL {
                continue;
            }
            let key = (ev.channel, ev.pitch);
            if ev.on {
                open.entry(key).or_default().push_back(ev.tick);
            } else if let Some(start) = open.get_mut(&key).and_then(VecDeque::pop_front) {
                notes.push(make_note(&clock, ev.pitch, start, ev.tick, track_index));
            } else {
                warn!(
                    "track {track_index}: note-off for pitch {} on channel {} at tick {} without matching note-on; ignored",
                    ev.pitch, ev.channel, ev.tick
                );
            }
        }
        // Close anything still sounding at the end of the track, in a
        // deterministic order.
        let mut pending: Vec<_> = open
            .into_iter()
            .flat_map(|((_, pitch), starts)| starts.into_iter().map(move |s| (s, pitch)))
            .collect();
        pending.sort_unstable();
        for (start, pitch) in pending {
            notes.push(make_note(&clock, pitch, start, track.end_tick, track_index));
        }
    }
    Ok(Excerpt::from_valid(notes))
}

fn make_note(clock: &Clock, pitch: u8, start: u64, end: u64, track: usize) -> Note {
    let onset = clock.millis(start);
    let offset = clock.millis(end);
    Note {
        onset,
        pitch,
        dur: offset.saturating_sub(onset).max(1),
        track: track as u32,
    }
}

#[derive(Debug, Clone, Copy)]
enum Timing {
    /// Ticks per quarter note.
    Metrical(u16),
    /// Frames per second and ticks per frame.
    Timecode(u8, u8),
}

#[derive(Debug)]
struct NoteEvent {
    tick: u64,
    channel: u8,
    pitch: u8,
    on: bool,
}

#[derive(Debug, Default)]
struct Track {
    notes: Vec<NoteEvent>,
    end_tick: u64,
}

#[derive(Debug)]
struct Smf {
    timing: Timing,
    tracks: Vec<Track>,
    /// `(tick, microseconds per quarter)` from every track.
    tempos: Vec<(u64, u64)>,
}

struct SmfReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> SmfReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        SmfReader { bytes, pos: 0 }
    }

    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Midi {
            offset,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.err(self.pos, format!("unexpected end of data reading {n} bytes"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u64> {
        let start = self.pos;
        let mut value = 0u64;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u64::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        self.err(start, "variable-length quantity longer than 4 bytes")
    }

    fn read(mut self) -> Result<Smf> {
        if self.take(4)? != b"MThd" {
            return self.err(0, "missing MThd header");
        }
        let header_len = self.u32()? as usize;
        if header_len < 6 {
            return self.err(4, format!("header length {header_len} shorter than 6"));
        }
        let format_at = self.pos;
        let format = self.u16()?;
        let ntracks = self.u16()?;
        let division_at = self.pos;
        let division = self.u16()?;
        self.take(header_len - 6)?;

        if format > 1 {
            return self.err(format_at, format!("unsupported SMF format {format}"));
        }
        let timing = if division & 0x8000 == 0 {
            if division == 0 {
                return self.err(division_at, "zero ticks per quarter note");
            }
            Timing::Metrical(division)
        } else {
            let fps = (-((division >> 8) as u8 as i8)) as u8;
            let tpf = (division & 0xff) as u8;
            if fps == 0 || tpf == 0 {
                return self.err(division_at, "invalid timecode division");
            }
            Timing::Timecode(fps, tpf)
        };

        let mut tracks = Vec::with_capacity(ntracks as usize);
        let mut tempos = Vec::new();
        while tracks.len() < ntracks as usize {
            if self.pos == self.bytes.len() {
                return self.err(self.pos, format!("expected {ntracks} tracks, found {}", tracks.len()));
            }
            let chunk_at = self.pos;
            let id = self.take(4)?;
            let len = self.u32()? as usize;
            if self.bytes.len() - self.pos < len {
                return self.err(chunk_at, format!("chunk length {len} exceeds file size"));
            }
            if id != b"MTrk" {
                // Unknown chunks are skipped.
                self.pos += len;
                continue;
            }
            let end = self.pos + len;
            tracks.push(self.read_track(end, &mut tempos)?);
            self.pos = end;
        }
        Ok(Smf { timing, tracks, tempos })
    }

    fn read_track(&mut self, end: usize, tempos: &mut Vec<(u64, u64)>) -> Result<Track> {
        let mut track = Track::default();
        let mut tick = 0u64;
        let mut running: Option<u8> = None;
        while self.pos < end {
            tick += self.varlen()?;
            let status_at = self.pos;
            let mut status = self.u8()?;
            if status < 0x80 {
                match running {
                    Some(s) => {
                        status = s;
                        self.pos -= 1;
                    }
                    None => return self.err(status_at, "data byte without running status"),
                }
            }
            match status {
                0xff => {
                    running = None;
                    let kind = self.u8()?;
                    let len = self.varlen()? as usize;
                    let data = self.take(len)?;
                    match kind {
                        0x51 => {
                            if len != 3 {
                                return self.err(status_at, "tempo event must have 3 data bytes");
                            }
                            let us = (u64::from(data[0]) << 16) | (u64::from(data[1]) << 8) | u64::from(data[2]);
                            if us == 0 {
                                return self.err(status_at, "zero tempo");
                            }
                            tempos.push((tick, us));
                        }
                        0x2f => {
                            track.end_tick = tick;
                            return Ok(track);
                        }
                        _ => {}
                    }
                }
                0xf0 | 0xf7 => {
                    running = None;
                    let len = self.varlen()? as usize;
                    self.take(len)?;
                }
                0x80..=0xef => {
                    running = Some(status);
                    let kind = status & 0xf0;
                    let channel = status & 0x0f;
                    let data_len = if kind == 0xc0 || kind == 0xd0 { 1 } else { 2 };
                    let data = self.take(data_len)?;
                    if data.iter().any(|b| b & 0x80 != 0) {
                        return self.err(status_at, "data byte with high bit set");
                    }
                    match kind {
                        0x90 => track.notes.push(NoteEvent {
                            tick,
                            channel,
                            pitch: data[0],
                            on: data[1] > 0,
                        }),
                        0x80 => track.notes.push(NoteEvent {
                            tick,
                            channel,
                            pitch: data[0],
                            on: false,
                        }),
                        _ => {}
                    }
                }
                _ => return self.err(status_at, format!("unsupported status byte {status:#04x}")),
            }
        }
        track.end_tick = tick;
        Ok(track)
    }
}

/// Tick-to-millisecond conversion. Time is tracked as an exact numerator
/// over a fixed denominator and rounded half-up to whole milliseconds.
struct Clock {
    /// `(start tick, numerator at start tick, numerator per tick)`
    segments: Vec<(u64, u128, u128)>,
    denominator: u128,
}

impl Clock {
    fn new(timing: Timing, tempos: &[(u64, u64)]) -> Self {
        match timing {
            Timing::Metrical(ppq) => {
                let mut changes = tempos.to_vec();
                changes.sort_by_key(|&(tick, _)| tick);
                let mut segments = vec![(0u64, 0u128, u128::from(DEFAULT_TEMPO_US))];
                for (tick, us) in changes {
                    let &(start, base, rate) = segments.last().unwrap();
                    let at = base + u128::from(tick - start) * rate;
                    if tick == start {
                        segments.pop();
                    }
                    segments.push((tick, at, u128::from(us)));
                }
                // numerator is microseconds * ppq
                Clock {
                    segments,
                    denominator: u128::from(ppq) * 1000,
                }
            }
            Timing::Timecode(fps, tpf) => Clock {
                segments: vec![(0, 0, 1_000_000)],
                denominator: u128::from(fps) * u128::from(tpf) * 1000,
            },
        }
    }

    fn millis(&self, tick: u64) -> u64 {
        let idx = self.segments.partition_point(|&(start, _, _)| start <= tick) - 1;
        let (start, base, rate) = self.segments[idx];
        let numerator = base + u128::from(tick - start) * rate;
        ((2 * numerator + self.denominator) / (2 * self.denominator)) as u64
    }
}
