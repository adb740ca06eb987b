//! Random note material for tests, benchmarks and demos.

use crate::note::{Excerpt, Note};
use crate::random::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub notes: usize,
    /// Onsets fall in `0..span_ms`.
    pub span_ms: u64,
    pub min_pitch: u8,
    pub max_pitch: u8,
    pub min_dur_ms: u64,
    pub max_dur_ms: u64,
    pub tracks: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            notes: 20,
            span_ms: 5000,
            min_pitch: 36,
            max_pitch: 96,
            min_dur_ms: 30,
            max_dur_ms: 1200,
            tracks: 1,
        }
    }
}

/// Uniformly random notes. Same-voice overlaps are possible; pass the result
/// through [`fix_overlaps`](crate::fix_overlaps) to remove them.
pub fn random_notes(config: &SynthConfig, rng: &mut RandomSource) -> Excerpt {
    let pitches = u64::from(config.max_pitch - config.min_pitch) + 1;
    let durs = config.max_dur_ms - config.min_dur_ms + 1;
    let notes = (0..config.notes)
        .map(|_| Note {
            onset: rng.below(config.span_ms.max(1)),
            pitch: config.min_pitch + rng.below(pitches) as u8,
            dur: config.min_dur_ms + rng.below(durs),
            track: rng.below(u64::from(config.tracks.max(1))) as u32,
        })
        .collect();
    Excerpt::new(notes).expect("generated notes are valid")
}

/// A melodic line plus chords: runs of repeated notes with short gaps (so
/// joins apply), long notes (so splits apply) and free space (so additions
/// apply).
pub fn random_piece(length_ms: u64, rng: &mut RandomSource) -> Excerpt {
    let mut notes = Vec::new();
    let mut t = 0;
    let mut pitch = 60i64;
    while t < length_ms {
        pitch = (pitch + rng.below(9) as i64 - 4).clamp(40, 90);
        let dur = 80 + rng.below(600);
        let repeats = 1 + rng.below(3);
        for _ in 0..repeats {
            notes.push(Note {
                onset: t,
                pitch: pitch as u8,
                dur,
                track: 0,
            });
            if rng.below(4) == 0 {
                notes.push(Note {
                    onset: t,
                    pitch: (pitch - 12 + rng.below(5) as i64) as u8,
                    dur: dur + rng.below(300),
                    track: 1,
                });
            }
            t += dur + rng.below(60);
        }
        t += rng.below(200);
    }
    crate::note::fix_overlaps(&Excerpt::new(notes).expect("generated notes are valid"))
}
