use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters shared by all degradations. Each degradation reads only the
/// subset listed by [`super::DegradationId::params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationParams {
    pub min_pitch: u8,
    pub max_pitch: u8,
    /// Signed interval (semitones) to weight. When set, pitch shifts are
    /// drawn relative to the original pitch instead of uniformly.
    pub interval_weights: Option<BTreeMap<i32, f64>>,
    pub align_pitch: bool,
    pub align_onset: bool,
    pub align_dur: bool,
    pub min_shift_ms: u64,
    /// `None` means bounded only by the excerpt.
    pub max_shift_ms: Option<u64>,
    pub min_dur_ms: u64,
    pub max_dur_ms: Option<u64>,
    /// Number of cut points; a note is split into `num_splits + 1` pieces.
    pub num_splits: u32,
    pub max_gap_ms: u64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams {
            min_pitch: 21,
            max_pitch: 108,
            interval_weights: None,
            align_pitch: false,
            align_onset: false,
            align_dur: false,
            min_shift_ms: 50,
            max_shift_ms: None,
            min_dur_ms: 50,
            max_dur_ms: None,
            num_splits: 1,
            max_gap_ms: 50,
        }
    }
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.max_pitch > 127 || self.min_pitch > self.max_pitch {
            return bad(format!("pitch bounds {}..={} invalid", self.min_pitch, self.max_pitch));
        }
        if let Some(max) = self.max_shift_ms {
            if max < self.min_shift_ms {
                return bad(format!("max_shift_ms {max} < min_shift_ms {}", self.min_shift_ms));
            }
        }
        if self.min_dur_ms == 0 {
            return bad("min_dur_ms must be at least 1".into());
        }
        if let Some(max) = self.max_dur_ms {
            if max < self.min_dur_ms {
                return bad(format!("max_dur_ms {max} < min_dur_ms {}", self.min_dur_ms));
            }
        }
        if self.num_splits == 0 {
            return bad("num_splits must be at least 1".into());
        }
        if let Some(weights) = &self.interval_weights {
            if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
                return bad("interval weights must be finite and nonnegative".into());
            }
            if !weights.values().any(|w| *w > 0.0) {
                return bad("interval weights are all zero".into());
            }
        }
        Ok(())
    }

    /// Sets one parameter from its textual form. Boolean flags accept
    /// `true`/`false`; interval weights use `interval:weight,...`.
    pub fn set(&mut self, key: ParamKey, value: &str) -> Result<()> {
        let value = value.trim();
        let int = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::Config(format!("{}: expected integer, got {v:?}", key.name())))
        };
        let flag = |v: &str| -> Result<bool> {
            v.parse()
                .map_err(|_| Error::Config(format!("{}: expected true/false, got {v:?}", key.name())))
        };
        let pitch = |v: &str| -> Result<u8> {
            v.parse()
                .ok()
                .filter(|p| *p <= 127)
                .ok_or_else(|| Error::Config(format!("{}: invalid pitch {v:?}", key.name())))
        };
        match key {
            ParamKey::MinPitch => self.min_pitch = pitch(value)?,
            ParamKey::MaxPitch => self.max_pitch = pitch(value)?,
            ParamKey::IntervalWeights => self.interval_weights = Some(parse_weights(value)?),
            ParamKey::AlignPitch => self.align_pitch = flag(value)?,
            ParamKey::AlignOnset => self.align_onset = flag(value)?,
            ParamKey::AlignDur => self.align_dur = flag(value)?,
            ParamKey::MinShiftMs => self.min_shift_ms = int(value)?,
            ParamKey::MaxShiftMs => self.max_shift_ms = Some(int(value)?),
            ParamKey::MinDurMs => self.min_dur_ms = int(value)?,
            ParamKey::MaxDurMs => self.max_dur_ms = Some(int(value)?),
            ParamKey::NumSplits => {
                self.num_splits =
                    u32::try_from(int(value)?).map_err(|_| Error::Config("num-splits out of range".into()))?
            }
            ParamKey::MaxGapMs => self.max_gap_ms = int(value)?,
        }
        Ok(())
    }
}

fn parse_weights(value: &str) -> Result<BTreeMap<i32, f64>> {
    let mut weights = BTreeMap::new();
    for part in value.split(',').filter(|p| !p.trim().is_empty()) {
        let (interval, weight) = part
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("interval weight {part:?} is not interval:weight")))?;
        let interval: i32 = interval
            .trim()
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::Config(format!("bad interval {interval:?}")))?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad weight {weight:?}")))?;
        weights.insert(interval, weight);
    }
    Ok(weights)
}

/// Names of the individual degradation parameters, as used on the command
/// line (`--<degradation>-<param>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKey {
    MinPitch,
    MaxPitch,
    IntervalWeights,
    AlignPitch,
    AlignOnset,
    AlignDur,
    MinShiftMs,
    MaxShiftMs,
    MinDurMs,
    MaxDurMs,
    NumSplits,
    MaxGapMs,
}

impl ParamKey {
    pub const ALL: [ParamKey; 12] = [
        ParamKey::MinPitch,
        ParamKey::MaxPitch,
        ParamKey::IntervalWeights,
        ParamKey::AlignPitch,
        ParamKey::AlignOnset,
        ParamKey::AlignDur,
        ParamKey::MinShiftMs,
        ParamKey::MaxShiftMs,
        ParamKey::MinDurMs,
        ParamKey::MaxDurMs,
        ParamKey::NumSplits,
        ParamKey::MaxGapMs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamKey::MinPitch => "min-pitch",
            ParamKey::MaxPitch => "max-pitch",
            ParamKey::IntervalWeights => "interval-weights",
            ParamKey::AlignPitch => "align-pitch",
            ParamKey::AlignOnset => "align-onset",
            ParamKey::AlignDur => "align-dur",
            ParamKey::MinShiftMs => "min-shift-ms",
            ParamKey::MaxShiftMs => "max-shift-ms",
            ParamKey::MinDurMs => "min-dur-ms",
            ParamKey::MaxDurMs => "max-dur-ms",
            ParamKey::NumSplits => "num-splits",
            ParamKey::MaxGapMs => "max-gap-ms",
        }
    }

    pub fn is_flag(self) -> bool {
        matches!(self, ParamKey::AlignPitch | ParamKey::AlignOnset | ParamKey::AlignDur)
    }
}
