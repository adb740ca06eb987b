//! Builds labeled clean/degraded excerpt pairs from a corpus of pieces and
//! lays them out on disk.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::degradations::DegradationId;
use crate::degrader::{Degrader, DegraderConfig};
use crate::error::{Error, Result};
use crate::formats::{self, DEFAULT_FRAME_MS};
use crate::io::{load_csv, write_csv};
use crate::note::{fix_overlaps, flatten_tracks, CorpusItem, Excerpt, Note};
use crate::random::RandomSource;

/// Degradations that vanish after frame quantization are re-drawn this many
/// times before the item is kept clean.
pub const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub excerpt_length_ms: u64,
    pub min_notes: usize,
    /// Degradation mix. Its own `seed` is not used: every item draws from a
    /// stream derived from `seed` below.
    pub degrader: DegraderConfig,
    /// Train, valid and test fractions.
    pub splits: [f64; 3],
    pub seed: u64,
    pub frame_ms: u64,
    pub excerpts_per_piece: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            excerpt_length_ms: 5000,
            min_notes: 10,
            degrader: DegraderConfig::default(),
            splits: [0.8, 0.1, 0.1],
            seed: 0,
            frame_ms: DEFAULT_FRAME_MS,
            excerpts_per_piece: 1,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_notes < 1 {
            return Err(Error::Config("min_notes must be at least 1".into()));
        }
        if self.excerpt_length_ms == 0 {
            return Err(Error::Config("excerpt_length_ms must be positive".into()));
        }
        if self.frame_ms == 0 {
            return Err(Error::Config("frame_ms must be positive".into()));
        }
        if self.excerpts_per_piece == 0 {
            return Err(Error::Config("excerpts_per_piece must be at least 1".into()));
        }
        if self.splits.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config("split fractions must be nonnegative".into()));
        }
        let total: f64 = self.splits.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {total}, expected 1")));
        }
        self.degrader.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExcerpt {
    pub item_id: String,
    pub split: Split,
    pub clean: Excerpt,
    pub degraded: Excerpt,
    pub label: DegradationId,
    pub frame_labels: Vec<bool>,
    /// Notes of `clean` replaced by the degradation (empty when loaded from
    /// disk).
    pub changed_before: Vec<Note>,
    /// Notes that replaced them.
    pub changed_after: Vec<Note>,
}

/// Picks a random anchor note and keeps every note starting within
/// `excerpt_length_ms` of it, re-based so the anchor starts at 0. Anchors
/// are tried in random order until one yields at least `min_notes` notes.
pub fn extract_excerpt(piece: &Excerpt, config: &DatasetConfig, rng: &mut RandomSource) -> Option<Excerpt> {
    if piece.len() < config.min_notes {
        return None;
    }
    let notes = piece.notes();
    let mut anchors: Vec<usize> = (0..notes.len()).collect();
    rng.shuffle(&mut anchors);
    for a in anchors {
        let start = notes[a].onset;
        let end = start.saturating_add(config.excerpt_length_ms);
        // notes are sorted by onset
        let lo = notes.partition_point(|n| n.onset < start);
        let hi = notes.partition_point(|n| n.onset < end);
        if hi - lo >= config.min_notes {
            return Some(Excerpt::from_valid(notes[lo..hi].to_vec()).rebased(start));
        }
    }
    None
}

/// Split sizes for `n` items by largest remainder; ties go to the earlier
/// split.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|x| x.floor() as usize);
    let assigned: usize = sizes.iter().sum();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Stable 64-bit FNV-1a, used to give every item its own random stream.
fn stream_id(item_id: &str) -> u64 {
    item_id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Preprocesses, excerpts and degrades every corpus item, then assigns
/// splits. Items are returned sorted by id. Pieces too short for an excerpt
/// are skipped with a warning.
pub fn build_dataset(corpus: &[CorpusItem], config: &DatasetConfig) -> Result<Vec<LabeledExcerpt>> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = corpus.iter().find(|c| !seen.insert(c.source_id.as_str())) {
        return Err(Error::Config(format!("duplicate source id {:?}", dup.source_id)));
    }
    let degrader = Degrader::new(config.degrader.clone())?;

    let mut sorted: Vec<&CorpusItem> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.source_id.cmp(&b.source_id));

    let mut items = Vec::new();
    for item in sorted {
        let piece = fix_overlaps(&flatten_tracks(&item.excerpt));
        let mut rng = RandomSource::stream(config.seed, stream_id(&item.source_id));
        for k in 0..config.excerpts_per_piece {
            let Some(clean) = extract_excerpt(&piece, config, &mut rng) else {
                warn!(
                    "{}: no {} ms window holds {} notes, skipping",
                    item.source_id, config.excerpt_length_ms, config.min_notes
                );
                break;
            };
            let item_id = if config.excerpts_per_piece == 1 {
                item.source_id.clone()
            } else {
                format!("{}-{k}", item.source_id)
            };
            items.push(label_item(item_id, clean, &degrader, config.frame_ms, &mut rng));
        }
    }
    if items.is_empty() {
        return Err(Error::Empty("no piece yielded an excerpt"));
    }
    items.sort_by(|a, b| a.item_id.cmp(&b.item_id));

    let sizes = split_sizes(items.len(), config.splits);
    let mut order: Vec<usize> = (0..items.len()).collect();
    RandomSource::stream(config.seed, 0).shuffle(&mut order);
    for (rank, &i) in order.iter().enumerate() {
        items[i].split = if rank < sizes[0] {
            Split::Train
        } else if rank < sizes[0] + sizes[1] {
            Split::Valid
        } else {
            Split::Test
        };
    }
    info!(
        "built {} items: {} train, {} valid, {} test",
        items.len(),
        sizes[0],
        sizes[1],
        sizes[2]
    );
    Ok(items)
}

fn label_item(
    item_id: String,
    clean: Excerpt,
    degrader: &Degrader,
    frame_ms: u64,
    rng: &mut RandomSource,
) -> LabeledExcerpt {
    for _ in 0..MAX_REDRAWS {
        let outcome = degrader.degrade_with(&clean, rng);
        let frame_labels = formats::frame_labels(&clean, &outcome.excerpt, frame_ms);
        let visible = frame_labels.iter().any(|&b| b);
        if outcome.label == DegradationId::None || visible {
            return LabeledExcerpt {
                item_id,
                split: Split::Train,
                degraded: outcome.excerpt,
                label: outcome.label,
                frame_labels,
                changed_before: outcome.changed_before,
                changed_after: outcome.changed_after,
                clean,
            };
        }
    }
    warn!("{item_id}: every drawn degradation vanished at frame level, keeping it clean");
    LabeledExcerpt {
        item_id,
        split: Split::Train,
        degraded: clean.clone(),
        label: DegradationId::None,
        frame_labels: formats::frame_labels(&clean, &clean, frame_ms),
        changed_before: Vec::new(),
        changed_after: Vec::new(),
        clean,
    }
}

pub const METADATA_HEADER: [&str; 4] = ["item_id", "split", "label", "frame_labels"];

/// Writes `<out>/<split>/<id>/{clean,degraded}.csv`, `<out>/metadata.csv`
/// and `<out>/config.json`.
pub fn write_dataset(out: impl AsRef<Path>, items: &[LabeledExcerpt], config: &DatasetConfig) -> Result<()> {
    let out = out.as_ref();
    for item in items {
        let dir = out.join(item.split.name()).join(&item.item_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_csv(&item.clean, dir.join("clean.csv"))?;
        write_csv(&item.degraded, dir.join("degraded.csv"))?;
    }

    let meta_path = out.join("metadata.csv");
    let file = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    let wrap = |e: csv::Error| Error::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(METADATA_HEADER).map_err(wrap)?;
    for item in items {
        w.write_record([
            item.item_id.as_str(),
            item.split.name(),
            item.label.name(),
            &formats::labels_to_string(&item.frame_labels),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(&meta_path, e))?;

    let config_path = out.join("config.json");
    let mut json = serde_json::to_string_pretty(config)?;
    json.push('\n');
    fs::write(&config_path, json).map_err(|e| Error::io(&config_path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataRow {
    pub item_id: String,
    pub split: Split,
    pub label: DegradationId,
    pub frame_labels: Vec<bool>,
}

pub fn read_metadata(dir: impl AsRef<Path>) -> Result<Vec<MetadataRow>> {
    let path = dir.as_ref().join("metadata.csv");
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| Error::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(METADATA_HEADER) {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header {}", METADATA_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i as u64 + 2;
        let bad = |message: String| Error::Csv { line, message };
        let record = record.map_err(|e| bad(e.to_string()))?;
        rows.push(MetadataRow {
            item_id: record[0].to_string(),
            split: record[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            label: record[2].parse().map_err(|e: Error| bad(e.to_string()))?,
            frame_labels: formats::labels_from_string(&record[3]).map_err(|e| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

pub fn read_config(dir: impl AsRef<Path>) -> Result<DatasetConfig> {
    let path = dir.as_ref().join("config.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a dataset written by [`write_dataset`].
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<LabeledExcerpt>> {
    let dir = dir.as_ref();
    read_metadata(dir)?
        .into_iter()
        .map(|row| {
            let item_dir = dir.join(row.split.name()).join(&row.item_id);
            Ok(LabeledExcerpt {
                clean: load_csv(item_dir.join("clean.csv"))?,
                degraded: load_csv(item_dir.join("degraded.csv"))?,
                item_id: row.item_id,
                split: row.split,
                label: row.label,
                frame_labels: row.frame_labels,
                changed_before: Vec::new(),
                changed_after: Vec::new(),
            })
        })
        .collect()
}
