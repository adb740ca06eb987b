use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mdtk_core::dataset::{build_dataset, write_dataset, DatasetConfig};
use mdtk_core::degradations::{self, DegradationParams};
use mdtk_core::error_measure::{measure_errors as measure, read_profile, write_profile};
use mdtk_core::formats::{
    commands_from_ids, from_commands, from_piano_roll, quantize, read_roll, save_roll, to_commands, to_piano_roll,
    write_commands_csv, ROLL_MAGIC,
};
use mdtk_core::io::write_csv;
use mdtk_core::midi::MidiOptions;
use mdtk_core::{
    fix_overlaps, flatten_tracks, CorpusItem, DegradationId, Degrader, DegraderConfig, RandomSource, Split,
};
use serde_json::json;

use crate::inputs::{self, Source};
use crate::params::Overrides;
use crate::{DecodeArgs, DegradeArgs, EncodeArgs, Encoding, MakeDatasetArgs, MeasureErrorsArgs, MixArgs, DEFAULT_SEED};

fn parse_weights(text: &str) -> Result<BTreeMap<DegradationId, f64>> {
    let mut weights = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, weight) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("weight {part:?} is not name:weight"))?;
        let id: DegradationId = name.trim().parse()?;
        if id == DegradationId::None {
            bail!("`none` cannot be weighted; use --clean-proportion");
        }
        let weight: f64 = weight.trim().parse().with_context(|| format!("weight for {id}"))?;
        weights.insert(id, weight);
    }
    Ok(weights)
}

fn parse_splits(text: &str) -> Result<[f64; 3]> {
    let parts = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("split fraction {p:?}")))
        .collect::<Result<Vec<_>>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| anyhow!("--splits needs 3 fractions, got {}", v.len()))
}

/// Applies the mix flags and parameter overrides to `base`.
fn degrader_config(mix: &MixArgs, mut base: DegraderConfig, overrides: &Overrides) -> Result<DegraderConfig> {
    overrides.apply(&mut base.params)?;
    if let Some(path) = &mix.profile {
        let profile = read_profile(path).with_context(|| format!("reading profile {}", path.display()))?;
        return Ok(DegraderConfig::from_profile(&profile, base.params, base.seed)?);
    }
    if let Some(p) = mix.clean_proportion {
        base.clean_proportion = p;
    }
    if let Some(w) = &mix.weights {
        base.weights = parse_weights(w)?;
    }
    base.validate()?;
    Ok(base)
}

fn ensure_writable_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        let occupied = fs::read_dir(out)
            .with_context(|| format!("{} is not a directory", out.display()))?
            .next()
            .is_some();
        if occupied && !force {
            bail!("{} is not empty; pass --force to write into it", out.display());
        }
    }
    Ok(())
}

pub fn make_dataset(args: &MakeDatasetArgs, overrides: &Overrides) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => DatasetConfig {
            seed: DEFAULT_SEED,
            ..Default::default()
        },
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(v) = args.frame_ms {
        config.frame_ms = v;
    }
    if let Some(v) = args.excerpt_ms {
        config.excerpt_length_ms = v;
    }
    if let Some(v) = args.min_notes {
        config.min_notes = v;
    }
    if let Some(v) = &args.splits {
        config.splits = parse_splits(v)?;
    }
    if let Some(v) = args.excerpts_per_piece {
        config.excerpts_per_piece = v;
    }
    config.degrader = degrader_config(&args.mix, config.degrader, overrides)?;
    config.validate()?;
    ensure_writable_dir(&args.out, args.force)?;

    let options = MidiOptions {
        exclude_drums: args.exclude_drums,
    };
    let sources = inputs::collect(&args.inputs)?;
    let mut corpus = Vec::with_capacity(sources.len());
    for Source { id, path } in sources {
        match inputs::load(&path, options) {
            Ok(excerpt) => corpus.push(CorpusItem { source_id: id, excerpt }),
            Err(e) => log::warn!("{e:#}; skipping"),
        }
    }
    if corpus.is_empty() {
        bail!("no readable input files");
    }
    log::info!("read {} pieces", corpus.len());

    let items = build_dataset(&corpus, &config)?;
    write_dataset(&args.out, &items, &config)?;
    let count = |s: Split| items.iter().filter(|i| i.split == s).count();
    log::info!(
        "wrote {} items to {} (train {}, valid {}, test {})",
        items.len(),
        args.out.display(),
        count(Split::Train),
        count(Split::Valid),
        count(Split::Test)
    );
    Ok(())
}

pub fn measure_errors(args: &MeasureErrorsArgs) -> Result<()> {
    let transcriptions = inputs::by_stem(&args.transcriptions)?;
    let truths: BTreeMap<String, _> = inputs::by_stem(&args.ground_truth)?.into_iter().collect();

    let mut unmatched = Vec::new();
    let mut pairs = Vec::new();
    for (stem, path) in &transcriptions {
        let Some(truth_path) = truths.get(stem) else {
            unmatched.push(path.display().to_string());
            continue;
        };
        let loaded = inputs::load(path, MidiOptions::default())
            .and_then(|t| Ok((t, inputs::load(truth_path, MidiOptions::default())?)));
        match loaded {
            Ok(pair) => pairs.push(pair),
            Err(e) => log::warn!("{e:#}; skipping {stem}"),
        }
    }
    let stems: std::collections::BTreeSet<&String> = transcriptions.iter().map(|(s, _)| s).collect();
    unmatched.extend(
        truths
            .iter()
            .filter(|(s, _)| !stems.contains(s))
            .map(|(_, p)| p.display().to_string()),
    );
    if !unmatched.is_empty() {
        log::warn!("skipping {} unmatched files: {}", unmatched.len(), unmatched.join(", "));
    }
    if pairs.is_empty() {
        bail!("no transcription/ground-truth pairs with matching names");
    }

    let profile = measure(&pairs, args.threshold_ms)?;
    write_profile(&profile, &args.out)?;
    log::info!(
        "measured {} pairs: clean {:.4}, written to {}",
        pairs.len(),
        profile.clean,
        args.out.display()
    );
    Ok(())
}

pub fn degrade(args: &DegradeArgs, overrides: &Overrides) -> Result<()> {
    let raw = inputs::load(
        &args.input,
        MidiOptions {
            exclude_drums: args.exclude_drums,
        },
    )?;
    let excerpt = fix_overlaps(&flatten_tracks(&raw));
    if excerpt.len() != raw.len() {
        log::info!("merged {} overlapping notes", raw.len() - excerpt.len());
    }

    let outcome = if args.kind == "random" {
        let base = DegraderConfig {
            seed: args.seed,
            ..Default::default()
        };
        Degrader::new(degrader_config(&args.mix, base, overrides)?)?.degrade(&excerpt)
    } else {
        let id: DegradationId = args.kind.parse()?;
        if id == DegradationId::None {
            bail!("`none` is not a degradation");
        }
        if args.mix.profile.is_some() || args.mix.weights.is_some() || args.mix.clean_proportion.is_some() {
            bail!("--profile, --weights and --clean-proportion only apply to --type random");
        }
        let mut params: BTreeMap<DegradationId, DegradationParams> = BTreeMap::new();
        overrides.apply(&mut params)?;
        let p = params.remove(&id).unwrap_or_default();
        let mut rng = RandomSource::new(args.seed);
        match degradations::apply(id, &excerpt, &p, &mut rng) {
            Ok(outcome) => outcome,
            Err(inapplicable) => {
                log::warn!("{inapplicable}; no output written");
                bail!("degradation not applied");
            }
        }
    };

    write_csv(&outcome.excerpt, &args.out)?;
    let sidecar = args.out.with_extension("label.json");
    let label = json!({
        "label": outcome.label.name(),
        "seed": args.seed,
        "changed_before": outcome.changed_before,
        "changed_after": outcome.changed_after,
    });
    let mut text = serde_json::to_string_pretty(&label)?;
    text.push('\n');
    fs::write(&sidecar, text).with_context(|| format!("writing {}", sidecar.display()))?;
    log::info!("{}: {}", args.out.display(), outcome.label);
    Ok(())
}

pub fn encode(args: &EncodeArgs) -> Result<()> {
    if args.frame_ms == 0 {
        bail!("--frame-ms must be positive");
    }
    let excerpt = inputs::load(&args.input, MidiOptions::default())?;
    let q = quantize(&excerpt, args.frame_ms);
    match args.format {
        Encoding::Commands => {
            let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
            write_commands_csv(BufWriter::new(file), &to_commands(&q))?;
        }
        Encoding::PianoRoll => save_roll(&to_piano_roll(&q), &args.out)?,
    }
    Ok(())
}

fn read_command_ids(text: &str) -> Result<Vec<u16>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "id,token" => {}
        _ => bail!("expected header `id,token`"),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let id = line.split(',').next().unwrap_or_default().trim();
            id.parse()
                .with_context(|| format!("line {}: bad command id {id:?}", i + 1))
        })
        .collect()
}

pub fn decode(args: &DecodeArgs) -> Result<()> {
    if args.frame_ms == 0 {
        bail!("--frame-ms must be positive");
    }
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let q = if bytes.starts_with(ROLL_MAGIC) {
        from_piano_roll(&read_roll(bytes.as_slice())?, args.frame_ms)?
    } else {
        let text = String::from_utf8(bytes).context("command file is not UTF-8")?;
        let ids = read_command_ids(&text).with_context(|| args.input.display().to_string())?;
        from_commands(&commands_from_ids(&ids)?, args.frame_ms)?
    };
    write_csv(&q.to_excerpt(), &args.out)?;
    Ok(())
}
