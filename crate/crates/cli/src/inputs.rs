use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mdtk_core::io::load_csv;
use mdtk_core::midi::{load_midi_with, MidiOptions};
use mdtk_core::Excerpt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Midi,
    Csv,
}

pub fn kind(path: &Path) -> Option<Kind> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "mid" | "midi" => Some(Kind::Midi),
        "csv" => Some(Kind::Csv),
        _ => None,
    }
}

pub fn load(path: &Path, options: MidiOptions) -> Result<Excerpt> {
    let excerpt = match kind(path) {
        Some(Kind::Midi) => load_midi_with(path, options),
        Some(Kind::Csv) => load_csv(path),
        None => bail!("{}: expected a .mid, .midi or .csv file", path.display()),
    };
    excerpt.with_context(|| format!("reading {}", path.display()))
}

/// A readable input together with the id it gets in a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Source {
    pub id: String,
    pub path: PathBuf,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .with_context(|| format!("listing {}", dir.display()))?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            walk(&path, out)?;
        } else if kind(&path).is_some() {
            out.push(path);
        }
    }
    Ok(())
}

fn id_for(path: &Path, root: Option<&Path>) -> String {
    let rel = root.and_then(|r| path.strip_prefix(r).ok()).unwrap_or(path);
    let rel = rel.with_extension("");
    match root {
        Some(_) => rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("_"),
        None => rel
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    }
}

/// Expands files and directories into sources. Files inside a directory are
/// named by their path relative to it, with `_` between components.
pub fn collect(inputs: &[PathBuf]) -> Result<Vec<Source>> {
    let mut sources = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files = Vec::new();
            walk(input, &mut files)?;
            if files.is_empty() {
                log::warn!("{}: no MIDI or CSV files found", input.display());
            }
            sources.extend(files.into_iter().map(|path| Source {
                id: id_for(&path, Some(input)),
                path,
            }));
        } else if input.exists() {
            if kind(input).is_none() {
                log::warn!("{}: not a MIDI or CSV file, skipping", input.display());
                continue;
            }
            sources.push(Source {
                id: id_for(input, None),
                path: input.clone(),
            });
        } else {
            bail!("{}: no such file or directory", input.display());
        }
    }
    Ok(sources)
}

/// Files directly inside `dir`, keyed by name without extension.
pub fn by_stem(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        bail!("{}: not a directory", dir.display());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && kind(&path).is_some() {
            files.push((id_for(&path, None), path));
        }
    }
    files.sort();
    Ok(files)
}
