use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mdtk_core::dataset::{load_dataset, read_config, read_metadata, MetadataRow};
use mdtk_core::eval::{
    evaluate_classification, evaluate_correction, evaluate_detection, evaluate_location, EvalReport, RuleBased, Task,
};
use mdtk_core::formats::{labels_from_string, labels_to_string};
use mdtk_core::io::{load_csv, write_csv};
use mdtk_core::{DegradationId, Excerpt, RandomSource, Split};

use crate::{EvaluateArgs, RuleBasedArgs};

/// Reads a two-column prediction CSV with the given header.
fn read_prediction_csv(path: &Path, column: &str) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let expected = format!("item_id,{column}");
    if lines.next().map(str::trim) != Some(expected.as_str()) {
        bail!("{}: expected header `{expected}`", path.display());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (id, value) = line
                .split_once(',')
                .with_context(|| format!("{} line {}: expected two columns", path.display(), i + 2))?;
            Ok((id.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}

/// Fails unless `predicted` names every expected id exactly once and nothing else.
fn check_ids<'a>(expected: &[String], predicted: impl IntoIterator<Item = &'a String>) -> Result<()> {
    let want: BTreeSet<&String> = expected.iter().collect();
    let mut seen = BTreeSet::new();
    let mut duplicate = BTreeSet::new();
    for id in predicted {
        if !seen.insert(id) {
            duplicate.insert(id.as_str());
        }
    }
    let missing: Vec<&str> = want.difference(&seen).map(|s| s.as_str()).collect();
    let extra: Vec<&str> = seen.difference(&want).map(|s| s.as_str()).collect();
    let mut problems = Vec::new();
    if !missing.is_empty() {
        problems.push(format!("missing predictions for {}", missing.join(", ")));
    }
    if !extra.is_empty() {
        problems.push(format!("predictions for unknown items {}", extra.join(", ")));
    }
    if !duplicate.is_empty() {
        problems.push(format!(
            "duplicate predictions for {}",
            duplicate.into_iter().collect::<Vec<_>>().join(", ")
        ));
    }
    if !problems.is_empty() {
        bail!("{}", problems.join("; "));
    }
    Ok(())
}

/// Task 1 labels: `none`, `clean` or `0` for clean; `degraded`, `1` or any
/// degradation name otherwise.
fn detection_label(value: &str) -> Result<bool> {
    match value {
        "none" | "clean" | "0" => Ok(false),
        "degraded" | "1" => Ok(true),
        other => Ok(other.parse::<DegradationId>()? != DegradationId::None),
    }
}

fn split_rows(dataset: &Path, split: Split) -> Result<Vec<MetadataRow>> {
    let rows: Vec<MetadataRow> = read_metadata(dataset)?
        .into_iter()
        .filter(|r| r.split == split)
        .collect();
    if rows.is_empty() {
        bail!("{}: the {split} split is empty", dataset.display());
    }
    Ok(rows)
}

fn score(
    task: Task,
    predictions: &Path,
    dataset: &Path,
    split: Split,
    model: &str,
    tolerance_ms: u64,
) -> Result<EvalReport> {
    let rows = split_rows(dataset, split)?;
    let ids: Vec<String> = rows.iter().map(|r| r.item_id.clone()).collect();
    let report = match task {
        Task::Detection | Task::Classification => {
            let column = read_prediction_csv(predictions, "label")?;
            check_ids(&ids, column.iter().map(|(id, _)| id))?;
            let predicted: BTreeMap<&str, &str> = column.iter().map(|(i, v)| (i.as_str(), v.as_str())).collect();
            let mut labeled = Vec::with_capacity(rows.len());
            for row in &rows {
                let value = predicted[row.item_id.as_str()];
                let label = if task == Task::Detection {
                    // only degraded vs. none is scored; any degradation stands in
                    if detection_label(value)? {
                        DegradationId::PitchShift
                    } else {
                        DegradationId::None
                    }
                } else {
                    value
                        .parse()
                        .with_context(|| format!("prediction for {}", row.item_id))?
                };
                labeled.push((row.item_id.clone(), label, row.label));
            }
            if task == Task::Detection {
                evaluate_detection(model, &labeled)?
            } else {
                evaluate_classification(model, &labeled)?
            }
        }
        Task::Location => {
            let column = read_prediction_csv(predictions, "frame_labels")?;
            check_ids(&ids, column.iter().map(|(id, _)| id))?;
            let predicted: BTreeMap<&str, &str> = column.iter().map(|(i, v)| (i.as_str(), v.as_str())).collect();
            let labeled = rows
                .iter()
                .map(|row| {
                    let p = labels_from_string(predicted[row.item_id.as_str()])
                        .with_context(|| format!("prediction for {}", row.item_id))?;
                    Ok((row.item_id.clone(), p, row.frame_labels.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate_location(model, &labeled)?
        }
        Task::Correction => {
            let frame_ms = read_config(dataset)?.frame_ms;
            let files = crate::inputs::by_stem(predictions)?;
            let stems: Vec<String> = files.iter().map(|(s, _)| s.clone()).collect();
            check_ids(&ids, &stems)?;
            let files: BTreeMap<String, _> = files.into_iter().collect();
            let items: BTreeMap<String, (Excerpt, Excerpt)> = load_dataset(dataset)?
                .into_iter()
                .filter(|i| i.split == split)
                .map(|i| (i.item_id, (i.clean, i.degraded)))
                .collect();
            let labeled = rows
                .iter()
                .map(|row| {
                    let corrected = load_csv(&files[&row.item_id])?;
                    let (clean, degraded) = items[&row.item_id].clone();
                    Ok((row.item_id.clone(), corrected, degraded, clean))
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate_correction(model, &labeled, frame_ms, tolerance_ms)?
        }
    };
    Ok(report)
}

fn print_table(reports: &[EvalReport]) {
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.task.number().to_string(),
                r.model.clone(),
                r.task.metric_name().to_string(),
                format!("{:.3}", r.headline()),
            ]
        })
        .collect();
    let header = ["Task", "Model", "Metric", "Value"].map(String::from);
    let widths: Vec<usize> = (0..4)
        .map(|c| rows.iter().chain([&header]).map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for row in [&header].into_iter().chain(&rows) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        println!("{}", line.join("  ").trim_end());
    }
}

fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    if let Some(confusion) = &report.confusion {
        let cm = mdtk_core::eval::ClassificationReport {
            accuracy: report.headline(),
            confusion: *confusion,
        };
        let csv_path = path.with_extension("confusion.csv");
        fs::write(&csv_path, cm.confusion_csv()).with_context(|| format!("writing {}", csv_path.display()))?;
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let task = Task::from_number(args.task).expect("clap restricts the range");
    let report = score(
        task,
        &args.predictions,
        &args.dataset,
        args.split,
        &args.model,
        args.tolerance_ms,
    )?;
    print_table(std::slice::from_ref(&report));
    if let Some(path) = &args.report {
        write_report(&report, path)?;
    }
    Ok(())
}

pub fn rule_based(args: &RuleBasedArgs) -> Result<()> {
    let frame_ms = read_config(&args.dataset)?.frame_ms;
    let items = load_dataset(&args.dataset)?;
    let train: Vec<_> = items.iter().filter(|i| i.split == Split::Train).cloned().collect();
    let model = RuleBased::fit(&train, frame_ms)?;
    let target: Vec<_> = items.iter().filter(|i| i.split == args.split).collect();
    if target.is_empty() {
        bail!("{}: the {} split is empty", args.dataset.display(), args.split);
    }

    let out = &args.out;
    let task4 = out.join("task4");
    fs::create_dir_all(&task4).with_context(|| format!("creating {}", task4.display()))?;
    let mut model_json = serde_json::to_string_pretty(&model)?;
    model_json.push('\n');
    fs::write(out.join("model.json"), model_json)?;

    let mut rng = RandomSource::new(args.seed);
    let (mut t1, mut t2, mut t3) = (
        String::from("item_id,label\n"),
        String::from("item_id,label\n"),
        String::from("item_id,frame_labels\n"),
    );
    for item in &target {
        let id = &item.item_id;
        t1.push_str(&format!("{id},{}\n", if model.detect() { "degraded" } else { "none" }));
        t2.push_str(&format!("{id},{}\n", model.classify(&mut rng)));
        t3.push_str(&format!(
            "{id},{}\n",
            labels_to_string(&model.locate(item.frame_labels.len()))
        ));
        write_csv(&model.correct(&item.degraded), task4.join(format!("{id}.csv")))?;
    }
    let paths = [out.join("task1.csv"), out.join("task2.csv"), out.join("task3.csv")];
    for (path, text) in paths.iter().zip([t1, t2, t3]) {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }

    let mut reports = Vec::new();
    for (task, predictions) in [
        (Task::Detection, &paths[0]),
        (Task::Classification, &paths[1]),
        (Task::Location, &paths[2]),
        (Task::Correction, &task4),
    ] {
        let report = score(
            task,
            predictions,
            &args.dataset,
            args.split,
            "rule_based",
            args.tolerance_ms,
        )?;
        write_report(&report, &out.join(format!("report_task{}.json", task.number())))?;
        reports.push(report);
    }
    print_table(&reports);
    Ok(())
}
