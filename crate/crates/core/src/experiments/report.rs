use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::plan::Partition;
use super::runner::{Run, RunRecord};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, Score};
use crate::preprocess::xml_escape;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

pub const ALL_FORMATS: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg];

const METRICS: [&str; 4] = ["accuracy", "precision", "recall", "f1"];

fn metric(m: &MetricReport, name: &str) -> Score {
    match name {
        "accuracy" => Score::Defined(m.accuracy),
        "precision" => m.precision,
        "recall" => m.recall,
        _ => m.f1,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per non-skipped cell and scored partition. Failed cells carry
/// `undef` metrics. The seconds column is empty unless `timings` is set.
pub fn cells_csv(record: &RunRecord, timings: bool) -> String {
    let mut out = String::from("dataset,model,sampler,ratio,partition,accuracy,precision,recall,f1,status,seconds\n");
    for c in record.cells.iter().filter(|c| !c.status.is_skipped()) {
        for &p in &record.partitions {
            let scores: Vec<String> = match c.metrics(p) {
                Some(m) => METRICS.iter().map(|k| metric(m, k).to_string()).collect(),
                None => vec!["undef".into(); 4],
            };
            let secs = if timings { format!("{:.3}", c.seconds) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&c.dataset),
                csv_field(&c.model),
                csv_field(&c.sampler),
                c.ratio,
                p.name(),
                scores.join(","),
                csv_field(&c.status.to_string()),
                secs
            );
        }
    }
    out
}

/// Label for each cell built from the grid dimensions that vary.
fn cell_labels(record: &RunRecord, idx: &[usize]) -> Vec<String> {
    let cells: Vec<_> = idx.iter().map(|&i| &record.cells[i]).collect();
    let parts = |c: &super::runner::CellResult| {
        [
            c.dataset.clone(),
            c.model.clone(),
            c.sampler.clone(),
            format!("ratio {}", c.ratio),
        ]
    };
    let varying: Vec<usize> = (0..4)
        .filter(|&k| cells.iter().any(|c| parts(c)[k] != parts(cells[0])[k]))
        .collect();
    cells
        .iter()
        .map(|c| {
            let p = parts(c);
            if varying.is_empty() {
                p[1].clone()
            } else {
                varying.iter().map(|&k| p[k].as_str()).collect::<Vec<_>>().join(" / ")
            }
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

/// Grouped bars: one group per metric, one bar per non-skipped cell.
/// Undefined scores are drawn as zero-height bars titled `undef`.
pub fn chart_svg(record: &RunRecord, partition: Partition) -> String {
    let idx: Vec<usize> = (0..record.cells.len())
        .filter(|&i| !record.cells[i].status.is_skipped())
        .collect();
    let labels = cell_labels(record, &idx);
    let n = idx.len().max(1);
    let (left, top, plot_h, bar_w, gap) = (50.0, 40.0, 240.0, 14.0, 24.0);
    let group_w = n as f64 * bar_w + gap;
    let width = left + METRICS.len() as f64 * group_w + 20.0;
    let legend_h = 16.0 * idx.len() as f64;
    let height = top + plot_h + 40.0 + legend_h + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="13">{} ({} data)</text>"#,
        xml_escape(&record.experiment),
        partition.name()
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>",
            width - 20.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (g, name) in METRICS.iter().enumerate() {
        let gx = left + g as f64 * group_w + gap / 2.0;
        for (b, &i) in idx.iter().enumerate() {
            let score = record.cells[i].metrics(partition).map(|m| metric(m, name));
            let (v, title) = match score.and_then(Score::value) {
                Some(v) => (v, format!("{v:.4}")),
                None => (0.0, "undef".to_string()),
            };
            let h = plot_h * v.clamp(0.0, 1.0);
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{:.1}" y="{:.1}" width="{bar_w}" height="{h:.1}" fill="{}"><title>{} {name}: {title}</title></rect>"#,
                gx + b as f64 * bar_w,
                top + plot_h - h,
                PALETTE[b % PALETTE.len()],
                xml_escape(&labels[b])
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
            gx + n as f64 * bar_w / 2.0,
            top + plot_h + 16.0
        );
    }
    for (b, label) in labels.iter().enumerate() {
        let y = top + plot_h + 36.0 + 16.0 * b as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 9.0,
            PALETTE[b % PALETTE.len()],
            left + 14.0,
            y,
            xml_escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `record.json`, `cells.csv`, `charts/<experiment>.svg` and, when
/// `save_models` is set, `models/<cell>.model`. Returns the written paths.
pub fn emit_report<S: Scalar>(
    run: &mut Run<S>,
    dir: &Path,
    formats: &[ReportFormat],
    chart_partition: Partition,
    timings: bool,
    save_models: bool,
) -> Result<Vec<PathBuf>> {
    mkdir(dir)?;
    let mut written = Vec::new();
    if save_models {
        let mdir = dir.join("models");
        mkdir(&mdir)?;
        for (cell, model) in run.record.cells.iter_mut().zip(&run.models) {
            if let Some(m) = model {
                let name = format!("{}.model", cell.key());
                let path = mdir.join(&name);
                m.save(&path)?;
                cell.model_file = Some(format!("models/{name}"));
                written.push(path);
            }
        }
    }
    let record = &run.record;
    for f in formats {
        let path = match f {
            ReportFormat::Json => {
                let p = dir.join("record.json");
                write(&p, &record.to_json()?)?;
                p
            }
            ReportFormat::Csv => {
                let p = dir.join("cells.csv");
                write(&p, &cells_csv(record, timings))?;
                p
            }
            ReportFormat::Svg => {
                let cdir = dir.join("charts");
                mkdir(&cdir)?;
                let partition = if record.partitions.contains(&chart_partition) {
                    chart_partition
                } else {
                    record.partitions[0]
                };
                let p = cdir.join(format!("{}.svg", record.experiment));
                write(&p, &chart_svg(record, partition))?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}
