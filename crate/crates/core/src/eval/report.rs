//! Deterministic report emission: metrics.json, sweep.csv, history.jsonl,
//! ablation.csv and plot-ready CSV files. All floats are serialized with 10
//! significant digits; re-emitting identical results yields byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_err, Result};
use crate::eval::experiments::{AblationResult, SweepResult};
use crate::eval::metrics::MetricsReport;
use crate::training::HistoryEntry;

/// Scientific notation with 10 significant digits; parses back as a JSON
/// number.
pub fn format_g10(x: f64) -> String {
    format!("{:.9e}", x)
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// Everything a run can contribute to a report; absent parts are skipped.
#[derive(Default)]
pub struct ReportBundle<'a> {
    pub metrics: Option<&'a MetricsReport>,
    pub sweep: Option<&'a SweepResult>,
    pub history: Option<&'a [HistoryEntry]>,
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, content).map_err(io_err(path))?;
    Ok(())
}

fn render_metrics_json(m: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"accuracy_cell\": {},", format_g10(m.accuracy_cell));
    let _ = writeln!(
        out,
        "  \"accuracy_label_level\": {},",
        format_g10(m.accuracy_label_level)
    );
    let _ = writeln!(out, "  \"macro_f1\": {},", format_g10(m.macro_f1));
    let _ = writeln!(out, "  \"n_test_cells\": {},", m.n_test_cells);
    out.push_str("  \"per_attribute_accuracy\": {");
    let mut first = true;
    for (name, acc) in &m.per_attribute_accuracy {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "\n    \"{}\": {}", escape_json(name), format_g10(*acc));
    }
    out.push_str("\n  },\n");
    out.push_str("  \"labels\": [");
    for (i, l) in m.labels.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "\n    {{\"attribute\": \"{}\", \"label\": \"{}\", \"tp\": {}, \"tn\": {}, \"fp\": {}, \"fn\": {}, \"precision\": {}, \"recall\": {}}}",
            escape_json(&l.attribute),
            escape_json(&l.label),
            l.tp,
            l.tn,
            l.fp,
            l.fn_,
            format_g10(l.precision),
            format_g10(l.recall)
        );
    }
    out.push_str("\n  ]\n}\n");
    out
}

fn render_sweep_csv(s: &SweepResult) -> String {
    let mut out = String::from("axis,value,mean,std,n_seeds\n");
    for p in &s.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.axis,
            format_g10(p.value),
            format_g10(p.mean),
            format_g10(p.std),
            p.seeds.len()
        );
    }
    out
}

fn render_history_jsonl(history: &[HistoryEntry]) -> String {
    let mut out = String::new();
    for e in history {
        let l = &e.losses;
        let _ = write!(
            out,
            "{{\"iteration\": {}, \"l_vae\": {}, \"l_recon\": {}, \"l_kl\": {}, \"l_d\": {}, \"l_gnn\": {}, \"l_mi\": {}, \"beta\": {}, \"lambda\": {}, \"total\": {}",
            e.iteration,
            format_g10(l.l_vae),
            format_g10(l.l_recon),
            format_g10(l.l_kl),
            format_g10(l.l_d),
            format_g10(l.l_gnn),
            format_g10(l.l_mi),
            format_g10(l.beta),
            format_g10(l.lambda),
            format_g10(l.total)
        );
        if let Some(acc) = e.val_accuracy {
            let _ = write!(out, ", \"val_accuracy\": {}", format_g10(acc));
        }
        out.push_str("}\n");
    }
    out
}

fn render_loss_curves_csv(history: &[HistoryEntry]) -> String {
    let mut out = String::from("iteration,total,l_vae,l_recon,l_kl,l_d,l_gnn,l_mi,val_accuracy\n");
    for e in history {
        let l = &e.losses;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.iteration,
            format_g10(l.total),
            format_g10(l.l_vae),
            format_g10(l.l_recon),
            format_g10(l.l_kl),
            format_g10(l.l_d),
            format_g10(l.l_gnn),
            format_g10(l.l_mi),
            e.val_accuracy.map(format_g10).unwrap_or_default()
        );
    }
    out
}

fn render_sweep_points_csv(s: &SweepResult) -> String {
    let mut out = String::from("value,seed,accuracy\n");
    for p in &s.points {
        for (seed, acc) in p.seeds.iter().zip(&p.accuracies) {
            let _ = writeln!(out, "{},{},{}", format_g10(p.value), seed, format_g10(*acc));
        }
    }
    out
}

fn render_per_attribute_csv(m: &MetricsReport) -> String {
    let mut out = String::from("attribute,accuracy\n");
    for (name, acc) in &m.per_attribute_accuracy {
        let _ = writeln!(out, "{},{}", name, format_g10(*acc));
    }
    out
}

/// Writes the report files for whatever the bundle contains and returns the
/// paths written.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    if let Some(metrics) = bundle.metrics {
        let path = out_dir.join("metrics.json");
        write_file(&path, &render_metrics_json(metrics))?;
        written.push(path);
        let plot = out_dir.join("plotdata").join("per_attribute_accuracy.csv");
        write_file(&plot, &render_per_attribute_csv(metrics))?;
        written.push(plot);
    }
    if let Some(sweep) = bundle.sweep {
        let path = out_dir.join("sweep.csv");
        write_file(&path, &render_sweep_csv(sweep))?;
        written.push(path);
        let plot = out_dir.join("plotdata").join("sweep_points.csv");
        write_file(&plot, &render_sweep_points_csv(sweep))?;
        written.push(plot);
    }
    if let Some(history) = bundle.history {
        let path = out_dir.join("history.jsonl");
        write_file(&path, &render_history_jsonl(history))?;
        written.push(path);
        let plot = out_dir.join("plotdata").join("loss_curves.csv");
        write_file(&plot, &render_loss_curves_csv(history))?;
        written.push(plot);
    }
    Ok(written)
}

/// Writes the ablation table as `ablation.csv` (mode, mean, std, n_seeds).
pub fn emit_ablation_csv(result: &AblationResult, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut out = String::from("mode,mean,std,n_seeds\n");
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.mode,
            format_g10(row.mean),
            format_g10(row.std),
            result.seeds.len()
        );
    }
    let path = out_dir.join("ablation.csv");
    write_file(&path, &out)?;
    Ok(path)
}
