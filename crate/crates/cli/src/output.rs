//! Writes run artifacts: `series.csv`, `bounds_report.json`, `final.fsnap`
//! and `plotdata/*.tsv`.

use crate::scenario::{Outcome, PlotFile, Series};
use crate::CliError;
use std::fs;
use std::path::{Path, PathBuf};

pub const SERIES_FILE: &str = "series.csv";
pub const REPORT_FILE: &str = "bounds_report.json";
pub const SNAPSHOT_FILE: &str = "final.fsnap";
pub const PLOT_DIR: &str = "plotdata";

/// Integers print plainly, everything else in shortest round-trip
/// scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn render_csv(series: &Series) -> String {
    let mut out = series.header.join(",");
    out.push('\n');
    for row in &series.rows {
        let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render_tsv(plot: &PlotFile) -> String {
    let mut out = format!("# {}\t{}\n", plot.columns[0], plot.columns[1]);
    for &(x, y) in &plot.rows {
        out.push_str(&format!("{}\t{}\n", format_number(x), format_number(y)));
    }
    out
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

pub fn write_plotdata(plots: &[PlotFile], dir: &Path) -> Result<(), CliError> {
    if plots.is_empty() {
        return Ok(());
    }
    let pd = dir.join(PLOT_DIR);
    fs::create_dir_all(&pd).map_err(|source| CliError::Io {
        path: pd.clone(),
        source,
    })?;
    for p in plots {
        write(pd.join(format!("{}.tsv", p.name)), render_tsv(p))?;
    }
    Ok(())
}

pub fn write_artifacts(outcome: &Outcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(dir.join(SERIES_FILE), render_csv(&outcome.series))?;
    let mut json = serde_json::to_string_pretty(&outcome.report)?;
    json.push('\n');
    write(dir.join(REPORT_FILE), json)?;
    if let Some(f) = &outcome.snapshot {
        softbolt::snapshot::save_snapshot(f, dir.join(SNAPSHOT_FILE))?;
    }
    write_plotdata(&outcome.plots, dir)
}

/// Human-readable summary of a run directory's `bounds_report.json`.
pub fn render_report(dir: &Path) -> Result<String, CliError> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|source| CliError::Io { path, source })?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let mut out = String::new();
    let s = |k: &str| v.get(k).map(|x| x.to_string()).unwrap_or_else(|| "null".into());
    out.push_str(&format!("scenario       {}\n", s("scenario").trim_matches('"')));
    out.push_str(&format!("config hash    {}\n", s("config_hash").trim_matches('"')));
    if v.get("exploratory").and_then(|x| x.as_bool()) == Some(true) {
        out.push_str("exploratory    yes\n");
    }
    for k in ["C_plus", "K_minus", "K_loss", "C_emb", "ratio_baseline", "ratio_max"] {
        if let Some(x) = v.get(k).and_then(|x| x.as_f64()) {
            out.push_str(&format!("{k:<15}{x:e}\n"));
        }
    }
    if let Some(list) = v.get("verdicts").and_then(|x| x.as_array()) {
        out.push_str("verdicts\n");
        for c in list {
            let name = c.get("name").and_then(|x| x.as_str()).unwrap_or("?");
            let verdict = c.get("verdict").and_then(|x| x.as_str()).unwrap_or("?");
            let value = c.get("value").and_then(|x| x.as_f64());
            let detail = c.get("detail").and_then(|x| x.as_str()).unwrap_or("");
            let value = value.map(|x| format!("{x:e}")).unwrap_or_default();
            out.push_str(&format!("  {verdict:<13}{name:<36}{value:<24}{detail}\n"));
        }
    }
    if let Some(list) = v.get("warnings").and_then(|x| x.as_array()) {
        for w in list.iter().filter_map(|x| x.as_str()) {
            out.push_str(&format!("warning: {w}\n"));
        }
    }
    Ok(out)
}
