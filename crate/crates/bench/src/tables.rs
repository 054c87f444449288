//! Summary tables in CSV or Markdown.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::OutputFormat;
use crate::error::{BenchError, Result};
use crate::select::CellSummary;

const HEADER: [&str; 9] = [
    "dataset",
    "algorithm",
    "it_type",
    "u",
    "nmi",
    "cpu_seconds",
    "outer_iters",
    "total_subiters",
    "final_objective",
];

fn mean_std(mean: f64, std: f64, decimals: usize) -> String {
    if mean.is_nan() {
        "-".into()
    } else {
        format!("{mean:.decimals$} ({std:.decimals$})")
    }
}

fn cells(s: &CellSummary) -> [String; 9] {
    [
        s.dataset.clone(),
        s.algorithm.clone(),
        s.it_type.clone(),
        format!("{:e}", s.u),
        mean_std(s.nmi_mean, s.nmi_std, 3),
        mean_std(s.cpu_mean, s.cpu_std, 4),
        format!("{:.1}", s.outer_mean),
        format!("{:.1}", s.subiter_mean),
        format!("{:.6}", s.objective_mean),
    ]
}

/// NMI and CPU time as "mean (std)" with 3 and 4 decimals.
pub fn render_table(summaries: &[CellSummary], format: OutputFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut out = String::new();
    match format {
        OutputFormat::Markdown => {
            let _ = writeln!(out, "| {} |", HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
            for s in summaries {
                let _ = writeln!(out, "| {} |", cells(s).join(" | "));
            }
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(HEADER)?;
            for s in summaries {
                w.write_record(cells(s))?;
            }
            out = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
        }
    }
    Ok(out)
}

/// Renders and writes the table to `path`.
pub fn emit_tables(summaries: &[CellSummary], format: OutputFormat, path: &Path) -> Result<String> {
    let text = render_table(summaries, format)?;
    std::fs::write(path, &text)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::results::sample_row;
    use crate::select::summarize;

    fn two_by_two() -> Vec<CellSummary> {
        let mut rows = Vec::new();
        for (d, a, n) in [
            ("synthetic-circle", "IManPL-APG", 0.7),
            ("synthetic-circle", "IManPL-SSN", 0.65),
            ("synthetic-mixture", "IManPL-APG", 0.98765),
            ("synthetic-mixture", "IManPL-SSN", 0.5),
        ] {
            for seed in 0..2 {
                let mut r = sample_row(d, a, 1e-3, "LACC", seed, n + 0.01 * seed as f64);
                r.cpu_seconds = 1.0 + 0.5 * seed as f64;
                rows.push(r);
            }
        }
        summarize(&rows)
    }

    #[test]
    fn markdown_matches_golden() {
        let got = render_table(&two_by_two(), OutputFormat::Markdown).unwrap();
        let golden = include_str!("../tests/fixtures/summary_2x2.md");
        assert_eq!(got, golden);
    }

    #[test]
    fn one_row_gives_header_and_line() {
        let s = summarize(&[sample_row("d", "a", 0.1, "HACC", 0, 0.25)]);
        let md = render_table(&s, OutputFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 3);
        let csv = render_table(&s, OutputFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().contains("0.250 (0.010)"));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(render_table(&[], OutputFormat::Csv), Err(BenchError::Empty)));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let s = summarize(&[sample_row("d", "a", 0.1, "HACC", 0, 0.25)]);
        assert!(emit_tables(&s, OutputFormat::Csv, Path::new("/nonexistent/dir/t.csv")).is_err());
    }
}
