//! Best-`u` selection by mean NMI.

use std::collections::{BTreeMap, BTreeSet};

use imanpl::data::nmi::mean_std;

use crate::error::{BenchError, Result};
use crate::results::ResultRow;

/// Statistics of one (dataset, algorithm, IT type, u) cell over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub dataset: String,
    pub algorithm: String,
    pub it_type: String,
    pub u: f64,
    pub seeds: usize,
    /// Seeds whose row has an error status.
    pub failures: usize,
    /// Mean of the per-seed NMI means; NaN without scores.
    pub nmi_mean: f64,
    /// Spread over every k-means repeat of every seed.
    pub nmi_std: f64,
    pub cpu_mean: f64,
    pub cpu_std: f64,
    pub outer_mean: f64,
    pub subiter_mean: f64,
    pub objective_mean: f64,
}

type GroupKey = (String, String, String);

fn group_key(r: &ResultRow) -> GroupKey {
    (r.dataset.clone(), r.algorithm.clone(), r.it_type.clone())
}

/// Pooled standard deviation of equally sized groups given their means and
/// standard deviations.
fn pooled_std(means: &[f64], stds: &[f64]) -> f64 {
    let n = means.len() as f64;
    let grand = means.iter().sum::<f64>() / n;
    let second = means.iter().zip(stds).map(|(m, s)| s * s + m * m).sum::<f64>() / n;
    (second - grand * grand).max(0.0).sqrt()
}

/// One summary per (dataset, algorithm, IT type, u), ordered like the rows.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(GroupKey, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        // Negated bits of a positive float sort descending in u.
        cells.entry((group_key(r), u64::MAX - r.u.to_bits())).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((key, _), rs)| {
            let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.is_ok()).collect();
            let scored: Vec<(f64, f64)> = ok
                .iter()
                .filter_map(|r| Some((r.nmi_mean?, r.nmi_std.unwrap_or(0.0))))
                .collect();
            let (means, stds): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
            let (nmi_mean, nmi_std) = if means.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (mean_std(&means).0, pooled_std(&means, &stds))
            };
            let col = |f: fn(&ResultRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (cpu_mean, cpu_std) = mean_std(&col(|r| r.cpu_seconds));
            CellSummary {
                dataset: key.0,
                algorithm: key.1,
                it_type: key.2,
                u: rs[0].u,
                seeds: rs.len(),
                failures: rs.len() - ok.len(),
                nmi_mean,
                nmi_std,
                cpu_mean,
                cpu_std,
                outer_mean: mean_std(&col(|r| r.outer_iters as f64)).0,
                subiter_mean: mean_std(&col(|r| r.total_subiters as f64)).0,
                objective_mean: mean_std(&col(|r| r.final_objective)).0,
            }
        })
        .collect()
}

/// Per (dataset, algorithm, IT type), the `u` with the largest mean NMI; ties
/// go to the larger `u`. Every group must have rows for every `u` that
/// appears anywhere in `rows`, and at least one cell with scores.
pub fn sweep_and_select(rows: &[ResultRow]) -> Result<Vec<CellSummary>> {
    if rows.is_empty() {
        return Err(BenchError::Empty);
    }
    let grid: BTreeSet<u64> = rows.iter().map(|r| r.u.to_bits()).collect();
    let summaries = summarize(rows);
    let mut by_group: BTreeMap<GroupKey, Vec<CellSummary>> = BTreeMap::new();
    for s in summaries {
        by_group
            .entry((s.dataset.clone(), s.algorithm.clone(), s.it_type.clone()))
            .or_default()
            .push(s);
    }
    let mut best = Vec::new();
    for (key, cells) in by_group {
        let have: BTreeSet<u64> = cells.iter().map(|c| c.u.to_bits()).collect();
        let missing: Vec<f64> = grid.difference(&have).map(|b| f64::from_bits(*b)).collect();
        if !missing.is_empty() {
            return Err(BenchError::IncompleteSweep {
                dataset: key.0,
                algorithm: key.1,
                it_type: key.2,
                missing,
            });
        }
        // Cells are in descending u, so a strict comparison keeps the larger u on ties.
        let pick = cells
            .into_iter()
            .filter(|c| !c.nmi_mean.is_nan())
            .fold(None::<CellSummary>, |acc, c| match acc {
                Some(a) if a.nmi_mean >= c.nmi_mean => Some(a),
                _ => Some(c),
            });
        match pick {
            Some(c) => best.push(c),
            None => {
                return Err(BenchError::Config(format!(
                    "no NMI scores for {}/{}/{}",
                    key.0, key.1, key.2
                )))
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::results::sample_row;

    fn grid(nmis: &[(f64, f64)]) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for &(u, n) in nmis {
            for seed in 0..3 {
                rows.push(sample_row("d", "a", u, "LACC", seed, n));
            }
        }
        rows
    }

    #[test]
    fn single_u_is_returned() {
        let best = sweep_and_select(&grid(&[(1e-3, 0.4)])).unwrap();
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].u, 1e-3);
        assert_eq!(best[0].seeds, 3);
    }

    #[test]
    fn dominant_u_is_selected() {
        let best = sweep_and_select(&grid(&[(1e-2, 0.5), (1e-3, 0.9), (1e-4, 0.7), (1e-5, 0.6)])).unwrap();
        assert_eq!(best[0].u, 1e-3);
        assert!((best[0].nmi_mean - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_the_larger_u() {
        let best = sweep_and_select(&grid(&[(1e-4, 0.8), (1e-2, 0.8), (1e-3, 0.5)])).unwrap();
        assert_eq!(best[0].u, 1e-2);
    }

    #[test]
    fn missing_cells_are_an_error() {
        let mut rows = grid(&[(1e-2, 0.5), (1e-3, 0.9)]);
        rows.push(sample_row("d", "a", 1e-3, "HACC", 0, 0.9));
        match sweep_and_select(&rows) {
            Err(BenchError::IncompleteSweep { it_type, missing, .. }) => {
                assert_eq!(it_type, "HACC");
                assert_eq!(missing, vec![1e-2]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn groups_are_selected_independently() {
        let mut rows = grid(&[(1e-2, 0.5), (1e-3, 0.9)]);
        rows.extend(
            grid(&[(1e-2, 0.7), (1e-3, 0.2)])
                .into_iter()
                .map(|r| ResultRow { it_type: "HACC".into(), ..r }),
        );
        let best = sweep_and_select(&rows).unwrap();
        assert_eq!(best.len(), 2);
        assert_eq!((best[0].it_type.as_str(), best[0].u), ("HACC", 1e-2));
        assert_eq!((best[1].it_type.as_str(), best[1].u), ("LACC", 1e-3));
    }

    #[test]
    fn pooled_std_matches_direct_computation() {
        // Two seeds: repeats {0.1, 0.3} and {0.5, 0.9}.
        let means = [0.2, 0.7];
        let stds = [0.1, 0.2];
        let all = [0.1, 0.3, 0.5, 0.9];
        assert!((pooled_std(&means, &stds) - mean_std(&all).1).abs() < 1e-15);
    }

    #[test]
    fn failed_rows_are_counted_not_scored() {
        let mut rows = grid(&[(1e-3, 0.6)]);
        rows[0].status = "error: x".into();
        rows[0].nmi_mean = Some(0.0);
        let s = &summarize(&rows)[0];
        assert_eq!(s.failures, 1);
        assert!((s.nmi_mean - 0.6).abs() < 1e-15);
    }
}
