//! One row per (dataset, algorithm, u, IT type, seed), read and written as CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const STATUS_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub algorithm: String,
    pub u: f64,
    pub it_type: String,
    pub seed: u64,
    /// Mean NMI over the k-means repeats; empty when there are no labels.
    pub nmi_mean: Option<f64>,
    pub nmi_std: Option<f64>,
    pub cpu_seconds: f64,
    pub outer_iters: usize,
    pub total_subiters: usize,
    pub final_objective: f64,
    pub initial_objective: f64,
    /// `ok` or `error: <message>`.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// Problems with the row's own fields, empty when consistent.
    pub fn violations(&self, max_outer: usize) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(n) = self.nmi_mean {
            if !(0.0..=1.0).contains(&n) {
                v.push(format!("nmi {n} outside [0, 1]"));
            }
        }
        if self.outer_iters > max_outer {
            v.push(format!("{} outer iterations exceed the cap {max_outer}", self.outer_iters));
        }
        if self.is_ok() && !(self.final_objective <= self.initial_objective) {
            v.push(format!(
                "final objective {} above initial {}",
                self.final_objective, self.initial_objective
            ));
        }
        v
    }

    /// Sort key: dataset, algorithm, IT type, u descending, seed.
    pub fn order(a: &ResultRow, b: &ResultRow) -> std::cmp::Ordering {
        (&a.dataset, &a.algorithm, &a.it_type)
            .cmp(&(&b.dataset, &b.algorithm, &b.it_type))
            .then(b.u.total_cmp(&a.u))
            .then(a.seed.cmp(&b.seed))
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
pub(crate) fn sample_row(dataset: &str, algorithm: &str, u: f64, it: &str, seed: u64, nmi: f64) -> ResultRow {
    ResultRow {
        dataset: dataset.into(),
        algorithm: algorithm.into(),
        u,
        it_type: it.into(),
        seed,
        nmi_mean: Some(nmi),
        nmi_std: Some(0.01),
        cpu_seconds: 0.5,
        outer_iters: 10,
        total_subiters: 100,
        final_objective: 1.0,
        initial_objective: 2.0,
        status: STATUS_OK.into(),
    }
}
