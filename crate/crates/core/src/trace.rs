//! Iteration records shared by every solver and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Inner,
    Outer,
}

/// One row of a run trace. `d3` is `‖Ax + Bx̄ + z‖` while `gap` is the
/// headline feasibility `‖Ax + Bx̄‖`. Quantities a solver does not track
/// are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub scope: Scope,
    pub k: usize,
    pub t: usize,
    pub beta: f64,
    pub rho: f64,
    pub l_val: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub z_norm: f64,
    pub gap: f64,
    pub lambda_norm: f64,
    pub objective: f64,
    /// Inner iterations of the round (outer rows) or the index `t` (inner rows).
    pub inner_iters: usize,
    /// Seconds since solver start; only filled when timing is requested,
    /// since it breaks bit-identical traces.
    pub wall_time: Option<f64>,
}

const COLUMNS: [&str; 16] = [
    "schema",
    "solver",
    "scope",
    "k",
    "t",
    "beta",
    "rho",
    "l_val",
    "d1",
    "d2",
    "d3",
    "z_norm",
    "primal_gap",
    "lambda_norm",
    "objective",
    "inner_iters",
];

/// Writes the records as CSV with a header row. The `wall_time` column is
/// present only when `with_time` is set. Floats use the shortest
/// round-trip representation.
pub fn write_trace_csv<W: Write>(
    w: W,
    solver: &str,
    records: &[TraceRecord],
    with_time: bool,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_time {
        header.push("wall_time");
    }
    wr.write_record(&header)?;
    for r in records {
        let scope = match r.scope {
            Scope::Inner => "inner",
            Scope::Outer => "outer",
        };
        let mut row = vec![
            TRACE_SCHEMA_VERSION.to_string(),
            solver.to_string(),
            scope.to_string(),
            r.k.to_string(),
            r.t.to_string(),
        ];
        for v in [
            r.beta,
            r.rho,
            r.l_val,
            r.d1,
            r.d2,
            r.d3,
            r.z_norm,
            r.gap,
            r.lambda_norm,
            r.objective,
        ] {
            row.push(format!("{v:?}"));
        }
        row.push(r.inner_iters.to_string());
        if with_time {
            row.push(format!("{:?}", r.wall_time.unwrap_or(f64::NAN)));
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
