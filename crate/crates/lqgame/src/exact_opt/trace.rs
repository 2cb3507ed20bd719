use std::io::Write;

use crate::error::{LqError, Result};

/// Extra columns emitted by the zeroth-order drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoColumns {
    pub batch_size: usize,
    pub radius: f64,
    /// Cosine to the exact gradient; only populated in validation mode.
    pub estimator_cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub lambda_min_h: f64,
    /// Matrix-monotone decrease of `P` (and non-decreasing `λ_min(H)`) since
    /// the previous record; always true where the notion does not apply.
    pub ir_ok: bool,
    /// Seconds since the start of the run. Not serialised: the CSV output
    /// must be reproducible bit for bit.
    pub wall_time_s: f64,
    pub zo: Option<ZoColumns>,
}

/// Per-iteration log of one optimisation run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; iteration indices must be strictly increasing.
    pub fn push(&mut self, rec: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.iter > last.iter, "trace indices must increase ({} after {})", rec.iter, last.iter);
        }
        self.records.push(rec);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ir_violations(&self) -> usize {
        self.records.iter().filter(|r| !r.ir_ok).count()
    }

    fn is_zo(&self) -> bool {
        self.records.iter().any(|r| r.zo.is_some())
    }

    /// Writes `iter, objective, grad_norm, lambda_min_H, ir_ok` (plus
    /// `batch_size, radius, estimator_cosine` for zeroth-order runs).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| LqError::InvalidParameter(format!("writing trace: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let zo = self.is_zo();
        let mut header = vec!["iter", "objective", "grad_norm", "lambda_min_H", "ir_ok"];
        if zo {
            header.extend(["batch_size", "radius", "estimator_cosine"]);
        }
        w.write_record(&header).map_err(io)?;
        for r in &self.records {
            let mut row = vec![
                r.iter.to_string(),
                r.objective.to_string(),
                r.grad_norm.to_string(),
                r.lambda_min_h.to_string(),
                r.ir_ok.to_string(),
            ];
            if zo {
                let z = r.zo.unwrap_or(ZoColumns { batch_size: 0, radius: 0.0, estimator_cosine: None });
                row.push(z.batch_size.to_string());
                row.push(z.radius.to_string());
                row.push(z.estimator_cosine.map(|c| c.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| LqError::InvalidParameter(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// How a driver terminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Converged { iter: usize },
    MaxIterations,
    /// The inner objective decreased: the ascent stepsize is too large.
    StepsizeTooLarge { iter: usize },
    /// Objective change below `1e-14` for 50 consecutive steps.
    Stalled { iter: usize },
    /// Monotonicity of `P` / `λ_min(H)` failed at this outer iteration.
    IrViolation { iter: usize },
    /// The iterate left the feasible set 𝒦.
    Infeasible { iter: usize, step: usize, eigenvalue: f64 },
    /// Non-finite or runaway values.
    Diverged { iter: usize },
}

impl RunStatus {
    pub fn converged(&self) -> bool {
        matches!(self, RunStatus::Converged { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged { .. } => "converged",
            RunStatus::MaxIterations => "max_iterations",
            RunStatus::StepsizeTooLarge { .. } => "stepsize_too_large",
            RunStatus::Stalled { .. } => "stalled",
            RunStatus::IrViolation { .. } => "ir_violation",
            RunStatus::Infeasible { .. } => "infeasible",
            RunStatus::Diverged { .. } => "diverged",
        }
    }
}
