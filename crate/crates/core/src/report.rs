//! Experiment reports: convergence tables, weak-form residuals, and energy
//! (Gronwall) audits, with CSV serialization.
//!
//! CSV output uses fixed 12-digit scientific notation so that repeated runs
//! of the same configuration are byte-identical. Wall-clock measurements are
//! real but live in the JSON metadata, never in the CSV rows, for the same
//! reason: callers that want reproducible files write 0 into the CSV column
//! and keep the timing in metadata.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One measurement row of a scale sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eta: f64,
    pub norm: f64,
    /// Measured norm divided by the a-priori bound (product of data norms);
    /// boundedness of this ratio across η is the checkable claim.
    pub bound_ratio: f64,
    /// Wall-clock seconds for this row. Written as provided; deterministic
    /// pipelines set it to 0 and report timings in metadata instead.
    pub wallclock_s: f64,
}

/// A table of (η, norm) measurements with run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Free-form run description: field name, exponents, grid spacing, and
    /// anything else the experiment wants to preserve.
    pub metadata: serde_json::Value,
}

impl ConvergenceReport {
    pub fn new(rows: Vec<ConvergenceRow>, metadata: serde_json::Value) -> Self {
        ConvergenceReport { rows, metadata }
    }

    /// Least-squares slope of ln(norm) against ln(η): the empirical decay
    /// rate. Rows with nonpositive norm are skipped; needs at least two
    /// usable rows, otherwise returns None.
    pub fn fitted_rate(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.norm > 0.0 && r.eta > 0.0)
            .map(|r| (r.eta.ln(), r.norm.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            return None;
        }
        Some((n * sxy - sx * sy) / denom)
    }

    /// Whether the measured norms decrease strictly down the table.
    pub fn norms_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].norm < w[0].norm)
    }

    /// Whether every bound ratio stays within `factor` of the first row's.
    pub fn ratio_bounded_within(&self, factor: f64) -> bool {
        match self.rows.first() {
            None => true,
            Some(first) => self
                .rows
                .iter()
                .all(|r| r.bound_ratio <= factor * first.bound_ratio + 1e-300),
        }
    }

    /// Serialize as CSV: '#'-prefixed purpose/metadata comments, a header
    /// line, then fixed-format rows.
    pub fn to_csv<W: Write>(&self, w: &mut W, purpose: &str) -> Result<()> {
        for line in purpose.lines() {
            writeln!(w, "# {line}")?;
        }
        if !self.metadata.is_null() {
            writeln!(w, "# metadata: {}", compact_json(&self.metadata))?;
        }
        writeln!(w, "eta,norm,bound_ratio,wallclock_s")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                r.eta, r.norm, r.bound_ratio, r.wallclock_s
            )?;
        }
        Ok(())
    }
}

fn compact_json(v: &serde_json::Value) -> String {
    serde_json::to_string(v).unwrap_or_else(|_| "{}".into())
}

/// The weak-form functional evaluated against one test function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakResidualReport {
    /// Which test function was used (corpus id or description).
    pub test_function_id: String,
    /// Value of the four-term functional.
    pub value: f64,
    /// Crude estimate of the quadrature error in `value`, from comparing
    /// full- and half-resolution evaluations of the same sums.
    pub quadrature_error_estimate: f64,
}

/// Serialize a batch of weak-residual measurements as CSV.
pub fn weak_residuals_to_csv<W: Write>(
    w: &mut W,
    purpose: &str,
    reports: &[WeakResidualReport],
) -> Result<()> {
    for line in purpose.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "test_function,residual,quadrature_error")?;
    for r in reports {
        writeln!(
            w,
            "{},{:.12e},{:.12e}",
            r.test_function_id, r.value, r.quadrature_error_estimate
        )?;
    }
    Ok(())
}

/// One time node of an energy audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub t: f64,
    /// ‖u(t)‖_p^p measured from the solution samples.
    pub energy: f64,
    /// The integrated a-priori bound at the same time.
    pub bound: f64,
}

/// Energy-vs-bound audit across all time nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GronwallReport {
    pub rows: Vec<GronwallRow>,
    /// True when every row satisfies energy ≤ (1 + slack)·bound.
    pub ok: bool,
    /// Smallest uniform factor that would make every row pass (1.0 when the
    /// bound already holds everywhere).
    pub repair_factor: f64,
    pub slack: f64,
}

impl GronwallReport {
    /// Audit rows against the relative slack.
    pub fn from_rows(rows: Vec<GronwallRow>, slack: f64) -> Self {
        let mut worst: f64 = 0.0;
        for r in &rows {
            if r.bound > 0.0 {
                worst = worst.max(r.energy / r.bound);
            } else if r.energy > 0.0 {
                worst = f64::INFINITY;
            }
        }
        GronwallReport {
            ok: worst <= 1.0 + slack,
            repair_factor: worst.max(1.0),
            rows,
            slack,
        }
    }

    pub fn to_csv<W: Write>(&self, w: &mut W, purpose: &str) -> Result<()> {
        for line in purpose.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(
            w,
            "# ok={} repair_factor={:.6} slack={:.3}",
            self.ok, self.repair_factor, self.slack
        )?;
        writeln!(w, "t,energy,bound")?;
        for r in &self.rows {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", r.t, r.energy, r.bound)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_rate_recovers_power_law() {
        let rows: Vec<ConvergenceRow> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&eta: &f64| ConvergenceRow {
                eta,
                norm: 3.0 * eta.powf(1.5),
                bound_ratio: 1.0,
                wallclock_s: 0.0,
            })
            .collect();
        let report = ConvergenceReport::new(rows, serde_json::Value::Null);
        let rate = report.fitted_rate().unwrap();
        assert!((rate - 1.5).abs() < 1e-10);
        assert!(report.norms_decreasing());
        assert!(report.ratio_bounded_within(1.0 + 1e-12));
    }

    #[test]
    fn csv_output_is_stable() {
        let report = ConvergenceReport::new(
            vec![ConvergenceRow {
                eta: 0.1,
                norm: 0.5,
                bound_ratio: 0.25,
                wallclock_s: 0.0,
            }],
            serde_json::json!({"h": 0.01}),
        );
        let mut a = Vec::new();
        let mut b = Vec::new();
        report.to_csv(&mut a, "demo sweep").unwrap();
        report.to_csv(&mut b, "demo sweep").unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("eta,norm,bound_ratio,wallclock_s"));
        assert!(text.starts_with("# demo sweep"));
    }

    #[test]
    fn gronwall_audit_flags_violations() {
        let good = GronwallReport::from_rows(
            vec![
                GronwallRow {
                    t: 0.0,
                    energy: 1.0,
                    bound: 1.0,
                },
                GronwallRow {
                    t: 0.5,
                    energy: 1.02,
                    bound: 1.0,
                },
            ],
            0.05,
        );
        assert!(good.ok);
        assert!((good.repair_factor - 1.02).abs() < 1e-12);
        let bad = GronwallReport::from_rows(
            vec![GronwallRow {
                t: 0.5,
                energy: 2.0,
                bound: 1.0,
            }],
            0.05,
        );
        assert!(!bad.ok);
        assert!((bad.repair_factor - 2.0).abs() < 1e-12);
    }
}
