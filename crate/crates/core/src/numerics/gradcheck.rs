//! Central finite-difference verification of hand-derived gradients.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Perturbation applied to each scalar parameter.
pub const FD_STEP: f64 = 1e-5;

/// Entries where both the analytic and numeric gradient are below this
/// magnitude carry no signal and are skipped.
pub const SKIP_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    /// Worst relative error over all checked scalars of this tensor.
    pub max_rel_err: f64,
    pub worst_coord: Option<(usize, usize)>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub rel_tol: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |acc, e| acc.max(e.max_rel_err))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.rel_tol
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries
            .iter()
            .filter(move |e| e.max_rel_err >= self.rel_tol)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}: max_rel_err {:.3e} (checked {}, skipped {})\n",
                e.name, e.max_rel_err, e.checked, e.skipped
            ));
        }
        out.push_str(&format!(
            "overall max_rel_err {:.3e} vs tolerance {:.1e}: {}\n",
            self.max_rel_err(),
            self.rel_tol,
            if self.passed() { "ok" } else { "FAILED" }
        ));
        out
    }
}

/// Compares `analytic` gradients against central finite differences of
/// `loss_fn` at the base point `params`.
///
/// `loss_fn` must be deterministic given its inputs; any noise draw has to be
/// frozen outside the closure. A non-finite loss at a perturbed point aborts
/// with the parameter name and flat index that triggered it.
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &[(&str, DenseMatrix)],
    analytic: &[&DenseMatrix],
    rel_tol: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[DenseMatrix]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::Numerical(format!(
            "grad_check: {} params but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }
    let mut work: Vec<DenseMatrix> = params.iter().map(|(_, m)| m.clone()).collect();
    let mut entries = Vec::with_capacity(params.len());

    for (p_idx, (name, base)) in params.iter().enumerate() {
        let grad = analytic[p_idx];
        if grad.shape() != base.shape() {
            return Err(Error::Numerical(format!(
                "grad_check: gradient shape {:?} mismatches parameter {} shape {:?}",
                grad.shape(),
                name,
                base.shape()
            )));
        }
        let mut entry = GradCheckEntry {
            name: (*name).to_string(),
            max_rel_err: 0.0,
            worst_coord: None,
            analytic_at_worst: 0.0,
            numeric_at_worst: 0.0,
            checked: 0,
            skipped: 0,
        };
        let (rows, cols) = base.shape();
        for r in 0..rows {
            for c in 0..cols {
                let original = work[p_idx].get(r, c);

                work[p_idx].set(r, c, original + FD_STEP);
                let plus = eval(&mut loss_fn, &work, name, r, c)?;
                work[p_idx].set(r, c, original - FD_STEP);
                let minus = eval(&mut loss_fn, &work, name, r, c)?;
                work[p_idx].set(r, c, original);

                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let a = grad.get(r, c);
                if a.abs() < SKIP_THRESHOLD && numeric.abs() < SKIP_THRESHOLD {
                    entry.skipped += 1;
                    continue;
                }
                entry.checked += 1;
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
                if rel > entry.max_rel_err {
                    entry.max_rel_err = rel;
                    entry.worst_coord = Some((r, c));
                    entry.analytic_at_worst = a;
                    entry.numeric_at_worst = numeric;
                }
            }
        }
        entries.push(entry);
    }
    Ok(GradCheckReport { rel_tol, entries })
}

fn eval<F>(loss_fn: &mut F, work: &[DenseMatrix], name: &str, r: usize, c: usize) -> Result<f64>
where
    F: FnMut(&[DenseMatrix]) -> Result<f64>,
{
    let value = loss_fn(work)?;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "grad_check: non-finite loss {value} while perturbing {name}[{r}, {c}]"
        )));
    }
    Ok(value)
}
