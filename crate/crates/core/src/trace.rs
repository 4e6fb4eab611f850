//! Regularized-trace pipeline: the mean-value sum of eigenvalue shifts
//! against the closed form `A Q'(a) + B Q'(b) - (1/8) sum h_j^2`.

use num_complex::Complex64;

use crate::bc::BoundaryConditions;
use crate::error::Error;
use crate::green::{schedule_from_spectrum, ContourSchedule};
use crate::measure::SignedMeasure;
use crate::spectrum::{perturbed_spectrum, unperturbed_spectrum};
use crate::summation::{pair_terms, CesaroResult, PairedSeries};
use crate::Result;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Eigenvalue differences computed before pairing.
    pub eigenvalues: usize,
    /// Cap on the regrouped terms fed to the mean-value sum.
    pub cesaro_terms: usize,
    /// When set, error with `InsufficientTerms` if the summation diagnostic
    /// exceeds this.
    pub tolerance: Option<f64>,
    /// Counting radii reported in the schedule metadata.
    pub schedule_len: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            eigenvalues: 4000,
            cesaro_terms: 4000,
            tolerance: None,
            schedule_len: 16,
        }
    }
}

/// Everything the pipeline produced, numeric and closed-form sides.
#[derive(Debug, Clone)]
pub struct TraceReport {
    /// Mean-value summation of the regrouped difference series.
    pub numeric: CesaroResult,
    /// Headline numeric value: summation estimate plus the re-bracketing
    /// correction.
    pub numeric_value: C,
    /// The re-bracketing correction alone (zero for strongly regular rows).
    pub pairing_correction: C,
    /// Closed form `A Q'(a) + B Q'(b) - (1/8) sum h_j^2`.
    pub formula: C,
    /// `A Q'(a) + B Q'(b)` with the zero-mean-adjusted density.
    pub linear_part: C,
    /// `-(1/8) sum h_j^2`.
    pub nonlinear_part: C,
    /// One-sided density values of the measure as given.
    pub raw_endpoints: (C, C),
    /// Same after subtracting the mean; these enter the formula.
    pub adjusted_endpoints: (C, C),
    /// Mean term `mass / (b - a)` removed from every difference.
    pub mean_term: C,
    /// `|numeric_value - formula|`.
    pub residual: f64,
    pub eigenvalues_used: usize,
    /// Counting radii separating the unperturbed clusters, when the
    /// spectrum admits them at the default margin.
    pub schedule: Option<ContourSchedule>,
}

fn check_intervals(bc: &BoundaryConditions, q: &SignedMeasure) -> Result<()> {
    let (a, b) = bc.interval();
    let (qa, qb) = q.interval();
    if (a - qa).abs() > 1e-12 || (b - qb).abs() > 1e-12 {
        return Err(Error::InvalidProblem(
            "measure support does not match the boundary-condition interval".into(),
        ));
    }
    Ok(())
}

fn formula_parts(bc: &BoundaryConditions, q: &SignedMeasure) -> Result<(C, C, (C, C), (C, C))> {
    check_intervals(bc, q)?;
    let coef = bc.trace_coefficients()?;
    let raw = q.endpoint_derivatives()?;
    let adjusted = q.zero_mean_adjust().endpoint_derivatives()?;
    let linear = coef.at_a * adjusted.0 + coef.at_b * adjusted.1;
    let atom_sq: C = q.atoms().iter().map(|&(_, h)| h * h).sum();
    Ok((linear, -atom_sq / 8.0, raw, adjusted))
}

/// Closed form of the regularized trace.
pub fn formula_value(bc: &BoundaryConditions, q: &SignedMeasure) -> Result<C> {
    let (linear, nonlinear, _, _) = formula_parts(bc, q)?;
    Ok(linear + nonlinear)
}

/// Run the full pipeline: both spectra, paired differences, mean-value
/// summation, and the closed form side by side.
pub fn regularized_trace(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    opts: &TraceOptions,
) -> Result<TraceReport> {
    let (linear, nonlinear, raw, adjusted) = formula_parts(bc, q)?;
    let inv = bc.classify()?;
    let n = opts.eigenvalues.max(16);
    let s0 = unperturbed_spectrum(bc, n)?;
    let sq = perturbed_spectrum(bc, q, n)?;
    let (a, b) = bc.interval();
    let mean = q.mass() / (b - a);
    let paired = pair_terms(&s0, &sq, inv.class, mean)?;
    let series = if paired.terms.len() > opts.cesaro_terms.max(16) {
        let mut t = paired.terms;
        t.truncate(opts.cesaro_terms.max(16));
        PairedSeries {
            terms: t,
            correction: paired.correction,
        }
    } else {
        paired
    };
    let (ces, total) = series.evaluate();
    if let Some(tol) = opts.tolerance {
        if ces.diagnostic > tol {
            return Err(Error::InsufficientTerms {
                diagnostic: ces.diagnostic,
                tolerance: tol,
            });
        }
    }
    let formula = linear + nonlinear;
    let schedule = schedule_from_spectrum(&s0, opts.schedule_len.min(n / 2)).ok();
    Ok(TraceReport {
        numeric_value: total,
        pairing_correction: total - ces.estimate,
        formula,
        linear_part: linear,
        nonlinear_part: nonlinear,
        raw_endpoints: raw,
        adjusted_endpoints: adjusted,
        mean_term: mean,
        residual: (total - formula).norm(),
        eigenvalues_used: n,
        schedule,
        numeric: ces,
    })
}

/// Pass/fail wrapper: pass iff the summation diagnostic stays within
/// `tolerance` and the residual does too.
pub fn verify(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    tolerance: f64,
    opts: &TraceOptions,
) -> Result<(bool, TraceReport)> {
    let mut o = opts.clone();
    o.tolerance = Some(tolerance);
    let report = regularized_trace(bc, q, &o)?;
    Ok((report.residual < tolerance, report))
}
