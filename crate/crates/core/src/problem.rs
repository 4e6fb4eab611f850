//! JSON problem descriptions for the command-line driver.
//!
//! Complex numbers are always explicit `{"re": ..., "im": ...}` pairs, and
//! unknown keys anywhere in the file are rejected.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bc::BoundaryConditions;
use crate::measure::SignedMeasure;
use crate::trace::TraceOptions;
use crate::Result;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ComplexPair {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<ComplexPair> for C {
    fn from(p: ComplexPair) -> C {
        C::new(p.re, p.im)
    }
}

impl From<C> for ComplexPair {
    fn from(z: C) -> ComplexPair {
        ComplexPair { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: f64,
    pub h: ComplexPair,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub breaks: Vec<f64>,
    pub values: Vec<ComplexPair>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

/// Tuning knobs; command-line flags override any value set here.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    /// Eigenvalue differences to compute.
    #[serde(default)]
    pub terms: Option<usize>,
    /// Partial sums averaged by the mean-value method.
    #[serde(default)]
    pub cesaro: Option<usize>,
    /// Residual / diagnostic tolerance for `verify`.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Counting radii in schedules and schedule-driven subcommands.
    #[serde(default)]
    pub schedule: Option<usize>,
}

/// A full problem: interval, boundary rows, measure, options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub interval: [f64; 2],
    /// Two rows `[alpha_j, gamma_j, beta_j, phi_j]` acting as
    /// `alpha y'(a) + gamma y(a) + beta y'(b) + phi y(b)`.
    pub boundary: [[ComplexPair; 4]; 2],
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub options: OptionsSpec,
}

impl ProblemFile {
    pub fn parse(text: &str) -> std::result::Result<ProblemFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn boundary_conditions(&self) -> Result<BoundaryConditions> {
        let rows = [
            [
                self.boundary[0][0].into(),
                self.boundary[0][1].into(),
                self.boundary[0][2].into(),
                self.boundary[0][3].into(),
            ],
            [
                self.boundary[1][0].into(),
                self.boundary[1][1].into(),
                self.boundary[1][2].into(),
                self.boundary[1][3].into(),
            ],
        ];
        BoundaryConditions::new(self.interval[0], self.interval[1], rows)
    }

    pub fn signed_measure(&self) -> Result<SignedMeasure> {
        let atoms: Vec<(f64, C)> = self
            .measure
            .atoms
            .iter()
            .map(|a| (a.x, a.h.into()))
            .collect();
        let (breaks, values): (Vec<f64>, Vec<C>) = match &self.measure.density {
            Some(d) => (
                d.breaks.clone(),
                d.values.iter().map(|&v| v.into()).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        SignedMeasure::new(
            self.interval[0],
            self.interval[1],
            &atoms,
            &breaks,
            &values,
        )
    }

    /// File options merged over the defaults; `None` fields keep defaults.
    pub fn trace_options(&self) -> TraceOptions {
        let mut o = TraceOptions::default();
        if let Some(t) = self.options.terms {
            o.eigenvalues = t;
        }
        if let Some(c) = self.options.cesaro {
            o.cesaro_terms = c;
        }
        o.tolerance = self.options.tolerance;
        if let Some(s) = self.options.schedule {
            o.schedule_len = s;
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "interval": [0.0, 1.0],
        "boundary": [
            [{"re": 0}, {"re": 1}, {"re": 0}, {"re": 0}],
            [{"re": 0}, {"re": 0}, {"re": 0}, {"re": 1}]
        ],
        "measure": {
            "atoms": [{"x": 0.507, "h": {"re": 1.0}}],
            "density": {"breaks": [0.0, 0.5, 1.0], "values": [{"re": 0.25, "im": -0.5}, {"re": 0.0}]}
        },
        "options": {"terms": 800, "tolerance": 0.05}
    }"#;

    #[test]
    fn parses_and_converts() {
        let p = ProblemFile::parse(FULL).unwrap();
        let bc = p.boundary_conditions().unwrap();
        assert_eq!(bc.interval(), (0.0, 1.0));
        let q = p.signed_measure().unwrap();
        assert_eq!(q.atoms().len(), 1);
        assert_eq!(q.density_at(0.25), Complex64::new(0.25, -0.5));
        let o = p.trace_options();
        assert_eq!(o.eigenvalues, 800);
        assert_eq!(o.cesaro_terms, 4000);
        assert_eq!(o.tolerance, Some(0.05));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FULL.replace("\"options\"", "\"optionz\"");
        assert!(ProblemFile::parse(&bad).is_err());
        let bad = FULL.replace("\"re\": 0.25", "\"real\": 0.25");
        assert!(ProblemFile::parse(&bad).is_err());
    }

    #[test]
    fn defaults_are_minimal() {
        let p = ProblemFile::parse(
            r#"{
                "interval": [0.0, 3.14],
                "boundary": [
                    [{"re": 0}, {"re": 1}, {"re": 0}, {"re": 0}],
                    [{"re": 0}, {"re": 0}, {"re": 0}, {"re": 1}]
                ]
            }"#,
        )
        .unwrap();
        assert!(p.signed_measure().unwrap().is_zero());
        assert_eq!(p.trace_options().eigenvalues, 4000);
    }

    #[test]
    fn out_of_interval_atom_fails_conversion() {
        let p = ProblemFile::parse(
            r#"{
                "interval": [0.0, 1.0],
                "boundary": [
                    [{"re": 0}, {"re": 1}, {"re": 0}, {"re": 0}],
                    [{"re": 0}, {"re": 0}, {"re": 0}, {"re": 1}]
                ],
                "measure": {"atoms": [{"x": 1.5, "h": {"re": 1.0}}]}
            }"#,
        )
        .unwrap();
        assert!(p.signed_measure().is_err());
    }

    #[test]
    fn round_trips_through_serde() {
        let p = ProblemFile::parse(FULL).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let p2 = ProblemFile::parse(&text).unwrap();
        assert_eq!(p2.interval, p.interval);
        assert_eq!(p2.boundary, p.boundary);
        assert_eq!(p2.measure.atoms.len(), 1);
        assert_eq!(p2.options.terms, Some(800));
    }
}
