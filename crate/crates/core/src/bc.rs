//! Two-point boundary conditions: normalization, classification into the
//! case tree, spectral invariants, trace coefficients, and adjoint systems.
//!
//! A condition set is two rows `alpha_j y'(a) + gamma_j y(a) + beta_j y'(b) +
//! phi_j y(b) = 0`.  Row operations bring the pair to a canonical form with
//! the minimal total derivative order; the classification then reads off the
//! invariants `A = b1 a0 + a1 b0`, `B = f1 a0 - c1 b0`, `C = a1 a0 + b1 b0`
//! and the quasimomentum-like parameter `alpha` with `cos(alpha) = -C/A`.

use crate::error::Error;
use crate::Result;
use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Scale-relative threshold for treating a coefficient as zero.
const ZTOL: f64 = 1e-12;
/// Threshold for the sum tests `a_j ± b_j = 0` inside an established close
/// case: the product of the two sums is pinned near zero at `ZTOL`, so each
/// factor is only determined to about `sqrt(ZTOL)`.
const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularityClass {
    Irregular,
    StronglyRegular,
    RegularNotStrong,
}

/// Case tag of the normalized condition set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// `y(a) = y(b) = 0` (both rows derivative-free).
    Dirichlet,
    /// Both rows of first order: `y'(a) + c0 y(a) + f0 y(b) = 0`,
    /// `y'(b) + c1 y(a) + f1 y(b) = 0`.
    Both1,
    /// Mixed orders, `C = ±A`, `B = 0`, both sum pairs vanish: every
    /// eigenvalue is double and semisimple (periodic-like).
    MixedDoubleNoJordan,
    /// Mixed orders, `C = ±A`, `B = 0`, exactly one sum pair vanishes:
    /// double eigenvalues carrying Jordan blocks.
    MixedJordan,
    /// Mixed orders, `C = ±A`, `B != 0`, one sum pair vanishes:
    /// asymptotically close eigenvalue pairs, first-order splitting.
    MixedCloseV1,
    /// Mixed orders, `C = ±A`, `B != 0`, both sum pairs vanish:
    /// asymptotically close pairs with second-order splitting.
    MixedCloseV3,
    /// Mixed orders, `C != ±A`: two separated eigenvalue families
    /// `(2 pi N ± alpha)^2`-like.
    MixedSeparated,
}

/// Canonical coefficients extracted from the normalized rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalForm {
    /// `y(a) = 0`, `y(b) = 0`.
    Dirichlet,
    /// `y'(a) + c0 y(a) + f0 y(b) = 0`, `y'(b) + c1 y(a) + f1 y(b) = 0`.
    Both1 { c0: C, f0: C, c1: C, f1: C },
    /// `a0 y(a) + b0 y(b) = 0`,
    /// `a1 y'(a) + b1 y'(b) + c1 y(a) + f1 y(b) = 0`.
    Mixed { a0: C, b0: C, a1: C, b1: C, c1: C, f1: C },
}

/// Classification result: invariants, case tag, regularity class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcInvariants {
    /// `A = b1 a0 + a1 b0` (1 for Dirichlet and first-order canonical rows).
    pub inv_a: C,
    /// `B = f1 a0 - c1 b0` (0 outside the mixed case).
    pub inv_b: C,
    /// `C = a1 a0 + b1 b0`.
    pub inv_c: C,
    /// Present only for strongly regular mixed conditions; `cos(alpha) =
    /// -C/A`, branch with `|Re alpha| < pi`.
    pub alpha: Option<C>,
    pub class: RegularityClass,
    pub tag: CaseTag,
    pub form: CanonicalForm,
    /// Derivative orders `(d0, d1)` of the normalized rows, `d0 <= d1`.
    pub d: (u8, u8),
    /// True when `C = +A` (eigenvalue clusters sit near odd multiples of
    /// pi rather than `2 pi N`).
    pub odd_base: bool,
}

impl BcInvariants {
    pub fn is_strongly_regular(&self) -> bool {
        self.class == RegularityClass::StronglyRegular
    }
}

/// Endpoint-derivative weights `(A, B)` of the trace formula
/// `S(q) = A Q'(a) + B Q'(b) - (1/8) sum h_j^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCoefficients {
    pub at_a: C,
    pub at_b: C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    a: f64,
    b: f64,
    /// `rows[j] = [alpha_j, gamma_j, beta_j, phi_j]`.
    rows: [[C; 4]; 2],
}

fn sup(row: &[C; 4]) -> f64 {
    row.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Index of the largest-modulus entry among the given columns.
fn argmax_col(row: &[C; 4], cols: &[usize]) -> usize {
    let mut best = cols[0];
    for &c in cols {
        if row[c].norm() > row[best].norm() {
            best = c;
        }
    }
    best
}

impl BoundaryConditions {
    pub fn new(a: f64, b: f64, rows: [[C; 4]; 2]) -> Result<BoundaryConditions> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProblem(format!(
                "interval [{a}, {b}] is not a finite nondegenerate interval"
            )));
        }
        for row in &rows {
            for z in row {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::InvalidProblem("boundary row entry is not finite".into()));
                }
            }
            if sup(row) == 0.0 {
                return Err(Error::DegenerateRows("a boundary row is identically zero".into()));
            }
        }
        Ok(BoundaryConditions { a, b, rows })
    }

    pub fn dirichlet(a: f64, b: f64) -> BoundaryConditions {
        BoundaryConditions::new(a, b, [[ZERO, ONE, ZERO, ZERO], [ZERO, ZERO, ZERO, ONE]]).unwrap()
    }

    /// `y(a) - y(b) = 0`, `y'(a) - y'(b) = 0`.
    pub fn periodic(a: f64, b: f64) -> BoundaryConditions {
        BoundaryConditions::new(a, b, [[ZERO, ONE, ZERO, -ONE], [ONE, ZERO, -ONE, ZERO]]).unwrap()
    }

    /// First-order rows `y'(a) + c0 y(a) + f0 y(b) = 0`,
    /// `y'(b) + c1 y(a) + f1 y(b) = 0`.
    pub fn both_first_order(a: f64, b: f64, c0: C, f0: C, c1: C, f1: C) -> BoundaryConditions {
        BoundaryConditions::new(a, b, [[ONE, c0, ZERO, f0], [ZERO, c1, ONE, f1]]).unwrap()
    }

    /// Mixed rows `a0 y(a) + b0 y(b) = 0`,
    /// `a1 y'(a) + b1 y'(b) + c1 y(a) + f1 y(b) = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn mixed(a: f64, b: f64, a0: C, b0: C, a1: C, b1: C, c1: C, f1: C) -> BoundaryConditions {
        BoundaryConditions::new(a, b, [[ZERO, a0, ZERO, b0], [a1, c1, b1, f1]]).unwrap()
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn rows(&self) -> &[[C; 4]; 2] {
        &self.rows
    }

    /// Row functional `U_j(y) = alpha_j y'(a) + gamma_j y(a) + beta_j y'(b)
    /// + phi_j y(b)` on boundary data.
    pub fn apply_row(&self, j: usize, ya: C, dya: C, yb: C, dyb: C) -> C {
        let r = &self.rows[j];
        r[0] * dya + r[1] * ya + r[2] * dyb + r[3] * yb
    }

    /// Row-equivalent system with minimal total derivative order, rows
    /// ordered `d0 <= d1` and scaled so the leading pair has a unit entry.
    pub fn normalize(&self) -> Result<BoundaryConditions> {
        let mut r = self.rows;
        for row in &mut r {
            let m = sup(row);
            if m <= ZTOL * self.rows.iter().map(sup).fold(0.0, f64::max) {
                return Err(Error::DegenerateRows("a boundary row is negligible".into()));
            }
            for z in row.iter_mut() {
                *z /= m;
            }
        }

        // Largest derivative coefficient across both rows (columns 0, 2).
        let (mut pr, mut pc, mut pm) = (0usize, 0usize, 0.0f64);
        for (j, row) in r.iter().enumerate() {
            for &col in &[0usize, 2] {
                if row[col].norm() > pm {
                    (pr, pc, pm) = (j, col, row[col].norm());
                }
            }
        }

        if pm <= ZTOL {
            // No derivative terms: reduce the value pair to y(a) = y(b) = 0.
            let det = r[0][1] * r[1][3] - r[0][3] * r[1][1];
            if det.norm() <= ZTOL {
                return Err(Error::DegenerateRows(
                    "derivative-free rows are linearly dependent".into(),
                ));
            }
            return BoundaryConditions::new(
                self.a,
                self.b,
                [[ZERO, ONE, ZERO, ZERO], [ZERO, ZERO, ZERO, ONE]],
            );
        }

        // Eliminate the pivot column from the other row.
        let o = 1 - pr;
        let oc = 2 - pc;
        let factor = r[o][pc] / r[pr][pc];
        for k in 0..4 {
            r[o][k] -= factor * r[pr][k];
        }
        r[o][pc] = ZERO;
        let om = sup(&r[o]);
        if om <= ZTOL {
            return Err(Error::DegenerateRows("rows are linearly dependent".into()));
        }
        for z in r[o].iter_mut() {
            *z /= om;
        }

        if r[o][oc].norm() <= ZTOL {
            // Mixed case: row o is derivative-free.
            r[o][oc] = ZERO;
            let vc = argmax_col(&r[o], &[1, 3]);
            let piv = r[o][vc];
            for z in r[o].iter_mut() {
                *z /= piv;
            }
            let dc = argmax_col(&r[pr], &[0, 2]);
            let piv = r[pr][dc];
            for z in r[pr].iter_mut() {
                *z /= piv;
            }
            // Drop the value part of the derivative row when it is a
            // multiple of the derivative-free row (B = 0 within tolerance):
            // the row operation cancels it exactly.
            let (a0, b0) = (r[o][1], r[o][3]);
            let (c1, f1) = (r[pr][1], r[pr][3]);
            let inv_b = f1 * a0 - c1 * b0;
            if inv_b.norm() <= ZTOL * c1.norm().max(f1.norm()).max(1.0) {
                r[pr][1] = ZERO;
                r[pr][3] = ZERO;
            }
            let rows = [r[o], r[pr]];
            return BoundaryConditions::new(self.a, self.b, rows);
        }

        // Both rows first order: bring the derivative part to the identity.
        let d = [[r[0][0], r[0][2]], [r[1][0], r[1][2]]];
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        let inv = [
            [d[1][1] / det, -d[0][1] / det],
            [-d[1][0] / det, d[0][0] / det],
        ];
        let mut out = [[ZERO; 4]; 2];
        for i in 0..2 {
            for k in 0..4 {
                out[i][k] = inv[i][0] * r[0][k] + inv[i][1] * r[1][k];
            }
        }
        out[0][0] = ONE;
        out[0][2] = ZERO;
        out[1][0] = ZERO;
        out[1][2] = ONE;
        BoundaryConditions::new(self.a, self.b, out)
    }

    /// Invariants, case tag, and regularity class of the normalized system.
    pub fn classify(&self) -> Result<BcInvariants> {
        let n = self.normalize()?;
        let r = &n.rows;
        let d0 = (r[0][0] != ZERO || r[0][2] != ZERO) as u8;
        let d1 = (r[1][0] != ZERO || r[1][2] != ZERO) as u8;

        match (d0, d1) {
            (0, 0) => Ok(BcInvariants {
                inv_a: ONE,
                inv_b: ZERO,
                inv_c: ZERO,
                alpha: None,
                class: RegularityClass::StronglyRegular,
                tag: CaseTag::Dirichlet,
                form: CanonicalForm::Dirichlet,
                d: (0, 0),
                odd_base: false,
            }),
            (1, 1) => Ok(BcInvariants {
                inv_a: ONE,
                inv_b: ZERO,
                inv_c: ZERO,
                alpha: None,
                class: RegularityClass::StronglyRegular,
                tag: CaseTag::Both1,
                form: CanonicalForm::Both1 {
                    c0: r[0][1],
                    f0: r[0][3],
                    c1: r[1][1],
                    f1: r[1][3],
                },
                d: (1, 1),
                odd_base: false,
            }),
            (0, 1) => {
                let (a0, b0) = (r[0][1], r[0][3]);
                let (a1, c1, b1, f1) = (r[1][0], r[1][1], r[1][2], r[1][3]);
                let inv_a = b1 * a0 + a1 * b0;
                let inv_b = f1 * a0 - c1 * b0;
                let inv_c = a1 * a0 + b1 * b0;
                let form = CanonicalForm::Mixed { a0, b0, a1, b1, c1, f1 };
                if inv_a.norm() <= ZTOL * (a0 * b1).norm().max((a1 * b0).norm()).max(1.0) {
                    return Err(Error::IrregularBc(format!(
                        "A = {inv_a} vanishes: Birkhoff regularity fails"
                    )));
                }
                let scale = inv_a.norm() + inv_c.norm();
                let close_minus = (inv_c + inv_a).norm() <= ZTOL * scale;
                let close_plus = (inv_c - inv_a).norm() <= ZTOL * scale;
                if close_minus || close_plus {
                    // C = -A factors as (a0+b0)(a1+b1) = 0; C = +A likewise
                    // with differences.
                    let s = if close_minus { 1.0 } else { -1.0 };
                    let s0 = a0 + s * b0;
                    let s1 = a1 + s * b1;
                    let z0 = s0.norm() <= SUM_TOL * (a0.norm() + b0.norm());
                    let z1 = s1.norm() <= SUM_TOL * (a1.norm() + b1.norm());
                    // The product s0*s1 is pinned at zero, so at least one
                    // factor is negligible; break ties toward the smaller.
                    let (z0, z1) = if z0 || z1 {
                        (z0, z1)
                    } else if s0.norm() <= s1.norm() {
                        (true, false)
                    } else {
                        (false, true)
                    };
                    let b_zero = inv_b.norm() <= ZTOL * c1.norm().max(f1.norm()).max(1.0);
                    let tag = match (b_zero, z0, z1) {
                        (true, true, true) => CaseTag::MixedDoubleNoJordan,
                        (true, _, _) => CaseTag::MixedJordan,
                        (false, true, true) => CaseTag::MixedCloseV3,
                        (false, _, _) => CaseTag::MixedCloseV1,
                    };
                    Ok(BcInvariants {
                        inv_a,
                        inv_b,
                        inv_c,
                        alpha: None,
                        class: RegularityClass::RegularNotStrong,
                        tag,
                        form,
                        d: (0, 1),
                        odd_base: close_plus,
                    })
                } else {
                    let ratio = inv_c / inv_a;
                    let w = -ratio - (ratio * ratio - 1.0).sqrt();
                    let alpha = C::new(0.0, 1.0) * w.ln();
                    if (alpha.re.abs() - std::f64::consts::PI).abs() <= ZTOL {
                        // Both eigenvalue families sit on the same moduli:
                        // treat as regular but not strong.
                        Ok(BcInvariants {
                            inv_a,
                            inv_b,
                            inv_c,
                            alpha: None,
                            class: RegularityClass::RegularNotStrong,
                            tag: CaseTag::MixedSeparated,
                            form,
                            d: (0, 1),
                            odd_base: false,
                        })
                    } else {
                        Ok(BcInvariants {
                            inv_a,
                            inv_b,
                            inv_c,
                            alpha: Some(alpha),
                            class: RegularityClass::StronglyRegular,
                            tag: CaseTag::MixedSeparated,
                            form,
                            d: (0, 1),
                            odd_base: false,
                        })
                    }
                }
            }
            _ => unreachable!("normalize orders rows by derivative order"),
        }
    }

    /// Weights of `Q'(a)` and `Q'(b)` in the regularized trace.
    pub fn trace_coefficients(&self) -> Result<TraceCoefficients> {
        let inv = self.classify()?;
        let (at_a, at_b) = match inv.form {
            CanonicalForm::Dirichlet => (C::new(-0.25, 0.0), C::new(-0.25, 0.0)),
            CanonicalForm::Both1 { .. } => (C::new(0.25, 0.0), C::new(0.25, 0.0)),
            CanonicalForm::Mixed { a0, b0, a1, b1, .. } => {
                let v = 0.25 * (a1 * b0 - a0 * b1) / inv.inv_a;
                (v, -v)
            }
        };
        Ok(TraceCoefficients { at_a, at_b })
    }

    /// Boundary conditions of the adjoint operator.
    ///
    /// The mixed form requires `a1 != 0`; otherwise apply
    /// [`swap_endpoints`](Self::swap_endpoints) first.
    pub fn adjoint(&self) -> Result<BoundaryConditions> {
        let n = self.normalize()?;
        let inv = n.classify()?;
        match inv.form {
            CanonicalForm::Dirichlet => Ok(n),
            CanonicalForm::Both1 { c0, f0, c1, f1 } => Ok(BoundaryConditions::both_first_order(
                self.a,
                self.b,
                c0.conj(),
                -c1.conj(),
                -f0.conj(),
                f1.conj(),
            )),
            CanonicalForm::Mixed { a0, b0, a1, b1, c1, f1 } => {
                if a1.norm() <= ZTOL {
                    return Err(Error::UnsupportedForm(
                        "adjoint of the mixed form needs a1 != 0; swap endpoints first".into(),
                    ));
                }
                let inv_b = f1 * a0 - c1 * b0;
                Ok(BoundaryConditions::mixed(
                    self.a,
                    self.b,
                    b1.conj(),
                    a1.conj(),
                    b0.conj(),
                    a0.conj(),
                    -inv_b.conj() / a1.conj(),
                    ZERO,
                ))
            }
        }
    }

    /// Conditions of the reflected problem `x -> a + b - x` on the same
    /// interval.  Preserves the invariants and the case tag.
    pub fn swap_endpoints(&self) -> BoundaryConditions {
        let map = |row: &[C; 4]| [-row[2], row[3], -row[0], row[1]];
        BoundaryConditions {
            a: self.a,
            b: self.b,
            rows: [map(&self.rows[0]), map(&self.rows[1])],
        }
    }
}
