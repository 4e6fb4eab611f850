//! Closed-form large-index expansions: square roots of eigenvalues,
//! normalized eigenfunction products, scalar products, and the `V`/`W`
//! profile functions of the separated mixed case.
//!
//! Everything is stated for the problem transported to `[0, 1]` by the
//! affine substitution and mapped back: square roots are divided by the
//! interval length, products are evaluated at the pulled-back point and
//! scaled by `1/len` (the normalization `<y, z> = 1` is length-dependent).
//! Scalar products are reported in the transported gauge `C1 C2 = 1`.
//!
//! Index conventions follow the cluster structure.  For first-order rows
//! the value at display index `N` approximates the `(N+1)`-st square root;
//! for the mixed cases it covers the `N`-th doublet (near `2 pi N`, or near
//! `(2N - 1) pi` when the invariants put clusters on odd multiples); for
//! Dirichlet it is the `N`-th root itself.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::bc::{BoundaryConditions, CanonicalForm, CaseTag};
use crate::error::Error;
use crate::Result;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

fn cr(x: f64) -> C {
    C::new(x, 0.0)
}

/// One value for simple clusters, `(plus, minus)` where roots pair up.  In
/// the close-pair cases `plus` is the exact member, in the separated case
/// the `+alpha` family; true doubles carry the value twice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseValues {
    One(C),
    Pair { plus: C, minus: C },
}

impl CaseValues {
    pub fn one(&self) -> C {
        match self {
            CaseValues::One(v) => *v,
            CaseValues::Pair { plus, .. } => *plus,
        }
    }

    pub fn pair(&self) -> (C, C) {
        match self {
            CaseValues::One(v) => (*v, *v),
            CaseValues::Pair { plus, minus } => (*plus, *minus),
        }
    }
}

/// Expansion value with the exponent `p` of its `O(N^{-p})` error; `None`
/// when the displayed form is exact.
#[derive(Debug, Clone, Copy)]
pub struct Expansion {
    pub values: CaseValues,
    pub order: Option<i32>,
}

/// Unit-interval canonical data: low-order coefficients pick up one factor
/// of the length under the substitution, leading ones do not.
struct Unit {
    tag: CaseTag,
    len: f64,
    odd_base: bool,
    alpha: Option<C>,
    form: CanonicalForm,
    big_a: C,
    big_b: C,
}

impl Unit {
    fn build(bc: &BoundaryConditions) -> Result<Unit> {
        let inv = bc.classify()?;
        let (a, b) = bc.interval();
        let len = b - a;
        let form = match inv.form {
            CanonicalForm::Dirichlet => CanonicalForm::Dirichlet,
            CanonicalForm::Both1 { c0, f0, c1, f1 } => CanonicalForm::Both1 {
                c0: len * c0,
                f0: len * f0,
                c1: len * c1,
                f1: len * f1,
            },
            CanonicalForm::Mixed { a0, b0, a1, b1, c1, f1 } => CanonicalForm::Mixed {
                a0,
                b0,
                a1,
                b1,
                c1: len * c1,
                f1: len * f1,
            },
        };
        Ok(Unit {
            tag: inv.tag,
            len,
            odd_base: inv.odd_base,
            alpha: inv.alpha,
            form,
            big_a: inv.inv_a,
            big_b: len * inv.inv_b,
        })
    }

    /// Effective index: `N` for clusters near `2 pi N`, `N - 1/2` near odd
    /// multiples of `pi`.
    fn n_eff(&self, n: usize) -> f64 {
        if self.odd_base {
            n as f64 - 0.5
        } else {
            n as f64
        }
    }

    fn mixed(&self) -> (C, C, C, C, C, C) {
        match self.form {
            CanonicalForm::Mixed { a0, b0, a1, b1, c1, f1 } => (a0, b0, a1, b1, c1, f1),
            _ => unreachable!("mixed accessor on non-mixed form"),
        }
    }

    fn alpha(&self) -> Result<C> {
        self.alpha.ok_or_else(|| Error::WrongCase {
            tag: format!("{:?}", self.tag),
            detail: "alpha is undefined on the branch boundary".into(),
        })
    }

    /// Canonical coefficient of the third close-pair variant: the reduced
    /// row is `y'(0) - y'(1) + c y(0) = 0`, and `c = -2 B / A` in terms of
    /// the row invariants (scale-free on both rows).
    fn third_variant_c(&self) -> C {
        -2.0 * self.big_b / self.big_a
    }
}

fn need_n(n: usize, tag: CaseTag) -> Result<()> {
    if n == 0 {
        return Err(Error::WrongCase {
            tag: format!("{tag:?}"),
            detail: "expansions start at display index 1".into(),
        });
    }
    Ok(())
}

/// Square roots of eigenvalues at display index `n`, with the error order.
pub fn rho_expansion(bc: &BoundaryConditions, n: usize) -> Result<Expansion> {
    let u = Unit::build(bc)?;
    need_n(n, u.tag)?;
    let nf = u.n_eff(n);
    let beta = 2.0 * PI * nf;
    let exp = match (u.tag, u.form) {
        (CaseTag::Dirichlet, _) => Expansion {
            values: CaseValues::One(cr(PI * n as f64)),
            order: None,
        },
        (CaseTag::Both1, CanonicalForm::Both1 { c0, f0, c1, f1 }) => {
            let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
            let v = cr(PI * nf) + (f1 - c0) / (PI * nf) + sgn * (c1 - f0) / (PI * nf);
            Expansion {
                values: CaseValues::One(v),
                order: Some(2),
            }
        }
        (CaseTag::MixedDoubleNoJordan | CaseTag::MixedJordan, _) => Expansion {
            values: CaseValues::Pair {
                plus: cr(beta),
                minus: cr(beta),
            },
            order: None,
        },
        (CaseTag::MixedCloseV1, _) => {
            let (ba, bb) = (u.big_a, u.big_b);
            let minus = cr(beta) + bb / (PI * nf * ba)
                - (6.0 * ba * bb * bb + bb * bb * bb)
                    / (12.0 * ba.powi(3) * nf.powi(3) * PI.powi(3));
            Expansion {
                values: CaseValues::Pair {
                    plus: cr(beta),
                    minus,
                },
                order: Some(4),
            }
        }
        (CaseTag::MixedCloseV3, _) => {
            let c1 = u.third_variant_c();
            let minus = cr(beta) - c1 / (2.0 * PI * nf)
                + (c1.powi(3) - 12.0 * c1.powi(2)) / (96.0 * PI.powi(3) * nf.powi(3))
                + (c1.powi(4) - 6.0 * c1.powi(3)) / (96.0 * PI.powi(5) * nf.powi(5));
            Expansion {
                values: CaseValues::Pair {
                    plus: cr(beta),
                    minus,
                },
                order: Some(6),
            }
        }
        (CaseTag::MixedSeparated, _) => {
            let al = u.alpha()?;
            let corr = u.big_b / (beta * u.big_a);
            Expansion {
                values: CaseValues::Pair {
                    plus: cr(beta) + al + corr,
                    minus: cr(beta) - al + corr,
                },
                order: Some(2),
            }
        }
        _ => unreachable!("tag/form mismatch"),
    };
    let scale = 1.0 / u.len;
    Ok(Expansion {
        values: match exp.values {
            CaseValues::One(v) => CaseValues::One(v * scale),
            CaseValues::Pair { plus, minus } => CaseValues::Pair {
                plus: plus * scale,
                minus: minus * scale,
            },
        },
        order: exp.order,
    })
}

/// Parameters of the separated-case profile functions.
#[derive(Debug, Clone, Copy)]
pub struct SeparatedParams {
    pub a0: C,
    pub b0: C,
    pub a1: C,
    pub b1: C,
    pub big_a: C,
    pub big_b: C,
}

/// Extract `(params, alpha)` for a separated mixed problem (unit-interval
/// scaling applied to `B`).
pub fn separated_params(bc: &BoundaryConditions) -> Result<(SeparatedParams, C)> {
    let u = Unit::build(bc)?;
    if u.tag != CaseTag::MixedSeparated {
        return Err(Error::WrongCase {
            tag: format!("{:?}", u.tag),
            detail: "profile functions require the separated mixed case".into(),
        });
    }
    let (a0, b0, a1, b1, _, _) = u.mixed();
    let alpha = u.alpha()?;
    Ok((
        SeparatedParams {
            a0,
            b0,
            a1,
            b1,
            big_a: u.big_a,
            big_b: u.big_b,
        },
        alpha,
    ))
}

/// The four profile functions and their auxiliary polynomials.
#[derive(Debug, Clone, Copy)]
pub struct Vw {
    pub v0: C,
    pub v1: C,
    pub w0: C,
    pub w1: C,
    pub r1: C,
    pub r2: C,
}

/// Profile functions at `(x, alpha)`; `x` in unit coordinates.
pub fn vw(x: f64, alpha: C, p: &SeparatedParams) -> Result<Vw> {
    let sa = alpha.sin();
    if sa.norm() < 1e-10 {
        return Err(Error::SingularAlpha(format!(
            "sin(alpha) = {:.3e} at alpha = {alpha}",
            sa.norm()
        )));
    }
    let (a0, b0, a1) = (p.a0, p.b0, p.a1);
    let d2 = a0 * a0 - b0 * b0;
    if d2.norm() < 1e-12 * (a0.norm() + b0.norm()).powi(2).max(1e-300) {
        return Err(Error::WrongCase {
            tag: "MixedSeparated".into(),
            detail: "a0 = ±b0 is excluded in the separated case".into(),
        });
    }
    let ca = alpha.cos();
    let amp = (a0 * a0 + b0 * b0 + 2.0 * a0 * b0 * ca) / (d2 * sa);
    let arg = alpha * (2.0 * x - 1.0);
    let v0 = arg.sin() * amp;
    let v1 = arg.cos() * amp;

    let (ba, bb) = (p.big_a, p.big_b);
    let c2a = (2.0 * alpha).cos();
    let c3a = (3.0 * alpha).cos();
    let lin = ba * b0 + a1 * d2 * x;
    let lin1 = ba * b0 + a1 * d2 * (2.0 * x - 1.0);
    let r1 = a0 * b0 * (3.0 * ba * b0 + a1 * d2 * (1.0 + 2.0 * x))
        + 2.0 * (a0 * a0 + b0 * b0) * lin * ca
        + a0 * b0 * lin1 * c2a;
    let r2 = 4.0 * ba * a0 * a0 * b0
        + 2.0 * a1 * (a0.powi(4) - b0.powi(4)) * (1.0 - x)
        + a0 * (ba * (2.0 * a0 * a0 + 5.0 * b0 * b0) + a1 * b0 * d2 * (5.0 - 2.0 * x)) * ca
        + 2.0 * (a0 * a0 + b0 * b0) * lin * c2a
        + a0 * b0 * lin1 * c3a;

    let (w0, w1) = if bb == ZERO {
        (ZERO, ZERO)
    } else {
        if a1 == ZERO {
            return Err(Error::WrongCase {
                tag: "MixedSeparated".into(),
                detail: "a1 = 0 with B != 0; swap endpoints first".into(),
            });
        }
        let den = 4.0 * ba * a1 * d2 * d2 * PI * sa * sa;
        let s2x = (2.0 * alpha * x).sin();
        let c2x = (2.0 * alpha * x).cos();
        (
            bb * (2.0 * r1 * sa * c2x - r2 * s2x) / den,
            -bb * (2.0 * r1 * sa * s2x + r2 * c2x) / den,
        )
    };
    Ok(Vw { v0, v1, w0, w1, r1, r2 })
}

/// Normalized eigenfunction-product asymptotics at `x` for display index
/// `n`; paired cases return the sum over the doublet.
pub fn product_expansion(bc: &BoundaryConditions, n: usize, x: f64) -> Result<Expansion> {
    let u = Unit::build(bc)?;
    need_n(n, u.tag)?;
    let (a, _) = bc.interval();
    let t = (x - a) / u.len;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidProblem(format!("point {x} outside the interval")));
    }
    let nf = u.n_eff(n);
    let beta = 2.0 * PI * nf;
    let (value, order) = match (u.tag, u.form) {
        (CaseTag::Dirichlet, _) => (ONE - cr((2.0 * PI * n as f64 * t).cos()), None),
        (CaseTag::Both1, CanonicalForm::Both1 { c0, f0, c1, f1 }) => {
            let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
            let (s, c) = ((beta * t).sin(), (beta * t).cos());
            let v = ONE + cr(c) - 2.0 * s * (c0 * (1.0 - t) + f1 * t) / (PI * nf)
                + sgn * s * (c1 - f0) * (1.0 - 2.0 * t) / (PI * nf);
            (v, Some(2))
        }
        (CaseTag::MixedDoubleNoJordan, _) => (cr(2.0), None),
        (CaseTag::MixedJordan, CanonicalForm::Mixed { a0, b0, .. }) => {
            let v = cr(2.0)
                + 2.0 * (2.0 * beta * t).cos() * (a0 + b0) * (2.0 * t - 1.0) / (a0 - b0);
            (v, None)
        }
        (CaseTag::MixedCloseV1, CanonicalForm::Mixed { a1, b1, c1, f1, .. }) => {
            let (s2, c2) = ((2.0 * beta * t).sin(), (2.0 * beta * t).cos());
            let v = cr(2.0) + 2.0 * c2 * (a1 + b1) * (1.0 - 2.0 * t) / (a1 - b1)
                + 2.0 * s2 * (c1 + f1) * (1.0 - 2.0 * t) * (b1 * t - a1 * (1.0 - t))
                    / ((a1 - b1) * (a1 - b1) * PI * nf);
            (v, Some(2))
        }
        (CaseTag::MixedCloseV3, _) => {
            let c1 = u.third_variant_c();
            let v = cr(2.0) + (2.0 * beta * t).sin() * c1 * (2.0 * t - 1.0) / (2.0 * PI * nf);
            (v, Some(2))
        }
        (CaseTag::MixedSeparated, CanonicalForm::Mixed { a0, b0, a1, b1, .. }) => {
            let al = u.alpha()?;
            let p = SeparatedParams {
                a0,
                b0,
                a1,
                b1,
                big_a: u.big_a,
                big_b: u.big_b,
            };
            let f = vw(t, al, &p)?;
            let v = cr(2.0) + 2.0 * (2.0 * beta * t).cos() * f.v0
                + (2.0 / nf) * (2.0 * beta * t).sin() * f.w1;
            (v, Some(2))
        }
        _ => unreachable!("tag/form mismatch"),
    };
    Ok(Expansion {
        values: CaseValues::One(value / u.len),
        order,
    })
}

/// Scalar-product asymptotics at display index `n`, transported gauge
/// `C1 C2 = 1`.  For the doublet cases the two members are reported as
/// `(plus, minus)`; for Jordan blocks the value is the cross product
/// `<y, z-hat> = <y-hat, z>`.
pub fn scalar_product_expansion(bc: &BoundaryConditions, n: usize) -> Result<Expansion> {
    let u = Unit::build(bc)?;
    need_n(n, u.tag)?;
    let nf = u.n_eff(n);
    let exp = match (u.tag, u.form) {
        (CaseTag::Dirichlet, _) => Expansion {
            values: CaseValues::One(cr(0.5)),
            order: None,
        },
        (CaseTag::Both1, _) => Expansion {
            values: CaseValues::One(cr(0.5)),
            order: Some(2),
        },
        (CaseTag::MixedDoubleNoJordan, _) => Expansion {
            values: CaseValues::Pair {
                plus: cr(0.5),
                minus: cr(0.5),
            },
            order: None,
        },
        (CaseTag::MixedJordan, CanonicalForm::Mixed { a0, b0, .. }) => Expansion {
            values: CaseValues::One((a0 - b0) / (16.0 * PI * nf * (a0 + b0))),
            order: None,
        },
        (CaseTag::MixedCloseV1, CanonicalForm::Mixed { a1, b1, c1, f1, .. }) => {
            let plus = -(c1 + f1) / (4.0 * PI * nf);
            let minus = (c1 + f1) * (a1 + b1) / (4.0 * PI * nf)
                - (c1 + f1).powi(2) * (a1 * f1 + c1 * b1)
                    / (8.0 * (a1 - b1).powi(2) * PI.powi(3) * nf.powi(3));
            Expansion {
                values: CaseValues::Pair { plus, minus },
                order: Some(4),
            }
        }
        (CaseTag::MixedCloseV3, _) => {
            let c1 = u.third_variant_c();
            let minus = c1.powi(2) / (8.0 * PI.powi(2) * nf.powi(2))
                - (c1.powi(4) - 4.0 * c1.powi(3)) / (128.0 * PI.powi(4) * nf.powi(4));
            Expansion {
                values: CaseValues::Pair {
                    plus: cr(0.5),
                    minus,
                },
                order: Some(6),
            }
        }
        (CaseTag::MixedSeparated, CanonicalForm::Mixed { a0, b0, a1, .. }) => {
            let al = u.alpha()?;
            if a1 == ZERO && u.big_b != ZERO {
                return Err(Error::WrongCase {
                    tag: "MixedSeparated".into(),
                    detail: "a1 = 0 with B != 0; swap endpoints first".into(),
                });
            }
            let lead = al.sin() * (a0 * a0 - b0 * b0) / 2.0;
            let corr = if u.big_b == ZERO {
                ZERO
            } else {
                u.big_b
                    * (u.big_a * a0 + (u.big_a * b0 + a1 * (a0 * a0 - b0 * b0)) * al.cos())
                    / (4.0 * PI * u.big_a * a1 * nf)
            };
            Expansion {
                values: CaseValues::Pair {
                    plus: lead + corr,
                    minus: -lead + corr,
                },
                order: Some(2),
            }
        }
        _ => unreachable!("tag/form mismatch"),
    };
    Ok(exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BoundaryConditions as Bc;
    use crate::measure::SignedMeasure;
    use crate::quad;
    use crate::spectrum::{eigenpair, unperturbed_spectrum, Eigenvalue, Spectrum};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close_v1_bc(c1: f64, f1: f64, b1: f64) -> Bc {
        // y(0) - y(1) = 0, y'(0) + b1 y'(1) + c1 y(0) + f1 y(1) = 0.
        Bc::mixed(0.0, 1.0, ONE, -ONE, ONE, cr(b1), cr(c1), cr(f1))
    }

    fn close_v3_bc(c1: f64) -> Bc {
        Bc::mixed(0.0, 1.0, ONE, -ONE, ONE, -ONE, cr(c1), ZERO)
    }

    fn separated_bc() -> Bc {
        // a0=1, b0=0.2, a1=0.3, b1=1: A=1.06, C=0.5, alpha real.
        Bc::mixed(0.0, 1.0, ONE, cr(0.2), cr(0.3), ONE, cr(0.15), cr(-0.25))
    }

    fn jordan_bc() -> Bc {
        // a0 y(0) + b0 y(1) = 0, y'(0) - y'(1) = 0 with a0 + b0 != 0.
        Bc::mixed(0.0, 1.0, cr(1.3), cr(0.4), ONE, -ONE, ZERO, ZERO)
    }

    /// Pick the spectrum entries of the doublet near `beta`: cluster
    /// spacing is `2 pi` and `|Re alpha| < pi`, so a window of half the
    /// spacing captures exactly the pair.
    fn doublet<'s>(spec: &'s Spectrum, beta: f64) -> Vec<&'s Eigenvalue> {
        spec.eigenvalues
            .iter()
            .filter(|e| (e.z.norm() - beta).abs() < PI)
            .collect()
    }

    #[test]
    fn neumann_roots_are_exact_multiples() {
        let bc = Bc::both_first_order(0.0, 1.0, ZERO, ZERO, ZERO, ZERO);
        let e = rho_expansion(&bc, 4).unwrap();
        assert_eq!(e.values.one(), cr(4.0 * PI));
        assert_eq!(e.order, Some(2));
    }

    #[test]
    fn third_variant_root_display() {
        let bc = close_v3_bc(1.0);
        let e = rho_expansion(&bc, 10).unwrap();
        let (plus, minus) = e.values.pair();
        assert_eq!(plus, cr(20.0 * PI));
        let expect = 20.0 * PI - 1.0 / (20.0 * PI) + (1.0 - 12.0) / (96_000.0 * PI.powi(3))
            + (1.0 - 6.0) / (96.0 * PI.powi(5) * 1e5);
        assert!((minus - cr(expect)).norm() < 1e-13, "minus {minus} vs {expect}");
        assert_eq!(e.order, Some(6));
    }

    #[test]
    fn separated_half_shift_is_exact_when_b_vanishes() {
        // y(0) = 0, y'(1) = 0: alpha = pi/2, B = 0.
        let bc = Bc::mixed(0.0, 1.0, ONE, ZERO, ZERO, ONE, ZERO, ZERO);
        let e = rho_expansion(&bc, 3).unwrap();
        let (plus, minus) = e.values.pair();
        assert!((plus - cr(6.0 * PI + PI / 2.0)).norm() < 1e-12);
        assert!((minus - cr(6.0 * PI - PI / 2.0)).norm() < 1e-12);
        // At the midpoint the doublet product sum is exactly 2.
        let p = product_expansion(&bc, 3, 0.5).unwrap();
        assert!((p.values.one() - cr(2.0)).norm() < 1e-12);
    }

    fn draw_case(rng: &mut ChaCha8Rng) -> Option<(SeparatedParams, C)> {
        let mut r = || rng.gen_range(-2.0..2.0f64);
        let (a0, b0, a1, b1) = (r(), r(), r(), r());
        let big_a = b1 * a0 + a1 * b0;
        if big_a.abs() < 0.1 || (a0 * a0 - b0 * b0).abs() < 0.05 || a1.abs() < 0.05 {
            return None;
        }
        let big_c = a1 * a0 + b1 * b0;
        let ratio = cr(big_c / big_a);
        let alpha = C::new(0.0, 1.0) * (-ratio - (ratio * ratio - ONE).sqrt()).ln();
        if alpha.sin().norm() < 0.1 {
            return None;
        }
        let bb = rng.gen_range(0.2..2.0f64) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        Some((
            SeparatedParams {
                a0: cr(a0),
                b0: cr(b0),
                a1: cr(a1),
                b1: cr(b1),
                big_a: cr(big_a),
                big_b: cr(bb),
            },
            alpha,
        ))
    }

    #[test]
    fn profile_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 1000 {
            let Some((p, al)) = draw_case(&mut rng) else { continue };
            let x = rng.gen_range(0.0..1.0);
            let f = vw(x, al, &p).unwrap();
            let g = vw(x, -al, &p).unwrap();
            let tol = 1e-10;
            let m = |v: C| 1.0 + v.norm();
            assert!((f.v0 - g.v0).norm() < tol * m(f.v0), "V0 even fails");
            assert!((f.v1 + g.v1).norm() < tol * m(f.v1), "V1 odd fails");
            assert!((f.w1 - g.w1).norm() < tol * m(f.w1), "W1 even fails");
            assert!((f.w0 + g.w0).norm() < tol * m(f.w0), "W0 odd fails");
            let mid = vw(0.5, al, &p).unwrap();
            assert!(mid.v0.norm() < tol, "V0(1/2) = {}", mid.v0);
            assert!(
                mid.w1.norm() < tol * (1.0 + mid.w0.norm()),
                "W1(1/2) = {} for {p:?}, alpha {al}",
                mid.w1
            );
            done += 1;
        }
    }

    #[test]
    fn profile_numerator_factorization() {
        // The W1 numerator factors through sin(alpha (x - 1/2)); both sides
        // of the displayed identity agree pointwise.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        while done < 100 {
            let Some((p, al)) = draw_case(&mut rng) else { continue };
            let x = rng.gen_range(0.0..1.0);
            let f = vw(x, al, &p).unwrap();
            let lhs = 2.0 * f.r1 * al.sin() * (2.0 * al * x).sin()
                + f.r2 * (2.0 * al * x).cos();
            let (a0, b0, a1, b1, ba) = (p.a0, p.b0, p.a1, p.b1, p.big_a);
            let d2 = a0 * a0 - b0 * b0;
            let d4 = a0.powi(4) - b0.powi(4);
            let s = |w: f64| (al * w).sin();
            let inner = (a0 * a1 * b0 * d2 * (2.0 * x - 1.0) + a0 * b0 * b0 * ba) * s(2.5 - x)
                + (2.0 * a1 * d4 * x + 2.0 * b0 * (a0 * a0 + b0 * b0) * ba) * s(1.5 - x)
                - (5.0 * a0.powi(3) * a1 * b0
                    + a0 * a1 * b0.powi(3)
                    + a0.powi(4) * b1
                    + 5.0 * a0 * a0 * b0 * b0 * b1)
                    * s(x - 0.5)
                - (2.0 * a1 * d4 * (1.0 - x) + 4.0 * a0 * a0 * b0 * ba) * s(0.5 + x)
                + (a0 * a1 * b0 * d2 * (2.0 * x - 1.0) - a0.powi(3) * ba) * s(1.5 + x);
            let rhs = 2.0 * s(x - 0.5) * inner;
            assert!(
                (lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()),
                "factorization fails: {lhs} vs {rhs}"
            );
            done += 1;
        }
    }

    #[test]
    fn profiles_are_continuous_on_compacts() {
        let p = SeparatedParams {
            a0: cr(1.2),
            b0: cr(0.5),
            a1: cr(0.8),
            b1: cr(0.9),
            big_a: cr(0.9 * 1.2 + 0.8 * 0.5),
            big_b: cr(0.7),
        };
        let max_step = |k: usize| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..k {
                for j in 1..k {
                    let x = i as f64 / k as f64;
                    let al = cr(0.2 + (PI - 0.4) * j as f64 / k as f64);
                    let alp = cr(0.2 + (PI - 0.4) * (j - 1) as f64 / k as f64);
                    let f = vw(x, al, &p).unwrap();
                    let g = vw(x, alp, &p).unwrap();
                    let fx = vw((x + 1.0 / k as f64).min(1.0), al, &p).unwrap();
                    for (u, v) in [
                        (f.v0, g.v0),
                        (f.v1, g.v1),
                        (f.w0, g.w0),
                        (f.w1, g.w1),
                        (f.v0, fx.v0),
                        (f.w1, fx.w1),
                    ] {
                        worst = worst.max((u - v).norm());
                    }
                }
            }
            worst
        };
        let coarse = max_step(24);
        let fine = max_step(48);
        assert!(
            fine < 0.7 * coarse,
            "no modulus-of-continuity decay: {fine} vs {coarse}"
        );
    }

    #[test]
    fn roots_match_numeric_spectra() {
        // N^p-scaled errors stay bounded; noise floors from the finite root
        // accuracy (~1e-9 absolute) are added where N^p amplifies them.
        let both1 = Bc::both_first_order(0.0, 1.0, cr(0.3), cr(-0.1), cr(0.2), cr(0.4));
        let v1 = close_v1_bc(0.3, 0.2, 0.5);
        let v3 = close_v3_bc(1.0);
        let sep = separated_bc();
        let ns = [20usize, 60, 200];

        let spec = unperturbed_spectrum(&both1, 202).unwrap();
        let mut prev = f64::INFINITY;
        for &n in &ns {
            let e = rho_expansion(&both1, n).unwrap();
            let err = (spec.eigenvalues[n].z - e.values.one()).norm();
            assert!(err * (n as f64).powi(2) < 1.0, "both1 scaled error at {n}: {err:.3e}");
            assert!(err < prev, "both1 error grew at {n}");
            prev = err;
        }

        for (name, bc, p, floor) in [
            ("v1", &v1, 4, 1e-8),
            ("v3", &v3, 6, 1e-8),
            ("sep", &sep, 2, 1e-9),
        ] {
            let spec = unperturbed_spectrum(bc, 406).unwrap();
            for &n in &ns {
                let e = rho_expansion(bc, n).unwrap();
                let (plus, minus) = e.values.pair();
                let beta = 2.0 * PI * n as f64;
                let pair = doublet(&spec, beta);
                assert_eq!(pair.len(), 2, "{name}: doublet at {n} has {} members", pair.len());
                let err = |target: C| {
                    pair.iter()
                        .map(|ev| (ev.z - target).norm())
                        .fold(f64::INFINITY, f64::min)
                };
                // A pair tighter than the root resolution is carried as one
                // multiplicity-2 point at the midpoint; compare against the
                // displays' midpoint in that case.
                let worst = if pair[0].multiplicity == 2 {
                    err(0.5 * (plus + minus))
                } else {
                    err(plus).max(err(minus))
                };
                let bound = 2.0 / (n as f64).powi(p) + floor;
                assert!(
                    worst < bound,
                    "{name} at {n}: error {worst:.3e} vs bound {bound:.3e}"
                );
            }
        }
    }

    #[test]
    fn odd_base_doublets() {
        // Antiperiodic rows: C = +A, doubles at odd multiples of pi.
        let bc = Bc::mixed(0.0, 1.0, ONE, ONE, ONE, ONE, ZERO, ZERO);
        let e = rho_expansion(&bc, 3).unwrap();
        let (plus, _) = e.values.pair();
        assert!((plus - cr(5.0 * PI)).norm() < 1e-12);
        let spec = unperturbed_spectrum(&bc, 8).unwrap();
        let pair = doublet(&spec, 5.0 * PI);
        assert_eq!(pair.len(), 2);
        for ev in pair {
            assert!((ev.z - cr(5.0 * PI)).norm() < 1e-9);
        }
    }

    /// Numeric doublet product sum at `x`, `<y, z> = 1` normalization.
    fn numeric_pair_product(bc: &Bc, spec: &Spectrum, beta: f64, x: f64) -> C {
        let q0 = SignedMeasure::zero(0.0, 1.0);
        let mut sum = ZERO;
        let mut seen = 0;
        for ev in doublet(spec, beta) {
            if ev.multiplicity == 2 && seen > 0 {
                continue; // double root: one eigenpair call covers both slots
            }
            let p = eigenpair(bc, &q0, ev).unwrap();
            for (y, z) in &p.pairs {
                sum += y.eval(x) * z.eval(x).conj();
            }
            seen += 1;
        }
        sum
    }

    #[test]
    fn products_match_numeric_eigenfunctions() {
        let q0 = SignedMeasure::zero(0.0, 1.0);
        let grid = [0.13, 0.4, 0.77];

        // Dirichlet: exact display.
        let dir = Bc::dirichlet(0.0, 1.0);
        let spec = unperturbed_spectrum(&dir, 12).unwrap();
        for &x in &grid {
            let p = eigenpair(&dir, &q0, &spec.eigenvalues[9]).unwrap();
            let (y, z) = &p.pairs[0];
            let num = y.eval(x) * z.eval(x).conj();
            let e = product_expansion(&dir, 10, x).unwrap();
            assert!((num - e.values.one()).norm() < 1e-9);
        }

        // First-order rows: single member, display index n = list index.
        let both1 = Bc::both_first_order(0.0, 1.0, cr(0.3), cr(-0.1), cr(0.2), cr(0.4));
        let spec = unperturbed_spectrum(&both1, 92).unwrap();
        let mut errs = Vec::new();
        for n in [30usize, 90] {
            let p = eigenpair(&both1, &q0, &spec.eigenvalues[n]).unwrap();
            let (y, z) = &p.pairs[0];
            let mut worst = 0.0f64;
            for &x in &grid {
                let num = y.eval(x) * z.eval(x).conj();
                let e = product_expansion(&both1, n, x).unwrap();
                worst = worst.max((num - e.values.one()).norm());
            }
            errs.push(worst);
        }
        assert!(errs[0] < 0.05, "both1 error at 30: {:.3e}", errs[0]);
        assert!(errs[1] < errs[0] / 3.0, "errors {errs:?} not O(1/N^2)");

        // Close pairs and the separated case: doublet sums.
        for (name, bc, n_lo, tol) in [
            ("v1", close_v1_bc(0.3, 0.2, 0.5), 30usize, 0.05),
            ("v3", close_v3_bc(1.0), 30, 0.02),
            ("sep", separated_bc(), 30, 0.05),
        ] {
            let spec = unperturbed_spectrum(&bc, 2 * 3 * n_lo + 4).unwrap();
            let mut errs = Vec::new();
            for n in [n_lo, 3 * n_lo] {
                let beta = 2.0 * PI * n as f64;
                let mut worst = 0.0f64;
                for &x in &grid {
                    let num = numeric_pair_product(&bc, &spec, beta, x);
                    let e = product_expansion(&bc, n, x).unwrap();
                    worst = worst.max((num - e.values.one()).norm());
                }
                errs.push(worst);
            }
            assert!(errs[0] < tol, "{name} error at {n_lo}: {:.3e}", errs[0]);
            assert!(
                errs[1] < errs[0] / 2.0,
                "{name} errors {errs:?} do not decay"
            );
        }

        // Periodic doubles: the sum collapses to the constant 2.
        let per = Bc::periodic(0.0, 1.0);
        let spec = unperturbed_spectrum(&per, 18).unwrap();
        for &x in &grid {
            let num = numeric_pair_product(&per, &spec, 2.0 * PI * 8.0, x);
            assert!((num - cr(2.0)).norm() < 1e-8, "periodic sum {num} at {x}");
        }
    }

    #[test]
    fn jordan_combo_matches_adjoined_pair() {
        let bc = jordan_bc();
        let q0 = SignedMeasure::zero(0.0, 1.0);
        let spec = unperturbed_spectrum(&bc, 18).unwrap();
        let n = 8;
        let ev = doublet(&spec, 2.0 * PI * n as f64)[0];
        assert!(ev.jordan);
        let p = eigenpair(&bc, &q0, ev).unwrap();
        let (y, z) = &p.pairs[0];
        let (yh, zh) = p.adjoined.as_ref().unwrap();
        for &x in &[0.2, 0.55, 0.9] {
            let num = y.eval(x) * zh.eval(x).conj() + yh.eval(x) * z.eval(x).conj();
            let e = product_expansion(&bc, n, x).unwrap();
            assert!(
                (num - e.values.one()).norm() < 1e-6,
                "combo at {x}: {num} vs {:?}",
                e.values.one()
            );
        }
    }

    /// `\int_0^1 f` for a trigonometric integrand oscillating at rate `osc`.
    fn quadc<F: FnMut(f64) -> C>(osc: f64, f: F) -> C {
        quad::integrate(0.0, 1.0, osc, f)
    }

    #[test]
    fn scalar_products_match_quadrature() {
        // Close-pair variant 1: the exact member's product is analytic.
        let (c1v, f1v, b1v) = (0.3, 0.2, 0.5);
        let bc = close_v1_bc(c1v, f1v, b1v);
        let (a1, b1, c1, f1) = (ONE, cr(b1v), cr(c1v), cr(f1v));
        for n in [20usize, 60] {
            let w = 2.0 * PI * n as f64;
            let i_plus = quadc(2.0 * w, |x| {
                let eta = (a1 + b1) * (w * x).cos() - (c1 + f1) * (w * x).sin() / w;
                eta * (w * x).sin()
            });
            let e = scalar_product_expansion(&bc, n).unwrap();
            let (plus, _) = e.values.pair();
            assert!(
                (i_plus - plus).norm() < 1e-10,
                "plus member at {n}: {i_plus} vs {plus}"
            );
        }
        // Minus member against the numeric root, O(N^-4).
        let spec = unperturbed_spectrum(&bc, 2 * 60 + 4).unwrap();
        let mut errs = Vec::new();
        for n in [20usize, 60] {
            let beta = 2.0 * PI * n as f64;
            // The plus member is exactly beta; the minus member is the
            // farther of the two.
            let rho = doublet(&spec, beta)
                .into_iter()
                .map(|e| e.z)
                .max_by(|a, b| {
                    (a - cr(beta)).norm().partial_cmp(&(b - cr(beta)).norm()).unwrap()
                })
                .unwrap();
            let i_minus = quadc(2.0 * beta, |x| {
                let eta = a1 * (rho * x).cos() + b1 * (rho * (1.0 - x)).cos()
                    - c1 * (rho * x).sin() / rho
                    + f1 * (rho * (1.0 - x)).sin() / rho;
                let zeta = b1 * (rho * x).sin() - a1 * (rho * (1.0 - x)).sin();
                eta * zeta
            });
            let (_, minus) = scalar_product_expansion(&bc, n).unwrap().values.pair();
            errs.push((i_minus - minus).norm());
        }
        assert!(errs[0] < 1e-5, "v1 minus error at 20: {:.3e}", errs[0]);
        assert!(errs[1] < errs[0] / 10.0, "v1 minus errors {errs:?}");

        // Jordan cross product is exact.
        let bc = jordan_bc();
        let (a0, b0) = (1.3, 0.4);
        for n in [10usize, 25] {
            let w = 2.0 * PI * n as f64;
            let i = quadc(2.0 * w, |x| {
                let zhat = -x * (w * x).sin() / (2.0 * w) - (w * x).cos() / (4.0 * w * w)
                    + a0 * (w * x).sin() / (2.0 * w * (a0 + b0));
                cr((w * x).sin()) * zhat
            });
            let e = scalar_product_expansion(&bc, n).unwrap();
            assert!(
                (i - e.values.one()).norm() < 1e-12,
                "jordan at {n}: {i} vs {:?}",
                e.values.one()
            );
        }

        // Third variant: minus member to O(N^-6).
        let bc = close_v3_bc(1.0);
        let spec = unperturbed_spectrum(&bc, 2 * 30 + 4).unwrap();
        let mut errs = Vec::new();
        for n in [10usize, 30] {
            let beta = 2.0 * PI * n as f64;
            let rho = doublet(&spec, beta)
                .into_iter()
                .map(|e| e.z)
                .max_by(|a, b| {
                    (a - cr(beta)).norm().partial_cmp(&(b - cr(beta)).norm()).unwrap()
                })
                .unwrap();
            let i = quadc(2.0 * beta, |x| {
                let s = (rho * x).sin() + (rho * (1.0 - x)).sin();
                s * s
            });
            let (_, minus) = scalar_product_expansion(&bc, n).unwrap().values.pair();
            errs.push((i - minus).norm());
        }
        assert!(errs[0] < 1e-7, "v3 minus error at 10: {:.3e}", errs[0]);
        assert!(errs[1] < errs[0] / 50.0, "v3 minus errors {errs:?}");

        // Separated case, O(N^-2): both members against their numeric roots.
        let bc = separated_bc();
        let (p, _) = separated_params(&bc).unwrap();
        let spec = unperturbed_spectrum(&bc, 2 * 60 + 4).unwrap();
        let mut errs = Vec::new();
        for n in [20usize, 60] {
            let beta = 2.0 * PI * n as f64;
            let e = rho_expansion(&bc, n).unwrap();
            let members = doublet(&spec, beta);
            let nearest = |t: C| {
                members
                    .iter()
                    .map(|e| e.z)
                    .min_by(|a, b| (a - t).norm().partial_cmp(&(b - t).norm()).unwrap())
                    .unwrap()
            };
            let sp = scalar_product_expansion(&bc, n).unwrap().values.pair();
            let mut worst = 0.0f64;
            for (target, display) in [(e.values.pair().0, sp.0), (e.values.pair().1, sp.1)] {
                let rho = nearest(target);
                let i = quadc(2.0 * beta, |x| {
                    let eta = p.a0 * (rho * x).sin() - p.b0 * (rho * (1.0 - x)).sin();
                    let zeta = p.b0 * (rho * x).cos()
                        + p.a0 * (rho * (1.0 - x)).cos()
                        + p.big_b * (rho * x).sin() / (p.a1 * rho);
                    eta * zeta
                });
                worst = worst.max((i - display).norm());
            }
            errs.push(worst);
        }
        assert!(errs[0] < 0.01, "sep error at 20: {:.3e}", errs[0]);
        assert!(errs[1] < errs[0] / 2.0, "sep errors {errs:?}");
    }

    #[test]
    fn affine_rescaling_consistency() {
        // The same unit-interval problem planted on [2, 2.5].
        let unit = Bc::both_first_order(0.0, 1.0, cr(0.3), cr(-0.1), cr(0.2), cr(0.4));
        let wide = Bc::both_first_order(2.0, 2.5, cr(0.6), cr(-0.2), cr(0.4), cr(0.8));
        for n in [5usize, 12] {
            let eu = rho_expansion(&unit, n).unwrap().values.one();
            let ew = rho_expansion(&wide, n).unwrap().values.one();
            assert!((ew - 2.0 * eu).norm() < 1e-12, "roots {ew} vs 2x {eu}");
            for &t in &[0.3, 0.8] {
                let pu = product_expansion(&unit, n, t).unwrap().values.one();
                let pw = product_expansion(&wide, n, 2.0 + 0.5 * t).unwrap().values.one();
                assert!((pw - 2.0 * pu).norm() < 1e-12, "products {pw} vs 2x {pu}");
            }
        }
    }

    #[test]
    fn wrong_inputs_are_rejected() {
        let bc = Bc::dirichlet(0.0, 1.0);
        assert!(matches!(
            rho_expansion(&bc, 0),
            Err(Error::WrongCase { .. })
        ));
        assert!(matches!(
            separated_params(&bc),
            Err(Error::WrongCase { .. })
        ));
        let (p, _) = separated_params(&separated_bc()).unwrap();
        assert!(matches!(
            vw(0.3, ZERO, &p),
            Err(Error::SingularAlpha(_))
        ));
    }
}
