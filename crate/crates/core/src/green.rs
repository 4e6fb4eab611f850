//! Green function of the unperturbed operator `-y'' - lambda y`, the
//! boundary determinants behind its diagonal closed form, and resolvent
//! contour integrals over circles `|lambda| = R^2`.
//!
//! Two independent evaluation routes are kept deliberately: a constructive
//! solver (Cauchy basis + Wronskian jump, any `x, y`) and the determinant
//! formula on the diagonal.  They cross-validate each other, which pins the
//! sign and column conventions of the determinants.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::bc::BoundaryConditions;
use crate::error::Error;
use crate::measure::SignedMeasure;
use crate::propagator::transfer;
use crate::scaled::Sc;
use crate::spectrum::{separation_radii, sqrt_upper, unperturbed_spectrum, Spectrum};
use crate::Result;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);
/// `ln(1e-8)`: relative floor for `|Delta|` against the local size of its
/// terms before a point counts as too close to a pole.
const POLE_LOG_TOL: f64 = -18.420680743952367;
/// `ln(1e-14)`: noise floor for the constructive solver's 2x2 system.  Its
/// products carry the full double exponential `e^{2|Im z|(b-a)}` while the
/// determinant only grows like the single one, so the relative gap is
/// structural; what actually invalidates the solve is the determinant
/// dropping to rounding noise of the products.
const DET_NOISE_LOG: f64 = -32.23619130191664;

/// The boundary-form determinants for the exponential basis
/// `u1 = e^{izx}, u2 = e^{-izx}`, with their leading forms.
///
/// Writing `P_j(s) = alpha_j s + gamma_j`, `Q_j(s) = beta_j s + phi_j` for
/// the normalized rows and `[XY] = X_0(iz) Y_1(-iz) - X_1(iz) Y_0(-iz)`,
/// the exact determinants are
///
/// ```text
/// Delta    = [PP] + [QQ] + e^{iz(b-a)} [QP] + e^{-iz(b-a)} [PQ]
/// Delta_11 = e^{iz(b-a)} [QP] + [QQ]
/// Delta_22 = e^{-iz(b-a)} [PQ] + [QQ]
/// Delta_12 = e^{iz(a+b)}  (P_0 Q_1 - P_1 Q_0)(iz)
/// Delta_21 = e^{-iz(a+b)} (P_1 Q_0 - P_0 Q_1)(-iz)
/// ```
///
/// which combine into the diagonal Green function as
/// `G0(x,x) = (Delta_11 + e^{-2izx} Delta_12 - e^{2izx} Delta_21 - Delta_22)
/// / (2iz Delta)`.
///
/// The hat fields are the leading 2x2 determinants in the row leading
/// coefficients `(a_j, b_j)`; each exact determinant equals its hat form
/// times the stated exponential and `(iz)^{d0+d1}` up to `O(1/z)` relative
/// in the upper half-plane.  The `hat_d22` minor is written with first
/// column `a_j + b_j e^{iz(b-a)}` (row index running), the only choice
/// consistent with the exact functional determinant and the half-plane
/// limit `Delta_22 / Delta -> 1`.
#[derive(Debug, Clone)]
pub struct DeltaDeterminants {
    pub z: C,
    /// Derivative orders `(d0, d1)` of the normalized rows.
    pub degrees: (u8, u8),
    pub delta: Sc,
    pub d11: Sc,
    pub d12: Sc,
    pub d21: Sc,
    pub d22: Sc,
    pub hat_delta: Sc,
    pub hat_d11: Sc,
    pub hat_d12: C,
    pub hat_d21: C,
    pub hat_d22: Sc,
}

/// Normalized-row data shared by every node of a contour.
#[derive(Debug, Clone)]
struct RowData {
    a: f64,
    b: f64,
    /// `[alpha, gamma, beta, phi]` per row.
    rows: [[C; 4]; 2],
    degrees: (u8, u8),
    /// Leading coefficients `(a_j, b_j)` of `(P_j, Q_j)` at order `d_j`.
    lead: [(C, C); 2],
}

impl RowData {
    fn build(bc: &BoundaryConditions) -> Result<RowData> {
        let n = bc.normalize()?;
        let (a, b) = n.interval();
        let rows = *n.rows();
        let mut deg = [0u8; 2];
        let mut lead = [(ZERO, ZERO); 2];
        for j in 0..2 {
            let [al, ga, be, ph] = rows[j];
            if al != ZERO || be != ZERO {
                deg[j] = 1;
                lead[j] = (al, be);
            } else {
                lead[j] = (ga, ph);
            }
        }
        Ok(RowData {
            a,
            b,
            rows,
            degrees: (deg[0], deg[1]),
            lead,
        })
    }

    /// `(P_j(s), Q_j(s))`.
    fn polys(&self, j: usize, s: C) -> (C, C) {
        let [al, ga, be, ph] = self.rows[j];
        (al * s + ga, be * s + ph)
    }

    fn determinants(&self, z: C) -> DeltaDeterminants {
        let iz = I * z;
        let (p0, q0) = self.polys(0, iz);
        let (p1, q1) = self.polys(1, iz);
        let (p0m, q0m) = self.polys(0, -iz);
        let (p1m, q1m) = self.polys(1, -iz);
        let pp = p0 * p1m - p1 * p0m;
        let qq = q0 * q1m - q1 * q0m;
        let qp = q0 * p1m - q1 * p0m;
        let pq = p0 * q1m - p1 * q0m;
        let len = self.b - self.a;
        let ep = Sc::exp_i(z * len); // e^{iz(b-a)}
        let em = Sc::exp_i(-z * len); // e^{-iz(b-a)}
        let delta = Sc::from_c(pp + qq)
            .add(&ep.mul_c(qp))
            .add(&em.mul_c(pq));
        let d11 = ep.mul_c(qp).add(&Sc::from_c(qq));
        let d22 = em.mul_c(pq).add(&Sc::from_c(qq));
        let d12 = Sc::exp_i(z * (self.a + self.b)).mul_c(p0 * q1 - p1 * q0);
        let d21 = Sc::exp_i(-z * (self.a + self.b)).mul_c(p1m * q0m - p0m * q1m);

        let (a0, b0) = self.lead[0];
        let (a1, b1) = self.lead[1];
        let s0 = if self.degrees.0 == 1 { -1.0 } else { 1.0 };
        let s1 = if self.degrees.1 == 1 { -1.0 } else { 1.0 };
        let c0 = Sc::from_c(a0).add(&ep.mul_c(b0)); // a0 + b0 E
        let c1 = Sc::from_c(a1).add(&ep.mul_c(b1));
        let r0 = ep.mul_c(a0).add(&Sc::from_c(b0)).mul_c(C::new(s0, 0.0)); // s0 (a0 E + b0)
        let r1 = ep.mul_c(a1).add(&Sc::from_c(b1)).mul_c(C::new(s1, 0.0));
        let hat_delta = c0.mul(&r1).sub(&c1.mul(&r0));
        let hat_d11 = r1.mul_c(b0).sub(&r0.mul_c(b1));
        let hat_d12 = a0 * b1 - a1 * b0;
        let parity = if (self.degrees.0 + self.degrees.1) % 2 == 0 { -1.0 } else { 1.0 };
        let hat_d21 = parity * hat_d12;
        let hat_d22 = c0.mul_c(s1 * b1).sub(&c1.mul_c(s0 * b0));

        DeltaDeterminants {
            z,
            degrees: self.degrees,
            delta,
            d11,
            d12,
            d21,
            d22,
            hat_delta,
            hat_d11,
            hat_d12,
            hat_d21,
            hat_d22,
        }
    }

    /// `log` of the natural size of `Delta`'s constituents; `Delta` far
    /// below this means a nearby zero (or full cancellation).
    fn corner_scale(d: &DeltaDeterminants) -> f64 {
        d.d11
            .log_abs()
            .max(d.d22.log_abs())
            .max(d.d12.log_abs())
            .max(d.d21.log_abs())
    }

    /// Numerator of the diagonal formula at `x`.
    fn diagonal_numerator(&self, d: &DeltaDeterminants, x: f64) -> Sc {
        d.d11
            .add(&d.d12.mul(&Sc::exp_i(-2.0 * d.z * x)))
            .sub(&d.d21.mul(&Sc::exp_i(2.0 * d.z * x)))
            .sub(&d.d22)
    }

    fn diagonal(&self, d: &DeltaDeterminants, x: f64) -> C {
        self.diagonal_numerator(d, x)
            .ratio_c(&d.delta.mul_c(2.0 * I * d.z))
    }
}

/// Boundary determinants at the spectral parameter `z` (`lambda = z^2`).
pub fn delta_determinants(bc: &BoundaryConditions, z: C) -> Result<DeltaDeterminants> {
    Ok(RowData::build(bc)?.determinants(z))
}

/// Diagonal Green function via the determinant formula.
pub fn green0_diagonal(bc: &BoundaryConditions, x: f64, lambda: C) -> Result<C> {
    let rd = RowData::build(bc)?;
    let z = sqrt_upper(lambda);
    let d = rd.determinants(z);
    if d.delta.log_abs() < RowData::corner_scale(&d) + POLE_LOG_TOL {
        return Err(Error::NearPole { lambda });
    }
    Ok(rd.diagonal(&d, x))
}

/// Green function of `L0 - lambda` at `(x, y)`, constructive route.
///
/// Builds `G(., y) = w + H(. - y) v` where `v` solves the homogeneous
/// equation with Cauchy data `(0, -1)` at `y` (the unit Wronskian jump) and
/// `w` is the Cauchy-basis combination restoring the boundary conditions.
/// All intermediate solution values are kept in scaled form, so the
/// evaluation stays finite at large `|Im z|`.
pub fn green0(bc: &BoundaryConditions, x: f64, y: f64, lambda: C) -> Result<C> {
    let (a, b) = bc.interval();
    if !(a..=b).contains(&x) || !(a..=b).contains(&y) {
        return Err(Error::InvalidProblem(format!(
            "green function arguments ({x}, {y}) outside [{a}, {b}]"
        )));
    }
    let q0 = SignedMeasure::zero(a, b);
    let t = transfer(&q0, lambda, a, b);
    let rows = bc.rows();
    // A[j][k] = U_j(y_k) for the Cauchy basis at a, split as a-part plus
    // scaled b-part exactly like the characteristic determinant.
    let mut amat = [[Sc::ZERO; 2]; 2];
    for j in 0..2 {
        let [al, ga, be, ph] = rows[j];
        let aconst = [ga, al];
        for k in 0..2 {
            let b_part = ph * t.m[0][k] + be * t.m[1][k];
            amat[j][k] = Sc::from_c(aconst[k]).add(&Sc::new(b_part, t.log_scale));
        }
    }
    let det = amat[0][0].mul(&amat[1][1]).sub(&amat[0][1].mul(&amat[1][0]));
    let scale = amat[0][0]
        .mul(&amat[1][1])
        .log_abs()
        .max(amat[0][1].mul(&amat[1][0]).log_abs());
    if det.is_zero() || det.log_abs() < scale + DET_NOISE_LOG {
        return Err(Error::NearPole { lambda });
    }
    // v propagated to b: Cauchy data (0, -1) at y.
    let tyb = transfer(&q0, lambda, y, b);
    let (vb, dvb) = (-tyb.m[0][1], -tyb.m[1][1]);
    let mut r = [Sc::ZERO; 2];
    for j in 0..2 {
        let [_, _, be, ph] = rows[j];
        r[j] = Sc::new(-(be * dvb + ph * vb), tyb.log_scale);
    }
    let xi0 = r[0].mul(&amat[1][1]).sub(&r[1].mul(&amat[0][1])).div(&det);
    let xi1 = r[1].mul(&amat[0][0]).sub(&r[0].mul(&amat[1][0])).div(&det);
    let tax = transfer(&q0, lambda, a, x);
    let mut g = xi0
        .mul(&Sc::new(tax.m[0][0], tax.log_scale))
        .add(&xi1.mul(&Sc::new(tax.m[0][1], tax.log_scale)));
    if x >= y {
        let tyx = transfer(&q0, lambda, y, x);
        g = g.add(&Sc::new(-tyx.m[0][1], tyx.log_scale));
    }
    Ok(g.to_c())
}

// ---------------------------------------------------------------------------
// contour integrals

/// Trapezoid over the upper half-circle `z = r e^{i theta}`,
/// `theta in [0, pi]`, of a node function returning `(integrand, margin)`,
/// where margin is `log|Delta|` relative to its local term size.
fn half_circle<F>(r: f64, n: usize, f: &F) -> (C, f64)
where
    F: Fn(C) -> (C, f64) + Sync,
{
    let h = PI / n as f64;
    let vals: Vec<(C, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| f(C::from_polar(r, k as f64 * h)))
        .collect();
    let mut acc = ZERO;
    for (k, (v, _)) in vals.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * v;
    }
    let lo = vals.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    (acc * h, lo)
}

/// Adaptive contour driver: doubles the node count from 64 until successive
/// values agree to 1e-8 (cap 2^14), guarding `|Delta|` against near-zeros.
fn contour<F>(rd: &RowData, r: f64, f: F) -> Result<C>
where
    F: Fn(C, &DeltaDeterminants) -> C + Sync,
{
    let node = |z: C| {
        let d = rd.determinants(z);
        let margin = d.delta.log_abs() - RowData::corner_scale(&d);
        let v = f(z, &d);
        (v, margin)
    };
    let mut n = 64;
    let mut prev: Option<C> = None;
    loop {
        let (val, lo) = half_circle(r, n, &node);
        if lo < POLE_LOG_TOL {
            return Err(Error::CircleTooClose { radius: r });
        }
        if let Some(p) = prev {
            if (val - p).norm() < 1e-8 {
                return Ok(val);
            }
        }
        if n >= 1 << 14 {
            return Ok(val);
        }
        prev = Some(val);
        n *= 2;
    }
}

/// `\oint_{|lambda|=R^2} G0(x,x,lambda)^2 dlambda` via the substitution
/// `lambda = z^2` on the upper half-circle of radius `R`.
pub fn contour_g0_squared(bc: &BoundaryConditions, x: f64, r: f64) -> Result<C> {
    let rd = RowData::build(bc)?;
    if !(rd.a < x && x < rd.b) {
        return Err(Error::InvalidProblem(format!(
            "diagonal point {x} outside ({}, {})",
            rd.a, rd.b
        )));
    }
    contour(&rd, r, |z, d| {
        let g = rd.diagonal(d, x);
        g * g * 2.0 * I * z * z
    })
}

/// `-(1/2 pi i) \oint_{|lambda|=R^2} \int G0(x,x,lambda) q(dx) dlambda`.
///
/// The inner integral is closed-form: the `x`-dependence of the diagonal
/// sits entirely in `e^{-+ 2izx}`, so integrating against the measure turns
/// the numerator into exponential moments.
pub fn contour_trace_term(bc: &BoundaryConditions, q: &SignedMeasure, r: f64) -> Result<C> {
    let rd = RowData::build(bc)?;
    let mass = q.mass();
    let val = contour(&rd, r, |z, d| {
        let num = d
            .d11
            .sub(&d.d22)
            .mul_c(mass)
            .add(&d.d12.mul(&q.exp_moment(-2.0 * z)))
            .sub(&d.d21.mul(&q.exp_moment(2.0 * z)));
        let inner = num.ratio_c(&d.delta.mul_c(2.0 * I * z));
        inner * 2.0 * I * z * z
    })?;
    Ok(val * (-1.0 / (2.0 * PI * I)))
}

// ---------------------------------------------------------------------------
// schedules

/// Counting radii separated from the spectrum, one value (or one cluster
/// pair) per gap.
#[derive(Debug, Clone)]
pub struct ContourSchedule {
    /// Radii in the `z`-plane.
    pub radii: Vec<f64>,
    /// Distance from each radius to the nearest `|z_N|`.
    pub margins: Vec<f64>,
    /// Eigenvalues (with multiplicity) between consecutive radii; the first
    /// entry counts below `radii[0]`.
    pub counts: Vec<usize>,
    pub strongly_regular: bool,
}

/// Schedule from an already-computed unperturbed spectrum.
pub fn schedule_from_spectrum(spec: &Spectrum, len: usize) -> Result<ContourSchedule> {
    let seps = separation_radii(spec);
    let mut radii = Vec::with_capacity(len);
    let mut margins = Vec::with_capacity(len);
    for (i, &(mid, gap)) in seps.iter().take(len).enumerate() {
        let margin = 0.5 * gap;
        if margin < 1e-4 {
            return Err(Error::UnseparableSpectrum {
                z_abs: mid,
                detail: format!("separation {margin:.3e} below 1e-4 at gap {i}"),
            });
        }
        radii.push(mid);
        margins.push(margin);
    }
    let mut counts = Vec::with_capacity(radii.len());
    let mut below = 0;
    for &r in &radii {
        let c = spec.count_below(r);
        counts.push(c - below);
        below = c;
    }
    let strongly_regular = counts.iter().skip(1).all(|&c| c == 1);
    Ok(ContourSchedule {
        radii,
        margins,
        counts,
        strongly_regular,
    })
}

/// Build a schedule of `len` radii for the unperturbed problem.
pub fn build_schedule(bc: &BoundaryConditions, len: usize) -> Result<ContourSchedule> {
    let spec = unperturbed_spectrum(bc, 2 * len + 4)?;
    schedule_from_spectrum(&spec, len)
}
