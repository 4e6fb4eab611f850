//! Characteristic function, eigenvalue localization in the complex plane,
//! multiplicity and Jordan-block detection, eigenfunctions and biorthogonal
//! normalization.
//!
//! Roots are found from case-specific asymptotic seeds refined by Newton
//! iteration, a rectangle-subdivision argument-principle sweep for the low
//! region where expansions are unreliable, and contour power sums for
//! clusters that Newton alone cannot resolve.  Every spectrum is validated
//! by winding-number counts on a thinned schedule of separation radii.

use crate::bc::{BcInvariants, BoundaryConditions, CaseTag};
use crate::measure::SignedMeasure;
use crate::propagator::{transfer, State, Transfer};
use crate::quad;
use crate::scaled::Sc;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const PI: f64 = std::f64::consts::PI;

/// Relative margin (in `z` units) below which two roots are no longer
/// resolvable as distinct and are carried as one point of multiplicity two.
const MERGE_Z: f64 = 1e-6;
/// Newton convergence: `|step| < NEWTON_TOL * (1 + |lambda|)`.
const NEWTON_TOL: f64 = 1e-10;
/// Rank decisions on the 2x2 boundary matrix.
const RANK_TOL: f64 = 1e-8;
/// Log dynamic range on a contour beyond which a root is considered to sit
/// on the contour itself.
const DIP_LOG: f64 = 30.0;

/// Square root with `Re z >= 0`, taking the positive imaginary axis on the
/// negative real cut.  Unlike the upper-half-plane branch this is stable
/// against rounding noise in `Im lambda` for the (typical) eigenvalues that
/// sit on the positive real axis.
pub fn sqrt_upper(lambda: C) -> C {
    let z = lambda.sqrt();
    if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
        -z
    } else {
        z
    }
}

fn arg_2pi(lambda: C) -> f64 {
    let t = lambda.arg();
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Unperturbed,
    Perturbed,
}

#[derive(Debug, Clone, Copy)]
pub struct Eigenvalue {
    pub lambda: C,
    /// `z^2 = lambda`, the root with `Re z >= 0`.
    pub z: C,
    /// 1-based position in the modulus ordering.
    pub index: usize,
    /// Algebraic multiplicity of the underlying root (1 or 2); double roots
    /// occupy two consecutive list slots.
    pub multiplicity: u8,
    /// True when the geometric multiplicity is smaller than the algebraic.
    pub jordan: bool,
    /// Cluster id shared by eigenvalues that form one asymptotic group.
    pub cluster: usize,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub provenance: Provenance,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Entries with `|z| < r`.
    pub fn count_below(&self, r: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.z.norm() < r).count()
    }

    /// Consecutive index ranges sharing a cluster id.
    pub fn cluster_ranges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (i, e) in self.eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some(r) if self.eigenvalues[r.0].cluster == e.cluster => r.1 = i + 1,
                _ => out.push((i, i + 1)),
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// characteristic function

struct CharData {
    value: Sc,
    deriv: Sc,
    /// Boundary matrix `U_j(u_k)`.
    u: [[Sc; 2]; 2],
}

fn char_data(bc: &BoundaryConditions, q: &SignedMeasure, lambda: C) -> CharData {
    let (a, b) = bc.interval();
    let t = transfer(q, lambda, a, b);
    let rows = bc.rows();
    let mut u = [[Sc::ZERO; 2]; 2];
    // Endpoint-b parts of U_j(u_k) and their lambda-derivatives, as
    // mantissas at exponent t.log_scale.
    let mut bb = [[ZERO; 2]; 2];
    let mut dbb = [[ZERO; 2]; 2];
    for j in 0..2 {
        let [al, ga, be, ph] = rows[j];
        for k in 0..2 {
            // u_k has Cauchy data e_k at `a`; at `b` it is column k of `t`.
            let at_a = if k == 0 { ga } else { al };
            bb[j][k] = ph * t.m[0][k] + be * t.m[1][k];
            dbb[j][k] = ph * t.dm[0][k] + be * t.dm[1][k];
            u[j][k] = Sc::from_c(at_a).add(&Sc::new(bb[j][k], t.log_scale));
        }
    }
    // Naive expansion of the determinant multiplies two endpoint-b parts and
    // cancels the doubled growth exp(2 l |Im z|) back down to
    // exp(l |Im z|), which drowns in roundoff on large contours.  Splitting
    // U_j(u_k) into its endpoint parts, the b-b bracket is
    // (phi_0 beta_1 - beta_0 phi_1) det T = const by the Wronskian, so the
    // full determinant needs no product of b-parts at all.
    let [al0, ga0, be0, ph0] = rows[0];
    let [al1, ga1, be1, ph1] = rows[1];
    let const_part = ga0 * al1 - al0 * ga1 + ph0 * be1 - be0 * ph1;
    let cross = ga0 * bb[1][1] - al0 * bb[1][0] + bb[0][0] * al1 - bb[0][1] * ga1;
    let dcross = ga0 * dbb[1][1] - al0 * dbb[1][0] + dbb[0][0] * al1 - dbb[0][1] * ga1;
    let value = Sc::from_c(const_part).add(&Sc::new(cross, t.log_scale));
    let deriv = Sc::new(dcross, t.log_scale);
    CharData { value, deriv, u }
}

/// Determinant of the boundary functionals on the fundamental system
/// propagated from the left endpoint; entire in `lambda`, zeros are the
/// eigenvalues with matching multiplicity.
pub fn characteristic(bc: &BoundaryConditions, q: &SignedMeasure, lambda: C) -> Sc {
    char_data(bc, q, lambda).value
}

/// `char'/char`, or `None` exactly on a root.
fn log_deriv(bc: &BoundaryConditions, q: &SignedMeasure, lambda: C) -> Option<C> {
    let d = char_data(bc, q, lambda);
    if d.value.is_zero() {
        return None;
    }
    let r = d.deriv.ratio_c(&d.value);
    if r.is_finite() {
        Some(r)
    } else {
        None
    }
}

/// Singular values of a 2x2 complex matrix, largest first.
fn singular_values(m: &[[C; 2]; 2]) -> (f64, f64) {
    let t: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let d = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    let s1 = (0.5 * (t + (t * t - 4.0 * d * d).max(0.0).sqrt())).sqrt();
    if s1 == 0.0 {
        return (0.0, 0.0);
    }
    (s1, d / s1)
}

/// Normalized mantissas of the boundary matrix together with the common
/// log-scale that was divided out.
fn boundary_mantissas(u: &[[Sc; 2]; 2]) -> ([[C; 2]; 2], f64) {
    let top = u
        .iter()
        .flatten()
        .map(|s| s.log_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return ([[ZERO; 2]; 2], f64::NEG_INFINITY);
    }
    let mut m = [[ZERO; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            m[j][k] = u[j][k].m * (u[j][k].e - top).exp();
        }
    }
    (m, top)
}

/// Rank of the boundary matrix at `lambda`, measured against nearby probe
/// points so that a matrix that vanishes identically at a semisimple double
/// reads as rank 0.
fn boundary_rank(bc: &BoundaryConditions, q: &SignedMeasure, lambda: C) -> u8 {
    let d = char_data(bc, q, lambda);
    let (m, top) = boundary_mantissas(&d.u);
    let delta = 1e-3 * (1.0 + lambda.norm());
    let mut probe_top = f64::NEG_INFINITY;
    for k in 0..3 {
        let dir = C::from_polar(delta, 2.0 * PI * k as f64 / 3.0 + 0.4);
        let p = char_data(bc, q, lambda + dir);
        let (_, pt) = boundary_mantissas(&p.u);
        probe_top = probe_top.max(pt);
    }
    if top < probe_top - (1.0 / RANK_TOL).ln() {
        return 0;
    }
    let (s1, s2) = singular_values(&m);
    if s1 == 0.0 {
        0
    } else if s2 / s1 < RANK_TOL {
        1
    } else {
        2
    }
}

// ---------------------------------------------------------------------------
// refinement

/// Newton iteration on the characteristic; converges when the step drops
/// below `1e-10 (1 + |lambda|)`, fails when the iterate leaves the trust
/// disc around `anchor`.
fn newton_refine(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    seed: C,
    anchor: C,
    trust: f64,
) -> Result<C> {
    let mut lam = seed;
    for _ in 0..60 {
        let d = char_data(bc, q, lam);
        if d.value.is_zero() {
            return Ok(lam);
        }
        if d.deriv.is_zero() {
            return Err(Error::RootLoss {
                lambda: lam,
                detail: "vanishing derivative in Newton step".into(),
            });
        }
        let step = d.value.ratio_c(&d.deriv);
        if !step.is_finite() {
            return Err(Error::RootLoss {
                lambda: lam,
                detail: "non-finite Newton step".into(),
            });
        }
        lam -= step;
        if (lam - anchor).norm() > trust {
            return Err(Error::RootLoss {
                lambda: lam,
                detail: "Newton iterate left the trust region".into(),
            });
        }
        if step.norm() < NEWTON_TOL * (1.0 + lam.norm()) {
            // One polishing step.
            let d = char_data(bc, q, lam);
            if !d.deriv.is_zero() {
                let s = d.value.ratio_c(&d.deriv);
                if s.is_finite() && s.norm() < 2.0 * NEWTON_TOL * (1.0 + lam.norm()) {
                    lam -= s;
                }
            }
            return Ok(lam);
        }
    }
    Err(Error::RootLoss {
        lambda: lam,
        detail: "Newton did not converge".into(),
    })
}

/// Secant iteration on `char'` — locates the critical point between a
/// nearly-double pair (or at an exact double).
fn refine_critical(bc: &BoundaryConditions, q: &SignedMeasure, l0: C, l1: C) -> Result<C> {
    let mut x0 = l0;
    let mut x1 = l1;
    let mut g0 = char_data(bc, q, x0).deriv;
    for _ in 0..50 {
        let g1 = char_data(bc, q, x1).deriv;
        let e = g0.log_abs().max(g1.log_abs());
        if e == f64::NEG_INFINITY {
            return Ok(x1);
        }
        let a0 = g0.m * (g0.log_abs() - e).exp();
        let a1 = g1.m * (g1.log_abs() - e).exp();
        let den = a1 - a0;
        if den.norm() < 1e-15 * a1.norm().max(a0.norm()).max(1e-300) {
            return Ok(x1);
        }
        let step = a1 * (x1 - x0) / den;
        x0 = x1;
        g0 = g1;
        x1 -= step;
        if step.norm() < 1e-11 * (1.0 + x1.norm()) {
            return Ok(x1);
        }
    }
    Ok(x1)
}

// ---------------------------------------------------------------------------
// winding numbers and power sums

/// Continuous phase change of the characteristic along a path, by adaptive
/// bisection keeping every step below `pi/2`.  The second component of
/// `eval` is the envelope-normalized log magnitude; a dynamic range beyond
/// `DIP_LOG` means the path runs too close to a root.
fn phase_walk<F>(mut eval: F, n0: usize) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let wrap = |d: f64| d - 2.0 * PI * (d / (2.0 * PI)).round();
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(n0 + 1);
    for i in 0..=n0 {
        let t = i as f64 / n0 as f64;
        let (ph, lg) = eval(t);
        samples.push((t, ph, lg));
    }
    let mut total = 0.0;
    let mut min_log = f64::INFINITY;
    let mut max_log = f64::NEG_INFINITY;
    for s in &samples {
        min_log = min_log.min(s.2);
        max_log = max_log.max(s.2);
    }
    // Stack of segments still to account for.
    let mut stack: Vec<((f64, f64, f64), (f64, f64, f64), u32)> = samples
        .windows(2)
        .rev()
        .map(|w| (w[0], w[1], 0u32))
        .collect();
    while let Some((s0, s1, depth)) = stack.pop() {
        let d = wrap(s1.1 - s0.1);
        if d.abs() < 1.3 {
            total += d;
            continue;
        }
        if depth > 34 {
            return Err(Error::CircleTooClose { radius: 0.0 });
        }
        let tm = 0.5 * (s0.0 + s1.0);
        let (ph, lg) = eval(tm);
        min_log = min_log.min(lg);
        max_log = max_log.max(lg);
        let sm = (tm, ph, lg);
        stack.push((sm, s1, depth + 1));
        stack.push((s0, sm, depth + 1));
    }
    if max_log - min_log > DIP_LOG {
        return Err(Error::CircleTooClose { radius: 0.0 });
    }
    Ok(total)
}

/// Envelope-normalized log magnitude: the characteristic grows like
/// `exp(ell |Im z|)`, and dividing that out makes dips at near-roots stand
/// out at any radius.
fn normalized_log(bc: &BoundaryConditions, v: &Sc, lambda: C) -> f64 {
    let (a, b) = bc.interval();
    v.log_abs() - (b - a) * sqrt_upper(lambda).im.abs()
}

/// Initial sample count needed so the smooth envelope phase
/// `exp(i ell Re z)` moves well under half a turn per step: aliased steps
/// fold silently in the wrap and are unrecoverable afterwards.
fn samples_for_span(ell: f64, z_span: f64, base: usize) -> usize {
    base + ((ell * z_span / 0.6).ceil() as usize).min(200_000)
}

/// Number of characteristic zeros inside `|lambda - center| < radius`.
fn winding_circle(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    center: C,
    radius: f64,
) -> Result<i64> {
    let (a, b) = bc.interval();
    // Length of the circle's image in the z-plane: half a circle of radius
    // sqrt(|c| + r) when the origin is enclosed, a small loop around
    // sqrt(c) otherwise.
    let hi = PI * (center.norm() + radius).sqrt();
    let lo = PI * radius / (center.norm() - radius).max(0.25 * radius).sqrt();
    let n0 = samples_for_span(b - a, hi.min(lo), 48);
    let eval = |t: f64| {
        let lam = center + C::from_polar(radius, 2.0 * PI * t);
        let v = characteristic(bc, q, lam);
        (v.m.arg(), normalized_log(bc, &v, lam))
    };
    let total = phase_walk(eval, n0).map_err(|_| Error::CircleTooClose { radius })?;
    let w = total / (2.0 * PI);
    if (w - w.round()).abs() > 0.05 {
        return Err(Error::CircleTooClose { radius });
    }
    Ok(w.round() as i64)
}

/// Argument-principle count of eigenvalues with `|lambda| < r_z^2`.
pub fn count_in_disc(bc: &BoundaryConditions, q: &SignedMeasure, r_z: f64) -> Result<usize> {
    let w = winding_circle(bc, q, ZERO, r_z * r_z)
        .map_err(|_| Error::CircleTooClose { radius: r_z })?;
    Ok(w.max(0) as usize)
}

/// Winding number plus the first two power sums of `lambda_k - center` over
/// the enclosed roots, by trapezoid integration of `mu^m char'/char`.
/// Working in the shifted variable keeps the pair discriminant
/// `2 s2 - s1^2` accurate far from the origin.
fn power_sums(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    center: C,
    radius: f64,
) -> Result<(i64, C, C)> {
    let mut prev: Option<(C, C, C)> = None;
    let mut m = 64usize;
    while m <= 8192 {
        let mut s = [ZERO; 3];
        for k in 0..m {
            let th = 2.0 * PI * k as f64 / m as f64;
            let mu = C::from_polar(radius, th);
            let ld = log_deriv(bc, q, center + mu).ok_or(Error::CircleTooClose { radius })?;
            let w = ld * mu / m as f64;
            s[0] += w;
            s[1] += w * mu;
            s[2] += w * mu * mu;
        }
        if let Some((p0, p1, p2)) = prev {
            let ok0 = (s[0] - p0).norm() < 1e-3;
            let ok1 = (s[1] - p1).norm() < 1e-9 * (1.0 + radius);
            let ok2 = (s[2] - p2).norm() < 1e-9 * (1.0 + radius * radius);
            let near_int = (s[0].re - s[0].re.round()).abs() < 0.01 && s[0].im.abs() < 0.01;
            if ok0 && ok1 && ok2 && near_int {
                return Ok((s[0].re.round() as i64, s[1], s[2]));
            }
        }
        prev = Some((s[0], s[1], s[2]));
        m *= 2;
    }
    Err(Error::CircleTooClose { radius })
}

// ---------------------------------------------------------------------------
// cluster resolution

#[derive(Debug, Clone, Copy)]
struct Resolved {
    lambda: C,
    mult: u8,
    /// True when the point is a root of multiplicity two at numerical
    /// resolution (as opposed to a merged unresolvable pair).
    true_double: bool,
}

fn merge_margin_lambda(z_abs: f64) -> f64 {
    let mz = MERGE_Z * (1.0 + z_abs);
    mz * (2.0 * z_abs + mz)
}

/// Split the output of `power_sums` (centered at `center`) with `w` roots
/// into list entries, resolving a pair into two points, a merged pair, or a
/// double root.
fn resolve_from_power(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    center: C,
    radius: f64,
    w: i64,
    s1: C,
    s2: C,
) -> Result<Vec<Resolved>> {
    match w {
        1 => {
            let est = center + s1;
            let lam = newton_refine(bc, q, est, est, 1.2 * radius)?;
            Ok(vec![Resolved {
                lambda: lam,
                mult: 1,
                true_double: false,
            }])
        }
        2 => {
            let mean = center + 0.5 * s1;
            let disc = 2.0 * s2 - s1 * s1;
            let sq = 0.5 * disc.sqrt();
            let sep = 2.0 * sq.norm();
            let z_abs = sqrt_upper(mean).norm();
            let floor = 1e-8 * (1.0 + mean.norm());
            let margin = merge_margin_lambda(z_abs);
            if sep < floor {
                let lam = refine_critical(bc, q, mean + floor, mean - floor).unwrap_or(mean);
                Ok(vec![Resolved {
                    lambda: lam,
                    mult: 2,
                    true_double: true,
                }])
            } else if sep < margin {
                Ok(vec![Resolved {
                    lambda: mean,
                    mult: 2,
                    true_double: false,
                }])
            } else {
                let mut out = Vec::with_capacity(2);
                for root in [mean + sq, mean - sq] {
                    let lam = newton_refine(bc, q, root, root, 1.2 * radius)?;
                    out.push(Resolved {
                        lambda: lam,
                        mult: 1,
                        true_double: false,
                    });
                }
                if (out[0].lambda - out[1].lambda).norm() < 0.3 * margin {
                    // Polishing collapsed the pair after all.
                    let lam = refine_critical(bc, q, mean + sq, mean - sq).unwrap_or(mean);
                    return Ok(vec![Resolved {
                        lambda: lam,
                        mult: 2,
                        true_double: true,
                    }]);
                }
                Ok(out)
            }
        }
        n => Err(Error::RootLoss {
            lambda: center,
            detail: format!("cluster of {n} roots cannot be resolved"),
        }),
    }
}

/// Resolve one cluster of expected roots near the given seeds.
///
/// `gap` is the distance (in lambda) to the nearest foreign root; the
/// island contour stays well inside it.  Exact seeds with `q = 0` are taken
/// as-is, everything else goes through Newton with a power-sum fallback and,
/// for nonzero measures, a homotopy `q -> t q` rescue in four steps.
fn resolve_cluster(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    seeds: &[(C, bool)],
    gap: f64,
) -> Result<Vec<Resolved>> {
    let center = seeds.iter().map(|s| s.0).sum::<C>() / seeds.len() as f64;
    let spread = seeds
        .iter()
        .map(|s| (s.0 - center).norm())
        .fold(0.0, f64::max);
    let z_abs = sqrt_upper(center).norm();
    let margin = merge_margin_lambda(z_abs);
    let q_zero = q.is_zero();

    // Fast path: per-seed Newton.
    let fast = || -> Result<Vec<Resolved>> {
        let mut refined = Vec::with_capacity(seeds.len());
        for &(s, exact) in seeds {
            if exact && q_zero {
                refined.push(s);
            } else {
                refined.push(newton_refine(bc, q, s, center, 0.75 * gap.max(spread * 4.0))?);
            }
        }
        match refined.len() {
            1 => Ok(vec![Resolved {
                lambda: refined[0],
                mult: 1,
                true_double: false,
            }]),
            2 => {
                let sep = (refined[0] - refined[1]).norm();
                if sep >= margin {
                    Ok(refined
                        .into_iter()
                        .map(|lambda| Resolved {
                            lambda,
                            mult: 1,
                            true_double: false,
                        })
                        .collect())
                } else if seeds[0].1 && seeds[1].1 && q_zero {
                    // A pair that is double by construction.
                    Ok(vec![Resolved {
                        lambda: refined[0],
                        mult: 2,
                        true_double: true,
                    }])
                } else {
                    Err(Error::RootLoss {
                        lambda: refined[0],
                        detail: "pair collapsed under Newton".into(),
                    })
                }
            }
            _ => Err(Error::RootLoss {
                lambda: center,
                detail: "oversized cluster".into(),
            }),
        }
    };
    if let Ok(r) = fast() {
        return Ok(r);
    }

    // Slow path: power sums on an island circle.  Small circles first for
    // accuracy, then escalation toward the island cap: a root pair that
    // collides and splits off the axis moves in lambda by roughly
    // 2|z| |dz|, which dwarfs the unperturbed spread.
    let cap = 0.45 * gap;
    let base_r = cap.min((3.0 * spread).max(0.12 * gap)).max(4.0 * margin);
    let slow = |r: f64| -> Result<Vec<Resolved>> {
        let (w, s1, s2) = power_sums(bc, q, center, r)?;
        if w as usize != seeds.len() {
            return Err(Error::ClusterMismatch {
                index: 0,
                expected: seeds.len(),
                found: w.max(0) as usize,
            });
        }
        resolve_from_power(bc, q, center, r, w, s1, s2)
    };
    let mut radii = vec![base_r, 0.85 * base_r, 1.18 * base_r, 0.72 * base_r];
    let mut r = 1.6 * base_r;
    while r < cap {
        radii.push(r);
        r *= 1.45;
    }
    if cap > base_r {
        radii.push(cap);
    }
    let mut last = Error::CircleTooClose { radius: base_r };
    for r in radii {
        match slow(r) {
            Ok(res) => return Ok(res),
            Err(e @ (Error::CircleTooClose { .. } | Error::ClusterMismatch { .. })) => last = e,
            Err(e) => {
                last = e;
                break;
            }
        }
    }
    if q_zero {
        return Err(last);
    }

    // Homotopy rescue: walk q -> t q in four steps from the seeds.
    let mut cur: Vec<C> = seeds.iter().map(|s| s.0).collect();
    for t in [0.25, 0.5, 0.75, 1.0] {
        let qt = q.scale(C::new(t, 0.0));
        let mut next = Vec::with_capacity(cur.len());
        for &s in &cur {
            next.push(newton_refine(bc, &qt, s, s, 0.9 * gap)?);
        }
        cur = next;
    }
    if cur.len() == 2 {
        let sep = (cur[0] - cur[1]).norm();
        if sep < margin {
            // Re-extract on a tight circle to decide pair vs double.
            let c = 0.5 * (cur[0] + cur[1]);
            let r = (8.0 * sep).max(margin).max(1e-6 * (1.0 + c.norm()));
            let (w, s1, s2) = power_sums(bc, q, c, r)?;
            if w != 2 {
                return Err(Error::ClusterMismatch {
                    index: 0,
                    expected: 2,
                    found: w.max(0) as usize,
                });
            }
            return resolve_from_power(bc, q, c, r, w, s1, s2);
        }
    }
    Ok(cur
        .into_iter()
        .map(|lambda| Resolved {
            lambda,
            mult: 1,
            true_double: false,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// low-region sweep

#[derive(Debug, Clone, Copy)]
struct Rect {
    re0: f64,
    re1: f64,
    im0: f64,
    im1: f64,
}

impl Rect {
    fn center(&self) -> C {
        C::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    fn diag(&self) -> f64 {
        ((self.re1 - self.re0).powi(2) + (self.im1 - self.im0).powi(2)).sqrt()
    }

    fn contains(&self, z: C) -> bool {
        z.re > self.re0 && z.re < self.re1 && z.im > self.im0 && z.im < self.im1
    }
}

fn winding_rect(bc: &BoundaryConditions, q: &SignedMeasure, r: &Rect) -> Result<i64> {
    let (a, b) = bc.interval();
    let corners = [
        C::new(r.re0, r.im0),
        C::new(r.re1, r.im0),
        C::new(r.re1, r.im1),
        C::new(r.re0, r.im1),
        C::new(r.re0, r.im0),
    ];
    let mut total = 0.0;
    for w in corners.windows(2) {
        let (p, s) = (w[0], w[1]);
        let (zp, zs) = (sqrt_upper(p), sqrt_upper(s));
        // The z-image of a straight segment is short either way: the chord
        // bound (under the +-z identification) degrades only when the
        // segment passes the origin, where the endpoint-norm bound takes
        // over.
        let chord = (zp - zs).norm().min((zp + zs).norm());
        let span = (zp.norm() + zs.norm()).min(3.2 * chord);
        let n0 = samples_for_span(b - a, span, 24);
        let eval = |t: f64| {
            let lam = p + (s - p) * t;
            let v = characteristic(bc, q, lam);
            (v.m.arg(), normalized_log(bc, &v, lam))
        };
        total += phase_walk(eval, n0)?;
    }
    let n = total / (2.0 * PI);
    if (n - n.round()).abs() > 0.05 {
        return Err(Error::CircleTooClose { radius: r.diag() });
    }
    Ok(n.round() as i64)
}

fn sweep_rect(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    rect: Rect,
    depth: u32,
    out: &mut Vec<Resolved>,
) -> Result<()> {
    if depth > 64 {
        return Err(Error::RootLoss {
            lambda: rect.center(),
            detail: "sweep subdivision exhausted".into(),
        });
    }
    let scale = 1.0 + rect.center().norm();
    for attempt in 0..4u32 {
        let jitter = 0.037 + 0.041 * attempt as f64;
        let w = match winding_rect(bc, q, &rect) {
            Ok(w) => w,
            Err(_) => {
                // Contour unlucky: retrying happens via the parent split, so
                // grow the rectangle slightly and try again here.
                let g = 0.013 * (attempt + 1) as f64;
                let dr = (rect.re1 - rect.re0) * g;
                let di = (rect.im1 - rect.im0) * g;
                return sweep_rect(
                    bc,
                    q,
                    Rect {
                        re0: rect.re0 - dr,
                        re1: rect.re1 + dr,
                        im0: rect.im0 - di,
                        im1: rect.im1 + di,
                    },
                    depth + 1,
                    out,
                );
            }
        };
        if w == 0 {
            return Ok(());
        }
        if rect.diag() < 1e-5 * scale {
            let c = rect.center();
            let r = rect.diag();
            let (wc, s1, s2) = power_sums(bc, q, c, r)?;
            out.extend(resolve_from_power(bc, q, c, r, wc, s1, s2)?);
            return Ok(());
        }
        if w == 1 {
            // Cheap shortcut: a simple root polished from the center.
            if let Ok(lam) = newton_refine(bc, q, rect.center(), rect.center(), rect.diag()) {
                if rect.contains(lam) {
                    out.push(Resolved {
                        lambda: lam,
                        mult: 1,
                        true_double: false,
                    });
                    return Ok(());
                }
            }
        }
        // Split the longer side at a jittered midpoint.
        let mut children = Vec::with_capacity(2);
        if rect.re1 - rect.re0 >= rect.im1 - rect.im0 {
            let cut = rect.re0 + (0.5 + jitter) * (rect.re1 - rect.re0);
            children.push(Rect { re1: cut, ..rect });
            children.push(Rect { re0: cut, ..rect });
        } else {
            let cut = rect.im0 + (0.5 + jitter) * (rect.im1 - rect.im0);
            children.push(Rect { im1: cut, ..rect });
            children.push(Rect { im0: cut, ..rect });
        }
        let mut scratch = Vec::new();
        let mut ok = true;
        let mut count = 0i64;
        for ch in &children {
            match winding_rect(bc, q, ch) {
                Ok(c) => count += c,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && count == w {
            for ch in children {
                sweep_rect(bc, q, ch, depth + 1, &mut scratch)?;
            }
            out.append(&mut scratch);
            return Ok(());
        }
        // A cut line hit a root; try a different jitter.
    }
    Err(Error::RootLoss {
        lambda: rect.center(),
        detail: "could not place a root-free cut".into(),
    })
}

/// All characteristic zeros with `|lambda| < cut_lambda`, found with no
/// asymptotic information at all.
fn low_sweep(bc: &BoundaryConditions, q: &SignedMeasure, cut_lambda: f64) -> Result<Vec<Resolved>> {
    let h = cut_lambda * 1.009;
    let rect = Rect {
        re0: -h,
        re1: h * 1.003,
        im0: -h * 1.001,
        im1: h * 1.004,
    };
    let mut out = Vec::new();
    sweep_rect(bc, q, rect, 0, &mut out)?;
    out.retain(|r| r.lambda.norm() < cut_lambda);
    Ok(out)
}

// ---------------------------------------------------------------------------
// seeds

#[derive(Debug, Clone)]
struct SeedCluster {
    /// `(lambda, exact)` — exact seeds are roots by construction when q = 0.
    seeds: Vec<(C, bool)>,
}

#[derive(Debug, Clone)]
struct SeedPlan {
    /// Sweep boundary in `z` units; clusters entirely below it are found by
    /// the rectangle sweep instead of their seeds.
    z_cut: f64,
    clusters: Vec<SeedCluster>,
}

fn seed_plan(inv: &BcInvariants, a: f64, b: f64, want: usize) -> SeedPlan {
    let ell = b - a;
    let lam = |zt: C| {
        let z = zt / ell;
        z * z
    };
    let mut clusters: Vec<SeedCluster> = Vec::new();
    let mut total = 0usize;
    let z_cut_t;
    match inv.tag {
        CaseTag::Dirichlet | CaseTag::Both1 => {
            z_cut_t = 3.5 * PI;
            let (c0, f0, c1, f1) = match inv.form {
                crate::bc::CanonicalForm::Both1 { c0, f0, c1, f1 } => {
                    (c0 * ell, f0 * ell, c1 * ell, f1 * ell)
                }
                _ => (ZERO, ZERO, ZERO, ZERO),
            };
            let dirichlet = inv.tag == CaseTag::Dirichlet;
            let mut n = 1usize;
            while total < want + 4 {
                let base = PI * n as f64;
                let zt = if dirichlet {
                    C::new(base, 0.0)
                } else {
                    let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
                    C::new(base, 0.0) + ((f1 - c0) + sgn * (c1 - f0)) / base
                };
                clusters.push(SeedCluster {
                    seeds: vec![(lam(zt), dirichlet)],
                });
                total += 1;
                n += 1;
            }
        }
        _ => {
            // Mixed: clusters of two near even or odd multiples of pi, with
            // or without a lone first eigenvalue.
            let aa = inv.inv_a;
            let bb = inv.inv_b * ell;
            let close = matches!(
                inv.tag,
                CaseTag::MixedDoubleNoJordan
                    | CaseTag::MixedJordan
                    | CaseTag::MixedCloseV1
                    | CaseTag::MixedCloseV3
            );
            let alpha = if close {
                if inv.odd_base {
                    C::new(PI, 0.0)
                } else {
                    ZERO
                }
            } else {
                inv.alpha.unwrap_or_else(|| {
                    let ratio = inv.inv_c / inv.inv_a;
                    let w = -ratio - (ratio * ratio - 1.0).sqrt();
                    C::new(0.0, 1.0) * w.ln()
                })
            };
            let alpha = if alpha.re < 0.0 { -alpha } else { alpha };
            let odd = alpha.re > 0.5 * PI;
            z_cut_t = if odd { 4.0 * PI } else { 5.0 * PI };
            let b_zero = bb.norm() == 0.0 || inv.inv_b.norm() == 0.0;
            if close {
                let exact = b_zero;
                if !inv.odd_base {
                    // Lone first eigenvalue.
                    let l1 = if b_zero {
                        ZERO
                    } else {
                        6.0 * bb / (3.0 * aa + bb) / (ell * ell)
                    };
                    clusters.push(SeedCluster {
                        seeds: vec![(l1, exact)],
                    });
                    total += 1;
                }
                let mut n = 1usize;
                while total < want + 4 {
                    let ne = if inv.odd_base { n as f64 - 0.5 } else { n as f64 };
                    let base = 2.0 * PI * ne;
                    let corr = bb / (PI * ne * aa)
                        - (6.0 * aa * bb * bb + bb * bb * bb)
                            / (12.0 * aa * aa * aa * ne * ne * ne * PI * PI * PI);
                    let plus = C::new(base, 0.0);
                    let minus = plus + corr;
                    clusters.push(SeedCluster {
                        seeds: vec![(lam(plus), true), (lam(minus), exact)],
                    });
                    total += 2;
                    n += 1;
                }
            } else if !odd {
                // Separated, pairs 2 pi N +- alpha; lone root near alpha.
                let lone = alpha + bb / (aa * alpha);
                clusters.push(SeedCluster {
                    seeds: vec![(lam(lone), false)],
                });
                total += 1;
                let mut n = 1usize;
                while total < want + 4 {
                    let base = 2.0 * PI * n as f64;
                    let corr = bb / (C::new(base, 0.0) * aa);
                    let zm = C::new(base, 0.0) - alpha + corr;
                    let zp = C::new(base, 0.0) + alpha + corr;
                    clusters.push(SeedCluster {
                        seeds: vec![(lam(zm), false), (lam(zp), false)],
                    });
                    total += 2;
                    n += 1;
                }
            } else {
                // Separated with Re alpha > pi/2: modulus-adjacent partners
                // come from different +- families, grouped at odd bases.
                let mut m = 1usize;
                while total < want + 4 {
                    let lo = if m == 1 {
                        alpha + bb / (aa * alpha)
                    } else {
                        let base = 2.0 * PI * (m - 1) as f64;
                        C::new(base, 0.0) + alpha + bb / (C::new(base, 0.0) * aa)
                    };
                    let base = 2.0 * PI * m as f64;
                    let hi = C::new(base, 0.0) - alpha + bb / (C::new(base, 0.0) * aa);
                    clusters.push(SeedCluster {
                        seeds: vec![(lam(lo), false), (lam(hi), false)],
                    });
                    total += 2;
                    m += 1;
                }
            }
        }
    }
    SeedPlan {
        z_cut: z_cut_t / ell,
        clusters,
    }
}

// ---------------------------------------------------------------------------
// spectrum assembly

#[derive(Debug, Clone, Copy)]
struct RawRoot {
    lambda: C,
    mult: u8,
    true_double: bool,
    cluster: usize,
}

/// Cluster-complete raw root list of the unperturbed problem, at least
/// `want` entries counted with multiplicity.
fn build_unperturbed(bc: &BoundaryConditions, want: usize) -> Result<(Vec<RawRoot>, f64)> {
    let inv = bc.classify()?;
    let (a, b) = bc.interval();
    let q0 = SignedMeasure::zero(a, b);
    let plan = seed_plan(&inv, a, b, want);
    let cut_lambda = plan.z_cut * plan.z_cut;

    let swept: Vec<(usize, &SeedCluster)> = plan
        .clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.seeds.iter().all(|s| s.0.norm() < cut_lambda))
        .collect();
    let seeded: Vec<(usize, &SeedCluster)> = plan
        .clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.seeds.iter().any(|s| s.0.norm() >= cut_lambda))
        .collect();

    let mut raw: Vec<RawRoot> = Vec::new();

    // Low region: rectangle sweep, cluster ids by nearest swept seed.
    let low = low_sweep(bc, &q0, cut_lambda)?;
    for r in &low {
        let mut best = (f64::INFINITY, 0usize);
        for (id, c) in &swept {
            for s in &c.seeds {
                let d = (s.0 - r.lambda).norm();
                if d < best.0 {
                    best = (d, *id);
                }
            }
        }
        raw.push(RawRoot {
            lambda: r.lambda,
            mult: r.mult,
            true_double: r.true_double,
            cluster: best.1,
        });
    }

    // Seeded clusters in parallel.
    let centers: Vec<C> = seeded
        .iter()
        .map(|(_, c)| c.seeds.iter().map(|s| s.0).sum::<C>() / c.seeds.len() as f64)
        .collect();
    let resolved: Vec<Result<Vec<Resolved>>> = seeded
        .par_iter()
        .enumerate()
        .map(|(i, (_, c))| {
            let mut gap = f64::INFINITY;
            if i > 0 {
                gap = gap.min((centers[i] - centers[i - 1]).norm());
            } else {
                gap = gap.min(centers[i].norm() - cut_lambda);
            }
            if i + 1 < centers.len() {
                gap = gap.min((centers[i + 1] - centers[i]).norm());
            }
            resolve_cluster(bc, &q0, &c.seeds, 0.5 * gap.max(1.0))
        })
        .collect();
    for ((id, _), rr) in seeded.iter().zip(resolved) {
        for r in rr? {
            raw.push(RawRoot {
                lambda: r.lambda,
                mult: r.mult,
                true_double: r.true_double,
                cluster: *id,
            });
        }
    }
    Ok((raw, plan.z_cut))
}

fn assemble(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    raw: &[RawRoot],
    count: usize,
    provenance: Provenance,
    validate: bool,
) -> Result<Spectrum> {
    let mut entries: Vec<(C, u8, bool, usize)> = Vec::new();
    for r in raw {
        let jordan = r.mult == 2 && r.true_double && boundary_rank(bc, q, r.lambda) == 1;
        for _ in 0..r.mult {
            entries.push((r.lambda, r.mult, jordan, r.cluster));
        }
    }
    entries.sort_by(|x, y| {
        x.0.norm()
            .total_cmp(&y.0.norm())
            .then(arg_2pi(x.0).total_cmp(&arg_2pi(y.0)))
    });
    if entries.len() < count {
        return Err(Error::RootLoss {
            lambda: entries.last().map(|e| e.0).unwrap_or(ZERO),
            detail: format!("found only {} of {count} requested eigenvalues", entries.len()),
        });
    }
    entries.truncate(count);
    let mut map: Vec<(usize, usize)> = Vec::new();
    let mut eigenvalues = Vec::with_capacity(count);
    for (i, (lambda, mult, jordan, cl)) in entries.into_iter().enumerate() {
        let id = match map.iter().find(|m| m.0 == cl) {
            Some(m) => m.1,
            None => {
                map.push((cl, map.len()));
                map.len() - 1
            }
        };
        eigenvalues.push(Eigenvalue {
            lambda,
            z: sqrt_upper(lambda),
            index: i + 1,
            multiplicity: mult,
            jordan,
            cluster: id,
        });
    }
    let spec = Spectrum {
        eigenvalues,
        provenance,
    };
    if validate {
        let radii = thinned_radii(&spec);
        validate_counts(bc, q, &spec, &radii)?;
    }
    Ok(spec)
}

/// First `count` eigenvalues of the unperturbed operator.
pub fn unperturbed_spectrum(bc: &BoundaryConditions, count: usize) -> Result<Spectrum> {
    if count == 0 {
        return Err(Error::InvalidProblem("eigenvalue count must be positive".into()));
    }
    let (raw, _) = build_unperturbed(bc, count)?;
    assemble(bc, &SignedMeasure::zero_like(bc), &raw, count, Provenance::Unperturbed, true)
}

impl SignedMeasure {
    fn zero_like(bc: &BoundaryConditions) -> SignedMeasure {
        let (a, b) = bc.interval();
        SignedMeasure::zero(a, b)
    }
}

/// First `count` eigenvalues of the operator perturbed by `q`.
pub fn perturbed_spectrum(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    count: usize,
) -> Result<Spectrum> {
    if count == 0 {
        return Err(Error::InvalidProblem("eigenvalue count must be positive".into()));
    }
    let (ia, ib) = bc.interval();
    let (qa, qb) = q.interval();
    if (ia - qa).abs() > 1e-12 || (ib - qb).abs() > 1e-12 {
        return Err(Error::InvalidProblem(
            "measure support does not match the boundary-condition interval".into(),
        ));
    }
    if q.is_zero() {
        let mut s = unperturbed_spectrum(bc, count)?;
        s.provenance = Provenance::Perturbed;
        return Ok(s);
    }
    let (raw0, z_cut) = build_unperturbed(bc, count + 6)?;
    let cut_lambda = z_cut * z_cut;

    // Low region of the perturbed problem, by direct sweep; cluster ids are
    // copied positionally from the unperturbed low region.
    let mut low0: Vec<&RawRoot> = raw0.iter().filter(|r| r.lambda.norm() < cut_lambda).collect();
    low0.sort_by(|x, y| {
        x.lambda
            .norm()
            .total_cmp(&y.lambda.norm())
            .then(arg_2pi(x.lambda).total_cmp(&arg_2pi(y.lambda)))
    });
    let n_low0: usize = low0.iter().map(|r| r.mult as usize).sum();
    let mut low_q = low_sweep(bc, q, cut_lambda)?;
    low_q.sort_by(|x, y| {
        x.lambda
            .norm()
            .total_cmp(&y.lambda.norm())
            .then(arg_2pi(x.lambda).total_cmp(&arg_2pi(y.lambda)))
    });
    let n_low_q: usize = low_q.iter().map(|r| r.mult as usize).sum();
    if n_low0 != n_low_q {
        return Err(Error::ClusterMismatch {
            index: 0,
            expected: n_low0,
            found: n_low_q,
        });
    }
    let mut raw: Vec<RawRoot> = Vec::new();
    let id_seq: Vec<usize> = low0
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.cluster, r.mult as usize))
        .collect();
    let mut pos = 0usize;
    for r in &low_q {
        raw.push(RawRoot {
            lambda: r.lambda,
            mult: r.mult,
            true_double: r.true_double,
            cluster: id_seq[pos],
        });
        pos += r.mult as usize;
    }

    // Islands around the remaining unperturbed clusters (complete clusters
    // only — a trailing partial pair is dropped, the slack covers it).
    let mut high: Vec<&RawRoot> = raw0.iter().filter(|r| r.lambda.norm() >= cut_lambda).collect();
    high.sort_by(|x, y| x.lambda.norm().total_cmp(&y.lambda.norm()));
    let mut islands: Vec<(usize, Vec<(C, bool)>)> = Vec::new();
    for r in &high {
        match islands.last_mut() {
            Some(last) if last.0 == r.cluster => {
                for _ in 0..r.mult {
                    last.1.push((r.lambda, false));
                }
            }
            _ => {
                let mut seeds = Vec::new();
                for _ in 0..r.mult {
                    seeds.push((r.lambda, false));
                }
                islands.push((r.cluster, seeds));
            }
        }
    }
    let centers: Vec<C> = islands
        .iter()
        .map(|(_, s)| s.iter().map(|x| x.0).sum::<C>() / s.len() as f64)
        .collect();
    let resolved: Vec<Result<Vec<Resolved>>> = islands
        .par_iter()
        .enumerate()
        .map(|(i, (_, seeds))| {
            let mut gap = f64::INFINITY;
            if i > 0 {
                gap = gap.min((centers[i] - centers[i - 1]).norm());
            } else {
                gap = gap.min(centers[i].norm() - cut_lambda);
            }
            if i + 1 < centers.len() {
                gap = gap.min((centers[i + 1] - centers[i]).norm());
            }
            resolve_cluster(bc, q, seeds, 0.5 * gap.max(1.0)).map_err(|e| match e {
                Error::ClusterMismatch { expected, found, .. } => Error::ClusterMismatch {
                    index: i,
                    expected,
                    found,
                },
                other => other,
            })
        })
        .collect();
    for ((id, _), rr) in islands.iter().zip(resolved) {
        for r in rr? {
            raw.push(RawRoot {
                lambda: r.lambda,
                mult: r.mult,
                true_double: r.true_double,
                cluster: *id,
            });
        }
    }
    assemble(bc, q, &raw, count, Provenance::Perturbed, true)
}

// ---------------------------------------------------------------------------
// counting schedules

/// Radii (in `z`) between consecutive clusters, with the gap they sit in.
pub fn separation_radii(spec: &Spectrum) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in spec.eigenvalues.windows(2) {
        if w[0].cluster != w[1].cluster {
            let lo = w[0].z.norm();
            let hi = w[1].z.norm();
            if hi > lo {
                out.push((0.5 * (lo + hi), hi - lo));
            }
        }
    }
    out
}

fn thinned_radii(spec: &Spectrum) -> Vec<f64> {
    let all: Vec<(f64, f64)> = separation_radii(spec)
        .into_iter()
        .filter(|(r, m)| *m > 1e-3_f64.max(1e-7 * r))
        .collect();
    let mut picks = Vec::new();
    let mut i = 0usize;
    let mut stride = 1usize;
    while i < all.len() {
        picks.push(all[i].0);
        if picks.len() >= 8 {
            stride = (stride * 3) / 2 + 1;
        }
        i += stride;
    }
    if let Some(last) = all.last() {
        if picks.last() != Some(&last.0) {
            picks.push(last.0);
        }
    }
    picks
}

/// Exact equality of list counts and argument-principle counts at each
/// radius.
pub fn validate_counts(
    bc: &BoundaryConditions,
    q: &SignedMeasure,
    spec: &Spectrum,
    radii: &[f64],
) -> Result<()> {
    for &r in radii {
        let counted = count_in_disc(bc, q, r)?;
        let listed = spec.count_below(r);
        if counted != listed && listed < spec.len() {
            return Err(Error::RootLoss {
                lambda: C::new(r * r, 0.0),
                detail: format!("winding count {counted} != listed {listed} inside |z| < {r:.6}"),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eigenfunctions

/// Propagator-backed solution `x -> row(T(a->x)) init + row(T'(a->x)) dinit`.
#[derive(Debug, Clone)]
pub struct EigenFunction {
    q: SignedMeasure,
    pub lambda: C,
    init: State,
    dinit: State,
}

impl EigenFunction {
    fn plain(q: &SignedMeasure, lambda: C, init: State) -> EigenFunction {
        EigenFunction {
            q: q.clone(),
            lambda,
            init,
            dinit: State::new(ZERO, ZERO),
        }
    }

    pub fn eval_state(&self, x: f64) -> State {
        let (a, _) = self.q.interval();
        let t = transfer(&self.q, self.lambda, a, x);
        let h = t.apply(self.init);
        let d = t.apply_derivative(self.dinit);
        State::new(h.y + d.y, h.dy + d.dy)
    }

    pub fn eval(&self, x: f64) -> C {
        self.eval_state(x).y
    }

    fn add_scaled(&mut self, other: &EigenFunction, c: C) {
        self.init.y += c * other.init.y;
        self.init.dy += c * other.init.dy;
        self.dinit.y += c * other.dinit.y;
        self.dinit.dy += c * other.dinit.dy;
    }

    fn scale(&mut self, c: C) {
        self.init.y *= c;
        self.init.dy *= c;
        self.dinit.y *= c;
        self.dinit.dy *= c;
    }
}

/// `\int f conj(g) dx` over the interval.
pub fn inner_product(f: &EigenFunction, g: &EigenFunction) -> C {
    let (a, b) = f.q.interval();
    let osc = (sqrt_upper(f.lambda).norm() + sqrt_upper(g.lambda).norm()) * (b - a) / PI + 6.0;
    quad::integrate(a, b, osc, |x| f.eval(x) * g.eval(x).conj())
}

fn ip(f: &EigenFunction, g: &EigenFunction) -> C {
    inner_product(f, g)
}

fn l2_norm(f: &EigenFunction) -> f64 {
    ip(f, f).re.max(0.0).sqrt()
}

/// One eigenvalue's functions: biorthogonal `(y_i, z_i)` pairs (two for a
/// semisimple double) and, for a Jordan block, the adjoined pair.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C,
    pub pairs: Vec<(EigenFunction, EigenFunction)>,
    pub adjoined: Option<(EigenFunction, EigenFunction)>,
}

/// Nullspace basis of the 2x4 boundary-row matrix acting on the data vector
/// `(y(a), y'(a), y(b), y'(b))`.
fn bc_nullspace(bc: &BoundaryConditions) -> [[C; 4]; 2] {
    let rows = bc.rows();
    // Data order: coefficients of (y(a), y'(a), y(b), y'(b)).
    let mut m = [
        [rows[0][1], rows[0][0], rows[0][3], rows[0][2]],
        [rows[1][1], rows[1][0], rows[1][3], rows[1][2]],
    ];
    let mut pivots: Vec<usize> = Vec::new();
    for r in 0..2 {
        let mut best = (0.0f64, 0usize);
        for c in 0..4 {
            if !pivots.contains(&c) && m[r][c].norm() > best.0 {
                best = (m[r][c].norm(), c);
            }
        }
        let p = best.1;
        pivots.push(p);
        let d = m[r][p];
        for c in 0..4 {
            m[r][c] /= d;
        }
        let o = 1 - r;
        let f = m[o][p];
        for c in 0..4 {
            m[o][c] -= f * m[r][c];
        }
    }
    let free: Vec<usize> = (0..4).filter(|c| !pivots.contains(c)).collect();
    let mut basis = [[ZERO; 4]; 2];
    for (k, &fc) in free.iter().enumerate() {
        basis[k][fc] = ONE;
        for r in 0..2 {
            basis[k][pivots[r]] = -m[r][fc];
        }
    }
    basis
}

/// Boundary-data functional of the bilinear form `[-u' conj(f) + u conj(f')]_a^b`
/// as a vector against `(u(a), u'(a), u(b), u'(b))`.
fn form_vector(fa: State, fb: State) -> [C; 4] {
    [-fa.dy.conj(), fa.y.conj(), fb.dy.conj(), -fb.y.conj()]
}

fn dot4(x: &[C; 4], y: &[C; 4]) -> C {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Adjoint-side matching matrix at `mu = conj(lambda)`: its nullvector gives
/// boundary data that both satisfies the adjoint conditions and propagates
/// consistently across the interval.
fn adjoint_matrix(bc: &BoundaryConditions, qc: &SignedMeasure, mu: C) -> ([[Sc; 2]; 2], Transfer) {
    let (a, b) = bc.interval();
    let t = transfer(qc, mu, a, b);
    let rows = bc.rows();
    let mut m = [[Sc::ZERO; 2]; 2];
    for k in 0..2 {
        let [al, ga, be, ph] = rows[k];
        let da = State::new(al.conj(), -ga.conj());
        let db = State::new(-be.conj(), ph.conj());
        let py = t.m[0][0] * da.y + t.m[0][1] * da.dy;
        let pdy = t.m[1][0] * da.y + t.m[1][1] * da.dy;
        m[0][k] = Sc::new(py, t.log_scale).sub(&Sc::from_c(db.y));
        m[1][k] = Sc::new(pdy, t.log_scale).sub(&Sc::from_c(db.dy));
    }
    (m, t)
}

fn nullvec_2x2(m: &[[C; 2]; 2]) -> (C, C) {
    let r0 = m[0][0].norm() + m[0][1].norm();
    let r1 = m[1][0].norm() + m[1][1].norm();
    let (a, b) = if r0 >= r1 {
        (m[0][0], m[0][1])
    } else {
        (m[1][0], m[1][1])
    };
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if n == 0.0 {
        (ONE, ZERO)
    } else {
        (-b / n, a / n)
    }
}

/// Adjoint eigenfunction initial data from the matching-matrix nullvector.
fn adjoint_init(bc: &BoundaryConditions, c: (C, C)) -> State {
    let rows = bc.rows();
    State::new(
        c.0 * rows[0][0].conj() + c.1 * rows[1][0].conj(),
        -(c.0 * rows[0][1].conj() + c.1 * rows[1][1].conj()),
    )
}

fn solve_2x2(m: [[C; 2]; 2], rhs: [C; 2]) -> Option<(C, C)> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-14 * (m[0][0].norm() * m[1][1].norm() + m[0][1].norm() * m[1][0].norm() + 1e-300)
    {
        return None;
    }
    Some((
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (rhs[1] * m[0][0] - rhs[0] * m[1][0]) / det,
    ))
}

/// Eigenfunctions, adjoint eigenfunctions and (for Jordan blocks) adjoined
/// functions at one eigenvalue, biorthogonally normalized.
pub fn eigenpair(bc: &BoundaryConditions, q: &SignedMeasure, ev: &Eigenvalue) -> Result<EigenPair> {
    let lambda = ev.lambda;
    let mu = lambda.conj();
    let qc = q.conj();
    let d = char_data(bc, q, lambda);
    let (bm, bm_e) = boundary_mantissas(&d.u);
    let (am_sc, t_adj) = adjoint_matrix(bc, &qc, mu);
    let (am, _) = boundary_mantissas(&am_sc);

    if ev.multiplicity == 1 {
        let n = nullvec_2x2(&bm);
        let y = EigenFunction::plain(q, lambda, State::new(n.0, n.1));
        let c = nullvec_2x2(&am);
        let mut z = EigenFunction::plain(&qc, mu, adjoint_init(bc, c));
        let p = ip(&y, &z);
        if p.norm() < 1e-10 * l2_norm(&y) * l2_norm(&z) {
            return Err(Error::NormalizationBreakdown { lambda });
        }
        z.scale((p.conj()).inv());
        return Ok(EigenPair {
            lambda,
            pairs: vec![(y, z)],
            adjoined: None,
        });
    }

    if !ev.jordan {
        // Semisimple double: the boundary matrix must vanish, any Cauchy
        // data solves the conditions.
        let rank = boundary_rank(bc, q, lambda);
        if rank != 0 {
            return Err(Error::NormalizationBreakdown { lambda });
        }
        let ys = [
            EigenFunction::plain(q, lambda, State::new(ONE, ZERO)),
            EigenFunction::plain(q, lambda, State::new(ZERO, ONE)),
        ];
        let zs = [
            EigenFunction::plain(&qc, mu, State::new(ONE, ZERO)),
            EigenFunction::plain(&qc, mu, State::new(ZERO, ONE)),
        ];
        let mut g = [[ZERO; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                g[i][k] = ip(&ys[i], &zs[k]);
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let scale = g.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);
        if det.norm() < 1e-10 * scale * scale {
            return Err(Error::NormalizationBreakdown { lambda });
        }
        // Inverse-conjugate-transpose of the Gram matrix mixes the adjoint
        // side into a biorthogonal family.
        let inv = [
            [g[1][1] / det, -g[0][1] / det],
            [-g[1][0] / det, g[0][0] / det],
        ];
        let mh = [
            [inv[0][0].conj(), inv[1][0].conj()],
            [inv[0][1].conj(), inv[1][1].conj()],
        ];
        let mut pairs = Vec::with_capacity(2);
        for j in 0..2 {
            let mut zj = zs[0].clone();
            zj.scale(mh[j][0]);
            zj.add_scaled(&zs[1], mh[j][1]);
            pairs.push((ys[j].clone(), zj));
        }
        return Ok(EigenPair {
            lambda,
            pairs,
            adjoined: None,
        });
    }

    // Jordan block.
    let (ia, ib) = bc.interval();
    let n = nullvec_2x2(&bm);
    let y = EigenFunction::plain(q, lambda, State::new(n.0, n.1));
    let cz = nullvec_2x2(&am);
    let z = EigenFunction::plain(&qc, mu, adjoint_init(bc, cz));

    // Adjoined function on the main side: particular part T' init, boundary
    // correction from the rank-1 system with gauge c ⊥ n.
    let t_main = transfer(q, lambda, ia, ib);
    let yp_b = t_main.apply_derivative(y.init);
    let rows = bc.rows();
    let rhs_u = |j: usize| -(rows[j][2] * yp_b.dy + rows[j][3] * yp_b.y);
    let row = if bm[0][0].norm() + bm[0][1].norm() >= bm[1][0].norm() + bm[1][1].norm() {
        0
    } else {
        1
    };
    let sys = [[bm[row][0], bm[row][1]], [n.0.conj(), n.1.conj()]];
    let rhs = [rhs_u(row) * (-bm_e).exp(), ZERO];
    let c = solve_2x2(sys, rhs).ok_or(Error::NormalizationBreakdown { lambda })?;
    let mut yhat = EigenFunction {
        q: q.clone(),
        lambda,
        init: State::new(c.0, c.1),
        dinit: y.init,
    };

    // Adjoined function on the adjoint side, conditions enforced through the
    // boundary form against the nullspace of the original rows.
    let nsp = bc_nullspace(bc);
    let zp_b = t_adj.apply_derivative(z.init);
    let w_p = form_vector(State::new(ZERO, ZERO), zp_b);
    let vb = [
        t_adj.apply(State::new(ONE, ZERO)),
        t_adj.apply(State::new(ZERO, ONE)),
    ];
    let wv = [
        form_vector(State::new(ONE, ZERO), vb[0]),
        form_vector(State::new(ZERO, ONE), vb[1]),
    ];
    // Unknowns are conjugated coefficients (the form is antilinear in its
    // second slot).
    let mut sys_a = [[ZERO; 2]; 2];
    let mut rhs_a = [ZERO; 2];
    for i in 0..2 {
        for k in 0..2 {
            sys_a[i][k] = dot4(&wv[k], &nsp[i]);
        }
        rhs_a[i] = -dot4(&w_p, &nsp[i]);
    }
    let r0n = sys_a[0][0].norm() + sys_a[0][1].norm();
    let r1n = sys_a[1][0].norm() + sys_a[1][1].norm();
    let row_a = if r0n >= r1n { 0 } else { 1 };
    // Gauge: the solution family runs along z's Cauchy data (conjugated in
    // the unknowns), so the conjugate of that direction pins one member.
    let sys2 = [
        [sys_a[row_a][0], sys_a[row_a][1]],
        [z.init.y, z.init.dy],
    ];
    let e = solve_2x2(sys2, [rhs_a[row_a], ZERO])
        .ok_or(Error::NormalizationBreakdown { lambda })?;
    let mut zhat = EigenFunction {
        q: qc.clone(),
        lambda: mu,
        init: State::new(e.0.conj(), e.1.conj()),
        dinit: z.init,
    };

    // Normalization: <y, zhat> = <yhat, z> = 1, <y, z> = <yhat, zhat> = 0.
    let ny = l2_norm(&y);
    let nz = l2_norm(&z);
    let s = ip(&y, &z);
    if s.norm() > 1e-6 * ny * nz {
        return Err(Error::NormalizationBreakdown { lambda });
    }
    let p = ip(&y, &zhat);
    if p.norm() < 1e-10 * ny * l2_norm(&zhat) {
        return Err(Error::NormalizationBreakdown { lambda });
    }
    let t_cross = ip(&yhat, &zhat);
    let shift = -t_cross / (2.0 * p);
    yhat.add_scaled(&y, shift);
    zhat.add_scaled(&z, shift.conj());
    let sigma = (p.conj()).inv();
    let mut z_final = z;
    z_final.scale(sigma);
    zhat.scale(sigma);
    Ok(EigenPair {
        lambda,
        pairs: vec![(y, z_final)],
        adjoined: Some((yhat, zhat)),
    })
}

/// `\int f conj(g) dq` against a measure.
pub fn ip_measure(f: &EigenFunction, g: &EigenFunction, q: &SignedMeasure) -> C {
    let (a, b) = q.interval();
    let osc = (sqrt_upper(f.lambda).norm() + sqrt_upper(g.lambda).norm()) * (b - a) / PI + 6.0;
    q.integrate_against(osc, |x| f.eval(x) * g.eval(x).conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BoundaryConditions as Bc;
    use proptest::prelude::*;

    fn cr(x: f64) -> C {
        C::new(x, 0.0)
    }

    // Bisection roots of a real secular function on (lo, hi).
    fn real_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let h = (hi - lo) / grid as f64;
        let mut x0 = lo;
        let mut g0 = g(x0);
        for i in 1..=grid {
            let x1 = lo + i as f64 * h;
            let g1 = g(x1);
            if g0 == 0.0 {
                out.push(x0);
            } else if g0.signum() != g1.signum() {
                let (mut a, mut b) = (x0, x1);
                let (mut ga, _) = (g0, g1);
                for _ in 0..90 {
                    let m = 0.5 * (a + b);
                    let gm = g(m);
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if ga.signum() != gm.signum() {
                        b = m;
                    } else {
                        a = m;
                        ga = gm;
                    }
                }
                out.push(0.5 * (a + b));
            }
            x0 = x1;
            g0 = g1;
        }
        out
    }

    #[test]
    fn dirichlet_unperturbed_exact() {
        let bc = Bc::dirichlet(0.0, 1.0);
        let s = unperturbed_spectrum(&bc, 6).unwrap();
        assert_eq!(s.len(), 6);
        for (i, e) in s.eigenvalues.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!(
                (e.lambda - cr(PI * PI * n * n)).norm() < 1e-8 * n * n,
                "lambda_{} = {}",
                i + 1,
                e.lambda
            );
            assert_eq!(e.multiplicity, 1);
            assert!(!e.jordan);
            assert_eq!(e.index, i + 1);
            assert_eq!(e.cluster, i);
        }
    }

    #[test]
    fn dirichlet_rescaled_interval() {
        let bc = Bc::dirichlet(-1.0, 3.0);
        let s = unperturbed_spectrum(&bc, 4).unwrap();
        for (i, e) in s.eigenvalues.iter().enumerate() {
            let n = (i + 1) as f64;
            let want = (PI * n / 4.0).powi(2);
            assert!((e.lambda - cr(want)).norm() < 1e-9 * (1.0 + want));
        }
    }

    #[test]
    fn characteristic_proportional_to_sine() {
        // Against Dirichlet the determinant is sin(z)/z up to a constant.
        let bc = Bc::dirichlet(0.0, 1.0);
        let q = SignedMeasure::zero(0.0, 1.0);
        let trig = |lam: C| {
            let z = sqrt_upper(lam);
            if z.norm() < 1e-8 {
                Sc::ONE
            } else {
                // sin z / z in scaled form.
                let iz = C::new(0.0, 1.0) * z;
                let s = z.im.abs();
                let m = ((iz - s).exp() - (-iz - s).exp()) / (C::new(0.0, 2.0) * z);
                Sc::new(m, s)
            }
        };
        let pts = [C::new(7.3, 2.0), C::new(-40.0, 11.0), C::new(2500.0, 900.0)];
        let mut ratios = Vec::new();
        for &lam in &pts {
            let c = characteristic(&bc, &q, lam);
            let t = trig(lam);
            ratios.push(c.div(&t));
        }
        for r in &ratios[1..] {
            let d = r.sub(&ratios[0]);
            assert!(
                d.log_abs() < ratios[0].log_abs() - 18.0,
                "ratio drift {} vs {}",
                d.log_abs(),
                ratios[0].log_abs()
            );
        }
    }

    #[test]
    fn both1_secular_and_expansion() {
        let (c0, f0, c1, f1) = (cr(0.35), cr(-0.2), cr(0.15), cr(0.4));
        let bc = Bc::both_first_order(0.0, 1.0, c0, f0, c1, f1);
        let s = unperturbed_spectrum(&bc, 12).unwrap();
        // Exact secular equation.
        let secular = |z: C| {
            let (sn, cs) = (z.sin(), z.cos());
            z * sn + (c0 - f1) * cs + (f0 - c1) + (c0 * f1 - c1 * f0) * sn / z
        };
        for e in &s.eigenvalues {
            let v = secular(e.z);
            assert!(v.norm() < 1e-7 * (1.0 + e.z.norm()), "secular {} at z = {}", v, e.z);
        }
        // Expansion check at a moderately large index.
        let n = 30usize;
        let s2 = unperturbed_spectrum(&bc, n + 1).unwrap();
        let e = &s2.eigenvalues[n]; // rho_{n+1} ~ pi n + ...
        let base = PI * n as f64;
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        let pred = cr(base) + ((f1 - c0) + sgn * (c1 - f0)) / base;
        assert!(
            (e.z - pred).norm() * (n as f64).powi(2) < 3.0,
            "z = {}, predicted {}",
            e.z,
            pred
        );
    }

    #[test]
    fn periodic_spectrum_doubles() {
        let bc = Bc::periodic(0.0, 1.0);
        let s = unperturbed_spectrum(&bc, 5).unwrap();
        assert!(s.eigenvalues[0].lambda.norm() < 1e-9);
        for k in [1usize, 3] {
            let n = (k + 1) / 2;
            let want = (2.0 * PI * n as f64).powi(2);
            for i in [k, k + 1] {
                let e = &s.eigenvalues[i];
                assert!((e.lambda - cr(want)).norm() < 1e-8 * want);
                assert_eq!(e.multiplicity, 2);
                assert!(!e.jordan, "periodic doubles are semisimple");
            }
            assert_eq!(s.eigenvalues[k].cluster, s.eigenvalues[k + 1].cluster);
        }
    }

    fn jordan_bc() -> Bc {
        // a1 + b1 = 0 with a0 + b0 != 0 and B = 0: every nonzero eigenvalue
        // is a defective double.
        Bc::mixed(0.0, 1.0, cr(2.0), cr(1.0), cr(1.0), cr(-1.0), cr(0.6), cr(0.3))
    }

    #[test]
    fn jordan_spectrum_detected() {
        let s = unperturbed_spectrum(&jordan_bc(), 5).unwrap();
        assert!(s.eigenvalues[0].lambda.norm() < 1e-9);
        assert_eq!(s.eigenvalues[0].multiplicity, 1);
        for k in [1usize, 2, 3, 4] {
            let e = &s.eigenvalues[k];
            let n = ((k + 1) / 2) as f64;
            assert!((e.lambda - cr((2.0 * PI * n).powi(2))).norm() < 1e-7 * e.lambda.norm());
            assert_eq!(e.multiplicity, 2);
            assert!(e.jordan, "defective double not flagged at {}", e.lambda);
        }
    }

    #[test]
    fn close_v1_exact_and_split_roots() {
        // a0 + b0 = 0, a1 + b1 != 0, B = c1 + f1 != 0.
        let bc = Bc::mixed(0.0, 1.0, cr(1.0), cr(-1.0), cr(1.0), cr(2.0), cr(0.4), cr(0.2));
        let inv = bc.classify().unwrap();
        assert_eq!(inv.tag, CaseTag::MixedCloseV1);
        let s = unperturbed_spectrum(&bc, 9).unwrap();
        // One exact member per pair sits at 2 pi N.
        for n in 1..=4usize {
            let want = 2.0 * PI * n as f64;
            let hit = s
                .eigenvalues
                .iter()
                .map(|e| (e.z - cr(want)).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(hit < 1e-9 * want, "no exact root at 2 pi {n}: nearest {hit}");
        }
        // The other member follows B/(pi N A) with an O(N^-3) defect.
        let bb = inv.inv_b;
        let aa = inv.inv_a;
        let s2 = unperturbed_spectrum(&bc, 2 * 12 + 1).unwrap();
        for n in [8usize, 12] {
            let base = 2.0 * PI * n as f64;
            let pred = cr(base) + bb / (PI * n as f64 * aa);
            let hit = s2
                .eigenvalues
                .iter()
                .map(|e| (e.z - pred).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(
                hit * (n as f64).powi(3) < 2.0,
                "split member off prediction by {hit} at N = {n}"
            );
        }
    }

    #[test]
    fn merged_pair_records_pseudo_double() {
        // Tiny B: beyond N ~ 8 the pair is tighter than the resolution
        // margin and must be carried as one multiplicity-2 point, not a
        // Jordan block.
        let bc = Bc::mixed(0.0, 1.0, cr(1.0), cr(-1.0), cr(1.0), cr(2.0), cr(1e-3), cr(0.0));
        let s = unperturbed_spectrum(&bc, 21).unwrap();
        let last = &s.eigenvalues[19..21];
        let want = (2.0 * PI * 10.0).powi(2);
        for e in last {
            assert_eq!(e.multiplicity, 2);
            assert!(!e.jordan);
            assert!((e.lambda - cr(want)).norm() < 1e-2 * want);
        }
    }

    #[test]
    fn separated_quarter_alpha() {
        // y(0) = 0, y'(1) = 0: alpha = pi/2, z = (N - 1/2) pi.
        let bc = Bc::mixed(0.0, 1.0, ONE, ZERO, ZERO, ONE, ZERO, ZERO);
        let inv = bc.classify().unwrap();
        assert_eq!(inv.tag, CaseTag::MixedSeparated);
        assert!((inv.alpha.unwrap() - cr(PI / 2.0)).norm() < 1e-12);
        let s = unperturbed_spectrum(&bc, 7).unwrap();
        for (i, e) in s.eigenvalues.iter().enumerate() {
            let want = ((i as f64 + 0.5) * PI).powi(2);
            assert!(
                (e.lambda - cr(want)).norm() < 1e-8 * (1.0 + want),
                "lambda_{} = {}",
                i + 1,
                e.lambda
            );
        }
        // Lone first cluster, then pairs.
        let ranges = s.cluster_ranges();
        assert_eq!(ranges[0], (0, 1));
        assert_eq!(ranges[1], (1, 3));
    }

    #[test]
    fn counting_known_examples() {
        let d = Bc::dirichlet(0.0, 1.0);
        let q0 = SignedMeasure::zero(0.0, 1.0);
        assert_eq!(count_in_disc(&d, &q0, 2.5 * PI).unwrap(), 2);
        let p = Bc::periodic(0.0, 1.0);
        assert_eq!(count_in_disc(&p, &q0, 3.0 * PI).unwrap(), 3);
    }

    #[test]
    fn counting_atom_oracle() {
        let bc = Bc::dirichlet(0.0, 1.0);
        let x0 = 1.0 / 3.0;
        let q = SignedMeasure::new(0.0, 1.0, &[(x0, ONE)], &[], &[]).unwrap();
        let g = |z: f64| z.sin() + (z * x0).sin() * (z * (1.0 - x0)).sin() / z;
        for k in 1..=6usize {
            let r = (k as f64 + 0.5) * PI;
            let oracle = real_roots(g, 0.05, r, 3000).len();
            assert_eq!(oracle, k, "oracle count disagrees at K = {k}");
            assert_eq!(count_in_disc(&bc, &q, r).unwrap(), k);
        }
    }

    #[test]
    fn perturbed_dirichlet_atom_matches_bisection() {
        let bc = Bc::dirichlet(0.0, 1.0);
        let x0 = 1.0 / 3.0;
        let q = SignedMeasure::new(0.0, 1.0, &[(x0, ONE)], &[], &[]).unwrap();
        let s = perturbed_spectrum(&bc, &q, 8).unwrap();
        let g = |z: f64| z.sin() + (z * x0).sin() * (z * (1.0 - x0)).sin() / z;
        let oracle = real_roots(g, 0.05, 8.6 * PI, 6000);
        assert!(oracle.len() >= 8);
        for (e, z0) in s.eigenvalues.iter().zip(&oracle) {
            let want = z0 * z0;
            assert!(
                (e.lambda - cr(want)).norm() < 1e-8 * (1.0 + want),
                "lambda {} vs oracle {}",
                e.lambda,
                want
            );
        }
    }

    #[test]
    fn perturbation_first_order_and_exact_even_mode() {
        let bc = Bc::dirichlet(0.0, 1.0);
        let h = 0.1;
        let q = SignedMeasure::new(0.0, 1.0, &[(0.5, cr(h))], &[], &[]).unwrap();
        let s = perturbed_spectrum(&bc, &q, 2).unwrap();
        // lambda_1 = pi^2 + 2 h sin^2(pi/2) + O(h^2).
        let l1 = s.eigenvalues[0].lambda;
        assert!((l1 - cr(PI * PI + 2.0 * h)).norm() < 0.01);
        // sin(2 pi / 2) = 0 kills the coupling: lambda_2 stays exactly.
        let l2 = s.eigenvalues[1].lambda;
        assert!((l2 - cr(4.0 * PI * PI)).norm() < 1e-9 * 4.0 * PI * PI);
    }

    #[test]
    fn zero_measure_equals_unperturbed() {
        let bc = Bc::periodic(0.0, 1.0);
        let q = SignedMeasure::zero(0.0, 1.0);
        let a = unperturbed_spectrum(&bc, 5).unwrap();
        let b = perturbed_spectrum(&bc, &q, 5).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x.lambda - y.lambda).norm() < 1e-12 * (1.0 + x.lambda.norm()));
        }
        assert_eq!(b.provenance, Provenance::Perturbed);
    }

    #[test]
    fn dirichlet_eigenpair_product() {
        let bc = Bc::dirichlet(0.0, 1.0);
        let q = SignedMeasure::zero(0.0, 1.0);
        let s = unperturbed_spectrum(&bc, 2).unwrap();
        let p = eigenpair(&bc, &q, &s.eigenvalues[0]).unwrap();
        let (y, z) = &p.pairs[0];
        for &x in &[0.13, 0.5, 0.77] {
            let prod = y.eval(x) * z.eval(x).conj();
            let want = 1.0 - (2.0 * PI * x).cos();
            assert!(
                (prod - cr(want)).norm() < 1e-8,
                "product {} at x = {x}, want {want}",
                prod
            );
        }
    }

    #[test]
    fn semisimple_cluster_product_is_constant() {
        let bc = Bc::periodic(0.0, 1.0);
        let q = SignedMeasure::zero(0.0, 1.0);
        let s = unperturbed_spectrum(&bc, 3).unwrap();
        let p = eigenpair(&bc, &q, &s.eigenvalues[1]).unwrap();
        assert_eq!(p.pairs.len(), 2);
        // Biorthogonality.
        for i in 0..2 {
            for k in 0..2 {
                let g = ip(&p.pairs[i].0, &p.pairs[k].1);
                let want = if i == k { ONE } else { ZERO };
                assert!((g - want).norm() < 1e-7, "gram[{i}][{k}] = {g}");
            }
        }
        for &x in &[0.2, 0.63] {
            let total: C = p
                .pairs
                .iter()
                .map(|(y, z)| y.eval(x) * z.eval(x).conj())
                .sum();
            assert!((total - cr(2.0)).norm() < 1e-7, "cluster product {total} at {x}");
        }
    }

    #[test]
    fn jordan_chain_identity() {
        // Defective double at (4 pi)^2; the gauge-invariant residue
        // combination has the closed form
        // 2 + 2 cos(4 pi N x) (a0 + b0)(2x - 1)/(a0 - b0).
        let bc = jordan_bc();
        let q = SignedMeasure::zero(0.0, 1.0);
        let s = unperturbed_spectrum(&bc, 5).unwrap();
        let ev = &s.eigenvalues[3];
        assert!(ev.jordan);
        let n = 2.0;
        let p = eigenpair(&bc, &q, ev).unwrap();
        let (y, z) = &p.pairs[0];
        let (yh, zh) = p.adjoined.as_ref().unwrap();
        // Normalization cross-checks.
        assert!((ip(y, zh) - ONE).norm() < 1e-6);
        assert!((ip(yh, z) - ONE).norm() < 1e-6);
        assert!(ip(y, z).norm() < 1e-7);
        assert!(ip(yh, zh).norm() < 1e-6);
        let (a0, b0) = (2.0, 1.0);
        for &x in &[0.11, 0.42, 0.86] {
            let combo = y.eval(x) * zh.eval(x).conj() + yh.eval(x) * z.eval(x).conj();
            let want =
                2.0 + 2.0 * (4.0 * PI * n * x).cos() * (a0 + b0) * (2.0 * x - 1.0) / (a0 - b0);
            assert!(
                (combo - cr(want)).norm() < 1e-5,
                "combo {combo} at x = {x}, want {want}"
            );
        }
    }

    #[test]
    fn validate_counts_catches_schedule() {
        let bc = Bc::mixed(0.0, 1.0, cr(1.0), cr(-1.0), cr(1.0), cr(2.0), cr(0.4), cr(0.2));
        let q = SignedMeasure::new(
            0.0,
            1.0,
            &[(0.29, cr(0.8))],
            &[0.0, 0.5, 1.0],
            &[cr(0.6), cr(-0.3)],
        )
        .unwrap();
        let s = perturbed_spectrum(&bc, &q, 11).unwrap();
        let radii: Vec<f64> = separation_radii(&s)
            .into_iter()
            .filter(|(_, m)| *m > 0.05)
            .map(|(r, _)| r)
            .collect();
        assert!(radii.len() >= 3);
        validate_counts(&bc, &q, &s, &radii).unwrap();
    }

    #[test]
    fn perturbed_pair_leaving_the_real_axis_is_still_found() {
        // Close-V1 pair under a measure strong enough to collide the pair
        // and split it far off the axis: lambda moves ~ 2|z||dz|, well
        // beyond the unperturbed spread, so island circles must escalate.
        let bc = Bc::mixed(0.0, 1.0, cr(1.0), cr(-1.0), cr(1.0), cr(2.0), cr(0.4), cr(0.2));
        let q = SignedMeasure::new(
            0.0,
            1.0,
            &[(0.29, cr(0.8))],
            &[0.0, 0.5, 1.0],
            &[cr(0.6), cr(-0.3)],
        )
        .unwrap();
        let s = perturbed_spectrum(&bc, &q, 11).unwrap();
        let pair: Vec<&Eigenvalue> = s
            .eigenvalues
            .iter()
            .filter(|e| (e.lambda - cr(356.5)).norm() < 60.0)
            .collect();
        assert_eq!(pair.len(), 2);
        assert!(pair[0].lambda.im.abs() > 5.0, "pair should be off-axis");
        assert!((pair[0].lambda - pair[1].lambda.conj()).norm() < 1e-6);
        for e in pair {
            let v = characteristic(&bc, &q, e.lambda);
            let dv = char_data(&bc, &q, e.lambda).deriv;
            assert!(v.log_abs() - dv.log_abs() < -6.0, "not a root: {:?}", e.lambda);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn random_separated_bc_counts_consistent(
            a0 in 0.6f64..1.4,
            b0 in -0.45f64..0.45,
            b1 in -0.4f64..0.4,
            c1 in -0.5f64..0.5,
            f1 in -0.5f64..0.5,
        ) {
            let bc = Bc::mixed(0.0, 1.0, cr(a0), cr(b0), cr(1.0), cr(b1), cr(c1), cr(f1));
            let inv = bc.classify();
            prop_assume!(inv.is_ok());
            let inv = inv.unwrap();
            prop_assume!(inv.tag == CaseTag::MixedSeparated);
            prop_assume!(inv.inv_a.norm() > 0.25);
            // Assembly already validates a thinned schedule; just require
            // success and ordered moduli.
            let s = unperturbed_spectrum(&bc, 9).unwrap();
            for w in s.eigenvalues.windows(2) {
                prop_assert!(w[0].lambda.norm() <= w[1].lambda.norm() + 1e-9);
            }
        }
    }
}
