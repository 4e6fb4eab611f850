//! Exact propagation of Cauchy data for `-y'' + q y = lambda y` across
//! piecewise-constant density and point masses.
//!
//! Each constant piece has the closed-form transfer matrix
//! `[[cos w, dx sinc w], [-(lambda - v) dx sinc w, cos w]]` with
//! `w = sqrt(lambda - v) dx`; all entries are even in the root, so no branch
//! choice is needed.  An atom `h delta` jumps the derivative,
//! `[[1, 0], [h, 1]]`.  Matrices are stored scaled by `exp(-log_scale)` with
//! the exponent tracked separately, so contour radii with `|Im z|` in the
//! hundreds do not overflow.  The `lambda`-derivative of the product is
//! propagated alongside via the product rule (Newton refinement and adjoined
//! functions both need it).

use crate::measure::SignedMeasure;
use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Cauchy data `(y, y')` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub y: C,
    pub dy: C,
}

impl State {
    pub fn new(y: C, dy: C) -> State {
        State { y, dy }
    }
}

/// Transfer matrix with its `lambda`-derivative, scaled by `exp(log_scale)`:
/// the true matrix is `m * exp(log_scale)` and its derivative
/// `dm * exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct Transfer {
    pub m: [[C; 2]; 2],
    pub dm: [[C; 2]; 2],
    pub log_scale: f64,
}

fn mat_mul(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_add(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut out = *a;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += b[i][j];
        }
    }
    out
}

impl Transfer {
    pub fn identity() -> Transfer {
        Transfer {
            m: [[ONE, ZERO], [ZERO, ONE]],
            dm: [[ZERO; 2]; 2],
            log_scale: 0.0,
        }
    }

    /// `self * rhs` (apply `rhs` first), renormalized.
    pub fn compose(&self, rhs: &Transfer) -> Transfer {
        let m = mat_mul(&self.m, &rhs.m);
        let dm = mat_add(&mat_mul(&self.dm, &rhs.m), &mat_mul(&self.m, &rhs.dm));
        let mut t = Transfer {
            m,
            dm,
            log_scale: self.log_scale + rhs.log_scale,
        };
        t.renormalize();
        t
    }

    fn renormalize(&mut self) {
        let g = self.m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if g > 0.0 && g.is_finite() {
            for row in self.m.iter_mut().chain(self.dm.iter_mut()) {
                for z in row {
                    *z /= g;
                }
            }
            self.log_scale += g.ln();
        }
    }

    /// Apply to Cauchy data, unscaled (use only where `log_scale` is modest).
    pub fn apply(&self, s: State) -> State {
        let e = self.log_scale.exp();
        State {
            y: (self.m[0][0] * s.y + self.m[0][1] * s.dy) * e,
            dy: (self.m[1][0] * s.y + self.m[1][1] * s.dy) * e,
        }
    }

    /// Apply the `lambda`-derivative of the matrix to Cauchy data.
    pub fn apply_derivative(&self, s: State) -> State {
        let e = self.log_scale.exp();
        State {
            y: (self.dm[0][0] * s.y + self.dm[0][1] * s.dy) * e,
            dy: (self.dm[1][0] * s.y + self.dm[1][1] * s.dy) * e,
        }
    }

    /// `det(m)`, which should equal `exp(-2 log_scale)`.
    pub fn det_mantissa(&self) -> C {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

/// Transfer matrix of one constant-density piece of length `dx >= 0`.
pub fn piece_matrix(v: C, dx: f64, lambda: C) -> Transfer {
    if dx == 0.0 {
        return Transfer::identity();
    }
    let w2 = (lambda - v) * (dx * dx);
    let w = w2.sqrt();
    let s = w.im.abs();
    // cos(w) and sinc(w) scaled by exp(-s); the exponentials have
    // non-positive real part, so nothing overflows.
    let iw = C::new(0.0, 1.0) * w;
    let ep = (iw - s).exp();
    let em = (-iw - s).exp();
    let cos_s = 0.5 * (ep + em);
    let (sinc_s, dd_s);
    if w.norm() < 1e-4 {
        // sinc w = 1 - w^2/6 + w^4/120; (cos w - sinc w)/w^2 = -1/3 + w^2/30.
        let es = (-s).exp();
        sinc_s = es * (ONE - w2 / 6.0 + w2 * w2 / 120.0);
        dd_s = es * (C::new(-1.0 / 3.0, 0.0) + w2 / 30.0 - w2 * w2 / 840.0);
    } else {
        let sin_s = (ep - em) / C::new(0.0, 2.0);
        sinc_s = sin_s / w;
        dd_s = (cos_s - sinc_s) / w2;
    }
    let dx_c = C::new(dx, 0.0);
    let m = [
        [cos_s, dx_c * sinc_s],
        [-(lambda - v) * dx_c * sinc_s, cos_s],
    ];
    let h2 = 0.5 * dx * dx;
    let dm = [
        [-h2 * sinc_s, (0.5 * dx * dx * dx) * dd_s],
        [-(0.5 * dx) * (cos_s + sinc_s), -h2 * sinc_s],
    ];
    Transfer { m, dm, log_scale: s }
}

/// Jump matrix of an atom `h delta`: `y` continuous, `y'` jumps by `h y`.
pub fn atom_matrix(h: C) -> Transfer {
    Transfer {
        m: [[ONE, ZERO], [h, ONE]],
        dm: [[ZERO; 2]; 2],
        log_scale: 0.0,
    }
}

/// Ordered product of piece and atom matrices over `[x0, x1]`.
///
/// Atoms at `x0` are excluded and atoms at `x1` included (right-closed
/// convention), which makes composition over adjacent intervals exact.
pub fn transfer(q: &SignedMeasure, lambda: C, x0: f64, x1: f64) -> Transfer {
    debug_assert!(x0 <= x1);
    let mut cuts: Vec<f64> = vec![x0];
    for &t in q.density_breaks() {
        if t > x0 && t < x1 {
            cuts.push(t);
        }
    }
    for &(x, _) in q.atoms() {
        if x > x0 && x < x1 {
            cuts.push(x);
        }
    }
    cuts.push(x1);
    cuts.sort_by(|p, r| p.partial_cmp(r).unwrap());
    cuts.dedup();

    let mut t = Transfer::identity();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let v = q.density_at(0.5 * (lo + hi));
        t = piece_matrix(v, hi - lo, lambda).compose(&t);
        for &(x, h) in q.atoms() {
            if x == hi && x > x0 {
                t = atom_matrix(h).compose(&t);
            }
        }
    }
    if x0 == x1 {
        // Degenerate interval: nothing acts, including atoms at the point.
        return Transfer::identity();
    }
    t
}

/// Propagate Cauchy data from `x0` to `x1`.
pub fn propagate(q: &SignedMeasure, lambda: C, x0: f64, x1: f64, s: State) -> State {
    transfer(q, lambda, x0, x1).apply(s)
}
