//! Scaled complex arithmetic: numbers stored as `m * exp(e)` with `|m| = 1`.
//!
//! Transfer matrices and characteristic determinants grow like
//! `exp(|Im z| (b - a))`, which overflows `f64` long before the contour radii
//! used here.  Keeping the exponent separate makes products, determinants and
//! ratios exact in scale while the mantissa carries the phase and relative
//! accuracy.

use num_complex::Complex64;

type C = Complex64;

/// A complex number `m * exp(e)` with `|m| = 1` (or `m = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sc {
    pub m: C,
    pub e: f64,
}

impl Sc {
    pub const ZERO: Sc = Sc {
        m: C::new(0.0, 0.0),
        e: 0.0,
    };

    pub const ONE: Sc = Sc {
        m: C::new(1.0, 0.0),
        e: 0.0,
    };

    /// Build from mantissa and exponent, renormalizing so `|m| = 1`.
    pub fn new(m: C, e: f64) -> Sc {
        let n = m.norm();
        if n == 0.0 || !n.is_finite() {
            if n == 0.0 {
                return Sc::ZERO;
            }
            // Overflowed mantissa: fall back to scaling by parts.
            let scale = m.re.abs().max(m.im.abs());
            let md = C::new(m.re / scale, m.im / scale);
            return Sc::new(md, e + scale.ln());
        }
        Sc {
            m: m / n,
            e: e + n.ln(),
        }
    }

    pub fn from_c(c: C) -> Sc {
        Sc::new(c, 0.0)
    }

    pub fn from_f(x: f64) -> Sc {
        Sc::new(C::new(x, 0.0), 0.0)
    }

    /// `exp(i w)` for complex `w`, kept in scaled form.
    pub fn exp_i(w: C) -> Sc {
        Sc {
            m: C::from_polar(1.0, w.re),
            e: -w.im,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == 0.0 && self.m.im == 0.0
    }

    /// Collapse to a plain `f64` complex; may overflow or underflow, caller
    /// must know the magnitude is representable.
    pub fn to_c(&self) -> C {
        self.m * self.e.exp()
    }

    /// `ln |value|`; `-inf` for zero.
    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.e
        }
    }

    pub fn mul(&self, o: &Sc) -> Sc {
        if self.is_zero() || o.is_zero() {
            return Sc::ZERO;
        }
        Sc::new(self.m * o.m, self.e + o.e)
    }

    pub fn mul_c(&self, c: C) -> Sc {
        Sc::new(self.m * c, self.e)
    }

    pub fn div(&self, o: &Sc) -> Sc {
        Sc::new(self.m / o.m, self.e - o.e)
    }

    pub fn neg(&self) -> Sc {
        Sc {
            m: -self.m,
            e: self.e,
        }
    }

    pub fn add(&self, o: &Sc) -> Sc {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        if self.e >= o.e {
            Sc::new(self.m + o.m * (o.e - self.e).exp(), self.e)
        } else {
            Sc::new(o.m + self.m * (self.e - o.e).exp(), o.e)
        }
    }

    pub fn sub(&self, o: &Sc) -> Sc {
        self.add(&o.neg())
    }

    /// Ratio as a plain complex number; exponents are subtracted first so the
    /// result is finite whenever the true ratio is representable.
    pub fn ratio_c(&self, o: &Sc) -> C {
        self.m / o.m * (self.e - o.e).exp()
    }
}
