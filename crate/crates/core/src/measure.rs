//! Finite complex signed measures on `[a, b]`: point masses plus a
//! piecewise-constant density.
//!
//! The measure is the potential of the perturbed operator `-y'' + q y`.  Its
//! distribution function `Q(x) = q([a, x])` is right-continuous; the trace
//! formula consumes the one-sided density values `Q'(a)`, `Q'(b)` and the
//! atom weights.

use crate::error::Error;
use crate::quad;
use crate::scaled::Sc;
use crate::Result;
use num_complex::Complex64;

type C = Complex64;

/// Atoms plus a piecewise-constant density on a fixed interval.
///
/// Internally the density always spans the whole interval (padded with zero
/// pieces), atoms are sorted and exactly coinciding atoms are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    a: f64,
    b: f64,
    atoms: Vec<(f64, C)>,
    /// `breaks.len() == values.len() + 1`, `breaks[0] == a`, `breaks[n] == b`.
    breaks: Vec<f64>,
    values: Vec<C>,
}

impl SignedMeasure {
    /// Build a measure, validating supports and canonicalizing the density.
    ///
    /// `density_breaks`/`density_values` describe a piecewise-constant
    /// density on `[density_breaks[0], density_breaks[n]]`; the density is
    /// zero on the rest of `[a, b]`.
    pub fn new(
        a: f64,
        b: f64,
        atoms: &[(f64, C)],
        density_breaks: &[f64],
        density_values: &[C],
    ) -> Result<SignedMeasure> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProblem(format!(
                "interval [{a}, {b}] is not a finite nondegenerate interval"
            )));
        }
        for &(x, h) in atoms {
            if !(x >= a && x <= b) {
                return Err(Error::InvalidProblem(format!(
                    "atom at x = {x} lies outside [{a}, {b}]"
                )));
            }
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::InvalidProblem(format!("atom weight at x = {x} is not finite")));
            }
        }
        if density_breaks.is_empty() != density_values.is_empty()
            || (!density_breaks.is_empty() && density_breaks.len() != density_values.len() + 1)
        {
            return Err(Error::InvalidProblem(format!(
                "density needs n+1 breakpoints for n values, got {} and {}",
                density_breaks.len(),
                density_values.len()
            )));
        }
        for w in density_breaks.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidProblem(format!(
                    "density breakpoints must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(&lo), Some(&hi)) = (density_breaks.first(), density_breaks.last()) {
            if lo < a || hi > b {
                return Err(Error::InvalidProblem(format!(
                    "density support [{lo}, {hi}] exceeds [{a}, {b}]"
                )));
            }
        }
        for v in density_values {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidProblem("density value is not finite".into()));
            }
        }

        let mut sorted: Vec<(f64, C)> = atoms.to_vec();
        sorted.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let mut merged: Vec<(f64, C)> = Vec::with_capacity(sorted.len());
        for (x, h) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += h,
                _ => merged.push((x, h)),
            }
        }
        merged.retain(|&(_, h)| h != C::new(0.0, 0.0));

        // Canonical density spanning [a, b].
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        if density_breaks.is_empty() {
            breaks.extend_from_slice(&[a, b]);
            values.push(C::new(0.0, 0.0));
        } else {
            let lo = density_breaks[0];
            let hi = *density_breaks.last().unwrap();
            breaks.push(a);
            if lo > a {
                values.push(C::new(0.0, 0.0));
                breaks.push(lo);
            }
            for (i, &v) in density_values.iter().enumerate() {
                values.push(v);
                breaks.push(density_breaks[i + 1]);
            }
            if hi < b {
                values.push(C::new(0.0, 0.0));
                breaks.push(b);
            }
        }
        Ok(SignedMeasure {
            a,
            b,
            atoms: merged,
            breaks,
            values,
        })
    }

    /// The zero measure on `[a, b]`.
    pub fn zero(a: f64, b: f64) -> SignedMeasure {
        SignedMeasure::new(a, b, &[], &[], &[]).expect("valid interval")
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn atoms(&self) -> &[(f64, C)] {
        &self.atoms
    }

    /// Canonical density breakpoints spanning `[a, b]`.
    pub fn density_breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Density values, one per piece between consecutive breakpoints.
    pub fn density_values(&self) -> &[C] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.values.iter().all(|v| *v == C::new(0.0, 0.0))
    }

    /// Total mass `q([a, b])`.
    pub fn mass(&self) -> C {
        let mut m: C = self.atoms.iter().map(|&(_, h)| h).sum();
        for (i, v) in self.values.iter().enumerate() {
            m += v * (self.breaks[i + 1] - self.breaks[i]);
        }
        m
    }

    /// Total variation `sum |h_j| + sum |v_i| len_i`.
    pub fn total_variation(&self) -> f64 {
        let mut tv: f64 = self.atoms.iter().map(|&(_, h)| h.norm()).sum();
        for (i, v) in self.values.iter().enumerate() {
            tv += v.norm() * (self.breaks[i + 1] - self.breaks[i]);
        }
        tv
    }

    /// Density value at `x` (value of the piece containing `x`; at a
    /// breakpoint the right piece wins, at `b` the last piece).
    pub fn density_at(&self, x: f64) -> C {
        let n = self.values.len();
        match self.breaks[..n].binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(i) => self.values[i],
            Err(0) => self.values[0],
            Err(i) => self.values[i - 1],
        }
    }

    /// Subtract `mass / (b - a)` from the density so the result has zero
    /// total mass.  Atoms are untouched.
    pub fn zero_mean_adjust(&self) -> SignedMeasure {
        let shift = self.mass() / (self.b - self.a);
        let mut out = self.clone();
        for v in &mut out.values {
            *v -= shift;
        }
        out
    }

    /// One-sided density values `(Q'(a+), Q'(b-))`.
    ///
    /// Errors with [`Error::EndpointAtom`] when an atom sits at an endpoint,
    /// where the one-sided derivative of the distribution does not exist.
    pub fn endpoint_derivatives(&self) -> Result<(C, C)> {
        let tol = 1e-12 * (self.b - self.a);
        for &(x, _) in &self.atoms {
            if (x - self.a).abs() <= tol {
                return Err(Error::EndpointAtom(self.a));
            }
            if (x - self.b).abs() <= tol {
                return Err(Error::EndpointAtom(self.b));
            }
        }
        Ok((self.values[0], *self.values.last().unwrap()))
    }

    /// `integral f dq = sum h_j f(x_j) + sum_i v_i integral_piece f`.
    ///
    /// `osc` is the maximum phase-variation rate of `f` in radians per unit
    /// length; density pieces are subdivided so the quadrature resolves it.
    pub fn integrate_against<F: FnMut(f64) -> C>(&self, osc: f64, mut f: F) -> C {
        let mut total = C::new(0.0, 0.0);
        for &(x, h) in &self.atoms {
            total += h * f(x);
        }
        for (i, v) in self.values.iter().enumerate() {
            if *v == C::new(0.0, 0.0) {
                continue;
            }
            total += v * quad::integrate(self.breaks[i], self.breaks[i + 1], osc, &mut f);
        }
        total
    }

    /// Exponential moment `integral exp(i w x) q(dx)` in scaled form.
    ///
    /// Exact for atoms and piecewise-constant densities; safe for large
    /// `|Im w|` where the integrand magnitude leaves the `f64` range.
    pub fn exp_moment(&self, w: C) -> Sc {
        let mut total = Sc::ZERO;
        for &(x, h) in &self.atoms {
            total = total.add(&Sc::exp_i(w * x).mul_c(h));
        }
        for (i, v) in self.values.iter().enumerate() {
            if *v == C::new(0.0, 0.0) {
                continue;
            }
            let t0 = self.breaks[i];
            let dt = self.breaks[i + 1] - t0;
            // integral_piece exp(iwx) dx = exp(iw t0) * dt * phi1(iw dt),
            // phi1(u) = (e^u - 1)/u.
            let u = C::new(0.0, 1.0) * w * dt;
            let phi1 = if u.norm() < 1e-4 {
                C::new(1.0, 0.0) + u / 2.0 + u * u / 6.0 + u * u * u / 24.0
            } else {
                (u.exp() - 1.0) / u
            };
            total = total.add(&Sc::exp_i(w * t0).mul_c(v * dt * phi1));
        }
        total
    }

    /// Pointwise sum of two measures on the same interval.
    pub fn add(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        if self.interval() != other.interval() {
            return Err(Error::InvalidProblem(
                "cannot add measures on different intervals".into(),
            ));
        }
        let mut atoms: Vec<(f64, C)> = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut breaks: Vec<f64> = self.breaks.clone();
        breaks.extend_from_slice(&other.breaks);
        breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
        breaks.dedup();
        let mut values = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            values.push(self.density_at(mid) + other.density_at(mid));
        }
        SignedMeasure::new(self.a, self.b, &atoms, &breaks, &values)
    }

    /// The measure scaled by `t`.
    pub fn scale(&self, t: C) -> SignedMeasure {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.1 *= t;
        }
        out.atoms.retain(|&(_, h)| h != C::new(0.0, 0.0));
        for v in &mut out.values {
            *v *= t;
        }
        out
    }

    /// Complex conjugate measure (potential of the adjoint operator).
    pub fn conj(&self) -> SignedMeasure {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.1 = a.1.conj();
        }
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    /// Distribution function view of this measure.
    pub fn distribution(&self) -> DistributionFunction<'_> {
        DistributionFunction { q: self }
    }
}

/// Right-continuous distribution function `Q(x) = q([a, x])`.
#[derive(Debug, Clone, Copy)]
pub struct DistributionFunction<'a> {
    q: &'a SignedMeasure,
}

impl DistributionFunction<'_> {
    fn density_integral(&self, x: f64) -> C {
        let q = self.q;
        let mut acc = C::new(0.0, 0.0);
        for (i, v) in q.values.iter().enumerate() {
            let lo = q.breaks[i];
            let hi = q.breaks[i + 1];
            if x <= lo {
                break;
            }
            acc += v * (x.min(hi) - lo);
        }
        acc
    }

    /// `Q(x)` including the atom at `x` (right-continuous value).
    pub fn value(&self, x: f64) -> C {
        let mut acc = self.density_integral(x);
        for &(p, h) in &self.q.atoms {
            if p <= x {
                acc += h;
            }
        }
        acc
    }

    /// Left limit `Q(x-)`, excluding the atom at `x`.
    pub fn left_limit(&self, x: f64) -> C {
        let mut acc = self.density_integral(x);
        for &(p, h) in &self.q.atoms {
            if p < x {
                acc += h;
            }
        }
        acc
    }

    /// Jump `Q(x) - Q(x-)`: the atom weight at `x`, if any.
    pub fn jump(&self, x: f64) -> C {
        self.value(x) - self.left_limit(x)
    }
}
