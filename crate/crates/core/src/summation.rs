//! Mean-value (Cesàro) summation and the pairing machinery for eigenvalue
//! series whose terms must be added cluster-wise before averaging.
//!
//! The estimate is the plain arithmetic mean of the first `K` partial sums.
//! No acceleration is applied to headline numbers; a second-level mean is
//! carried along purely as a diagnostic.

use num_complex::Complex64;

use crate::bc::RegularityClass;
use crate::error::Error;
use crate::spectrum::Spectrum;
use crate::Result;

type C = Complex64;

/// Result of mean-value summation of a series.
#[derive(Debug, Clone)]
pub struct CesaroResult {
    /// Arithmetic mean of the first `terms_used` partial sums.
    pub estimate: C,
    /// Partial sums of the input series.
    pub partial_sums: Vec<C>,
    /// Running means of the partial sums.
    pub means: Vec<C>,
    /// Max deviation of the last ~10% of running means from the estimate.
    pub diagnostic: f64,
    /// Mean of the running means (diagnostic only, never the headline).
    pub second_mean: C,
    pub terms_used: usize,
}

/// Mean-value summation of a term series.
pub fn cesaro(terms: &[C]) -> CesaroResult {
    let mut sums = Vec::with_capacity(terms.len());
    let mut acc = C::new(0.0, 0.0);
    for t in terms {
        acc += t;
        sums.push(acc);
    }
    cesaro_of_partial_sums(&sums)
}

/// Mean-value summation given the partial sums directly.
///
/// Also serves to average a plain sequence (pass the sequence as `sums`).
pub fn cesaro_of_partial_sums(sums: &[C]) -> CesaroResult {
    let k = sums.len();
    if k == 0 {
        return CesaroResult {
            estimate: C::new(0.0, 0.0),
            partial_sums: Vec::new(),
            means: Vec::new(),
            diagnostic: f64::INFINITY,
            second_mean: C::new(0.0, 0.0),
            terms_used: 0,
        };
    }
    let mut means = Vec::with_capacity(k);
    let mut acc = C::new(0.0, 0.0);
    for (i, s) in sums.iter().enumerate() {
        acc += s;
        means.push(acc / (i + 1) as f64);
    }
    let estimate = *means.last().unwrap();
    let tail = k.div_ceil(10);
    let diagnostic = means[k - tail..]
        .iter()
        .map(|m| (m - estimate).norm())
        .fold(0.0, f64::max);
    let second_mean = means.iter().sum::<C>() / k as f64;
    CesaroResult {
        estimate,
        partial_sums: sums.to_vec(),
        means,
        diagnostic,
        second_mean,
        terms_used: k,
    }
}

/// A series regrouped for cluster-wise summation.
#[derive(Debug, Clone)]
pub struct PairedSeries {
    /// Regrouped terms, one per cluster.
    pub terms: Vec<C>,
    /// The re-bracketing correction `-(1/2) * (C,1)-lim` of the trailing
    /// element of each pair; add it to the mean-value sum of `terms` to
    /// recover the value of the original series.
    pub correction: C,
}

/// Bracketing `(a1 + a2) + (a3 + a4) + ...`; correction
/// `-(1/2)(C,1)-lim a_{2k}`.
pub fn rebracket_even(terms: &[C]) -> PairedSeries {
    let mut out = Vec::with_capacity(terms.len() / 2);
    let mut trail = Vec::with_capacity(terms.len() / 2);
    let mut i = 0;
    while i + 1 < terms.len() {
        out.push(terms[i] + terms[i + 1]);
        trail.push(terms[i + 1]);
        i += 2;
    }
    PairedSeries {
        terms: out,
        correction: -0.5 * cesaro_of_partial_sums(&trail).estimate,
    }
}

/// Bracketing `a1 + (a2 + a3) + (a4 + a5) + ...` keeping the first term
/// alone; correction `-(1/2)(C,1)-lim a_{2k+1}`.
pub fn rebracket_odd(terms: &[C]) -> PairedSeries {
    if terms.is_empty() {
        return PairedSeries { terms: Vec::new(), correction: C::new(0.0, 0.0) };
    }
    let mut out = vec![terms[0]];
    let mut trail = Vec::with_capacity(terms.len() / 2);
    let mut i = 1;
    while i + 1 < terms.len() {
        out.push(terms[i] + terms[i + 1]);
        trail.push(terms[i + 1]);
        i += 2;
    }
    PairedSeries {
        terms: out,
        correction: -0.5 * cesaro_of_partial_sums(&trail).estimate,
    }
}

impl PairedSeries {
    /// Mean-value sum of the regrouped series plus the correction.
    pub fn evaluate(&self) -> (CesaroResult, C) {
        let ces = cesaro(&self.terms);
        let total = ces.estimate + self.correction;
        (ces, total)
    }
}

/// Regroup the eigenvalue-difference series `lambda_N(q) - lambda_N - mean`
/// for mean-value summation.
///
/// Strongly regular spectra keep one term per list entry.  Otherwise the
/// entries of each asymptotic cluster (a lone first root, then pairs) are
/// added first, and the correction `-(1/2) (C,1)-lim` over the trailing
/// element of each pair is carried along; it vanishes in the limit since the
/// differences tend to zero, but the finite-length value is reported.
pub fn pair_terms(
    unperturbed: &Spectrum,
    perturbed: &Spectrum,
    class: RegularityClass,
    mean: C,
) -> Result<PairedSeries> {
    if class == RegularityClass::Irregular {
        return Err(Error::IrregularBc("no pairing for irregular conditions".into()));
    }
    let n = unperturbed.len();
    if n != perturbed.len() {
        return Err(Error::ClusterMismatch {
            index: n.min(perturbed.len()),
            expected: n,
            found: perturbed.len(),
        });
    }
    let mut diffs = Vec::with_capacity(n);
    for (i, (e0, eq)) in unperturbed
        .eigenvalues
        .iter()
        .zip(&perturbed.eigenvalues)
        .enumerate()
    {
        if e0.cluster != eq.cluster {
            return Err(Error::ClusterMismatch {
                index: i,
                expected: e0.cluster,
                found: eq.cluster,
            });
        }
        diffs.push(eq.lambda - e0.lambda - mean);
    }
    // Bounded-difference plausibility: a tail term comparable to the cluster
    // spacing means the lists drifted out of step by an index.
    for (i, d) in diffs.iter().enumerate().skip(n - (n / 4).max(1).min(n)) {
        let cap = 1.0 + 0.5 * unperturbed.eigenvalues[i].lambda.norm().sqrt();
        if d.norm() > cap {
            return Err(Error::ClusterMismatch {
                index: i,
                expected: unperturbed.eigenvalues[i].cluster,
                found: perturbed.eigenvalues[i].cluster,
            });
        }
    }
    match class {
        RegularityClass::StronglyRegular => Ok(PairedSeries {
            terms: diffs,
            correction: C::new(0.0, 0.0),
        }),
        _ => {
            let evs = &unperturbed.eigenvalues;
            let mut terms = Vec::new();
            let mut trail = Vec::new();
            let mut i = 0;
            while i < n {
                let mut j = i + 1;
                while j < n && evs[j].cluster == evs[i].cluster {
                    j += 1;
                }
                terms.push(diffs[i..j].iter().sum());
                if j - i >= 2 {
                    trail.push(diffs[j - 1]);
                }
                i = j;
            }
            Ok(PairedSeries {
                terms,
                correction: -0.5 * cesaro_of_partial_sums(&trail).estimate,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cr(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn alternating_ones() {
        let terms: Vec<C> = (1..=1000).map(|j| cr(if j % 2 == 1 { 1.0 } else { -1.0 })).collect();
        let r = cesaro(&terms);
        assert!((r.estimate - cr(0.5)).norm() < 2e-3);
        assert!(r.diagnostic < 2e-3);
        assert!(r.diagnostic > 0.0);
    }

    #[test]
    fn cosine_series_matches_kernel_form() {
        // Partial sums of sum cos(j theta) have the closed form
        // -1/2 + sin((k+1/2)theta) / (2 sin(theta/2)); their means
        // tend to -1/2.
        let theta: f64 = 1.0;
        let k = 4000;
        let terms: Vec<C> = (1..=k).map(|j| cr((j as f64 * theta).cos())).collect();
        let r = cesaro(&terms);
        for (i, s) in r.partial_sums.iter().enumerate() {
            let kk = (i + 1) as f64;
            let closed = -0.5 + ((kk + 0.5) * theta).sin() / (2.0 * (theta / 2.0).sin());
            assert!(
                (s - cr(closed)).norm() < 1e-9,
                "partial sum {i} drifted from closed form"
            );
        }
        assert!((r.estimate - cr(-0.5)).norm() < 2.0 / k as f64);
    }

    #[test]
    fn regular_on_convergent_series() {
        // Mean-value summation of a convergent series reproduces the sum at
        // rate O(1/K): the deficit is the averaged tail sum.
        let k = 10_000;
        let terms: Vec<C> = (1..=k).map(|j| cr(3.0f64.powi(-(j as i32)))).collect();
        let direct: C = terms.iter().sum();
        let r = cesaro(&terms);
        assert!((r.estimate - direct).norm() < 1.0 / k as f64);
        // A series whose early partial sums straddle the limit symmetrically
        // is reproduced to machine precision.
        let mut exact: Vec<C> = vec![cr(2.0), cr(-2.0), cr(1.0)];
        exact.extend(std::iter::repeat_n(cr(0.0), 997));
        let r = cesaro(&exact);
        assert!((r.estimate - cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn rebracketing_identities_alternating() {
        // For a_k = (-1)^k both bracketings reproduce the mean-value sum
        // -1/2 exactly at every length; the direct estimate carries O(1/K).
        let k = 2001;
        let terms: Vec<C> = (1..=k).map(|j| cr(if j % 2 == 0 { 1.0 } else { -1.0 })).collect();
        let direct = cesaro(&terms).estimate;
        let (_, even) = rebracket_even(&terms).evaluate();
        let (_, odd) = rebracket_odd(&terms).evaluate();
        assert!((even - cr(-0.5)).norm() < 1e-12);
        assert!((odd - cr(-0.5)).norm() < 1e-12);
        assert!((direct - cr(-0.5)).norm() < 2.0 / k as f64);
    }

    #[test]
    fn rebracketing_identities_oscillating_decaying() {
        let k = 4000;
        let theta: f64 = 2.3;
        let terms: Vec<C> = (1..=k)
            .map(|j| {
                let x = j as f64;
                cr((theta * x).cos() + (theta * x).sin() / x)
            })
            .collect();
        let direct = cesaro(&terms).estimate;
        let (_, even) = rebracket_even(&terms).evaluate();
        let (_, odd) = rebracket_odd(&terms).evaluate();
        assert!((even - direct).norm() < 5e-3);
        assert!((odd - direct).norm() < 5e-3);
        assert!((even - odd).norm() < 5e-3);
    }

    fn synthetic(lams: &[(f64, usize)], kind: crate::spectrum::Provenance) -> Spectrum {
        let eigenvalues = lams
            .iter()
            .enumerate()
            .map(|(i, &(l, cluster))| crate::spectrum::Eigenvalue {
                lambda: cr(l),
                z: cr(l.max(0.0).sqrt()),
                index: i + 1,
                multiplicity: 1,
                jordan: false,
                cluster,
            })
            .collect();
        Spectrum { eigenvalues, provenance: kind }
    }

    #[test]
    fn pairing_identity_when_strongly_regular() {
        use crate::spectrum::Provenance::{Perturbed, Unperturbed};
        let s0 = synthetic(&[(1.0, 1), (4.0, 2), (9.0, 3), (16.0, 4)], Unperturbed);
        let sq = synthetic(&[(1.4, 1), (4.5, 2), (9.3, 3), (16.2, 4)], Perturbed);
        let p = pair_terms(&s0, &sq, RegularityClass::StronglyRegular, cr(0.1)).unwrap();
        assert_eq!(p.terms.len(), 4);
        assert!((p.terms[0] - cr(0.3)).norm() < 1e-12);
        assert_eq!(p.correction, cr(0.0));
    }

    #[test]
    fn pairing_merges_clusters_and_keeps_lone_first_term() {
        use crate::spectrum::Provenance::{Perturbed, Unperturbed};
        // Lone root, then pairs: output length (input - 1)/2 + 1.
        let s0 = synthetic(
            &[(0.5, 1), (39.0, 2), (40.0, 2), (157.0, 3), (158.0, 3)],
            Unperturbed,
        );
        let sq = synthetic(
            &[(1.0, 1), (39.2, 2), (40.3, 2), (157.1, 3), (158.4, 3)],
            Perturbed,
        );
        let p = pair_terms(&s0, &sq, RegularityClass::RegularNotStrong, cr(0.0)).unwrap();
        assert_eq!(p.terms.len(), 3);
        assert!((p.terms[0] - cr(0.5)).norm() < 1e-12);
        assert!((p.terms[1] - cr(0.5)).norm() < 1e-12);
        // Correction reports -(1/2) mean of the trailing pair members.
        assert!((p.correction - cr(-0.5 * (0.3 + 0.4) / 2.0)).norm() < 1e-12);
        // Prefix-sum preservation over whole clusters.
        let total: C = p.terms.iter().sum();
        let direct: C = sq
            .eigenvalues
            .iter()
            .zip(&s0.eigenvalues)
            .map(|(a, b)| a.lambda - b.lambda)
            .sum();
        assert!((total - direct).norm() < 1e-12);
    }

    #[test]
    fn pairing_rejects_cluster_drift() {
        use crate::spectrum::Provenance::{Perturbed, Unperturbed};
        let s0 = synthetic(&[(1.0, 1), (4.0, 2), (9.0, 3)], Unperturbed);
        let sq = synthetic(&[(1.0, 1), (4.0, 2), (9.0, 4)], Perturbed);
        match pair_terms(&s0, &sq, RegularityClass::StronglyRegular, cr(0.0)) {
            Err(Error::ClusterMismatch { index: 2, .. }) => {}
            other => panic!("expected cluster mismatch, got {other:?}"),
        }
        // A tail difference on the order of the eigenvalue spacing is an
        // off-by-one, not a perturbation.
        let big = synthetic(&[(1.0, 1), (4.0, 2), (39.0, 3)], Perturbed);
        assert!(pair_terms(&s0, &big, RegularityClass::StronglyRegular, cr(0.0)).is_err());
    }

    #[test]
    fn empty_and_short_inputs() {
        assert_eq!(cesaro(&[]).terms_used, 0);
        let one = cesaro(&[cr(3.0)]);
        assert!((one.estimate - cr(3.0)).norm() < 1e-15);
        let p = rebracket_odd(&[cr(1.0)]);
        assert_eq!(p.terms.len(), 1);
        assert_eq!(p.correction.norm(), 0.0);
    }

    proptest! {
        #[test]
        fn pairing_preserves_prefix_sums(xs in proptest::collection::vec(-1.0f64..1.0, 3..60)) {
            let terms: Vec<C> = xs.iter().map(|&x| cr(x)).collect();
            let p = rebracket_odd(&terms);
            // Prefix of p covering 2m+1 original terms has the same sum.
            let m = p.terms.len() - 1;
            let lhs: C = p.terms.iter().sum();
            let rhs: C = terms[..(2 * m + 1).min(terms.len())].iter().sum();
            prop_assert!((lhs - rhs).norm() < 1e-12);

            let pe = rebracket_even(&terms);
            let lhs: C = pe.terms.iter().sum();
            let rhs: C = terms[..2 * pe.terms.len()].iter().sum();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn second_mean_close_to_estimate_on_convergent(xs in proptest::collection::vec(-1.0f64..1.0, 50..100)) {
            let terms: Vec<C> = xs.iter().enumerate().map(|(i, &x)| cr(x / (1.0 + i as f64).powi(2))).collect();
            let r = cesaro(&terms);
            prop_assert!((r.second_mean - r.estimate).norm() < 1.0);
        }
    }
}
