//! Coefficient-space discrepancy and norms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mercer::SeriesFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub terms_used: usize,
}

/// `sqrt( sum_j (theta_j - omega_j)^2 / mu_j^2 )` over `j <= max(T_f, T_g)`.
pub fn discrepancy(f: &SeriesFunction, g: &SeriesFunction) -> Result<DiscrepancyResult> {
    if f.spec() != g.spec() {
        return Err(invalid("g", "functions use different eigensystems"));
    }
    let spec = f.spec();
    let terms = f.len().max(g.len());
    let sum: f64 = (1..=terms)
        .map(|j| {
            let d = f.coeff(j) - g.coeff(j);
            let mu = spec.eigenvalue(j);
            (d / mu) * (d / mu)
        })
        .sum();
    Ok(DiscrepancyResult {
        value: sum.sqrt(),
        terms_used: terms,
    })
}

/// `sum_j c_j^2 / mu_j`
pub fn rkhs_norm2(f: &SeriesFunction) -> f64 {
    let spec = f.spec();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * c / spec.eigenvalue(i + 1))
        .sum()
}

/// `sum_j c_j^2`
pub fn l2_norm2(f: &SeriesFunction) -> f64 {
    f.coeffs().iter().map(|c| c * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mercer::{make_series, EigenSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h1() -> EigenSpec {
        EigenSpec::on_default_domain(2.0, 100).unwrap()
    }

    #[test]
    fn matched_row_is_exactly_zero() {
        let spec = h1();
        let f = make_series(&spec, 0.8, 100).unwrap();
        let g = make_series(&spec, 0.8, 100).unwrap();
        let d = discrepancy(&f, &g).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.terms_used, 100);
    }

    #[test]
    fn single_term() {
        // mu_1 = 2^(-2r) = 0.5 for r = 0.5
        let spec = EigenSpec::on_default_domain(0.5, 4).unwrap();
        let f = SeriesFunction::new(spec, vec![1.0]).unwrap();
        let g = SeriesFunction::zero(spec);
        assert_relative_eq!(discrepancy(&f, &g).unwrap().value, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mismatch_rows_match_extended_precision_sums() {
        let spec = h1();
        let f = make_series(&spec, 0.8, 100).unwrap();
        let g = make_series(&spec, 1.5, 10).unwrap();
        let d = discrepancy(&f, &g).unwrap();
        assert_relative_eq!(d.value, 273535.0701575769623603, max_relative = 1e-12);
        let g2 = make_series(&spec, 2.5, 10).unwrap();
        assert_relative_eq!(
            discrepancy(&f, &g2).unwrap().value,
            273535.1071208353685522,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mismatched_specs_rejected() {
        let a = SeriesFunction::zero(h1());
        let b = SeriesFunction::zero(EigenSpec::on_default_domain(1.0, 100).unwrap());
        assert!(discrepancy(&a, &b).is_err());
    }

    #[test]
    fn norms() {
        let spec = EigenSpec::on_default_domain(1.0, 4).unwrap();
        let z = SeriesFunction::zero(spec);
        assert_eq!(rkhs_norm2(&z), 0.0);
        assert_eq!(l2_norm2(&z), 0.0);
        let one = SeriesFunction::new(spec, vec![1.0]).unwrap();
        assert_eq!(rkhs_norm2(&one), 4.0);
        let spec2 = EigenSpec::on_default_domain(2.0, 4).unwrap();
        assert_eq!(rkhs_norm2(&SeriesFunction::new(spec2, vec![1.0]).unwrap()), 16.0);
        assert_eq!(l2_norm2(&SeriesFunction::new(spec, vec![3.0, 4.0]).unwrap()), 25.0);
    }

    fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, len)
    }

    proptest! {
        #[test]
        fn discrepancy_is_a_metric(a in coeffs(8), b in coeffs(5), c in coeffs(8), r in 0.5f64..3.0) {
            let spec = EigenSpec::on_default_domain(r, 8).unwrap();
            let f = SeriesFunction::new(spec, a).unwrap();
            let g = SeriesFunction::new(spec, b).unwrap();
            let h = SeriesFunction::new(spec, c).unwrap();
            let fg = discrepancy(&f, &g).unwrap().value;
            prop_assert_eq!(fg, discrepancy(&g, &f).unwrap().value);
            let fh = discrepancy(&f, &h).unwrap().value;
            let gh = discrepancy(&g, &h).unwrap().value;
            prop_assert!(fh <= (fg + gh) * (1.0 + 1e-12));
        }

        #[test]
        fn discrepancy_scales(a in coeffs(6), b in coeffs(6), s in -5.0f64..5.0) {
            let spec = EigenSpec::on_default_domain(1.5, 6).unwrap();
            let f = SeriesFunction::new(spec, a).unwrap();
            let g = SeriesFunction::new(spec, b).unwrap();
            let base = discrepancy(&f, &g).unwrap().value;
            let scaled = discrepancy(&f.scaled(s), &g.scaled(s)).unwrap().value;
            prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn norm_sandwich(a in coeffs(10), r in 0.5f64..3.0) {
            let spec = EigenSpec::on_default_domain(r, 10).unwrap();
            let f = SeriesFunction::new(spec, a).unwrap();
            let l2 = l2_norm2(&f);
            let h = rkhs_norm2(&f);
            prop_assert!(h >= l2 / spec.eigenvalue(1) * (1.0 - 1e-12));
            prop_assert!(h <= l2 / spec.eigenvalue(10) * (1.0 + 1e-12));
        }
    }
}
