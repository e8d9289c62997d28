use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use wocr::criteria::{degrees_of_freedom, sse_closed_form};
use wocr::weights::weights;
use wocr::{
    extract_components, standardize, ComponentOrdering, TuningParams, WeightFamily, WeightSpec,
};

fn design(max_n: usize, max_p: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (4..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-3.0..3.0f64, n * p),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(xv, yv)| (DMatrix::from_vec(n, p, xv), DVector::from_vec(yv)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardize_round_trips((x, y) in design(12, 6)) {
        let Ok((xs, yc, st)) = standardize(&x, &y) else { return Ok(()) };
        let back = st.inverse_transform_x(&xs).unwrap();
        prop_assert!((back - &x).amax() < 1e-9);
        prop_assert!((st.restore_y(&yc) - &y).amax() < 1e-12);
        let n = x.nrows() as f64;
        for j in 0..xs.ncols() {
            let col = xs.column(j);
            prop_assert!(col.sum().abs() < 1e-9);
            // sample standard deviation is 1
            prop_assert!((col.norm_squared() / (n - 1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_consistent((x, y) in design(14, 8)) {
        let Ok((xs, yc, _)) = standardize(&x, &y) else { return Ok(()) };
        let b = extract_components(&xs, &yc, 1e-8).unwrap();
        let m = b.rank();
        prop_assert!((b.u().tr_mul(b.u()) - DMatrix::identity(m, m)).amax() < 1e-9);
        prop_assert!((b.v().tr_mul(b.v()) - DMatrix::identity(m, m)).amax() < 1e-9);
        prop_assert!((&xs * b.v() - b.u() * DMatrix::from_diagonal(b.d())).amax() < 1e-8);
        prop_assert!(b.d().as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((b.u().tr_mul(&yc) - b.gamma()).amax() < 1e-12);
        prop_assert!(m <= (x.nrows() - 1).min(x.ncols()));
    }

    #[test]
    fn projection_matches_qr((x, y) in design(14, 5)) {
        let Ok((xs, yc, _)) = standardize(&x, &y) else { return Ok(()) };
        let b = extract_components(&xs, &yc, 1e-8).unwrap();
        if b.rank() < xs.ncols() || xs.ncols() >= xs.nrows() - 1 {
            return Ok(());
        }
        // full-rank least squares by QR
        let qr = xs.clone().qr();
        let q = qr.q();
        let proj_qr = &q * q.tr_mul(&yc);
        let ones = DVector::from_element(b.rank(), 1.0);
        prop_assert!((b.fitted(&ones) - proj_qr).amax() < 1e-8);
    }

    #[test]
    fn sse_closed_form_matches_residual(
        (x, y) in design(14, 6),
        ws in prop::collection::vec(0.0..=1.0f64, 6),
    ) {
        let Ok((xs, yc, _)) = standardize(&x, &y) else { return Ok(()) };
        let b = extract_components(&xs, &yc, 1e-8).unwrap();
        let w = DVector::from_iterator(b.rank(), ws.iter().cycle().take(b.rank()).copied());
        let closed = sse_closed_form(&b, w.as_slice(), yc.as_slice()).unwrap();
        let explicit = (&yc - b.fitted(&w)).norm_squared();
        prop_assert!((closed - explicit).abs() <= 1e-9 * (1.0 + explicit));
    }

    #[test]
    fn singular_value_df_is_hat_trace(
        (x, y) in design(12, 5),
        lambda in 0.01..50.0f64,
    ) {
        let Ok((xs, yc, _)) = standardize(&x, &y) else { return Ok(()) };
        let b = extract_components(&xs, &yc, 1e-8).unwrap();
        let spec = WeightSpec::new(
            WeightFamily::RidgeShrink,
            ComponentOrdering::SingularValue,
            TuningParams::ridge(lambda),
        );
        let df = degrees_of_freedom(&spec, &b).unwrap();
        let p = xs.ncols();
        let mut g = xs.tr_mul(&xs);
        for k in 0..p {
            g[(k, k)] += lambda;
        }
        let hat = &xs * g.try_inverse().unwrap() * xs.transpose();
        prop_assert!((df - hat.trace()).abs() < 1e-8 * (1.0 + df));
    }

    #[test]
    fn weights_bounded_and_monotone(
        lambda in 0.0..100.0f64,
        a in 0.01..100.0f64,
        c in -2.0..10.0f64,
        s in prop::collection::vec(0.0..10.0f64, 2..8),
    ) {
        let mut s = s;
        s.sort_by(f64::total_cmp);
        for family in [WeightFamily::RidgeShrink, WeightFamily::Expit] {
            for ordering in [ComponentOrdering::SingularValue, ComponentOrdering::GammaSquared] {
                let params = match family {
                    WeightFamily::RidgeShrink => TuningParams::ridge(lambda),
                    WeightFamily::Expit => TuningParams::expit(a, c),
                };
                let spec = WeightSpec::new(family, ordering, params);
                // feed the sorted statistic through whichever input the ordering reads
                let (d, g): (Vec<f64>, Vec<f64>) = match ordering {
                    ComponentOrdering::SingularValue => (s.clone(), vec![1.0; s.len()]),
                    ComponentOrdering::GammaSquared => (vec![1.0; s.len()], s.iter().map(|v| v.sqrt()).collect()),
                };
                let w = spec.weights_from(&d, &g).unwrap();
                prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(w.windows(2).all(|p| p[0] <= p[1]));
            }
        }
    }

    #[test]
    fn gamma_derivative_matches_finite_difference(
        lambda in 0.05..20.0f64,
        a in 0.05..3.0f64,
        c in 0.0..8.0f64,
        g in 0.1..3.0f64,
    ) {
        for params in [TuningParams::ridge(lambda), TuningParams::expit(a, c)] {
            let family = if params.lambda.is_some() { WeightFamily::RidgeShrink } else { WeightFamily::Expit };
            let spec = WeightSpec::new(family, ComponentOrdering::GammaSquared, params);
            let t = g * g;
            let h = 1e-6 * (1.0 + t);
            let at = |t2: f64| spec.weights_from(&[1.0], &[t2.sqrt()]).unwrap()[0];
            let fd = (at(t + h) - at(t - h)) / (2.0 * h);
            let dw = spec.derivs_from(&[1.0], &[g]).unwrap()[0];
            prop_assert!((fd - dw).abs() < 1e-6 * (1.0 + dw.abs()), "fd {} analytic {}", fd, dw);
        }
    }
}

#[test]
fn rank_drops_with_duplicate_columns() {
    let x = DMatrix::from_fn(10, 3, |i, j| match j {
        0 => i as f64,
        1 => (i * i) as f64,
        _ => 2.0 * i as f64 + 1.0,
    });
    let y = DVector::from_fn(10, |i, _| i as f64);
    let (xs, yc, _) = standardize(&x, &y).unwrap();
    assert_eq!(extract_components(&xs, &yc, 1e-8).unwrap().rank(), 2);
}

#[test]
fn rank_is_monotone_in_tolerance() {
    let x = DMatrix::from_fn(12, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 + 0.01 * (i * j) as f64);
    let y = DVector::from_fn(12, |i, _| i as f64);
    let (xs, yc, _) = standardize(&x, &y).unwrap();
    let mut prev = usize::MAX;
    for tol in [1e-12, 1e-8, 1e-4, 1e-2, 1e-1, 0.5] {
        let m = extract_components(&xs, &yc, tol).unwrap().rank();
        assert!(m <= prev);
        prev = m;
    }
}

#[test]
fn weights_vector_matches_slice_form() {
    let x = DMatrix::from_fn(8, 3, |i, j| (i as f64 + 1.0).powi(j as i32 + 1).ln() + j as f64 * 0.3 * i as f64);
    let y = DVector::from_fn(8, |i, _| (i as f64).sin());
    let (xs, yc, _) = standardize(&x, &y).unwrap();
    let b = extract_components(&xs, &yc, 1e-8).unwrap();
    let spec = WeightSpec::new(WeightFamily::Expit, ComponentOrdering::GammaSquared, TuningParams::expit(2.0, 0.1));
    let w = weights(&spec, &b).unwrap();
    assert_eq!(w.as_slice(), spec.weights_from(b.d().as_slice(), b.gamma().as_slice()).unwrap());
}
