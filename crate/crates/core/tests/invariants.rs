use num_complex::Complex64;
use proptest::prelude::*;

use siegel::geometry::{
    automorphism, bergman_kernel, bergman_metric, dilate, inverse_automorphism, normalized_kernel_sq, rho, rho_form,
    SiegelPoint,
};
use siegel::measures::{Atom, AtomicMeasure};
use siegel::schatten::{gram_matrix, schatten_norm, spectrum};

fn point(n: usize) -> impl Strategy<Value = SiegelPoint> {
    (
        prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5), n - 1),
        -3.0f64..3.0,
        -2.0f64..1.0,
    )
        .prop_map(|(zp, x, log_h)| {
            let zp: Vec<Complex64> = zp.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            let lift: f64 = zp.iter().map(|c| c.norm_sqr()).sum();
            SiegelPoint::from_parts(&zp, Complex64::new(x, 10f64.powf(log_h) + lift)).unwrap()
        })
}

fn triple() -> impl Strategy<Value = (SiegelPoint, SiegelPoint, SiegelPoint)> {
    (1usize..=3).prop_flat_map(|n| (point(n), point(n), point(n)))
}

fn measure() -> impl Strategy<Value = AtomicMeasure> {
    (1usize..=2).prop_flat_map(|n| {
        prop::collection::vec((point(n), 0.1f64..3.0), 1..6).prop_map(move |atoms| {
            let atoms = atoms
                .into_iter()
                .map(|(point, weight)| Atom { point, weight })
                .collect();
            AtomicMeasure::new(n, atoms).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn metric_is_symmetric_and_invariant((z, u, v) in triple()) {
        let d = bergman_metric(&u, &v).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - bergman_metric(&v, &u).unwrap()).abs() <= 1e-10 * (1.0 + d));
        let du = bergman_metric(&automorphism(&z, &u).unwrap(), &automorphism(&z, &v).unwrap()).unwrap();
        prop_assert!((d - du).abs() <= 1e-9 * (1.0 + d));
        let dd = bergman_metric(&dilate(1.7, &u).unwrap(), &dilate(1.7, &v).unwrap()).unwrap();
        prop_assert!((d - dd).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn metric_triangle_inequality((z, u, v) in triple()) {
        let a = bergman_metric(&z, &u).unwrap();
        let b = bergman_metric(&u, &v).unwrap();
        let c = bergman_metric(&z, &v).unwrap();
        prop_assert!(c <= a + b + 1e-9);
    }

    #[test]
    fn automorphism_round_trip((z, u, _v) in triple()) {
        let back = inverse_automorphism(&z, &automorphism(&z, &u).unwrap()).unwrap();
        for (a, b) in back.coords().iter().zip(u.coords()) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
        }
        let centre = automorphism(&z, &z).unwrap();
        prop_assert!((rho(&centre) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_is_hermitian_and_bounded((_z, u, v) in triple()) {
        let kuv = bergman_kernel(&u, &v).unwrap();
        let kvu = bergman_kernel(&v, &u).unwrap();
        prop_assert!((kuv - kvu.conj()).norm() <= 1e-12 * kuv.norm().max(1e-300));
        let kuu = bergman_kernel(&u, &u).unwrap().re;
        let kvv = bergman_kernel(&v, &v).unwrap().re;
        prop_assert!(kuv.norm_sqr() <= kuu * kvv * (1.0 + 1e-12));
        let nk = normalized_kernel_sq(&u, &v).unwrap();
        prop_assert!((nk - kuv.norm_sqr() / kuu).abs() <= 1e-10 * nk.max(1e-300));
        prop_assert!((rho_form(&u, &u).unwrap().re - rho(&u)).abs() <= 1e-12 * (1.0 + rho(&u)));
    }

    #[test]
    fn schatten_norms_decrease_in_p(mu in measure()) {
        let g = gram_matrix(&mu).unwrap();
        let sp = spectrum(&g).unwrap();
        let ps = [0.5, 1.0, 1.5, 2.0, 4.0];
        let norms: Vec<f64> = ps.iter().map(|&p| schatten_norm(&sp, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        prop_assert!((norms[1] - g.trace()).abs() <= 1e-9 * g.trace());
        prop_assert!((norms[3] - g.frobenius_norm()).abs() <= 1e-9 * g.frobenius_norm());
    }
}
