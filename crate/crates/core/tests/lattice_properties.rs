//! Reduction invariants over random bases.

use num_complex::Complex64;
use proptest::prelude::*;
use torus_core::Lattice;

fn unimodular() -> impl Strategy<Value = [[i64; 2]; 2]> {
    prop::collection::vec((0..3u8, -3i64..=3), 1..6).prop_map(|moves| {
        let mut u = [[1i64, 0], [0, 1]];
        for (kind, k) in moves {
            let s = match kind {
                0 => [[1, k], [0, 1]],
                1 => [[1, 0], [k, 1]],
                _ => [[0, -1], [1, 0]],
            };
            u = [
                [s[0][0] * u[0][0] + s[0][1] * u[1][0], s[0][0] * u[0][1] + s[0][1] * u[1][1]],
                [s[1][0] * u[0][0] + s[1][1] * u[1][0], s[1][0] * u[0][1] + s[1][1] * u[1][1]],
            ];
        }
        u
    })
}

fn basis() -> impl Strategy<Value = Lattice<f64>> {
    (0.3f64..3.0, 0.0f64..std::f64::consts::TAU, -0.5f64..0.5, 0.6f64..2.5).prop_filter_map("degenerate", |(r, angle, re, im)| {
        let z = Complex64::from_polar(r, angle);
        let w = z * Complex64::new(re, im);
        Lattice::new([z.re, z.im], [w.re, w.im]).ok()
    })
}

proptest! {
    #[test]
    fn reduced_tau_lies_in_fundamental_domain(l in basis()) {
        let tau = l.reduce().tau;
        prop_assert!(tau.im > 0.0);
        prop_assert!(tau.re.abs() <= 0.5 + 1e-12);
        prop_assert!(tau.norm() >= 1.0 - 1e-12);
    }

    #[test]
    fn reduction_ignores_basis_choice(l in basis(), u in unimodular()) {
        let m = l.transformed(u).unwrap();
        let (a, b) = (l.reduce(), m.reduce());
        prop_assert!((a.tau - b.tau).norm() <= 1e-9, "{} vs {}", a.tau, b.tau);
        prop_assert!((a.scale - b.scale).abs() <= 1e-9 * a.scale);
        prop_assert!((l.covolume() - m.covolume()).abs() <= 1e-9 * l.covolume());
    }

    #[test]
    fn reduced_basis_spans_the_lattice(l in basis()) {
        let [v1, v2] = l.reduce().basis();
        let [b1, b2] = l.basis();
        let det = b1[0] * b2[1] - b1[1] * b2[0];
        for v in [v1, v2] {
            let m = (v[0] * b2[1] - v[1] * b2[0]) / det;
            let n = (b1[0] * v[1] - b1[1] * v[0]) / det;
            prop_assert!((m - m.round()).abs() < 1e-8 && (n - n.round()).abs() < 1e-8);
        }
        let cov = (v1[0] * v2[1] - v1[1] * v2[0]).abs();
        prop_assert!((cov - l.covolume()).abs() <= 1e-9 * l.covolume());
    }

    #[test]
    fn hermite_ratio_is_bounded(l in basis()) {
        prop_assert!(l.hermite_ratio() <= 2.0 / 3f64.sqrt() + 1e-12);
        let minima = l.successive_minima();
        prop_assert!(minima.lambda1 <= minima.lambda2 * (1.0 + 1e-15));
    }

    #[test]
    fn shortest_vector_beats_every_small_combination(l in basis()) {
        let lambda1 = l.successive_minima().lambda1;
        for m in -6..=6i64 {
            for n in -6..=6i64 {
                if (m, n) != (0, 0) {
                    prop_assert!(l.flat_length(m, n) >= lambda1 * (1.0 - 1e-12));
                }
            }
        }
    }
}
