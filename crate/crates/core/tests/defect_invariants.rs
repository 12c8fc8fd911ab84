//! Structural invariants of defect reports on random metrics.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use torus_core::{analyze, l1_norm, Grid, Lattice, PeriodicField, TorusMetric, TrigFamily, TrigTerm};

const N: usize = 32;

fn random_family(rng: &mut impl Rng) -> TrigFamily {
    let terms = (0..rng.gen_range(1..=3))
        .map(|_| TrigTerm {
            mx: rng.gen_range(-3..=3),
            my: rng.gen_range(0..=3),
            amp: rng.gen_range(0.0..0.15),
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    TrigFamily { terms, offset: 1.0 }
}

fn random_lattice(rng: &mut impl Rng) -> Lattice<f64> {
    loop {
        let tau = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.85..1.6));
        if tau.norm() > 1.0 {
            return Lattice::from_tau(tau).unwrap();
        }
    }
}

#[test]
fn pass_flags_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let m = TorusMetric::from_factor(random_family(&mut rng).sample(N, N, random_lattice(&mut rng)).unwrap()).unwrap();
        let (_, base) = analyze(&m).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let (sys, r) = analyze(&m.scale(c).unwrap()).unwrap();
            assert!((sys.upper - c * base.sys_upper).abs() <= 1e-6 * c * base.sys_upper, "{c}: {} vs {}", sys.upper, c * base.sys_upper);
            for ((name, a), (_, b)) in base.all_rows().iter().zip(r.all_rows().iter()) {
                assert_eq!(a.pass, b.pass, "{name} at scale {c}");
                assert_eq!(a.strong_pass, b.strong_pass, "{name} at scale {c}");
            }
        }
    }
}

#[test]
fn hermite_lhs_dominates_sigma_lhs() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let m = TorusMetric::from_factor(random_family(&mut rng).sample(N, N, random_lattice(&mut rng)).unwrap()).unwrap();
        let (_, r) = analyze(&m).unwrap();
        assert!(r.sigma_sq >= 3f64.sqrt() / 2.0 - 1e-12);
        assert!(r.loewner_defect.lhs.unwrap() >= r.sigma_defect.lhs.unwrap() - 1e-12);
        assert!(!r.has_violation());
    }
}

#[test]
fn one_variable_square_form_is_the_weaker_margin() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (amp, k, phase) = (rng.gen_range(0.05..0.5), rng.gen_range(1..=4) as f64, rng.gen_range(0.0..TAU));
        let f = PeriodicField::from_fn(N, N, Lattice::square(), |_, y: f64| 1.0 + amp * (TAU * k * y + phase).sin()).unwrap();
        let (sys, r) = analyze(&TorusMetric::from_factor(f).unwrap()).unwrap();
        let (second, nosys) = (r.one_var_second.margin.unwrap(), r.one_var_nosys.margin.unwrap());
        // expanding the square leaves a cross term -sys |f0|_1
        assert!(second <= nosys + 1e-12);
        assert!((nosys - second - sys.upper * r.centered_l1).abs() <= 1e-12);
        assert!(r.one_var_second.pass.unwrap() && r.one_var_nosys.pass.unwrap());
    }
}

#[test]
fn biaxial_chain_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..10 {
        let m = TorusMetric::from_factor(random_family(&mut rng).sample(N, N, Lattice::<f64>::square()).unwrap()).unwrap();
        let (sys, r) = analyze(&m).unwrap();
        let parts = m.factor().biaxial_decompose().unwrap();
        let (g, h) = (parts.g_grid(), parts.h_grid());
        let (g1, h1) = (l1_norm(&g), l1_norm(&h));
        let p1 = r.projection_l1.unwrap();
        // the larger single-axis part carries at least half of |P|_1
        assert!(g1.max(h1) >= 0.5 * p1 - 1e-12);
        // averaged factor along that axis, systole min of the averaged line
        let (bar, bar_l1) = if h1 >= g1 { (m.factor().samples().row_means(), h1) } else { (m.factor().samples().col_means(), g1) };
        let bar_sys = bar.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(r.mean >= bar_sys + 0.5 * bar_l1 - 1e-12);
        assert!(bar_sys + 0.5 * bar_l1 >= sys.upper - sys.err + 0.25 * p1 - 1e-12);
        for name in ["biaxial_axis_share", "averaged_systole", "averaged_mean_gap", "biaxial_mean_gap"] {
            let check = r.checks.iter().find(|c| c.name == name).unwrap();
            assert!(check.row.pass.unwrap(), "{name}");
        }
        assert_eq!(Grid::new(N, N, m.factor().samples().data().to_vec()).unwrap(), *m.factor().samples());
    }
}
