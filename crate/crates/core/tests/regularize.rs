use std::f64::consts::PI;

use oscillab_core::coefficients::{
    check_ellipticity, estimate_space_modulus, make_family, Coefficient, CoefficientField, FamilyParams,
    SamplingPlan, SpaceProfile,
};
use oscillab_core::regularize::{
    cutoff_theta, envelope_constants, f_weight, mollify_time, phi, truncate_time, QuadratureSpec,
    RegularizedCoefficient,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn bases() -> Vec<CoefficientField> {
    vec![
        make_family("yamazaki-osc", &FamilyParams { profile: SpaceProfile::Sin, ..Default::default() }).unwrap(),
        make_family("yamazaki-osc", &FamilyParams { profile: SpaceProfile::Weierstrass, terms: 12, ..Default::default() }).unwrap(),
        make_family("delta-osc", &FamilyParams::default()).unwrap(),
        make_family(
            "yamazaki-osc",
            &FamilyParams { dim: 2, profile: SpaceProfile::ShiftedSin, coupling: 0.2, ..Default::default() },
        )
        .unwrap(),
    ]
}

#[test]
fn regularized_equals_base_late_and_frozen_early() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for base in bases() {
        for nu in [2, 5, 9] {
            let reg = RegularizedCoefficient::for_block(&base, nu, &quad()).unwrap();
            let eps = reg.eps;
            for _ in 0..200 {
                let x = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
                let late = rng.random_range(2.0 * eps..base.t_final);
                assert!((reg.eval(late, &x, 0, 0) - base.eval(late, &x, 0, 0)).abs() <= 1e-10);
                assert!((reg.eval_dt(late, &x, 0, 0) - base.eval_dt(late, &x, 0, 0)).abs() <= 1e-10 / late);
                let early = rng.random_range(0.0..0.5 * eps);
                assert!((reg.eval(early, &x, 0, 0) - base.eval(eps, &x, 0, 0)).abs() <= 1e-10);
                assert_eq!(reg.eval_dt(early, &x, 0, 0), 0.0);
            }
        }
    }
}

#[test]
fn blend_matches_explicit_mollification_where_cutoff_is_one() {
    for base in bases() {
        let eps = 1.0 / 32.0;
        let reg = RegularizedCoefficient::new(&base, eps, &quad()).unwrap();
        let moll = mollify_time(truncate_time(&base, eps).unwrap(), &quad());
        let x = [0.7, 1.3];
        for i in 0..=20 {
            let t = 0.5 * eps * i as f64 / 20.0;
            let (a, b) = (reg.eval(t, &x, 0, 0), moll.eval(t, &x, 0, 0));
            assert!((a - b).abs() < 1e-12, "{} t = {t}: {a} vs {b}", base.name);
            let (a, b) = (reg.eval_dt(t, &x, 0, 0), moll.eval_dt(t, &x, 0, 0));
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{} t = {t}: {a} vs {b}", base.name);
        }
    }
}

#[test]
fn regularization_preserves_ellipticity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for base in bases() {
        for nu in [1, 4, 10] {
            let reg = RegularizedCoefficient::for_block(&base, nu, &quad()).unwrap();
            for _ in 0..1000 {
                let t = rng.random_range(0.0..base.t_final);
                let x = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
                let xi: f64 = rng.random_range(0.0..2.0 * PI);
                let v = [xi.cos(), xi.sin()];
                let n = base.dim;
                let mut q = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        q += reg.eval(t, &x, j, k) * v[j] * v[k];
                    }
                }
                let norm: f64 = v[..n].iter().map(|c| c * c).sum();
                assert!(q >= base.lambda0 * norm - 1e-12 && q <= base.big_lambda0 * norm + 1e-12);
            }
            let plan = SamplingPlan::coarse(base.dim, base.t_final);
            check_ellipticity(&reg, &plan).unwrap();
        }
    }
}

#[test]
fn regularization_does_not_worsen_space_modulus() {
    for base in bases() {
        let ell = base.ell;
        let plan = SamplingPlan::coarse(base.dim, base.t_final);
        let m0 = estimate_space_modulus(&base, ell, &plan);
        for nu in [2, 6, 10] {
            let reg = RegularizedCoefficient::for_block(&base, nu, &quad()).unwrap();
            let m = estimate_space_modulus(&reg, ell, &plan);
            assert!(m <= 2.0 * m0 + 1e-12, "{} nu = {nu}: {m} vs {m0}", base.name);
        }
    }
}

#[test]
fn envelope_constants_are_uniform_in_nu() {
    let points = SamplingPlan::quasi_random_points(16);
    for base in bases() {
        if base.delta > 0.0 {
            continue;
        }
        let mut c1 = Vec::new();
        let mut c3 = Vec::new();
        for nu in 1..=10 {
            let reg = RegularizedCoefficient::for_block(&base, nu, &quad()).unwrap();
            let eps = reg.eps;
            let mut times: Vec<f64> = (0..=400).map(|i| 3.0 * eps * i as f64 / 400.0).collect();
            times.extend(SamplingPlan::log_times(base.t_final, 4, 50));
            let e = envelope_constants(&reg, &times, &points);
            assert_eq!(e.leak, 0.0);
            c1.push(e.c1);
            c3.push(e.c3);
        }
        for c in [&c1, &c3] {
            let (lo, hi) = c.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            assert!(hi <= 10.0 * lo, "{}: spread {lo}..{hi}", base.name);
        }
    }
}

#[test]
fn phi_examples_and_shape() {
    let p = phi(0.25).unwrap();
    assert_eq!(p.eval(0.1), 0.0);
    assert_eq!(p.eval(0.125), 0.0);
    assert_eq!(p.eval(0.5), 2.0);
    assert!(phi(0.0).is_err());
    assert!(phi(-1.0).is_err());
    for nu in 0..=12 {
        let eps = 0.5f64.powi(nu);
        let p = phi(eps).unwrap();
        let scale = 0.5f64.powi(nu);
        let max = (1..=4000).map(|i| p.eval(2.0 * eps * i as f64 / 4000.0)).fold(0.0, f64::max);
        assert!(max * scale <= 2.0, "nu = {nu}: {max}");
    }
}

#[test]
fn phi_is_twice_differentiable() {
    let eps = 0.1;
    let p = phi(eps).unwrap();
    // second differences at h and h/2 scale like h^2 when the function is C^2
    for &t in &[0.05, 0.0500001, 0.07, 0.1, 0.1000001, 0.2] {
        let d2 = |h: f64| p.eval(t + h) - 2.0 * p.eval(t) + p.eval(t - h);
        let (a, b) = (d2(1e-4), d2(5e-5));
        assert!(b.abs() <= 0.3 * a.abs() + 1e-12, "t = {t}: {a} {b}");
    }
}

#[test]
fn f_weight_refined_quadrature() {
    // phi_3^2 / 8 plus the block indicator, integrated with a fine midpoint rule
    let nu = 3;
    let t = 1.0;
    let p = phi(0.125).unwrap();
    let n = 2_000_000;
    let h = t / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let s = (i as f64 + 0.5) * h;
        sum += p.eval(s).powi(2) / 8.0 + if s <= 0.25 { 8.0 } else { 0.0 };
    }
    sum *= h;
    let f = f_weight(nu, t, &quad());
    assert!((f - sum).abs() < 1e-6, "{f} vs {sum}");
}

#[test]
fn mollification_is_converged_in_quadrature_nodes() {
    for base in bases() {
        let eps = 1.0 / 64.0;
        let coarse = mollify_time(truncate_time(&base, eps).unwrap(), &QuadratureSpec::new(96).unwrap());
        let fine = mollify_time(truncate_time(&base, eps).unwrap(), &QuadratureSpec::new(960).unwrap());
        let x = [1.1, 0.4];
        let t = 3.0 * eps;
        let (a, b) = (coarse.eval(t, &x, 0, 0), fine.eval(t, &x, 0, 0));
        assert!((a - b).abs() < 1e-9, "{}: {a} vs {b}", base.name);
    }
}

#[test]
fn cutoff_examples() {
    let c = cutoff_theta(0.5).unwrap();
    assert_eq!(c.eval(0.0), 1.0);
    assert_eq!(c.eval(0.25), 1.0);
    assert_eq!(c.eval(1.0), 0.0);
    assert!(c.eval(0.5) > 0.0 && c.eval(0.5) < 1.0);
    assert!(cutoff_theta(0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn f_weight_is_bounded_and_nondecreasing(nu in 0usize..=12, t in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let q = quad();
        let (a, b) = (f_weight(nu, t, &q), f_weight(nu, t + dt, &q));
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-14);
        prop_assert!(b <= 4.0);
    }

    #[test]
    fn phi_is_nonnegative_and_below_one_over_t(log_eps in -10.0f64..0.0, s in 0.0f64..10.0) {
        let eps = 2f64.powf(log_eps);
        let t = s * eps;
        let v = phi(eps).unwrap().eval(t);
        prop_assert!(v >= 0.0);
        if t > 0.0 {
            prop_assert!(v <= 1.0 / t + 1e-15);
        }
        if t >= eps {
            prop_assert!((v - 1.0 / t).abs() <= 1e-12 / t);
        }
    }

    #[test]
    fn cutoff_is_monotone(eps in 1e-4f64..1.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let c = cutoff_theta(eps).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(c.eval(hi * eps) <= c.eval(lo * eps));
        prop_assert!((0.0..=1.0).contains(&c.eval(a * eps)));
    }
}
