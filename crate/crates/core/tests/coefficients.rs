use std::f64::consts::PI;

use oscillab_core::coefficients::{
    check_ellipticity, check_oscillation_bounds, estimate_space_modulus, make_family, space_modulus_profile,
    Coefficient, CoefficientField, FamilyParams, SamplingPlan, SpaceProfile,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> Vec<CoefficientField> {
    let mut out = Vec::new();
    for dim in [1, 2] {
        let p = |profile, rho, coupling| FamilyParams {
            dim,
            profile,
            rho,
            coupling,
            terms: 6,
            ..Default::default()
        };
        out.push(make_family("constant", &p(SpaceProfile::One, 0.0, 0.0)).unwrap());
        out.push(make_family("yamazaki-osc", &p(SpaceProfile::Sin, 0.5, 0.3)).unwrap());
        out.push(make_family("yamazaki-osc", &p(SpaceProfile::Weierstrass, 0.9, 0.0)).unwrap());
        out.push(make_family("stationary", &p(SpaceProfile::ShiftedSin, 0.2, 0.1)).unwrap());
    }
    for delta in [0.0, 0.5, 1.0] {
        out.push(make_family("delta-osc", &FamilyParams { delta, ..Default::default() }).unwrap());
    }
    out.push(make_family("violator", &FamilyParams::default()).unwrap());
    out
}

#[test]
fn symmetry_and_ellipticity_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for f in families() {
        let n = f.dim();
        for _ in 0..10_000 {
            let t = 10f64.powf(rng.random_range(-8.0..0.0)) * f.t_final();
            let x = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            let a = |j, k| f.eval(t, &x, j, k);
            if n == 2 {
                assert_eq!(a(0, 1), a(1, 0), "{}", f.name);
            }
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let xi = [theta.cos(), if n == 2 { theta.sin() } else { 0.0 }];
            let xi = if n == 1 { [1.0, 0.0] } else { xi };
            let mut q = 0.0;
            for j in 0..n {
                for k in 0..n {
                    q += a(j, k) * xi[j] * xi[k];
                }
            }
            assert!(q >= f.lambda0() - 1e-12 && q <= f.big_lambda0() + 1e-12, "{} q = {q}", f.name);
        }
    }
}

#[test]
fn ellipticity_bounds_of_the_examples() {
    let plan = SamplingPlan::standard(1, 1.0);
    let p = FamilyParams::default();
    let y = check_ellipticity(&make_family("yamazaki-osc", &p).unwrap(), &plan).unwrap();
    assert!((y.lambda_min - 1.5).abs() < 1e-6 && (y.lambda_max - 2.5).abs() < 1e-6);
    let v = check_ellipticity(&make_family("violator", &p).unwrap(), &plan).unwrap();
    assert!((v.lambda_min - 1.5).abs() < 1e-4 && (v.lambda_max - 2.5).abs() < 1e-4);
    assert!(v.lambda_min >= 1.5 - 1e-12 && v.lambda_max <= 2.5 + 1e-12);
}

#[test]
fn declared_oscillation_constants_hold() {
    for f in families() {
        if f.name == "violator" {
            continue;
        }
        let plan = SamplingPlan {
            times: SamplingPlan::log_times(f.t_final(), 8, 100),
            points: SamplingPlan::quasi_random_points(8),
            offsets: vec![],
        };
        let b = check_oscillation_bounds(&f, f.delta, &plan);
        let tol = 1e-9;
        if f.delta == 0.0 {
            assert!(b.sup_t_dta <= f.osc.c1 + tol, "{}: {} > {}", f.name, b.sup_t_dta, f.osc.c1);
            assert!(b.sup_t2_dtta <= f.osc.c3 + tol, "{}", f.name);
        }
        assert!(b.sup_graded <= f.osc.graded_dt + tol, "{}", f.name);
        assert!(b.sup_graded_dtt <= f.osc.graded_dtt + tol, "{}", f.name);
    }
}

fn weierstrass(levels: u32) -> (CoefficientField, SamplingPlan) {
    let f = make_family(
        "stationary",
        &FamilyParams {
            m: 2.0,
            rho: 1.0,
            profile: SpaceProfile::Weierstrass,
            terms: 24,
            ..Default::default()
        },
    )
    .unwrap();
    let mut points = SamplingPlan::quasi_random_points(32);
    points.extend((1..7).map(|k| [2.0 * PI * k as f64 / 7.0, 0.0]));
    let plan = SamplingPlan {
        times: vec![0.5],
        points,
        offsets: SamplingPlan::halving_offsets(1, levels),
    };
    (f, plan)
}

#[test]
fn weierstrass_modulus_separates_lipschitz_from_log_lipschitz() {
    for m in 1..=20u32 {
        let (f, plan) = weierstrass(m);
        let log_lip = estimate_space_modulus(&f, 1, &plan);
        assert!(log_lip <= 4.0, "m = {m}: {log_lip}");
        if m >= 12 {
            let lip = estimate_space_modulus(&f, 0, &plan);
            assert!(lip > m as f64 / 4.0, "m = {m}: {lip}");
        }
    }
    // against the partial-sum bound sum_j 2^-j min(2^j |y|, 2)
    let (f, plan) = weierstrass(20);
    for (r, v) in space_modulus_profile(&f, 1, &plan) {
        let partial: f64 = (1..=24).map(|j| 0.5f64.powi(j) * (2f64.powi(j) * r).min(2.0)).sum();
        assert!(v <= 2.0 * partial / (r * (1.0 + 1.0 / r).ln()), "|y| = {r}");
    }
}

#[test]
fn violator_sup_grows_a_decade_at_a_time() {
    let f = make_family("violator", &FamilyParams::default()).unwrap();
    let mut last = 0.0;
    for d in 1..=6 {
        let plan = SamplingPlan {
            times: SamplingPlan::log_times(1.0, d, 400),
            points: vec![[0.0; 2]],
            offsets: vec![],
        };
        let s = check_oscillation_bounds(&f, 0.0, &plan).sup_t_dta;
        if d > 1 {
            assert!(s >= 8.0 * last, "decade {d}: {s} vs {last}");
        }
        last = s;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn time_derivatives_match_centered_differences(
        which in 0usize..4,
        log_t in -6.0f64..0.0,
        x in 0.0f64..(2.0 * PI),
    ) {
        let fams = families();
        let f = [&fams[2], &fams[8], &fams[10], &fams[11]][which];
        let mut t = 10f64.powf(log_t) * f.t_final();
        // oscillation scale: t, or t^q for the violator
        let scale = if f.name == "violator" { t = t.max(1e-2); t * t } else { t };
        let h = 1e-4 * scale;
        let p = [x, 0.3];
        let fd1 = (f.eval(t + h, &p, 0, 0) - f.eval(t - h, &p, 0, 0)) / (2.0 * h);
        let fd2 = (f.eval_dt(t + h, &p, 0, 0) - f.eval_dt(t - h, &p, 0, 0)) / (2.0 * h);
        let (d1, d2) = (f.eval_dt(t, &p, 0, 0), f.eval_dtt(t, &p, 0, 0));
        let env1 = f.rho / scale;
        prop_assert!((fd1 - d1).abs() <= 1e-5 * d1.abs().max(env1), "{}: {fd1} vs {d1}", f.name);
        prop_assert!((fd2 - d2).abs() <= 1e-5 * d2.abs().max(env1 / scale), "{}: {fd2} vs {d2}", f.name);
    }
}
