use oscillab_core::coefficients::{make_family, Coefficient, FamilyParams, SpaceProfile};
use oscillab_core::energy::{
    block_energy, block_fields, fit_loss, total_energy, BlockEnergySample, EnergyLedger, EnergyWeights,
};
use oscillab_core::lp::{alpha_symbol, DyadicDecomposition, FnSymbol, Grid, Paraproduct, SpectralField, SymbolKind};
use oscillab_core::regularize::QuadratureSpec;
use oscillab_core::solver::{cfl_dt, integrate, StepPolicy, WaveOperator, WaveState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quad() -> QuadratureSpec {
    QuadratureSpec::new(96).unwrap()
}

fn random_state(g: &Grid, seed: u64, t: f64) -> WaveState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = SpectralField::random(g, &mut rng, |_| 1.0);
    let ut = SpectralField::random(g, &mut rng, |r| r);
    WaveState::new(t, u, ut)
}

#[test]
fn identity_block_energy_is_conserved_up_to_the_gamma_term() {
    let g = Grid::new(1, 64).unwrap();
    let c = make_family("constant", &FamilyParams::default()).unwrap();
    let op = WaveOperator::new(&g, &c).unwrap();
    let nu = 3;
    let k = 1i64 << nu;
    let s0 = WaveState::new(0.0, SpectralField::cosine(&g, [k, 0], 1.0), SpectralField::zeros(&g));
    let marks: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let policy = StepPolicy {
        dt_max: cfl_dt(64, 1.0, 0.1),
        time_fraction: 0.0,
    };
    for gamma in [1.0, 4.0] {
        let sym = alpha_symbol(&c, gamma).unwrap();
        let mut reduced = Vec::new();
        integrate(&op, s0.clone(), 1.0, policy, &marks, None, |s| {
            let b = block_energy(s, &sym, nu).unwrap();
            let u_nu = DyadicDecomposition::new(&g).block(&s.u, nu).unwrap();
            reduced.push(b.e_nu - (1.0 + gamma * gamma) * u_nu.l2_sq());
            let r = b.ratio();
            assert!(r >= 0.5 && r <= 2.0 + gamma * gamma, "ratio {r}");
            assert!((b.e_nu - b.e_classical - gamma * gamma * u_nu.l2_sq()).abs() < 1e-9 * b.e_nu);
            Ok(())
        })
        .unwrap();
        // pi k^2 for u = cos(kx) cos(kt)
        let exact = std::f64::consts::PI * (k * k) as f64;
        for r in &reduced {
            assert!((r - exact).abs() <= 1e-5 * exact, "{r} vs {exact}");
        }
    }
}

#[test]
fn time_only_fields_match_closed_form_and_general_path() {
    let g = Grid::new(1, 128).unwrap();
    for (name, delta) in [("delta-osc", 0.0), ("delta-osc", 1.0), ("violator", 0.0)] {
        let a = make_family(name, &FamilyParams { delta, ..Default::default() }).unwrap();
        for (gamma, nu, t) in [(1.0, 3, 0.3), (8.0, 4, 0.05), (2.0, 5, 0.7)] {
            let sym = alpha_symbol(&a, gamma).unwrap();
            let s = random_state(&g, nu as u64, t);
            let fast = block_fields(&s, &sym, nu).unwrap();

            let (av, adt) = (a.eval(t, &[0.0; 2], 0, 0), a.eval_dt(t, &[0.0; 2], 0, 0));
            let g2 = gamma * gamma;
            let mut v = SpectralField::zeros(&g);
            let mut w = SpectralField::zeros(&g);
            for i in 0..g.len() {
                let k2 = (g.freq(i) * g.freq(i)) as f64;
                let num = g2 + av * k2;
                let inv_half = ((g2 + k2) / num).powf(0.25);
                let d_inv_half = -0.25 * inv_half * adt * k2 / num;
                v.coef[i] = inv_half * fast.ut_nu.coef[i] - d_inv_half * fast.u_nu.coef[i];
                w.coef[i] = (num * (g2 + k2)).powf(0.25) * fast.u_nu.coef[i];
            }
            let tol = 1e-10;
            assert!(fast.v.sub(&v).l2() <= tol * v.l2(), "{name} fast v");
            assert!(fast.w.sub(&w).l2() <= tol * w.l2(), "{name} fast w");

            // the general (x, xi) path knows nothing about uniformity
            let para = Paraproduct::new(&g, gamma).unwrap();
            let entry = |kind| FnSymbol::new(&g, true, move |x: &[f64; 2], xi| sym.eval(t, x, xi, kind));
            let mut gv = para.apply(&entry(SymbolKind::AlphaInvHalf), &fast.ut_nu);
            gv.axpy(-1.0, &para.apply(&entry(SymbolKind::DtAlphaInvHalf), &fast.u_nu));
            let gw = para.apply(&entry(SymbolKind::AlphaHalfR), &fast.u_nu);
            assert!(gv.sub(&v).l2() <= tol * v.l2(), "{name} general v");
            assert!(gw.sub(&w).l2() <= tol * w.l2(), "{name} general w");
        }
    }
}

#[test]
fn zero_state_has_zero_energy() {
    let g = Grid::new(2, 16).unwrap();
    let a = make_family("yamazaki-osc", &FamilyParams { dim: 2, profile: SpaceProfile::Sin, ..Default::default() }).unwrap();
    let sym = alpha_symbol(&a, 2.0).unwrap();
    for nu in 0..=4 {
        let b = block_energy(&WaveState::zeros(&g, 0.5), &sym, nu).unwrap();
        assert_eq!((b.e_nu, b.e_classical), (0.0, 0.0));
    }
}

#[test]
fn total_energy_examples() {
    let q = quad();
    let w = EnergyWeights {
        theta: 0.25,
        beta: 0.7,
        k1: 3.0,
    };
    // at t = 0 only the theta weight remains
    assert!((total_energy(0.0, &[(5, 2.0)], &w, &q) - 2.0 * 2f64.powf(-2.5)).abs() < 1e-15);
    let plain = EnergyWeights {
        theta: 0.5,
        ..Default::default()
    };
    let blocks = [(1, 1.0), (2, 3.0), (4, 0.5)];
    let expect: f64 = blocks.iter().map(|&(nu, e)| 2f64.powf(-(nu as f64)) * e).sum();
    assert!((total_energy(0.8, &blocks, &plain, &q) - expect).abs() < 1e-14);
    let k5 = EnergyWeights {
        k1: 5.0,
        ..Default::default()
    };
    let f = k5.factor(3, 1.0, &q);
    assert!(f >= (-20f64).exp() && f <= 1.0, "{f}");
}

fn synthetic_ledger(times: &[f64], sigma: &[f64], nus: std::ops::RangeInclusive<usize>) -> EnergyLedger {
    let series = nus
        .map(|nu| {
            times
                .iter()
                .zip(sigma)
                .map(|(&t, &s)| {
                    let e = (1.0 + nu as f64) * 4f64.powf(s * nu as f64);
                    BlockEnergySample {
                        nu,
                        t,
                        e_nu: e,
                        e_classical: e,
                        ut_sq: 0.0,
                    }
                })
                .collect()
        })
        .collect();
    EnergyLedger::new(times.to_vec(), series, EnergyWeights::default(), &quad()).unwrap()
}

#[test]
fn fit_loss_requires_five_blocks() {
    let l = synthetic_ledger(&[0.0, 1.0], &[0.0, 0.1], 2..=5);
    assert!(fit_loss(&l, (2, 5)).is_err());
    assert!(fit_loss(&l, (2, 6)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energies_are_quadratic(seed in any::<u64>(), s in -5.0f64..5.0, nu in 1usize..=4, t in 0.01f64..1.0) {
        let g = Grid::new(1, 64).unwrap();
        let a = make_family("yamazaki-osc", &FamilyParams { profile: SpaceProfile::Sin, ..Default::default() }).unwrap();
        let sym = alpha_symbol(&a, 2.0).unwrap();
        let st = random_state(&g, seed, t);
        let mut scaled = st.clone();
        scaled.u.scale(s);
        scaled.ut.scale(s);
        let b = block_energy(&st, &sym, nu).unwrap();
        let bs = block_energy(&scaled, &sym, nu).unwrap();
        prop_assert!(b.e_nu >= 0.0 && b.e_classical >= 0.0);
        prop_assert!((bs.e_nu - s * s * b.e_nu).abs() <= 1e-12 * s * s * b.e_nu + 1e-300);
        prop_assert!((bs.e_classical - s * s * b.e_classical).abs() <= 1e-12 * s * s * b.e_classical + 1e-300);
        let w = EnergyWeights { theta: 0.3, beta: 0.2, k1: 1.0 };
        let q = quad();
        let e1 = total_energy(t, &[(nu, b.e_nu)], &w, &q);
        let e2 = total_energy(t, &[(nu, bs.e_nu)], &w, &q);
        prop_assert!((e2 - s * s * e1).abs() <= 1e-12 * e2.abs().max(1e-300));
    }

    #[test]
    fn weight_factors_are_in_unit_interval_and_nonincreasing(
        theta in 0.0f64..1.0, beta in 0.0f64..2.0, k1 in 0.0f64..5.0, nu in 0usize..=12,
        t1 in 0.0f64..1.0, dt in 0.0f64..0.5,
    ) {
        let w = EnergyWeights { theta, beta, k1 };
        let q = quad();
        let (a, b) = (w.factor(nu, t1, &q), w.factor(nu, t1 + dt, &q));
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn fitted_loss_recovers_planted_slopes(sigma in proptest::collection::vec(-0.5f64..0.5, 3..12)) {
        let times: Vec<f64> = (0..sigma.len()).map(|i| i as f64 / sigma.len() as f64).collect();
        let mut planted = sigma.clone();
        planted[0] = 0.0;
        let l = fit_loss(&synthetic_ledger(&times, &planted, 2..=8), (2, 8)).unwrap();
        for (a, b) in l.sigma.iter().zip(&planted) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(l.max_residual() < 1e-12);
        prop_assert!(l.beta_hat >= 0.0);
        for j in 0..times.len() {
            for i in 0..j {
                prop_assert!(l.sigma[j] <= l.sigma[i] + l.beta_hat * (times[j] - times[i]) + 1e-12);
            }
        }
    }
}
