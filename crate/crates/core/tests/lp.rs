use num_complex::Complex64;
use oscillab_core::lp::{
    block, chi, chi_j, dyadic_sobolev_norm, paraproduct, phi_j, sobolev_norm, DyadicDecomposition, FnSymbol, Grid,
    Paraproduct, SpatialSymbol, SpectralField,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn white(g: &Grid, seed: u64) -> SpectralField {
    SpectralField::random(g, &mut ChaCha8Rng::seed_from_u64(seed), |_| 1.0)
}

fn product(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let (pa, pb) = (a.physical(), b.physical());
    let v: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    SpectralField::from_physical(&a.grid, &v)
}

/// `T_f u` assembled from physical products of low-pass and block pieces.
fn bony_paraproduct(f: &SpectralField, u: &SpectralField, gamma: f64) -> SpectralField {
    let dec = DyadicDecomposition::new(&u.grid);
    let mu = gamma.log2().floor() as usize;
    let mut out = product(&dec.low_pass(f, mu.saturating_sub(1)), &dec.low_pass(u, mu + 2));
    for nu in mu..=dec.max_block() {
        if let Ok(b) = dec.block(u, nu + 3) {
            out.axpy(1.0, &product(&dec.low_pass(f, nu), &b));
        }
    }
    out
}

#[test]
fn paraproduct_matches_brute_force_bony_splitting() {
    let g = Grid::new(1, 128).unwrap();
    let f = SpectralField::from_fn(&g, |x| 2.0 + x[0].sin());
    let sym = SpatialSymbol(f.physical());
    let dec = DyadicDecomposition::new(&g);
    for seed in 0..5 {
        let u = white(&g, seed);
        let gamma = 8.0;
        let fast = paraproduct(&sym, &u, gamma).unwrap();
        let slow = bony_paraproduct(&f, &u, gamma);
        assert!(fast.sub(&slow).l2() <= 1e-12 * u.l2(), "seed {seed}");

        // fu - T_f u is the sum of the high-frequency remainders
        let mut rem = product(&f, &u);
        rem.axpy(-1.0, &fast);
        let mu = 3;
        let mut bound = product(&f.sub(&dec.low_pass(&f, mu - 1)), &dec.low_pass(&u, mu + 2)).l2();
        for nu in mu..=dec.max_block() {
            if let Ok(b) = dec.block(&u, nu + 3) {
                bound += product(&f.sub(&dec.low_pass(&f, nu)), &b).l2();
            }
        }
        assert!(rem.l2() <= bound * (1.0 + 1e-12) + 1e-13);
    }
}

#[test]
fn symbol_paraproduct_matches_per_mode_definition() {
    let g = Grid::new(1, 64).unwrap();
    let f = |x: &[f64; 2], xi: [f64; 2]| {
        let r = xi[0].abs();
        (1.0 + 0.3 * (x[0] + 0.1 * r).sin() + 0.2 * (3.0 * x[0]).cos()) / (1.0 + 0.01 * r)
    };
    let sym = FnSymbol::new(&g, false, f);
    let u = white(&g, 11);
    let dec = DyadicDecomposition::new(&g);
    for gamma in [1.0, 2.0, 8.0] {
        let fast = paraproduct(&sym, &u, gamma).unwrap();
        let mu = gamma.log2().floor() as usize;
        let mut slow = SpectralField::zeros(&g);
        for i in 0..g.len() {
            if u.coef[i] == Complex64::default() {
                continue;
            }
            let k = g.freq(i);
            let r = k.abs() as f64;
            let fk = SpectralField::from_fn(&g, |x| f(x, [k as f64, 0.0]));
            let mut terms = vec![(mu.saturating_sub(1), chi_j(mu + 2, r))];
            for nu in mu..=dec.max_block() {
                terms.push((nu, phi_j(nu + 3, r)));
            }
            for (j, c) in terms {
                if c == 0.0 {
                    continue;
                }
                let sf = dec.low_pass(&fk, j);
                for (p, s) in sf.coef.iter().enumerate() {
                    let q = g.index_of(k + g.freq(p));
                    if (k + g.freq(p)).abs() < 32 {
                        slow.coef[q] += c * s * u.coef[i];
                    }
                }
            }
        }
        assert!(fast.sub(&slow).max_abs() < 1e-12, "gamma {gamma}");
    }
}

#[test]
fn single_high_mode_fires_one_term() {
    let g = Grid::new(1, 512).unwrap();
    let f = SpatialSymbol(SpectralField::from_fn(&g, |x| (x[0] + 1.0).sin().abs()).physical());
    for nu in 2..=4usize {
        let k = 1i64 << (nu + 3);
        let u = SpectralField::cosine(&g, [k, 0], 1.0);
        let t = paraproduct(&f, &u, 1.0).unwrap();
        let (lo, hi) = (k - (1 << (nu + 1)), k + (1 << (nu + 1)));
        for i in 0..g.len() {
            let q = g.freq(i).abs();
            if q < lo || q > hi {
                assert!(t.coef[i].norm() < 1e-14, "nu {nu}: mode {q} = {}", t.coef[i]);
            }
        }
    }
}

#[test]
fn block_examples() {
    let g = Grid::new(1, 64).unwrap();
    let u = SpectralField::cosine(&g, [4, 0], 1.0);
    assert!(block(&u, 2).unwrap().sub(&u).max_abs() < 1e-15);
    for j in 0..=g.max_block() {
        if !(1..=3).contains(&j) {
            assert_eq!(block(&u, j).unwrap().max_abs(), 0.0);
        }
    }
    let c = SpectralField::cosine(&g, [0, 0], 3.0);
    assert_eq!(block(&c, 0).unwrap(), c);
    assert_eq!(block(&c, 1).unwrap().max_abs(), 0.0);
    assert!(block(&u, g.max_block() + 1).is_err());
}

#[test]
fn sobolev_examples() {
    let g = Grid::new(1, 64).unwrap();
    let u = SpectralField::cosine(&g, [8, 0], 1.0);
    assert!((sobolev_norm(&u, 1.0, 1.0).unwrap() - 65f64.sqrt() * u.l2()).abs() < 1e-12);
    for gamma in [1.0, 7.0] {
        assert!((sobolev_norm(&u, 0.0, gamma).unwrap() - u.l2()).abs() < 1e-13);
    }
}

#[test]
fn dyadic_surrogate_brackets_exact_norm_on_decaying_tail() {
    let g = Grid::new(1, 256).unwrap();
    let gamma: f64 = 1.0;
    let mut u = SpectralField::zeros(&g);
    for i in 0..g.len() {
        if g.in_band(i) {
            let r = g.wavenumber(i);
            u.coef[i] = Complex64::new((gamma * gamma + r * r).powf(-0.5 - 0.5 - 0.01), 0.0);
        }
    }
    let ratio = dyadic_sobolev_norm(&u, 0.5) / sobolev_norm(&u, 0.5, gamma).unwrap();
    assert!((0.25..=4.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn block_support_at_every_frequency() {
    for j in 1..=10usize {
        for k in 0..=2048i64 {
            let r = k as f64;
            let lo = 2f64.powi(j as i32 - 1);
            let hi = 2f64.powi(j as i32 + 1);
            if r < lo || r > hi {
                assert_eq!(phi_j(j, r), 0.0, "phi_{j}({k})");
            }
        }
    }
    assert_eq!(chi(0.0), 1.0);
    assert_eq!(chi(2.0), 0.0);
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (3u32..=8).prop_map(|e| Grid::new(1, 1 << e).unwrap()),
        (3u32..=5).prop_map(|e| Grid::new(2, 1 << e).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blocks_reconstruct_the_field(g in grid_strategy(), seed in any::<u64>()) {
        let u = white(&g, seed);
        let dec = DyadicDecomposition::new(&g);
        let mut sum = SpectralField::zeros(&g);
        for j in 0..=dec.max_block() {
            sum.axpy(1.0, &dec.block(&u, j).unwrap());
        }
        prop_assert!(sum.sub(&u).l2() <= 1e-12 * u.l2());
        let norms: f64 = dec.block_norms_sq(&u).iter().sum();
        prop_assert!(norms <= u.l2_sq() * (1.0 + 1e-12));
    }

    #[test]
    fn parseval_and_real_values(g in grid_strategy(), seed in any::<u64>()) {
        let u = white(&g, seed);
        let phys = u.physical();
        let vol = (2.0 * std::f64::consts::PI).powi(g.dim() as i32);
        let l2 = (vol * phys.iter().map(|v| v * v).sum::<f64>() / g.len() as f64).sqrt();
        prop_assert!((l2 - u.l2()).abs() <= 1e-12 * u.l2());
        prop_assert!(u.hermitian_defect() <= 1e-15);
        let back = SpectralField::from_physical(&g, &phys);
        prop_assert!(back.sub(&u).max_abs() <= 1e-12 * u.max_abs());
    }

    #[test]
    fn constant_symbol_telescopes(g in grid_strategy(), seed in any::<u64>(), c in -5.0f64..5.0, e in 0u32..12) {
        let u = white(&g, seed);
        let t = paraproduct(&SpatialSymbol(vec![c; g.len()]), &u, 2f64.powi(e as i32)).unwrap();
        let mut cu = u.clone();
        cu.scale(c);
        prop_assert!(t.sub(&cu).l2() <= 1e-12 * u.l2().max(1e-300) * c.abs().max(1.0));
    }

    #[test]
    fn paraproduct_is_bilinear_bounded_and_real(seed in any::<u64>(), a in -3.0f64..3.0, e in 0u32..6) {
        let g = Grid::new(1, 128).unwrap();
        let gamma = 2f64.powi(e as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = SpectralField::random(&g, &mut rng, |_| 1.0);
        let v = SpectralField::random(&g, &mut rng, |_| 1.0);
        let f1 = SpectralField::random(&g, &mut rng, |r| (-r).exp()).physical();
        let f2: Vec<f64> = g.points().iter().map(|x| (2.0 * x[0]).cos().abs()).collect();
        let p = Paraproduct::new(&g, gamma).unwrap();

        let mut uv = u.clone();
        uv.axpy(a, &v);
        let mut lin = p.apply(&SpatialSymbol(f1.clone()), &u);
        lin.axpy(a, &p.apply(&SpatialSymbol(f1.clone()), &v));
        prop_assert!(p.apply(&SpatialSymbol(f1.clone()), &uv).sub(&lin).l2() <= 1e-11 * (u.l2() + a.abs() * v.l2()));

        let f12: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| x + a * y).collect();
        let mut lin = p.apply(&SpatialSymbol(f1.clone()), &u);
        lin.axpy(a, &p.apply(&SpatialSymbol(f2.clone()), &u));
        prop_assert!(p.apply(&SpatialSymbol(f12), &u).sub(&lin).l2() <= 1e-11 * u.l2() * (1.0 + a.abs()));

        let t = p.apply(&SpatialSymbol(f2.clone()), &u);
        let sup = f2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(t.l2() <= 4.0 * sup * u.l2());
        prop_assert!(t.hermitian_defect() <= 1e-13 * u.max_abs());
    }

    #[test]
    fn bernstein_on_blocks(g in grid_strategy(), seed in any::<u64>()) {
        let u = white(&g, seed);
        let dec = DyadicDecomposition::new(&g);
        for j in 1..=dec.max_block() {
            let b = dec.block(&u, j).unwrap();
            let n0 = b.l2();
            if n0 == 0.0 {
                continue;
            }
            let n1 = b.grad_l2_sq().sqrt();
            let scale = 2f64.powi(j as i32);
            prop_assert!(n1 <= 2.0 * scale * n0 * (1.0 + 1e-12));
            prop_assert!(n0 <= 2.0 / scale * n1 * (1.0 + 1e-12));
        }
    }
}
