use std::fs;

use oscillab_core::coefficients::{FamilyParams, SpaceProfile};
use oscillab_core::harness::{
    check_theorem, run, run_full, sweep, Axis, Criterion, ExperimentConfig, RunKind, RunReport,
};
use oscillab_core::Error;
use proptest::prelude::*;

fn small_pde(family: &str, profile: SpaceProfile) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        family,
        FamilyParams {
            profile,
            terms: 4,
            ..Default::default()
        },
    );
    c.grid.n = 64;
    c.time.t0 = 0.01;
    c.time.t1 = 0.2;
    c.time.samples = 8;
    c.loss.nu_min = 0;
    c.loss.nu_max = 4;
    c.gamma.grid_n = 32;
    c.gamma.trials = 4;
    c.gamma.probe_times = 2;
    if profile.ell() == 1 {
        c.energy.theta = 0.25;
    }
    c
}

fn small_mode(family: &str, delta: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(family, FamilyParams { delta, ..Default::default() });
    c.kind = RunKind::Mode;
    c.time.t0 = 1e-3;
    c.mode.log2_xi_min = 3;
    c.mode.log2_xi_max = 6;
    c.mode.samples = 16;
    c.integrator.mode_tol = 1e-8;
    c
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[family]\nname = \"constant\"\n[grid]\nn = 64\nwidth = 3\n";
    assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))));
    let text = "[family]\nname = \"constant\"\nparams = { rhoo = 1.0 }\n";
    assert!(ExperimentConfig::parse(text).is_err());
    let text = "colour = 1\n[family]\nname = \"constant\"\n";
    assert!(ExperimentConfig::parse(text).is_err());
}

#[test]
fn validation_rejects_bad_configs() {
    let base = small_pde("constant", SpaceProfile::One);
    base.validate().unwrap();
    let mut c = base.clone();
    c.grid.n = 100;
    assert!(matches!(c.validate(), Err(Error::BadGrid(100))));
    let mut c = base.clone();
    c.loss.nu_max = 5;
    assert!(c.validate().is_err(), "2^5 lies outside the band of N = 64");
    let mut c = base.clone();
    c.family.name = "nope".into();
    assert!(matches!(c.validate(), Err(Error::UnknownFamily(_))));
    let mut c = base.clone();
    c.loss.nu_min = 1;
    assert!(c.validate().is_err(), "fewer than five blocks");
}

#[test]
fn csv_artifacts_are_bitwise_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut c = small_pde("yamazaki-osc", SpaceProfile::Sin);
    c.seed = 17;
    let reports: Vec<RunReport> = dirs
        .iter()
        .map(|d| {
            c.output_dir = Some(d.path().to_path_buf());
            run(&c).unwrap()
        })
        .collect();
    for name in ["ledger.csv", "loss.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name}");
    }
    assert_eq!(reports[0].config_hash, reports[1].config_hash);
    assert_eq!(reports[0].loss, reports[1].loss);
    let loaded = RunReport::load(dirs[0].path()).unwrap();
    assert_eq!(loaded.loss, reports[0].loss);
    assert_eq!(loaded.checks, reports[0].checks);
}

#[test]
fn mode_run_writes_amplification_table() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small_mode("delta-osc", 0.0);
    c.output_dir = Some(d.path().to_path_buf());
    let r = run(&c).unwrap();
    let m = r.mode.unwrap();
    assert_eq!(m.xi.len(), 4);
    let text = fs::read_to_string(d.path().join("amplification.csv")).unwrap();
    assert!(text.lines().count() > m.xi.len());
}

#[test]
fn sweep_survives_failing_cells() {
    let d = tempfile::tempdir().unwrap();
    let mut c = small_mode("delta-osc", 0.0);
    c.output_dir = Some(d.path().to_path_buf());
    let axes: Vec<Axis> = vec![
        "family.params.delta=0,1".parse().unwrap(),
        "integrator.cfl=0.5,7".parse().unwrap(),
    ];
    let s = sweep(&c, &axes).unwrap();
    assert_eq!(s.cells.len(), 4);
    assert_eq!(s.failures(), 2);
    let summary = fs::read_to_string(d.path().join("summary.csv")).unwrap();
    assert_eq!(summary, s.summary_csv());
    assert_eq!(summary.lines().filter(|l| l.contains(",error,")).count(), 2);
    assert!(d.path().join("cell-000").join("run.json").exists());
}

#[test]
fn check_rejects_mismatched_reports() {
    let pde = run(&small_pde("constant", SpaceProfile::One)).unwrap();
    let mode = run(&small_mode("delta-osc", 0.0)).unwrap();
    assert!(matches!(
        check_theorem(&[mode.clone()], Criterion::NoLoss),
        Err(Error::CriterionMismatch { .. })
    ));
    assert!(matches!(
        check_theorem(&[pde.clone()], Criterion::DeltaFamily),
        Err(Error::CriterionMismatch { .. })
    ));
    assert!(check_theorem(&[mode], Criterion::DeltaFamily).is_err(), "incomplete family");
    assert!(check_theorem(&[], Criterion::LinearLoss).is_err());
}

#[test]
fn planted_loss_is_reported_as_loss_present() {
    let mut r = run(&small_pde("yamazaki-osc", SpaceProfile::Weierstrass)).unwrap();
    let ok = check_theorem(&[r.clone()], Criterion::NoLoss).unwrap();
    assert!(ok.pass, "{ok}");
    // a loss of half a derivative by t = 1
    let loss = r.loss.as_mut().unwrap();
    for (s, t) in loss.sigma.iter_mut().zip(&loss.times) {
        *s += 0.5 * t;
    }
    let o = check_theorem(&[r], Criterion::NoLoss).unwrap();
    assert!(!o.pass);
    assert_eq!(o.verdict, "loss present");
    assert!(o.margin < 0.0);
}

#[test]
fn in_memory_ledger_matches_report() {
    let out = run_full(&small_pde("constant", SpaceProfile::One)).unwrap();
    let ledger = out.ledger.unwrap();
    let loss = out.report.loss.unwrap();
    assert_eq!(ledger.times, loss.times);
    assert!(loss.sup_sigma() < 1e-3, "constant coefficients lose nothing: {}", loss.sup_sigma());
}

#[test]
fn criterion_names_round_trip() {
    for c in [Criterion::NoLoss, Criterion::LinearLoss, Criterion::DeltaFamily] {
        assert_eq!(c.to_string().parse::<Criterion>().unwrap(), c);
    }
    assert!("theorem".parse::<Criterion>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_through_toml(
        n in 3u32..12, seed in any::<u64>(), rho in 0.0f64..0.9, delta in 0.0f64..1.0,
        theta in 0.0f64..1.0, t0 in 0.0f64..0.5, samples in 2usize..100, mode in any::<bool>(),
        fixed in proptest::option::of(1.0f64..1e3),
    ) {
        let mut c = ExperimentConfig::new("delta-osc", FamilyParams { rho, delta, ..Default::default() });
        c.grid.n = 1 << n;
        c.seed = seed;
        c.energy.theta = theta;
        c.time.t0 = t0;
        c.time.samples = samples;
        c.gamma.fixed = fixed;
        if mode {
            c.kind = RunKind::Mode;
        }
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }
}
