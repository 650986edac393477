use lyapsync_cli::config::{derive_seeds, resolve_seed, Config, ConfigError, InitKind, SeedSource};
use proptest::prelude::*;

#[test]
fn empty_file_gives_defaults() {
    let c = Config::parse("# nothing here\n\n").unwrap();
    assert_eq!(c, Config::default());
    assert_eq!(c.potential, "sombrero");
    assert_eq!(c.grid_n, 256);
    assert_eq!(c.init, InitKind::Minimum);
    assert_eq!(c.seed, None);
}

#[test]
fn sections_and_dotted_keys_agree() {
    let a = Config::parse("[sim]\nkappa = 2.5\nepsilon = 0.1\n[grid]\nN = 64\n").unwrap();
    let b = Config::parse("sim.kappa = 2.5\nsim.epsilon = 0.1  # trailing comment\ngrid.N = 64\n").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.kappa, 2.5);
    assert_eq!(a.grid_n, 64);
}

#[test]
fn potential_params_are_parsed() {
    let c = Config::parse("potential.name = \"quadratic\"\npotential.params = \"n=2, a=3.5\"\n").unwrap();
    assert_eq!(c.potential, "quadratic");
    assert_eq!(c.potential_n, Some(2));
    assert_eq!(c.potential_a, Some(3.5));
}

#[test]
fn negative_dt_is_out_of_range() {
    match Config::parse("sim.dt = -1\n") {
        Err(ConfigError::OutOfRange { key, .. }) => assert_eq!(key, "sim.dt"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_key_reports_line() {
    match Config::parse("sim.kappa = 1\n\nsim.kapa = 2\n") {
        Err(ConfigError::UnknownKey { line, key }) => {
            assert_eq!(line, 3);
            assert_eq!(key, "sim.kapa");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_lines_report_line_number() {
    match Config::parse("# header\nsim.kappa = 1\nthis is not valid\n") {
        Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(Config::parse("sim.kappa = abc\n"), Err(ConfigError::Parse { line: 1, .. })));
    assert!(matches!(Config::parse("[sim\n"), Err(ConfigError::Parse { line: 1, .. })));
}

#[test]
fn sweeps_and_lists_parse() {
    let c = Config::parse("sweep.kappa = 1, 2, 4\nsweep.n = 2,3\nsweep.seeds = 4\n").unwrap();
    assert_eq!(c.sweep_kappa, vec![1.0, 2.0, 4.0]);
    assert_eq!(c.sweep_n, vec![2, 3]);
    assert_eq!(c.sweep_seeds, 4);
}

#[test]
fn emitted_text_round_trips() {
    let text = "potential.name = double_well\nsim.kappa = 0.3\nsim.epsilon = 0.0125\nsweep.epsilon = 0.1, 0.05\nseed = 42\ninit.kind = ball\nsim.rescaled = true\n";
    let c = Config::parse(text).unwrap();
    assert_eq!(Config::parse(&c.emit()).unwrap(), c);
    assert_eq!(Config::parse(&Config::default().emit()).unwrap(), Config::default());
}

proptest! {
    #[test]
    fn numeric_fields_round_trip(kappa in 1e-3f64..1e3, eps in 1e-4f64..1.0, dt in 1e-6f64..1e-1, seed in any::<u64>()) {
        let mut c = Config::default();
        c.kappa = kappa;
        c.epsilon = eps;
        c.dt = dt;
        c.seed = Some(seed);
        prop_assert_eq!(Config::parse(&c.emit()).unwrap(), c);
    }
}

#[test]
fn seed_precedence() {
    assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), (1, SeedSource::CommandLine));
    assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), (2, SeedSource::ConfigFile));
    assert_eq!(resolve_seed(None, None, Some(" 3 ")).unwrap(), (3, SeedSource::Environment));
    assert_eq!(resolve_seed(None, None, None).unwrap(), (0, SeedSource::Default));
    assert!(resolve_seed(None, None, Some("x")).is_err());
}

#[test]
fn derived_seeds_are_stable_and_distinct() {
    let a = derive_seeds(11, 6);
    assert_eq!(a[0], 11);
    assert_eq!(a, derive_seeds(11, 6));
    assert_eq!(&derive_seeds(11, 3)[..], &a[..3]);
    let mut s = a.clone();
    s.sort();
    s.dedup();
    assert_eq!(s.len(), 6);
}
