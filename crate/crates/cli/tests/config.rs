use softbolt::collision::InterpolationMode;
use softbolt::integrator::Scheme;
use softbolt_cli::config::{apply_override, InitialDatum, PhiForm};
use softbolt_cli::{parse_config, Scenario};
use std::path::Path;

fn parse(text: &str) -> Result<softbolt_cli::RunConfig, softbolt_cli::ConfigError> {
    parse_config(text, Path::new("."), None, &[])
}

#[test]
fn empty_file_takes_documented_defaults() {
    let c = parse("").unwrap();
    assert_eq!(c.scenario, None);
    assert_eq!(c.integrator.scheme, Scheme::Rk2);
    assert_eq!(c.integrator.safety_factor, 0.5);
    assert_eq!(c.integrator.t_end, 20.0);
    assert_eq!(c.diagnostics.moments, vec![2.0, 4.0, 6.0]);
    assert_eq!(c.diagnostics.hk, vec![-1.5, 0.0, 1.0, 2.0]);
    assert_eq!(
        (c.grid.dim, c.grid.n, c.grid.n_sigma, c.grid.half_width),
        (2, 32, 32, 8.0)
    );
    assert_eq!(c.kernel.gamma, -1.0);
    assert_eq!(c.kernel.phi_form, PhiForm::Power);
    assert_eq!(c.collision.interpolation, InterpolationMode::MaxwellianWeighted);
    assert_eq!(
        c.initial,
        InitialDatum::Bimodal {
            weights: vec![0.5, 0.5],
            centers: vec![vec![2.0, 0.0], vec![-2.0, 0.0]],
            temperatures: vec![0.5, 0.5],
        }
    );
}

#[test]
fn very_soft_gamma_without_flag_names_h2() {
    let e = parse("[kernel]\ngamma = -2.5\n").unwrap_err();
    assert!(e.errors.iter().any(|m| m.contains("(H2)")), "{e}");
    let ok = parse("[kernel]\ngamma = -2.5\nrelaxed_gamma = true\n").unwrap();
    assert!(ok.kernel.relaxed_gamma);
}

#[test]
fn unknown_key_is_rejected() {
    let e = parse("[kernel]\ngamm = -1.0\n").unwrap_err();
    assert_eq!(e.errors, vec!["unknown key `kernel.gamm`".to_owned()]);
    let e = parse("colour = 1\n[grid]\nN = 2\n").unwrap_err();
    assert!(e.errors[0].contains("unknown key `colour`"));
}

#[test]
fn every_problem_is_reported() {
    let text = r#"
        seeed = 3
        [grid]
        N = 4
        n = "many"
        [integrator]
        safety_factor = 1.5
        scheme = "rk4"
        [kernel]
        b0 = 0.0
    "#;
    let e = parse(text).unwrap_err();
    assert_eq!(e.errors.len(), 6, "{e}");
    for needle in ["seeed", "grid.n", "rk4", "grid.N", "safety_factor", "(H3)"] {
        assert!(e.errors.iter().any(|m| m.contains(needle)), "missing {needle}: {e}");
    }
}

#[test]
fn overrides_and_scenarios() {
    let c = parse_config(
        "[grid]\nn = 24\n",
        Path::new("."),
        Some("decay"),
        &["grid.n=16".into(), "integrator.scheme=euler".into(), "seed=11".into()],
    )
    .unwrap();
    assert_eq!(c.grid.n, 16);
    assert_eq!(c.integrator.scheme, Scheme::Euler);
    assert_eq!(c.seed, 11);
    assert_eq!(c.scenario, Some(Scenario::Decay));
    assert_eq!(c.scenario_name(), "decay");

    let e = parse_config("", Path::new("."), Some("very-soft"), &[]).unwrap_err();
    assert!(e.errors.iter().any(|m| m.contains("relaxed_gamma")), "{e}");
    let c = parse_config(
        "",
        Path::new("."),
        Some("very-soft"),
        &["kernel.relaxed_gamma=true".into()],
    )
    .unwrap();
    assert_eq!(c.kernel.gamma, -2.5);
    let c = parse_config(
        "[kernel]\ngamma = -2.2\nrelaxed_gamma = true\n",
        Path::new("."),
        Some("very-soft"),
        &[],
    )
    .unwrap();
    assert_eq!(c.kernel.gamma, -2.2);

    assert!(parse_config("", Path::new("."), Some("nope"), &[]).is_err());
    assert!(parse_config("", Path::new("."), None, &["novalue".into()]).is_err());
}

#[test]
fn override_values_parse_as_toml() {
    let mut t = toml::Table::new();
    apply_override(&mut t, "a.b = [1, 2]").unwrap();
    apply_override(&mut t, "a.c=word").unwrap();
    assert_eq!(t["a"]["b"].as_array().unwrap().len(), 2);
    assert_eq!(t["a"]["c"].as_str(), Some("word"));
    assert!(apply_override(&mut t, "a.b.c=1").is_err());
}

#[test]
fn initial_datum_variants() {
    let c = parse("[initial]\nkind = \"maxwellian\"\nT = 2.0\n").unwrap();
    assert!(matches!(c.initial, InitialDatum::Maxwellian { temperature, .. } if temperature == 2.0));
    let c = parse("[initial]\nkind = \"squeezed\"\n").unwrap();
    let InitialDatum::Squeezed { temperatures, .. } = &c.initial else {
        panic!("expected squeezed")
    };
    assert_eq!(temperatures.len(), 2);
    let g = c.grid().unwrap();
    let f = c.initial_state(&g).unwrap();
    let m = softbolt::macroscopic_moments(&f).unwrap();
    assert!((m.rho - 1.0).abs() < 1e-7);
    assert!((m.temperature - 1.2).abs() < 1e-6);

    let e = parse("[initial]\nkind = \"file\"\n").unwrap_err();
    assert!(e.errors[0].contains("initial.path"));
    let e = parse("[initial]\nkind = \"file\"\npath = \"missing.fsnap\"\n").unwrap_err();
    assert!(e.errors[0].contains("does not exist"));
    let e = parse("[initial]\nkind = \"maxwellian\"\nu = [0.0]\n").unwrap_err();
    assert!(e.errors[0].contains("components"));
    let e = parse("[initial]\nkind = \"bimodal\"\nweights = [1.0]\n").unwrap_err();
    assert!(e.errors[0].contains("exactly two"));
}

#[test]
fn snapshot_datum_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse("[grid]\nn = 8\n").unwrap();
    let g = c.grid().unwrap();
    let f = c.initial_state(&g).unwrap();
    softbolt::snapshot::save_snapshot(&f, dir.path().join("f0.fsnap")).unwrap();
    let text = "[grid]\nn = 8\n[initial]\nkind = \"file\"\npath = \"f0.fsnap\"\n";
    let c = parse_config(text, dir.path(), None, &[]).unwrap();
    assert_eq!(c.initial_state(&g).unwrap().values(), f.values());
    // a different grid is refused when the datum is loaded
    let c = parse_config(&text.replace("n = 8", "n = 10"), dir.path(), None, &[]).unwrap();
    assert!(c.initial_state(&c.grid().unwrap()).is_err());
}

#[test]
fn tabulated_kernel_is_loaded_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..=2000)
        .map(|i| {
            let r = i as f64 * 0.5;
            format!("{r} {}\n", (1.0 + r).powf(-1.0))
        })
        .collect();
    std::fs::write(dir.path().join("phi.txt"), rows).unwrap();
    let text = "[kernel]\nphi_form = \"table\"\nphi_table = \"phi.txt\"\n";
    // chords of a convex table overshoot the curve between nodes
    let e = parse_config(text, dir.path(), None, &[]).unwrap_err();
    assert!(e.errors[0].contains("H2"), "{e}");
    let c = parse_config(&format!("{text}C_phi = 1.1\n"), dir.path(), None, &[]).unwrap();
    let k = c.kernel().unwrap();
    assert!((k.phi_eval(1.0).unwrap() - 0.5).abs() < 1e-12);

    let e = parse("[kernel]\nphi_form = \"table\"\n").unwrap_err();
    assert!(e.errors[0].contains("phi_table"));
    // a table outside the declared sandwich violates (H2)
    let e = parse_config(&format!("{text}c_phi = 3.0\nC_phi = 4.0\n"), dir.path(), None, &[]).unwrap_err();
    assert!(e.errors[0].contains("H2"), "{e}");
}

#[test]
fn hash_ignores_output_dir_and_tracks_content() {
    let a = parse("output_dir = \"x\"\n").unwrap();
    let b = parse("output_dir = \"y\"\n").unwrap();
    let c = parse("seed = 8\n").unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
    let dir = a.run_dir(Path::new("root"));
    assert!(dir.to_str().unwrap().starts_with("root/run-"));
}
