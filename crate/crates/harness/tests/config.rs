use harness::config::{ExperimentConfig, InitialState, Kind};
use harness::presets::{self, PRESETS};
use std::path::PathBuf;

fn resolve(src: &str) -> Result<ExperimentConfig, harness::config::ConfigError> {
    ExperimentConfig::from_json(src)
}

#[test]
fn defaults_are_filled_per_kind() {
    let cfg = resolve(r#"{ "kind": "compare", "hbar": 0.125, "t_end": 0.5 }"#).unwrap();
    assert_eq!(cfg.name, "compare");
    assert_eq!(cfg.dt, 0.01);
    assert_eq!(cfg.record_every, 10);
    assert_eq!(cfg.points(), Some(64));
    assert_eq!(cfg.initial, Some(InitialState::default()));
    assert!(cfg.hf.is_none() && cfg.lattice.is_none() && cfg.fock.is_none());
    let nbody = resolve(r#"{ "kind": "nbody", "t_end": 0.1 }"#).unwrap();
    assert_eq!(nbody.lattice.unwrap().particles, vec![2, 3, 4]);
}

#[test]
fn unknown_fields_report_their_line() {
    let src = "{\n  \"kind\": \"compare\",\n  \"hbar\": 0.125,\n  \"t_end\": 1.0,\n  \"grid\": { \"size\": 3 }\n}";
    let err = resolve(src).unwrap_err();
    assert_eq!(err.line, Some(5));
    assert!(err.message.contains("unknown field `size`"), "{err}");
    assert!(!err.message.contains("at line"), "position is reported once: {err}");
}

#[test]
fn semantic_errors_point_at_the_offending_key() {
    let src = "{\n  \"kind\": \"rate-sweep\",\n  \"t_end\": 0.5,\n  \"hbar_list\": [0.125, 0.25, 0.03125, 0.015625]\n}";
    let err = resolve(src).unwrap_err();
    assert_eq!(err.line, Some(4));
    assert!(err.message.contains("strictly decreasing"));

    let cases = [
        (r#"{ "kind": "compare", "hbar": 0.3, "t_end": 1 }"#, "even integer"),
        (r#"{ "kind": "compare", "hbar": 0.125, "t_end": -1 }"#, "t_end"),
        (r#"{ "kind": "compare", "hbar": 0.125, "t_end": 1, "dt": 0 }"#, "dt"),
        (r#"{ "kind": "compare", "t_end": 1 }"#, "requires hbar"),
        (r#"{ "kind": "rate-sweep", "hbar_list": [0.125, 0.0625, 0.03125], "t_end": 1 }"#, "at least 4"),
        (r#"{ "kind": "rate-sweep", "hbar_list": [0.125, 0.0625, 0.03125, 0.015625], "t_end": 1, "kernel": { "a": 0.7 } }"#, "(0, 0.5)"),
        (r#"{ "kind": "hf-run", "hbar": 0.125, "t_end": 1, "kernel": { "a": 1.2 } }"#, "(0, 1)"),
        (r#"{ "kind": "compare", "hbar": 0.125, "t_end": 1, "lattice": {} }"#, "not used by compare"),
        (r#"{ "kind": "compare", "hbar": 0.125, "t_end": 1, "initial": { "type": "slater-planewaves" } }"#, "no phase-space symbol"),
        (r#"{ "kind": "nbody", "t_end": 1, "lattice": { "sites": 30 } }"#, "sites"),
        (r#"{ "kind": "fock-verify", "t_end": 0, "fock": { "modes": [3], "checks": ["wick"] } }"#, "at least 4 modes"),
        (r#"{ "kind": "fock-verify", "t_end": 0, "fock": { "modes": [7] } }"#, "modes"),
        (r#"{ "kind": "weyl-check", "hbar": 0.125, "t_end": 0, "weyl": { "modes": 40 } }"#, "modes"),
        (r#"{ "kind": "nbody", "hbar": 0.5, "t_end": 1 }"#, "hbar = 1/N"),
        (r#"{ "kind": "compare", "name": "a b", "hbar": 0.125, "t_end": 1 }"#, "name"),
        (r#"{ "kind": "hf-run", "hbar": 0.125, "t_end": 1, "hf": { "weight_order": 3 } }"#, "even integer > 2"),
    ];
    for (src, needle) in cases {
        let err = resolve(src).unwrap_err();
        assert!(err.message.contains(needle), "{src}: {err}");
    }
    assert!(resolve(r#"{ "kind": "teleport", "t_end": 1 }"#).unwrap_err().message.contains("unknown variant"));
}

#[test]
fn every_preset_resolves_and_is_named_after_itself() {
    for (name, criterion, src) in PRESETS {
        let cfg = resolve(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(&cfg.name, name);
        assert!((1..=14).contains(criterion));
    }
    for criterion in 1..=14 {
        assert!(!presets::for_criterion(criterion).is_empty(), "criterion {criterion} has no preset");
    }
    let sweep = resolve(presets::preset("theorem-a03").unwrap()).unwrap();
    assert_eq!(sweep.kind, Kind::RateSweep);
    assert_eq!(sweep.hbar_list, Some(vec![0.125, 0.0625, 0.03125, 0.015625]));
    assert_eq!(sweep.kernel.a, 0.3);
    assert_eq!(sweep.kernel.cutoff, 0.05);
    assert_eq!(sweep.t_end, 0.5);
    assert!(presets::preset("no-such-preset").is_none());
}

#[test]
fn hash_tracks_config_but_not_output_directory() {
    let src = presets::preset("free-flow").unwrap();
    let a = harness::load(src, None, None).unwrap();
    let b = harness::load(src, None, Some(PathBuf::from("/elsewhere"))).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.echo(), b.echo());
    assert_eq!(a.hash().len(), 64);
    let c = harness::load(src, Some(99), None).unwrap();
    assert_eq!(c.seed, 99);
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn echo_round_trips_to_the_same_config() {
    for (name, _, src) in PRESETS {
        let cfg = resolve(src).unwrap();
        let again = resolve(&cfg.echo()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cfg, again, "{name}");
        assert_eq!(cfg.hash(), again.hash());
    }
}
