use channel_fsi_cli::config::{expand_keys, schema_keys, RunConfig};
use channel_fsi_cli::error::CliError;
use channel_fsi_cli::registry::{describe, Scenario, REGISTRY};
use serde_json::{json, Value};

fn issues_of(cfg: &RunConfig) -> Vec<String> {
    match cfg.validate() {
        Ok(()) => Vec::new(),
        Err(CliError::Config(issues)) => issues.into_iter().map(|i| i.key).collect(),
        Err(other) => panic!("unexpected error kind: {other}"),
    }
}

fn with(patch: Value) -> RunConfig {
    RunConfig::from_json(&patch.to_string()).unwrap()
}

/// Leaf paths of a JSON value, walked here rather than through the crate.
fn leaves(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            leaves(child, &key, out);
        }
    } else {
        out.push(prefix.to_string());
    }
}

#[test]
fn empty_file_gives_the_defaults() {
    assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    assert!(RunConfig::default().validate().is_ok());
}

#[test]
fn partial_sections_keep_the_other_defaults() {
    let cfg = with(json!({ "coupling": { "relaxation": 0.5 }, "geometry": { "target_edge_length": 0.3 } }));
    assert_eq!(cfg.coupling.relaxation, 0.5);
    assert_eq!(cfg.coupling.tol, RunConfig::default().coupling.tol);
    assert_eq!(cfg.geometry.channel_length, RunConfig::default().geometry.channel_length);
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    for bad in [
        json!({ "seeed": 1 }),
        json!({ "coupling": { "relaxtion": 0.5 } }),
        json!({ "coupling": { "fluid": { "tolerance": 1e-8 } } }),
        json!({ "physics": { "lame": { "lambda": 1.0, "mu": 1.0, "nu": 0.3 } } }),
        json!({ "geometry": { "obstacle": { "outer": { "x0": 1.0, "x1": 1.4, "y0": 0.3, "y1": 0.7, "z": 0 } } } }),
    ] {
        let err = RunConfig::from_json(&bad.to_string()).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{bad}: {err}");
    }
}

#[test]
fn violations_name_their_key() {
    let cases = [
        (json!({ "coupling": { "relaxation": 1.5 } }), "coupling.relaxation"),
        (json!({ "coupling": { "relaxation": 0.0 } }), "coupling.relaxation"),
        (json!({ "taylor": { "coupling": { "relaxation": -1.0 } } }), "taylor.coupling.relaxation"),
        (json!({ "physics": { "viscosity": 0.0 } }), "physics.viscosity"),
        (json!({ "physics": { "lame": { "lambda": 1.0, "mu": -1.0 } } }), "physics.lame"),
        (json!({ "geometry": { "target_edge_length": -0.1 } }), "geometry"),
        (json!({ "refinements": 9 }), "refinements"),
        (json!({ "fluid": { "max_iter": 0 } }), "fluid.max_iter"),
        (json!({ "sensitivity": { "window": 0 } }), "sensitivity.window"),
        (json!({ "taylor": { "steps": [1e-2, 1e-3] } }), "taylor.steps"),
        (json!({ "taylor": { "steps": [1e-3, 1e-2, 1e-4] } }), "taylor.steps"),
        (json!({ "mms": { "levels": 1 } }), "mms.levels"),
        (json!({ "probes": { "magnitudes": [] } }), "probes.magnitudes"),
        (json!({ "probes": { "samples": 0 } }), "probes.samples"),
    ];
    for (patch, key) in cases {
        let keys = issues_of(&with(patch.clone()));
        assert!(keys.iter().any(|k| k == key), "{patch}: {keys:?}");
    }
}

#[test]
fn all_violations_are_reported_together() {
    let keys = issues_of(&with(json!({ "coupling": { "relaxation": 2.0 }, "physics": { "viscosity": -1.0 } })));
    assert!(keys.contains(&"coupling.relaxation".to_string()));
    assert!(keys.contains(&"physics.viscosity".to_string()));
}

#[test]
fn relaxation_error_message_states_the_range() {
    let err = with(json!({ "coupling": { "relaxation": 1.5 } })).validate().unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("coupling.relaxation") && msg.contains("(0, 1]") && msg.contains("1.5"), "{msg}");
}

#[test]
fn schema_keys_match_an_independent_walk() {
    let mut expected = Vec::new();
    leaves(&serde_json::to_value(RunConfig::default()).unwrap(), "", &mut expected);
    assert_eq!(schema_keys(), expected);
    assert!(expected.contains(&"coupling.relaxation".to_string()));
    assert!(expected.contains(&"geometry.obstacle.inner.x0".to_string()));
}

#[test]
fn registry_reads_are_schema_paths() {
    let keys = schema_keys();
    for spec in &REGISTRY {
        for read in spec.reads {
            assert!(
                keys.iter().any(|k| k == read || k.starts_with(&format!("{read}."))),
                "{}: `{read}` is not a config key",
                spec.scenario
            );
        }
    }
}

#[test]
fn expansion_keeps_whole_segments_only() {
    let keys = expand_keys(&["probes.samples"]);
    assert_eq!(keys, vec!["probes.samples".to_string()]);
    // `physics` must not pick up unrelated keys sharing the prefix
    assert!(expand_keys(&["physics"]).iter().all(|k| k.starts_with("physics.")));
}

#[test]
fn projection_keeps_declared_keys_and_resets_the_rest() {
    let cfg = with(json!({
        "geometry": { "target_edge_length": 0.3 },
        "coupling": { "relaxation": 0.5 },
        "probes": { "samples": 7, "magnitudes": [0.2] },
        "seed": 11,
    }));
    let view = cfg.project(&["geometry", "probes.samples", "seed"]);
    let defaults = RunConfig::default();
    assert_eq!(view.geometry, cfg.geometry);
    assert_eq!(view.probes.samples, 7);
    assert_eq!(view.seed, 11);
    assert_eq!(view.coupling, defaults.coupling);
    assert_eq!(view.probes.magnitudes, defaults.probes.magnitudes);
}

#[test]
fn projection_onto_every_key_is_the_identity() {
    let cfg = with(json!({ "coupling": { "relaxation": 0.5 }, "refinements": 1, "seed": 3 }));
    let all: Vec<&str> = ["geometry", "refinements", "physics", "inflow", "direction", "fluid", "coupling"]
        .into_iter()
        .chain(["sensitivity", "taylor", "mms", "probes", "seed"])
        .collect();
    assert_eq!(cfg.project(&all), cfg);
}

#[test]
fn content_hash_tracks_the_config() {
    let a = RunConfig::default();
    let mut b = a.clone();
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(a.content_hash().len(), 64);
    b.seed = 1;
    assert_ne!(a.content_hash(), b.content_hash());
}

#[test]
fn describe_lists_exactly_the_registered_keys() {
    let schema = {
        let mut v = Vec::new();
        leaves(&serde_json::to_value(RunConfig::default()).unwrap(), "", &mut v);
        v
    };
    for scenario in Scenario::ALL {
        let text = describe(scenario);
        let listed: Vec<String> = text
            .lines()
            .skip_while(|l| *l != "config keys read:")
            .skip(1)
            .take_while(|l| !l.is_empty())
            .map(|l| l.trim().to_string())
            .collect();
        let expected: Vec<String> = schema
            .iter()
            .filter(|k| {
                scenario.spec().reads.iter().any(|r| *k == r || k.starts_with(&format!("{r}.")))
            })
            .cloned()
            .collect();
        assert!(!listed.is_empty(), "{scenario}");
        assert_eq!(listed, expected, "{scenario}");
        for a in scenario.spec().outputs {
            assert!(text.contains(a.file), "{scenario}: {}", a.file);
        }
    }
}

#[test]
fn scenario_names_round_trip() {
    for s in Scenario::ALL {
        assert_eq!(Scenario::from_name(s.name()), Some(s));
        assert_eq!(serde_json::to_value(s).unwrap(), json!(s.name()));
    }
    assert_eq!(Scenario::from_name("solve"), None);
}
