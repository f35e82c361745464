//! Serialized forms read back to the same values.

use frogline::commands::MpsInput;
use frogline::config::{DensitySpec, RunConfig, Sampler};
use frogline::io::{parse_pattern_jsonl, pattern_jsonl};
use frogline_core::measures::{discretize_initial, AtomicMeasure, GridDensity};
use frogline_core::ppp::{sample_j, PointPattern};
use frogline_core::rng::replica_stream;
use frogline_core::sites::SiteSystem;

fn roundtrip<T: serde::Serialize + for<'de> serde::Deserialize<'de> + PartialEq + std::fmt::Debug>(value: &T) {
    let text = serde_json::to_string(value).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, value);
}

#[test]
fn measures_and_systems() {
    let g = GridDensity::from_fn(0.0, 1.0, 0.01, |x| 1.0 + x.sin() / 3.0).unwrap();
    roundtrip(&g);
    roundtrip(&discretize_initial(&g, 0.05).unwrap());
    roundtrip(&AtomicMeasure::new(vec![(0.1, 1.0 / 3.0), (0.7, 2e-9)]).unwrap());
    roundtrip(&SiteSystem::nearest_neighbor(-2, 3, 0.7).unwrap());
    roundtrip(&MpsInput::three_site());
}

#[test]
fn mps_input_rejects_bad_rates() {
    let bad = r#"{"sites": [0, 1], "q": [[-1.0, 2.0], [0.0, 0.0]], "x1": [1, 0], "x2": [0, 1]}"#;
    assert!(serde_json::from_str::<MpsInput>(bad).is_err());
    let good = r#"{"sites": [0, 1], "q": [[-1.0, 1.0], [0.0, 0.0]], "x1": [1, 0], "x2": [0, 1]}"#;
    let input: MpsInput = serde_json::from_str(good).unwrap();
    assert_eq!(input.system.sites(), &[0, 1]);
}

#[test]
fn patterns() {
    let f = GridDensity::uniform(0.0, 1.0, 0.01, 1.0).unwrap();
    let j = sample_j(&f, 0.01, &mut replica_stream(3, 0)).unwrap();
    roundtrip(&j);
    let text = String::from_utf8(pattern_jsonl(j.points()).unwrap()).unwrap();
    let back = PointPattern::from_points(parse_pattern_jsonl(&text).unwrap(), j.r_min());
    assert_eq!(back, j);
}

#[test]
fn run_config_through_toml() {
    let mut cfg = RunConfig::default();
    cfg.model.x2_0 = DensitySpec::CustomGrid { left: 0.0, dx: 0.25, values: vec![1.0, 2.0, 0.5, 0.5] };
    cfg.sampling.sampler = Sampler::Space;
    cfg.output.run_id = Some("abc".into());
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text, None).unwrap(), cfg);
}
