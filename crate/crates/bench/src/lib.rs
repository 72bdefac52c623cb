//! Fixtures shared by the throughput benchmarks.

use imbstream::{
    collect_stream, validate_config, ClassSpec, GeneratorKind, LabeledExample, StreamConfig, TypeProportions,
    ValidatedConfig,
};

/// Three-class Old-generator stream with 10% minorities, 40% of them borderline.
pub fn fixture_config(length: u64) -> ValidatedConfig {
    let mut cfg = StreamConfig::new(
        "bench",
        vec![
            ClassSpec::majority("c0", 0.8),
            ClassSpec::minority("c1", 0.1).with_types(TypeProportions::borderline(0.4)),
            ClassSpec::minority("c2", 0.1).with_types(TypeProportions::borderline(0.4)),
        ],
        11,
    );
    cfg.generator = GeneratorKind::Old;
    cfg.length = Some(length);
    validate_config(&cfg).expect("fixture config is valid")
}

pub fn fixture_stream(length: u64) -> Vec<LabeledExample> {
    collect_stream(&fixture_config(length)).expect("fixture stream generates")
}
