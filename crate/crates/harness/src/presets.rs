//! Built-in experiment presets, one or more per acceptance criterion.

/// Preset name, acceptance criterion it backs, and JSON source.
pub const PRESETS: &[(&str, u32, &str)] = &[
    ("wigner-roundtrip", 1, include_str!("../../../presets/wigner-roundtrip.json")),
    ("normalization-chain", 2, include_str!("../../../presets/normalization-chain.json")),
    ("weyl-l2-identity", 3, include_str!("../../../presets/weyl-l2-identity.json")),
    ("free-flow", 4, include_str!("../../../presets/free-flow.json")),
    ("theorem-a03", 5, include_str!("../../../presets/theorem-a03.json")),
    ("weyl-remainder", 6, include_str!("../../../presets/weyl-remainder.json")),
    ("exchange-subleading", 7, include_str!("../../../presets/exchange-subleading.json")),
    ("commutator-estimate", 8, include_str!("../../../presets/commutator-estimate.json")),
    ("wick-rule", 9, include_str!("../../../presets/wick-rule.json")),
    ("araki-wyss", 10, include_str!("../../../presets/araki-wyss.json")),
    ("fluctuation", 11, include_str!("../../../presets/fluctuation.json")),
    ("nbody-trend", 12, include_str!("../../../presets/nbody-trend.json")),
    ("conservation-hf", 13, include_str!("../../../presets/conservation-hf.json")),
    ("conservation-vlasov", 13, include_str!("../../../presets/conservation-vlasov.json")),
    ("conservation-newton", 13, include_str!("../../../presets/conservation-newton.json")),
    ("determinism", 14, include_str!("../../../presets/determinism.json")),
];

/// JSON source of the preset called `name`.
pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.2)
}

/// Names of the presets backing `criterion`.
pub fn for_criterion(criterion: u32) -> Vec<&'static str> {
    PRESETS.iter().filter(|p| p.1 == criterion).map(|p| p.0).collect()
}
