//! Built-in gamma sequences, including the Widom-factor example families.
//!
//! The example families use `1/k` values, which violate `γ ≤ 1/4` for
//! `k < 4`. Presets shift the index by [`RECIPROCAL_SHIFT`] and record the
//! shift in [`GammaSpec::note`].

use rug::Rational;

use crate::error::{Error, Result};
use crate::gamma::{GammaSpec, Tail};

pub const RECIPROCAL_SHIFT: u64 = 3;

pub const PRESET_NAMES: [&str; 4] = [
    "uniform-quarter",
    "uniform-sixth",
    "example2-alternating",
    "example4-sparse",
];

pub fn uniform_quarter(precision_bits: u32) -> Result<GammaSpec> {
    GammaSpec::constant(Rational::from((1, 4)), precision_bits)
}

pub fn uniform_sixth(precision_bits: u32) -> Result<GammaSpec> {
    GammaSpec::constant(Rational::from((1, 6)), precision_bits)
}

/// `γ_{2j} = 1/6`, `γ_{2j-1} = 1/(j + 3)`.
pub fn example2_alternating(precision_bits: u32) -> Result<GammaSpec> {
    let spec = GammaSpec::new(
        Vec::new(),
        Tail::AlternatingReciprocal {
            even: Rational::from((1, 6)),
            shift: RECIPROCAL_SHIFT,
        },
        precision_bits,
    )?;
    Ok(spec.with_note(format!(
        "example2-alternating: gamma_(2j) = 1/6, gamma_(2j-1) = 1/(j+{RECIPROCAL_SHIFT}); \
         index shifted by {RECIPROCAL_SHIFT} so every gamma <= 1/4"
    )))
}

/// `γ_s = 1/6` except `γ_{s_k} = 1/(k + 3)` at the given strictly increasing
/// levels `s_1 < s_2 < …`.
pub fn example4_sparse(levels: &[u32], precision_bits: u32) -> Result<GammaSpec> {
    if levels.is_empty() {
        return Err(Error::Config("example4-sparse needs at least one level".into()));
    }
    if levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "example4-sparse levels must be strictly increasing and >= 1".into(),
        ));
    }
    let top = *levels.last().unwrap() as usize;
    let mut prefix = vec![Rational::from((1, 6)); top];
    for (k, &s) in levels.iter().enumerate() {
        prefix[s as usize - 1] = Rational::from((1u64, k as u64 + 1 + RECIPROCAL_SHIFT));
    }
    let spec = GammaSpec::new(prefix, Tail::Constant(Rational::from((1, 6))), precision_bits)?;
    let list = levels
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(",");
    Ok(spec.with_note(format!(
        "example4-sparse({list}): gamma_(s_k) = 1/(k+{RECIPROCAL_SHIFT}), otherwise 1/6; \
         index shifted by {RECIPROCAL_SHIFT} so every gamma <= 1/4"
    )))
}

/// Looks up a preset by name. `levels` is only used by `example4-sparse`.
pub fn load_preset(name: &str, levels: &[u32], precision_bits: u32) -> Result<GammaSpec> {
    match name {
        "uniform-quarter" => uniform_quarter(precision_bits),
        "uniform-sixth" => uniform_sixth(precision_bits),
        "example2-alternating" => example2_alternating(precision_bits),
        "example4-sparse" => example4_sparse(levels, precision_bits),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}
