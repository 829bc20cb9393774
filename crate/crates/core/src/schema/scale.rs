//! Disambiguation of scaled table headers such as `η∞ × 10^3`.
//!
//! A header scale can mean "the printed value is in units of 10^k" or "the
//! printed value was multiplied by 10^k for legibility". Both readings, plus
//! the bare value, are checked against a plausibility band for the quantity.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResolutionFlag;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaleError {
    #[error("cannot parse scale notation `{0}`")]
    BadScaleNotation(String),
    #[error("plausibility band must satisfy lo < hi, got [{lo}, {hi}]")]
    BadBand { lo: f64, hi: f64 },
    #[error("no plausibility band for quantity `{0}`")]
    UnknownQuantity(String),
}

/// Multiplies by `10^k` by moving the decimal point of the shortest decimal
/// representation, so no binary rounding noise is introduced.
pub fn shift_decimal(value: f64, k: i32) -> f64 {
    if k == 0 || value == 0.0 || !value.is_finite() {
        return value;
    }
    let repr = format!("{value:e}");
    let (mantissa, exp) = repr.split_once('e').expect("{:e} always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    format!("{mantissa}e{}", exp + k)
        .parse()
        .expect("shifted literal parses")
}

/// Parses `×10^3`, `x 10^{-3}`, `\times 10^3`, `10³`, `1e3` into the exponent.
pub fn parse_scale_notation(notation: &str) -> Result<i32, ScaleError> {
    let bad = || ScaleError::BadScaleNotation(notation.to_string());
    let compact: String = notation
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '{' | '}' | '(' | ')' | '$'))
        .collect();
    let mut s = compact.as_str();
    for lead in ["\\times", "×", "x", "X", "*", "·", "\\cdot"] {
        if let Some(rest) = s.strip_prefix(lead) {
            s = rest;
            break;
        }
    }
    let exp_text: String = if let Some(rest) = s.strip_prefix("10^") {
        rest.to_string()
    } else if let Some(rest) = s.strip_prefix("10") {
        if rest.is_empty() {
            return Err(bad());
        }
        rest.chars()
            .map(|c| match c {
                '⁰' => '0',
                '¹' => '1',
                '²' => '2',
                '³' => '3',
                '⁴' => '4',
                '⁵' => '5',
                '⁶' => '6',
                '⁷' => '7',
                '⁸' => '8',
                '⁹' => '9',
                '⁻' => '-',
                '⁺' => '+',
                _ => '?',
            })
            .collect()
    } else if let Some(rest) = s.strip_prefix("1e").or_else(|| s.strip_prefix("1E")) {
        rest.to_string()
    } else {
        return Err(bad());
    };
    let exp_text = exp_text.replace('−', "-");
    let exp_text = exp_text.strip_prefix('+').unwrap_or(&exp_text);
    exp_text.parse::<i32>().map_err(|_| bad())
}

/// Physically plausible range for a quantity, in SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityBand {
    pub lo: f64,
    pub hi: f64,
    pub unit_si: String,
}

impl PlausibilityBand {
    pub fn new(lo: f64, hi: f64, unit_si: &str) -> Self {
        Self {
            lo,
            hi,
            unit_si: unit_si.to_string(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedValue {
    pub value_si: f64,
    pub resolution_flag: ResolutionFlag,
}

/// Picks the reading of a scaled value that falls in the plausibility band.
///
/// Candidates are `v·10^k`, `v·10^-k` and `v`. A unique in-band candidate is
/// returned as `scale_resolved`; otherwise the literal `v·10^k` reading is
/// returned as `ambiguous` so the record is held for human review.
pub fn resolve_scaled_value(
    value: f64,
    scale_notation: Option<&str>,
    band: &PlausibilityBand,
) -> Result<ResolvedValue, ScaleError> {
    if band.lo.partial_cmp(&band.hi) != Some(std::cmp::Ordering::Less) {
        return Err(ScaleError::BadBand {
            lo: band.lo,
            hi: band.hi,
        });
    }
    let Some(notation) = scale_notation else {
        return Ok(ResolvedValue {
            value_si: value,
            resolution_flag: ResolutionFlag::AsPrinted,
        });
    };
    let k = parse_scale_notation(notation)?;
    let literal = shift_decimal(value, k);
    let mut candidates = vec![literal, shift_decimal(value, -k), value];
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let in_band: Vec<f64> = candidates.into_iter().filter(|c| band.contains(*c)).collect();
    Ok(match in_band.as_slice() {
        [only] => ResolvedValue {
            value_si: *only,
            resolution_flag: ResolutionFlag::ScaleResolved,
        },
        _ => ResolvedValue {
            value_si: literal,
            resolution_flag: ResolutionFlag::Ambiguous,
        },
    })
}

/// Versioned quantity → band table, loaded from `plausibility.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityTable {
    pub version: String,
    pub bands: BTreeMap<String, PlausibilityBand>,
}

const DEFAULT_TABLE: &str = include_str!("../../assets/plausibility.json");

impl Default for PlausibilityTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TABLE).expect("bundled plausibility table is valid")
    }
}

impl PlausibilityTable {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn band(&self, quantity_kind: &str) -> Option<&PlausibilityBand> {
        self.bands.get(quantity_kind)
    }

    pub fn resolve(
        &self,
        value: f64,
        scale_notation: Option<&str>,
        quantity_kind: &str,
    ) -> Result<ResolvedValue, ScaleError> {
        let band = self
            .band(quantity_kind)
            .ok_or_else(|| ScaleError::UnknownQuantity(quantity_kind.to_string()))?;
        resolve_scaled_value(value, scale_notation, band)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notation_forms() {
        for (s, k) in [
            ("×10^3", 3),
            ("x 10^{3}", 3),
            ("\\times 10^{-3}", -3),
            ("× 10³", 3),
            ("×10⁻³", -3),
            ("10^3", 3),
            ("1e-4", -4),
            ("$\\times10^{+2}$", 2),
        ] {
            assert_eq!(parse_scale_notation(s), Ok(k), "{s}");
        }
        assert!(parse_scale_notation("×100").is_err());
        assert!(parse_scale_notation("scaled").is_err());
        assert!(parse_scale_notation("×10").is_err());
    }

    #[test]
    fn shifting_is_exact() {
        assert_eq!(shift_decimal(2.33, -3), 2.33e-3);
        assert_eq!(shift_decimal(2.33, 3), 2330.0);
        assert_eq!(shift_decimal(-4.1, 2), -410.0);
        assert_eq!(shift_decimal(0.1, 1), 1.0);
        assert_eq!(shift_decimal(0.0, 5), 0.0);
    }

    #[test]
    fn aqueous_suspension_viscosity() {
        let band = PlausibilityBand::new(1e-5, 1e-1, "Pa·s");
        let r = resolve_scaled_value(2.33, Some("×10^3"), &band).unwrap();
        assert_eq!(r.value_si, 2.33e-3);
        assert_eq!(r.resolution_flag, ResolutionFlag::ScaleResolved);
    }

    #[test]
    fn literal_reading_in_band() {
        let band = PlausibilityBand::new(1e2, 1e4, "Pa");
        let r = resolve_scaled_value(2.0, Some("×10^3"), &band).unwrap();
        assert_eq!(r.value_si, 2000.0);
        assert_eq!(r.resolution_flag, ResolutionFlag::ScaleResolved);
    }

    #[test]
    fn no_notation_is_as_printed() {
        let band = PlausibilityBand::new(0.0, 1.0, "Pa");
        let r = resolve_scaled_value(5.0, None, &band).unwrap();
        assert_eq!(r.value_si, 5.0);
        assert_eq!(r.resolution_flag, ResolutionFlag::AsPrinted);
    }

    #[test]
    fn ambiguity_falls_back_to_literal() {
        // everything in band
        let wide = PlausibilityBand::new(1e-9, 1e9, "Pa");
        let r = resolve_scaled_value(2.0, Some("×10^3"), &wide).unwrap();
        assert_eq!((r.value_si, r.resolution_flag), (2000.0, ResolutionFlag::Ambiguous));
        // nothing in band
        let narrow = PlausibilityBand::new(50.0, 60.0, "Pa");
        let r = resolve_scaled_value(2.0, Some("×10^3"), &narrow).unwrap();
        assert_eq!((r.value_si, r.resolution_flag), (2000.0, ResolutionFlag::Ambiguous));
    }

    #[test]
    fn bad_inputs() {
        let band = PlausibilityBand::new(1.0, 1.0, "Pa");
        assert!(matches!(
            resolve_scaled_value(1.0, Some("×10^3"), &band),
            Err(ScaleError::BadBand { .. })
        ));
        let band = PlausibilityBand::new(0.0, 1.0, "Pa");
        assert!(matches!(
            resolve_scaled_value(1.0, Some("times ten"), &band),
            Err(ScaleError::BadScaleNotation(_))
        ));
    }

    #[test]
    fn default_table_has_viscosity() {
        let t = PlausibilityTable::default();
        let r = t.resolve(2.33, Some("×10^3"), "viscosity_aqueous_suspension").unwrap();
        assert_eq!(r.value_si, 2.33e-3);
        for (kind, band) in &t.bands {
            assert!(band.lo < band.hi, "{kind}");
        }
    }
}
