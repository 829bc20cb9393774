//! The canonical constitutive model record and everything that checks it.
//!
//! A record is the 5-tuple of equation, symbol map, material metadata,
//! calibrated parameters and validation method, plus bookkeeping fields
//! (ids, mechanism class, confidence, review status).

mod grounding;
pub mod latex;
mod record_id;
mod scale;
pub mod units;
mod validate;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use grounding::{check_grounding, GroundingReport};
pub use latex::{
    extract_equation_symbols, normalize_equation, tokenize_equation, LatexError, SymbolWhitelist,
    Token, TokenKind,
};
pub use record_id::record_key_id;
pub use scale::{
    parse_scale_notation, resolve_scaled_value, shift_decimal, PlausibilityBand, PlausibilityTable,
    ResolvedValue, ScaleError,
};
pub use units::{normalize_unit, UnitConversion, UnitError};
pub use validate::{validate_record, ValidationError, ValidationReport};

/// One symbol of an equation bound to its physical meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolBinding {
    pub symbol: String,
    pub definition: String,
    pub unit: String,
}

impl SymbolBinding {
    pub fn new(symbol: &str, definition: &str, unit: &str) -> Self {
        Self {
            symbol: symbol.to_string(),
            definition: definition.to_string(),
            unit: unit.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionFlag {
    AsPrinted,
    ScaleResolved,
    Ambiguous,
}

/// A calibrated parameter value as printed in the paper and in SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub symbol: String,
    pub value_raw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_notation: Option<String>,
    pub unit_raw: String,
    pub value_si: f64,
    pub unit_si: String,
    pub provenance: String,
    pub resolution_flag: ResolutionFlag,
}

impl ParameterEntry {
    /// Builds a parameter from its printed form.
    ///
    /// The unit is converted to SI first; a scale notation, when present, is
    /// then resolved against `band` (which is expressed in SI). Without a band
    /// a scaled value can only be read literally and is flagged ambiguous.
    pub fn from_printed(
        symbol: &str,
        value_raw: f64,
        scale_notation: Option<&str>,
        unit_raw: &str,
        provenance: &str,
        band: Option<&PlausibilityBand>,
    ) -> Result<Self, ParameterError> {
        let conv = UnitConversion::parse(unit_raw)?;
        let base = shift_decimal(value_raw, conv.exponent);
        let (value_si, resolution_flag) = match scale_notation {
            None => (base, ResolutionFlag::AsPrinted),
            Some(notation) => match band {
                Some(band) => {
                    let resolved = resolve_scaled_value(base, Some(notation), band)?;
                    (resolved.value_si, resolved.resolution_flag)
                }
                None => {
                    let k = parse_scale_notation(notation)?;
                    (shift_decimal(base, k), ResolutionFlag::Ambiguous)
                }
            },
        };
        Ok(Self {
            symbol: symbol.to_string(),
            value_raw,
            scale_notation: scale_notation.map(str::to_string),
            unit_raw: unit_raw.to_string(),
            value_si,
            unit_si: conv.unit_si,
            provenance: provenance.to_string(),
            resolution_flag,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParameterError {
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    Stone,
    Brick,
    Mortar,
    Timber,
    Earthen,
    ClaySuspension,
    CompositeMasonry,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialMeta {
    pub material_name: String,
    pub material_class: MaterialClass,
    pub provenance_note: String,
    pub test_conditions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationInfo {
    pub method: String,
    pub present: bool,
}

impl ValidationInfo {
    pub fn new(method: &str) -> Self {
        Self {
            method: method.to_string(),
            present: !method.trim().is_empty(),
        }
    }
}

/// Mechanism taxonomy used for the distribution statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismClass {
    ElastoPlasticity,
    FailureDamage,
    RheologyTimeDependent,
    Elasticity,
    Viscoelasticity,
    Hyperelasticity,
    CoupledEnvironmental,
    Other,
}

impl MechanismClass {
    pub const ALL: [MechanismClass; 8] = [
        MechanismClass::ElastoPlasticity,
        MechanismClass::FailureDamage,
        MechanismClass::RheologyTimeDependent,
        MechanismClass::Elasticity,
        MechanismClass::Viscoelasticity,
        MechanismClass::Hyperelasticity,
        MechanismClass::CoupledEnvironmental,
        MechanismClass::Other,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Unverified,
    Verified,
    Rejected,
    Edited,
}

macro_rules! snake_enum_str {
    ($ty:ty, $what:literal, [$($variant:ident => $name:literal),+ $(,)?]) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Self::$variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(format!(concat!("unknown ", $what, " `{}`"), other)),
                }
            }
        }
    };
}

snake_enum_str!(MaterialClass, "material class", [
    Stone => "stone",
    Brick => "brick",
    Mortar => "mortar",
    Timber => "timber",
    Earthen => "earthen",
    ClaySuspension => "clay_suspension",
    CompositeMasonry => "composite_masonry",
    Other => "other",
]);

snake_enum_str!(MechanismClass, "mechanism", [
    ElastoPlasticity => "elasto_plasticity",
    FailureDamage => "failure_damage",
    RheologyTimeDependent => "rheology_time_dependent",
    Elasticity => "elasticity",
    Viscoelasticity => "viscoelasticity",
    Hyperelasticity => "hyperelasticity",
    CoupledEnvironmental => "coupled_environmental",
    Other => "other",
]);

snake_enum_str!(ReviewStatus, "review status", [
    Unverified => "unverified",
    Verified => "verified",
    Rejected => "rejected",
    Edited => "edited",
]);

snake_enum_str!(ResolutionFlag, "resolution flag", [
    AsPrinted => "as_printed",
    ScaleResolved => "scale_resolved",
    Ambiguous => "ambiguous",
]);

/// The canonical record: one constitutive model extracted from one paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveModelRecord {
    pub record_id: String,
    pub doc_id: String,
    pub equation_latex: String,
    pub symbol_map: Vec<SymbolBinding>,
    pub material: MaterialMeta,
    pub parameters: Vec<ParameterEntry>,
    pub validation: ValidationInfo,
    pub mechanism: MechanismClass,
    pub confidence: f64,
    pub review_status: ReviewStatus,
}

impl ConstitutiveModelRecord {
    /// Assembles a record and checks it against the full schema.
    ///
    /// The record id is derived from `(doc_id, canonical equation, material
    /// name)`, the same key the store deduplicates on.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        doc_id: &str,
        equation_latex: &str,
        symbol_map: Vec<SymbolBinding>,
        material: MaterialMeta,
        parameters: Vec<ParameterEntry>,
        validation: ValidationInfo,
        mechanism: MechanismClass,
        confidence: f64,
    ) -> Result<Self, ValidationReport> {
        let record_id = normalize_equation(equation_latex)
            .map(|canon| record_key_id(doc_id, &canon, &material.material_name))
            .unwrap_or_default();
        let record = Self {
            record_id,
            doc_id: doc_id.to_string(),
            equation_latex: equation_latex.to_string(),
            symbol_map,
            material,
            parameters,
            validation,
            mechanism,
            confidence,
            review_status: ReviewStatus::Unverified,
        };
        let report = validate_record(&record.to_json());
        if report.valid {
            Ok(record)
        } else {
            Err(report)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("record serializes")
    }

    /// Deduplication key: `(doc_id, canonical equation, case-folded material)`.
    pub fn dedup_key(&self) -> Result<(String, String, String), LatexError> {
        Ok((
            self.doc_id.clone(),
            normalize_equation(&self.equation_latex)?,
            self.material.material_name.trim().to_lowercase(),
        ))
    }
}
