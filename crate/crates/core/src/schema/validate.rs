//! Structural and cross-field validation of candidate records.
//!
//! Errors carry a JSONPath-like locator (`$.parameters[0].symbol`) so they can
//! be fed back into a repair prompt verbatim.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::latex::{normalize_symbol, tokenize_equation};
use super::scale::{parse_scale_notation, shift_decimal};
use super::units::UnitConversion;
use super::{MaterialClass, MechanismClass, ResolutionFlag, ReviewStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub json_path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.json_path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    fn from_errors(errors: Vec<ValidationError>) -> Self {
        Self {
            valid: errors.is_empty(),
            errors,
        }
    }

    /// Report for text that is not JSON at all.
    pub fn syntax_error(message: impl Into<String>) -> Self {
        Self::from_errors(vec![ValidationError {
            json_path: "$".into(),
            message: message.into(),
        }])
    }

    /// Re-roots every error path under `prefix` (e.g. `$.records[2]`).
    pub fn prefixed(mut self, prefix: &str) -> Self {
        for e in &mut self.errors {
            e.json_path = format!("{prefix}{}", &e.json_path[1..]);
        }
        self
    }
}

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

struct Checker {
    errors: Vec<ValidationError>,
}

impl Checker {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ValidationError {
            json_path: path.into(),
            message: message.into(),
        });
    }

    fn field<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.err(format!("{path}.{key}"), "required field is missing");
        }
        v
    }

    fn string<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v str> {
        match self.field(obj, path, key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(format!("{path}.{key}"), format!("expected string, found {}", kind(other)));
                None
            }
        }
    }

    fn non_empty<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v str> {
        let s = self.string(obj, path, key)?;
        if s.trim().is_empty() {
            self.err(format!("{path}.{key}"), "must not be empty");
            return None;
        }
        Some(s)
    }

    fn number(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match self.field(obj, path, key)? {
            Value::Number(n) => match n.as_f64() {
                Some(f) if f.is_finite() => Some(f),
                _ => {
                    self.err(format!("{path}.{key}"), "expected a finite number");
                    None
                }
            },
            other => {
                self.err(format!("{path}.{key}"), format!("expected number, found {}", kind(other)));
                None
            }
        }
    }

    fn boolean(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<bool> {
        match self.field(obj, path, key)? {
            Value::Bool(b) => Some(*b),
            other => {
                self.err(format!("{path}.{key}"), format!("expected boolean, found {}", kind(other)));
                None
            }
        }
    }

    fn object<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Map<String, Value>> {
        match self.field(obj, path, key)? {
            Value::Object(o) => Some(o),
            other => {
                self.err(format!("{path}.{key}"), format!("expected object, found {}", kind(other)));
                None
            }
        }
    }

    fn array<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Vec<Value>> {
        match self.field(obj, path, key)? {
            Value::Array(a) => Some(a),
            other => {
                self.err(format!("{path}.{key}"), format!("expected array, found {}", kind(other)));
                None
            }
        }
    }

    fn enumerated<T: std::str::FromStr>(
        &mut self,
        obj: &Map<String, Value>,
        path: &str,
        key: &str,
        allowed: &[&str],
    ) -> Option<T> {
        let s = self.string(obj, path, key)?;
        match s.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(
                    format!("{path}.{key}"),
                    format!("`{s}` is not one of: {}", allowed.join(", ")),
                );
                None
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

const MATERIAL_CLASSES: &[&str] = &[
    "stone", "brick", "mortar", "timber", "earthen", "clay_suspension", "composite_masonry", "other",
];
const MECHANISMS: &[&str] = &[
    "elasto_plasticity", "failure_damage", "rheology_time_dependent", "elasticity",
    "viscoelasticity", "hyperelasticity", "coupled_environmental", "other",
];
const REVIEW_STATUSES: &[&str] = &["unverified", "verified", "rejected", "edited"];
const RESOLUTION_FLAGS: &[&str] = &["as_printed", "scale_resolved", "ambiguous"];

/// Checks a candidate record against the record schema and its invariants.
///
/// Total: every problem becomes an entry in the report.
pub fn validate_record(candidate: &Value) -> ValidationReport {
    let Value::Object(root) = candidate else {
        return ValidationReport::syntax_error(format!("expected a record object, found {}", kind(candidate)));
    };
    let mut c = Checker { errors: Vec::new() };
    let p = "$";

    c.string(root, p, "record_id");
    c.non_empty(root, p, "doc_id");

    if let Some(eq) = c.non_empty(root, p, "equation_latex") {
        if let Err(e) = tokenize_equation(eq) {
            c.err("$.equation_latex", e.to_string());
        }
    }

    let mut keys = BTreeSet::new();
    if let Some(map) = c.array(root, p, "symbol_map") {
        for (i, entry) in map.iter().enumerate() {
            let ep = format!("$.symbol_map[{i}]");
            let Value::Object(b) = entry else {
                c.err(ep, format!("expected object, found {}", kind(entry)));
                continue;
            };
            if let Some(sym) = c.non_empty(b, &ep, "symbol") {
                match normalize_symbol(sym) {
                    Some(norm) => {
                        if !keys.insert(norm) {
                            c.err(format!("{ep}.symbol"), format!("symbol `{sym}` is bound more than once"));
                        }
                    }
                    None => c.err(
                        format!("{ep}.symbol"),
                        format!("`{sym}` is not a single identifier token"),
                    ),
                }
            }
            c.non_empty(b, &ep, "definition");
            c.string(b, &ep, "unit");
        }
    }

    if let Some(m) = c.object(root, p, "material") {
        c.non_empty(m, "$.material", "material_name");
        c.enumerated::<MaterialClass>(m, "$.material", "material_class", MATERIAL_CLASSES);
        c.string(m, "$.material", "provenance_note");
        c.string(m, "$.material", "test_conditions");
    }

    let review = c.enumerated::<ReviewStatus>(root, p, "review_status", REVIEW_STATUSES);

    if let Some(params) = c.array(root, p, "parameters") {
        for (i, entry) in params.iter().enumerate() {
            let ep = format!("$.parameters[{i}]");
            let Value::Object(param) = entry else {
                c.err(ep, format!("expected object, found {}", kind(entry)));
                continue;
            };
            check_parameter(&mut c, param, &ep, &keys, review);
        }
    }

    if let Some(v) = c.object(root, p, "validation") {
        let method = c.string(v, "$.validation", "method");
        let present = c.boolean(v, "$.validation", "present");
        if let (Some(method), Some(present)) = (method, present) {
            if present != !method.trim().is_empty() {
                c.err(
                    "$.validation.present",
                    "must be true exactly when a validation method is given",
                );
            }
        }
    }

    c.enumerated::<MechanismClass>(root, p, "mechanism", MECHANISMS);

    if let Some(conf) = c.number(root, p, "confidence") {
        if !(0.0..=1.0).contains(&conf) {
            c.err("$.confidence", "must lie in [0, 1]");
        }
    }

    ValidationReport::from_errors(c.errors)
}

fn check_parameter(
    c: &mut Checker,
    param: &Map<String, Value>,
    ep: &str,
    keys: &BTreeSet<String>,
    review: Option<ReviewStatus>,
) {
    if let Some(sym) = c.non_empty(param, ep, "symbol") {
        let bound = normalize_symbol(sym).is_some_and(|n| keys.contains(&n));
        if !bound {
            c.err(
                format!("{ep}.symbol"),
                format!("parameter symbol `{sym}` is not bound in symbol_map"),
            );
        }
    }
    let value_raw = c.number(param, ep, "value_raw");
    let scale = match param.get("scale_notation") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => match parse_scale_notation(s) {
            Ok(k) => Some(k),
            Err(e) => {
                c.err(format!("{ep}.scale_notation"), e.to_string());
                return;
            }
        },
        Some(other) => {
            c.err(
                format!("{ep}.scale_notation"),
                format!("expected string or null, found {}", kind(other)),
            );
            return;
        }
    };
    let unit_raw = c.string(param, ep, "unit_raw");
    let value_si = c.number(param, ep, "value_si");
    let unit_si = c.string(param, ep, "unit_si");
    c.string(param, ep, "provenance");
    let flag = c.enumerated::<ResolutionFlag>(param, ep, "resolution_flag", RESOLUTION_FLAGS);

    if flag == Some(ResolutionFlag::Ambiguous) && review.is_some_and(|r| r != ReviewStatus::Unverified) {
        c.err(
            format!("{ep}.resolution_flag"),
            "an ambiguous scale resolution requires review_status `unverified`",
        );
    }

    let (Some(value_raw), Some(unit_raw), Some(value_si), Some(unit_si), Some(flag)) =
        (value_raw, unit_raw, value_si, unit_si, flag)
    else {
        return;
    };

    let conv = UnitConversion::parse(unit_raw).ok();
    match (scale, conv) {
        (None, Some(conv)) => {
            if flag != ResolutionFlag::AsPrinted {
                c.err(format!("{ep}.resolution_flag"), "must be `as_printed` when there is no scale notation");
            }
            if !close(value_si, conv.to_si(value_raw)) {
                c.err(
                    format!("{ep}.value_si"),
                    format!("expected {} ({} {unit_raw} in SI)", conv.to_si(value_raw), value_raw),
                );
            }
            if unit_si != conv.unit_si {
                c.err(format!("{ep}.unit_si"), format!("expected `{}`", conv.unit_si));
            }
        }
        (None, None) => {
            // unsupported unit: value passes through and waits for review
            if flag == ResolutionFlag::ScaleResolved {
                c.err(format!("{ep}.resolution_flag"), "no scale notation to resolve");
            }
            if !close(value_si, value_raw) || unit_si != unit_raw {
                c.err(
                    format!("{ep}.unit_raw"),
                    format!("unsupported unit `{unit_raw}`: value_si/unit_si must repeat value_raw/unit_raw"),
                );
            }
        }
        (Some(k), conv) => {
            if flag == ResolutionFlag::AsPrinted {
                c.err(
                    format!("{ep}.resolution_flag"),
                    "a scaled value must be `scale_resolved` or `ambiguous`",
                );
            }
            let exp = conv.as_ref().map_or(0, |cv| cv.exponent);
            let candidates = [
                shift_decimal(value_raw, exp + k),
                shift_decimal(value_raw, exp - k),
                shift_decimal(value_raw, exp),
            ];
            if !candidates.iter().any(|cand| close(*cand, value_si)) {
                c.err(
                    format!("{ep}.value_si"),
                    format!(
                        "must be one of {:?}: value_raw shifted by the scale exponent ±{k} or unshifted",
                        candidates
                    ),
                );
            }
            let expected_unit = conv.map_or_else(|| unit_raw.to_string(), |cv| cv.unit_si);
            if unit_si != expected_unit {
                c.err(format!("{ep}.unit_si"), format!("expected `{expected_unit}`"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn good() -> Value {
        json!({
            "record_id": "rec-1",
            "doc_id": "doc-1",
            "equation_latex": "\\sigma = E \\epsilon",
            "symbol_map": [
                {"symbol": "\\sigma", "definition": "axial stress", "unit": "Pa"},
                {"symbol": "E", "definition": "Young's modulus", "unit": "Pa"},
                {"symbol": "\\epsilon", "definition": "axial strain", "unit": "dimensionless"}
            ],
            "material": {
                "material_name": "Ancient Sandstone",
                "material_class": "stone",
                "provenance_note": "quarry near the monument",
                "test_conditions": "20 °C, dry"
            },
            "parameters": [
                {"symbol": "E", "value_raw": 12.5, "unit_raw": "GPa", "value_si": 1.25e10,
                 "unit_si": "Pa", "provenance": "Table 2", "resolution_flag": "as_printed"}
            ],
            "validation": {"method": "uniaxial compression, triplicate", "present": true},
            "mechanism": "elasticity",
            "confidence": 0.9,
            "review_status": "unverified"
        })
    }

    fn paths(r: &ValidationReport) -> Vec<&str> {
        r.errors.iter().map(|e| e.json_path.as_str()).collect()
    }

    #[test]
    fn well_formed_record_is_valid() {
        let r = validate_record(&good());
        assert!(r.valid, "{:?}", r.errors);
        assert!(r.errors.is_empty());
    }

    #[test]
    fn missing_validation_field() {
        let mut v = good();
        v.as_object_mut().unwrap().remove("validation");
        let r = validate_record(&v);
        assert!(!r.valid);
        assert_eq!(paths(&r), ["$.validation"]);
    }

    #[test]
    fn parameter_symbol_not_in_map() {
        let mut v = good();
        v["parameters"][0]["symbol"] = json!("c");
        let r = validate_record(&v);
        assert_eq!(paths(&r), ["$.parameters[0].symbol"]);
    }

    #[test]
    fn non_object_is_root_error() {
        let r = validate_record(&json!([1, 2]));
        assert_eq!(paths(&r), ["$"]);
    }

    #[test]
    fn type_and_enum_errors() {
        let mut v = good();
        v["mechanism"] = json!("plasticity");
        v["confidence"] = json!(1.5);
        v["material"]["material_class"] = json!(3);
        v["validation"]["present"] = json!(false);
        let r = validate_record(&v);
        assert_eq!(
            paths(&r),
            [
                "$.material.material_class",
                "$.validation.present",
                "$.mechanism",
                "$.confidence"
            ]
        );
    }

    #[test]
    fn symbol_map_invariants() {
        let mut v = good();
        v["symbol_map"][1]["symbol"] = json!("\\sigma");
        v["symbol_map"][2]["symbol"] = json!("a+b");
        let r = validate_record(&v);
        assert_eq!(
            paths(&r),
            ["$.symbol_map[1].symbol", "$.symbol_map[2].symbol", "$.parameters[0].symbol"]
        );
    }

    #[test]
    fn unbalanced_equation() {
        let mut v = good();
        v["equation_latex"] = json!("\\frac{a}{b");
        assert_eq!(paths(&validate_record(&v)), ["$.equation_latex"]);
        v["equation_latex"] = json!("  ");
        assert_eq!(paths(&validate_record(&v)), ["$.equation_latex"]);
    }

    #[test]
    fn si_conversion_is_checked() {
        let mut v = good();
        v["parameters"][0]["value_si"] = json!(12.5);
        assert_eq!(paths(&validate_record(&v)), ["$.parameters[0].value_si"]);
    }

    #[test]
    fn scaled_parameter_rules() {
        let mut v = good();
        v["parameters"][0] = json!({
            "symbol": "E", "value_raw": 2.33, "scale_notation": "×10^3", "unit_raw": "Pa",
            "value_si": 2.33e-3, "unit_si": "Pa", "provenance": "Table 1",
            "resolution_flag": "scale_resolved"
        });
        assert!(validate_record(&v).valid);

        // invented digits
        v["parameters"][0]["value_si"] = json!(2.34e-3);
        assert_eq!(paths(&validate_record(&v)), ["$.parameters[0].value_si"]);

        // ambiguous needs unverified
        v["parameters"][0]["value_si"] = json!(2330.0);
        v["parameters"][0]["resolution_flag"] = json!("ambiguous");
        assert!(validate_record(&v).valid);
        v["review_status"] = json!("verified");
        assert_eq!(paths(&validate_record(&v)), ["$.parameters[0].resolution_flag"]);
    }

    #[test]
    fn unsupported_unit_passes_through() {
        let mut v = good();
        v["parameters"][0] = json!({
            "symbol": "E", "value_raw": 3.0, "unit_raw": "furlong", "value_si": 3.0,
            "unit_si": "furlong", "provenance": "text", "resolution_flag": "ambiguous"
        });
        assert!(validate_record(&v).valid, "{:?}", validate_record(&v).errors);
    }

    #[test]
    fn prefixing_paths() {
        let mut v = good();
        v.as_object_mut().unwrap().remove("validation");
        let r = validate_record(&v).prefixed("$.records[3]");
        assert_eq!(paths(&r), ["$.records[3].validation"]);
    }
}
