//! SI normalization for parameter units.
//!
//! Grammar: SI-prefixed `Pa`, `N`, `m`, `s`, `g`, `K`, plus `%` and
//! `dimensionless`, combined with `·`, `*`, `.` or spaces and divided with `/`.
//! Powers are written `^n`, `^{-n}`, with Unicode superscripts, or as a bare
//! trailing integer (`m2`, `s-1`).
//!
//! Every factor in the grammar is a power of ten, so a conversion is carried
//! as a decimal exponent and applied by shifting the decimal point. That keeps
//! `2.5 mPa·s` at exactly the double nearest `2.5e-3`.

use serde::{Deserialize, Serialize};

use super::scale::shift_decimal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnitError {
    #[error("unsupported unit `{0}`")]
    UnsupportedUnit(String),
}

const BASES: &[(&str, &str, i32)] = &[
    // symbol, SI output, decimal exponent of the base relative to SI
    ("Pa", "Pa", 0),
    ("N", "N", 0),
    ("m", "m", 0),
    ("s", "s", 0),
    ("g", "kg", -3),
    ("K", "K", 0),
];

const PREFIXES: &[(&str, i32)] = &[
    ("da", 1),
    ("Y", 24),
    ("Z", 21),
    ("E", 18),
    ("P", 15),
    ("T", 12),
    ("G", 9),
    ("M", 6),
    ("k", 3),
    ("h", 2),
    ("d", -1),
    ("c", -2),
    ("m", -3),
    ("µ", -6),
    ("μ", -6),
    ("u", -6),
    ("n", -9),
    ("p", -12),
    ("f", -15),
    ("a", -18),
];

/// A parsed unit: multiply by `10^exponent` to reach `unit_si`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitConversion {
    pub exponent: i32,
    pub unit_si: String,
}

fn superscript_digit(c: char) -> Option<char> {
    Some(match c {
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
        _ => return None,
    })
}

/// Splits an atom such as `mm^2`, `s⁻¹`, `m2` into symbol and power.
fn split_power(atom: &str) -> Option<(String, i32)> {
    let mut symbol = String::new();
    let mut chars = atom.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_alphabetic() || c == '%' {
            symbol.push(c);
            chars.next();
        } else {
            break;
        }
    }
    let rest: String = chars.collect();
    if symbol.is_empty() {
        return None;
    }
    if rest.is_empty() {
        return Some((symbol, 1));
    }
    let mut digits: String = rest
        .trim_start_matches('^')
        .chars()
        .filter(|c| !matches!(c, '{' | '}'))
        .map(|c| superscript_digit(c).unwrap_or(c))
        .map(|c| if c == '−' { '-' } else { c })
        .collect();
    if digits.starts_with('+') {
        digits.remove(0);
    }
    let power: i32 = digits.parse().ok()?;
    if power == 0 {
        return None;
    }
    Some((symbol, power))
}

fn parse_symbol(symbol: &str) -> Option<(&'static str, i32)> {
    for (sym, si, exp) in BASES {
        if symbol == *sym {
            return Some((si, *exp));
        }
    }
    for (prefix, pexp) in PREFIXES {
        if let Some(rest) = symbol.strip_prefix(prefix) {
            for (sym, si, exp) in BASES {
                if rest == *sym {
                    return Some((si, exp + pexp));
                }
            }
        }
    }
    None
}

fn is_dimensionless(s: &str) -> bool {
    matches!(
        s.to_lowercase().as_str(),
        "" | "dimensionless" | "-" | "—" | "1" | "none" | "unitless"
    )
}

impl UnitConversion {
    pub fn parse(unit_raw: &str) -> Result<Self, UnitError> {
        let unsupported = || UnitError::UnsupportedUnit(unit_raw.to_string());
        let trimmed = unit_raw.trim();
        if is_dimensionless(trimmed) {
            return Ok(Self {
                exponent: 0,
                unit_si: "dimensionless".into(),
            });
        }

        // (si symbol, accumulated power) in first-appearance order
        let mut terms: Vec<(&'static str, i32)> = Vec::new();
        let mut exponent = 0i32;
        for (i, part) in trimmed.split('/').enumerate() {
            let sign = if i == 0 { 1 } else { -1 };
            let atoms: Vec<&str> = part
                .split(['·', '⋅', '*', '.', ' ', '×'])
                .filter(|a| !a.is_empty())
                .collect();
            if atoms.is_empty() {
                if i == 0 && part.trim() == "1" {
                    continue;
                }
                return Err(unsupported());
            }
            for atom in atoms {
                if i == 0 && atoms_is_one(atom) {
                    continue;
                }
                let (symbol, power) = split_power(atom).ok_or_else(unsupported)?;
                let power = power * sign;
                if symbol == "%" {
                    exponent += -2 * power;
                    continue;
                }
                let (si, exp) = parse_symbol(&symbol).ok_or_else(unsupported)?;
                exponent += exp * power;
                match terms.iter_mut().find(|(s, _)| *s == si) {
                    Some((_, p)) => *p += power,
                    None => terms.push((si, power)),
                }
            }
        }
        terms.retain(|(_, p)| *p != 0);
        Ok(Self {
            exponent,
            unit_si: format_terms(&terms),
        })
    }

    pub fn to_si(&self, value: f64) -> f64 {
        shift_decimal(value, self.exponent)
    }

    pub fn from_si(&self, value_si: f64) -> f64 {
        shift_decimal(value_si, -self.exponent)
    }
}

fn atoms_is_one(atom: &str) -> bool {
    atom == "1"
}

fn power_suffix(p: i32) -> String {
    if p == 1 {
        String::new()
    } else {
        format!("^{p}")
    }
}

fn format_terms(terms: &[(&str, i32)]) -> String {
    if terms.is_empty() {
        return "dimensionless".into();
    }
    let positive: Vec<_> = terms.iter().filter(|(_, p)| *p > 0).collect();
    let negative: Vec<_> = terms.iter().filter(|(_, p)| *p < 0).collect();
    if !positive.is_empty() && negative.len() == 1 {
        let num: Vec<String> = positive.iter().map(|(s, p)| format!("{s}{}", power_suffix(*p))).collect();
        let (s, p) = negative[0];
        return format!("{}/{s}{}", num.join("·"), power_suffix(-p));
    }
    terms
        .iter()
        .map(|(s, p)| format!("{s}{}", power_suffix(*p)))
        .collect::<Vec<_>>()
        .join("·")
}

/// Converts a value to SI. On an unsupported unit the caller should pass the
/// value through unchanged and flag it for review.
pub fn normalize_unit(value: f64, unit_raw: &str) -> Result<(f64, String), UnitError> {
    let conv = UnitConversion::parse(unit_raw)?;
    Ok((conv.to_si(value), conv.unit_si))
}
