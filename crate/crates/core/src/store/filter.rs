use serde::{Deserialize, Serialize};

use crate::schema::latex::normalize_symbol;
use crate::schema::{ConstitutiveModelRecord, MaterialClass, MechanismClass, ReviewStatus};

pub const MAX_PAGE_SIZE: u32 = 500;
pub const DEFAULT_PAGE_SIZE: u32 = 50;

/// Conjunctive search over stored records. Pages are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFilter {
    #[serde(default)]
    pub material_class: Option<MaterialClass>,
    #[serde(default)]
    pub material_name_substring: Option<String>,
    #[serde(default)]
    pub mechanism: Option<MechanismClass>,
    #[serde(default)]
    pub parameter_symbol: Option<String>,
    #[serde(default)]
    pub param_min_si: Option<f64>,
    #[serde(default)]
    pub param_max_si: Option<f64>,
    #[serde(default)]
    pub review_status: Option<ReviewStatus>,
    /// Free-text substring over material names, notes and symbol definitions.
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default = "default_page")]
    pub page: u32,
    #[serde(default = "default_page_size")]
    pub page_size: u32,
}

fn default_page() -> u32 {
    1
}

fn default_page_size() -> u32 {
    DEFAULT_PAGE_SIZE
}

impl Default for QueryFilter {
    fn default() -> Self {
        Self {
            material_class: None,
            material_name_substring: None,
            mechanism: None,
            parameter_symbol: None,
            param_min_si: None,
            param_max_si: None,
            review_status: None,
            text: None,
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad filter: {0}")]
pub struct BadFilter(pub String);

impl QueryFilter {
    pub fn validate(&self) -> Result<(), BadFilter> {
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return Err(BadFilter(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        if self.page == 0 {
            return Err(BadFilter("page numbers start at 1".into()));
        }
        let has_bounds = self.param_min_si.is_some() || self.param_max_si.is_some();
        if has_bounds && self.parameter_symbol.is_none() {
            return Err(BadFilter("parameter bounds require a parameter symbol".into()));
        }
        for b in [self.param_min_si, self.param_max_si].into_iter().flatten() {
            if !b.is_finite() {
                return Err(BadFilter("parameter bounds must be finite".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (self.param_min_si, self.param_max_si) {
            if lo > hi {
                return Err(BadFilter(format!("min {lo} exceeds max {hi}")));
            }
        }
        if let Some(sym) = &self.parameter_symbol {
            if normalize_symbol(sym).is_none() {
                return Err(BadFilter(format!("`{sym}` is not a single symbol")));
            }
        }
        Ok(())
    }
}

pub(crate) fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub(crate) fn search_text(r: &ConstitutiveModelRecord) -> String {
    let mut parts = vec![r.material.material_name.as_str(), r.material.provenance_note.as_str()];
    parts.extend(r.symbol_map.iter().map(|b| b.definition.as_str()));
    fold(&parts.join(" \u{1f} "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: u64,
    pub page: u32,
    pub page_size: u32,
}
