use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::latex::{extract_equation_symbols, normalize_symbol, LatexError};
use super::SymbolBinding;

/// Outcome of checking that a symbol map is a bijection onto the equation's
/// symbol set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundingReport {
    pub grounded: bool,
    /// In the equation but not bound in the map.
    pub ungrounded_symbols: Vec<String>,
    /// Bound in the map but absent from the equation (or not a symbol at all).
    pub orphan_bindings: Vec<String>,
    /// Case-folded definitions shared by two or more symbols.
    pub duplicate_definitions: Vec<String>,
    /// Symbols bound more than once.
    #[serde(default)]
    pub duplicate_symbols: Vec<String>,
}

fn fold(definition: &str) -> String {
    definition.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Checks that `symbol_map` binds exactly the equation's symbols, each once,
/// with pairwise distinct definitions.
pub fn check_grounding(
    equation_latex: &str,
    symbol_map: &[SymbolBinding],
) -> Result<GroundingReport, LatexError> {
    let symbols = extract_equation_symbols(equation_latex)?;

    let mut keys = BTreeSet::new();
    let mut orphans = BTreeSet::new();
    let mut duplicate_symbols = BTreeSet::new();
    let mut definitions: BTreeMap<String, usize> = BTreeMap::new();

    for binding in symbol_map {
        *definitions.entry(fold(&binding.definition)).or_default() += 1;
        match normalize_symbol(&binding.symbol) {
            Some(sym) => {
                if !keys.insert(sym.clone()) {
                    duplicate_symbols.insert(sym.clone());
                }
                if !symbols.contains(&sym) {
                    orphans.insert(sym);
                }
            }
            None => {
                orphans.insert(binding.symbol.clone());
            }
        }
    }

    let ungrounded: Vec<String> = symbols.difference(&keys).cloned().collect();
    let duplicate_definitions: Vec<String> = definitions
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(d, _)| d)
        .collect();

    let mut report = GroundingReport {
        grounded: false,
        ungrounded_symbols: ungrounded,
        orphan_bindings: orphans.into_iter().collect(),
        duplicate_definitions,
        duplicate_symbols: duplicate_symbols.into_iter().collect(),
    };
    report.grounded = report.ungrounded_symbols.is_empty()
        && report.orphan_bindings.is_empty()
        && report.duplicate_definitions.is_empty()
        && report.duplicate_symbols.is_empty();
    Ok(report)
}

impl GroundingReport {
    /// Human-readable violations, one per problem.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.ungrounded_symbols {
            out.push(format!("symbol `{s}` appears in the equation but has no binding in symbol_map"));
        }
        for s in &self.orphan_bindings {
            out.push(format!("symbol_map binds `{s}` which does not appear in the equation"));
        }
        for d in &self.duplicate_definitions {
            out.push(format!("definition \"{d}\" is bound to more than one symbol"));
        }
        for s in &self.duplicate_symbols {
            out.push(format!("symbol `{s}` is bound more than once"));
        }
        out
    }
}
