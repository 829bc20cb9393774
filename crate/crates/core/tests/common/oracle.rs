//! Independent reference implementations the tests compare against.

use std::collections::{BTreeMap, BTreeSet};

use cmdb_core::eval::ScoredItem;
use cmdb_core::schema::latex::normalize_symbol;
use cmdb_core::schema::{MechanismClass, SymbolBinding};
use cmdb_core::store::{QueryFilter, Store, MAX_PAGE_SIZE};
use cmdb_core::ConstitutiveModelRecord;

pub const SYMBOLS: &[&str] = &[
    r"\sigma", r"\epsilon", "E", "D", "k", r"\alpha", "I_1", "J_2", r"\eta_\infty", "G", r"\lambda", "m", "w",
    r"\beta", "c", r"\tau", r"\sigma_{c0}", r"\dot{\gamma}",
];

/// `s0 = s1 + s2 s3 - \frac{s4}{s5} ...` over the chosen symbols.
pub fn equation_of(syms: &[&str]) -> String {
    let mut rhs = String::new();
    let mut i = 1;
    let mut op = 0;
    while i < syms.len() {
        let term = if i + 1 < syms.len() && op % 3 == 2 {
            i += 2;
            format!(r"\frac{{{}}}{{{}}}", syms[i - 2], syms[i - 1])
        } else if i + 1 < syms.len() && op % 3 == 1 {
            i += 2;
            format!("{} {}", syms[i - 2], syms[i - 1])
        } else {
            i += 1;
            syms[i - 1].to_string()
        };
        if !rhs.is_empty() {
            rhs.push_str(if op % 2 == 0 { " + " } else { " - " });
        }
        rhs.push_str(&term);
        op += 1;
    }
    if rhs.is_empty() {
        rhs.push('0');
    }
    format!("{} = {rhs}", syms[0])
}

/// Mann-Whitney form: P(score+ > score-) + P(tie) / 2.
pub fn pairwise_auc(items: &[ScoredItem]) -> f64 {
    let pos: Vec<f64> = items.iter().filter(|i| i.is_positive).map(|i| i.score).collect();
    let neg: Vec<f64> = items.iter().filter(|i| !i.is_positive).map(|i| i.score).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn scan(records: &[ConstitutiveModelRecord], f: &QueryFilter) -> Vec<String> {
    let fold = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let mut hits: Vec<&ConstitutiveModelRecord> = records
        .iter()
        .filter(|r| f.material_class.is_none_or(|c| r.material.material_class == c))
        .filter(|r| f.mechanism.is_none_or(|m| r.mechanism == m))
        .filter(|r| f.review_status.is_none_or(|s| r.review_status == s))
        .filter(|r| {
            f.material_name_substring.as_ref().is_none_or(|sub| {
                r.material.material_name.trim().to_lowercase().contains(&sub.trim().to_lowercase())
            })
        })
        .filter(|r| {
            f.text.as_ref().is_none_or(|q| {
                let mut hay = vec![fold(&r.material.material_name), fold(&r.material.provenance_note)];
                hay.extend(r.symbol_map.iter().map(|b| fold(&b.definition)));
                hay.iter().any(|h| h.contains(&fold(q)))
            })
        })
        .filter(|r| {
            f.parameter_symbol.as_ref().is_none_or(|sym| {
                let want = normalize_symbol(sym);
                let lo = f.param_min_si.unwrap_or(f64::NEG_INFINITY);
                let hi = f.param_max_si.unwrap_or(f64::INFINITY);
                r.parameters
                    .iter()
                    .any(|p| normalize_symbol(&p.symbol) == want && p.value_si >= lo && p.value_si <= hi)
            })
        })
        .collect();
    hits.sort_by(|a, b| (&a.material.material_name, &a.record_id).cmp(&(&b.material.material_name, &b.record_id)));
    hits.into_iter().map(|r| r.record_id.clone()).collect()
}

pub fn query_all(store: &Store, f: &QueryFilter) -> Vec<String> {
    let mut f = f.clone();
    f.page_size = MAX_PAGE_SIZE;
    f.page = 1;
    let mut out = Vec::new();
    loop {
        let page = store.query_models(&f).unwrap();
        let n = page.items.len();
        out.extend(page.items.into_iter().map(|s| s.record.record_id));
        if n < f.page_size as usize {
            assert_eq!(out.len() as u64, page.total);
            return out;
        }
        f.page += 1;
    }
}

pub fn filter_matrix() -> Vec<QueryFilter> {
    let base = QueryFilter::default();
    let mut m = vec![base.clone()];
    for c in super::MATERIAL_CLASSES {
        m.push(QueryFilter { material_class: Some(c), ..base.clone() });
    }
    for mech in MechanismClass::ALL {
        m.push(QueryFilter { mechanism: Some(mech), ..base.clone() });
    }
    for s in super::REVIEW_STATUSES {
        m.push(QueryFilter { review_status: Some(s), ..base.clone() });
    }
    for sub in ["mortar", "  LIME ", "oak", "zzz", "c"] {
        m.push(QueryFilter { material_name_substring: Some(sub.into()), ..base.clone() });
    }
    for q in ["cohesion", "Historic  WALL", "shear rate", "nothing like this"] {
        m.push(QueryFilter { text: Some(q.into()), ..base.clone() });
    }
    let params: [(&str, Option<f64>, Option<f64>); 6] = [
        ("E", None, None),
        ("E", Some(1e9), Some(5e11)),
        (r"\eta", None, Some(100.0)),
        ("c", Some(500.0), None),
        (r"\alpha", Some(10.0), Some(10.0)),
        ("k", Some(0.0), Some(1e6)),
    ];
    for (sym, lo, hi) in params {
        m.push(QueryFilter {
            parameter_symbol: Some(sym.into()),
            param_min_si: lo,
            param_max_si: hi,
            ..base.clone()
        });
    }
    m.push(QueryFilter {
        material_class: Some(super::MATERIAL_CLASSES[0]),
        mechanism: Some(MechanismClass::FailureDamage),
        text: Some("stress".into()),
        ..base.clone()
    });
    m.push(QueryFilter {
        review_status: Some(super::REVIEW_STATUSES[1]),
        parameter_symbol: Some("c".into()),
        param_max_si: Some(1e5),
        material_name_substring: Some("a".into()),
        ..base
    });
    m
}


/// Brute-force grounding verdict: the bound symbols are exactly `symbols`,
/// each bound once, with distinct case- and space-folded definitions.
/// Symbols must already be in canonical form.
pub fn grounded_by_sets(symbols: &[&str], map: &[SymbolBinding]) -> bool {
    let want: BTreeSet<&str> = symbols.iter().copied().collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for b in map {
        *seen.entry(b.symbol.as_str()).or_default() += 1;
    }
    let defs: BTreeSet<String> = map
        .iter()
        .map(|b| b.definition.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .collect();
    seen.keys().copied().collect::<BTreeSet<_>>() == want && seen.values().all(|n| *n == 1) && defs.len() == map.len()
}
