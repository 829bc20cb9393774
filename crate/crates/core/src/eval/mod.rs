//! Scoring extracted records against expert annotations.

mod roc;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use roc::{roc, roc_csv, RocCurve, RocError, RocPoint, ScoredItem};

use crate::schema::latex::normalize_symbol;
use crate::schema::{normalize_equation, ConstitutiveModelRecord, MechanismClass, SymbolBinding};

/// One annotated model. `equation_canonical` is in [`normalize_equation`] form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtModel {
    pub equation_canonical: String,
    pub symbol_map: Vec<SymbolBinding>,
    pub material_name: String,
    pub mechanism: MechanismClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDoc {
    pub doc_id: String,
    pub gt_models: Vec<GtModel>,
    /// Evaluable candidate blocks in the document; the TN background.
    pub candidate_block_count: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("document sets differ: {0}")]
    MismatchedDocSets(String),
    #[error("ground truth line {line}: {message}")]
    BadGroundTruth { line: usize, message: String },
    #[error("candidate total {candidates} is smaller than tp+fp+fn = {matched}")]
    CandidateUndercount { candidates: u64, matched: u64 },
    #[error(transparent)]
    Roc(#[from] RocError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a JSON Lines ground-truth file. Equations are re-normalized so
/// hand-written annotations compare in canonical form.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthDoc>, EvalError> {
    parse_ground_truth(&std::fs::read_to_string(path)?)
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthDoc>, EvalError> {
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::BadGroundTruth { line: i + 1, message };
        let mut doc: GroundTruthDoc = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if doc.gt_models.len() as u64 > doc.candidate_block_count {
            return Err(bad(format!(
                "{} models but only {} candidate blocks",
                doc.gt_models.len(),
                doc.candidate_block_count
            )));
        }
        for m in &mut doc.gt_models {
            m.equation_canonical = normalize_equation(&m.equation_canonical).map_err(|e| bad(e.to_string()))?;
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(bad(format!("duplicate doc_id {}", doc.doc_id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub record_id: String,
    pub gt_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub doc_id: String,
    pub tp: Vec<MatchedPair>,
    /// Record ids of extractions with no annotated counterpart.
    pub fp: Vec<String>,
    /// Indices into the document's `gt_models` that nothing matched.
    #[serde(rename = "fn")]
    pub fn_: Vec<usize>,
}

fn casefold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn definitions(map: &[SymbolBinding]) -> BTreeMap<String, String> {
    map.iter()
        .map(|b| {
            let sym = normalize_symbol(&b.symbol).unwrap_or_else(|| b.symbol.clone());
            (sym, casefold(&b.definition))
        })
        .collect()
}

fn same_meaning(a: &[SymbolBinding], b: &[SymbolBinding]) -> bool {
    let (a, b) = (definitions(a), definitions(b));
    a.iter().all(|(sym, def)| b.get(sym).is_none_or(|other| other == def))
}

/// Greedy one-to-one matching in the order `extracted` is given.
///
/// A pair matches when the canonical equations are equal, the case-folded
/// material names are equal and every symbol bound on both sides carries the
/// same (case-folded) definition. An extraction whose equation does not
/// tokenize is a false positive.
pub fn match_extractions(extracted: &[ConstitutiveModelRecord], gt: &GroundTruthDoc) -> MatchOutcome {
    let mut used = vec![false; gt.gt_models.len()];
    let mut out = MatchOutcome {
        doc_id: gt.doc_id.clone(),
        ..MatchOutcome::default()
    };
    for e in extracted {
        let Ok(canon) = normalize_equation(&e.equation_latex) else {
            out.fp.push(e.record_id.clone());
            continue;
        };
        let material = casefold(&e.material.material_name);
        let hit = gt.gt_models.iter().enumerate().position(|(j, g)| {
            !used[j]
                && g.equation_canonical == canon
                && casefold(&g.material_name) == material
                && same_meaning(&e.symbol_map, &g.symbol_map)
        });
        match hit {
            Some(j) => {
                used[j] = true;
                out.tp.push(MatchedPair {
                    record_id: e.record_id.clone(),
                    gt_index: j,
                });
            }
            None => out.fp.push(e.record_id.clone()),
        }
    }
    out.fn_ = (0..gt.gt_models.len()).filter(|j| !used[*j]).collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// Sums match outcomes; true negatives are the candidate blocks left over.
pub fn confusion(outcomes: &[MatchOutcome], gts: &[GroundTruthDoc]) -> Result<ConfusionCounts, EvalError> {
    let a: BTreeSet<&str> = outcomes.iter().map(|o| o.doc_id.as_str()).collect();
    let b: BTreeSet<&str> = gts.iter().map(|g| g.doc_id.as_str()).collect();
    if a != b || a.len() != outcomes.len() {
        let only_out: Vec<&str> = a.difference(&b).copied().collect();
        let only_gt: Vec<&str> = b.difference(&a).copied().collect();
        return Err(EvalError::MismatchedDocSets(format!(
            "outcomes without ground truth {only_out:?}, ground truth without outcome {only_gt:?}, {} outcomes for {} docs",
            outcomes.len(),
            a.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for o in outcomes {
        c.tp += o.tp.len() as u64;
        c.fp += o.fp.len() as u64;
        c.fn_ += o.fn_.len() as u64;
    }
    let candidates: u64 = gts.iter().map(|g| g.candidate_block_count).sum();
    let matched = c.tp + c.fp + c.fn_;
    c.tn = candidates
        .checked_sub(matched)
        .ok_or(EvalError::CandidateUndercount { candidates, matched })?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rounds a fraction to a one-decimal percentage for display.
pub fn display_percent(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

/// Standard detection metrics. Any zero denominator yields 0.
pub fn metrics(c: &ConfusionCounts) -> MetricsReport {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        precision,
        recall,
        f1,
        fpr: ratio(c.fp, c.fp + c.tn),
        accuracy: ratio(c.tp + c.tn, c.tp + c.fp + c.fn_ + c.tn),
    }
}

impl MetricsReport {
    pub fn summary(&self) -> String {
        format!(
            "precision {:.1}%  recall {:.1}%  F1 {:.1}%  FPR {:.1}%  accuracy {:.1}%",
            display_percent(self.precision),
            display_percent(self.recall),
            display_percent(self.f1),
            display_percent(self.fpr),
            display_percent(self.accuracy)
        )
    }
}

/// Full evaluation of a set of extracted records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionCounts,
    pub metrics: MetricsReport,
    pub outcomes: Vec<MatchOutcome>,
    /// Absent when every scored item has the same label.
    pub roc: Option<RocCurve>,
}

/// Default confidence threshold for the reported ROC operating point.
pub const DEFAULT_OPERATING_THRESHOLD: f64 = 0.5;

/// Groups `records` by document (keeping their relative order), matches each
/// group and scores the whole run.
///
/// ROC items: every extraction scored by its confidence (positive when it is a
/// TP), every missed GT model as a positive at score 0 and every true negative
/// as a negative at score 0.
pub fn evaluate(
    records: &[ConstitutiveModelRecord],
    gts: &[GroundTruthDoc],
    operating_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let known: BTreeSet<&str> = gts.iter().map(|g| g.doc_id.as_str()).collect();
    let stray: BTreeSet<&str> = records
        .iter()
        .map(|r| r.doc_id.as_str())
        .filter(|d| !known.contains(d))
        .collect();
    if !stray.is_empty() {
        return Err(EvalError::MismatchedDocSets(format!("records for documents without ground truth: {stray:?}")));
    }
    let mut by_doc: BTreeMap<&str, Vec<ConstitutiveModelRecord>> = BTreeMap::new();
    for r in records {
        by_doc.entry(r.doc_id.as_str()).or_default().push(r.clone());
    }
    let outcomes: Vec<MatchOutcome> = gts
        .iter()
        .map(|g| match_extractions(by_doc.get(g.doc_id.as_str()).map_or(&[][..], Vec::as_slice), g))
        .collect();
    let confusion = confusion(&outcomes, gts)?;

    let confidence: BTreeMap<&str, f64> = records.iter().map(|r| (r.record_id.as_str(), r.confidence)).collect();
    let mut items = Vec::new();
    for o in &outcomes {
        items.extend(o.tp.iter().map(|p| ScoredItem::new(confidence[p.record_id.as_str()], true)));
        items.extend(o.fp.iter().map(|id| ScoredItem::new(confidence[id.as_str()], false)));
        items.extend(o.fn_.iter().map(|_| ScoredItem::new(0.0, true)));
    }
    items.extend((0..confusion.tn).map(|_| ScoredItem::new(0.0, false)));
    let roc = match roc(&items, operating_threshold) {
        Ok(curve) => Some(curve),
        Err(RocError::DegenerateClasses) => None,
        Err(e) => return Err(e.into()),
    };

    Ok(EvalReport {
        confusion,
        metrics: metrics(&confusion),
        outcomes,
        roc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{MaterialClass, MaterialMeta, ValidationInfo};

    fn record(doc: &str, eq: &str, material: &str, map: Vec<SymbolBinding>) -> ConstitutiveModelRecord {
        let mut r = ConstitutiveModelRecord::build(
            doc,
            eq,
            map,
            MaterialMeta {
                material_name: material.into(),
                material_class: MaterialClass::Stone,
                provenance_note: String::new(),
                test_conditions: String::new(),
            },
            vec![],
            ValidationInfo::new(""),
            MechanismClass::Elasticity,
            0.8,
        )
        .unwrap();
        r.confidence = 0.8;
        r
    }

    fn hooke_map() -> Vec<SymbolBinding> {
        vec![
            SymbolBinding::new("\\sigma", "stress", "Pa"),
            SymbolBinding::new("E", "Young's modulus", "Pa"),
            SymbolBinding::new("\\epsilon", "strain", "1"),
        ]
    }

    fn gt(doc: &str, models: Vec<GtModel>, candidates: u64) -> GroundTruthDoc {
        GroundTruthDoc {
            doc_id: doc.into(),
            gt_models: models,
            candidate_block_count: candidates,
        }
    }

    fn hooke_gt() -> GtModel {
        GtModel {
            equation_canonical: normalize_equation("\\sigma = E\\epsilon").unwrap(),
            symbol_map: vec![
                SymbolBinding::new("\\sigma", "Stress", "Pa"),
                SymbolBinding::new("E", "young's  modulus", "Pa"),
            ],
            material_name: "sandstone".into(),
            mechanism: MechanismClass::Elasticity,
        }
    }

    #[test]
    fn identical_extraction_is_tp() {
        let e = record("d", "\\sigma = E \\cdot \\epsilon", "Sandstone", hooke_map());
        let o = match_extractions(&[e], &gt("d", vec![hooke_gt()], 5));
        assert_eq!((o.tp.len(), o.fp.len(), o.fn_.len()), (1, 0, 0));
        let c = confusion(&[o], &[gt("d", vec![hooke_gt()], 5)]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 4 });
    }

    #[test]
    fn meaning_and_material_must_agree() {
        let mut map = hooke_map();
        map[1].definition = "elastic stiffness".into();
        let wrong_meaning = record("d", "\\sigma = E \\epsilon", "Sandstone", map);
        let wrong_material = record("d", "\\sigma = E \\epsilon", "Limestone", hooke_map());
        let o = match_extractions(&[wrong_meaning, wrong_material], &gt("d", vec![hooke_gt()], 5));
        assert_eq!((o.tp.len(), o.fp.len(), o.fn_), (0, 2, vec![0]));
    }

    #[test]
    fn greedy_in_order() {
        let a = record("d", "\\sigma = E \\epsilon", "Sandstone", hooke_map());
        let mut b = a.clone();
        b.record_id = "second".into();
        let o = match_extractions(&[a.clone(), b], &gt("d", vec![hooke_gt()], 5));
        assert_eq!(o.tp[0].record_id, a.record_id);
        assert_eq!(o.fp, vec!["second".to_string()]);
    }

    #[test]
    fn untokenizable_extraction_is_fp() {
        let mut e = record("d", "\\sigma = E \\epsilon", "Sandstone", hooke_map());
        e.equation_latex = "\\frac{".into();
        let o = match_extractions(&[e], &gt("d", vec![], 3));
        assert_eq!(o.fp.len(), 1);
    }

    #[test]
    fn confusion_checks_doc_sets() {
        let o = MatchOutcome {
            doc_id: "x".into(),
            ..MatchOutcome::default()
        };
        assert!(matches!(confusion(&[o], &[gt("d", vec![], 3)]), Err(EvalError::MismatchedDocSets(_))));
        let empty = MatchOutcome {
            doc_id: "d".into(),
            ..MatchOutcome::default()
        };
        assert_eq!(confusion(&[empty], &[gt("d", vec![], 10)]).unwrap().tn, 10);
    }

    #[test]
    fn metric_conventions() {
        let zero = metrics(&ConfusionCounts::default());
        assert_eq!((zero.precision, zero.recall, zero.f1, zero.fpr, zero.accuracy), (0.0, 0.0, 0.0, 0.0, 0.0));
        let ones = metrics(&ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!((ones.precision, ones.recall, ones.f1, ones.fpr), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn stray_records_rejected() {
        let e = record("elsewhere", "\\sigma = E \\epsilon", "Sandstone", hooke_map());
        assert!(matches!(
            evaluate(&[e], &[gt("d", vec![], 3)], 0.5),
            Err(EvalError::MismatchedDocSets(_))
        ));
    }

    #[test]
    fn gt_parsing() {
        let line = r#"{"doc_id":"d","gt_models":[{"equation_canonical":"\\sigma=E\\epsilon","symbol_map":[],"material_name":"x","mechanism":"elasticity"}],"candidate_block_count":1}"#;
        let docs = parse_ground_truth(line).unwrap();
        assert_eq!(docs[0].gt_models[0].equation_canonical, normalize_equation("\\sigma = E \\epsilon").unwrap());
        let over = r#"{"doc_id":"d","gt_models":[{"equation_canonical":"a=b","symbol_map":[],"material_name":"x","mechanism":"other"}],"candidate_block_count":0}"#;
        assert!(parse_ground_truth(over).is_err());
    }
}
