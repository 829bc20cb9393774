use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub score: f64,
    pub is_positive: bool,
}

impl ScoredItem {
    pub fn new(score: f64, is_positive: bool) -> Self {
        Self { score, is_positive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// One point per distinct score, thresholds descending.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub operating_point: RocPoint,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RocError {
    #[error("ROC needs at least one positive and one negative")]
    DegenerateClasses,
    #[error("scores must be finite")]
    NonFiniteScore,
}

/// Sweeps the decision threshold over the distinct scores, predicting
/// positive when `score >= threshold`. Equal scores form a single step, so
/// ties contribute half credit to the area.
pub fn roc(scored: &[ScoredItem], operating_threshold: f64) -> Result<RocCurve, RocError> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(RocError::NonFiniteScore);
    }
    let p = scored.iter().filter(|s| s.is_positive).count();
    let n = scored.len() - p;
    if p == 0 || n == 0 {
        return Err(RocError::DegenerateClasses);
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].is_positive {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }

    let mut auc = 0.0;
    let (mut x0, mut y0) = (0.0, 0.0);
    for pt in points.iter().chain(std::iter::once(&RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    })) {
        auc += (pt.fpr - x0) * (pt.tpr + y0) / 2.0;
        (x0, y0) = (pt.fpr, pt.tpr);
    }

    let above = |positive: bool| {
        scored
            .iter()
            .filter(|s| s.is_positive == positive && s.score >= operating_threshold)
            .count()
    };
    let operating_point = RocPoint {
        threshold: operating_threshold,
        fpr: above(false) as f64 / n as f64,
        tpr: above(true) as f64 / p as f64,
    };
    Ok(RocCurve {
        points,
        auc,
        operating_point,
    })
}

/// `threshold,fpr,tpr` rows with a header, LF line endings.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}
