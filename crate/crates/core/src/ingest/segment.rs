//! Equation-candidate segmentation over the serialized text.
//!
//! Three passes, each claiming character ranges the later passes skip:
//! delimited display math and tabular environments, `$..$` / `\(..\)` inline
//! math plus runs of numeric table rows, and finally free-text clusters of
//! math-looking words around a relation operator.

use super::{BlockKind, CandidateBlock, SerializedDoc};

const DISPLAY_ENVS: &[&str] = &["equation", "align", "eqnarray", "gather", "multline", "displaymath"];
const TABLE_ENVS: &[&str] = &["tabular", "table"];
const RELATIONS: &[char] = &['=', '≤', '≥', '<', '>', '≈', '∝', '≡', '≃', '∼'];
const OPERATORS: &[char] = &['+', '-', '−', '·', '×', '/', '*', '^', '(', ')', '[', ']', '{', '}', ',', '|'];
const SHORT_WORDS: &[&str] = &[
    "a", "A", "an", "An", "as", "As", "at", "At", "be", "by", "By", "if", "If", "in", "In", "is", "it",
    "It", "of", "on", "On", "or", "so", "to", "we", "We", "no", "do", "up", "I",
];

/// Recomputes the candidate blocks of a document.
///
/// Unbalanced delimiters are not errors here; they are returned as warnings
/// by [`SerializedDoc::from_text`] and the offending block is skipped.
pub fn segment_equation_candidates(doc: &SerializedDoc) -> Vec<CandidateBlock> {
    segment(&doc.doc_id, &doc.full_text).0
}

struct Claims {
    ranges: Vec<(usize, usize, BlockKind)>,
}

impl Claims {
    fn is_free(&self, start: usize, end: usize) -> bool {
        self.ranges.iter().all(|&(s, e, _)| end <= s || start >= e)
    }

    fn claim(&mut self, start: usize, end: usize, kind: BlockKind) {
        self.ranges.push((start, end, kind));
    }
}

pub(super) fn segment(doc_id: &str, text: &str) -> (Vec<CandidateBlock>, Vec<String>) {
    let chars: Vec<char> = text.chars().collect();
    let mut claims = Claims { ranges: Vec::new() };
    let mut warnings = Vec::new();

    display_pass(&chars, &mut claims, &mut warnings);
    inline_delimited_pass(&chars, &mut claims, &mut warnings);
    numeric_rows_pass(&chars, &mut claims);
    cluster_pass(&chars, &mut claims);

    let mut ranges = claims.ranges;
    ranges.sort_by_key(|&(s, e, _)| (s, e));
    let blocks = ranges
        .into_iter()
        .enumerate()
        .map(|(i, (s, e, kind))| CandidateBlock {
            block_id: format!("{doc_id}#{i}"),
            span: [s, e],
            raw_text: chars[s..e].iter().collect(),
            kind,
        })
        .collect();
    (blocks, warnings)
}

fn starts_with(chars: &[char], at: usize, pat: &str) -> bool {
    pat.chars().enumerate().all(|(k, p)| chars.get(at + k) == Some(&p))
}

fn find(chars: &[char], from: usize, pat: &str) -> Option<usize> {
    (from..chars.len()).find(|&i| starts_with(chars, i, pat))
}

/// Reads `\begin{name}` at `at`, returning the environment name and the
/// position after the closing brace.
fn begin_env(chars: &[char], at: usize) -> Option<(String, usize)> {
    if !starts_with(chars, at, "\\begin{") {
        return None;
    }
    let start = at + "\\begin{".len();
    let close = (start..chars.len()).take(32).find(|&i| chars[i] == '}')?;
    Some((chars[start..close].iter().collect(), close + 1))
}

fn display_pass(chars: &[char], claims: &mut Claims, warnings: &mut Vec<String>) {
    let mut i = 0;
    while i < chars.len() {
        let opener: Option<(String, BlockKind, usize)> = if starts_with(chars, i, "\\[") {
            Some(("\\]".into(), BlockKind::DisplayMath, i + 2))
        } else if starts_with(chars, i, "$$") {
            Some(("$$".into(), BlockKind::DisplayMath, i + 2))
        } else if let Some((name, after)) = begin_env(chars, i) {
            let base = name.trim_end_matches('*');
            if DISPLAY_ENVS.contains(&base) {
                Some((format!("\\end{{{name}}}"), BlockKind::DisplayMath, after))
            } else if TABLE_ENVS.contains(&base) {
                Some((format!("\\end{{{name}}}"), BlockKind::TableRegion, after))
            } else {
                None
            }
        } else {
            None
        };
        let Some((closer, kind, body)) = opener else {
            i += 1;
            continue;
        };
        match find(chars, body, &closer) {
            Some(end) => {
                let end = end + closer.chars().count();
                claims.claim(i, end, kind);
                i = end;
            }
            None => {
                let open: String = chars[i..body].iter().collect();
                warnings.push(format!(
                    "UnbalancedDelimiters: `{open}` at char {i} has no matching `{closer}`; block skipped"
                ));
                i = body;
            }
        }
    }
}

fn inline_delimited_pass(chars: &[char], claims: &mut Claims, warnings: &mut Vec<String>) {
    let mut i = 0;
    while i < chars.len() {
        if !claims.is_free(i, i + 1) {
            i += 1;
            continue;
        }
        let (closer, body) = if chars[i] == '$' && !(i > 0 && chars[i - 1] == '\\') {
            ("$", i + 1)
        } else if starts_with(chars, i, "\\(") {
            ("\\)", i + 2)
        } else {
            i += 1;
            continue;
        };
        // inline math never spans a paragraph
        let line_end = (body..chars.len()).find(|&j| chars[j] == '\n').unwrap_or(chars.len());
        let end = (body..line_end)
            .find(|&j| starts_with(chars, j, closer) && !(closer == "$" && chars[j - 1] == '\\'));
        match end {
            Some(end) if end > body && claims.is_free(i, end + closer.len()) => {
                claims.claim(i, end + closer.len(), BlockKind::InlineMathCluster);
                i = end + closer.len();
            }
            _ => {
                warnings.push(format!(
                    "UnbalancedDelimiters: inline math opened at char {i} is not closed on its line; block skipped"
                ));
                i = body;
            }
        }
    }
}

fn lines(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            out.push((start, i));
            start = i + 1;
        }
    }
    out.push((start, chars.len()));
    out
}

fn is_numeric_token(tok: &str) -> bool {
    let t = tok.trim_matches(|c: char| matches!(c, '(' | ')' | '%' | ',' | ';' | '±' | '*'));
    let t = t.replace('−', "-");
    !t.is_empty() && t.parse::<f64>().is_ok()
}

fn is_numeric_row(line: &str) -> bool {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let numeric = toks.iter().filter(|t| is_numeric_token(t)).count();
    numeric >= 2 && numeric * 5 >= toks.len() * 3
}

fn numeric_rows_pass(chars: &[char], claims: &mut Claims) {
    let lines = lines(chars);
    let mut run: Vec<(usize, usize)> = Vec::new();
    let flush = |run: &mut Vec<(usize, usize)>, claims: &mut Claims| {
        if run.len() >= 2 {
            let (s, e) = (run[0].0, run[run.len() - 1].1);
            claims.claim(s, e, BlockKind::TableRegion);
        }
        run.clear();
    };
    for &(s, e) in &lines {
        let line: String = chars[s..e].iter().collect();
        if e > s && claims.is_free(s, e) && is_numeric_row(&line) {
            run.push((s, e));
        } else {
            flush(&mut run, claims);
        }
    }
    flush(&mut run, claims);
}

fn is_greek_or_math(c: char) -> bool {
    matches!(c, '\u{0391}'..='\u{03A9}' | '\u{03B1}'..='\u{03C9}' | '\u{03D1}' | '\u{03D5}' | '\u{03F5}')
        || matches!(c, '\u{2200}'..='\u{22FF}' | '\u{2032}' | '\u{0307}' | '\u{2070}'..='\u{209F}')
}

fn has_relation(word: &str) -> bool {
    word.chars().any(|c| RELATIONS.contains(&c))
}

fn is_mathish(word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    if word.chars().all(|c| RELATIONS.contains(&c) || OPERATORS.contains(&c)) {
        return true;
    }
    if is_numeric_token(word) {
        return true;
    }
    if word.chars().any(|c| is_greek_or_math(c) || RELATIONS.contains(&c) || matches!(c, '_' | '^' | '\\')) {
        return true;
    }
    let n = word.chars().count();
    n <= 2 && word.chars().all(|c| c.is_alphanumeric() || OPERATORS.contains(&c)) && !SHORT_WORDS.contains(&word)
}

fn cluster_pass(chars: &[char], claims: &mut Claims) {
    for (ls, le) in lines(chars) {
        // words of the line with char spans, trailing sentence punctuation trimmed
        let mut words: Vec<(usize, usize)> = Vec::new();
        let mut i = ls;
        while i < le {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let s = i;
            while i < le && !chars[i].is_whitespace() {
                i += 1;
            }
            let mut e = i;
            while e > s && matches!(chars[e - 1], '.' | ',' | ';' | ':') {
                e -= 1;
            }
            if e > s {
                words.push((s, e));
            }
        }

        let mut k = 0;
        while k < words.len() {
            let word_text = |(s, e): (usize, usize)| chars[s..e].iter().collect::<String>();
            let usable = |w: (usize, usize)| claims.is_free(w.0, w.1) && is_mathish(&word_text(w));
            if !usable(words[k]) {
                k += 1;
                continue;
            }
            let start = k;
            let mut end = k;
            while end + 1 < words.len() && usable(words[end + 1]) {
                // a trimmed punctuation mark ends the formula
                if words[end].1 < words[end + 1].0 && !chars[words[end].1].is_whitespace() {
                    break;
                }
                end += 1;
            }
            let run = &words[start..=end];
            let texts: Vec<String> = run.iter().map(|&w| word_text(w)).collect();
            let relation = texts.iter().any(|t| has_relation(t));
            let operands = texts.iter().filter(|t| !t.chars().all(|c| RELATIONS.contains(&c))).count();
            if relation && operands >= 1 && (run.len() >= 2 || texts[0].chars().count() >= 3) {
                claims.claim(run[0].0, run[run.len() - 1].1, BlockKind::InlineMathCluster);
            }
            k = end + 1;
        }
    }
}
