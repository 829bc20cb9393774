//! PDF serialization, head truncation and equation-candidate segmentation.

mod pdf;
mod segment;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use segment::segment_equation_candidates;

/// Separator written between pages of the serialized stream.
pub const PAGE_BREAK: &str = "\n\u{c}\n";

/// Default head size handed to the gatekeeper, in characters.
pub const DEFAULT_HEAD_LIMIT: usize = 8000;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("document is encrypted and cannot be opened without a password")]
    EncryptedPdf,
    #[error("document has no extractable text layer (image-only scan?)")]
    NoTextLayer,
    #[error("malformed PDF: {0}")]
    MalformedPdf(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A PDF as received, before any parsing.
#[derive(Debug, Clone)]
pub struct RawDocument {
    pub doc_id: String,
    pub source_path: PathBuf,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RawDocument {
    pub fn new(doc_id: impl Into<String>, source_path: impl Into<PathBuf>, bytes: Vec<u8>) -> Self {
        let sha256 = sha256_hex(&bytes);
        Self {
            doc_id: doc_id.into(),
            source_path: source_path.into(),
            bytes,
            sha256,
        }
    }

    /// Reads a corpus file; the doc id is the file stem.
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| sha256_hex(&bytes)[..16].to_string());
        Ok(Self::new(doc_id, path, bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    DisplayMath,
    InlineMathCluster,
    TableRegion,
}

/// A region of the serialized text that may hold a constitutive equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateBlock {
    pub block_id: String,
    /// Half-open `[start, end)` in characters of `full_text`.
    pub span: [usize; 2],
    pub raw_text: String,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedDoc {
    pub doc_id: String,
    pub full_text: String,
    pub char_count: usize,
    pub equation_candidates: Vec<CandidateBlock>,
    pub parse_warnings: Vec<String>,
}

impl SerializedDoc {
    /// Builds a document from already-extracted text and segments it.
    pub fn from_text(doc_id: &str, text: &str) -> Self {
        let full_text = normalize_text(text);
        let mut doc = Self {
            doc_id: doc_id.to_string(),
            char_count: full_text.chars().count(),
            full_text,
            equation_candidates: Vec::new(),
            parse_warnings: Vec::new(),
        };
        let (blocks, warnings) = segment::segment(&doc.doc_id, &doc.full_text);
        doc.equation_candidates = blocks;
        doc.parse_warnings.extend(warnings);
        doc
    }

    /// Characters `[start, end)` of the full text.
    pub fn slice(&self, start: usize, end: usize) -> String {
        self.full_text.chars().skip(start).take(end.saturating_sub(start)).collect()
    }

    pub fn file_name(doc_id: &str) -> String {
        format!("{doc_id}.serialized.json")
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(Self::file_name(&self.doc_id));
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, json)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Prefix of a document handed to the gatekeeper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSegment {
    pub doc_id: String,
    pub text: String,
    pub limit_chars: usize,
    pub truncated: bool,
}

/// Serializes a PDF into a normalized text stream and segments it.
pub fn parse_pdf(raw: &RawDocument) -> Result<SerializedDoc, IngestError> {
    let extracted = pdf::extract_pages(&raw.bytes)?;
    let text = extracted.pages.join(PAGE_BREAK);
    let mut doc = SerializedDoc::from_text(&raw.doc_id, &text);
    let mut warnings = extracted.warnings;
    warnings.append(&mut doc.parse_warnings);
    doc.parse_warnings = warnings;
    Ok(doc)
}

/// Longest whitespace-bounded prefix of at most `limit_chars` characters.
///
/// The cut lands just before the last whitespace character at or under the
/// limit, so no token is split. Text without any whitespace in range is cut
/// hard at the limit.
pub fn truncate_head(doc: &SerializedDoc, limit_chars: usize) -> HeadSegment {
    let limit = limit_chars.max(1);
    let chars: Vec<char> = doc.full_text.chars().collect();
    let (text, truncated) = if chars.len() <= limit {
        (doc.full_text.clone(), false)
    } else {
        let cut = (0..=limit)
            .rev()
            .find(|&p| chars[p].is_whitespace())
            .unwrap_or(limit);
        (chars[..cut].iter().collect(), true)
    };
    HeadSegment {
        doc_id: doc.doc_id.clone(),
        text,
        limit_chars: limit,
        truncated,
    }
}

/// NFC, horizontal whitespace collapsed to one space, lines trimmed, blank
/// lines dropped. Page breaks (`\f`) survive as [`PAGE_BREAK`].
pub fn normalize_text(text: &str) -> String {
    use unicode_normalization::UnicodeNormalization;

    let nfc: String = text.nfc().collect();
    let pages: Vec<String> = nfc
        .split('\u{c}')
        .map(|page| {
            page.lines()
                .map(|line| {
                    line.split(|c: char| c.is_whitespace() || c.is_control())
                        .filter(|w| !w.is_empty())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect();
    if pages.iter().all(|p| p.is_empty()) {
        return String::new();
    }
    pages.join(PAGE_BREAK)
}
