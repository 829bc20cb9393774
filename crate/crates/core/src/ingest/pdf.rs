//! Text extraction from PDF content streams.
//!
//! lopdf handles object parsing, decryption and font encodings (including
//! ToUnicode CMaps). Layout is ours: we follow the text matrix so that a
//! vertical move starts a new line and a horizontal jump inserts a space.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use lopdf::content::Content;
use lopdf::{Document, Encoding, Object};

use super::IngestError;

pub(super) struct Extracted {
    pub pages: Vec<String>,
    pub warnings: Vec<String>,
}

/// TJ adjustments below this (in thousandths of an em) read as a word gap.
const TJ_SPACE_THRESHOLD: f64 = -200.0;

pub(super) fn extract_pages(bytes: &[u8]) -> Result<Extracted, IngestError> {
    if !bytes.starts_with(b"%PDF-") {
        return Err(IngestError::MalformedPdf("missing %PDF- header".into()));
    }
    let doc = match Document::load_mem(bytes) {
        Ok(doc) => doc,
        Err(e) => {
            if contains(bytes, b"/Encrypt") {
                return Err(IngestError::EncryptedPdf);
            }
            return Err(IngestError::MalformedPdf(e.to_string()));
        }
    };
    let mut warnings = Vec::new();
    if doc.is_encrypted() {
        if doc.encryption_state.is_none() {
            return Err(IngestError::EncryptedPdf);
        }
        warnings.push("document is encrypted with an empty user password; decrypted".to_string());
    }

    let pages = doc.get_pages();
    if pages.is_empty() {
        return Err(IngestError::MalformedPdf("document has no pages".into()));
    }
    let mut out = Vec::with_capacity(pages.len());
    let mut any_images = false;
    let mut font_cache = FontCache::new();
    for (number, page_id) in pages {
        let fonts = page_fonts(&doc, page_id, number, &mut font_cache, &mut warnings);
        let content = doc
            .get_page_content(page_id)
            .map_err(|e| IngestError::MalformedPdf(format!("page {number}: {e}")))?;
        let content = Content::decode(&content)
            .map_err(|e| IngestError::MalformedPdf(format!("page {number} content stream: {e}")))?;
        let text = PageText::new(&fonts).run(&content, number, &mut warnings);
        if text.trim().is_empty() && page_has_images(&doc, page_id, &content) {
            any_images = true;
        }
        out.push(text);
    }
    if any_images && out.iter().all(|p| p.trim().is_empty()) {
        return Err(IngestError::NoTextLayer);
    }
    Ok(Extracted { pages: out, warnings })
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

struct FontInfo<'a> {
    encoding: Option<Encoding<'a>>,
    two_byte: bool,
}

/// Decoded fonts keyed by dictionary address. Pages usually share fonts and
/// building a ToUnicode map is expensive.
type FontCache<'a> = HashMap<*const lopdf::Dictionary, Rc<FontInfo<'a>>>;

fn page_fonts<'a>(
    doc: &'a Document,
    page_id: lopdf::ObjectId,
    number: u32,
    cache: &mut FontCache<'a>,
    warnings: &mut Vec<String>,
) -> BTreeMap<Vec<u8>, Rc<FontInfo<'a>>> {
    let Ok(fonts) = doc.get_page_fonts(page_id) else {
        warnings.push(format!("page {number}: unreadable font resources"));
        return BTreeMap::new();
    };
    fonts
        .into_iter()
        .map(|(name, dict)| {
            if let Some(info) = cache.get(&(dict as *const _)) {
                return (name, info.clone());
            }
            let two_byte = dict.get(b"Subtype").and_then(Object::as_name).is_ok_and(|s| s == b"Type0");
            let encoding = match dict.get_font_encoding(doc) {
                Ok(enc) => Some(enc),
                Err(e) => {
                    warnings.push(format!(
                        "page {number}: font /{}: {e}; falling back to Latin-1",
                        String::from_utf8_lossy(&name)
                    ));
                    None
                }
            };
            let info = Rc::new(FontInfo { encoding, two_byte });
            cache.insert(dict as *const _, info.clone());
            (name, info)
        })
        .collect()
}

fn page_has_images(doc: &Document, page_id: lopdf::ObjectId, content: &Content) -> bool {
    if doc.get_page_images(page_id).is_ok_and(|imgs| !imgs.is_empty()) {
        return true;
    }
    content.operations.iter().any(|op| op.operator == "BI" || op.operator == "Do")
}

fn number(obj: &Object) -> Option<f64> {
    match obj {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(*r as f64),
        _ => None,
    }
}

fn numbers<const N: usize>(operands: &[Object]) -> Option<[f64; N]> {
    if operands.len() < N {
        return None;
    }
    let mut out = [0.0; N];
    for (slot, obj) in out.iter_mut().zip(operands) {
        *slot = number(obj)?;
    }
    Some(out)
}

struct PageText<'f, 'a> {
    fonts: &'f BTreeMap<Vec<u8>, Rc<FontInfo<'a>>>,
    font: Option<&'f FontInfo<'a>>,
    text: String,
    /// Line-start position of the current line (text line matrix translation).
    line: (f64, f64),
    leading: f64,
    last_y: Option<f64>,
    pending_space: bool,
}

impl<'f, 'a> PageText<'f, 'a> {
    fn new(fonts: &'f BTreeMap<Vec<u8>, Rc<FontInfo<'a>>>) -> Self {
        Self {
            fonts,
            font: None,
            text: String::new(),
            line: (0.0, 0.0),
            leading: 0.0,
            last_y: None,
            pending_space: false,
        }
    }

    fn run(mut self, content: &Content, page: u32, warnings: &mut Vec<String>) -> String {
        for op in &content.operations {
            let args = &op.operands;
            match op.operator.as_str() {
                "BT" => self.line = (0.0, 0.0),
                "Tf" => {
                    let name = args.first().and_then(|o| o.as_name().ok());
                    self.font = name.and_then(|n| self.fonts.get(n)).map(|f| &**f);
                    if self.font.is_none() {
                        warnings.push(format!("page {page}: unknown font resource in Tf"));
                    }
                }
                "TL" => {
                    if let Some([l]) = numbers::<1>(args) {
                        self.leading = l;
                    }
                }
                "Td" => {
                    if let Some([tx, ty]) = numbers::<2>(args) {
                        self.move_to(self.line.0 + tx, self.line.1 + ty);
                    }
                }
                "TD" => {
                    if let Some([tx, ty]) = numbers::<2>(args) {
                        self.leading = -ty;
                        self.move_to(self.line.0 + tx, self.line.1 + ty);
                    }
                }
                "Tm" => {
                    if let Some([_, _, _, _, e, f]) = numbers::<6>(args) {
                        self.move_to(e, f);
                    }
                }
                "T*" => self.next_line(),
                "Tj" => {
                    if let Some(Object::String(bytes, _)) = args.first() {
                        self.show(bytes);
                    }
                }
                "'" => {
                    self.next_line();
                    if let Some(Object::String(bytes, _)) = args.first() {
                        self.show(bytes);
                    }
                }
                "\"" => {
                    self.next_line();
                    if let Some(Object::String(bytes, _)) = args.get(2) {
                        self.show(bytes);
                    }
                }
                "TJ" => {
                    if let Some(Object::Array(items)) = args.first() {
                        for item in items {
                            match item {
                                Object::String(bytes, _) => self.show(bytes),
                                other => {
                                    if number(other).is_some_and(|n| n < TJ_SPACE_THRESHOLD) {
                                        self.pending_space = true;
                                    }
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        self.text
    }

    fn next_line(&mut self) {
        let (x, y) = self.line;
        self.move_to(x, y - self.leading);
    }

    fn move_to(&mut self, x: f64, y: f64) {
        let same_line = self.last_y.is_some_and(|ly| (ly - y).abs() < 0.5);
        if !same_line && !self.text.is_empty() {
            self.newline();
        } else if same_line && (x - self.line.0).abs() > f64::EPSILON {
            self.pending_space = true;
        }
        self.line = (x, y);
    }

    fn newline(&mut self) {
        if !self.text.ends_with('\n') {
            self.text.push('\n');
        }
        self.pending_space = false;
    }

    fn show(&mut self, bytes: &[u8]) {
        let decoded = self.decode(bytes);
        if decoded.is_empty() {
            return;
        }
        if self.pending_space && !self.text.is_empty() && !self.text.ends_with(char::is_whitespace) {
            self.text.push(' ');
        }
        self.pending_space = false;
        self.text.push_str(&decoded);
        self.last_y = Some(self.line.1);
    }

    fn decode(&self, bytes: &[u8]) -> String {
        match self.font {
            Some(FontInfo {
                encoding: Some(enc), ..
            }) => match enc.bytes_to_string(bytes) {
                Ok(s) => s,
                Err(_) => latin1(bytes),
            },
            Some(FontInfo { two_byte: true, .. }) => bytes
                .chunks(2)
                .filter_map(|c| {
                    let code = u32::from(c[0]) << 8 | u32::from(*c.get(1).unwrap_or(&0));
                    char::from_u32(code)
                })
                .collect(),
            _ => latin1(bytes),
        }
    }
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| char::from(b)).collect()
}
