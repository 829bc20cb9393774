//! Tokenizer for LaTeX math-mode strings.
//!
//! The token stream is deliberately shallow: it recognises identifiers,
//! numbers, operators, function-like commands and grouping characters, which
//! is all the grounding check and the equation canonicalizer need.
//!
//! Identifier rules:
//!
//! | input                          | identifier text     |
//! |--------------------------------|---------------------|
//! | `E`, `x`                       | `E`, `x`            |
//! | `\sigma`, `σ`                  | `\sigma`            |
//! | `\sigma_c`, `\sigma_{c}`       | `\sigma_c`          |
//! | `\sigma_{ij}`, `\sigma_{\text{eff}}` | `\sigma_{ij}`, `\sigma_{eff}` |
//! | `\eta_\infty`                  | `\eta_\infty`       |
//! | `\dot{\gamma}`, `\dot\gamma`   | `\dot{\gamma}`      |
//! | `E^*`, `\sigma'`, `\varepsilon^{pl}` | kept whole    |
//! | `\mathrm{Re}`                  | `\mathrm{Re}`       |
//!
//! A superscript is only folded into the identifier when it is a star, a
//! prime, a roman/text label, or a braced run of two or more letters; single
//! letters and numbers are powers and come out as `^` plus an operand.
//!
//! `d` immediately followed by a letter or Greek command is the differential
//! operator, as is `\mathrm{d}`. `\left`, `\right`, sizing commands, spacing
//! and alignment characters are dropped.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Number,
    Operator,
    Function,
    GroupOpen,
    GroupClose,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }

    pub fn id(text: &str) -> Self {
        Self::new(TokenKind::Identifier, text)
    }

    pub fn op(text: &str) -> Self {
        Self::new(TokenKind::Operator, text)
    }

    pub fn func(text: &str) -> Self {
        Self::new(TokenKind::Function, text)
    }

    pub fn num(text: &str) -> Self {
        Self::new(TokenKind::Number, text)
    }

    pub fn open(text: &str) -> Self {
        Self::new(TokenKind::GroupOpen, text)
    }

    pub fn close(text: &str) -> Self {
        Self::new(TokenKind::GroupClose, text)
    }

    pub fn is_differential(&self) -> bool {
        self.kind == TokenKind::Function && (self.text == "d" || self.text == "\\partial")
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Identifier => write!(f, "id:{}", self.text),
            TokenKind::Number => write!(f, "num:{}", self.text),
            TokenKind::Operator => write!(f, "op:{}", self.text),
            TokenKind::Function => write!(f, "fn:{}", self.text),
            TokenKind::GroupOpen => f.write_str("group"),
            TokenKind::GroupClose => f.write_str("/group"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatexError {
    #[error("unbalanced braces at character {position}")]
    UnbalancedBraces { position: usize },
}

/// Tokens plus the non-fatal diagnostics produced while scanning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tokenized {
    pub tokens: Vec<Token>,
    /// One entry per unknown command, tokenized as an opaque identifier.
    pub warnings: Vec<String>,
}

const GREEK: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "epsilon", "varepsilon", "zeta", "eta", "theta",
    "vartheta", "iota", "kappa", "varkappa", "lambda", "mu", "nu", "xi", "pi", "varpi", "rho",
    "varrho", "sigma", "varsigma", "tau", "upsilon", "phi", "varphi", "chi", "psi", "omega",
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon", "Phi", "Psi", "Omega",
    "ell", "hbar",
];

const FUNCTIONS: &[&str] = &[
    "frac", "dfrac", "tfrac", "cfrac", "sqrt", "exp", "ln", "log", "lg", "sin", "cos", "tan",
    "sec", "csc", "cot", "sinh", "cosh", "tanh", "coth", "arcsin", "arccos", "arctan", "max",
    "min", "sup", "inf", "lim", "det", "tr", "sgn", "sum", "prod", "int", "iint", "oint",
    "partial", "nabla", "erf", "arg",
];

/// Decorations that turn a base symbol into a distinct identifier.
const ACCENTS: &[&str] = &[
    "dot", "ddot", "bar", "hat", "tilde", "vec", "overline", "widehat", "widetilde", "mathbf",
    "boldsymbol", "bm", "mathcal", "mathbb", "mathit", "breve", "check",
];

const IGNORED: &[&str] = &[
    "left", "right", "big", "Big", "bigg", "Bigg", "bigl", "bigr", "Bigl", "Bigr", "biggl",
    "biggr", "Biggl", "Biggr", "middle", "quad", "qquad", "displaystyle", "textstyle",
    "scriptstyle", "nonumber", "notag", "limits", "nolimits", "thinspace", "medspace",
    "thickspace", "enspace", "hfill", "cr", "allowbreak",
];

/// Commands whose single braced argument is dropped along with the command.
const IGNORED_WITH_ARG: &[&str] = &["label", "tag", "text", "textrm", "textit", "mbox", "hspace", "vspace", "phantom"];

fn operator_command(name: &str) -> Option<&'static str> {
    Some(match name {
        "cdot" => "\\cdot",
        "times" => "\\times",
        "div" => "\\div",
        "pm" => "\\pm",
        "mp" => "\\mp",
        "le" | "leq" | "leqslant" => "\\leq",
        "ge" | "geq" | "geqslant" => "\\geq",
        "ne" | "neq" => "\\neq",
        "lt" => "<",
        "gt" => ">",
        "approx" => "\\approx",
        "equiv" => "\\equiv",
        "propto" => "\\propto",
        "sim" => "\\sim",
        "simeq" => "\\simeq",
        "cong" => "\\cong",
        "ll" => "\\ll",
        "gg" => "\\gg",
        "to" | "rightarrow" => "\\to",
        "leftarrow" => "\\leftarrow",
        "Rightarrow" | "implies" => "\\Rightarrow",
        "Leftrightarrow" | "iff" => "\\Leftrightarrow",
        "mid" => "\\mid",
        "ast" => "*",
        "star" => "\\star",
        "circ" => "\\circ",
        "otimes" => "\\otimes",
        "oplus" => "\\oplus",
        "cdots" | "ldots" | "dots" | "dotsb" | "dotsc" => "\\cdots",
        "in" => "\\in",
        "forall" => "\\forall",
        "exists" => "\\exists",
        "langle" => "\\langle",
        "rangle" => "\\rangle",
        "vert" | "lvert" | "rvert" => "|",
        "Vert" | "lVert" | "rVert" => "\\|",
        "colon" => ":",
        "prime" => "'",
        _ => return None,
    })
}

fn unicode_greek(c: char) -> Option<&'static str> {
    Some(match c {
        'α' => "\\alpha",
        'β' => "\\beta",
        'γ' => "\\gamma",
        'δ' => "\\delta",
        'ε' | 'ϵ' => "\\epsilon",
        'ζ' => "\\zeta",
        'η' => "\\eta",
        'θ' => "\\theta",
        'ϑ' => "\\vartheta",
        'ι' => "\\iota",
        'κ' => "\\kappa",
        'λ' => "\\lambda",
        'μ' | 'µ' => "\\mu",
        'ν' => "\\nu",
        'ξ' => "\\xi",
        'π' => "\\pi",
        'ρ' => "\\rho",
        'σ' => "\\sigma",
        'ς' => "\\varsigma",
        'τ' => "\\tau",
        'υ' => "\\upsilon",
        'φ' => "\\phi",
        'ϕ' => "\\varphi",
        'χ' => "\\chi",
        'ψ' => "\\psi",
        'ω' => "\\omega",
        'Γ' => "\\Gamma",
        'Δ' => "\\Delta",
        'Θ' => "\\Theta",
        'Λ' => "\\Lambda",
        'Ξ' => "\\Xi",
        'Π' => "\\Pi",
        'Σ' => "\\Sigma",
        'Φ' => "\\Phi",
        'Ψ' => "\\Psi",
        'Ω' => "\\Omega",
        _ => return None,
    })
}

fn unicode_operator(c: char) -> Option<Token> {
    Some(match c {
        '≤' => Token::op("\\leq"),
        '≥' => Token::op("\\geq"),
        '≠' => Token::op("\\neq"),
        '≈' => Token::op("\\approx"),
        '∝' => Token::op("\\propto"),
        '·' | '⋅' => Token::op("\\cdot"),
        '×' => Token::op("\\times"),
        '−' | '–' => Token::op("-"),
        '±' => Token::op("\\pm"),
        '→' => Token::op("\\to"),
        '∂' => Token::func("\\partial"),
        '∇' => Token::func("\\nabla"),
        '∑' => Token::func("\\sum"),
        '∫' => Token::func("\\int"),
        '√' => Token::func("\\sqrt"),
        '∞' => Token::num("\\infty"),
        _ => return None,
    })
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    depth: usize,
    out: &'a mut Tokenized,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn push(&mut self, tok: Token) {
        self.out.tokens.push(tok);
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    /// Reads `\name` starting at a backslash; returns the name (letters) or the
    /// single escaped symbol.
    fn read_command(&mut self) -> String {
        debug_assert_eq!(self.peek(), Some('\\'));
        self.pos += 1;
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        if self.pos == start {
            // control symbol
            if let Some(c) = self.peek() {
                self.pos += 1;
                return c.to_string();
            }
            return String::new();
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// Reads a braced group's raw contents; the cursor must sit on `{`.
    fn read_braced_raw(&mut self) -> Result<String, LatexError> {
        let open = self.pos;
        debug_assert_eq!(self.peek(), Some('{'));
        self.pos += 1;
        let start = self.pos;
        let mut depth = 1usize;
        while let Some(c) = self.peek() {
            match c {
                '\\' => {
                    self.pos += 2;
                    continue;
                }
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let raw: String = self.chars[start..self.pos].iter().collect();
                        self.pos += 1;
                        return Ok(raw);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(LatexError::UnbalancedBraces { position: open })
    }

    /// Reads one argument: a braced group, a command, or a single character.
    fn read_arg_raw(&mut self) -> Result<Option<String>, LatexError> {
        self.skip_ws();
        match self.peek() {
            Some('{') => self.read_braced_raw().map(Some),
            Some('\\') => {
                let name = self.read_command();
                Ok(Some(format!("\\{name}")))
            }
            Some(c) => {
                self.pos += 1;
                Ok(Some(c.to_string()))
            }
            None => Ok(None),
        }
    }

    fn run(&mut self) -> Result<(), LatexError> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '&' || c == '~' {
                self.pos += 1;
                continue;
            }
            match c {
                '\\' => self.command()?,
                '{' => {
                    self.depth += 1;
                    self.pos += 1;
                    self.push(Token::open("{"));
                }
                '}' => {
                    if self.depth == 0 {
                        return Err(LatexError::UnbalancedBraces { position: self.pos });
                    }
                    self.depth -= 1;
                    self.pos += 1;
                    self.push(Token::close("}"));
                }
                '(' | '[' => {
                    self.pos += 1;
                    self.push(Token::open(&c.to_string()));
                }
                ')' | ']' => {
                    self.pos += 1;
                    self.push(Token::close(&c.to_string()));
                }
                '0'..='9' => self.number(),
                '.' if matches!(self.peek_at(1), Some('0'..='9')) => self.number(),
                'd' if self.starts_differential(1) => {
                    self.pos += 1;
                    self.push(Token::func("d"));
                }
                c if c.is_ascii_alphabetic() => {
                    self.pos += 1;
                    self.identifier(c.to_string())?;
                }
                c if unicode_greek(c).is_some() => {
                    self.pos += 1;
                    self.identifier(unicode_greek(c).unwrap().to_string())?;
                }
                c if unicode_operator(c).is_some() => {
                    self.pos += 1;
                    self.push(unicode_operator(c).unwrap());
                }
                '\'' => {
                    self.pos += 1;
                    self.push(Token::op("'"));
                }
                '=' | '+' | '-' | '*' | '/' | '<' | '>' | ',' | ';' | ':' | '!' | '|' | '^'
                | '_' => {
                    self.pos += 1;
                    self.push(Token::op(&c.to_string()));
                }
                other => {
                    self.pos += 1;
                    if other.is_alphabetic() {
                        self.identifier(other.to_string())?;
                    } else {
                        self.push(Token::op(&other.to_string()));
                    }
                }
            }
        }
        if self.depth != 0 {
            return Err(LatexError::UnbalancedBraces { position: self.chars.len() });
        }
        Ok(())
    }

    /// True when the character at `pos + offset` begins a symbol that a
    /// preceding `d` would differentiate.
    fn starts_differential(&self, offset: usize) -> bool {
        match self.peek_at(offset) {
            Some(c) if c.is_ascii_alphabetic() || unicode_greek(c).is_some() => true,
            Some('\\') => {
                let name: String = self.chars[self.pos + offset + 1..]
                    .iter()
                    .take_while(|c| c.is_ascii_alphabetic())
                    .collect();
                GREEK.contains(&name.as_str()) || ACCENTS.contains(&name.as_str())
            }
            _ => false,
        }
    }

    fn number(&mut self) {
        let start = self.pos;
        while matches!(self.peek(), Some('0'..='9')) {
            self.pos += 1;
        }
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some('0'..='9')) {
            self.pos += 1;
            while matches!(self.peek(), Some('0'..='9')) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        self.push(Token::num(&text));
    }

    fn command(&mut self) -> Result<(), LatexError> {
        let name = self.read_command();
        let n = name.as_str();
        match n {
            "," | ";" | ":" | "!" | " " | ">" => {}
            "\\" => self.push(Token::op("\\\\")),
            "{" => self.push(Token::open("\\{")),
            "}" => self.push(Token::close("\\}")),
            "|" => self.push(Token::op("\\|")),
            "%" | "#" | "$" => self.push(Token::op(n)),
            _ if IGNORED.contains(&n) => {
                if matches!(n, "left" | "right" | "middle" | "bigl" | "bigr" | "Bigl" | "Bigr") {
                    self.skip_ws();
                    if self.peek() == Some('.') {
                        self.pos += 1;
                    }
                }
            }
            _ if IGNORED_WITH_ARG.contains(&n) => {
                self.read_arg_raw()?;
            }
            "infty" => self.push(Token::num("\\infty")),
            "mathrm" | "rm" | "operatorname" | "mathsf" => {
                let arg = if n == "rm" {
                    self.skip_ws();
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if !c.is_ascii_alphabetic() {
                            break;
                        }
                        s.push(c);
                        self.pos += 1;
                    }
                    s
                } else {
                    self.read_arg_raw()?.unwrap_or_default()
                };
                let arg: String = arg.chars().filter(|c| !c.is_whitespace()).collect();
                if arg == "d" {
                    self.push(Token::func("d"));
                } else if n == "operatorname" {
                    self.push(Token::func(&format!("\\operatorname{{{arg}}}")));
                } else if arg.is_empty() {
                } else {
                    self.identifier(format!("\\mathrm{{{arg}}}"))?;
                }
            }
            _ if GREEK.contains(&n) => self.identifier(format!("\\{n}"))?,
            _ if FUNCTIONS.contains(&n) => self.push(Token::func(&format!("\\{n}"))),
            _ if ACCENTS.contains(&n) => self.accent(n)?,
            _ => {
                if let Some(op) = operator_command(n) {
                    self.push(Token::op(op));
                } else {
                    self.out.warnings.push(format!("unknown command \\{n}"));
                    self.push(Token::id(&format!("\\{n}")));
                }
            }
        }
        Ok(())
    }

    /// `\dot{\gamma}` style decoration. If the argument is a single base
    /// symbol it becomes part of one identifier, otherwise the accent is a
    /// function applied to whatever follows.
    fn accent(&mut self, name: &str) -> Result<(), LatexError> {
        let save = self.pos;
        self.skip_ws();
        let base = match self.peek() {
            Some('{') => {
                let raw = self.read_braced_raw()?;
                single_base_symbol(&raw)
            }
            Some('\\') => {
                let cmd = self.read_command();
                if GREEK.contains(&cmd.as_str()) {
                    Some(format!("\\{cmd}"))
                } else {
                    None
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                self.pos += 1;
                Some(c.to_string())
            }
            Some(c) if unicode_greek(c).is_some() => {
                self.pos += 1;
                unicode_greek(c).map(str::to_string)
            }
            _ => None,
        };
        match base {
            Some(base) => self.identifier(format!("\\{name}{{{base}}}")),
            None => {
                self.pos = save;
                self.push(Token::func(&format!("\\{name}")));
                Ok(())
            }
        }
    }

    /// Consumes subscript / superscript / prime decorations after a base
    /// symbol and pushes the resulting identifier.
    fn identifier(&mut self, base: String) -> Result<(), LatexError> {
        let mut sub: Option<String> = None;
        let mut sup: Option<String> = None;
        let mut primes = 0usize;
        loop {
            let save = self.pos;
            self.skip_ws();
            match self.peek() {
                Some('_') if sub.is_none() => {
                    self.pos += 1;
                    match self.read_arg_raw()? {
                        Some(raw) => sub = Some(script_text(&raw)),
                        None => {
                            self.pos = save;
                            break;
                        }
                    }
                }
                Some('^') if sup.is_none() => {
                    let before = self.pos;
                    self.pos += 1;
                    let raw = self.read_arg_raw()?;
                    match raw.as_deref().and_then(attached_superscript) {
                        Some(s) if s == "'" => primes += 1,
                        Some(s) => sup = Some(s),
                        None => {
                            self.pos = before;
                            break;
                        }
                    }
                }
                Some('\'') => {
                    self.pos += 1;
                    primes += 1;
                }
                _ => {
                    self.pos = save;
                    break;
                }
            }
        }
        let mut text = base;
        if let Some(s) = sub {
            text.push('_');
            text.push_str(&s);
        }
        if let Some(s) = sup {
            text.push('^');
            text.push_str(&s);
        }
        for _ in 0..primes {
            text.push('\'');
        }
        self.push(Token::id(&text));
        Ok(())
    }
}

/// Strips spacing and text-mode wrappers from script content and maps
/// Unicode Greek to commands.
fn clean_script(raw: &str) -> String {
    let mut s = String::new();
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j].is_ascii_alphabetic() {
                j += 1;
            }
            let name: String = chars[start..j].iter().collect();
            if matches!(name.as_str(), "text" | "mathrm" | "rm" | "textrm" | "mathit" | "mbox") {
                i = j;
                continue;
            }
            if name.is_empty() {
                // control symbol such as \, : drop spacing ones
                if j < chars.len() && !matches!(chars[j], ',' | ';' | ':' | '!' | ' ') {
                    s.push('\\');
                    s.push(chars[j]);
                }
                i = j + 1;
                continue;
            }
            s.push('\\');
            s.push_str(&name);
            // keep a separator when a letter follows a command name
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
            if k < chars.len() && chars[k].is_ascii_alphabetic() && k > j {
                s.push(' ');
            }
            i = k;
            continue;
        }
        if c == '{' || c == '}' || c.is_whitespace() {
            i += 1;
            continue;
        }
        if let Some(g) = unicode_greek(c) {
            s.push_str(g);
        } else {
            s.push(c);
        }
        i += 1;
    }
    s
}

fn is_single_script_token(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        None => false,
        Some('\\') => {
            let rest: String = chars.collect();
            !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphabetic())
        }
        Some(_) => chars.next().is_none(),
    }
}

/// Canonical subscript text: `c`, `\infty`, or `{ij}`.
fn script_text(raw: &str) -> String {
    let cleaned = clean_script(raw);
    if is_single_script_token(&cleaned) {
        cleaned
    } else {
        format!("{{{cleaned}}}")
    }
}

/// Returns the canonical superscript text when the superscript labels the
/// symbol instead of raising it to a power.
fn attached_superscript(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    match trimmed {
        "*" | "\\ast" | "\\star" => return Some("*".into()),
        "'" | "\\prime" => return Some("'".into()),
        _ => {}
    }
    let has_label_wrapper = ["\\mathrm", "\\text", "\\rm", "\\textrm", "\\mbox"]
        .iter()
        .any(|w| trimmed.starts_with(w));
    let cleaned = clean_script(trimmed);
    if cleaned == "*" || cleaned == "\\ast" {
        return Some("*".into());
    }
    if cleaned == "\\prime" || cleaned == "'" {
        return Some("'".into());
    }
    let letters_only = !cleaned.is_empty() && cleaned.chars().all(|c| c.is_ascii_alphabetic());
    if letters_only && (has_label_wrapper || cleaned.chars().count() >= 2) {
        return Some(if cleaned.chars().count() == 1 {
            cleaned
        } else {
            format!("{{{cleaned}}}")
        });
    }
    None
}

/// The single letter or Greek command inside an accent argument, if that is
/// all there is.
fn single_base_symbol(raw: &str) -> Option<String> {
    let t = raw.trim();
    let mut chars = t.chars();
    let first = chars.next()?;
    if first == '\\' {
        let name: String = chars.collect();
        if GREEK.contains(&name.as_str()) {
            return Some(format!("\\{name}"));
        }
        return None;
    }
    if chars.next().is_some() {
        return None;
    }
    if first.is_ascii_alphabetic() {
        Some(first.to_string())
    } else {
        unicode_greek(first).map(str::to_string)
    }
}

/// Tokenizes with diagnostics.
pub fn tokenize_with_warnings(latex: &str) -> Result<Tokenized, LatexError> {
    let mut out = Tokenized::default();
    let mut lexer = Lexer {
        chars: latex.chars().collect(),
        pos: 0,
        depth: 0,
        out: &mut out,
    };
    lexer.run()?;
    Ok(out)
}

/// Tokenizes a LaTeX math-mode string.
pub fn tokenize_equation(latex: &str) -> Result<Vec<Token>, LatexError> {
    tokenize_with_warnings(latex).map(|t| t.tokens)
}

/// Normalizes a single symbol as written in a symbol map, returning `None`
/// unless it tokenizes to exactly one identifier.
pub fn normalize_symbol(symbol: &str) -> Option<String> {
    let symbol = symbol.trim().trim_matches('$');
    match tokenize_equation(symbol).ok()?.as_slice() {
        [tok] if tok.kind == TokenKind::Identifier => Some(tok.text.clone()),
        _ => None,
    }
}

/// Identifiers excluded from an equation's symbol set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolWhitelist {
    /// Excluded when every occurrence follows a differential operator.
    pub differential_variables: BTreeSet<String>,
    /// Always excluded.
    pub constants: BTreeSet<String>,
}

impl Default for SymbolWhitelist {
    fn default() -> Self {
        Self {
            differential_variables: ["t".to_string()].into_iter().collect(),
            constants: ["\\pi".to_string()].into_iter().collect(),
        }
    }
}

impl SymbolWhitelist {
    pub fn symbols_of(&self, tokens: &[Token]) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut non_differential = BTreeSet::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.kind != TokenKind::Identifier {
                continue;
            }
            seen.insert(tok.text.clone());
            let after_d = i > 0 && tokens[i - 1].is_differential();
            if !after_d {
                non_differential.insert(tok.text.clone());
            }
        }
        seen.into_iter()
            .filter(|s| !self.constants.contains(s))
            .filter(|s| !self.differential_variables.contains(s) || non_differential.contains(s))
            .collect()
    }
}

/// The abstract symbol set of an equation under the default whitelist.
pub fn extract_equation_symbols(latex: &str) -> Result<BTreeSet<String>, LatexError> {
    let tokens = tokenize_equation(latex)?;
    Ok(SymbolWhitelist::default().symbols_of(&tokens))
}

#[derive(Debug)]
enum Node {
    Leaf(Token),
    Group {
        open: Token,
        close: Option<Token>,
        children: Vec<Node>,
    },
}

fn build_tree(tokens: &[Token], pos: &mut usize) -> Vec<Node> {
    let mut out = Vec::new();
    while *pos < tokens.len() {
        let tok = &tokens[*pos];
        *pos += 1;
        match tok.kind {
            TokenKind::GroupOpen if tok.text == "{" => {
                let children = build_tree(tokens, pos);
                let close = if *pos <= tokens.len()
                    && *pos > 0
                    && tokens[*pos - 1].kind == TokenKind::GroupClose
                    && tokens[*pos - 1].text == "}"
                {
                    Some(tokens[*pos - 1].clone())
                } else {
                    None
                };
                out.push(Node::Group {
                    open: tok.clone(),
                    close,
                    children,
                });
            }
            TokenKind::GroupClose if tok.text == "}" => return out,
            _ => out.push(Node::Leaf(tok.clone())),
        }
    }
    out
}

fn function_arity(text: &str) -> usize {
    match text {
        "\\frac" | "\\dfrac" | "\\tfrac" | "\\cfrac" => 2,
        "\\sqrt" => 1,
        t if t.starts_with('\\') && ACCENTS.contains(&&t[1..]) => 1,
        _ => 0,
    }
}

fn canonical_leaf(tok: &Token) -> Option<String> {
    match (tok.kind, tok.text.as_str()) {
        (TokenKind::Operator, "\\cdot" | "\\times" | "*") => None,
        (TokenKind::Function, "\\dfrac" | "\\tfrac" | "\\cfrac") => Some("\\frac".into()),
        (TokenKind::Function, "d") => Some("\\mathrm{d}".into()),
        _ => Some(tok.text.clone()),
    }
}

fn render(nodes: Vec<Node>, out: &mut Vec<String>) {
    let mut pending_args = 0usize;
    let mut optional_depth = 0usize;
    let mut iter = nodes.into_iter().peekable();
    while let Some(node) = iter.next() {
        // optional [n] argument of \sqrt does not consume an argument slot
        if let Node::Leaf(tok) = &node {
            if optional_depth > 0 || (pending_args > 0 && tok.text == "[") {
                match tok.text.as_str() {
                    "[" => optional_depth += 1,
                    "]" => optional_depth = optional_depth.saturating_sub(1),
                    _ => {}
                }
                if let Some(s) = canonical_leaf(tok) {
                    out.push(s);
                }
                continue;
            }
        }
        let is_arg = pending_args > 0;
        if is_arg {
            pending_args -= 1;
        }
        match node {
            Node::Leaf(tok) => {
                if tok.kind == TokenKind::Function {
                    let arity = function_arity(&tok.text);
                    if let Some(s) = canonical_leaf(&tok) {
                        out.push(s);
                    }
                    pending_args = arity;
                    continue;
                }
                let superscript = tok.kind == TokenKind::Operator && (tok.text == "^" || tok.text == "_");
                if is_arg {
                    out.push("{".into());
                    if let Some(s) = canonical_leaf(&tok) {
                        out.push(s);
                    }
                    out.push("}".into());
                } else if let Some(s) = canonical_leaf(&tok) {
                    out.push(s);
                }
                if superscript {
                    pending_args = 0;
                    if let Some(Node::Group { .. }) = iter.peek() {
                        if let Some(Node::Group { children, close, open }) = iter.next() {
                            let mut inner = Vec::new();
                            render(children, &mut inner);
                            if inner.len() > 1 {
                                out.push(open.text.clone());
                                out.extend(inner);
                                out.push(close.map(|c| c.text).unwrap_or_else(|| "}".into()));
                            } else {
                                out.extend(inner);
                            }
                        }
                    }
                }
            }
            Node::Group {
                open,
                close,
                children,
            } => {
                let mut inner = Vec::new();
                render(children, &mut inner);
                if is_arg {
                    out.push(open.text.clone());
                    out.extend(inner);
                    out.push(close.map(|c| c.text).unwrap_or_else(|| "}".into()));
                } else {
                    out.extend(inner);
                }
            }
        }
    }
}

/// Canonical token string used for syntactic equation equality.
///
/// Whitespace, `\left`/`\right`, explicit multiplication (`\cdot`, `\times`,
/// `*`) and redundant braces are removed; `\dfrac` becomes `\frac`. No
/// algebraic rewriting happens, so `a+b` and `b+a` stay different.
pub fn normalize_equation(latex: &str) -> Result<String, LatexError> {
    let tokens = tokenize_equation(latex)?;
    let mut pos = 0;
    let tree = build_tree(&tokens, &mut pos);
    let mut out = Vec::new();
    render(tree, &mut out);
    Ok(out.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn show(latex: &str) -> Vec<String> {
        tokenize_equation(latex)
            .unwrap()
            .iter()
            .map(|t| t.to_string())
            .collect()
    }

    #[test]
    fn hookes_law() {
        assert_eq!(
            show("\\sigma = E \\epsilon"),
            ["id:\\sigma", "op:=", "id:E", "id:\\epsilon"]
        );
    }

    #[test]
    fn subscripted_symbol_is_atomic() {
        assert_eq!(show("\\sigma_c"), ["id:\\sigma_c"]);
        assert_eq!(show("\\sigma_{c}"), ["id:\\sigma_c"]);
        assert_eq!(show("\\sigma_{ij}"), ["id:\\sigma_{ij}"]);
        assert_eq!(show("\\sigma_{\\text{eff}}"), ["id:\\sigma_{eff}"]);
        assert_eq!(show("\\eta_\\infty"), ["id:\\eta_\\infty"]);
        assert_eq!(show("\\eta_{\\infty}"), ["id:\\eta_\\infty"]);
    }

    #[test]
    fn derivative_fraction() {
        assert_eq!(
            show("\\frac{d\\phi}{dt}"),
            ["fn:\\frac", "group", "fn:d", "id:\\phi", "/group", "group", "fn:d", "id:t", "/group"]
        );
    }

    #[test]
    fn left_right_and_spacing_discarded() {
        assert_eq!(
            show("\\left( a \\, b \\right)"),
            ["group", "id:a", "id:b", "/group"]
        );
        assert_eq!(show("\\left. x \\right|"), ["id:x", "op:|"]);
    }

    #[test]
    fn unicode_greek_maps_to_commands() {
        assert_eq!(show("σ = Eε"), ["id:\\sigma", "op:=", "id:E", "id:\\epsilon"]);
        assert_eq!(show("η∞"), ["id:\\eta", "num:\\infty"]);
    }

    #[test]
    fn accents_and_labels() {
        assert_eq!(show("\\dot{\\gamma}"), ["id:\\dot{\\gamma}"]);
        assert_eq!(show("\\dot\\gamma"), ["id:\\dot{\\gamma}"]);
        assert_eq!(show("\\dot{\\varepsilon}_{p}"), ["id:\\dot{\\varepsilon}_p"]);
        assert_eq!(show("E^*"), ["id:E^*"]);
        assert_eq!(show("\\sigma'"), ["id:\\sigma'"]);
        assert_eq!(show("\\varepsilon^{pl}"), ["id:\\varepsilon^{pl}"]);
        assert_eq!(show("\\varepsilon^{\\mathrm{p}}"), ["id:\\varepsilon^p"]);
        assert_eq!(show("x^2"), ["id:x", "op:^", "num:2"]);
        assert_eq!(show("x^{n}"), ["id:x", "op:^", "group", "id:n", "/group"]);
        assert_eq!(show("\\mathrm{d}\\sigma"), ["fn:d", "id:\\sigma"]);
    }

    #[test]
    fn numbers_and_operators() {
        assert_eq!(
            show("y = 2.33 \\times 10^{-3} \\leq z"),
            [
                "id:y", "op:=", "num:2.33", "op:\\times", "num:10", "op:^", "group", "op:-",
                "num:3", "/group", "op:\\leq", "id:z"
            ]
        );
    }

    #[test]
    fn unbalanced_braces_error() {
        assert!(matches!(
            tokenize_equation("\\frac{a}{b"),
            Err(LatexError::UnbalancedBraces { .. })
        ));
        assert!(matches!(
            tokenize_equation("a}"),
            Err(LatexError::UnbalancedBraces { position: 1 })
        ));
    }

    #[test]
    fn unknown_command_is_opaque_identifier() {
        let t = tokenize_with_warnings("\\foo + x").unwrap();
        assert_eq!(t.tokens[0], Token::id("\\foo"));
        assert_eq!(t.warnings, vec!["unknown command \\foo".to_string()]);
    }

    #[test]
    fn symbol_sets() {
        let set = |s: &str| -> Vec<String> { extract_equation_symbols(s).unwrap().into_iter().collect() };
        assert_eq!(set("\\sigma = E \\epsilon"), ["E", "\\epsilon", "\\sigma"]);
        assert_eq!(set("\\frac{d\\sigma}{dt} = 0"), ["\\sigma"]);
        assert_eq!(set("y = \\exp(x)"), ["x", "y"]);
        // t used outside a differential is a real symbol
        assert_eq!(set("\\frac{dx}{dt} = v t"), ["t", "v", "x"]);
        assert_eq!(set("A = \\pi r^2"), ["A", "r"]);
    }

    #[test]
    fn canonical_forms() {
        let n = |s: &str| normalize_equation(s).unwrap();
        assert_eq!(n("\\sigma=E\\epsilon"), n("\\sigma = E \\, \\epsilon"));
        assert_eq!(n("\\dfrac{a}{b}"), n("\\frac{a}{b}"));
        assert_eq!(n("\\frac a b"), n("\\frac{a}{b}"));
        assert_ne!(n("a+b"), n("b+a"));
        assert_eq!(n("E \\cdot \\epsilon"), n("E\\epsilon"));
        assert_eq!(n("{{a}} + b"), n("a+b"));
        assert_eq!(n("x^{2}"), n("x^2"));
        assert_eq!(n("\\left(a+b\\right)"), n("(a+b)"));
        assert_eq!(n("σ = Eε"), n("\\sigma = E \\epsilon"));
        assert_eq!(n("\\frac{d\\sigma}{dt}"), "\\frac { \\mathrm{d} \\sigma } { \\mathrm{d} t }");
    }

    #[test]
    fn symbol_normalization() {
        assert_eq!(normalize_symbol("$\\sigma_{c}$").as_deref(), Some("\\sigma_c"));
        assert_eq!(normalize_symbol("σ").as_deref(), Some("\\sigma"));
        assert_eq!(normalize_symbol("a + b"), None);
        assert_eq!(normalize_symbol(""), None);
    }
}
