//! Independent validation of generated tool-call text.
//!
//! This is a hand-written recursive-descent parser over the call grammar. It
//! never consults the compiled automata, so it can serve as the reference the
//! automata are tested against.
//!
//! The accepted call language:
//! - an object `{` ... `}` holding the documented parameters in documentation
//!   order, each as `"name":` followed by at most one space and the value;
//! - members separated by `,` followed by at most one space;
//! - every required parameter present, optional parameters may be left out;
//! - strings admit only the escapes `\"` and `\\`, no raw control bytes, and
//!   must be valid UTF-8;
//! - integers are `-?(0|[1-9][0-9]*)`; numbers add an optional fraction and
//!   exponent; booleans are `true` / `false`; enum values are quoted literals.

use std::fmt;

use super::{ParamSpec, ParamType, ToolSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ErrorClass {
    /// The text names a tool that is not in the inventory.
    NameError,
    /// A parameter is unknown, missing, out of order, or has a value outside
    /// its type's language.
    ArgumentError,
    /// The text does not follow the call or scaffold syntax.
    FormatError,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::NameError => "NameError",
            ErrorClass::ArgumentError => "ArgumentError",
            ErrorClass::FormatError => "FormatError",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid { class: ErrorClass, offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn valid() -> Self {
        ValidationReport { verdict: Verdict::Valid }
    }

    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    pub fn class(&self) -> Option<ErrorClass> {
        match &self.verdict {
            Verdict::Valid => None,
            Verdict::Invalid { class, .. } => Some(*class),
        }
    }

    pub fn offset(&self) -> Option<usize> {
        match &self.verdict {
            Verdict::Valid => None,
            Verdict::Invalid { offset, .. } => Some(*offset),
        }
    }
}

impl From<Result<(), Violation>> for ValidationReport {
    fn from(r: Result<(), Violation>) -> Self {
        match r {
            Ok(()) => ValidationReport::valid(),
            Err(v) => ValidationReport {
                verdict: Verdict::Invalid { class: v.class, offset: v.offset, message: v.message },
            },
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.verdict {
            Verdict::Valid => f.write_str("Valid"),
            Verdict::Invalid { class, offset, message } => write!(f, "{class} at byte {offset}: {message}"),
        }
    }
}

/// First violation found by the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub class: ErrorClass,
    pub offset: usize,
    pub message: String,
}

impl Violation {
    pub fn new(class: ErrorClass, offset: usize, message: impl Into<String>) -> Self {
        Violation { class, offset, message: message.into() }
    }
}

/// How a tool's arguments are written after the tool name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgStyle {
    /// `{"name": value, ...}`
    Object,
    /// `value, value, ...`; optional parameters may only be dropped from the
    /// tail of the list.
    Positional,
}

/// Validates a complete argument object for `schema`.
pub fn validate_call_text(schema: &ToolSchema, call_text: &str) -> ValidationReport {
    validate_call_bytes(schema, call_text.as_bytes())
}

pub fn validate_call_bytes(schema: &ToolSchema, call: &[u8]) -> ValidationReport {
    validate_args(schema, call, ArgStyle::Object)
}

/// Validates `args` as the complete argument text of `schema` in `style`.
pub fn validate_args(schema: &ToolSchema, args: &[u8], style: ArgStyle) -> ValidationReport {
    let mut p = ArgParser::new(args, 0);
    let r = p.arguments(&schema.params, style).and_then(|()| {
        if p.pos == args.len() {
            Ok(())
        } else {
            Err(Violation::new(ErrorClass::FormatError, p.pos, "trailing text after arguments"))
        }
    });
    r.into()
}

/// Parses arguments starting at `start` and returns the offset just past
/// them. Used by the scaffold-level validator.
pub fn parse_arguments_at(
    params: &[ParamSpec],
    src: &[u8],
    start: usize,
    style: ArgStyle,
) -> Result<usize, Violation> {
    let mut p = ArgParser::new(src, start);
    p.arguments(params, style)?;
    Ok(p.pos)
}

/// Whether a documented example literal is a value of `ty`. String and enum
/// examples are raw text, everything else is the literal as it would be
/// written in a call.
pub fn is_example_of(ty: &ParamType, example: &str) -> bool {
    match ty {
        ParamType::String => !example.chars().any(|c| c < ' ' || c == '\u{7f}'),
        ParamType::Enum(lits) => lits.iter().any(|l| l == example),
        _ => {
            let mut p = ArgParser::new(example.as_bytes(), 0);
            p.value(ty).is_ok() && p.pos == example.len()
        }
    }
}

struct ArgParser<'a> {
    src: &'a [u8],
    pos: usize,
}

/// Lexical category of a value, used for type checking.
enum Lexed {
    Str(String),
    Num { integral: bool },
    Bool,
}

impl<'a> ArgParser<'a> {
    fn new(src: &'a [u8], pos: usize) -> Self {
        ArgParser { src, pos }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn format_err<T>(&self, msg: impl Into<String>) -> Result<T, Violation> {
        Err(Violation::new(ErrorClass::FormatError, self.pos, msg))
    }

    fn expect(&mut self, b: u8) -> Result<(), Violation> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            self.format_err(format!("expected `{}`", b as char))
        }
    }

    fn optional_space(&mut self) {
        if self.peek() == Some(b' ') {
            self.pos += 1;
        }
    }

    fn arguments(&mut self, params: &[ParamSpec], style: ArgStyle) -> Result<(), Violation> {
        match style {
            ArgStyle::Object => self.object(params),
            ArgStyle::Positional => self.positional(params),
        }
    }

    fn object(&mut self, params: &[ParamSpec]) -> Result<(), Violation> {
        self.expect(b'{')?;
        let mut next = 0;
        if self.peek() != Some(b'}') {
            loop {
                let key_at = self.pos;
                if self.peek() != Some(b'"') {
                    return self.format_err("expected a quoted parameter name");
                }
                let key = self.string()?;
                let Some(idx) = params.iter().position(|p| p.name == key) else {
                    return Err(Violation::new(ErrorClass::ArgumentError, key_at, format!("unknown parameter `{key}`")));
                };
                if idx < next {
                    return Err(Violation::new(
                        ErrorClass::ArgumentError,
                        key_at,
                        format!("parameter `{key}` out of documented order"),
                    ));
                }
                if let Some(missing) = params[next..idx].iter().find(|p| p.required) {
                    return Err(Violation::new(
                        ErrorClass::ArgumentError,
                        key_at,
                        format!("missing required parameter `{}`", missing.name),
                    ));
                }
                next = idx + 1;
                self.expect(b':')?;
                self.optional_space();
                self.value(&params[idx].ty)?;
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                        self.optional_space();
                    }
                    Some(b'}') => break,
                    _ => return self.format_err("expected `,` or `}`"),
                }
            }
        }
        if let Some(missing) = params[next..].iter().find(|p| p.required) {
            return Err(Violation::new(
                ErrorClass::ArgumentError,
                self.pos,
                format!("missing required parameter `{}`", missing.name),
            ));
        }
        self.expect(b'}')
    }

    fn positional(&mut self, params: &[ParamSpec]) -> Result<(), Violation> {
        let min = params.iter().rposition(|p| p.required).map_or(0, |i| i + 1);
        let starts_value = |b: Option<u8>| matches!(b, Some(b'"' | b'-' | b'0'..=b'9' | b't' | b'f' | b'{' | b'['));
        let mut count = 0;
        if !params.is_empty() && starts_value(self.peek()) {
            loop {
                self.value(&params[count].ty)?;
                count += 1;
                if self.peek() != Some(b',') {
                    break;
                }
                if count == params.len() {
                    return Err(Violation::new(ErrorClass::ArgumentError, self.pos, "too many arguments"));
                }
                self.pos += 1;
                self.optional_space();
            }
        }
        if count < min {
            return Err(Violation::new(
                ErrorClass::ArgumentError,
                self.pos,
                format!("missing required argument `{}`", params[count].name),
            ));
        }
        Ok(())
    }

    fn value(&mut self, ty: &ParamType) -> Result<(), Violation> {
        let at = self.pos;
        let mismatch = |what: &str| {
            Err(Violation::new(ErrorClass::ArgumentError, at, format!("expected {}, found {what}", ty.keyword())))
        };
        match self.peek() {
            Some(b'{') => match ty {
                ParamType::Object(children) => self.object(children),
                _ => mismatch("an object"),
            },
            Some(b'[') => match ty {
                ParamType::Array(elem) => self.array(elem),
                _ => mismatch("an array"),
            },
            Some(_) => match (self.scalar()?, ty) {
                (Lexed::Str(_), ParamType::String) => Ok(()),
                (Lexed::Str(s), ParamType::Enum(lits)) => {
                    if lits.contains(&s) {
                        Ok(())
                    } else {
                        Err(Violation::new(ErrorClass::ArgumentError, at, format!("`{s}` is not an allowed value")))
                    }
                }
                (Lexed::Num { integral: true }, ParamType::Integer) => Ok(()),
                (Lexed::Num { .. }, ParamType::Number) => Ok(()),
                (Lexed::Bool, ParamType::Boolean) => Ok(()),
                (Lexed::Str(_), _) => mismatch("a string"),
                (Lexed::Num { .. }, _) => mismatch("a number"),
                (Lexed::Bool, _) => mismatch("a boolean"),
            },
            None => self.format_err("unexpected end of input"),
        }
    }

    fn array(&mut self, elem: &ParamType) -> Result<(), Violation> {
        self.expect(b'[')?;
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(());
        }
        loop {
            self.value(elem)?;
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    self.optional_space();
                }
                Some(b']') => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return self.format_err("expected `,` or `]`"),
            }
        }
    }

    fn scalar(&mut self) -> Result<Lexed, Violation> {
        match self.peek() {
            Some(b'"') => self.string().map(Lexed::Str),
            Some(b'-' | b'0'..=b'9') => self.number(),
            Some(b't') => self.word(b"true").map(|()| Lexed::Bool),
            Some(b'f') => self.word(b"false").map(|()| Lexed::Bool),
            _ => self.format_err("expected a value"),
        }
    }

    fn word(&mut self, w: &[u8]) -> Result<(), Violation> {
        if self.src[self.pos..].starts_with(w) {
            self.pos += w.len();
            Ok(())
        } else {
            self.format_err(format!("expected `{}`", String::from_utf8_lossy(w)))
        }
    }

    fn string(&mut self) -> Result<String, Violation> {
        let start = self.pos;
        self.expect(b'"')?;
        let mut content = Vec::new();
        loop {
            match self.peek() {
                None => return self.format_err("unterminated string"),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c @ (b'"' | b'\\')) => {
                            content.push(c);
                            self.pos += 1;
                        }
                        _ => return self.format_err("unsupported escape"),
                    }
                }
                Some(c) if c < 0x20 || c == 0x7f => return self.format_err("control byte in string"),
                Some(c) => {
                    content.push(c);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(content)
            .map_err(|_| Violation::new(ErrorClass::FormatError, start, "string is not valid UTF-8"))
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<Lexed, Violation> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        match self.peek() {
            Some(b'0') => self.pos += 1,
            Some(b'1'..=b'9') => {
                self.digits();
            }
            _ => return self.format_err("expected a digit"),
        }
        let mut integral = true;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            integral = false;
            if self.digits() == 0 {
                return self.format_err("expected a fraction digit");
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            integral = false;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                return self.format_err("expected an exponent digit");
            }
        }
        Ok(Lexed::Num { integral })
    }
}
