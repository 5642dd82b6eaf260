//! ISO 10303-21 clear-text reader and canonical writer.

use std::collections::HashMap;

use thiserror::Error;

use super::model::{Header, IfcEntity, IfcModel, SchemaId, SourcePos};
use super::value::SpfValue;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical(String),
    Syntax(String),
    UnbalancedParentheses,
    DuplicateId(u64),
    DanglingRef { from: u64, to: u64 },
    Header(String),
    UnsupportedSchema(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: SourcePos,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Lexical(m) => format!("lexical error: {m}"),
        ParseErrorKind::Syntax(m) => format!("syntax error: {m}"),
        ParseErrorKind::UnbalancedParentheses => "unbalanced parentheses".to_string(),
        ParseErrorKind::DuplicateId(id) => format!("duplicate instance name #{id}"),
        ParseErrorKind::DanglingRef { from, to } => format!("#{from} references undefined #{to}"),
        ParseErrorKind::Header(m) => format!("header error: {m}"),
        ParseErrorKind::UnsupportedSchema(s) => format!("unsupported schema {s:?} (expected IFC4 or IFC2X3)"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(String),
    EntityName(u64),
    /// `#label` in op-batch literals; never produced when parsing files.
    Label(String),
    Integer(i64),
    Real(f64),
    Str(String),
    Enum(String),
    Binary(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Dollar,
    Star,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    i: usize,
    line: usize,
    col: usize,
    allow_labels: bool,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { src: text.as_bytes(), text, i: 0, line: 1, col: 1, allow_labels: false }
    }

    fn pos(&self) -> SourcePos {
        SourcePos { line: self.line, column: self.col }
    }

    fn err<T>(&self, pos: SourcePos, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { kind: ParseErrorKind::Lexical(msg.into()), pos })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count chars, not UTF-8 continuation bytes
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.i + 1) == Some(&b'*') => {
                    let start = self.pos();
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some(b'*') if self.peek() == Some(b'/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => return self.err(start, "unterminated comment"),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, SourcePos), ParseError> {
        self.skip_trivia()?;
        let pos = self.pos();
        let Some(c) = self.peek() else { return Ok((Tok::Eof, pos)) };
        let tok = match c {
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b';' => {
                self.bump();
                Tok::Semi
            }
            b'=' => {
                self.bump();
                Tok::Eq
            }
            b'$' => {
                self.bump();
                Tok::Dollar
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'#' => {
                self.bump();
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
                if self.i == start {
                    if self.allow_labels && self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == b'_') {
                        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                            self.bump();
                        }
                        return Ok((Tok::Label(self.text[start..self.i].to_string()), pos));
                    }
                    return self.err(pos, "expected digits after '#'");
                }
                let id: u64 =
                    self.text[start..self.i].parse().or_else(|_| self.err(pos, "instance name out of range"))?;
                if id == 0 {
                    return self.err(pos, "instance name #0 is not allowed");
                }
                Tok::EntityName(id)
            }
            b'\'' => Tok::Str(self.string()?),
            b'"' => {
                self.bump();
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                    self.bump();
                }
                if self.peek() != Some(b'"') {
                    return self.err(pos, "unterminated binary literal");
                }
                let digits = self.text[start..self.i].to_string();
                self.bump();
                Tok::Binary(digits)
            }
            b'.' => {
                self.bump();
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                    self.bump();
                }
                if self.peek() != Some(b'.') || self.i == start {
                    return self.err(pos, "malformed enumeration literal");
                }
                let name = self.text[start..self.i].to_ascii_uppercase();
                self.bump();
                Tok::Enum(name)
            }
            b'+' | b'-' | b'0'..=b'9' => self.number(pos)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-') {
                    self.bump();
                }
                Tok::Keyword(self.text[start..self.i].to_ascii_uppercase())
            }
            _ => {
                let ch = self.text[self.i..].chars().next().unwrap_or('?');
                return self.err(pos, format!("unexpected character {ch:?}"));
            }
        };
        Ok((tok, pos))
    }

    fn number(&mut self, pos: SourcePos) -> Result<Tok, ParseError> {
        let start = self.i;
        if matches!(self.peek(), Some(b'+' | b'-')) {
            self.bump();
        }
        let digits_start = self.i;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.i == digits_start {
            return self.err(pos, "expected digits");
        }
        let mut is_real = false;
        if self.peek() == Some(b'.') {
            is_real = true;
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            if matches!(self.peek(), Some(b'E' | b'e')) {
                self.bump();
                if matches!(self.peek(), Some(b'+' | b'-')) {
                    self.bump();
                }
                let exp_start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
                if self.i == exp_start {
                    return self.err(pos, "malformed real exponent");
                }
            }
        }
        let raw = &self.text[start..self.i];
        if is_real {
            // Rust's parser does not accept "1." or "1.E5"; insert the missing zero.
            let normalized = raw.replacen(".E", ".0E", 1).replacen(".e", ".0e", 1);
            let normalized = if normalized.ends_with('.') { format!("{normalized}0") } else { normalized };
            normalized.parse::<f64>().map(Tok::Real).or_else(|_| self.err(pos, format!("malformed real {raw:?}")))
        } else {
            raw.parse::<i64>().map(Tok::Integer).or_else(|_| self.err(pos, format!("integer {raw:?} out of range")))
        }
    }

    fn hex_run(&mut self, width: usize, pos: SourcePos) -> Result<Vec<u32>, ParseError> {
        let mut out = Vec::new();
        loop {
            if self.peek() == Some(b'\\') {
                // expect \X0\
                let tail = self.src.get(self.i..self.i + 4);
                if tail == Some(b"\\X0\\") {
                    for _ in 0..4 {
                        self.bump();
                    }
                    return Ok(out);
                }
                return self.err(pos, "expected \\X0\\ terminator");
            }
            let chunk = self.src.get(self.i..self.i + width);
            let Some(chunk) = chunk.filter(|c| c.iter().all(u8::is_ascii_hexdigit)) else {
                return self.err(pos, "malformed hex escape");
            };
            let v = u32::from_str_radix(std::str::from_utf8(chunk).expect("hex is ascii"), 16)
                .expect("validated hex digits");
            out.push(v);
            for _ in 0..width {
                self.bump();
            }
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        self.bump();
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else { return self.err(pos, "unterminated string") };
            match c {
                b'\'' => {
                    self.bump();
                    if self.peek() == Some(b'\'') {
                        self.bump();
                        out.push('\'');
                    } else {
                        return Ok(out);
                    }
                }
                b'\\' => {
                    let esc_pos = self.pos();
                    self.bump();
                    match self.bump() {
                        Some(b'\\') => out.push('\\'),
                        Some(b'S') => {
                            if self.bump() != Some(b'\\') {
                                return self.err(esc_pos, "malformed \\S\\ escape");
                            }
                            match self.bump() {
                                Some(ch) if (0x20..=0x7E).contains(&ch) => {
                                    out.push(char::from_u32(ch as u32 + 128).expect("latin-1 range"))
                                }
                                _ => return self.err(esc_pos, "malformed \\S\\ escape"),
                            }
                        }
                        Some(b'P') => {
                            let page = self.bump();
                            if !page.is_some_and(|p| (b'A'..=b'I').contains(&p)) || self.bump() != Some(b'\\') {
                                return self.err(esc_pos, "malformed \\P\\ code page escape");
                            }
                        }
                        Some(b'X') => match self.bump() {
                            Some(b'\\') => {
                                let chunk = self.src.get(self.i..self.i + 2);
                                let Some(chunk) = chunk.filter(|c| c.iter().all(u8::is_ascii_hexdigit)) else {
                                    return self.err(esc_pos, "malformed \\X\\ escape");
                                };
                                let v = u8::from_str_radix(std::str::from_utf8(chunk).expect("ascii"), 16)
                                    .expect("validated hex digits");
                                out.push(v as char);
                                self.bump();
                                self.bump();
                            }
                            Some(b'2') if self.peek() == Some(b'\\') => {
                                self.bump();
                                for cp in self.hex_run(4, esc_pos)? {
                                    out.push(char::from_u32(cp).ok_or_else(|| ParseError {
                                        kind: ParseErrorKind::Lexical("invalid code point".into()),
                                        pos: esc_pos,
                                    })?);
                                }
                            }
                            Some(b'4') if self.peek() == Some(b'\\') => {
                                self.bump();
                                for cp in self.hex_run(8, esc_pos)? {
                                    out.push(char::from_u32(cp).ok_or_else(|| ParseError {
                                        kind: ParseErrorKind::Lexical("invalid code point".into()),
                                        pos: esc_pos,
                                    })?);
                                }
                            }
                            _ => return self.err(esc_pos, "malformed \\X escape"),
                        },
                        _ => return self.err(esc_pos, "invalid escape sequence in string"),
                    }
                }
                _ => {
                    // raw (possibly multi-byte UTF-8) character
                    let ch = self.text[self.i..].chars().next().expect("non-empty");
                    for _ in 0..ch.len_utf8() {
                        self.bump();
                    }
                    out.push(ch);
                }
            }
        }
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    pos: SourcePos,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        let mut lex = Lexer::new(text);
        let (tok, pos) = lex.next()?;
        Ok(Self { lex, tok, pos })
    }

    fn advance(&mut self) -> Result<Tok, ParseError> {
        let (next, pos) = self.lex.next()?;
        self.pos = pos;
        Ok(std::mem::replace(&mut self.tok, next))
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let msg: String = msg.into();
        // ';' or EOF where a ')' was due, or a stray ')' where ';' was due
        let unbalanced = match self.tok {
            Tok::Eof | Tok::Semi => msg.contains("')'"),
            Tok::RParen => msg.contains("';'"),
            _ => false,
        };
        let kind = if unbalanced { ParseErrorKind::UnbalancedParentheses } else { ParseErrorKind::Syntax(msg) };
        Err(ParseError { kind, pos: self.pos })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == want {
            self.advance()?;
            Ok(())
        } else {
            self.syntax(format!("expected {what}, found {}", tok_desc(&self.tok)))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match &self.tok {
            Tok::Keyword(k) if k == kw => {
                self.advance()?;
                Ok(())
            }
            other => self.syntax(format!("expected {kw}, found {}", tok_desc(other))),
        }
    }

    /// Parses `( param, ... )` with the opening paren as the current token.
    fn param_list(&mut self) -> Result<Vec<SpfValue>, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let mut out = Vec::new();
        if self.tok == Tok::RParen {
            self.advance()?;
            return Ok(out);
        }
        loop {
            out.push(self.param()?);
            match self.tok {
                Tok::Comma => {
                    self.advance()?;
                }
                Tok::RParen => {
                    self.advance()?;
                    return Ok(out);
                }
                _ => return self.syntax(format!("expected ',' or ')', found {}", tok_desc(&self.tok))),
            }
        }
    }

    fn param(&mut self) -> Result<SpfValue, ParseError> {
        let v = match &self.tok {
            Tok::Dollar => SpfValue::Unset,
            Tok::Star => SpfValue::Derived,
            Tok::Integer(v) => SpfValue::Integer(*v),
            Tok::Real(v) => SpfValue::Real(*v),
            Tok::Str(s) => SpfValue::String(s.clone()),
            Tok::Enum(s) => SpfValue::Enum(s.clone()),
            Tok::Binary(s) => SpfValue::Binary(s.clone()),
            Tok::EntityName(id) => SpfValue::Ref(*id),
            Tok::Label(_) => {
                return self.syntax("labels are only valid in op batches");
            }
            Tok::LParen => return self.param_list().map(SpfValue::List),
            Tok::Keyword(name) => {
                let name = name.clone();
                self.advance()?;
                let mut inner = self.param_list()?;
                if inner.len() != 1 {
                    return self.syntax(format!("typed parameter {name} must wrap exactly one value"));
                }
                return Ok(SpfValue::Typed(name, Box::new(inner.remove(0))));
            }
            other => return self.syntax(format!("expected a parameter, found {}", tok_desc(other))),
        };
        self.advance()?;
        Ok(v)
    }

    fn header(&mut self) -> Result<Header, ParseError> {
        self.expect_keyword("HEADER")?;
        self.expect(Tok::Semi, "';'")?;
        let mut entities: Vec<(String, Vec<SpfValue>, SourcePos)> = Vec::new();
        loop {
            match &self.tok {
                Tok::Keyword(k) if k == "ENDSEC" => {
                    self.advance()?;
                    self.expect(Tok::Semi, "';'")?;
                    break;
                }
                Tok::Keyword(k) => {
                    let name = k.clone();
                    let pos = self.pos;
                    self.advance()?;
                    let params = self.param_list()?;
                    self.expect(Tok::Semi, "';'")?;
                    entities.push((name, params, pos));
                }
                other => return self.syntax(format!("expected header entity or ENDSEC, found {}", tok_desc(other))),
            }
        }
        build_header(entities, self.pos)
    }

    fn data_section(&mut self, model: &mut IfcModel) -> Result<(), ParseError> {
        self.expect_keyword("DATA")?;
        if self.tok == Tok::LParen {
            // ISO 10303-21 edition 3 section parameters; ignored.
            self.param_list()?;
        }
        self.expect(Tok::Semi, "';'")?;
        loop {
            match &self.tok {
                Tok::Keyword(k) if k == "ENDSEC" => {
                    self.advance()?;
                    self.expect(Tok::Semi, "';'")?;
                    return Ok(());
                }
                Tok::EntityName(id) => {
                    let id = *id;
                    let pos = self.pos;
                    self.advance()?;
                    self.expect(Tok::Eq, "'='")?;
                    let type_name = match &self.tok {
                        Tok::Keyword(k) => k.clone(),
                        Tok::LParen => return self.syntax("complex entity instances are not supported"),
                        other => return self.syntax(format!("expected entity type, found {}", tok_desc(other))),
                    };
                    self.advance()?;
                    let attrs = self.param_list()?;
                    self.expect(Tok::Semi, "';'")?;
                    if model.entities.contains_key(&id) {
                        return Err(ParseError { kind: ParseErrorKind::DuplicateId(id), pos });
                    }
                    model.insert(IfcEntity { id, type_name, attrs });
                    model.positions.insert(id, pos);
                }
                other => {
                    return self.syntax(format!("expected instance or ENDSEC, found {}", tok_desc(other)));
                }
            }
        }
    }
}

fn tok_desc(t: &Tok) -> String {
    match t {
        Tok::Keyword(k) => format!("keyword {k}"),
        Tok::EntityName(id) => format!("#{id}"),
        Tok::Label(l) => format!("#{l}"),
        Tok::Integer(v) => format!("integer {v}"),
        Tok::Real(v) => format!("real {v}"),
        Tok::Str(_) => "string".to_string(),
        Tok::Enum(e) => format!(".{e}."),
        Tok::Binary(_) => "binary".to_string(),
        Tok::LParen => "'('".to_string(),
        Tok::RParen => "')'".to_string(),
        Tok::Comma => "','".to_string(),
        Tok::Semi => "';'".to_string(),
        Tok::Eq => "'='".to_string(),
        Tok::Dollar => "'$'".to_string(),
        Tok::Star => "'*'".to_string(),
        Tok::Eof => "end of input".to_string(),
    }
}

fn header_err<T>(pos: SourcePos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { kind: ParseErrorKind::Header(msg.into()), pos })
}

fn header_string(v: &SpfValue, field: &str, pos: SourcePos) -> Result<String, ParseError> {
    match v {
        SpfValue::String(s) => Ok(s.clone()),
        SpfValue::Unset => Ok(String::new()),
        _ => header_err(pos, format!("{field} must be a string")),
    }
}

fn header_strings(v: &SpfValue, field: &str, pos: SourcePos) -> Result<Vec<String>, ParseError> {
    match v {
        SpfValue::List(items) => items.iter().map(|i| header_string(i, field, pos)).collect(),
        SpfValue::Unset => Ok(Vec::new()),
        _ => header_err(pos, format!("{field} must be a list of strings")),
    }
}

fn build_header(entities: Vec<(String, Vec<SpfValue>, SourcePos)>, end: SourcePos) -> Result<Header, ParseError> {
    let mut description = None;
    let mut file_name = None;
    let mut schema = None;
    let mut extra = Vec::new();
    for (name, params, pos) in entities {
        match name.as_str() {
            "FILE_DESCRIPTION" => {
                if params.len() != 2 {
                    return header_err(pos, format!("FILE_DESCRIPTION takes 2 parameters, got {}", params.len()));
                }
                description = Some((
                    header_strings(&params[0], "FILE_DESCRIPTION.description", pos)?,
                    header_string(&params[1], "FILE_DESCRIPTION.implementation_level", pos)?,
                ));
            }
            "FILE_NAME" => {
                if params.len() != 7 {
                    return header_err(pos, format!("FILE_NAME takes 7 parameters, got {}", params.len()));
                }
                file_name = Some((params, pos));
            }
            "FILE_SCHEMA" => {
                if params.len() != 1 {
                    return header_err(pos, "FILE_SCHEMA takes 1 parameter");
                }
                let ids = header_strings(&params[0], "FILE_SCHEMA.schema_identifiers", pos)?;
                let Some(first) = ids.first() else {
                    return header_err(pos, "FILE_SCHEMA lists no schema");
                };
                let id = SchemaId::parse(first)
                    .ok_or(ParseError { kind: ParseErrorKind::UnsupportedSchema(first.clone()), pos })?;
                schema = Some(id);
            }
            _ => extra.push((name, params)),
        }
    }
    let Some((description, implementation_level)) = description else {
        return header_err(end, "missing FILE_DESCRIPTION");
    };
    let Some((fname, fpos)) = file_name else { return header_err(end, "missing FILE_NAME") };
    let Some(schema) = schema else { return header_err(end, "missing FILE_SCHEMA") };
    Ok(Header {
        description,
        implementation_level,
        name: header_string(&fname[0], "FILE_NAME.name", fpos)?,
        timestamp: header_string(&fname[1], "FILE_NAME.time_stamp", fpos)?,
        author: header_strings(&fname[2], "FILE_NAME.author", fpos)?,
        organization: header_strings(&fname[3], "FILE_NAME.organization", fpos)?,
        preprocessor_version: header_string(&fname[4], "FILE_NAME.preprocessor_version", fpos)?,
        authoring_tool: header_string(&fname[5], "FILE_NAME.originating_system", fpos)?,
        authorization: header_string(&fname[6], "FILE_NAME.authorization", fpos)?,
        schema,
        extra,
    })
}

/// Parses a complete exchange file. References must all resolve.
pub fn parse(text: &str) -> Result<IfcModel, ParseError> {
    let mut p = Parser::new(text)?;
    p.expect_keyword("ISO-10303-21")?;
    p.expect(Tok::Semi, "';'")?;
    let header = p.header()?;
    let mut model = IfcModel::with_header(header);
    p.data_section(&mut model)?;
    while matches!(&p.tok, Tok::Keyword(k) if k == "DATA") {
        p.data_section(&mut model)?;
    }
    p.expect_keyword("END-ISO-10303-21")?;
    p.expect(Tok::Semi, "';'")?;
    if p.tok != Tok::Eof {
        return p.syntax(format!("trailing content after END-ISO-10303-21: {}", tok_desc(&p.tok)));
    }
    if let Some(&(from, to)) = model.dangling_refs().first() {
        let pos = model.positions.get(&from).copied().unwrap_or(SourcePos { line: 0, column: 0 });
        return Err(ParseError { kind: ParseErrorKind::DanglingRef { from, to }, pos });
    }
    Ok(model)
}

/// Parses a single attribute literal such as `(0.,1.,#12)` or `'North'`.
///
/// `#name` labels are accepted and resolved through `labels`; unknown labels
/// are an error.
pub fn parse_value(text: &str, labels: &HashMap<String, u64>) -> Result<SpfValue, ParseError> {
    let mut lex = Lexer::new(text);
    lex.allow_labels = true;
    let (tok, pos) = lex.next()?;
    let mut p = Parser { lex, tok, pos };
    let v = value_with_labels(&mut p, labels)?;
    if p.tok != Tok::Eof {
        return p.syntax(format!("unexpected {} after value", tok_desc(&p.tok)));
    }
    Ok(v)
}

fn value_with_labels(p: &mut Parser<'_>, labels: &HashMap<String, u64>) -> Result<SpfValue, ParseError> {
    match &p.tok {
        Tok::Label(l) => {
            let Some(&id) = labels.get(l) else {
                return p.syntax(format!("unknown label #{l}"));
            };
            p.advance()?;
            Ok(SpfValue::Ref(id))
        }
        Tok::LParen => {
            p.advance()?;
            let mut out = Vec::new();
            if p.tok == Tok::RParen {
                p.advance()?;
                return Ok(SpfValue::List(out));
            }
            loop {
                out.push(value_with_labels(p, labels)?);
                match p.tok {
                    Tok::Comma => {
                        p.advance()?;
                    }
                    Tok::RParen => {
                        p.advance()?;
                        return Ok(SpfValue::List(out));
                    }
                    _ => return p.syntax("expected ',' or ')'"),
                }
            }
        }
        Tok::Keyword(name) => {
            let name = name.clone();
            p.advance()?;
            p.expect(Tok::LParen, "'('")?;
            let inner = value_with_labels(p, labels)?;
            p.expect(Tok::RParen, "')'")?;
            Ok(SpfValue::Typed(name, Box::new(inner)))
        }
        _ => p.param(),
    }
}

fn write_strings(items: &[String], out: &mut String) {
    out.push('(');
    for (i, s) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        SpfValue::String(s.clone()).write_spf(out);
    }
    out.push(')');
}

/// Canonical serialization: one instance per line, ids ascending.
pub fn serialize(model: &IfcModel) -> String {
    let h = &model.header;
    let mut out = String::with_capacity(64 * model.entities.len() + 512);
    out.push_str("ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(");
    write_strings(&h.description, &mut out);
    out.push(',');
    SpfValue::String(h.implementation_level.clone()).write_spf(&mut out);
    out.push_str(");\nFILE_NAME(");
    for (i, s) in [&h.name, &h.timestamp].into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        SpfValue::String(s.clone()).write_spf(&mut out);
    }
    out.push(',');
    write_strings(&h.author, &mut out);
    out.push(',');
    write_strings(&h.organization, &mut out);
    for s in [&h.preprocessor_version, &h.authoring_tool, &h.authorization] {
        out.push(',');
        SpfValue::String(s.clone()).write_spf(&mut out);
    }
    out.push_str(");\nFILE_SCHEMA(('");
    out.push_str(h.schema.as_str());
    out.push_str("'));\n");
    for (name, params) in &h.extra {
        out.push_str(name);
        SpfValue::List(params.clone()).write_spf(&mut out);
        out.push_str(";\n");
    }
    out.push_str("ENDSEC;\nDATA;\n");
    for e in model.entities.values() {
        out.push_str(&e.to_spf());
        out.push('\n');
    }
    out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    out
}
