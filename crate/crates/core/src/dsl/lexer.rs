use serde::{Deserialize, Serialize};

use super::SyntaxError;

/// Location in source text. `line` and `column` are 1-based and count
/// characters; `offset` and `len` count bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64, String),
    Str(String),
    Symbol(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Eq,
    Dot,
    Arrow,
    Question,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(_, raw) => format!("number `{raw}`"),
            Tok::Str(_) => "string".into(),
            Tok::Symbol(s) => format!("symbol `@{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Question => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span {
            line: self.line,
            column: self.column,
            offset: self.pos,
            len: 0,
        }
    }

    fn error(&self, start: Span, message: String) -> SyntaxError {
        let len = self.pos.saturating_sub(start.offset).max(1);
        SyntaxError::new(message, Span { len, ..start }, self.src)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<(Tok, Span)>, SyntaxError> {
    let mut c = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(ch) = c.peek() {
            if ch.is_whitespace() {
                c.bump();
            } else if ch == '#' {
                while !matches!(c.peek(), None | Some('\n')) {
                    c.bump();
                }
            } else {
                break;
            }
        }
        let start = c.here();
        let Some(ch) = c.peek() else {
            out.push((Tok::Eof, start));
            return Ok(out);
        };
        let tok = match ch {
            '{' | '}' | '(' | ')' | ',' | '=' | '.' | '?' => {
                c.bump();
                match ch {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '=' => Tok::Eq,
                    '.' => Tok::Dot,
                    _ => Tok::Question,
                }
            }
            '-' if c.peek2() == Some('>') => {
                c.bump();
                c.bump();
                Tok::Arrow
            }
            '-' | '+' | '0'..='9' => lex_number(&mut c, start)?,
            '"' => lex_string(&mut c, start)?,
            '@' => {
                c.bump();
                let name = take_ident(&mut c);
                if name.is_empty() {
                    return Err(c.error(start, "expected a symbol name after `@`".into()));
                }
                Tok::Symbol(name)
            }
            ch if ch.is_ascii_alphabetic() || ch == '_' => Tok::Ident(take_ident(&mut c)),
            other => {
                c.bump();
                return Err(c.error(start, format!("unexpected character `{other}`")));
            }
        };
        let len = c.pos - start.offset;
        out.push((tok, Span { len, ..start }));
    }
}

fn take_ident(c: &mut Cursor<'_>) -> String {
    let mut s = String::new();
    while let Some(ch) = c.peek() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            s.push(ch);
            c.bump();
        } else {
            break;
        }
    }
    s
}

fn lex_number(c: &mut Cursor<'_>, start: Span) -> Result<Tok, SyntaxError> {
    let mut raw = String::new();
    if let Some(sign @ ('-' | '+')) = c.peek() {
        raw.push(sign);
        c.bump();
    }
    let digits = |c: &mut Cursor<'_>, raw: &mut String| {
        let mut any = false;
        while let Some(d @ '0'..='9') = c.peek() {
            raw.push(d);
            c.bump();
            any = true;
        }
        any
    };
    let mut ok = digits(c, &mut raw);
    if c.peek() == Some('.') && matches!(c.peek2(), Some('0'..='9')) {
        raw.push('.');
        c.bump();
        ok |= digits(c, &mut raw);
    }
    if ok && matches!(c.peek(), Some('e' | 'E')) {
        raw.push('e');
        c.bump();
        if let Some(sign @ ('-' | '+')) = c.peek() {
            raw.push(sign);
            c.bump();
        }
        ok = digits(c, &mut raw);
    }
    if ok && matches!(c.peek(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_') {
        ok = false;
        c.bump();
    }
    match raw.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Ok(Tok::Number(v, raw)),
        _ => Err(c.error(start, format!("malformed number `{raw}`"))),
    }
}

fn lex_string(c: &mut Cursor<'_>, start: Span) -> Result<Tok, SyntaxError> {
    c.bump();
    let mut s = String::new();
    loop {
        match c.bump() {
            None | Some('\n') => return Err(c.error(start, "unterminated string".into())),
            Some('"') => return Ok(Tok::Str(s)),
            Some('\\') => {
                let esc = c.here();
                match c.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    other => {
                        let shown = other.map(String::from).unwrap_or_default();
                        return Err(c.error(esc, format!("unknown escape `\\{shown}`")));
                    }
                }
            }
            Some(ch) => s.push(ch),
        }
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            ch => out.push(ch),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn arrow_versus_negative_number() {
        assert_eq!(kinds("-> -2.5")[..2], [Tok::Arrow, Tok::Number(-2.5, "-2.5".into())]);
    }

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("# note\n  arm").unwrap();
        assert_eq!(toks[0].1.line, 2);
        assert_eq!(toks[0].1.column, 3);
    }

    #[test]
    fn string_escapes_round_trip() {
        let s = "a \"b\"\\\n\tc";
        assert_eq!(kinds(&quote(s))[0], Tok::Str(s.into()));
    }

    #[test]
    fn bad_inputs() {
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("1.2.3x").is_err());
        assert!(tokenize("@").is_err());
        assert!(tokenize("$").is_err());
    }
}
