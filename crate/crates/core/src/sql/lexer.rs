use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    QuotedIdent(String),
    Number(String),
    Str(String),
    Placeholder(usize),
    LParen,
    RParen,
    Comma,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::QuotedIdent(w) => write!(f, "`\"{w}\"`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Placeholder(n) => write!(f, "${n}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::NotEq => f.write_str("`<>`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::LtEq => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::GtEq => f.write_str("`>=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str, allow_placeholders: bool) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = |tok| Token { tok, offset: start };
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => out.push(simple(Tok::LParen)),
            b')' => out.push(simple(Tok::RParen)),
            b',' => out.push(simple(Tok::Comma)),
            b'*' => out.push(simple(Tok::Star)),
            b'+' => out.push(simple(Tok::Plus)),
            b'-' => out.push(simple(Tok::Minus)),
            b'/' => out.push(simple(Tok::Slash)),
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                }
                out.push(simple(Tok::Eq))
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                out.push(simple(Tok::NotEq))
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    out.push(simple(Tok::LtEq))
                }
                Some(b'>') => {
                    i += 1;
                    out.push(simple(Tok::NotEq))
                }
                _ => out.push(simple(Tok::Lt)),
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    out.push(simple(Tok::GtEq))
                } else {
                    out.push(simple(Tok::Gt))
                }
            }
            b'\'' | b'"' => {
                let quote = c;
                let mut text = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < bytes.len() {
                    if bytes[j] == quote {
                        if bytes.get(j + 1) == Some(&quote) {
                            text.push(quote as char);
                            j += 2;
                            continue;
                        }
                        closed = true;
                        break;
                    }
                    let ch = src[j..].chars().next().expect("char boundary");
                    text.push(ch);
                    j += ch.len_utf8();
                }
                if !closed {
                    return Err(ParseError::new(
                        src.len(),
                        vec![format!("`{}`", quote as char)],
                        "end of input",
                        if quote == b'\'' {
                            "unterminated string literal"
                        } else {
                            "unterminated quoted identifier"
                        },
                    ));
                }
                i = j;
                out.push(simple(if quote == b'\'' {
                    Tok::Str(text)
                } else {
                    Tok::QuotedIdent(text)
                }));
            }
            b'$' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let digits = &src[i + 1..j];
                let n: usize = digits.parse().unwrap_or(0);
                if !allow_placeholders || n == 0 {
                    return Err(ParseError::new(
                        start,
                        vec!["expression".into()],
                        "`$`",
                        if allow_placeholders {
                            "placeholders are numbered from $1"
                        } else {
                            "placeholders are only valid in format templates"
                        },
                    ));
                }
                i = j - 1;
                out.push(simple(Tok::Placeholder(n)));
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                if text == "." {
                    return Err(ParseError::new(start, vec!["expression".into()], "`.`", ""));
                }
                if j < bytes.len() && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_') {
                    return Err(ParseError::new(
                        j,
                        vec!["operator".into()],
                        format!("`{}`", bytes[j] as char),
                        "malformed number",
                    ));
                }
                i = j - 1;
                out.push(simple(Tok::Number(text.to_string())));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push(simple(Tok::Word(src[i..j].to_string())));
                i = j - 1;
            }
            _ => {
                let ch = src[i..].chars().next().expect("char boundary");
                return Err(ParseError::new(
                    start,
                    vec!["expression".into()],
                    format!("`{ch}`"),
                    "unexpected character",
                ));
            }
        }
        i += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}
