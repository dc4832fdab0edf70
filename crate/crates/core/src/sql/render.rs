use std::fmt::{self, Write};

use super::ast::{Expr, Ident, SqlValue, UnaryOp};
use super::parser::is_reserved;

/// Deterministic, fully parenthesized SQL text. Text literals are quoted
/// with internal quotes doubled.
pub fn render(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out, &mut DisplaySink);
    out
}

pub fn render_value(v: &SqlValue) -> String {
    match v {
        SqlValue::Integer(i) => i.to_string(),
        SqlValue::Real(r) => render_real(*r),
        SqlValue::Text(s) => quote_string(s),
        SqlValue::Null => "NULL".to_string(),
    }
}

fn render_real(r: f64) -> String {
    if r.is_nan() {
        "NULL".to_string()
    } else if r.is_infinite() {
        if r > 0.0 { "9e999" } else { "-9e999" }.to_string()
    } else {
        // Debug output is the shortest representation that round-trips and
        // always carries a `.` or an exponent.
        format!("{r:?}")
    }
}

pub fn quote_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Identifier as it must be written to be read back: bare when it is a
/// plain word, double-quoted otherwise.
pub fn render_ident(id: &Ident) -> String {
    let s = id.as_str();
    let plain = s
        .bytes()
        .next()
        .is_some_and(|b| b.is_ascii_alphabetic() || b == b'_')
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
        && !is_reserved(s);
    if plain {
        s.to_string()
    } else {
        quote_ident(s)
    }
}

pub fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Decides how columns and literals are emitted.
pub(crate) trait SqlSink {
    fn column(&mut self, out: &mut String, column: &Ident);
    fn literal(&mut self, out: &mut String, value: &SqlValue);
}

struct DisplaySink;

impl SqlSink for DisplaySink {
    fn column(&mut self, out: &mut String, column: &Ident) {
        out.push_str(&render_ident(column));
    }

    fn literal(&mut self, out: &mut String, value: &SqlValue) {
        out.push_str(&render_value(value));
    }
}

/// Emits quoted identifiers and numbered `?N` placeholders, collecting bound values in
/// tree order.
pub(crate) struct BindSink<'a> {
    pub params: &'a mut Vec<SqlValue>,
}

impl SqlSink for BindSink<'_> {
    fn column(&mut self, out: &mut String, column: &Ident) {
        out.push_str(&quote_ident(column.as_str()));
    }

    fn literal(&mut self, out: &mut String, value: &SqlValue) {
        self.params.push(value.clone());
        let _ = write!(out, "?{}", self.params.len());
    }
}

pub(crate) fn write_expr(expr: &Expr, out: &mut String, sink: &mut impl SqlSink) {
    match expr {
        Expr::Column(c) => sink.column(out, c),
        Expr::Literal(v) => sink.literal(out, v),
        Expr::Unary(UnaryOp::Not, e) => {
            out.push_str("(NOT ");
            write_expr(e, out, sink);
            out.push(')');
        }
        Expr::Unary(UnaryOp::Neg, e) => {
            // The space keeps `- -1` from reading as a comment.
            out.push_str("(- ");
            write_expr(e, out, sink);
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            out.push('(');
            write_expr(l, out, sink);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(r, out, sink);
            out.push(')');
        }
        Expr::IsNull { expr, negated } => {
            out.push('(');
            write_expr(expr, out, sink);
            out.push_str(if *negated { " IS NOT NULL)" } else { " IS NULL)" });
        }
        Expr::Aggregate { func, arg } => {
            out.push_str(func.name());
            out.push('(');
            match arg {
                Some(a) => write_expr(a, out, sink),
                None => out.push('*'),
            }
            out.push(')');
        }
    }
}

const PREC_NOT: u8 = 3;
const PREC_CMP: u8 = 4;
const PREC_NEG: u8 = 7;
const PREC_ATOM: u8 = 8;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(UnaryOp::Not, _) => PREC_NOT,
        Expr::IsNull { .. } => PREC_CMP,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expr::Literal(SqlValue::Integer(i)) if *i < 0 => PREC_NEG,
        Expr::Literal(SqlValue::Real(r)) if r.is_sign_negative() => PREC_NEG,
        _ => PREC_ATOM,
    }
}

fn pretty(e: &Expr, min: u8, out: &mut String) {
    let wrap = precedence(e) < min;
    if wrap {
        out.push('(');
    }
    match e {
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            pretty(l, p, out);
            let _ = write!(out, " {} ", op.symbol());
            pretty(r, p + 1, out);
        }
        Expr::Unary(UnaryOp::Not, inner) => {
            out.push_str("NOT ");
            pretty(inner, PREC_NOT, out);
        }
        Expr::Unary(UnaryOp::Neg, inner) => {
            let mut s = String::new();
            pretty(inner, PREC_NEG, &mut s);
            out.push('-');
            if s.starts_with('-') {
                out.push(' ');
            }
            out.push_str(&s);
        }
        Expr::IsNull { expr, negated } => {
            pretty(expr, PREC_CMP + 1, out);
            out.push_str(if *negated { " IS NOT NULL" } else { " IS NULL" });
        }
        Expr::Aggregate { func, arg } => {
            out.push_str(func.name());
            out.push('(');
            match arg {
                Some(a) => pretty(a, 0, out),
                None => out.push('*'),
            }
            out.push(')');
        }
        Expr::Column(_) | Expr::Literal(_) => write_expr(e, out, &mut DisplaySink),
    }
    if wrap {
        out.push(')');
    }
}

/// Minimal-parenthesis rendering, used in messages.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        pretty(self, 0, &mut out);
        f.write_str(&out)
    }
}
