//! Recursive-descent parser for the expression subset.
//!
//! Precedence, loosest first: OR, AND, NOT, comparison / IS [NOT] NULL,
//! additive, multiplicative, unary minus.

use std::collections::BTreeSet;

use super::ast::{AggFunc, Assignment, BinaryOp, Expr, Ident, SelectItem, SqlValue, UnaryOp};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::error::{Error, Result};

const RESERVED: [&str; 6] = ["AND", "OR", "NOT", "IS", "NULL", "AS"];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    allow_aggregates: bool,
    in_aggregate: bool,
    args: Option<&'a [SqlValue]>,
    used_placeholders: BTreeSet<usize>,
}

impl<'a> Parser<'a> {
    fn new(src: &str, allow_aggregates: bool, args: Option<&'a [SqlValue]>) -> Result<Self> {
        Ok(Parser {
            tokens: tokenize(src, args.is_some())?,
            pos: 0,
            allow_aggregates,
            in_aggregate: false,
            args,
            used_placeholders: BTreeSet::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str], message: &str) -> Error {
        ParseError::new(
            self.offset(),
            expected.iter().map(|s| s.to_string()).collect(),
            self.peek().to_string(),
            message,
        )
        .into()
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&tok.to_string()], ""))
        }
    }

    fn expect_end(&self, context: &str) -> Result<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            Tok::Word(w) if w.eq_ignore_ascii_case("AS") => {
                Err(Error::AliasNotSupported(context.to_string()))
            }
            _ => Err(self.error(&["operator", "end of input"], "")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.or()
    }

    fn or(&mut self) -> Result<Expr> {
        let mut lhs = self.and()?;
        while self.eat_keyword("OR") {
            let rhs = self.and()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr> {
        let mut lhs = self.not()?;
        while self.eat_keyword("AND") {
            let rhs = self.not()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr> {
        if self.eat_keyword("NOT") {
            let inner = self.not()?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(inner)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Eq => BinaryOp::Eq,
                Tok::NotEq => BinaryOp::NotEq,
                Tok::Lt => BinaryOp::Lt,
                Tok::LtEq => BinaryOp::LtEq,
                Tok::Gt => BinaryOp::Gt,
                Tok::GtEq => BinaryOp::GtEq,
                Tok::Word(w) if w.eq_ignore_ascii_case("IS") => {
                    self.bump();
                    let negated = self.eat_keyword("NOT");
                    if !self.eat_keyword("NULL") {
                        return Err(self.error(&["`NULL`"], "only IS [NOT] NULL is supported"));
                    }
                    lhs = Expr::IsNull {
                        expr: Box::new(lhs),
                        negated,
                    };
                    continue;
                }
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.additive()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() != Tok::Minus {
            return self.primary();
        }
        self.bump();
        // `-<number>` is a single literal so that i64::MIN is representable.
        if let Tok::Number(text) = self.peek().clone() {
            let offset = self.offset();
            self.bump();
            return Ok(Expr::Literal(number(&format!("-{text}"), offset)?));
        }
        let inner = self.unary()?;
        Ok(match inner {
            Expr::Literal(SqlValue::Integer(i)) if i != i64::MIN => {
                Expr::Literal(SqlValue::Integer(-i))
            }
            Expr::Literal(SqlValue::Real(r)) => Expr::Literal(SqlValue::Real(-r)),
            other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
        })
    }

    fn primary(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Number(text) => {
                self.bump();
                Ok(Expr::Literal(number(&text, offset)?))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(SqlValue::Text(s)))
            }
            Tok::Placeholder(n) => {
                let args = self.args.expect("placeholders only lexed with args");
                let value = args.get(n - 1).cloned().ok_or(Error::ArityMismatch {
                    expected: n,
                    actual: args.len(),
                })?;
                self.used_placeholders.insert(n);
                self.bump();
                Ok(Expr::Literal(value))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::QuotedIdent(name) => {
                self.bump();
                Ok(Expr::Column(Ident::new(name)))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("NULL") => {
                self.bump();
                Ok(Expr::Literal(SqlValue::Null))
            }
            Tok::Word(w) if is_reserved(&w) => Err(self.error(&["expression"], "")),
            Tok::Word(w) => {
                if *self.peek_at(1) == Tok::LParen {
                    return self.call(&w);
                }
                self.bump();
                Ok(Expr::Column(Ident::new(w)))
            }
            Tok::Star => Err(self.error(
                &["expression"],
                "`*` is only valid as the argument of COUNT",
            )),
            _ => Err(self.error(&["expression"], "")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let Some(func) = AggFunc::from_name(name) else {
            return Err(self.error(&["COUNT", "SUM", "AVG", "MIN", "MAX"], &format!(
                "unknown function `{name}`"
            )));
        };
        if !self.allow_aggregates {
            return Err(self.error(
                &["expression"],
                &format!("aggregate function `{}` is not allowed here", func.name()),
            ));
        }
        if self.in_aggregate {
            return Err(self.error(&["expression"], "aggregate calls cannot be nested"));
        }
        self.bump();
        self.expect(Tok::LParen)?;
        let arg = if func == AggFunc::Count && *self.peek() == Tok::Star {
            self.bump();
            None
        } else {
            self.in_aggregate = true;
            let e = self.expr();
            self.in_aggregate = false;
            Some(Box::new(e?))
        };
        self.expect(Tok::RParen)?;
        Ok(Expr::Aggregate { func, arg })
    }

    /// Everything between commas, as source text, for error reporting.
    fn item_list<T>(
        &mut self,
        src: &str,
        mut item: impl FnMut(&mut Self) -> Result<T>,
    ) -> Result<Vec<T>> {
        let mut out = Vec::new();
        loop {
            let start = self.offset();
            out.push(item(self)?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Eof => return Ok(out),
                Tok::Word(w) if w.eq_ignore_ascii_case("AS") || !is_reserved(w) => {
                    let end = src.len();
                    return Err(Error::AliasNotSupported(src[start..end].trim().to_string()));
                }
                Tok::QuotedIdent(_) | Tok::Str(_) => {
                    return Err(Error::AliasNotSupported(src[start..].trim().to_string()));
                }
                _ => return Err(self.error(&["`,`", "operator", "end of input"], "")),
            }
        }
    }

    fn check_placeholders(&self) -> Result<()> {
        let Some(args) = self.args else {
            return Ok(());
        };
        let contiguous = self.used_placeholders.iter().copied().eq(1..=args.len());
        if !contiguous {
            return Err(Error::ArityMismatch {
                expected: self.used_placeholders.len(),
                actual: args.len(),
            });
        }
        Ok(())
    }
}

fn number(text: &str, offset: usize) -> Result<SqlValue> {
    let is_int = text.trim_start_matches('-').bytes().all(|b| b.is_ascii_digit());
    if is_int {
        if let Ok(i) = text.parse::<i64>() {
            return Ok(SqlValue::Integer(i));
        }
    }
    text.parse::<f64>().map(SqlValue::Real).map_err(|_| {
        ParseError::new(offset, vec!["number".into()], text.to_string(), "malformed number")
            .into()
    })
}

/// Parse a boolean predicate (WHERE clause). Aggregation calls are rejected.
pub fn parse_predicate(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, false, None)?;
    let e = p.expr()?;
    p.expect_end(text)?;
    Ok(e)
}

/// Parse a HAVING clause, which may contain aggregation calls.
pub fn parse_having(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, true, None)?;
    let e = p.expr()?;
    p.expect_end(text)?;
    Ok(e)
}

/// Parse a comma-separated projection list. `AS` aliases are rejected.
pub fn parse_select_list(text: &str) -> Result<Vec<SelectItem>> {
    let mut p = Parser::new(text, false, None)?;
    let items = p.item_list(text, |p| p.expr())?;
    Ok(items.into_iter().map(SelectItem::new).collect())
}

/// Parse an aggregate select list: expressions over columns and calls to
/// COUNT / SUM / AVG / MIN / MAX.
pub fn parse_aggregate_list(text: &str) -> Result<Vec<SelectItem>> {
    let mut p = Parser::new(text, true, None)?;
    let items = p.item_list(text, |p| p.expr())?;
    Ok(items.into_iter().map(SelectItem::new).collect())
}

/// Parse a comma-separated list of bare column names (GROUP BY).
pub fn parse_column_list(text: &str) -> Result<Vec<Ident>> {
    let mut p = Parser::new(text, false, None)?;
    p.item_list(text, |p| match p.bump() {
        Tok::Word(w) if !is_reserved(&w) => Ok(Ident::new(w)),
        Tok::QuotedIdent(w) => Ok(Ident::new(w)),
        _ => {
            p.pos -= 1;
            Err(p.error(&["column name"], ""))
        }
    })
}

/// Parse `col = expr, ...`. Each target column may appear only once.
pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>> {
    let mut p = Parser::new(text, false, None)?;
    let mut out: Vec<Assignment> = Vec::new();
    loop {
        let column = match p.bump() {
            Tok::Word(w) if !is_reserved(&w) => Ident::new(w),
            Tok::QuotedIdent(w) => Ident::new(w),
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return Err(p.error(&["column name"], ""));
            }
        };
        p.expect(Tok::Eq)?;
        let value = p.expr()?;
        if out.iter().any(|a| a.column == column) {
            return Err(Error::DuplicateAssignment(column));
        }
        out.push(Assignment { column, value });
        match p.peek() {
            Tok::Comma => {
                p.bump();
            }
            Tok::Eof => return Ok(out),
            _ => return Err(p.error(&["`,`", "operator", "end of input"], "")),
        }
    }
}

/// Parse `template` with `$1..$n` as holes and substitute `args` as literal
/// nodes. Argument text never reaches the lexer, so it cannot change the
/// shape of the resulting expression.
pub fn sqlformat(template: &str, args: &[SqlValue]) -> Result<Expr> {
    let mut p = Parser::new(template, false, Some(args))?;
    let e = p.expr()?;
    p.expect_end(template)?;
    p.check_placeholders()?;
    Ok(e)
}
