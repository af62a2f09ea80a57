//! Textual codec: `<T_i> -> <T_i-1> <n> n <s> k` production lines and
//! `1<=k<=n<=100` constraint chains.

use super::{
    BinOpKind, Comparator, Constraint, CounterArg, Expr, LhsKind, Production, SeparatorKind,
    Symbol,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed production at {position}: {reason}")]
    MalformedProduction { position: usize, reason: String },
    #[error("malformed constraint at {position}: {reason}")]
    MalformedConstraint { position: usize, reason: String },
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Parses one serialized production line, e.g. `<S> -> t <n> <T_t>`.
///
/// Round-trips through [`super::format_production`] after whitespace
/// normalization.
pub fn parse_production(line: &str) -> Result<Production, ParseError> {
    let err = |position: usize, reason: &str| ParseError::MalformedProduction {
        position,
        reason: reason.to_string(),
    };
    let arrow = line
        .find("->")
        .ok_or_else(|| err(0, "missing `->` arrow"))?;
    let lhs_text = line[..arrow].trim();
    let (lhs_name, lhs_kind) = parse_lhs(lhs_text).map_err(|reason| err(0, &reason))?;
    let mut rhs = Vec::new();
    let rhs_text = &line[arrow + 2..];
    for token in rhs_text.split_whitespace() {
        let position = token.as_ptr() as usize - line.as_ptr() as usize;
        rhs.push(parse_rhs_token(token).map_err(|reason| err(position, &reason))?);
    }
    Ok(Production {
        lhs_name,
        lhs_kind,
        rhs,
    })
}

fn parse_lhs(text: &str) -> Result<(String, LhsKind), String> {
    let inner = text
        .strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .ok_or_else(|| format!("lhs `{text}` is not angle-bracketed"))?;
    match inner.split_once('_') {
        None => {
            if is_ident(inner) {
                Ok((inner.to_string(), LhsKind::Plain))
            } else {
                Err(format!("lhs name `{inner}` is not an identifier"))
            }
        }
        Some((name, sub)) => {
            if !is_ident(name) {
                return Err(format!("lhs name `{name}` is not an identifier"));
            }
            if sub == "i" {
                Ok((name.to_string(), LhsKind::CounterParam))
            } else if let Ok(v) = sub.parse::<u64>() {
                Ok((name.to_string(), LhsKind::Base(v)))
            } else {
                Err(format!("lhs subscript `{sub}` is neither `i` nor an integer"))
            }
        }
    }
}

fn parse_rhs_token(token: &str) -> Result<Symbol, String> {
    if token == "<s>" {
        return Ok(Symbol::Separator(SeparatorKind::Space));
    }
    if token == "<n>" {
        return Ok(Symbol::Separator(SeparatorKind::Newline));
    }
    if let Some(inner) = token.strip_prefix('<') {
        let inner = inner
            .strip_suffix('>')
            .ok_or_else(|| format!("unterminated nonterminal `{token}`"))?;
        let (name, arg) = match inner.split_once('_') {
            None => (inner, None),
            Some((name, sub)) => {
                let arg = if sub == "i" {
                    CounterArg::Same
                } else if sub == "i-1" {
                    CounterArg::Decrement
                } else if let Ok(v) = sub.parse::<u64>() {
                    CounterArg::Const(v)
                } else if is_ident(sub) {
                    CounterArg::VarRef(sub.to_string())
                } else {
                    return Err(format!("bad counter argument `{sub}`"));
                };
                (name, Some(arg))
            }
        };
        if !is_ident(name) {
            return Err(format!("nonterminal name `{name}` is not an identifier"));
        }
        return Ok(Symbol::NonterminalRef {
            name: name.to_string(),
            arg,
        });
    }
    if token.contains('>') {
        return Err(format!("stray `>` in token `{token}`"));
    }
    if let Some(name) = token.strip_suffix("_i") {
        if is_ident(name) {
            return Ok(Symbol::Variable {
                name: name.to_string(),
                indexed: true,
            });
        }
    }
    if is_ident(token) {
        return Ok(Symbol::Variable {
            name: token.to_string(),
            indexed: false,
        });
    }
    // anything else is a literal terminal token
    Ok(Symbol::Terminal(token.to_string()))
}

/// Parses a comparator chain like `1<=x_i<=n`. Whitespace around operators
/// is ignored. Natural-language strings fail with `MalformedConstraint`.
pub fn parse_constraint(line: &str) -> Result<Constraint, ParseError> {
    let mut p = ConstraintParser {
        input: line.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let mut operands = vec![p.expr()?];
    let mut ops = Vec::new();
    loop {
        p.skip_ws();
        match p.comparator() {
            Some(op) => {
                ops.push(op);
                p.skip_ws();
                operands.push(p.expr()?);
            }
            None => break,
        }
    }
    p.skip_ws();
    if p.pos != p.input.len() {
        return Err(p.err("trailing input"));
    }
    if ops.is_empty() {
        return Err(p.err("expected a comparator chain with at least one comparison"));
    }
    Ok(Constraint { operands, ops })
}

struct ConstraintParser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> ConstraintParser<'a> {
    fn err(&self, reason: &str) -> ParseError {
        ParseError::MalformedConstraint {
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn comparator(&mut self) -> Option<Comparator> {
        let rest = &self.input[self.pos..];
        let (op, len) = if rest.starts_with(b"<=") {
            (Comparator::Le, 2)
        } else if rest.starts_with(b">=") {
            (Comparator::Ge, 2)
        } else if rest.starts_with(b"<") {
            (Comparator::Lt, 1)
        } else if rest.starts_with(b">") {
            (Comparator::Gt, 1)
        } else if rest.starts_with(b"=") {
            (Comparator::Eq, 1)
        } else {
            return None;
        };
        self.pos += len;
        Some(op)
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some(b'+') => BinOpKind::Add,
                Some(b'-') => BinOpKind::Sub,
                _ => break,
            };
            self.pos += 1;
            self.skip_ws();
            let right = self.term()?;
            left = Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    // term := atom ('*' atom)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.atom()?;
        loop {
            self.skip_ws();
            if self.peek() != Some(b'*') {
                break;
            }
            self.pos += 1;
            self.skip_ws();
            let right = self.atom()?;
            left = Expr::BinOp {
                op: BinOpKind::Mul,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    // atom := '(' expr ')' | int ('^' int)? | ident ('_i')?
    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'-' => {
                let value = self.integer()?;
                if self.peek() == Some(b'^') {
                    self.pos += 1;
                    let exponent = self.integer()?;
                    let exponent = u32::try_from(exponent)
                        .map_err(|_| self.err("exponent must be a nonnegative integer"))?;
                    Ok(Expr::Power {
                        base: value,
                        exponent,
                    })
                } else {
                    Ok(Expr::IntConst(value))
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.input[start..self.pos])
                    .unwrap()
                    .to_string();
                let indexed = if self.input[self.pos..].starts_with(b"_i") {
                    self.pos += 2;
                    true
                } else if self.peek() == Some(b'_') {
                    return Err(self.err("only `_i` index suffixes are supported"));
                } else {
                    false
                };
                Ok(Expr::Var { name, indexed })
            }
            _ => Err(self.err("expected an integer, variable, or parenthesized expression")),
        }
    }

    fn integer(&mut self) -> Result<i128, ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.input[start..self.pos])
            .unwrap()
            .parse::<i128>()
            .map_err(|_| self.err("integer out of range"))
    }
}
