//! Text syntax for q-series and K/L-polynomial expressions.
//!
//! ```text
//! f25*(1/R5 - q - q^2*R5)
//! f2^(25*c+5) / f1^(75*c+16)
//! -18*P(3,1) - 27*P(3,2) + 2816*K^-4
//! extract(f2^16/f1^49, 5, 3)
//! ```
//!
//! Atoms: integers, `q`, `f<m>` (the product `prod (1 - q^{mn})`), `R` /
//! `R<m>` (Rogers-Ramanujan product in `q^m`), `K`, `L`, `P(m,n)`, and
//! `extract(expr, m, r)`. Exponents must fold to integer constants; named
//! integer parameters (such as `c`) and named macros are supplied through a
//! [`ParseEnv`]. Multiplication is always explicit.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

const MAX_MACRO_DEPTH: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    Int(BigInt),
    Q,
    Eta(u64),
    Rr(u64),
    K,
    L,
    P(i64, i64),
    Extract(Box<Ast>, u64, i64),
    Add(Vec<Ast>),
    Mul(Vec<Ast>),
    Neg(Box<Ast>),
    Pow(Box<Ast>, i64),
}

impl Ast {
    /// Folds a constant integer expression. Negative powers only fold when
    /// the base is a unit.
    pub fn as_integer(&self) -> Option<BigInt> {
        match self {
            Ast::Int(v) => Some(v.clone()),
            Ast::Neg(a) => a.as_integer().map(|v| -v),
            Ast::Add(xs) => xs
                .iter()
                .try_fold(BigInt::zero(), |acc, x| x.as_integer().map(|v| acc + v)),
            Ast::Mul(xs) => xs
                .iter()
                .try_fold(BigInt::one(), |acc, x| x.as_integer().map(|v| acc * v)),
            Ast::Pow(b, e) => {
                let b = b.as_integer()?;
                if *e >= 0 {
                    Some(num_traits::pow(b, *e as usize))
                } else if b == BigInt::one() || b == -BigInt::one() {
                    Some(num_traits::pow(b, e.unsigned_abs() as usize))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Integer parameters and textual macros visible to the parser.
#[derive(Clone, Debug, Default)]
pub struct ParseEnv {
    pub ints: BTreeMap<String, i64>,
    pub macros: BTreeMap<String, String>,
}

impl ParseEnv {
    pub fn with_int(mut self, name: &str, value: i64) -> Self {
        self.ints.insert(name.to_string(), value);
        self
    }

    pub fn with_macro(mut self, name: &str, text: &str) -> Self {
        self.macros.insert(name.to_string(), text.to_string());
        self
    }
}

pub fn parse(text: &str, env: &ParseEnv) -> Result<Ast> {
    parse_at_depth(text, env, 0)
}

fn parse_at_depth(text: &str, env: &ParseEnv, depth: usize) -> Result<Ast> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        env,
        depth,
    };
    let ast = p.sum()?;
    if let Some(t) = p.peek() {
        return Err(p.err_at(t.pos, format!("unexpected `{}`", t.kind)));
    }
    Ok(ast)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum TokKind {
    Num(BigInt),
    Ident(String),
    Op(char),
}

impl std::fmt::Display for TokKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TokKind::Num(n) => write!(f, "{n}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Op(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let n: BigInt = text[start..i].parse().expect("digits parse");
            out.push(Token {
                kind: TokKind::Num(n),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                kind: TokKind::Op(c),
                pos: i,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    env: &'a ParseEnv,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_pos(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.pos + 1)
    }

    fn err_at(&self, pos: usize, msg: String) -> Error {
        Error::Parse { pos, msg }
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokKind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.eat_op(op) {
            return Ok(());
        }
        let pos = self.peek().map_or(self.end_pos(), |t| t.pos);
        Err(self.err_at(pos, format!("expected `{op}`")))
    }

    fn sum(&mut self) -> Result<Ast> {
        let mut terms = Vec::new();
        let first_neg = if self.eat_op('-') {
            true
        } else {
            self.eat_op('+');
            false
        };
        let t = self.product()?;
        terms.push(if first_neg { Ast::Neg(Box::new(t)) } else { t });
        loop {
            if self.eat_op('+') {
                terms.push(self.product()?);
            } else if self.eat_op('-') {
                terms.push(Ast::Neg(Box::new(self.product()?)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Ast::Add(terms)
        })
    }

    fn product(&mut self) -> Result<Ast> {
        let mut factors = vec![self.power()?];
        loop {
            if self.eat_op('*') {
                factors.push(self.power()?);
            } else if self.eat_op('/') {
                let d = self.power()?;
                factors.push(Ast::Pow(Box::new(d), -1));
            } else {
                break;
            }
        }
        if factors.len() > 1 && factors[0] == Ast::Int(BigInt::one()) {
            factors.remove(0);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Ast::Mul(factors)
        })
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.primary()?;
        if !self.eat_op('^') {
            return Ok(base);
        }
        let pos = self.peek().map_or(self.end_pos(), |t| t.pos);
        let neg = if self.eat_op('-') {
            true
        } else {
            self.eat_op('+');
            false
        };
        let e = self.primary()?;
        let e = self.fold_int(&e, pos, "exponent")?;
        Ok(Ast::Pow(Box::new(base), if neg { -e } else { e }))
    }

    fn fold_int(&self, ast: &Ast, pos: usize, what: &str) -> Result<i64> {
        ast.as_integer()
            .and_then(|v| v.to_i64())
            .ok_or_else(|| self.err_at(pos, format!("{what} must be a constant machine integer")))
    }

    fn int_arg(&mut self, what: &str) -> Result<i64> {
        let pos = self.peek().map_or(self.end_pos(), |t| t.pos);
        let a = self.sum()?;
        self.fold_int(&a, pos, what)
    }

    fn primary(&mut self) -> Result<Ast> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err_at(self.end_pos(), "unexpected end of input".into()));
        };
        self.pos += 1;
        match tok.kind {
            TokKind::Num(n) => Ok(Ast::Int(n)),
            TokKind::Op('(') => {
                let inner = self.sum()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            TokKind::Op(c) => Err(self.err_at(tok.pos, format!("unexpected `{c}`"))),
            TokKind::Ident(name) => self.ident(&name, tok.pos),
        }
    }

    fn scale_suffix(&self, digits: &str, pos: usize) -> Result<u64> {
        match digits.parse::<u64>() {
            Ok(m) if m >= 1 => Ok(m),
            _ => Err(self.err_at(pos, format!("bad scale `{digits}`"))),
        }
    }

    fn ident(&mut self, name: &str, pos: usize) -> Result<Ast> {
        if let Some(v) = self.env.ints.get(name) {
            return Ok(Ast::Int(BigInt::from(*v)));
        }
        if let Some(text) = self.env.macros.get(name) {
            if self.depth >= MAX_MACRO_DEPTH {
                return Err(self.err_at(pos, format!("macro `{name}` nests too deeply")));
            }
            return parse_at_depth(text, self.env, self.depth + 1);
        }
        match name {
            "q" => Ok(Ast::Q),
            "K" => Ok(Ast::K),
            "L" => Ok(Ast::L),
            "R" => Ok(Ast::Rr(1)),
            "P" => {
                self.expect_op('(')?;
                let m = self.int_arg("P index")?;
                self.expect_op(',')?;
                let n = self.int_arg("P index")?;
                self.expect_op(')')?;
                if m < 0 {
                    return Err(self.err_at(pos, format!("P({m},{n}) needs m >= 0")));
                }
                Ok(Ast::P(m, n))
            }
            "extract" => {
                self.expect_op('(')?;
                let inner = self.sum()?;
                self.expect_op(',')?;
                let m = self.int_arg("extract modulus")?;
                self.expect_op(',')?;
                let r = self.int_arg("extract residue")?;
                self.expect_op(')')?;
                if m < 1 {
                    return Err(self.err_at(pos, "extract modulus must be positive".into()));
                }
                Ok(Ast::Extract(Box::new(inner), m as u64, r.rem_euclid(m)))
            }
            _ => {
                if let Some(d) = name.strip_prefix('f') {
                    if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) {
                        return Ok(Ast::Eta(self.scale_suffix(d, pos)?));
                    }
                }
                if let Some(d) = name.strip_prefix('R') {
                    if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) {
                        return Ok(Ast::Rr(self.scale_suffix(d, pos)?));
                    }
                }
                Err(self.err_at(pos, format!("unknown name `{name}`")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ast {
        parse(s, &ParseEnv::default()).unwrap()
    }

    #[test]
    fn atoms_and_precedence() {
        assert_eq!(
            p("f25*(1/R5 - q - q^2*R5)"),
            Ast::Mul(vec![
                Ast::Eta(25),
                Ast::Add(vec![
                    Ast::Pow(Box::new(Ast::Rr(5)), -1),
                    Ast::Neg(Box::new(Ast::Q)),
                    Ast::Neg(Box::new(Ast::Mul(vec![
                        Ast::Pow(Box::new(Ast::Q), 2),
                        Ast::Rr(5)
                    ]))),
                ])
            ])
        );
        assert_eq!(p("-q^2"), Ast::Neg(Box::new(Ast::Pow(Box::new(Ast::Q), 2))));
        assert_eq!(p("K^-4"), Ast::Pow(Box::new(Ast::K), -4));
        assert_eq!(p("R"), Ast::Rr(1));
    }

    #[test]
    fn parameters_fold_into_exponents() {
        let env = ParseEnv::default().with_int("c", 2);
        let a = parse("f5^(3*c-8)", &env).unwrap();
        assert_eq!(a, Ast::Pow(Box::new(Ast::Eta(5)), -2));
        let b = parse("8*10^7", &env).unwrap();
        assert_eq!(b.as_integer().unwrap(), BigInt::from(80_000_000));
    }

    #[test]
    fn macros_expand_recursively() {
        let env = ParseEnv::default()
            .with_macro("B", "-2*P(1,1)-6*P(0,1)-5")
            .with_macro("BB", "B*B");
        let a = parse("BB", &env).unwrap();
        match a {
            Ast::Mul(xs) => assert_eq!(xs.len(), 2),
            other => panic!("{other:?}"),
        }
        let looped = ParseEnv::default().with_macro("X", "X+1");
        assert!(matches!(parse("X", &looped), Err(Error::Parse { .. })));
    }

    #[test]
    fn extract_residue_is_normalized() {
        assert_eq!(p("extract(q, 5, -2)"), Ast::Extract(Box::new(Ast::Q), 5, 3));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("f1 * ", &ParseEnv::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        let e = parse("f1^q", &ParseEnv::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { pos: 3, .. }));
        assert!(parse("g7", &ParseEnv::default()).is_err());
        assert!(parse("P(-1, 2)", &ParseEnv::default()).is_err());
        assert!(parse("f0", &ParseEnv::default()).is_err());
        assert!(parse("(q", &ParseEnv::default()).is_err());
        assert!(parse("q)", &ParseEnv::default()).is_err());
    }
}
