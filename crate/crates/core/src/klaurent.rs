//! Exact Laurent polynomials in `K` (or `L = K - 4`) and the `P(m,n)` family.
//!
//! `P(m,n) = q^{-m} R_1^{-(m+2n)} R_2^{-(2m-n)} + (-1)^{m+n} q^m R_1^{m+2n} R_2^{2m-n}`
//! lies in `Z[K, K^{-1}]` and obeys
//!
//! ```text
//! P(m, n+1) = 4 K^{-1} P(m, n) + P(m, n-1)
//! P(m+2, n) = K P(m+1, n) + P(m, n)
//! ```
//!
//! from `P(0,0) = 2`, `P(0,1) = 4/K`, `P(1,0) = K`, `P(1,-1) = 4/K - 2 + K`.
//! Rows `m = 0, 1` are walked in both directions of `n`; higher rows come from
//! the second recurrence. Results are memoized process-wide.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Ast, ParseEnv};
use crate::qfunctions::{eval_expr, EtaQuotientSpec, SeriesExpr};
use crate::series::{CoeffRing, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    K,
    L,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::K => write!(f, "K"),
            Symbol::L => write!(f, "L"),
        }
    }
}

/// Laurent polynomial with exact integer coefficients; zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPoly {
    symbol: Symbol,
    terms: BTreeMap<i64, BigInt>,
}

impl LaurentPoly {
    pub fn zero(symbol: Symbol) -> Self {
        LaurentPoly {
            symbol,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(symbol: Symbol, c: impl Into<BigInt>) -> Self {
        Self::monomial(symbol, c, 0)
    }

    pub fn monomial(symbol: Symbol, c: impl Into<BigInt>, e: i64) -> Self {
        let c = c.into();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        LaurentPoly { symbol, terms }
    }

    /// From `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms(symbol: Symbol, terms: &[(i64, i64)]) -> Self {
        let mut p = LaurentPoly::zero(symbol);
        for &(e, c) in terms {
            p.add_term(e, &BigInt::from(c));
        }
        p
    }

    pub fn symbol(&self) -> Symbol {
        self.symbol
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn is_constant(&self) -> bool {
        self.terms.keys().all(|&e| e == 0)
    }

    pub fn coeff(&self, e: i64) -> BigInt {
        self.terms.get(&e).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (i64, &BigInt)> + '_ {
        self.terms.iter().map(|(&e, c)| (e, c))
    }

    pub fn min_exponent(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_exponent(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    fn add_term(&mut self, e: i64, c: &BigInt) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(BigInt::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    fn unify(&self, other: &LaurentPoly) -> Result<Symbol> {
        if self.symbol == other.symbol || other.is_constant() {
            Ok(self.symbol)
        } else if self.is_constant() {
            Ok(other.symbol)
        } else {
            Err(Error::InvalidArgument(format!(
                "cannot combine polynomials in {} and {}",
                self.symbol, other.symbol
            )))
        }
    }

    pub fn add(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        let mut out = self.clone();
        out.symbol = self.unify(other)?;
        for (&e, c) in &other.terms {
            out.add_term(e, c);
        }
        Ok(out)
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            symbol: self.symbol,
            terms: self.terms.iter().map(|(&e, c)| (e, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigInt) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.symbol);
        for (&e, x) in &self.terms {
            out.add_term(e, &(x * c));
        }
        out
    }

    /// Multiplies by `X^k`.
    pub fn shift(&self, k: i64) -> LaurentPoly {
        LaurentPoly {
            symbol: self.symbol,
            terms: self
                .terms
                .iter()
                .map(|(&e, c)| (e + k, c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        let mut out = LaurentPoly::zero(self.unify(other)?);
        for (&a, x) in &self.terms {
            for (&b, y) in &other.terms {
                out.add_term(a + b, &(x * y));
            }
        }
        Ok(out)
    }

    /// Integer power; negative exponents only for `+-X^j`.
    pub fn pow(&self, e: i64) -> Result<LaurentPoly> {
        if e < 0 {
            let mut it = self.terms.iter();
            return match (it.next(), it.next()) {
                (Some((&j, c)), None) if c.abs().is_one() => {
                    let k = e.unsigned_abs() as usize;
                    Ok(LaurentPoly::monomial(
                        self.symbol,
                        num_traits::pow(c.clone(), k),
                        j * e,
                    ))
                }
                _ => Err(Error::InvalidArgument(format!(
                    "({self})^{e} is not a Laurent polynomial"
                ))),
            };
        }
        let mut acc = LaurentPoly::constant(self.symbol, 1);
        let mut base = self.clone();
        let mut k = e as u64;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Coefficients reduced into `[0, M)`; vanishing terms disappear.
    pub fn reduce_coeffs(&self, modulus: u64) -> Result<LaurentPoly> {
        if modulus == 0 {
            return Err(Error::InvalidModulus(0));
        }
        let m = BigInt::from(modulus);
        let mut out = LaurentPoly::zero(self.symbol);
        for (&e, c) in &self.terms {
            out.add_term(e, &c.mod_floor(&m));
        }
        Ok(out)
    }

    /// Interprets parsed syntax built from integers, `K` or `L`, `P(m,n)`,
    /// `+`, `*` and integer powers.
    pub fn from_ast(ast: &Ast) -> Result<LaurentPoly> {
        let s = Symbol::K;
        match ast {
            Ast::Int(v) => Ok(LaurentPoly::constant(s, v.clone())),
            Ast::K => Ok(LaurentPoly::monomial(Symbol::K, 1, 1)),
            Ast::L => Ok(LaurentPoly::monomial(Symbol::L, 1, 1)),
            Ast::P(m, n) => p_poly(PIndex::new(*m, *n)?),
            Ast::Add(xs) => xs
                .iter()
                .try_fold(LaurentPoly::zero(s), |acc, x| acc.add(&Self::from_ast(x)?)),
            Ast::Mul(xs) => xs.iter().try_fold(LaurentPoly::constant(s, 1), |acc, x| {
                acc.mul(&Self::from_ast(x)?)
            }),
            Ast::Neg(a) => Ok(Self::from_ast(a)?.neg()),
            Ast::Pow(a, e) => Self::from_ast(a)?.pow(*e),
            other => Err(Error::InvalidArgument(format!(
                "{other:?} is not part of a Laurent polynomial in K or L"
            ))),
        }
    }

    pub fn parse(text: &str) -> Result<LaurentPoly> {
        Self::from_ast(&parse(text, &ParseEnv::default())?)
    }

    /// `sum c_e X^e` as an expression over the eta quotient for `X`.
    pub fn to_series_expr(&self) -> SeriesExpr {
        let base = match self.symbol {
            Symbol::K => EtaQuotientSpec::k_param(),
            Symbol::L => EtaQuotientSpec::l_param(),
        };
        let terms: Vec<SeriesExpr> = self
            .terms
            .iter()
            .map(|(&e, c)| {
                SeriesExpr::Mul(vec![
                    SeriesExpr::IntConst(c.clone()),
                    SeriesExpr::EtaQ(base.pow(e)),
                ])
            })
            .collect();
        SeriesExpr::Add(terms).simplify()
    }
}

impl fmt::Display for LaurentPoly {
    /// Descending exponents: `36*K^3 + 929*K^2 + 1986*K - 5711 - 38484*K^-1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&e, c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            }
            let x = self.symbol;
            match (e, mag.is_one()) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "{x}")?,
                (1, false) => write!(f, "{mag}*{x}")?,
                (_, true) => write!(f, "{x}^{e}")?,
                (_, false) => write!(f, "{mag}*{x}^{e}")?,
            }
        }
        Ok(())
    }
}

/// Index of `P(m, n)`: `m >= 0`, any integer `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PIndex {
    m: i64,
    n: i64,
}

impl PIndex {
    pub fn new(m: i64, n: i64) -> Result<Self> {
        if m < 0 {
            return Err(Error::InvalidArgument(format!("P({m},{n}) needs m >= 0")));
        }
        Ok(PIndex { m, n })
    }

    pub fn m(self) -> i64 {
        self.m
    }

    pub fn n(self) -> i64 {
        self.n
    }
}

type PTable = HashMap<(i64, i64), LaurentPoly>;

fn table() -> &'static Mutex<PTable> {
    static TABLE: OnceLock<Mutex<PTable>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn four_over_k() -> LaurentPoly {
    LaurentPoly::monomial(Symbol::K, 4, -1)
}

/// Inserts a value, asserting agreement if the index was already reached
/// another way.
fn memo_insert(t: &mut PTable, key: (i64, i64), value: LaurentPoly) -> LaurentPoly {
    if let Some(prev) = t.get(&key) {
        assert_eq!(
            prev, &value,
            "P{key:?} reached two ways with different values"
        );
        return value;
    }
    t.insert(key, value.clone());
    value
}

fn base_row(t: &mut PTable, m: i64, n: i64) -> LaurentPoly {
    let k = || LaurentPoly::monomial(Symbol::K, 1, 1);
    let (lo, lo_val, hi_val) = if m == 0 {
        (0, LaurentPoly::constant(Symbol::K, 2), four_over_k())
    } else {
        let p1m1 = four_over_k()
            .add(&LaurentPoly::constant(Symbol::K, -2))
            .and_then(|p| p.add(&k()))
            .expect("same symbol");
        (-1, p1m1, k())
    };
    memo_insert(t, (m, lo), lo_val.clone());
    memo_insert(t, (m, lo + 1), hi_val.clone());
    if let Some(v) = t.get(&(m, n)) {
        return v.clone();
    }
    if n > lo + 1 {
        let (mut a, mut b) = (lo_val, hi_val);
        for j in lo + 2..=n {
            let c = four_over_k()
                .mul(&b)
                .and_then(|x| x.add(&a))
                .expect("same symbol");
            let c = memo_insert(t, (m, j), c);
            a = b;
            b = c;
        }
        b
    } else {
        let (mut a, mut b) = (lo_val, hi_val);
        for j in (n..lo).rev() {
            // P(m, j) = P(m, j+2) - 4/K P(m, j+1)
            let c = b
                .sub(&four_over_k().mul(&a).expect("same symbol"))
                .expect("same symbol");
            let c = memo_insert(t, (m, j), c);
            b = a;
            a = c;
        }
        a
    }
}

fn compute(t: &mut PTable, m: i64, n: i64) -> LaurentPoly {
    if let Some(v) = t.get(&(m, n)) {
        return v.clone();
    }
    if m <= 1 {
        return base_row(t, m, n);
    }
    let mut prev = compute(t, 0, n);
    let mut cur = compute(t, 1, n);
    for j in 2..=m {
        let next = match t.get(&(j, n)) {
            Some(v) => v.clone(),
            None => {
                let v = LaurentPoly::monomial(Symbol::K, 1, 1)
                    .mul(&cur)
                    .and_then(|x| x.add(&prev))
                    .expect("same symbol");
                memo_insert(t, (j, n), v)
            }
        };
        prev = cur;
        cur = next;
    }
    cur
}

/// `P(m, n)` as a Laurent polynomial in `K`.
pub fn p_poly(idx: PIndex) -> Result<LaurentPoly> {
    let mut t = table().lock().expect("P table poisoned");
    Ok(compute(&mut t, idx.m, idx.n))
}

/// Re-checks both recurrences on every memoized index where all participants
/// are present; returns how many relations were checked.
pub fn check_recurrences() -> Result<usize> {
    let t = table().lock().expect("P table poisoned");
    let k = LaurentPoly::monomial(Symbol::K, 1, 1);
    let mut checked = 0;
    for &(m, n) in t.keys() {
        if let (Some(a), Some(b), Some(c)) =
            (t.get(&(m, n - 1)), t.get(&(m, n)), t.get(&(m, n + 1)))
        {
            if &four_over_k().mul(b)?.add(a)? != c {
                return Err(Error::InvalidArgument(format!(
                    "P({m},{}) breaks the n-recurrence",
                    n + 1
                )));
            }
            checked += 1;
        }
        if let (Some(a), Some(b), Some(c)) =
            (t.get(&(m, n)), t.get(&(m + 1, n)), t.get(&(m + 2, n)))
        {
            if &k.mul(b)?.add(a)? != c {
                return Err(Error::InvalidArgument(format!(
                    "P({},{n}) breaks the m-recurrence",
                    m + 2
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// The defining two-term expression of `P(m, n)` in `q`, `R(q)`, `R(q^2)`.
pub fn p_series_expr(m: i64, n: i64) -> Result<SeriesExpr> {
    let idx = PIndex::new(m, n)?;
    let a = idx.m + 2 * idx.n;
    let b = 2 * idx.m - idx.n;
    let sign = if (idx.m + idx.n).rem_euclid(2) == 0 {
        1
    } else {
        -1
    };
    let r1 = || SeriesExpr::R(1);
    let r2 = || SeriesExpr::R(2);
    Ok(SeriesExpr::Add(vec![
        SeriesExpr::Mul(vec![SeriesExpr::QPow(-idx.m), r1().pow(-a), r2().pow(-b)]),
        SeriesExpr::Mul(vec![
            SeriesExpr::int(sign),
            SeriesExpr::QPow(idx.m),
            r1().pow(a),
            r2().pow(b),
        ]),
    ])
    .simplify())
}

/// `P(m, n)` from its definition as a q-series, known below `q^n_terms`.
pub fn p_series(idx: PIndex, n_terms: i64, ring: CoeffRing) -> Result<Series> {
    eval_expr(&p_series_expr(idx.m, idx.n)?, n_terms, ring)
}

/// Substitutes the q-series of `K` (or `L`) into `p`.
pub fn eval_at_k(p: &LaurentPoly, n_terms: i64, ring: CoeffRing) -> Result<Series> {
    eval_expr(&p.to_series_expr(), n_terms, ring)
}

/// `p(K)` rewritten as `K^{-pole_order} * numerator(L)` with `K = L + 4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearedPoly {
    pub numerator: LaurentPoly,
    pub pole_order: u32,
}

impl fmt::Display for ClearedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pole_order == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "K^-{}*({})", self.pole_order, self.numerator)
        }
    }
}

/// Clears the pole of `p` at `K = 0` and expands the remaining polynomial in
/// `L = K - 4`, keeping every coefficient integral.
pub fn substitute_k_equals_l_plus_4(p: &LaurentPoly) -> Result<ClearedPoly> {
    if p.symbol != Symbol::K && !p.is_constant() {
        return Err(Error::InvalidArgument("expected a polynomial in K".into()));
    }
    let pole = p.min_exponent().map_or(0, |e| (-e).max(0));
    let l_plus_4 = LaurentPoly::from_terms(Symbol::L, &[(1, 1), (0, 4)]);
    let mut numerator = LaurentPoly::zero(Symbol::L);
    for (e, c) in p.terms() {
        let term = l_plus_4.pow(e + pole)?.scale(c);
        numerator = numerator.add(&term)?;
    }
    Ok(ClearedPoly {
        numerator,
        pole_order: pole as u32,
    })
}

#[derive(Debug, Deserialize)]
struct ComboFile {
    combo: BTreeMap<String, ComboEntry>,
}

/// Expected congruence `value ≡ expected (mod modulus)`.
#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
pub struct Reduction {
    pub modulus: u64,
    pub expected: String,
}

/// One `[combo.<name>]` table of `combos.toml`.
#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
pub struct ComboEntry {
    pub definition: String,
    pub closed_form: Option<String>,
    pub l_numerator: Option<String>,
    pub pole_order: Option<u32>,
    pub reduction: Option<Reduction>,
    pub l_reduction: Option<Reduction>,
    pub displayed: Option<String>,
}

/// Outcome of checking one combo against its catalog expectations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComboCheck {
    pub name: String,
    pub value: LaurentPoly,
    pub closed_form: Option<bool>,
    pub l_form: Option<bool>,
    pub reduction: Option<bool>,
    pub l_reduction: Option<bool>,
    /// `Some(true)` when the alternative display differs from the value.
    pub displayed_differs: Option<bool>,
}

impl ComboCheck {
    pub fn passed(&self) -> bool {
        [
            self.closed_form,
            self.l_form,
            self.reduction,
            self.l_reduction,
            self.displayed_differs,
        ]
        .iter()
        .all(|c| c.unwrap_or(true))
    }
}

impl ComboEntry {
    pub fn value(&self) -> Result<LaurentPoly> {
        LaurentPoly::parse(&self.definition)
    }

    pub fn check(&self, name: &str) -> Result<ComboCheck> {
        let value = self.value()?;
        let same =
            |text: &str, v: &LaurentPoly| -> Result<bool> { Ok(&LaurentPoly::parse(text)? == v) };
        let closed_form = self
            .closed_form
            .as_deref()
            .map(|t| same(t, &value))
            .transpose()?;
        let needs_l = self.l_numerator.is_some() || self.l_reduction.is_some();
        let cleared = if needs_l {
            Some(substitute_k_equals_l_plus_4(&value)?)
        } else {
            None
        };
        let l_form = match (&self.l_numerator, &cleared) {
            (Some(t), Some(c)) => {
                Some(same(t, &c.numerator)? && self.pole_order.is_none_or(|j| j == c.pole_order))
            }
            _ => None,
        };
        let congruent = |red: &Reduction, v: &LaurentPoly| -> Result<bool> {
            let expected = LaurentPoly::parse(&red.expected)?;
            Ok(v.reduce_coeffs(red.modulus)? == expected.reduce_coeffs(red.modulus)?)
        };
        let reduction = self
            .reduction
            .as_ref()
            .map(|r| congruent(r, &value))
            .transpose()?;
        let l_reduction = match (&self.l_reduction, &cleared) {
            (Some(r), Some(c)) => Some(congruent(r, &c.numerator)?),
            _ => None,
        };
        let displayed_differs = self
            .displayed
            .as_deref()
            .map(|t| same(t, &value).map(|eq| !eq))
            .transpose()?;
        Ok(ComboCheck {
            name: name.to_string(),
            value,
            closed_form,
            l_form,
            reduction,
            l_reduction,
            displayed_differs,
        })
    }
}

/// The combos shipped in `combos.toml`.
pub fn builtin_combos() -> &'static BTreeMap<String, ComboEntry> {
    static DEFS: OnceLock<BTreeMap<String, ComboEntry>> = OnceLock::new();
    DEFS.get_or_init(|| {
        parse_combo_file(include_str!("../catalog/combos.toml"))
            .expect("built-in combos.toml is valid")
    })
}

pub fn parse_combo_file(text: &str) -> Result<BTreeMap<String, ComboEntry>> {
    let file: ComboFile = toml::from_str(text).map_err(|e| Error::Catalog(e.to_string()))?;
    Ok(file.combo)
}

/// The named integer combination of `P(m,n)` values.
pub fn combo(name: &str) -> Result<LaurentPoly> {
    builtin_combos()
        .get(name)
        .ok_or_else(|| Error::Unknown {
            kind: "combo",
            name: name.to_string(),
        })?
        .value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(terms: &[(i64, i64)]) -> LaurentPoly {
        LaurentPoly::from_terms(Symbol::K, terms)
    }

    fn p(m: i64, n: i64) -> LaurentPoly {
        p_poly(PIndex::new(m, n).unwrap()).unwrap()
    }

    #[test]
    fn initial_values() {
        assert_eq!(p(0, 0), k(&[(0, 2)]));
        assert_eq!(p(0, 1), k(&[(-1, 4)]));
        assert_eq!(p(1, 0), k(&[(1, 1)]));
        assert_eq!(p(1, -1), k(&[(-1, 4), (0, -2), (1, 1)]));
    }

    #[test]
    fn first_derived_values() {
        assert_eq!(p(1, 1), k(&[(-1, 4), (0, 2), (1, 1)]));
        // P(2,0) = K P(1,0) + P(0,0)
        assert_eq!(p(2, 0), k(&[(2, 1), (0, 2)]));
        // P(0,-1) = P(0,1) - 4/K P(0,0)
        assert_eq!(p(0, -1), k(&[(-1, -4)]));
    }

    #[test]
    fn negative_m_is_rejected() {
        assert!(PIndex::new(-1, 0).is_err());
    }

    #[test]
    fn memo_table_satisfies_both_recurrences() {
        for m in 0..=5 {
            for n in -6..=6 {
                p(m, n);
            }
        }
        assert!(check_recurrences().unwrap() > 100);
    }

    #[test]
    fn exponent_envelope() {
        for m in 0..=5i64 {
            for n in -6..=6i64 {
                let v = p(m, n);
                let bound = m + 2 * n.abs();
                assert!(v.min_exponent().unwrap() >= -bound, "P({m},{n}) = {v}");
                assert!(v.max_exponent().unwrap() <= bound, "P({m},{n}) = {v}");
            }
        }
    }

    #[test]
    fn pow_and_display() {
        let x = k(&[(0, 1), (1, 1)]).pow(2).unwrap();
        assert_eq!(x, k(&[(0, 1), (1, 2), (2, 1)]));
        assert_eq!(k(&[(2, 1)]).pow(-2).unwrap(), k(&[(-4, 1)]));
        assert!(k(&[(0, 1), (1, 1)]).pow(-1).is_err());
        assert_eq!(
            k(&[(-1, -32), (0, -9), (1, -2)]).to_string(),
            "-2*K - 9 - 32*K^-1"
        );
        assert_eq!(LaurentPoly::zero(Symbol::L).to_string(), "0");
    }

    #[test]
    fn reduce_coeffs_drops_multiples() {
        let x = k(&[(-1, -32), (0, -9), (1, -2)]);
        assert_eq!(x.reduce_coeffs(5).unwrap(), k(&[(-1, 3), (0, 1), (1, 3)]));
        assert!(LaurentPoly::zero(Symbol::K)
            .reduce_coeffs(7)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn k_to_l_substitution() {
        let c = substitute_k_equals_l_plus_4(&k(&[(1, 1)])).unwrap();
        assert_eq!(c.pole_order, 0);
        assert_eq!(
            c.numerator,
            LaurentPoly::from_terms(Symbol::L, &[(1, 1), (0, 4)])
        );
        let c = substitute_k_equals_l_plus_4(&k(&[(-2, 3), (0, 1)])).unwrap();
        assert_eq!(c.pole_order, 2);
        // 3 + (L+4)^2
        assert_eq!(
            c.numerator,
            LaurentPoly::from_terms(Symbol::L, &[(2, 1), (1, 8), (0, 19)])
        );
    }

    #[test]
    fn symbols_do_not_mix() {
        assert!(LaurentPoly::parse("K + L").is_err());
        assert_eq!(LaurentPoly::parse("2 + L").unwrap().symbol(), Symbol::L);
        assert!(LaurentPoly::parse("f1").is_err());
    }

    #[test]
    fn small_combos() {
        assert_eq!(combo("B").unwrap(), k(&[(-1, -32), (0, -9), (1, -2)]));
        assert_eq!(combo("C").unwrap(), k(&[(-1, 8), (0, -9), (1, 8)]));
        assert!(matches!(combo("Z"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn every_combo_matches_its_closed_forms() {
        for (name, entry) in builtin_combos() {
            let c = entry.check(name).unwrap();
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn printed_f_is_not_the_closed_form() {
        let f = &builtin_combos()["F"];
        let printed = LaurentPoly::parse(f.displayed.as_deref().unwrap()).unwrap();
        assert_ne!(printed, f.value().unwrap());
        assert_eq!(printed.min_exponent(), Some(0));
    }

    #[test]
    fn p_series_trivial_case() {
        let s = p_series(PIndex::new(0, 0).unwrap(), 40, CoeffRing::Exact).unwrap();
        assert_eq!(
            s,
            Series::from_i64(CoeffRing::Exact, 0, &[2], s.precision())
        );
    }
}
