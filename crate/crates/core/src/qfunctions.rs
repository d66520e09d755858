//! Named q-series (`f_m`, eta quotients, `R(q)`, `K`, `L`), dissection
//! extraction, and evaluation of expression trees with precision budgets.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Ast;
use crate::klaurent;
use crate::series::{CoeffRing, Series};

/// Probe depth used to discover the valuation of a subexpression that is
/// about to be inverted when it cannot be read off structurally.
const VALUATION_PROBE: i64 = 64;

/// `q^s * prod f_m^{e_m}` with distinct scales `m >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EtaQuotientSpec {
    qshift: i64,
    factors: BTreeMap<u64, i64>,
}

impl EtaQuotientSpec {
    /// Repeated scales are merged and zero exponents dropped.
    pub fn new(qshift: i64, factors: &[(u64, i64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(m, e) in factors {
            if m == 0 {
                return Err(Error::InvalidArgument(
                    "eta factor scale must be >= 1".into(),
                ));
            }
            *map.entry(m).or_insert(0) += e;
        }
        map.retain(|_, e| *e != 0);
        Ok(EtaQuotientSpec {
            qshift,
            factors: map,
        })
    }

    pub fn one() -> Self {
        EtaQuotientSpec {
            qshift: 0,
            factors: BTreeMap::new(),
        }
    }

    pub fn eta(m: u64) -> Self {
        EtaQuotientSpec::new(0, &[(m, 1)]).expect("scale >= 1")
    }

    /// `K = f_2 f_5^5 / (q f_1 f_10^5)`.
    pub fn k_param() -> Self {
        EtaQuotientSpec::new(-1, &[(1, -1), (2, 1), (5, 5), (10, -5)]).unwrap()
    }

    /// `L = f_1^3 f_5 / (q f_2 f_10^3)`.
    pub fn l_param() -> Self {
        EtaQuotientSpec::new(-1, &[(1, 3), (2, -1), (5, 1), (10, -3)]).unwrap()
    }

    /// Generating function `f_2^k / f_1^{3k+1}` of `d_k(n)`.
    pub fn dk(k: u64) -> Self {
        let k = k as i64;
        EtaQuotientSpec::new(0, &[(1, -(3 * k + 1)), (2, k)]).unwrap()
    }

    pub fn qshift(&self) -> i64 {
        self.qshift
    }

    pub fn factors(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.factors.iter().map(|(&m, &e)| (m, e))
    }

    pub fn mul(&self, other: &EtaQuotientSpec) -> EtaQuotientSpec {
        let mut out = self.clone();
        out.qshift += other.qshift;
        for (&m, &e) in &other.factors {
            *out.factors.entry(m).or_insert(0) += e;
        }
        out.factors.retain(|_, e| *e != 0);
        out
    }

    pub fn pow(&self, e: i64) -> EtaQuotientSpec {
        if e == 0 {
            return EtaQuotientSpec::one();
        }
        EtaQuotientSpec {
            qshift: self.qshift * e,
            factors: self.factors.iter().map(|(&m, &x)| (m, x * e)).collect(),
        }
    }

    pub fn shifted(&self, s: i64) -> EtaQuotientSpec {
        let mut out = self.clone();
        out.qshift += s;
        out
    }
}

/// Smallest prime `p` with `modulus = p^a`, together with `a`.
pub fn prime_power(modulus: u64) -> Option<(u64, u32)> {
    if modulus < 2 {
        return None;
    }
    let p = (2..=modulus)
        .take_while(|d| d * d <= modulus)
        .find(|d| modulus.is_multiple_of(*d))
        .unwrap_or(modulus);
    let mut rest = modulus;
    let mut a = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        a += 1;
    }
    (rest == 1).then_some((p, a))
}

/// Rewrites `spec` with `f_m^{p^a} == f_{pm}^{p^{a-1}} (mod p^a)` until every
/// exponent is below `p^a` in absolute value. The result is congruent to
/// `spec` modulo `modulus`; `None` when `modulus` is not a prime power.
pub fn reduce_spec_mod_prime_power(
    spec: &EtaQuotientSpec,
    modulus: u64,
) -> Option<EtaQuotientSpec> {
    let (p, _) = prime_power(modulus)?;
    let pa = modulus as i64;
    let pa1 = pa / p as i64;
    let mut factors = spec.factors.clone();
    while let Some((&m, &e)) = factors.iter().find(|(_, e)| e.abs() >= pa) {
        let t = e / pa;
        factors.insert(m, e - t * pa);
        *factors.entry(m * p).or_insert(0) += t * pa1;
    }
    factors.retain(|_, e| *e != 0);
    Some(EtaQuotientSpec {
        qshift: spec.qshift,
        factors,
    })
}

/// Generalized pentagonal numbers `k(3k-1)/2` below `n` with sign `(-1)^k`.
pub fn pentagonal_terms(n: i64) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 1)];
    let mut k: i64 = 1;
    loop {
        let a = k * (3 * k - 1) / 2;
        if a >= n {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        out.push((a, sign));
        let b = k * (3 * k + 1) / 2;
        if b < n {
            out.push((b, sign));
        }
        k += 1;
    }
    out.sort_unstable();
    out
}

fn f1_pentagonal(n: i64, ring: CoeffRing) -> Series {
    let n = n.max(0);
    let mut c = vec![0i64; n as usize];
    for (e, s) in pentagonal_terms(n) {
        c[e as usize] = s;
    }
    Series::from_i64(ring, 0, &c, n)
}

/// `f_m = prod_{n>=1} (1 - q^{mn})`, built from the pentagonal number theorem
/// and `q -> q^m`. Known at least below `q^n`.
pub fn eta_series(m: u64, n: i64, ring: CoeffRing) -> Result<Series> {
    if m == 0 {
        return Err(Error::InvalidArgument("eta scale must be >= 1".into()));
    }
    let mi = m as i64;
    let base = f1_pentagonal((n + mi - 1).div_euclid(mi), ring);
    base.substitute_power(m)
}

/// Expansion of an eta quotient, known at least below `q^n`.
pub fn eta_quotient(spec: &EtaQuotientSpec, n: i64, ring: CoeffRing) -> Result<Series> {
    Evaluator::new(ring).eta_quotient(spec, n)
}

/// `R(q) = prod (1-q^{5n-1})(1-q^{5n-4}) / ((1-q^{5n-2})(1-q^{5n-3}))` below
/// `q^n`.
pub fn rogers_ramanujan(n: i64, ring: CoeffRing) -> Result<Series> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "rogers_ramanujan needs N >= 1".into(),
        ));
    }
    let mut num = Series::one(ring, n);
    let mut den = Series::one(ring, n);
    for e in 1..n {
        match e % 5 {
            1 | 4 => num = num.mul_one_minus_q_pow(e as usize),
            2 | 3 => den = den.mul_one_minus_q_pow(e as usize),
            _ => {}
        }
    }
    num.mul(&den.invert()?)
}

pub fn param_k(n: i64, ring: CoeffRing) -> Result<Series> {
    eta_quotient(&EtaQuotientSpec::k_param(), n, ring)
}

pub fn param_l(n: i64, ring: CoeffRing) -> Result<Series> {
    eta_quotient(&EtaQuotientSpec::l_param(), n, ring)
}

/// `sum_{n = r (mod m)} a(n) q^{(n-r)/m}`; see [`Series::extract`].
pub fn extract(f: &Series, m: u64, r: i64) -> Result<Series> {
    f.extract(m, r)
}

/// Expression tree over q-series atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeriesExpr {
    EtaQ(EtaQuotientSpec),
    /// `R(q^m)`
    R(u64),
    QPow(i64),
    IntConst(BigInt),
    Add(Vec<SeriesExpr>),
    Mul(Vec<SeriesExpr>),
    Pow(Box<SeriesExpr>, i64),
    /// `(m, r)` dissection component, `0 <= r < m`.
    Extract(Box<SeriesExpr>, u64, i64),
}

impl SeriesExpr {
    pub fn int(c: i64) -> SeriesExpr {
        SeriesExpr::IntConst(BigInt::from(c))
    }

    pub fn extract(inner: SeriesExpr, m: u64, r: i64) -> SeriesExpr {
        SeriesExpr::Extract(Box::new(inner), m, r.rem_euclid(m as i64))
    }

    pub fn pow(self, e: i64) -> SeriesExpr {
        SeriesExpr::Pow(Box::new(self), e)
    }

    /// Lowers parsed syntax; `K`, `L` become eta quotients and `P(m,n)` its
    /// defining two-term expression in `R(q)`, `R(q^2)`.
    pub fn from_ast(ast: &Ast) -> Result<SeriesExpr> {
        Ok(Self::lower(ast)?.simplify())
    }

    fn lower(ast: &Ast) -> Result<SeriesExpr> {
        Ok(match ast {
            Ast::Int(v) => SeriesExpr::IntConst(v.clone()),
            Ast::Q => SeriesExpr::QPow(1),
            Ast::Eta(m) => SeriesExpr::EtaQ(EtaQuotientSpec::eta(*m)),
            Ast::Rr(m) => SeriesExpr::R(*m),
            Ast::K => SeriesExpr::EtaQ(EtaQuotientSpec::k_param()),
            Ast::L => SeriesExpr::EtaQ(EtaQuotientSpec::l_param()),
            Ast::P(m, n) => klaurent::p_series_expr(*m, *n)?,
            Ast::Extract(a, m, r) => SeriesExpr::extract(Self::lower(a)?, *m, *r),
            Ast::Add(xs) => SeriesExpr::Add(xs.iter().map(Self::lower).collect::<Result<_>>()?),
            Ast::Mul(xs) => SeriesExpr::Mul(xs.iter().map(Self::lower).collect::<Result<_>>()?),
            Ast::Neg(a) => -Self::lower(a)?,
            Ast::Pow(a, e) => Self::lower(a)?.pow(*e),
        })
    }

    /// Folds products of eta quotients, q-powers and constants into a single
    /// atom and flattens nested sums/products.
    pub fn simplify(self) -> SeriesExpr {
        match self {
            SeriesExpr::Pow(b, e) => match b.simplify() {
                SeriesExpr::EtaQ(s) => SeriesExpr::EtaQ(s.pow(e)),
                SeriesExpr::QPow(k) => SeriesExpr::QPow(k * e),
                SeriesExpr::IntConst(c) if e >= 0 => {
                    SeriesExpr::IntConst(num_traits::pow(c, e as usize))
                }
                other if e == 1 => other,
                other => SeriesExpr::Pow(Box::new(other), e),
            },
            SeriesExpr::Add(xs) => {
                let mut flat = Vec::new();
                for x in xs {
                    match x.simplify() {
                        SeriesExpr::Add(inner) => flat.extend(inner),
                        SeriesExpr::IntConst(c) if c.is_zero() => {}
                        other => flat.push(other),
                    }
                }
                match flat.len() {
                    0 => SeriesExpr::IntConst(BigInt::zero()),
                    1 => flat.pop().unwrap(),
                    _ => SeriesExpr::Add(flat),
                }
            }
            SeriesExpr::Mul(xs) => {
                let mut constant = BigInt::one();
                let mut eta = EtaQuotientSpec::one();
                let mut rest = Vec::new();
                let mut stack: Vec<SeriesExpr> = xs.into_iter().map(|x| x.simplify()).collect();
                while let Some(x) = stack.pop() {
                    match x {
                        SeriesExpr::Mul(inner) => stack.extend(inner),
                        SeriesExpr::IntConst(c) => constant *= c,
                        SeriesExpr::QPow(k) => eta = eta.shifted(k),
                        SeriesExpr::EtaQ(s) => eta = eta.mul(&s),
                        other => rest.push(other),
                    }
                }
                if constant.is_zero() {
                    return SeriesExpr::IntConst(constant);
                }
                rest.reverse();
                let mut out = Vec::new();
                if !constant.is_one() {
                    out.push(SeriesExpr::IntConst(constant));
                }
                if eta != EtaQuotientSpec::one() {
                    if eta.factors.is_empty() {
                        out.push(SeriesExpr::QPow(eta.qshift));
                    } else {
                        out.push(SeriesExpr::EtaQ(eta));
                    }
                }
                out.extend(rest);
                match out.len() {
                    0 => SeriesExpr::IntConst(BigInt::one()),
                    1 => out.pop().unwrap(),
                    _ => SeriesExpr::Mul(out),
                }
            }
            SeriesExpr::Extract(a, m, r) => SeriesExpr::Extract(Box::new(a.simplify()), m, r),
            atom => atom,
        }
    }

    /// Valuation when it follows from structure alone.
    fn exact_valuation(&self) -> Option<i64> {
        match self {
            SeriesExpr::EtaQ(s) => Some(s.qshift),
            SeriesExpr::R(_) => Some(0),
            SeriesExpr::QPow(k) => Some(*k),
            SeriesExpr::IntConst(c) if !c.is_zero() => Some(0),
            SeriesExpr::Mul(xs) => xs.iter().map(|x| x.exact_valuation()).sum(),
            SeriesExpr::Pow(b, e) => b.exact_valuation().map(|v| v * e),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CacheKey {
    F1,
    R1,
}

impl std::ops::Neg for SeriesExpr {
    type Output = SeriesExpr;

    fn neg(self) -> SeriesExpr {
        SeriesExpr::Mul(vec![SeriesExpr::int(-1), self])
    }
}

/// Evaluates expressions over one coefficient ring, caching the base
/// expansions of `f_1` and `R(q)` at the largest precision seen so far.
pub struct Evaluator {
    ring: CoeffRing,
    cache: RefCell<HashMap<CacheKey, Series>>,
    prime_power_reduction: bool,
}

impl Evaluator {
    pub fn new(ring: CoeffRing) -> Self {
        Evaluator {
            ring,
            cache: RefCell::new(HashMap::new()),
            prime_power_reduction: false,
        }
    }

    /// Over `Z/p^a`, shrink eta-quotient exponents with
    /// [`reduce_spec_mod_prime_power`] before expanding. Off by default so that
    /// identity checks compare independently computed sides.
    pub fn with_prime_power_reduction(mut self) -> Self {
        self.prime_power_reduction = true;
        self
    }

    pub fn ring(&self) -> CoeffRing {
        self.ring
    }

    fn cached(&self, key: CacheKey, n: i64) -> Result<Series> {
        let n = n.max(1);
        if let Some(s) = self.cache.borrow().get(&key) {
            if s.precision() >= n {
                return Ok(s.truncate(n));
            }
        }
        // grow geometrically so repeated slightly-larger requests stay cheap
        let have = self.cache.borrow().get(&key).map_or(0, |s| s.precision());
        let target = n.max(have + have / 2);
        let s = match key {
            CacheKey::F1 => f1_pentagonal(target, self.ring),
            CacheKey::R1 => rogers_ramanujan(target, self.ring)?,
        };
        self.cache.borrow_mut().insert(key, s.clone());
        Ok(s.truncate(n))
    }

    fn eta(&self, m: u64, n: i64) -> Result<Series> {
        let mi = m as i64;
        self.cached(CacheKey::F1, (n + mi - 1).div_euclid(mi))?
            .substitute_power(m)
    }

    fn r(&self, m: u64, n: i64) -> Result<Series> {
        let mi = m as i64;
        self.cached(CacheKey::R1, (n + mi - 1).div_euclid(mi))?
            .substitute_power(m)
    }

    pub fn eta_quotient(&self, spec: &EtaQuotientSpec, n: i64) -> Result<Series> {
        let reduced = match self.ring.modulus() {
            Some(m) if self.prime_power_reduction => reduce_spec_mod_prime_power(spec, m),
            _ => None,
        };
        let spec = reduced.as_ref().unwrap_or(spec);
        let rel = n - spec.qshift;
        if rel <= 0 {
            return Ok(Series::zero(self.ring, n));
        }
        let mut acc = Series::one(self.ring, rel);
        for (m, e) in spec.factors() {
            let f = self.eta(m, rel)?.truncate(rel);
            acc = acc.mul(&f.pow(e)?)?;
        }
        Ok(acc.shift(spec.qshift))
    }

    /// Lower bound for the valuation of `e`.
    pub fn valuation_floor(&self, e: &SeriesExpr) -> Result<i64> {
        if let Some(v) = e.exact_valuation() {
            return Ok(v);
        }
        Ok(match e {
            SeriesExpr::IntConst(_) => 0,
            SeriesExpr::Add(xs) => {
                let mut lo = i64::MAX;
                for x in xs {
                    lo = lo.min(self.valuation_floor(x)?);
                }
                lo
            }
            SeriesExpr::Mul(xs) => {
                let mut s = 0;
                for x in xs {
                    s += self.valuation_floor(x)?;
                }
                s
            }
            SeriesExpr::Pow(b, k) if *k >= 0 => k * self.valuation_floor(b)?,
            SeriesExpr::Pow(b, k) => k * self.probe_valuation(b)?,
            SeriesExpr::Extract(a, m, r) => {
                let v = self.valuation_floor(a)?;
                (v - r + *m as i64 - 1).div_euclid(*m as i64)
            }
            _ => unreachable!("atoms have exact valuations"),
        })
    }

    fn probe_valuation(&self, e: &SeriesExpr) -> Result<i64> {
        if let Some(v) = e.exact_valuation() {
            return Ok(v);
        }
        let lo = self.valuation_floor(e)?;
        let s = self.eval(e, lo + VALUATION_PROBE)?;
        if s.is_zero() {
            return Err(Error::NonUnitLeading {
                coeff: "0".into(),
                ring: self.ring,
            });
        }
        Ok(s.valuation())
    }

    /// Evaluates `e` so that every coefficient below `q^n` is certified. The
    /// budget is pushed down the tree: products widen each factor by the
    /// other factors' valuations, powers by `(e-1)v`, inverses by `(|e|+1)v`,
    /// and an `(m, r)` extraction asks its argument for `m(n-1)+r+1` terms.
    pub fn eval(&self, e: &SeriesExpr, n: i64) -> Result<Series> {
        let s = match e {
            SeriesExpr::EtaQ(spec) => self.eta_quotient(spec, n)?,
            SeriesExpr::R(m) => self.r(*m, n)?,
            SeriesExpr::QPow(k) => Series::monomial(self.ring, &BigInt::one(), *k, n),
            SeriesExpr::IntConst(c) => Series::monomial(self.ring, c, 0, n),
            SeriesExpr::Add(xs) => {
                let mut acc = Series::zero(self.ring, n);
                for x in xs {
                    acc = acc.add(&self.eval(x, n)?)?;
                }
                acc
            }
            SeriesExpr::Mul(xs) => {
                let floors: Vec<i64> = xs
                    .iter()
                    .map(|x| self.valuation_floor(x))
                    .collect::<Result<_>>()?;
                let total: i64 = floors.iter().sum();
                let mut acc: Option<Series> = None;
                for (x, v) in xs.iter().zip(&floors) {
                    let f = self.eval(x, n - (total - v))?;
                    acc = Some(match acc {
                        None => f,
                        Some(a) => a.mul(&f)?,
                    });
                }
                acc.unwrap_or_else(|| Series::one(self.ring, n))
            }
            SeriesExpr::Pow(_, 0) => Series::one(self.ring, n),
            SeriesExpr::Pow(b, k) if *k > 0 => {
                let v = self.valuation_floor(b)?;
                self.eval(b, n - (k - 1) * v)?.pow(*k)?
            }
            SeriesExpr::Pow(b, k) => {
                let widen = k.unsigned_abs() as i64 + 1;
                let mut v = self.probe_valuation(b)?;
                loop {
                    let s = self.eval(b, n + widen * v)?;
                    if s.is_zero() {
                        return Err(Error::NonUnitLeading {
                            coeff: "0".into(),
                            ring: self.ring,
                        });
                    }
                    if s.precision() - widen * s.valuation() >= n {
                        break s.pow(*k)?;
                    }
                    v = s.valuation();
                }
            }
            SeriesExpr::Extract(a, m, r) => {
                let mi = *m as i64;
                self.eval(a, mi * (n - 1) + r + 1)?.extract(*m, *r)?
            }
        };
        debug_assert!(s.precision() >= n, "budget rule under-delivered for {e:?}");
        Ok(s)
    }
}

pub fn eval_expr(e: &SeriesExpr, n: i64, ring: CoeffRing) -> Result<Series> {
    Evaluator::new(ring).eval(e, n)
}

/// Outcome of comparing two expressions to a fixed precision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub passed: bool,
    pub precision: i64,
    pub modulus: Option<u64>,
    pub first_mismatch: Option<i64>,
}

/// Evaluates both sides (in `Z/modulus` when given) and compares every
/// coefficient below `q^n`.
pub fn check_identity(
    lhs: &SeriesExpr,
    rhs: &SeriesExpr,
    modulus: Option<u64>,
    n: i64,
) -> Result<VerificationVerdict> {
    let ring = match modulus {
        Some(m) => CoeffRing::modular(m)?,
        None => CoeffRing::Exact,
    };
    check_identity_with(&Evaluator::new(ring), lhs, rhs, n)
}

pub fn check_identity_with(
    ev: &Evaluator,
    lhs: &SeriesExpr,
    rhs: &SeriesExpr,
    n: i64,
) -> Result<VerificationVerdict> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "identity precision must be >= 1".into(),
        ));
    }
    let a = ev.eval(lhs, n)?;
    let b = ev.eval(rhs, n)?;
    let first_mismatch = a.first_difference(&b, n)?;
    Ok(VerificationVerdict {
        passed: first_mismatch.is_none(),
        precision: n,
        modulus: ev.ring.modulus(),
        first_mismatch,
    })
}
