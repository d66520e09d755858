//! Truncated Laurent series in one variable `q`.
//!
//! A [`Series`] stores the coefficients `c_v, c_{v+1}, ..., c_{P-1}` of
//! `sum c_n q^n` together with the valuation `v` and the precision `P`: every
//! coefficient below `q^P` is known, nothing above it is. Results of arithmetic
//! carry the tightest precision that follows from the inputs, never more.
//!
//! Coefficients live either in the integers (arbitrary precision) or in
//! `Z/MZ` with `M` fitting in a machine word.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{fill_chunks, Execution};

/// Outputs shorter than this are multiplied on the calling thread.
const PAR_MUL_THRESHOLD: usize = 1024;
const PAR_MUL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoeffRing {
    Exact,
    Modular(u64),
}

impl CoeffRing {
    pub fn modular(modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        Ok(CoeffRing::Modular(modulus))
    }

    pub fn modulus(self) -> Option<u64> {
        match self {
            CoeffRing::Exact => None,
            CoeffRing::Modular(m) => Some(m),
        }
    }
}

impl fmt::Display for CoeffRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffRing::Exact => write!(f, "Z"),
            CoeffRing::Modular(m) => write!(f, "Z/{m}Z"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Coeffs {
    Exact(Vec<BigInt>),
    Modular { modulus: u64, values: Vec<u64> },
}

impl Coeffs {
    fn empty(ring: CoeffRing) -> Self {
        match ring {
            CoeffRing::Exact => Coeffs::Exact(Vec::new()),
            CoeffRing::Modular(m) => Coeffs::Modular {
                modulus: m,
                values: Vec::new(),
            },
        }
    }

    fn len(&self) -> usize {
        match self {
            Coeffs::Exact(v) => v.len(),
            Coeffs::Modular { values, .. } => values.len(),
        }
    }

    fn ring(&self) -> CoeffRing {
        match self {
            Coeffs::Exact(_) => CoeffRing::Exact,
            Coeffs::Modular { modulus, .. } => CoeffRing::Modular(*modulus),
        }
    }

    fn leading_zeros(&self) -> usize {
        match self {
            Coeffs::Exact(v) => v.iter().take_while(|c| c.is_zero()).count(),
            Coeffs::Modular { values, .. } => values.iter().take_while(|&&c| c == 0).count(),
        }
    }

    fn drop_front(&mut self, n: usize) {
        match self {
            Coeffs::Exact(v) => {
                v.drain(..n);
            }
            Coeffs::Modular { values, .. } => {
                values.drain(..n);
            }
        }
    }

    fn truncate(&mut self, n: usize) {
        match self {
            Coeffs::Exact(v) => v.truncate(n),
            Coeffs::Modular { values, .. } => values.truncate(n),
        }
    }

    fn get_big(&self, i: usize) -> BigInt {
        match self {
            Coeffs::Exact(v) => v[i].clone(),
            Coeffs::Modular { values, .. } => BigInt::from(values[i]),
        }
    }

    fn is_zero_at(&self, i: usize) -> bool {
        match self {
            Coeffs::Exact(v) => v[i].is_zero(),
            Coeffs::Modular { values, .. } => values[i] == 0,
        }
    }

    /// Rearranges entries: output slot `k` takes input slot `pick(k)` or zero.
    fn gather(&self, len: usize, pick: impl Fn(usize) -> Option<usize>) -> Coeffs {
        match self {
            Coeffs::Exact(v) => Coeffs::Exact(
                (0..len)
                    .map(|k| pick(k).map_or_else(BigInt::zero, |i| v[i].clone()))
                    .collect(),
            ),
            Coeffs::Modular { modulus, values } => Coeffs::Modular {
                modulus: *modulus,
                values: (0..len).map(|k| pick(k).map_or(0, |i| values[i])).collect(),
            },
        }
    }
}

fn reduce_big(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m))
        .to_u64()
        .expect("residue fits in u64")
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn inverse_mod(a: u64, m: u64) -> Option<u64> {
    let g = (a as i128).extended_gcd(&(m as i128));
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.rem_euclid(m as i128) as u64)
}

/// Number of `(m-1)^2`-sized products a `u64` accumulator absorbs before it
/// must be reduced; `None` when a single product may overflow.
fn lazy_budget(m: u64) -> Option<usize> {
    let top = (m - 1) as u128;
    let sq = top * top;
    if sq == 0 {
        return Some(usize::MAX);
    }
    if sq > u64::MAX as u128 {
        return None;
    }
    let budget = (u64::MAX as u128 / sq) as usize;
    Some(budget.saturating_sub(1).max(1))
}

fn nonzero_mod(values: &[u64], limit: usize) -> Vec<(usize, u64)> {
    values
        .iter()
        .take(limit)
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect()
}

fn nonzero_big(values: &[BigInt], limit: usize) -> Vec<(usize, &BigInt)> {
    values
        .iter()
        .take(limit)
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .collect()
}

/// Dot products `out[n] = sum_i a_i * b[n - i]` over the sparse list `a`,
/// reduced modulo `m`, accumulating lazily in 64 bits where possible.
fn mod_convolve(a: &[(usize, u64)], b: &[u64], len: usize, m: u64, exec: Execution) -> Vec<u64> {
    let mut out = vec![0u64; len];
    let budget = lazy_budget(m);
    let exec = if len >= PAR_MUL_THRESHOLD {
        exec
    } else {
        Execution::Sequential
    };
    fill_chunks(&mut out, PAR_MUL_CHUNK, exec, |start, chunk| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            let n = start + k;
            *slot = match budget {
                Some(budget) => {
                    let mut acc = 0u64;
                    let mut pending = 0usize;
                    for &(i, ai) in a.iter().take_while(|(i, _)| *i <= n) {
                        acc += ai * b[n - i];
                        pending += 1;
                        if pending == budget {
                            acc %= m;
                            pending = 1;
                        }
                    }
                    acc % m
                }
                None => {
                    let mut acc = 0u128;
                    for &(i, ai) in a.iter().take_while(|(i, _)| *i <= n) {
                        acc = (acc + ai as u128 * b[n - i] as u128) % m as u128;
                    }
                    acc as u64
                }
            };
        }
    });
    out
}

fn big_convolve(a: &[(usize, &BigInt)], b: &[BigInt], len: usize, exec: Execution) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); len];
    let exec = if len >= PAR_MUL_THRESHOLD {
        exec
    } else {
        Execution::Sequential
    };
    fill_chunks(&mut out, PAR_MUL_CHUNK, exec, |start, chunk| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            let n = start + k;
            let mut acc = BigInt::zero();
            for &(i, ai) in a.iter().take_while(|(i, _)| *i <= n) {
                let bj = &b[n - i];
                if !bj.is_zero() {
                    acc += ai * bj;
                }
            }
            *slot = acc;
        }
    });
    out
}

/// A truncated Laurent series `sum_{v <= n < P} c_n q^n + O(q^P)`.
///
/// Values are immutable once built; every operation returns a new series.
/// A series that is zero to its precision stores no coefficients and reports
/// `valuation() == precision()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series {
    valuation: i64,
    precision: i64,
    coeffs: Coeffs,
}

impl Series {
    fn from_parts(valuation: i64, precision: i64, mut coeffs: Coeffs) -> Series {
        let len = (precision - valuation).max(0) as usize;
        coeffs.truncate(len);
        debug_assert_eq!(coeffs.len(), len, "coefficient count must equal P - v");
        let z = coeffs.leading_zeros();
        coeffs.drop_front(z);
        let valuation = if coeffs.len() == 0 {
            precision
        } else {
            valuation + z as i64
        };
        Series {
            valuation,
            precision,
            coeffs,
        }
    }

    pub fn zero(ring: CoeffRing, precision: i64) -> Series {
        Series {
            valuation: precision,
            precision,
            coeffs: Coeffs::empty(ring),
        }
    }

    pub fn one(ring: CoeffRing, precision: i64) -> Series {
        Series::monomial(ring, &BigInt::one(), 0, precision)
    }

    /// `c * q^e + O(q^precision)`.
    pub fn monomial(ring: CoeffRing, c: &BigInt, e: i64, precision: i64) -> Series {
        if e >= precision {
            return Series::zero(ring, precision);
        }
        let len = (precision - e) as usize;
        let coeffs = match ring {
            CoeffRing::Exact => {
                let mut v = vec![BigInt::zero(); len];
                v[0] = c.clone();
                Coeffs::Exact(v)
            }
            CoeffRing::Modular(m) => {
                let mut v = vec![0u64; len];
                v[0] = reduce_big(c, m);
                Coeffs::Modular {
                    modulus: m,
                    values: v,
                }
            }
        };
        Series::from_parts(e, precision, coeffs)
    }

    /// Builds `sum_i coeffs[i] q^{valuation + i} + O(q^precision)`; entries at
    /// or beyond the precision are dropped and missing entries are zero.
    pub fn from_i64(ring: CoeffRing, valuation: i64, coeffs: &[i64], precision: i64) -> Series {
        let big: Vec<BigInt> = coeffs.iter().map(|&c| BigInt::from(c)).collect();
        Series::from_bigints(ring, valuation, &big, precision)
    }

    pub fn from_bigints(
        ring: CoeffRing,
        valuation: i64,
        coeffs: &[BigInt],
        precision: i64,
    ) -> Series {
        if valuation >= precision {
            return Series::zero(ring, precision);
        }
        let len = (precision - valuation) as usize;
        let at = |i: usize| coeffs.get(i).cloned().unwrap_or_else(BigInt::zero);
        let c = match ring {
            CoeffRing::Exact => Coeffs::Exact((0..len).map(at).collect()),
            CoeffRing::Modular(m) => Coeffs::Modular {
                modulus: m,
                values: (0..len).map(|i| reduce_big(&at(i), m)).collect(),
            },
        };
        Series::from_parts(valuation, precision, c)
    }

    pub fn ring(&self) -> CoeffRing {
        self.coeffs.ring()
    }

    /// Smallest exponent with a nonzero coefficient; equals the precision for
    /// a series that is zero to its precision.
    pub fn valuation(&self) -> i64 {
        self.valuation
    }

    pub fn precision(&self) -> i64 {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 0
    }

    /// Coefficient of `q^n`; residues are returned in `[0, M)`.
    pub fn coeff(&self, n: i64) -> Result<BigInt> {
        self.require(n + 1)?;
        if n < self.valuation {
            return Ok(BigInt::zero());
        }
        Ok(self.coeffs.get_big((n - self.valuation) as usize))
    }

    /// Residue of the coefficient of `q^n` in a modular series.
    pub fn residue(&self, n: i64) -> Result<u64> {
        self.require(n + 1)?;
        match &self.coeffs {
            Coeffs::Modular { values, .. } => {
                if n < self.valuation {
                    Ok(0)
                } else {
                    Ok(values[(n - self.valuation) as usize])
                }
            }
            Coeffs::Exact(_) => Err(Error::InvalidArgument(
                "residue() needs a modular series".into(),
            )),
        }
    }

    /// Nonzero terms `(exponent, coefficient)` in increasing exponent order.
    pub fn terms(&self) -> Vec<(i64, BigInt)> {
        (0..self.coeffs.len())
            .filter(|&i| !self.coeffs.is_zero_at(i))
            .map(|i| (self.valuation + i as i64, self.coeffs.get_big(i)))
            .collect()
    }

    fn require(&self, n: i64) -> Result<()> {
        if n > self.precision {
            return Err(Error::InsufficientPrecision {
                requested: n,
                available: self.precision,
            });
        }
        Ok(())
    }

    fn same_ring(&self, other: &Series) -> Result<()> {
        if self.ring() != other.ring() {
            return Err(Error::RingMismatch(self.ring(), other.ring()));
        }
        Ok(())
    }

    /// Drops everything from `q^n` on; a no-op when `n >= precision`.
    pub fn truncate(&self, n: i64) -> Series {
        if n >= self.precision {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate((n - self.valuation).max(0) as usize);
        Series::from_parts(self.valuation.min(n), n, coeffs)
    }

    pub fn add(&self, other: &Series) -> Result<Series> {
        self.same_ring(other)?;
        let p = self.precision.min(other.precision);
        let v = self.valuation.min(other.valuation);
        if v >= p {
            return Ok(Series::zero(self.ring(), p));
        }
        let len = (p - v) as usize;
        let off_a = (self.valuation - v) as usize;
        let off_b = (other.valuation - v) as usize;
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Exact(a), Coeffs::Exact(b)) => {
                let mut out = vec![BigInt::zero(); len];
                for (i, c) in a.iter().enumerate().take(len.saturating_sub(off_a)) {
                    out[off_a + i] += c;
                }
                for (i, c) in b.iter().enumerate().take(len.saturating_sub(off_b)) {
                    out[off_b + i] += c;
                }
                Coeffs::Exact(out)
            }
            (Coeffs::Modular { modulus, values: a }, Coeffs::Modular { values: b, .. }) => {
                let m = *modulus;
                let mut out = vec![0u64; len];
                for (i, &c) in a.iter().enumerate().take(len.saturating_sub(off_a)) {
                    out[off_a + i] = c;
                }
                for (i, &c) in b.iter().enumerate().take(len.saturating_sub(off_b)) {
                    let s = out[off_b + i] as u128 + c as u128;
                    out[off_b + i] = (s % m as u128) as u64;
                }
                Coeffs::Modular {
                    modulus: m,
                    values: out,
                }
            }
            _ => unreachable!("rings checked above"),
        };
        Ok(Series::from_parts(v, p, coeffs))
    }

    pub fn neg(&self) -> Series {
        let coeffs = match &self.coeffs {
            Coeffs::Exact(v) => Coeffs::Exact(v.iter().map(|c| -c).collect()),
            Coeffs::Modular { modulus, values } => Coeffs::Modular {
                modulus: *modulus,
                values: values
                    .iter()
                    .map(|&c| if c == 0 { 0 } else { modulus - c })
                    .collect(),
            },
        };
        Series {
            valuation: self.valuation,
            precision: self.precision,
            coeffs,
        }
    }

    pub fn sub(&self, other: &Series) -> Result<Series> {
        self.add(&other.neg())
    }

    /// Multiplies every coefficient by the integer `c`.
    pub fn scale(&self, c: &BigInt) -> Series {
        let coeffs = match &self.coeffs {
            Coeffs::Exact(v) => Coeffs::Exact(v.iter().map(|x| x * c).collect()),
            Coeffs::Modular { modulus, values } => {
                let cm = reduce_big(c, *modulus);
                Coeffs::Modular {
                    modulus: *modulus,
                    values: values.iter().map(|&x| mul_mod(x, cm, *modulus)).collect(),
                }
            }
        };
        Series::from_parts(self.valuation, self.precision, coeffs)
    }

    /// `self * (1 - q^e)` for `e >= 1`; the factor is exact so the precision
    /// is unchanged.
    pub(crate) fn mul_one_minus_q_pow(&self, e: usize) -> Series {
        let mut coeffs = self.coeffs.clone();
        match &mut coeffs {
            Coeffs::Exact(v) => {
                for i in (e..v.len()).rev() {
                    let t = v[i - e].clone();
                    v[i] -= t;
                }
            }
            Coeffs::Modular { modulus, values } => {
                let m = *modulus;
                for i in (e..values.len()).rev() {
                    let t = values[i - e];
                    values[i] = (values[i] + m - t) % m;
                }
            }
        }
        Series::from_parts(self.valuation, self.precision, coeffs)
    }

    /// Multiplies by `q^k`, shifting valuation and precision alike.
    pub fn shift(&self, k: i64) -> Series {
        Series {
            valuation: self.valuation + k,
            precision: self.precision + k,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn mul(&self, other: &Series) -> Result<Series> {
        self.mul_with(other, Execution::default())
    }

    /// Cauchy product. The result is known below
    /// `min(P_a + v_b, P_b + v_a)`.
    pub fn mul_with(&self, other: &Series, exec: Execution) -> Result<Series> {
        self.same_ring(other)?;
        let v = self.valuation + other.valuation;
        let p = (self.precision + other.valuation).min(other.precision + self.valuation);
        if self.is_zero() || other.is_zero() || v >= p {
            return Ok(Series::zero(self.ring(), p));
        }
        let len = (p - v) as usize;
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Exact(a), Coeffs::Exact(b)) => {
                let na = nonzero_big(a, len);
                let nb = nonzero_big(b, len);
                let out = if na.len() <= nb.len() {
                    big_convolve(&na, b, len, exec)
                } else {
                    big_convolve(&nb, a, len, exec)
                };
                Coeffs::Exact(out)
            }
            (Coeffs::Modular { modulus, values: a }, Coeffs::Modular { values: b, .. }) => {
                let na = nonzero_mod(a, len);
                let nb = nonzero_mod(b, len);
                let out = if na.len() <= nb.len() {
                    mod_convolve(&na, b, len, *modulus, exec)
                } else {
                    mod_convolve(&nb, a, len, *modulus, exec)
                };
                Coeffs::Modular {
                    modulus: *modulus,
                    values: out,
                }
            }
            _ => unreachable!("rings checked above"),
        };
        Ok(Series::from_parts(v, p, coeffs))
    }

    /// Multiplicative inverse; the leading coefficient must be a unit.
    /// Relative precision is preserved, so the result is known below
    /// `P - 2v`.
    pub fn invert(&self) -> Result<Series> {
        if self.is_zero() {
            return Err(Error::NonUnitLeading {
                coeff: "0".into(),
                ring: self.ring(),
            });
        }
        let len = self.coeffs.len();
        let v = -self.valuation;
        let p = self.precision - 2 * self.valuation;
        let coeffs = match &self.coeffs {
            Coeffs::Exact(a) => {
                let lead = &a[0];
                if !lead.abs().is_one() {
                    return Err(Error::NonUnitLeading {
                        coeff: lead.to_string(),
                        ring: self.ring(),
                    });
                }
                // 1/a0 == a0 for a0 = +-1
                let u = lead.clone();
                let nz: Vec<(usize, &BigInt)> = nonzero_big(a, len).into_iter().skip(1).collect();
                let mut b: Vec<BigInt> = Vec::with_capacity(len);
                b.push(u.clone());
                for n in 1..len {
                    let mut acc = BigInt::zero();
                    for &(i, ai) in nz.iter().take_while(|(i, _)| *i <= n) {
                        acc += ai * &b[n - i];
                    }
                    b.push(-(acc * &u));
                }
                Coeffs::Exact(b)
            }
            Coeffs::Modular { modulus, values: a } => {
                let m = *modulus;
                let u = inverse_mod(a[0], m).ok_or_else(|| Error::NonUnitLeading {
                    coeff: a[0].to_string(),
                    ring: self.ring(),
                })?;
                let nz: Vec<(usize, u64)> = nonzero_mod(a, len).into_iter().skip(1).collect();
                let budget = lazy_budget(m);
                let mut b: Vec<u64> = Vec::with_capacity(len);
                b.push(u);
                for n in 1..len {
                    let s = match budget {
                        Some(budget) => {
                            let mut acc = 0u64;
                            let mut pending = 0usize;
                            for &(i, ai) in nz.iter().take_while(|(i, _)| *i <= n) {
                                acc += ai * b[n - i];
                                pending += 1;
                                if pending == budget {
                                    acc %= m;
                                    pending = 1;
                                }
                            }
                            acc % m
                        }
                        None => {
                            let mut acc = 0u128;
                            for &(i, ai) in nz.iter().take_while(|(i, _)| *i <= n) {
                                acc = (acc + ai as u128 * b[n - i] as u128) % m as u128;
                            }
                            acc as u64
                        }
                    };
                    let t = mul_mod(s, u, m);
                    b.push(if t == 0 { 0 } else { m - t });
                }
                Coeffs::Modular {
                    modulus: m,
                    values: b,
                }
            }
        };
        Ok(Series::from_parts(v, p, coeffs))
    }

    pub fn pow(&self, e: i64) -> Result<Series> {
        self.pow_with(e, Execution::default())
    }

    /// Integer power by binary exponentiation; negative exponents invert
    /// first. `pow(0)` is `1` known to the relative precision of `self`.
    pub fn pow_with(&self, e: i64, exec: Execution) -> Result<Series> {
        if e == 0 {
            return Ok(Series::one(self.ring(), self.precision - self.valuation));
        }
        let base = if e < 0 { self.invert()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut result: Option<Series> = None;
        let mut square = base;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => square.clone(),
                    Some(r) => r.mul_with(&square, exec)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            square = square.mul_with(&square, exec)?;
        }
        Ok(result.expect("exponent is nonzero"))
    }

    /// Replaces `q` by `q^m`. Exponents below `q^P` map to multiples of `m`
    /// below `q^{mP}`, and everything in between is a structural zero, so the
    /// result is known below `q^{mP}`.
    pub fn substitute_power(&self, m: u64) -> Result<Series> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "substitute_power needs m >= 1".into(),
            ));
        }
        let mi = m as i64;
        let v = self.valuation * mi;
        let p = self.precision * mi;
        if self.is_zero() {
            return Ok(Series::zero(self.ring(), p));
        }
        let len = (p - v) as usize;
        let m = m as usize;
        let coeffs = self
            .coeffs
            .gather(len, |k| if k % m == 0 { Some(k / m) } else { None });
        Ok(Series::from_parts(v, p, coeffs))
    }

    /// The `q^{mn+r}` component of `self`, divided by `q^r` and read in `q^m -> q`:
    /// `sum_{n = r (mod m)} a(n) q^{(n-r)/m}`. The residue is taken modulo `m`
    /// into `[0, m)`. Known below `floor((P-1-r)/m) + 1`.
    pub fn extract(&self, m: u64, r: i64) -> Result<Series> {
        if m == 0 {
            return Err(Error::InvalidArgument("extract needs m >= 1".into()));
        }
        let mi = m as i64;
        let r = r.rem_euclid(mi);
        let p = (self.precision - 1 - r).div_euclid(mi) + 1;
        if self.is_zero() {
            return Ok(Series::zero(self.ring(), p));
        }
        let j_min = (self.valuation - r + mi - 1).div_euclid(mi);
        if j_min >= p {
            return Ok(Series::zero(self.ring(), p));
        }
        let len = (p - j_min) as usize;
        let base = r + mi * j_min - self.valuation;
        let coeffs = self
            .coeffs
            .gather(len, |k| Some((base + mi * k as i64) as usize));
        Ok(Series::from_parts(j_min, p, coeffs))
    }

    /// Image in `Z/MZ`. Allowed from exact series, or from `Z/mZ` when `M | m`.
    pub fn reduce_mod(&self, modulus: u64) -> Result<Series> {
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        let coeffs = match &self.coeffs {
            Coeffs::Exact(v) => Coeffs::Modular {
                modulus,
                values: v.iter().map(|c| reduce_big(c, modulus)).collect(),
            },
            Coeffs::Modular { modulus: m, values } => {
                if m % modulus != 0 {
                    return Err(Error::IncompatibleModulus {
                        ring: self.ring(),
                        modulus,
                    });
                }
                Coeffs::Modular {
                    modulus,
                    values: values.iter().map(|c| c % modulus).collect(),
                }
            }
        };
        Ok(Series::from_parts(self.valuation, self.precision, coeffs))
    }

    /// Re-expresses the series over `ring`, reducing if needed.
    pub fn to_ring(&self, ring: CoeffRing) -> Result<Series> {
        match ring {
            r if r == self.ring() => Ok(self.clone()),
            CoeffRing::Modular(m) => self.reduce_mod(m),
            CoeffRing::Exact => Err(Error::IncompatibleModulus {
                ring: self.ring(),
                modulus: 0,
            }),
        }
    }

    /// First exponent below `q^n` where the two series differ, if any.
    /// Fails rather than comparing fewer terms than requested.
    pub fn first_difference(&self, other: &Series, n: i64) -> Result<Option<i64>> {
        self.same_ring(other)?;
        self.require(n)?;
        other.require(n)?;
        let start = self.valuation.min(other.valuation);
        for e in start..n {
            let a = if e < self.valuation {
                None
            } else {
                Some((e - self.valuation) as usize)
            };
            let b = if e < other.valuation {
                None
            } else {
                Some((e - other.valuation) as usize)
            };
            let same = match (&self.coeffs, &other.coeffs, a, b) {
                (_, _, None, None) => true,
                (c, _, Some(i), None) | (_, c, None, Some(i)) => c.is_zero_at(i),
                (Coeffs::Exact(x), Coeffs::Exact(y), Some(i), Some(j)) => x[i] == y[j],
                (
                    Coeffs::Modular { values: x, .. },
                    Coeffs::Modular { values: y, .. },
                    Some(i),
                    Some(j),
                ) => x[i] == y[j],
                _ => unreachable!("rings checked above"),
            };
            if !same {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    /// True iff every coefficient below `q^n` agrees.
    pub fn eq_to_precision(&self, other: &Series, n: i64) -> Result<bool> {
        Ok(self.first_difference(other, n)?.is_none())
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let unit = mag.is_one();
            match (e, unit) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "q")?,
                (1, false) => write!(f, "{mag}*q")?,
                (_, true) => write!(f, "q^{e}")?,
                (_, false) => write!(f, "{mag}*q^{e}")?,
            }
        }
        if first {
            write!(f, "O(q^{})", self.precision)
        } else {
            write!(f, " + O(q^{})", self.precision)
        }
    }
}
