//! `d_k(n)` generating functions, an independent coefficient oracle, range
//! checks of congruence families, proof-pipeline replay, and the scanner for
//! new power-of-5 congruences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::catalog::{format_params, param_instances, Catalog, Params};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::qfunctions::{pentagonal_terms, EtaQuotientSpec, Evaluator};
use crate::series::{CoeffRing, Series};

/// `f_2^k / f_1^{3k+1}` below `q^n`. `k = 0` gives the partition function.
pub fn dk_series(k: u64, n: i64, ring: CoeffRing) -> Result<Series> {
    Evaluator::new(ring).eta_quotient(&EtaQuotientSpec::dk(k), n)
}

/// Same series as [`dk_series`] over `Z/p^a`, after shrinking the exponents
/// with `f_m^{p^a} == f_{pm}^{p^{a-1}}`. This is the route used by family checks.
pub fn dk_series_reduced(k: u64, n: i64, modulus: u64) -> Result<Series> {
    Evaluator::new(CoeffRing::modular(modulus)?)
        .with_prime_power_reduction()
        .eta_quotient(&EtaQuotientSpec::dk(k), n)
}

/// `p(0..=n_max)` from Euler's pentagonal recurrence, exact.
pub fn partition_numbers(n_max: usize) -> Vec<BigInt> {
    let mut p = vec![BigInt::zero(); n_max + 1];
    p[0] = BigInt::one();
    for n in 1..=n_max {
        let mut acc = BigInt::zero();
        for j in 1.. {
            let a = j * (3 * j - 1) / 2;
            if a > n {
                break;
            }
            let b = j * (3 * j + 1) / 2;
            let mut t = p[n - a].clone();
            if b <= n {
                t += &p[n - b];
            }
            if j % 2 == 1 {
                acc += t;
            } else {
                acc -= t;
            }
        }
        p[n] = acc;
    }
    p
}

/// `1/f_1` below `q^n` via the pentagonal recurrence.
pub fn partition_series(n: i64, ring: CoeffRing) -> Result<Series> {
    if n < 1 {
        return Err(Error::InvalidArgument("precision must be >= 1".into()));
    }
    let n_us = n as usize;
    match ring {
        CoeffRing::Exact => Ok(Series::from_bigints(
            ring,
            0,
            &partition_numbers(n_us - 1),
            n,
        )),
        CoeffRing::Modular(m) => {
            let pent = pentagonal_terms(n);
            let mut p = vec![0u64; n_us];
            p[0] = 1 % m;
            for i in 1..n_us {
                let mut acc: u128 = 0;
                let mut neg: u128 = 0;
                for &(e, s) in pent.iter().skip(1) {
                    let e = e as usize;
                    if e > i {
                        break;
                    }
                    // 1/f_1 * f_1 = 1: p(i) = -sum_{e>0} s_e p(i-e)
                    if s < 0 {
                        acc += p[i - e] as u128;
                    } else {
                        neg += p[i - e] as u128;
                    }
                }
                let m = m as u128;
                p[i] = ((acc % m + m - neg % m) % m) as u64;
            }
            let v: Vec<BigInt> = p.into_iter().map(BigInt::from).collect();
            Ok(Series::from_bigints(ring, 0, &v, n))
        }
    }
}

fn convolve(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len().min(b.len());
    let mut out = vec![BigInt::zero(); n];
    for (i, x) in a.iter().enumerate().take(n) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `d_k(0..=n_max)` by a route sharing no code with [`dk_series`]: `p(n)`
/// from the recurrence, convolution powers for `f_1^{-(3k+1)}`,
/// and `f_2^k` expanded as a finite product of binomials.
pub fn oracle_dk_table(k: u64, n_max: usize) -> Vec<BigInt> {
    let len = n_max + 1;
    let p = partition_numbers(n_max);
    let mut acc = vec![BigInt::zero(); len];
    acc[0] = BigInt::one();
    for _ in 0..3 * k + 1 {
        acc = convolve(&acc, &p);
    }
    for j in (2..len).step_by(2) {
        for _ in 0..k {
            for i in (j..len).rev() {
                let t = acc[i - j].clone();
                acc[i] -= t;
            }
        }
    }
    acc
}

pub fn oracle_dk(k: u64, n: usize) -> BigInt {
    oracle_dk_table(k, n).pop().expect("n_max + 1 entries")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `d_{k_modulus*c + k_residue}`; `k_modulus = 0` pins a single `k`.
    Dk { k_modulus: u64, k_residue: u64 },
    /// `p(n)`.
    Partition,
}

/// Claim: `coefficient(arg_modulus*n + b) == 0 (mod modulus)` for `b` in
/// `arg_residues`, for every `k` of the family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceFamily {
    pub group: String,
    pub label: String,
    pub kind: FamilyKind,
    pub arg_modulus: u64,
    pub arg_residues: Vec<u64>,
    pub modulus: u64,
}

impl CongruenceFamily {
    pub fn new(
        group: &str,
        label: &str,
        kind: FamilyKind,
        arg_modulus: u64,
        arg_residues: Vec<u64>,
        modulus: u64,
    ) -> Result<CongruenceFamily> {
        if arg_modulus == 0
            || arg_residues.is_empty()
            || arg_residues.iter().any(|&b| b >= arg_modulus)
        {
            return Err(Error::InvalidArgument(format!(
                "family `{label}`: residues must lie in [0, {arg_modulus})"
            )));
        }
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        Ok(CongruenceFamily {
            group: group.to_string(),
            label: label.to_string(),
            kind,
            arg_modulus,
            arg_residues,
            modulus,
        })
    }

    /// Single-`k` family.
    pub fn single(
        k: u64,
        arg_modulus: u64,
        arg_residues: Vec<u64>,
        modulus: u64,
    ) -> Result<CongruenceFamily> {
        let label = format!(
            "d_{k}({}) mod {modulus}",
            progression_text(arg_modulus, &arg_residues)
        );
        CongruenceFamily::new(
            "custom",
            &label,
            FamilyKind::Dk {
                k_modulus: 0,
                k_residue: k,
            },
            arg_modulus,
            arg_residues,
            modulus,
        )
    }

    /// The `k` used at parameter `c`; `None` for `p(n)`.
    pub fn k_at(&self, c: u64) -> Option<u64> {
        match self.kind {
            FamilyKind::Dk {
                k_modulus,
                k_residue,
            } => Some(k_modulus * c + k_residue),
            FamilyKind::Partition => None,
        }
    }

    /// Whether different `c` give different series.
    pub fn varies_with_c(&self) -> bool {
        matches!(self.kind, FamilyKind::Dk { k_modulus, .. } if k_modulus > 0)
    }

    pub fn k_pattern(&self) -> String {
        match self.kind {
            FamilyKind::Dk {
                k_modulus: 0,
                k_residue,
            } => k_residue.to_string(),
            FamilyKind::Dk {
                k_modulus,
                k_residue: 0,
            } => format!("{k_modulus}c"),
            FamilyKind::Dk {
                k_modulus,
                k_residue,
            } => format!("{k_modulus}c+{k_residue}"),
            FamilyKind::Partition => "p".to_string(),
        }
    }

    pub fn progression(&self) -> String {
        progression_text(self.arg_modulus, &self.arg_residues)
    }
}

pub fn progression_text(a: u64, residues: &[u64]) -> String {
    let rs: Vec<String> = residues.iter().map(u64::to_string).collect();
    match (a, residues) {
        (1, _) => "n".to_string(),
        (_, [0]) => format!("{a}n"),
        _ => format!("{a}n+{}", rs.join(",")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    VerifiedInRange,
    Counterexample,
    InsufficientPrecision,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::VerifiedInRange => "verified-in-range",
            Verdict::Counterexample => "counterexample",
            Verdict::InsufficientPrecision => "insufficient-precision",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Verdict> {
        match s {
            "verified-in-range" => Ok(Verdict::VerifiedInRange),
            "counterexample" => Ok(Verdict::Counterexample),
            "insufficient-precision" => Ok(Verdict::InsufficientPrecision),
            _ => Err(Error::InvalidArgument(format!("unknown verdict `{s}`"))),
        }
    }
}

/// A coefficient in the claimed progression that is not `0 (mod modulus)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub c: u64,
    /// `None` for `p(n)`.
    pub k: Option<u64>,
    pub n: u64,
    /// The coefficient reduced into `[0, modulus)`.
    pub residue: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    pub group: String,
    pub k_pattern: String,
    pub progression: String,
    pub modulus: u64,
    pub c_range: (u64, u64),
    /// Largest argument tested.
    pub bound: u64,
    pub precision_used: i64,
    /// Number of coefficients inspected over all `c` and residues.
    pub tested: u64,
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    #[serde(skip)]
    pub wall_time: Option<Duration>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.verdict == Verdict::VerifiedInRange
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let var = if self.k_pattern.contains('j') {
            "j"
        } else {
            "c"
        };
        let range = if !self.k_pattern.contains(var) {
            String::new()
        } else if self.c_range.0 == 0 {
            format!("{var} <= {}, ", self.c_range.1)
        } else {
            format!("{} <= {var} <= {}, ", self.c_range.0, self.c_range.1)
        };
        match (&self.verdict, &self.counterexample) {
            (Verdict::VerifiedInRange, _) => format!(
                "{}: verified for {range}argument <= {} ({} coefficients)",
                self.family, self.bound, self.tested
            ),
            (Verdict::Counterexample, Some(x)) => {
                let who = match x.k {
                    Some(k) => format!("d_{k}({})", x.n),
                    None => format!("p({})", x.n),
                };
                format!(
                    "{}: counterexample at {var} = {}: {who} == {} (mod {})",
                    self.family, x.c, x.residue, self.modulus
                )
            }
            _ => format!(
                "{}: insufficient precision for argument <= {} (have {})",
                self.family, self.bound, self.precision_used
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum SeriesKey {
    Dk(u64, u64),
    Partition(u64),
}

fn build(key: SeriesKey, n: i64) -> Result<Series> {
    match key {
        SeriesKey::Dk(k, m) => dk_series_reduced(k, n, m),
        SeriesKey::Partition(m) => partition_series(n, CoeffRing::modular(m)?),
    }
}

fn key_for(f: &CongruenceFamily, c: u64) -> SeriesKey {
    match f.k_at(c) {
        Some(k) => SeriesKey::Dk(k, f.modulus),
        None => SeriesKey::Partition(f.modulus),
    }
}

fn c_values(f: &CongruenceFamily, c_lo: u64, c_hi: u64) -> (u64, u64) {
    if f.varies_with_c() {
        (c_lo, c_hi)
    } else {
        (0, 0)
    }
}

/// Checks each family for `c_lo <= c <= c_hi` and every argument `<= bound`.
/// Series are shared between families with the same `(k, modulus)` and built
/// in parallel under [`Execution::Parallel`]; reports keep input order.
pub fn check_families(
    families: &[CongruenceFamily],
    c_lo: u64,
    c_hi: u64,
    bound: u64,
    exec: Execution,
) -> Result<Vec<VerificationReport>> {
    if c_lo > c_hi {
        return Err(Error::InvalidArgument(format!(
            "empty c range {c_lo}..={c_hi}"
        )));
    }
    let n = bound as i64 + 1;
    let mut keys = BTreeSet::new();
    for f in families {
        let (lo, hi) = c_values(f, c_lo, c_hi);
        for c in lo..=hi {
            keys.insert(key_for(f, c));
        }
    }
    let keys: Vec<SeriesKey> = keys.into_iter().collect();
    let started = Instant::now();
    let built = map_ordered(&keys, exec, |&k| build(k, n));
    let mut table = HashMap::new();
    for (k, s) in keys.into_iter().zip(built) {
        table.insert(k, s?);
    }
    let shared = started.elapsed();
    let reports = families
        .iter()
        .map(|f| {
            let t = Instant::now();
            let (lo, hi) = c_values(f, c_lo, c_hi);
            let mut r = scan_family(f, lo, hi, bound, |c| &table[&key_for(f, c)]);
            r.wall_time = Some(t.elapsed() + shared / families.len().max(1) as u32);
            r
        })
        .collect();
    Ok(reports)
}

pub fn check_family(f: &CongruenceFamily, c_max: u64, bound: u64) -> Result<VerificationReport> {
    Ok(check_families(
        std::slice::from_ref(f),
        0,
        c_max,
        bound,
        Execution::Sequential,
    )?
    .remove(0))
}

fn scan_family<'a>(
    f: &CongruenceFamily,
    c_lo: u64,
    c_hi: u64,
    bound: u64,
    series: impl Fn(u64) -> &'a Series,
) -> VerificationReport {
    let mut report = VerificationReport {
        family: f.label.clone(),
        group: f.group.clone(),
        k_pattern: f.k_pattern(),
        progression: f.progression(),
        modulus: f.modulus,
        c_range: (c_lo, c_hi),
        bound,
        precision_used: i64::MAX,
        tested: 0,
        verdict: Verdict::VerifiedInRange,
        counterexample: None,
        wall_time: None,
    };
    'outer: for c in c_lo..=c_hi {
        let s = series(c);
        report.precision_used = report.precision_used.min(s.precision());
        if s.precision() <= bound as i64 {
            report.verdict = Verdict::InsufficientPrecision;
            break;
        }
        for &b in &f.arg_residues {
            let mut arg = b;
            while arg <= bound {
                report.tested += 1;
                let r = s.residue(arg as i64).expect("within precision");
                if r != 0 {
                    report.verdict = Verdict::Counterexample;
                    report.counterexample = Some(Counterexample {
                        c,
                        k: f.k_at(c),
                        n: arg,
                        residue: r,
                    });
                    break 'outer;
                }
                arg += f.arg_modulus;
            }
        }
    }
    if report.verdict == Verdict::VerifiedInRange && report.tested == 0 {
        report.verdict = Verdict::InsufficientPrecision;
    }
    if report.precision_used == i64::MAX {
        report.precision_used = 0;
    }
    report
}

/// Base family and the family lifted along `k -> p^{M+N-1} j + k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftingReport {
    pub base: VerificationReport,
    /// Absent when the base fails or `j_max = 0`.
    pub lifted: Option<VerificationReport>,
}

impl LiftingReport {
    pub fn ok(&self) -> bool {
        self.base.ok() && self.lifted.as_ref().is_none_or(VerificationReport::ok)
    }
}

/// Checks `d_k(p^M n + r) == 0 (mod p^N)` first, then the lifted family for
/// `1 <= j <= j_max`, both for arguments `<= bound`.
#[allow(clippy::too_many_arguments)]
pub fn check_lifting(
    p: u64,
    m_exp: u32,
    n_exp: u32,
    r: u64,
    k: u64,
    j_max: u64,
    bound: u64,
    exec: Execution,
) -> Result<LiftingReport> {
    if m_exp == 0 || n_exp == 0 {
        return Err(Error::InvalidArgument("M and N must be >= 1".into()));
    }
    let arg_modulus = p.pow(m_exp);
    let modulus = p.pow(n_exp);
    let step = p.pow(m_exp + n_exp - 1);
    let prog = progression_text(arg_modulus, &[r]);
    let base = CongruenceFamily::new(
        "lifting",
        &format!("d_{k}({prog}) mod {modulus}"),
        FamilyKind::Dk {
            k_modulus: 0,
            k_residue: k,
        },
        arg_modulus,
        vec![r],
        modulus,
    )?;
    let base = check_families(&[base], 0, 0, bound, exec)?.remove(0);
    if !base.ok() || j_max == 0 {
        return Ok(LiftingReport { base, lifted: None });
    }
    let lifted = CongruenceFamily::new(
        "lifting",
        &format!("d_{{{step}j+{k}}}({prog}) mod {modulus}"),
        FamilyKind::Dk {
            k_modulus: step,
            k_residue: k,
        },
        arg_modulus,
        vec![r],
        modulus,
    )?;
    let mut lifted = check_families(&[lifted], 1, j_max, bound, exec)?.remove(0);
    lifted.k_pattern = format!("{step}j+{k}");
    Ok(LiftingReport {
        base,
        lifted: Some(lifted),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum StepAction {
    Compare {
        identity: Option<String>,
        expr: Option<String>,
    },
    Extract {
        m: u64,
        r: i64,
    },
    Multiply {
        expr: String,
    },
    Reduce {
        modulus: u64,
    },
    Zero,
    ZeroResidues {
        m: u64,
        residues: Vec<u64>,
    },
    Support {
        m: u64,
        residues: Vec<u64>,
    },
}

impl fmt::Display for StepAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |rs: &[u64]| rs.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        match self {
            StepAction::Compare {
                identity: Some(id), ..
            } => write!(f, "compare with {id}"),
            StepAction::Compare { expr, .. } => {
                write!(f, "compare with {}", expr.as_deref().unwrap_or("?"))
            }
            StepAction::Extract { m, r } => write!(f, "extract q^({m}n+{r})"),
            StepAction::Multiply { expr } => write!(f, "multiply by {expr}"),
            StepAction::Reduce { modulus } => write!(f, "reduce mod {modulus}"),
            StepAction::Zero => write!(f, "vanishes"),
            StepAction::ZeroResidues { m, residues } => {
                write!(f, "vanishes on {m}n+{}", list(residues))
            }
            StepAction::Support { m, residues } => {
                write!(f, "supported on {m}n+{}", list(residues))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStep {
    #[serde(flatten)]
    pub action: StepAction,
    #[serde(default)]
    pub cite: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineScript {
    pub id: String,
    #[serde(default)]
    pub claim: String,
    pub start: String,
    pub modulus: u64,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<i64>>,
    #[serde(default, rename = "step")]
    pub steps: Vec<PipelineStep>,
}

impl PipelineScript {
    pub fn referenced_identities(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| match &s.action {
                StepAction::Compare {
                    identity: Some(id), ..
                } => Some(id.as_str()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub action: String,
    pub cite: String,
    pub passed: bool,
    /// Exponents below this bound were examined.
    pub precision: i64,
    pub first_bad: Option<i64>,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub id: String,
    pub claim: String,
    pub params: Params,
    pub modulus: u64,
    pub start_precision: i64,
    pub final_precision: i64,
    pub steps: Vec<StepReport>,
    pub passed: bool,
}

impl PipelineReport {
    pub fn summary(&self) -> String {
        let who = if self.params.is_empty() {
            self.id.clone()
        } else {
            format!("{} [{}]", self.id, format_params(&self.params))
        };
        match self.steps.iter().find(|s| !s.passed) {
            None => format!(
                "{who}: {} steps pass from q^{} down to q^{}; {} holds in range",
                self.steps.len(),
                self.start_precision,
                self.final_precision,
                self.claim
            ),
            Some(s) => format!(
                "{who}: step {} ({}, {}) fails at exponent {}{}",
                s.index + 1,
                s.action,
                s.cite,
                s.first_bad.map_or("-".to_string(), |e| e.to_string()),
                s.detail
                    .as_deref()
                    .map_or(String::new(), |d| format!(": {d}"))
            ),
        }
    }
}

fn first_in_classes(s: &Series, m: u64, residues: &[u64], want_zero: bool) -> Result<Option<i64>> {
    let mi = m as i64;
    for (e, c) in s.terms() {
        let in_class = residues.contains(&(e.rem_euclid(mi) as u64));
        if !c.is_zero() && in_class == want_zero {
            return Ok(Some(e));
        }
    }
    Ok(None)
}

/// Runs `script` once per parameter instance, starting from its series known
/// below `q^n`. Execution stops at the first failing step of an instance.
pub fn replay_pipeline(
    script: &PipelineScript,
    catalog: &Catalog,
    n: i64,
) -> Result<Vec<PipelineReport>> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "pipeline precision must be >= 1".into(),
        ));
    }
    param_instances(&script.params)
        .into_iter()
        .map(|params| replay_instance(script, catalog, n, params))
        .collect()
}

/// Replays every script of the catalog; instances run in parallel.
pub fn replay_all(catalog: &Catalog, n: i64, exec: Execution) -> Result<Vec<PipelineReport>> {
    let work: Vec<(&PipelineScript, Params)> = catalog
        .pipelines
        .iter()
        .flat_map(|s| param_instances(&s.params).into_iter().map(move |p| (s, p)))
        .collect();
    map_ordered(&work, exec, |(s, p)| {
        replay_instance(s, catalog, n, p.clone())
    })
    .into_iter()
    .collect()
}

fn replay_instance(
    script: &PipelineScript,
    catalog: &Catalog,
    n: i64,
    params: Params,
) -> Result<PipelineReport> {
    let mut ring = CoeffRing::modular(script.modulus)?;
    let ev = Evaluator::new(ring);
    let mut cur = ev.eval(&catalog.expr(&script.start, &params)?, n)?;
    let mut steps = Vec::new();
    for (index, step) in script.steps.iter().enumerate() {
        let mut first_bad = None;
        let mut detail = None;
        match &step.action {
            StepAction::Compare { identity, expr } => {
                let forms: Vec<String> = match (identity, expr) {
                    (Some(id), None) => catalog.identity(id)?.forms()[1..]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                    (None, Some(e)) => vec![e.clone()],
                    _ => {
                        return Err(Error::Catalog(format!(
                            "{}: compare step needs exactly one of identity and expr",
                            script.id
                        )))
                    }
                };
                let ev = Evaluator::new(ring);
                for (i, text) in forms.iter().enumerate() {
                    let other = ev.eval(&catalog.expr(text, &params)?, cur.precision())?;
                    if let Some(e) = cur.first_difference(&other, cur.precision())? {
                        first_bad = Some(e);
                        detail = Some(format!("form {} `{text}`", i + 1));
                        break;
                    }
                }
            }
            StepAction::Extract { m, r } => cur = cur.extract(*m, *r)?,
            StepAction::Multiply { expr } => {
                let e = catalog.expr(expr, &params)?;
                let ev = Evaluator::new(ring);
                let v = ev.valuation_floor(&e)?;
                let other = ev.eval(&e, cur.precision() - cur.valuation() + v)?;
                cur = cur.mul(&other)?;
            }
            StepAction::Reduce { modulus } => {
                cur = cur.reduce_mod(*modulus)?;
                ring = cur.ring();
            }
            StepAction::Zero => first_bad = cur.terms().first().map(|t| t.0),
            StepAction::ZeroResidues { m, residues } => {
                first_bad = first_in_classes(&cur, *m, residues, true)?
            }
            StepAction::Support { m, residues } => {
                first_bad = first_in_classes(&cur, *m, residues, false)?
            }
        }
        let passed = first_bad.is_none();
        steps.push(StepReport {
            index,
            action: step.action.to_string(),
            cite: step.cite.clone(),
            passed,
            precision: cur.precision(),
            first_bad,
            detail,
        });
        if !passed {
            break;
        }
    }
    Ok(PipelineReport {
        id: script.id.clone(),
        claim: script.claim.clone(),
        passed: steps.iter().all(|s| s.passed),
        modulus: ring.modulus().unwrap_or(script.modulus),
        start_precision: n,
        final_precision: cur.precision(),
        params,
        steps,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub ks: Vec<u64>,
    /// Progression moduli `A`, powers of 5.
    pub arg_moduli: Vec<u64>,
    /// Valuations are capped at `5^max_power`.
    pub max_power: u32,
    pub bound: u64,
    /// Minimum number of tested coefficients per progression.
    pub min_tested: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            ks: (0..125).collect(),
            arg_moduli: vec![5, 25, 125],
            max_power: 5,
            bound: 3000,
            min_tested: 16,
        }
    }
}

/// A congruence observed numerically, never more than that.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalFamily {
    pub k: u64,
    pub arg_modulus: u64,
    pub residues: Vec<u64>,
    pub modulus: u64,
    pub bound: u64,
    /// Fewest coefficients tested for any listed residue.
    pub tested: u64,
    pub status: String,
}

impl EmpiricalFamily {
    pub fn label(&self) -> String {
        format!(
            "d_{}({}) mod {}",
            self.k,
            progression_text(self.arg_modulus, &self.residues),
            self.modulus
        )
    }

    pub fn to_family(&self) -> CongruenceFamily {
        CongruenceFamily {
            group: "scan".into(),
            label: self.label(),
            kind: FamilyKind::Dk {
                k_modulus: 0,
                k_residue: self.k,
            },
            arg_modulus: self.arg_modulus,
            arg_residues: self.residues.clone(),
            modulus: self.modulus,
        }
    }

    /// True if this family implies `d_k(a n + b) == 0 (mod modulus)`.
    pub fn implies(&self, k: u64, a: u64, b: u64, modulus: u64) -> bool {
        self.k == k
            && a.is_multiple_of(self.arg_modulus)
            && self.residues.contains(&(b % self.arg_modulus))
            && self.modulus.is_multiple_of(modulus)
    }
}

fn v5(x: u64, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    let mut v = 0;
    let mut x = x;
    while x.is_multiple_of(5) && v < cap {
        x /= 5;
        v += 1;
    }
    v
}

/// Smallest 5-adic valuation over the progression `a n + b <= bound`, and the
/// number of coefficients inspected.
fn progression_valuation(vals: &[u32], a: u64, b: u64, cap: u32) -> (u32, u64) {
    let mut v = cap;
    let mut count = 0;
    let mut i = b as usize;
    while i < vals.len() {
        v = v.min(vals[i]);
        count += 1;
        i += a as usize;
    }
    (v, count)
}

/// Searches `d_k(A n + b)` for power-of-5 divisibility. A progression is
/// reported when at least `min_tested` coefficients were inspected, all
/// divisible by `5^v` with `v >= 1`, and `v` exceeds the valuation of the
/// enclosing progression `(A/5) n + (b mod A/5)`.
pub fn scan(cfg: &ScanConfig, exec: Execution) -> Result<Vec<EmpiricalFamily>> {
    if cfg.max_power == 0 || cfg.max_power > 27 {
        return Err(Error::InvalidArgument("max_power must be in 1..=27".into()));
    }
    for &a in &cfg.arg_moduli {
        if a < 5 || v5(a, 64) as u64 == 0 || 5u64.pow(v5(a, 64)) != a {
            return Err(Error::InvalidArgument(format!("{a} is not a power of 5")));
        }
    }
    let modulus = 5u64.pow(cfg.max_power);
    let n = cfg.bound as i64 + 1;
    let found = map_ordered(&cfg.ks, exec, |&k| -> Result<Vec<EmpiricalFamily>> {
        let s = dk_series_reduced(k, n, modulus)?;
        let vals: Vec<u32> = (0..n)
            .map(|i| v5(s.residue(i).expect("in range"), cfg.max_power))
            .collect();
        let mut out = Vec::new();
        let mut moduli = cfg.arg_moduli.clone();
        moduli.sort_unstable();
        moduli.dedup();
        for &a in &moduli {
            let mut groups: BTreeMap<u32, (Vec<u64>, u64)> = BTreeMap::new();
            for b in 0..a {
                let (v, count) = progression_valuation(&vals, a, b, cfg.max_power);
                if v == 0 || count < cfg.min_tested {
                    continue;
                }
                let parent = a / 5;
                let (pv, _) = progression_valuation(&vals, parent, b % parent, cfg.max_power);
                if v <= pv {
                    continue;
                }
                let g = groups.entry(v).or_insert((Vec::new(), u64::MAX));
                g.0.push(b);
                g.1 = g.1.min(count);
            }
            for (v, (residues, tested)) in groups {
                out.push(EmpiricalFamily {
                    k,
                    arg_modulus: a,
                    residues,
                    modulus: 5u64.pow(v),
                    bound: cfg.bound,
                    tested,
                    status: "empirical".into(),
                });
            }
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for f in found {
        all.extend(f?);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_small_values() {
        // d_1 = f_2 / f_1^4 = 1 + 4q + 13q^2 + ...
        let t = oracle_dk_table(1, 3);
        assert_eq!(t[..3], [BigInt::from(1), BigInt::from(4), BigInt::from(13)]);
        assert_eq!(oracle_dk(7, 0), BigInt::one());
    }

    #[test]
    fn series_matches_oracle() {
        for k in [0, 1, 2, 5] {
            let s = dk_series(k, 60, CoeffRing::Exact).unwrap();
            let t = oracle_dk_table(k, 59);
            for (n, x) in t.iter().enumerate() {
                assert_eq!(&s.coeff(n as i64).unwrap(), x, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn reduced_route_agrees_with_direct() {
        for (k, m) in [
            (16, 5),
            (61, 5),
            (8, 25),
            (76, 25),
            (125, 125),
            (58, 3125),
            (2, 27),
        ] {
            let a = dk_series(k, 400, CoeffRing::modular(m).unwrap()).unwrap();
            let b = dk_series_reduced(k, 400, m).unwrap();
            assert_eq!(a.first_difference(&b, 400).unwrap(), None, "k={k} m={m}");
        }
    }

    #[test]
    fn partition_values() {
        let p = partition_numbers(10);
        let v: Vec<i64> = p.iter().map(|x| i64::try_from(x).unwrap()).collect();
        assert_eq!(v, [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
        let s = partition_series(200, CoeffRing::modular(1000).unwrap()).unwrap();
        let exact = partition_numbers(199);
        assert_eq!(BigInt::from(s.residue(199).unwrap()), &exact[199] % 1000);
    }

    #[test]
    fn corrupted_family_fails() {
        let f = CongruenceFamily::single(8, 5, vec![2], 25).unwrap();
        let r = check_family(&f, 0, 500).unwrap();
        assert_eq!(r.verdict, Verdict::Counterexample);
        let x = r.counterexample.unwrap();
        let exact = oracle_dk(8, x.n as usize);
        assert_eq!(BigInt::from(x.residue), exact % 25);
        assert_ne!(x.residue, 0);
    }

    #[test]
    fn zero_tested_is_not_verified() {
        let f = CongruenceFamily::single(1, 125, vec![100], 5).unwrap();
        assert_eq!(
            check_family(&f, 0, 50).unwrap().verdict,
            Verdict::InsufficientPrecision
        );
    }

    #[test]
    fn lifting_with_j_zero_is_base() {
        let r = check_lifting(5, 1, 2, 1, 8, 0, 300, Execution::Sequential).unwrap();
        assert!(r.base.ok());
        assert!(r.lifted.is_none());
    }

    #[test]
    fn empty_pipeline_passes() {
        let cat = Catalog::builtin().unwrap();
        let s = PipelineScript {
            id: "empty".into(),
            claim: String::new(),
            start: "f1".into(),
            modulus: 5,
            params: BTreeMap::new(),
            steps: vec![],
        };
        let r = replay_pipeline(&s, &cat, 50).unwrap();
        assert!(r[0].passed);
        assert!(r[0].steps.is_empty());
    }

    #[test]
    fn multiply_and_support_steps() {
        let cat = Catalog::builtin().unwrap();
        let s = PipelineScript {
            id: "toy".into(),
            claim: String::new(),
            start: "1/f1".into(),
            modulus: 5,
            params: BTreeMap::new(),
            steps: vec![
                PipelineStep {
                    action: StepAction::Multiply {
                        expr: "f1^5".into(),
                    },
                    cite: String::new(),
                },
                PipelineStep {
                    action: StepAction::Compare {
                        identity: None,
                        expr: Some("f1^4".into()),
                    },
                    cite: String::new(),
                },
                PipelineStep {
                    action: StepAction::Multiply { expr: "f1".into() },
                    cite: String::new(),
                },
                PipelineStep {
                    action: StepAction::Support {
                        m: 5,
                        residues: vec![0],
                    },
                    cite: String::new(),
                },
            ],
        };
        let r = replay_pipeline(&s, &cat, 100).unwrap();
        assert!(r[0].passed, "{:?}", r[0]);
        assert_eq!(r[0].final_precision, 100);
    }

    #[test]
    fn scanner_threshold_and_parent_rule() {
        let cfg = ScanConfig {
            ks: vec![0],
            arg_moduli: vec![5, 25],
            max_power: 3,
            bound: 400,
            min_tested: 16,
        };
        let out = scan(&cfg, Execution::Sequential).unwrap();
        // p(5n+4) mod 5 and p(25n+24) mod 25, nothing else
        let labels: Vec<String> = out.iter().map(EmpiricalFamily::label).collect();
        assert_eq!(labels, ["d_0(5n+4) mod 5", "d_0(25n+24) mod 25"]);
        let cfg = ScanConfig { bound: 200, ..cfg };
        // only 8 terms of 25n+24 below 200
        assert_eq!(scan(&cfg, Execution::Sequential).unwrap().len(), 1);
    }
}
