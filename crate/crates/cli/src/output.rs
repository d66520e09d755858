//! Report records and their plain, JSON-lines and CSV renderings.
//!
//! JSON output is one object per line, tagged by `record`. CSV output is one
//! table per record kind; tables are separated by a blank line.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use qdissect::catalog::{format_params, IdentityReport, LinkResult, Params};
use qdissect::congruence::{
    Counterexample, PipelineReport, StepReport, Verdict, VerificationReport,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Plain,
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub k: u64,
    pub n: u64,
    pub modulus: Option<u64>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboRecord {
    pub name: String,
    pub value: String,
    pub closed_form: Option<bool>,
    pub l_form: Option<bool>,
    pub reduction: Option<bool>,
    pub l_reduction: Option<bool>,
    pub displayed_differs: Option<bool>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalRecord {
    pub label: String,
    pub k: u64,
    pub arg_modulus: u64,
    pub residues: Vec<u64>,
    pub modulus: u64,
    pub bound: u64,
    pub tested: u64,
    pub status: String,
    pub reverify_bound: Option<u64>,
    pub reverify_verdict: Option<Verdict>,
}

/// Whether a family of the expectation group was rediscovered by a scan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectRecord {
    pub group: String,
    pub family: String,
    pub k: u64,
    pub found: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Coeff(CoeffRecord),
    Identity(IdentityReport),
    Family(VerificationReport),
    Pipeline(PipelineReport),
    Combo(ComboRecord),
    Empirical(EmpiricalRecord),
    Expect(ExpectRecord),
}

impl Record {
    fn kind(&self) -> usize {
        match self {
            Record::Coeff(_) => 0,
            Record::Identity(_) => 1,
            Record::Family(_) => 2,
            Record::Pipeline(_) => 3,
            Record::Combo(_) => 4,
            Record::Empirical(_) => 5,
            Record::Expect(_) => 6,
        }
    }
}

pub fn render(records: &[Record], format: Format) -> Result<String> {
    match format {
        Format::Plain => Ok(render_plain(records)),
        Format::Json => {
            let mut out = String::new();
            for r in records {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
            Ok(out)
        }
        Format::Csv => render_csv(records),
    }
}

fn yes_no(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "-",
    }
}

fn render_plain(records: &[Record]) -> String {
    let mut out = String::new();
    let mut families = (0, 0);
    for r in records {
        match r {
            Record::Coeff(c) => {
                let _ = match c.modulus {
                    Some(m) => writeln!(out, "d_{}({}) == {} (mod {m})", c.k, c.n, c.value),
                    None => writeln!(out, "d_{}({}) = {}", c.k, c.n, c.value),
                };
            }
            Record::Identity(r) => {
                let who = if r.params.is_empty() {
                    r.id.clone()
                } else {
                    format!("{} [{}]", r.id, format_params(&r.params))
                };
                let ring = r
                    .modulus
                    .map_or("exact".to_string(), |m| format!("mod {m}"));
                match r.links.iter().find(|l| !l.passed) {
                    None => {
                        let _ = writeln!(out, "{who}: holds to q^{} ({ring})", r.precision);
                    }
                    Some(l) => {
                        let _ = writeln!(
                            out,
                            "{who}: forms {} and {} differ at q^{} ({ring})",
                            l.link + 1,
                            l.link + 2,
                            l.first_mismatch.unwrap_or_default()
                        );
                    }
                }
            }
            Record::Family(f) => {
                families.1 += 1;
                if f.ok() {
                    families.0 += 1;
                }
                let _ = writeln!(out, "{}", f.summary());
            }
            Record::Pipeline(p) => {
                let _ = writeln!(out, "{}", p.summary());
                for s in &p.steps {
                    let state = if s.passed { "ok" } else { "FAIL" };
                    let _ = writeln!(
                        out,
                        "  {:>2}. {state:<4} {} [{}] below q^{}",
                        s.index + 1,
                        s.action,
                        s.cite,
                        s.precision
                    );
                }
            }
            Record::Combo(c) => {
                let _ = writeln!(
                    out,
                    "{}: closed form {}, L-form {}, reduction {}, L-reduction {}{}",
                    c.name,
                    yes_no(c.closed_form),
                    yes_no(c.l_form),
                    yes_no(c.reduction),
                    yes_no(c.l_reduction),
                    match c.displayed_differs {
                        Some(true) => ", alternative display disagrees",
                        Some(false) => ", alternative display agrees",
                        None => "",
                    }
                );
                let _ = writeln!(out, "  = {}", c.value);
            }
            Record::Empirical(e) => {
                let _ = write!(
                    out,
                    "{} [{}; argument <= {}, {} coefficients per residue]",
                    e.label, e.status, e.bound, e.tested
                );
                if let (Some(b), Some(v)) = (e.reverify_bound, e.reverify_verdict) {
                    let _ = write!(out, " recheck to {b}: {v}");
                }
                out.push('\n');
            }
            Record::Expect(x) => {
                let state = if x.found { "rediscovered" } else { "NOT found" };
                let _ = writeln!(out, "{} {} at k = {}: {state}", x.group, x.family, x.k);
            }
        }
    }
    if families.1 > 1 {
        let _ = writeln!(
            out,
            "{} of {} families verified in range",
            families.0, families.1
        );
    }
    out
}

pub const FAMILY_HEADER: [&str; 11] = [
    "family-label",
    "k-pattern",
    "progression",
    "modulus",
    "c-range",
    "bound",
    "verdict",
    "counterexample",
    "group",
    "precision",
    "tested",
];

const PIPELINE_HEADER: [&str; 13] = [
    "pipeline",
    "params",
    "claim",
    "modulus",
    "start-precision",
    "final-precision",
    "step",
    "action",
    "cite",
    "passed",
    "precision",
    "first-bad",
    "detail",
];

const IDENTITY_HEADER: [&str; 7] = [
    "identity",
    "params",
    "modulus",
    "precision",
    "link",
    "passed",
    "first-mismatch",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), T::to_string)
}

fn counterexample_text(x: &Counterexample) -> String {
    format!("c={} k={} n={} residue={}", x.c, opt(&x.k), x.n, x.residue)
}

fn family_row(f: &VerificationReport) -> Vec<String> {
    vec![
        f.family.clone(),
        f.k_pattern.clone(),
        f.progression.clone(),
        f.modulus.to_string(),
        format!("{}..={}", f.c_range.0, f.c_range.1),
        f.bound.to_string(),
        f.verdict.to_string(),
        f.counterexample
            .as_ref()
            .map_or(String::new(), counterexample_text),
        f.group.clone(),
        f.precision_used.to_string(),
        f.tested.to_string(),
    ]
}

fn render_csv(records: &[Record]) -> Result<String> {
    let mut sections: Vec<(usize, csv::Writer<Vec<u8>>)> = Vec::new();
    for r in records {
        let kind = r.kind();
        if sections.last().is_none_or(|(k, _)| *k != kind) {
            let mut w = csv::Writer::from_writer(Vec::new());
            match r {
                Record::Coeff(_) => w.write_record(["k", "n", "modulus", "value"])?,
                Record::Identity(_) => w.write_record(IDENTITY_HEADER)?,
                Record::Family(_) => w.write_record(FAMILY_HEADER)?,
                Record::Pipeline(_) => w.write_record(PIPELINE_HEADER)?,
                Record::Combo(_) => w.write_record([
                    "combo",
                    "passed",
                    "closed-form",
                    "l-form",
                    "reduction",
                    "l-reduction",
                    "displayed-differs",
                    "value",
                ])?,
                Record::Empirical(_) => w.write_record([
                    "family-label",
                    "k",
                    "arg-modulus",
                    "residues",
                    "modulus",
                    "bound",
                    "tested",
                    "status",
                    "reverify-bound",
                    "reverify-verdict",
                ])?,
                Record::Expect(_) => w.write_record(["group", "family-label", "k", "found"])?,
            }
            sections.push((kind, w));
        }
        let w = &mut sections.last_mut().expect("pushed above").1;
        match r {
            Record::Coeff(c) => w.write_record([
                c.k.to_string(),
                c.n.to_string(),
                opt(&c.modulus),
                c.value.clone(),
            ])?,
            Record::Identity(r) => {
                for l in &r.links {
                    w.write_record([
                        r.id.clone(),
                        format_params(&r.params),
                        opt(&r.modulus),
                        r.precision.to_string(),
                        l.link.to_string(),
                        l.passed.to_string(),
                        opt(&l.first_mismatch),
                    ])?;
                }
            }
            Record::Family(f) => w.write_record(family_row(f))?,
            Record::Pipeline(p) => {
                for s in &p.steps {
                    w.write_record([
                        p.id.clone(),
                        format_params(&p.params),
                        p.claim.clone(),
                        p.modulus.to_string(),
                        p.start_precision.to_string(),
                        p.final_precision.to_string(),
                        s.index.to_string(),
                        s.action.clone(),
                        s.cite.clone(),
                        s.passed.to_string(),
                        s.precision.to_string(),
                        opt(&s.first_bad),
                        opt(&s.detail),
                    ])?;
                }
            }
            Record::Combo(c) => w.write_record([
                c.name.clone(),
                c.passed.to_string(),
                opt(&c.closed_form),
                opt(&c.l_form),
                opt(&c.reduction),
                opt(&c.l_reduction),
                opt(&c.displayed_differs),
                c.value.clone(),
            ])?,
            Record::Empirical(e) => w.write_record([
                e.label.clone(),
                e.k.to_string(),
                e.arg_modulus.to_string(),
                join(&e.residues),
                e.modulus.to_string(),
                e.bound.to_string(),
                e.tested.to_string(),
                e.status.clone(),
                opt(&e.reverify_bound),
                opt(&e.reverify_verdict),
            ])?,
            Record::Expect(x) => w.write_record([
                x.group.clone(),
                x.family.clone(),
                x.k.to_string(),
                x.found.to_string(),
            ])?,
        }
    }
    let mut out = String::new();
    for (i, (_, w)) in sections.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&String::from_utf8(w.into_inner()?)?);
    }
    Ok(out)
}

fn join(xs: &[u64]) -> String {
    xs.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_json_lines(text: &str) -> Result<Vec<Record>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("bad JSON line `{l}`")))
        .collect()
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|e| anyhow!("`{s}`: {e}"))
    }
}

fn parse_counterexample(s: &str) -> Result<Option<Counterexample>> {
    if s.is_empty() {
        return Ok(None);
    }
    let mut fields = std::collections::HashMap::new();
    for part in s.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad counterexample `{s}`"))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| anyhow!("counterexample lacks `{k}`"))
    };
    Ok(Some(Counterexample {
        c: get("c")?.parse()?,
        k: parse_opt(get("k")?)?,
        n: get("n")?.parse()?,
        residue: get("residue")?.parse()?,
    }))
}

/// Reads the family table written by `--format csv` back into reports.
/// `wall_time` is never written and comes back as `None`.
pub fn parse_family_csv(text: &str) -> Result<Vec<VerificationReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != FAMILY_HEADER {
        bail!("not a family table: {header:?}");
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let (lo, hi) = row[4]
            .split_once("..=")
            .ok_or_else(|| anyhow!("bad c-range `{}`", &row[4]))?;
        out.push(VerificationReport {
            family: row[0].to_string(),
            k_pattern: row[1].to_string(),
            progression: row[2].to_string(),
            modulus: row[3].parse()?,
            c_range: (lo.parse()?, hi.parse()?),
            bound: row[5].parse()?,
            verdict: row[6].parse()?,
            counterexample: parse_counterexample(&row[7])?,
            group: row[8].to_string(),
            precision_used: row[9].parse()?,
            tested: row[10].parse()?,
            wall_time: None,
        });
    }
    Ok(out)
}

/// Reads the pipeline table back. Reports whose script had no steps are not
/// representable in this table.
pub fn parse_pipeline_csv(text: &str) -> Result<Vec<PipelineReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PIPELINE_HEADER {
        bail!("not a pipeline table: {header:?}");
    }
    let mut out: Vec<PipelineReport> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let params = parse_params(&row[1])?;
        let step = StepReport {
            index: row[6].parse()?,
            action: row[7].to_string(),
            cite: row[8].to_string(),
            passed: row[9].parse()?,
            precision: row[10].parse()?,
            first_bad: parse_opt(&row[11])?,
            detail: parse_opt(&row[12])?,
        };
        let same = out
            .last()
            .is_some_and(|p| p.id == row[0] && p.params == params && step.index > 0);
        if !same {
            out.push(PipelineReport {
                id: row[0].to_string(),
                claim: row[2].to_string(),
                params,
                modulus: row[3].parse()?,
                start_precision: row[4].parse()?,
                final_precision: row[5].parse()?,
                steps: Vec::new(),
                passed: true,
            });
        }
        let p = out.last_mut().expect("pushed above");
        p.passed &= step.passed;
        p.steps.push(step);
    }
    Ok(out)
}

/// Reads the identity table back, one report per (id, params).
pub fn parse_identity_csv(text: &str) -> Result<Vec<IdentityReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != IDENTITY_HEADER {
        bail!("not an identity table: {header:?}");
    }
    let mut out: Vec<IdentityReport> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let params = parse_params(&row[1])?;
        let link = LinkResult {
            link: row[4].parse()?,
            passed: row[5].parse()?,
            first_mismatch: parse_opt(&row[6])?,
        };
        if !(out
            .last()
            .is_some_and(|r| r.id == row[0] && r.params == params && link.link > 0))
        {
            out.push(IdentityReport {
                id: row[0].to_string(),
                params,
                modulus: parse_opt(&row[2])?,
                precision: row[3].parse()?,
                links: Vec::new(),
                passed: true,
            });
        }
        let r = out.last_mut().expect("pushed above");
        r.passed &= link.passed;
        r.links.push(link);
    }
    Ok(out)
}

fn parse_params(s: &str) -> Result<Params> {
    let mut p = Params::new();
    for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad params `{s}`"))?;
        p.insert(k.trim().to_string(), v.trim().parse()?);
    }
    Ok(p)
}

/// Splits multi-table CSV output into its tables.
pub fn csv_sections(text: &str) -> Vec<String> {
    text.split("\n\n")
        .filter(|s| !s.trim().is_empty())
        .map(|s| format!("{}\n", s.trim_end()))
        .collect()
}
