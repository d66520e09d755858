use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qdissect::catalog::Catalog;
use qdissect::congruence::{
    check_families, check_lifting, dk_series, replay_all, scan, ScanConfig, Verdict,
};
use qdissect::{CoeffRing, Execution};

use crate::output::{CoeffRecord, ComboRecord, EmpiricalRecord, ExpectRecord, Format, Record};

#[derive(Debug, Parser)]
#[command(
    name = "qdissect",
    version,
    about = "q-series dissections and range checks of congruences for k-elongated plane partitions"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Plain, global = true)]
    pub format: Format,
    /// Directory with replacement catalog files.
    #[arg(long, global = true, env = "QDISSECT_CATALOG")]
    pub catalog: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print d_k(n), exactly or reduced.
    Coeff {
        k: u64,
        #[arg(required = true)]
        n: Vec<u64>,
        #[arg(long)]
        modulus: Option<u64>,
    },
    /// Check a catalog identity (or `all`) to a given precision.
    Identity {
        id: String,
        /// Overrides the entry's own precision.
        #[arg(long)]
        precision: Option<i64>,
        #[arg(long)]
        modulus: Option<u64>,
    },
    /// Check congruence families, lifting, or proof pipelines in range.
    Verify {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, default_value_t = 1)]
        c_max: u64,
        /// Largest argument tested.
        #[arg(long, default_value_t = 3000)]
        bound: u64,
        /// Starting precision of pipeline replays.
        #[arg(long, default_value_t = 600)]
        precision: i64,
        /// Lifting case `p:M:N:r:k`; repeatable.
        #[arg(long)]
        lift: Vec<String>,
        #[arg(long, default_value_t = 2)]
        j_max: u64,
    },
    /// Search d_k(A n + b) for power-of-5 divisibility.
    Scan {
        /// k values: ranges `a..b`, `a..=b` and single values, comma separated.
        #[arg(long, default_value = "0..125")]
        k: String,
        #[arg(long, value_delimiter = ',', default_value = "5,25,125")]
        arg_moduli: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        max_power: u32,
        #[arg(long, default_value_t = 3000)]
        bound: u64,
        #[arg(long, default_value_t = 16)]
        min_tested: u64,
        /// Recheck every reported family up to this argument.
        #[arg(long)]
        reverify: Option<u64>,
        /// Catalog group whose c = 0 members must be rediscovered.
        #[arg(long)]
        expect: Option<String>,
    },
    /// Evaluate the P(m,n) combinations and compare with their closed forms.
    Combo {
        #[arg(default_value = "all")]
        name: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    #[value(name = "thm1.2")]
    Thm12,
    #[value(name = "remark1.3")]
    Remark13,
    #[value(name = "thm1.4")]
    Thm14,
    #[value(name = "thm1.5")]
    Thm15,
    #[value(name = "thm1.6")]
    Thm16,
    #[value(name = "remark1.7")]
    Remark17,
    #[value(name = "eq1.1")]
    Eq11,
    #[value(name = "eq1.2")]
    Eq12,
    #[value(name = "d2-mod3")]
    D2Mod3,
    Erratum,
    #[value(name = "conj7.1")]
    Conj71,
    Lifting,
    Pipelines,
    All,
}

impl Target {
    fn group(self) -> Option<&'static str> {
        Some(match self {
            Target::Thm12 => "thm1.2",
            Target::Remark13 => "remark1.3",
            Target::Thm14 => "thm1.4",
            Target::Thm15 => "thm1.5",
            Target::Thm16 => "thm1.6",
            Target::Remark17 => "remark1.7",
            Target::Eq11 => "eq1.1",
            Target::Eq12 => "eq1.2",
            Target::D2Mod3 => "d2-mod3",
            Target::Erratum => "erratum",
            Target::Conj71 => "conj7.1",
            _ => return None,
        })
    }
}

const ALL_GROUPS: [Target; 10] = [
    Target::Thm12,
    Target::Remark13,
    Target::Thm14,
    Target::Thm15,
    Target::Thm16,
    Target::Remark17,
    Target::Eq11,
    Target::Eq12,
    Target::D2Mod3,
    Target::Erratum,
];

const DEFAULT_LIFTS: [&str; 2] = ["5:1:2:1:8", "5:2:1:8:16"];

/// 0 when everything held, 1 on a counterexample or failed check, 2 when a
/// check could not be decided at the available precision.
pub fn exit_status(records: &[Record]) -> i32 {
    let mut status = 0;
    for r in records {
        let s = match r {
            Record::Family(f) => match f.verdict {
                Verdict::VerifiedInRange => 0,
                Verdict::Counterexample => 1,
                Verdict::InsufficientPrecision => 2,
            },
            Record::Identity(i) => i32::from(!i.passed),
            Record::Pipeline(p) => i32::from(!p.passed),
            Record::Combo(c) => i32::from(!c.passed),
            Record::Empirical(e) => match e.reverify_verdict {
                Some(Verdict::Counterexample) => 1,
                Some(Verdict::InsufficientPrecision) => 2,
                _ => 0,
            },
            Record::Expect(x) => i32::from(!x.found),
            Record::Coeff(_) => 0,
        };
        status = match (status, s) {
            (1, _) | (_, 1) => 1,
            (a, b) => a.max(b),
        };
    }
    status
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn run(cli: &Cli) -> Result<Vec<Record>> {
    let catalog = Catalog::resolve(cli.catalog.as_deref()).context("loading catalog")?;
    let exec = exec(cli);
    match &cli.command {
        Command::Coeff { k, n, modulus } => coeff(*k, n, *modulus),
        Command::Identity {
            id,
            precision,
            modulus,
        } => {
            if precision.is_some_and(|p| p < 1) {
                bail!("--precision must be >= 1");
            }
            let entries: Vec<_> = if id == "all" {
                catalog.identities.iter().collect()
            } else {
                vec![catalog.identity(id)?]
            };
            let mut out = Vec::new();
            for e in entries {
                out.extend(
                    catalog
                        .check_identity(e, *precision, *modulus)?
                        .into_iter()
                        .map(Record::Identity),
                );
            }
            Ok(out)
        }
        Command::Verify {
            target,
            c_max,
            bound,
            precision,
            lift,
            j_max,
        } => {
            if *precision < 1 {
                bail!("--precision must be >= 1");
            }
            let mut out = Vec::new();
            let groups: Vec<Target> = match target {
                Target::All => ALL_GROUPS.to_vec(),
                t if t.group().is_some() => vec![*t],
                _ => vec![],
            };
            if !groups.is_empty() {
                let mut families = Vec::new();
                for g in groups {
                    let name = g.group().expect("group targets only");
                    let fs = catalog.families_in(name);
                    if fs.is_empty() {
                        bail!("catalog has no families in group `{name}`");
                    }
                    families.extend(fs);
                }
                out.extend(
                    check_families(&families, 0, *c_max, *bound, exec)?
                        .into_iter()
                        .map(Record::Family),
                );
            }
            if matches!(target, Target::Lifting | Target::All) {
                let cases: Vec<&str> = if lift.is_empty() {
                    DEFAULT_LIFTS.to_vec()
                } else {
                    lift.iter().map(String::as_str).collect()
                };
                for case in cases {
                    let v: Vec<u64> = case
                        .split(':')
                        .map(|x| x.trim().parse::<u64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| anyhow!("bad --lift `{case}`, expected p:M:N:r:k"))?;
                    let [p, m, n, r, k] = v[..] else {
                        bail!("bad --lift `{case}`, expected p:M:N:r:k");
                    };
                    let rep = check_lifting(p, m as u32, n as u32, r, k, *j_max, *bound, exec)?;
                    out.push(Record::Family(rep.base));
                    out.extend(rep.lifted.map(Record::Family));
                }
            }
            if matches!(target, Target::Pipelines | Target::All) {
                out.extend(
                    replay_all(&catalog, *precision, exec)?
                        .into_iter()
                        .map(Record::Pipeline),
                );
            }
            Ok(out)
        }
        Command::Scan {
            k,
            arg_moduli,
            max_power,
            bound,
            min_tested,
            reverify,
            expect,
        } => {
            let cfg = ScanConfig {
                ks: parse_k_set(k)?,
                arg_moduli: arg_moduli.clone(),
                max_power: *max_power,
                bound: *bound,
                min_tested: *min_tested,
            };
            let found = scan(&cfg, exec)?;
            let rechecked = match reverify {
                Some(b) => {
                    let fams: Vec<_> = found.iter().map(|f| f.to_family()).collect();
                    Some(check_families(&fams, 0, 0, *b, exec)?)
                }
                None => None,
            };
            let mut out: Vec<Record> = found
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    Record::Empirical(EmpiricalRecord {
                        label: f.label(),
                        k: f.k,
                        arg_modulus: f.arg_modulus,
                        residues: f.residues.clone(),
                        modulus: f.modulus,
                        bound: f.bound,
                        tested: f.tested,
                        status: f.status.clone(),
                        reverify_bound: *reverify,
                        reverify_verdict: rechecked.as_ref().map(|r| r[i].verdict),
                    })
                })
                .collect();
            if let Some(group) = expect {
                let targets = catalog.families_in(group);
                if targets.is_empty() {
                    bail!("catalog has no families in group `{group}`");
                }
                for t in targets {
                    let k = t
                        .k_at(0)
                        .ok_or_else(|| anyhow!("`{}` is not a d_k family", t.label))?;
                    let found = t.arg_residues.iter().all(|&b| {
                        found
                            .iter()
                            .any(|f| f.implies(k, t.arg_modulus, b, t.modulus))
                    });
                    out.push(Record::Expect(ExpectRecord {
                        group: group.clone(),
                        family: t.label.clone(),
                        k,
                        found,
                    }));
                }
            }
            Ok(out)
        }
        Command::Combo { name } => {
            let names: Vec<&String> = if name == "all" {
                catalog.combos.keys().collect()
            } else {
                vec![name]
            };
            names
                .into_iter()
                .map(|n| {
                    let c = catalog.combo(n)?.check(n)?;
                    Ok(Record::Combo(ComboRecord {
                        passed: c.passed(),
                        name: c.name,
                        value: c.value.to_string(),
                        closed_form: c.closed_form,
                        l_form: c.l_form,
                        reduction: c.reduction,
                        l_reduction: c.l_reduction,
                        displayed_differs: c.displayed_differs,
                    }))
                })
                .collect()
        }
    }
}

fn coeff(k: u64, ns: &[u64], modulus: Option<u64>) -> Result<Vec<Record>> {
    let ring = match modulus {
        Some(m) => CoeffRing::modular(m)?,
        None => CoeffRing::Exact,
    };
    let top = *ns.iter().max().expect("clap requires one n");
    let s = dk_series(k, top as i64 + 1, ring)?;
    ns.iter()
        .map(|&n| {
            Ok(Record::Coeff(CoeffRecord {
                k,
                n,
                modulus,
                value: s.coeff(n as i64)?.to_string(),
            }))
        })
        .collect()
}

/// Parses `0..125`, `3..=7`, `58` and comma-separated mixtures.
pub fn parse_k_set(text: &str) -> Result<Vec<u64>> {
    let mut ks = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            ks.extend(a.parse::<u64>()?..=b.parse::<u64>()?);
        } else if let Some((a, b)) = part.split_once("..") {
            ks.extend(a.parse::<u64>()?..b.parse::<u64>()?);
        } else {
            ks.push(part.parse().with_context(|| format!("bad k `{part}`"))?);
        }
    }
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        bail!("empty k set `{text}`");
    }
    Ok(ks)
}
