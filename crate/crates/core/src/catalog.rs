//! Loading of the shipped data files: combos, identities, congruence families
//! and pipeline scripts.
//!
//! Every file has a built-in copy. A catalog directory may override any subset
//! of `combos.toml`, `identities.toml`, `families.toml` and `pipelines.toml`;
//! files it lacks fall back to the built-in ones.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::congruence::{CongruenceFamily, FamilyKind, PipelineScript};
use crate::error::{Error, Result};
use crate::expr::{parse, ParseEnv};
use crate::klaurent::{self, ComboEntry};
use crate::qfunctions::{Evaluator, SeriesExpr};
use crate::series::CoeffRing;

/// Environment variable naming a catalog directory.
pub const CATALOG_ENV: &str = "QDISSECT_CATALOG";

const COMBOS: &str = include_str!("../catalog/combos.toml");
const IDENTITIES: &str = include_str!("../catalog/identities.toml");
const FAMILIES: &str = include_str!("../catalog/families.toml");
const PIPELINES: &str = include_str!("../catalog/pipelines.toml");

pub type Params = BTreeMap<String, i64>;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
pub struct IdentityEntry {
    pub id: String,
    pub lhs: String,
    #[serde(default)]
    pub via: Vec<String>,
    pub rhs: String,
    pub modulus: Option<u64>,
    #[serde(default = "default_precision")]
    pub precision: i64,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<i64>>,
}

fn default_precision() -> i64 {
    600
}

impl IdentityEntry {
    /// `lhs`, the `via` forms, then `rhs`.
    pub fn forms(&self) -> Vec<&str> {
        std::iter::once(self.lhs.as_str())
            .chain(self.via.iter().map(String::as_str))
            .chain(std::iter::once(self.rhs.as_str()))
            .collect()
    }
}

/// Every assignment of the listed parameter values, in lexicographic order.
pub fn param_instances(params: &BTreeMap<String, Vec<i64>>) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for (name, values) in params {
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |&v| {
                    let mut p = base.clone();
                    p.insert(name.clone(), v);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn format_params(p: &Params) -> String {
    p.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// One link `forms[link] == forms[link+1]` of an identity chain.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LinkResult {
    pub link: usize,
    pub passed: bool,
    pub first_mismatch: Option<i64>,
}

/// Result of checking one parameter instance of an identity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct IdentityReport {
    pub id: String,
    pub params: Params,
    pub modulus: Option<u64>,
    pub precision: i64,
    pub links: Vec<LinkResult>,
    pub passed: bool,
}

#[derive(Debug, Deserialize)]
struct IdentityFile {
    #[serde(default)]
    macros: BTreeMap<String, String>,
    #[serde(default)]
    identity: Vec<IdentityEntry>,
}

#[derive(Debug, Deserialize)]
struct FamilyFile {
    #[serde(default)]
    family: Vec<FamilyRow>,
}

#[derive(Debug, Deserialize)]
struct ArgRule {
    multiplier: i64,
    target: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRow {
    group: String,
    label: String,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    k_modulus: u64,
    #[serde(default)]
    k_residue: u64,
    arg_modulus: u64,
    #[serde(default)]
    arg_residues: Vec<u64>,
    arg_rule: Option<ArgRule>,
    modulus: u64,
}

/// Solves `a*x == t (mod m)` for the unique `x` in `[0, m)`.
pub fn solve_linear(a: i64, t: i64, m: u64) -> Result<u64> {
    let mi = m as i64;
    let g = a.extended_gcd(&mi);
    if g.gcd != 1 {
        return Err(Error::Catalog(format!("{a} is not invertible modulo {m}")));
    }
    Ok((g.x * t).rem_euclid(mi) as u64)
}

impl FamilyRow {
    fn into_family(self) -> Result<CongruenceFamily> {
        let kind = match self.kind.as_deref() {
            None | Some("dk") => FamilyKind::Dk {
                k_modulus: self.k_modulus,
                k_residue: self.k_residue,
            },
            Some("partition") => FamilyKind::Partition,
            Some(other) => return Err(Error::Catalog(format!("family kind `{other}`"))),
        };
        let residues = match (&self.arg_rule, self.arg_residues.is_empty()) {
            (Some(r), true) => vec![solve_linear(r.multiplier, r.target, self.arg_modulus)?],
            (None, false) => self.arg_residues,
            _ => {
                return Err(Error::Catalog(format!(
                    "family `{}` needs exactly one of arg_residues and arg_rule",
                    self.label
                )))
            }
        };
        CongruenceFamily::new(
            &self.group,
            &self.label,
            kind,
            self.arg_modulus,
            residues,
            self.modulus,
        )
    }
}

#[derive(Debug, Deserialize)]
struct PipelineFile {
    #[serde(default)]
    pipeline: Vec<PipelineScript>,
}

#[derive(Clone, Debug)]
pub struct Catalog {
    pub combos: BTreeMap<String, ComboEntry>,
    pub macros: BTreeMap<String, String>,
    pub identities: Vec<IdentityEntry>,
    pub families: Vec<CongruenceFamily>,
    pub pipelines: Vec<PipelineScript>,
    pub source: Option<PathBuf>,
}

impl Catalog {
    pub fn builtin() -> Result<Catalog> {
        Catalog::from_texts(COMBOS, IDENTITIES, FAMILIES, PIPELINES, None)
    }

    /// Reads overrides from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Catalog> {
        if !dir.is_dir() {
            return Err(Error::Catalog(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let read = |name: &str, fallback: &'static str| -> Result<String> {
            let path = dir.join(name);
            if path.exists() {
                fs::read_to_string(&path)
                    .map_err(|e| Error::Catalog(format!("{}: {e}", path.display())))
            } else {
                Ok(fallback.to_string())
            }
        };
        Catalog::from_texts(
            &read("combos.toml", COMBOS)?,
            &read("identities.toml", IDENTITIES)?,
            &read("families.toml", FAMILIES)?,
            &read("pipelines.toml", PIPELINES)?,
            Some(dir.to_path_buf()),
        )
    }

    /// `dir` if given, else the directory in [`CATALOG_ENV`], else built-in.
    pub fn resolve(dir: Option<&Path>) -> Result<Catalog> {
        match dir {
            Some(d) => Catalog::load_dir(d),
            None => match std::env::var_os(CATALOG_ENV) {
                Some(d) if !d.is_empty() => Catalog::load_dir(Path::new(&d)),
                _ => Catalog::builtin(),
            },
        }
    }

    fn from_texts(
        combos: &str,
        identities: &str,
        families: &str,
        pipelines: &str,
        source: Option<PathBuf>,
    ) -> Result<Catalog> {
        let combos = klaurent::parse_combo_file(combos)?;
        let ids: IdentityFile =
            toml::from_str(identities).map_err(|e| Error::Catalog(format!("identities: {e}")))?;
        let fams: FamilyFile =
            toml::from_str(families).map_err(|e| Error::Catalog(format!("families: {e}")))?;
        let pipes: PipelineFile =
            toml::from_str(pipelines).map_err(|e| Error::Catalog(format!("pipelines: {e}")))?;
        let mut seen = std::collections::BTreeSet::new();
        for e in &ids.identity {
            if !seen.insert(e.id.clone()) {
                return Err(Error::Catalog(format!("duplicate identity id `{}`", e.id)));
            }
        }
        let families = fams
            .family
            .into_iter()
            .map(FamilyRow::into_family)
            .collect::<Result<Vec<_>>>()?;
        Ok(Catalog {
            combos,
            macros: ids.macros,
            identities: ids.identity,
            families,
            pipelines: pipes.pipeline,
            source,
        })
    }

    /// Macros plus the combos, with `params` bound as integers.
    pub fn parse_env(&self, params: &Params) -> ParseEnv {
        let mut env = ParseEnv::default();
        for (name, def) in &self.combos {
            env = env.with_macro(name, &def.definition);
        }
        for (name, text) in &self.macros {
            env = env.with_macro(name, text);
        }
        for (name, v) in params {
            env = env.with_int(name, *v);
        }
        env
    }

    pub fn expr(&self, text: &str, params: &Params) -> Result<SeriesExpr> {
        Ok(SeriesExpr::from_ast(&parse(text, &self.parse_env(params))?)?.simplify())
    }

    pub fn identity(&self, id: &str) -> Result<&IdentityEntry> {
        self.identities
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::Unknown {
                kind: "identity",
                name: id.to_string(),
            })
    }

    pub fn combo(&self, name: &str) -> Result<&ComboEntry> {
        self.combos.get(name).ok_or_else(|| Error::Unknown {
            kind: "combo",
            name: name.to_string(),
        })
    }

    pub fn pipeline(&self, id: &str) -> Result<&PipelineScript> {
        self.pipelines
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::Unknown {
                kind: "pipeline",
                name: id.to_string(),
            })
    }

    pub fn families_in(&self, group: &str) -> Vec<CongruenceFamily> {
        self.families
            .iter()
            .filter(|f| f.group == group)
            .cloned()
            .collect()
    }

    /// Checks every link of `entry` for each parameter instance. `precision`
    /// and `modulus` override the entry's own values.
    pub fn check_identity(
        &self,
        entry: &IdentityEntry,
        precision: Option<i64>,
        modulus: Option<u64>,
    ) -> Result<Vec<IdentityReport>> {
        let n = precision.unwrap_or(entry.precision);
        if n < 1 {
            return Err(Error::InvalidArgument(
                "identity precision must be >= 1".into(),
            ));
        }
        let modulus = modulus.or(entry.modulus);
        let ring = match modulus {
            Some(m) => CoeffRing::modular(m)?,
            None => CoeffRing::Exact,
        };
        let mut out = Vec::new();
        for params in param_instances(&entry.params) {
            let ev = Evaluator::new(ring);
            let mut series = Vec::new();
            for text in entry.forms() {
                series.push(ev.eval(&self.expr(text, &params)?, n)?);
            }
            let links = series
                .windows(2)
                .enumerate()
                .map(|(link, w)| {
                    let first_mismatch = w[0].first_difference(&w[1], n)?;
                    Ok(LinkResult {
                        link,
                        passed: first_mismatch.is_none(),
                        first_mismatch,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(IdentityReport {
                id: entry.id.clone(),
                passed: links.iter().all(|l| l.passed),
                params,
                modulus,
                precision: n,
                links,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_loads() {
        let c = Catalog::builtin().unwrap();
        assert_eq!(c.combos.len(), 6);
        assert_eq!(c.families_in("thm1.2").len(), 5);
        assert_eq!(c.families_in("thm1.4").len(), 25);
        assert_eq!(c.families_in("thm1.5").len(), 19);
        assert_eq!(c.families_in("remark1.3").len(), 7);
        assert_eq!(c.pipelines.len(), 9);
        assert!(c.identity("eq2.1").is_ok());
        assert!(matches!(c.identity("eq9.9"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn every_expression_parses() {
        let c = Catalog::builtin().unwrap();
        for e in &c.identities {
            for p in param_instances(&e.params) {
                for f in e.forms() {
                    c.expr(f, &p)
                        .unwrap_or_else(|err| panic!("{}: {f}: {err}", e.id));
                }
            }
        }
    }

    #[test]
    fn pipeline_citations_resolve() {
        let c = Catalog::builtin().unwrap();
        for p in &c.pipelines {
            for id in p.referenced_identities() {
                assert!(c.identity(id).is_ok(), "{}: {id}", p.id);
            }
        }
    }

    #[test]
    fn arg_rules_use_modular_inverses() {
        assert_eq!(solve_linear(4, 1, 5).unwrap(), 4);
        assert_eq!(solve_linear(4, 1, 25).unwrap(), 19);
        assert_eq!(solve_linear(4, 1, 125).unwrap(), 94);
        assert_eq!(solve_linear(8, 1, 9).unwrap(), 8);
        assert_eq!(solve_linear(24, 1, 25).unwrap(), 24);
        assert!(solve_linear(5, 1, 25).is_err());
        let c = Catalog::builtin().unwrap();
        let eq11 = c.families_in("eq1.1");
        assert_eq!(eq11[2].arg_residues, vec![94]);
        assert_eq!(eq11[2].modulus, 25);
    }

    #[test]
    fn params_expand_as_product() {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), vec![0, 1]);
        p.insert("b".to_string(), vec![5, 6, 7]);
        let all = param_instances(&p);
        assert_eq!(all.len(), 6);
        assert_eq!(format_params(&all[4]), "a=1,b=6");
        assert_eq!(param_instances(&BTreeMap::new()), vec![Params::new()]);
    }

    #[test]
    fn directory_overrides_only_present_files() {
        let dir = std::env::temp_dir().join(format!("qdissect-cat-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("identities.toml"),
            "[[identity]]\nid = \"same\"\nlhs = \"f1*f2\"\nrhs = \"f2*f1\"\nprecision = 50\n",
        )
        .unwrap();
        let c = Catalog::load_dir(&dir).unwrap();
        assert_eq!(c.identities.len(), 1);
        assert_eq!(c.families.len(), Catalog::builtin().unwrap().families.len());
        let r = c
            .check_identity(c.identity("same").unwrap(), None, None)
            .unwrap();
        assert!(r[0].passed);
        fs::remove_dir_all(&dir).unwrap();
    }
}
