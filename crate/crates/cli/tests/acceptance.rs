//! One line per acceptance criterion. Exits nonzero if any criterion fails
//! other than the documented ones, or if a documented failure changes shape.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use qdissect::catalog::Catalog;
use qdissect::congruence::{
    check_families, check_lifting, dk_series, oracle_dk_table, partition_series, replay_all,
    CongruenceFamily, VerificationReport,
};
use qdissect::klaurent::{eval_at_k, p_poly, p_series};
use qdissect::{CoeffRing, Execution, PIndex};
use qdissect_cli::output::{parse_json_lines, Record};

/// Printed families of the thm1.4/thm1.5 groups that fail in range.
const KNOWN_BAD: [&str; 4] = [
    "d_{125c+104}(125n+95,120) mod 5",
    "d_{125c+106}(125n+93) mod 25",
    "d_{125c+67}(125n+107) mod 25",
    "d_{125c+99}(125n+75,100) mod 25",
];

/// Emitted by the default scan but contradicted beyond 3000.
const KNOWN_SCAN_BAD: [&str; 1] = ["d_124(125n+11,50,75,94,96,106,114,124) mod 5"];

struct Outcome {
    passed: bool,
    detail: String,
    /// Set when a failure matches the documented discrepancy exactly.
    documented: bool,
}

fn ok(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
        documented: false,
    }
}

fn identities(cat: &Catalog, ids: &[&str], n: i64) -> (bool, Vec<String>) {
    let mut all = true;
    let mut notes = Vec::new();
    for id in ids {
        let e = cat.identity(id).expect("catalog id");
        assert!(e.modulus.is_none(), "{id} must be exact");
        for r in cat.check_identity(e, Some(n), None).expect("evaluates") {
            all &= r.passed;
            if !r.passed {
                notes.push(format!(
                    "{id} differs at q^{:?}",
                    r.links.iter().find_map(|l| l.first_mismatch)
                ));
            }
        }
    }
    (all, notes)
}

fn families(cat: &Catalog, group: &str, c_max: u64, bound: u64) -> Vec<VerificationReport> {
    check_families(
        &cat.families_in(group),
        0,
        c_max,
        bound,
        Execution::Parallel,
    )
    .expect("family check runs")
}

fn failures(reports: &[VerificationReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.ok())
        .map(VerificationReport::summary)
        .collect()
}

fn c1(cat: &Catalog) -> Outcome {
    let t = Instant::now();
    let (good, notes) = identities(cat, &["eq2.1", "eq2.2"], 1000);
    let el = t.elapsed();
    ok(
        good && el < Duration::from_secs(30),
        format!(
            "exact to q^1000 in {:.2}s {}",
            el.as_secs_f64(),
            notes.join("; ")
        ),
    )
}

fn c2(cat: &Catalog) -> Outcome {
    let (good, notes) = identities(cat, &["eq2.3", "eq2.4", "eq2.4a"], 1000);
    ok(
        good,
        format!("K+1, K-4, K = L+4 exact to q^1000 {}", notes.join("; ")),
    )
}

fn c3() -> Outcome {
    let mut bad = Vec::new();
    for m in 0..=5 {
        for n in -6..=6 {
            let idx = PIndex::new(m, n).unwrap();
            let a = eval_at_k(&p_poly(idx).unwrap(), 300, CoeffRing::Exact).unwrap();
            let b = p_series(idx, 300, CoeffRing::Exact).unwrap();
            if a.first_difference(&b, 300).unwrap().is_some() {
                bad.push(format!("P({m},{n})"));
            }
        }
    }
    ok(
        bad.is_empty(),
        format!("78 indices to q^300 {}", bad.join(" ")),
    )
}

fn c4(cat: &Catalog) -> Outcome {
    let required: [(&str, &[&str]); 6] = [
        ("A", &["closed", "red"]),
        ("B", &["closed"]),
        ("C", &["closed"]),
        ("D", &["closed", "lform", "lred"]),
        ("E", &["closed", "red"]),
        ("F", &["closed", "lform", "lred"]),
    ];
    let mut bad = Vec::new();
    for (name, parts) in required {
        let c = cat.combo(name).unwrap().check(name).unwrap();
        for p in parts {
            let v = match *p {
                "closed" => c.closed_form,
                "lform" => c.l_form,
                "red" => c.reduction,
                _ => c.l_reduction,
            };
            if v != Some(true) {
                bad.push(format!("{name}:{p}"));
            }
        }
    }
    ok(
        bad.is_empty(),
        format!(
            "A-F closed forms, D/F L-forms, mod 5/25 reductions {}",
            bad.join(" ")
        ),
    )
}

fn c5(cat: &Catalog) -> Outcome {
    let t = Instant::now();
    let r = families(cat, "thm1.2", 2, 3000);
    let el = t.elapsed();
    let f = failures(&r);
    ok(
        f.is_empty() && r.len() == 5 && el < Duration::from_secs(300),
        format!(
            "{} families, c <= 2, argument <= 3000, {:.2}s {}",
            r.len(),
            el.as_secs_f64(),
            f.join("; ")
        ),
    )
}

fn c6(cat: &Catalog) -> Outcome {
    let mut r = families(cat, "thm1.4", 1, 3000);
    r.extend(families(cat, "thm1.5", 1, 3000));
    let bad: Vec<&str> = r
        .iter()
        .filter(|x| !x.ok())
        .map(|x| x.family.as_str())
        .collect();
    let erratum = families(cat, "erratum", 1, 3000);
    let erratum_ok = erratum.iter().all(VerificationReport::ok);
    let mut o = ok(
        bad.is_empty(),
        format!(
            "{} families, c <= 1, argument <= 3000; {} fail: {}; corrected readings {}",
            r.len(),
            bad.len(),
            failures(&r).join("; "),
            if erratum_ok { "hold" } else { "FAIL" }
        ),
    );
    o.documented = bad == KNOWN_BAD && erratum_ok && r.len() == 44;
    o
}

fn c7(cat: &Catalog) -> Outcome {
    let r = families(cat, "thm1.6", 1, 3000);
    let f = failures(&r);
    ok(
        f.is_empty() && r.len() == 1,
        format!(
            "d_{{125c}}(125n+74,99,124) mod 125, c <= 1 {}",
            f.join("; ")
        ),
    )
}

fn c8(cat: &Catalog) -> Outcome {
    let reports = replay_all(cat, 600, Execution::Parallel).unwrap();
    let mut bad: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.summary())
        .collect();
    let cites: Vec<&str> = reports
        .iter()
        .flat_map(|r| r.steps.iter().filter(|s| s.passed).map(|s| s.cite.as_str()))
        .collect();
    for want in ["eq3.7", "eq3.8", "eq4.10", "eq5.7", "eq6.3", "eq6.4"] {
        if !cites.contains(&want) {
            bad.push(format!("no passing step for {want}"));
        }
    }
    let support = reports.iter().any(|r| {
        r.steps
            .iter()
            .any(|s| s.passed && s.cite == "eq4.10" && s.action.starts_with("supported on 10n"))
    });
    if !support {
        bad.push("eq4.10 support step missing".into());
    }
    let steps: usize = reports.iter().map(|r| r.steps.len()).sum();
    ok(
        bad.is_empty(),
        format!(
            "{} replays, {steps} steps at N = 600 {}",
            reports.len(),
            bad.join("; ")
        ),
    )
}

fn c9(cat: &Catalog) -> Outcome {
    let find = |group: &str, modulus: u64| -> CongruenceFamily {
        cat.families_in(group)
            .into_iter()
            .find(|f| f.modulus == modulus)
            .expect("catalog family")
    };
    let mut r =
        check_families(&[find("eq1.2", 5)], 0, 0, 5 * 200 + 4, Execution::Parallel).unwrap();
    r.extend(
        check_families(
            &[find("eq1.2", 25)],
            0,
            0,
            25 * 100 + 24,
            Execution::Parallel,
        )
        .unwrap(),
    );
    r.extend(families(cat, "eq1.1", 0, 3000));
    r.extend(families(cat, "d2-mod3", 0, 2000));
    let f = failures(&r);
    ok(
        f.is_empty() && r.len() == 7,
        format!(
            "p(5n+4), p(25n+24), d_5 desk cases k=1,2,3, d_2 mod 3 and 27 {}",
            f.join("; ")
        ),
    )
}

fn c10() -> Outcome {
    let mut bad = Vec::new();
    for (m, n, r, k) in [(1, 2, 1, 8), (2, 1, 8, 16)] {
        let rep = check_lifting(5, m, n, r, k, 2, 1000, Execution::Parallel).unwrap();
        if !rep.ok() || rep.lifted.is_none() {
            bad.push(format!("k={k}"));
        }
    }
    ok(
        bad.is_empty(),
        format!(
            "d_8(5n+1) mod 25 and d_16(25n+8) mod 5 lifted j = 1,2 {}",
            bad.join(" ")
        ),
    )
}

fn c11() -> Outcome {
    let mut bad = Vec::new();
    for k in 0..=10 {
        let s = dk_series(k, 201, CoeffRing::Exact).unwrap();
        let want = oracle_dk_table(k, 200);
        if (0..=200).any(|n| s.coeff(n).unwrap() != want[n as usize]) {
            bad.push(format!("k={k}"));
        }
    }
    fn count(n: u32, max: u32) -> u64 {
        if n == 0 {
            1
        } else {
            (1..=max.min(n)).map(|p| count(n - p, p)).sum()
        }
    }
    let p = partition_series(21, CoeffRing::Exact).unwrap();
    for n in 0..=20u32 {
        if p.coeff(n as i64).unwrap().to_string() != count(n, n).to_string() {
            bad.push(format!("p({n})"));
        }
    }
    ok(
        bad.is_empty(),
        format!("k <= 10, n <= 200; p(n) for n <= 20 {}", bad.join(" ")),
    )
}

fn c12() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_qdissect"))
        .args([
            "scan",
            "--expect",
            "conj7.1",
            "--reverify",
            "5000",
            "--format",
            "json",
        ])
        .env_remove("QDISSECT_CATALOG")
        .output()
        .expect("binary runs");
    let recs = parse_json_lines(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let mut emitted = 0;
    let mut unsound = Vec::new();
    let mut missing = Vec::new();
    for r in &recs {
        match r {
            Record::Empirical(e) => {
                emitted += 1;
                let held = e
                    .reverify_verdict
                    .is_some_and(|v| v.to_string() == "verified-in-range");
                if e.status != "empirical" || !held {
                    unsound.push(e.label.clone());
                }
            }
            Record::Expect(x) if !x.found => missing.push(x.family.clone()),
            _ => {}
        }
    }
    let expected = recs
        .iter()
        .filter(|r| matches!(r, Record::Expect(_)))
        .count();
    let reproduced = missing.is_empty() && expected == 8;
    let mut o = ok(
        out.status.success() && reproduced && unsound.is_empty() && emitted > 0,
        format!(
            "{}/8 conjectured families rediscovered at c = 0; {}/{emitted} emitted families hold to 5000; fails recheck: {}",
            expected - missing.len(),
            emitted - unsound.len(),
            if unsound.is_empty() { "none".to_string() } else { unsound.join("; ") }
        ),
    );
    o.documented = reproduced && unsound == KNOWN_SCAN_BAD;
    o
}

fn main() -> ExitCode {
    let cat = Catalog::builtin().expect("built-in catalog");
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("dissection identities", Box::new(|| c1(&cat))),
        ("parameter identities", Box::new(|| c2(&cat))),
        ("P-algebra consistency", Box::new(c3)),
        ("closed forms", Box::new(|| c4(&cat))),
        ("thm1.2 families", Box::new(|| c5(&cat))),
        ("thm1.4 and thm1.5 families", Box::new(|| c6(&cat))),
        ("thm1.6 family", Box::new(|| c7(&cat))),
        ("proof replay", Box::new(|| c8(&cat))),
        ("classical sanity", Box::new(|| c9(&cat))),
        ("lifting", Box::new(c10)),
        ("oracle equivalence", Box::new(c11)),
        ("scanner reproduction", Box::new(c12)),
    ];
    let mut unexpected = 0;
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let tag = match (o.passed, o.documented) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        if !o.passed {
            failed += 1;
            if !o.documented {
                unexpected += 1;
            }
        }
        println!(
            "criterion {:>2} {tag}: {name}: {} [{:.2}s]",
            i + 1,
            o.detail.trim_end(),
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass; {failed} fail ({unexpected} unexpected)",
        criteria.len() - failed,
        criteria.len()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
