//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Counts are compared exactly; the only
//! numeric tolerance is the runtime bound of criterion 1.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chord_spectra::cutjoin::{recursion_check_all, regrade_for_full, solve_connected, solve_full, sum_parts, DeltaConvention, TableSet};
use chord_spectra::oracle::count_table;
use chord_spectra::series::{as_integer_count, extract_table, Series, Truncation};
use chord_spectra::spectra::{validate_class, BackboneSpectrum, BoundaryClass, CountTable, CyclicPolicy, Mode};
use num::{BigInt, BigRational, BigUint, Zero};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

const POLICY: CyclicPolicy = CyclicPolicy::RotationAndReflection;
const WEIGHT: u64 = 8;
const B_MAX: u32 = 2;
const RUNTIME_BOUND: Duration = Duration::from_secs(120);
const CANONICAL_CASES: u32 = 10_000;

/// Sectors with one or two backbones, no empty backbone, at most `WEIGHT` vertices.
fn sectors() -> Vec<BackboneSpectrum> {
    let w = WEIGHT as usize;
    let mut out: Vec<BackboneSpectrum> = (1..=w).map(BackboneSpectrum::single).collect();
    for a in 1..=w {
        for c in a..=w - a {
            out.push(BackboneSpectrum::from_sizes(&[a, c]));
        }
    }
    out
}

fn trunc(k_max: u32) -> Truncation {
    Truncation::new(k_max, B_MAX, WEIGHT as u32).with_weight_max(WEIGHT)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Equivalence {
    oracle: TableSet,
    recursion: TableSet,
    compared: usize,
    differing: Vec<String>,
    elapsed: Duration,
}

fn equivalence(mode: Mode, k_max: u32) -> Result<Equivalence, String> {
    let start = Instant::now();
    let h = solve_connected(mode, POLICY, trunc(k_max), None).map_err(|e| e.to_string())?;
    let mut oracle = TableSet::new(mode, POLICY);
    let mut recursion = TableSet::new(mode, POLICY);
    let mut differing = Vec::new();
    let mut compared = 0;
    for b in sectors() {
        for k in 0..=k_max.min((b.vertices() / 2) as u32) {
            let o = count_table(&b, k, mode, true, POLICY).map_err(|e| e.to_string())?;
            let r = extract_table(&h[k as usize], mode, k, &b).map_err(|e| e.to_string())?;
            if o != r {
                differing.push(format!("b={b} k={k}"));
            }
            compared += 1;
            oracle.insert(o).map_err(|e| e.to_string())?;
            recursion.insert(r).map_err(|e| e.to_string())?;
        }
    }
    Ok(Equivalence { oracle, recursion, compared, differing, elapsed: start.elapsed() })
}

fn criterion_equivalence(e: &Result<Equivalence, String>, bound: Option<Duration>) -> Outcome {
    match e {
        Err(msg) => outcome(false, msg.clone()),
        Ok(e) => {
            let in_time = bound.map_or(true, |b| e.elapsed <= b);
            let timing = bound.map_or(String::new(), |b| format!(", {:.1?} (bound {:?})", e.elapsed, b));
            outcome(
                e.differing.is_empty() && in_time,
                format!("{} tables, {} differ{timing} {:?}", e.compared, e.differing.len(), e.differing),
            )
        }
    }
}

fn criterion_recursion(sets: &[&Result<Equivalence, String>]) -> Outcome {
    let mut checked = 0;
    for e in sets {
        let Ok(e) = e else {
            return outcome(false, "tables unavailable");
        };
        match recursion_check_all(&e.oracle, DeltaConvention::Corrected) {
            Ok(m) if m.is_empty() => checked += e.oracle.tables().filter(|t| t.k > 0).count(),
            Ok(m) => return outcome(false, format!("{} mismatches, first: {}", m.len(), m[0])),
            Err(err) => return outcome(false, err.to_string()),
        }
    }
    outcome(true, format!("{checked} (k-1, k) oracle pairs, no mismatches"))
}

/// `b!·coefficient` of every term must be a nonnegative integer.
fn integral_terms(s: &Series) -> Result<usize, String> {
    for (m, c) in s.terms() {
        let b: BigUint = (1..=m.t_degree()).map(BigUint::from).product();
        as_integer_count(&(c * BigRational::from_integer(BigInt::from(b))), m).map_err(|e| e.to_string())?;
    }
    Ok(s.len())
}

fn criterion_exponential(integral: &mut Vec<String>) -> Outcome {
    let mut notes = Vec::new();
    for mode in [Mode::Oriented, Mode::NonOriented] {
        let mut run = || -> Result<String, String> {
            let h = sum_parts(&solve_connected(mode, POLICY, trunc(4), None).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let z = sum_parts(&solve_full(mode, POLICY, trunc(4)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let e = h.exp().map_err(|e| e.to_string())?;
            integral.push(format!("H {mode}: {} terms", integral_terms(&h)?));
            integral.push(format!("Z {mode}: {} terms", integral_terms(&z)?));
            let at_one = e.at_x_one().sub(&z.at_x_one()).map_err(|e| e.to_string())?.len();
            let regraded = regrade_for_full(&h).exp().map_err(|e| e.to_string())?.sub(&z).map_err(|e| e.to_string())?.len();
            if at_one + regraded > 0 {
                return Err(format!("{mode}: {at_one} terms differ at x=1, {regraded} after regrading"));
            }
            Ok(format!("{mode}: {} terms equal", z.len()))
        };
        match run() {
            Ok(s) => notes.push(s),
            Err(s) => return outcome(false, s),
        }
    }
    outcome(true, format!("{} (at x=1 and x-resolved with H regraded by x^(2b-2))", notes.join(", ")))
}

fn double_factorial(k: u32) -> BigUint {
    (1..=k).map(|i| BigUint::from(2 * i - 1)).product()
}

fn catalan(k: u32) -> BigUint {
    let num: BigUint = (k + 2..=2 * k).map(BigUint::from).product();
    let den: BigUint = (2..=k).map(BigUint::from).product();
    num / den
}

fn criterion_classical(integral: &mut Vec<String>) -> Outcome {
    let mut checks = 0;
    for mode in [Mode::Oriented, Mode::NonOriented] {
        let h = match solve_connected(mode, POLICY, Truncation::new(5, 1, 10), None) {
            Ok(h) => h,
            Err(e) => return outcome(false, e.to_string()),
        };
        for k in 1..=5u32 {
            let b = BackboneSpectrum::single(2 * k as usize);
            let tables: Vec<CountTable> = match (count_table(&b, k, mode, true, POLICY), extract_table(&h[k as usize], mode, k, &b)) {
                (Ok(o), Ok(r)) => vec![o, r],
                (Err(e), _) => return outcome(false, e.to_string()),
                (_, Err(e)) => return outcome(false, e.to_string()),
            };
            integral.push(format!("e_{} k={k} {mode}", 2 * k));
            for t in &tables {
                let total = t.total();
                let planar: BigUint = t.entries().filter(|(c, _)| c.euler_index == 0).map(|(_, n)| n.clone()).sum();
                let expected_total = match mode {
                    Mode::Oriented => double_factorial(k),
                    Mode::NonOriented => double_factorial(k) * BigUint::from(2u32).pow(k),
                };
                if total != expected_total || planar != catalan(k) {
                    return outcome(false, format!("{mode} k={k}: total {total} (want {expected_total}), genus 0 {planar}"));
                }
                checks += 1;
            }
        }
    }
    outcome(true, format!("{checks} tables: (2k-1)!!, Catalan(k), 2^k(2k-1)!! for k<=5"))
}

fn criterion_identities(sets: &[&Result<Equivalence, String>]) -> Outcome {
    let mut classes = 0;
    for e in sets {
        let Ok(e) = e else {
            return outcome(false, "tables unavailable");
        };
        for t in e.oracle.tables().chain(e.recursion.tables()) {
            for (c, _) in t.entries() {
                let v = validate_class(c);
                if !v.is_empty() {
                    return outcome(false, format!("{c:?}: {v:?}"));
                }
                classes += 1;
            }
        }
    }
    let mut runner = TestRunner::new(Config { cases: CANONICAL_CASES, failure_persistence: None, ..Config::default() });
    let strategy = proptest::collection::vec(0u32..5, 1..10);
    let result = runner.run(&strategy, |t| {
        for policy in [CyclicPolicy::RotationOnly, CyclicPolicy::RotationAndReflection] {
            let c = BoundaryClass::canonicalize(&t, policy).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for r in 0..t.len() {
                let rotated: Vec<u32> = t[r..].iter().chain(&t[..r]).copied().collect();
                if BoundaryClass::canonicalize(&rotated, policy).unwrap() != c {
                    return Err(TestCaseError::fail(format!("{t:?} rotation {r}")));
                }
            }
            if BoundaryClass::canonicalize(c.rep(), policy).unwrap() != c {
                return Err(TestCaseError::fail(format!("{t:?} not idempotent")));
            }
            let rev: Vec<u32> = t.iter().rev().copied().collect();
            let same = BoundaryClass::canonicalize(&rev, policy).unwrap() == c;
            if policy == CyclicPolicy::RotationAndReflection && !same {
                return Err(TestCaseError::fail(format!("{t:?} reflection")));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, format!("{classes} emitted classes valid, {CANONICAL_CASES} canonicalization cases")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_figure_one() -> Outcome {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/figure1.json");
    let out = match Command::new(env!("CARGO_BIN_EXE_chordspec")).arg("validate").arg("--class").arg(&fixture).output() {
        Ok(o) => o,
        Err(e) => return outcome(false, e.to_string()),
    };
    let text = String::from_utf8_lossy(&out.stdout);
    let pass = out.status.code() == Some(0)
        && text.contains("lengths 1:1 2:2 9:1")
        && text.contains("points 0:2 1:2")
        && text.trim_end().ends_with("valid");
    outcome(pass, format!("exit {:?}; {}", out.status.code(), text.lines().skip(1).collect::<Vec<_>>().join("; ")))
}

fn criterion_integrality(sets: &[&Result<Equivalence, String>], integral: &[String]) -> Outcome {
    // Extraction refuses non-integral coefficients, so reaching here with
    // every table present means each b!·coefficient was an integer.
    let mut tables = 0;
    for e in sets {
        match e {
            Ok(e) => tables += e.recursion.tables().count(),
            Err(msg) => return outcome(false, msg.clone()),
        }
    }
    let zero_free = sets.iter().all(|e| {
        e.as_ref().unwrap().recursion.tables().all(|t| t.entries().all(|(_, n)| !n.is_zero()))
    });
    outcome(zero_free, format!("{tables} extracted tables; series checked: {}", integral.join(", ")))
}

fn main() {
    let start = Instant::now();
    let oriented = equivalence(Mode::Oriented, 4);
    let non_oriented = equivalence(Mode::NonOriented, 3);
    let mut integral = Vec::new();
    let results = [
        ("1 oracle = recursion, oriented, V<=8, b<=2, k<=4", criterion_equivalence(&oriented, Some(RUNTIME_BOUND))),
        ("2 oracle = recursion, non-oriented, V<=8, b<=2, k<=3", criterion_equivalence(&non_oriented, None)),
        ("3 cut-and-join recursion on oracle tables", criterion_recursion(&[&oriented, &non_oriented])),
        ("4 exp(H) = Z through k=4, b<=2", criterion_exponential(&mut integral)),
        ("5 single backbone classical counts", criterion_classical(&mut integral)),
        ("6 identity suite", criterion_identities(&[&oriented, &non_oriented])),
        ("7 Figure 1 fixture", criterion_figure_one()),
        ("8 integrality of extracted coefficients", criterion_integrality(&[&oriented, &non_oriented], &integral)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed in {:.1?}", results.len() - failed, start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
