//! End-to-end acceptance run. Prints one line per criterion and fails if
//! any criterion fails.
//!
//! `cargo test -p martlab --test acceptance -- --nocapture`

use std::time::{Duration, Instant};

use martlab::experiment::{sharpness_sweep, SweepRow, SWEEP_CSV_HEADER};
use martlab::verify::generate::{SpaceModel, WeightModel};
use martlab::verify::{run_suite, CheckKind, SuiteName, SuiteParams, SuiteResult};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(name: SuiteName, params: &SuiteParams, trials: u64, seed: u64) -> (SuiteResult, Duration) {
    let start = Instant::now();
    let r = run_suite(name, params, trials, seed, 0).unwrap();
    (r, start.elapsed())
}

/// Checks a suite result and that every listed check name was evaluated.
fn suite_ok(r: &SuiteResult, trials: u64, required: &[String]) -> (bool, String) {
    let missing: Vec<&String> = required
        .iter()
        .filter(|n| !r.extremes.iter().any(|x| &x.name == *n))
        .collect();
    let ok = r.passed && r.trials == trials && r.failed_trials.is_empty() && missing.is_empty();
    let mut detail = format!(
        "{} trials, {} assertions, {} failed trials",
        r.trials,
        r.asserted,
        r.failed_trials.len()
    );
    if !missing.is_empty() {
        detail.push_str(&format!(", missing checks {missing:?}"));
    }
    (ok, detail)
}

fn worst(r: &SuiteResult, prefix: &str) -> f64 {
    r.extremes
        .iter()
        .filter(|x| x.name.starts_with(prefix))
        .map(|x| x.ratio)
        .fold(0.0, f64::max)
}

fn names(template: &[&str], values: &[String]) -> Vec<String> {
    template
        .iter()
        .flat_map(|t| values.iter().map(move |v| format!("{t} {v}")))
        .collect()
}

fn identities() -> Outcome {
    let params = SuiteParams {
        space: Some(SpaceModel::DyadicRange { min: 0, max: 5 }),
        ..SuiteParams::default()
    };
    let (r, t) = run(SuiteName::Identities, &params, 500, 1);
    let required: Vec<String> = [
        "self-adjointness",
        "tower rule",
        "pull-out",
        "weighted conditional expectation",
        "martingale property",
    ]
    .map(String::from)
    .to_vec();
    let (ok, detail) = suite_ok(&r, 500, &required);
    // identity checks store relative error / 1e-10
    let err = r.extremes.iter().map(|x| x.ratio).fold(0.0, f64::max) * 1e-10;
    let fast = t < Duration::from_secs(5);
    outcome(
        ok && fast && err <= 1e-10,
        format!("{detail}, worst relative error {err:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

fn power_sums() -> Outcome {
    let (r, _) = run(SuiteName::PowerSum, &SuiteParams::default(), 10_000, 1);
    let required: Vec<String> = ["1.1", "1.5", "2", "2.7", "4", "7.3"].iter().map(|s| format!("power sum s={s}")).collect();
    let (ok, detail) = suite_ok(&r, 10_000, &required);
    outcome(ok && r.asserted == 10_000, format!("{detail}, worst lhs/rhs {:.4}", worst(&r, "power sum")))
}

fn tail_integrals() -> Outcome {
    let (r, _) = run(SuiteName::TailIntegrals, &SuiteParams::default(), 300, 1);
    let required: Vec<String> = ["holder A2 <= A1^(1/s) A3^(1/s')", "doob A3 <= (s')^s A1", "power sums A1 <= K(s) A2"]
        .map(String::from)
        .to_vec();
    let (ok, detail) = suite_ok(&r, 300, &required);
    let reports: Vec<String> = r
        .extremes
        .iter()
        .filter(|x| x.kind == CheckKind::Report)
        .map(|x| format!("{} {:.3}", x.name, x.ratio))
        .collect();
    let simple_case = r.extremes.iter().any(|x| x.name.starts_with("mixed A2"));
    outcome(
        ok && simple_case && !reports.is_empty(),
        format!("{detail}; reported worst {}", reports.join(", ")),
    )
}

fn carleson_embedding() -> Outcome {
    let (r, _) = run(SuiteName::CarlesonEmbedding, &SuiteParams::default(), 200, 1);
    let mut required = Vec::new();
    for p in ["0.5", "1", "2"] {
        for theta in ["1", "1.5", "2"] {
            required.push(format!("embedding p={p} theta={theta}"));
            required.push(format!("indicator extraction p={p} theta={theta}"));
        }
    }
    let (ok, detail) = suite_ok(&r, 200, &required);
    outcome(ok, format!("{detail}, worst embedding ratio {:.4}", worst(&r, "embedding")))
}

fn carleson_equivalence() -> Outcome {
    let (r, _) = run(SuiteName::CarlesonEquivalence, &SuiteParams::default(), 100, 1);
    let required: Vec<String> = ["1", "1.25", "1.5", "2", "3"]
        .iter()
        .map(|t| format!("stopping times and blocks agree theta={t}"))
        .collect();
    let (ok, detail) = suite_ok(&r, 100, &required);
    outcome(
        ok,
        format!("{detail}, worst relative gap / 1e-9 {:.2e}", worst(&r, "stopping times")),
    )
}

fn maximal_testing() -> Outcome {
    let (r, _) = run(SuiteName::MaximalTesting, &SuiteParams::default(), 200, 1);
    let pq: Vec<String> = ["p=1.5 q=1.5", "p=2 q=2", "p=3 q=3", "p=2 q=3"].map(String::from).to_vec();
    let required = names(&["testing constant below norm", "norm below tracked bound"], &pq);
    let (ok, detail) = suite_ok(&r, 200, &required);
    outcome(
        ok,
        format!(
            "{detail}, worst testing/norm {:.4}, worst norm/tracked {:.4}",
            worst(&r, "testing constant below norm"),
            worst(&r, "norm below tracked bound")
        ),
    )
}

fn one_weight() -> Outcome {
    let ps: Vec<String> = ["p=1.5", "p=2", "p=3"].map(String::from).to_vec();
    let (a, _) = run(SuiteName::ApTesting, &SuiteParams::default(), 200, 1);
    let (ok_a, da) = suite_ok(&a, 200, &names(&["A_p below testing constant", "testing constant below tracked bound"], &ps));
    let (b, _) = run(SuiteName::ApMaximal, &SuiteParams::default(), 200, 1);
    let (ok_b, db) = suite_ok(&b, 200, &names(&["maximal norm below tracked bound"], &ps));
    outcome(
        ok_a && ok_b,
        format!(
            "testing: {da}, worst C2/K C1^(1/(p-1)) {:.4}; maximal: {db}, worst norm/bound {:.4}",
            worst(&a, "testing constant below tracked bound"),
            worst(&b, "maximal norm below tracked bound")
        ),
    )
}

fn sweep_summary(rows: &[SweepRow]) -> String {
    let mut parts = Vec::new();
    let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    ps.dedup();
    for p in ps {
        let of_p: Vec<&SweepRow> = rows.iter().filter(|r| r.p == p && r.delta >= 0.0).collect();
        let spread = |f: fn(&SweepRow) -> f64| {
            let v: Vec<f64> = of_p.iter().map(|r| f(r)).collect();
            v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let last = of_p.last().unwrap();
        parts.push(format!(
            "p={p}: at delta={:.3} bound/norm mixed {:.3} vs classical {:.3}, spread {:.3} vs {:.3}",
            last.delta,
            last.ratio_mixed,
            last.ratio_classical,
            spread(|r| r.ratio_mixed),
            spread(|r| r.ratio_classical)
        ));
    }
    parts.join("; ")
}

fn mixed_bound() -> Outcome {
    let (r, _) = run(SuiteName::MixedBound, &SuiteParams::default(), 120, 1);
    let ps: Vec<String> = ["p=1.5", "p=2", "p=3"].map(String::from).to_vec();
    let mut required: Vec<String> = ["disjoint cover", "measurability", "stopped mass", "average band", "stopped supremum"]
        .iter()
        .map(|n| format!("principal sets: {n}"))
        .collect();
    required.extend(names(&["core local bound", "maximal norm below mixed bound"], &ps));
    let (ok, detail) = suite_ok(&r, 120, &required);
    let violations = worst(&r, "principal sets:");

    let (pp, _) = run(SuiteName::PrincipalSets, &SuiteParams::default(), 200, 1);
    let (ok_pp, dpp) = suite_ok(&pp, 200, &[]);

    let example = SuiteParams {
        space: Some(SpaceModel::Dyadic { depth: 3 }),
        weight: Some(WeightModel::LogNormal { sigma: 1.0 }),
        ..SuiteParams::default()
    };
    let (ex, _) = run(SuiteName::MixedBound, &example, 100, 42);

    let rows = sharpness_sweep(&[1.5, 2.0, 3.0], &[], 10, 42).unwrap();
    let mut csv = String::from(SWEEP_CSV_HEADER);
    for row in &rows {
        csv.push('\n');
        csv.push_str(&row.csv());
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("sharpness.csv");
    std::fs::write(&path, csv + "\n").unwrap();

    outcome(
        ok && violations == 0.0 && ok_pp && ex.passed && ex.failed_trials.is_empty(),
        format!(
            "{detail} (100 log-normal, 20 power), worst core bound ratio {:.4}; principal-props: {dpp}; \
             depth-3 seed-42 example: {} failures; sweep {} rows in {} [reported] {}",
            worst(&r, "core local bound"),
            ex.failed_trials.len(),
            rows.len(),
            path.display(),
            sweep_summary(&rows)
        ),
    )
}

fn trace_and_wolff() -> Outcome {
    let (a, _) = run(SuiteName::TraceTesting, &SuiteParams::default(), 150, 1);
    let pq: Vec<String> = ["p=1.5 q=1.5", "p=2 q=2", "p=3 q=3", "p=1.5 q=2.5", "p=2 q=3"].map(String::from).to_vec();
    let (ok_a, da) = suite_ok(&a, 150, &names(&["testing constant below dual norm", "norm below tracked bound"], &pq));
    let (b, _) = run(SuiteName::WolffCharacterization, &SuiteParams::default(), 150, 1);
    let pq: Vec<String> = ["p=2 q=1.5", "p=3 q=2", "p=3 q=1.5", "p=4 q=2.5", "p=2 q=1", "p=3 q=0.75", "p=2 q=0.5"]
        .map(String::from)
        .to_vec();
    let (ok_b, db) = suite_ok(&b, 150, &names(&["norm below tracked multiple of potential"], &pq));
    outcome(
        ok_a && ok_b,
        format!(
            "trace: {da}, worst norm/tracked {:.4}; potential: {db}, worst norm/tracked {:.4}, {} flagged",
            worst(&a, "norm below tracked bound"),
            worst(&b, "norm below tracked multiple"),
            b.flagged_trials.len()
        ),
    )
}

fn determinism() -> Outcome {
    let params = SuiteParams::default();
    let one = run_suite(SuiteName::MixedBound, &params, 120, 42, 1).unwrap();
    let eight = run_suite(SuiteName::MixedBound, &params, 120, 42, 8).unwrap();
    let again = run_suite(SuiteName::MixedBound, &params, 120, 42, 1).unwrap();
    let a = serde_json::to_string(&one).unwrap();
    let b = serde_json::to_string(&eight).unwrap();
    let c = serde_json::to_string(&again).unwrap();
    outcome(a == b && a == c, format!("{} bytes of JSON, 1 vs 8 workers identical: {}", a.len(), a == b))
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("identities", identities),
        ("power-sum inequality", power_sums),
        ("tail integrals", tail_integrals),
        ("Carleson embedding", carleson_embedding),
        ("Carleson equivalence", carleson_equivalence),
        ("two-weight maximal testing", maximal_testing),
        ("one-weight A_p", one_weight),
        ("mixed A_p-A_inf bound", mixed_bound),
        ("trace and potential", trace_and_wolff),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    let total = start.elapsed();
    println!("acceptance run: {:.1} s", total.as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(total < Duration::from_secs(600));
}
