//! Acceptance gate: one line per criterion, nonzero exit if any is red.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use synspec_core::obstruction::index_hypothesis_check;
use synspec_core::symbol::{fredholm_index, SymbolOperator};
use synspec_core::verify::{self, PropertyResult, Suite};

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn props(results: &[&PropertyResult]) -> Outcome {
    let pass = results.iter().all(|p| p.pass);
    let detail = results
        .iter()
        .map(|p| format!("{} {}/{}", p.name, p.trials - p.failures, p.trials))
        .collect::<Vec<_>>()
        .join(", ");
    let mut detail = detail;
    for p in results.iter().filter(|p| !p.pass) {
        if let Some(c) = p.counterexamples.first() {
            detail.push_str(&format!("; first {} counterexample {c}", p.name));
        }
    }
    Outcome { pass, detail }
}

fn within(limit: Duration, elapsed: Duration, mut o: Outcome) -> Outcome {
    if elapsed > limit {
        o.pass = false;
        o.detail
            .push_str(&format!("; over the {}s budget", limit.as_secs()));
    }
    o
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mono, dil) = verify::monotonicity_and_dilation(200, SEED).expect("suite runs");
    within(
        Duration::from_secs(600),
        start.elapsed(),
        props(&[&mono, &dil]),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (inside, _) = verify::spectral_containment_and_nonemptiness(100, SEED).expect("suite runs");
    within(Duration::from_secs(300), start.elapsed(), props(&[&inside]))
}

fn criterion_3() -> Outcome {
    let p = verify::witness_sandwich(50, SEED, 0.1, 1e-4).expect("suite runs");
    props(&[&p])
}

fn criterion_4() -> Outcome {
    let p = verify::brick_facts(200, SEED).expect("suite runs");
    props(&[&p])
}

fn criterion_5() -> Outcome {
    let origin = Complex64::new(0.0, 0.0);
    let shift = SymbolOperator::shift();
    let square = SymbolOperator::from_real(&[(2, 1.0)]).expect("valid symbol");
    let a = fredholm_index(&shift, origin).expect("off the curve").index;
    let b = fredholm_index(&square, origin)
        .expect("off the curve")
        .index;
    let oa = -verify::sampled_winding(&shift, origin, 10_000);
    let ob = -verify::sampled_winding(&square, origin, 10_000);
    let exact = a == -1 && b == -2 && oa == a && ob == b;
    let holes = verify::index_constant_in_holes(20, SEED).expect("suite runs");
    let mut o = props(&[&holes]);
    o.pass &= exact;
    o.detail = format!(
        "shift {a} (oracle {oa}), z^2 {b} (oracle {ob}); {}",
        o.detail
    );
    o
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let widths: Vec<usize> = (1..=10).map(|i| 10 * i).collect();
    let decay = verify::quasicentral_decay(400, &widths).expect("suite runs");
    let check = index_hypothesis_check(&SymbolOperator::shift(), 0.1).expect("check runs");
    let hole_ok = !check.pass && check.holes.len() == 1 && check.holes[0].index == -1;
    let mut o = props(&[&decay]);
    o.pass &= hole_ok;
    let fitted = decay
        .data
        .as_ref()
        .and_then(|d| d["fitted_C"].as_f64())
        .unwrap_or(f64::NAN);
    o.detail = format!(
        "{}; fitted C {fitted:.4}; index-check verdict {} with hole indices {:?}",
        o.detail,
        if check.pass { "pass" } else { "fail" },
        check.holes.iter().map(|h| h.index).collect::<Vec<_>>()
    );
    within(Duration::from_secs(120), start.elapsed(), o)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let spin = verify::spin_obstruction(20.0).expect("suite runs");
    let stable = verify::bott_perturbation_invariance(20.0, 50, SEED).expect("suite runs");
    let mut o = props(&[&spin, &stable]);
    if let Some(d) = &spin.data {
        o.detail.push_str(&format!(
            "; value {} gap {:.6} bound {:.6} approximant {:.6}",
            d["value"],
            d["gap"].as_f64().unwrap_or(f64::NAN),
            d["bound"].as_f64().unwrap_or(f64::NAN),
            d["approximant_max_distance"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    within(Duration::from_secs(180), start.elapsed(), o)
}

fn criterion_8() -> Outcome {
    let (commutes, _) = verify::approximant_output(100, SEED).expect("suite runs");
    let trend = verify::delta_epsilon_trend(100, SEED).expect("suite runs");
    let mut o = props(&[&commutes, &trend]);
    let data = trend.data.clone().unwrap_or_default();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("delta_epsilon_scatter.json");
    match synspec_core::json::to_string(&data).map(|s| std::fs::write(&path, s)) {
        Ok(Ok(())) => o.detail.push_str(&format!(
            "; medians {}; scatter at {}",
            data["medians"],
            path.display()
        )),
        _ => {
            o.pass = false;
            o.detail.push_str("; could not write the scatter artifact");
        }
    }
    o
}

fn criterion_9() -> Outcome {
    let mut same = true;
    let mut names = Vec::new();
    for (suite, trials) in [
        (Suite::Bricks, 30),
        (Suite::Uniqueness, 5),
        (Suite::Winding, 30),
        (Suite::Obstruction, 10),
    ] {
        let a = synspec_core::json::to_string(
            &verify::run_suite(suite, trials, SEED).expect("suite runs"),
        );
        let b = synspec_core::json::to_string(
            &verify::run_suite(suite, trials, SEED).expect("suite runs"),
        );
        same &= a.is_ok() && a == b;
        names.push(suite.name());
    }
    Outcome {
        pass: same,
        detail: format!("repeated {} with seed {SEED}", names.join(", ")),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("monotonicity and dilation", criterion_1),
        ("spectral containment", criterion_2),
        ("uniqueness sandwich", criterion_3),
        ("brick cover facts", criterion_4),
        ("index oracle", criterion_5),
        ("counterexample pair", criterion_6),
        ("triple obstruction", criterion_7),
        ("approximant realization", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {} [{verdict}] {name} ({:.1}s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
