//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ctmc_gsa::config::{parse_model_config, SEIARHD_CONFIG, SIR_CONFIG};
use ctmc_gsa::gsa::{
    build_pickfreeze, estimate_indices, evaluate_design, DesignRow, GsaError, IndexEstimate, InputGroup, InputSpec,
    Marginal, ParamInput,
};
use ctmc_gsa::rng::UniformStream;
use ctmc_gsa::par::Execution;
use ctmc_gsa::sim::RepresentationKind;
use ctmc_gsa::study::{group_samples, run_study, welch_test, FunctionalIndexReport, StudyReport};
use ctmc_gsa::validate::{run_validation, ValidationSettings};

const ALPHA: f64 = 0.01;
const A1_THRESHOLD: f64 = 0.05;
const A3_THRESHOLD: f64 = 0.25;
const A4_EARLY: f64 = 2.0;
const A4_LATE: f64 = 20.0;
const A7_TOL: f64 = 0.03;
const A7_N: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

/// Groups sorted by decreasing median, with their medians.
fn ranking(reps: &[Vec<IndexEstimate>], groups: &[String], pick: fn(&IndexEstimate) -> f64) -> Vec<(String, f64)> {
    let mut r: Vec<(String, f64)> = groups
        .iter()
        .map(|g| (g.clone(), median(&group_samples(reps, g, pick))))
        .collect();
    r.sort_by(|a, b| b.1.total_cmp(&a.1));
    r
}

fn show(r: &[(String, f64)]) -> String {
    r.iter().map(|(g, m)| format!("{g}={m:.3}")).collect::<Vec<_>>().join(" ")
}

fn scalar(report: &StudyReport, kind: RepresentationKind) -> &[Vec<IndexEstimate>] {
    report.get(kind).and_then(|r| r.scalar.as_deref()).expect("scalar study ran")
}

fn functional(report: &StudyReport, kind: RepresentationKind) -> &FunctionalIndexReport {
    report.get(kind).and_then(|r| r.functional.as_ref()).expect("functional study ran")
}

const KINDS: [RepresentationKind; 2] = [RepresentationKind::FirstReaction, RepresentationKind::Mnrm];

fn a1(report: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in KINDS {
        let r = ranking(scalar(report, kind), &report.groups, |e| e.first_order);
        let top: Vec<&str> = r[..2].iter().map(|(g, _)| g.as_str()).collect();
        let ok = top.contains(&"beta")
            && top.contains(&"gamma_E")
            && r[..2].iter().all(|(_, m)| *m > A1_THRESHOLD)
            && r[2..].iter().all(|(_, m)| *m < A1_THRESHOLD);
        pass &= ok;
        detail.push(format!("{kind}: {}", show(&r)));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn a2(report: &StudyReport) -> Outcome {
    let fr = scalar(report, RepresentationKind::FirstReaction);
    let mn = scalar(report, RepresentationKind::Mnrm);
    let mut rejected = 0;
    let mut z_ok = false;
    let mut detail = Vec::new();
    for g in &report.groups {
        let s1 = group_samples(fr, g, |e| e.numerator_total);
        let s2 = group_samples(mn, g, |e| e.numerator_total);
        let w = welch_test(g, &s1, &s2, ALPHA).expect("replication samples are non-degenerate");
        detail.push(format!("{g} p={:.2e}", w.p));
        if g == "Z" {
            z_ok = !w.reject;
        } else if g != "beta" && w.reject {
            rejected += 1;
        }
    }
    Outcome {
        pass: z_ok && rejected >= 3,
        detail: format!("Z not rejected: {z_ok}; non-beta groups rejected: {rejected}/7; {}", detail.join(" ")),
    }
}

fn a3(report: &StudyReport) -> Outcome {
    let r = ranking(scalar(report, RepresentationKind::FirstReaction), &report.groups, |e| e.total);
    let mut top: Vec<&str> = r[..3].iter().map(|(g, _)| g.as_str()).collect();
    top.sort_unstable();
    let pass = top == ["Z", "beta", "gamma_E"] && r[..3].iter().all(|(_, m)| *m > A3_THRESHOLD);
    Outcome { pass, detail: format!("first-reaction totals: {}", show(&r)) }
}

fn a4(report: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in KINDS {
        let f = functional(report, kind);
        let z = f.group_index("Z").expect("Z group");
        let beta = f.group_index("beta").expect("beta group");
        let first: Vec<Vec<Option<f64>>> = (0..f.groups.len()).map(|j| f.first_order_curve(j)).collect();
        let total: Vec<Vec<Option<f64>>> = (0..f.groups.len()).map(|j| f.total_curve(j)).collect();
        let at = f
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - A4_EARLY).abs().total_cmp(&(b.1 - A4_EARLY).abs()))
            .map(|(k, _)| k)
            .expect("non-empty grid");
        // `lead` exceeds every other group at time index `t`.
        let leads = |curves: &[Vec<Option<f64>>], lead: usize, t: usize| {
            let top = curves[lead][t].unwrap_or(f64::NEG_INFINITY);
            (0..curves.len()).filter(|&j| j != lead).all(|j| curves[j][t].is_none_or(|v| v < top))
        };
        let early = leads(&first, z, at) && leads(&total, z, at);
        let late_times: Vec<usize> = (0..f.grid.len())
            .filter(|&t| f.grid[t] > A4_LATE && first[beta][t].is_some())
            .collect();
        let late_fail = late_times
            .iter()
            .filter(|&&t| !(leads(&first, beta, t) && leads(&total, beta, t)))
            .count();
        pass &= early && late_fail == 0 && !late_times.is_empty();
        detail.push(format!(
            "{kind}: t={:.2} Z S={:.3} ST={:.3} leads={early}; beta leads at {}/{} times > {A4_LATE}",
            f.grid[at],
            first[z][at].unwrap_or(f64::NAN),
            total[z][at].unwrap_or(f64::NAN),
            late_times.len() - late_fail,
            late_times.len()
        ));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn a5(report: &StudyReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in KINDS {
        let f = functional(report, kind);
        let r = ranking(&f.aggregated, &report.groups, |e| e.total);
        let leading = ["gamma_E", "p_EA", "Z"];
        let rest_max = r
            .iter()
            .filter(|(g, _)| g != "beta" && !leading.contains(&g.as_str()))
            .map(|(_, m)| *m)
            .fold(f64::NEG_INFINITY, f64::max);
        let ok = r[0].0 == "beta"
            && r.iter().filter(|(g, _)| leading.contains(&g.as_str())).all(|(_, m)| *m > rest_max);
        pass &= ok;
        detail.push(format!("{kind}: {}", show(&r)));
    }
    let fr = &functional(report, RepresentationKind::FirstReaction).aggregated;
    let mn = &functional(report, RepresentationKind::Mnrm).aggregated;
    let w = welch_test(
        "Z",
        &group_samples(fr, "Z", |e| e.numerator_total),
        &group_samples(mn, "Z", |e| e.numerator_total),
        ALPHA,
    )
    .expect("replication samples are non-degenerate");
    pass &= !w.reject;
    detail.push(format!("Welch Z p={:.3}", w.p));
    Outcome { pass, detail: detail.join("; ") }
}

fn a6() -> Outcome {
    let checks = run_validation(&ValidationSettings::default()).expect("validation models simulate");
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} ({:.4} vs {:.4})", c.name, c.statistic, c.reference))
        .collect();
    let min_p = checks
        .iter()
        .filter(|c| c.name.contains("ks") || c.name.contains("chi-square"))
        .map(|c| c.reference)
        .fold(f64::INFINITY, f64::min);
    Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "{}/{} checks passed, smallest p={min_p:.3}{}",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    }
}

fn unit_spec(params: &[&str], with_z: bool) -> InputSpec {
    let mut groups: Vec<InputGroup> = params
        .iter()
        .map(|p| InputGroup::parameters(p, vec![ParamInput::new(p, Marginal::Uniform { low: 0.0, high: 1.0 })]))
        .collect();
    if with_z {
        groups.push(InputGroup::intrinsic("Z"));
    }
    InputSpec::new(groups)
}

fn estimates(params: &[&str], with_z: bool, seed: u64, f: impl Fn(&DesignRow) -> f64 + Sync + Send) -> Vec<IndexEstimate> {
    let spec = unit_spec(params, with_z);
    let names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
    let mut stream = UniformStream::from_seed(seed).expect("seed in range");
    let design = build_pickfreeze(&spec, &names, 1, A7_N, &mut stream).expect("valid design");
    let out = evaluate_design(&design, Execution::Parallel, |r| Ok::<_, GsaError>(f(r))).expect("pure function");
    estimate_indices(&design.groups, &out).expect("non-constant output")
}

/// Standard normal from the row's intrinsic stream, by Box-Muller.
fn z_normal(row: &DesignRow) -> f64 {
    let mut s = row.seeds.streams().remove(0);
    let (u1, u2) = (s.next_uniform(), s.next_uniform());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn rademacher(row: &DesignRow) -> f64 {
    if row.theta.values()[0] < 0.5 {
        -1.0
    } else {
        1.0
    }
}

fn a7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        let err = (got - want).abs();
        worst = worst.max(err);
        detail.push(format!("{name}={got:.3}/{want:.3}"));
    };
    let e = estimates(&["x1", "x2"], false, 1, |r| r.theta.values()[0] + 2.0 * r.theta.values()[1]);
    check("S1(add)", e[0].first_order, 0.2);
    check("S2(add)", e[1].first_order, 0.8);
    check("ST1(add)", e[0].total, 0.2);
    check("ST2(add)", e[1].total, 0.8);
    let e = estimates(&["x1", "x2"], false, 2, |r| r.theta.values()[0] * r.theta.values()[1]);
    check("S1(prod)", e[0].first_order, 3.0 / 7.0);
    check("ST1(prod)", e[0].total, 4.0 / 7.0);
    let e = estimates(&["x"], true, 3, |r| rademacher(r) * z_normal(r));
    check("SZ(f)", e[1].first_order, 0.0);
    check("STX(f)", e[0].total, 1.0);
    let e = estimates(&["x"], true, 4, |r| rademacher(r).powi(2) * z_normal(r));
    check("SZ(f')", e[1].first_order, 1.0);
    check("STX(f')", e[0].total, 0.0);
    Outcome {
        pass: worst <= A7_TOL,
        detail: format!("max |error| {worst:.4} (tol {A7_TOL}); {}", detail.join(" ")),
    }
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ctmc-gsa"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output directory exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn header(bytes: &[u8]) -> &[u8] {
    bytes.split(|&b| b == b'\n').next().unwrap_or_default()
}

fn a8() -> Outcome {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let config = tmp.path().join("sir.toml");
    std::fs::write(&config, SIR_CONFIG).expect("writable temp dir");
    let config = config.to_str().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let out = dir.to_str().unwrap();
        let ok = run_cli(&["gsa-scalar", "--config", config, "--n", "60", "--reps", "3", "--seed", seed, "--out-dir", out])
            && run_cli(&["gsa-functional", "--config", config, "--n", "60", "--reps", "3", "--seed", seed, "--out-dir", out])
            && run_cli(&["simulate", "--config", config, "--runs", "2", "--seed", seed, "--out-dir", out])
            && run_cli(&["compare-reps", "--out-dir", out]);
        (ok, csv_files(&dir))
    };
    let (ok1, first) = run("a", "7");
    let (ok2, again) = run("b", "7");
    let (ok3, other) = run("c", "8");
    let identical = first == again;
    let same_schema = first.len() == other.len()
        && first.iter().zip(&other).all(|(a, b)| a.0 == b.0 && header(&a.1) == header(&b.1));
    let changed = first.iter().zip(&other).any(|(a, b)| a.1 != b.1);
    Outcome {
        pass: ok1 && ok2 && ok3 && !first.is_empty() && identical && same_schema && changed,
        detail: format!(
            "{} csv files; repeat identical: {identical}; new seed changes values: {changed}, keeps schema: {same_schema}",
            first.len()
        ),
    }
}

fn report(id: &str, name: &str, start: Instant, o: &Outcome) -> bool {
    println!(
        "{id} {} {name} [{:.0}s] {}",
        if o.pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() {
    let mut all = true;

    let t = Instant::now();
    all &= report("A7", "estimator oracles", t, &a7());
    let t = Instant::now();
    all &= report("A8", "cli determinism", t, &a8());
    let t = Instant::now();
    all &= report("A6", "simulator equivalence", t, &a6());

    let t = Instant::now();
    let study = parse_model_config(SEIARHD_CONFIG)
        .expect("shipped config parses")
        .study_config(false)
        .expect("shipped config has a study");
    let results = run_study(&study).expect("desk-scale study runs");
    println!(
        "desk-scale study: n={} R={} representations={:?} in {:.0}s",
        study.n,
        study.replications,
        study.representations.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    all &= report("A1", "first-order ranking of extinction time", t, &a1(&results));
    all &= report("A2", "representation Welch tests on totals", t, &a2(&results));
    all &= report("A3", "first-reaction total ranking", t, &a3(&results));
    all &= report("A4", "dynamical indices of infectious curve", t, &a4(&results));
    all &= report("A5", "aggregated indices of infectious curve", t, &a5(&results));

    if !all {
        std::process::exit(1);
    }
}
