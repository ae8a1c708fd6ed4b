//! Acceptance criteria, one test each. Every test writes a PASS/FAIL line to
//! stderr (outside the test harness capture) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use hetdapac::access::message_index;
use hetdapac::audit::{audit_correctness, audit_db_secrecy, audit_privacy_all, DEFAULT_CAP};
use hetdapac::cli::{run_cli, EXIT_PASS};
use hetdapac::mix::{frontier_rate_at, load_ratio_of_lambda, parse_rational, rat, rate_of_lambda, rate_of_load, run_time_shared};
use hetdapac::{run_protocol, AttributeVector, Engine, LoadRatio, MessageStore, MixPlan, Rational, SchemeKind, SystemParams};

fn report(n: u32, name: &str, start: Instant, limit: Duration, failures: &[String]) {
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= limit;
    let line = format!(
        "criterion {n:>2} {}: {name} ({:.2?} of {:.0?}){}",
        if passed { "PASS" } else { "FAIL" },
        elapsed,
        limit,
        if failures.is_empty() { String::new() } else { format!(" {failures:?}") }
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(passed, "{line}");
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn single_run(kind: SchemeKind, params: &SystemParams, v: &str, seed: u64, failures: &mut Vec<String>) -> hetdapac::Metrics {
    let store = MessageStore::random(params, seed);
    let v = AttributeVector::parse(v, params).unwrap();
    let out = run_protocol(kind, params, &v, &store, seed).unwrap();
    check(
        failures,
        out.message == store.message(message_index(&v, params).unwrap()).unwrap(),
        "decoded message differs from the store",
    );
    out.metrics
}

#[test]
fn criterion_01_central_heavy_instance() {
    let start = Instant::now();
    let mut f = Vec::new();
    let params = SystemParams::new(3, 2, 2, 65537, 2).unwrap();
    let m = single_run(SchemeKind::Het1, &params, "1,2,2", 7, &mut f);
    check(&mut f, m.total == 6, format!("total {}", m.total));
    check(&mut f, m.per_server.values().copied().collect::<Vec<_>>() == [1, 1, 4], "split 1+1+4");
    check(&mut f, m.rate == rat(1, 3), format!("rate {}", m.rate));
    check(&mut f, m.load_ratio == LoadRatio::Finite(rat(1, 4)), format!("load ratio {}", m.load_ratio));
    check(&mut f, m.randomness_consumed == 4, format!("randomness {}", m.randomness_consumed));
    report(1, "central-heavy scheme, (3,2,2), L=2", start, Duration::from_secs(1), &f);
}

#[test]
fn criterion_02_balanced_instance() {
    let start = Instant::now();
    let mut f = Vec::new();
    let params = SystemParams::new(4, 3, 2, 65537, 6).unwrap();
    let m = single_run(SchemeKind::Het2, &params, "1,2,1,2", 3, &mut f);
    check(&mut f, m.total == 18, format!("total {}", m.total));
    check(&mut f, m.rate == rat(1, 3), format!("rate {}", m.rate));
    check(&mut f, m.load_ratio == LoadRatio::Finite(rat(2, 3)), format!("load ratio {}", m.load_ratio));
    check(&mut f, m.randomness_allocated == 12, format!("randomness {}", m.randomness_allocated));
    report(2, "balanced scheme, (4,3,2), L=6", start, Duration::from_secs(1), &f);
}

#[test]
fn criterion_03_baseline_instance() {
    let start = Instant::now();
    let mut f = Vec::new();
    let params = SystemParams::new(3, 3, 2, 65537, 3).unwrap();
    let m = single_run(SchemeKind::Dapac, &params, "1,2,2", 1, &mut f);
    check(&mut f, m.total == 12, format!("total {}", m.total));
    check(&mut f, m.rate == rat(1, 4), format!("rate {}", m.rate));
    check(&mut f, m.load_ratio == LoadRatio::Infinite, format!("load ratio {}", m.load_ratio));
    check(
        &mut f,
        (m.randomness_consumed, m.randomness_allocated) == (9, 12),
        format!("randomness {} of {}", m.randomness_consumed, m.randomness_allocated),
    );
    report(3, "pairwise baseline, (3,2), L=3", start, Duration::from_secs(1), &f);
}

#[test]
fn criterion_04_closed_forms_on_grid() {
    let start = Instant::now();
    let mut f = Vec::new();
    let r = |n: usize, d: usize| Rational::new(n as i128, d as i128);
    for d in [2usize, 3, 4] {
        for k in [2usize, 3] {
            // Central-heavy: D sub-packets.
            let l = 2 * d;
            let p = SystemParams::new(d + 1, d, k, 65537, l).unwrap();
            let v = AttributeVector::all(&p).pop().unwrap().to_string();
            let m = single_run(SchemeKind::Het1, &p, v.trim_matches(|c| c == '(' || c == ')'), 1, &mut f);
            check(&mut f, m.rate == r(1, k + 1), format!("het1 D={d} K={k} rate {}", m.rate));
            check(&mut f, m.load_ratio == LoadRatio::Finite(r(1, k * d)), format!("het1 D={d} K={k} load {}", m.load_ratio));
            check(&mut f, m.randomness_consumed == k * l, format!("het1 D={d} K={k} randomness {}", m.randomness_consumed));

            // Balanced: D(D+1)/2 sub-packets.
            if d >= 3 {
                let l = d * (d + 1);
                let p = SystemParams::new(d + 1, d, k, 65537, l).unwrap();
                let m = single_run(SchemeKind::Het2, &p, &vec!["1"; d + 1].join(","), 2, &mut f);
                check(&mut f, m.rate == r(d + 1, 2 * k * d), format!("het2 D={d} K={k} rate {}", m.rate));
                check(&mut f, m.load_ratio == LoadRatio::Finite(r(d - 1, d)), format!("het2 D={d} K={k} load {}", m.load_ratio));
                check(
                    &mut f,
                    r(m.randomness_allocated, 1) == r((d - 1) * k * k * l, d + 1),
                    format!("het2 D={d} K={k} randomness {}", m.randomness_allocated),
                );
            }

            // Baseline: C(D,2) sub-packets, N = D.
            let l = d * (d - 1);
            let p = SystemParams::new(d, d, k, 65537, l).unwrap();
            let m = single_run(SchemeKind::Dapac, &p, &vec!["2"; d].join(","), 3, &mut f);
            check(&mut f, m.rate == r(1, 2 * k), format!("dapac D={d} K={k} rate {}", m.rate));
            check(&mut f, m.load_ratio == LoadRatio::Infinite, format!("dapac D={d} K={k} load {}", m.load_ratio));
            check(&mut f, m.randomness_allocated == k * k * l, format!("dapac D={d} K={k} randomness {}", m.randomness_allocated));
        }
    }
    report(4, "closed forms over (D,K) in {2,3,4}x{2,3}", start, Duration::from_secs(30), &f);
}

#[test]
fn criterion_05_time_sharing() {
    let start = Instant::now();
    let mut f = Vec::new();
    let lambda = rat(3, 7);
    check(&mut f, rate_of_lambda(lambda, 2).unwrap() == rat(7, 24), "rate_of_lambda(3/7, 2)");
    check(&mut f, load_ratio_of_lambda(lambda, 3, 2).unwrap() == LoadRatio::Finite(rat(2, 3)), "load ratio at 3/7");
    check(&mut f, rate_of_load(LoadRatio::Finite(rat(2, 3)), 3, 2).unwrap() == rat(7, 24), "rate_of_load(2/3)");

    let (d, k, l) = (3usize, 2usize, 21usize);
    let params = SystemParams::new(3, d, k, 65537, l).unwrap();
    let store = MessageStore::random(&params, 4);
    let v = AttributeVector::parse("1,2,2", &params).unwrap();
    for i in 0..=7 {
        let lambda = rat(i, 7);
        let plan = MixPlan::baseline_het1(lambda).unwrap();
        let out = run_time_shared(&plan, &params, &v, &store, 4).unwrap();
        let m = &out.metrics;
        // Baseline: 2KL/D from each dedicated server; central-heavy: L/D
        // from each dedicated server and KL from the central one.
        let lf = Rational::from_integer(l as i128);
        let (df, kf) = (Rational::from_integer(d as i128), Rational::from_integer(k as i128));
        let one = Rational::from_integer(1);
        let ded = lambda * lf * Rational::from_integer(2) * kf / df + (one - lambda) * lf / df;
        let cen = (one - lambda) * kf * lf;
        check(&mut f, Rational::from_integer(m.dedicated as i128) == ded, format!("lambda {lambda}: dedicated {}", m.dedicated));
        check(&mut f, Rational::from_integer(m.central as i128) == cen, format!("lambda {lambda}: central {}", m.central));
        check(&mut f, m.rate == rate_of_lambda(lambda, k).unwrap(), format!("lambda {lambda}: rate {}", m.rate));
        check(
            &mut f,
            out.message == store.message(message_index(&v, &params).unwrap()).unwrap(),
            format!("lambda {lambda}: decode"),
        );
        if i == 3 {
            check(&mut f, (m.dedicated, m.central) == (16, 24), "16 and 24 symbols at 3/7");
        }
    }
    report(5, "time-sharing algebra and executed mix", start, Duration::from_secs(5), &f);
}

#[test]
fn criterion_06_knee_gain() {
    let start = Instant::now();
    let mut f = Vec::new();
    for (d, k) in [(3usize, 2usize), (4, 3)] {
        let knee = LoadRatio::Finite(rat(d as i128 - 1, d as i128));
        let gain = frontier_rate_at(knee, d, k).unwrap() - rate_of_load(knee, d, k).unwrap();
        check(&mut f, gain == rat(1, (2 * k * k * d) as i128), format!("D={d} K={k} gain {gain}"));
    }
    report(6, "gain at the knee equals 1/(2K^2 D)", start, Duration::from_secs(1), &f);
}

#[test]
fn criterion_07_correctness_sweep() {
    let start = Instant::now();
    let mut f = Vec::new();
    let q = 65537;
    let cases = [
        (SchemeKind::Het1, SystemParams::new(3, 2, 2, q, 2).unwrap()),
        (SchemeKind::Het2, SystemParams::new(4, 3, 2, q, 6).unwrap()),
        (SchemeKind::Dapac, SystemParams::new(3, 3, 2, q, 3).unwrap()),
    ];
    for (kind, params) in cases {
        let r = audit_correctness(kind, &params, 50).unwrap();
        check(&mut f, r.runs == params.message_count() * 50, format!("{kind}: {} runs", r.runs));
        check(&mut f, r.failures == 0, format!("{kind}: {} failures", r.failures));
        let bound = 10.0 * params.d as f64 / q as f64;
        check(&mut f, r.retry_frequency() <= bound, format!("{kind}: retry frequency {}", r.retry_frequency()));
    }
    report(7, "correctness over all v* x 50 seeds", start, Duration::from_secs(120), &f);
}

#[test]
fn criterion_08_attribute_privacy() {
    let start = Instant::now();
    let mut f = Vec::new();
    let cases = [
        (SchemeKind::Het1, SystemParams::new(3, 2, 2, 3, 2).unwrap()),
        (SchemeKind::Dapac, SystemParams::new(3, 3, 2, 2, 3).unwrap()),
        (SchemeKind::Het2, SystemParams::new(4, 3, 2, 2, 6).unwrap()),
    ];
    for (kind, params) in cases {
        let engine = Engine::new(kind, &params).unwrap();
        let outcomes = audit_privacy_all(&engine, DEFAULT_CAP).unwrap();
        check(&mut f, outcomes.len() == engine.servers().len(), format!("{kind}: servers audited"));
        for o in outcomes {
            check(&mut f, o.pairs > 0, format!("{kind} server {}: no pairs", o.server));
            check(&mut f, o.max_tv == rat(0, 1), format!("{kind} server {}: TV {}", o.server, o.max_tv));
        }
    }
    report(8, "attribute privacy, exact TV = 0", start, Duration::from_secs(180), &f);
}

#[test]
fn criterion_09_database_secrecy() {
    let start = Instant::now();
    let mut f = Vec::new();
    let cases = [
        (SchemeKind::Het1, SystemParams::new(3, 2, 2, 3, 2).unwrap(), 81u128),
        (SchemeKind::Dapac, SystemParams::new(3, 3, 2, 2, 3).unwrap(), 4096),
        (SchemeKind::Het2, SystemParams::new(4, 3, 2, 2, 6).unwrap(), 4096),
    ];
    for (kind, params, size) in cases {
        let engine = Engine::new(kind, &params).unwrap();
        let all = AttributeVector::all(&params);
        for v in [all.first().unwrap(), all.last().unwrap()] {
            let o = audit_db_secrecy(&engine, v, 0, DEFAULT_CAP).unwrap();
            check(&mut f, o.pool_assignments == size, format!("{kind}: {} pool assignments", o.pool_assignments));
            check(&mut f, o.perturbations > 0, format!("{kind}: no perturbations"));
            check(&mut f, o.max_tv == rat(0, 1), format!("{kind} v*={v}: TV {}", o.max_tv));
        }
    }
    report(9, "database secrecy, exact TV = 0", start, Duration::from_secs(180), &f);
}

#[test]
fn criterion_10_curve_anchors() {
    let start = Instant::now();
    let mut f = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let mut sink = Vec::new();
    let code = run_cli(
        ["hetdapac", "curve", "--d", "4", "--k", "3", "--out", path.to_str().unwrap()],
        &mut sink,
    );
    check(&mut f, code == EXIT_PASS, format!("exit {code}"));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (ell, ts, fr) = (col("load_ratio_exact"), col("rate_timeshare_exact"), col("rate_frontier_exact"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for (anchor_ell, anchor_rate) in [("1/12", "1/4"), ("3/4", "5/24"), ("inf", "1/6")] {
        check(
            &mut f,
            rows.iter().any(|r| r[ell] == anchor_ell && r[fr] == anchor_rate),
            format!("anchor ({anchor_ell}, {anchor_rate})"),
        );
    }
    for r in &rows {
        let (a, b) = (parse_rational(r[fr]).unwrap(), parse_rational(r[ts]).unwrap());
        check(&mut f, a >= b, format!("row {}: frontier {a} below time-share {b}", r[0]));
    }
    report(10, "curve anchors for D=4, K=3", start, Duration::from_secs(5), &f);
}
