//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use harmex::cli;
use harmex::extremal::{
    distance_report, finiteness_diagnostic_t4, finiteness_diagnostic_t6, norm_with_profile, split_decomposition,
    s2_threshold, Decision, DistanceOptions, DistancePair, DistanceSetup, TailRule, Theorem, TheoremParams,
};
use harmex::harmonic_model::TestFunctionSpec;
use harmex::interval::IntervalSet;
use harmex::norms::{space_norm, NormOptions, RadialProfile, SpaceParams};
use harmex::special_fn::split_weight;
use harmex::verify::{
    bruteforce_oracle_n2, check_embedding_b, check_lemma1_part1, check_lemma2, check_lemma3, check_partition_of_unity,
    check_poisson, check_reproducing, embedding_corpus, lemma2_grid, lemma_family, sample_points, CheckReport, KernelBox,
    OracleFunctional, Placement, STABILITY,
};
use harmex::quadrature::{GridParams, RadialGrid};
use harmex::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20;

const PARTITION_TOL: f64 = 1e-10;
const PARTITION_TIME: Duration = Duration::from_secs(1);
const REPRODUCE_TOL: f64 = 1e-8;
const REPRODUCE_TIME: Duration = Duration::from_secs(30);
const POISSON_TOL: f64 = 1e-9;
const EMBEDDING_TOL: f64 = 1e-10;
const CORPUS_SIZE: usize = 50;
const SPLIT_TOL: f64 = 1e-12;
const SPLIT_ORACLE_TOL: f64 = 1e-8;
const GRID_TOL: f64 = 0.05;
const C_MAX: f64 = 50.0;
const RATIO_STABILITY: f64 = 0.25;
const BRACKET_TIME: Duration = Duration::from_secs(300);
const MAJORANT_FACTOR: f64 = 2.0;
const POLY_FLOOR: f64 = 1e-6;

type Outcome = Result<(bool, String)>;

fn reports_pass(reports: &[CheckReport]) -> (bool, String) {
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| format!("{}[{}]", r.check, r.params)).collect();
    let worst = reports.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max);
    if failed.is_empty() {
        (true, format!("{} checks, worst violation {worst:.2e}", reports.len()))
    } else {
        (false, format!("failed: {}", failed.join(", ")))
    }
}

fn stable(c: f64, refined: f64, tol: f64) -> bool {
    c.is_finite() && refined.is_finite() && c > 0.0 && (refined / c - 1.0).abs() <= tol
}

fn partition_of_unity() -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    for n in [2, 3, 4] {
        for a in [0.25, 0.5, 1.0, 2.5] {
            reports.push(check_partition_of_unity(n, a, 50, PARTITION_TOL)?);
        }
    }
    let elapsed = start.elapsed();
    let (ok, msg) = reports_pass(&reports);
    Ok((ok && elapsed < PARTITION_TIME, format!("{msg}, {:.3}s", elapsed.as_secs_f64())))
}

fn reproduction() -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    for n in [2, 3] {
        let f = TestFunctionSpec::random(n, SEED, 1.0, 10)?.expansion(10)?;
        let pts = sample_points(n, 20, 0.9, SEED);
        for a in [0.0, 0.5, 2.0] {
            reports.push(check_reproducing(&f, a, &pts, REPRODUCE_TOL)?);
        }
    }
    let elapsed = start.elapsed();
    let (ok, msg) = reports_pass(&reports);
    Ok((ok && elapsed < REPRODUCE_TIME, format!("{msg}, {:.1}s", elapsed.as_secs_f64())))
}

fn poisson_closed_form() -> Outcome {
    let reports = vec![check_poisson(2, 0.9, 1000, SEED, POISSON_TOL)?, check_poisson(3, 0.9, 1000, SEED, POISSON_TOL)?];
    Ok(reports_pass(&reports))
}

fn embedding() -> Outcome {
    let opts = NormOptions::default();
    let corpus: Vec<TestFunctionSpec> =
        [embedding_corpus(2, CORPUS_SIZE / 2, SEED)?, embedding_corpus(3, CORPUS_SIZE / 2, SEED)?].concat();
    assert_eq!(corpus.len(), CORPUS_SIZE);
    let one = TestFunctionSpec::polynomial(2, vec![1.0])?;
    let mut reports = Vec::new();
    let mut equality_gap = 0.0f64;
    for p in [0.5, 1.0, 2.0] {
        for q in [1.0, 2.0] {
            for a in [0.5, 1.0, 2.0] {
                reports.push(check_embedding_b(&corpus, p, q, a, &opts, EMBEDDING_TOL)?);
                let lhs = space_norm(&one, &SpaceParams::b_inf_q(q, a)?, &opts)?.as_f64().powf(p);
                let rhs = a * p * space_norm(&one, &SpaceParams::b_pq(p, q, a)?, &opts)?.as_f64().powf(p);
                equality_gap = equality_gap.max((lhs - rhs).abs());
            }
        }
    }
    let (ok, msg) = reports_pass(&reports);
    Ok((ok && equality_gap <= EMBEDDING_TOL, format!("{msg}, constant function gap {equality_gap:.2e}")))
}

fn lemmas_2_and_3() -> Outcome {
    let opts = NormOptions::default();
    let family = lemma_family(SEED)?;
    let mut reports = Vec::new();
    for lp in lemma2_grid() {
        reports.push(check_lemma2(&family, lp, GridParams { levels: 30, per_annulus: 8, tail: 5 }, &opts)?);
    }
    let grid = RadialGrid::new(GridParams::default())?;
    for b in [0.25, 1.0, 3.0] {
        reports.push(check_lemma3(&family, b, &grid, &opts, EMBEDDING_TOL)?);
    }
    let unstable = reports
        .iter()
        .filter(|r| matches!((r.fitted_c, r.refined_c), (Some(c), Some(cr)) if !stable(c, cr, STABILITY)))
        .count();
    let (ok, msg) = reports_pass(&reports);
    Ok((ok && unstable == 0, msg))
}

fn lemma1_constants() -> Outcome {
    let mut reports = Vec::new();
    for a in [0.5, 1.0, 1.5] {
        for n in [2, 3] {
            for pl in [Placement::RhoX, Placement::RRho] {
                reports.push(check_lemma1_part1(a, n, KernelBox::default(), pl)?);
            }
        }
    }
    let all_stable = reports.iter().all(|r| match (r.fitted_c, r.refined_c) {
        (Some(c), Some(cr)) => stable(c, cr, STABILITY),
        _ => false,
    });
    let consts: Vec<String> = reports.iter().step_by(2).map(|r| format!("{:.3}", r.fitted_c.unwrap_or(f64::NAN))).collect();
    let (ok, msg) = reports_pass(&reports);
    Ok((ok && all_stable, format!("{msg}, C = [{}]", consts.join(", "))))
}

fn random_set(rng: &mut ChaCha8Rng) -> Result<IntervalSet> {
    let count = rng.gen_range(0..=3);
    let mut cuts: Vec<f64> = (0..2 * count).map(|_| rng.gen_range(0.0..0.999)).collect();
    cuts.sort_by(f64::total_cmp);
    IntervalSet::from_intervals(cuts.chunks(2).map(|c| (c[0], c[1])).filter(|(a, b)| b > a).collect())
}

fn exact_splitting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.gen_range(2..=4);
        let k = rng.gen_range(1..=40);
        let f = TestFunctionSpec::random(n, SEED + i, rng.gen_range(0.0..2.0), k)?.expansion(k)?;
        let order = rng.gen_range(0.0..3.0);
        let set = random_set(&mut rng)?;
        let (f1, f2) = split_decomposition(&f, order, &set)?;
        for ((a, b), c) in f1.coeffs.iter().zip(&f2.coeffs).zip(&f.coeffs) {
            worst = worst.max((a + b - c).abs());
        }
    }
    let half = IntervalSet::interval(0.0, 0.5)?;
    let w0 = split_weight(0, 1.0, 2, &half)?;
    let one = TestFunctionSpec::polynomial(2, vec![1.0])?;
    let oracle = bruteforce_oracle_n2(&one, OracleFunctional::KernelMass { alpha: 1.0, a: 0.0, b: 0.5 }, 64)?;
    let gap = (w0 - 7.0 / 16.0).abs().max((w0 - oracle).abs());
    Ok((
        worst <= SPLIT_TOL && gap <= SPLIT_ORACLE_TOL,
        format!("coefficient error {worst:.2e}, w0 = {w0:.12}, oracle {oracle:.12}"),
    ))
}

struct Bracket {
    label: String,
    report: DistancePair,
    refined_ratio: Option<f64>,
}

fn brackets(corpus: &[(TestFunctionSpec, TheoremParams)], theorem: Theorem) -> Result<Vec<Bracket>> {
    let opts = DistanceOptions::default();
    let refined = DistanceOptions { norm: opts.norm.refined(), ..opts.clone() };
    corpus
        .iter()
        .map(|(f, params)| {
            let report = distance_report(f, theorem, params, &opts)?;
            let refined_ratio = distance_report(f, theorem, params, &refined)?.ratio;
            Ok(Bracket { label: format!("{} alpha={}", f.label(), params.alpha), report, refined_ratio })
        })
        .collect()
}

fn bracket_verdict(b: &Bracket) -> std::result::Result<f64, String> {
    let r = &b.report;
    if r.rejected || !(r.epsilon_star > 0.0) {
        return Err(format!("{}: eps* = {}", b.label, r.epsilon_star));
    }
    if r.s1_upper < r.epsilon_star * (1.0 - GRID_TOL) {
        return Err(format!("{}: s1 {} below eps* {}", b.label, r.s1_upper, r.epsilon_star));
    }
    let c = r.ratio.unwrap_or(f64::INFINITY);
    if !(c <= C_MAX) {
        return Err(format!("{}: ratio {c}", b.label));
    }
    match b.refined_ratio {
        Some(cr) if stable(c, cr, RATIO_STABILITY) => Ok(c),
        other => Err(format!("{}: ratio {c} moved to {other:?} under refinement", b.label)),
    }
}

fn summarize_brackets(bs: &[Bracket]) -> (bool, String) {
    let mut ratios = Vec::new();
    let mut errors = Vec::new();
    for b in bs {
        match bracket_verdict(b) {
            Ok(c) => ratios.push(format!("{c:.3}")),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        (true, format!("ratios [{}]", ratios.join(", ")))
    } else {
        (false, errors.join("; "))
    }
}

fn t3_corpus() -> Result<Vec<(TestFunctionSpec, TheoremParams)>> {
    let mut v = Vec::new();
    for n in [2, 3] {
        for a in [0.5, 1.0, 2.0] {
            v.push((TestFunctionSpec::q_kernel(n, a - 1.0, 1.0)?, TheoremParams::new(a)));
        }
    }
    Ok(v)
}

fn sup_corpus() -> Result<Vec<(TestFunctionSpec, TheoremParams)>> {
    [0.5, 1.0, 2.0].into_iter().map(|a| Ok((TestFunctionSpec::p_alpha(2, a)?, TheoremParams::new(a)))).collect()
}

fn theorem3_bracket() -> Outcome {
    let start = Instant::now();
    let bs = brackets(&t3_corpus()?, Theorem::T3)?;
    let elapsed = start.elapsed();
    let (ok, msg) = summarize_brackets(&bs);
    Ok((ok && elapsed < BRACKET_TIME, format!("{msg}, {:.0}s", elapsed.as_secs_f64())))
}

fn theorem5_bracket() -> Outcome {
    let bs = brackets(&sup_corpus()?, Theorem::T5)?;
    let (ok, msg) = summarize_brackets(&bs);
    let mut phi = Vec::new();
    let mut kernel = Vec::new();
    let mut agree = true;
    for b in &bs {
        let best = b.report.best_epsilon;
        let row = b.report.diagnostics.rows.iter().find(|r| Some(r.epsilon) == best);
        match row.and_then(|r| Some((r.phi_majorant?, r.majorant?, r.s1_upper?))) {
            Some((m, k, direct)) => {
                let q = m / direct;
                agree &= (1.0 / MAJORANT_FACTOR..=MAJORANT_FACTOR).contains(&q);
                phi.push(format!("{q:.2}"));
                kernel.push(format!("{:.2}", k / direct));
            }
            None => agree = false,
        }
    }
    Ok((
        ok && agree,
        format!("{msg}, phi-majorant/direct [{}], kernel-mean majorant/direct [{}]", phi.join(", "), kernel.join(", ")),
    ))
}

fn decision_sweep(
    corpus: &[(TestFunctionSpec, TheoremParams)],
    theorem: Theorem,
    diagnose: impl Fn(&RadialProfile, &TheoremParams, &DistanceSetup, f64, f64) -> Result<Decision>,
) -> Result<(usize, Vec<String>)> {
    let opts = NormOptions::default();
    let mut checked = 0;
    let mut errors = Vec::new();
    for (f, params) in corpus {
        let setup = DistanceSetup::new(theorem, &params.with_p(1.0))?;
        let (_, profile) = norm_with_profile(f, &setup.ambient, &opts)?;
        let rule = TailRule::new(profile.grid().tail());
        let star = s2_threshold(&profile, &rule)?;
        for p in [0.5, 1.0] {
            for (factor, expect) in [(0.25, Decision::Diverges), (0.45, Decision::Diverges), (1.05, Decision::Converges), (2.0, Decision::Converges)] {
                let eps = factor * star;
                let d = diagnose(&profile, params, &setup, p, eps)?;
                checked += 1;
                if d != expect {
                    errors.push(format!("{} p={p} eps={factor}eps*: {d:?}", f.label()));
                }
                if theorem == Theorem::T4 && p == 1.0 && (d == Decision::Converges) != rule.holds(&profile, eps)? {
                    errors.push(format!("{} eps={factor}eps*: T4 {d:?} disagrees with the tail rule", f.label()));
                }
            }
        }
    }
    Ok((checked, errors))
}

fn small_p_diagnostics() -> Outcome {
    let (n4, mut errors) = decision_sweep(&t3_corpus()?, Theorem::T4, |prof, params, setup, p, eps| {
        Ok(finiteness_diagnostic_t4(prof, params.alpha, setup.split_order, p, eps)?.decision)
    })?;
    let (n6, e6) = decision_sweep(&sup_corpus()?, Theorem::T6, |prof, params, _, p, eps| {
        Ok(finiteness_diagnostic_t6(prof, params.alpha, p, eps)?.decision)
    })?;
    errors.extend(e6);
    if errors.is_empty() {
        Ok((true, format!("{} decisions", n4 + n6)))
    } else {
        Ok((false, errors.join("; ")))
    }
}

fn final_bracket() -> Outcome {
    let mut corpus = Vec::new();
    for n in [2, 3] {
        for a in [0.5, 1.0] {
            let params = TheoremParams::new(a).with_beta(1.0);
            corpus.push((TestFunctionSpec::q_kernel(n, a + params.beta, 1.0)?, params));
        }
    }
    Ok(summarize_brackets(&brackets(&corpus, Theorem::Tfinal)?))
}

fn polynomial_membership() -> Outcome {
    let polys = [
        TestFunctionSpec::polynomial(2, vec![1.0, -0.5, 0.25])?,
        TestFunctionSpec::polynomial(3, vec![0.0, 0.0, 0.0, 2.0])?,
        TestFunctionSpec::random(4, SEED, 1.0, 8)?,
    ];
    let opts = DistanceOptions::default();
    let mut errors = Vec::new();
    let mut worst = 0.0f64;
    for f in &polys {
        for theorem in Theorem::ALL {
            let p = if matches!(theorem, Theorem::T4 | Theorem::T6) { 0.5 } else { 1.0 };
            let r = distance_report(f, theorem, &TheoremParams::new(1.0).with_p(p), &opts)?;
            worst = worst.max(r.s1_upper);
            if r.epsilon_star != 0.0 || !(r.s1_upper < POLY_FLOOR) {
                errors.push(format!("{} {}: eps* {} s1 {}", f.label(), theorem.tag(), r.epsilon_star, r.s1_upper));
            }
        }
    }
    if errors.is_empty() {
        Ok((true, format!("{} reports, largest s1 {worst:.2e}", polys.len() * Theorem::ALL.len())))
    } else {
        Ok((false, errors.join("; ")))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"seed":3,"corpus":[{"kind":"q_kernel","beta":0.0,"rho0":1.0,"n":2},{"kind":"random","seed":5,"decay":1.0,"n":3,"K":6}],
           "theorems":["T3","T4"],"params":[{"alpha":1.0,"p":1.0}]}"#,
    )?;
    let run = || {
        let mut out = Vec::new();
        let code = cli::run(["harmex", "distance", "--config", path.to_str().unwrap()], &mut out, &mut std::io::sink());
        (code, out)
    };
    let (c1, a) = run();
    let (c2, b) = run();
    Ok((c1 == c2 && !a.is_empty() && a == b, format!("{} bytes, exit {c1}", a.len())))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("partition of unity", partition_of_unity),
        ("reproducing formula, quadrature route", reproduction),
        ("closed-form Poisson kernel", poisson_closed_form),
        ("embedding inequality", embedding),
        ("double-integral and supremum lemmas", lemmas_2_and_3),
        ("pointwise kernel constants", lemma1_constants),
        ("exact splitting", exact_splitting),
        ("mixed-norm distance bracket", theorem3_bracket),
        ("weighted supremum distance bracket", theorem5_bracket),
        ("small-p finiteness diagnostics", small_p_diagnostics),
        ("ball-average distance bracket", final_bracket),
        ("polynomial membership", polynomial_membership),
        ("deterministic output", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!ok);
        println!(
            "{} criterion {:>2} {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
