use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ait_core::io::{read_bundle, read_text, vector_to_csv, write_bundle, write_text, Bundle};
use ait_core::theory::{check_hypotheses, verify_trace, TheoryBounds};
use ait_core::{
    coherence, generate_instance, solve as run_solver, welch_bound, InstanceSpec, SolverConfig,
    ThresholdRule,
};

use crate::report::{
    to_json, FinalErrors, InstanceInfo, RecoveryReport, TheoryReport, Timing, VerifyReport,
    SCHEMA_VERSION,
};
use crate::{trace, CliError, GenArgs, Outcome, Result, SolveArgs, TheoryArgs, VerifyArgs};

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn gen(args: &GenArgs) -> Result<Outcome> {
    let spec = InstanceSpec::new(args.m, args.n, args.k_star, args.dr, args.seed)
        .with_signs(args.signs.into())
        .with_ensemble(args.ensemble.into());
    let instance = generate_instance(&spec)?;
    write_bundle(&args.out, &instance, &spec)?;
    let mu = coherence(&instance.matrix).mu;
    println!(
        "wrote {} (M = {}, N = {}, k* = {}, Dr = {}, mu = {mu:.6})",
        args.out.display(),
        spec.m,
        spec.n,
        spec.k_star,
        spec.dr
    );
    Ok(Outcome::Ok)
}

/// `k` from the flag, else `k*` from the truth, else `ceil(sqrt(M))`.
fn resolve_k(flag: Option<usize>, bundle: &Bundle) -> usize {
    if let Some(k) = flag {
        return k;
    }
    match &bundle.instance.truth {
        Some(t) => t.sparsity.max(1),
        None => {
            let k = (bundle.instance.matrix.rows() as f64).sqrt().ceil() as usize;
            eprintln!("warning: no -k and no xstar.csv; using k = ceil(sqrt(M)) = {k}");
            k
        }
    }
}

pub fn solve(args: &SolveArgs) -> Result<Outcome> {
    let bundle = read_bundle(&args.bundle)?;
    let instance = &bundle.instance;
    let k = resolve_k(args.k, &bundle);
    let mut config = SolverConfig::new(args.rule, k);
    if let Some(n) = args.max_iter {
        config = config.with_max_iterations(n);
    }
    if let Some(tol) = args.stall_tol {
        config = config.with_stall_tolerance(tol);
    }
    if let Some(w) = args.window {
        config = config.with_stable_support_window(w);
    }

    let started = Instant::now();
    let result = run_solver(instance, &config)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    let (m, n) = (instance.matrix.rows(), instance.matrix.cols());
    let coh = coherence(&instance.matrix);
    let (theory, verdict, errors) = match &instance.truth {
        Some(truth) => {
            let bounds = TheoryBounds::for_truth(args.rule, k, coh.mu, truth);
            let verdict = verify_trace(&result.trace, truth, &bounds)?;
            let diff = &result.final_x - instance.matrix.to_original(&truth.signal);
            let errors = FinalErrors {
                linf: diff.amax(),
                l2: diff.norm(),
            };
            (
                Some(TheoryReport::from(bounds)),
                Some(verdict),
                Some(errors),
            )
        }
        None => (None, None, None),
    };

    let report = RecoveryReport {
        schema: SCHEMA_VERSION,
        instance: InstanceInfo {
            bundle: args.bundle.display().to_string(),
            m,
            n,
            k_star: instance.truth.as_ref().map(|t| t.sparsity),
            dr: instance.truth.as_ref().map(|t| t.dynamic_range),
            mu: coh.mu,
            welch_lower_bound: coh.welch_lower_bound,
            meta: bundle.meta.clone(),
        },
        config,
        halt_reason: result.halt_reason,
        diverged: result.diverged,
        iterations_run: result.iterations_run,
        final_support: result.final_support.clone(),
        support_identified_at: verdict.as_ref().and_then(|v| v.support_identified_at),
        theory,
        verdict,
        errors,
        timing: Timing { wall_seconds },
    };

    if let Some(path) = &args.trace {
        write_text(path, &trace::to_csv(&result.trace))?;
    }
    if let Some(path) = &args.solution {
        write_text(path, &vector_to_csv(&result.final_x))?;
    }
    emit(args.report.as_deref(), &to_json(&report))?;

    if result.diverged {
        eprintln!(
            "warning: iterates diverged after {} iterations",
            result.iterations_run
        );
        return Ok(Outcome::Diverged);
    }
    Ok(Outcome::Ok)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn fmt_int(v: Option<i64>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

/// One row per rule; rows whose hypotheses fail carry the failing inequality.
/// Detection budgets assume equal adjacent ratios `Dr^{1/(k*-1)}`.
pub fn theory_table(
    k_star: usize,
    k: usize,
    mu: f64,
    dr: f64,
) -> Vec<(ThresholdRule, TheoryReport)> {
    ThresholdRule::all()
        .into_iter()
        .map(|rule| {
            let c = rule.boundedness_constant();
            let ratios = if k_star > 1 {
                vec![dr.powf(1.0 / (k_star - 1) as f64); k_star - 1]
            } else {
                Vec::new()
            };
            (
                rule,
                TheoryBounds::new(c, k, k_star, mu, dr, &ratios).into(),
            )
        })
        .collect()
}

pub fn theory(args: &TheoryArgs) -> Result<Outcome> {
    if args.welch {
        let (m, n) = (args.m.unwrap_or_default(), args.n.unwrap_or_default());
        let w = welch_bound(m, n)?;
        if args.json {
            let doc = serde_json::json!({ "M": m, "N": n, "welch_lower_bound": w });
            print!("{}", to_json(&doc));
        } else {
            println!("Welch lower bound for M = {m}, N = {n}: {w}");
            println!("1/sqrt(M) = {}", 1.0 / (m as f64).sqrt());
        }
        return Ok(Outcome::Ok);
    }

    let (mut k_star, mut mu, mut dr) = (args.k_star, args.mu, args.dr);
    if let Some(dir) = &args.bundle {
        let bundle = read_bundle(dir)?;
        mu = mu.or(Some(coherence(&bundle.instance.matrix).mu));
        if let Some(t) = &bundle.instance.truth {
            k_star = k_star.or(Some(t.sparsity));
            dr = dr.or(Some(t.dynamic_range));
        }
    }
    let k_star =
        k_star.ok_or_else(|| CliError::Usage("theory needs --kstar or --bundle".into()))?;
    let mu = mu.ok_or_else(|| CliError::Usage("theory needs --mu or --bundle".into()))?;
    let dr = dr.unwrap_or(1.0);
    let k = args.k.unwrap_or(k_star);
    let table = theory_table(k_star, k, mu, dr);

    if args.json {
        let rows: Vec<_> = table
            .iter()
            .map(|(rule, rep)| serde_json::json!({ "rule": rule.to_string(), "bounds": rep }))
            .collect();
        print!("{}", to_json(&rows));
        return Ok(Outcome::Ok);
    }

    let mut out = String::new();
    let _ = writeln!(out, "k* = {k_star}, k = {k}, mu = {mu}, Dr = {dr}");
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>9} {:>12} {:>7} {:>7} {:>12}  hypotheses",
        "rule", "c", "rho", "T", "floor", "ceil", "T(k=k*)"
    );
    for (rule, rep) in &table {
        let b = &rep.bounds;
        let status = match &b.hypotheses.violation {
            None if b.hypotheses.exact_support_guaranteed => {
                "ok (exact support when k = k*)".to_string()
            }
            None => "ok".to_string(),
            Some(v) => format!("HypothesisViolated: {v}"),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>6.4} {:>9.6} {:>12} {:>7} {:>7} {:>12}  {status}",
            rule.to_string(),
            b.c,
            b.rho,
            fmt_opt(b.t_bound),
            fmt_int(rep.t_bound_floor),
            fmt_int(rep.t_bound_ceil),
            fmt_opt(b.t_bound_exact_k),
        );
    }
    let strictest = check_hypotheses(0.0, k, k_star, mu);
    if !strictest.unique_sparsest {
        let _ = writeln!(
            out,
            "note: k* > (1 + 1/mu)/2, x* need not be the unique sparsest solution"
        );
    }
    print!("{out}");
    Ok(Outcome::Ok)
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let bundle = read_bundle(&args.bundle)?;
    let truth = bundle.instance.truth.as_ref().ok_or_else(|| {
        CliError::Usage(format!(
            "{} has no xstar.csv to verify against",
            args.bundle.display()
        ))
    })?;
    let records = trace::parse_csv(&args.trace, &read_text(&args.trace)?)?;
    let k = resolve_k(args.k, &bundle);
    let mu = coherence(&bundle.instance.matrix).mu;
    let bounds = TheoryBounds::for_truth(args.rule, k, mu, truth);
    let verdict = verify_trace(&records, truth, &bounds)?;
    let report = VerifyReport {
        schema: SCHEMA_VERSION,
        rule: args.rule.to_string(),
        k,
        theory: bounds.into(),
        verdict,
    };
    emit(args.out.as_deref(), &to_json(&report))?;
    Ok(Outcome::Ok)
}
