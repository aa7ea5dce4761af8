//! Batch front door: parse problem files, run subderivative evaluations,
//! oracle estimates, growth verification, and certifications.
//!
//! Exit codes: 2 on errors, 1 on not-certified / growth-failure verdicts,
//! 0 otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use curvkit::bound::Bound;
use curvkit::oracle::{
    estimate_d, estimate_d2, projection_alignment_probe, verify_essential_min,
    verify_quadratic_growth, Classification, GrowthVerdict, OracleFn,
};
use curvkit::schema::{self, ParsedProblem, ProblemFile};
use curvkit::sosc::{self, CertifyMode, ProblemKind, Verdict};
use curvkit::subderiv::{self, FunctionExpr};
use curvkit::ExtReal;

#[derive(Parser)]
#[command(name = "curvkit", version, about = "Second-order curvature toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also write the report as JSON to this path.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// First subderivatives of the file's function at its query directions.
    D1 { file: PathBuf },
    /// Second subderivatives with exactness tags.
    D2 { file: PathBuf },
    /// Sampling-oracle estimates for the query directions.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Estimate the first-order quotient instead of the second.
        #[arg(long)]
        first_order: bool,
    },
    /// Certify second-order sufficient optimality conditions.
    Certify {
        file: PathBuf,
        /// subspace | sphere:N | file:PATH
        #[arg(long, default_value = "sphere:64")]
        mode: String,
        /// Require exact rational multiplier witnesses on every certificate.
        #[arg(long)]
        rational: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify quadratic growth / essential local minimality by sampling.
    Growth {
        file: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Projection alignment probe along the file's first direction.
    ProbeProjection {
        file: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Run the built-in fixture checks.
    Selftest,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CURVKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = run(&cli);
    let wall_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Ok((mut report, code)) => {
            report["wall_ms"] = json!(wall_ms);
            report["version"] = json!(env!("CARGO_PKG_VERSION"));
            if let Some(path) = &cli.json {
                if let Err(e) = std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())
                {
                    eprintln!("error: cannot write report: {e}");
                    return ExitCode::from(2);
                }
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(Value, ExitCode), String> {
    match &cli.command {
        Command::D1 { file } => cmd_subderiv(file, 1),
        Command::D2 { file } => cmd_subderiv(file, 2),
        Command::Oracle {
            file,
            levels,
            seed,
            first_order,
        } => cmd_oracle(file, *levels, *seed, *first_order),
        Command::Certify {
            file,
            mode,
            rational,
            seed,
        } => cmd_certify(file, mode, *rational, *seed),
        Command::Growth {
            file,
            eps,
            delta,
            samples,
            seed,
        } => cmd_growth(file, *eps, *delta, *samples, *seed),
        Command::ProbeProjection { file, levels } => cmd_probe(file, *levels),
        Command::Selftest => cmd_selftest(),
    }
}

fn load(path: &Path) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| format!("invalid JSON in {}: {e}", path.display()))?;
    schema::parse_problem(&value).map_err(|e| e.to_string())
}

/// FNV-1a over the canonical document plus the command line.
fn config_hash(file: &ProblemFile, extra: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let text = serde_json::to_string(&file.canonical).unwrap() + extra;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{h:016x}")
}

/// The file's objective as one function expression: the bundle function,
/// or `f0 + g(F(·))` / `f0 + δ_C(F(·))` for instances.
fn objective_expr(file: &ProblemFile) -> Result<FunctionExpr, String> {
    match &file.parsed {
        ParsedProblem::Bundle { function, .. } => Ok(function.clone()),
        ParsedProblem::Instance(inst) => {
            let outer = match inst.kind {
                ProblemKind::Composite => inst.outer.clone().expect("validated"),
                ProblemKind::Structured => {
                    return Err(
                        "structured constraint sets have no direct objective expression".into(),
                    )
                }
                _ => FunctionExpr::Indicator(inst.constraint.clone().expect("validated")),
            };
            Ok(FunctionExpr::SumSmooth {
                smooth: inst.objective.clone(),
                rest: Box::new(FunctionExpr::Compose {
                    outer: Box::new(outer),
                    inner: inst.map.clone(),
                }),
            })
        }
    }
}

fn kind_str(k: Bound) -> &'static str {
    match k {
        Bound::Exact => "exact",
        Bound::LowerBound => "lower-bound",
        Bound::UpperBound => "upper-bound",
        Bound::ExactOverCandidates => "exact-over-candidates",
    }
}

fn ext_json(v: ExtReal) -> Value {
    match v {
        ExtReal::PosInf => json!("+inf"),
        ExtReal::NegInf => json!("-inf"),
        ExtReal::Finite(x) => json!(x),
    }
}

fn cmd_subderiv(path: &Path, order: u8) -> Result<(Value, ExitCode), String> {
    let file = load(path)?;
    let h = objective_expr(&file)?;
    if file.directions.is_empty() {
        return Err("the file lists no directions to evaluate".into());
    }
    let mut results = Vec::new();
    for (i, q) in file.directions.iter().enumerate() {
        let zstar = q.zstar.clone().unwrap_or_else(|| vec![0.0; file.point.len()]);
        let bv = if order == 1 {
            subderiv::subderivative(&h, &file.point, &q.w)
        } else {
            subderiv::d2(&h, &file.point, &zstar, &q.w)
        }
        .map_err(|e| e.to_string())?;
        println!(
            "d{order}[{i}] w={:?}{} value={} ({})",
            q.w,
            if order == 2 {
                format!(" zstar={zstar:?}")
            } else {
                String::new()
            },
            bv.value,
            kind_str(bv.kind)
        );
        results.push(json!({
            "w": q.w,
            "zstar": if order == 2 { json!(zstar) } else { Value::Null },
            "value": ext_json(bv.value),
            "kind": kind_str(bv.kind),
        }));
    }
    let report = json!({
        "command": format!("d{order}"),
        "file": path.display().to_string(),
        "config_hash": config_hash(&file, &format!("d{order}")),
        "results": results,
    });
    Ok((report, ExitCode::SUCCESS))
}

fn cmd_oracle(
    path: &Path,
    levels: Option<usize>,
    seed: Option<u64>,
    first_order: bool,
) -> Result<(Value, ExitCode), String> {
    let file = load(path)?;
    let h = objective_expr(&file)?;
    let mut grid = file.grid.clone();
    if let Some(l) = levels {
        grid.levels = l;
    }
    if let Some(s) = seed {
        grid.seed = s;
    }
    grid.validate().map_err(|e| e.to_string())?;
    let f = OracleFn::from_expr(&h);
    let mut results = Vec::new();
    for (i, q) in file.directions.iter().enumerate() {
        let zstar = q.zstar.clone().unwrap_or_else(|| vec![0.0; file.point.len()]);
        let est = if first_order {
            estimate_d(&f, &file.point, &q.w, &grid)
        } else {
            estimate_d2(&f, &file.point, &zstar, &q.w, &grid)
        }
        .map_err(|e| e.to_string())?;
        let class = match est.classification {
            Classification::ConvergesTo(v) => format!("converges-to {v}"),
            Classification::DivergesUp => "diverges-up".into(),
            Classification::DivergesDown => "diverges-down".into(),
            Classification::Inconclusive => "inconclusive".into(),
        };
        println!("oracle[{i}] w={:?} {}", q.w, class);
        results.push(json!({
            "w": q.w,
            "zstar": zstar,
            "classification": class,
            "level_minima": est.level_minima.iter().map(|e| ext_json(*e)).collect::<Vec<_>>(),
        }));
    }
    let report = json!({
        "command": "oracle",
        "file": path.display().to_string(),
        "config_hash": config_hash(&file, &format!("oracle l={levels:?} s={seed:?}")),
        "results": results,
    });
    Ok((report, ExitCode::SUCCESS))
}

fn parse_mode(mode: &str, seed: Option<u64>) -> Result<CertifyMode, String> {
    if mode == "subspace" {
        return Ok(CertifyMode::SubspaceExact);
    }
    if let Some(n) = mode.strip_prefix("sphere:") {
        let n: usize = n.parse().map_err(|_| format!("bad sphere count in `{mode}`"))?;
        return Ok(CertifyMode::SampledSphere {
            n,
            seed: seed.unwrap_or(0),
        });
    }
    if let Some(p) = mode.strip_prefix("file:") {
        let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {p}: {e}"))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("bad JSON in {p}: {e}"))?;
        let dirs: Vec<Vec<f64>> = serde_json::from_value(v)
            .map_err(|e| format!("direction file must be an array of vectors: {e}"))?;
        return Ok(CertifyMode::DirectionsFile(dirs));
    }
    Err(format!(
        "unknown mode `{mode}`; use subspace | sphere:N | file:PATH"
    ))
}

fn cmd_certify(
    path: &Path,
    mode: &str,
    rational: bool,
    seed: Option<u64>,
) -> Result<(Value, ExitCode), String> {
    let file = load(path)?;
    let ParsedProblem::Instance(inst) = &file.parsed else {
        return Err("certification needs a problem instance file".into());
    };
    let cmode = parse_mode(mode, seed)?;
    let cert = sosc::certify(inst, cmode).map_err(|e| e.to_string())?;
    if rational {
        let missing = cert
            .directions
            .iter()
            .filter_map(|d| d.certificate.as_ref())
            .any(|c| c.exact.is_none());
        if missing {
            return Err("exact rational witnesses are unavailable for this instance class".into());
        }
    }
    let verdict = match cert.verdict {
        Verdict::CertifiedOnDirections => "certified-on-directions",
        Verdict::CertifiedSubspaceExact => "certified-subspace-exact",
        Verdict::NotCertified => "not-certified",
        Verdict::Inconclusive => "inconclusive",
    };
    println!(
        "certify: {verdict} ({} directions, exhaustive: {}{})",
        cert.directions.len(),
        cert.exhaustive,
        if rational {
            ", arithmetic: exact-rational"
        } else {
            ""
        }
    );
    for note in &cert.notes {
        println!("  note: {note}");
    }
    if let Some(w) = &cert.witness {
        println!("  witness direction: {w:?}");
    }
    for (i, d) in cert.directions.iter().enumerate() {
        match &d.certificate {
            Some(c) => println!(
                "  dir[{i}] u={:?} value={:.6} alpha={:.6} trace={}",
                d.u,
                c.value,
                c.alpha,
                c.rule_trace.join(",")
            ),
            None => println!("  dir[{i}] u={:?} no certificate found", d.u),
        }
    }
    let dirs_json: Vec<Value> = cert
        .directions
        .iter()
        .map(|d| match &d.certificate {
            Some(c) => json!({
                "u": d.u,
                "value": c.value,
                "alpha": c.alpha,
                "lambda": c.lambda,
                "curvature": ext_json(c.curvature_term),
                "rule_trace": c.rule_trace,
                "pairing": c.multiplier_checks.pairing,
                "stationarity_residual": c.multiplier_checks.stationarity_residual,
                "exact": c.exact.is_some(),
            }),
            None => json!({"u": d.u, "certificate": Value::Null}),
        })
        .collect();
    let report = json!({
        "command": "certify",
        "file": path.display().to_string(),
        "config_hash": config_hash(&file, &format!("certify {mode} rational={rational} seed={seed:?}")),
        "verdict": verdict,
        "witness": cert.witness,
        "exhaustive": cert.exhaustive,
        "mode": cert.mode,
        "notes": cert.notes,
        "directions": dirs_json,
        "min_value": cert.min_value(),
    });
    let code = if cert.verdict == Verdict::NotCertified {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    };
    Ok((report, code))
}

fn cmd_growth(
    path: &Path,
    eps: Option<f64>,
    delta: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<(Value, ExitCode), String> {
    let file = load(path)?;
    let eps = eps.unwrap_or(file.tolerances.eps);
    let delta = delta.unwrap_or(file.tolerances.delta);
    let samples = samples.unwrap_or(file.tolerances.samples);
    let seed = seed.unwrap_or(file.grid.seed);
    let verdict = match &file.parsed {
        ParsedProblem::Instance(inst) => match inst.kind {
            ProblemKind::Composite => {
                let h = objective_expr(&file)?;
                let f = OracleFn::from_expr(&h);
                verify_quadratic_growth(&f, &inst.xbar, eps, delta, samples, seed)
            }
            ProblemKind::Structured => {
                return Err(
                    "growth verification for structured constraints is not available".to_string()
                )
            }
            _ => verify_essential_min(
                &inst.objective,
                &inst.map,
                inst.constraint.as_ref().expect("validated"),
                &inst.xbar,
                eps,
                delta,
                samples,
                seed,
            )
            .map_err(|e| e.to_string())?,
        },
        ParsedProblem::Bundle { function, point, .. } => {
            let f = OracleFn::from_expr(function);
            verify_quadratic_growth(&f, point, eps, delta, samples, seed)
        }
    };
    let (text, code, witness) = match &verdict {
        GrowthVerdict::Holds => ("holds".to_string(), ExitCode::SUCCESS, Value::Null),
        GrowthVerdict::FailsAt(z) => (format!("fails-at {z:?}"), ExitCode::from(1), json!(z)),
        GrowthVerdict::Inconclusive => {
            ("inconclusive".to_string(), ExitCode::SUCCESS, Value::Null)
        }
    };
    println!("growth: {text} (eps={eps}, delta={delta}, samples={samples}, seed={seed})");
    let report = json!({
        "command": "growth",
        "file": path.display().to_string(),
        "config_hash": config_hash(&file, &format!("growth {eps} {delta} {samples} {seed}")),
        "verdict": text.split_whitespace().next().unwrap(),
        "witness": witness,
        "eps": eps, "delta": delta, "samples": samples, "seed": seed,
    });
    Ok((report, code))
}

fn cmd_probe(path: &Path, levels: Option<usize>) -> Result<(Value, ExitCode), String> {
    let file = load(path)?;
    let set = match &file.parsed {
        ParsedProblem::Bundle { set: Some(s), .. } => s.clone(),
        ParsedProblem::Bundle {
            function: FunctionExpr::Indicator(s),
            ..
        } => s.clone(),
        ParsedProblem::Instance(inst) => inst
            .constraint
            .clone()
            .ok_or("the instance has no constraint set to probe")?,
        _ => return Err("probe-projection needs a set (bundle `set` or indicator)".into()),
    };
    let Some(q) = file.directions.first() else {
        return Err("probe-projection needs one direction in `directions`".into());
    };
    let mut grid = file.grid.clone();
    if let Some(l) = levels {
        grid.levels = l;
    }
    let rep =
        projection_alignment_probe(&set, &file.point, &q.w, &grid).map_err(|e| e.to_string())?;
    println!(
        "probe-projection: base_in_set={} final_residual={:.3e} max_ratio={:.3}",
        rep.base_in_set,
        rep.final_residual(),
        rep.max_ratio()
    );
    let report = json!({
        "command": "probe-projection",
        "file": path.display().to_string(),
        "config_hash": config_hash(&file, "probe"),
        "base_in_set": rep.base_in_set,
        "ts": rep.ts,
        "residuals": rep.residuals,
        "ratios": rep.ratios,
    });
    Ok((report, ExitCode::SUCCESS))
}

fn cmd_selftest() -> Result<(Value, ExitCode), String> {
    let fixtures: &[(&str, &str)] = &[
        ("disjunctive_toy", include_str!("../fixtures/disjunctive_toy.json")),
        ("socp_disk", include_str!("../fixtures/socp_disk.json")),
        (
            "socp_disk_rotated",
            include_str!("../fixtures/socp_disk_rotated.json"),
        ),
        ("composite_flat", include_str!("../fixtures/composite_flat.json")),
        ("sparse_l0", include_str!("../fixtures/sparse_l0.json")),
        ("soc_boundary", include_str!("../fixtures/soc_boundary.json")),
    ];
    let mut all_ok = true;
    let mut results = Vec::new();
    let check = |name: &str, ok: bool, detail: String, results: &mut Vec<Value>| {
        println!(
            "selftest {name}: {} ({detail})",
            if ok { "pass" } else { "FAIL" }
        );
        results.push(json!({"name": name, "pass": ok, "detail": detail}));
        ok
    };

    let parse = |text: &str| -> Result<ProblemFile, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        schema::parse_problem(&v).map_err(|e| e.to_string())
    };
    let by_name = |name: &str| -> Result<ProblemFile, String> {
        parse(
            fixtures
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| *t)
                .ok_or("fixture missing")?,
        )
    };

    // Half-line curvature table through the engine.
    {
        let mut ok = true;
        for (zs, w, want) in [
            (1.0, -1.0, ExtReal::PosInf),
            (1.0, 0.0, ExtReal::Finite(0.0)),
            (-1.0, -1.0, ExtReal::NegInf),
        ] {
            ok &= subderiv::d2_indicator_scalar_halfline(zs, w) == want;
        }
        all_ok &= check(
            "halfline-table",
            ok,
            "three representative cells".into(),
            &mut results,
        );
    }

    // Disjunctive toy certifies on the sampled sphere.
    {
        let file = by_name("disjunctive_toy")?;
        let ParsedProblem::Instance(inst) = &file.parsed else {
            return Err("fixture shape".into());
        };
        let cert = sosc::certify(inst, CertifyMode::SampledSphere { n: 64, seed: 7 })
            .map_err(|e| e.to_string())?;
        all_ok &= check(
            "disjunctive-toy",
            cert.verdict == Verdict::CertifiedOnDirections && cert.min_value().is_some(),
            format!("verdict {:?}", cert.verdict),
            &mut results,
        );
    }

    // Disk instance certifies; the rotated objective does not.
    {
        let file = by_name("socp_disk")?;
        let ParsedProblem::Instance(inst) = &file.parsed else {
            return Err("fixture shape".into());
        };
        let cert = sosc::certify(inst, CertifyMode::SampledSphere { n: 32, seed: 7 })
            .map_err(|e| e.to_string())?;
        all_ok &= check(
            "socp-disk",
            cert.verdict == Verdict::CertifiedOnDirections,
            format!("verdict {:?}", cert.verdict),
            &mut results,
        );
        let file = by_name("socp_disk_rotated")?;
        let ParsedProblem::Instance(inst) = &file.parsed else {
            return Err("fixture shape".into());
        };
        let cert = sosc::certify(inst, CertifyMode::SampledSphere { n: 32, seed: 7 })
            .map_err(|e| e.to_string())?;
        all_ok &= check(
            "socp-disk-rotated",
            cert.verdict == Verdict::NotCertified,
            format!("verdict {:?}", cert.verdict),
            &mut results,
        );
    }

    // The flat composite instance is never certified and growth fails.
    {
        let file = by_name("composite_flat")?;
        let ParsedProblem::Instance(inst) = &file.parsed else {
            return Err("fixture shape".into());
        };
        let cert = sosc::certify(
            inst,
            CertifyMode::DirectionsFile(vec![vec![1.0], vec![-1.0]]),
        )
        .map_err(|e| e.to_string())?;
        let h = FunctionExpr::SumSmooth {
            smooth: inst.objective.clone(),
            rest: Box::new(FunctionExpr::Compose {
                outer: Box::new(inst.outer.clone().unwrap()),
                inner: inst.map.clone(),
            }),
        };
        let f = OracleFn::from_expr(&h);
        let growth = verify_quadratic_growth(&f, &inst.xbar, 1e-2, 1.0, 2000, 1);
        all_ok &= check(
            "composite-flat",
            cert.verdict == Verdict::NotCertified && matches!(growth, GrowthVerdict::FailsAt(_)),
            format!("verdict {:?}, growth fails: {}", cert.verdict, matches!(growth, GrowthVerdict::FailsAt(_))),
            &mut results,
        );
    }

    // Sparse instance: vacuous certification at the origin.
    {
        let file = by_name("sparse_l0")?;
        let ParsedProblem::Instance(inst) = &file.parsed else {
            return Err("fixture shape".into());
        };
        let cert = sosc::certify(inst, CertifyMode::SampledSphere { n: 16, seed: 3 })
            .map_err(|e| e.to_string())?;
        all_ok &= check(
            "sparse-l0",
            cert.verdict == Verdict::CertifiedOnDirections,
            format!("verdict {:?}", cert.verdict),
            &mut results,
        );
    }

    // Cone boundary curvature: engine vs oracle.
    {
        let file = by_name("soc_boundary")?;
        let ParsedProblem::Bundle { function, point, .. } = &file.parsed else {
            return Err("fixture shape".into());
        };
        let q = &file.directions[0];
        let zstar = q.zstar.clone().unwrap();
        let engine = subderiv::d2(function, point, &zstar, &q.w).map_err(|e| e.to_string())?;
        let f = OracleFn::from_expr(function);
        let est = estimate_d2(&f, point, &zstar, &q.w, &file.grid).map_err(|e| e.to_string())?;
        let ok = matches!(est.classification, Classification::ConvergesTo(v)
            if (v - engine.value.as_f64()).abs() <= 1e-2 + 5e-2 * engine.value.as_f64().abs());
        all_ok &= check(
            "soc-boundary-oracle",
            ok && engine.is_exact(),
            format!("engine {} oracle {:?}", engine.value, est.classification),
            &mut results,
        );
    }

    let report = json!({
        "command": "selftest",
        "results": results,
        "pass": all_ok,
    });
    Ok((
        report,
        if all_ok {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        },
    ))
}
