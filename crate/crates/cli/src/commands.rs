use crate::error::CliError;
use crate::output::Context;
use gsqg_core::biot_savart::{streamfunction_hankel, streamfunction_kernel_with, KernelTable, DEFAULT_GRADING};
use gsqg_core::nonuniqueness::{
    separation_curve, to_physical, verify_residual, FieldKind, GolovkinSystem, Lq, PolarGrid, MANIFEST_FILE,
};
use gsqg_core::radial::{build_grid, read_profile_csv, write_profile_csv, FamilyRecord, RadialGrid, RadialProfile, Vortex};
use gsqg_core::regimes::{classify, energy_identity, regime_check, write_classes_csv, Q};
use gsqg_core::spectra::{
    check_persistence, continue_in_nu, eigenvalues, full_spectrum, persistence_flags, residual, vortex_search, ContinuationOptions,
    EigenPair, LinearizedProblem, SearchOptions, SearchStatus, SpectrumReport, Termination,
};
use gsqg_core::C64;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, Write};
use std::sync::Arc;

fn problem_from_vortex(ctx: &Context, vortex: Vortex) -> LinearizedProblem {
    let p = &ctx.cfg.problem;
    LinearizedProblem::new(vortex, p.n, p.beta, p.convention)
}

fn config_vortex(ctx: &Context) -> Result<Vortex, CliError> {
    let (fam, params) = (ctx.cfg.family()?, ctx.cfg.vortex_params()?);
    let vgrid = build_grid(0, ctx.cfg.grid.len, ctx.cfg.grid.r_max)?;
    Ok(fam.generate(&params, &vgrid, ctx.cfg.problem.alpha)?)
}

fn mode_grid(ctx: &Context) -> Result<Arc<RadialGrid>, CliError> {
    Ok(build_grid(ctx.cfg.problem.n.unsigned_abs(), ctx.cfg.grid.len, ctx.cfg.grid.r_max)?)
}

fn read_profile(ctx: &Context, rel: &str, producer: &str) -> Result<RadialProfile, CliError> {
    let path = ctx.require(rel, producer)?;
    let (p, meta) = read_profile_csv(BufReader::new(std::fs::File::open(&path)?))?;
    match meta.iter().find(|(k, _)| k == "config_hash") {
        Some((_, h)) if *h == ctx.hash => Ok(p),
        Some((_, h)) => Err(CliError::Prerequisite(format!(
            "{} was produced with config hash {h}, current config hash is {}",
            path.display(),
            ctx.hash
        ))),
        None => Err(CliError::Prerequisite(format!("{} carries no config hash", path.display()))),
    }
}

fn fmt_lambda(l: C64) -> String {
    format!("{:.10e}{:+.10e}i", l.re, l.im)
}

#[derive(Serialize)]
struct UnstableMode {
    re: f64,
    im: f64,
    residual: f64,
    doubled_re: f64,
    doubled_im: f64,
    delta: f64,
    persistent: bool,
}

#[derive(Serialize)]
struct ConventionVerdict {
    convention: gsqg_core::operator::ShiftConvention,
    leading_re: f64,
    leading_im: f64,
    unstable: bool,
}

#[derive(Serialize)]
struct SpectrumOutput {
    #[serde(flatten)]
    report: SpectrumReport,
    threshold: f64,
    unstable: Vec<UnstableMode>,
    conventions: Vec<ConventionVerdict>,
}

#[derive(Serialize)]
struct RouteCheck {
    n: u32,
    alpha: f64,
    mode: [f64; 2],
    kernel_norm: f64,
    hankel_norm: f64,
    relative_difference: f64,
}

/// Leading spectrum of L_ν about the configured vortex.
pub fn spectrum(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let prob = problem_from_vortex(ctx, config_vortex(ctx)?);
    let grid = mode_grid(ctx)?;
    let m = prob.assemble(&grid, cfg.problem.nu)?;
    let pairs = full_spectrum(&m)?;
    let doubled = prob.assemble(&grid.with_len(2 * cfg.grid.len)?, cfg.problem.nu)?;
    let dvals = eigenvalues(&doubled)?;
    let top = &pairs[..cfg.spectrum.modes.min(pairs.len())];
    let vals: Vec<C64> = top.iter().map(|p| p.lambda).collect();
    let flags = persistence_flags(&vals, &dvals);
    let report = SpectrumReport::new(&m, top, &flags);

    let mut unstable = Vec::new();
    for p in pairs.iter().filter(|p| p.lambda.re > cfg.spectrum.threshold) {
        let d = dvals.iter().copied().min_by(|a, b| (a - p.lambda).norm().total_cmp(&(b - p.lambda).norm())).expect("nonempty spectrum");
        let delta = (d - p.lambda).norm();
        unstable.push(UnstableMode {
            re: p.lambda.re,
            im: p.lambda.im,
            residual: p.residual,
            doubled_re: d.re,
            doubled_im: d.im,
            delta,
            persistent: delta < gsqg_core::spectra::PERSISTENCE_TOL,
        });
    }
    let here = cfg.problem.convention;
    let (a, b, nu) = (cfg.problem.alpha, cfg.problem.beta, cfg.problem.nu);
    let conventions = [here, here.other()]
        .into_iter()
        .map(|c| {
            let lead = pairs[0].lambda + (c.shift(a, b, nu) - here.shift(a, b, nu));
            ConventionVerdict { convention: c, leading_re: lead.re, leading_im: lead.im, unstable: lead.re > cfg.spectrum.threshold }
        })
        .collect();
    let bad_residual = top.iter().any(|p| p.residual >= cfg.tolerances.eigen);
    let growing = unstable.iter().filter(|u| u.persistent).count();
    ctx.write_json("spectrum.json", &SpectrumOutput { report, threshold: cfg.spectrum.threshold, unstable, conventions })?;
    let meta = ctx.meta();
    ctx.write_with("spectrum.csv", |w| {
        for (k, v) in &meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "index,re_lambda,im_lambda,residual,persistent")?;
        for (i, (p, f)) in top.iter().zip(&flags).enumerate() {
            writeln!(w, "{i},{:.17e},{:.17e},{:.6e},{f}", p.lambda.re, p.lambda.im, p.residual)?;
        }
        Ok(())
    })?;

    let order = cfg.problem.n.unsigned_abs();
    let table = KernelTable::load_or_build(order, a, ctx.cache_dir.as_deref())?;
    let lead = &pairs[0].w;
    let by_kernel = streamfunction_kernel_with(&table, lead, DEFAULT_GRADING)?;
    let by_hankel = streamfunction_hankel(order, a, lead)?;
    let check = RouteCheck {
        n: order,
        alpha: a,
        mode: [pairs[0].lambda.re, pairs[0].lambda.im],
        kernel_norm: by_kernel.norm(),
        hankel_norm: by_hankel.norm(),
        relative_difference: by_kernel.sub(&by_hankel)?.norm() / by_hankel.norm(),
    };
    ctx.write_json("biot_savart_check.json", &check)?;

    if cfg.spectrum.export_matrix {
        ctx.write_with("operator_matrix.txt", |w| Ok(m.export(w)?))?;
        ctx.write_json(
            "operator_matrix.json",
            &serde_json::json!({
                "file": "operator_matrix.txt",
                "layout": "row-major, one row per line, entries re,im",
                "N": cfg.grid.len, "r_max": cfg.grid.r_max, "n": cfg.problem.n,
                "alpha": a, "beta": b, "nu": nu, "convention": here,
            }),
        )?;
    }

    println!("spectrum: leading λ = {} ({growing} persistent modes above {})", fmt_lambda(pairs[0].lambda), cfg.spectrum.threshold);
    if bad_residual {
        return Err(CliError::Numerical(format!("an eigenpair residual exceeds the tolerance {:.1e}", cfg.tolerances.eigen)));
    }
    if ctx.strict && top.iter().zip(&flags).any(|(p, f)| !f && p.lambda.re > cfg.spectrum.threshold) {
        return Err(CliError::Numerical("an unstable mode does not persist under grid doubling".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchRecord {
    pub family: String,
    pub n: i32,
    pub alpha: f64,
    pub beta: f64,
    pub params: Vec<f64>,
    pub status: SearchStatus,
    pub lambda: [f64; 2],
    pub residual: f64,
    /// |Δλ| on the doubled grid.
    pub doubled_delta: f64,
    pub evaluations: usize,
    pub vortex_file: String,
}

/// Maximizes the ν = 0 growth rate over the configured family.
pub fn search(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let fam = cfg.family()?;
    let opts = SearchOptions { len: cfg.grid.len, r_max: cfg.grid.r_max, beta: cfg.problem.beta, convention: cfg.problem.convention };
    let out = vortex_search(&fam, cfg.problem.n, cfg.problem.alpha, cfg.search.budget, &opts)?;
    let mut meta = ctx.meta();
    meta.push(("family".into(), fam.id.name().into()));
    meta.push(("params".into(), format!("{:?}", out.params)));
    ctx.write_with("vortex.csv", |w| Ok(write_profile_csv(out.vortex.theta(), w, &meta)?))?;
    let hmeta = ctx.meta();
    ctx.write_with("search_history.csv", |w| {
        for (k, v) in &hmeta {
            writeln!(w, "# {k}={v}")?;
        }
        let cols: Vec<String> = (0..fam.dim()).map(|i| format!("p{i}")).collect();
        writeln!(w, "index,objective,{}", cols.join(","))?;
        for (i, (x, f)) in out.history.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{i},{f:.17e},{}", xs.join(","))?;
        }
        Ok(())
    })?;
    let record = SearchRecord {
        family: fam.id.name().into(),
        n: cfg.problem.n,
        alpha: cfg.problem.alpha,
        beta: cfg.problem.beta,
        params: out.params.clone(),
        status: out.status,
        lambda: [out.pair.lambda.re, out.pair.lambda.im],
        residual: out.pair.residual,
        doubled_delta: out.pair.doubled.map(|d| d.delta).unwrap_or(f64::NAN),
        evaluations: out.evaluations,
        vortex_file: "vortex.csv".into(),
    };
    ctx.write_json("search.json", &record)?;
    match out.status {
        SearchStatus::InstabilityFound => println!("search: λ₀ = {} at params {:?}", fmt_lambda(out.pair.lambda), out.params),
        SearchStatus::NoInstabilityFound => {
            println!("search: no instability found; best Re λ₀ = {:.6e} at params {:?}", out.pair.lambda.re, out.params)
        }
    }
    Ok(())
}

fn searched_vortex(ctx: &Context) -> Result<(SearchRecord, Vortex), CliError> {
    let record: SearchRecord = ctx.read_json("search.json", "search")?;
    let theta = read_profile(ctx, &record.vortex_file, "search")?;
    if theta.grid().len() != ctx.cfg.grid.len || theta.grid().r_max() != ctx.cfg.grid.r_max {
        return Err(CliError::Prerequisite("vortex.csv grid differs from the configured grid".into()));
    }
    let family = FamilyRecord { family: record.family.clone(), params: record.params.clone() };
    let vortex = Vortex::new(theta, ctx.cfg.problem.alpha, Some(family), 1e-8)?;
    Ok((record, vortex))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub n: i32,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub lambda: [f64; 2],
    pub residual: f64,
    pub persistent: bool,
    pub doubled_delta: f64,
    pub eigenvector_file: String,
    pub vortex_file: String,
}

#[derive(Serialize)]
struct ContinuationSummary {
    nu_start: f64,
    nu_end: f64,
    lambda_start: [f64; 2],
    lambda_end: [f64; 2],
    entries: usize,
    termination: Termination,
    threshold: f64,
    nu_star: Option<f64>,
    steps_halved: usize,
    continuity_factor: f64,
    /// max over steps of |Δλ| / (δν·max |dλ/dν|).
    max_continuity_ratio: f64,
}

/// Continues the searched branch in ν and records the eigenpair at the configured ν.
pub fn continuation(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let (record, vortex) = searched_vortex(ctx)?;
    if record.status != SearchStatus::InstabilityFound {
        return Err(CliError::Prerequisite(format!("search found no instability (Re λ₀ = {:.3e}); nothing to continue", record.lambda[0])));
    }
    let prob = problem_from_vortex(ctx, vortex);
    let grid = mode_grid(ctx)?;
    let op = prob.affine(&grid)?;
    let seed = full_spectrum(&op.at(0.0))?.swap_remove(0);
    let opts = ContinuationOptions {
        initial_step: cfg.continuation.initial_step,
        max_step: cfg.continuation.max_step,
        tol: cfg.tolerances.eigen,
        ..ContinuationOptions::default()
    };
    let path = continue_in_nu(&op, 0.0, cfg.continuation.nu_end, &seed, &opts)?;
    let meta = ctx.meta();
    ctx.write_with("continuation.csv", |w| Ok(path.write_csv(w, &meta)?))?;
    let max_continuity_ratio = path
        .entries
        .windows(2)
        .map(|e| (e[1].pair.lambda - e[0].pair.lambda).norm() / (e[1].step * e[0].slope.norm().max(e[1].slope.norm())))
        .fold(0.0, f64::max);
    let last = path.last();
    ctx.write_json(
        "continuation.json",
        &ContinuationSummary {
            nu_start: 0.0,
            nu_end: last.pair.nu,
            lambda_start: [seed.lambda.re, seed.lambda.im],
            lambda_end: [last.pair.lambda.re, last.pair.lambda.im],
            entries: path.entries.len(),
            termination: path.termination.clone(),
            threshold: path.threshold,
            nu_star: path.nu_star(),
            steps_halved: path.steps_halved,
            continuity_factor: path.continuity_factor,
            max_continuity_ratio,
        },
    )?;
    match &path.termination {
        Termination::Reached => println!("continue: reached ν = {} with λ = {}", last.pair.nu, fmt_lambda(last.pair.lambda)),
        Termination::Threshold { nu_star } => println!("continue: Re λ fell to half its ν = 0 value; ν* = {nu_star:.6e}"),
        Termination::BranchLoss { diagnostic } => println!("continue: branch lost near ν = {}: {diagnostic}", last.pair.nu),
    }

    let nu = cfg.problem.nu;
    let base = path.entries.iter().rev().find(|e| e.pair.nu <= nu).expect("path starts at ν = 0");
    let mut pair: EigenPair = if base.pair.nu == nu {
        base.pair.clone()
    } else {
        let leg = continue_in_nu(&op, base.pair.nu, nu, &base.pair, &ContinuationOptions { stop_at_threshold: false, ..opts })?;
        if let Termination::BranchLoss { diagnostic } = &leg.termination {
            return Err(CliError::Numerical(format!("branch lost before ν = {nu}: {diagnostic}")));
        }
        leg.last().pair.clone()
    };
    let doubled = prob.assemble(&grid.with_len(2 * cfg.grid.len)?, nu)?;
    let persistent = check_persistence(&mut pair, &doubled)?;
    let wmeta = ctx.meta();
    ctx.write_with("eigenvector.csv", |w| Ok(write_profile_csv(&pair.w, w, &wmeta)?))?;
    ctx.write_json(
        "eigenpair.json",
        &EigenpairRecord {
            n: cfg.problem.n,
            alpha: cfg.problem.alpha,
            beta: cfg.problem.beta,
            nu,
            lambda: [pair.lambda.re, pair.lambda.im],
            residual: pair.residual,
            persistent,
            doubled_delta: pair.doubled.map(|d| d.delta).unwrap_or(f64::NAN),
            eigenvector_file: "eigenvector.csv".into(),
            vortex_file: record.vortex_file.clone(),
        },
    )?;
    println!("continue: λ_ν = {} at ν = {nu} (residual {:.2e}, persistent {persistent})", fmt_lambda(pair.lambda), pair.residual);
    if let Termination::BranchLoss { diagnostic } = &path.termination {
        if path.last().pair.nu < nu {
            return Err(CliError::Numerical(format!("branch lost before ν = {nu}: {diagnostic}")));
        }
    }
    if pair.residual >= cfg.tolerances.eigen {
        return Err(CliError::Numerical(format!("eigenpair residual {:.3e} at ν = {nu} exceeds {:.1e}", pair.residual, cfg.tolerances.eigen)));
    }
    if ctx.strict && !persistent {
        return Err(CliError::Numerical(format!("eigenvalue at ν = {nu} moved under grid doubling")));
    }
    Ok(())
}

/// Builds Θ±, F from the stored eigenpair and writes the system plus snapshots.
pub fn construct(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let record: EigenpairRecord = ctx.read_json("eigenpair.json", "continue")?;
    let (_, vortex) = searched_vortex(ctx)?;
    let w = read_profile(ctx, &record.eigenvector_file, "continue")?;
    let lambda = C64::new(record.lambda[0], record.lambda[1]);
    let prob = problem_from_vortex(ctx, vortex.clone());
    let m = prob.assemble(&mode_grid(ctx)?, cfg.problem.nu)?;
    let r = residual(&m, lambda, &w);
    if !(r < cfg.tolerances.eigen) {
        return Err(CliError::Numerical(format!("stored eigenpair residual {r:.3e} exceeds {:.1e}", cfg.tolerances.eigen)));
    }
    let pair = EigenPair { lambda, w, residual: r, nu: cfg.problem.nu, doubled: None };
    let sys = GolovkinSystem::build(cfg.problem.beta, cfg.problem.nu, &vortex, cfg.problem.n, &pair, cfg.problem.convention)?;
    let dir = ctx.out.join("system");
    let manifest = sys.save(&dir, Some(&ctx.hash))?;
    for entry in std::fs::read_dir(&dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        ctx.record(&format!("system/{name}"));
    }
    let (a, b, nu) = (cfg.problem.alpha, cfg.problem.beta, cfg.problem.nu);
    let fields = [("theta_plus", &sys.theta_plus, FieldKind::Solution), ("theta_minus", &sys.theta_minus, FieldKind::Solution), ("force", &sys.force, FieldKind::Force)];
    for &t in &cfg.verify.snapshot_t {
        for (name, e, kind) in &fields {
            let polar = PolarGrid::for_expansion(vortex.grid(), e.max_harmonic())?;
            let field = to_physical(e, *kind, a, b, nu, t, &polar)?;
            let mut meta = ctx.meta();
            meta.push(("field".into(), name.to_string()));
            meta.push(("t".into(), t.to_string()));
            if cfg.verify.snapshot_format == "binary" {
                let data = ctx.path(&format!("snapshots/{name}_t{t}.bin"))?;
                let side = ctx.path(&format!("snapshots/{name}_t{t}.json"))?;
                field.write_binary(&data, &side, &meta)?;
            } else {
                ctx.write_with(&format!("snapshots/{name}_t{t}.csv"), |w| Ok(field.write_csv(w, &meta)?))?;
            }
        }
    }
    println!("construct: wrote {} ({} force terms)", manifest.display(), sys.force.len());
    Ok(())
}

#[derive(Serialize)]
struct SeparationSummary {
    s: f64,
    q: f64,
    file: String,
    fitted_slope: f64,
    predicted_slope: f64,
    relative_error: f64,
    slope_ok: bool,
    envelope_constant: f64,
    envelope_holds: bool,
}

#[derive(Serialize)]
struct EnergySummary {
    #[serde(flatten)]
    identity: gsqg_core::regimes::EnergyIdentity,
    class: &'static str,
    in_range: bool,
    ok: bool,
}

#[derive(Serialize)]
struct VerifySummary {
    residual_max_relative: f64,
    residual_tolerance: f64,
    residual_ok: bool,
    separation: Vec<SeparationSummary>,
    energy: Vec<EnergySummary>,
}

/// Re-checks the stored system: PDE residual, separation rates and energy identities.
pub fn verify(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let manifest_path = ctx.require(&format!("system/{MANIFEST_FILE}"), "construct")?;
    ctx.check_hash(&std::fs::read_to_string(&manifest_path)?, &manifest_path)?;
    let (sys, _) = GolovkinSystem::load(&manifest_path)?;
    let report = verify_residual(&sys, &cfg.verify.taus, &[1.0, -1.0])?;
    ctx.write_json("residual.json", &report)?;
    let residual_ok = report.max_relative <= cfg.tolerances.residual;

    let v = &cfg.verify;
    let k = v.t_points;
    let t_grid: Vec<f64> = (0..k).map(|i| v.t_min.powf(1.0 - i as f64 / (k - 1) as f64)).collect();
    let mut separation = Vec::new();
    for &(s, q) in &v.norms {
        let curve = separation_curve(&sys, &t_grid, s, Lq::parse(q)?, (v.t_min, v.t_max))?;
        let file = format!("separation_s{s}_q{q}.csv");
        let meta = ctx.meta();
        ctx.write_with(&file, |w| {
            for (k, v) in &meta {
                writeln!(w, "# {k}={v}")?;
            }
            writeln!(w, "# fitted_slope={:.10e} predicted_slope={:.10e}", curve.fitted_slope, curve.predicted_slope)?;
            writeln!(w, "t,separation,norm_plus,norm_minus,envelope")?;
            for ((t, d), (_, p, m, c)) in curve.points.iter().zip(&curve.envelope) {
                writeln!(w, "{t:.17e},{d:.17e},{p:.17e},{m:.17e},{c:.17e}")?;
            }
            Ok(())
        })?;
        let relative_error = (curve.fitted_slope - curve.predicted_slope).abs() / curve.predicted_slope.abs().max(1e-300);
        separation.push(SeparationSummary {
            s,
            q,
            file,
            fitted_slope: curve.fitted_slope,
            predicted_slope: curve.predicted_slope,
            relative_error,
            slope_ok: relative_error <= cfg.tolerances.slope,
            envelope_constant: curve.envelope_constant,
            envelope_holds: curve.envelope_holds,
        });
    }

    let (a, b) = (sys.alpha, sys.beta);
    let classes: [(f64, &'static str, bool); 2] = [((a - 2.0) / 2.0, "Leray–Hopf/Marchand", b < 2.0 + a / 2.0), (0.0, "Resnick", b < 1.0 + a)];
    let mut energy = Vec::new();
    for (s, class, in_range) in classes {
        for eps in [1.0, -1.0] {
            let identity = energy_identity(&sys, eps, s, v.energy_t0, v.energy_t1)?;
            let ok = identity.mismatch <= cfg.tolerances.energy;
            energy.push(EnergySummary { identity, class, in_range, ok });
        }
    }
    let summary = VerifySummary { residual_max_relative: report.max_relative, residual_tolerance: cfg.tolerances.residual, residual_ok, separation, energy };
    ctx.write_json("verify.json", &summary)?;

    println!("verify: max relative residual {:.3e} (tolerance {:.1e})", report.max_relative, cfg.tolerances.residual);
    for s in &summary.separation {
        println!(
            "verify: s = {}, q = {}: slope {:.6} vs {:.6} (rel. error {:.2e}), envelope holds {}",
            s.s, s.q, s.fitted_slope, s.predicted_slope, s.relative_error, s.envelope_holds
        );
    }
    for e in &summary.energy {
        println!("verify: energy identity s = {}, branch {:+}: mismatch {:.2e} (in range {})", e.identity.s, e.identity.branch, e.identity.mismatch, e.in_range);
    }
    if !residual_ok {
        return Err(CliError::Numerical(format!("PDE residual {:.3e} exceeds {:.1e}", report.max_relative, cfg.tolerances.residual)));
    }
    if ctx.strict {
        if let Some(s) = summary.separation.iter().find(|s| !s.envelope_holds || (s.q == 2.0 && !s.slope_ok)) {
            return Err(CliError::Numerical(format!("separation check failed for s = {}, q = {}", s.s, s.q)));
        }
        if let Some(e) = summary.energy.iter().find(|e| e.in_range && !e.ok) {
            return Err(CliError::Numerical(format!("energy identity mismatch {:.3e} at s = {}", e.identity.mismatch, e.identity.s)));
        }
    }
    Ok(())
}

/// Exact regime verdicts, named classes and an (α, β) sweep of the classes.
pub fn regimes(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg.clone();
    let query = cfg.regime_query()?;
    let report = regime_check(&query)?;
    ctx.write_json("regimes.json", &report)?;
    let meta = ctx.meta();
    ctx.write_with("classes.csv", |w| Ok(write_classes_csv(&report.classes, w, &meta)?))?;
    let (na, nb) = (cfg.regimes.sweep_alpha, cfg.regimes.sweep_beta);
    let mut rows = Vec::new();
    for i in 0..na {
        let alpha = Q::new(i as i128, (na - 1) as i128);
        for j in 1..=nb {
            let beta = (Q::from_integer(3) + alpha) * Q::new(j as i128, (nb + 1) as i128);
            rows.push((alpha, beta, classify(alpha, beta)?));
        }
    }
    ctx.write_with("sweep.csv", |w| {
        for (k, v) in &meta {
            writeln!(w, "# {k}={v}")?;
        }
        let names: Vec<&str> = rows[0].2.iter().map(|c| c.class.as_str()).collect();
        writeln!(w, "alpha,beta,{}", names.join(","))?;
        for (alpha, beta, classes) in &rows {
            let flags: Vec<&str> = classes.iter().map(|c| if c.holds { "1" } else { "0" }).collect();
            writeln!(w, "{},{},{}", to_f64(*alpha), to_f64(*beta), flags.join(","))?;
        }
        Ok(())
    })?;
    println!("regimes: solution {}, force {}", report.solution.name(), report.force.name());
    for c in &report.classes {
        println!("regimes: {} [{}] holds {}", c.class, c.threshold, c.holds);
    }
    Ok(())
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}
