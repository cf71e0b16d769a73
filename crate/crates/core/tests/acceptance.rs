//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use gsqg_core::biot_savart::{streamfunction_at, streamfunction_hankel, streamfunction_kernel, vortex_velocity};
use gsqg_core::nonuniqueness::{separation_curve, verify_residual, GolovkinSystem, Lq, MANIFEST_FILE};
use gsqg_core::operator::{assemble_l, OperatorMatrix, Parts, ShiftConvention};
use gsqg_core::quadrature::integrate_adaptive;
use gsqg_core::radial::{build_grid, RadialProfile, Vortex};
use gsqg_core::regimes::{
    classify, energy_identity, force_exponent_condition, regime_check, solution_exponent_condition, ClassRow, Exponent, RegimeQuery, Verdict, Q,
};
use gsqg_core::spectra::{
    continue_in_nu, eigenvalues, full_spectrum, nearest_pair, unstable_modes, vortex_search, ContinuationOptions, FamilyId, LinearizedProblem,
    SearchOptions, SearchStatus, Termination, VortexFamily, GROWTH_TOL,
};
use gsqg_core::transforms::{fractional_laplacian, hankel, HankelPlan, OutKernel};
use gsqg_core::C64;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use std::sync::OnceLock;
use std::time::Instant;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const N: usize = 256;
const R_MAX: f64 = 30.0;
const NU: f64 = 1e-3;
const RING: f64 = 0.1;

fn ring_vortex(alpha: f64) -> Result<Vortex, gsqg_core::Error> {
    let g = build_grid(0, N, R_MAX)?;
    VortexFamily::standard(FamilyId::GaussRing).generate(&[RING], &g, alpha)
}

/// Θ± and F about the gauss-ring vortex on n = 2 at ν = 1e-3.
fn system(alpha: f64, beta: f64) -> Result<GolovkinSystem, gsqg_core::Error> {
    let vortex = ring_vortex(alpha)?;
    let grid = build_grid(2, N, R_MAX)?;
    let m = LinearizedProblem::new(vortex.clone(), 2, beta, ShiftConvention::Definition).assemble(&grid, NU)?;
    let pair = full_spectrum(&m)?.swap_remove(0);
    GolovkinSystem::build(beta, NU, &vortex, 2, &pair, ShiftConvention::Definition)
}

fn base_system() -> &'static GolovkinSystem {
    static SYS: OnceLock<GolovkinSystem> = OnceLock::new();
    SYS.get_or_init(|| system(0.0, 2.0).expect("base system"))
}

fn weighted_rel(a: &[C64], b: &[C64], w: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().zip(w).map(|(y, w)| w * y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn transform_fidelity() -> Outcome {
    let (mut round_trip, mut parseval) = (0.0f64, 0.0f64);
    for n in 0..3u32 {
        let g = build_grid(n, N, R_MAX)?;
        let plan = HankelPlan::new(&g);
        let p = RadialProfile::from_real_fn(&g, |r| r.powi(n as i32) * (-r * r / 2.0).exp());
        let f = hankel(&plan, &p)?;
        let back = hankel(&HankelPlan::new(plan.dual()), &f)?;
        round_trip = round_trip.max(back.sub(&p)?.max_abs());
        parseval = parseval.max((p.norm() - f.norm()).abs() / p.norm());
    }
    let g = build_grid(0, N, R_MAX)?;
    let f = hankel(&HankelPlan::new(&g), &RadialProfile::from_real_fn(&g, |r| (-r * r / 2.0).exp()))?;
    let reciprocity = f.values().iter().zip(f.grid().nodes()).map(|(v, &q)| (v - C64::new((-q * q / 2.0).exp(), 0.0)).norm()).fold(0.0, f64::max);
    Ok((
        round_trip < 1e-10 && parseval < 1e-9 && reciprocity < 1e-8,
        format!("round trip {round_trip:.2e}, Parseval {parseval:.2e}, Gaussian self-reciprocity {reciprocity:.2e}"),
    ))
}

fn fft2(data: &mut [C64], m: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
    for _ in 0..2 {
        for row in data.chunks_mut(m) {
            fft.process(row);
        }
        for i in 0..m {
            for j in i + 1..m {
                data.swap(i * m + j, j * m + i);
            }
        }
    }
}

/// Λ^β of (x+iy)²e^{−|x|²} on a periodic 1024² box, sampled on the rays φ = 0 and φ = π/4.
fn fft_fractional_laplacian(beta: f64) -> (Vec<f64>, Vec<C64>) {
    let (m, box_len) = (1024usize, 24.0);
    let h = box_len / m as f64;
    let coord = |j: usize| if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
    let mut data: Vec<C64> = (0..m * m)
        .map(|idx| {
            let (x, y) = (coord(idx / m) * h, coord(idx % m) * h);
            C64::new(x, y).powi(2) * (-(x * x + y * y)).exp()
        })
        .collect();
    fft2(&mut data, m, false);
    let dk = 2.0 * std::f64::consts::PI / box_len;
    for (idx, v) in data.iter_mut().enumerate() {
        let (kx, ky) = (coord(idx / m) * dk, coord(idx % m) * dk);
        *v *= (kx * kx + ky * ky).sqrt().powf(beta) / (m * m) as f64;
    }
    fft2(&mut data, m, true);
    let reach = (0.45 * m as f64) as usize;
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for j in 1..reach {
        radii.push(j as f64 * h);
        values.push(data[j * m]);
    }
    for j in 1..(reach as f64 / std::f64::consts::SQRT_2) as usize {
        radii.push(j as f64 * h * std::f64::consts::SQRT_2);
        values.push(data[j * m + j] / C64::new(0.0, 1.0));
    }
    (radii, values)
}

fn fractional_laplacian_oracle() -> Outcome {
    let g = build_grid(2, N, R_MAX)?;
    let plan = HankelPlan::new(&g);
    let p = RadialProfile::from_real_fn(&g, |r| r * r * (-r * r).exp());
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        let out = fractional_laplacian(&plan, beta, &p)?;
        let (radii, fft) = fft_fractional_laplacian(beta);
        let ours = plan.evaluate(&out, &radii);
        let e = weighted_rel(&ours, &fft, &radii);
        worst = worst.max(e);
        parts.push(format!("β={beta}: {e:.2e}"));
    }
    let out = fractional_laplacian(&plan, 2.0, &p)?;
    let exact: Vec<C64> = g.nodes().iter().map(|&r| C64::new((12.0 * r * r - 4.0 * r.powi(4)) * (-r * r).exp(), 0.0)).collect();
    let analytic = weighted_rel(out.values(), &exact, g.weights());
    Ok((worst < 1e-4 && analytic < 1e-7, format!("vs 1024² FFT {}; β=2 analytic {analytic:.2e}", parts.join(", "))))
}

fn scaling_identity() -> Outcome {
    let g = build_grid(0, N, R_MAX)?;
    let plan = HankelPlan::new(&g);
    let keep: Vec<usize> = (0..N).filter(|&i| g.nodes()[i] <= 15.0).collect();
    let radii: Vec<f64> = keep.iter().map(|&i| g.nodes()[i]).collect();
    let w: Vec<f64> = keep.iter().map(|&i| g.weights()[i]).collect();
    let gauss = |lam: f64| RadialProfile::from_real_fn(&g, move |r| (-(lam * r).powi(2) / 2.0).exp());
    let base = gauss(1.0);
    let mut worst = 0.0f64;
    for s in [-1.0, 0.7, 2.0] {
        for lam in [0.5, 2.0] {
            let lhs = plan.multiplier_at(&gauss(lam), s, &radii, OutKernel::Bessel(0));
            let scaled: Vec<f64> = radii.iter().map(|r| lam * r).collect();
            let rhs: Vec<C64> = plan.multiplier_at(&base, s, &scaled, OutKernel::Bessel(0)).iter().map(|v| v * lam.powf(s)).collect();
            worst = worst.max(weighted_rel(&rhs, &lhs, &w));
        }
    }
    Ok((worst < 1e-6, format!("max relative defect {worst:.2e} over s ∈ {{−1, 0.7, 2}}, λ ∈ {{0.5, 2}}")))
}

fn biot_savart_routes() -> Outcome {
    let mut route = 0.0f64;
    for n in 1..=3u32 {
        let g = build_grid(n, N, R_MAX)?;
        let w = RadialProfile::from_real_fn(&g, |r| r.powi(n as i32) * (-r * r).exp());
        for alpha in [0.0, 0.5, 1.0] {
            let k = streamfunction_kernel(n, alpha, &w)?;
            let h = streamfunction_hankel(n, alpha, &w)?;
            route = route.max(k.sub(&h)?.norm() / h.norm());
        }
    }

    let g = build_grid(2, N, R_MAX)?;
    let src = |r: f64| r * r * (-r * r).exp();
    let w = RadialProfile::from_real_fn(&g, src);
    let h = 1e-2;
    let centers: Vec<f64> = (1..=32).map(|k| 0.25 * k as f64).collect();
    let stencil: Vec<f64> = centers.iter().flat_map(|&r| (-2..=2).map(move |k| r + k as f64 * h)).collect();
    let psi = streamfunction_at(0.0, &w, &stencil)?;
    let mut poisson = 0.0f64;
    for (i, &r) in centers.iter().enumerate() {
        let v: Vec<f64> = psi[5 * i..5 * i + 5].iter().map(|z| z.re).collect();
        let d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
        let d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
        let lap = d2 + d1 / r - 4.0 * v[2] / (r * r);
        poisson = poisson.max((-lap - src(r)).abs());
    }
    poisson /= (-1.0f64).exp();

    let g0 = build_grid(0, N, R_MAX)?;
    let theta = |r: f64| (1.0 - r * r) * (-r * r).exp();
    let v = vortex_velocity(0.0, &RadialProfile::from_real_fn(&g0, theta))?;
    let mut velocity = 0.0f64;
    for (x, &r) in v.values().iter().zip(g0.nodes()) {
        let cumulative = integrate_adaptive(|s| theta(s) * s, &[0.0, r], 1e-15, 1e-13, 200)?.0 / r;
        velocity = velocity.max((x.re - cumulative).abs());
    }
    Ok((
        route < 1e-5 && poisson < 1e-6 && velocity < 1e-7,
        format!("kernel vs Hankel {route:.2e}; Poisson residual {poisson:.2e}; vortex velocity {velocity:.2e}"),
    ))
}

fn semigroup_decay() -> Outcome {
    let vortex = ring_vortex(0.0)?;
    let g = build_grid(2, N, R_MAX)?;
    let w = RadialProfile::from_real_fn(&g, |r| r * r * (-r * r / 2.0).exp());
    let transport = Parts { transport: true, ..Parts::NONE };
    let mut worst = 0.0f64;
    for nu in [0.1, 1.0] {
        for beta in [1.0, 2.0] {
            let m = assemble_l(0.0, beta, nu, &vortex, 2, &g, transport, ShiftConvention::Definition)?;
            let out = m.propagate(&w, 1.0, 4000)?;
            let expected = (-nu / beta).exp();
            worst = worst.max((out.norm() / w.norm() - expected).abs() / expected);
        }
    }
    Ok((worst < 1e-4, format!("max |‖e^{{τT}}w‖/‖w‖ − e^{{−ντ/β}}| relative {worst:.2e} at τ = 1")))
}

fn overlap(a: &RadialProfile, b: &RadialProfile) -> f64 {
    a.inner(b).map(|z| z.norm() / (a.norm() * b.norm())).unwrap_or(0.0)
}

fn eigen_quality() -> Outcome {
    let vortex = ring_vortex(0.0)?;
    let grid = build_grid(2, N, R_MAX)?;
    let prob = LinearizedProblem::new(vortex.clone(), 2, 2.0, ShiftConvention::Definition);
    let m = prob.assemble(&grid, NU)?;
    let reported = unstable_modes(&m, 0.0, &|g| prob.assemble(g, NU))?;
    let top = full_spectrum(&m)?;
    let worst_res = reported.iter().chain(&top[..10]).map(|p| p.residual).fold(0.0, f64::max);
    let worst_delta = reported.iter().map(|p| p.doubled.map(|d| d.delta).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let quality = !reported.is_empty() && worst_res < 1e-8 && worst_delta < 1e-3;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let small = build_grid(2, 48, R_MAX)?;
    let len = small.len();
    let d: Vec<C64> = (0..len).map(|k| C64::new(0.1 * k as f64 - 2.0, (k as f64).sin())).collect();
    let u: Vec<C64> = (0..len).map(|_| C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
    let v: Vec<C64> = (0..len).map(|_| C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
    let vu: C64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
    let s = |i: usize, j: usize| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0) + u[i] * v[j];
    let s_inv = |i: usize, j: usize| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0) - u[i] * v[j] / (C64::new(1.0, 0.0) + vu);
    let sd = Mat::<C64>::from_fn(len, len, |i, j| s(i, j) * d[j]);
    let sinv = Mat::<C64>::from_fn(len, len, s_inv);
    let planted = OperatorMatrix::from_matrix(&small, 2, &sd * &sinv)?;
    let found = full_spectrum(&planted)?;
    let mut planted_err = 0.0f64;
    for (k, dk) in d.iter().enumerate() {
        let p = found.iter().min_by(|a, b| (a.lambda - dk).norm().total_cmp(&(b.lambda - dk).norm())).expect("spectrum");
        let col = RadialProfile::new(small.clone(), (0..len).map(|i| s(i, k)).collect())?;
        planted_err = planted_err.max((p.lambda - dk).norm()).max(1.0 - overlap(&p.w, &col));
    }

    let m0 = prob.assemble(&build_grid(2, 128, R_MAX)?, NU)?;
    let g128 = m0.grid().clone();
    let x = RadialProfile::from_real_fn(&g128, |r| r * r * (-r * r / 2.0).exp());
    let gx: Vec<C64> = x.values().iter().zip(g128.weights()).map(|(v, w)| v * w).collect();
    let xgx: C64 = x.values().iter().zip(&gx).map(|(a, b)| a.conj() * b).sum();
    let proj = Mat::<C64>::from_fn(128, 128, |i, j| x.values()[i] * gx[j].conj() / xgx);
    let ident = Mat::<C64>::from_fn(128, 128, |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
    let scaled = Mat::<C64>::from_fn(128, 128, |i, j| proj[(i, j)] * 0.3);
    let rank_one = m0.matrix() * &(&ident - &proj) + &scaled;
    let hit = nearest_pair(&OperatorMatrix::from_matrix(&g128, 2, rank_one)?, C64::new(0.3, 0.0))?;
    let rank_one_err = (hit.lambda - 0.3).norm().max(1.0 - overlap(&hit.w, &x));

    let nu = 0.05;
    let flipped = LinearizedProblem::new(vortex, 2, 2.0, ShiftConvention::Flipped);
    let (md, mf) = (prob.assemble(&g128, nu)?, flipped.assemble(&g128, nu)?);
    let c = 2.0 * nu * (0.0 / 2.0 - 1.0);
    let dim = md.dim();
    let mut matrix_err = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let expect = md.matrix()[(i, j)] + if i == j { C64::new(c, 0.0) } else { C64::new(0.0, 0.0) };
            matrix_err = matrix_err.max((mf.matrix()[(i, j)] - expect).norm());
        }
    }
    let a = full_spectrum(&md)?;
    let mut shift_err = 0.0f64;
    for pa in &a {
        let col = Mat::<C64>::from_fn(dim, 1, |i, _| pa.w.values()[i]);
        let image = mf.matrix() * &col;
        let target = pa.lambda + c;
        let r: f64 = (0..dim).map(|i| (image[(i, 0)] - target * col[(i, 0)]).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = (0..dim).map(|i| col[(i, 0)].norm_sqr()).sum::<f64>().sqrt() * target.norm().max(1.0);
        shift_err = shift_err.max(r / scale);
    }
    let b = full_spectrum(&mf)?;
    let mut vec_err = 0.0f64;
    for (pa, pb) in a.iter().zip(&b).take(3) {
        vec_err = vec_err.max((pb.lambda - pa.lambda - c).norm()).max(1.0 - overlap(&pa.w, &pb.w));
    }
    let pass = quality && planted_err < 1e-10 && rank_one_err < 1e-10 && matrix_err < 1e-14 && shift_err < 1e-10 && vec_err < 1e-10;
    Ok((
        pass,
        format!(
            "{} reported unstable, residual ≤ {worst_res:.2e}, doubling Δλ ≤ {worst_delta:.2e}; planted similarity {planted_err:.2e}, planted rank-one {rank_one_err:.2e}; shift toggle: matrix {matrix_err:.1e}, every (λ+c, W) residual {shift_err:.2e}, leading three recomputed {vec_err:.2e}",
            reported.len()
        ),
    ))
}

fn continuation() -> Outcome {
    let fam = VortexFamily::standard(FamilyId::GaussRing);
    let opts = SearchOptions { len: N, r_max: R_MAX, beta: 2.0, convention: ShiftConvention::Definition };
    let found = vortex_search(&fam, 2, 0.0, 6, &opts)?;
    if found.status != SearchStatus::InstabilityFound {
        return Ok((false, format!("no instability at α = 0, best Re λ₀ = {:.3e}", found.pair.lambda.re)));
    }
    let grid = build_grid(2, N, R_MAX)?;
    let prob = LinearizedProblem::new(found.vortex.clone(), 2, 2.0, ShiftConvention::Definition);
    let op = prob.affine(&grid)?;
    let path = continue_in_nu(&op, 0.0, 0.02, &found.pair, &ContinuationOptions::default())?;
    let worst = path
        .entries
        .windows(2)
        .map(|e| (e[1].pair.lambda - e[0].pair.lambda).norm() / (e[1].step * e[0].slope.norm().max(e[1].slope.norm())))
        .fold(0.0, f64::max);
    let half = found.pair.lambda.re / 2.0;
    let tracked = (path.threshold - half).abs() <= 1e-15 * half.abs();
    let threshold_ok = match &path.termination {
        Termination::Threshold { nu_star } => {
            let (before, after): (Vec<_>, Vec<_>) = path.entries.iter().partition(|e| e.pair.nu <= *nu_star);
            before.iter().all(|e| e.pair.lambda.re > half) && after.iter().all(|e| e.pair.lambda.re <= half) && !after.is_empty()
        }
        Termination::Reached => path.entries.iter().all(|e| e.pair.lambda.re > half),
        Termination::BranchLoss { .. } => false,
    };

    let neutral = vortex_search(&fam, 2, 1.0, 4, &opts)?;
    let honest = match neutral.status {
        SearchStatus::NoInstabilityFound => {
            let g = build_grid(2, 2 * N, R_MAX)?;
            let check = LinearizedProblem::new(neutral.vortex.clone(), 2, 2.0, ShiftConvention::Definition).assemble(&g, 0.0)?;
            eigenvalues(&check)?[0].re <= GROWTH_TOL || neutral.pair.doubled.map(|d| d.delta >= 1e-3).unwrap_or(false)
        }
        SearchStatus::InstabilityFound => neutral.pair.lambda.re > GROWTH_TOL,
    };
    let status = match neutral.status {
        SearchStatus::InstabilityFound => "instability found",
        SearchStatus::NoInstabilityFound => "no instability found",
    };
    let nu_star = path.nu_star().map(|v| format!("{v:.3e}")).unwrap_or_else(|| "none".into());
    Ok((
        worst <= 10.0 && tracked && threshold_ok && honest,
        format!(
            "λ₀ = {:.4e}{:+.4e}i, {} steps, max |Δλ|/(δν·slope) {worst:.2}, threshold {half:.3e} with ν* = {nu_star}; α = 1 gauss-ring: {status}",
            found.pair.lambda.re,
            found.pair.lambda.im,
            path.entries.len() - 1
        ),
    ))
}

fn golovkin_exactness() -> Outcome {
    let sys = base_system();
    let taus = [-20.0, -5.0, -1.0, 0.0];
    let direct = verify_residual(sys, &taus, &[1.0, -1.0])?.max_relative;
    let dir = tempfile::tempdir()?;
    sys.save(dir.path(), None)?;
    let (loaded, manifest) = GolovkinSystem::load(&dir.path().join(MANIFEST_FILE))?;
    let reloaded = verify_residual(&loaded, &taus, &[1.0, -1.0])?.max_relative;
    let pass = sys.eigen_residual < 1e-8 && direct < 1e-6 && reloaded < 1e-6 && manifest.force.len() == sys.force.len();
    Ok((
        pass,
        format!("eigen residual {:.2e}; Θ± residual {direct:.2e}, from serialized F {reloaded:.2e} ({} force terms)", sys.eigen_residual, manifest.force.len()),
    ))
}

fn separation_law() -> Outcome {
    let sys = base_system();
    let (alpha, beta) = (sys.alpha, sys.beta);
    let t_grid: Vec<f64> = (0..31).map(|i| 1e-3f64.powf(1.0 - i as f64 / 30.0)).collect();
    let l2 = separation_curve(sys, &t_grid, 0.0, Lq::parse(2.0)?, (1e-3, 1e-1))?;
    let predicted = (alpha + 1.0) / beta - 1.0 + sys.lambda.re / sys.nu;
    let slope_err = (l2.fitted_slope - predicted).abs() / predicted.abs();
    let weak = separation_curve(sys, &t_grid, -1.0, Lq::parse(2.0)?, (1e-3, 1e-1))?;
    Ok((
        slope_err < 0.02 && l2.envelope_holds && weak.envelope_holds,
        format!(
            "λ = {:.4e}{:+.4e}i, L² slope {:.6} vs {predicted:.6} ({slope_err:.2e}); envelope (0,2) {}, (−1,2) {}",
            sys.lambda.re, sys.lambda.im, l2.fitted_slope, l2.envelope_holds, weak.envelope_holds
        ),
    ))
}

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn row<'a>(rows: &'a [ClassRow], name: &str) -> &'a ClassRow {
    rows.iter().find(|r| r.class == name).expect("class row")
}

fn regime_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let exponent = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.2) {
            Exponent::Infinite
        } else {
            let d = rng.gen_range(1..=6);
            Exponent::Finite(q(rng.gen_range(d..=20 * d), d))
        }
    };
    let (mut mismatches, mut critical) = (0, 0);
    for k in 0..1000 {
        let alpha = q(rng.gen_range(0..=12), 12);
        let beta = q(rng.gen_range(1..36 + (alpha * 12).to_integer()), 12);
        let s = q(rng.gen_range(-12..=36), 12);
        let r = q(rng.gen_range(-12..=36), 12);
        let p = exponent(&mut rng);
        let mut qq = exponent(&mut rng);
        let a = exponent(&mut rng);
        let mut b = exponent(&mut rng);
        if k % 4 == 0 {
            let gap = s + beta - alpha - beta * p.reciprocal();
            if gap > Q::from_integer(0) && gap <= Q::from_integer(2) {
                qq = Exponent::Finite(Q::from_integer(2) / gap);
            }
            let gap = r + Q::from_integer(2) * beta - alpha - beta * a.reciprocal();
            if gap > Q::from_integer(0) && gap <= Q::from_integer(2) {
                b = Exponent::Finite(Q::from_integer(2) / gap);
            }
        }
        let query = RegimeQuery::new(alpha, beta, s, r, p, qq, a, b)?;
        let report = regime_check(&query)?;
        let two = Q::from_integer(2);
        let sol = beta * p.reciprocal() + two * qq.reciprocal() > s + beta - alpha;
        let frc = beta * a.reciprocal() + two * b.reciprocal() > r + two * beta - alpha;
        critical += usize::from(report.solution == Verdict::Critical) + usize::from(report.force == Verdict::Critical);
        if solution_exponent_condition(&query) != sol || (report.solution == Verdict::Strict) != sol || force_exponent_condition(&query) != frc || (report.force == Verdict::Strict) != frc {
            mismatches += 1;
        }
    }

    let mut spots = Vec::new();
    let at_one = classify(q(1, 1), q(2, 1))?;
    spots.push(row(&at_one, "Leray–Hopf/Marchand").holds && !row(&at_one, "Resnick").holds);
    spots.push(row(&classify(q(1, 1), q(12, 5))?, "Leray–Hopf/Marchand").holds && !row(&classify(q(1, 1), q(5, 2))?, "Leray–Hopf/Marchand").holds);
    spots.push(row(&classify(q(1, 1), q(19, 10))?, "Resnick").holds);
    let verdict = |alpha, beta, s, p: Exponent, qq: Exponent| -> Result<Verdict, gsqg_core::Error> {
        Ok(regime_check(&RegimeQuery::new(alpha, beta, s, q(-1, 1), p, qq, Exponent::Infinite, Exponent::Infinite)?)?.solution)
    };
    let fin = |n, d| Exponent::Finite(q(n, d));
    spots.push(verdict(q(0, 1), q(2, 1), q(-1, 1), fin(4, 1), fin(4, 1))? == Verdict::Critical);
    spots.push(verdict(q(0, 1), q(2, 1), q(-1, 1), fin(4, 1), fin(3, 1))? == Verdict::Strict);
    spots.push(verdict(q(0, 1), q(2, 1), q(-1, 1), fin(4, 1), fin(5, 1))? == Verdict::Outside);
    spots.push(row(&classify(q(0, 1), q(2, 1))?, "Ladyzhenskaya–Prodi–Serrin").holds);
    spots.push(verdict(q(1, 1), q(3, 1), q(0, 1), fin(3, 1), fin(2, 1))? == Verdict::Critical);
    let cw = row(&classify(q(1, 1), q(3, 1))?, "Constantin–Wu").clone();
    spots.push(cw.holds && cw.threshold.contains("β−1 = 2") && !row(&classify(q(1, 2), q(2, 1))?, "Constantin–Wu").holds);
    spots.push(verdict(q(1, 2), q(2, 1), q(1, 1), fin(2, 1), fin(4, 3))? == Verdict::Critical);
    let dczl = row(&classify(q(1, 2), q(2, 1))?, "Dong–Chen–Zhao–Liu").clone();
    spots.push(dczl.holds && dczl.threshold.contains("1+β−α = 5/2"));
    let spot_ok = spots.iter().all(|&b| b);
    Ok((
        mismatches == 0 && spot_ok,
        format!("{mismatches} mismatches in 1000 queries ({critical} critical sides); spot points {}/{}", spots.iter().filter(|&&b| b).count(), spots.len()),
    ))
}

fn energy_identities() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (beta, cases) in [(1.5, vec![-1.0]), (0.8, vec![-1.0, 0.0])] {
        let sys = system(0.0, beta)?;
        if !(sys.lambda.re > 0.0) {
            return Ok((false, format!("no unstable eigenvalue at β = {beta}")));
        }
        for s in cases {
            for eps in [1.0, -1.0] {
                let e = energy_identity(&sys, eps, s, 1e-3, 1.0)?;
                worst = worst.max(e.mismatch);
            }
            parts.push(format!("β={beta} s={s}"));
        }
    }
    Ok((worst < 0.01, format!("max relative mismatch {worst:.2e} over {} at α = 0, both branches, t ∈ [1e-3, 1]", parts.join(", "))))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("transform fidelity", transform_fidelity),
        ("fractional Laplacian oracle", fractional_laplacian_oracle),
        ("scaling identity", scaling_identity),
        ("Biot–Savart routes", biot_savart_routes),
        ("semigroup decay", semigroup_decay),
        ("eigen quality", eigen_quality),
        ("ν-continuation", continuation),
        ("Golovkin exactness", golovkin_exactness),
        ("separation law", separation_law),
        ("regime algebra", regime_algebra),
        ("energy identity", energy_identities),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} {:>2} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, i + 1, clock.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
