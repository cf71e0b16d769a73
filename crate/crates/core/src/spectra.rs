//! Eigenpairs of L_ν, instability detection, continuation in ν and vortex search.

use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::complex_matvec;
use crate::operator::{AffineOperator, OperatorMatrix, OperatorSpec, Parts, ShiftConvention, VortexSamples};
use crate::radial::{build_grid, integrate, FamilyRecord, RadialGrid, RadialProfile, Vortex};
use crate::{Error, Result, C64};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;
pub const PERSISTENCE_TOL: f64 = 1e-3;
/// Re λ at or below this counts as neutral.
pub const GROWTH_TOL: f64 = 1e-8;

/// Result of re-solving on the doubled grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Persistence {
    pub lambda: C64,
    pub residual: f64,
    pub delta: f64,
}

/// An eigenpair with ‖W‖₂ = 1 and its largest entry real positive.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    pub w: RadialProfile,
    pub residual: f64,
    pub nu: f64,
    pub doubled: Option<Persistence>,
}

impl EigenPair {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.w.grid()
    }
}

fn eig(m: &Mat<C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let e = faer::linalg::solvers::Eigen::new(m.as_ref()).map_err(|err| {
        Error::Eigen(format!("{err:?}; matrix max-norm {:.3e}", max_norm(m)))
    })?;
    let vals = (0..m.nrows()).map(|i| e.S()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

fn max_norm(m: &Mat<C64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

fn descending(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// All eigenvalues, sorted by descending real part.
pub fn eigenvalues(m: &OperatorMatrix) -> Result<Vec<C64>> {
    let mut vals = m
        .matrix()
        .eigenvalues()
        .map_err(|err| Error::Eigen(format!("{err:?}; matrix max-norm {:.3e}", max_norm(m.matrix()))))?;
    vals.sort_by(descending);
    Ok(vals)
}

/// Weighted unit norm and phase convention on raw node values.
pub fn normalize(grid: &Arc<RadialGrid>, v: Vec<C64>) -> Result<RadialProfile> {
    let p = RadialProfile::new(grid.clone(), v)?;
    let norm = p.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Eigen("degenerate eigenvector".into()));
    }
    let mut k = 0;
    let mut best = 0.0;
    for (i, z) in p.values().iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            k = i;
        }
    }
    let phase = p.values()[k] / p.values()[k].norm();
    let mut vals: Vec<C64> = p.values().iter().map(|z| z / (phase * norm)).collect();
    vals[k] = C64::new(vals[k].norm(), 0.0);
    RadialProfile::new(grid.clone(), vals)
}

/// ‖Mw − λw‖₂/‖w‖₂ in the grid norm.
pub fn residual(m: &OperatorMatrix, lambda: C64, w: &RadialProfile) -> f64 {
    let mw = complex_matvec(m.matrix(), w.values());
    let r: Vec<C64> = mw.iter().zip(w.values()).map(|(a, b)| a - b * lambda).collect();
    RadialProfile::new(w.grid().clone(), r).expect("same grid").norm() / w.norm()
}

fn rayleigh(m: &OperatorMatrix, w: &RadialProfile) -> C64 {
    let mw = RadialProfile::new(w.grid().clone(), complex_matvec(m.matrix(), w.values())).expect("same grid");
    w.inner(&mw).expect("same grid") / w.inner(w).expect("same grid")
}

fn shifted_lu(m: &OperatorMatrix, sigma: C64) -> faer::linalg::solvers::PartialPivLu<C64> {
    let len = m.dim();
    let a = Mat::<C64>::from_fn(len, len, |i, j| if i == j { m.matrix()[(i, j)] - sigma } else { m.matrix()[(i, j)] });
    a.partial_piv_lu()
}

fn offset(m: &OperatorMatrix, lambda: C64) -> C64 {
    let scale = 1.0 + lambda.norm() + max_norm(m.matrix());
    C64::new(1.0, 1.0) * (1e-12 * scale)
}

/// Inverse iteration near λ from `start`, keeping whichever pair has the smaller residual.
pub fn refine(m: &OperatorMatrix, lambda: C64, start: &RadialProfile, passes: usize) -> Result<EigenPair> {
    let grid = m.grid().clone();
    let mut best_w = normalize(&grid, start.values().to_vec())?;
    let mut best_l = lambda;
    let mut best_r = residual(m, best_l, &best_w);
    let mut l = lambda;
    let mut x = best_w.clone();
    for _ in 0..passes {
        let lu = shifted_lu(m, l + offset(m, l));
        let mut rhs = Mat::<C64>::from_fn(m.dim(), 1, |i, _| x.values()[i]);
        lu.solve_in_place(rhs.as_mut());
        let v: Vec<C64> = (0..m.dim()).map(|i| rhs[(i, 0)]).collect();
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break;
        }
        x = match normalize(&grid, v) {
            Ok(x) => x,
            Err(_) => break,
        };
        l = rayleigh(m, &x);
        let r = residual(m, l, &x);
        if r < best_r {
            best_r = r;
            best_l = l;
            best_w = x.clone();
        }
    }
    Ok(EigenPair { lambda: best_l, w: best_w, residual: best_r, nu: m.nu, doubled: None })
}

/// All N eigenpairs sorted by descending Re λ, each refined by one inverse-iteration pass.
pub fn full_spectrum(m: &OperatorMatrix) -> Result<Vec<EigenPair>> {
    let (vals, vecs) = eig(m.matrix())?;
    let grid = m.grid().clone();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| descending(&vals[a], &vals[b]));
    order
        .par_iter()
        .map(|&k| {
            let start = RadialProfile::new(grid.clone(), (0..m.dim()).map(|i| vecs[(i, k)]).collect())?;
            refine(m, vals[k], &start, 1)
        })
        .collect()
}

/// Eigenpair nearest a target, from a full decomposition followed by refinement.
pub fn nearest_pair(m: &OperatorMatrix, target: C64) -> Result<EigenPair> {
    let (vals, vecs) = eig(m.matrix())?;
    let k = nearest_index(&vals, target);
    let start = RadialProfile::new(m.grid().clone(), (0..m.dim()).map(|i| vecs[(i, k)]).collect())?;
    refine(m, vals[k], &start, 2)
}

fn nearest_index(vals: &[C64], target: C64) -> usize {
    let mut k = 0;
    for (i, v) in vals.iter().enumerate() {
        if (v - target).norm() < (vals[k] - target).norm() {
            k = i;
        }
    }
    k
}

/// Left eigenvector y (node coordinates) with yᴴM = λyᴴ, by inverse iteration on the adjoint.
pub fn left_eigenvector(m: &OperatorMatrix, lambda: C64) -> Result<Vec<C64>> {
    let len = m.dim();
    let lu = shifted_lu(m, lambda + offset(m, lambda));
    let mut y: Vec<C64> = (0..len).map(|i| C64::new(1.0 + 0.1 * (i % 7) as f64, 0.3 * (i % 3) as f64)).collect();
    for _ in 0..3 {
        let mut rhs = Mat::<C64>::from_fn(len, 1, |i, _| y[i]);
        lu.solve_adjoint_in_place(rhs.as_mut());
        let norm = (0..len).map(|i| rhs[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Eigen("left eigenvector iteration broke down".into()));
        }
        y = (0..len).map(|i| rhs[(i, 0)] / norm).collect();
    }
    Ok(y)
}

/// dλ/dν = yᴴ(∂M/∂ν)w / yᴴw for a simple eigenvalue.
pub fn eigen_slope(m: &OperatorMatrix, dm: &Mat<C64>, pair: &EigenPair) -> Result<C64> {
    let y = left_eigenvector(m, pair.lambda)?;
    let dw = complex_matvec(dm, pair.w.values());
    let num: C64 = y.iter().zip(&dw).map(|(a, b)| a.conj() * b).sum();
    let den: C64 = y.iter().zip(pair.w.values()).map(|(a, b)| a.conj() * b).sum();
    if den.norm() == 0.0 {
        return Err(Error::Eigen("left and right eigenvectors are orthogonal".into()));
    }
    Ok(num / den)
}

/// Re-solves near `pair` on a doubled grid and attaches the comparison.
pub fn check_persistence(pair: &mut EigenPair, doubled: &OperatorMatrix) -> Result<bool> {
    let vals = eigenvalues(doubled)?;
    let k = nearest_index(&vals, pair.lambda);
    let delta = (vals[k] - pair.lambda).norm();
    let start = RadialProfile::from_fn(doubled.grid(), |r| C64::new((-r * r / 8.0).exp() * r.powi(doubled.grid().order() as i32), 0.0));
    let lu_start = refine(doubled, vals[k], &start, 3)?;
    pair.doubled = Some(Persistence { lambda: lu_start.lambda, residual: lu_start.residual, delta });
    Ok(delta < PERSISTENCE_TOL)
}

/// Modes with Re λ > w that persist on the doubled grid.
pub fn unstable_modes(
    m: &OperatorMatrix,
    w: f64,
    assemble: &(dyn Fn(&Arc<RadialGrid>) -> Result<OperatorMatrix> + Sync),
) -> Result<Vec<EigenPair>> {
    let candidates: Vec<EigenPair> = full_spectrum(m)?.into_iter().filter(|p| p.lambda.re > w).collect();
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let doubled = assemble(&m.grid().with_len(2 * m.dim())?)?;
    let mut out = Vec::new();
    for mut pair in candidates {
        if check_persistence(&mut pair, &doubled)? {
            out.push(pair);
        } else {
            log::warn!(
                "discarding non-persistent mode λ = {:.6e}{:+.6e}i (moved {:.3e} under grid doubling)",
                pair.lambda.re,
                pair.lambda.im,
                pair.doubled.map(|d| d.delta).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(out)
}

/// Persistence of every eigenvalue of `vals` against the doubled-grid spectrum.
pub fn persistence_flags(vals: &[C64], doubled: &[C64]) -> Vec<bool> {
    vals.iter().map(|v| (doubled[nearest_index(doubled, *v)] - v).norm() < PERSISTENCE_TOL).collect()
}

/// The linearization about a vortex on harmonic n, assemblable on any grid.
#[derive(Debug, Clone)]
pub struct LinearizedProblem {
    pub vortex: Vortex,
    pub spec: OperatorSpec,
}

impl LinearizedProblem {
    pub fn new(vortex: Vortex, n: i32, beta: f64, convention: ShiftConvention) -> Self {
        let spec = OperatorSpec { n, alpha: vortex.alpha(), beta, parts: Parts::ALL, convention };
        LinearizedProblem { vortex, spec }
    }

    pub fn affine(&self, grid: &Arc<RadialGrid>) -> Result<AffineOperator> {
        AffineOperator::new(self.spec, &VortexSamples::new(&self.vortex, grid))
    }

    pub fn assemble(&self, grid: &Arc<RadialGrid>, nu: f64) -> Result<OperatorMatrix> {
        Ok(self.affine(grid)?.at(nu))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub overlap: f64,
    pub tol: f64,
    pub continuity_factor: f64,
    pub stop_at_threshold: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 1e-3,
            max_step: 1e-1,
            min_step: 1e-9,
            overlap: 0.5,
            tol: DEFAULT_EIGEN_TOL,
            continuity_factor: 10.0,
            stop_at_threshold: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Reached,
    Threshold { nu_star: f64 },
    BranchLoss { diagnostic: String },
}

#[derive(Debug, Clone)]
pub struct PathEntry {
    pub pair: EigenPair,
    /// dλ/dν at this point.
    pub slope: C64,
    /// Step taken to arrive here (0 for the seed).
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuationPath {
    pub entries: Vec<PathEntry>,
    pub termination: Termination,
    /// Re λ at the start divided by two.
    pub threshold: f64,
    /// |λ_{ν+δν} − λ_ν| ≤ factor·δν·max local |dλ/dν| holds for every step.
    pub continuity_factor: f64,
    pub steps_halved: usize,
}

impl ContinuationPath {
    pub fn last(&self) -> &PathEntry {
        self.entries.last().expect("path has a seed entry")
    }

    /// Largest ν on the path with Re λ_ν above the threshold, when it started unstable.
    pub fn nu_star(&self) -> Option<f64> {
        if self.threshold <= 0.0 {
            return None;
        }
        self.entries.iter().filter(|e| e.pair.lambda.re > self.threshold).map(|e| e.pair.nu).fold(None, |a, b| Some(a.map_or(b, |a: f64| a.max(b))))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(String, String)]) -> Result<()> {
        for (k, v) in meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "nu,re_lambda,im_lambda,residual")?;
        for e in &self.entries {
            writeln!(out, "{:.17e},{:.17e},{:.17e},{:.6e}", e.pair.nu, e.pair.lambda.re, e.pair.lambda.im, e.pair.residual)?;
        }
        Ok(())
    }
}

fn overlap(a: &RadialProfile, b: &RadialProfile) -> f64 {
    a.inner(b).map(|z| z.norm() / (a.norm() * b.norm())).unwrap_or(0.0)
}

enum Match {
    Found(EigenPair),
    Ambiguous(String),
}

fn match_branch(m: &OperatorMatrix, prev: &EigenPair, predicted: C64, opts: &ContinuationOptions) -> Result<Match> {
    let (vals, vecs) = eig(m.matrix())?;
    let grid = m.grid().clone();
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| (vals[a] - predicted).norm().total_cmp(&(vals[b] - predicted).norm()));
    let d0 = (vals[idx[0]] - predicted).norm();
    let near: Vec<(usize, f64)> = idx
        .iter()
        .take(6)
        .filter(|&&k| (vals[k] - predicted).norm() <= 2.0 * d0 + 1e-14)
        .map(|&k| {
            let v = normalize(&grid, (0..m.dim()).map(|i| vecs[(i, k)]).collect()).expect("eigenvector");
            (k, overlap(&prev.w, &v))
        })
        .collect();
    let mut ranked = near.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (k, o) = ranked[0];
    if o <= opts.overlap {
        return Ok(Match::Ambiguous(format!("best overlap {o:.3} at λ = {:.6e}{:+.6e}i", vals[k].re, vals[k].im)));
    }
    if let Some(&(k2, o2)) = ranked.get(1) {
        if o2 > opts.overlap && o - o2 < 0.1 {
            return Ok(Match::Ambiguous(format!(
                "candidates λ = {:.6e}{:+.6e}i and {:.6e}{:+.6e}i have overlaps {o:.3} and {o2:.3}",
                vals[k].re, vals[k].im, vals[k2].re, vals[k2].im
            )));
        }
    }
    let start = RadialProfile::new(grid, (0..m.dim()).map(|i| vecs[(i, k)]).collect())?;
    Ok(Match::Found(refine(m, vals[k], &start, 2)?))
}

/// Tracks the branch of `seed` from ν_start to ν_end with adaptive steps.
pub fn continue_in_nu(
    op: &AffineOperator,
    nu_start: f64,
    nu_end: f64,
    seed: &EigenPair,
    opts: &ContinuationOptions,
) -> Result<ContinuationPath> {
    if !(nu_start >= 0.0 && nu_end >= nu_start) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ ν_start ≤ ν_end, got [{nu_start}, {nu_end}]")));
    }
    let m0 = op.at(nu_start);
    let r0 = residual(&m0, seed.lambda, &seed.w);
    if !(r0 < opts.tol) {
        return Err(Error::Precondition(format!("seed residual {r0:.3e} exceeds {:.1e} at ν = {nu_start}", opts.tol)));
    }
    let mut first = seed.clone();
    first.nu = nu_start;
    first.residual = r0;
    let slope = eigen_slope(&m0, op.derivative(), &first)?;
    let threshold = first.lambda.re / 2.0;
    let mut path = ContinuationPath {
        entries: vec![PathEntry { pair: first, slope, step: 0.0 }],
        termination: Termination::Reached,
        threshold,
        continuity_factor: opts.continuity_factor,
        steps_halved: 0,
    };
    let mut step = opts.initial_step.min(opts.max_step);
    let mut clean = 0usize;
    let mut nu = nu_start;
    while nu < nu_end {
        let prev = path.last().clone();
        let h = step.min(nu_end - nu);
        let next_nu = if nu_end - nu <= step { nu_end } else { nu + h };
        let m = op.at(next_nu);
        let predicted = prev.pair.lambda + prev.slope * h;
        let outcome = match match_branch(&m, &prev.pair, predicted, opts)? {
            Match::Found(pair) => {
                let slope = eigen_slope(&m, op.derivative(), &pair)?;
                let bound = opts.continuity_factor * h * prev.slope.norm().max(slope.norm());
                let jump = (pair.lambda - prev.pair.lambda).norm();
                if jump <= bound {
                    Ok((pair, slope))
                } else {
                    Err(format!("jump {jump:.3e} exceeds continuity bound {bound:.3e}"))
                }
            }
            Match::Ambiguous(d) => Err(d),
        };
        match outcome {
            Ok((pair, slope)) => {
                if pair.residual >= opts.tol {
                    return Err(Error::Eigen(format!("residual {:.3e} at ν = {next_nu} exceeds tolerance", pair.residual)));
                }
                nu = next_nu;
                let crossed = threshold > 0.0 && pair.lambda.re <= threshold;
                path.entries.push(PathEntry { pair, slope, step: h });
                clean += 1;
                if clean >= 3 {
                    step = (2.0 * step).min(opts.max_step);
                    clean = 0;
                }
                if crossed && opts.stop_at_threshold {
                    path.termination = Termination::Threshold { nu_star: path.nu_star().unwrap_or(nu_start) };
                    return Ok(path);
                }
            }
            Err(diagnostic) => {
                step /= 2.0;
                clean = 0;
                path.steps_halved += 1;
                if step < opts.min_step {
                    log::warn!("branch lost near ν = {nu}: {diagnostic}");
                    path.termination = Termination::BranchLoss { diagnostic };
                    return Ok(path);
                }
            }
        }
    }
    Ok(path)
}

/// Shipped vortex families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    GaussRing,
    GaussSum,
    SplineBump,
}

impl FamilyId {
    pub fn name(self) -> &'static str {
        match self {
            FamilyId::GaussRing => "gauss-ring",
            FamilyId::GaussSum => "gauss-sum",
            FamilyId::SplineBump => "spline-bump",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gauss-ring" => Ok(FamilyId::GaussRing),
            "gauss-sum" => Ok(FamilyId::GaussSum),
            "spline-bump" => Ok(FamilyId::SplineBump),
            other => Err(Error::InvalidParameter(format!("unknown vortex family {other:?}"))),
        }
    }
}

const BUMP_CENTERS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
const BUMP_WIDTH: f64 = 1.0;

/// A parametrized family of zero-mean vortices with box bounds and a seed list.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexFamily {
    pub id: FamilyId,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub seeds: Vec<Vec<f64>>,
}

impl VortexFamily {
    pub fn standard(id: FamilyId) -> Self {
        match id {
            FamilyId::GaussRing => VortexFamily {
                id,
                lower: vec![0.02],
                upper: vec![1.0],
                seeds: vec![vec![0.1], vec![0.05], vec![0.2], vec![0.4]],
            },
            FamilyId::GaussSum => VortexFamily {
                id,
                lower: vec![-3.0, 0.02, 0.02],
                upper: vec![3.0, 1.0, 1.0],
                seeds: vec![vec![-0.5, 0.1, 0.3], vec![1.0, 0.05, 0.2], vec![-1.5, 0.2, 0.1]],
            },
            FamilyId::SplineBump => VortexFamily {
                id,
                lower: vec![-2.0; 5],
                upper: vec![2.0; 5],
                seeds: vec![vec![1.0, 0.5, 0.0, -0.5, -0.5], vec![0.0, 1.0, 0.0, -1.0, 0.0], vec![1.0, 0.0, -1.0, 0.0, 0.5]],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn in_bounds(&self, params: &[f64]) -> bool {
        params.len() == self.dim() && params.iter().zip(self.lower.iter().zip(&self.upper)).all(|(p, (l, u))| p >= l && p <= u)
    }

    /// Θ̄ on `grid` for the given parameters, zero mean by construction.
    pub fn profile(&self, params: &[f64], grid: &Arc<RadialGrid>) -> Result<RadialProfile> {
        if !self.in_bounds(params) {
            return Err(Error::InvalidParameter(format!("{} parameters {params:?} outside bounds", self.id.name())));
        }
        let raw = match self.id {
            FamilyId::GaussRing => {
                let b = params[0];
                return Ok(RadialProfile::from_real_fn(grid, |r| (1.0 - b * r * r) * (-b * r * r).exp()));
            }
            FamilyId::GaussSum => {
                let (a, b1, b2) = (params[0], params[1], params[2]);
                RadialProfile::from_real_fn(grid, |r| (-b1 * r * r).exp() + a * (-b2 * r * r).exp())
            }
            FamilyId::SplineBump => RadialProfile::from_real_fn(grid, |r| {
                params
                    .iter()
                    .zip(BUMP_CENTERS)
                    .map(|(c, ri)| c * ((-(r - ri) * (r - ri) / (BUMP_WIDTH * BUMP_WIDTH)).exp() + (-(r + ri) * (r + ri) / (BUMP_WIDTH * BUMP_WIDTH)).exp()))
                    .sum()
            }),
        };
        let b = match self.id {
            FamilyId::GaussSum => 0.5 * (params[1] + params[2]),
            _ => 0.25,
        };
        let phi = RadialProfile::from_real_fn(grid, |r| 2.0 * b * b * r * r * (-b * r * r).exp());
        let c = integrate(&raw) / integrate(&phi);
        phi.axpy(-c, &raw)
    }

    pub fn generate(&self, params: &[f64], grid: &Arc<RadialGrid>, alpha: f64) -> Result<Vortex> {
        let theta = self.profile(params, grid)?;
        let record = FamilyRecord { family: self.id.name().into(), params: params.to_vec() };
        Vortex::new(theta, alpha, Some(record), 1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub len: usize,
    pub r_max: f64,
    pub beta: f64,
    pub convention: ShiftConvention,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { len: 256, r_max: 30.0, beta: 2.0, convention: ShiftConvention::Definition }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    InstabilityFound,
    NoInstabilityFound,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub params: Vec<f64>,
    pub vortex: Vortex,
    pub pair: EigenPair,
    pub status: SearchStatus,
    pub evaluations: usize,
    /// Every evaluation as (params, max Re λ) in start order.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// max Re λ of L_0 for the family member; −∞ outside the bounds or on failure.
pub fn objective(family: &VortexFamily, params: &[f64], n: i32, alpha: f64, opts: &SearchOptions) -> f64 {
    let eval = || -> Result<f64> {
        let vgrid = build_grid(0, opts.len, opts.r_max)?;
        let vortex = family.generate(params, &vgrid, alpha)?;
        let grid = build_grid(n.unsigned_abs(), opts.len, opts.r_max)?;
        let m = LinearizedProblem::new(vortex, n, opts.beta, opts.convention).assemble(&grid, 0.0)?;
        Ok(eigenvalues(&m)?[0].re)
    };
    if !family.in_bounds(params) {
        return f64::NEG_INFINITY;
    }
    eval().unwrap_or(f64::NEG_INFINITY)
}

/// Bounded Nelder–Mead maximization limited to `budget` objective evaluations.
fn nelder_mead(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    scale: &[f64],
    budget: usize,
) -> Vec<(Vec<f64>, f64)> {
    let mut history = Vec::new();
    let eval = |x: &[f64], h: &mut Vec<(Vec<f64>, f64)>| -> Option<f64> {
        if h.len() >= budget {
            return None;
        }
        let v = f(x);
        h.push((x.to_vec(), v));
        Some(v)
    };
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::new();
    match eval(x0, &mut history) {
        Some(v) => simplex.push((x0.to_vec(), v)),
        None => return history,
    }
    for j in 0..d {
        let mut x = x0.to_vec();
        x[j] += scale[j];
        match eval(&x, &mut history) {
            Some(v) => simplex.push((x, v)),
            None => return history,
        }
    }
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    loop {
        simplex.sort_by(by_value);
        let spread = simplex.iter().map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if spread < 1e-6 {
            return history;
        }
        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let Some(fr) = eval(&xr, &mut history) else { return history };
        if fr > simplex[0].1 {
            let xe = along(2.0);
            let Some(fe) = eval(&xe, &mut history) else { return history };
            simplex[d] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let xc = if fr > worst.1 { along(0.5) } else { along(-0.5) };
        let Some(fc) = eval(&xc, &mut history) else { return history };
        if fc > worst.1.max(fr) || (fr <= worst.1 && fc > worst.1) {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for i in 1..=d {
            let x: Vec<f64> = best.iter().zip(&simplex[i].0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let Some(v) = eval(&x, &mut history) else { return history };
            simplex[i] = (x, v);
        }
    }
}

/// Multi-start derivative-free maximization of Re λ_max(ν = 0) over the family; the best member of each start is
/// kept only if its leading mode persists under grid doubling.
pub fn vortex_search(family: &VortexFamily, n: i32, alpha: f64, budget: usize, opts: &SearchOptions) -> Result<SearchOutcome> {
    if n.abs() < 2 {
        return Err(Error::InvalidParameter(format!("vortex search needs |n| ≥ 2, got {n}")));
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("search budget must be at least 1".into()));
    }
    let starts = family.seeds.len();
    let shares: Vec<usize> = (0..starts).map(|i| budget / starts + usize::from(i < budget % starts)).collect();
    let scale: Vec<f64> = family.lower.iter().zip(&family.upper).map(|(l, u)| 0.1 * (u - l)).collect();
    let f = |x: &[f64]| objective(family, x, n, alpha, opts);
    // populate the shared plans before the parallel starts
    f(&family.seeds[0]);
    let runs: Vec<Vec<(Vec<f64>, f64)>> = family
        .seeds
        .par_iter()
        .zip(shares.par_iter())
        .map(|(seed, &share)| if share == 0 { Vec::new() } else { nelder_mead(&f, seed, &scale, share) })
        .collect();
    let mut ranked: Vec<(Vec<f64>, f64)> =
        runs.iter().filter_map(|run| run.iter().filter(|h| h.1 > GROWTH_TOL).max_by(|a, b| a.1.total_cmp(&b.1)).cloned()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let history: Vec<(Vec<f64>, f64)> = runs.into_iter().flatten().collect();
    let mut best = history[0].clone();
    for h in &history[1..] {
        let better = h.1 > best.1 || (h.1 == best.1 && h.0.iter().zip(&best.0).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less));
        if better {
            best = h.clone();
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Eigen(format!("no valid family member evaluated ({} evaluations)", history.len())));
    }
    let mut fallback = None;
    for (params, _) in &ranked {
        let (vortex, pair, persistent) = settle(family, params, n, alpha, opts)?;
        if persistent {
            return Ok(SearchOutcome { params: params.clone(), vortex, pair, status: SearchStatus::InstabilityFound, evaluations: history.len(), history });
        }
        log::warn!("discarding family member {params:?}: λ = {:.6e}{:+.6e}i does not persist under grid doubling", pair.lambda.re, pair.lambda.im);
        fallback.get_or_insert((params.clone(), vortex, pair));
    }
    let (params, vortex, pair) = match fallback {
        Some(f) => f,
        None => {
            let (vortex, pair, _) = settle(family, &best.0, n, alpha, opts)?;
            (best.0, vortex, pair)
        }
    };
    Ok(SearchOutcome { params, vortex, pair, status: SearchStatus::NoInstabilityFound, evaluations: history.len(), history })
}

/// Leading ν = 0 pair for one family member and whether it persists on the doubled grid.
fn settle(family: &VortexFamily, params: &[f64], n: i32, alpha: f64, opts: &SearchOptions) -> Result<(Vortex, EigenPair, bool)> {
    let vgrid = build_grid(0, opts.len, opts.r_max)?;
    let vortex = family.generate(params, &vgrid, alpha)?;
    let grid = build_grid(n.unsigned_abs(), opts.len, opts.r_max)?;
    let problem = LinearizedProblem::new(vortex.clone(), n, opts.beta, opts.convention);
    let mut pair = full_spectrum(&problem.assemble(&grid, 0.0)?)?.swap_remove(0);
    let persistent = check_persistence(&mut pair, &problem.assemble(&grid.with_len(2 * opts.len)?, 0.0)?)?;
    let growing = persistent && pair.lambda.re > GROWTH_TOL;
    Ok((vortex, pair, growing))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: i32,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    #[serde(rename = "N")]
    pub len: usize,
    pub r_max: f64,
    pub convention: ShiftConvention,
    pub modes: Vec<ModeRecord>,
}

impl SpectrumReport {
    pub fn new(m: &OperatorMatrix, pairs: &[EigenPair], persistent: &[bool]) -> Self {
        SpectrumReport {
            n: m.n,
            alpha: m.alpha,
            beta: m.beta,
            nu: m.nu,
            len: m.dim(),
            r_max: m.grid().r_max(),
            convention: m.convention,
            modes: pairs
                .iter()
                .zip(persistent)
                .map(|(p, &persistent)| ModeRecord { re: p.lambda.re, im: p.lambda.im, residual: p.residual, persistent })
                .collect(),
        }
    }
}
