//! Discrete Hankel transforms and radial Fourier multipliers (Λ^s) on harmonic-n fields.

use crate::error::{Error, Result};
use crate::linalg::real_matvec;
use crate::quadrature::gauss_legendre;
use crate::radial::{integrate, GridKey, RadialGrid, RadialProfile};
use crate::special::{bessel_j, bessel_j_prime};
use crate::C64;
use faer::{Mat, Side};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// How a multiplier ρ^s is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    /// Diagonal scaling between the two discrete grids; composes exactly.
    Spectral,
    /// Continuous ρ-quadrature of the Hankel integral; accurate for slowly decaying outputs.
    FreeSpace,
}

/// Radial kernel used when a multiplier is evaluated off-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutKernel {
    /// J_k(ρR)
    Bessel(u32),
    /// ∂_R J_k(ρR) = ρ J_k'(ρR)
    BesselDerivative(u32),
}

impl OutKernel {
    fn eval(self, rho: f64, r: f64) -> f64 {
        match self {
            OutKernel::Bessel(k) => bessel_j(k, rho * r),
            OutKernel::BesselDerivative(k) => rho * bessel_j_prime(k, rho * r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum KernelTag {
    Series { derivative: bool },
    Free(OutKernel),
}

struct FreeSpace {
    rho: Vec<f64>,
    wq: Vec<f64>,
    // J_n(ρ_m R_l)
    a: Mat<f64>,
}

/// Transform matrices for one grid and its dual frequency grid.
pub struct HankelPlan {
    grid: Arc<RadialGrid>,
    dual: Arc<RadialGrid>,
    fwd: Mat<f64>,
    bwd: Mat<f64>,
    deriv: OnceLock<Mat<f64>>,
    dilation: OnceLock<Mat<f64>>,
    free: OnceLock<FreeSpace>,
    node_kernels: Mutex<HashMap<(GridKey, KernelTag), Arc<Mat<f64>>>>,
}

impl std::fmt::Debug for HankelPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HankelPlan(n={}, N={}, Rmax={})", self.grid.order(), self.grid.len(), self.grid.r_max())
    }
}

impl HankelPlan {
    pub fn new(grid: &Arc<RadialGrid>) -> Self {
        let n = grid.order();
        let len = grid.len();
        let z = grid.zeros();
        let s = grid.last_zero();
        let a = grid.jnext();
        let mut c = Mat::<f64>::zeros(len, len);
        for j in 0..len {
            for k in 0..=j {
                let v = 2.0 * bessel_j(n, z[j] * z[k] / s) / (s * a[j] * a[k]);
                c[(j, k)] = v;
                c[(k, j)] = v;
            }
        }
        // replace the nearly involutory matrix by its orthogonal polar factor
        let eig = c.self_adjoint_eigen(Side::Lower).expect("symmetric eigensolver");
        let q = eig.U();
        let sign: Vec<f64> = (0..len).map(|i| eig.S()[i].signum()).collect();
        let qs = Mat::<f64>::from_fn(len, len, |i, j| q[(i, j)] * sign[j]);
        let corth = &qs * q.transpose();
        let dual = grid.dual();
        let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
        let swd: Vec<f64> = dual.weights().iter().map(|w| w.sqrt()).collect();
        let fwd = Mat::<f64>::from_fn(len, len, |j, k| corth[(j, k)] * sw[k] / swd[j]);
        let bwd = Mat::<f64>::from_fn(len, len, |k, j| corth[(k, j)] * swd[j] / sw[k]);
        HankelPlan {
            grid: grid.clone(),
            dual,
            fwd,
            bwd,
            deriv: OnceLock::new(),
            dilation: OnceLock::new(),
            free: OnceLock::new(),
            node_kernels: Mutex::new(HashMap::new()),
        }
    }

    /// Process-wide shared plan for a grid.
    pub fn shared(grid: &Arc<RadialGrid>) -> Arc<HankelPlan> {
        static CACHE: OnceLock<Mutex<HashMap<GridKey, Arc<HankelPlan>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(p) = cache.lock().unwrap().get(&grid.key()) {
            return p.clone();
        }
        let plan = Arc::new(HankelPlan::new(grid));
        cache.lock().unwrap().entry(grid.key()).or_insert(plan).clone()
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn dual(&self) -> &Arc<RadialGrid> {
        &self.dual
    }
    pub fn forward_matrix(&self) -> &Mat<f64> {
        &self.fwd
    }
    pub fn backward_matrix(&self) -> &Mat<f64> {
        &self.bwd
    }

    fn check(&self, p: &RadialProfile) -> Result<()> {
        if p.grid().as_ref() != self.grid.as_ref() {
            return Err(Error::GridMismatch(format!(
                "profile grid (n={}, N={}) does not match plan grid (n={}, N={})",
                p.grid().order(),
                p.len(),
                self.grid.order(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Discrete transform values at the dual nodes ρ_j.
    pub fn spectrum(&self, p: &RadialProfile) -> Vec<C64> {
        real_matvec(&self.fwd, p.values())
    }

    /// Fraction of the spectral energy carried by the top tenth of the frequency band.
    pub fn spectral_tail(&self, p: &RadialProfile) -> f64 {
        let f = self.spectrum(p);
        let w = self.dual.weights();
        let total: f64 = f.iter().zip(w).map(|(v, w)| w * v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let start = self.grid.len() - self.grid.len() / 10;
        let tail: f64 = f[start..].iter().zip(&w[start..]).map(|(v, w)| w * v.norm_sqr()).sum();
        (tail / total).sqrt()
    }

    /// The Fourier-Bessel series of p at arbitrary radii (zero beyond R_max).
    pub fn evaluate(&self, p: &RadialProfile, radii: &[f64]) -> Vec<C64> {
        self.series_at(p, radii, false)
    }

    /// ∂_R of the Fourier-Bessel series at arbitrary radii.
    pub fn evaluate_derivative(&self, p: &RadialProfile, radii: &[f64]) -> Vec<C64> {
        self.series_at(p, radii, true)
    }

    fn series_at(&self, p: &RadialProfile, radii: &[f64], derivative: bool) -> Vec<C64> {
        let n = self.grid.order();
        let f = self.spectrum(p);
        let rho = self.dual.nodes();
        let wd = self.dual.weights();
        let coef: Vec<C64> = f.iter().zip(wd).map(|(v, w)| v * w).collect();
        let r_max = self.grid.r_max();
        radii
            .par_iter()
            .map(|&r| {
                if r > r_max * (1.0 + 1e-12) {
                    return C64::new(0.0, 0.0);
                }
                coef.iter()
                    .zip(rho)
                    .map(|(c, &q)| {
                        if derivative {
                            c * (q * bessel_j_prime(n, q * r))
                        } else {
                            c * bessel_j(n, q * r)
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Kernel matrix from this plan's frequencies to the nodes of `target`, cached per target grid.
    fn node_kernel(&self, target: &Arc<RadialGrid>, tag: KernelTag) -> Arc<Mat<f64>> {
        let key = (target.key(), tag);
        if let Some(k) = self.node_kernels.lock().unwrap().get(&key) {
            return k.clone();
        }
        let r = target.nodes();
        let r_max = self.grid.r_max() * (1.0 + 1e-12);
        let rows: Vec<Vec<f64>> = match tag {
            KernelTag::Series { derivative } => {
                let n = self.grid.order();
                let rho = self.dual.nodes();
                r.par_iter()
                    .map(|&x| {
                        rho.iter()
                            .map(|&q| match (x > r_max, derivative) {
                                (true, _) => 0.0,
                                (false, false) => bessel_j(n, q * x),
                                (false, true) => q * bessel_j_prime(n, q * x),
                            })
                            .collect()
                    })
                    .collect()
            }
            KernelTag::Free(kernel) => {
                let rho = &self.free().rho;
                r.par_iter().map(|&x| rho.iter().map(|&q| kernel.eval(q, x)).collect()).collect()
            }
        };
        let k = Arc::new(Mat::<f64>::from_fn(r.len(), rows[0].len(), |i, j| rows[i][j]));
        self.node_kernels.lock().unwrap().entry(key).or_insert(k).clone()
    }

    fn series_coefficients(&self, p: &RadialProfile) -> Vec<C64> {
        self.spectrum(p).iter().zip(self.dual.weights()).map(|(v, w)| v * w).collect()
    }

    /// The Fourier-Bessel series of p at the nodes of another grid with the same or smaller R_max.
    pub fn evaluate_on(&self, p: &RadialProfile, target: &Arc<RadialGrid>) -> Vec<C64> {
        real_matvec(&self.node_kernel(target, KernelTag::Series { derivative: false }), &self.series_coefficients(p))
    }

    /// ∂_R of the Fourier-Bessel series at the nodes of `target`.
    pub fn evaluate_derivative_on(&self, p: &RadialProfile, target: &Arc<RadialGrid>) -> Vec<C64> {
        real_matvec(&self.node_kernel(target, KernelTag::Series { derivative: true }), &self.series_coefficients(p))
    }

    /// Free-space multiplier ρ^s with output kernel `kernel`, at the nodes of `target`.
    pub fn multiplier_on(&self, p: &RadialProfile, s: f64, target: &Arc<RadialGrid>, kernel: OutKernel) -> Vec<C64> {
        let g = self.free_weights(s, &self.free_spectrum(p));
        real_matvec(&self.node_kernel(target, KernelTag::Free(kernel)), &g)
    }

    /// Spectral differentiation matrix on the grid nodes.
    pub fn derivative_matrix(&self) -> &Mat<f64> {
        self.deriv.get_or_init(|| {
            let n = self.grid.order();
            let len = self.grid.len();
            let z = self.grid.zeros();
            let s = self.grid.last_zero();
            let rho = self.dual.nodes();
            let wd = self.dual.weights();
            let cols: Vec<Vec<f64>> = (0..len)
                .into_par_iter()
                .map(|j| (0..len).map(|k| bessel_j_prime(n, z[k] * z[j] / s) * wd[j] * rho[j]).collect())
                .collect();
            let jd = Mat::<f64>::from_fn(len, len, |k, j| cols[j][k]);
            &jd * &self.fwd
        })
    }

    pub fn derivative(&self, p: &RadialProfile) -> RadialProfile {
        let v = real_matvec(self.derivative_matrix(), p.values());
        RadialProfile::new(self.grid.clone(), v).expect("same length")
    }

    /// R∂_R in energy-consistent form: its symmetric part is exactly −I in the
    /// quadrature inner product, as for the continuous operator on L²(R dR).
    pub fn dilation_matrix(&self) -> &Mat<f64> {
        self.dilation.get_or_init(|| {
            let d = self.derivative_matrix();
            let r = self.grid.nodes();
            let w = self.grid.weights();
            let len = self.grid.len();
            Mat::<f64>::from_fn(len, len, |k, l| {
                let g_kl = r[k] * d[(k, l)];
                let g_lk = r[l] * d[(l, k)];
                0.5 * (g_kl - g_lk * w[l] / w[k]) - if k == l { 1.0 } else { 0.0 }
            })
        })
    }

    pub fn dilation(&self, p: &RadialProfile) -> RadialProfile {
        let v = real_matvec(self.dilation_matrix(), p.values());
        RadialProfile::new(self.grid.clone(), v).expect("same length")
    }

    /// Discrete multiplier matrix B diag(ρ^s) F.
    pub fn spectral_multiplier_matrix(&self, s: f64) -> Mat<f64> {
        let rho = self.dual.nodes();
        let len = self.grid.len();
        let scaled = Mat::<f64>::from_fn(len, len, |j, k| rho[j].powf(s) * self.fwd[(j, k)]);
        &self.bwd * &scaled
    }

    fn free(&self) -> &FreeSpace {
        self.free.get_or_init(|| {
            let (rho, wq) = rho_quadrature(self.grid.rho_max(), self.grid.r_max());
            let n = self.grid.order();
            let r = self.grid.nodes();
            let rows: Vec<Vec<f64>> = rho.par_iter().map(|&q| r.iter().map(|&x| bessel_j(n, q * x)).collect()).collect();
            let a = Mat::<f64>::from_fn(rho.len(), r.len(), |m, l| rows[m][l]);
            FreeSpace { rho, wq, a }
        })
    }

    /// Continuous Hankel transform of the grid interpolant at the quadrature frequencies.
    fn free_spectrum(&self, p: &RadialProfile) -> Vec<C64> {
        let fs = self.free();
        let wp: Vec<C64> = p.values().iter().zip(self.grid.weights()).map(|(v, w)| v * w).collect();
        real_matvec(&fs.a, &wp)
    }

    fn free_weights(&self, s: f64, f: &[C64]) -> Vec<C64> {
        let fs = self.free();
        f.iter().zip(&fs.rho).zip(&fs.wq).map(|((v, &q), &w)| v * (w * q.powf(s + 1.0))).collect()
    }

    /// Matrix of the free-space multiplier ρ^s evaluated back on the grid nodes.
    pub fn free_multiplier_matrix(&self, s: f64) -> Mat<f64> {
        let fs = self.free();
        let m = fs.rho.len();
        let len = self.grid.len();
        let w = self.grid.weights();
        let scaled = Mat::<f64>::from_fn(m, len, |i, l| fs.wq[i] * fs.rho[i].powf(s + 1.0) * fs.a[(i, l)] * w[l]);
        fs.a.transpose() * &scaled
    }

    /// ∫₀^{ρ_max} ρ^s 𝓗_n[p](ρ) K(ρR) ρ dρ at arbitrary radii.
    pub fn multiplier_at(&self, p: &RadialProfile, s: f64, radii: &[f64], kernel: OutKernel) -> Vec<C64> {
        let f = self.free_spectrum(p);
        let g = self.free_weights(s, &f);
        let rho = &self.free().rho;
        radii
            .par_iter()
            .map(|&r| g.iter().zip(rho).map(|(c, &q)| c * kernel.eval(q, r)).sum())
            .collect()
    }

    /// Free-space multiplier evaluated on the grid nodes.
    pub fn multiplier_nodes(&self, p: &RadialProfile, s: f64) -> Vec<C64> {
        let f = self.free_spectrum(p);
        let g = self.free_weights(s, &f);
        let fs = self.free();
        let x = Mat::<f64>::from_fn(g.len(), 2, |i, j| if j == 0 { g[i].re } else { g[i].im });
        let y = fs.a.transpose() * &x;
        (0..y.nrows()).map(|i| C64::new(y[(i, 0)], y[(i, 1)])).collect()
    }

    /// Inner product ∫ ρ^{2s} conj(𝓗a) 𝓗b ρ dρ by continuous quadrature.
    pub fn sobolev_inner(&self, a: &RadialProfile, b: &RadialProfile, s: f64) -> C64 {
        let fa = self.free_spectrum(a);
        let fb = self.free_spectrum(b);
        let fs = self.free();
        fa.iter()
            .zip(&fb)
            .zip(fs.rho.iter().zip(&fs.wq))
            .map(|((x, y), (&q, &w))| x.conj() * y * (w * q.powf(2.0 * s + 1.0)))
            .sum()
    }
}

/// Composite Gauss-Legendre rule on [0, ρ_max], geometrically graded towards ρ = 0.
fn rho_quadrature(rho_max: f64, r_max: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(16);
    let h = (8.0 / r_max).min(0.5).min(rho_max);
    let mut breaks = vec![0.0];
    for k in (0..40).rev() {
        breaks.push(h * 0.5f64.powi(k + 1));
    }
    let mut b = h;
    while b < rho_max - 1e-12 * rho_max {
        breaks.push(b);
        b += h;
    }
    breaks.push(rho_max);
    let mut rho = Vec::new();
    let mut wq = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        for (t, wt) in x.iter().zip(&w) {
            rho.push(c + hw * t);
            wq.push(hw * wt);
        }
    }
    (rho, wq)
}

fn check_plan(plan: &HankelPlan, p: &RadialProfile) -> Result<()> {
    plan.check(p)
}

/// 𝓗_n[p] sampled on the dual frequency grid.
pub fn hankel(plan: &HankelPlan, p: &RadialProfile) -> Result<RadialProfile> {
    check_plan(plan, p)?;
    RadialProfile::new(plan.dual.clone(), plan.spectrum(p))
}

/// Λ^β p = 𝓗_n[ρ^β 𝓗_n[p]] for 0 < β < 4.
pub fn fractional_laplacian(plan: &HankelPlan, beta: f64, p: &RadialProfile) -> Result<RadialProfile> {
    if !(beta > 0.0 && beta < 4.0) {
        return Err(Error::InvalidParameter(format!("fractional Laplacian order must lie in (0, 4), got {beta}")));
    }
    let out = multiplier(plan, beta, p, Realization::Spectral)?;
    let tail = plan.spectral_tail(p);
    if tail > 1e-10 {
        log::warn!("Λ^{beta} applied to a profile with spectral tail {tail:e}");
    }
    Ok(out)
}

/// Λ^s p for s < 0, by continuous quadrature in ρ.
pub fn riesz(plan: &HankelPlan, s: f64, p: &RadialProfile) -> Result<RadialProfile> {
    riesz_with(plan, s, p, Realization::FreeSpace)
}

pub fn riesz_with(plan: &HankelPlan, s: f64, p: &RadialProfile, realization: Realization) -> Result<RadialProfile> {
    if !(s < 0.0) {
        return Err(Error::InvalidParameter(format!("Riesz potential needs s < 0, got {s}")));
    }
    check_plan(plan, p)?;
    if plan.grid.order() == 0 && s <= -2.0 + 1e-12 {
        let mean = integrate(p).norm();
        let norm = p.norm();
        if mean > 1e-8 * norm {
            return Err(Error::ZeroMean { mean, norm });
        }
    }
    multiplier(plan, s, p, realization)
}

/// 𝓗_n[ρ^s 𝓗_n[p]] in the chosen realization.
pub fn multiplier(plan: &HankelPlan, s: f64, p: &RadialProfile, realization: Realization) -> Result<RadialProfile> {
    check_plan(plan, p)?;
    let values = match realization {
        Realization::Spectral => {
            let rho = plan.dual.nodes();
            let f: Vec<C64> = plan.spectrum(p).iter().zip(rho).map(|(v, q)| v * q.powf(s)).collect();
            real_matvec(&plan.bwd, &f)
        }
        Realization::FreeSpace => plan.multiplier_nodes(p, s),
    };
    RadialProfile::new(plan.grid.clone(), values)
}

/// R ↦ p(λR). The node values are kept and the grid is dilated to R_max/λ.
pub fn scale_profile(p: &RadialProfile, lambda: f64) -> Result<RadialProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale factor must be positive, got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(p.clone());
    }
    let g = p.grid();
    let target = crate::radial::build_grid(g.order(), g.len(), g.r_max() / lambda)?;
    RadialProfile::new(target, p.values().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;

    fn gauss(g: &Arc<RadialGrid>) -> RadialProfile {
        RadialProfile::from_real_fn(g, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn round_trip_and_parseval() {
        for n in 0..3 {
            let g = build_grid(n, 256, 30.0).unwrap();
            let plan = HankelPlan::new(&g);
            let p = RadialProfile::from_real_fn(&g, |r| r.powi(n as i32) * (-r * r / 2.0).exp());
            let f = hankel(&plan, &p).unwrap();
            let dual = HankelPlan::new(plan.dual());
            let back = hankel(&dual, &f).unwrap();
            assert_eq!(back.grid(), &g);
            let err = back.sub(&p).unwrap().max_abs();
            assert!(err < 1e-10, "n={n} err={err}");
            let rel = (p.norm() - f.norm()).abs() / p.norm();
            assert!(rel < 1e-9);
        }
    }

    #[test]
    fn gaussian_self_reciprocal() {
        let g = build_grid(0, 256, 30.0).unwrap();
        let plan = HankelPlan::new(&g);
        let f = hankel(&plan, &gauss(&g)).unwrap();
        let mut err: f64 = 0.0;
        for (v, &q) in f.values().iter().zip(f.grid().nodes()) {
            if q <= g.rho_max() / 2.0 {
                err = err.max((v.re - (-q * q / 2.0).exp()).abs());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn laplacian_of_gaussian() {
        let g = build_grid(0, 256, 30.0).unwrap();
        let plan = HankelPlan::new(&g);
        let out = fractional_laplacian(&plan, 2.0, &gauss(&g)).unwrap();
        for (v, &r) in out.values().iter().zip(g.nodes()) {
            assert!((v.re - (2.0 - r * r) * (-r * r / 2.0).exp()).abs() < 1e-7);
        }
        let z = fractional_laplacian(&plan, 1.3, &RadialProfile::zeros(&g)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn zero_mean_required_for_strong_riesz() {
        let g = build_grid(0, 128, 30.0).unwrap();
        let plan = HankelPlan::new(&g);
        assert!(matches!(riesz(&plan, -2.0, &gauss(&g)), Err(Error::ZeroMean { .. })));
        let zm = RadialProfile::from_real_fn(&g, |r| (1.0 - r * r) * (-r * r).exp());
        let out = riesz(&plan, -1.0, &zm).unwrap();
        assert!(out.values().iter().all(|v| v.re.is_finite()));
    }

    #[test]
    fn dilation_symmetric_part_is_minus_identity() {
        let g = build_grid(1, 64, 20.0).unwrap();
        let plan = HankelPlan::new(&g);
        let d = plan.dilation_matrix();
        let w = g.weights();
        for k in 0..64 {
            for l in 0..64 {
                let sym = 0.5 * (w[k] * d[(k, l)] + w[l] * d[(l, k)]);
                let expect = if k == l { -w[k] } else { 0.0 };
                assert!((sym - expect).abs() < 1e-12 * w[k].max(w[l]));
            }
        }
    }

    #[test]
    fn scale_by_one_is_identity() {
        let g = build_grid(0, 32, 10.0).unwrap();
        let p = gauss(&g);
        let q = scale_profile(&p, 1.0).unwrap();
        assert_eq!(q.values(), p.values());
        assert_eq!(q.grid(), p.grid());
    }
}
