//! The α-Biot-Savart law on modal fields.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_adaptive};
use crate::radial::{integrate, RadialGrid, RadialProfile};
use crate::special::gamma;
use crate::transforms::{HankelPlan, OutKernel};
use crate::C64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("α must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// C_α = 2^α Γ(1+α/2) / (2π Γ(1−α/2)).
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) / (2.0 * PI * gamma(1.0 - alpha / 2.0)))
}

/// I_{n,α}(σ) = (σ/n) ∫_{−π}^{π} sin γ sin nγ / |σ − e^{iγ}|^{2+α} dγ.
pub fn kernel_i(n: u32, alpha: f64, sigma: f64) -> Result<f64> {
    kernel_i_tol(n, alpha, sigma, 1e-10)
}

fn kernel_i_tol(n: u32, alpha: f64, sigma: f64, tol: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("kernel order must be at least 1".into()));
    }
    check_alpha(alpha)?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("σ must be finite and nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    kernel_core(n, alpha, sigma, (sigma - 1.0).abs(), tol)
}

// `d` is |1 − σ|, passed separately so that it keeps full relative precision near σ = 1
fn kernel_core(n: u32, alpha: f64, sigma: f64, d: f64, tol: f64) -> Result<f64> {
    if d == 0.0 && alpha >= 1.0 {
        return Err(Error::InvalidParameter("I_{n,1}(1) diverges logarithmically".into()));
    }
    let nf = n as f64;
    let p = 0.5 * (2.0 + alpha);
    let f = |g: f64| {
        let s = (0.5 * g).sin();
        let den = d * d + 4.0 * sigma * s * s;
        g.sin() * (nf * g).sin() / den.powf(p)
    };
    let mut breaks = vec![0.0];
    let mut b = if d > 0.0 { d.min(1.0) } else { 1e-12 };
    while b < PI {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(PI);
    let (v, _) = integrate_adaptive(f, &breaks, tol * 1e-3, tol, 20_000)?;
    Ok(2.0 * sigma / nf * v)
}

const TABLE_VERSION: u32 = 1;
const TABLE_LEN: usize = 2048;
const X_MIN: f64 = -24.0;
const X_MAX: f64 = 34.0;

/// Samples of I_{n,α}(σ)/σ^n on logit-spaced σ ∈ (0, 1), x = ln(σ/(1−σ)) ∈ [−24, 34],
/// with cubic interpolation in x; σ > 1 uses I(σ) = σ^{−α} I(1/σ).
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: u32,
    alpha: f64,
    values: Vec<f64>,
}

fn grid_hash() -> String {
    let mut h = Sha256::new();
    h.update(X_MIN.to_le_bytes());
    h.update(X_MAX.to_le_bytes());
    h.update((TABLE_LEN as u64).to_le_bytes());
    let d = h.finalize();
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn x_at(i: usize) -> f64 {
    X_MIN + (X_MAX - X_MIN) * i as f64 / (TABLE_LEN - 1) as f64
}

fn sigma_at(i: usize) -> (f64, f64) {
    let e = (-x_at(i)).exp();
    (1.0 / (1.0 + e), e / (1.0 + e))
}

impl KernelTable {
    pub fn build(n: u32, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(Error::InvalidParameter("kernel order must be at least 1".into()));
        }
        let values = (0..TABLE_LEN)
            .into_par_iter()
            .map(|i| {
                let (s, d) = sigma_at(i);
                kernel_core(n, alpha, s, d, 1e-12).map(|v| v / s.powi(n as i32))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(KernelTable { n, alpha, values })
    }

    /// Process-wide shared table.
    pub fn shared(n: u32, alpha: f64) -> Result<Arc<KernelTable>> {
        static CACHE: OnceLock<Mutex<HashMap<(u32, u64), Arc<KernelTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (n, alpha.to_bits());
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let dir = std::env::var_os("GSQG_CACHE_DIR").map(PathBuf::from);
        let t = Arc::new(KernelTable::load_or_build(n, alpha, dir.as_deref())?);
        Ok(cache.lock().unwrap().entry(key).or_insert(t).clone())
    }

    pub fn order(&self) -> u32 {
        self.n
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cache_file_name(n: u32, alpha: f64) -> String {
        format!("kernel-v{TABLE_VERSION}-n{n}-a{:016x}-{}.bin", alpha.to_bits(), grid_hash())
    }

    /// Reads the table from `dir` if a valid file exists, else builds and stores it.
    pub fn load_or_build(n: u32, alpha: f64, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Self::build(n, alpha);
        };
        let path = dir.join(Self::cache_file_name(n, alpha));
        if let Ok(t) = Self::read(&path, n, alpha) {
            return Ok(t);
        }
        let t = Self::build(n, alpha)?;
        std::fs::create_dir_all(dir)?;
        t.write(&path)?;
        Ok(t)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + 8 * TABLE_LEN);
        buf.extend_from_slice(b"GSQGKT");
        buf.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.n.to_le_bytes());
        buf.extend_from_slice(&self.alpha.to_le_bytes());
        buf.extend_from_slice(grid_hash().as_bytes());
        buf.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    fn read(path: &Path, n: u32, alpha: f64) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = || Error::Parse(format!("stale or corrupt kernel cache {}", path.display()));
        let hash = grid_hash();
        let head = 6 + 4 + 4 + 8 + hash.len() + 8;
        if buf.len() != head + 8 * TABLE_LEN || &buf[..6] != b"GSQGKT" {
            return Err(bad());
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        if u32_at(6) != TABLE_VERSION || u32_at(10) != n || u64_at(14) != alpha.to_bits() {
            return Err(bad());
        }
        if &buf[22..22 + hash.len()] != hash.as_bytes() || u64_at(22 + hash.len()) != TABLE_LEN as u64 {
            return Err(bad());
        }
        let values = buf[head..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(KernelTable { n, alpha, values })
    }

    fn interp_inner(&self, sigma: f64) -> f64 {
        // sigma in [0, 1]
        if sigma <= 0.0 {
            return 0.0;
        }
        let dx = (X_MAX - X_MIN) / (TABLE_LEN - 1) as f64;
        let x = if sigma < 1.0 { (sigma / (1.0 - sigma)).ln() } else { f64::INFINITY };
        let g = if x <= X_MIN {
            self.values[0]
        } else if x >= X_MAX {
            let last = TABLE_LEN - 1;
            if self.alpha >= 1.0 {
                let slope = (self.values[last] - self.values[last - 1]) / dx;
                self.values[last] + slope * (x.min(745.0) - X_MAX)
            } else {
                self.values[last]
            }
        } else {
            let t = (x - X_MIN) / dx;
            let i = (t.floor() as usize).clamp(1, TABLE_LEN - 3);
            let t = t - i as f64;
            let (p0, p1, p2, p3) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
            // four-point Lagrange on nodes −1, 0, 1, 2
            let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
            let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
            let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
            let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
            p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
        };
        g * sigma.powi(self.n as i32)
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        if sigma <= 1.0 {
            self.interp_inner(sigma)
        } else {
            sigma.powf(-self.alpha) * self.interp_inner(1.0 / sigma)
        }
    }
}

fn check_order(n: u32, w: &RadialProfile) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("stream function routes need n ≥ 1".into()));
    }
    if w.grid().order() != n {
        return Err(Error::GridMismatch(format!("profile on order-{} grid, expected order {n}", w.grid().order())));
    }
    Ok(())
}

fn lagrange_weights(xs: &[f64], x: f64, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut l = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != j {
                l *= (x - xm) / (xs[j] - xm);
            }
        }
        *o = l;
    }
}

/// Number of geometric refinement levels towards the diagonal S = R.
pub const DEFAULT_GRADING: usize = 40;

/// ψ = C_α ∫ I_{n,α}(R/S) W(S) S^{1−α} dS by product integration of the local
/// degree-7 interpolant of W, graded towards the singular point S = R.
pub fn streamfunction_kernel(n: u32, alpha: f64, w: &RadialProfile) -> Result<RadialProfile> {
    let table = KernelTable::shared(n, alpha)?;
    streamfunction_kernel_with(&table, w, DEFAULT_GRADING)
}

pub fn streamfunction_kernel_with(table: &KernelTable, w: &RadialProfile, grading: usize) -> Result<RadialProfile> {
    let n = table.order();
    let alpha = table.alpha();
    check_order(n, w)?;
    let g = w.grid();
    let edge = w.edge_ratio();
    if edge > 1e-6 {
        log::warn!("kernel stream function of a tail-dominated profile (edge ratio {edge:e})");
    }
    let len = g.len();
    let mut pts = Vec::with_capacity(len + 2);
    pts.push(0.0);
    pts.extend_from_slice(g.nodes());
    pts.push(g.r_max());
    let mut vals = vec![C64::new(0.0, 0.0)];
    vals.extend_from_slice(w.values());
    vals.push(C64::new(0.0, 0.0));
    let ca = c_alpha(alpha)?;
    let (gx, gw) = gauss_legendre(8);
    let deg = 7usize;
    let last = pts.len() - 1;
    let stencil = |i: usize| {
        let lo = (i as isize - (deg as isize - 1) / 2).max(0) as usize;
        let lo = lo.min(last - deg);
        lo..lo + deg + 1
    };
    let out: Vec<C64> = (0..len)
        .into_par_iter()
        .map(|k| {
            let r = pts[k + 1];
            let mut acc = C64::new(0.0, 0.0);
            let mut lw = vec![0.0; deg + 1];
            for i in 0..last {
                let (a, b) = (pts[i], pts[i + 1]);
                let st = stencil(i);
                let xs = &pts[st.clone()];
                let ys = &vals[st];
                let mut piece = |lo: f64, hi: f64, acc: &mut C64| {
                    let c = 0.5 * (lo + hi);
                    let h = 0.5 * (hi - lo);
                    for (t, wt) in gx.iter().zip(&gw) {
                        let s = c + h * t;
                        let kern = table.eval(r / s) * s.powf(1.0 - alpha) * wt * h;
                        lagrange_weights(xs, s, &mut lw);
                        let mut f = C64::new(0.0, 0.0);
                        for (l, y) in lw.iter().zip(ys) {
                            f += y * l;
                        }
                        *acc += f * kern;
                    }
                };
                if b == r || a == r {
                    let len_ab = b - a;
                    let mut offs = vec![0.0];
                    for j in (0..grading).rev() {
                        offs.push(len_ab * 0.5f64.powi(j as i32 + 1));
                    }
                    offs.push(len_ab);
                    for o in offs.windows(2) {
                        if b == r {
                            piece(b - o[1], b - o[0], &mut acc);
                        } else {
                            piece(a + o[0], a + o[1], &mut acc);
                        }
                    }
                } else {
                    piece(a, b, &mut acc);
                }
            }
            acc * ca
        })
        .collect();
    RadialProfile::new(g.clone(), out)
}

fn check_stream_alpha(alpha: f64) -> Result<()> {
    if !((0.0..=1.0).contains(&alpha) || alpha == 2.0) {
        return Err(Error::InvalidParameter(format!("α must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// ψ_n = 𝓗_n[ρ^{α−2} 𝓗_n[W]] on the grid nodes (α = 2 is accepted as a test extension).
pub fn streamfunction_hankel(n: u32, alpha: f64, w: &RadialProfile) -> Result<RadialProfile> {
    check_order(n, w)?;
    check_stream_alpha(alpha)?;
    let plan = HankelPlan::shared(w.grid());
    RadialProfile::new(w.grid().clone(), plan.multiplier_nodes(w, alpha - 2.0))
}

/// ψ at arbitrary radii.
pub fn streamfunction_at(alpha: f64, w: &RadialProfile, radii: &[f64]) -> Result<Vec<C64>> {
    check_stream_alpha(alpha)?;
    let plan = HankelPlan::shared(w.grid());
    Ok(plan.multiplier_at(w, alpha - 2.0, radii, OutKernel::Bessel(w.grid().order())))
}

/// Velocity (V_R, V_φ) of the signed harmonic m carried by `g` (grid of order |m|), at arbitrary radii.
pub fn velocity_at(m: i32, alpha: f64, g: &RadialProfile, radii: &[f64]) -> Result<(Vec<C64>, Vec<C64>)> {
    check_alpha(alpha)?;
    let k = m.unsigned_abs();
    if g.grid().order() != k {
        return Err(Error::GridMismatch(format!("harmonic {m} needs an order-{k} grid")));
    }
    if m == 0 {
        let vphi = vortex_velocity_at(alpha, g, radii);
        return Ok((vec![C64::new(0.0, 0.0); radii.len()], vphi));
    }
    let plan = HankelPlan::shared(g.grid());
    let psi = plan.multiplier_at(g, alpha - 2.0, radii, OutKernel::Bessel(k));
    let dpsi = plan.multiplier_at(g, alpha - 2.0, radii, OutKernel::BesselDerivative(k));
    let vr = psi.iter().zip(radii).map(|(p, &r)| C64::new(0.0, m as f64 / r) * p).collect();
    let vphi = dpsi.iter().map(|d| -d).collect();
    Ok((vr, vphi))
}

/// Velocity (V_R, V_φ) of the signed harmonic m carried by `g`, at the nodes of `target`.
pub fn velocity_on(m: i32, alpha: f64, g: &RadialProfile, target: &Arc<RadialGrid>) -> Result<(Vec<C64>, Vec<C64>)> {
    check_alpha(alpha)?;
    let k = m.unsigned_abs();
    if g.grid().order() != k {
        return Err(Error::GridMismatch(format!("harmonic {m} needs an order-{k} grid")));
    }
    let plan = HankelPlan::shared(g.grid());
    if m == 0 {
        let vphi = plan.multiplier_on(g, alpha - 1.0, target, OutKernel::Bessel(1));
        return Ok((vec![C64::new(0.0, 0.0); target.len()], vphi));
    }
    let psi = plan.multiplier_on(g, alpha - 2.0, target, OutKernel::Bessel(k));
    let dpsi = plan.multiplier_on(g, alpha - 2.0, target, OutKernel::BesselDerivative(k));
    let vr = psi.iter().zip(target.nodes()).map(|(p, &r)| C64::new(0.0, m as f64 / r) * p).collect();
    let vphi = dpsi.iter().map(|d| -d).collect();
    Ok((vr, vphi))
}

/// Modal velocity V_R = (in/R)ψ_n, V_φ = −∂_Rψ_n on W's grid.
pub fn velocity(n: u32, alpha: f64, w: &RadialProfile) -> Result<(RadialProfile, RadialProfile)> {
    check_order(n, w)?;
    let (vr, vphi) = velocity_on(n as i32, alpha, w, w.grid())?;
    Ok((RadialProfile::new(w.grid().clone(), vr)?, RadialProfile::new(w.grid().clone(), vphi)?))
}

/// V̄_φ = 𝓗_1[ρ^{α−1} 𝓗_0[Θ̄]] on Θ̄'s grid.
pub fn vortex_velocity(alpha: f64, theta: &RadialProfile) -> Result<RadialProfile> {
    check_alpha(alpha)?;
    if theta.grid().order() != 0 {
        return Err(Error::GridMismatch("vortex profiles live on order-0 grids".into()));
    }
    let mean = integrate(theta).norm();
    let norm = theta.norm();
    if mean > 1e-8 * norm {
        return Err(Error::ZeroMean { mean, norm });
    }
    let v = vortex_velocity_at(alpha, theta, theta.grid().nodes());
    RadialProfile::new(theta.grid().clone(), v.into_iter().map(|z| C64::new(z.re, 0.0)).collect())
}

pub(crate) fn vortex_velocity_at(alpha: f64, theta: &RadialProfile, radii: &[f64]) -> Vec<C64> {
    HankelPlan::shared(theta.grid()).multiplier_at(theta, alpha - 1.0, radii, OutKernel::Bessel(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;

    #[test]
    fn c_alpha_values() {
        assert!((c_alpha(0.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((c_alpha(1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(c_alpha(1.5).is_err());
        assert!(c_alpha(-0.1).is_err());
    }

    #[test]
    fn kernel_closed_form_at_alpha_zero() {
        // α = 0: I = π σ^n / n for σ < 1 and π σ^{−n} / n for σ > 1
        for n in 1..4u32 {
            for &s in &[0.1f64, 0.5, 0.9, 1.5, 2.0, 7.0] {
                let exact = PI / n as f64 * if s < 1.0 { s.powi(n as i32) } else { s.powi(-(n as i32)) };
                assert!((kernel_i(n, 0.0, s).unwrap() - exact).abs() < 1e-10, "n={n} σ={s}");
            }
        }
        assert_eq!(kernel_i(2, 0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn kernel_reciprocal_symmetry() {
        for &a in &[0.0, 0.5, 1.0] {
            for &s in &[0.3, 0.8, 0.99] {
                let lhs = kernel_i(3, a, 1.0 / s).unwrap();
                let rhs = s.powf(a) * kernel_i(3, a, s).unwrap();
                assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        for &a in &[0.0, 0.5, 1.0] {
            let t = KernelTable::build(2, a).unwrap();
            for &s in &[0.01, 0.3, 0.77, 0.999, 1.001, 1.4, 5.0] {
                let d = kernel_i(2, a, s).unwrap();
                assert!((t.eval(s) - d).abs() < 1e-7 * d.abs(), "α={a} σ={s}");
            }
        }
    }

    #[test]
    fn table_cache_round_trip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let a = KernelTable::load_or_build(1, 0.5, Some(dir.path())).unwrap();
        let path = dir.path().join(KernelTable::cache_file_name(1, 0.5));
        assert!(path.exists());
        let b = KernelTable::load_or_build(1, 0.5, Some(dir.path())).unwrap();
        assert_eq!(a.values, b.values);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[6] = 99;
        std::fs::write(&path, &bytes).unwrap();
        assert!(KernelTable::read(&path, 1, 0.5).is_err());
        let c = KernelTable::load_or_build(1, 0.5, Some(dir.path())).unwrap();
        assert_eq!(a.values, c.values);
    }

    #[test]
    fn vortex_velocity_matches_cumulative_integral() {
        let g = build_grid(0, 256, 30.0).unwrap();
        let th = RadialProfile::from_real_fn(&g, |r| (1.0 - r * r) * (-r * r).exp());
        let v = vortex_velocity(0.0, &th).unwrap();
        for (x, &r) in v.values().iter().zip(g.nodes()) {
            assert!((x.re - 0.5 * r * (-r * r).exp()).abs() < 1e-7);
        }
        let nonzero = RadialProfile::from_real_fn(&g, |r| (-r * r).exp());
        assert!(matches!(vortex_velocity(0.0, &nonzero), Err(Error::ZeroMean { .. })));
    }
}
