//! The linearized self-similar operator L_ν on a single harmonic.

use crate::biot_savart::streamfunction_hankel;
use crate::error::{Error, Result};
use crate::linalg::{complex_matvec, real_matvec};
use crate::radial::{RadialGrid, RadialProfile, Vortex};
use crate::transforms::{fractional_laplacian, HankelPlan};
use crate::C64;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Sign of the identity shift ν(α/β − 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftConvention {
    /// L_ν = −V̄·∇ − V·∇Θ̄ − νJ, so the shift is −ν(α/β − 1).
    Definition,
    /// The opposite sign, +ν(α/β − 1).
    Flipped,
}

impl ShiftConvention {
    pub fn shift(self, alpha: f64, beta: f64, nu: f64) -> f64 {
        let c = nu * (alpha / beta - 1.0);
        match self {
            ShiftConvention::Definition => -c,
            ShiftConvention::Flipped => c,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ShiftConvention::Definition => ShiftConvention::Flipped,
            ShiftConvention::Flipped => ShiftConvention::Definition,
        }
    }
}

/// Which pieces of L_ν enter an assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parts {
    pub transport: bool,
    pub nonlocal: bool,
    pub diffusion: bool,
    pub shift: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { transport: true, nonlocal: true, diffusion: true, shift: true };
    pub const NONE: Parts = Parts { transport: false, nonlocal: false, diffusion: false, shift: false };
    /// A_ν = T_ν − νΛ^β + shift, i.e. everything except K.
    pub const LOCAL: Parts = Parts { transport: true, nonlocal: false, diffusion: true, shift: true };
}

impl Default for Parts {
    fn default() -> Self {
        Parts::ALL
    }
}

/// Vortex quantities at the nodes of an order-|n| grid: Ω = V̄_φ/R and ∂_RΘ̄/R.
#[derive(Debug, Clone)]
pub struct VortexSamples {
    grid: Arc<RadialGrid>,
    omega: Vec<f64>,
    dtheta_over_r: Vec<f64>,
}

impl VortexSamples {
    pub fn new(vortex: &Vortex, grid: &Arc<RadialGrid>) -> Self {
        let r = grid.nodes();
        let vphi = vortex.vphi_on(grid);
        let dth = vortex.dtheta_on(grid);
        VortexSamples {
            grid: grid.clone(),
            omega: vphi.iter().zip(r).map(|(v, r)| v / r).collect(),
            dtheta_over_r: dth.iter().zip(r).map(|(d, r)| d / r).collect(),
        }
    }

    /// Arbitrary angular velocity and vortex gradient supplied directly.
    pub fn from_parts(grid: &Arc<RadialGrid>, omega: Vec<f64>, dtheta_over_r: Vec<f64>) -> Result<Self> {
        if omega.len() != grid.len() || dtheta_over_r.len() != grid.len() {
            return Err(Error::GridMismatch("vortex samples must match the grid".into()));
        }
        Ok(VortexSamples { grid: grid.clone(), omega, dtheta_over_r })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }
    pub fn dtheta_over_r(&self) -> &[f64] {
        &self.dtheta_over_r
    }
}

fn check_harmonic(n: i32, grid: &RadialGrid) -> Result<()> {
    if grid.order() != n.unsigned_abs() {
        return Err(Error::GridMismatch(format!("harmonic {n} on an order-{} grid", grid.order())));
    }
    Ok(())
}

/// JΘ = Λ^βΘ + (α/β − 1)Θ − (1/β)R∂_RΘ on a single harmonic.
pub fn drift_j(alpha: f64, beta: f64, p: &RadialProfile) -> Result<RadialProfile> {
    let plan = HankelPlan::shared(p.grid());
    let lap = fractional_laplacian(&plan, beta, p)?;
    let dil = plan.dilation(p);
    let c = alpha / beta - 1.0;
    let values = lap
        .values()
        .iter()
        .zip(p.values())
        .zip(dil.values())
        .map(|((l, v), d)| l + v * c - d / beta)
        .collect();
    RadialProfile::new(p.grid().clone(), values)
}

/// T_νW = (ν/β)R∂_RW − in(V̄_φ/R)W.
pub fn apply_t(nu: f64, beta: f64, vortex: &VortexSamples, n: i32, w: &RadialProfile) -> Result<RadialProfile> {
    check_harmonic(n, w.grid())?;
    w.same_grid(&RadialProfile::zeros(vortex.grid()))?;
    let plan = HankelPlan::shared(w.grid());
    let dil = plan.dilation(w);
    let values = dil
        .values()
        .iter()
        .zip(w.values())
        .zip(vortex.omega())
        .map(|((d, v), om)| d * (nu / beta) - C64::new(0.0, n as f64 * om) * v)
        .collect();
    RadialProfile::new(w.grid().clone(), values)
}

/// KW = −in(ψ_n/R)∂_RΘ̄.
pub fn apply_k(alpha: f64, vortex: &VortexSamples, n: i32, w: &RadialProfile) -> Result<RadialProfile> {
    check_harmonic(n, w.grid())?;
    w.same_grid(&RadialProfile::zeros(vortex.grid()))?;
    if n == 0 {
        return Ok(RadialProfile::zeros(w.grid()));
    }
    let k = n.unsigned_abs();
    let psi = streamfunction_hankel(k, alpha, w)?;
    let values = psi
        .values()
        .iter()
        .zip(vortex.dtheta_over_r())
        .map(|(p, d)| C64::new(0.0, -(n as f64) * d) * p)
        .collect();
    RadialProfile::new(w.grid().clone(), values)
}

/// Dense matrix of L_ν (or a subset of its parts) on harmonic n.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub n: i32,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub parts: Parts,
    pub convention: ShiftConvention,
    grid: Arc<RadialGrid>,
    matrix: Mat<C64>,
}

impl OperatorMatrix {
    /// Wraps an arbitrary matrix acting on profiles of `grid`.
    pub fn from_matrix(grid: &Arc<RadialGrid>, n: i32, matrix: Mat<C64>) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::GridMismatch("matrix size must match the grid".into()));
        }
        Ok(OperatorMatrix {
            n,
            alpha: 0.0,
            beta: 1.0,
            nu: 0.0,
            parts: Parts::NONE,
            convention: ShiftConvention::Definition,
            grid: grid.clone(),
            matrix,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, w: &RadialProfile) -> Result<RadialProfile> {
        w.same_grid(&RadialProfile::zeros(&self.grid))?;
        RadialProfile::new(self.grid.clone(), complex_matvec(&self.matrix, w.values()))
    }

    /// Returns a copy with c·I added.
    pub fn shifted(&self, c: C64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim() {
            out.matrix[(i, i)] += c;
        }
        out
    }

    /// Binary dump: magic, n, α, β, ν, N, R_max, then row-major (re, im) pairs, little-endian.
    pub fn export<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"GSQGOP01")?;
        out.write_all(&(self.n as i64).to_le_bytes())?;
        for v in [self.alpha, self.beta, self.nu] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        out.write_all(&self.grid.r_max().to_le_bytes())?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.matrix[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Classical RK4 integration of ∂_τx = Mx over [0, τ] in `steps` steps.
    pub fn propagate(&self, x: &RadialProfile, tau: f64, steps: usize) -> Result<RadialProfile> {
        x.same_grid(&RadialProfile::zeros(&self.grid))?;
        let dt = tau / steps as f64;
        let mut v: Vec<C64> = x.values().to_vec();
        let axpy = |a: &[C64], s: f64, b: &[C64]| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
        for _ in 0..steps {
            let k1 = complex_matvec(&self.matrix, &v);
            let k2 = complex_matvec(&self.matrix, &axpy(&v, 0.5 * dt, &k1));
            let k3 = complex_matvec(&self.matrix, &axpy(&v, 0.5 * dt, &k2));
            let k4 = complex_matvec(&self.matrix, &axpy(&v, dt, &k3));
            for i in 0..v.len() {
                v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
            }
        }
        RadialProfile::new(self.grid.clone(), v)
    }
}

/// Problem data for assembling L_ν on a harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub n: i32,
    pub alpha: f64,
    pub beta: f64,
    pub parts: Parts,
    pub convention: ShiftConvention,
}

/// L_ν = M0 + ν M1 with M0 the inviscid part and M1 = (1/β)R∂_R − Λ^β ± (α/β − 1).
pub struct AffineOperator {
    pub spec: OperatorSpec,
    grid: Arc<RadialGrid>,
    m0: Mat<C64>,
    m1: Mat<C64>,
}

impl AffineOperator {
    pub fn new(spec: OperatorSpec, vortex: &VortexSamples) -> Result<Self> {
        let OperatorSpec { n, alpha, beta, parts, convention } = spec;
        let grid = vortex.grid().clone();
        check_harmonic(n, &grid)?;
        if !(beta > 0.0 && beta < 3.0 + alpha) {
            return Err(Error::InvalidParameter(format!("β must satisfy 0 < β < 3 + α = {}, got {beta}", 3.0 + alpha)));
        }
        let len = grid.len();
        let plan = HankelPlan::shared(&grid);
        let nf = n as f64;
        let mut m0 = Mat::<C64>::zeros(len, len);
        let mut m1 = Mat::<C64>::zeros(len, len);
        if parts.transport {
            let dil = plan.dilation_matrix();
            for i in 0..len {
                m0[(i, i)] += C64::new(0.0, -nf * vortex.omega()[i]);
                for j in 0..len {
                    m1[(i, j)] += C64::new(dil[(i, j)] / beta, 0.0);
                }
            }
        }
        if parts.nonlocal && n != 0 {
            let q = plan.free_multiplier_matrix(alpha - 2.0);
            for i in 0..len {
                let c = -nf * vortex.dtheta_over_r()[i];
                for j in 0..len {
                    m0[(i, j)] += C64::new(0.0, c * q[(i, j)]);
                }
            }
        }
        if parts.diffusion {
            let lb = plan.spectral_multiplier_matrix(beta);
            for i in 0..len {
                for j in 0..len {
                    m1[(i, j)] -= C64::new(lb[(i, j)], 0.0);
                }
            }
        }
        if parts.shift {
            let c = convention.shift(alpha, beta, 1.0);
            for i in 0..len {
                m1[(i, i)] += C64::new(c, 0.0);
            }
        }
        Ok(AffineOperator { spec, grid, m0, m1 })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// ∂L_ν/∂ν.
    pub fn derivative(&self) -> &Mat<C64> {
        &self.m1
    }

    pub fn at(&self, nu: f64) -> OperatorMatrix {
        let len = self.grid.len();
        let matrix = Mat::<C64>::from_fn(len, len, |i, j| self.m0[(i, j)] + self.m1[(i, j)] * nu);
        OperatorMatrix {
            n: self.spec.n,
            alpha: self.spec.alpha,
            beta: self.spec.beta,
            nu,
            parts: self.spec.parts,
            convention: self.spec.convention,
            grid: self.grid.clone(),
            matrix,
        }
    }
}

/// Assembles L_ν restricted to harmonic n on `grid` (order |n|).
#[allow(clippy::too_many_arguments)]
pub fn assemble_l(
    alpha: f64,
    beta: f64,
    nu: f64,
    vortex: &Vortex,
    n: i32,
    grid: &Arc<RadialGrid>,
    parts: Parts,
    convention: ShiftConvention,
) -> Result<OperatorMatrix> {
    if !(nu >= 0.0) {
        return Err(Error::InvalidParameter(format!("ν must be nonnegative, got {nu}")));
    }
    check_harmonic(n, grid)?;
    let samples = VortexSamples::new(vortex, grid);
    let spec = OperatorSpec { n, alpha, beta, parts, convention };
    Ok(AffineOperator::new(spec, &samples)?.at(nu))
}

/// The composed action apply_T + apply_K − νΛ^β + shift, without forming a matrix.
#[allow(clippy::too_many_arguments)]
pub fn apply_l(
    alpha: f64,
    beta: f64,
    nu: f64,
    vortex: &VortexSamples,
    n: i32,
    parts: Parts,
    convention: ShiftConvention,
    w: &RadialProfile,
) -> Result<RadialProfile> {
    let mut out = RadialProfile::zeros(w.grid());
    if parts.transport {
        out = out.add(&apply_t(nu, beta, vortex, n, w)?)?;
    }
    if parts.nonlocal {
        out = out.add(&apply_k(alpha, vortex, n, w)?)?;
    }
    if parts.diffusion {
        let plan = HankelPlan::shared(w.grid());
        out = fractional_laplacian(&plan, beta, w)?.axpy(C64::new(-nu, 0.0), &out)?;
    }
    if parts.shift {
        out = w.axpy(C64::new(convention.shift(alpha, beta, nu), 0.0), &out)?;
    }
    Ok(out)
}

/// Real-matrix action used by tests and diagnostics.
pub fn apply_real(m: &Mat<f64>, w: &RadialProfile) -> RadialProfile {
    RadialProfile::new(w.grid().clone(), real_matvec(m, w.values())).expect("square matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::build_grid;

    #[test]
    fn drift_of_gaussian() {
        let g = build_grid(0, 256, 30.0).unwrap();
        let p = RadialProfile::from_real_fn(&g, |r| (-r * r / 2.0).exp());
        let (a, b) = (1.0, 2.0);
        let out = drift_j(a, b, &p).unwrap();
        for (v, &r) in out.values().iter().zip(g.nodes()) {
            let e = (-r * r / 2.0).exp();
            let exact = (2.0 - r * r + a / b - 1.0 + r * r / b) * e;
            assert!((v.re - exact).abs() < 1e-8, "r={r}");
        }
        let twice = drift_j(a, b, &p.scale(C64::new(2.0, 0.0))).unwrap();
        for (x, y) in twice.values().iter().zip(out.values()) {
            assert!((x - y * 2.0).norm() <= 1e-15 * x.norm().max(1.0));
        }
    }

    #[test]
    fn transport_examples() {
        let g = build_grid(0, 256, 30.0).unwrap();
        let w = RadialProfile::from_real_fn(&g, |r| (-r * r / 2.0).exp());
        let still = VortexSamples::from_parts(&g, vec![0.0; 256], vec![0.0; 256]).unwrap();
        let out = apply_t(1.0, 2.0, &still, 0, &w).unwrap();
        for (v, &r) in out.values().iter().zip(g.nodes()) {
            assert!((v.re + 0.5 * r * r * (-r * r / 2.0).exp()).abs() < 1e-8);
        }
        let g2 = build_grid(2, 64, 30.0).unwrap();
        let rigid = VortexSamples::from_parts(&g2, vec![0.7; 64], vec![0.0; 64]).unwrap();
        let w2 = RadialProfile::from_real_fn(&g2, |r| r * r * (-r * r).exp());
        let out = apply_t(0.0, 2.0, &rigid, 2, &w2).unwrap();
        for (o, v) in out.values().iter().zip(w2.values()) {
            assert!((o - C64::new(0.0, -1.4) * v).norm() < 1e-15);
            assert_eq!(o.re, 0.0);
        }
    }

    #[test]
    fn empty_parts_give_zero_matrix() {
        let g = build_grid(2, 32, 30.0).unwrap();
        let s = VortexSamples::from_parts(&g, vec![0.3; 32], vec![0.1; 32]).unwrap();
        let spec = OperatorSpec { n: 2, alpha: 0.0, beta: 2.0, parts: Parts::NONE, convention: ShiftConvention::Definition };
        let m = AffineOperator::new(spec, &s).unwrap().at(0.5);
        assert!(m.matrix().norm_l2() == 0.0);
    }

    #[test]
    fn export_layout() {
        let g = build_grid(1, 8, 5.0).unwrap();
        let m = OperatorMatrix::from_matrix(&g, 1, Mat::from_fn(8, 8, |i, j| C64::new(i as f64, j as f64))).unwrap();
        let mut buf = Vec::new();
        m.export(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 24 + 8 + 8 + 8 * 8 * 16);
        let off = 56 + (3 * 8 + 5) * 16;
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), 3.0);
        assert_eq!(f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap()), 5.0);
    }
}
