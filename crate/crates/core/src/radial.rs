//! Radial grids on Bessel-zero nodes, radial profiles and vortices.

use crate::error::{Error, Result};
use crate::special::{bessel_j, bessel_zeros};
use crate::transforms::HankelPlan;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

/// Collocation nodes R_k = j_{n,k} R_max / j_{n,N+1} with positive quadrature
/// weights for integrals of the form ∫ f(R) R dR.
#[derive(Debug)]
pub struct RadialGrid {
    order: u32,
    r_max: f64,
    rho_max: f64,
    zeros: Arc<Vec<f64>>,
    jnext: Arc<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, o: &Self) -> bool {
        self.key() == o.key()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridKey {
    pub order: u32,
    pub len: usize,
    pub r_max_bits: u64,
}

type ZeroTable = (Arc<Vec<f64>>, Arc<Vec<f64>>);

fn zero_table(order: u32, len: usize) -> ZeroTable {
    static CACHE: OnceLock<Mutex<HashMap<(u32, usize), ZeroTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&(order, len)) {
        return t.clone();
    }
    let zeros = bessel_zeros(order, len + 1);
    let jnext: Vec<f64> = zeros[..len].iter().map(|&z| bessel_j(order + 1, z).abs()).collect();
    let t = (Arc::new(zeros), Arc::new(jnext));
    cache.lock().unwrap().insert((order, len), t.clone());
    t
}

/// Builds the order-`n` grid with `len` nodes on [0, r_max].
pub fn build_grid(n: u32, len: usize, r_max: f64) -> Result<Arc<RadialGrid>> {
    if len < 8 {
        return Err(Error::InvalidParameter(format!("grid needs at least 8 nodes, got {len}")));
    }
    if !r_max.is_finite() || r_max <= 0.0 {
        return Err(Error::InvalidParameter(format!("R_max must be positive and finite, got {r_max}")));
    }
    let (zeros, jnext) = zero_table(n, len);
    let rho_max = zeros[len] / r_max;
    Ok(Arc::new(RadialGrid::from_table(n, r_max, rho_max, zeros, jnext)))
}

impl RadialGrid {
    fn from_table(order: u32, r_max: f64, rho_max: f64, zeros: Arc<Vec<f64>>, jnext: Arc<Vec<f64>>) -> Self {
        let len = jnext.len();
        let s = zeros[len];
        let nodes = zeros[..len].iter().map(|z| z * r_max / s).collect();
        let weights = jnext.iter().map(|j| 2.0 / (rho_max * rho_max * j * j)).collect();
        RadialGrid { order, r_max, rho_max, zeros, jnext, nodes, weights }
    }

    pub fn order(&self) -> u32 {
        self.order
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// j_{n,N+1}, the zero that fixes the band limit.
    pub fn last_zero(&self) -> f64 {
        self.zeros[self.len()]
    }
    pub fn zeros(&self) -> &[f64] {
        &self.zeros[..self.len()]
    }
    pub(crate) fn jnext(&self) -> &[f64] {
        &self.jnext
    }
    /// Largest frequency represented, ρ_max = j_{n,N+1}/R_max.
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }
    pub fn key(&self) -> GridKey {
        GridKey { order: self.order, len: self.len(), r_max_bits: self.r_max.to_bits() }
    }

    /// Frequency grid paired with this one; its nodes are ρ_j = j_{n,j}/R_max.
    pub fn dual(&self) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::from_table(self.order, self.rho_max, self.r_max, self.zeros.clone(), self.jnext.clone()))
    }

    /// Same order and radius with a different node count.
    pub fn with_len(&self, len: usize) -> Result<Arc<RadialGrid>> {
        build_grid(self.order, len, self.r_max)
    }

    /// Same node count and radius with a different order.
    pub fn with_order(&self, order: u32) -> Result<Arc<RadialGrid>> {
        build_grid(order, self.len(), self.r_max)
    }
}

/// Complex samples of a radial function on a grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<C64>,
}

fn check_same(a: &RadialGrid, b: &RadialGrid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "(n={}, N={}, Rmax={}) vs (n={}, N={}, Rmax={})",
            a.order,
            a.len(),
            a.r_max,
            b.order,
            b.len(),
            b.r_max
        )));
    }
    Ok(())
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialProfile { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> C64) -> Self {
        RadialProfile { grid: grid.clone(), values: grid.nodes().iter().map(|&r| f(r)).collect() }
    }

    pub fn from_real_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| C64::new(f(r), 0.0))
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &RadialProfile) -> Result<()> {
        check_same(&self.grid, &other.grid)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        RadialProfile { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// a·self + other.
    pub fn axpy(&self, a: C64, other: &RadialProfile) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + y).collect();
        Ok(RadialProfile { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &RadialProfile) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &RadialProfile) -> Result<Self> {
        other.axpy(C64::new(-1.0, 0.0), self)
    }

    /// Pointwise product with a real function of R.
    pub fn mul_fn(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().zip(self.grid.nodes()).map(|(v, &r)| v * f(r)).collect();
        RadialProfile { grid: self.grid.clone(), values }
    }

    /// Weighted inner product Σ w_k conj(a_k) b_k ≈ ∫ conj(a) b R dR.
    pub fn inner(&self, other: &RadialProfile) -> Result<C64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a.conj() * b * w)
            .sum())
    }

    /// L² norm with respect to R dR.
    pub fn norm(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.values.iter().all(|v| v.im.abs() <= tol * scale)
    }

    /// |p(R_N)| relative to max |p|.
    pub fn edge_ratio(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.values[self.len() - 1].norm() / m
        }
    }
}

/// Σ_k w_k p(R_k) ≈ ∫₀^∞ p(R) R dR.
pub fn integrate(p: &RadialProfile) -> C64 {
    p.values.iter().zip(p.grid.weights()).map(|(v, w)| v * w).sum()
}

/// Spectral derivative ∂_R p on the profile's own grid.
pub fn radial_derivative(p: &RadialProfile) -> RadialProfile {
    let plan = HankelPlan::shared(p.grid());
    let tail = plan.spectral_tail(p);
    if tail > 1e-10 {
        log::warn!("radial derivative of a profile with spectral tail {tail:e}");
    }
    plan.derivative(p)
}

/// Interpolates p onto grid g of the same order through its Fourier-Bessel series.
pub fn resample(p: &RadialProfile, g: &Arc<RadialGrid>, strict: bool, tol: f64) -> Result<RadialProfile> {
    if p.grid() == g {
        return Ok(p.clone());
    }
    if p.grid().order() != g.order() {
        return Err(Error::GridMismatch(format!("resample between orders {} and {}", p.grid().order(), g.order())));
    }
    let plan = HankelPlan::shared(p.grid());
    let source_tail = plan.spectral_tail(p);
    let out = RadialProfile::new(g.clone(), plan.evaluate(p, g.nodes()))?;
    let target_tail = HankelPlan::shared(g).spectral_tail(&out);
    let tail = source_tail.max(target_tail);
    if tail > tol {
        let msg = format!("spectral tail {tail:e} exceeds {tol:e} (N={} -> N={})", p.len(), g.len());
        if strict {
            return Err(Error::Unresolved(msg));
        }
        log::warn!("{msg}");
    }
    Ok(out)
}

/// Writes `# grid n=.. N=.. Rmax=..`, optional `# key=value` lines, then `R,re,im` rows.
pub fn write_profile_csv<W: Write>(p: &RadialProfile, out: &mut W, meta: &[(String, String)]) -> Result<()> {
    let g = p.grid();
    writeln!(out, "# grid n={} N={} Rmax={}", g.order(), g.len(), g.r_max())?;
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "R,re,im")?;
    for (r, v) in g.nodes().iter().zip(p.values()) {
        writeln!(out, "{},{},{}", r, v.re, v.im)?;
    }
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

/// Reads a profile written by [`write_profile_csv`]; returns it with its metadata lines.
pub fn read_profile_csv<R: BufRead>(input: R) -> Result<(RadialProfile, Vec<(String, String)>)> {
    let mut grid = None;
    let mut meta = Vec::new();
    let mut values = Vec::new();
    let mut header = false;
    for line in input.lines() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# grid ") {
            let mut n = None;
            let mut len = None;
            let mut r_max = None;
            for tok in rest.split_whitespace() {
                match tok.split_once('=') {
                    Some(("n", v)) => n = v.parse::<u32>().ok(),
                    Some(("N", v)) => len = v.parse::<usize>().ok(),
                    Some(("Rmax", v)) => r_max = v.parse::<f64>().ok(),
                    _ => return Err(Error::Parse(format!("bad grid token {tok:?}"))),
                }
            }
            match (n, len, r_max) {
                (Some(n), Some(len), Some(r)) => grid = Some(build_grid(n, len, r)?),
                _ => return Err(Error::Parse("incomplete grid line".into())),
            }
        } else if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !header {
            if line != "R,re,im" {
                return Err(Error::Parse(format!("expected header R,re,im, found {line:?}")));
            }
            header = true;
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns: {line:?}")));
            }
            values.push((parse_f64(cols[0])?, C64::new(parse_f64(cols[1])?, parse_f64(cols[2])?)));
        }
    }
    let grid = grid.ok_or_else(|| Error::Parse("missing grid line".into()))?;
    if values.len() != grid.len() {
        return Err(Error::Parse(format!("{} rows for a grid of {} nodes", values.len(), grid.len())));
    }
    for ((r, _), node) in values.iter().zip(grid.nodes()) {
        if (r - node).abs() > 1e-12 * grid.r_max() {
            return Err(Error::Parse(format!("node {r} does not match grid node {node}")));
        }
    }
    let profile = RadialProfile::new(grid, values.into_iter().map(|(_, v)| v).collect())?;
    Ok((profile, meta))
}

/// Generating family and parameters of a vortex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub family: String,
    pub params: Vec<f64>,
}

/// A zero-mean radial profile Θ̄ together with its azimuthal velocity.
#[derive(Debug, Clone)]
pub struct Vortex {
    theta: RadialProfile,
    vphi: RadialProfile,
    alpha: f64,
    family: Option<FamilyRecord>,
}

impl Vortex {
    /// Validates Θ̄ (order 0, real, zero mean, decayed) and fills V̄_φ for exponent α.
    pub fn new(theta: RadialProfile, alpha: f64, family: Option<FamilyRecord>, tol: f64) -> Result<Self> {
        if theta.grid().order() != 0 {
            return Err(Error::GridMismatch("a vortex lives on an order-0 grid".into()));
        }
        if !theta.is_real(1e-8) {
            return Err(Error::InvalidParameter("vortex profile must be real".into()));
        }
        let theta = theta.map(|v| C64::new(v.re, 0.0));
        let mean = integrate(&theta).re;
        let norm = theta.norm();
        if mean.abs() > tol * norm {
            return Err(Error::ZeroMean { mean, norm });
        }
        let edge = theta.edge_ratio();
        if edge > 1e-8 {
            log::warn!("vortex profile not decayed at R_max (edge ratio {edge:e})");
        }
        let vphi = crate::biot_savart::vortex_velocity(alpha, &theta)?;
        Ok(Vortex { theta, vphi, alpha, family })
    }

    pub fn theta(&self) -> &RadialProfile {
        &self.theta
    }
    pub fn vphi(&self) -> &RadialProfile {
        &self.vphi
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn family(&self) -> Option<&FamilyRecord> {
        self.family.as_ref()
    }
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.theta.grid()
    }

    /// Θ̄ at arbitrary radii.
    pub fn theta_at(&self, radii: &[f64]) -> Vec<f64> {
        HankelPlan::shared(self.grid()).evaluate(&self.theta, radii).iter().map(|v| v.re).collect()
    }

    /// ∂_RΘ̄ at arbitrary radii.
    pub fn dtheta_at(&self, radii: &[f64]) -> Vec<f64> {
        HankelPlan::shared(self.grid()).evaluate_derivative(&self.theta, radii).iter().map(|v| v.re).collect()
    }

    /// ∂_RΘ̄ at the nodes of another grid.
    pub fn dtheta_on(&self, grid: &Arc<RadialGrid>) -> Vec<f64> {
        HankelPlan::shared(self.grid()).evaluate_derivative_on(&self.theta, grid).iter().map(|v| v.re).collect()
    }

    /// V̄_φ at the nodes of another grid.
    pub fn vphi_on(&self, grid: &Arc<RadialGrid>) -> Vec<f64> {
        crate::biot_savart::velocity_on(0, self.alpha, &self.theta, grid).expect("validated vortex").1.iter().map(|v| v.re).collect()
    }

    /// V̄_φ at arbitrary radii.
    pub fn vphi_at(&self, radii: &[f64]) -> Vec<f64> {
        crate::biot_savart::vortex_velocity_at(self.alpha, &self.theta, radii).iter().map(|v| v.re).collect()
    }
}
