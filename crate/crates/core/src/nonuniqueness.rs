//! Golovkin's two-branch construction: Θ± = Θ̄ ± Θ^lin driven by one force F.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biot_savart::velocity_on;
use crate::operator::{drift_j, ShiftConvention};
use crate::radial::{build_grid, read_profile_csv, write_profile_csv, FamilyRecord, RadialGrid, RadialProfile, Vortex};
use crate::spectra::EigenPair;
use crate::transforms::{multiplier, HankelPlan, Realization};
use crate::{Error, Result, C64};

/// c·e^{μτ}·g(R)·e^{imφ} with ‖g‖₂ = 1.
#[derive(Debug, Clone)]
pub struct ModalTerm {
    pub m: i32,
    pub mu: C64,
    pub c: C64,
    pub g: RadialProfile,
}

impl ModalTerm {
    /// Canonical form of c·h: the magnitude of h moves into the coefficient. Returns None for h = 0.
    pub fn new(m: i32, mu: C64, c: C64, h: RadialProfile) -> Result<Option<Self>> {
        if h.grid().order() != m.unsigned_abs() {
            return Err(Error::GridMismatch(format!("harmonic {m} on an order-{} grid", h.grid().order())));
        }
        let norm = h.norm();
        if norm == 0.0 || c == C64::new(0.0, 0.0) {
            return Ok(None);
        }
        Ok(Some(ModalTerm { m, mu, c: c * norm, g: h.scale(C64::new(1.0 / norm, 0.0)) }))
    }

    /// c·g, the unnormalized radial content.
    pub fn content(&self) -> RadialProfile {
        self.g.scale(self.c)
    }

    /// c·e^{μτ}·g on the term's own grid.
    pub fn at(&self, tau: f64) -> RadialProfile {
        self.g.scale(self.c * (self.mu * tau).exp())
    }
}

fn key_order(a: &ModalTerm, b: &ModalTerm) -> std::cmp::Ordering {
    a.m.cmp(&b.m).then(a.mu.re.total_cmp(&b.mu.re)).then(a.mu.im.total_cmp(&b.mu.im))
}

/// A real field written as a finite sum of modal terms.
#[derive(Debug, Clone, Default)]
pub struct ModalExpansion {
    terms: Vec<ModalTerm>,
}

impl ModalExpansion {
    pub fn new() -> Self {
        ModalExpansion { terms: Vec::new() }
    }

    /// Builds a canonical expansion: terms with equal (m, μ) merged, zeros dropped, sorted by m then μ.
    pub fn from_terms(terms: Vec<ModalTerm>) -> Result<Self> {
        let mut groups: BTreeMap<(i32, u64, u64), (C64, RadialProfile)> = BTreeMap::new();
        for t in terms {
            let key = (t.m, t.mu.re.to_bits(), t.mu.im.to_bits());
            let content = t.content();
            match groups.get_mut(&key) {
                Some((_, acc)) => *acc = acc.add(&content)?,
                None => {
                    groups.insert(key, (t.mu, content));
                }
            }
        }
        let mut out = Vec::new();
        for ((m, _, _), (mu, content)) in groups {
            if let Some(t) = ModalTerm::new(m, mu, C64::new(1.0, 0.0), content)? {
                out.push(t);
            }
        }
        out.sort_by(key_order);
        Ok(ModalExpansion { terms: out })
    }

    pub fn terms(&self) -> &[ModalTerm] {
        &self.terms
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn harmonics(&self) -> Vec<i32> {
        let mut h: Vec<i32> = self.terms.iter().map(|t| t.m).collect();
        h.dedup();
        h
    }

    pub fn max_harmonic(&self) -> u32 {
        self.terms.iter().map(|t| t.m.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn scale(&self, k: f64) -> Self {
        ModalExpansion {
            terms: self.terms.iter().map(|t| ModalTerm { c: t.c * k, ..t.clone() }).collect(),
        }
    }

    pub fn add(&self, other: &ModalExpansion) -> Result<Self> {
        ModalExpansion::from_terms(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    /// ∂_τ: each coefficient multiplied by its growth rate.
    pub fn time_derivative(&self) -> Result<Self> {
        ModalExpansion::from_terms(self.terms.iter().map(|t| ModalTerm { c: t.c * t.mu, ..t.clone() }).collect())
    }

    /// Applies a per-harmonic radial map to every term.
    pub fn map_profiles(&self, f: impl Fn(&ModalTerm) -> Result<RadialProfile>) -> Result<Self> {
        let mapped: Vec<Option<ModalTerm>> = self
            .terms
            .iter()
            .map(|t| ModalTerm::new(t.m, t.mu, t.c, f(t)?))
            .collect::<Result<_>>()?;
        ModalExpansion::from_terms(mapped.into_iter().flatten().collect())
    }

    /// νJ applied termwise.
    pub fn drift(&self, alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        Ok(self.map_profiles(|t| drift_j(alpha, beta, &t.g))?.scale(nu))
    }

    /// Λ^s applied termwise (free-space realization for s < 0, spectral otherwise).
    pub fn riesz(&self, s: f64) -> Result<Self> {
        if s == 0.0 {
            return Ok(self.clone());
        }
        let realization = if s < 0.0 { Realization::FreeSpace } else { Realization::Spectral };
        self.map_profiles(|t| multiplier(&HankelPlan::shared(t.g.grid()), s, &t.g, realization))
    }

    /// Radial content of harmonic m at time τ, or None if absent.
    pub fn harmonic_at(&self, m: i32, tau: f64) -> Option<RadialProfile> {
        let mut acc: Option<RadialProfile> = None;
        for t in self.terms.iter().filter(|t| t.m == m) {
            let v = t.at(tau);
            acc = Some(match acc {
                Some(a) => a.add(&v).expect("same harmonic grid"),
                None => v,
            });
        }
        acc
    }

    /// For every (m, μ, c, g) a partner (−m, μ̄, c̄, ḡ) is present, so the field is real.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| {
            let target = t.content().conj();
            self.terms.iter().any(|u| {
                u.m == -t.m
                    && (u.mu - t.mu.conj()).norm() <= tol * (1.0 + t.mu.norm())
                    && u.content().sub(&target).map(|d| d.norm() <= tol * target.norm()).unwrap_or(false)
            })
        })
    }

    /// Σ c e^{μτ} g(X) e^{imφ} on the nodes of `base` × angles (row-major in radius).
    pub fn sample(&self, tau: f64, base: &Arc<RadialGrid>, angles: &[f64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); base.len() * angles.len()];
        for t in &self.terms {
            let g = HankelPlan::shared(t.g.grid()).evaluate_on(&t.g, base);
            let amp = t.c * (t.mu * tau).exp();
            let phase: Vec<C64> = angles.iter().map(|&phi| C64::new(0.0, t.m as f64 * phi).exp()).collect();
            for (i, gv) in g.iter().enumerate() {
                for (j, e) in phase.iter().enumerate() {
                    out[i * angles.len() + j] += amp * gv * e;
                }
            }
        }
        out
    }
}

fn target_grid(template: &Arc<RadialGrid>, m: i32) -> Result<Arc<RadialGrid>> {
    build_grid(m.unsigned_abs(), template.len(), template.r_max())
}

/// V(a)·∇b expanded into harmonics m_a + m_b with growth rates μ_a + μ_b.
pub fn advect(a: &ModalExpansion, b: &ModalExpansion, alpha: f64, cap: u32) -> Result<ModalExpansion> {
    let pairs: Vec<(&ModalTerm, &ModalTerm)> = a.terms.iter().flat_map(|x| b.terms.iter().map(move |y| (x, y))).collect();
    for (x, y) in &pairs {
        let m = x.m + y.m;
        if m.unsigned_abs() > cap {
            return Err(Error::InvalidParameter(format!("harmonic {m} exceeds the cap {cap}")));
        }
    }
    let terms: Vec<Option<ModalTerm>> = pairs
        .iter()
        .map(|(x, y)| {
            let m = x.m + y.m;
            let grid = target_grid(x.g.grid(), m)?;
            let r = grid.nodes();
            let (vr, vphi) = velocity_on(x.m, alpha, &x.g, &grid)?;
            let plan = HankelPlan::shared(y.g.grid());
            let gy = plan.evaluate_on(&y.g, &grid);
            let dgy = plan.evaluate_derivative_on(&y.g, &grid);
            let im = C64::new(0.0, y.m as f64);
            let values = (0..r.len()).map(|k| vr[k] * dgy[k] + vphi[k] / r[k] * im * gy[k]).collect();
            ModalTerm::new(m, x.mu + y.mu, x.c * y.c, RadialProfile::new(grid, values)?)
        })
        .collect::<Result<_>>()?;
    ModalExpansion::from_terms(terms.into_iter().flatten().collect())
}

/// Θ̄, Θ^lin, Θ± and the shared force F.
#[derive(Debug, Clone)]
pub struct GolovkinSystem {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub n: i32,
    pub lambda: C64,
    pub eigen_residual: f64,
    pub convention: ShiftConvention,
    pub vortex: Vortex,
    pub w: RadialProfile,
    pub theta_bar: ModalExpansion,
    pub theta_lin: ModalExpansion,
    pub theta_plus: ModalExpansion,
    pub theta_minus: ModalExpansion,
    pub force: ModalExpansion,
    pub cap: u32,
}

fn branch_parts(vortex: &Vortex, n: i32, lambda: C64, w: &RadialProfile) -> Result<(ModalExpansion, ModalExpansion)> {
    let bar = ModalExpansion::from_terms(ModalTerm::new(0, C64::new(0.0, 0.0), C64::new(1.0, 0.0), vortex.theta().clone())?.into_iter().collect())?;
    let half = C64::new(0.5, 0.0);
    let mut lin = Vec::new();
    lin.extend(ModalTerm::new(n, lambda, half, w.clone())?);
    lin.extend(ModalTerm::new(-n, lambda.conj(), half, w.conj())?);
    Ok((bar, ModalExpansion::from_terms(lin)?))
}

impl GolovkinSystem {
    /// Assembles Θ± and F = V̄·∇Θ̄ + νJΘ̄ + V^lin·∇Θ^lin from a verified unstable eigenpair.
    pub fn build(beta: f64, nu: f64, vortex: &Vortex, n: i32, pair: &EigenPair, convention: ShiftConvention) -> Result<Self> {
        if !(pair.lambda.re > 0.0) {
            return Err(Error::Precondition(format!("instability requires Re λ > 0, got {:.6e}", pair.lambda.re)));
        }
        if n == 0 || pair.w.grid().order() != n.unsigned_abs() {
            return Err(Error::GridMismatch(format!("eigenfunction must live on an order-{} grid", n.unsigned_abs())));
        }
        let alpha = vortex.alpha();
        let cap = 3 * n.unsigned_abs();
        let (theta_bar, theta_lin) = branch_parts(vortex, n, pair.lambda, &pair.w)?;
        let steady = advect(&theta_bar, &theta_bar, alpha, cap)?;
        if !steady.is_empty() {
            return Err(Error::Precondition("V̄·∇Θ̄ must vanish for a radial vortex".into()));
        }
        let force = theta_bar.drift(alpha, beta, nu)?.add(&advect(&theta_lin, &theta_lin, alpha, cap)?)?;
        Self::assemble(alpha, beta, nu, n, pair.lambda, pair.residual, convention, vortex.clone(), pair.w.clone(), force)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        alpha: f64,
        beta: f64,
        nu: f64,
        n: i32,
        lambda: C64,
        eigen_residual: f64,
        convention: ShiftConvention,
        vortex: Vortex,
        w: RadialProfile,
        force: ModalExpansion,
    ) -> Result<Self> {
        let (theta_bar, theta_lin) = branch_parts(&vortex, n, lambda, &w)?;
        let theta_plus = theta_bar.add(&theta_lin)?;
        let theta_minus = theta_bar.add(&theta_lin.scale(-1.0))?;
        Ok(GolovkinSystem {
            alpha,
            beta,
            nu,
            n,
            lambda,
            eigen_residual,
            convention,
            vortex,
            w,
            theta_bar,
            theta_lin,
            theta_plus,
            theta_minus,
            force,
            cap: 3 * n.unsigned_abs(),
        })
    }

    /// Θ̄ + εΘ^lin.
    pub fn branch(&self, eps: f64) -> Result<ModalExpansion> {
        if eps == 1.0 {
            return Ok(self.theta_plus.clone());
        }
        if eps == -1.0 {
            return Ok(self.theta_minus.clone());
        }
        self.theta_bar.add(&self.theta_lin.scale(eps))
    }

    /// Residual expansion ∂_τΘ + V·∇Θ + νJΘ − F for Θ = Θ̄ + εΘ^lin, with its separate pieces.
    pub fn residual_pieces(&self, eps: f64) -> Result<Vec<ModalExpansion>> {
        let theta = self.branch(eps)?;
        Ok(vec![
            theta.time_derivative()?,
            advect(&theta, &theta, self.alpha, self.cap)?,
            theta.drift(self.alpha, self.beta, self.nu)?,
            self.force.scale(-1.0),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub branch: f64,
    pub tau: f64,
    pub m: i32,
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub max_relative: f64,
}

/// Relative L² residual per harmonic at each τ, for the branches ε in `branches`.
///
/// The relative size divides by the largest of the four pieces at that harmonic.
pub fn verify_residual(sys: &GolovkinSystem, taus: &[f64], branches: &[f64]) -> Result<ResidualReport> {
    let mut entries = Vec::new();
    for &eps in branches {
        let pieces = sys.residual_pieces(eps)?;
        let mut harmonics: Vec<i32> = pieces.iter().flat_map(|p| p.harmonics()).collect();
        harmonics.sort();
        harmonics.dedup();
        for &tau in taus {
            for &m in &harmonics {
                let parts: Vec<RadialProfile> = pieces.iter().filter_map(|p| p.harmonic_at(m, tau)).collect();
                let mut total = parts[0].clone();
                for p in &parts[1..] {
                    total = total.add(p)?;
                }
                let scale = parts.iter().map(|p| p.norm()).fold(0.0, f64::max);
                let absolute = total.norm();
                let relative = if scale > 0.0 { absolute / scale } else { 0.0 };
                entries.push(ResidualEntry { branch: eps, tau, m, absolute, relative });
            }
        }
    }
    let max_relative = entries.iter().map(|e| e.relative).fold(0.0, f64::max);
    Ok(ResidualReport { entries, max_relative })
}

/// Tensor polar grid: self-similar radii (order-0 nodes) × uniform angles.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub base: Arc<RadialGrid>,
    pub angles: Vec<f64>,
}

impl PolarGrid {
    /// Order-0 nodes with the template's (N, R_max) and 4·max(harmonic, 1) uniform angles.
    pub fn for_expansion(template: &Arc<RadialGrid>, max_harmonic: u32) -> Result<Self> {
        let base = build_grid(0, template.len(), template.r_max())?;
        let k = 4 * max_harmonic.max(1) as usize;
        Ok(PolarGrid { base, angles: (0..k).map(|j| 2.0 * PI * j as f64 / k as f64).collect() })
    }
}

/// A sampled physical field on a polar grid, row-major in radius.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub t: f64,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    /// max |Im| / max |Re| of the sampled sum.
    pub imag_ratio: f64,
}

impl PhysicalField {
    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &[(String, String)]) -> Result<()> {
        for (k, v) in meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "x,y,value")?;
        for (i, r) in self.radii.iter().enumerate() {
            for (j, phi) in self.angles.iter().enumerate() {
                writeln!(out, "{},{},{}", r * phi.cos(), r * phi.sin(), self.values[i * self.angles.len() + j])?;
            }
        }
        Ok(())
    }

    /// Little-endian f64 values, row-major (radius, angle), plus a JSON sidecar describing the layout.
    pub fn write_binary(&self, data: &Path, sidecar: &Path, meta: &[(String, String)]) -> Result<()> {
        let mut out = BufWriter::new(File::create(data)?);
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        let mut extra = serde_json::Map::new();
        for (k, v) in meta {
            extra.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        let side = serde_json::json!({
            "dtype": "<f8",
            "order": "row-major",
            "shape": [self.radii.len(), self.angles.len()],
            "axes": ["radius", "angle"],
            "t": self.t,
            "radii": self.radii,
            "angles": self.angles,
            "meta": extra,
        });
        std::fs::write(sidecar, serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }
}

/// Physical variables: θ(t, x) = t^{α/β−1}/ν · Θ(log t/ν, x/t^{1/β}), or for the force t^{α/β−2}/ν² · F.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Solution,
    Force,
}

pub fn prefactor(kind: FieldKind, alpha: f64, beta: f64, nu: f64, t: f64) -> f64 {
    match kind {
        FieldKind::Solution => t.powf(alpha / beta - 1.0) / nu,
        FieldKind::Force => t.powf(alpha / beta - 2.0) / (nu * nu),
    }
}

/// Samples an expansion at physical time t on physical radii and angles.
pub fn to_physical(e: &ModalExpansion, kind: FieldKind, alpha: f64, beta: f64, nu: f64, t: f64, grid: &PolarGrid) -> Result<PhysicalField> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("physical time must be positive, got {t}")));
    }
    let tau = t.ln() / nu;
    let ell = t.powf(1.0 / beta);
    let raw = e.sample(tau, &grid.base, &grid.angles);
    let pre = prefactor(kind, alpha, beta, nu, t);
    let max_re = raw.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(PhysicalField {
        t,
        radii: grid.base.nodes().iter().map(|x| x * ell).collect(),
        angles: grid.angles.clone(),
        values: raw.iter().map(|z| z.re * pre).collect(),
        imag_ratio: if max_re > 0.0 { max_im / max_re } else { max_im },
    })
}

/// Lebesgue exponents supported for physical norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lq {
    One,
    Two,
    Infinity,
}

impl Lq {
    pub fn parse(q: f64) -> Result<Self> {
        match q {
            q if q == 1.0 => Ok(Lq::One),
            q if q == 2.0 => Ok(Lq::Two),
            q if q == f64::INFINITY => Ok(Lq::Infinity),
            q => Err(Error::InvalidParameter(format!("q must be 1, 2 or ∞ for physical norms, got {q}"))),
        }
    }
    pub fn value(self) -> f64 {
        match self {
            Lq::One => 1.0,
            Lq::Two => 2.0,
            Lq::Infinity => f64::INFINITY,
        }
    }
}

/// ‖Λ^s u(t)‖_{L^q(dx)} from physical samples of u = prefactor·Θ(τ, x/ℓ).
pub fn physical_norm(e: &ModalExpansion, kind: FieldKind, alpha: f64, beta: f64, nu: f64, t: f64, s: f64, q: Lq) -> Result<f64> {
    let template = e.terms().first().map(|t| t.g.grid().clone()).ok_or_else(|| Error::InvalidParameter("empty expansion".into()))?;
    let ell = t.powf(1.0 / beta);
    let grid = PolarGrid::for_expansion(&template, e.max_harmonic())?;
    let field = to_physical(&e.riesz(s)?, kind, alpha, beta, nu, t, &grid)?;
    let weights = grid.base.weights();
    let dphi = 2.0 * PI / grid.angles.len() as f64;
    let k = grid.angles.len();
    let scale = ell.powf(-s);
    let norm = match q {
        Lq::Infinity => field.values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        Lq::One | Lq::Two => {
            let p = q.value();
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                let ring: f64 = field.values[i * k..(i + 1) * k].iter().map(|v| v.abs().powf(p)).sum();
                acc += w * ell * ell * dphi * ring;
            }
            acc.powf(1.0 / p)
        }
    };
    Ok(norm * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCurve {
    pub s: f64,
    pub q: Lq,
    pub points: Vec<(f64, f64)>,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub window: (f64, f64),
    /// (t, ‖Λ^sθ_±(t)‖, C·t^{(2/q−s−β+α)/β}) for both branches.
    pub envelope: Vec<(f64, f64, f64, f64)>,
    pub envelope_constant: f64,
    pub envelope_holds: bool,
}

/// Least-squares slope of log y against log t over points in the window.
pub fn loglog_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t >= window.0 && *t <= window.1 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if sel.len() < 5 || window.1 / window.0 < 10.0 {
        return Err(Error::InvalidParameter(format!("fit window too short: {} points over [{:e}, {:e}]", sel.len(), window.0, window.1)));
    }
    let k = sel.len() as f64;
    let mx = sel.iter().map(|p| p.0).sum::<f64>() / k;
    let my = sel.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = sel.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// ‖Λ^s(θ₁ − θ₂)(t)‖_{L^q} on `t_grid` ⊂ (0, 1], its fitted log-log slope and the size envelope.
pub fn separation_curve(sys: &GolovkinSystem, t_grid: &[f64], s: f64, q: Lq, window: (f64, f64)) -> Result<SeparationCurve> {
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::InvalidParameter("separation times must lie in (0, 1]".into()));
    }
    let (a, b, nu) = (sys.alpha, sys.beta, sys.nu);
    let plus = sys.theta_plus.riesz(s)?;
    let minus = sys.theta_minus.riesz(s)?;
    let diff = plus.add(&minus.scale(-1.0))?;
    let points: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| Ok((t, physical_norm(&diff, FieldKind::Solution, a, b, nu, t, 0.0, q)? * t.powf(-s / b))))
        .collect::<Result<_>>()?;
    let fitted_slope = loglog_slope(&points, window)?;
    let predicted_slope = a / b - 1.0 + (2.0 / q.value() - s) / b + sys.lambda.re / nu;

    let at_unit = |e: &ModalExpansion| physical_norm(e, FieldKind::Solution, a, b, nu, 1.0, s, q).map(|v| v * nu);
    let envelope_constant = (at_unit(&sys.theta_bar)? + at_unit(&sys.theta_lin)?) / nu * (1.0 + 1e-6);
    let exponent = (2.0 / q.value() - s - b + a) / b;
    let envelope: Vec<(f64, f64, f64, f64)> = t_grid
        .iter()
        .map(|&t| {
            let p = physical_norm(&sys.theta_plus, FieldKind::Solution, a, b, nu, t, s, q)?;
            let m = physical_norm(&sys.theta_minus, FieldKind::Solution, a, b, nu, t, s, q)?;
            Ok((t, p, m, envelope_constant * t.powf(exponent)))
        })
        .collect::<Result<_>>()?;
    let envelope_holds = envelope.iter().all(|(_, p, m, c)| p <= c && m <= c);
    Ok(SeparationCurve {
        s,
        q,
        points,
        fitted_slope,
        predicted_slope,
        window,
        envelope,
        envelope_constant,
        envelope_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub m: i32,
    pub mu: [f64; 2],
    pub c: [f64; 2],
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub n: i32,
    pub lambda: [f64; 2],
    pub eigen_residual: f64,
    pub convention: ShiftConvention,
    #[serde(rename = "N")]
    pub len: usize,
    pub r_max: f64,
    pub family: Option<FamilyRecord>,
    pub vortex_file: String,
    pub eigenvector_file: String,
    pub force: Vec<TermRecord>,
    pub config_hash: Option<String>,
}

pub const MANIFEST_FILE: &str = "golovkin.json";

fn write_profile(dir: &Path, name: &str, p: &RadialProfile, meta: &[(String, String)]) -> Result<String> {
    let mut out = BufWriter::new(File::create(dir.join(name))?);
    write_profile_csv(p, &mut out, meta)?;
    out.flush()?;
    Ok(name.to_string())
}

fn read_profile(dir: &Path, name: &str) -> Result<RadialProfile> {
    Ok(read_profile_csv(BufReader::new(File::open(dir.join(name))?))?.0)
}

impl GolovkinSystem {
    /// Writes the JSON manifest plus one profile CSV per stored radial function; returns the manifest path.
    pub fn save(&self, dir: &Path, config_hash: Option<&str>) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let meta: Vec<(String, String)> = config_hash.iter().map(|h| ("config_hash".to_string(), h.to_string())).collect();
        let vortex_file = write_profile(dir, "vortex.csv", self.vortex.theta(), &meta)?;
        let eigenvector_file = write_profile(dir, "eigenvector.csv", &self.w, &meta)?;
        let mut force = Vec::new();
        for (i, t) in self.force.terms().iter().enumerate() {
            let file = write_profile(dir, &format!("force_{i:02}.csv"), &t.g, &meta)?;
            force.push(TermRecord { m: t.m, mu: [t.mu.re, t.mu.im], c: [t.c.re, t.c.im], file });
        }
        let g = self.w.grid();
        let manifest = SystemManifest {
            alpha: self.alpha,
            beta: self.beta,
            nu: self.nu,
            n: self.n,
            lambda: [self.lambda.re, self.lambda.im],
            eigen_residual: self.eigen_residual,
            convention: self.convention,
            len: g.len(),
            r_max: g.r_max(),
            family: self.vortex.family().cloned(),
            vortex_file,
            eigenvector_file,
            force,
            config_hash: config_hash.map(String::from),
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }

    /// Rebuilds the system from a manifest: Θ± from (Θ̄, λ, W), F exactly as serialized.
    pub fn load(manifest_path: &Path) -> Result<(Self, SystemManifest)> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let manifest: SystemManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let theta = read_profile(dir, &manifest.vortex_file)?;
        let vortex = Vortex::new(theta, manifest.alpha, manifest.family.clone(), 1e-8)?;
        let w = read_profile(dir, &manifest.eigenvector_file)?;
        let mut terms = Vec::new();
        for t in &manifest.force {
            let g = read_profile(dir, &t.file)?;
            if g.grid().order() != t.m.unsigned_abs() {
                return Err(Error::Parse(format!("{} is not on an order-{} grid", t.file, t.m.unsigned_abs())));
            }
            terms.push(ModalTerm { m: t.m, mu: C64::new(t.mu[0], t.mu[1]), c: C64::new(t.c[0], t.c[1]), g });
        }
        let force = ModalExpansion { terms };
        let sys = Self::assemble(
            manifest.alpha,
            manifest.beta,
            manifest.nu,
            manifest.n,
            C64::new(manifest.lambda[0], manifest.lambda[1]),
            manifest.eigen_residual,
            manifest.convention,
            vortex,
            w,
            force,
        )?;
        Ok((sys, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin_expansion(n: i32) -> ModalExpansion {
        let g = build_grid(n.unsigned_abs(), 64, 20.0).unwrap();
        let w = RadialProfile::from_fn(&g, |r| C64::new(1.0, 0.4 * r) * r.powi(n) * (-r * r / 2.0).exp());
        let lambda = C64::new(0.2, -0.7);
        let half = C64::new(0.5, 0.0);
        ModalExpansion::from_terms(vec![
            ModalTerm::new(n, lambda, half, w.clone()).unwrap().unwrap(),
            ModalTerm::new(-n, lambda.conj(), half, w.conj()).unwrap().unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn canonical_merge_and_order() {
        let e = lin_expansion(2);
        assert_eq!(e.harmonics(), vec![-2, 2]);
        assert!(e.is_conjugate_closed(1e-14));
        for t in e.terms() {
            assert!((t.g.norm() - 1.0).abs() < 1e-14);
        }
        let doubled = e.add(&e).unwrap();
        assert_eq!(doubled.len(), 2);
        assert!((doubled.terms()[0].c - e.terms()[0].c * 2.0).norm() < 1e-14);
        assert!(e.add(&e.scale(-1.0)).unwrap().is_empty());
    }

    #[test]
    fn product_harmonics_and_mean() {
        let e = lin_expansion(2);
        let out = advect(&e, &e, 0.5, 6).unwrap();
        for m in out.harmonics() {
            assert!([0, 4, -4].contains(&m));
        }
        assert!(out.is_conjugate_closed(1e-10));
        let zero = out.harmonic_at(0, 0.0).unwrap();
        assert!(zero.norm() > 1e-3);
        assert!(crate::radial::integrate(&zero).norm() < 1e-9);
        assert!(advect(&e, &e, 0.5, 3).is_err());
    }

    #[test]
    fn sampled_field_is_real() {
        let e = lin_expansion(3);
        let g = PolarGrid::for_expansion(e.terms()[0].g.grid(), 3).unwrap();
        let f = to_physical(&e, FieldKind::Solution, 0.0, 2.0, 0.1, 1.0, &g).unwrap();
        assert!(f.imag_ratio < 1e-12);
        assert!(to_physical(&e, FieldKind::Solution, 0.0, 2.0, 0.1, 0.0, &g).is_err());
    }
}
