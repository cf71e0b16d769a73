//! Integrability regimes of the constructed solutions, named uniqueness classes,
//! trajectory norms, and the energy identity.

use crate::nonuniqueness::{prefactor, FieldKind, GolovkinSystem, ModalExpansion};
use crate::quadrature::integrate_adaptive;
use crate::transforms::HankelPlan;
use crate::{Error, Result, C64};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;

pub type Q = Ratio<i128>;

/// Width of the float-path boundary band.
pub const BAND: f64 = 1e-12;

/// Parses "3", "-1/2", "0.25", "1e-3" or "2.5E+1" into an exact rational.
pub fn parse_rational(text: &str) -> Result<Q> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((a, b)) = t.split_once('/') {
        let num: i128 = a.trim().parse().map_err(|_| bad())?;
        let den: i128 = b.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Q::new(num, den));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int}{frac}");
    let num: i128 = if all.is_empty() { 0 } else { all.parse().map_err(|_| bad())? };
    let shift = exp - frac.len() as i32;
    if shift.unsigned_abs() > 30 {
        return Err(Error::Parse(format!("exponent out of range for exact arithmetic: {text:?}")));
    }
    let pow = 10i128.pow(shift.unsigned_abs());
    let v = if shift >= 0 { Q::from_integer(num.checked_mul(pow).ok_or_else(bad)?) } else { Q::new(num, pow) };
    Ok(if neg { -v } else { v })
}

/// The shortest decimal that round-trips to `x`, as an exact rational.
pub fn rational_from_f64(x: f64) -> Result<Q> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{x} has no rational value")));
    }
    parse_rational(&format!("{x:e}"))
}

fn show(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn ser_q<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&show(q))
}

fn ser_opt_q<S: Serializer>(q: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.serialize_str(&show(q)),
        None => s.serialize_none(),
    }
}

/// Integrability exponent in [1, ∞].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Q),
    Infinite,
}

impl Exponent {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(Exponent::Infinite),
            t => Ok(Exponent::Finite(parse_rational(t)?)),
        }
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if x == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else {
            Ok(Exponent::Finite(rational_from_f64(x)?))
        }
    }

    /// 1/p with 1/∞ = 0.
    pub fn reciprocal(&self) -> Q {
        match self {
            Exponent::Finite(p) => p.recip(),
            Exponent::Infinite => Q::zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Finite(p) => p.to_f64().unwrap_or(f64::NAN),
            Exponent::Infinite => f64::INFINITY,
        }
    }

    fn valid(&self) -> bool {
        match self {
            Exponent::Finite(p) => *p >= Q::one(),
            Exponent::Infinite => true,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{}", show(p)),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn check_ab(alpha: Q, beta: Q) -> Result<()> {
    if alpha < Q::zero() || alpha > Q::one() {
        return Err(Error::InvalidParameter(format!("α must lie in [0, 1], got {}", show(&alpha))));
    }
    let top = alpha + Q::from_integer(3);
    if beta <= Q::zero() || beta >= top {
        return Err(Error::InvalidParameter(format!("β must satisfy 0 < β < 3+α = {}, got {}", show(&top), show(&beta))));
    }
    Ok(())
}

/// Λ^sθ ∈ L^p_t L^q and Λ^r f ∈ L^a_t L^b for one (α, β).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeQuery {
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
    #[serde(serialize_with = "ser_q")]
    pub beta: Q,
    #[serde(serialize_with = "ser_q")]
    pub s: Q,
    #[serde(serialize_with = "ser_q")]
    pub r: Q,
    pub p: Exponent,
    pub q: Exponent,
    pub a: Exponent,
    pub b: Exponent,
}

impl RegimeQuery {
    #[allow(clippy::too_many_arguments)]
    pub fn new(alpha: Q, beta: Q, s: Q, r: Q, p: Exponent, q: Exponent, a: Exponent, b: Exponent) -> Result<Self> {
        check_ab(alpha, beta)?;
        let floor = -Q::one();
        if s < floor || r < floor {
            return Err(Error::InvalidParameter(format!("s and r must be ≥ −1, got s = {}, r = {}", show(&s), show(&r))));
        }
        for (name, e) in [("p", p), ("q", q), ("a", a), ("b", b)] {
            if !e.valid() {
                return Err(Error::InvalidParameter(format!("{name} must lie in [1, ∞], got {e}")));
            }
        }
        Ok(RegimeQuery { alpha, beta, s, r, p, q, a, b })
    }

    /// β/p + 2/q and s+β−α.
    pub fn solution_sides(&self) -> (Q, Q) {
        let two = Q::from_integer(2);
        (self.beta * self.p.reciprocal() + two * self.q.reciprocal(), self.s + self.beta - self.alpha)
    }

    /// β/a + 2/b and r+2β−α.
    pub fn force_sides(&self) -> (Q, Q) {
        let two = Q::from_integer(2);
        (self.beta * self.a.reciprocal() + two * self.b.reciprocal(), self.r + two * self.beta - self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Strict,
    Critical,
    Outside,
    CriticalBand,
}

impl Verdict {
    fn exact(lhs: Q, rhs: Q) -> Self {
        match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => Verdict::Strict,
            std::cmp::Ordering::Equal => Verdict::Critical,
            std::cmp::Ordering::Less => Verdict::Outside,
        }
    }

    fn float(lhs: f64, rhs: f64) -> Self {
        let d = lhs - rhs;
        if d.abs() <= BAND * lhs.abs().max(rhs.abs()).max(1.0) {
            Verdict::CriticalBand
        } else if d > 0.0 {
            Verdict::Strict
        } else {
            Verdict::Outside
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Strict => "strict",
            Verdict::Critical => "critical",
            Verdict::Outside => "outside",
            Verdict::CriticalBand => "critical-band",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub query: RegimeQuery,
    pub solution: Verdict,
    pub force: Verdict,
    /// 2/(s+β−α) for p = ∞ and 0 < s+β−α ≤ 2.
    #[serde(serialize_with = "ser_opt_q")]
    pub q_crit: Option<Q>,
    pub classes: Vec<ClassRow>,
}

pub fn critical_q(alpha: Q, beta: Q, s: Q) -> Option<Q> {
    let d = s + beta - alpha;
    (d > Q::zero() && s <= alpha - beta + Q::from_integer(2)).then(|| Q::from_integer(2) / d)
}

pub fn regime_check(query: &RegimeQuery) -> Result<RegimeReport> {
    let (ls, rs) = query.solution_sides();
    let (lf, rf) = query.force_sides();
    let q_crit = match query.p {
        Exponent::Infinite => critical_q(query.alpha, query.beta, query.s),
        Exponent::Finite(_) => None,
    };
    Ok(RegimeReport {
        query: *query,
        solution: Verdict::exact(ls, rs),
        force: Verdict::exact(lf, rf),
        q_crit,
        classes: classify(query.alpha, query.beta)?,
    })
}

/// Float version of the two verdicts; p, q, a, b may be `f64::INFINITY`.
#[allow(clippy::too_many_arguments)]
pub fn regime_check_float(alpha: f64, beta: f64, s: f64, r: f64, p: f64, q: f64, a: f64, b: f64) -> Result<(Verdict, Verdict)> {
    if !(0.0..=1.0).contains(&alpha) || !(beta > 0.0 && beta < 3.0 + alpha) {
        return Err(Error::InvalidParameter(format!("need α ∈ [0, 1] and 0 < β < 3+α, got α = {alpha}, β = {beta}")));
    }
    if s < -1.0 || r < -1.0 || [p, q, a, b].iter().any(|e| !(*e >= 1.0)) {
        return Err(Error::InvalidParameter("need s, r ≥ −1 and p, q, a, b ∈ [1, ∞]".into()));
    }
    let inv = |e: f64| if e == f64::INFINITY { 0.0 } else { 1.0 / e };
    Ok((
        Verdict::float(beta * inv(p) + 2.0 * inv(q), s + beta - alpha),
        Verdict::float(beta * inv(a) + 2.0 * inv(b), r + 2.0 * beta - alpha),
    ))
}

/// One named class at (α, β).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassRow {
    pub class: String,
    pub threshold: String,
    pub holds: bool,
    pub citation: String,
}

/// Named nonuniqueness statements and the thresholds they sit below.
///
/// `holds` says whether the statement applies at (α, β); the threshold is the
/// L^p_tL^q regime below the uniqueness class, with numbers substituted.
pub fn classify(alpha: Q, beta: Q) -> Result<Vec<ClassRow>> {
    check_ab(alpha, beta)?;
    let q = |x: i128| Q::from_integer(x);
    let half = Q::new(1, 2);
    let row = |class: &str, threshold: String, holds: bool, citation: &str| ClassRow {
        class: class.into(),
        threshold,
        holds,
        citation: citation.into(),
    };
    Ok(vec![
        row(
            "Hs-energy",
            format!("s+β−α < 1, i.e. s < {} (s ≥ −1)", show(&(q(1) - beta + alpha))),
            beta < q(2) + alpha,
            "Miura–Ju",
        ),
        row(
            "Leray–Hopf/Marchand",
            format!("β < 2+α/2 = {}, s = (α−2)/2 = {}", show(&(q(2) + alpha * half)), show(&((alpha - q(2)) * half))),
            beta < q(2) + alpha * half,
            "Marchand",
        ),
        row("Resnick", format!("β < 1+α = {}, s = 0", show(&(q(1) + alpha))), beta < q(1) + alpha, "Resnick"),
        row(
            "Ladyzhenskaya–Prodi–Serrin",
            format!("β/p + 2/q > s+β−α = {} at s = −1", show(&(beta - alpha - q(1)))),
            alpha == q(0) && beta == q(2),
            "Ladyzhenskaya–Prodi–Serrin",
        ),
        row(
            "Constantin–Wu",
            format!("β/p + 2/q > β−1 = {} at s = 0", show(&(beta - q(1)))),
            alpha == q(1) && beta < q(4),
            "Constantin–Wu",
        ),
        row(
            "Dong–Chen–Zhao–Liu",
            format!("β/p + 2/q > 1+β−α = {} at s = 1", show(&(q(1) + beta - alpha))),
            beta < q(3) + alpha,
            "Dong–Chen–Zhao–Liu",
        ),
    ])
}

pub fn write_classes_csv<W: std::io::Write>(rows: &[ClassRow], out: &mut W, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "class,threshold,holds,citation")?;
    for r in rows {
        writeln!(out, "{},\"{}\",{},{}", r.class, r.threshold, r.holds, r.citation)?;
    }
    Ok(())
}

/// p((α−s)/β + 2/(βq) − 1) > −1, with 1/p = 0 for p = ∞.
pub fn solution_exponent_condition(query: &RegimeQuery) -> bool {
    let two = Q::from_integer(2);
    let gamma = (query.alpha - query.s) / query.beta + two * query.q.reciprocal() / query.beta - Q::one();
    exponent_condition(gamma, query.p)
}

/// a((α−r)/β + 2/(βb) − 2) > −1.
pub fn force_exponent_condition(query: &RegimeQuery) -> bool {
    let two = Q::from_integer(2);
    let delta = (query.alpha - query.r) / query.beta + two * query.b.reciprocal() / query.beta - two;
    exponent_condition(delta, query.a)
}

fn exponent_condition(gamma: Q, p: Exponent) -> bool {
    match p {
        Exponent::Finite(p) => p * gamma > -Q::one(),
        Exponent::Infinite => gamma > Q::zero(),
    }
}

/// L^p_t norm over (0, T] of a self-similar trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryNorm {
    pub value: f64,
    pub finite: bool,
    /// pγ + 1 (or γ for p = ∞).
    pub exponent: f64,
    pub quadrature_error: f64,
    pub diagnostic: Option<String>,
}

/// Time exponent of ‖Λ^sθ(t)‖_{L^q} / ‖Λ^sΘ(τ)‖_{L^q}.
pub fn solution_time_exponent(alpha: f64, beta: f64, s: f64, q: f64) -> f64 {
    (alpha - s) / beta + 2.0 / (beta * q) - 1.0
}

/// Time exponent of ‖Λ^r f(t)‖_{L^b} / ‖Λ^r F(τ)‖_{L^b}.
pub fn force_time_exponent(alpha: f64, beta: f64, r: f64, b: f64) -> f64 {
    (alpha - r) / beta + 2.0 / (beta * b) - 2.0
}

/// ‖Λ^sθ‖_{L^p_t(0,T) L^q} = ν^{−1}(∫₀^T t^{pγ} M(τ)^p dt)^{1/p} with τ = (log t)/ν and M(τ) = ‖Λ^sΘ(τ)‖_{L^q}.
#[allow(clippy::too_many_arguments)]
pub fn norm_from_trajectory(m: &dyn Fn(f64) -> f64, nu: f64, alpha: f64, beta: f64, s: f64, p: f64, q: f64, t_end: f64) -> Result<TrajectoryNorm> {
    let gamma = solution_time_exponent(alpha, beta, s, q);
    scaled_norm(m, nu, 1.0 / nu, gamma, p, t_end)
}

/// ‖Λ^r f‖_{L^a_t(0,T) L^b} = ν^{−2}(∫₀^T t^{aδ} N(τ)^a dt)^{1/a}.
#[allow(clippy::too_many_arguments)]
pub fn force_norm_from_trajectory(n: &dyn Fn(f64) -> f64, nu: f64, alpha: f64, beta: f64, r: f64, a: f64, b: f64, t_end: f64) -> Result<TrajectoryNorm> {
    let delta = force_time_exponent(alpha, beta, r, b);
    scaled_norm(n, nu, 1.0 / (nu * nu), delta, a, t_end)
}

fn scaled_norm(m: &dyn Fn(f64) -> f64, nu: f64, scale: f64, gamma: f64, p: f64, t_end: f64) -> Result<TrajectoryNorm> {
    if !(nu > 0.0) || !(t_end > 0.0) || !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need ν > 0, T > 0, p ≥ 1; got ν = {nu}, T = {t_end}, p = {p}")));
    }
    let u_end = t_end.ln();
    if p == f64::INFINITY {
        if gamma < 0.0 {
            return Ok(divergent(gamma, format!("t^{gamma:.6} is unbounded as t → 0")));
        }
        let samples = 4001;
        let span = 60.0 / gamma.max(1e-3);
        let sup = (0..samples)
            .map(|k| {
                let u = u_end - span * k as f64 / (samples - 1) as f64;
                (gamma * u).exp() * m(u / nu).abs()
            })
            .fold(0.0, f64::max);
        let diagnostic = (gamma == 0.0).then(|| "critical exponent: bounded only if the trajectory is".to_string());
        return Ok(TrajectoryNorm { value: scale * sup, finite: true, exponent: gamma, quadrature_error: 0.0, diagnostic });
    }
    let k = p * gamma + 1.0;
    if k <= 0.0 {
        return Ok(divergent(k, format!("∫ t^{:.6} dt diverges at t = 0", p * gamma)));
    }
    let span = 40.0 / k;
    let u0 = u_end - span;
    let pieces = 64;
    let breaks: Vec<f64> = (0..=pieces).map(|i| u0 + span * i as f64 / pieces as f64).collect();
    let f = |u: f64| (k * u).exp() * m(u / nu).abs().powf(p);
    let (body, err) = integrate_adaptive(f, &breaks, 0.0, 1e-11, 20_000)?;
    // constant extrapolation of M below t = e^{u0}
    let tail = (k * u0).exp() * m(u0 / nu).abs().powf(p) / k;
    Ok(TrajectoryNorm {
        value: scale * (body + tail).powf(1.0 / p),
        finite: true,
        exponent: k,
        quadrature_error: err + tail,
        diagnostic: None,
    })
}

fn divergent(exponent: f64, why: String) -> TrajectoryNorm {
    TrajectoryNorm { value: f64::INFINITY, finite: false, exponent, quadrature_error: 0.0, diagnostic: Some(why) }
}

/// Re Σ over equal harmonics of 2π conj(c_a e^{μ_aτ}) c_b e^{μ_bτ} ⟨g_a, g_b⟩_{Ḣ^s}.
#[derive(Debug, Clone)]
pub struct Pairing {
    rates: Vec<C64>,
    weights: Vec<C64>,
}

impl Pairing {
    pub fn new(x: &ModalExpansion, y: &ModalExpansion, s: f64) -> Result<Self> {
        let mut rates = Vec::new();
        let mut weights = Vec::new();
        for a in x.terms() {
            for b in y.terms().iter().filter(|b| b.m == a.m) {
                if a.g.grid().key() != b.g.grid().key() {
                    return Err(Error::GridMismatch(format!("harmonic {} lives on different grids", a.m)));
                }
                let g = HankelPlan::shared(a.g.grid()).sobolev_inner(&a.g, &b.g, s);
                rates.push(a.mu.conj() + b.mu);
                weights.push(a.c.conj() * b.c * g * (2.0 * PI));
            }
        }
        Ok(Pairing { rates, weights })
    }

    pub fn at(&self, tau: f64) -> f64 {
        self.rates.iter().zip(&self.weights).map(|(r, w)| (w * (r * tau).exp()).re).sum()
    }
}

/// Both sides of ½‖θ(t)‖²_{Ḣ^s} + ∫_{t₀}^t ‖θ‖²_{Ḣ^{s+β/2}} = ½‖θ(t₀)‖²_{Ḣ^s} + ∫_{t₀}^t ⟨f, θ⟩_{Ḣ^s}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyIdentity {
    pub s: f64,
    pub branch: f64,
    pub t0: f64,
    pub t1: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    pub dissipation: f64,
    pub work: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub mismatch: f64,
}

pub fn energy_identity(sys: &GolovkinSystem, branch: f64, s: f64, t0: f64, t1: f64) -> Result<EnergyIdentity> {
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::InvalidParameter(format!("need 0 < t₀ < t, got t₀ = {t0}, t = {t1}")));
    }
    let (alpha, beta, nu) = (sys.alpha, sys.beta, sys.nu);
    let theta = sys.branch(branch)?;
    let energy = Pairing::new(&theta, &theta, s)?;
    let diss = Pairing::new(&theta, &theta, s + beta / 2.0)?;
    let work = Pairing::new(&sys.force, &theta, s)?;
    let ell = |t: f64| t.powf(1.0 / beta);
    let sol = |t: f64| prefactor(FieldKind::Solution, alpha, beta, nu, t);
    let frc = |t: f64| prefactor(FieldKind::Force, alpha, beta, nu, t);
    let e = |t: f64| 0.5 * sol(t).powi(2) * ell(t).powf(2.0 - 2.0 * s) * energy.at(t.ln() / nu);
    let d = |t: f64| sol(t).powi(2) * ell(t).powf(2.0 - 2.0 * s - beta) * diss.at(t.ln() / nu);
    let w = |t: f64| frc(t) * sol(t) * ell(t).powf(2.0 - 2.0 * s) * work.at(t.ln() / nu);
    let pieces = 64;
    let (u0, u1) = (t0.ln(), t1.ln());
    let breaks: Vec<f64> = (0..=pieces).map(|i| u0 + (u1 - u0) * i as f64 / pieces as f64).collect();
    let in_log = |g: &dyn Fn(f64) -> f64| integrate_adaptive(|u: f64| g(u.exp()) * u.exp(), &breaks, 0.0, 1e-12, 20_000).map(|r| r.0);
    let dissipation = in_log(&d)?;
    let work = in_log(&w)?;
    let (energy_start, energy_end) = (e(t0), e(t1));
    let lhs = energy_end + dissipation;
    let rhs = energy_start + work;
    let mismatch = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    Ok(EnergyIdentity { s, branch, t0, t1, energy_start, energy_end, dissipation, work, lhs, rhs, mismatch })
}

/// The regimes for θ ∈ C_tḢ^s, θ ∈ L²_tḢ^{s+β/2}, f ∈ L¹_tḢ^s and f ∈ L²_tḢ^{s−β/2} (q = b = 2).
pub fn energy_class_conditions(alpha: Q, beta: Q, s: Q) -> Result<[bool; 4]> {
    check_ab(alpha, beta)?;
    let (one, two, half) = (Q::one(), Q::from_integer(2), Q::new(1, 2));
    Ok([
        one > s + beta - alpha,
        beta * half + one > s + beta * half + beta - alpha,
        beta + one > s + two * beta - alpha,
        beta * half + one > s - beta * half + two * beta - alpha,
    ])
}
