//! Generating curves `γ = (γ₁, γ₂)`: definitions, jets, convexity,
//! affine-normal coefficients, affine-sphere conditions and their
//! integration as second-order ODEs.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::taylor::{Layout, Real, Taylor};

/// The three families of the classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `ζ ≠ 0`: `F = (γ₁ φ(u), γ₂)` over an ε-quadric `φ`.
    #[serde(rename = "Case1_ZNonZero", alias = "case1")]
    Case1,
    /// `ζ = 0`, `σ ≠ r`: `F = (γ₁ u, γ₁ |u|²/2 + γ₂, γ₁)`.
    #[serde(rename = "Case2_RNotSigma", alias = "case2")]
    Case2,
    /// `ζ = 0`, `σ = r`: `F = (u, |u|²/2 + γ₁, γ₂)`.
    #[serde(rename = "Case3_RIsSigma", alias = "case3")]
    Case3,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::Case1 => "Case1_ZNonZero",
            Case::Case2 => "Case2_RNotSigma",
            Case::Case3 => "Case3_RIsSigma",
        })
    }
}

/// One summand of an analytic curve component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// `coef · e^{rate t}`
    Exp { coef: f64, rate: f64 },
    /// `coef · t^exponent` (non-integer exponents need `t > 0`)
    Power { coef: f64, exponent: f64 },
}

impl Term {
    pub fn exp(coef: f64, rate: f64) -> Term {
        Term::Exp { coef, rate }
    }

    pub fn power(coef: f64, exponent: f64) -> Term {
        Term::Power { coef, exponent }
    }

    pub fn eval<T: Real>(&self, t: &T) -> T {
        match *self {
            Term::Exp { coef, rate } => (t.clone() * rate).exp() * coef,
            Term::Power { coef, exponent } if exponent == 0.0 => t.lift(coef),
            Term::Power { coef, exponent } => t.powf(exponent) * coef,
        }
    }
}

fn eval_sum<T: Real>(terms: &[Term], t: &T) -> T {
    terms
        .iter()
        .fold(t.lift(0.0), |acc, term| acc + term.eval(t))
}

/// Parameters of the named example curves. Missing values fall back to the
/// family dimension and to defaults documented on [`builtin_curve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereKind {
    Improper,
    Proper,
}

impl std::fmt::Display for SphereKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SphereKind::Improper => "improper",
            SphereKind::Proper => "proper",
        })
    }
}

/// Parametrization gauge closing the sphere ODE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `γ̈₂ = 0`
    FixDot2,
    /// `γ̈₁ = 0`
    FixDot1,
}

impl Gauge {
    pub fn default_for(case: Case) -> Gauge {
        match case {
            Case::Case2 => Gauge::FixDot1,
            _ => Gauge::FixDot2,
        }
    }
}

/// Initial value problem for an affine-sphere generating curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereOdeSpec {
    pub kind: SphereKind,
    pub case: Case,
    pub c: f64,
    pub n: usize,
    pub t0: f64,
    /// `(γ₁, γ₂, γ̇₁, γ̇₂)` at `t0`.
    pub initial: [f64; 4],
    pub t_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<Gauge>,
    /// Quadric sign for the Case1 convexity test; 0 only requires the sign
    /// of the convexity expression to persist.
    #[serde(default)]
    pub epsilon: i8,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    65
}

/// Curve definition as found in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurveDef {
    Analytic { g1: Vec<Term>, g2: Vec<Term> },
    Builtin {
        name: String,
        #[serde(default)]
        params: BuiltinParams,
    },
    Ode(SphereOdeSpec),
}

impl CurveDef {
    pub fn builtin(name: &str, params: BuiltinParams) -> CurveDef {
        CurveDef::Builtin {
            name: name.to_string(),
            params,
        }
    }

    /// Resolves to an evaluable curve; `n` is the family dimension.
    pub fn resolve(&self, n: usize) -> Result<Curve> {
        match self {
            CurveDef::Analytic { g1, g2 } => Ok(Curve::Analytic {
                g1: g1.clone(),
                g2: g2.clone(),
            }),
            CurveDef::Builtin { name, params } => builtin_curve(name, params, n)?.resolve(n),
            CurveDef::Ode(spec) => {
                let curve = sphere_curve_integrate(spec, &OdeOptions::default())?;
                if let Some(e) = &curve.stopped {
                    return Err(Error::InvalidSpec(format!("curve integration stopped early: {e}")));
                }
                Ok(Curve::Integrated(Arc::new(curve)))
            }
        }
    }
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "calabi_proper_point",
    "calabi_semiprojective",
    "calabi_standard",
    "improper_power_case2",
    "improper_power_case3",
    "exponential",
];

/// Named example curves:
/// - `calabi_proper_point`: `(e^{-t/n}, e^t)`
/// - `calabi_semiprojective`: `(e^{t/(n+1)}, e^{-t/(n+1)})`
/// - `calabi_standard`: `(e^{t/2}, e^{-t/(n+1)})`
/// - `improper_power_case2`: `(t, c t^{n+1})`, default `c = 1`
/// - `improper_power_case3`: `(c t^n, t^{n+1})`, default `c = -1`
/// - `exponential`: `(e^{at}, e^{bt})`, `a` and `b` required
pub fn builtin_curve(name: &str, params: &BuiltinParams, n: usize) -> Result<CurveDef> {
    let nf = params.n.unwrap_or(n) as f64;
    let analytic = |g1: Vec<Term>, g2: Vec<Term>| Ok(CurveDef::Analytic { g1, g2 });
    let need = |v: Option<f64>, what: &str| {
        v.ok_or_else(|| Error::InvalidSpec(format!("curve `{name}` needs parameter `{what}`")))
    };
    match name {
        "calabi_proper_point" => analytic(vec![Term::exp(1.0, -1.0 / nf)], vec![Term::exp(1.0, 1.0)]),
        "calabi_semiprojective" => analytic(
            vec![Term::exp(1.0, 1.0 / (nf + 1.0))],
            vec![Term::exp(1.0, -1.0 / (nf + 1.0))],
        ),
        "calabi_standard" => analytic(vec![Term::exp(1.0, 0.5)], vec![Term::exp(1.0, -1.0 / (nf + 1.0))]),
        "improper_power_case2" => analytic(
            vec![Term::power(1.0, 1.0)],
            vec![Term::power(params.c.unwrap_or(1.0), nf + 1.0)],
        ),
        "improper_power_case3" => analytic(
            vec![Term::power(params.c.unwrap_or(-1.0), nf)],
            vec![Term::power(1.0, nf + 1.0)],
        ),
        "exponential" => analytic(
            vec![Term::exp(1.0, need(params.a, "a")?)],
            vec![Term::exp(1.0, need(params.b, "b")?)],
        ),
        other => Err(Error::UnknownCurve(other.to_string())),
    }
}

/// An evaluable generating curve.
#[derive(Clone, Debug)]
pub enum Curve {
    Analytic { g1: Vec<Term>, g2: Vec<Term> },
    Integrated(Arc<IntegratedCurve>),
}

impl Curve {
    pub fn analytic(g1: Vec<Term>, g2: Vec<Term>) -> Curve {
        Curve::Analytic { g1, g2 }
    }

    /// Both components composed with a Taylor-expanded parameter.
    pub fn taylor(&self, t: &Taylor) -> Result<[Taylor; 2]> {
        match self {
            Curve::Analytic { g1, g2 } => Ok([eval_sum(g1, t), eval_sum(g2, t)]),
            Curve::Integrated(c) => {
                let [s1, s2] = c.series(t.value(), t.layout().order())?;
                Ok([t.compose_series(&s1), t.compose_series(&s2)])
            }
        }
    }

    pub fn value(&self, t: f64) -> Result<[f64; 2]> {
        match self {
            Curve::Analytic { g1, g2 } => Ok([eval_sum(g1, &t), eval_sum(g2, &t)]),
            Curve::Integrated(c) => Ok(c.state_at(t)?.map_first()),
        }
    }

    pub fn jet(&self, t: f64) -> Result<CurveJet> {
        let tt = Taylor::var(&Layout::get(1, 3), 0, t);
        let [g1, g2] = self.taylor(&tt)?;
        Ok(CurveJet::from_taylor(t, &g1, &g2))
    }

    /// Parameter range on which the curve is defined, if limited.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            Curve::Analytic { .. } => None,
            Curve::Integrated(c) => Some((c.t[0], c.t[c.t.len() - 1])),
        }
    }
}

trait FirstTwo {
    fn map_first(self) -> [f64; 2];
}

impl FirstTwo for [f64; 4] {
    fn map_first(self) -> [f64; 2] {
        [self[0], self[1]]
    }
}

/// Value and first three derivatives of both components at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveJet {
    pub t: f64,
    pub g1: f64,
    pub g2: f64,
    pub d1g1: f64,
    pub d1g2: f64,
    pub d2g1: f64,
    pub d2g2: f64,
    pub d3g1: f64,
    pub d3g2: f64,
}

impl CurveJet {
    pub fn from_taylor(t: f64, g1: &Taylor, g2: &Taylor) -> CurveJet {
        CurveJet {
            t,
            g1: g1.value(),
            g2: g2.value(),
            d1g1: g1.partial(&[0]),
            d1g2: g2.partial(&[0]),
            d2g1: g1.partial(&[0, 0]),
            d2g2: g2.partial(&[0, 0]),
            d3g1: g1.partial(&[0, 0, 0]),
            d3g2: g2.partial(&[0, 0, 0]),
        }
    }

    /// `W = γ̈₁ γ̇₂ − γ̈₂ γ̇₁`
    pub fn w(&self) -> f64 {
        self.d2g1 * self.d1g2 - self.d2g2 * self.d1g1
    }

    fn taylor(&self) -> [Taylor; 2] {
        let tt = Taylor::var(&Layout::get(1, 3), 0, self.t);
        [
            tt.compose_derivatives(&[self.g1, self.d1g1, self.d2g1, self.d3g1]),
            tt.compose_derivatives(&[self.g2, self.d1g2, self.d2g2, self.d3g2]),
        ]
    }
}

const DEGENERACY_TOL: f64 = 1e-12;

fn check_nondegenerate(case: Case, cj: &CurveJet) -> Result<()> {
    let bad = |what| Err(Error::DegenerateCurve { t: cj.t, what });
    match case {
        Case::Case1 | Case::Case3 if cj.d1g2.abs() < DEGENERACY_TOL => bad("derivative of the second component vanishes"),
        Case::Case2 if cj.d1g1.abs() < DEGENERACY_TOL => bad("derivative of the first component vanishes"),
        Case::Case1 | Case::Case2 if cj.g1.abs() < DEGENERACY_TOL => bad("first component vanishes"),
        _ => Ok(()),
    }
}

/// Signed value of the convexity expression and whether its strict
/// inequality holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convexity {
    pub pass: bool,
    pub value: f64,
}

pub fn convexity_check(case: Case, cj: &CurveJet, epsilon: i8) -> Result<Convexity> {
    check_nondegenerate(case, cj)?;
    let w = cj.w();
    let (value, pass) = match case {
        Case::Case1 => {
            let v = epsilon as f64 * cj.d1g2 * cj.g1 * w;
            (v, v < 0.0)
        }
        Case::Case2 => {
            let v = cj.d1g1 * cj.g1 * (-w);
            (v, v > 0.0)
        }
        Case::Case3 => {
            let v = w * cj.d1g2;
            (v, v > 0.0)
        }
    };
    Ok(Convexity { pass, value })
}

/// Coefficients of the Blaschke normal `ξ = μ φ̃ + ν ∂_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalCoefficients {
    pub mu: f64,
    pub nu: f64,
    pub mu_dot: f64,
    /// The sign `±` in `μ^{n+2} (…) = ± (…)`.
    pub branch_sign: i8,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Solves the equi-affine condition for `μ` (as a Taylor series in `t`, so
/// `μ̇` is exact) and recovers `ν` from the first derivative relation.
///
/// The sign of `μ` is the one that makes the affine metric positive
/// definite. A requested `branch` that is incompatible with it has no
/// admissible real root.
pub fn normal_coefficients(case: Case, cj: &CurveJet, epsilon: i8, n: usize, branch: Option<i8>) -> Result<NormalCoefficients> {
    check_nondegenerate(case, cj)?;
    if case == Case::Case1 && epsilon == 0 {
        return Err(Error::InvalidSpec("Case1 needs epsilon = ±1".into()));
    }
    let [g1, g2] = cj.taylor();
    let d1 = g1.derivative(0);
    let d2 = g2.derivative(0);
    let w = &d1.derivative(0) * &d2 - &d2.derivative(0) * &d1;
    if w.value().abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateCurve {
            t: cj.t,
            what: "curvature term W vanishes",
        });
    }
    let nf = n as f64;
    let eps = epsilon as f64;
    // |μ|^{n+2} = |rhs| / |lhs factors|, and the signed equation's pieces
    let (lhs, rhs, mu_sign) = match case {
        Case::Case1 => (
            g1.powi(n as i32 - 1) * d2.powi(3),
            &w * eps.powi(n as i32 - 1),
            -eps * sign(cj.g1),
        ),
        Case::Case2 => (d1.powi(3) * g1.powi(n as i32 - 1), -&w, sign(cj.g1)),
        Case::Case3 => (d2.powi(3), w.clone(), 1.0),
    };
    let ratio = &rhs / &lhs;
    let mu = ratio.abs().powf(1.0 / (nf + 2.0)) * mu_sign;
    let mu_pow = mu.value().powi(n as i32 + 2);
    let branch_sign = sign(mu_pow * lhs.value() / rhs.value()) as i8;
    if let Some(b) = branch {
        if b != branch_sign {
            return Err(Error::NoRealRoot {
                t: cj.t,
                rhs: b as f64 * rhs.value(),
            });
        }
    }
    let mu_dot = mu.derivative(0).value();
    let nu = match case {
        Case::Case2 => -mu_dot * cj.d1g1 / (-cj.w()),
        _ => -mu_dot * cj.d1g2 / cj.w(),
    };
    Ok(NormalCoefficients {
        mu: mu.value(),
        nu,
        mu_dot,
        branch_sign,
    })
}

/// `(P, Q·W)` with the sphere equation reading `c P = Q W`.
fn sphere_sides<T: Real>(kind: SphereKind, case: Case, n: usize, y: [&T; 6]) -> Result<(T, T)> {
    let [g1, g2, d1, d2, dd1, dd2] = y;
    let m = n as i32;
    let w = dd1.clone() * d2.clone() - dd2.clone() * d1.clone();
    Ok(match (kind, case) {
        (SphereKind::Improper, Case::Case1) => (d1.powi(m + 2) * g1.powi(m - 1), d2.powi(m - 1) * w),
        (SphereKind::Improper, Case::Case2) => (d1.powi(3) * g1.powi(m - 1), -w),
        (SphereKind::Improper, Case::Case3) => (d1.powi(m + 2), d2.powi(m - 1) * w),
        (SphereKind::Proper, Case::Case1) => (
            (d2.clone() * g1.clone() - d1.clone() * g2.clone()).powi(m + 2) * g1.powi(m - 1),
            d2.powi(m - 1) * w,
        ),
        (SphereKind::Proper, Case::Case2) => (
            (d1.clone() * g2.clone() - d2.clone() * g1.clone()).powi(m + 2) * g1.powi(m - 1),
            d1.powi(m - 1) * (-w),
        ),
        (kind, case) => {
            return Err(Error::InadmissibleSphere {
                kind: kind.to_string(),
                case: case.to_string(),
            })
        }
    })
}

fn jet_sides(kind: SphereKind, case: Case, n: usize, cj: &CurveJet) -> Result<(f64, f64)> {
    sphere_sides(kind, case, n, [&cj.g1, &cj.g2, &cj.d1g1, &cj.d1g2, &cj.d2g1, &cj.d2g2])
}

/// Least-squares constant `c` minimizing `Σ (c P − Q W)²` over the jets.
pub fn estimate_c(kind: SphereKind, case: Case, jets: &[CurveJet], n: usize) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for cj in jets {
        let (p, qw) = jet_sides(kind, case, n, cj)?;
        num += p * qw;
        den += p * p;
    }
    if den == 0.0 {
        return Err(Error::DegenerateCurve {
            t: jets.first().map_or(0.0, |j| j.t),
            what: "sphere equation has a vanishing left-hand side",
        });
    }
    Ok(num / den)
}

/// Largest scale-normalized defect `|c P − Q W| / max(|c P|, |Q W|, 1)`.
pub fn sphere_residual(kind: SphereKind, case: Case, jets: &[CurveJet], c: f64, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for cj in jets {
        let (p, qw) = jet_sides(kind, case, n, cj)?;
        let lhs = c * p;
        worst = worst.max((lhs - qw).abs() / lhs.abs().max(qw.abs()).max(1.0));
    }
    Ok(worst)
}

/// The sphere equation solved for the second derivatives under a gauge.
#[derive(Clone, Debug)]
pub struct SphereOde {
    pub kind: SphereKind,
    pub case: Case,
    pub c: f64,
    pub n: usize,
    pub gauge: Gauge,
}

impl SphereOde {
    pub fn from_spec(spec: &SphereOdeSpec) -> SphereOde {
        SphereOde {
            kind: spec.kind,
            case: spec.case,
            c: spec.c,
            n: spec.n,
            gauge: spec.gauge.unwrap_or(Gauge::default_for(spec.case)),
        }
    }

    /// Second derivatives from the state `(γ₁, γ₂, γ̇₁, γ̇₂)`.
    pub fn accel<T: Real>(&self, y: &[T]) -> Result<[T; 2]> {
        let zero = y[0].lift(0.0);
        // Q W is linear in (γ̈₁, γ̈₂): evaluate it on unit second derivatives
        let sides = |dd1: &T, dd2: &T| sphere_sides(self.kind, self.case, self.n, [&y[0], &y[1], &y[2], &y[3], dd1, dd2]);
        let (p, _) = sides(&zero, &zero)?;
        let one = y[0].lift(1.0);
        let target = p * self.c;
        let (coef, free) = match self.gauge {
            Gauge::FixDot2 => (sides(&one, &zero)?.1, 0),
            Gauge::FixDot1 => (sides(&zero, &one)?.1, 1),
        };
        if coef.value().abs() < DEGENERACY_TOL {
            return Err(Error::GaugeVanishes { t: f64::NAN });
        }
        let dd = target / coef;
        Ok(if free == 0 { [dd, zero] } else { [zero, dd] })
    }

    pub fn rhs<T: Real>(&self, y: &[T]) -> Result<Vec<T>> {
        let [a1, a2] = self.accel(y)?;
        Ok(vec![y[2].clone(), y[3].clone(), a1, a2])
    }

    fn jet(&self, t: f64, y: &[f64]) -> Result<CurveJet> {
        let [a1, a2] = self.accel(y)?;
        Ok(CurveJet {
            t,
            g1: y[0],
            g2: y[1],
            d1g1: y[2],
            d1g2: y[3],
            d2g1: a1,
            d2g2: a2,
            d3g1: f64::NAN,
            d3g2: f64::NAN,
        })
    }
}

/// Numerically integrated sphere curve: states on a grid plus the ODE, so
/// Taylor expansions at any parameter can be regenerated.
#[derive(Debug)]
pub struct IntegratedCurve {
    pub ode: SphereOde,
    pub t: Vec<f64>,
    pub y: Vec<[f64; 4]>,
    /// Set when convexity or solvability failed before the end of the range.
    pub stopped: Option<Error>,
}

impl IntegratedCurve {
    fn nearest(&self, t: f64) -> usize {
        let k = self.t.partition_point(|&x| x < t);
        match k {
            0 => 0,
            k if k >= self.t.len() => self.t.len() - 1,
            k if (self.t[k] - t).abs() < (t - self.t[k - 1]).abs() => k,
            k => k - 1,
        }
    }

    /// State `(γ₁, γ₂, γ̇₁, γ̇₂)` at `t`, integrating from the nearest node.
    pub fn state_at(&self, t: f64) -> Result<[f64; 4]> {
        let (lo, hi) = (self.t[0], self.t[self.t.len() - 1]);
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(Error::OutsideDomain {
                point: vec![t],
                coord: 0,
                lo,
                hi,
            });
        }
        let k = self.nearest(t);
        if self.t[k] == t {
            return Ok(self.y[k]);
        }
        let opts = OdeOptions {
            rtol: 1e-13,
            atol: 1e-13,
            ..OdeOptions::default()
        };
        let sol = ode::integrate(|_, y| self.ode.rhs(y), &self.y[k], &[self.t[k], t], &opts, |_, _| Ok(()))?;
        let y = &sol.y[sol.y.len() - 1];
        Ok([y[0], y[1], y[2], y[3]])
    }

    /// Taylor coefficients of `γ₁`, `γ₂` in `(τ − t)` up to `order`, by
    /// Picard iteration in the Taylor algebra.
    pub fn series(&self, t: f64, order: usize) -> Result<[Vec<f64>; 2]> {
        let y0 = self.state_at(t)?;
        let layout = Layout::get(1, order.max(1));
        let mut y: Vec<Taylor> = y0.iter().map(|&v| Taylor::constant(&layout, v)).collect();
        for _ in 0..=order {
            let f = self.ode.rhs(&y)?;
            y = (0..4)
                .map(|i| f[i].integrate_univariate() + y0[i])
                .collect();
        }
        let coeffs = |p: &Taylor| (0..=order).map(|k| p.coeff(&[k as u8])).collect();
        Ok([coeffs(&y[0]), coeffs(&y[1])])
    }

    /// Jets (up to second derivatives) at the stored nodes.
    pub fn node_jets(&self) -> Result<Vec<CurveJet>> {
        self.t
            .iter()
            .zip(&self.y)
            .map(|(&t, y)| self.ode.jet(t, y))
            .collect()
    }
}

/// Integrates the sphere equation of `spec` over `spec.t_range` from the
/// initial data at `spec.t0`, checking convexity after every step.
pub fn sphere_curve_integrate(spec: &SphereOdeSpec, opts: &OdeOptions) -> Result<IntegratedCurve> {
    let ode = SphereOde::from_spec(spec);
    let [lo, hi] = spec.t_range;
    if !(lo < hi) || spec.t0 < lo || spec.t0 > hi {
        return Err(Error::InvalidSpec(format!(
            "t0 = {} must lie in the range [{lo}, {hi}]",
            spec.t0
        )));
    }
    if spec.nodes < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: spec.nodes,
        });
    }
    let first = ode.jet(spec.t0, &spec.initial).map_err(|e| match e {
        Error::GaugeVanishes { .. } => Error::GaugeVanishes { t: spec.t0 },
        other => other,
    })?;
    let start = convexity_check(spec.case, &first, spec.epsilon.signum())?;
    if spec.epsilon != 0 || spec.case != Case::Case1 {
        if !start.pass {
            return Err(Error::ConvexityViolated {
                t: spec.t0,
                value: start.value,
            });
        }
    }
    let start_sign = sign(start.value);
    let check = |t: f64, y: &[f64]| -> Result<()> {
        let cj = ode.jet(t, y).map_err(|e| match e {
            Error::GaugeVanishes { .. } => Error::GaugeVanishes { t },
            other => other,
        })?;
        let conv = convexity_check(spec.case, &cj, spec.epsilon.signum())?;
        let ok = if spec.case == Case::Case1 && spec.epsilon == 0 {
            sign(conv.value) == start_sign && conv.value != 0.0
        } else {
            conv.pass
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConvexityViolated { t, value: conv.value })
        }
    };
    let uniform: Vec<f64> = (0..spec.nodes)
        .map(|k| lo + (hi - lo) * k as f64 / (spec.nodes - 1) as f64)
        .collect();
    let mut forward = vec![spec.t0];
    forward.extend(uniform.iter().copied().filter(|&t| t > spec.t0));
    let mut backward = vec![spec.t0];
    backward.extend(uniform.iter().rev().copied().filter(|&t| t < spec.t0));

    let rhs = |_: f64, y: &[f64]| ode.rhs(y);
    let fwd = ode::integrate(rhs, &spec.initial, &forward, opts, check)?;
    let bwd = ode::integrate(rhs, &spec.initial, &backward, opts, check)?;

    let mut t: Vec<f64> = Vec::new();
    let mut y: Vec<[f64; 4]> = Vec::new();
    for (tb, yb) in bwd.t.iter().zip(&bwd.y).skip(1).rev() {
        t.push(*tb);
        y.push([yb[0], yb[1], yb[2], yb[3]]);
    }
    for (tf, yf) in fwd.t.iter().zip(&fwd.y) {
        t.push(*tf);
        y.push([yf[0], yf[1], yf[2], yf[3]]);
    }
    Ok(IntegratedCurve {
        ode,
        t,
        y,
        stopped: bwd.stopped.or(fwd.stopped),
    })
}

/// Writes `t, γ₁, γ₂, γ̇₁, γ̇₂` rows.
pub fn write_curve_csv<W: Write>(jets: &[CurveJet], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "g1", "g2", "d1g1", "d1g2"])?;
    for j in jets {
        w.write_record([j.t, j.g1, j.g2, j.d1g1, j.d1g2].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}
