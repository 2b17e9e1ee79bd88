//! ε-quadrics, the three warped-product families generated by a planar
//! curve, and their warping data along the curve parameter.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{structure_at, AffineOptions, InducedStructure};
use crate::curves::{
    convexity_check, normal_coefficients, BuiltinParams, Case, Curve, CurveDef, NormalCoefficients, SphereKind, SphereOdeSpec,
};
use crate::error::{Error, Result};
use crate::multijet::Immersion;
use crate::quadrature::cumulative_simpson;
use crate::symmetry::{canonical_fields, field_ode_residual, warped_fields, FieldResidual, FieldSamples, FrameFields, FrameOptions};
use crate::taylor::{Real, Taylor};

/// Standard chart of the affine hypersphere of mean curvature `ε` in
/// `R^{m+1}`, optionally stretched along the coordinate axes.
#[derive(Clone, Debug)]
pub struct QuadricImmersion {
    pub epsilon: i8,
    pub m: usize,
    pub scales: Vec<f64>,
}

impl QuadricImmersion {
    pub fn new(epsilon: i8, m: usize) -> Result<QuadricImmersion> {
        if m < 1 || !(-1..=1).contains(&epsilon) {
            return Err(Error::InvalidSpec(format!("quadric with epsilon {epsilon} and dimension {m}")));
        }
        Ok(QuadricImmersion {
            epsilon,
            m,
            scales: vec![1.0; m + 1],
        })
    }

    /// Affine image `diag(scales) · x` (e.g. an ellipsoid from the sphere).
    pub fn with_scales(mut self, scales: Vec<f64>) -> QuadricImmersion {
        assert_eq!(scales.len(), self.m + 1);
        self.scales = scales;
        self
    }

    /// Position in the unscaled chart:
    /// - `ε = 1`: `(cos u₁, sin u₁ cos u₂, …, sin u₁ ⋯ sin u_m)`
    /// - `ε = −1`: `(sinh u₁, cosh u₁ sinh u₂, …, cosh u₁ ⋯ cosh u_m)`
    /// - `ε = 0`: `(u, |u|²/2)`
    pub fn chart<T: Real>(&self, u: &[T]) -> Vec<T> {
        let m = self.m;
        let mut out = Vec::with_capacity(m + 1);
        match self.epsilon {
            1 | -1 => {
                let (lead, tail): (fn(&T) -> T, fn(&T) -> T) = if self.epsilon == 1 {
                    (|x| x.cos(), |x| x.sin())
                } else {
                    (|x| x.sinh(), |x| x.cosh())
                };
                let mut prod = u[0].lift(1.0);
                for x in u {
                    out.push(prod.clone() * lead(x));
                    prod = prod * tail(x);
                }
                out.push(prod);
            }
            _ => {
                let mut sq = u[0].lift(0.0);
                for x in u {
                    out.push(x.clone());
                    sq = sq + x.clone() * x.clone() * 0.5;
                }
                out.push(sq);
            }
        }
        out
    }

    /// Induced (round, hyperbolic or flat) metric of the unscaled chart.
    pub fn fiber_metric(&self, u: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.m, self.m);
        let mut prod = 1.0;
        for i in 0..self.m {
            g[(i, i)] = prod;
            prod *= match self.epsilon {
                1 => u[i].sin().powi(2),
                -1 => u[i].cosh().powi(2),
                _ => 1.0,
            };
        }
        g
    }

    /// Chart domain with a margin from the polar singularities.
    pub fn chart_domain(&self, margin: f64) -> Vec<(f64, f64)> {
        (0..self.m)
            .map(|i| {
                if self.epsilon == 1 && i + 1 < self.m {
                    (margin, std::f64::consts::PI - margin)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                }
            })
            .collect()
    }
}

impl Immersion for QuadricImmersion {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> Option<Vec<(f64, f64)>> {
        (self.epsilon == 1).then(|| self.chart_domain(1e-6))
    }

    fn eval_taylor(&self, u: &[Taylor]) -> Result<Vec<Taylor>> {
        Ok(self
            .chart(u)
            .into_iter()
            .zip(&self.scales)
            .map(|(x, s)| x * *s)
            .collect())
    }
}

/// Uniform points in a coordinate box from a seeded generator; degenerate
/// intervals yield their left end.
pub fn sample_box(domain: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            domain
                .iter()
                .map(|&(a, b)| if a < b { rng.gen_range(a..b) } else { a })
                .collect()
        })
        .collect()
}

/// Everything needed to build one family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub case: Case,
    pub n: usize,
    /// Quadric sign, Case1 only (must be ±1 there).
    #[serde(default)]
    pub epsilon: i8,
    pub curve: CurveDef,
    pub t_domain: [f64; 2],
    /// Box for `(u₁, …, u_{n−1})`.
    pub u_domain: Vec<[f64; 2]>,
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n < 3 {
            return bad(format!("n = {} (need n >= 3)", self.n));
        }
        if self.u_domain.len() != self.n - 1 {
            return bad(format!("u_domain has {} intervals, need {}", self.u_domain.len(), self.n - 1));
        }
        let [lo, hi] = self.t_domain;
        if !(lo < hi) {
            return bad(format!("empty t_domain [{lo}, {hi}]"));
        }
        if self.u_domain.iter().any(|[a, b]| !(a <= b)) {
            return bad("empty u_domain interval".into());
        }
        match (self.case, self.epsilon) {
            (Case::Case1, 0) => bad("Case1 needs epsilon = +1 or -1 (epsilon = 0 is not a Case1 family)".into()),
            (Case::Case1, e) if e.abs() != 1 => bad(format!("epsilon = {e}")),
            (Case::Case1, 1) => {
                let pi = std::f64::consts::PI;
                let last = self.n - 2;
                for (i, [a, b]) in self.u_domain.iter().enumerate() {
                    if i < last && (*a <= 0.0 || *b >= pi) {
                        return bad(format!("u{} range must stay inside (0, pi) for the sphere chart", i + 1));
                    }
                }
                Ok(())
            }
            (Case::Case1, _) => Ok(()),
            (_, 0) => Ok(()),
            (case, e) => bad(format!("{case} takes no epsilon (got {e})")),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn box_domain(&self) -> Vec<(f64, f64)> {
        let mut d = vec![(self.t_domain[0], self.t_domain[1])];
        d.extend(self.u_domain.iter().map(|[a, b]| (*a, *b)));
        d
    }

    /// Uniform points in the `(t, u)` box from a seeded generator.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_box(&self.box_domain(), count, seed)
    }

    pub fn u_center(&self) -> Vec<f64> {
        self.u_domain.iter().map(|[a, b]| 0.5 * (a + b)).collect()
    }
}

/// Named examples used throughout the tests and the command line tool.
pub const EXAMPLE_FAMILIES: [&str; 9] = [
    "case1_proper_point",
    "case1_improper_sphere",
    "case1_proper_sphere",
    "case2_power",
    "case2_proper_sphere",
    "case3_power",
    "case1_semiprojective",
    "case1_improper_sphere_integrated",
    "case2_proper_sphere_integrated",
];

/// Example family in dimension `n`.
pub fn example_family(name: &str, n: usize) -> Result<FamilySpec> {
    let nf = n as f64;
    let u_box = |lo: f64, hi: f64| vec![[lo, hi]; n - 1];
    let exp_curve = |a: f64, b: f64| CurveDef::builtin(
        "exponential",
        BuiltinParams {
            a: Some(a),
            b: Some(b),
            ..Default::default()
        },
    );
    let sphere_box = || {
        let mut d = vec![[1.0, 2.1]; n - 1];
        d[n - 2] = [-0.5, 0.5];
        d
    };
    let spec = match name {
        "case1_proper_point" => FamilySpec {
            case: Case::Case1,
            n,
            epsilon: -1,
            curve: CurveDef::builtin("calabi_proper_point", BuiltinParams::default()),
            t_domain: [-0.5, 0.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case1_improper_sphere" => FamilySpec {
            case: Case::Case1,
            n,
            epsilon: 1,
            curve: exp_curve(1.0, 2.0),
            t_domain: [-0.5, 0.5],
            u_domain: sphere_box(),
        },
        "case1_proper_sphere" => FamilySpec {
            case: Case::Case1,
            n,
            epsilon: -1,
            curve: exp_curve(1.0, -nf),
            t_domain: [-0.5, 0.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case1_semiprojective" => FamilySpec {
            case: Case::Case1,
            n,
            epsilon: -1,
            curve: CurveDef::builtin("calabi_semiprojective", BuiltinParams::default()),
            t_domain: [-0.5, 0.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case2_power" => FamilySpec {
            case: Case::Case2,
            n,
            epsilon: 0,
            curve: CurveDef::builtin("improper_power_case2", BuiltinParams::default()),
            t_domain: [0.5, 1.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case2_proper_sphere" => FamilySpec {
            case: Case::Case2,
            n,
            epsilon: 0,
            curve: exp_curve(1.0, -1.0),
            t_domain: [-0.5, 0.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case3_power" => FamilySpec {
            case: Case::Case3,
            n,
            epsilon: 0,
            curve: CurveDef::builtin("improper_power_case3", BuiltinParams::default()),
            t_domain: [0.5, 1.5],
            u_domain: u_box(-0.5, 0.5),
        },
        "case1_improper_sphere_integrated" => FamilySpec {
            case: Case::Case1,
            n,
            epsilon: 1,
            curve: CurveDef::Ode(SphereOdeSpec {
                kind: SphereKind::Improper,
                case: Case::Case1,
                c: -0.2,
                n,
                t0: 0.0,
                initial: [1.0, 0.0, 1.0, 1.0],
                t_range: [-0.2, 0.8],
                gauge: None,
                epsilon: 1,
                nodes: 65,
            }),
            t_domain: [-0.2, 0.8],
            u_domain: sphere_box(),
        },
        "case2_proper_sphere_integrated" => FamilySpec {
            case: Case::Case2,
            n,
            epsilon: 0,
            curve: CurveDef::Ode(SphereOdeSpec {
                kind: SphereKind::Proper,
                case: Case::Case2,
                c: 2f64.powi(-(n as i32) - 2),
                n,
                t0: 1.0,
                initial: [1.0, 1.0, 1.0, -1.0],
                t_range: [0.6, 1.4],
                gauge: None,
                epsilon: 0,
                nodes: 65,
            }),
            t_domain: [0.6, 1.4],
            u_domain: u_box(-0.5, 0.5),
        },
        other => return Err(Error::UnknownCurve(other.to_string())),
    };
    Ok(spec)
}

/// Nodes used when checking convexity over the declared `t` range.
pub const CONVEXITY_NODES: usize = 65;

/// A family member as an immersion of `(t, u₁, …, u_{n−1})`.
#[derive(Clone, Debug)]
pub struct FamilyImmersion {
    pub spec: FamilySpec,
    pub curve: Curve,
    pub quadric: Option<QuadricImmersion>,
}

impl FamilyImmersion {
    /// Validates the spec, resolves the curve and checks the convexity
    /// condition on a uniform grid over the `t` range.
    pub fn new(spec: FamilySpec) -> Result<FamilyImmersion> {
        spec.validate()?;
        let curve = spec.curve.resolve(spec.n)?;
        if let Some((lo, hi)) = curve.domain() {
            if spec.t_domain[0] < lo - 1e-12 || spec.t_domain[1] > hi + 1e-12 {
                return Err(Error::InvalidSpec(format!(
                    "t_domain exceeds the integrated curve range [{lo}, {hi}]"
                )));
            }
        }
        let [lo, hi] = spec.t_domain;
        for k in 0..CONVEXITY_NODES {
            let t = lo + (hi - lo) * k as f64 / (CONVEXITY_NODES - 1) as f64;
            let conv = convexity_check(spec.case, &curve.jet(t)?, spec.epsilon)?;
            if !conv.pass {
                return Err(Error::ConvexityViolated { t, value: conv.value });
            }
        }
        let quadric = match spec.case {
            Case::Case1 => Some(QuadricImmersion::new(spec.epsilon, spec.n - 1)?),
            _ => None,
        };
        Ok(FamilyImmersion { spec, curve, quadric })
    }

    pub fn case(&self) -> Case {
        self.spec.case
    }

    /// `φ̃`: the quadric position (Case1) or the vertical axis of the
    /// paraboloid (Cases 2, 3).
    fn phi_tilde(&self, u: &[f64]) -> Vec<f64> {
        let n = self.spec.n;
        match &self.quadric {
            Some(q) => {
                let mut v = q.chart(u);
                v.push(0.0);
                v
            }
            None => {
                let mut v = vec![0.0; n + 1];
                v[n - 1] = 1.0;
                v
            }
        }
    }

    /// `∂_t F` at `(t, u)`.
    pub fn position_dt(&self, point: &[f64]) -> Result<Vec<f64>> {
        let cj = self.curve.jet(point[0])?;
        let u = &point[1..];
        let n = self.spec.n;
        Ok(match self.spec.case {
            Case::Case1 => {
                let mut v: Vec<f64> = self.phi_tilde(u)[..n].iter().map(|p| cj.d1g1 * p).collect();
                v.push(cj.d1g2);
                v
            }
            Case::Case2 => {
                let sq: f64 = u.iter().map(|x| x * x).sum::<f64>() * 0.5;
                let mut v: Vec<f64> = u.iter().map(|x| cj.d1g1 * x).collect();
                v.push(cj.d1g1 * sq + cj.d1g2);
                v.push(cj.d1g1);
                v
            }
            Case::Case3 => {
                let mut v = vec![0.0; n - 1];
                v.push(cj.d1g1);
                v.push(cj.d1g2);
                v
            }
        })
    }

    pub fn normal_coefficients(&self, t: f64) -> Result<NormalCoefficients> {
        normal_coefficients(self.spec.case, &self.curve.jet(t)?, self.spec.epsilon, self.spec.n, None)
    }

    /// Canonical fields of the structure `s` of this family. Where the
    /// intrinsic axis is undefined because the family is a quadric, the axis
    /// of the warped-product decomposition (the h-gradient of `t`) is used.
    pub fn frame_fields(&self, s: &InducedStructure, opts: &FrameOptions) -> Result<FrameFields> {
        match canonical_fields(s, opts) {
            Err(Error::QuadricDetected { .. }) => warped_fields(s, 0),
            other => other,
        }
    }

    /// Closed-form Blaschke normal `μ φ̃ + ν ∂_t F`.
    pub fn analytic_normal(&self, point: &[f64]) -> Result<Vec<f64>> {
        let nc = self.normal_coefficients(point[0])?;
        let phi = self.phi_tilde(&point[1..]);
        let ft = self.position_dt(point)?;
        Ok(phi.iter().zip(&ft).map(|(p, f)| nc.mu * p + nc.nu * f).collect())
    }
}

impl Immersion for FamilyImmersion {
    fn dim(&self) -> usize {
        self.spec.n
    }

    fn domain(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.spec.box_domain())
    }

    fn eval_taylor(&self, x: &[Taylor]) -> Result<Vec<Taylor>> {
        let [g1, g2] = self.curve.taylor(&x[0])?;
        let u = &x[1..];
        let half_sq = || {
            let mut s = x[0].constant_like(0.0);
            for v in u {
                s += v * v * 0.5;
            }
            s
        };
        Ok(match self.spec.case {
            Case::Case1 => {
                let q = self.quadric.as_ref().expect("Case1 carries a quadric");
                let mut out: Vec<Taylor> = q.chart(u).iter().map(|p| p * &g1).collect();
                out.push(g2);
                out
            }
            Case::Case2 => {
                let mut out: Vec<Taylor> = u.iter().map(|v| v * &g1).collect();
                out.push(&g1 * &half_sq() + &g2);
                out.push(g1);
                out
            }
            Case::Case3 => {
                let mut out: Vec<Taylor> = u.to_vec();
                out.push(half_sq() + &g1);
                out.push(g2);
                out
            }
        })
    }
}

/// Canonical fields sampled along `t` at fixed `u`.
#[derive(Clone, Debug)]
pub struct FieldTrack {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    pub fields: Vec<FrameFields>,
    /// Affine metric at each node.
    pub h: Vec<DMatrix<f64>>,
    /// `ds/dt` of the h-arc length along `X₁`.
    pub ds_dt: Vec<f64>,
}

impl FieldTrack {
    pub fn samples(&self) -> FieldSamples {
        let s = cumulative_simpson(&self.t, &self.ds_dt);
        FieldSamples {
            s,
            a: self.fields.iter().map(|f| f.frame.a).collect(),
            b: self.fields.iter().map(|f| f.frame.b).collect(),
            r: self.fields.iter().map(|f| f.frame.r).collect(),
            sigma: self.fields.iter().map(|f| f.frame.sigma).collect(),
        }
    }

    /// Pointwise ODE and transverse-derivative residuals, maximized.
    pub fn ode_residual(&self) -> FieldResidual {
        self.fields
            .iter()
            .map(field_ode_residual)
            .fold(FieldResidual::default(), |acc, r| acc.max(&r))
    }
}

/// Extracts the canonical fields at `nodes` uniform values of `t`.
pub fn fields_along_t(
    fam: &FamilyImmersion,
    u: &[f64],
    nodes: usize,
    affine: &AffineOptions,
    frame: &FrameOptions,
) -> Result<FieldTrack> {
    let [lo, hi] = fam.spec.t_domain;
    let mut track = FieldTrack {
        u: u.to_vec(),
        t: Vec::with_capacity(nodes),
        fields: Vec::with_capacity(nodes),
        h: Vec::with_capacity(nodes),
        ds_dt: Vec::with_capacity(nodes),
    };
    for k in 0..nodes {
        let t = lo + (hi - lo) * k as f64 / (nodes.max(2) - 1) as f64;
        let mut p = vec![t];
        p.extend_from_slice(u);
        let s = structure_at(fam, &p, affine)?;
        let f = fam.frame_fields(&s, frame)?;
        let dt_ds = f.frame.x[(0, 0)];
        if dt_ds.abs() < 1e-12 {
            return Err(Error::FrameUndefined(format!("rotation axis is not along t at {p:?}")));
        }
        track.t.push(t);
        track.ds_dt.push(1.0 / dt_ds);
        track.h.push(s.h_value());
        track.fields.push(f);
    }
    Ok(track)
}

/// Warping function and fiber curvature along `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WarpData {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub sigma: Vec<f64>,
    pub zeta: Vec<f64>,
    pub kappa_n: Vec<f64>,
    /// `X₁(κ_N)` from the Taylor fields.
    pub x1_kappa: Vec<f64>,
    /// −1, 0 or +1.
    pub zeta_sign: i8,
    /// `max κ_N − min κ_N`.
    pub kappa_variation: f64,
    /// Relative defect of `h|fiber = e^{2f} g`.
    pub fiber_metric_defect: f64,
}

/// `|ζ|` at or below this counts as zero.
pub const ZETA_TOL: f64 = 1e-8;

/// `f` with `f(t₀) = ½ log(h_{u₁u₁} / g_{u₁u₁})` and `X₁(f) = σ`, then
/// `ζ = b − r² + σ²` and `κ_N = e^{2f} ζ`. `κ_N` uses `e^{2f} = h_{u₁u₁} / g_{u₁u₁}`
/// at each node; the integrated `f` enters only the fiber metric defect.
pub fn warp_data(fam: &FamilyImmersion, track: &FieldTrack) -> Result<WarpData> {
    let n = fam.spec.n;
    let g = match &fam.quadric {
        Some(q) => q.fiber_metric(&track.u),
        None => DMatrix::identity(n - 1, n - 1),
    };
    let h0 = &track.h[0];
    let f0 = 0.5 * (h0[(1, 1)] / g[(0, 0)]).ln();
    let sigma: Vec<f64> = track.fields.iter().map(|f| f.frame.sigma).collect();
    let integrand: Vec<f64> = sigma.iter().zip(&track.ds_dt).map(|(s, d)| s * d).collect();
    let f: Vec<f64> = cumulative_simpson(&track.t, &integrand).iter().map(|v| f0 + v).collect();

    let mut zeta = Vec::new();
    let mut kappa = Vec::new();
    let mut x1k = Vec::new();
    let mut defect = 0.0f64;
    for (k, ff) in track.fields.iter().enumerate() {
        let fr = &ff.frame;
        let z = fr.b - fr.r * fr.r + fr.sigma * fr.sigma;
        let h = &track.h[k];
        let kap = h[(1, 1)] / g[(0, 0)] * z;
        let e2f = (2.0 * f[k]).exp();
        let d = |x: &Taylor| ff.along(0, x);
        let dz = d(&ff.b) - 2.0 * fr.r * d(&ff.r) + 2.0 * fr.sigma * d(&ff.sigma);
        x1k.push(2.0 * fr.sigma * kap + h[(1, 1)] / g[(0, 0)] * dz);
        zeta.push(z);
        kappa.push(kap);
        let gmax = g.abs().max();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                defect = defect.max((h[(i + 1, j + 1)] - e2f * g[(i, j)]).abs() / (e2f * gmax));
            }
        }
    }
    let zmin = zeta.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = zeta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if zmin < -ZETA_TOL && zmax > ZETA_TOL {
        return Err(Error::ZetaSignChange { min: zmin, max: zmax });
    }
    let zeta_sign = if zmax > ZETA_TOL {
        1
    } else if zmin < -ZETA_TOL {
        -1
    } else {
        0
    };
    let kmin = kappa.iter().copied().fold(f64::INFINITY, f64::min);
    let kmax = kappa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(WarpData {
        t: track.t.clone(),
        f,
        sigma,
        zeta,
        kappa_n: kappa,
        x1_kappa: x1k,
        zeta_sign,
        kappa_variation: kmax - kmin,
        fiber_metric_defect: defect,
    })
}

/// `β = β₀ exp(∫ (σ + r) ds)` on the abscissa `s` (the `X₁` arc length).
pub fn beta_integrate(s: &[f64], sigma: &[f64], r: &[f64], beta0: f64) -> Result<Vec<f64>> {
    if beta0 == 0.0 {
        return Err(Error::InvalidSpec("beta0 must be non-zero".into()));
    }
    let sum: Vec<f64> = sigma.iter().zip(r).map(|(a, b)| a + b).collect();
    Ok(cumulative_simpson(s, &sum)
        .into_iter()
        .map(|v| beta0 * v.exp())
        .collect())
}

/// Numeric affine-sphere test on sampled points: `S` in an h-orthonormal
/// frame compared with `λ I`, `λ = tr S / n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereVerdict {
    /// `None` when `S` is not a constant multiple of the identity.
    pub kind: Option<SphereKind>,
    /// Mean of `λ` over the points.
    pub lambda: f64,
    /// `max λ − min λ`.
    pub lambda_spread: f64,
    /// `max ‖S‖` (largest frame component).
    pub shape_norm_max: f64,
    /// `max ‖S − λ I‖` (largest frame component).
    pub isotropy_defect_max: f64,
    pub points_sampled: usize,
}

pub fn sphere_verdict(imm: &dyn Immersion, points: &[Vec<f64>], affine: &AffineOptions, tol: f64) -> Result<SphereVerdict> {
    if points.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut lambdas = Vec::with_capacity(points.len());
    let mut shape_norm = 0.0f64;
    let mut defect = 0.0f64;
    for p in points {
        let s = structure_at(imm, p, affine)?;
        let e = s.orthonormal_basis()?;
        let e_inv = e.clone().try_inverse().ok_or(Error::SingularSystem { pivot: 0.0 })?;
        let local = &e_inv * s.shape_value() * &e;
        let n = local.nrows();
        let lambda = local.trace() / n as f64;
        shape_norm = shape_norm.max(local.amax());
        defect = defect.max((&local - DMatrix::identity(n, n) * lambda).amax());
        lambdas.push(lambda);
    }
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kind = if shape_norm < tol {
        Some(SphereKind::Improper)
    } else if defect < tol && hi - lo < tol {
        Some(SphereKind::Proper)
    } else {
        None
    };
    Ok(SphereVerdict {
        kind,
        lambda: lambdas.iter().sum::<f64>() / lambdas.len() as f64,
        lambda_spread: hi - lo,
        shape_norm_max: shape_norm,
        isotropy_defect_max: defect,
        points_sampled: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::blaschke_normal;
    use crate::multijet::{eval_jet, JetOptions};

    #[test]
    fn paraboloid_chart() {
        let q = QuadricImmersion::new(0, 2).unwrap();
        let p = q.eval(&[0.3, -0.4]).unwrap();
        assert_eq!(p, vec![0.3, -0.4, 0.125]);
    }

    #[test]
    fn sphere_normal_is_minus_position() {
        let q = QuadricImmersion::new(1, 3).unwrap();
        let u = [0.7, 2.0, 0.3];
        let jet = eval_jet(&q, &u, 3, JetOptions::default()).unwrap();
        let b = blaschke_normal(&jet, &AffineOptions::default()).unwrap();
        for (x, p) in b.xi.iter().zip(&jet.value) {
            assert!((x + p).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperboloid_metric_is_definite() {
        let q = QuadricImmersion::new(-1, 2).unwrap();
        for u in [[0.0, 0.0], [1.3, -0.8], [-2.0, 1.5]] {
            let p = q.eval(&u).unwrap();
            assert!((p[2] * p[2] - p[0] * p[0] - p[1] * p[1] - 1.0).abs() < 1e-10);
            let jet = eval_jet(&q, &u, 3, JetOptions::default()).unwrap();
            let b = blaschke_normal(&jet, &AffineOptions::default()).unwrap();
            assert!(b.h.clone().cholesky().is_some());
            // the centroaffine normal of the hyperboloid is +x
            for (x, p) in b.xi.iter().zip(&p) {
                assert!((x - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn case3_base_slice() {
        // γ₁(t₀) = 0 leaves the paraboloid at height γ₂(t₀)
        use crate::curves::Term;
        let spec = FamilySpec {
            case: Case::Case3,
            n: 3,
            epsilon: 0,
            curve: CurveDef::Analytic {
                g1: vec![Term::power(1.0, 0.0), Term::power(-1.0, 3.0)],
                g2: vec![Term::power(1.0, 4.0)],
            },
            t_domain: [0.5, 1.5],
            u_domain: vec![[-1.0, 1.0]; 2],
        };
        let fam = FamilyImmersion::new(spec).unwrap();
        let p = fam.eval(&[1.0, 0.4, -0.6]).unwrap();
        let expected = [0.4, -0.6, 0.26, 1.0];
        for (x, e) in p.iter().zip(expected) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn case1_needs_nonzero_epsilon() {
        let mut spec = example_family("case1_proper_point", 3).unwrap();
        spec.epsilon = 0;
        assert!(matches!(FamilyImmersion::new(spec.clone()), Err(Error::InvalidSpec(_))));
        spec.epsilon = 1;
        spec.u_domain = vec![[1.0, 2.0], [-0.5, 0.5]];
        assert!(matches!(
            FamilyImmersion::new(spec),
            Err(Error::ConvexityViolated { .. })
        ));
    }

    #[test]
    fn beta_closed_forms() {
        let s: Vec<f64> = (0..65).map(|k| 1.0 + k as f64 / 64.0).collect();
        let zero = vec![0.0; s.len()];
        let beta = beta_integrate(&s, &zero, &zero, 2.5).unwrap();
        assert!(beta.iter().all(|b| *b == 2.5));
        let n = 3.0;
        let r: Vec<f64> = s.iter().map(|t| 1.0 / ((n + 1.0) * t)).collect();
        let beta = beta_integrate(&s, &r, &r, 1.0).unwrap();
        for (t, b) in s.iter().zip(&beta) {
            assert!((b - t.powf(2.0 / (n + 1.0))).abs() < 1e-8);
        }
    }
}
