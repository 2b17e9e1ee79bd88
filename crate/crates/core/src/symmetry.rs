//! Canonical frame of hypersurfaces with a pointwise rotational symmetry
//! about one tangent axis, Ricci data, and the ODE system obeyed by the
//! frame scalars `(a, b, r, σ)`.
//!
//! In the canonical frame `X_1, ..., X_n` the shape operator is
//! `diag(a, b, ..., b)` and the difference tensor satisfies
//! `K(X_1, X_1) = (n-1) r X_1`, `K(X_1, X_i) = -r X_i`,
//! `K(X_i, X_j) = -r δ_ij X_1` for `i, j ≥ 2`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::affine::{dense3, orthonormal_basis, structure_at, AffineOptions, InducedStructure};
use crate::error::{Error, Result};
use crate::multijet::Immersion;
use crate::quadrature::differentiate_samples;
use crate::taylor::Taylor;
use crate::tensor::{self, Matrix, Tensor3, Vector};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Relative eigenvalue gap below which a spectrum counts as isotropic.
    pub iso_tol: f64,
    /// `|K|` below which an isotropic point is reported as a quadric.
    pub quadric_tol: f64,
    pub newton_iters: usize,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions {
            iso_tol: 1e-6,
            quadric_tol: 1e-6,
            newton_iters: 6,
        }
    }
}

/// Which endomorphism supplied the rotation axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisRoute {
    Shape,
    Ricci,
    /// Prescribed by a known warped-product decomposition.
    Warped,
}

/// Point values of the canonical frame. Column `A` of `x` holds the
/// coordinate components of `X_{A+1}`.
#[derive(Clone, Debug)]
pub struct CanonicalFrame {
    pub point: Vec<f64>,
    pub x: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub sigma: f64,
    pub route: AxisRoute,
}

/// Canonical frame together with Taylor expansions of the axis and the
/// scalar fields, so their derivatives along the frame are available.
#[derive(Clone, Debug)]
pub struct FrameFields {
    pub frame: CanonicalFrame,
    pub axis: Vector,
    pub a: Taylor,
    pub b: Taylor,
    pub r: Taylor,
    pub sigma: Taylor,
}

impl FrameFields {
    /// `X_{dir+1}(f)` at the base point.
    pub fn along(&self, dir: usize, f: &Taylor) -> f64 {
        (0..self.axis.len())
            .map(|c| self.frame.x[(c, dir)] * f.derivative(c).value())
            .sum()
    }
}

/// Ricci tensor of the Levi-Civita connection of `h`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RicciData {
    /// Components in the supplied frame (or an h-orthonormal one).
    pub ric: Vec<Vec<f64>>,
    /// Spectrum of the Ricci endomorphism, ascending.
    pub eigenvalues: Vec<f64>,
    pub ev1: Option<f64>,
    pub ev2: Option<f64>,
}

/// Closed-form Ricci eigenvalues on `X_1` and on its orthogonal complement.
pub fn ricci_eigenvalues(n: usize, a: f64, b: f64, r: f64) -> (f64, f64) {
    let nf = n as f64;
    let ev1 = (nf - 1.0) * (nf * r * r + (a + b) / 2.0);
    let ev2 = a / 2.0 + (2.0 * nf - 3.0) * b / 2.0 + 2.0 * r * r;
    (ev1, ev2)
}

/// Ricci tensor `Ric_BC` as Taylor fields (one order below `hat`).
pub fn ricci_field(hat: &Tensor3) -> Matrix {
    let n = hat.len();
    let layout = hat[0][0][0].layout().clone();
    let mut ric = tensor::zeros2(&layout, n, n);
    for b in 0..n {
        for c in b..n {
            let mut v = Taylor::constant(&layout, 0.0);
            for a in 0..n {
                v += hat[b][c][a].derivative(a) - hat[a][c][a].derivative(b);
                for e in 0..n {
                    v += &hat[b][c][e] * &hat[a][e][a] - &hat[a][c][e] * &hat[b][e][a];
                }
            }
            ric[b][c] = v.clone();
            ric[c][b] = v;
        }
    }
    ric
}

pub fn ricci_tensor(s: &InducedStructure, frame: Option<&CanonicalFrame>) -> Result<RicciData> {
    let n = s.dim();
    let ric = tensor::matrix_values(&ricci_field(&s.hat_gamma));
    let basis = match frame {
        Some(f) => f.x.clone(),
        None => s.orthonormal_basis()?,
    };
    let comp = basis.transpose() * &ric * &basis;
    let sym = (&comp + comp.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let (ev1, ev2) = match frame {
        Some(f) => {
            let (e1, e2) = ricci_eigenvalues(n, f.a, f.b, f.r);
            (Some(e1), Some(e2))
        }
        None => (None, None),
    };
    Ok(RicciData {
        ric: (0..n).map(|i| (0..n).map(|j| comp[(i, j)]).collect()).collect(),
        eigenvalues,
        ev1,
        ev2,
    })
}

/// Largest component of `K` in an h-orthonormal frame.
pub fn difference_norm(s: &InducedStructure) -> Result<f64> {
    let basis = s.orthonormal_basis()?;
    let inv_t = basis
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSystem { pivot: 0.0 })?
        .transpose();
    Ok(dense3(&s.difference, None).in_frame(&basis, &inv_t, &[2]).max_abs())
}

struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Spectrum {
    /// Eigenpairs of an h-self-adjoint endomorphism; vectors are h-orthonormal
    /// coordinate columns.
    fn of(h: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Spectrum> {
        let e = orthonormal_basis(h)?;
        let e_inv = e.clone().try_inverse().ok_or(Error::SingularSystem { pivot: 0.0 })?;
        let local = &e_inv * m * &e;
        let sym = (&local + local.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok(Spectrum {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: e * eig.eigenvectors,
        })
    }

    fn scale(&self) -> f64 {
        self.values.iter().fold(1.0f64, |m, x| m.max(x.abs()))
    }

    /// Index of the eigenvalue farthest from all others, with that gap.
    fn most_isolated(&self) -> (usize, f64) {
        let n = self.values.len();
        (0..n)
            .map(|i| {
                let gap = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (self.values[i] - self.values[j]).abs())
                    .fold(f64::INFINITY, f64::min);
                (i, gap)
            })
            .fold((0, -1.0), |best, x| if x.1 > best.1 { x } else { best })
    }

    fn spread(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Refines a simple eigenpair `(v, λ)` of the Taylor endomorphism `m`
/// (with `h(v, v) = 1`) by Newton iteration in the Taylor algebra. Each
/// step doubles the number of correct orders.
fn taylor_eigenvector(m: &Matrix, h: &Matrix, v0: &[f64], l0: f64, iters: usize, tol: f64) -> Result<(Vector, Taylor)> {
    let n = m.len();
    let layout = h[0][0].layout().clone();
    let mut v: Vector = v0.iter().map(|&x| Taylor::constant(&layout, x)).collect();
    let mut lam = Taylor::constant(&layout, l0);
    for _ in 0..iters {
        let hv: Vector = (0..n).map(|i| tensor::dot(&h[i], &v)).collect();
        let mut f: Vector = (0..n).map(|i| tensor::dot(&m[i], &v) - &lam * &v[i]).collect();
        f.push((tensor::dot(&v, &hv) - 1.0) * 0.5);
        let mut jac = tensor::zeros2(&layout, n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[i][j] = m[i][j].clone();
            }
            jac[i][i] -= &lam;
            jac[i][n] = -&v[i];
            jac[n][i] = hv[i].clone();
        }
        let delta = tensor::solve(&jac, &f, tol)?;
        for i in 0..n {
            v[i] -= &delta[i];
        }
        lam -= &delta[n];
    }
    Ok((v, lam))
}

/// h-orthonormal completion of `x1` by Gram–Schmidt on the coordinate
/// vectors in index order.
fn complete_frame(h: &DMatrix<f64>, x1: &[f64]) -> DMatrix<f64> {
    let n = x1.len();
    let ip = |u: &nalgebra::DVector<f64>, v: &nalgebra::DVector<f64>| (u.transpose() * h * v)[(0, 0)];
    let mut cols = vec![nalgebra::DVector::from_column_slice(x1)];
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut w = nalgebra::DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
        let start = ip(&w, &w).sqrt();
        for c in &cols {
            let p = ip(c, &w);
            w -= c * p;
        }
        let len = ip(&w, &w).sqrt();
        if len > 1e-6 * start {
            cols.push(w / len);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Canonical frame and scalar fields of `s`, with Taylor expansions.
pub fn canonical_fields(s: &InducedStructure, opts: &FrameOptions) -> Result<FrameFields> {
    canonical_fields_via(s, opts, None)
}

/// As [`canonical_fields`], optionally forcing the axis route. The warped
/// route takes the h-gradient of the first coordinate.
pub fn canonical_fields_via(s: &InducedStructure, opts: &FrameOptions, route: Option<AxisRoute>) -> Result<FrameFields> {
    if route == Some(AxisRoute::Warped) {
        return warped_fields(s, 0);
    }
    let n = s.dim();
    if n < 3 {
        return Err(Error::FrameUndefined(format!("dimension {n} < 3")));
    }
    let h_val = s.h_value();
    let shape_spec = Spectrum::of(&h_val, &s.shape_value())?;
    let ric = ricci_field(&s.hat_gamma);
    let ric_endo: Matrix = (0..n)
        .map(|c| {
            (0..n)
                .map(|a| {
                    let col: Vector = (0..n).map(|b| ric[b][a].clone()).collect();
                    tensor::dot(&s.h_inv[c], &col)
                })
                .collect()
        })
        .collect();

    let simple = |sp: &Spectrum| {
        let (i, gap) = sp.most_isolated();
        (gap > opts.iso_tol * sp.scale()).then_some(i)
    };
    let chosen = match route {
        Some(AxisRoute::Shape) => Some((AxisRoute::Shape, shape_spec.most_isolated().0, None)),
        Some(AxisRoute::Ricci) | Some(AxisRoute::Warped) => None,
        None => simple(&shape_spec).map(|i| (AxisRoute::Shape, i, None)),
    };
    let (route, idx, ric_spec) = match chosen {
        Some(c) => c,
        None => {
            let sp = Spectrum::of(&h_val, &tensor::matrix_values(&ric_endo))?;
            match (route, simple(&sp)) {
                (Some(AxisRoute::Ricci), _) => (AxisRoute::Ricci, sp.most_isolated().0, Some(sp)),
                (_, Some(i)) => (AxisRoute::Ricci, i, Some(sp)),
                (_, None) => {
                    let k_norm = difference_norm(s)?;
                    if k_norm < opts.quadric_tol && shape_spec.spread() <= opts.iso_tol * shape_spec.scale() {
                        return Err(Error::QuadricDetected { k_norm });
                    }
                    return Err(Error::FrameUndefined(format!(
                        "shape operator and Ricci spectra have no simple eigenvalue (|K| = {k_norm:e})"
                    )));
                }
            }
        }
    };
    let (m, spec) = match route {
        AxisRoute::Shape => (&s.shape, &shape_spec),
        AxisRoute::Ricci | AxisRoute::Warped => (&ric_endo, ric_spec.as_ref().expect("ricci spectrum")),
    };
    let v0: Vec<f64> = spec.vectors.column(idx).iter().copied().collect();
    let (axis, _) = taylor_eigenvector(m, &s.h, &v0, spec.values[idx], opts.newton_iters, 1e-14)?;
    Ok(fields_from_axis(s, axis, route, true))
}

/// Frame fields built on the h-gradient direction of the coordinate
/// `coord`, oriented along increasing `coord`. On a warped product whose
/// base is parametrized by `coord` this is the rotation axis; it stays
/// defined where the intrinsic axis does not (quadrics).
pub fn warped_fields(s: &InducedStructure, coord: usize) -> Result<FrameFields> {
    let n = s.dim();
    if n < 3 || coord >= n {
        return Err(Error::FrameUndefined(format!("no warped axis along coordinate {coord} in dimension {n}")));
    }
    let norm2 = &s.h_inv[coord][coord];
    if norm2.value() <= 0.0 {
        return Err(Error::FrameUndefined(format!("h^{{{coord}{coord}}} = {} is not positive", norm2.value())));
    }
    let inv_len = norm2.sqrt().recip();
    let axis: Vector = (0..n).map(|c| &s.h_inv[c][coord] * &inv_len).collect();
    Ok(fields_from_axis(s, axis, AxisRoute::Warped, false))
}

/// Scalar fields for a given unit axis. With `orient_by_r` the axis is
/// flipped so that `r ≥ 0`.
fn fields_from_axis(s: &InducedStructure, mut axis: Vector, route: AxisRoute, orient_by_r: bool) -> FrameFields {
    let n = s.dim();
    let h_val = s.h_value();
    let h = &s.h;
    let contract_h = |u: &Vector, v: &Vector| -> Taylor {
        let hv: Vector = (0..n).map(|i| tensor::dot(&h[i], v)).collect();
        tensor::dot(u, &hv)
    };
    let k_of = |x: &Vector| -> Vector {
        (0..n)
            .map(|d| {
                let mut acc = x[0].constant_like(0.0);
                for a in 0..n {
                    for b in 0..n {
                        acc += &x[a] * &x[b] * &s.difference[a][b][d];
                    }
                }
                acc
            })
            .collect()
    };
    let nm1 = (n - 1) as f64;
    let mut r = contract_h(&k_of(&axis), &axis) * (1.0 / nm1);
    if orient_by_r && r.value() < 0.0 {
        axis = axis.iter().map(|x| -x).collect();
        r = -r;
    }
    let s_axis: Vector = (0..n).map(|c| tensor::dot(&s.shape[c], &axis)).collect();
    let a = contract_h(&s_axis, &axis);
    let mut trace = a.constant_like(0.0);
    for c in 0..n {
        trace += &s.shape[c][c];
    }
    let b = (trace - &a) * (1.0 / nm1);
    let mut div = a.constant_like(0.0);
    for c in 0..n {
        div += axis[c].derivative(c);
        for e in 0..n {
            div += &s.hat_gamma[c][e][c] * &axis[e];
        }
    }
    let sigma = div * (1.0 / nm1);

    let x1 = tensor::values(&axis);
    let frame = CanonicalFrame {
        point: s.point.clone(),
        x: complete_frame(&h_val, &x1),
        a: a.value(),
        b: b.value(),
        r: r.value(),
        sigma: sigma.value(),
        route,
    };
    FrameFields {
        frame,
        axis,
        a,
        b,
        r,
        sigma,
    }
}

pub fn canonical_frame(s: &InducedStructure, opts: &FrameOptions) -> Result<CanonicalFrame> {
    Ok(canonical_fields(s, opts)?.frame)
}

/// Structure and canonical fields at one parameter point.
pub fn canonical_fields_at(imm: &dyn Immersion, u: &[f64], affine: &AffineOptions, opts: &FrameOptions) -> Result<FrameFields> {
    canonical_fields(&structure_at(imm, u, affine)?, opts)
}

/// Frame components: `s[a][b]` is the `X_a` component of `S X_b`, and
/// `k[a][b][c]` the `X_c` component of `K(X_a, X_b)`.
pub fn frame_components(s: &InducedStructure, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<Vec<Vec<f64>>>)> {
    let n = s.dim();
    let x_inv = x.clone().try_inverse().ok_or(Error::SingularSystem { pivot: 0.0 })?;
    let shape = &x_inv * s.shape_value() * x;
    let kv = s.difference_value();
    let mut k = vec![vec![vec![0.0; n]; n]; n];
    for p in 0..n {
        for q in 0..n {
            let coord: Vec<f64> = (0..n)
                .map(|d| {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            acc += x[(a, p)] * x[(b, q)] * kv[a][b][d];
                        }
                    }
                    acc
                })
                .collect();
            for c in 0..n {
                k[p][q][c] = (0..n).map(|d| x_inv[(c, d)] * coord[d]).sum();
            }
        }
    }
    Ok((shape, k))
}

/// Scalars `(a, b, r)` read from frame components with `X_1` first.
pub fn frame_scalars(shape: &DMatrix<f64>, k: &[Vec<Vec<f64>>]) -> (f64, f64, f64) {
    let n = shape.nrows();
    let a = shape[(0, 0)];
    let b = (shape.trace() - a) / (n - 1) as f64;
    let r = k[0][0][0] / (n - 1) as f64;
    (a, b, r)
}

/// Largest deviation of frame components from the canonical pattern.
pub fn canonical_pattern_defect(shape: &DMatrix<f64>, k: &[Vec<Vec<f64>>], a: f64, b: f64, r: f64) -> f64 {
    let n = shape.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = match (i, j) {
                (0, 0) => a,
                _ if i == j => b,
                _ => 0.0,
            };
            worst = worst.max((shape[(i, j)] - expected).abs());
            for c in 0..n {
                let expected = match (i, j, c) {
                    (0, 0, 0) => (n - 1) as f64 * r,
                    (0, q, c) if q > 0 && c == q => -r,
                    (p, 0, c) if p > 0 && c == p => -r,
                    (p, q, 0) if p > 0 && p == q => -r,
                    _ => 0.0,
                };
                worst = worst.max((k[i][j][c] - expected).abs());
            }
        }
    }
    worst
}

pub fn canonical_form_residual(s: &InducedStructure, f: &CanonicalFrame) -> Result<f64> {
    let (shape, k) = frame_components(s, &f.x)?;
    Ok(canonical_pattern_defect(&shape, &k, f.a, f.b, f.r))
}

/// Right-hand sides of `X_1(b)`, `X_1(r)`, `X_1(σ)`.
pub fn field_ode_rhs(n: usize, a: f64, b: f64, r: f64, sigma: f64) -> [f64; 3] {
    let nf = n as f64;
    [
        (a - b) * (sigma - r),
        -((a - b) / 2.0 + (nf + 1.0) * sigma * r),
        -((a + b) / 2.0 + nf * r * r + sigma * sigma),
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldResidual {
    pub b: f64,
    pub r: f64,
    pub sigma: f64,
    /// Largest derivative of `a`, `b`, `r`, `σ` along `X_2, ..., X_n`.
    pub transverse: f64,
}

impl FieldResidual {
    pub fn ode_max(&self) -> f64 {
        self.b.max(self.r).max(self.sigma)
    }

    pub fn max(&self, other: &FieldResidual) -> FieldResidual {
        FieldResidual {
            b: self.b.max(other.b),
            r: self.r.max(other.r),
            sigma: self.sigma.max(other.sigma),
            transverse: self.transverse.max(other.transverse),
        }
    }
}

/// ODE residuals at one point, with derivatives from the Taylor fields.
pub fn field_ode_residual(f: &FrameFields) -> FieldResidual {
    let n = f.axis.len();
    let fr = &f.frame;
    let rhs = field_ode_rhs(n, fr.a, fr.b, fr.r, fr.sigma);
    let transverse = (1..n)
        .flat_map(|i| [&f.a, &f.b, &f.r, &f.sigma].map(|g| f.along(i, g).abs()))
        .fold(0.0, f64::max);
    FieldResidual {
        b: (f.along(0, &f.b) - rhs[0]).abs(),
        r: (f.along(0, &f.r) - rhs[1]).abs(),
        sigma: (f.along(0, &f.sigma) - rhs[2]).abs(),
        transverse,
    }
}

/// Frame scalars sampled along an integral curve of `X_1`, parametrized by
/// its h-arc length `s`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FieldSamples {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: Vec<f64>,
    pub sigma: Vec<f64>,
}

const STENCIL: usize = 7;

/// ODE residual of sampled fields, with `X_1`-derivatives from a 7-point
/// finite-difference stencil.
pub fn structure_ode_residual(samples: &FieldSamples, n: usize) -> Result<FieldResidual> {
    let m = samples.s.len();
    if m < STENCIL {
        return Err(Error::InsufficientSamples { needed: STENCIL, got: m });
    }
    let db = differentiate_samples(&samples.s, &samples.b, STENCIL);
    let dr = differentiate_samples(&samples.s, &samples.r, STENCIL);
    let ds = differentiate_samples(&samples.s, &samples.sigma, STENCIL);
    let mut out = FieldResidual::default();
    for i in 0..m {
        let rhs = field_ode_rhs(n, samples.a[i], samples.b[i], samples.r[i], samples.sigma[i]);
        out.b = out.b.max((db[i] - rhs[0]).abs());
        out.r = out.r.max((dr[i] - rhs[1]).abs());
        out.sigma = out.sigma.max((ds[i] - rhs[2]).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn son_tensors(n: usize, a: f64, b: f64, r: f64) -> (DMatrix<f64>, Vec<Vec<Vec<f64>>>) {
        let shape = DMatrix::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) => a,
            _ if i == j => b,
            _ => 0.0,
        });
        let mut k = vec![vec![vec![0.0; n]; n]; n];
        k[0][0][0] = (n - 1) as f64 * r;
        for i in 1..n {
            k[0][i][i] = -r;
            k[i][0][i] = -r;
            k[i][i][0] = -r;
        }
        (shape, k)
    }

    fn synthetic_structure(n: usize, a: f64, b: f64, r: f64, q: &DMatrix<f64>) -> InducedStructure {
        let layout = crate::taylor::Layout::get(n, 2);
        let c = |v: f64| Taylor::constant(&layout, v);
        let (shape_f, k_f) = son_tensors(n, a, b, r);
        let shape = q * shape_f * q.transpose();
        let mut diff = tensor::zeros3(&layout, n);
        for (aa, row) in diff.iter_mut().enumerate() {
            for (bb, col) in row.iter_mut().enumerate() {
                for (dd, slot) in col.iter_mut().enumerate() {
                    let mut v = 0.0;
                    for p in 0..n {
                        for qq in 0..n {
                            for cc in 0..n {
                                v += q[(aa, p)] * q[(bb, qq)] * q[(dd, cc)] * k_f[p][qq][cc];
                            }
                        }
                    }
                    *slot = c(v);
                }
            }
        }
        let eye: Matrix = (0..n).map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        InducedStructure {
            point: vec![0.0; n],
            position: tensor::zeros(&layout, n + 1),
            tangent: vec![tensor::zeros(&layout, n + 1); n],
            xi: tensor::zeros(&layout, n + 1),
            h: eye.clone(),
            h_inv: eye,
            shape: (0..n).map(|i| (0..n).map(|j| c(shape[(i, j)])).collect()).collect(),
            gamma: diff.clone(),
            hat_gamma: tensor::zeros3(&layout, n),
            difference: diff,
            tau: tensor::zeros(&layout, n),
        }
    }

    fn rotation(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m.qr().q()
    }

    #[test]
    fn synthetic_frame_recovers_scalars() {
        let q = rotation(4, 7);
        let s = synthetic_structure(4, 1.0, 2.0, 0.5, &q);
        let f = canonical_frame(&s, &FrameOptions::default()).unwrap();
        assert_eq!(f.route, AxisRoute::Shape);
        assert!((f.a - 1.0).abs() < 1e-12 && (f.b - 2.0).abs() < 1e-12 && (f.r - 0.5).abs() < 1e-12);
        assert!(canonical_form_residual(&s, &f).unwrap() < 1e-12);
        let gram = f.x.transpose() * &f.x;
        assert!((gram - DMatrix::identity(4, 4)).abs().max() < 1e-12);
    }

    #[test]
    fn sign_flip_makes_r_positive() {
        let q = rotation(3, 5);
        let s = synthetic_structure(3, 0.2, -1.0, -0.4, &q);
        let f = canonical_frame(&s, &FrameOptions::default()).unwrap();
        assert!((f.r - 0.4).abs() < 1e-12);
    }

    #[test]
    fn isotropic_without_cubic_form_is_a_quadric() {
        let q = rotation(3, 3);
        let s = synthetic_structure(3, 1.0, 1.0, 0.0, &q);
        assert!(matches!(
            canonical_frame(&s, &FrameOptions::default()),
            Err(Error::QuadricDetected { .. })
        ));
    }

    #[test]
    fn closed_form_ricci_eigenvalues() {
        let (e1, e2) = ricci_eigenvalues(3, 1.0, 2.0, 1.0);
        assert!((e1 - 9.0).abs() < 1e-14 && (e2 - 5.5).abs() < 1e-14);
        // coincidence when (a-b)/2 = -(n+1) r^2
        let (e1, e2) = ricci_eigenvalues(3, 0.0, 8.0, 1.0);
        assert!((e1 - e2).abs() < 1e-14);
    }

    #[test]
    fn pattern_roundtrip_and_k2_block() {
        let (shape, mut k) = son_tensors(4, 1.0, 2.0, 0.5);
        let (a, b, r) = frame_scalars(&shape, &k);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);
        assert_eq!(canonical_pattern_defect(&shape, &k, a, b, r), 0.0);
        // traceless symmetric cubic block on the orthogonal complement
        let eps = 0.03;
        k[1][1][1] += eps;
        k[1][2][2] -= eps;
        k[2][1][2] -= eps;
        k[2][2][1] -= eps;
        let defect = canonical_pattern_defect(&shape, &k, a, b, r);
        assert!((defect - eps).abs() < 1e-15);
    }

    #[test]
    fn sampled_sphere_fields_satisfy_ode() {
        // a = b constant, (r, σ) from the last two equations
        let n = 3;
        let a = -0.5;
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.005).collect();
        let sol = crate::ode::integrate(
            |_, y| {
                let rhs = field_ode_rhs(n, a, a, y[0], y[1]);
                Ok(vec![rhs[1], rhs[2]])
            },
            &[0.4, 0.1],
            &grid,
            &crate::ode::OdeOptions {
                rtol: 1e-13,
                atol: 1e-13,
                ..Default::default()
            },
            |_, _| Ok(()),
        )
        .unwrap();
        let samples = FieldSamples {
            s: sol.t.clone(),
            a: vec![a; sol.t.len()],
            b: vec![a; sol.t.len()],
            r: sol.y.iter().map(|y| y[0]).collect(),
            sigma: sol.y.iter().map(|y| y[1]).collect(),
        };
        let res = structure_ode_residual(&samples, n).unwrap();
        assert!(res.ode_max() < 1e-8, "{res:?}");
    }

    #[test]
    fn constant_fields_residual() {
        let m = 10;
        let samples = FieldSamples {
            s: (0..m).map(|k| k as f64).collect(),
            a: vec![0.0; m],
            b: vec![0.0; m],
            r: vec![1.0; m],
            sigma: vec![0.0; m],
        };
        let res = structure_ode_residual(&samples, 3).unwrap();
        assert!((res.sigma - 3.0).abs() < 1e-12);
        let short = FieldSamples {
            s: vec![0.0; 3],
            ..samples
        };
        assert!(matches!(
            structure_ode_residual(&short, 3),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
