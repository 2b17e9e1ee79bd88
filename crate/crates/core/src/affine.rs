//! Blaschke normal, induced structure and structure-equation residuals.
//!
//! Everything is computed in the coordinate frame `∂_1, ..., ∂_n` of the
//! parametrization, on Taylor fields, so a single expansion of the immersion
//! around a point provides the structure tensors together with the
//! derivatives needed by the Gauss, Codazzi and Ricci equations.
//!
//! Index conventions (all zero based):
//! - `h[A][B]` affine metric,
//! - `shape[C][A]` = `S^C_A` (so `S ∂_A = Σ_C shape[C][A] ∂_C`),
//! - `gamma[A][B][C]`, `hat_gamma[A][B][C]`, `difference[A][B][C]` carry the
//!   upper index last: `∇_{∂_A} ∂_B = Σ_C gamma[A][B][C] ∂_C`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multijet::{check_rank, jet_from_taylor, taylor_expand, Immersion, Jet};
use crate::taylor::Taylor;
use crate::tensor::{self, Matrix, Tensor3, Vector};

/// Tolerances and truncation order of the structure pipeline.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AffineOptions {
    /// Gate for structure-equation residuals.
    pub residual_tol: f64,
    /// Gate for identities that hold exactly (τ = 0, volume condition).
    pub exact_tol: f64,
    /// Relative pivot threshold for the Taylor linear solves.
    pub solve_tol: f64,
    /// Relative smallest singular value of the Jacobian.
    pub rank_tol: f64,
    /// Truncation order of the Taylor expansion of the immersion. Residuals
    /// need 5; canonical-frame field derivatives need 7.
    pub order: usize,
}

impl Default for AffineOptions {
    fn default() -> Self {
        AffineOptions {
            residual_tol: 1e-6,
            exact_tol: 1e-8,
            solve_tol: 1e-12,
            rank_tol: 1e-8,
            order: 7,
        }
    }
}

/// Blaschke normal field with its metric, as Taylor fields.
#[derive(Clone, Debug)]
pub struct BlaschkeField {
    pub xi: Vector,
    pub h: Matrix,
    /// Induced volume `det[∂_1 F, ..., ∂_n F, ξ]`.
    pub omega: Taylor,
}

/// Point values of the Blaschke normal.
#[derive(Clone, Debug)]
pub struct BlaschkeNormal {
    pub xi: Vec<f64>,
    pub h: DMatrix<f64>,
}

fn first_derivs(poly: &[Taylor], n: usize) -> Vec<Vector> {
    (0..n)
        .map(|a| poly.iter().map(|p| p.derivative(a)).collect())
        .collect()
}

fn second_derivs(d1: &[Vector], n: usize) -> Vec<Vec<Vector>> {
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| d1[a].iter().map(|p| p.derivative(b)).collect())
                .collect()
        })
        .collect()
}

/// Levi-Civita symbols `hat_gamma[A][B][C] = Γ̂^C_{AB}` of a metric field.
pub fn levi_civita(h: &Matrix, h_inv: &Matrix) -> Tensor3 {
    let n = h.len();
    let layout = h[0][0].layout().clone();
    let dh: Vec<Matrix> = (0..n)
        .map(|c| {
            (0..n)
                .map(|a| (0..n).map(|b| h[a][b].derivative(c)).collect())
                .collect()
        })
        .collect();
    let mut out = tensor::zeros3(&layout, n);
    for a in 0..n {
        for b in a..n {
            // first kind: [AB, D] = ½(∂_A h_BD + ∂_B h_AD − ∂_D h_AB)
            let first: Vector = (0..n)
                .map(|d| (&dh[a][b][d] + &dh[b][a][d] - &dh[d][a][b]) * 0.5)
                .collect();
            for c in 0..n {
                let v = tensor::dot(&h_inv[c], &first);
                out[a][b][c] = v.clone();
                out[b][a][c] = v;
            }
        }
    }
    out
}

fn check_definite(point: &[f64], g: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let max_abs = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let all_pos = eig.iter().all(|&x| x > tol * max_abs);
    let all_neg = eig.iter().all(|&x| x < -tol * max_abs);
    match (all_pos, all_neg) {
        (true, _) => Ok(1.0),
        (_, true) => Ok(-1.0),
        _ => Err(Error::NotConvex {
            point: point.to_vec(),
            eigenvalues: eig.iter().copied().collect(),
        }),
    }
}

/// Blaschke normal `ξ = Δ_h F / n` and affine metric of a Taylor-expanded
/// immersion. The returned fields are valid to `order - 3`.
pub fn blaschke_field(poly: &[Taylor], opts: &AffineOptions) -> Result<BlaschkeField> {
    let n = poly[0].nvars();
    assert_eq!(poly.len(), n + 1);
    let point: Vec<f64> = Vec::new();
    let d1 = first_derivs(poly, n);
    let d2 = second_derivs(&d1, n);

    // G_AB = det[∂_1 F, ..., ∂_n F, ∂_A ∂_B F] = ω h_AB for every transversal
    let normal = tensor::cofactor_normal(&d1);
    let g: Matrix = (0..n)
        .map(|a| (0..n).map(|b| tensor::dot(&normal, &d2[a][b])).collect())
        .collect();
    let sign = check_definite(&point, &tensor::matrix_values(&g), opts.rank_tol)?;

    // |det G| = |ω|^{n+2} once ω² = det h
    let det_g = tensor::det(&g);
    let omega = det_g.abs().powf(1.0 / (n as f64 + 2.0)) * sign;
    let inv_omega = omega.recip();
    let h: Matrix = g
        .iter()
        .map(|row| row.iter().map(|x| x * &inv_omega).collect())
        .collect();
    let h_inv = tensor::inverse(&h, opts.solve_tol)?;
    let hat = levi_civita(&h, &h_inv);

    let mut xi: Vector = tensor::zeros(poly[0].layout(), n + 1);
    for a in 0..n {
        for b in 0..n {
            for k in 0..=n {
                let mut hess = d2[a][b][k].clone();
                for c in 0..n {
                    hess -= &hat[a][b][c] * &d1[c][k];
                }
                xi[k] += &h_inv[a][b] * &hess;
            }
        }
    }
    for x in &mut xi {
        *x *= 1.0 / n as f64;
    }

    let mut cols = d1.clone();
    cols.push(xi.clone());
    let vol = tensor::det_columns(&cols);
    let det_h = tensor::det(&h).value();
    let defect = (vol.value().powi(2) - det_h.abs()).abs() / det_h.abs().max(1.0);
    if defect > opts.exact_tol {
        return Err(Error::BlaschkeCondition {
            condition: "omega^2 = |det h|",
            defect,
            point,
        });
    }
    Ok(BlaschkeField { xi, h, omega: vol })
}

/// Blaschke normal and metric at the base point of an order-3 jet.
pub fn blaschke_normal(jet: &Jet, opts: &AffineOptions) -> Result<BlaschkeNormal> {
    assert!(jet.order >= 3, "the Blaschke normal needs third derivatives");
    check_rank(&jet.point, jet.jacobian(), opts.rank_tol)?;
    let field = blaschke_field(&jet.to_taylor(), opts).map_err(|e| with_point(e, &jet.point))?;
    Ok(BlaschkeNormal {
        xi: tensor::values(&field.xi),
        h: tensor::matrix_values(&field.h),
    })
}

fn with_point(e: Error, u: &[f64]) -> Error {
    match e {
        Error::NotConvex { eigenvalues, .. } => Error::NotConvex {
            point: u.to_vec(),
            eigenvalues,
        },
        Error::BlaschkeCondition {
            condition, defect, ..
        } => Error::BlaschkeCondition {
            condition,
            defect,
            point: u.to_vec(),
        },
        other => other,
    }
}

/// Induced structure `(h, S, ∇, K, τ)` of an immersion with respect to a
/// transversal field, all as Taylor fields around one base point.
#[derive(Clone, Debug)]
pub struct InducedStructure {
    pub point: Vec<f64>,
    pub position: Vector,
    /// `tangent[A]` = ∂_A F.
    pub tangent: Vec<Vector>,
    pub xi: Vector,
    pub h: Matrix,
    pub h_inv: Matrix,
    pub shape: Matrix,
    pub gamma: Tensor3,
    pub hat_gamma: Tensor3,
    pub difference: Tensor3,
    pub tau: Vector,
}

impl InducedStructure {
    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn h_value(&self) -> DMatrix<f64> {
        tensor::matrix_values(&self.h)
    }

    pub fn shape_value(&self) -> DMatrix<f64> {
        tensor::matrix_values(&self.shape)
    }

    pub fn xi_value(&self) -> Vec<f64> {
        tensor::values(&self.xi)
    }

    pub fn tau_value(&self) -> Vec<f64> {
        tensor::values(&self.tau)
    }

    /// Point values of `K^C_{AB}` as `[A][B][C]`.
    pub fn difference_value(&self) -> Vec<Vec<Vec<f64>>> {
        values3(&self.difference)
    }

    /// An h-orthonormal basis (columns, coordinate components) from the
    /// Cholesky factor of `h`.
    pub fn orthonormal_basis(&self) -> Result<DMatrix<f64>> {
        orthonormal_basis(&self.h_value())
    }

    /// Adds `delta (1 + x⁰ − x⁰(p)) E` to both `K` and `∇`, where `E` has the
    /// single component `E^1_{11} = 1` (`E^0_{00}` in dimension 1). Used as
    /// a negative control for the structure-equation residuals.
    pub fn perturb_difference(&mut self, delta: f64) {
        let layout = self.h[0][0].layout().clone();
        let i = usize::from(self.dim() > 1);
        let offset = Taylor::var(&layout, 0, 1.0);
        let bump = offset * delta;
        self.difference[i][i][i] += &bump;
        self.gamma[i][i][i] += &bump;
    }
}

pub(crate) fn values3(t: &Tensor3) -> Vec<Vec<Vec<f64>>> {
    t.iter()
        .map(|m| m.iter().map(|v| tensor::values(v)).collect())
        .collect()
}

pub fn orthonormal_basis(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = h.clone().cholesky().ok_or_else(|| Error::NotConvex {
        point: Vec::new(),
        eigenvalues: SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect(),
    })?;
    // h = L Lᵀ, so E = L⁻ᵀ satisfies Eᵀ h E = I
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or(Error::SingularSystem { pivot: 0.0 })?;
    Ok(l_inv.transpose())
}

/// Decomposes `∂_A ∂_B F` and `∂_A ξ` in the basis `{∂_1 F, ..., ∂_n F, ξ}`.
///
/// `poly` is the Taylor expansion of the immersion and `xi` any transversal
/// field expanded around the same point.
pub fn induced_structure(poly: &[Taylor], xi: &[Taylor], opts: &AffineOptions) -> Result<InducedStructure> {
    let n = poly[0].nvars();
    let layout = poly[0].layout().clone();
    let d1 = first_derivs(poly, n);
    let d2 = second_derivs(&d1, n);

    let basis: Matrix = (0..=n)
        .map(|k| {
            let mut row: Vector = d1.iter().map(|col| col[k].clone()).collect();
            row.push(xi[k].clone());
            row
        })
        .collect();
    let mut rhs = Vec::new();
    for a in 0..n {
        for b in a..n {
            rhs.push(d2[a][b].clone());
        }
    }
    for a in 0..n {
        rhs.push(xi.iter().map(|x| x.derivative(a)).collect());
    }
    let sol = tensor::solve_many(&basis, &rhs, opts.solve_tol)?;

    let mut gamma = tensor::zeros3(&layout, n);
    let mut h = tensor::zeros2(&layout, n, n);
    let mut idx = 0;
    for a in 0..n {
        for b in a..n {
            for c in 0..n {
                gamma[a][b][c] = sol[idx][c].clone();
                gamma[b][a][c] = sol[idx][c].clone();
            }
            h[a][b] = sol[idx][n].clone();
            h[b][a] = sol[idx][n].clone();
            idx += 1;
        }
    }
    let mut shape = tensor::zeros2(&layout, n, n);
    let mut tau = tensor::zeros(&layout, n);
    for a in 0..n {
        for c in 0..n {
            shape[c][a] = -&sol[idx][c];
        }
        tau[a] = sol[idx][n].clone();
        idx += 1;
    }

    let h_inv = tensor::inverse(&h, opts.solve_tol)?;
    let hat_gamma = levi_civita(&h, &h_inv);
    let difference: Tensor3 = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (0..n).map(|c| &gamma[a][b][c] - &hat_gamma[a][b][c]).collect())
                .collect()
        })
        .collect();

    Ok(InducedStructure {
        point: Vec::new(),
        position: poly.to_vec(),
        tangent: d1,
        xi: xi.to_vec(),
        h,
        h_inv,
        shape,
        gamma,
        hat_gamma,
        difference,
        tau,
    })
}

/// Expands `imm` at `u`, computes the Blaschke normal and the induced
/// structure, and asserts the Blaschke conditions.
pub fn structure_at(imm: &dyn Immersion, u: &[f64], opts: &AffineOptions) -> Result<InducedStructure> {
    let poly = taylor_expand(imm, u, opts.order)?;
    let jet = jet_from_taylor(u, &poly, 1);
    check_rank(u, jet.jacobian(), opts.rank_tol)?;
    let field = blaschke_field(&poly, opts).map_err(|e| with_point(e, u))?;
    let mut s = induced_structure(&poly, &field.xi, opts)?;
    s.point = u.to_vec();
    let basis = s.orthonormal_basis().map_err(|e| with_point(e, u))?;
    let tau = s.tau_value();
    let tau_max = (0..s.dim())
        .map(|a| (0..s.dim()).map(|b| tau[b] * basis[(b, a)]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if tau_max > opts.exact_tol {
        return Err(Error::BlaschkeCondition {
            condition: "tau = 0",
            defect: tau_max,
            point: u.to_vec(),
        });
    }
    Ok(s)
}

/// Residuals at one point, measured in an h-orthonormal frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointResiduals {
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
    pub apolarity: f64,
    pub nabla_h_sym: f64,
    pub tau: f64,
    /// `|h(SX, Y) − h(X, SY)|` and `|h(K(X,Y),Z) − h(K(X,Z),Y)|`.
    pub tensor_symmetry: f64,
}

/// Max-reduction of [`PointResiduals`] over sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub gauss_max: f64,
    pub codazzi_max: f64,
    pub ricci_max: f64,
    pub apolarity_max: f64,
    pub nabla_h_sym_max: f64,
    pub tau_max: f64,
    pub tensor_symmetry_max: f64,
    pub points_sampled: usize,
    pub tol_used: f64,
}

impl ResidualReport {
    pub fn from_points(points: &[PointResiduals], tol: f64) -> ResidualReport {
        let max = |f: fn(&PointResiduals) -> f64| points.iter().map(f).fold(0.0, f64::max);
        ResidualReport {
            gauss_max: max(|p| p.gauss),
            codazzi_max: max(|p| p.codazzi),
            ricci_max: max(|p| p.ricci),
            apolarity_max: max(|p| p.apolarity),
            nabla_h_sym_max: max(|p| p.nabla_h_sym),
            tau_max: max(|p| p.tau),
            tensor_symmetry_max: max(|p| p.tensor_symmetry),
            points_sampled: points.len(),
            tol_used: tol,
        }
    }

    pub fn worst(&self) -> f64 {
        [
            self.gauss_max,
            self.codazzi_max,
            self.ricci_max,
            self.apolarity_max,
            self.nabla_h_sym_max,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.worst() < self.tol_used && self.worst().is_finite()
    }
}

/// Dense f64 tensor with `n` values per index, row-major.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    n: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Dense {
    pub(crate) fn zeros(n: usize, rank: usize) -> Dense {
        Dense {
            n,
            rank,
            data: vec![0.0; n.pow(rank as u32)],
        }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub(crate) fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub(crate) fn add(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] += v;
    }

    /// Replaces index `pos` by contraction with `m`: `out[.., j, ..] = Σ_i m[(i, j)] in[.., i, ..]`.
    pub(crate) fn transform(&self, pos: usize, m: &DMatrix<f64>) -> Dense {
        let n = self.n;
        let stride = n.pow((self.rank - pos - 1) as u32);
        let mut out = Dense::zeros(n, self.rank);
        for flat in 0..self.data.len() {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let v = self.data[flat];
            if v == 0.0 {
                continue;
            }
            for j in 0..n {
                out.data[base + j * stride] += m[(i, j)] * v;
            }
        }
        out
    }

    /// Components in the frame `basis` (columns). `upper` lists the
    /// contravariant index positions.
    pub(crate) fn in_frame(&self, basis: &DMatrix<f64>, basis_inv_t: &DMatrix<f64>, upper: &[usize]) -> Dense {
        let mut t = self.clone();
        for pos in 0..self.rank {
            let m = if upper.contains(&pos) { basis_inv_t } else { basis };
            t = t.transform(pos, m);
        }
        t
    }

    pub(crate) fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub(crate) fn dense2(m: &Matrix, deriv: Option<usize>) -> Dense {
    let n = m.len();
    let mut d = Dense::zeros(n, 2);
    for a in 0..n {
        for b in 0..n {
            let v = match deriv {
                Some(e) => m[a][b].derivative(e).value(),
                None => m[a][b].value(),
            };
            d.add(&[a, b], v);
        }
    }
    d
}

pub(crate) fn dense3(t: &Tensor3, deriv: Option<usize>) -> Dense {
    let n = t.len();
    let mut d = Dense::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v = match deriv {
                    Some(e) => t[a][b][c].derivative(e).value(),
                    None => t[a][b][c].value(),
                };
                d.add(&[a, b, c], v);
            }
        }
    }
    d
}

/// Coordinate-frame curvature `R̂(∂_A, ∂_B)∂_C = Σ_D r[A,B,C,D] ∂_D` of the
/// Levi-Civita connection.
pub(crate) fn curvature(hat: &Tensor3) -> Dense {
    let n = hat.len();
    let g = dense3(hat, None);
    let dg: Vec<Dense> = (0..n).map(|e| dense3(hat, Some(e))).collect();
    let mut r = Dense::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dg[a].get(&[b, c, d]) - dg[b].get(&[a, c, d]);
                    for e in 0..n {
                        v += g.get(&[b, c, e]) * g.get(&[a, e, d]) - g.get(&[a, c, e]) * g.get(&[b, e, d]);
                    }
                    r.add(&[a, b, c, d], v);
                }
            }
        }
    }
    r
}

/// Right-hand side of the Gauss equation, `[A,B,C,D]` layout as [`curvature`].
pub(crate) fn gauss_rhs(h: &Dense, s: &Dense, k: &Dense) -> Dense {
    let n = h.n;
    let hs = |c: usize, b: usize| (0..n).map(|e| h.get(&[e, c]) * s.get(&[e, b])).sum::<f64>();
    let mut out = Dense::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = h.get(&[b, c]) * s.get(&[d, a]) - h.get(&[a, c]) * s.get(&[d, b]);
                    if d == a {
                        v += hs(c, b);
                    }
                    if d == b {
                        v -= hs(c, a);
                    }
                    v *= 0.5;
                    for e in 0..n {
                        v -= k.get(&[a, e, d]) * k.get(&[b, c, e]) - k.get(&[b, e, d]) * k.get(&[a, c, e]);
                    }
                    out.add(&[a, b, c, d], v);
                }
            }
        }
    }
    out
}

/// Evaluates Gauss, Codazzi, Ricci, apolarity and the symmetry of `∇h` at
/// the base point of `s`.
pub fn point_residuals(s: &InducedStructure) -> Result<PointResiduals> {
    let n = s.dim();
    let h = dense2(&s.h, None);
    let sh = dense2(&s.shape, None);
    let dsh: Vec<Dense> = (0..n).map(|e| dense2(&s.shape, Some(e))).collect();
    let hat = dense3(&s.hat_gamma, None);
    let k = dense3(&s.difference, None);
    let dk: Vec<Dense> = (0..n).map(|e| dense3(&s.difference, Some(e))).collect();
    let gam = dense3(&s.gamma, None);
    let dh: Vec<Dense> = (0..n).map(|e| dense2(&s.h, Some(e))).collect();

    let basis = s.orthonormal_basis()?;
    let basis_inv_t = basis
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSystem { pivot: 0.0 })?
        .transpose();

    // Gauss
    let mut gauss = curvature(&s.hat_gamma);
    let rhs = gauss_rhs(&h, &sh, &k);
    for (x, y) in gauss.data.iter_mut().zip(&rhs.data) {
        *x -= y;
    }

    // Codazzi: (∇̂_A K)(∂_B, ∂_C) − (∇̂_B K)(∂_A, ∂_C) against the S terms
    let nabla_k = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let mut v = dk[a].get(&[b, c, d]);
        for e in 0..n {
            v += hat.get(&[a, e, d]) * k.get(&[b, c, e])
                - hat.get(&[a, b, e]) * k.get(&[e, c, d])
                - hat.get(&[a, c, e]) * k.get(&[b, e, d]);
        }
        v
    };
    let hs = |c: usize, b: usize| (0..n).map(|e| h.get(&[e, c]) * sh.get(&[e, b])).sum::<f64>();
    let mut codazzi = Dense::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let lhs = nabla_k(a, b, c, d) - nabla_k(b, a, c, d);
                    let mut rhs = h.get(&[b, c]) * sh.get(&[d, a]) - h.get(&[a, c]) * sh.get(&[d, b]);
                    if d == b {
                        rhs += hs(c, a);
                    }
                    if d == a {
                        rhs -= hs(c, b);
                    }
                    codazzi.add(&[a, b, c, d], lhs - 0.5 * rhs);
                }
            }
        }
    }

    // Ricci: (∇̂_A S)∂_B − (∇̂_B S)∂_A = K(S∂_A, ∂_B) − K(S∂_B, ∂_A)
    let nabla_s = |a: usize, b: usize, d: usize| -> f64 {
        let mut v = dsh[a].get(&[d, b]);
        for e in 0..n {
            v += hat.get(&[a, e, d]) * sh.get(&[e, b]) - hat.get(&[a, b, e]) * sh.get(&[d, e]);
        }
        v
    };
    let mut ricci = Dense::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                let mut v = nabla_s(a, b, d) - nabla_s(b, a, d);
                for e in 0..n {
                    v -= k.get(&[e, b, d]) * sh.get(&[e, a]) - k.get(&[e, a, d]) * sh.get(&[e, b]);
                }
                ricci.add(&[a, b, d], v);
            }
        }
    }

    // apolarity: tr K_{∂_A}
    let mut apol = Dense::zeros(n, 1);
    for a in 0..n {
        let tr: f64 = (0..n).map(|b| k.get(&[a, b, b])).sum();
        apol.add(&[a], tr);
    }

    // (∇_A h)(∂_B, ∂_C) must be symmetric in A, B
    let nabla_h = |a: usize, b: usize, c: usize| -> f64 {
        let mut v = dh[a].get(&[b, c]);
        for e in 0..n {
            v -= gam.get(&[a, b, e]) * h.get(&[e, c]) + gam.get(&[a, c, e]) * h.get(&[b, e]);
        }
        v
    };
    let mut nh = Dense::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                nh.add(&[a, b, c], nabla_h(a, b, c) - nabla_h(b, a, c));
            }
        }
    }

    // h-symmetry of S and of the cubic form h(K(·,·),·)
    let mut sym = Dense::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            let hsab = hs(b, a) - hs(a, b);
            sym.add(&[a, b, 0], hsab.abs());
            for c in 0..n {
                let cubic = |x: usize, y: usize, z: usize| (0..n).map(|e| k.get(&[x, y, e]) * h.get(&[e, z])).sum::<f64>();
                let v = (cubic(a, b, c) - cubic(a, c, b)).abs();
                let cur = sym.get(&[a, b, c]);
                if v > cur {
                    sym.add(&[a, b, c], v - cur);
                }
            }
        }
    }
    let mut tau = Dense::zeros(n, 1);
    for a in 0..n {
        tau.add(&[a], s.tau[a].value());
    }

    Ok(PointResiduals {
        gauss: gauss.in_frame(&basis, &basis_inv_t, &[3]).max_abs(),
        codazzi: codazzi.in_frame(&basis, &basis_inv_t, &[3]).max_abs(),
        ricci: ricci.in_frame(&basis, &basis_inv_t, &[2]).max_abs(),
        apolarity: apol.in_frame(&basis, &basis_inv_t, &[]).max_abs(),
        nabla_h_sym: nh.in_frame(&basis, &basis_inv_t, &[]).max_abs(),
        tau: tau.in_frame(&basis, &basis_inv_t, &[]).max_abs(),
        tensor_symmetry: sym.max_abs(),
    })
}

/// Structure residuals aggregated over parameter points.
pub fn structure_residuals(
    imm: &dyn Immersion,
    points: &[Vec<f64>],
    opts: &AffineOptions,
) -> Result<ResidualReport> {
    let per_point = points
        .iter()
        .map(|u| point_residuals(&structure_at(imm, u, opts)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport::from_points(&per_point, opts.residual_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multijet::{eval_jet, FnImmersion, JetOptions};

    fn paraboloid(n: usize) -> impl Immersion {
        FnImmersion::new(n, move |u: &[Taylor]| {
            let mut out: Vec<Taylor> = u.to_vec();
            let mut z = u[0].constant_like(0.0);
            for x in u {
                z += x.powi(2) * 0.5;
            }
            out.push(z);
            out
        })
    }

    fn sphere2() -> impl Immersion {
        FnImmersion::new(2, |u: &[Taylor]| {
            vec![u[0].cos(), u[0].sin() * u[1].cos(), u[0].sin() * u[1].sin()]
        })
    }

    #[test]
    fn paraboloid_normal_is_vertical() {
        let opts = AffineOptions::default();
        for u in [[0.3, -0.7, 0.1], [1.2, 0.4, -2.0]] {
            let jet = eval_jet(&paraboloid(3), &u, 3, JetOptions::default()).unwrap();
            let b = blaschke_normal(&jet, &opts).unwrap();
            for (k, &x) in b.xi.iter().enumerate() {
                let expected = if k == 3 { 1.0 } else { 0.0 };
                assert!((x - expected).abs() < 1e-12, "xi = {:?}", b.xi);
            }
        }
    }

    #[test]
    fn sphere_normal_is_minus_position() {
        let opts = AffineOptions::default();
        let u = [1.1, 0.4];
        let jet = eval_jet(&sphere2(), &u, 3, JetOptions::default()).unwrap();
        let b = blaschke_normal(&jet, &opts).unwrap();
        for (x, p) in b.xi.iter().zip(&jet.value) {
            assert!((x + p).abs() < 1e-12);
        }
        // round metric
        assert!((b.h[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((b.h[(1, 1)] - 1.1f64.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn saddle_is_rejected() {
        let saddle = FnImmersion::new(2, |u: &[Taylor]| {
            vec![u[0].clone(), u[1].clone(), &u[0] * &u[1]]
        });
        let jet = eval_jet(&saddle, &[0.1, 0.2], 3, JetOptions::default()).unwrap();
        assert!(matches!(
            blaschke_normal(&jet, &AffineOptions::default()),
            Err(Error::NotConvex { .. })
        ));
    }

    #[test]
    fn paraboloid_with_vertical_transversal() {
        let opts = AffineOptions::default();
        let poly = taylor_expand(&paraboloid(3), &[0.2, -0.1, 0.5], 4).unwrap();
        let layout = poly[0].layout().clone();
        let xi: Vec<Taylor> = (0..4)
            .map(|k| Taylor::constant(&layout, if k == 3 { 1.0 } else { 0.0 }))
            .collect();
        let s = induced_structure(&poly, &xi, &opts).unwrap();
        let h = s.h_value();
        assert!((h - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!(s.shape_value().abs().max() < 1e-14);
        assert!(s.tau_value().iter().all(|t| t.abs() < 1e-14));
    }

    #[test]
    fn rescaled_transversal_rescales_metric() {
        let opts = AffineOptions::default();
        let u = [0.9, -0.3];
        let poly = taylor_expand(&sphere2(), &u, 4).unwrap();
        let field = blaschke_field(&poly, &opts).unwrap();
        let base = induced_structure(&poly, &field.xi, &opts).unwrap();
        let lambda = -2.5;
        let scaled: Vec<Taylor> = field.xi.iter().map(|x| x * lambda).collect();
        let s = induced_structure(&poly, &scaled, &opts).unwrap();
        let expected = base.h_value() / lambda;
        assert!((s.h_value() - expected).abs().max() < 1e-12);
        let ratio = s.h_value().determinant() / base.h_value().determinant();
        assert!((ratio - lambda.powi(-2)).abs() < 1e-10 * ratio.abs());
    }

    #[test]
    fn quadrics_satisfy_structure_equations_with_zero_cubic_form() {
        let opts = AffineOptions {
            order: 5,
            ..AffineOptions::default()
        };
        let pts = vec![vec![0.3, -0.2, 0.1], vec![-0.6, 0.5, 0.9]];
        let report = structure_residuals(&paraboloid(3), &pts, &opts).unwrap();
        assert!(report.worst() < 1e-10, "{report:?}");
        let s = structure_at(&paraboloid(3), &pts[1], &opts).unwrap();
        let kmax = s.difference_value().iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(kmax < 1e-10);
    }
}
