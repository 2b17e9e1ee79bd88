//! Immersions `F: U ⊂ R^n → R^{n+1}` and their derivative jets.
//!
//! Analytic immersions are evaluated on [`Taylor`] arguments, which yields
//! every mixed partial up to the requested order exactly (to roundoff).
//! Immersions that are only available pointwise fall back to central finite
//! differences with one Richardson step and report an error estimate.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::taylor::{Layout, Taylor};

/// A parametrized hypersurface.
pub trait Immersion: Send + Sync {
    /// Number of parameters `n`; the image lives in `R^{n+1}`.
    fn dim(&self) -> usize;

    /// Box domain, one `(lo, hi)` per parameter. `None` means unbounded.
    fn domain(&self) -> Option<Vec<(f64, f64)>> {
        None
    }

    /// Evaluates the immersion on Taylor arguments. Sample-only immersions
    /// return [`Error::NotAnalytic`].
    fn eval_taylor(&self, u: &[Taylor]) -> Result<Vec<Taylor>>;

    fn is_analytic(&self) -> bool {
        true
    }

    /// Plain point evaluation.
    fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let layout = Layout::get(self.dim(), 0);
        let args: Vec<Taylor> = u.iter().map(|&x| Taylor::constant(&layout, x)).collect();
        Ok(self.eval_taylor(&args)?.iter().map(Taylor::value).collect())
    }
}

impl<T: Immersion + ?Sized> Immersion for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> Option<Vec<(f64, f64)>> {
        (**self).domain()
    }
    fn eval_taylor(&self, u: &[Taylor]) -> Result<Vec<Taylor>> {
        (**self).eval_taylor(u)
    }
    fn is_analytic(&self) -> bool {
        (**self).is_analytic()
    }
    fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(u)
    }
}

/// An analytic immersion given by a closure over Taylor arguments.
pub struct FnImmersion<F> {
    n: usize,
    domain: Option<Vec<(f64, f64)>>,
    f: F,
}

impl<F> FnImmersion<F>
where
    F: Fn(&[Taylor]) -> Vec<Taylor> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnImmersion { n, domain: None, f }
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Self {
        assert_eq!(domain.len(), self.n);
        self.domain = Some(domain);
        self
    }
}

impl<F> Immersion for FnImmersion<F>
where
    F: Fn(&[Taylor]) -> Vec<Taylor> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> Option<Vec<(f64, f64)>> {
        self.domain.clone()
    }
    fn eval_taylor(&self, u: &[Taylor]) -> Result<Vec<Taylor>> {
        Ok((self.f)(u))
    }
}

/// An immersion known only through point evaluations.
pub struct SampledImmersion<F> {
    n: usize,
    f: F,
}

impl<F> SampledImmersion<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        SampledImmersion { n, f }
    }
}

impl<F> Immersion for SampledImmersion<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_taylor(&self, _u: &[Taylor]) -> Result<Vec<Taylor>> {
        Err(Error::NotAnalytic)
    }
    fn is_analytic(&self) -> bool {
        false
    }
    fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(u))
    }
}

pub fn check_domain(imm: &dyn Immersion, u: &[f64]) -> Result<()> {
    if let Some(dom) = imm.domain() {
        for (k, (&x, &(lo, hi))) in u.iter().zip(&dom).enumerate() {
            if !(lo..=hi).contains(&x) {
                return Err(Error::OutsideDomain {
                    point: u.to_vec(),
                    coord: k,
                    lo,
                    hi,
                });
            }
        }
    }
    Ok(())
}

/// Taylor expansion of `imm` around `u`, truncated at total degree `order`.
pub fn taylor_expand(imm: &dyn Immersion, u: &[f64], order: usize) -> Result<Vec<Taylor>> {
    assert_eq!(u.len(), imm.dim(), "parameter point has wrong dimension");
    check_domain(imm, u)?;
    let layout = Layout::get(imm.dim(), order);
    let args: Vec<Taylor> = u
        .iter()
        .enumerate()
        .map(|(i, &x)| Taylor::var(&layout, i, x))
        .collect();
    let out = imm.eval_taylor(&args)?;
    assert_eq!(out.len(), imm.dim() + 1, "immersion must map into R^(n+1)");
    Ok(out)
}

/// Value and partial derivatives up to order 3 of an immersion at a point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub point: Vec<f64>,
    pub value: Vec<f64>,
    /// `d1[A]` = ∂_A F.
    pub d1: Vec<Vec<f64>>,
    /// `d2[A][B]` = ∂_A ∂_B F (empty when order < 2).
    pub d2: Vec<Vec<Vec<f64>>>,
    /// `d3[A][B][C]` = ∂_A ∂_B ∂_C F (empty when order < 3).
    pub d3: Vec<Vec<Vec<Vec<f64>>>>,
    pub order: usize,
    /// Finite-difference error estimate; `None` for exact Taylor jets.
    pub error_estimate: Option<f64>,
}

impl Jet {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// The Jacobian as an `(n+1) × n` matrix.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n + 1, n, |i, a| self.d1[a][i])
    }

    /// Re-expands the jet as a Taylor polynomial of degree `order`
    /// around `point`.
    pub fn to_taylor(&self) -> Vec<Taylor> {
        let n = self.dim();
        let layout = Layout::get(n, self.order);
        let mut coeffs = vec![vec![0.0; layout.len()]; n + 1];
        let mut put = |vars: &[usize], vals: &[f64]| {
            let mut e = vec![0u8; n];
            for &v in vars {
                e[v] += 1;
            }
            let idx = layout.index_of(&e).expect("monomial within order");
            let denom: f64 = e
                .iter()
                .map(|&k| (1..=k as usize).map(|x| x as f64).product::<f64>())
                .product();
            for (i, &x) in vals.iter().enumerate() {
                coeffs[i][idx] = x / denom;
            }
        };
        put(&[], &self.value);
        for a in 0..n {
            put(&[a], &self.d1[a]);
            if self.order >= 2 {
                for b in a..n {
                    put(&[a, b], &self.d2[a][b]);
                    if self.order >= 3 {
                        for c in b..n {
                            put(&[a, b, c], &self.d3[a][b][c]);
                        }
                    }
                }
            }
        }
        coeffs
            .into_iter()
            .map(|c| Taylor::from_coeffs(&layout, self.order, c))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct JetOptions {
    /// Smallest admissible singular value of the Jacobian relative to the largest.
    pub rank_tol: f64,
}

impl Default for JetOptions {
    fn default() -> Self {
        JetOptions { rank_tol: 1e-8 }
    }
}

/// Relative rank test on the Jacobian.
pub fn check_rank(point: &[f64], jacobian: DMatrix<f64>, rank_tol: f64) -> Result<()> {
    let sv = jacobian.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(min > rank_tol * max) {
        return Err(Error::RankDeficient {
            point: point.to_vec(),
            sigma_min: min,
            sigma_max: max,
        });
    }
    Ok(())
}

/// Derivative jet of `imm` at `u` up to `order` (1..=3).
pub fn eval_jet(imm: &dyn Immersion, u: &[f64], order: usize, opts: JetOptions) -> Result<Jet> {
    assert!((1..=3).contains(&order), "jet order must be 1, 2 or 3");
    let jet = if imm.is_analytic() {
        let poly = taylor_expand(imm, u, order)?;
        jet_from_taylor(u, &poly, order)
    } else {
        check_domain(imm, u)?;
        fd_jet(&|p: &[f64]| imm.eval(p), u, order)?
    };
    check_rank(u, jet.jacobian(), opts.rank_tol)?;
    Ok(jet)
}

/// Reads derivatives off a Taylor expansion.
pub fn jet_from_taylor(u: &[f64], poly: &[Taylor], order: usize) -> Jet {
    let n = u.len();
    let comp = |vars: &[usize]| -> Vec<f64> { poly.iter().map(|p| p.partial(vars)).collect() };
    let d1 = (0..n).map(|a| comp(&[a])).collect();
    let d2 = if order >= 2 {
        (0..n)
            .map(|a| (0..n).map(|b| comp(&[a, b])).collect())
            .collect()
    } else {
        Vec::new()
    };
    let d3 = if order >= 3 {
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| (0..n).map(|c| comp(&[a, b, c])).collect())
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    Jet {
        point: u.to_vec(),
        value: poly.iter().map(Taylor::value).collect(),
        d1,
        d2,
        d3,
        order,
        error_estimate: None,
    }
}

/// One-dimensional central stencils of second-order accuracy:
/// `(offsets, weights)` for derivative orders 1, 2, 3.
fn stencil(k: usize) -> (&'static [i32], &'static [f64]) {
    match k {
        1 => (&[-1, 1], &[-0.5, 0.5]),
        2 => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        3 => (&[-2, -1, 1, 2], &[-0.5, 1.0, -1.0, 0.5]),
        _ => unreachable!("finite-difference stencils cover orders 1..=3"),
    }
}

fn fd_partial(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    u: &[f64],
    counts: &[usize],
    h: f64,
) -> Result<(Vec<f64>, f64)> {
    let vars: Vec<usize> = (0..u.len()).filter(|&v| counts[v] > 0).collect();
    let stencils: Vec<_> = vars.iter().map(|&v| stencil(counts[v])).collect();
    let steps: Vec<f64> = vars.iter().map(|&v| h * u[v].abs().max(1.0)).collect();
    let mut acc: Option<Vec<f64>> = None;
    let mut abs_weight = 0.0;
    let mut fmax = 0.0f64;
    let total: usize = stencils.iter().map(|s| s.0.len()).product();
    for flat in 0..total {
        let mut rem = flat;
        let mut p = u.to_vec();
        let mut w = 1.0;
        for (j, (offs, wts)) in stencils.iter().enumerate() {
            let k = rem % offs.len();
            rem /= offs.len();
            p[vars[j]] += offs[k] as f64 * steps[j];
            w *= wts[k];
        }
        let val = f(&p)?;
        fmax = val.iter().fold(fmax, |m, x| m.max(x.abs()));
        abs_weight += w.abs();
        let acc = acc.get_or_insert_with(|| vec![0.0; val.len()]);
        for (a, v) in acc.iter_mut().zip(&val) {
            *a += w * v;
        }
    }
    let denom: f64 = vars
        .iter()
        .zip(&steps)
        .map(|(&v, &s)| s.powi(counts[v] as i32))
        .product();
    let out = acc.unwrap_or_default().into_iter().map(|x| x / denom).collect();
    let roundoff = f64::EPSILON * fmax * abs_weight / denom;
    Ok((out, roundoff))
}

/// Central finite differences with one Richardson step; the returned jet
/// carries an error estimate (Richardson difference plus roundoff bound).
pub fn fd_jet(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, u: &[f64], order: usize) -> Result<Jet> {
    let n = u.len();
    let value = f(u)?;
    let dim = value.len();
    let mut err = 0.0f64;
    let mut d1 = vec![vec![0.0; dim]; n];
    let mut d2 = if order >= 2 { vec![vec![vec![0.0; dim]; n]; n] } else { Vec::new() };
    let mut d3 = if order >= 3 {
        vec![vec![vec![vec![0.0; dim]; n]; n]; n]
    } else {
        Vec::new()
    };

    let mut estimate = |vars: &[usize]| -> Result<Vec<f64>> {
        let mut counts = vec![0usize; n];
        for &v in vars {
            counts[v] += 1;
        }
        let k = vars.len() as f64;
        // balances O(h^4) truncation against O(eps / h^k) roundoff
        let h = f64::EPSILON.powf(1.0 / (k + 4.0));
        let (coarse, _) = fd_partial(f, u, &counts, h)?;
        let (fine, roundoff) = fd_partial(f, u, &counts, h / 2.0)?;
        let mut out = Vec::with_capacity(dim);
        for (c, fi) in coarse.iter().zip(&fine) {
            let rich = (4.0 * fi - c) / 3.0;
            err = err.max((fi - c).abs() / 3.0 + roundoff);
            out.push(rich);
        }
        Ok(out)
    };

    for a in 0..n {
        d1[a] = estimate(&[a])?;
        if order >= 2 {
            for b in a..n {
                let v = estimate(&[a, b])?;
                d2[a][b] = v.clone();
                d2[b][a] = v;
                if order >= 3 {
                    for c in b..n {
                        let v = estimate(&[a, b, c])?;
                        for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                            d3[x][y][z] = v.clone();
                        }
                    }
                }
            }
        }
    }
    Ok(Jet {
        point: u.to_vec(),
        value,
        d1,
        d2,
        d3,
        order,
        error_estimate: Some(err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid() -> impl Immersion {
        FnImmersion::new(2, |u: &[Taylor]| {
            let z = (u[0].powi(2) + u[1].powi(2)) * 0.5;
            vec![u[0].clone(), u[1].clone(), z]
        })
    }

    #[test]
    fn quadratic_graph_second_derivative() {
        let jet = eval_jet(&paraboloid(), &[0.3, -0.2], 3, JetOptions::default()).unwrap();
        assert_eq!(jet.d2[0][0], vec![0.0, 0.0, 1.0]);
        assert_eq!(jet.d2[0][1], vec![0.0, 0.0, 0.0]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert!(jet.d3[a][b][c].iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn affine_map_has_no_curvature() {
        let affine = FnImmersion::new(2, |u: &[Taylor]| {
            vec![
                &u[0] * 2.0 + 1.0,
                &u[0] - &u[1] * 3.0,
                &u[1] * 0.5 + &u[0] * 0.25 - 4.0,
            ]
        });
        let jet = eval_jet(&affine, &[1.5, 2.0], 3, JetOptions::default()).unwrap();
        let flat = jet
            .d2
            .iter()
            .flatten()
            .flatten()
            .chain(jet.d3.iter().flatten().flatten().flatten());
        for &x in flat {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn exponential_third_derivative() {
        // a curve is the n = 1 case of the engine
        let curve = FnImmersion::new(1, |t: &[Taylor]| vec![t[0].exp(), (&t[0] * 2.0).exp()]);
        let jet = eval_jet(&curve, &[0.0], 3, JetOptions::default()).unwrap();
        assert!((jet.d3[0][0][0][0] - 1.0).abs() < 1e-14);
        assert!((jet.d3[0][0][0][1] - 8.0).abs() < 1e-13);
    }

    #[test]
    fn domain_and_rank_errors() {
        let p = paraboloid();
        let bounded = FnImmersion::new(2, |u: &[Taylor]| {
            vec![u[0].clone(), u[1].clone(), &u[0] * &u[1]]
        })
        .with_domain(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        assert!(matches!(
            eval_jet(&bounded, &[2.0, 0.0], 2, JetOptions::default()),
            Err(Error::OutsideDomain { coord: 0, .. })
        ));
        // cone point of (u, v) -> (u^2, v, 0): rank drops at u = 0
        let fold = FnImmersion::new(2, |u: &[Taylor]| {
            vec![u[0].powi(2), u[1].clone(), u[1].constant_like(0.0)]
        });
        assert!(matches!(
            eval_jet(&fold, &[0.0, 0.3], 1, JetOptions::default()),
            Err(Error::RankDeficient { .. })
        ));
        assert!(eval_jet(&p, &[0.0, 0.0], 1, JetOptions::default()).is_ok());
    }

    #[test]
    fn jet_roundtrips_through_taylor() {
        let f = FnImmersion::new(2, |u: &[Taylor]| {
            vec![u[0].sin(), &u[0] * &u[1], (&u[1] * 0.5).exp()]
        });
        let jet = eval_jet(&f, &[0.4, 0.9], 3, JetOptions::default()).unwrap();
        let back = jet_from_taylor(&jet.point, &jet.to_taylor(), 3);
        assert_eq!(jet.d3, back.d3);
        assert_eq!(jet.d2, back.d2);
    }

    #[test]
    fn sampled_immersion_uses_finite_differences() {
        let s = SampledImmersion::new(2, |u: &[f64]| {
            vec![u[0], u[1], (u[0] * u[0] + u[1] * u[1]) * 0.5 + u[0].powi(3)]
        });
        let jet = eval_jet(&s, &[0.2, 0.1], 3, JetOptions::default()).unwrap();
        let est = jet.error_estimate.unwrap();
        assert!(est < 1e-5, "estimate {est}");
        assert!((jet.d3[0][0][0][2] - 6.0).abs() < 1e-5);
        assert!((jet.d2[0][0][2] - (1.0 + 1.2)).abs() < 1e-6);
    }
}
