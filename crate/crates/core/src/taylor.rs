//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] value holds the Taylor coefficients of a scalar function of
//! `nvars` variables around a fixed base point, truncated at a total degree.
//! Arithmetic on these values is exact up to the truncation order, which makes
//! it equivalent to a tower of nested dual numbers but with every mixed
//! partial available from a single evaluation.
//!
//! Each value tracks its own `valid` order. Differentiating lowers it by one
//! and binary operations take the minimum, so a pipeline that differentiates
//! several times reports exactly how many derivative orders survive.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex};


/// Monomial bookkeeping shared by every [`Taylor`] with the same
/// `(nvars, order)`.
pub struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    /// `deg_end[d]` = number of monomials of degree `<= d`.
    deg_end: Vec<usize>,
    /// Product table `(i, j, k)`: monomial `i` times monomial `j` is `k`,
    /// sorted by the degree of `k`.
    mul: Vec<[u32; 3]>,
    mul_end: Vec<usize>,
    /// Per variable: `(src, dst, factor)` sorted by the degree of `src`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    deriv_end: Vec<Vec<usize>>,
    index: HashMap<Vec<u8>, usize>,
}

static LAYOUTS: std::sync::LazyLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> =
    std::sync::LazyLock::new(|| Mutex::new(HashMap::new()));

fn monomials(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    if nvars == 1 {
        return vec![vec![degree as u8]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in monomials(nvars - 1, degree - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

impl Layout {
    /// Shared layout for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<Layout> {
        assert!(nvars >= 1, "a Taylor layout needs at least one variable");
        let mut cache = LAYOUTS.lock().expect("layout cache poisoned");
        cache
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(Layout::build(nvars, order)))
            .clone()
    }

    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps = Vec::new();
        let mut deg_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            exps.extend(monomials(nvars, d));
            deg_end.push(exps.len());
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();

        let mut mul = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                mul.push([i as u32, j as u32, index[&sum] as u32]);
            }
        }
        mul.sort_by_key(|m| degree[m[2] as usize]);
        let mul_end = (0..=order)
            .map(|d| mul.partition_point(|m| degree[m[2] as usize] <= d))
            .collect();

        let mut deriv = Vec::with_capacity(nvars);
        let mut deriv_end = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut entries = Vec::new();
            for (src, e) in exps.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                entries.push((src as u32, index[&lowered] as u32, e[v] as f64));
            }
            entries.sort_by_key(|x| degree[x.0 as usize]);
            let ends = (0..=order)
                .map(|d| entries.partition_point(|x| degree[x.0 as usize] <= d))
                .collect();
            deriv.push(entries);
            deriv_end.push(ends);
        }

        Layout {
            nvars,
            order,
            exps,
            deg_end,
            mul,
            mul_end,
            deriv,
            deriv_end,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Index of the monomial with exponent vector `exps`, if within order.
    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layout(nvars={}, order={})", self.nvars, self.order)
    }
}

/// A truncated Taylor expansion of a scalar field.
#[derive(Clone)]
pub struct Taylor {
    layout: Arc<Layout>,
    valid: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Taylor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taylor")
            .field("value", &self.value())
            .field("valid", &self.valid)
            .field("nvars", &self.layout.nvars)
            .finish()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl Taylor {
    pub fn constant(layout: &Arc<Layout>, value: f64) -> Taylor {
        let mut c = vec![0.0; layout.len()];
        c[0] = value;
        Taylor {
            layout: layout.clone(),
            valid: layout.order,
            c,
        }
    }

    /// The coordinate function `x_var`, expanded around `value`.
    pub fn var(layout: &Arc<Layout>, var: usize, value: f64) -> Taylor {
        assert!(var < layout.nvars);
        let mut t = Taylor::constant(layout, value);
        if layout.order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            t.c[layout.index[&e]] = 1.0;
        }
        t
    }

    /// Builds a value from raw coefficients (in layout order), valid up to `valid`.
    pub fn from_coeffs(layout: &Arc<Layout>, valid: usize, coeffs: Vec<f64>) -> Taylor {
        assert_eq!(coeffs.len(), layout.len());
        let mut t = Taylor {
            layout: layout.clone(),
            valid: valid.min(layout.order),
            c: coeffs,
        };
        t.truncate();
        t
    }

    /// Same layout and valid order, value `v`, no derivatives.
    pub fn constant_like(&self, v: f64) -> Taylor {
        let mut t = Taylor::constant(&self.layout, v);
        t.valid = self.layout.order;
        t
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn valid(&self) -> usize {
        self.valid
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    fn truncate(&mut self) {
        let end = self.layout.deg_end[self.valid];
        for x in &mut self.c[end..] {
            *x = 0.0;
        }
    }

    /// Raw coefficient of the monomial with exponents `exps`.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.layout.index_of(exps).map_or(0.0, |i| self.c[i])
    }

    /// Mixed partial derivative `∂^k f / ∂x_{vars[0]} ... ∂x_{vars[k-1]}` at the
    /// base point. Returns NaN when the order exceeds what is valid.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        if vars.len() > self.valid {
            return f64::NAN;
        }
        let mut e = vec![0u8; self.layout.nvars];
        for &v in vars {
            e[v] += 1;
        }
        let scale: f64 = e.iter().map(|&k| factorial(k as usize)).product();
        self.coeff(&e) * scale
    }

    /// Partial derivative with respect to variable `var`, one order less valid.
    pub fn derivative(&self, var: usize) -> Taylor {
        let mut out = vec![0.0; self.c.len()];
        if self.valid == 0 {
            out[0] = f64::NAN;
            return Taylor {
                layout: self.layout.clone(),
                valid: 0,
                c: out,
            };
        }
        let end = self.layout.deriv_end[var][self.valid];
        for &(src, dst, factor) in &self.layout.deriv[var][..end] {
            out[dst as usize] += factor * self.c[src as usize];
        }
        Taylor {
            layout: self.layout.clone(),
            valid: self.valid - 1,
            c: out,
        }
    }

    /// Copy with the valid order lowered to `valid` (never raised).
    pub fn with_valid(&self, valid: usize) -> Taylor {
        let mut t = self.clone();
        t.valid = t.valid.min(valid);
        t.truncate();
        t
    }

    fn same_layout(&self, other: &Taylor) {
        debug_assert!(
            Arc::ptr_eq(&self.layout, &other.layout),
            "mixing Taylor values from different layouts"
        );
    }

    fn zip(&self, other: &Taylor, f: impl Fn(f64, f64) -> f64) -> Taylor {
        self.same_layout(other);
        let valid = self.valid.min(other.valid);
        let end = self.layout.deg_end[valid];
        let mut c = vec![0.0; self.c.len()];
        for i in 0..end {
            c[i] = f(self.c[i], other.c[i]);
        }
        Taylor {
            layout: self.layout.clone(),
            valid,
            c,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Taylor {
        let end = self.layout.deg_end[self.valid];
        let mut c = vec![0.0; self.c.len()];
        for i in 0..end {
            c[i] = f(self.c[i]);
        }
        Taylor {
            layout: self.layout.clone(),
            valid: self.valid,
            c,
        }
    }

    fn mul_ref(&self, other: &Taylor) -> Taylor {
        self.same_layout(other);
        let valid = self.valid.min(other.valid);
        let mut c = vec![0.0; self.c.len()];
        for m in &self.layout.mul[..self.layout.mul_end[valid]] {
            c[m[2] as usize] += self.c[m[0] as usize] * other.c[m[1] as usize];
        }
        Taylor {
            layout: self.layout.clone(),
            valid,
            c,
        }
    }

    /// Evaluates `Σ_k series[k] (x - x0)^k` where `x0` is this value's constant term.
    pub fn compose_series(&self, series: &[f64]) -> Taylor {
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let top = self.valid.min(series.len().saturating_sub(1));
        let mut acc = self.constant_like(series.get(top).copied().unwrap_or(0.0));
        acc.valid = self.valid;
        for k in (0..top).rev() {
            acc = acc.mul_ref(&delta);
            acc.c[0] += series[k];
        }
        acc
    }

    /// Composition with a univariate function given its derivatives
    /// `f(x0), f'(x0), f''(x0), ...` at the constant term.
    pub fn compose_derivatives(&self, derivs: &[f64]) -> Taylor {
        let series: Vec<f64> = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| d / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    fn derivs_with(&self, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let x0 = self.value();
        (0..=self.valid).map(|k| f(k, x0)).collect()
    }

    pub fn recip(&self) -> Taylor {
        // d^k/dx^k x^{-1} = (-1)^k k! x^{-k-1}
        let d = self.derivs_with(|k, x| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s * factorial(k) * x.powi(-(k as i32) - 1)
        });
        self.compose_derivatives(&d)
    }

    pub fn exp(&self) -> Taylor {
        let e = self.value().exp();
        self.compose_derivatives(&vec![e; self.valid + 1])
    }

    pub fn ln(&self) -> Taylor {
        let d = self.derivs_with(|k, x| {
            if k == 0 {
                x.ln()
            } else {
                let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                s * factorial(k - 1) * x.powi(-(k as i32))
            }
        });
        self.compose_derivatives(&d)
    }

    /// Real power. For a non-integer exponent the constant term must be positive.
    pub fn powf(&self, p: f64) -> Taylor {
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let d = self.derivs_with(|k, x| {
            let falling: f64 = (0..k).map(|j| p - j as f64).product();
            falling * x.powf(p - k as f64)
        });
        self.compose_derivatives(&d)
    }

    pub fn powi(&self, k: i32) -> Taylor {
        if k < 0 {
            return self.recip().powi(-k);
        }
        let mut result = self.constant_like(1.0);
        result.valid = self.valid;
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        result
    }

    pub fn sqrt(&self) -> Taylor {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cyc = [s, c, -s, -c];
        self.compose_derivatives(&(0..=self.valid).map(|k| cyc[k % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cyc = [c, -s, -c, s];
        self.compose_derivatives(&(0..=self.valid).map(|k| cyc[k % 4]).collect::<Vec<_>>())
    }

    pub fn sinh(&self) -> Taylor {
        let x = self.value();
        let cyc = [x.sinh(), x.cosh()];
        self.compose_derivatives(&(0..=self.valid).map(|k| cyc[k % 2]).collect::<Vec<_>>())
    }

    pub fn cosh(&self) -> Taylor {
        let x = self.value();
        let cyc = [x.cosh(), x.sinh()];
        self.compose_derivatives(&(0..=self.valid).map(|k| cyc[k % 2]).collect::<Vec<_>>())
    }

    /// `|f|`, smooth as long as the constant term is non-zero.
    pub fn abs(&self) -> Taylor {
        if self.value() < 0.0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Antiderivative in the single variable of a univariate expansion,
    /// with zero constant term. One order more valid (capped by the layout).
    pub fn integrate_univariate(&self) -> Taylor {
        assert_eq!(self.layout.nvars, 1, "integrate_univariate needs one variable");
        let order = self.layout.order;
        let valid = (self.valid + 1).min(order);
        let mut c = vec![0.0; self.c.len()];
        for k in 0..valid {
            c[k + 1] = self.c[k] / (k + 1) as f64;
        }
        Taylor {
            layout: self.layout.clone(),
            valid,
            c,
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<'a> $trait<&'a Taylor> for &'a Taylor {
            type Output = Taylor;
            fn $method(self, rhs: &'a Taylor) -> Taylor {
                let f: fn(&Taylor, &Taylor) -> Taylor = $body;
                f(self, rhs)
            }
        }
        impl $trait<Taylor> for Taylor {
            type Output = Taylor;
            fn $method(self, rhs: Taylor) -> Taylor {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Taylor> for Taylor {
            type Output = Taylor;
            fn $method(self, rhs: &'a Taylor) -> Taylor {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Taylor> for &'a Taylor {
            type Output = Taylor;
            fn $method(self, rhs: Taylor) -> Taylor {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.zip(b, |x, y| x + y));
forward_binop!(Sub, sub, |a, b| a.zip(b, |x, y| x - y));
forward_binop!(Mul, mul, |a, b| a.mul_ref(b));
forward_binop!(Div, div, |a, b| a.mul_ref(&b.recip()));

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $lhs:expr, $rhs:expr) => {
        impl $trait<f64> for &Taylor {
            type Output = Taylor;
            fn $method(self, s: f64) -> Taylor {
                let f: fn(&Taylor, f64) -> Taylor = $lhs;
                f(self, s)
            }
        }
        impl $trait<f64> for Taylor {
            type Output = Taylor;
            fn $method(self, s: f64) -> Taylor {
                (&self).$method(s)
            }
        }
        impl $trait<&Taylor> for f64 {
            type Output = Taylor;
            fn $method(self, t: &Taylor) -> Taylor {
                let f: fn(f64, &Taylor) -> Taylor = $rhs;
                f(self, t)
            }
        }
        impl $trait<Taylor> for f64 {
            type Output = Taylor;
            fn $method(self, t: Taylor) -> Taylor {
                self.$method(&t)
            }
        }
    };
}

scalar_binop!(
    Add,
    add,
    |t, s| {
        let mut r = t.clone();
        r.c[0] += s;
        r
    },
    |s, t| {
        let mut r = t.clone();
        r.c[0] += s;
        r
    }
);
scalar_binop!(
    Sub,
    sub,
    |t, s| {
        let mut r = t.clone();
        r.c[0] -= s;
        r
    },
    |s, t| {
        let mut r = -t;
        r.c[0] += s;
        r
    }
);
scalar_binop!(Mul, mul, |t, s| t.map(|x| x * s), |s, t| t.map(|x| x * s));
scalar_binop!(Div, div, |t, s| t.map(|x| x / s), |s, t| t.recip().map(|x| x * s));

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.map(|x| -x)
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        -&self
    }
}

impl AddAssign<&Taylor> for Taylor {
    fn add_assign(&mut self, rhs: &Taylor) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Taylor> for Taylor {
    fn add_assign(&mut self, rhs: Taylor) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Taylor> for Taylor {
    fn sub_assign(&mut self, rhs: &Taylor) {
        *self = &*self - rhs;
    }
}

impl SubAssign<Taylor> for Taylor {
    fn sub_assign(&mut self, rhs: Taylor) {
        *self = &*self - &rhs;
    }
}

impl MulAssign<f64> for Taylor {
    fn mul_assign(&mut self, s: f64) {
        let end = self.layout.deg_end[self.valid];
        for x in &mut self.c[..end] {
            *x *= s;
        }
    }
}

/// Scalar operations shared by plain `f64` and [`Taylor`], so curve formulas
/// and ODE right-hand sides are written once.
pub trait Real:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant of the same kind (same layout for Taylor values).
    fn lift(&self, v: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn powf(&self, p: f64) -> f64 {
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            f64::powi(*self, p as i32)
        } else {
            f64::powf(*self, p)
        }
    }
    fn powi(&self, k: i32) -> f64 {
        f64::powi(*self, k)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sinh(&self) -> f64 {
        f64::sinh(*self)
    }
    fn cosh(&self) -> f64 {
        f64::cosh(*self)
    }
}

impl Real for Taylor {
    fn value(&self) -> f64 {
        Taylor::value(self)
    }
    fn lift(&self, v: f64) -> Taylor {
        self.constant_like(v)
    }
    fn exp(&self) -> Taylor {
        Taylor::exp(self)
    }
    fn ln(&self) -> Taylor {
        Taylor::ln(self)
    }
    fn powf(&self, p: f64) -> Taylor {
        Taylor::powf(self, p)
    }
    fn powi(&self, k: i32) -> Taylor {
        Taylor::powi(self, k)
    }
    fn sqrt(&self) -> Taylor {
        Taylor::sqrt(self)
    }
    fn sin(&self) -> Taylor {
        Taylor::sin(self)
    }
    fn cos(&self) -> Taylor {
        Taylor::cos(self)
    }
    fn sinh(&self) -> Taylor {
        Taylor::sinh(self)
    }
    fn cosh(&self) -> Taylor {
        Taylor::cosh(self)
    }
}
