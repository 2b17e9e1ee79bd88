//! Quadrature and finite-difference weights on (possibly non-uniform) grids.

/// `∫_lo^hi L_j(x) dx` for the three Lagrange basis polynomials of `nodes`,
/// in coordinates centred at `lo`.
fn quadratic_weights(nodes: [f64; 3], lo: f64, hi: f64) -> [f64; 3] {
    let prim = |xa: f64, xb: f64, x: f64| x * x * x / 3.0 - (xa + xb) * x * x / 2.0 + xa * xb * x;
    let h = hi - lo;
    let mut w = [0.0; 3];
    for j in 0..3 {
        let (a, b) = match j {
            0 => (nodes[1], nodes[2]),
            1 => (nodes[0], nodes[2]),
            _ => (nodes[0], nodes[1]),
        };
        let denom = (nodes[j] - a) * (nodes[j] - b);
        w[j] = prim(a - lo, b - lo, h) / denom;
    }
    w
}

/// Cumulative integral `I_k = ∫_{x_0}^{x_k} y dx`, composite Simpson on
/// consecutive interval pairs. Odd nodes add the partial integral of the
/// quadratic through the surrounding pair; a trailing odd interval uses the
/// last three nodes.
pub fn cumulative_simpson(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let m = x.len();
    let mut out = vec![0.0; m];
    if m < 2 {
        return out;
    }
    if m == 2 {
        out[1] = 0.5 * (y[0] + y[1]) * (x[1] - x[0]);
        return out;
    }
    let mut k = 0;
    while k + 2 < m {
        let nodes = [x[k], x[k + 1], x[k + 2]];
        let half = quadratic_weights(nodes, x[k], x[k + 1]);
        let full = quadratic_weights(nodes, x[k], x[k + 2]);
        let dot = |w: [f64; 3]| w[0] * y[k] + w[1] * y[k + 1] + w[2] * y[k + 2];
        out[k + 1] = out[k] + dot(half);
        out[k + 2] = out[k] + dot(full);
        k += 2;
    }
    if k + 1 < m {
        let nodes = [x[m - 3], x[m - 2], x[m - 1]];
        let w = quadratic_weights(nodes, x[m - 2], x[m - 1]);
        out[m - 1] = out[m - 2] + w[0] * y[m - 3] + w[1] * y[m - 2] + w[2] * y[m - 1];
    }
    out
}

/// Finite-difference weights (Fornberg's recursion): `w[j][k]` is the weight
/// of node `j` in the `k`-th derivative at `z`, for `k ≤ max_order`.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; max_order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// First derivative of sampled data at every node, from a centered stencil
/// of `width` nodes (shifted inwards at the ends).
pub fn differentiate_samples(x: &[f64], y: &[f64], width: usize) -> Vec<f64> {
    let m = x.len();
    let width = width.min(m);
    (0..m)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(m - width);
            let w = fornberg_weights(x[i], &x[start..start + width], 1);
            (0..width).map(|j| w[j][1] * y[start + j]).sum()
        })
        .collect()
}
