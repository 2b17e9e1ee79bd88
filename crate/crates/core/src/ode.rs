//! Adaptive Dormand–Prince 5(4) integrator for small first-order systems.

use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

/// States at the requested output nodes. When the step check failed, the
/// solution is truncated and `stopped` holds the error.
#[derive(Debug)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stopped: Option<crate::Error>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let ys: Vec<f64> = (0..dim)
            .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
            .collect();
        k.push(f(t + C[s] * h, &ys)?);
    }
    let y5: Vec<f64> = (0..dim)
        .map(|i| y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>())
        .collect();
    let err = (0..dim)
        .map(|i| {
            let e = h * (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<f64>();
            e * e
        })
        .collect::<Vec<_>>();
    Ok((y5, err.iter().sum::<f64>()))
}

/// Integrates `y' = f(t, y)` from `grid[0]` through every node of the
/// monotone `grid`, landing exactly on each node. `check` runs on every
/// accepted state; its error stops the integration.
pub fn integrate<F, G>(mut f: F, y0: &[f64], grid: &[f64], opts: &OdeOptions, mut check: G) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let mut out = OdeSolution {
        t: vec![grid[0]],
        y: vec![y0.to_vec()],
        stopped: None,
    };
    if let Err(e) = check(grid[0], y0) {
        out.stopped = Some(e);
        return Ok(out);
    }
    let mut t = grid[0];
    let mut y = y0.to_vec();
    let span = (grid[grid.len() - 1] - grid[0]).abs();
    let mut h_abs = (span / 100.0).max(1e-6);
    let mut steps = 0;
    for &target in &grid[1..] {
        let dir = (target - t).signum();
        while (target - t).abs() > 1e-14 * (1.0 + target.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(crate::Error::InvalidSpec("ODE step budget exhausted".into()));
            }
            let h = dir * h_abs.min((target - t).abs());
            let (y_new, err2) = step(&mut f, t, &y, h)?;
            let scale: Vec<f64> = y
                .iter()
                .zip(&y_new)
                .map(|(a, b)| opts.atol + opts.rtol * a.abs().max(b.abs()))
                .collect();
            let err = (err2 / scale.iter().map(|s| s * s).sum::<f64>().max(f64::MIN_POSITIVE)).sqrt();
            let norm_err = if err.is_finite() { err } else { f64::INFINITY };
            if norm_err <= 1.0 {
                t += h;
                if (target - t).abs() <= 1e-14 * (1.0 + target.abs()) {
                    t = target;
                }
                y = y_new;
                if let Err(e) = check(t, &y) {
                    out.stopped = Some(e);
                    return Ok(out);
                }
            }
            let factor = if norm_err == 0.0 {
                5.0
            } else {
                (0.9 * norm_err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h_abs = (h.abs() * factor).max(1e-14);
        }
        out.t.push(target);
        out.y.push(y.clone());
    }
    Ok(out)
}
