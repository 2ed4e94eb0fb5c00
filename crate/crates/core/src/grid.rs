//! Calculus on sampled, possibly non-uniform parameter grids.
//!
//! Grids are treated as smooth images of the sample index. Derivatives are
//! taken in index space with 4th-order stencils and divided by the grid map's
//! own derivative; integrals use composite Simpson weights in index space.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Derivative with respect to the sample index, 4th order where the grid has
/// at least five samples.
pub fn index_derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let v = values;
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => vec![v[1] - v[0]; 2],
        3 | 4 => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / 2.0
                } else if i == n - 1 {
                    (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / 2.0
                } else {
                    (v[i + 1] - v[i - 1]) / 2.0
                }
            })
            .collect(),
        _ => (0..n)
            .map(|i| match i {
                0 => (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / 12.0,
                1 => (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / 12.0,
                i if i == n - 2 => {
                    (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5])
                        / 12.0
                }
                i if i == n - 1 => {
                    (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4]
                        + 3.0 * v[n - 5])
                        / 12.0
                }
                i => (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / 12.0,
            })
            .collect(),
    }
}

/// Derivative of scalar samples with respect to the grid parameter.
pub fn derivative(grid: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check_len(grid.len(), values.len())?;
    let dg = index_derivative(grid);
    let dv = index_derivative(values);
    Ok(dv.iter().zip(&dg).map(|(a, b)| a / b).collect())
}

/// Componentwise derivative of vector samples with respect to the grid parameter.
pub fn derivative_vec(grid: &[f64], values: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    check_len(grid.len(), values.len())?;
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = values[0].len();
    let dg = index_derivative(grid);
    let mut out = vec![DVector::zeros(dim); n];
    let mut column = vec![0.0; n];
    for c in 0..dim {
        for (slot, v) in column.iter_mut().zip(values) {
            *slot = v[c];
        }
        for (i, d) in index_derivative(&column).into_iter().enumerate() {
            out[i][c] = d / dg[i];
        }
    }
    Ok(out)
}

/// Composite Simpson weights in index space (3/8 rule closes an odd interval count).
pub fn simpson_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => {}
        2 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        3 => {
            w[0] = 1.0 / 3.0;
            w[1] = 4.0 / 3.0;
            w[2] = 1.0 / 3.0;
        }
        _ => {
            // intervals = n - 1
            let simpson_end = if (n - 1) % 2 == 0 { n - 1 } else { n - 4 };
            let mut i = 0;
            while i < simpson_end {
                w[i] += 1.0 / 3.0;
                w[i + 1] += 4.0 / 3.0;
                w[i + 2] += 1.0 / 3.0;
                i += 2;
            }
            if simpson_end != n - 1 {
                let k = simpson_end;
                w[k] += 3.0 / 8.0;
                w[k + 1] += 9.0 / 8.0;
                w[k + 2] += 9.0 / 8.0;
                w[k + 3] += 3.0 / 8.0;
            }
        }
    }
    w
}

/// ∫ F dτ over the grid by mapped Simpson.
pub fn integrate(grid: &[f64], integrand: &[f64]) -> Result<f64> {
    check_len(grid.len(), integrand.len())?;
    let w = simpson_weights(grid.len());
    let dg = index_derivative(grid);
    Ok(integrand.iter().zip(&w).zip(&dg).map(|((f, w), d)| f * w * d).sum())
}

/// Running integral using the two-point Hermite rule, which needs the
/// derivative of the integrand at each node and is 4th order per interval.
pub fn cumulative_hermite(grid: &[f64], f: &[f64], df: &[f64]) -> Result<Vec<f64>> {
    check_len(grid.len(), f.len())?;
    check_len(grid.len(), df.len())?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    if !grid.is_empty() {
        out.push(0.0);
    }
    for i in 1..grid.len() {
        let h = grid[i] - grid[i - 1];
        acc += 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (df[i - 1] - df[i]);
        out.push(acc);
    }
    Ok(out)
}

/// Index of the interval `[grid[k], grid[k+1]]` containing `x` (clamped).
pub fn locate(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    if n < 2 {
        return 0;
    }
    match grid.partition_point(|g| *g <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    }
}

/// Cubic Hermite interpolation of vector samples with known derivatives.
pub fn hermite_vec(
    grid: &[f64],
    values: &[DVector<f64>],
    slopes: &[DVector<f64>],
    x: f64,
) -> DVector<f64> {
    if grid.len() == 1 {
        return values[0].clone();
    }
    let k = locate(grid, x);
    let h = grid[k + 1] - grid[k];
    let t = (x - grid[k]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    &values[k] * h00 + &slopes[k] * (h10 * h) + &values[k + 1] * h01 + &slopes[k + 1] * (h11 * h)
}

/// Uniform grid of `n` samples on `[a, b]` with exact endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let mut g: Vec<f64> =
                (0..n).map(|i| a + (b - a) * (i as f64) / ((n - 1) as f64)).collect();
            g[n - 1] = b;
            g
        }
    }
}

/// Every other sample, keeping both ends; used for half-grid error estimates.
pub fn coarsen<T: Clone>(values: &[T]) -> Vec<T> {
    let n = values.len();
    if n < 3 {
        return values.to_vec();
    }
    let mut out: Vec<T> = values.iter().step_by(2).cloned().collect();
    if (n - 1) % 2 == 1 {
        out.push(values[n - 1].clone());
    }
    out
}

pub fn is_strictly_increasing(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[1] > w[0]) && grid.iter().all(|g| g.is_finite())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::GridMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivative_is_exact_on_quartics_interior_and_cubics_at_ends() {
        let g = linspace(-1.0, 2.0, 11);
        let v: Vec<f64> = g.iter().map(|x| x * x * x - 2.0 * x).collect();
        let d = derivative(&g, &v).unwrap();
        for (x, dx) in g.iter().zip(&d) {
            assert_abs_diff_eq!(*dx, 3.0 * x * x - 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mapped_derivative_converges_at_fourth_order() {
        let err = |n: usize| {
            let g: Vec<f64> = linspace(0.0, 1.0, n).iter().map(|u| u * u + u).collect();
            let v: Vec<f64> = g.iter().map(|x: &f64| x.sin()).collect();
            let d = derivative(&g, &v).unwrap();
            g.iter().zip(&d).map(|(x, dx)| (dx - x.cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn simpson_handles_even_and_odd_counts() {
        for n in [2usize, 3, 4, 5, 6, 7, 10, 11] {
            let g = linspace(0.0, 1.0, n);
            let v: Vec<f64> = g.iter().map(|x| if n >= 4 { x * x * x } else { *x }).collect();
            let exact = if n >= 4 { 0.25 } else { 0.5 };
            assert_abs_diff_eq!(integrate(&g, &v).unwrap(), exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn hermite_cumulative_is_fourth_order() {
        let g = linspace(0.0, 2.0, 9);
        let f: Vec<f64> = g.iter().map(|x| x * x * x).collect();
        let df: Vec<f64> = g.iter().map(|x| 3.0 * x * x).collect();
        let c = cumulative_hermite(&g, &f, &df).unwrap();
        assert_abs_diff_eq!(c[8], 4.0, epsilon = 1e-13);
    }

    #[test]
    fn locate_clamps_to_ends() {
        let g = [0.0, 1.0, 2.0];
        assert_eq!(locate(&g, -1.0), 0);
        assert_eq!(locate(&g, 1.5), 1);
        assert_eq!(locate(&g, 2.0), 1);
        assert_eq!(locate(&g, 9.0), 1);
    }

    #[test]
    fn coarsen_keeps_both_ends() {
        assert_eq!(coarsen(&[0, 1, 2, 3, 4]), vec![0, 2, 4]);
        assert_eq!(coarsen(&[0, 1, 2, 3]), vec![0, 2, 3]);
    }
}
