//! Dormand-Prince 5(4) with PI step control.
//!
//! The right-hand side may refuse to evaluate (returns `None`), and the caller
//! supplies a membership test for states. On either condition the step is
//! shrunk and retried; when it cannot shrink further the integration stops
//! cleanly and hands back everything accepted so far.

use nalgebra::DVector;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Relative step floor, scaled by the span and current parameter.
    pub min_step_rel: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            min_step_rel: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

/// Where samples are recorded.
#[derive(Clone, Copy, Debug)]
pub enum Output<'a> {
    /// Every accepted step.
    Steps,
    /// Exactly these parameter values (monotone in the direction of integration,
    /// first entry equal to the start).
    Grid(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stop {
    Completed,
    /// Could not advance without leaving the domain; parameter of last accepted state.
    Exited(f64),
    /// Error control drove the step below the floor.
    Underflow { at: f64, floor: f64 },
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub dy: Vec<DVector<f64>>,
    pub stop: Stop,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// Row 6 doubles as the 5th-order weights (FSAL).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th minus embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F, G>(
    rhs: F,
    inside: G,
    t0: f64,
    t1: f64,
    y0: &DVector<f64>,
    opts: &OdeOptions,
    output: Output<'_>,
) -> Solution
where
    F: Fn(f64, &DVector<f64>) -> Option<DVector<f64>>,
    G: Fn(&DVector<f64>) -> bool,
{
    let mut sol = Solution { t: vec![t0], y: vec![y0.clone()], dy: Vec::new(), stop: Stop::Completed };
    let Some(f0) = rhs(t0, y0).filter(|_| inside(y0)) else {
        sol.dy.push(DVector::zeros(y0.len()));
        sol.stop = Stop::Exited(t0);
        return sol;
    };
    sol.dy.push(f0.clone());
    let span = t1 - t0;
    if span == 0.0 {
        return sol;
    }
    let dir = span.signum();
    let targets: Vec<f64> = match output {
        Output::Steps => vec![t1],
        Output::Grid(g) => g.iter().copied().skip_while(|x| (x - t0) * dir <= 0.0).collect(),
    };
    let record_steps = matches!(output, Output::Steps);

    let mut t = t0;
    let mut y = y0.clone();
    let mut f = f0;
    let mut h = initial_step(&y, &f, span.abs(), opts) * dir;
    let mut err_prev: f64 = 1e-4;
    let mut target_idx = 0;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while target_idx < targets.len() {
        let target = targets[target_idx];
        let floor = opts.min_step_rel * t.abs().max(span.abs()).max(1e-300);
        if steps >= opts.max_steps {
            sol.stop = Stop::Underflow { at: t, floor };
            return sol;
        }
        steps += 1;
        let mut hits_target = false;
        let h_free = h;
        if (t + h - target) * dir >= 0.0 {
            h = target - t;
            hits_target = true;
        }
        if h.abs() < floor && !hits_target {
            sol.stop = Stop::Underflow { at: t, floor };
            return sol;
        }
        match try_step(&rhs, t, &y, &f, h, opts) {
            StepResult::Failed => {
                if h.abs() * 0.25 < floor {
                    sol.stop = Stop::Exited(t);
                    return sol;
                }
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            StepResult::Done { y_new, f_new, err } => {
                if !inside(&y_new) {
                    if h.abs() * 0.25 < floor {
                        sol.stop = Stop::Exited(t);
                        return sol;
                    }
                    h *= 0.25;
                    rejected_last = true;
                    continue;
                }
                if err <= 1.0 {
                    t = if hits_target { target } else { t + h };
                    y = y_new;
                    f = f_new;
                    if hits_target {
                        target_idx += 1;
                    }
                    if hits_target || record_steps {
                        sol.t.push(t);
                        sol.y.push(y.clone());
                        sol.dy.push(f.clone());
                    }
                    let e = err.max(1e-10);
                    let mut fac = 0.9 * e.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                    fac = fac.clamp(0.2, 10.0);
                    if rejected_last {
                        fac = fac.min(1.0);
                    }
                    err_prev = e;
                    rejected_last = false;
                    // a step shortened to land on a target says little about the next one
                    h = if hits_target { h_free * fac.min(1.0) } else { h * fac };
                } else {
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    h *= fac;
                    rejected_last = true;
                }
            }
        }
    }
    sol
}

/// Integrate from `(t0, y0)` towards both ends of an increasing `grid`,
/// recording exactly the grid values (plus `t0` only if it is one of them).
///
/// The returned samples are in increasing parameter order. If either side
/// stops early, the samples reached on both sides are kept and `stop` reports
/// the failing side.
pub fn integrate_through<F, G>(
    rhs: F,
    inside: G,
    t0: f64,
    y0: &DVector<f64>,
    grid: &[f64],
    opts: &OdeOptions,
) -> crate::error::Result<Solution>
where
    F: Fn(f64, &DVector<f64>) -> Option<DVector<f64>>,
    G: Fn(&DVector<f64>) -> bool,
{
    if !crate::grid::is_strictly_increasing(grid) {
        return Err(crate::error::Error::InvalidInput("output grid must be strictly increasing".into()));
    }
    let mut out = Solution { t: Vec::new(), y: Vec::new(), dy: Vec::new(), stop: Stop::Completed };
    if grid.is_empty() {
        return Ok(out);
    }
    let below: Vec<f64> = grid.iter().rev().copied().filter(|g| *g < t0).collect();
    let above: Vec<f64> = grid.iter().copied().filter(|g| *g > t0).collect();
    let on_grid = grid.contains(&t0);

    if let Some(&first) = below.last() {
        let back = integrate(&rhs, &inside, t0, first, y0, opts, Output::Grid(&below));
        for i in (1..back.t.len()).rev() {
            out.t.push(back.t[i]);
            out.y.push(back.y[i].clone());
            out.dy.push(back.dy[i].clone());
        }
        if back.stop != Stop::Completed {
            out.stop = back.stop;
        }
    }
    if on_grid {
        out.t.push(t0);
        out.y.push(y0.clone());
        out.dy.push(rhs(t0, y0).unwrap_or_else(|| DVector::zeros(y0.len())));
    }
    if let Some(&last) = above.last() {
        let fwd = integrate(&rhs, &inside, t0, last, y0, opts, Output::Grid(&above));
        for i in 1..fwd.t.len() {
            out.t.push(fwd.t[i]);
            out.y.push(fwd.y[i].clone());
            out.dy.push(fwd.dy[i].clone());
        }
        if fwd.stop != Stop::Completed && out.stop == Stop::Completed {
            out.stop = fwd.stop;
        }
    }
    Ok(out)
}

enum StepResult {
    Failed,
    Done { y_new: DVector<f64>, f_new: DVector<f64>, err: f64 },
}

fn try_step<F>(rhs: &F, t: f64, y: &DVector<f64>, f0: &DVector<f64>, h: f64, opts: &OdeOptions) -> StepResult
where
    F: Fn(f64, &DVector<f64>) -> Option<DVector<f64>>,
{
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(f0.clone());
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys.axpy(h * a, kj, 1.0);
            }
        }
        if ys.iter().any(|v| !v.is_finite()) {
            return StepResult::Failed;
        }
        let Some(ks) = rhs(t + C[s] * h, &ys) else {
            return StepResult::Failed;
        };
        if ks.iter().any(|v| !v.is_finite()) {
            return StepResult::Failed;
        }
        if s == 6 {
            // FSAL: stage 7 is evaluated at the 5th-order solution
            let mut err_vec = DVector::zeros(y.len());
            for (j, kj) in k.iter().enumerate() {
                err_vec.axpy(h * E[j], kj, 1.0);
            }
            err_vec.axpy(h * E[6], &ks, 1.0);
            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = opts.atol + opts.rtol * y[i].abs().max(ys[i].abs());
                acc += (err_vec[i] / sc).powi(2);
            }
            let err = (acc / y.len() as f64).sqrt();
            return StepResult::Done { y_new: ys, f_new: ks, err };
        }
        k.push(ks);
    }
    unreachable!()
}

fn initial_step(y: &DVector<f64>, f: &DVector<f64>, span: f64, opts: &OdeOptions) -> f64 {
    let sc = |v: f64| opts.atol + opts.rtol * v.abs();
    let d0 = (y.iter().map(|v| (v / sc(*v)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let d1 = (y.iter().zip(f.iter()).map(|(v, d)| (d / sc(*v)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).min(0.1 * span.max(1e-12)).max(1e-12 * span)
}
