//! One function per subcommand. Each returns a report and whether its checks passed.

use maupertuis::dynamics::{energy, integrate_trajectory_on_grid};
use maupertuis::garnier::{
    focus_velocity, separatrix_family, singular_geodesic_arclength, singular_geodesic_tangent,
    singular_solution_time, singular_velocity_time, solve_separatrix_geodesic, solve_separatrix_trajectory,
};
use maupertuis::grid::linspace;
use maupertuis::morse::{
    conjugate_points, default_base_exclusion, jacobi_field_from_family, morse_index, morse_inequality_check,
    morse_series, orthogonal_amplitude, poincare_series_loop_sphere, record_location, separatrix_morse_series,
};
use maupertuis::path::concat_fields;
use maupertuis::riemann::integrate_geodesic_on_grid;
use maupertuis::variation::{free_action_identity_residual, length_identity_residual, random_bumps};
use maupertuis::{
    Chart, ConjugatePointRecord, DVector, FormalSeries, GarnierModel, MetricField, NaturalSystem, ParameterKind,
    PathSample, SeparatrixPath,
};
use serde_json::{json, Value};

use crate::config::{BranchName, ModelConfig, RunConfig, TrajectorySpec};
use crate::error::CliError;
use crate::output::Report;

type Outcome = Result<(Report, bool), CliError>;

/// Position, velocity, their time, and the default window.
type NewtonStart = (DVector<f64>, DVector<f64>, f64, (f64, f64));

fn v2(x: [f64; 2]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

/// Uniform grid over the configured span, or `default` where unset. A zero-length
/// span or zero samples gives an empty grid.
fn grid(cfg: &RunConfig, default: (f64, f64)) -> Vec<f64> {
    let a = cfg.grid.start.unwrap_or(default.0);
    let b = cfg.grid.end.unwrap_or(default.1);
    if a == b {
        return Vec::new();
    }
    linspace(a, b, cfg.grid.samples)
}

fn trajectory(cfg: &RunConfig) -> Result<TrajectorySpec, CliError> {
    match (&cfg.trajectory, &cfg.model) {
        (Some(t), _) => Ok(t.clone()),
        (None, ModelConfig::Garnier { .. }) => Ok(TrajectorySpec::Singular(BranchName::EdgeQ2zero)),
        (None, ModelConfig::Custom(_)) => {
            Err(CliError::Config("custom models need trajectory.state initial data".into()))
        }
    }
}

fn focus_time(m: &GarnierModel, a: f64, t0: f64) -> f64 {
    m.sigma_bar_sq() * a - t0
}

fn newton_start(
    cfg: &RunConfig,
    sys: &NaturalSystem,
    traj: &TrajectorySpec,
) -> Result<NewtonStart, CliError> {
    Ok(match traj {
        TrajectorySpec::Singular(b) => {
            let m = cfg.garnier()?;
            let p = singular_solution_time(&m, b.branch(), 0.0, 0.0);
            let v = singular_velocity_time(&m, b.branch(), 0.0, 0.0);
            (p, v, 0.0, (-3.0, 3.0))
        }
        TrajectorySpec::Separatrix { a, t0 } => {
            let m = cfg.garnier()?;
            let tf = focus_time(&m, *a, *t0);
            (m.crossed_focus(), focus_velocity(&m, *a), tf, (tf - 3.0, tf + 3.0))
        }
        TrajectorySpec::State { position, direction, t0 } => {
            let p = v2(*position);
            let v = sys.velocity_on_shell(&p, &v2(*direction))?;
            (p, v, *t0, (*t0, *t0 + 5.0))
        }
    })
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let sys = cfg.system()?;
    let traj = trajectory(cfg)?;
    let (p0, v0, t0, span) = newton_start(cfg, &sys, &traj)?;
    let grid = grid(cfg, span);
    let mut r = Report::new(&["t", "q1", "q2", "v1", "v2", "energy"]);
    r.note("energy_level", sys.energy_level());
    if grid.is_empty() {
        return Ok((r, true));
    }
    let path = integrate_trajectory_on_grid(&sys, &p0, &v0, t0, &grid, cfg.tolerances.integrator)?;
    let mut drift: f64 = 0.0;
    for i in 0..path.len() {
        let (p, v) = (&path.points[i], &path.tangents[i]);
        drift = drift.max((path.energies[i] - sys.energy_level()).abs());
        r.push(vec![path.grid[i].into(), p[0].into(), p[1].into(), v[0].into(), v[1].into(), path.energies[i].into()]);
    }
    r.note("max_energy_drift", drift);
    Ok((r, true))
}

pub fn geodesic(cfg: &RunConfig, closed_form: Option<BranchName>) -> Outcome {
    if let Some(b) = closed_form {
        return closed_form_table(cfg, b);
    }
    let sys = cfg.system()?;
    match trajectory(cfg)? {
        TrajectorySpec::Separatrix { a, .. } => separatrix_geodesic(cfg, a),
        TrajectorySpec::Singular(b) => {
            let m = cfg.garnier()?;
            let hi = half_range(&m, b);
            let p = singular_geodesic_arclength(&m, b.branch(), 0.0)?;
            let v = singular_geodesic_tangent(&m, b.branch(), 0.0)?;
            let g = checked_grid(cfg, 0.9 * hi, hi)?;
            integrated_geodesic(cfg, &sys, &p, &v, 0.0, g)
        }
        TrajectorySpec::State { position, direction, t0 } => {
            let p = v2(position);
            let h = sys.jacobi_metric();
            let d = v2(direction);
            let v = &d / h.norm(&p, &d)?;
            let g = grid(cfg, (t0, t0 + 1.0));
            integrated_geodesic(cfg, &sys, &p, &v, t0, g)
        }
    }
}

fn half_range(m: &GarnierModel, b: BranchName) -> f64 {
    match b {
        BranchName::EdgeQ2zero => m.edge_length() / 2.0,
        BranchName::EdgeEllipse => m.ellipse_length() / 2.0,
    }
}

/// Grid inside [-hi, hi]; anything outside is a config error.
fn checked_grid(cfg: &RunConfig, default: f64, hi: f64) -> Result<Vec<f64>, CliError> {
    let g = grid(cfg, (-default, default));
    if g.first().is_some_and(|s| *s < -hi) || g.last().is_some_and(|s| *s > hi) {
        return Err(CliError::Config(format!("grid leaves the arc-length range [-{hi}, {hi}]")));
    }
    Ok(g)
}

fn closed_form_table(cfg: &RunConfig, b: BranchName) -> Outcome {
    let m = cfg.garnier()?;
    let hi = half_range(&m, b);
    let g = checked_grid(cfg, hi, hi)?;
    let mut r = Report::new(&["s", "q1", "q2"]);
    r.note("branch", b.name());
    r.note("arc_length_range", 2.0 * hi);
    for s in g {
        let q = singular_geodesic_arclength(&m, b.branch(), s)?;
        r.push(vec![s.into(), q[0].into(), q[1].into()]);
    }
    Ok((r, true))
}

fn integrated_geodesic(
    cfg: &RunConfig,
    sys: &NaturalSystem,
    p: &DVector<f64>,
    v: &DVector<f64>,
    s0: f64,
    g: Vec<f64>,
) -> Outcome {
    let mut r = Report::new(&["s", "q1", "q2", "t1", "t2", "energy"]);
    if g.is_empty() {
        return Ok((r, true));
    }
    let path = integrate_geodesic_on_grid(&sys.jacobi_metric(), p, v, s0, &g, cfg.tolerances.integrator)?;
    for i in 0..path.len() {
        let (q, t) = (&path.points[i], &path.tangents[i]);
        r.push(vec![path.grid[i].into(), q[0].into(), q[1].into(), t[0].into(), t[1].into(), path.energies[i].into()]);
    }
    Ok((r, true))
}

fn separatrix_geodesic(cfg: &RunConfig, a: f64) -> Outcome {
    let m = cfg.garnier()?;
    let half = m.loop_length() / 2.0;
    let g = checked_grid(cfg, half, half)?;
    let mut r = Report::new(&["s", "q1", "q2", "mu1", "mu2"]);
    r.note("a", a);
    r.note("loop_length", m.loop_length());
    if g.is_empty() {
        return Ok((r, true));
    }
    let sol = solve_separatrix_geodesic(&m, a, &g)?;
    for (i, (q, mu)) in sol.cartesian_points().iter().zip(sol.elliptic_points()).enumerate() {
        r.push(vec![g[i].into(), q[0].into(), q[1].into(), mu[0].into(), mu[1].into()]);
    }
    Ok((r, true))
}

/// Newton extremals examined by hessian-check.
fn extremals(cfg: &RunConfig) -> Result<Vec<(String, PathSample)>, CliError> {
    let sys = cfg.system()?;
    let check = |g: &[f64]| {
        if g.len() < 9 {
            Err(CliError::Config("hessian-check needs at least 9 grid samples".into()))
        } else {
            Ok(())
        }
    };
    let m = match &cfg.model {
        ModelConfig::Garnier { .. } => cfg.garnier()?,
        ModelConfig::Custom(_) => {
            let traj = trajectory(cfg)?;
            let (p, v, t0, span) = newton_start(cfg, &sys, &traj)?;
            let g = grid(cfg, span);
            check(&g)?;
            let path = integrate_trajectory_on_grid(&sys, &p, &v, t0, &g, cfg.tolerances.integrator)?;
            return Ok(vec![("state".into(), path)]);
        }
    };
    let g = grid(cfg, (-3.0, 3.0));
    check(&g)?;
    let mut out = Vec::new();
    for b in [BranchName::EdgeQ2zero, BranchName::EdgeEllipse] {
        let points: Vec<_> = g.iter().map(|t| singular_solution_time(&m, b.branch(), *t, 0.0)).collect();
        let tangents: Vec<_> = g.iter().map(|t| singular_velocity_time(&m, b.branch(), *t, 0.0)).collect();
        let energies = points.iter().zip(&tangents).map(|(p, v)| energy(&sys, p, v)).collect::<Result<_, _>>()?;
        let path = PathSample::new(ParameterKind::Time, g.clone(), points, tangents, energies)?;
        out.push((b.name().to_string(), path));
    }
    for &a in &cfg.orbits {
        // The window slides with the focus crossing so that every loop is seen through F.
        let tf = focus_time(&m, a, 0.0);
        let shifted: Vec<f64> = g.iter().map(|t| t + tf).collect();
        let path = solve_separatrix_trajectory(&m, a, 0.0, &shifted)?.path(Chart::Cartesian)?;
        out.push((format!("separatrix a={a}"), path));
    }
    Ok(out)
}

pub fn hessian_check(cfg: &RunConfig) -> Outcome {
    let sys = cfg.system()?;
    let threshold = cfg.tolerances.threshold;
    let mut r = Report::new(&[
        "extremal", "variation", "identity", "lhs", "rhs", "correction", "residual", "relative", "pass",
    ]);
    let mut worst = [0.0f64; 2];
    for (name, path) in extremals(cfg)? {
        for (k, v) in random_bumps(&path, cfg.seed, cfg.variations).iter().enumerate() {
            let checks = [
                ("free_action", free_action_identity_residual(&sys, &path, v)?),
                ("length", length_identity_residual(&sys, &path, v)?),
            ];
            for (slot, (identity, c)) in checks.into_iter().enumerate() {
                let rel = c.relative();
                worst[slot] = worst[slot].max(rel);
                r.push(vec![
                    name.as_str().into(),
                    k.into(),
                    identity.into(),
                    c.lhs.into(),
                    c.rhs.into(),
                    c.correction.into(),
                    c.residual.into(),
                    rel.into(),
                    if rel < threshold { "true" } else { "false" }.into(),
                ]);
            }
        }
    }
    let passed = worst.iter().all(|w| *w < threshold);
    r.note("threshold", threshold);
    r.note("seed", cfg.seed);
    r.note("max_relative_free_action", worst[0]);
    r.note("max_relative_length", worst[1]);
    r.note("verdict", if passed { "pass" } else { "fail" });
    Ok((r, passed))
}

struct Loop {
    sol: SeparatrixPath,
    path: PathSample,
    explicit: Vec<DVector<f64>>,
}

fn s_loop(m: &GarnierModel, a: f64, n: usize) -> Result<Loop, CliError> {
    let half = m.loop_length() / 2.0;
    let sol = solve_separatrix_geodesic(m, a, &linspace(-half, half, n))?;
    let path = sol.path(Chart::Cartesian)?;
    let explicit = sol.explicit_jacobi_field(Chart::Cartesian);
    Ok(Loop { sol, path, explicit })
}

fn iterate(path: &PathSample, field: &[DVector<f64>], copies: usize) -> Result<(PathSample, Vec<DVector<f64>>), CliError> {
    let (mut p, mut j) = (path.clone(), field.to_vec());
    for _ in 1..copies {
        p = p.concat(path)?;
        j = concat_fields(&j, field);
    }
    Ok((p, j))
}

fn samples(cfg: &RunConfig) -> Result<usize, CliError> {
    if cfg.grid.samples < 8 {
        return Err(CliError::Config("grid.samples must be at least 8 for loop computations".into()));
    }
    Ok(cfg.grid.samples)
}

pub fn jacobi_field(cfg: &RunConfig) -> Outcome {
    let m = cfg.garnier()?;
    let h = m.system().jacobi_metric();
    let n = samples(cfg)?;
    let family = separatrix_family(&m, ParameterKind::ArcLength, Chart::Cartesian, 0.0);
    let mut r = Report::new(&["a", "s", "q1", "q2", "j1", "j2", "family_j1", "family_j2", "amplitude"]);
    let mut gaps = Vec::new();
    for &a in &cfg.orbits {
        let l = s_loop(&m, a, n)?;
        let fam = jacobi_field_from_family(&family, a, &l.path.grid)?;
        let amp = orthogonal_amplitude(&h, &l.path, &l.explicit)?;
        let scale = l.explicit.iter().fold(0.0f64, |s, j| s.max(j.norm())).max(f64::MIN_POSITIVE);
        let gap = l.explicit.iter().zip(&fam).fold(0.0f64, |g, (x, y)| g.max((x - y).norm())) / scale;
        gaps.push(json!([a, gap]));
        for i in 0..l.path.len() {
            let (q, j, f) = (&l.path.points[i], &l.explicit[i], &fam[i]);
            r.push(vec![
                a.into(),
                l.path.grid[i].into(),
                q[0].into(),
                q[1].into(),
                j[0].into(),
                j[1].into(),
                f[0].into(),
                f[1].into(),
                amp[i].into(),
            ]);
        }
    }
    r.note("relative_family_gap", Value::Array(gaps));
    Ok((r, true))
}

fn located(path: &PathSample, records: &[ConjugatePointRecord]) -> Vec<(ConjugatePointRecord, DVector<f64>)> {
    records.iter().map(|rec| (rec.clone(), record_location(path, rec))).collect()
}

fn s_records(h: &MetricField, l: &Loop, copies: usize) -> Result<Vec<(ConjugatePointRecord, DVector<f64>)>, CliError> {
    let (p, j) = iterate(&l.path, &l.explicit, copies)?;
    Ok(located(&p, &conjugate_points(h, &p, &j, default_base_exclusion(&p))?))
}

fn t_records(cfg: &RunConfig, m: &GarnierModel, a: f64) -> Result<Vec<(ConjugatePointRecord, DVector<f64>)>, CliError> {
    let tf = focus_time(m, a, 0.0);
    let w = cfg.grid.time_half_width;
    let g = linspace(tf - w, tf + w, cfg.grid.time_samples);
    let path = solve_separatrix_trajectory(m, a, 0.0, &g)?.path(Chart::Cartesian)?;
    let family = separatrix_family(m, ParameterKind::Time, Chart::Cartesian, 0.0);
    let field = jacobi_field_from_family(&family, a, &g)?;
    let (p, j) = iterate(&path, &field, cfg.copies)?;
    Ok(located(&p, &conjugate_points(&MetricField::euclidean(2), &p, &j, default_base_exclusion(&p))?))
}

pub fn conjugate_points_cmd(cfg: &RunConfig) -> Outcome {
    let m = cfg.garnier()?;
    let h = m.system().jacobi_metric();
    let n = samples(cfg)?;
    let mut r = Report::new(&["a", "copies", "picture", "k", "parameter", "q1", "q2", "multiplicity", "margin"]);
    let mut agree = true;
    let mut worst_gap: f64 = 0.0;
    for &a in &cfg.orbits {
        let s = s_records(&h, &s_loop(&m, a, n)?, cfg.copies)?;
        let t = t_records(cfg, &m, a)?;
        if s.len() != t.len() {
            agree = false;
        } else {
            for ((_, x), (_, y)) in s.iter().zip(&t) {
                worst_gap = worst_gap.max((x - y).norm());
            }
        }
        for (picture, recs) in [("s", &s), ("t", &t)] {
            for (k, (rec, q)) in recs.iter().enumerate() {
                r.push(vec![
                    a.into(),
                    cfg.copies.into(),
                    picture.into(),
                    k.into(),
                    rec.parameter_value.into(),
                    q[0].into(),
                    q[1].into(),
                    (rec.multiplicity as usize).into(),
                    rec.detection_margin.into(),
                ]);
            }
        }
    }
    // Locations in the two pictures agree to the time window's reach towards D.
    let bound = 1e-2;
    let passed = agree && worst_gap < bound;
    r.note("counts_agree", agree);
    r.note("max_location_gap", worst_gap);
    r.note("location_bound", bound);
    r.note("verdict", if passed { "pass" } else { "fail" });
    Ok((r, passed))
}

pub fn morse(cfg: &RunConfig) -> Outcome {
    let m = cfg.garnier()?;
    let h = m.system().jacobi_metric();
    let n = samples(cfg)?;
    let d = cfg.depth;
    let trunc = 2 * d + 1;
    let mut r = Report::new(&["a", "copies", "k", "s", "q1", "q2", "multiplicity"]);
    let mut indices: Vec<Option<usize>> = vec![None; d + 1];
    let mut consistent = true;
    for &a in &cfg.orbits {
        let l = s_loop(&m, a, n)?;
        debug_assert!(l.sol.focus_index().is_some());
        for copies in 1..=d + 1 {
            let recs = s_records(&h, &l, copies)?;
            let idx: usize = morse_index(&recs.iter().map(|(rec, _)| rec.clone()).collect::<Vec<_>>());
            match indices[copies - 1] {
                None => indices[copies - 1] = Some(idx),
                Some(prev) if prev != idx => consistent = false,
                _ => {}
            }
            for (k, (rec, q)) in recs.iter().enumerate() {
                r.push(vec![
                    a.into(),
                    copies.into(),
                    k.into(),
                    rec.parameter_value.into(),
                    q[0].into(),
                    q[1].into(),
                    (rec.multiplicity as usize).into(),
                ]);
            }
        }
    }
    let indices: Vec<usize> = indices.into_iter().map(|i| i.unwrap_or(0)).collect();
    let circle = FormalSeries::new(vec![1, 1], trunc);
    let mut contributions = vec![(FormalSeries::one(trunc), 0)];
    contributions.extend(indices.iter().map(|i| (circle.clone(), *i)));
    let series = morse_series(&contributions, trunc)?;
    let expected = separatrix_morse_series(d)?;
    let p2 = poincare_series_loop_sphere(2, trunc)?;
    let p3 = poincare_series_loop_sphere(3, trunc)?;
    let equality = series == p2;
    let inequality = morse_inequality_check(&series, &p2)?;
    let passed = consistent && series == expected && equality && inequality;
    r.note("depth", d);
    r.note("indices", Value::Array(indices.iter().enumerate().map(|(i, x)| json!([i + 1, x])).collect()));
    r.note("indices_consistent", consistent);
    r.note("morse_series", series.coefficients().to_vec());
    r.note("poincare_n2", p2.coefficients().to_vec());
    r.note("poincare_n3", p3.coefficients().to_vec());
    r.note("equals_poincare_n2", equality);
    r.note("inequality_n2", inequality);
    r.note("verdict", if passed { "pass" } else { "fail" });
    Ok((r, passed))
}
