//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{conjugate_points_s, conjugate_points_t, garnier_extremals, model, separatrix_time_path, singular_path, v2};
use maupertuis::dynamics::{
    arclength_to_time, newton_residual, time_to_arclength, time_to_arclength_with, truncate_to_admissible, ReparamOptions,
};
use maupertuis::garnier::{
    cartesian_to_elliptic, elliptic_metric_field, elliptic_to_cartesian, separatrix_family, singular_geodesic_arclength,
    solve_separatrix_geodesic,
};
use maupertuis::grid::linspace;
use maupertuis::morse::{
    conjugate_points, jacobi_field_from_family, morse_inequality_check, poincare_series_loop_sphere, record_location,
    separatrix_morse_series,
};
use maupertuis::riemann::{fd_step, geodesic_residual, integrate_geodesic_on_grid};
use maupertuis::variation::{free_action_identity_residual, length_identity_residual, random_bumps, IdentityCheck};
use maupertuis::{Chart, DVector, GarnierModel, MetricField, NaturalSystem, ParameterKind, PathSample, SingularBranch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORBITS: [f64; 5] = [-1.2, -0.4, 0.0, 0.5, 1.5];
const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn edge_cubic() -> Outcome {
    let m = model();
    let h = m.system().jacobi_metric();
    let hi = 2.0 / 3.0 - 0.05;
    let grid = linspace(-hi, hi, 801);
    let geo = integrate_geodesic_on_grid(&h, &v2(0.0, 0.0), &v2(1.0, 0.0), 0.0, &grid, 1e-12).unwrap();
    let err = grid
        .iter()
        .zip(&geo.points)
        .map(|(s, p)| (p - singular_geodesic_arclength(&m, SingularBranch::EdgeQ2Zero, *s).unwrap()).norm())
        .fold(0.0, f64::max);
    outcome(err <= 1e-6, format!("max |q - q_cubic| = {err:.2e} on |s| <= {hi:.4}"))
}

fn arc_ranges() -> Outcome {
    let m = model();
    let sys = m.system();
    let opts = ReparamOptions { floor_ratio: 1e-300, ..ReparamOptions::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    let cases = [
        ("edge", SingularBranch::EdgeQ2Zero, m.edge_length(), 1.0),
        ("ellipse", SingularBranch::EdgeEllipse, m.ellipse_length(), m.sigma()),
    ];
    for (name, branch, expected, rate) in cases {
        let mut errs = Vec::new();
        // the approach to the vacua is e^{-rate |t|}, so spans grow in units of 1/rate
        for span in [2.0, 4.0, 8.0] {
            let path = singular_path(&m, branch, (-span / rate, span / rate), 4001);
            let arc = time_to_arclength_with(&sys, &path, &opts).unwrap();
            let (s0, s1) = arc.span();
            errs.push((s1 - s0 - expected).abs());
        }
        let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
        pass &= monotone && *errs.last().unwrap() <= 1e-4;
        parts.push(format!("{name} {expected:.6}: errors {:.1e} {:.1e} {:.1e}", errs[0], errs[1], errs[2]));
    }
    outcome(pass, parts.join("; "))
}

fn identity(which: &str, check: fn(&NaturalSystem, &PathSample, &maupertuis::VariationField) -> maupertuis::Result<IdentityCheck>) -> Outcome {
    let m = model();
    let sys = m.system();
    let worst = |n: usize| {
        garnier_extremals(&m, n)
            .iter()
            .map(|(_, p)| random_bumps(p, SEED, 10).iter().map(|v| check(&sys, p, v).unwrap().relative()).fold(0.0, f64::max))
            .collect::<Vec<_>>()
    };
    let coarse = worst(401);
    let fine = worst(801);
    let bound = fine.iter().cloned().fold(0.0, f64::max);
    let orders: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (c / f).log2()).collect();
    // integrator order 4; allow for the quadrature floor on the finest grid
    let converges = orders.iter().all(|o| *o > 3.0);
    outcome(
        bound <= 1e-5 && converges,
        format!("{which}: worst relative residual {bound:.2e}, observed orders {:.2} {:.2} {:.2}", orders[0], orders[1], orders[2]),
    )
}

fn field_equivalence() -> Outcome {
    let m = model();
    let half = m.loop_length() / 2.0;
    let grid = linspace(-half, half, 801);
    let family = separatrix_family(&m, ParameterKind::ArcLength, Chart::Cartesian, 0.0);
    let mut worst = 0.0f64;
    for a in ORBITS {
        let explicit = solve_separatrix_geodesic(&m, a, &grid).unwrap().explicit_jacobi_field(Chart::Cartesian);
        let diff = jacobi_field_from_family(&family, a, &grid).unwrap();
        let alpha = diff.iter().zip(&explicit).map(|(x, y)| x.dot(y)).sum::<f64>()
            / explicit.iter().map(|y| y.norm_squared()).sum::<f64>();
        let scale = alpha.abs() * explicit.iter().fold(0.0f64, |s, y| s.max(y.norm()));
        let err = diff.iter().zip(&explicit).map(|(x, y)| (x - y * alpha).norm()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    outcome(worst <= 1e-4, format!("worst normalised pointwise gap {worst:.2e} over {} orbits", ORBITS.len()))
}

fn principal_lift(m: &GarnierModel, q: &DVector<f64>) -> DVector<f64> {
    let mu = cartesian_to_elliptic(m, q).unwrap();
    elliptic_to_cartesian(m, &mu, [1.0, 1.0])
}

fn focus_records() -> Outcome {
    let m = model();
    let mut pass = true;
    let (mut lift, mut physical) = (0.0f64, 0.0f64);
    for a in ORBITS {
        let r = conjugate_points_s(&m, a, 1, 801);
        pass &= r.len() == 1;
        if let Some((_, q)) = r.first() {
            lift = lift.max((principal_lift(&m, q) - m.focus()).norm());
            physical = physical.max((q - m.crossed_focus()).norm());
        }
    }
    pass &= lift <= 1e-3 && physical <= 1e-3;
    outcome(pass, format!("one record per loop; distance to (sigma, 0) {lift:.1e} (principal lift), to the crossing (-sigma, 0) {physical:.1e}"))
}

fn pictures_agree() -> Outcome {
    let m = model();
    let mut pass = true;
    let mut gap = 0.0f64;
    let mut counts = Vec::new();
    for a in ORBITS {
        for copies in [1, 2] {
            let s = conjugate_points_s(&m, a, copies, 801);
            let t = conjugate_points_t(&m, a, copies, 20.0, 4001);
            pass &= s.len() == t.len() && s.len() == 2 * copies - 1;
            for (x, y) in s.iter().zip(&t) {
                gap = gap.max((&x.1 - &y.1).norm());
            }
            counts.push(format!("{}/{}", s.len(), t.len()));
        }
    }
    pass &= gap <= 1e-3;
    outcome(pass, format!("counts (h,s)/(g,U,t) {}; worst location gap {gap:.1e}", counts.join(" ")))
}

fn series() -> Outcome {
    let morse = separatrix_morse_series(3).unwrap();
    let geometric = poincare_series_loop_sphere(2, 7).unwrap();
    let s3 = poincare_series_loop_sphere(3, 7).unwrap();
    let exact = morse.coefficients() == [1i64; 8] && morse == geometric;
    let stored = s3.coefficients() == [1, 0, 1, 0, 1, 0, 1, 0];
    let inequality = morse_inequality_check(&morse, &geometric).unwrap();
    outcome(exact && stored && inequality, format!("M_t = {morse}; N=3 constant {s3}; M_t >= P_t: {inequality}"))
}

fn round_trips() -> Outcome {
    let m = model();
    let sys = m.system();
    let h = sys.jacobi_metric();
    let mut drift = 0.0f64;
    let mut geo = 0.0f64;
    let mut paths = vec![
        singular_path(&m, SingularBranch::EdgeQ2Zero, (-3.0, 3.0), 2401),
        singular_path(&m, SingularBranch::EdgeEllipse, (-3.0, 3.0), 2401),
    ];
    paths.extend(ORBITS.iter().map(|a| separatrix_time_path(&m, *a, 0.0, 3.0, 2401)));
    for path in &paths {
        // the s-map is taken on the admissible stretch, away from the vacua, where
        // the compressed s-grid limits any grid derivative of the tangents
        let path = &truncate_to_admissible(&sys, path, 1e-3);
        let arc = time_to_arclength(&sys, path).unwrap();
        let back = arclength_to_time(&sys, &arc).unwrap();
        let t0 = path.grid[0];
        for (t, tb) in path.grid.iter().zip(&back.grid) {
            drift = drift.max((t - t0 - tb).abs());
        }
        geo = geo.max(geodesic_residual(&h, &arc).unwrap());
        assert!(newton_residual(&sys, path).unwrap() < 1e-5);
    }
    outcome(drift <= 1e-8 && geo <= 1e-5, format!("t -> s -> t drift {drift:.1e}; h-geodesic residual {geo:.1e} on {} paths", paths.len()))
}

fn fd_ratio(g: &MetricField, points: &[DVector<f64>]) -> f64 {
    let fd = g.clone().finite_difference();
    points
        .iter()
        .map(|p| {
            let h = fd_step(p.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            g.christoffel(p).unwrap().max_abs_diff(&fd.christoffel(p).unwrap()) / (10.0 * h * h)
        })
        .fold(0.0, f64::max)
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut draw = |lo: [f64; 2], hi: [f64; 2]| -> Vec<DVector<f64>> {
        (0..20).map(|_| v2(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]))).collect()
    };
    let flat = fd_ratio(&MetricField::euclidean(2), &draw([-2.0, -2.0], [2.0, 2.0]));
    let sphere = fd_ratio(&MetricField::round_sphere(), &draw([0.2, -3.0], [2.9, 3.0]));
    let elliptic = fd_ratio(&elliptic_metric_field(&model()), &draw([0.05, 0.78], [0.7, 0.95]));

    let g = MetricField::round_sphere();
    let grid = linspace(0.0, 5.0, 1001);
    let p0 = v2(PI / 2.0, 0.0);
    let base = integrate_geodesic_on_grid(&g, &p0, &v2(0.0, 1.0), 0.0, &grid, 1e-12).unwrap();
    let eps = 1e-4;
    let member = |d: f64| integrate_geodesic_on_grid(&g, &p0, &v2(d.sin(), d.cos()), 0.0, &grid, 1e-12).unwrap().points;
    let (plus, minus) = (member(eps), member(-eps));
    let field: Vec<DVector<f64>> = plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * eps)).collect();
    let records = conjugate_points(&g, &base, &field, 0.05).unwrap();
    let conj = records.first().map(|r| (r.parameter_value - PI).abs()).unwrap_or(f64::INFINITY);
    let antipode = records.first().map(|r| (record_location(&base, r) - v2(PI / 2.0, PI)).norm()).unwrap_or(f64::INFINITY);

    let pass = flat <= 1.0 && sphere <= 1.0 && elliptic <= 1.0 && records.len() == 1 && conj <= 1e-4;
    outcome(
        pass,
        format!(
            "FD/analytic error over 10 h^2 (worst of 20): flat {flat:.2}, sphere {sphere:.2}, elliptic {elliptic:.2}; sphere conjugate |s - pi| = {conj:.1e} at {antipode:.1e} from the antipode"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("singular geodesic closed form", 1.0, edge_cubic),
        ("arc-length ranges", 5.0, arc_ranges),
        ("free-action identity", 30.0, || identity("free action", free_action_identity_residual)),
        ("length identity", 30.0, || identity("length", length_identity_residual)),
        ("Jacobi-field equivalence", 60.0, field_equivalence),
        ("conjugate point at the focus", f64::INFINITY, focus_records),
        ("Morse-theory equivalence", f64::INFINITY, pictures_agree),
        ("Morse series", f64::INFINITY, series),
        ("Newton/geodesic round trip", f64::INFINITY, round_trips),
        ("oracle cross-checks", f64::INFINITY, oracles),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let timely = within(elapsed, *limit);
        let pass = o.pass && timely;
        if !pass {
            failed += 1;
        }
        let budget = if limit.is_finite() { format!(" (budget {limit} s)") } else { String::new() };
        println!(
            "{} criterion {:>2} {name}: {} [{:.2} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
