//! Separatrix loops based at D = (1, 0), solved from the closed-form relations.
//!
//! In signed roots uᵢ the loop of orbit constant a splits at the focus into two
//! legs. On the outbound leg u₁ ∈ (σ, 1) and u₂ ∈ (−σ, σ) both decrease from
//! (1, σ) at D to (σ, −σ) at the focus; the inbound leg is its image under
//! u → −u, a → −a, s → −s. Each sample therefore reduces to a 2×2 system
//!
//!   ln G(u₁) + ln G(u₂) = 2σσ̄²a,   Ψ(u₁) + Ψ(u₂) = target,
//!
//! with Ψ(u) = u − u³/3 (arc length) or ln|(u−σ)/(u+σ)| (time), solved by damped
//! Newton with continuation and a nested bisection fallback.

use nalgebra::DVector;

use super::{BranchSigns, GarnierModel};
use crate::error::{Error, Result};
use crate::morse::SolutionFamily;
use crate::path::{ParameterKind, PathSample};

/// Which chart a path or field is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chart {
    Elliptic,
    Cartesian,
}

/// Where a sample sits on the loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Leg {
    /// D to the focus, upper half plane.
    Outbound,
    Focus,
    /// Focus back to D, lower half plane.
    Inbound,
    Vacuum,
}

#[derive(Clone, Copy, PartialEq)]
enum Relation {
    /// Arc length measured from the focus.
    Arc,
    /// Remaining arc length to the vacuum.
    ArcToVacuum,
    Time,
}

/// ln(1 + eᶻ) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One outbound sample in logistic coordinates. Root i has range length Lᵢ
/// (L₁ = 1 − σ, L₂ = 2σ), focus offset xᵢ = Lᵢ·logistic(ξᵢ) and vacuum offset
/// cᵢ = Lᵢ·logistic(−ξᵢ), so u₁ = σ + x₁ = 1 − c₁ and u₂ = x₂ − σ = σ − c₂.
/// Both offsets and their logarithms stay exact at either end of the leg.
#[derive(Clone, Copy, Debug)]
struct Offsets {
    x: [f64; 2],
    c: [f64; 2],
    ln_x: [f64; 2],
    ln_c: [f64; 2],
}

struct Eqs {
    sigma: f64,
    b: f64,
    big_a: f64,
    rel: Relation,
    target: f64,
}

impl Eqs {
    fn lengths(&self) -> [f64; 2] {
        [1.0 - self.sigma, 2.0 * self.sigma]
    }

    fn offsets(&self, xi: [f64; 2]) -> Offsets {
        let l = self.lengths();
        let f = |k: usize| {
            let (lx, lc) = (l[k].ln() - softplus(-xi[k]), l[k].ln() - softplus(xi[k]));
            (l[k] * logistic(xi[k]), l[k] * logistic(-xi[k]), lx, lc)
        };
        let (x1, c1, lx1, lc1) = f(0);
        let (x2, c2, lx2, lc2) = f(1);
        Offsets { x: [x1, x2], c: [c1, c2], ln_x: [lx1, lx2], ln_c: [lc1, lc2] }
    }

    fn ln_g(&self, o: &Offsets) -> [f64; 2] {
        let s = self.sigma;
        let (x, c) = (o.x, o.c);
        [
            o.ln_x[0] - (2.0 * s + x[0]).ln() + s * ((1.0 + s + x[0]).ln() - o.ln_c[0]),
            o.ln_c[1] - o.ln_x[1] + s * ((1.0 - s + x[1]).ln() - (1.0 - s + c[1]).ln()),
        ]
    }

    fn psi(&self, o: &Offsets) -> f64 {
        let (s, b) = (self.sigma, self.b);
        let (x, c) = (o.x, o.c);
        match self.rel {
            Relation::Arc => x[0] * (b - s * x[0] - x[0] * x[0] / 3.0) + x[1] * (b + s * x[1] - x[1] * x[1] / 3.0),
            Relation::ArcToVacuum => c[0] * c[0] * (1.0 - c[0] / 3.0) + c[1] * (b + s * c[1] - c[1] * c[1] / 3.0),
            Relation::Time => o.ln_x[0] - (2.0 * s + x[0]).ln() + o.ln_c[1] - o.ln_x[1],
        }
    }

    /// Jacobian of (ln G sum, Ψ) in ξ; dxᵢ/dξᵢ = xᵢcᵢ/Lᵢ.
    fn jacobian(&self, o: &Offsets) -> [[f64; 2]; 2] {
        let (s, b) = (self.sigma, self.b);
        let (x, c, l) = (o.x, o.c, self.lengths());
        let w = [x[0] * c[0] / l[0], x[1] * c[1] / l[1]];
        let g = [
            2.0 * s * b / (l[0] * (2.0 * s + x[0]) * (1.0 + s + x[0])),
            -2.0 * s * b / (l[1] * (1.0 - s + c[1]) * (1.0 - s + x[1])),
        ];
        // dΦ/du = (1 − u)(1 + u)
        let phi1 = c[0] * (1.0 + s + x[0]) * w[0];
        let phi2 = (1.0 - s + c[1]) * (1.0 - s + x[1]) * w[1];
        let p = match self.rel {
            Relation::Arc => [phi1, phi2],
            Relation::ArcToVacuum => [-phi1, -phi2],
            // d(ln c₂ − ln x₂)/dξ₂ = −1
            Relation::Time => [2.0 * s * c[0] / (l[0] * (2.0 * s + x[0])), -1.0],
        };
        [g, p]
    }

    fn residual(&self, xi: [f64; 2]) -> ([f64; 2], Offsets) {
        let o = self.offsets(xi);
        let g = self.ln_g(&o);
        ([g[0] + g[1] - self.big_a, self.psi(&o) - self.target], o)
    }

    fn merit(r: [f64; 2]) -> f64 {
        r[0].abs().max(r[1].abs())
    }

    fn newton(&self, mut xi: [f64; 2]) -> Option<Offsets> {
        let (mut r, mut o) = self.residual(xi);
        let mut m = Self::merit(r);
        for _ in 0..100 {
            if m < 1e-14 {
                return Some(o);
            }
            let j = self.jacobian(&o);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !det.is_finite() || det == 0.0 {
                return None;
            }
            let d = [(-r[0] * j[1][1] + r[1] * j[0][1]) / det, (r[0] * j[1][0] - r[1] * j[0][0]) / det];
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = [xi[0] + lambda * d[0], xi[1] + lambda * d[1]];
                let (rc, oc) = self.residual(cand);
                let mc = Self::merit(rc);
                if mc.is_finite() && mc < m {
                    let moved = (lambda * d[0]).abs().max((lambda * d[1]).abs());
                    xi = cand;
                    r = rc;
                    o = oc;
                    m = mc;
                    accepted = true;
                    if moved < 1e-15 {
                        return (m < 1e-10).then_some(o);
                    }
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                // no decrease possible at this resolution
                return (m < 1e-10).then_some(o);
            }
        }
        (m < 1e-10).then_some(o)
    }

    fn xi_of(o: &Offsets) -> [f64; 2] {
        [o.ln_x[0] - o.ln_c[0], o.ln_x[1] - o.ln_c[1]]
    }

    /// ξ₁ with ln G(u₁) = v; increasing in ξ₁.
    fn inner(&self, v: f64, xi2: f64) -> f64 {
        let (mut lo, mut hi) = (-700.0, 700.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let o = self.offsets([mid, xi2]);
            if self.ln_g(&o)[0] < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Nested bisection along the orbit: ξ₂ outside, ξ₁ from the orbit relation.
    fn bisection(&self) -> [f64; 2] {
        let objective = |xi2: f64| {
            let o2 = self.offsets([0.0, xi2]);
            let xi1 = self.inner(self.big_a - self.ln_g(&o2)[1], xi2);
            let o = self.offsets([xi1, xi2]);
            (self.psi(&o) - self.target, xi1)
        };
        let (mut lo, mut hi) = (-700.0, 700.0);
        let f_lo = objective(lo).0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (f, _) = objective(mid);
            if (f > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x2 = 0.5 * (lo + hi);
        [objective(x2).1, x2]
    }

    fn solve(&self, guess: Option<[f64; 2]>, at: f64) -> Result<Offsets> {
        if let Some(g) = guess {
            if let Some(o) = self.newton(g) {
                return Ok(o);
            }
        }
        let start = self.bisection();
        if let Some(o) = self.newton(start) {
            return Ok(o);
        }
        let (r, o) = self.residual(start);
        if Self::merit(r) < 1e-8 {
            return Ok(o);
        }
        Err(Error::RootNotConverged(at))
    }
}

/// A separatrix loop sampled in signed roots with rates d u/dτ.
#[derive(Clone, Debug)]
pub struct SeparatrixPath {
    pub model: GarnierModel,
    pub a: f64,
    /// Time offset t₀; zero for arc-length paths.
    pub t0: f64,
    pub kind: ParameterKind,
    pub grid: Vec<f64>,
    pub roots: Vec<[f64; 2]>,
    /// Outbound-frame distances of (u₁, u₂) from their focus values (σ, −σ).
    pub offsets: Vec<[f64; 2]>,
    /// Distances of the same roots from their vacuum values (1, σ).
    pub vacuum_offsets: Vec<[f64; 2]>,
    pub rates: Vec<[f64; 2]>,
    pub legs: Vec<Leg>,
}

/// Products of the roots evaluated from the focus offsets without cancellation.
#[derive(Clone, Copy)]
struct Pieces {
    /// u₁² − σ²
    p1: f64,
    /// σ² − u₂²
    p2: f64,
    /// μ₁, μ₂
    m1: f64,
    m2: f64,
    /// μ₁ − μ₂
    diff: f64,
    /// Jacobi factor in μ
    factor: f64,
}

fn pieces(model: &GarnierModel, x: [f64; 2], c: [f64; 2]) -> Pieces {
    let s = model.sigma();
    let p1 = x[0] * (2.0 * s + x[0]);
    let p2 = x[1] * c[1];
    let m1 = c[0] * (1.0 + s + x[0]);
    let m2 = (1.0 - s + c[1]) * (1.0 - s + x[1]);
    let diff = -(x[0] + x[1]) * (x[0] + c[1]);
    Pieces { p1, p2, m1, m2, diff, factor: m1 * (m1 + p2) + m2 * p2 }
}

fn big_a(model: &GarnierModel, a: f64) -> f64 {
    2.0 * model.sigma() * model.sigma_bar_sq() * a
}

/// (tanh(A/2), sech(A/2)), the focus direction for A = 2σσ̄²a.
fn focus_direction(big_a: f64) -> (f64, f64) {
    let h = 0.5 * big_a;
    (h.tanh(), 1.0 / h.cosh())
}

/// Velocity of the a-trajectory at the focus it crosses (speed σ̄² = √(2(0 − U))).
pub fn focus_velocity(model: &GarnierModel, a: f64) -> DVector<f64> {
    let (c, s) = focus_direction(big_a(model, a));
    DVector::from_vec(vec![c, -s]) * model.sigma_bar_sq()
}

/// du/dτ away from the focus and the vacuum; `per_arc` divides by the Jacobi factor.
/// Even in u, so the same on both legs.
fn root_rates(model: &GarnierModel, o: &Offsets, per_arc: bool) -> [f64; 2] {
    let k = pieces(model, o.x, o.c);
    let den = if per_arc { k.diff * k.factor } else { k.diff };
    [k.p1 * k.m1 / den, k.p2 * k.m2 / den]
}

fn focus_rates(model: &GarnierModel, a: f64, per_arc: bool) -> [f64; 2] {
    // outbound one-sided limit; δ₁/δ₂ → e^A
    let b = model.sigma_bar_sq();
    let big = big_a(model, a);
    let p = 1.0 / (1.0 + (-big).exp());
    let q = 1.0 / (1.0 + big.exp());
    let k = if per_arc { 1.0 / b } else { b };
    [-p * k, -q * k]
}

fn roots_of(model: &GarnierModel, o: &Offsets, outbound: bool) -> [f64; 2] {
    let s = model.sigma();
    // take each root from its nearer end
    let u1 = if o.x[0] < o.c[0] { s + o.x[0] } else { 1.0 - o.c[0] };
    let u2 = if o.x[1] < o.c[1] { o.x[1] - s } else { s - o.c[1] };
    let u = [u1, u2];
    if outbound {
        u
    } else {
        [-u[0], -u[1]]
    }
}

struct Builder {
    roots: Vec<[f64; 2]>,
    offsets: Vec<[f64; 2]>,
    vacuum_offsets: Vec<[f64; 2]>,
    rates: Vec<[f64; 2]>,
    legs: Vec<Leg>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            roots: Vec::with_capacity(n),
            offsets: Vec::with_capacity(n),
            vacuum_offsets: Vec::with_capacity(n),
            rates: Vec::with_capacity(n),
            legs: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, u: [f64; 2], x: [f64; 2], c: [f64; 2], rate: [f64; 2], leg: Leg) {
        self.roots.push(u);
        self.offsets.push(x);
        self.vacuum_offsets.push(c);
        self.rates.push(rate);
        self.legs.push(leg);
    }

    fn finish(self, model: &GarnierModel, a: f64, t0: f64, kind: ParameterKind, grid: &[f64]) -> SeparatrixPath {
        SeparatrixPath {
            model: *model,
            a,
            t0,
            kind,
            grid: grid.to_vec(),
            roots: self.roots,
            offsets: self.offsets,
            vacuum_offsets: self.vacuum_offsets,
            rates: self.rates,
            legs: self.legs,
        }
    }
}

/// Samples this close to the focus (relative to the parameter scale) are snapped onto it.
const FOCUS_SNAP: f64 = 1e-14;

/// Jacobi-arc-length loop of orbit constant a on `s_grid` ⊂ [−L/2, L/2], focus at s = 0.
pub fn solve_separatrix_geodesic(model: &GarnierModel, a: f64, s_grid: &[f64]) -> Result<SeparatrixPath> {
    check_inputs(a, s_grid)?;
    let half = 0.5 * model.loop_length();
    let (s, b) = (model.sigma(), model.sigma_bar_sq());
    let tol = 1e-13 * half;
    let mut out = Builder::new(s_grid.len());
    let mut guess: [Option<[f64; 2]>; 2] = [None, None];
    for &v in s_grid {
        if v.abs() > half + tol {
            return Err(Error::OutOfRange { value: v, lo: -half, hi: half });
        }
        if v.abs() >= half - tol {
            out.push(if v < 0.0 { [1.0, s] } else { [-1.0, -s] }, [1.0 - s, 2.0 * s], [0.0, 0.0], [f64::NAN; 2], Leg::Vacuum);
            continue;
        }
        if v.abs() <= FOCUS_SNAP * half {
            out.push([s, -s], [0.0, 0.0], [1.0 - s, 2.0 * s], focus_rates(model, a, true), Leg::Focus);
            continue;
        }
        let outbound = v < 0.0;
        let slot = usize::from(!outbound);
        // the outbound leg has Ψ-sum = −s; the reflected inbound one has Ψ-sum = s.
        // Near D the remaining length is the better-conditioned target.
        let (rel, target) = if v.abs() < 0.5 * half { (Relation::Arc, v.abs()) } else { (Relation::ArcToVacuum, half - v.abs()) };
        let eqs = Eqs { sigma: s, b, big_a: big_a(model, if outbound { a } else { -a }), rel, target };
        let o = eqs.solve(guess[slot], v)?;
        guess[slot] = Some(Eqs::xi_of(&o));
        out.push(roots_of(model, &o, outbound), o.x, o.c, root_rates(model, &o, true), if outbound { Leg::Outbound } else { Leg::Inbound });
    }
    Ok(out.finish(model, a, 0.0, ParameterKind::ArcLength, s_grid))
}

/// Newton trajectory of orbit constant a and time offset t₀; the focus is crossed at t = σ̄²a − t₀.
pub fn solve_separatrix_trajectory(model: &GarnierModel, a: f64, t0: f64, t_grid: &[f64]) -> Result<SeparatrixPath> {
    check_inputs(a, t_grid)?;
    if !t0.is_finite() {
        return Err(Error::InvalidInput(format!("time offset must be finite, got {t0}")));
    }
    let (s, b) = (model.sigma(), model.sigma_bar_sq());
    let t_focus = b * a - t0;
    let snap = FOCUS_SNAP * (1.0 + t_focus.abs());
    let mut out = Builder::new(t_grid.len());
    let mut guess: [Option<[f64; 2]>; 2] = [None, None];
    for &t in t_grid {
        if (t - t_focus).abs() <= snap {
            out.push([s, -s], [0.0, 0.0], [1.0 - s, 2.0 * s], focus_rates(model, a, false), Leg::Focus);
            continue;
        }
        let outbound = t < t_focus;
        let slot = usize::from(!outbound);
        // inbound samples are outbound samples of −a at τ = −t − 2t₀
        let (aa, tau) = if outbound { (a, t) } else { (-a, -t - 2.0 * t0) };
        let eqs = Eqs { sigma: s, b, big_a: big_a(model, aa), rel: Relation::Time, target: 2.0 * s * (tau + t0) };
        let o = eqs.solve(guess[slot], t)?;
        guess[slot] = Some(Eqs::xi_of(&o));
        out.push(roots_of(model, &o, outbound), o.x, o.c, root_rates(model, &o, false), if outbound { Leg::Outbound } else { Leg::Inbound });
    }
    Ok(out.finish(model, a, t0, ParameterKind::Time, t_grid))
}

fn check_inputs(a: f64, grid: &[f64]) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(format!("orbit constant must be finite, got {a}")));
    }
    if !crate::grid::is_strictly_increasing(grid) {
        return Err(Error::InvalidInput("parameter grid must be strictly increasing".into()));
    }
    Ok(())
}

impl SeparatrixPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Branch signs (signs of the momenta) at sample i.
    pub fn signs(&self, i: usize) -> BranchSigns {
        BranchSigns::from_roots(self.roots[i])
    }

    fn kappa(&self, i: usize) -> f64 {
        match self.legs[i] {
            Leg::Inbound => -1.0,
            _ => 1.0,
        }
    }

    fn pieces(&self, i: usize) -> Pieces {
        pieces(&self.model, self.offsets[i], self.vacuum_offsets[i])
    }

    pub fn elliptic_points(&self) -> Vec<DVector<f64>> {
        (0..self.len())
            .map(|i| {
                let k = self.pieces(i);
                DVector::from_vec(vec![k.m1, k.m2])
            })
            .collect()
    }

    pub fn cartesian_points(&self) -> Vec<DVector<f64>> {
        let s = self.model.sigma();
        (0..self.len())
            .map(|i| {
                let (u, k) = (self.roots[i], self.pieces(i));
                let q2 = self.kappa(i) * (k.p1 * k.p2).max(0.0).sqrt() / s;
                DVector::from_vec(vec![u[0] * u[1] / s, q2])
            })
            .collect()
    }

    /// Cartesian image of a root-space vector du at sample i.
    fn cartesian_of(&self, i: usize, du: [f64; 2]) -> DVector<f64> {
        let s = self.model.sigma();
        let (u, k) = (self.roots[i], self.pieces(i));
        let d1 = (u[1] * du[0] + u[0] * du[1]) / s;
        let d2 = self.kappa(i) * (u[0] * du[0] * k.p2 - u[1] * du[1] * k.p1) / (s * (k.p1 * k.p2).sqrt());
        DVector::from_vec(vec![d1, d2])
    }

    fn cartesian_tangent(&self, i: usize) -> DVector<f64> {
        let per_arc = self.kind == ParameterKind::ArcLength;
        match self.legs[i] {
            Leg::Vacuum => DVector::from_vec(vec![f64::NAN; 2]),
            Leg::Focus => {
                let (c, sn) = focus_direction(big_a(&self.model, self.a));
                let b = self.model.sigma_bar_sq();
                let k = if per_arc { 1.0 / b } else { b };
                DVector::from_vec(vec![c * k, -sn * k])
            }
            _ => self.cartesian_of(i, self.rates[i]),
        }
    }

    fn elliptic_tangent(&self, i: usize) -> DVector<f64> {
        let (u, du) = (self.roots[i], self.rates[i]);
        DVector::from_vec(vec![-2.0 * u[0] * du[0], -2.0 * u[1] * du[1]])
    }

    fn energies(&self, points: &[DVector<f64>], tangents: &[DVector<f64>], chart: Chart) -> Vec<f64> {
        let m = &self.model;
        points
            .iter()
            .zip(tangents)
            .enumerate()
            .map(|(i, (p, v))| {
                if self.legs[i] == Leg::Vacuum {
                    return f64::NAN;
                }
                let (speed2, factor) = match chart {
                    Chart::Cartesian => (v.norm_squared(), m.jacobi_factor(p)),
                    Chart::Elliptic => match super::elliptic_metric(m, p) {
                        Ok(g) => ((v.transpose() * g * v)[0], super::elliptic_jacobi_factor(m, p)),
                        Err(_) => return f64::NAN,
                    },
                };
                match self.kind {
                    ParameterKind::Time => 0.5 * speed2 - 0.5 * factor,
                    ParameterKind::ArcLength => 0.5 * factor * speed2,
                }
            })
            .collect()
    }

    /// The loop as a path in the requested chart. Tangents at D are NaN (the
    /// parametrisation is singular there); elliptic tangents jump at the focus,
    /// which is the chart's corner.
    pub fn path(&self, chart: Chart) -> Result<PathSample> {
        let (points, tangents): (Vec<_>, Vec<_>) = match chart {
            Chart::Cartesian => (self.cartesian_points(), (0..self.len()).map(|i| self.cartesian_tangent(i)).collect()),
            Chart::Elliptic => (self.elliptic_points(), (0..self.len()).map(|i| self.elliptic_tangent(i)).collect()),
        };
        let energies = self.energies(&points, &tangents, chart);
        PathSample::new(self.kind, self.grid.clone(), points, tangents, energies)
    }

    /// Closed-form ∂/∂a of the loop at fixed parameter, in either chart.
    pub fn explicit_jacobi_field(&self, chart: Chart) -> Vec<DVector<f64>> {
        (0..self.len())
            .map(|i| {
                if matches!(self.legs[i], Leg::Vacuum | Leg::Focus) {
                    return DVector::zeros(2);
                }
                let (u, k) = (self.roots[i], self.pieces(i));
                // μ₁ − σ̄² = −p₁ and μ₂ − σ̄² = p₂
                let j = -2.0 * k.m1 * k.m2 * k.p1 * k.p2 / (k.diff * k.factor);
                // in roots the field is (j/2)(μ₂, −μ₁)
                let du = [0.5 * j * k.m2, -0.5 * j * k.m1];
                match chart {
                    Chart::Elliptic => DVector::from_vec(vec![-2.0 * u[0] * du[0], -2.0 * u[1] * du[1]]),
                    Chart::Cartesian => self.cartesian_of(i, du),
                }
            })
            .collect()
    }

    /// Index of the focus sample, if the grid contains it.
    pub fn focus_index(&self) -> Option<usize> {
        self.legs.iter().position(|l| *l == Leg::Focus)
    }
}

/// Pushes an elliptic vector field along the path into Cartesian components.
///
/// Uses the root form dμᵢ = −2uᵢ duᵢ, so it is undefined where a root
/// vanishes (the μ₂ = 1 fold) unless the field's component vanishes too.
pub fn push_forward_elliptic_field(path: &SeparatrixPath, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if field.len() != path.len() {
        return Err(Error::GridMismatch { expected: path.len(), found: field.len() });
    }
    let mut out = Vec::with_capacity(field.len());
    for (i, v) in field.iter().enumerate() {
        if matches!(path.legs[i], Leg::Vacuum | Leg::Focus) {
            out.push(DVector::zeros(2));
            continue;
        }
        let u = path.roots[i];
        let du = [-v[0] / (2.0 * u[0]), -v[1] / (2.0 * u[1])];
        if !du.iter().all(|x| x.is_finite()) {
            return Err(Error::BranchAmbiguity(path.grid[i]));
        }
        out.push(path.cartesian_of(i, du));
    }
    Ok(out)
}

/// The separatrix family a ↦ γ(·; a) as a [`SolutionFamily`]; `t0` fixes the
/// time offset for time-parametrised families and is ignored otherwise.
pub fn separatrix_family(model: &GarnierModel, kind: ParameterKind, chart: Chart, t0: f64) -> SolutionFamily {
    let m = *model;
    SolutionFamily::new(kind, move |a, grid| {
        let path = match kind {
            ParameterKind::ArcLength => solve_separatrix_geodesic(&m, a, grid)?,
            ParameterKind::Time => solve_separatrix_trajectory(&m, a, t0, grid)?,
        };
        Ok(match chart {
            Chart::Cartesian => path.cartesian_points(),
            Chart::Elliptic => path.elliptic_points(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garnier::{arclength_relation, orbit_residual, time_residual};
    use crate::grid::linspace;

    fn model() -> GarnierModel {
        GarnierModel::new(0.5).unwrap()
    }

    #[test]
    fn samples_satisfy_the_relations() {
        let m = model();
        let half = 0.5 * m.loop_length();
        let grid = linspace(-half * 0.999, half * 0.999, 301);
        for a in [-1.3, 0.0, 0.4, 2.0] {
            let p = solve_separatrix_geodesic(&m, a, &grid).unwrap();
            let mu = p.elliptic_points();
            for i in 0..p.len() {
                if p.legs[i] == Leg::Focus || (1.0 - mu[i][1]).abs() < 1e-10 {
                    continue;
                }
                let r = orbit_residual(&m, &mu[i], a, p.signs(i)).unwrap();
                assert!(r.abs() < 1e-9, "orbit residual {r} at {}", grid[i]);
                assert!((arclength_relation(&m, &mu[i], p.signs(i)) - grid[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_runs_from_the_vacuum_through_the_focus() {
        let m = model();
        let half = 0.5 * m.loop_length();
        let grid = linspace(-half, half, 201);
        let p = solve_separatrix_geodesic(&m, 0.7, &grid).unwrap();
        let q = p.cartesian_points();
        assert!((&q[0] - m.vacuum()).norm() < 1e-15 && (&q[200] - m.vacuum()).norm() < 1e-15);
        assert_eq!(p.legs[100], Leg::Focus);
        assert!((&q[100] - m.crossed_focus()).norm() < 1e-15);
        assert!(q[50][1] > 0.0 && q[150][1] < 0.0);
        // continuity away from D, where the Euclidean speed blows up
        for w in q[2..199].windows(2) {
            assert!((&w[1] - &w[0]).norm() < 0.1);
        }
    }

    #[test]
    fn trajectory_samples_satisfy_the_time_relation() {
        let m = model();
        let (a, t0) = (0.6, 0.25);
        let grid = linspace(-6.0, 6.0, 241);
        let p = solve_separatrix_trajectory(&m, a, t0, &grid).unwrap();
        let mu = p.elliptic_points();
        for i in 0..p.len() {
            if (1.0 - mu[i][1]).abs() < 1e-10 {
                continue;
            }
            let r = time_residual(&m, &mu[i], grid[i], t0, p.signs(i));
            if let Ok(r) = r {
                assert!(r.abs() < 1e-8, "time residual {r} at {}", grid[i]);
            }
        }
        let tf = 0.75 * a - t0;
        let i = grid.iter().position(|t| *t > tf).unwrap();
        // this grid hits t_F up to round-off, which snaps onto the focus
        assert_eq!(p.legs[i], Leg::Focus);
        assert!(p.legs[i - 1] == Leg::Outbound && p.legs[i + 1] == Leg::Inbound);
    }

    #[test]
    fn cartesian_tangents_match_differences() {
        let m = model();
        let half = 0.5 * m.loop_length();
        let grid = linspace(-half * 0.95, half * 0.95, 2001);
        let p = solve_separatrix_geodesic(&m, -0.4, &grid).unwrap();
        let path = p.path(Chart::Cartesian).unwrap();
        let fd = crate::grid::derivative_vec(&path.grid, &path.points).unwrap();
        for i in 5..grid.len() - 5 {
            assert!((&fd[i] - &path.tangents[i]).norm() < 1e-5 * (1.0 + path.tangents[i].norm()));
            // unit Jacobi speed
            assert!((path.energies[i] - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn focus_velocity_has_the_shell_speed() {
        let m = model();
        assert!((focus_velocity(&m, 1.7).norm() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn explicit_field_matches_the_linear_system() {
        let m = model();
        let half = 0.5 * m.loop_length();
        let grid = linspace(-half * 0.99, half * 0.99, 101);
        let p = solve_separatrix_geodesic(&m, 0.3, &grid).unwrap();
        let mu = p.elliptic_points();
        let field = p.explicit_jacobi_field(Chart::Elliptic);
        for i in 0..p.len() {
            if p.legs[i] == Leg::Focus || (1.0 - mu[i][1]).abs() < 1e-9 {
                continue;
            }
            let closed = crate::garnier::explicit_jacobi_field(&m, &mu[i], p.signs(i)).unwrap();
            assert!((closed - &field[i]).norm() < 1e-10);
        }
        let push = push_forward_elliptic_field(&p, &field).unwrap();
        let direct = p.explicit_jacobi_field(Chart::Cartesian);
        for (x, y) in push.iter().zip(&direct) {
            assert!((x - y).norm() < 1e-8 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn rejects_samples_outside_the_loop() {
        let m = model();
        assert!(matches!(solve_separatrix_geodesic(&m, 0.0, &[-3.0, 0.0]), Err(Error::OutOfRange { .. })));
        assert!(solve_separatrix_geodesic(&m, f64::NAN, &[0.0]).is_err());
    }
}
