use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid;

/// What the grid of a [`PathSample`] measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParameterKind {
    /// Physical time of a Newton trajectory.
    Time,
    /// Affine parameter of a geodesic; Jacobi arc length when the metric is a Jacobi metric.
    ArcLength,
}

/// A discretised curve with tangents and per-sample energy.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub kind: ParameterKind,
    pub grid: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub tangents: Vec<DVector<f64>>,
    /// T + U per sample (kinetic energy for pure geodesics).
    pub energies: Vec<f64>,
    /// Max |energy - reference| when the producer tracked one.
    pub energy_drift: Option<f64>,
}

impl PathSample {
    pub fn new(
        kind: ParameterKind,
        grid: Vec<f64>,
        points: Vec<DVector<f64>>,
        tangents: Vec<DVector<f64>>,
        energies: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        for len in [points.len(), tangents.len(), energies.len()] {
            if len != n {
                return Err(Error::GridMismatch { expected: n, found: len });
            }
        }
        if !grid::is_strictly_increasing(&grid) {
            return Err(Error::InvalidInput("path grid must be strictly increasing".into()));
        }
        Ok(PathSample { kind, grid, points, tangents, energies, energy_drift: None })
    }

    /// Build from points alone, reconstructing tangents by finite differences.
    pub fn from_points(kind: ParameterKind, grid: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        let tangents = grid::derivative_vec(&grid, &points)?;
        let energies = vec![f64::NAN; grid.len()];
        PathSample::new(kind, grid, points, tangents, energies)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.grid.first(), self.grid.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => (0.0, 0.0),
        }
    }

    /// Position at an arbitrary parameter by cubic Hermite interpolation.
    pub fn point_at(&self, tau: f64) -> DVector<f64> {
        grid::hermite_vec(&self.grid, &self.points, &self.tangents, tau)
    }

    /// Same curve with the grid translated by `offset`.
    pub fn shifted(&self, offset: f64) -> PathSample {
        let mut out = self.clone();
        out.grid.iter_mut().for_each(|g| *g += offset);
        out
    }

    /// Sub-path on the index range `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> PathSample {
        PathSample {
            kind: self.kind,
            grid: self.grid[lo..=hi].to_vec(),
            points: self.points[lo..=hi].to_vec(),
            tangents: self.tangents[lo..=hi].to_vec(),
            energies: self.energies[lo..=hi].to_vec(),
            energy_drift: self.energy_drift,
        }
    }

    /// Append `next` after this path, sharing the junction sample.
    ///
    /// `next` is translated so that its first grid value coincides with this
    /// path's last one; its first sample is dropped.
    pub fn concat(&self, next: &PathSample) -> Result<PathSample> {
        if next.kind != self.kind {
            return Err(Error::InvalidInput("cannot join paths of different parameter kinds".into()));
        }
        if self.is_empty() {
            return Ok(next.clone());
        }
        let offset = self.span().1 - next.span().0;
        let mut out = self.clone();
        for i in 1..next.len() {
            out.grid.push(next.grid[i] + offset);
            out.points.push(next.points[i].clone());
            out.tangents.push(next.tangents[i].clone());
            out.energies.push(next.energies[i]);
        }
        out.energy_drift = match (self.energy_drift, next.energy_drift) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        Ok(out)
    }

    /// `copies`-fold iterate of a closed path (junction samples shared).
    pub fn iterate(&self, copies: usize) -> Result<PathSample> {
        if copies == 0 {
            return Err(Error::InvalidInput("iterate needs at least one copy".into()));
        }
        let mut out = self.clone();
        for _ in 1..copies {
            out = out.concat(self)?;
        }
        Ok(out)
    }
}

/// Concatenate per-sample vector fields the same way [`PathSample::concat`] does.
pub fn concat_fields(first: &[DVector<f64>], next: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out = first.to_vec();
    out.extend(next.iter().skip(1).cloned());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PathSample {
        let g = grid::linspace(0.0, 1.0, n);
        let pts = g.iter().map(|t| DVector::from_vec(vec![*t, 2.0 * t])).collect();
        PathSample::from_points(ParameterKind::Time, g, pts).unwrap()
    }

    #[test]
    fn reconstructed_tangents_of_a_line() {
        let p = line(7);
        for t in &p.tangents {
            assert!((t[0] - 1.0).abs() < 1e-12 && (t[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_increasing_grids() {
        let pts = vec![DVector::zeros(1); 2];
        assert!(PathSample::from_points(ParameterKind::Time, vec![1.0, 1.0], pts).is_err());
    }

    #[test]
    fn iterate_shares_junctions() {
        let p = line(5);
        let q = p.iterate(3).unwrap();
        assert_eq!(q.len(), 13);
        assert_eq!(q.span(), (0.0, 3.0));
        assert!(grid::is_strictly_increasing(&q.grid));
    }

    #[test]
    fn hermite_point_is_exact_on_lines() {
        let p = line(4);
        let x = p.point_at(0.4);
        assert!((x[0] - 0.4).abs() < 1e-14 && (x[1] - 0.8).abs() < 1e-14);
    }
}
