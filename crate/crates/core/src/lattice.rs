//! Cubic lattices in three dimensions shared by the GP grid, the few-body
//! systems and the center-of-mass reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// `n^3` sites at positions `(i - (n-1)/2) * spacing` per axis.
/// Site index is `i + n*j + n^2*k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice3 {
    pub n: usize,
    pub spacing: f64,
    pub boundary: Boundary,
}

impl Lattice3 {
    pub fn new(n: usize, spacing: f64, boundary: Boundary) -> Result<Self> {
        if n == 0 || n > 1024 {
            return Err(Error::invalid(format!("lattice points per axis out of range: {n}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("lattice spacing must be positive"));
        }
        Ok(Lattice3 { n, spacing, boundary })
    }

    pub fn sites(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn coords(&self, s: usize) -> [usize; 3] {
        [s % self.n, (s / self.n) % self.n, s / (self.n * self.n)]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.n * (c[1] + self.n * c[2])
    }

    pub fn position(&self, s: usize) -> [f64; 3] {
        let half = (self.n as f64 - 1.0) / 2.0;
        let c = self.coords(s);
        [
            (c[0] as f64 - half) * self.spacing,
            (c[1] as f64 - half) * self.spacing,
            (c[2] as f64 - half) * self.spacing,
        ]
    }

    /// Neighbor of site s one step along `axis` in direction `dir` (+1 or -1);
    /// `None` when it leaves a Dirichlet box.
    pub fn neighbor(&self, s: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut c = self.coords(s);
        let n = self.n as i64;
        let t = c[axis] as i64 + dir;
        let t = match self.boundary {
            Boundary::Periodic => t.rem_euclid(n),
            Boundary::Dirichlet => {
                if t < 0 || t >= n {
                    return None;
                }
                t
            }
        };
        c[axis] = t as usize;
        Some(self.index(c))
    }

    /// Table of the six neighbors per site, ordered (+x, -x, +y, -y, +z, -z).
    pub fn neighbor_table(&self) -> Vec<[Option<u32>; 6]> {
        (0..self.sites())
            .map(|s| {
                let mut row = [None; 6];
                for axis in 0..3 {
                    row[2 * axis] = self.neighbor(s, axis, 1).map(|t| t as u32);
                    row[2 * axis + 1] = self.neighbor(s, axis, -1).map(|t| t as u32);
                }
                row
            })
            .collect()
    }

    /// Displacement from site b to site a in lattice units, minimum image when periodic.
    pub fn displacement(&self, a: usize, b: usize) -> [i64; 3] {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let n = self.n as i64;
        let mut d = [0i64; 3];
        for k in 0..3 {
            let mut t = ca[k] as i64 - cb[k] as i64;
            if self.boundary == Boundary::Periodic {
                t = t.rem_euclid(n);
                if 2 * t > n {
                    t -= n;
                }
            }
            d[k] = t;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_wrap_or_stop() {
        let p = Lattice3::new(4, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(p.neighbor(0, 0, -1), Some(3));
        let d = Lattice3::new(4, 1.0, Boundary::Dirichlet).unwrap();
        assert_eq!(d.neighbor(0, 0, -1), None);
        assert_eq!(d.neighbor(0, 2, 1), Some(16));
    }

    #[test]
    fn positions_are_centered() {
        let l = Lattice3::new(5, 0.5, Boundary::Dirichlet).unwrap();
        assert_eq!(l.position(l.index([2, 2, 2])), [0.0, 0.0, 0.0]);
        assert_eq!(l.position(0), [-1.0, -1.0, -1.0]);
    }

    #[test]
    fn minimum_image() {
        let l = Lattice3::new(6, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(l.displacement(l.index([5, 0, 0]), 0), [-1, 0, 0]);
        assert_eq!(l.displacement(l.index([3, 0, 0]), 0)[0].abs(), 3);
    }
}
