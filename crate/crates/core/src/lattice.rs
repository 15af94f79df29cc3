//! Square-lattice geometry with periodic boundaries.
//!
//! Sites carry 1-based coordinates `(x, y)`; `(x, y)` lies on sublattice A
//! when `x + y` is even. Internally a site is the index `(y-1)*nx + (x-1)`.

use crate::error::{Error, Result};

/// Bond directions emanating from an A site: +x, +y, -x, -y.
pub const DIRECTIONS: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeGeometry {
    nx: usize,
    ny: usize,
}

impl LatticeGeometry {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::Geometry { nx, ny });
        }
        Ok(Self { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Sites per layer.
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of A sites.
    pub fn n_cells(&self) -> usize {
        self.n() / 2
    }

    /// Number of independent gauge-invariant bits, 3N+1.
    pub fn sector_bits(&self) -> usize {
        3 * self.n() + 1
    }

    /// Site index from 1-based coordinates; wraps periodically.
    pub fn site(&self, x: i64, y: i64) -> usize {
        let xi = (x - 1).rem_euclid(self.nx as i64) as usize;
        let yi = (y - 1).rem_euclid(self.ny as i64) as usize;
        yi * self.nx + xi
    }

    pub fn coords(&self, r: usize) -> (i64, i64) {
        ((r % self.nx) as i64 + 1, (r / self.nx) as i64 + 1)
    }

    pub fn is_a(&self, r: usize) -> bool {
        let (x, y) = self.coords(r);
        (x + y) % 2 == 0
    }

    /// Site reached from `r` by the displacement `(dx, dy)`.
    pub fn shift(&self, r: usize, dx: i64, dy: i64) -> usize {
        let (x, y) = self.coords(r);
        self.site(x + dx, y + dy)
    }

    /// Neighbour of `r` along direction `delta` (1..=4).
    pub fn neighbor(&self, r: usize, delta: usize) -> usize {
        let (dx, dy) = direction_vector(delta);
        self.shift(r, dx, dy)
    }

    /// A sites in increasing site order.
    pub fn a_sites(&self) -> Vec<usize> {
        (0..self.n()).filter(|&r| self.is_a(r)).collect()
    }

    /// Position of an A site in [`Self::a_sites`].
    pub fn a_index(&self, r: usize) -> Option<usize> {
        if self.is_a(r) {
            Some(r / 2)
        } else {
            None
        }
    }

    /// The A site at position `a` of [`Self::a_sites`].
    pub fn a_site(&self, a: usize) -> usize {
        // A sites alternate with B sites along every row because nx is even,
        // and rows alternate their starting sublattice.
        let row = (2 * a) / self.nx;
        let col = (2 * a) % self.nx;
        let col = if row % 2 == 0 { col } else { col + 1 };
        row * self.nx + col
    }
}

pub fn direction_vector(delta: usize) -> (i64, i64) {
    match delta {
        1 => (1, 0),
        2 => (0, 1),
        3 => (-1, 0),
        4 => (0, -1),
        _ => panic!("direction {delta} outside 1..=4"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_extents() {
        assert!(LatticeGeometry::new(3, 2).is_err());
        assert!(LatticeGeometry::new(0, 2).is_err());
        assert!(LatticeGeometry::new(2, 4).is_ok());
    }

    #[test]
    fn a_site_enumeration_is_consistent() {
        for (nx, ny) in [(2, 2), (4, 4), (6, 4), (2, 6)] {
            let g = LatticeGeometry::new(nx, ny).unwrap();
            let a = g.a_sites();
            assert_eq!(a.len(), g.n_cells());
            for (k, &r) in a.iter().enumerate() {
                assert_eq!(g.a_site(k), r);
                assert_eq!(g.a_index(r), Some(k));
            }
            assert!(g.is_a(g.site(1, 1)));
        }
    }

    #[test]
    fn neighbours_of_a_are_b() {
        let g = LatticeGeometry::new(4, 4).unwrap();
        for r in g.a_sites() {
            for d in DIRECTIONS {
                assert!(!g.is_a(g.neighbor(r, d)));
            }
        }
        assert_eq!(g.neighbor(g.site(4, 1), 1), g.site(1, 1));
        assert_eq!(g.neighbor(g.site(1, 1), 4), g.site(1, 4));
    }
}
