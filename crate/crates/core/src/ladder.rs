//! The one-dimensional two-leg ladder: a dephased XY chain on one leg and
//! its vectorised copy on the other, coupled by rungs.
//!
//! Links on a ladder with `N = 2·cells` sites per leg:
//! `x` bonds join `2n-1, 2n`, `y` bonds join `2n, 2n+1` (the last one wraps),
//! each present on both legs, plus one rung per site.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectrum::{compute_rapidities, sector_spectrum, SectorResult, StructureMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderGauge {
    pub cells: usize,
    /// Bottom-leg x bonds, one per cell.
    pub mu_x: Vec<i8>,
    /// Bottom-leg y bonds, one per cell; entry `n` joins `2n+2` and `2n+3` (1-based), wrapping.
    pub mu_y: Vec<i8>,
    pub mu_x_tilde: Vec<i8>,
    pub mu_y_tilde: Vec<i8>,
    /// Rungs, one per site.
    pub mu_z: Vec<i8>,
}

impl LadderGauge {
    pub fn uniform(cells: usize) -> Self {
        Self {
            cells,
            mu_x: vec![1; cells],
            mu_y: vec![1; cells],
            mu_x_tilde: vec![1; cells],
            mu_y_tilde: vec![1; cells],
            mu_z: vec![1; 2 * cells],
        }
    }

    pub fn n_sites(&self) -> usize {
        2 * self.cells
    }

    /// Number of gauge-inequivalent configurations, `2^(N+1)`.
    pub fn sector_count(cells: usize) -> usize {
        1 << (2 * cells + 1)
    }

    /// Gauge-fixed representative of sector `index`: every leg bond except the
    /// wrapping y bonds is +1, as is the first rung. Bit 0 sets the bottom
    /// wrapping bond, bit 1 the top one, bits 2.. the remaining rungs.
    pub fn from_sector(cells: usize, index: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Param("ladder needs at least one cell".into()));
        }
        if index >= Self::sector_count(cells) {
            return Err(Error::Index(format!("ladder sector {index} out of range")));
        }
        let mut g = Self::uniform(cells);
        let bit = |k: usize| if (index >> k) & 1 == 1 { -1 } else { 1 };
        g.mu_y[cells - 1] = bit(0);
        g.mu_y_tilde[cells - 1] = bit(1);
        for j in 1..2 * cells {
            g.mu_z[j] = bit(j + 1);
        }
        Ok(g)
    }

    /// Product of every link.
    pub fn link_product(&self) -> i8 {
        [&self.mu_x, &self.mu_y, &self.mu_x_tilde, &self.mu_y_tilde, &self.mu_z]
            .iter()
            .flat_map(|v| v.iter())
            .product()
    }

    /// Plaquette fluxes `Φ_j`, `j = 1..N`.
    pub fn fluxes(&self) -> Vec<i8> {
        let n = self.n_sites();
        (0..n)
            .map(|j| {
                let c = j / 2;
                let next = (j + 1) % n;
                if j % 2 == 0 {
                    self.mu_x[c] * self.mu_z[next] * self.mu_x_tilde[c] * self.mu_z[j]
                } else {
                    self.mu_y[c] * self.mu_z[next] * self.mu_y_tilde[c] * self.mu_z[j]
                }
            })
            .collect()
    }
}

/// Majorana order: `θ⁰_j` at `2j`, `θ̃⁰_j` at `2j+1`.
pub fn assemble_sk_structure_matrix(g: &LadderGauge, jx: f64, jy: f64, gamma: f64) -> StructureMatrix {
    let n = g.n_sites();
    let mut a = StructureMatrix::zeros(2 * n);
    for c in 0..g.cells {
        let (s0, s1, s2) = (2 * c, 2 * c + 1, (2 * c + 2) % n);
        a.add_bilinear(2 * s0, 2 * s1, C64::new(0.0, jx * g.mu_x[c] as f64));
        a.add_bilinear(2 * s0 + 1, 2 * s1 + 1, C64::new(0.0, -jx * g.mu_x_tilde[c] as f64));
        a.add_bilinear(2 * s1, 2 * s2, C64::new(0.0, jy * g.mu_y[c] as f64));
        a.add_bilinear(2 * s1 + 1, 2 * s2 + 1, C64::new(0.0, -jy * g.mu_y_tilde[c] as f64));
    }
    for j in 0..n {
        a.add_bilinear(2 * j, 2 * j + 1, C64::new(-gamma * g.mu_z[j] as f64, 0.0));
    }
    a.offset = C64::new(0.0, -gamma * n as f64);
    a
}

/// Fermion parity selected by the on-site constraints, in the same
/// convention as [`crate::spectrum::allowed_parity`].
pub fn ladder_allowed_parity(g: &LadderGauge) -> i8 {
    g.link_product()
}

pub fn ladder_sector_spectrum(g: &LadderGauge, jx: f64, jy: f64, gamma: f64) -> Result<SectorResult> {
    let a = assemble_sk_structure_matrix(g, jx, jy, gamma);
    let r = compute_rapidities(&a)?;
    sector_spectrum(&r, ladder_allowed_parity(g), a.offset)
}

/// Union of all sector spectra, `4^N` values.
pub fn ladder_full_spectrum(cells: usize, jx: f64, jy: f64, gamma: f64) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for s in 0..LadderGauge::sector_count(cells) {
        let g = LadderGauge::from_sector(cells, s)?;
        let res = ladder_sector_spectrum(&g, jx, jy, gamma)?;
        out.extend(res.full_spectrum.unwrap_or_default());
    }
    Ok(out)
}
