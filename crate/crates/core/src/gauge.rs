//! Z2 link variables on the bilayer, their gauge-invariant content, and the
//! canonical gauge that turns a flux configuration back into links.
//!
//! Link layout (flat index): bottom `u^δ_R` at `4a + δ - 1`, top `ũ^δ_R` at
//! `2N + 4a + δ - 1`, interlayer `u^5_r` at `4N + r`, where `a` is the A-site
//! position and `r` the site index.
//!
//! The canonical gauge fixes, in each layer, a spanning tree to `+1`: every
//! non-wrapping x-bond of every row, plus the non-wrapping y-bonds of column
//! `x = 1`. The remaining `N + 1` links per layer and `u^5_r` for
//! `r != (1,1)` are the free coordinates stored in a [`SectorId`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeField {
    geom: LatticeGeometry,
    links: Vec<i8>,
}

impl GaugeField {
    pub fn uniform(geom: LatticeGeometry) -> Self {
        Self { geom, links: vec![1; 5 * geom.n()] }
    }

    pub fn from_links(geom: LatticeGeometry, links: Vec<i8>) -> Result<Self> {
        if links.len() != 5 * geom.n() {
            return Err(Error::Dimension(format!(
                "gauge field needs {} links, got {}",
                5 * geom.n(),
                links.len()
            )));
        }
        if let Some(k) = links.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::Param(format!("link {k} is not ±1")));
        }
        Ok(Self { geom, links })
    }

    pub fn random<R: Rng + ?Sized>(geom: LatticeGeometry, rng: &mut R) -> Self {
        let links = (0..5 * geom.n()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        Self { geom, links }
    }

    /// The steady-state family: `u^5 = +1` and `ũ = -u`.
    pub fn ness_partner(bottom: &GaugeField) -> Self {
        let n = bottom.geom.n();
        let mut g = bottom.clone();
        for k in 0..2 * n {
            g.links[2 * n + k] = -g.links[k];
        }
        for k in 0..n {
            g.links[4 * n + k] = 1;
        }
        g
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    pub fn links(&self) -> &[i8] {
        &self.links
    }

    pub fn u(&self, a: usize, delta: usize) -> i8 {
        self.links[bottom_link(a, delta)]
    }

    pub fn u_top(&self, a: usize, delta: usize) -> i8 {
        self.links[top_link(&self.geom, a, delta)]
    }

    pub fn u5(&self, r: usize) -> i8 {
        self.links[inter_link(&self.geom, r)]
    }

    pub fn set(&mut self, flat: usize, value: i8) {
        assert!(value == 1 || value == -1);
        self.links[flat] = value;
    }

    pub fn flip(&mut self, flat: usize) {
        self.links[flat] = -self.links[flat];
    }

    /// Product of all 5N links.
    pub fn link_product(&self) -> i8 {
        self.links.iter().product()
    }

    /// Applies the gauge transformation generated at site `r` of one layer:
    /// every link touching that site (including the interlayer one) flips.
    pub fn gauge_transform(&mut self, r: usize, top: bool) {
        let geom = self.geom;
        let offset = if top { 2 * geom.n() } else { 0 };
        if let Some(a) = geom.a_index(r) {
            for d in 1..=4 {
                self.links[offset + bottom_link(a, d)] *= -1;
            }
        } else {
            for d in 1..=4 {
                let (dx, dy) = crate::lattice::direction_vector(d);
                let owner = geom.shift(r, -dx, -dy);
                let a = geom.a_index(owner).expect("B-site neighbours are A sites");
                self.links[offset + bottom_link(a, d)] *= -1;
            }
        }
        self.links[inter_link(&geom, r)] *= -1;
    }
}

pub fn bottom_link(a: usize, delta: usize) -> usize {
    4 * a + delta - 1
}

pub fn top_link(geom: &LatticeGeometry, a: usize, delta: usize) -> usize {
    2 * geom.n() + 4 * a + delta - 1
}

pub fn inter_link(geom: &LatticeGeometry, r: usize) -> usize {
    4 * geom.n() + r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FluxKind {
    PhiPlus,
    PhiMinus,
    PhiPlusTilde,
    PhiMinusTilde,
    PsiPlus,
    PsiMinus,
    OmegaPlus,
    OmegaMinus,
    Wx,
    Wy,
    WxTilde,
    WyTilde,
}

impl FluxKind {
    const PER_SITE: [FluxKind; 8] = [
        FluxKind::PhiPlus,
        FluxKind::PhiMinus,
        FluxKind::PhiPlusTilde,
        FluxKind::PhiMinusTilde,
        FluxKind::PsiPlus,
        FluxKind::PsiMinus,
        FluxKind::OmegaPlus,
        FluxKind::OmegaMinus,
    ];

    fn name(self) -> &'static str {
        match self {
            FluxKind::PhiPlus => "Phi+",
            FluxKind::PhiMinus => "Phi-",
            FluxKind::PhiPlusTilde => "Phit+",
            FluxKind::PhiMinusTilde => "Phit-",
            FluxKind::PsiPlus => "Psi+",
            FluxKind::PsiMinus => "Psi-",
            FluxKind::OmegaPlus => "Omega+",
            FluxKind::OmegaMinus => "Omega-",
            FluxKind::Wx => "Wx",
            FluxKind::Wy => "Wy",
            FluxKind::WxTilde => "Wxt",
            FluxKind::WyTilde => "Wyt",
        }
    }
}

/// One gauge-invariant product: `sign * prod(links)`.
#[derive(Debug, Clone)]
pub struct FluxTerm {
    pub kind: FluxKind,
    /// A-site position for plaquette quantities, `None` for Wilson phases.
    pub cell: Option<usize>,
    pub sign: i8,
    pub links: Vec<usize>,
}

/// Flux terms in the flat order used by [`FluxData::to_flat`].
pub fn flux_terms(geom: &LatticeGeometry) -> Vec<FluxTerm> {
    let nc = geom.n_cells();
    let mut terms = Vec::with_capacity(8 * nc + 4);
    for kind in FluxKind::PER_SITE {
        for a in 0..nc {
            terms.push(FluxTerm { kind, cell: Some(a), sign: 1, links: plaquette_links(geom, kind, a) });
        }
    }
    for (kind, top) in [
        (FluxKind::Wx, false),
        (FluxKind::Wy, false),
        (FluxKind::WxTilde, true),
        (FluxKind::WyTilde, true),
    ] {
        let along_x = matches!(kind, FluxKind::Wx | FluxKind::WxTilde);
        let (len, d1, d2) = if along_x { (geom.nx(), 1, 3) } else { (geom.ny(), 2, 4) };
        let mut links = Vec::new();
        for k in (1..=len as i64).step_by(2) {
            let r = if along_x { geom.site(k, 1) } else { geom.site(1, k) };
            let a = geom.a_index(r).unwrap();
            for d in [d1, d2] {
                links.push(if top { top_link(geom, a, d) } else { bottom_link(a, d) });
            }
        }
        let sign = if (len / 2) % 2 == 0 { 1 } else { -1 };
        terms.push(FluxTerm { kind, cell: None, sign, links });
    }
    terms
}

fn plaquette_links(geom: &LatticeGeometry, kind: FluxKind, a: usize) -> Vec<usize> {
    let r = geom.a_site(a);
    let cell = |dx: i64, dy: i64| geom.a_index(geom.shift(r, dx, dy)).unwrap();
    let b = |a: usize, d: usize| bottom_link(a, d);
    let t = |a: usize, d: usize| top_link(geom, a, d);
    let z = |dx: i64, dy: i64| inter_link(geom, geom.shift(r, dx, dy));
    match kind {
        FluxKind::PhiPlus => vec![b(a, 1), b(cell(1, 1), 4), b(cell(1, 1), 3), b(a, 2)],
        FluxKind::PhiMinus => vec![b(a, 4), b(cell(1, -1), 3), b(cell(1, -1), 2), b(a, 1)],
        FluxKind::PhiPlusTilde => vec![t(a, 1), t(cell(1, 1), 4), t(cell(1, 1), 3), t(a, 2)],
        FluxKind::PhiMinusTilde => vec![t(a, 4), t(cell(1, -1), 3), t(cell(1, -1), 2), t(a, 1)],
        FluxKind::PsiPlus => vec![b(a, 1), z(1, 0), t(a, 1), z(0, 0)],
        FluxKind::PsiMinus => vec![z(0, 0), t(a, 3), z(-1, 0), b(a, 3)],
        FluxKind::OmegaPlus => vec![b(a, 2), z(0, 1), t(a, 2), z(0, 0)],
        FluxKind::OmegaMinus => vec![z(0, 0), t(a, 4), z(0, -1), b(a, 4)],
        _ => unreachable!(),
    }
}

/// Gauge-invariant content of a gauge field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FluxData {
    pub geom: LatticeGeometry,
    pub phi_plus: Vec<i8>,
    pub phi_minus: Vec<i8>,
    pub phi_plus_tilde: Vec<i8>,
    pub phi_minus_tilde: Vec<i8>,
    pub psi_plus: Vec<i8>,
    pub psi_minus: Vec<i8>,
    pub omega_plus: Vec<i8>,
    pub omega_minus: Vec<i8>,
    /// `(W_x, W_y, W̃_x, W̃_y)`.
    pub wilson: [i8; 4],
}

impl FluxData {
    pub fn from_flat(geom: LatticeGeometry, v: &[i8]) -> Result<Self> {
        let nc = geom.n_cells();
        if v.len() != 8 * nc + 4 {
            return Err(Error::Dimension(format!("flux vector length {} != {}", v.len(), 8 * nc + 4)));
        }
        let part = |k: usize| v[k * nc..(k + 1) * nc].to_vec();
        Ok(Self {
            geom,
            phi_plus: part(0),
            phi_minus: part(1),
            phi_plus_tilde: part(2),
            phi_minus_tilde: part(3),
            psi_plus: part(4),
            psi_minus: part(5),
            omega_plus: part(6),
            omega_minus: part(7),
            wilson: [v[8 * nc], v[8 * nc + 1], v[8 * nc + 2], v[8 * nc + 3]],
        })
    }

    pub fn to_flat(&self) -> Vec<i8> {
        let mut v = Vec::with_capacity(8 * self.geom.n_cells() + 4);
        for part in [
            &self.phi_plus,
            &self.phi_minus,
            &self.phi_plus_tilde,
            &self.phi_minus_tilde,
            &self.psi_plus,
            &self.psi_minus,
            &self.omega_plus,
            &self.omega_minus,
        ] {
            v.extend_from_slice(part);
        }
        v.extend_from_slice(&self.wilson);
        v
    }

    fn get(&self, kind: FluxKind, a: usize) -> i8 {
        match kind {
            FluxKind::PhiPlus => self.phi_plus[a],
            FluxKind::PhiMinus => self.phi_minus[a],
            FluxKind::PhiPlusTilde => self.phi_plus_tilde[a],
            FluxKind::PhiMinusTilde => self.phi_minus_tilde[a],
            FluxKind::PsiPlus => self.psi_plus[a],
            FluxKind::PsiMinus => self.psi_minus[a],
            FluxKind::OmegaPlus => self.omega_plus[a],
            FluxKind::OmegaMinus => self.omega_minus[a],
            FluxKind::Wx => self.wilson[0],
            FluxKind::Wy => self.wilson[1],
            FluxKind::WxTilde => self.wilson[2],
            FluxKind::WyTilde => self.wilson[3],
        }
    }

    fn slot(&mut self, kind: FluxKind, a: usize) -> &mut i8 {
        match kind {
            FluxKind::PhiPlus => &mut self.phi_plus[a],
            FluxKind::PhiMinus => &mut self.phi_minus[a],
            FluxKind::PhiPlusTilde => &mut self.phi_plus_tilde[a],
            FluxKind::PhiMinusTilde => &mut self.phi_minus_tilde[a],
            FluxKind::PsiPlus => &mut self.psi_plus[a],
            FluxKind::PsiMinus => &mut self.psi_minus[a],
            FluxKind::OmegaPlus => &mut self.omega_plus[a],
            FluxKind::OmegaMinus => &mut self.omega_minus[a],
            FluxKind::Wx => &mut self.wilson[0],
            FluxKind::Wy => &mut self.wilson[1],
            FluxKind::WxTilde => &mut self.wilson[2],
            FluxKind::WyTilde => &mut self.wilson[3],
        }
    }

    /// Builds flux data from the independent entries (bottom Φ±, Ψ±, Ω±,
    /// W_x, W_y); the top-layer fluxes and W̃ follow from the cube and
    /// Wilson constraints.
    pub fn from_independent(geom: LatticeGeometry, independent: &[i8]) -> Result<Self> {
        let vocab = defect_vocabulary(&geom);
        if independent.len() != vocab.len() {
            return Err(Error::Dimension(format!(
                "independent flux vector length {} != {}",
                independent.len(),
                vocab.len()
            )));
        }
        let nc = geom.n_cells();
        let mut f = FluxData::from_flat(geom, &vec![1; 8 * nc + 4])?;
        for (entry, &v) in vocab.iter().zip(independent) {
            *f.slot(entry.kind, entry.cell.unwrap_or(0)) = v;
        }
        for a in 0..nc {
            f.phi_plus_tilde[a] = f.phi_plus[a] * side_product(&f, &cube_sides(&geom, FluxKind::PhiPlus, a));
            f.phi_minus_tilde[a] = f.phi_minus[a] * side_product(&f, &cube_sides(&geom, FluxKind::PhiMinus, a));
        }
        let (row, col) = wilson_rows(&geom);
        let psi: i8 = row.iter().map(|&a| f.psi_plus[a] * f.psi_minus[a]).product();
        let omega: i8 = col.iter().map(|&a| f.omega_plus[a] * f.omega_minus[a]).product();
        f.wilson[2] = f.wilson[0] * psi;
        f.wilson[3] = f.wilson[1] * omega;
        check_constraints(&f)?;
        Ok(f)
    }

    /// Values of the independent entries, in [`defect_vocabulary`] order.
    pub fn independent(&self) -> Vec<i8> {
        defect_vocabulary(&self.geom).iter().map(|e| self.get(e.kind, e.cell.unwrap_or(0))).collect()
    }

    /// Reference configuration with every independent datum equal to -1.
    pub fn fiducial(geom: LatticeGeometry) -> Self {
        let len = defect_vocabulary(&geom).len();
        Self::from_independent(geom, &vec![-1; len]).expect("fiducial data is consistent")
    }
}

/// The four vertical faces of the cube above a bottom plaquette.
fn cube_sides(geom: &LatticeGeometry, kind: FluxKind, a: usize) -> [(FluxKind, usize); 4] {
    let r = geom.a_site(a);
    let cell = |dx: i64, dy: i64| geom.a_index(geom.shift(r, dx, dy)).unwrap();
    match kind {
        FluxKind::PhiPlus => {
            let o = cell(1, 1);
            [(FluxKind::PsiPlus, a), (FluxKind::OmegaPlus, a), (FluxKind::PsiMinus, o), (FluxKind::OmegaMinus, o)]
        }
        FluxKind::PhiMinus => {
            let o = cell(1, -1);
            [(FluxKind::OmegaMinus, a), (FluxKind::PsiPlus, a), (FluxKind::PsiMinus, o), (FluxKind::OmegaPlus, o)]
        }
        _ => unreachable!(),
    }
}

fn side_product(f: &FluxData, sides: &[(FluxKind, usize)]) -> i8 {
    sides.iter().map(|&(k, c)| f.get(k, c)).product()
}

/// A-site positions on row `y = 1` and on column `x = 1`.
fn wilson_rows(geom: &LatticeGeometry) -> (Vec<usize>, Vec<usize>) {
    let row = (1..=geom.nx() as i64).step_by(2).map(|x| geom.a_index(geom.site(x, 1)).unwrap()).collect();
    let col = (1..=geom.ny() as i64).step_by(2).map(|y| geom.a_index(geom.site(1, y)).unwrap()).collect();
    (row, col)
}

pub fn compute_fluxes(g: &GaugeField) -> FluxData {
    let geom = g.geometry();
    let flat: Vec<i8> = flux_terms(&geom)
        .iter()
        .map(|t| t.sign * t.links.iter().map(|&l| g.links[l]).product::<i8>())
        .collect();
    FluxData::from_flat(geom, &flat).expect("flux term count matches layout")
}

/// Verifies the cube, layer-product and Wilson constraints, naming the
/// first violated one.
pub fn check_constraints(f: &FluxData) -> Result<()> {
    let geom = f.geom;
    let nc = geom.n_cells();
    for a in 0..nc {
        for (kind, tilde) in [(FluxKind::PhiPlus, FluxKind::PhiPlusTilde), (FluxKind::PhiMinus, FluxKind::PhiMinusTilde)] {
            let p = f.get(kind, a) * f.get(tilde, a) * side_product(f, &cube_sides(&geom, kind, a));
            if p != 1 {
                let (x, y) = geom.coords(geom.a_site(a));
                return Err(Error::Constraint {
                    family: "cube",
                    location: format!("cube above {}_{{{x},{y}}}", kind.name()),
                });
            }
        }
    }
    for (layer, plus, minus) in
        [("bottom", &f.phi_plus, &f.phi_minus), ("top", &f.phi_plus_tilde, &f.phi_minus_tilde)]
    {
        let p: i8 = plus.iter().chain(minus.iter()).product();
        if p != 1 {
            return Err(Error::Constraint { family: "layer product", location: format!("{layer} layer") });
        }
    }
    let (row, col) = wilson_rows(&geom);
    let psi: i8 = row.iter().map(|&a| f.psi_plus[a] * f.psi_minus[a]).product();
    if psi != f.wilson[0] * f.wilson[2] {
        return Err(Error::Constraint { family: "Wilson", location: "x loops: Psi product vs Wx*Wxt".into() });
    }
    let omega: i8 = col.iter().map(|&a| f.omega_plus[a] * f.omega_minus[a]).product();
    if omega != f.wilson[1] * f.wilson[3] {
        return Err(Error::Constraint { family: "Wilson", location: "y loops: Omega product vs Wy*Wyt".into() });
    }
    Ok(())
}

/// True when the data belong to the steady-state block: matching bottom and
/// top plaquette fluxes and every vertical plaquette equal to -1.
pub fn ness_flux_conditions(f: &FluxData) -> bool {
    f.phi_plus == f.phi_plus_tilde
        && f.phi_minus == f.phi_minus_tilde
        && f.psi_plus.iter().chain(&f.psi_minus).chain(&f.omega_plus).chain(&f.omega_minus).all(|&v| v == -1)
}

/// Bit-packed free coordinates of the canonical gauge; bit `1` means the
/// link equals -1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorId {
    len: usize,
    words: Vec<u64>,
}

impl SectorId {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_index(len: usize, index: u64) -> Self {
        let mut s = Self::zeros(len);
        if len > 0 {
            s.words[0] = if len >= 64 { index } else { index & ((1u64 << len) - 1) };
        }
        s
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            s.set(i, rng.gen());
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hex digits of the integer `sum(bit_i 2^i)`, most significant first.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let mut v = 0u32;
                for b in 0..4 {
                    let i = 4 * d + b;
                    if i < self.len && self.get(i) {
                        v |= 1 << b;
                    }
                }
                std::char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let mut s = Self::zeros(len);
        for (d, ch) in hex.chars().rev().enumerate() {
            let v = ch.to_digit(16).ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                if (v >> b) & 1 == 1 {
                    let i = 4 * d + b;
                    if i >= len {
                        return Err(Error::SectorLength { expected: len, found: i + 1 });
                    }
                    s.set(i, true);
                }
            }
        }
        Ok(s)
    }
}

/// Canonical gauge of a geometry together with the GF(2) solver that maps
/// flux data onto its free links.
#[derive(Debug, Clone)]
pub struct CanonicalGauge {
    geom: LatticeGeometry,
    free: Vec<usize>,
    terms: Vec<FluxTerm>,
    /// For each free link, the set of flux rows whose (sign-corrected) bits
    /// XOR to that link's bit.
    solution: Vec<Vec<u64>>,
}

impl CanonicalGauge {
    pub fn new(geom: LatticeGeometry) -> Self {
        let n = geom.n();
        let mut fixed = vec![false; 5 * n];
        for y in 1..=geom.ny() as i64 {
            for x in 1..geom.nx() as i64 {
                fixed[bond_link(&geom, geom.site(x, y), 1)] = true;
                fixed[2 * n + bond_link(&geom, geom.site(x, y), 1)] = true;
            }
        }
        for y in 1..geom.ny() as i64 {
            fixed[bond_link(&geom, geom.site(1, y), 2)] = true;
            fixed[2 * n + bond_link(&geom, geom.site(1, y), 2)] = true;
        }
        fixed[inter_link(&geom, geom.site(1, 1))] = true;
        let free: Vec<usize> = (0..5 * n).filter(|&l| !fixed[l]).collect();
        debug_assert_eq!(free.len(), geom.sector_bits());

        let terms = flux_terms(&geom);
        let solution = solve_free_links(&terms, &free, 5 * n);
        Self { geom, free, terms, solution }
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geom
    }

    /// Flat link indices of the free coordinates, in bit order.
    pub fn free_links(&self) -> &[usize] {
        &self.free
    }

    pub fn gauge_field(&self, s: &SectorId) -> Result<GaugeField> {
        if s.len() != self.free.len() {
            return Err(Error::SectorLength { expected: self.free.len(), found: s.len() });
        }
        let mut g = GaugeField::uniform(self.geom);
        for (i, &l) in self.free.iter().enumerate() {
            if s.get(i) {
                g.links[l] = -1;
            }
        }
        Ok(g)
    }

    pub fn fluxes_from_sector(&self, s: &SectorId) -> Result<FluxData> {
        Ok(compute_fluxes(&self.gauge_field(s)?))
    }

    pub fn sector_from_fluxes(&self, f: &FluxData) -> Result<SectorId> {
        let g = self.fix_gauge(f)?;
        let mut s = SectorId::zeros(self.free.len());
        for (i, &l) in self.free.iter().enumerate() {
            s.set(i, g.links[l] == -1);
        }
        Ok(s)
    }

    pub fn fix_gauge(&self, f: &FluxData) -> Result<GaugeField> {
        if f.geom != self.geom {
            return Err(Error::Dimension("flux data belongs to a different lattice".into()));
        }
        check_constraints(f)?;
        let flat = f.to_flat();
        let rhs: Vec<bool> = flat.iter().zip(&self.terms).map(|(&v, t)| v != t.sign).collect();
        let mut g = GaugeField::uniform(self.geom);
        for (k, &l) in self.free.iter().enumerate() {
            let mut bit = false;
            for (row, &b) in rhs.iter().enumerate() {
                if b && (self.solution[k][row / 64] >> (row % 64)) & 1 == 1 {
                    bit = !bit;
                }
            }
            if bit {
                g.links[l] = -1;
            }
        }
        let back = compute_fluxes(&g);
        if back != *f {
            return Err(Error::Constraint {
                family: "consistency",
                location: "flux data not realisable by any gauge field".into(),
            });
        }
        Ok(g)
    }

    /// Sector reached by a gauge field after gauge fixing.
    pub fn sector_of(&self, g: &GaugeField) -> Result<SectorId> {
        self.sector_from_fluxes(&compute_fluxes(g))
    }
}

/// Flat bottom-layer index of the bond between `r` and its neighbour along
/// `delta`, regardless of which endpoint is the A site.
fn bond_link(geom: &LatticeGeometry, r: usize, delta: usize) -> usize {
    if let Some(a) = geom.a_index(r) {
        bottom_link(a, delta)
    } else {
        let other = geom.neighbor(r, delta);
        let back = match delta {
            1 => 3,
            2 => 4,
            3 => 1,
            _ => 2,
        };
        bottom_link(geom.a_index(other).unwrap(), back)
    }
}

/// Gaussian elimination over GF(2): expresses every free link as a XOR of
/// flux rows.
fn solve_free_links(terms: &[FluxTerm], free: &[usize], n_links: usize) -> Vec<Vec<u64>> {
    let nrows = terms.len();
    let ncols = free.len();
    let mut col_of = vec![usize::MAX; n_links];
    for (c, &l) in free.iter().enumerate() {
        col_of[l] = c;
    }
    let rw = nrows.div_ceil(64);
    // Each row: coefficient bits over free columns, and the combination of
    // original rows it represents.
    let mut rows: Vec<(Vec<bool>, Vec<u64>)> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut coeff = vec![false; ncols];
            for &l in &t.links {
                if col_of[l] != usize::MAX {
                    coeff[col_of[l]] ^= true;
                }
            }
            let mut comb = vec![0u64; rw];
            comb[i / 64] |= 1 << (i % 64);
            (coeff, comb)
        })
        .collect();
    let mut pivot_row_of_col = vec![usize::MAX; ncols];
    let mut next = 0;
    for c in 0..ncols {
        let Some(p) = (next..nrows).find(|&r| rows[r].0[c]) else {
            continue;
        };
        rows.swap(next, p);
        for r in 0..nrows {
            if r != next && rows[r].0[c] {
                let (src, dst) = if r < next {
                    let (lo, hi) = rows.split_at_mut(next);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = rows.split_at_mut(r);
                    (&lo[next], &mut hi[0])
                };
                for k in 0..ncols {
                    dst.0[k] ^= src.0[k];
                }
                for k in 0..rw {
                    dst.1[k] ^= src.1[k];
                }
            }
        }
        pivot_row_of_col[c] = next;
        next += 1;
    }
    assert_eq!(next, ncols, "flux rows must determine every free link");
    pivot_row_of_col.iter().map(|&r| rows[r].1.clone()).collect()
}

/// Entry of the independent flux vocabulary used for defect bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectEntry {
    pub kind: FluxKind,
    pub cell: Option<usize>,
    pub name: String,
}

/// Independent gauge-invariant entries in report order: Φ+ by site, Φ-,
/// Ψ+, Ψ-, Ω+, Ω-, then W_x and W_y. Top-layer quantities are implied.
pub fn defect_vocabulary(geom: &LatticeGeometry) -> Vec<DefectEntry> {
    let mut v = Vec::with_capacity(3 * geom.n() + 2);
    for kind in [
        FluxKind::PhiPlus,
        FluxKind::PhiMinus,
        FluxKind::PsiPlus,
        FluxKind::PsiMinus,
        FluxKind::OmegaPlus,
        FluxKind::OmegaMinus,
    ] {
        for a in 0..geom.n_cells() {
            let (x, y) = geom.coords(geom.a_site(a));
            v.push(DefectEntry { kind, cell: Some(a), name: format!("{}_{{{x},{y}}}", kind.name()) });
        }
    }
    v.push(DefectEntry { kind: FluxKind::Wx, cell: None, name: "Wx".into() });
    v.push(DefectEntry { kind: FluxKind::Wy, cell: None, name: "Wy".into() });
    v
}

/// Number of independent entries in which `f` and `reference` differ.
pub fn defect_count(f: &FluxData, reference: &FluxData) -> Result<usize> {
    if f.geom != reference.geom {
        return Err(Error::Dimension("flux data from different lattices".into()));
    }
    Ok(f.independent().iter().zip(reference.independent()).filter(|(a, b)| **a != *b).count())
}

/// Names of the `+1` entries relative to the all-(-1) reference.
pub fn defect_names(f: &FluxData) -> Vec<String> {
    defect_vocabulary(&f.geom)
        .into_iter()
        .zip(f.independent())
        .filter(|(_, v)| *v == 1)
        .map(|(e, _)| e.name)
        .collect()
}

pub fn fluxes_from_defects(geom: LatticeGeometry, names: &[&str]) -> Result<FluxData> {
    let vocab = defect_vocabulary(&geom);
    let mut ind = vec![-1i8; vocab.len()];
    for name in names {
        let k = vocab
            .iter()
            .position(|e| e.name == *name)
            .ok_or_else(|| Error::Parse(format!("unknown defect name {name:?}")))?;
        if ind[k] == 1 {
            return Err(Error::Parse(format!("defect {name:?} listed twice")));
        }
        ind[k] = 1;
    }
    FluxData::from_independent(geom, &ind)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectList {
    pub nx: usize,
    pub ny: usize,
    pub defects: Vec<String>,
}

impl DefectList {
    pub fn from_fluxes(f: &FluxData) -> Self {
        Self { nx: f.geom.nx(), ny: f.geom.ny(), defects: defect_names(f) }
    }

    pub fn to_fluxes(&self) -> Result<FluxData> {
        let geom = LatticeGeometry::new(self.nx, self.ny)?;
        let names: Vec<&str> = self.defects.iter().map(String::as_str).collect();
        fluxes_from_defects(geom, &names)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}
