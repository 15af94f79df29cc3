//! Per-sector quadratic Majorana form of the vectorised generator and its
//! many-body spectrum.
//!
//! Within a gauge sector the generator is `W = ξᵀ A ξ + offset` with `A`
//! complex antisymmetric. If `±β_j / 2` are the eigenvalues of `A`, the
//! many-body eigenvalues are `offset + Σ_j p_j β_j` with signs `p_j = ±1`.
//! The fermion parity of a sign pattern is `Π_j (i p_j β_j / 2) / Pf(A)`,
//! and a gauge field with link product `P` admits exactly the patterns of
//! parity `P`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gauge::{CanonicalGauge, GaugeField, SectorId};

/// Relative tolerance for matching eigenvalues into `±` pairs.
pub const PAIRING_TOL: f64 = 1e-8;
/// Zero-mode threshold relative to the largest rapidity modulus.
pub const ZERO_TOL: f64 = 1e-9;
/// Largest mode count accepted by [`sector_spectrum`].
pub const MAX_ENUMERATED_MODES: usize = 20;
/// Cluster radii, relative to `2‖A‖∞`, tried in turn when strict pairing fails.
/// An order-k exceptional point spreads its eigenvalues over `eps^(1/k)‖A‖`.
pub const DEFECTIVE_CLUSTER_RADII: [f64; 6] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 2e-2];
/// Cap on patterns visited by [`sector_gap`].
pub const MAX_VISITED_PATTERNS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub j: [f64; 4],
    pub gamma: f64,
}

impl CouplingParams {
    pub fn new(j: [f64; 4], gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Param(format!("gamma must be finite and nonnegative, got {gamma}")));
        }
        if j.iter().all(|&v| v == 0.0) || j.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param(format!("couplings must be finite and not all zero, got {j:?}")));
        }
        Ok(Self { j, gamma })
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    dim: usize,
    entries: Vec<C64>,
    pub offset: C64,
}

impl StructureMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim], offset: C64::new(0.0, 0.0) }
    }

    pub fn from_dense(dim: usize, entries: Vec<C64>, offset: C64) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        Ok(Self { dim, entries, offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// Adds the bilinear `c ξ_a ξ_b` to the form.
    pub fn add_bilinear(&mut self, a: usize, b: usize, c: C64) {
        self.entries[a * self.dim + b] += c * 0.5;
        self.entries[b * self.dim + a] -= c * 0.5;
    }

    /// Largest absolute row sum.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j).norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == -self.get(j, i)))
    }

    fn to_faer(&self) -> faer::Mat<C64> {
        faer::Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Eigenvalues of the matrix itself (not doubled).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if self.dim == 0 {
            return Ok(Vec::new());
        }
        self.to_faer().eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
    }
}

/// Majorana basis: `θ^0_r` at `2r`, `θ̃^0_r` at `2r + 1`.
pub fn assemble_structure_matrix(g: &GaugeField, p: &CouplingParams) -> StructureMatrix {
    let geom = g.geometry();
    let n = geom.n();
    let mut a = StructureMatrix::zeros(2 * n);
    for (k, r) in geom.a_sites().into_iter().enumerate() {
        for delta in 1..=4 {
            let s = geom.neighbor(r, delta);
            let jd = p.j[delta - 1];
            a.add_bilinear(2 * r, 2 * s, C64::new(0.0, jd * g.u(k, delta) as f64));
            a.add_bilinear(2 * r + 1, 2 * s + 1, C64::new(0.0, -jd * g.u_top(k, delta) as f64));
        }
    }
    for r in 0..n {
        a.add_bilinear(2 * r, 2 * r + 1, C64::new(-p.gamma * g.u5(r) as f64, 0.0));
    }
    a.offset = C64::new(0.0, -p.gamma * n as f64);
    a
}

/// Pfaffian by Parlett-Reid elimination with partial pivoting.
pub fn pfaffian(m: &StructureMatrix) -> C64 {
    let n = m.dim;
    if n % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let mut a = m.entries.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let mut pf = C64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        let kp = (k + 1..n)
            .max_by(|&x, &y| a[idx(x, k)].norm().total_cmp(&a[idx(y, k)].norm()))
            .unwrap();
        if kp != k + 1 {
            for c in 0..n {
                a.swap(idx(k + 1, c), idx(kp, c));
            }
            for r in 0..n {
                a.swap(idx(r, k + 1), idx(r, kp));
            }
            pf = -pf;
        }
        let piv = a[idx(k, k + 1)];
        if piv.norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|c| a[idx(k, c)] / piv).collect();
            let col: Vec<C64> = (k + 2..n).map(|r| a[idx(r, k + 1)]).collect();
            for (i, r) in (k + 2..n).enumerate() {
                for (j, c) in (k + 2..n).enumerate() {
                    a[idx(r, c)] += tau[i] * col[j] - col[i] * tau[j];
                }
            }
        }
        k += 2;
    }
    pf
}

#[derive(Debug, Clone, PartialEq)]
pub struct RapiditySet {
    /// Canonical representatives: `Im β ≤ 0`, ties broken by `Re β ≥ 0`.
    pub betas: Vec<C64>,
    /// Parity of the all-`p = -1` pattern; `None` when a vanishing rapidity
    /// makes parity irrelevant for the spectrum.
    pub vacuum_parity: Option<i8>,
    /// Largest pairing mismatch observed, relative to the spectral scale.
    pub pairing_error: f64,
    /// Set when pairing needed cluster averaging of a near-defective spectrum.
    pub defective: bool,
}

impl RapiditySet {
    pub fn scale(&self) -> f64 {
        self.betas.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }
}

fn canonical(b: C64, scale: f64) -> C64 {
    let tie = 1e-13 * scale.max(f64::MIN_POSITIVE);
    if b.im < -tie {
        b
    } else if b.im > tie {
        -b
    } else if b.re >= 0.0 {
        b
    } else {
        -b
    }
}

pub fn compute_rapidities(a: &StructureMatrix) -> Result<RapiditySet> {
    let ev: Vec<C64> = a.eigenvalues()?.into_iter().map(|e| e * 2.0).collect();
    let scale = ev.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let (betas, worst, defective) = match pair_eigenvalues(ev.clone(), scale) {
        Ok((b, w)) => (b, w, false),
        Err(strict) => {
            // Near an exceptional point a k-fold defective eigenvalue is only
            // resolved to eps^(1/k) while the cluster mean stays accurate to
            // eps. Clusters are formed on the mirror-symmetrised set, with the
            // smallest radius that lets every value find its partner.
            let norm = 2.0 * a.row_sum_norm();
            let mut found = None;
            for radius in DEFECTIVE_CLUSTER_RADII {
                let (merged, spread) = symmetric_cluster_average(&ev, radius * norm);
                if let Ok((b, _)) = pair_eigenvalues(merged, scale) {
                    found = Some((b, spread / norm.max(f64::MIN_POSITIVE), true));
                    break;
                }
            }
            found.ok_or(strict)?
        }
    };
    let vacuum_parity = vacuum_parity(a, &betas, scale);
    Ok(RapiditySet { betas, vacuum_parity, pairing_error: worst, defective })
}

fn pair_eigenvalues(mut ev: Vec<C64>, scale: f64) -> Result<(Vec<C64>, f64)> {
    let tol = PAIRING_TOL * scale.max(1.0);
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    let mut used = vec![false; ev.len()];
    let mut betas = Vec::with_capacity(ev.len() / 2);
    let mut worst = 0.0f64;
    for i in 0..ev.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..ev.len())
            .filter(|&k| !used[k])
            .min_by(|&x, &y| (ev[x] + ev[i]).norm().total_cmp(&(ev[y] + ev[i]).norm()));
        let Some(k) = partner else {
            return Err(Error::Pairing("odd number of eigenvalues".into()));
        };
        let miss = (ev[k] + ev[i]).norm();
        if miss > tol {
            return Err(Error::Pairing(format!(
                "eigenvalue {} has no partner within {tol:e} (closest miss {miss:e})",
                ev[i]
            )));
        }
        worst = worst.max(miss / scale.max(f64::MIN_POSITIVE));
        used[k] = true;
        betas.push(canonical((ev[i] - ev[k]) * 0.5, scale));
    }
    Ok((betas, worst))
}

/// Clusters `ev ∪ (−ev)` by single linkage of radius `radius` and replaces
/// each original value by the mean of its cluster, so that mirror clusters
/// have exactly opposite means. Returns the merged values and the largest
/// member-to-mean distance.
fn symmetric_cluster_average(ev: &[C64], radius: f64) -> (Vec<C64>, f64) {
    let all: Vec<C64> = ev.iter().cloned().chain(ev.iter().map(|z| -z)).collect();
    let n = all.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for k in i + 1..n {
            if (all[i] - all[k]).norm() <= radius {
                let (a, b) = (root(&mut label, i), root(&mut label, k));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| root(&mut label, i)).collect();
    let mut sums = vec![(C64::new(0.0, 0.0), 0usize); n];
    for i in 0..n {
        sums[roots[i]].0 += all[i];
        sums[roots[i]].1 += 1;
    }
    let mut spread = 0.0f64;
    let merged = (0..ev.len())
        .map(|i| {
            let (sum, count) = sums[roots[i]];
            let mean = sum / count as f64;
            spread = spread.max((ev[i] - mean).norm());
            mean
        })
        .collect();
    (merged, spread)
}

fn vacuum_parity(a: &StructureMatrix, betas: &[C64], scale: f64) -> Option<i8> {
    if betas.iter().any(|b| b.norm() <= 1e-7 * scale) || scale == 0.0 {
        return None;
    }
    let pf = pfaffian(a);
    let half_i = C64::new(0.0, -0.5);
    let num = betas.iter().fold(C64::new(1.0, 0.0), |acc, b| acc * (half_i * b));
    let ratio = num / pf;
    if (ratio.norm() - 1.0).abs() > 1e-6 || ratio.im.abs() > 1e-6 {
        return None;
    }
    Some(if ratio.re > 0.0 { 1 } else { -1 })
}

/// Parity selected by a gauge field: the product of all its links.
pub fn allowed_parity(g: &GaugeField) -> i8 {
    g.link_product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorResult {
    pub sector: Option<SectorId>,
    pub zero_mode_count: u64,
    /// Smallest `-Im E` over allowed modes with `|E| ≥ tol`; infinite when
    /// no such mode exists.
    pub min_nonzero_rate: f64,
    /// Eigenvalue attaining [`Self::min_nonzero_rate`].
    pub min_mode: Option<C64>,
    pub full_spectrum: Option<Vec<C64>>,
    /// Set when [`sector_gap`] hit its visiting cap before finishing.
    pub truncated: bool,
}

struct Modes {
    betas: Vec<C64>,
    /// Required parity of the flipped set, or `None` if unconstrained.
    flip_parity: Option<u32>,
    base: C64,
    tol: f64,
}

fn prepare(r: &RapiditySet, parity: i8, offset: C64) -> Modes {
    let scale = r.scale();
    let tol = ZERO_TOL * if scale > 0.0 { scale } else { offset.norm().max(1.0) };
    let mut betas = r.betas.clone();
    let flip_parity = match r.vacuum_parity {
        Some(v) => Some(if v == parity { 0 } else { 1 }),
        None => {
            // A vanishing rapidity pairs every state with a partner of equal
            // energy and opposite parity; dropping it enumerates one of each.
            if let Some(k) = (0..betas.len()).min_by(|&x, &y| betas[x].norm().total_cmp(&betas[y].norm())) {
                betas.remove(k);
            }
            None
        }
    };
    let base = offset - betas.iter().sum::<C64>();
    Modes { betas, flip_parity, base, tol }
}

/// Full parity-allowed spectrum of a sector.
pub fn sector_spectrum(r: &RapiditySet, parity: i8, offset: C64) -> Result<SectorResult> {
    let m = prepare(r, parity, offset);
    let n = m.betas.len();
    if n > MAX_ENUMERATED_MODES {
        return Err(Error::Guard(format!("{n} modes exceeds enumeration guard {MAX_ENUMERATED_MODES}")));
    }
    let mut spectrum = Vec::with_capacity(1 << n.saturating_sub(1));
    let mut zero = 0;
    let mut best: Option<(f64, C64)> = None;
    for mask in 0u64..(1u64 << n) {
        if let Some(p) = m.flip_parity {
            if mask.count_ones() % 2 != p {
                continue;
            }
        }
        let e = (0..n).filter(|&j| (mask >> j) & 1 == 1).fold(m.base, |acc, j| acc + m.betas[j] * 2.0);
        spectrum.push(e);
        if e.norm() < m.tol {
            zero += 1;
        } else {
            let rate = (-e.im).max(0.0);
            if best.map_or(true, |(b, _)| rate < b) {
                best = Some((rate, e));
            }
        }
    }
    Ok(SectorResult {
        sector: None,
        zero_mode_count: zero,
        min_nonzero_rate: best.map_or(f64::INFINITY, |b| b.0),
        min_mode: best.map(|b| b.1),
        full_spectrum: Some(spectrum),
        truncated: false,
    })
}

#[derive(PartialEq)]
struct Pending {
    weight: f64,
    last: usize,
    mask: u128,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.weight.total_cmp(&self.weight).then_with(|| other.mask.cmp(&self.mask))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Zero-mode count and smallest nonzero rate without full enumeration:
/// sign patterns are visited in increasing relaxation rate.
pub fn sector_gap(r: &RapiditySet, parity: i8, offset: C64) -> Result<SectorResult> {
    let m = prepare(r, parity, offset);
    let n = m.betas.len();
    if n > 128 {
        return Err(Error::Guard(format!("{n} modes exceeds the 128-mode pattern width")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let w: Vec<f64> = m.betas.iter().map(|b| 2.0 * b.im.abs()).collect();
    order.sort_by(|&x, &y| w[x].total_cmp(&w[y]).then(x.cmp(&y)));
    let ws: Vec<f64> = order.iter().map(|&k| w[k]).collect();
    let r0 = -m.base.im;
    let margin = 1e-12 * (1.0 + r0.abs());

    let mut zero = 0;
    let mut best: Option<(f64, C64)> = None;
    let mut visited = 0usize;
    let mut truncated = false;

    let mut heap = BinaryHeap::new();
    let visit = |mask: u128, weight: f64, best: &mut Option<(f64, C64)>, zero: &mut u64| -> bool {
        // Returns false once no later pattern can matter.
        if best.is_some() && r0 + weight > m.tol + margin {
            return false;
        }
        let allowed = m.flip_parity.map_or(true, |p| mask.count_ones() % 2 == p);
        if allowed {
            let mut e = m.base;
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                e += m.betas[order[i]] * 2.0;
                bits &= bits - 1;
            }
            if e.norm() < m.tol {
                *zero += 1;
            } else if best.is_none() {
                *best = Some(((-e.im).max(0.0), e));
            }
        }
        true
    };

    if visit(0, 0.0, &mut best, &mut zero) && n > 0 {
        heap.push(Pending { weight: ws[0], last: 0, mask: 1 });
        while let Some(p) = heap.pop() {
            visited += 1;
            if visited > MAX_VISITED_PATTERNS {
                truncated = true;
                break;
            }
            if !visit(p.mask, p.weight, &mut best, &mut zero) {
                break;
            }
            let nx = p.last + 1;
            if nx < n {
                heap.push(Pending { weight: p.weight + ws[nx], last: nx, mask: p.mask | (1 << nx) });
                heap.push(Pending {
                    weight: p.weight - ws[p.last] + ws[nx],
                    last: nx,
                    mask: (p.mask & !(1 << p.last)) | (1 << nx),
                });
            }
        }
    }
    Ok(SectorResult {
        sector: None,
        zero_mode_count: zero,
        min_nonzero_rate: best.map_or(f64::INFINITY, |b| b.0),
        min_mode: best.map(|b| b.1),
        full_spectrum: None,
        truncated,
    })
}

/// Evaluates sectors of one lattice at fixed couplings.
#[derive(Debug, Clone)]
pub struct SectorEvaluator {
    pub canonical: CanonicalGauge,
    pub params: CouplingParams,
}

impl SectorEvaluator {
    pub fn new(canonical: CanonicalGauge, params: CouplingParams) -> Self {
        Self { canonical, params }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { canonical: self.canonical.clone(), params: self.params.with_gamma(gamma) }
    }

    fn prepare(&self, s: &SectorId) -> Result<(RapiditySet, i8, C64)> {
        let g = self.canonical.gauge_field(s)?;
        let a = assemble_structure_matrix(&g, &self.params);
        let r = compute_rapidities(&a)?;
        Ok((r, allowed_parity(&g), a.offset))
    }

    pub fn gap(&self, s: &SectorId) -> Result<SectorResult> {
        let (r, p, off) = self.prepare(s)?;
        let mut res = sector_gap(&r, p, off)?;
        res.sector = Some(s.clone());
        Ok(res)
    }

    pub fn spectrum(&self, s: &SectorId) -> Result<SectorResult> {
        let (r, p, off) = self.prepare(s)?;
        let mut res = sector_spectrum(&r, p, off)?;
        res.sector = Some(s.clone());
        Ok(res)
    }
}
