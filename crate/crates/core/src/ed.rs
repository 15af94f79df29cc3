//! Explicit vectorised generators at small sizes.
//!
//! With row-major flattening `|m⟩⟨n| ↦ m·d + n`, the generator is
//! `W = H⊗1 − 1⊗Hᵀ + i Σ_L (L⊗L* − ½ L†L⊗1 − ½ 1⊗LᵀL*)` and its eigenvalues
//! are `E = iΛ` for the Liouvillian eigenvalues `Λ`.

use num_complex::Complex64 as C64;

use crate::clifford::{self, kron, scale, SparseOp};
use crate::error::{Error, Result};

/// Largest generator dimension accepted.
pub const MAX_DIM: usize = 1 << 20;
/// Largest generator dimension for dense diagonalisation.
pub const MAX_DENSE_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    SkLadder,
    Bilayer,
    Generic,
}

#[derive(Debug, Clone)]
pub struct VectorizedGenerator {
    pub tag: ModelTag,
    pub hilbert_dim: usize,
    pub matrix: SparseOp,
}

pub fn build_vectorized_w(h: &SparseOp, jumps: &[SparseOp], tag: ModelTag) -> Result<VectorizedGenerator> {
    let (d, d2) = h.shape();
    if d != d2 {
        return Err(Error::Dimension(format!("Hamiltonian is {d}x{d2}")));
    }
    if d * d > MAX_DIM {
        return Err(Error::Guard(format!("generator dimension {} exceeds {MAX_DIM}", d * d)));
    }
    if let Some(k) = jumps.iter().position(|l| l.shape() != (d, d)) {
        return Err(Error::Dimension(format!("jump operator {k} does not match the Hamiltonian")));
    }
    let id = clifford::identity(d);
    let i = C64::new(0.0, 1.0);
    let mut w = &kron(h, &id) - &kron(&id, &clifford::transpose(h));
    for l in jumps {
        let ldl = &clifford::adjoint(l) * l;
        let gain = kron(l, &clifford::conj(l));
        let loss = &kron(&ldl, &id) + &kron(&id, &clifford::transpose(&ldl));
        w = &w + &scale(&(&gain - &scale(&loss, C64::new(0.5, 0.0))), i);
    }
    Ok(VectorizedGenerator { tag, hilbert_dim: d, matrix: clifford::prune(&w, 1e-14) })
}

/// Row-major flattening of an operator.
pub fn vectorize(op: &SparseOp) -> Vec<C64> {
    let (d, _) = op.shape();
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for (x, (m, n)) in op.iter() {
        v[m * d + n] = *x;
    }
    v
}

impl VectorizedGenerator {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (row, vec) in self.matrix.outer_iterator().enumerate() {
            out[row] = vec.iter().map(|(c, x)| x * v[c]).sum();
        }
        out
    }

    /// Largest entry of `⟨I| W`; zero for a trace-preserving generator.
    pub fn left_identity_residual(&self) -> f64 {
        let d = self.hilbert_dim;
        let mut acc = vec![C64::new(0.0, 0.0); self.dim()];
        for m in 0..d {
            if let Some(row) = self.matrix.outer_view(m * d + m) {
                for (c, x) in row.iter() {
                    acc[c] += x;
                }
            }
        }
        acc.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `Tr(W^m)` by propagating unit vectors: `Σ_i (e_iᵀ W^a)·(W^b e_i)`.
    pub fn trace_moment(&self, m: usize) -> C64 {
        let n = self.dim();
        if m == 0 {
            return C64::new(n as f64, 0.0);
        }
        let a = m.div_ceil(2);
        let b = m - a;
        let wt = clifford::transpose(&self.matrix);
        let mut left = SparseVector::new(n);
        let mut right = SparseVector::new(n);
        let mut scratch = SparseVector::new(n);
        let mut total = C64::new(0.0, 0.0);
        for i in 0..n {
            left.reset_unit(i);
            for _ in 0..a {
                left.propagate(&self.matrix, &mut scratch);
            }
            right.reset_unit(i);
            for _ in 0..b {
                right.propagate(&wt, &mut scratch);
            }
            total += left.dot(&right);
        }
        total
    }

    pub fn dense_eigenvalues(&self) -> Result<Vec<C64>> {
        let n = self.dim();
        if n > MAX_DENSE_DIM {
            return Err(Error::Guard(format!("dense diagonalisation of dimension {n} exceeds {MAX_DENSE_DIM}")));
        }
        let mut dense = faer::Mat::<C64>::zeros(n, n);
        for (x, (r, c)) in self.matrix.iter() {
            dense[(r, c)] = *x;
        }
        dense.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
    }
}

/// Dense-backed sparse accumulator.
struct SparseVector {
    values: Vec<C64>,
    support: Vec<usize>,
    marked: Vec<bool>,
}

impl SparseVector {
    fn new(n: usize) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); n], support: Vec::new(), marked: vec![false; n] }
    }

    fn clear(&mut self) {
        for &k in &self.support {
            self.values[k] = C64::new(0.0, 0.0);
            self.marked[k] = false;
        }
        self.support.clear();
    }

    fn add(&mut self, k: usize, x: C64) {
        if !self.marked[k] {
            self.marked[k] = true;
            self.support.push(k);
        }
        self.values[k] += x;
    }

    fn reset_unit(&mut self, i: usize) {
        self.clear();
        self.add(i, C64::new(1.0, 0.0));
    }

    /// `self ← selfᵀ M` using the rows of `m`.
    fn propagate(&mut self, m: &SparseOp, scratch: &mut SparseVector) {
        scratch.clear();
        for &j in &self.support {
            let vj = self.values[j];
            if let Some(row) = m.outer_view(j) {
                for (k, x) in row.iter() {
                    scratch.add(k, vj * x);
                }
            }
        }
        std::mem::swap(self, scratch);
    }

    fn dot(&self, other: &SparseVector) -> C64 {
        let (small, large) = if self.support.len() <= other.support.len() { (self, other) } else { (other, self) };
        small.support.iter().map(|&k| small.values[k] * large.values[k]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AnnihilationReport {
    /// `‖W vec(Π)‖ / ‖vec(Π)‖` for each supplied operator.
    pub residuals: Vec<f64>,
}

impl AnnihilationReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.residuals.iter().all(|&r| r <= tol)
    }
}

pub fn check_ness_annihilation(gen: &VectorizedGenerator, states: &[SparseOp]) -> Result<AnnihilationReport> {
    let mut residuals = Vec::with_capacity(states.len());
    for s in states {
        if s.shape() != (gen.hilbert_dim, gen.hilbert_dim) {
            return Err(Error::Dimension("state does not match the generator".into()));
        }
        let v = vectorize(s);
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let wv = gen.apply(&v);
        let res = wv.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        residuals.push(if norm > 0.0 { res / norm } else { res });
    }
    Ok(AnnihilationReport { residuals })
}

#[derive(Debug, Clone)]
pub struct MomentReport {
    pub order: usize,
    pub generator: C64,
    pub sectors: C64,
    /// `Σ_a |E_a|^m`, the scale against which agreement is judged.
    pub scale: f64,
}

impl MomentReport {
    pub fn relative_error(&self) -> f64 {
        (self.generator - self.sectors).norm() / self.scale.max(f64::MIN_POSITIVE)
    }
}

pub fn moment_crosscheck(gen: &VectorizedGenerator, spectrum: &[C64], orders: &[usize]) -> Result<Vec<MomentReport>> {
    if spectrum.len() != gen.dim() {
        return Err(Error::Dimension(format!(
            "sector spectrum has {} values, generator dimension is {}",
            spectrum.len(),
            gen.dim()
        )));
    }
    Ok(orders
        .iter()
        .map(|&m| MomentReport {
            order: m,
            generator: gen.trace_moment(m),
            sectors: spectrum.iter().map(|e| e.powu(m as u32)).sum(),
            scale: spectrum.iter().map(|e| e.norm().powi(m as i32)).sum(),
        })
        .collect())
}

/// Greedy nearest-neighbour matching of two eigenvalue multisets; returns
/// the largest distance between matched values.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("multisets of size {} and {}", a.len(), b.len())));
    }
    let mut pool: Vec<C64> = b.to_vec();
    let mut worst = 0.0f64;
    let mut order: Vec<&C64> = a.iter().collect();
    order.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    for x in order {
        let k = (0..pool.len()).min_by(|&i, &j| (pool[i] - x).norm().total_cmp(&(pool[j] - x).norm())).unwrap();
        worst = worst.max((pool[k] - x).norm());
        pool.swap_remove(k);
    }
    Ok(worst)
}

/// Eigenvalue cluster: single-linkage group of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub mean: C64,
    pub size: usize,
    /// Largest distance from a member to the mean.
    pub spread: f64,
}

pub fn clusters(values: &[C64], radius: f64) -> Vec<Cluster> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|x, y| x.re.total_cmp(&y.re));
    let n = sorted.len();
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
            if sorted[k].re - sorted[i].re > radius {
                break;
            }
            if (sorted[k] - sorted[i]).norm() <= radius {
                let (a, b) = (root(&mut label, i), root(&mut label, k));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let r = root(&mut label, i);
        groups.entry(r).or_default().push(sorted[i]);
    }
    groups
        .into_values()
        .map(|g| {
            let mean = g.iter().sum::<C64>() / g.len() as f64;
            let spread = g.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max);
            Cluster { mean, size: g.len(), spread }
        })
        .collect()
}

/// Comparison of two multisets through their eigenvalue clusters. The mean
/// of a cluster is well conditioned even when its members sit on a
/// near-defective block and are individually resolved only to `eps^(1/k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterComparison {
    /// Largest distance between the means of matched clusters.
    pub max_mean_distance: f64,
    /// Clusters with no partner of equal size.
    pub unmatched: usize,
    /// Largest within-cluster spread on either side.
    pub max_spread: f64,
}

pub fn compare_by_clusters(a: &[C64], b: &[C64], radius: f64) -> ClusterComparison {
    let ca = clusters(a, radius);
    let mut cb = clusters(b, radius);
    let max_spread = ca.iter().chain(&cb).map(|c| c.spread).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut unmatched = 0;
    for c in &ca {
        let k = (0..cb.len())
            .filter(|&k| cb[k].size == c.size)
            .min_by(|&x, &y| (cb[x].mean - c.mean).norm().total_cmp(&(cb[y].mean - c.mean).norm()));
        match k {
            Some(k) => {
                worst = worst.max((cb[k].mean - c.mean).norm());
                cb.swap_remove(k);
            }
            None => unmatched += 1,
        }
    }
    ClusterComparison { max_mean_distance: worst, unmatched: unmatched + cb.len(), max_spread }
}

/// Pauli-chain Hamiltonian of the two-leg ladder's physical leg:
/// `Σ_n Jx X_{2n-1}X_{2n} + Jy Y_{2n}Y_{2n+1}` with periodic closure.
pub fn sk_hamiltonian(cells: usize, jx: f64, jy: f64) -> SparseOp {
    let n = 2 * cells;
    let dim = 1usize << n;
    let embed = |p: &SparseOp, j: usize| {
        let left = clifford::identity(1 << j);
        let right = clifford::identity(1 << (n - j - 1));
        kron(&kron(&left, p), &right)
    };
    let (x, y) = (clifford::pauli_x(), clifford::pauli_y());
    let mut h = SparseOp::zero((dim, dim));
    for c in 0..cells {
        let (a, b, e) = (2 * c, 2 * c + 1, (2 * c + 2) % n);
        h = &h + &scale(&(&embed(&x, a) * &embed(&x, b)), C64::new(jx, 0.0));
        h = &h + &scale(&(&embed(&y, b) * &embed(&y, e)), C64::new(jy, 0.0));
    }
    clifford::prune(&h, 1e-14)
}

/// Dephasing jumps `sqrt(γ) Z_j` on every spin of the ladder leg.
pub fn sk_jumps(cells: usize, gamma: f64) -> Vec<SparseOp> {
    let n = 2 * cells;
    let z = scale(&clifford::pauli_z(), C64::new(gamma.sqrt(), 0.0));
    (0..n)
        .map(|j| kron(&kron(&clifford::identity(1 << j), &z), &clifford::identity(1 << (n - j - 1))))
        .collect()
}

pub fn sk_generator(cells: usize, jx: f64, jy: f64, gamma: f64) -> Result<VectorizedGenerator> {
    build_vectorized_w(&sk_hamiltonian(cells, jx, jy), &sk_jumps(cells, gamma), ModelTag::SkLadder)
}

/// Generator of the bilayer model from its operator content.
pub fn bilayer_generator(ops: &clifford::ModelOperators, gamma: f64) -> Result<VectorizedGenerator> {
    let s = C64::new(gamma.sqrt(), 0.0);
    let jumps: Vec<SparseOp> = ops.gamma5.iter().map(|g| scale(&g.matrix, s)).collect();
    build_vectorized_w(&ops.hamiltonian.matrix, &jumps, ModelTag::Bilayer)
}

/// Spectrum of the bilayer generator obtained block by block.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub eigenvalues: Vec<C64>,
    /// Eigenvalues with `|E| ≤ tol`.
    pub zero_algebraic: usize,
    /// Dimension of the kernel, from singular values `≤ tol`.
    pub zero_geometric: usize,
    /// Largest `‖[Π_a, Γ^5_r]‖` seen; the block split is exact only when this vanishes.
    pub commutator_residual: f64,
}

/// Diagonalises the bilayer generator in the blocks `Π_a ϱ Π_b` of the
/// conserved projectors. Every `Γ^5_r` and `H` commute with the projectors,
/// so `W` maps each block into itself.
pub fn bilayer_block_spectrum(ops: &clifford::ModelOperators, gamma: f64, zero_tol: f64) -> Result<BlockSpectrum> {
    let d = ops.dim();
    if d * d > MAX_DIM {
        return Err(Error::Guard(format!("generator dimension {} exceeds {MAX_DIM}", d * d)));
    }
    let mut residual = 0.0f64;
    let mut reduced: Vec<(faer::Mat<C64>, Vec<faer::Mat<C64>>)> = Vec::new();
    for a in 0..ops.projector_count() {
        let p = ops.projector(a).matrix;
        for g in &ops.gamma5 {
            residual = residual.max(clifford::commutator_norm(&p, &g.matrix));
        }
        residual = residual.max(clifford::commutator_norm(&p, &ops.hamiltonian.matrix));
        let basis = range_basis(&p);
        let h = restrict(&ops.hamiltonian.matrix, &basis);
        let gs = ops.gamma5.iter().map(|g| restrict(&g.matrix, &basis)).collect();
        reduced.push((h, gs));
    }
    let i = C64::new(0.0, 1.0);
    let mut eigenvalues = Vec::with_capacity(d * d);
    let (mut zero_algebraic, mut zero_geometric) = (0, 0);
    for (ha, ga) in &reduced {
        for (hb, gb) in &reduced {
            let (ka, kb) = (ha.nrows(), hb.nrows());
            let mut w = faer::Mat::<C64>::zeros(ka * kb, ka * kb);
            for p in 0..ka {
                for q in 0..kb {
                    let row = p * kb + q;
                    for s in 0..ka {
                        for t in 0..kb {
                            let col = s * kb + t;
                            let mut v = C64::new(0.0, 0.0);
                            if q == t {
                                v += ha[(p, s)];
                            }
                            if p == s {
                                v -= hb[(t, q)];
                            }
                            let mut jump = C64::new(0.0, 0.0);
                            for (x, y) in ga.iter().zip(gb) {
                                jump += x[(p, s)] * y[(q, t)].conj();
                            }
                            v += i * gamma * jump;
                            w[(row, col)] = v;
                        }
                    }
                    w[(row, row)] -= i * gamma * ga.len() as f64;
                }
            }
            let ev = w.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
            zero_algebraic += ev.iter().filter(|e| e.norm() <= zero_tol).count();
            let sv = w.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
            zero_geometric += sv.iter().filter(|&&x| x <= zero_tol).count();
            eigenvalues.extend(ev);
        }
    }
    Ok(BlockSpectrum { eigenvalues, zero_algebraic, zero_geometric, commutator_residual: residual })
}

/// Orthonormal basis of the range of a projector, as columns.
fn range_basis(p: &SparseOp) -> faer::Mat<C64> {
    let d = p.rows();
    let dense = p.to_dense();
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for c in 0..d {
        let mut v: Vec<C64> = (0..d).map(|r| dense[[r, c]]).collect();
        for b in &cols {
            let dot: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            v.iter_mut().zip(b).for_each(|(y, x)| *y -= dot * x);
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    faer::Mat::from_fn(d, cols.len(), |r, c| cols[c][r])
}

/// `V† M V` for a basis `V` given as columns.
fn restrict(m: &SparseOp, v: &faer::Mat<C64>) -> faer::Mat<C64> {
    let (d, k) = (v.nrows(), v.ncols());
    let mut mv = faer::Mat::<C64>::zeros(d, k);
    for (x, (r, c)) in m.iter() {
        for j in 0..k {
            mv[(r, j)] += x * v[(c, j)];
        }
    }
    faer::Mat::from_fn(k, k, |a, b| (0..d).map(|r| v[(r, a)].conj() * mv[(r, b)]).sum())
}

/// Number of values of `a` left unmatched by a greedy nearest match into `b`
/// within `tol`, using a grid of cell size `tol`.
pub fn unmatched_count(a: &[C64], b: &[C64], tol: f64) -> usize {
    use std::collections::HashMap;
    let cell = |z: &C64| ((z.re / tol).floor() as i64, (z.im / tol).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, z) in b.iter().enumerate() {
        grid.entry(cell(z)).or_default().push(k);
    }
    let mut used = vec![false; b.len()];
    let mut missing = a.len().abs_diff(b.len());
    for z in a {
        let (cx, cy) = cell(z);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &k in list {
                        let dist = (b[k] - z).norm();
                        if !used[k] && dist <= tol && best.map_or(true, |(bd, _)| dist < bd) {
                            best = Some((dist, k));
                        }
                    }
                }
            }
        }
        match best {
            Some((_, k)) => used[k] = true,
            None => missing += 1,
        }
    }
    missing
}
