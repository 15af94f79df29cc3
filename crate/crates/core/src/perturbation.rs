//! Perturbative limits of the relaxation spectrum.
//!
//! Small γ: a classical master matrix over Hamiltonian eigenprojectors,
//! built from the orthogonal block decomposition of the real hopping matrix.
//! Large γ: the defect-counting operator `S` over site labels `q ∈ 1..=8`.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::gauge::GaugeField;
use crate::lattice::{LatticeGeometry, DIRECTIONS};

/// Largest basis for a dense classical master matrix.
pub const MAX_MASTER_DIM: usize = 4096;
/// Largest number of label configurations scanned exhaustively.
pub const MAX_Q_CONFIGS: u64 = 10_000_000;

/// Real antisymmetric hopping matrix `J_{R,R+δ} = J_δ u^δ_R` of the bottom layer, row-major.
pub fn hopping_matrix(g: &GaugeField, j: [f64; 4]) -> Vec<f64> {
    let geom = g.geometry();
    let n = geom.n();
    let mut m = vec![0.0; n * n];
    for (a, r) in geom.a_sites().into_iter().enumerate() {
        for d in DIRECTIONS {
            let s = geom.neighbor(r, d);
            let v = j[d - 1] * g.u(a, d) as f64;
            m[r * n + s] += v;
            m[s * n + r] -= v;
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct OrthogonalBlockDecomposition {
    pub n: usize,
    /// Row-major orthogonal matrix; columns `2k, 2k+1` span block `k`.
    pub q: Vec<f64>,
    /// Block values, sorted descending.
    pub eps: Vec<f64>,
}

impl OrthogonalBlockDecomposition {
    pub fn q(&self, r: usize, s: usize) -> f64 {
        self.q[r * self.n + s]
    }

    /// `QᵀJQ` for a row-major `J`.
    pub fn transform(&self, j: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut jq = vec![0.0; n * n];
        for r in 0..n {
            for s in 0..n {
                jq[r * n + s] = (0..n).map(|k| j[r * n + k] * self.q(k, s)).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for s in 0..n {
                out[r * n + s] = (0..n).map(|k| self.q(k, r) * jq[k * n + s]).sum();
            }
        }
        out
    }

    /// Largest deviation of `QᵀJQ` from the ideal block form.
    pub fn block_residual(&self, j: &[f64]) -> f64 {
        let n = self.n;
        let t = self.transform(j);
        let mut worst = 0.0f64;
        for r in 0..n {
            for s in 0..n {
                let ideal = if r % 2 == 0 && s == r + 1 {
                    self.eps[r / 2]
                } else if r % 2 == 1 && s + 1 == r {
                    -self.eps[s / 2]
                } else {
                    0.0
                };
                worst = worst.max((t[r * n + s] - ideal).abs());
            }
        }
        worst
    }

    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|k| self.q(k, a) * self.q(k, b)).sum();
                worst = worst.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// Brings a real antisymmetric matrix to `diag([[0, ε], [-ε, 0]])` form.
///
/// Eigenvectors `a + ib` of the Hermitian `iJ` with eigenvalue `ε > 0`
/// satisfy `Ja = εb`, `Jb = -εa`, so `(√2 b, √2 a)` is a block. The
/// kernel is real and gets an orthonormal real basis.
pub fn block_diagonalize(j: &[f64], n: usize) -> Result<OrthogonalBlockDecomposition> {
    if j.len() != n * n || n % 2 != 0 {
        return Err(Error::Dimension(format!("need an even square matrix, got {} entries for n={n}", j.len())));
    }
    let scale = j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for r in 0..n {
        for s in 0..=r {
            if (j[r * n + s] + j[s * n + r]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Param(format!("matrix is not antisymmetric at ({r}, {s})")));
            }
        }
    }
    let h = Mat::<C64>::from_fn(n, n, |r, s| C64::new(0.0, j[r * n + s]));
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|k| eig.S()[k].re).collect();
    let u = eig.U();
    let tol = 1e-10 * scale.max(1.0);

    let mut blocks: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut kernel: Vec<Vec<f64>> = Vec::new();
    for (k, &e) in vals.iter().enumerate() {
        if e > tol {
            // Fix the phase so the largest entry is positive imaginary.
            let big = (0..n).map(|r| u[(r, k)].norm()).fold(0.0, f64::max);
            let p = (0..n).find(|&r| u[(r, k)].norm() >= big * (1.0 - 1e-9)).unwrap();
            let phase = C64::new(0.0, 1.0) * u[(p, k)].conj() / u[(p, k)].norm();
            let v: Vec<C64> = (0..n).map(|r| u[(r, k)] * phase).collect();
            let b: Vec<f64> = v.iter().map(|z| std::f64::consts::SQRT_2 * z.im).collect();
            let a: Vec<f64> = v.iter().map(|z| std::f64::consts::SQRT_2 * z.re).collect();
            blocks.push((e, b, a));
        } else if e.abs() <= tol {
            kernel.push((0..n).map(|r| u[(r, k)].re).collect());
            kernel.push((0..n).map(|r| u[(r, k)].im).collect());
        }
    }
    let zero_count = vals.iter().filter(|e| e.abs() <= tol).count();
    let kernel = real_orthonormal_basis(kernel, zero_count);
    if kernel.len() != zero_count || zero_count % 2 != 0 {
        return Err(Error::Eigen(format!("kernel of dimension {zero_count} could not be given a real basis")));
    }
    blocks.sort_by(|x, y| y.0.total_cmp(&x.0));
    for pair in kernel.chunks(2) {
        blocks.push((0.0, pair[0].clone(), pair[1].clone()));
    }
    let mut q = vec![0.0; n * n];
    for (k, (_, c0, c1)) in blocks.iter().enumerate() {
        for r in 0..n {
            q[r * n + 2 * k] = c0[r];
            q[r * n + 2 * k + 1] = c1[r];
        }
    }
    Ok(OrthogonalBlockDecomposition { n, q, eps: blocks.iter().map(|b| b.0).collect() })
}

fn real_orthonormal_basis(candidates: Vec<Vec<f64>>, want: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in candidates {
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
        if basis.len() == want {
            break;
        }
    }
    basis
}

/// Classical master matrix over occupation labels `(m, n)` of the `c` and
/// `d` fermions. Basis index is `m·2^{N_c} + n`, bit `N_c-1-k` of each word
/// holding label `k`, so indices run in lexicographic order.
#[derive(Debug, Clone)]
pub struct ClassicalMasterMatrix {
    pub cells: usize,
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl ClassicalMasterMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.dim + b]
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let m = Mat::<f64>::from_fn(self.dim, self.dim, |a, b| self.get(a, b));
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok((0..self.dim).map(|k| eig.S()[k]).collect())
    }

    fn from_weights(cells: usize, w: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let side = 1usize << cells;
        let dim = side * side;
        if dim > MAX_MASTER_DIM {
            return Err(Error::Guard(format!("master matrix dimension {dim} exceeds {MAX_MASTER_DIM}")));
        }
        let n_sites = (2 * cells) as f64;
        let mut matrix = vec![0.0; dim * dim];
        for m in 0..side {
            for n in 0..side {
                let a = m * side + n;
                matrix[a * dim + a] -= n_sites;
                for s in 0..cells {
                    for r in 0..cells {
                        let b = (m ^ (1 << (cells - 1 - s))) * side + (n ^ (1 << (cells - 1 - r)));
                        matrix[a * dim + b] += w(s, r);
                    }
                }
            }
        }
        Ok(Self { cells, dim, matrix })
    }
}

/// Weight `Σ_{r ∈ {R, R+x̂}} Σ_{s ∈ block S} Q_{r,s}²` coupling block `S` to `d` pair `R`.
pub fn pair_weight(dec: &OrthogonalBlockDecomposition, geom: &LatticeGeometry, block: usize, cell: usize) -> f64 {
    let r = geom.a_site(cell);
    let rx = geom.neighbor(r, 1);
    [r, rx]
        .iter()
        .map(|&row| dec.q(row, 2 * block).powi(2) + dec.q(row, 2 * block + 1).powi(2))
        .sum()
}

pub fn classical_master_matrix(dec: &OrthogonalBlockDecomposition, geom: &LatticeGeometry) -> Result<ClassicalMasterMatrix> {
    if dec.n != geom.n() {
        return Err(Error::Dimension(format!("decomposition of size {} on {} sites", dec.n, geom.n())));
    }
    ClassicalMasterMatrix::from_weights(geom.n_cells(), |s, r| pair_weight(dec, geom, s, r))
}

/// The master matrix with every weight equal to `4/N`.
pub fn translation_invariant_master_matrix(cells: usize) -> Result<ClassicalMasterMatrix> {
    let w = 2.0 / cells as f64;
    ClassicalMasterMatrix::from_weights(cells, |_, _| w)
}

/// `Λ(σ, μ) = (4/N)(Σσ)(Σμ) − N` with `σ, μ ∈ {±1}`.
pub fn master_closed_form(sigma: &[i8], mu: &[i8]) -> f64 {
    let n = (sigma.len() + mu.len()) as f64;
    let a: f64 = sigma.iter().map(|&x| x as f64).sum();
    let b: f64 = mu.iter().map(|&x| x as f64).sum();
    4.0 / n * a * b - n
}

/// All `4^{N_c}` closed-form values, with the same label layout as the basis.
pub fn master_closed_form_spectrum(cells: usize) -> Vec<f64> {
    let side = 1usize << cells;
    let signs = |w: usize| -> Vec<i8> { (0..cells).map(|k| if (w >> k) & 1 == 1 { -1 } else { 1 }).collect() };
    let mut out = Vec::with_capacity(side * side);
    for m in 0..side {
        for n in 0..side {
            out.push(master_closed_form(&signs(m), &signs(n)));
        }
    }
    out
}

/// Sign tables `Δ̃^δ(q)`, rows `δ = 1..4`, columns `q = 1..8`.
pub const DELTA_TILDE: [[i8; 8]; 4] = [
    [1, 1, -1, -1, 1, 1, -1, -1],
    [1, 1, -1, -1, -1, -1, 1, 1],
    [1, -1, 1, -1, -1, 1, -1, 1],
    [1, -1, 1, -1, 1, -1, 1, -1],
];

pub fn delta_tilde(delta: usize, q: u8) -> i8 {
    DELTA_TILDE[delta - 1][q as usize - 1]
}

/// Site labels `q_r ∈ 1..=8`, indexed by site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QConfig {
    pub labels: Vec<u8>,
}

impl QConfig {
    pub fn uniform(geom: &LatticeGeometry, q: u8) -> Self {
        Self { labels: vec![q; geom.n()] }
    }

    pub fn from_index(geom: &LatticeGeometry, mut index: u64) -> Self {
        let labels = (0..geom.n())
            .map(|_| {
                let q = (index % 8) as u8 + 1;
                index /= 8;
                q
            })
            .collect();
        Self { labels }
    }

    pub fn validate(&self, geom: &LatticeGeometry) -> Result<()> {
        if self.labels.len() != geom.n() {
            return Err(Error::SectorLength { expected: geom.n(), found: self.labels.len() });
        }
        if let Some(r) = self.labels.iter().position(|&q| !(1..=8).contains(&q)) {
            return Err(Error::Param(format!("label at site {r} outside 1..=8")));
        }
        Ok(())
    }
}

/// Bonds `(R, δ)` with `Δ̃^δ(q_R) ≠ Δ̃^δ(q_{R+δ})`.
pub fn bad_bonds(q: &QConfig, geom: &LatticeGeometry) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in geom.a_sites() {
        for d in DIRECTIONS {
            let s = geom.neighbor(r, d);
            if delta_tilde(d, q.labels[r]) != delta_tilde(d, q.labels[s]) {
                out.push((r, d));
            }
        }
    }
    out
}

/// `s = Σ_R Σ_δ (1 − Δ̃^δ(q_R) Δ̃^δ(q_{R+δ}))`, twice the number of bad bonds.
pub fn s_eigenvalue(q: &QConfig, geom: &LatticeGeometry) -> Result<u32> {
    q.validate(geom)?;
    Ok(2 * bad_bonds(q, geom).len() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRestriction {
    All,
    /// One site differs from an otherwise uniform background.
    SingleSiteDefects,
    Uniform,
}

impl QRestriction {
    fn admits(&self, q: &QConfig) -> bool {
        match self {
            QRestriction::All => true,
            QRestriction::Uniform => q.labels.iter().all(|&x| x == q.labels[0]),
            QRestriction::SingleSiteDefects => {
                let n = q.labels.len();
                (0..n).any(|r| {
                    let bg = q.labels[(r + 1) % n];
                    q.labels[r] != bg && q.labels.iter().enumerate().all(|(k, &x)| k == r || x == bg)
                })
            }
        }
    }
}

/// Smallest nonzero `s` over every label configuration admitted by `restriction`.
pub fn min_nonzero_s(geom: &LatticeGeometry, restriction: QRestriction) -> Result<Option<u32>> {
    let total = 8u64.checked_pow(geom.n() as u32).filter(|&t| t <= MAX_Q_CONFIGS);
    let Some(total) = total else {
        return Err(Error::Guard(format!("8^{} label configurations exceed {MAX_Q_CONFIGS}", geom.n())));
    };
    let mut best: Option<u32> = None;
    for idx in 0..total {
        let q = QConfig::from_index(geom, idx);
        if !restriction.admits(&q) {
            continue;
        }
        let s = s_eigenvalue(&q, geom)?;
        if s > 0 && best.map_or(true, |b| s < b) {
            best = Some(s);
        }
    }
    Ok(best)
}

/// Roots `ω± = −2γ ± sqrt(4γ² − 2s)` of `ω² + 4γω + 2s`.
pub fn large_gamma_rates(s: f64, gamma: f64) -> Result<(C64, C64)> {
    if gamma <= 0.0 {
        return Err(Error::Param("gamma must be positive".into()));
    }
    let disc = C64::new(4.0 * gamma * gamma - 2.0 * s, 0.0).sqrt();
    let c = C64::new(-2.0 * gamma, 0.0);
    Ok((c + disc, c - disc))
}

/// The slowly decaying branch `−s/2γ` to leading order.
pub fn large_gamma_asymptote(s: f64, gamma: f64) -> f64 {
    -s / (2.0 * gamma)
}

/// Unperturbed eigenvalue `−2kγ` of the dissipator sector with `k` flipped sites.
pub fn dissipator_sector_rate(k: u32, gamma: f64) -> f64 {
    -2.0 * k as f64 * gamma
}
