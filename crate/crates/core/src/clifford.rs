//! Gamma-matrix representations and many-site operators for the bilayer
//! model at small sizes.
//!
//! Site operators act on `(C^4)^{⊗N}` with site 0 as the most significant
//! tensor factor.

use num_complex::Complex64 as C64;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

pub type SparseOp = CsMat<C64>;

/// Largest level accepted by [`build_gamma_set`].
pub const MAX_LEVEL: usize = 4;
/// Largest number of sites for which full operators are built.
pub const MAX_SITES: usize = 6;

const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity(dim: usize) -> SparseOp {
    CsMat::eye(dim)
}

pub fn pauli_x() -> SparseOp {
    from_entries(2, &[(0, 1, ONE), (1, 0, ONE)])
}

pub fn pauli_y() -> SparseOp {
    from_entries(2, &[(0, 1, -I), (1, 0, I)])
}

pub fn pauli_z() -> SparseOp {
    from_entries(2, &[(0, 0, ONE), (1, 1, -ONE)])
}

pub fn from_entries(dim: usize, entries: &[(usize, usize, C64)]) -> SparseOp {
    let mut t = TriMat::new((dim, dim));
    for &(i, j, v) in entries {
        t.add_triplet(i, j, v);
    }
    t.to_csr()
}

pub fn kron(a: &SparseOp, b: &SparseOp) -> SparseOp {
    sprs::kronecker_product(a.view(), b.view()).to_csr()
}

pub fn scale(a: &SparseOp, s: C64) -> SparseOp {
    a.map(|&v| v * s)
}

/// Drops entries with modulus below `tol`.
pub fn prune(a: &SparseOp, tol: f64) -> SparseOp {
    let mut t = TriMat::new(a.shape());
    for (v, (i, j)) in a.iter() {
        if v.norm() > tol {
            t.add_triplet(i, j, *v);
        }
    }
    t.to_csr()
}

pub fn adjoint(a: &SparseOp) -> SparseOp {
    a.transpose_view().to_csr().map(|v| v.conj())
}

pub fn transpose(a: &SparseOp) -> SparseOp {
    a.transpose_view().to_csr()
}

pub fn conj(a: &SparseOp) -> SparseOp {
    a.map(|v| v.conj())
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &SparseOp, b: &SparseOp) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let d = a - b;
    d.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn approx_eq(a: &SparseOp, b: &SparseOp, tol: f64) -> bool {
    a.shape() == b.shape() && max_abs_diff(a, b) <= tol
}

/// Largest entry modulus of `[a, b]`.
pub fn commutator_norm(a: &SparseOp, b: &SparseOp) -> f64 {
    let ab = a * b;
    let ba = b * a;
    max_abs_diff(&ab, &ba)
}

#[derive(Debug, Clone)]
pub struct GammaSet {
    level: usize,
    matrices: Vec<SparseOp>,
}

impl GammaSet {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        1 << self.level
    }

    /// `Γ^mu` with `mu` in `1..=2k+1`.
    pub fn gamma(&self, mu: usize) -> Result<&SparseOp> {
        if mu == 0 || mu > self.matrices.len() {
            return Err(Error::Index(format!("gamma index {mu} outside 1..={}", self.matrices.len())));
        }
        Ok(&self.matrices[mu - 1])
    }

    pub fn matrices(&self) -> &[SparseOp] {
        &self.matrices
    }
}

/// Tensor-product construction `Γ^{2j-1} = Z^{⊗(j-1)} ⊗ X ⊗ 1…`,
/// `Γ^{2j} = Z^{⊗(j-1)} ⊗ Y ⊗ 1…`, closed by `Γ^{2k+1} = (-i)^k Γ^1⋯Γ^{2k}`.
pub fn build_gamma_set(k: usize) -> Result<GammaSet> {
    if k == 0 || k > MAX_LEVEL {
        return Err(Error::Guard(format!("gamma level {k} outside 1..={MAX_LEVEL}")));
    }
    let mut matrices = Vec::with_capacity(2 * k + 1);
    for j in 0..k {
        for p in [pauli_x(), pauli_y()] {
            let mut m = identity(1);
            for slot in 0..k {
                let factor = if slot < j {
                    pauli_z()
                } else if slot == j {
                    p.clone()
                } else {
                    identity(2)
                };
                m = kron(&m, &factor);
            }
            matrices.push(m);
        }
    }
    let mut last = identity(1 << k);
    for m in &matrices {
        last = &last * m;
    }
    let phase = (0..k).fold(ONE, |acc, _| acc * -I);
    matrices.push(prune(&scale(&last, phase), 1e-14));
    Ok(GammaSet { level: k, matrices })
}

/// `Γ^{μν} = i Γ^μ Γ^ν`.
pub fn gamma_pair(set: &GammaSet, mu: usize, nu: usize) -> Result<SparseOp> {
    if mu == nu {
        return Err(Error::Index(format!("gamma pair needs distinct indices, got ({mu},{nu})")));
    }
    let p = set.gamma(mu)? * set.gamma(nu)?;
    Ok(scale(&p, I))
}

#[derive(Debug, Clone)]
pub struct SiteOperator {
    pub n_sites: usize,
    pub matrix: SparseOp,
    pub label: String,
}

/// Embeds a single-site 4×4 operator at site `r` of an `n`-site system.
pub fn embed(local: &SparseOp, r: usize, n: usize) -> SparseOp {
    let left = identity(4usize.pow(r as u32));
    let right = identity(4usize.pow((n - r - 1) as u32));
    kron(&kron(&left, local), &right)
}

/// Full operator content of the bilayer model's physical layer.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub geom: LatticeGeometry,
    pub hamiltonian: SiteOperator,
    /// `Γ^5_r` for every site (the jump operators up to `sqrt(γ)`).
    pub gamma5: Vec<SiteOperator>,
    /// Plaquette flux `Φ_r` labelled by its lower-left site.
    pub fluxes: Vec<SiteOperator>,
    pub wilson_x: SiteOperator,
    pub wilson_y: SiteOperator,
    pub q: SiteOperator,
}

pub fn build_model_operators(geom: LatticeGeometry, j: [f64; 4]) -> Result<ModelOperators> {
    let n = geom.n();
    if n > MAX_SITES {
        return Err(Error::Guard(format!("{n} sites exceeds the operator guard of {MAX_SITES}")));
    }
    let set = build_gamma_set(2)?;
    let dim = 4usize.pow(n as u32);
    let site_gamma = |mu: usize, r: usize| embed(set.gamma(mu).unwrap(), r, n);
    let site_pair = |mu: usize, nu: usize, r: usize| embed(&gamma_pair(&set, mu, nu).unwrap(), r, n);

    let mut h = SparseOp::zero((dim, dim));
    for r in geom.a_sites() {
        for delta in 1..=4 {
            let s = geom.neighbor(r, delta);
            let term = &site_gamma(delta, r) * &site_gamma(delta, s);
            h = &h + &scale(&term, C64::new(j[delta - 1], 0.0));
        }
    }
    let h = prune(&h, 1e-14);

    let gamma5 = (0..n)
        .map(|r| SiteOperator { n_sites: n, matrix: site_gamma(5, r), label: format!("Gamma5_{r}") })
        .collect();

    let mut fluxes = Vec::with_capacity(n);
    for r in 0..n {
        let (a, b, c, d) = if geom.is_a(r) { ((2, 1), (1, 4), (4, 3), (3, 2)) } else { ((4, 3), (3, 2), (2, 1), (1, 4)) };
        let m = &(&(&site_pair(a.0, a.1, r) * &site_pair(b.0, b.1, geom.shift(r, 1, 0)))
            * &site_pair(c.0, c.1, geom.shift(r, 1, 1)))
            * &site_pair(d.0, d.1, geom.shift(r, 0, 1));
        let (x, y) = geom.coords(r);
        fluxes.push(SiteOperator { n_sites: n, matrix: scale(&m, -ONE), label: format!("Phi_{{{x},{y}}}") });
    }

    let wilson = |along_x: bool| {
        let len = if along_x { geom.nx() } else { geom.ny() };
        let (p, q) = if along_x { (1, 3) } else { (2, 4) };
        let mut m = identity(dim);
        for k in 1..=len as i64 {
            let r = if along_x { geom.site(k, 1) } else { geom.site(1, k) };
            let pair = if k % 2 == 1 { site_pair(p, q, r) } else { site_pair(q, p, r) };
            m = &m * &pair;
        }
        scale(&m, -ONE)
    };
    let wilson_x = SiteOperator { n_sites: n, matrix: wilson(true), label: "Wx".into() };
    let wilson_y = SiteOperator { n_sites: n, matrix: wilson(false), label: "Wy".into() };

    let mut q = identity(dim);
    for r in 0..n {
        q = &q * &site_gamma(5, r);
    }
    Ok(ModelOperators {
        geom,
        hamiltonian: SiteOperator { n_sites: n, matrix: h, label: "H".into() },
        gamma5,
        fluxes,
        wilson_x,
        wilson_y,
        q: SiteOperator { n_sites: n, matrix: q, label: "Q".into() },
    })
}

impl ModelOperators {
    pub fn dim(&self) -> usize {
        4usize.pow(self.geom.n() as u32)
    }

    /// Number of projectors, `2^{N+1}`.
    pub fn projector_count(&self) -> usize {
        1 << (self.geom.n() + 1)
    }

    /// Projector labelled by bit pattern `index`: bit 0 is `η_x`, bit 1 is
    /// `η_y`, bit `2 + k` is `η` of the k-th plaquette (the plaquette at
    /// `(N_x, N_y)` is omitted). A set bit means `η = -1`.
    pub fn projector(&self, index: usize) -> SiteOperator {
        assert!(index < self.projector_count());
        let dim = self.dim();
        let half = C64::new(0.5, 0.0);
        let factor = |op: &SparseOp, bit: bool| {
            let s = if bit { -half } else { half };
            &scale(&identity(dim), half) + &scale(op, s)
        };
        let last = self.geom.site(self.geom.nx() as i64, self.geom.ny() as i64);
        let mut m = &factor(&self.wilson_x.matrix, index & 1 == 1) * &factor(&self.wilson_y.matrix, index & 2 == 2);
        let mut k = 2;
        for (r, phi) in self.fluxes.iter().enumerate() {
            if r == last {
                continue;
            }
            m = &m * &factor(&phi.matrix, (index >> k) & 1 == 1);
            k += 1;
        }
        SiteOperator { n_sites: self.geom.n(), matrix: prune(&m, 1e-14), label: format!("Pi_{index}") }
    }
}

pub fn is_hermitian(a: &SparseOp, tol: f64) -> bool {
    approx_eq(a, &adjoint(a), tol)
}
