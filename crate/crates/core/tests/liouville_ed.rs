use gamma_kitaev::clifford::{self, build_model_operators, SparseOp};
use gamma_kitaev::ed::*;
use gamma_kitaev::gauge::{CanonicalGauge, SectorId};
use gamma_kitaev::ladder::ladder_full_spectrum;
use gamma_kitaev::lattice::LatticeGeometry;
use gamma_kitaev::spectrum::{CouplingParams, SectorEvaluator};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bilayer_spectrum(j: [f64; 4], gamma: f64) -> Vec<C64> {
    let ev = SectorEvaluator::new(CanonicalGauge::new(LatticeGeometry::new(2, 2).unwrap()), CouplingParams::new(j, gamma).unwrap());
    (0..1u64 << 13).flat_map(|i| ev.spectrum(&SectorId::from_index(13, i)).unwrap().full_spectrum.unwrap()).collect()
}

#[test]
fn generators_preserve_trace() {
    for (jx, jy, g) in [(1.0, 1.0, 0.0), (0.3, 1.7, 0.9)] {
        assert!(sk_generator(2, jx, jy, g).unwrap().left_identity_residual() < 1e-12);
    }
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), [3.0, 4.0, 1.0, 2.0]).unwrap();
    assert!(bilayer_generator(&ops, 1.3).unwrap().left_identity_residual() < 1e-12);
}

#[test]
fn closed_ladder_is_energy_differences() {
    let h = sk_hamiltonian(2, 1.0, 0.4);
    let gen = build_vectorized_w(&h, &[], ModelTag::SkLadder).unwrap();
    let m = faer::Mat::<C64>::from_fn(16, 16, |r, c| h.get(r, c).copied().unwrap_or_default());
    let e = m.eigenvalues().unwrap();
    let diffs: Vec<C64> = e.iter().flat_map(|a| e.iter().map(move |b| a - b)).collect();
    assert!(multiset_distance(&gen.dense_eigenvalues().unwrap(), &diffs).unwrap() < 1e-10);
}

#[test]
fn dense_ladder_matches_sectors_at_a_generic_point() {
    let (jx, jy, g) = (0.7, 1.3, 0.4);
    let dense = sk_generator(2, jx, jy, g).unwrap().dense_eigenvalues().unwrap();
    let sectors = ladder_full_spectrum(2, jx, jy, g).unwrap();
    assert_eq!(dense.len(), 256);
    assert!(multiset_distance(&dense, &sectors).unwrap() < 1e-8);
}

#[test]
fn dense_ladder_spectrum_is_closed_under_reflection() {
    let dense = sk_generator(2, 1.0, 0.6, 0.7).unwrap().dense_eigenvalues().unwrap();
    let mirrored: Vec<C64> = dense.iter().map(|e| -e.conj()).collect();
    assert!(multiset_distance(&dense, &mirrored).unwrap() < 1e-8);
}

#[test]
fn infinite_temperature_state_is_steady() {
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), [1.0; 4]).unwrap();
    let gen = bilayer_generator(&ops, 0.8).unwrap();
    assert!(check_ness_annihilation(&gen, &[clifford::identity(ops.dim())]).unwrap().all_within(1e-12));
}

#[test]
fn every_projector_is_annihilated() {
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), [3.0, 4.0, 1.0, 2.0]).unwrap();
    let gen = bilayer_generator(&ops, 1.1).unwrap();
    let ps: Vec<SparseOp> = (0..ops.projector_count()).map(|i| ops.projector(i).matrix).collect();
    let rep = check_ness_annihilation(&gen, &ps).unwrap();
    assert_eq!(rep.residuals.len(), 32);
    assert!(rep.all_within(1e-9), "{}", rep.max_residual());
}

#[test]
fn random_hermitian_state_is_not_steady() {
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), [1.0; 4]).unwrap();
    let gen = bilayer_generator(&ops, 0.5).unwrap();
    let d = ops.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut entries = Vec::new();
    for _ in 0..200 {
        let (r, c) = (rng.gen_range(0..d), rng.gen_range(0..d));
        let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        entries.push((r, c, z));
        entries.push((c, r, z.conj()));
    }
    let m = clifford::from_entries(d, &entries);
    assert!(check_ness_annihilation(&gen, &[m]).unwrap().max_residual() > 1e-3);
}

#[test]
fn moments_match_sector_sums() {
    let j = [3.0, 4.0, 1.0, 2.0];
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), j).unwrap();
    let gen = bilayer_generator(&ops, 1.0).unwrap();
    for r in moment_crosscheck(&gen, &bilayer_spectrum(j, 1.0), &[1, 2, 3]).unwrap() {
        assert!(r.relative_error() < 1e-8, "m={} {:?}", r.order, r);
    }
    let gen0 = bilayer_generator(&ops, 0.0).unwrap();
    let r = &moment_crosscheck(&gen0, &bilayer_spectrum(j, 0.0), &[2]).unwrap()[0];
    assert!(r.generator.im.abs() <= 1e-9 * r.scale && r.sectors.im.abs() <= 1e-9 * r.scale);
    assert!(r.relative_error() < 1e-8);
}

#[test]
fn moment_check_rejects_wrong_length() {
    let gen = sk_generator(1, 1.0, 1.0, 0.5).unwrap();
    assert!(moment_crosscheck(&gen, &[C64::new(0.0, 0.0)], &[1]).is_err());
}

#[test]
fn block_spectrum_counts_steady_states() {
    let ops = build_model_operators(LatticeGeometry::new(2, 2).unwrap(), [3.0, 4.0, 1.0, 2.0]).unwrap();
    let b = bilayer_block_spectrum(&ops, 0.9, 1e-9).unwrap();
    assert_eq!(b.eigenvalues.len(), 1 << 16);
    assert!(b.commutator_residual < 1e-12);
    assert_eq!(b.zero_algebraic, 32);
    assert_eq!(b.zero_geometric, 32);
}

#[test]
fn cluster_comparison_tolerates_split_degeneracies() {
    let a = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-2.0, 0.5)];
    let b = vec![C64::new(1.0 + 1e-5, 0.0), C64::new(1.0 - 1e-5, 0.0), C64::new(-2.0, 0.5)];
    let c = compare_by_clusters(&a, &b, 1e-3);
    assert_eq!(c.unmatched, 0);
    assert!(c.max_mean_distance < 1e-14);
    assert!(multiset_distance(&a, &b).unwrap() > 1e-6);
}
