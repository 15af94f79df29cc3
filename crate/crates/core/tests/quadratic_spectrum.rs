use gamma_kitaev::ed;
use gamma_kitaev::gauge::*;
use gamma_kitaev::ladder::*;
use gamma_kitaev::lattice::LatticeGeometry;
use gamma_kitaev::spectrum::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g22() -> LatticeGeometry {
    LatticeGeometry::new(2, 2).unwrap()
}

fn contains(values: &[C64], z: C64, tol: f64) -> bool {
    values.iter().any(|v| (v - z).norm() < tol)
}

#[test]
fn coupling_validation() {
    assert!(CouplingParams::new([1.0; 4], -0.1).is_err());
    assert!(CouplingParams::new([0.0; 4], 1.0).is_err());
    assert!(CouplingParams::new([1.0, f64::NAN, 1.0, 1.0], 1.0).is_err());
}

#[test]
fn assembled_matrices_are_antisymmetric_with_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (nx, ny) in [(2, 2), (4, 4)] {
        let geom = LatticeGeometry::new(nx, ny).unwrap();
        let p = CouplingParams::new([3.0, 4.0, 1.0, 2.0], 0.7).unwrap();
        for _ in 0..20 {
            let a = assemble_structure_matrix(&GaugeField::random(geom, &mut rng), &p);
            assert!(a.is_antisymmetric());
            assert_eq!(a.dim(), 2 * geom.n());
            assert_eq!(a.offset, C64::new(0.0, -2.0 * 0.7 * geom.n_cells() as f64));
        }
    }
}

#[test]
fn unitary_limit_is_hermitian_with_real_rapidities() {
    let p = CouplingParams::new([3.0, 4.0, 1.0, 2.0], 0.0).unwrap();
    let a = assemble_structure_matrix(&GaugeField::uniform(g22()), &p);
    let n = a.dim();
    for i in 0..n {
        for j in 0..n {
            assert!((a.get(i, j) - a.get(j, i).conj()).norm() < 1e-14);
        }
    }
    let r = compute_rapidities(&a).unwrap();
    assert!(r.betas.iter().all(|b| b.im.abs() < 1e-10));
}

#[test]
fn decoupled_dimers() {
    let gamma = 0.8;
    let p = CouplingParams { j: [0.0; 4], gamma };
    let a = assemble_structure_matrix(&GaugeField::uniform(g22()), &p);
    let r = compute_rapidities(&a).unwrap();
    assert_eq!(r.betas.len(), 4);
    for b in &r.betas {
        assert!((b - C64::new(0.0, -gamma)).norm() < 1e-12, "{b}");
    }
}

#[test]
fn parity_flips_with_any_single_link() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let g = GaugeField::random(g22(), &mut rng);
    assert_eq!(allowed_parity(&GaugeField::uniform(g22())), 1);
    for k in 0..20 {
        let mut h = g.clone();
        h.flip(k);
        assert_eq!(allowed_parity(&h), -allowed_parity(&g));
    }
}

#[test]
fn each_sector_holds_half_its_fock_space() {
    let ev = SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new([1.0, 2.0, 0.5, 1.5], 0.6).unwrap());
    let mut total = 0;
    for i in 0..1u64 << 13 {
        let n = ev.spectrum(&SectorId::from_index(13, i)).unwrap().full_spectrum.unwrap().len();
        assert_eq!(n, 8);
        total += n;
    }
    assert_eq!(total, 1 << 16);
}

#[test]
fn steady_family_has_zero_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for gamma in [0.1, 1.0, 7.0] {
        let p = CouplingParams::new([3.0, 4.0, 1.0, 2.0], gamma).unwrap();
        for _ in 0..10 {
            let g = GaugeField::ness_partner(&GaugeField::random(g22(), &mut rng));
            let a = assemble_structure_matrix(&g, &p);
            let r = compute_rapidities(&a).unwrap();
            assert!(sector_spectrum(&r, allowed_parity(&g), a.offset).unwrap().zero_mode_count >= 1);
        }
    }
}

#[test]
fn unitary_limit_has_zero_gap() {
    let ev = SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new([1.0; 4], 0.0).unwrap());
    for i in [0u64, 5, 4000, 8191] {
        let res = ev.spectrum(&SectorId::from_index(13, i)).unwrap();
        assert!(res.min_nonzero_rate.abs() < 1e-12);
    }
}

#[test]
fn greedy_gap_matches_enumeration_at_2x2() {
    for j in [[1.0; 4], [3.0, 4.0, 1.0, 2.0]] {
        for gamma in [0.05, 0.8, 6.0] {
            let ev = SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new(j, gamma).unwrap());
            for i in 0..1u64 << 13 {
                let s = SectorId::from_index(13, i);
                let full = ev.spectrum(&s).unwrap();
                let fast = ev.gap(&s).unwrap();
                assert_eq!(full.zero_mode_count, fast.zero_mode_count, "{j:?} {gamma} {i}");
                let scale = full.min_nonzero_rate.abs().max(1.0);
                assert!((full.min_nonzero_rate - fast.min_nonzero_rate).abs() <= 1e-12 * scale, "{j:?} {gamma} {i}");
                assert!(!fast.truncated);
            }
        }
    }
}

fn random_ness_fluxes(geom: LatticeGeometry, rng: &mut ChaCha8Rng) -> FluxData {
    let nc = geom.n_cells();
    loop {
        let mut ind = vec![-1i8; 6 * nc + 2];
        for k in (0..2 * nc).chain(6 * nc..6 * nc + 2) {
            ind[k] = if rng.gen::<bool>() { 1 } else { -1 };
        }
        if let Ok(f) = FluxData::from_independent(geom, &ind) {
            return f;
        }
    }
}

#[test]
fn zero_modes_follow_the_steady_block_at_4x4() {
    let geom = LatticeGeometry::new(4, 4).unwrap();
    let cg = CanonicalGauge::new(geom);
    let ev = SectorEvaluator::new(cg.clone(), CouplingParams::new([3.0, 4.0, 1.0, 2.0], 0.9).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..10 {
        let f = random_ness_fluxes(geom, &mut rng);
        assert!(ness_flux_conditions(&f));
        let res = ev.gap(&cg.sector_from_fluxes(&f).unwrap()).unwrap();
        assert_eq!(res.zero_mode_count, 1);
        let s = SectorId::random(geom.sector_bits(), &mut rng);
        let f = cg.fluxes_from_sector(&s).unwrap();
        let res = ev.gap(&s).unwrap();
        assert_eq!(res.zero_mode_count > 0, ness_flux_conditions(&f));
    }
}

#[test]
fn degenerate_rapidities_are_reproducible() {
    let ev = SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new([1.0; 4], 0.5).unwrap());
    let s = SectorId::zeros(13);
    assert_eq!(ev.gap(&s).unwrap(), ev.gap(&s).unwrap());
    assert_eq!(ev.spectrum(&s).unwrap(), ev.spectrum(&s).unwrap());
}

#[test]
fn ness_count_for_generic_couplings() {
    let ev = SectorEvaluator::new(CanonicalGauge::new(g22()), CouplingParams::new([3.0, 4.0, 1.0, 2.0], 0.7).unwrap());
    let total: u64 = (0..1u64 << 13).map(|i| ev.gap(&SectorId::from_index(13, i)).unwrap().zero_mode_count).sum();
    assert_eq!(total, 32);
}

#[test]
fn ladder_unitary_limit_is_energy_differences() {
    let (jx, jy) = (0.7, 1.3);
    let h = ed::sk_hamiltonian(2, jx, jy);
    let m = faer::Mat::<C64>::from_fn(16, 16, |r, c| h.get(r, c).copied().unwrap_or_default());
    let e = m.eigenvalues().unwrap();
    let diffs: Vec<C64> = e.iter().flat_map(|a| e.iter().map(move |b| a - b)).collect();
    let sectors = ladder_full_spectrum(2, jx, jy, 0.0).unwrap();
    assert!(ed::multiset_distance(&sectors, &diffs).unwrap() < 1e-9);
}

#[test]
fn ladder_uniform_sector_pairs_about_the_imaginary_axis() {
    let g = LadderGauge::uniform(2);
    let res = ladder_sector_spectrum(&g, 1.0, 1.0, 0.6).unwrap();
    let spec = res.full_spectrum.unwrap();
    for e in &spec {
        assert!(contains(&spec, -e.conj(), 1e-9), "{e}");
    }
}

#[test]
fn ladder_sector_guards() {
    assert!(LadderGauge::from_sector(0, 0).is_err());
    assert!(LadderGauge::from_sector(2, 32).is_err());
}
