use faer::Mat;
use gamma_kitaev::gauge::GaugeField;
use gamma_kitaev::lattice::LatticeGeometry;
use gamma_kitaev::perturbation::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn single_block_is_identity() {
    let j = [0.0, 1.0, -1.0, 0.0];
    let dec = block_diagonalize(&j, 2).unwrap();
    assert_eq!(dec.eps.len(), 1);
    assert!((dec.eps[0] - 1.0).abs() < 1e-14);
    let t = dec.transform(&j);
    assert!((t[1] - 1.0).abs() < 1e-12 && (t[2] + 1.0).abs() < 1e-12);
    assert!(dec.orthogonality_residual() < 1e-12);
    for (k, want) in [1.0, 0.0, 0.0, 1.0].iter().enumerate() {
        assert!((dec.q[k] - want).abs() < 1e-12);
    }
}

#[test]
fn hopping_blocks_match_eigenvalue_moduli() {
    let geom = LatticeGeometry::new(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for g in [GaugeField::uniform(geom), GaugeField::random(geom, &mut rng)] {
        let j = hopping_matrix(&g, [3.0, 4.0, 1.0, 2.0]);
        let n = geom.n();
        let dec = block_diagonalize(&j, n).unwrap();
        assert!(dec.block_residual(&j) < 1e-10);
        assert!(dec.orthogonality_residual() < 1e-12);
        let h = Mat::<C64>::from_fn(n, n, |r, s| C64::new(0.0, j[r * n + s]));
        let ev: Vec<f64> = h.eigenvalues().unwrap().iter().map(|z| z.re).filter(|&e| e > 1e-10).collect();
        let blocks: Vec<f64> = dec.eps.iter().copied().filter(|&e| e > 0.0).collect();
        assert_eq!(blocks.len(), ev.len());
        for (a, b) in sorted(blocks).iter().zip(sorted(ev)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn decomposition_guards() {
    assert!(block_diagonalize(&[0.0; 3], 2).is_err());
    assert!(block_diagonalize(&[0.0; 9], 3).is_err());
    assert!(block_diagonalize(&[0.0, 1.0, 1.0, 0.0], 2).is_err());
    let zero = block_diagonalize(&[0.0; 16], 4).unwrap();
    assert_eq!(zero.eps, vec![0.0, 0.0]);
    assert!(zero.orthogonality_residual() < 1e-12);
}

#[test]
fn uniform_master_matches_closed_form() {
    for cells in 2..=4 {
        let m = translation_invariant_master_matrix(cells).unwrap();
        let num = sorted(m.eigenvalues().unwrap());
        let closed = sorted(master_closed_form_spectrum(cells));
        assert_eq!(num.len(), closed.len());
        for (a, b) in num.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-10, "cells={cells}: {a} vs {b}");
        }
    }
}

#[test]
fn master_matrix_structure() {
    let geom = LatticeGeometry::new(2, 2).unwrap();
    let g = GaugeField::uniform(geom);
    let dec = block_diagonalize(&hopping_matrix(&g, [1.0; 4]), geom.n()).unwrap();
    let m = classical_master_matrix(&dec, &geom).unwrap();
    assert_eq!(m.dim, 16);
    for a in 0..m.dim {
        assert!((m.get(a, a) + geom.n() as f64).abs() < 1e-12);
        for b in 0..m.dim {
            if a != b {
                assert!(m.get(a, b) >= -1e-14);
            }
            assert!((m.get(a, b) - m.get(b, a)).abs() < 1e-12);
        }
    }
    let ev = sorted(m.eigenvalues().unwrap());
    assert!(ev.last().unwrap().abs() < 1e-10);
    assert!(ev.iter().all(|&e| e <= 1e-10));
    for block in 0..geom.n_cells() {
        let total: f64 = (0..geom.n_cells()).map(|c| pair_weight(&dec, &geom, block, c)).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }
}

#[test]
fn master_dimension_guard() {
    assert!(translation_invariant_master_matrix(7).is_err());
    let geom = LatticeGeometry::new(4, 2).unwrap();
    let dec = block_diagonalize(&[0.0, 1.0, -1.0, 0.0], 2).unwrap();
    assert!(classical_master_matrix(&dec, &geom).is_err());
}

#[test]
fn uniform_labels_are_stationary_and_one_flip_costs_four() {
    for cells in 2..=4 {
        let up = vec![1i8; cells];
        let down = vec![-1i8; cells];
        assert!(master_closed_form(&up, &up).abs() < 1e-12);
        assert!(master_closed_form(&down, &down).abs() < 1e-12);
        let mut one = up.clone();
        one[0] = -1;
        assert!((master_closed_form(&one, &up) + 4.0).abs() < 1e-12);
    }
    let spec = sorted(master_closed_form_spectrum(2));
    let nonzero: Vec<f64> = spec.iter().copied().filter(|e| e.abs() > 1e-9).collect();
    assert!((nonzero.last().unwrap() + 4.0).abs() < 1e-12);
}

#[test]
fn delta_table() {
    assert_eq!(DELTA_TILDE[0], [1, 1, -1, -1, 1, 1, -1, -1]);
    assert_eq!(DELTA_TILDE[1], [1, 1, -1, -1, -1, -1, 1, 1]);
    assert_eq!(DELTA_TILDE[2], [1, -1, 1, -1, -1, 1, -1, 1]);
    assert_eq!(DELTA_TILDE[3], [1, -1, 1, -1, 1, -1, 1, -1]);
    let columns: std::collections::HashSet<[i8; 4]> =
        (1..=8u8).map(|q| [1, 2, 3, 4].map(|d| delta_tilde(d, q))).collect();
    assert_eq!(columns.len(), 8);
}

#[test]
fn uniform_labels_have_no_bad_bonds() {
    let geom = LatticeGeometry::new(4, 4).unwrap();
    for q in 1..=8 {
        assert_eq!(s_eigenvalue(&QConfig::uniform(&geom, q), &geom).unwrap(), 0);
    }
}

#[test]
fn single_site_defect() {
    let geom = LatticeGeometry::new(4, 4).unwrap();
    for site in [geom.site(2, 2), geom.site(1, 2)] {
        for bg in 1..=8u8 {
            let mut best = u32::MAX;
            for q in (1..=8u8).filter(|&q| q != bg) {
                let mut c = QConfig::uniform(&geom, bg);
                c.labels[site] = q;
                let s = s_eigenvalue(&c, &geom).unwrap();
                let differing = (1..=4).filter(|&d| delta_tilde(d, q) != delta_tilde(d, bg)).count() as u32;
                assert_eq!(s, 2 * differing, "bg={bg} q={q}");
                best = best.min(s);
            }
            assert_eq!(best, 4);
        }
    }
}

#[test]
fn diagonal_band() {
    let geom = LatticeGeometry::new(6, 6).unwrap();
    for len in 1..6i64 {
        let mut c = QConfig::uniform(&geom, 1);
        for t in 0..len {
            for off in [0, 1] {
                c.labels[geom.site(1 + t, 1 + off - t)] = 3;
            }
        }
        assert_eq!(s_eigenvalue(&c, &geom).unwrap(), 4, "len={len}");
    }
}

#[test]
fn s_is_a_multiple_of_four() {
    let geom = LatticeGeometry::new(4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..500 {
        let c = QConfig { labels: (0..geom.n()).map(|_| rng.gen_range(1..=8)).collect() };
        assert_eq!(s_eigenvalue(&c, &geom).unwrap() % 4, 0);
    }
}

#[test]
fn label_validation() {
    let geom = LatticeGeometry::new(2, 2).unwrap();
    assert!(s_eigenvalue(&QConfig { labels: vec![1; 3] }, &geom).is_err());
    assert!(s_eigenvalue(&QConfig { labels: vec![0, 1, 1, 1] }, &geom).is_err());
    assert!(s_eigenvalue(&QConfig { labels: vec![9, 1, 1, 1] }, &geom).is_err());
}

#[test]
fn minimum_over_restrictions() {
    let geom = LatticeGeometry::new(2, 2).unwrap();
    assert_eq!(min_nonzero_s(&geom, QRestriction::All).unwrap(), Some(4));
    assert_eq!(min_nonzero_s(&geom, QRestriction::SingleSiteDefects).unwrap(), Some(4));
    assert_eq!(min_nonzero_s(&geom, QRestriction::Uniform).unwrap(), None);
    assert!(min_nonzero_s(&LatticeGeometry::new(4, 4).unwrap(), QRestriction::All).is_err());
}

#[test]
fn large_gamma_branches() {
    let (p, m) = large_gamma_rates(0.0, 1.5).unwrap();
    assert!(p.norm() < 1e-15 && (m + 6.0).norm() < 1e-14);
    let (p, m) = large_gamma_rates(2.0, 1.0).unwrap();
    assert!((p - C64::new(-2.0, 0.0)).norm() < 1e-14 && (m - C64::new(-2.0, 0.0)).norm() < 1e-14);
    let (p, m) = large_gamma_rates(4.0, 1.0).unwrap();
    assert!((p.re + 2.0).abs() < 1e-14 && (p.im - 2.0).abs() < 1e-14 && (m - p.conj()).norm() < 1e-14);
    for gamma in [0.3, 2.0, 50.0] {
        for s in [4.0, 8.0, 12.0] {
            let (p, m) = large_gamma_rates(s, gamma).unwrap();
            for w in [p, m] {
                assert!((w * w + 4.0 * gamma * w + 2.0 * s).norm() < 1e-12 * (1.0 + gamma * gamma));
            }
        }
    }
    let (p, _) = large_gamma_rates(4.0, 1e3).unwrap();
    assert!((p.re / large_gamma_asymptote(4.0, 1e3) - 1.0).abs() < 1e-5);
    assert!(large_gamma_rates(4.0, 0.0).is_err());
}

#[test]
fn dissipator_rates() {
    assert_eq!(dissipator_sector_rate(0, 3.0), 0.0);
    assert_eq!(dissipator_sector_rate(2, 0.5), -2.0);
}
