//! End-to-end runs of the library on small systems.

use std::sync::Arc;

use entlab::commutator::{ratio_scan, SpectralProfile};
use entlab::dynamics::{lr_all_pairs, lr_check, time_grid, Evolution, LRSetting, LocalOp};
use entlab::hamiltonian::{assemble, fermionic_matrix, hubbard, jordan_wigner, tfim, ModeOrdering};
use entlab::lattice::{LatticeSpec, Region};
use entlab::operator::{max_abs_diff, pauli, PureState};
use entlab::qac::{build_filter, transport, QAPath, TransportOptions};
use entlab::rates::total_entangling_check;

#[test]
fn translated_pairs_match_direct_evolution() {
    let spec = LatticeSpec::chain(6).unwrap();
    let pot = tfim(&spec, 1.0, 1.5).unwrap();
    let evo = Arc::new(Evolution::new(&assemble(&pot).unwrap()));
    let grid = time_grid(0.0, 1.5, 7);
    let scan = lr_all_pairs(
        evo.clone(),
        &pot,
        &spec,
        &pauli::x(),
        &pauli::z(),
        2,
        1.0,
        &grid,
    )
    .unwrap();
    assert!(scan.used_translations);
    assert!(scan.violations.is_empty());

    for a in &scan.reports {
        let set = LRSetting::new(
            evo.clone(),
            &pot,
            &spec,
            LocalOp::new(a.x.clone(), pauli::x()),
            LocalOp::new(a.y.clone(), pauli::z()),
            1.0,
        )
        .unwrap();
        let b = lr_check(&set, &grid, true).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            if let (Some(x), Some(y)) = (ra.exact_norm, rb.exact_norm) {
                assert!(
                    (x - y).abs() < 1e-9,
                    "pair {:?}-{:?} at t={}",
                    a.x,
                    a.y,
                    ra.t
                );
            }
        }
    }
}

#[test]
fn short_path_transport_is_adiabatic() {
    let path = QAPath::tfim(4, 1.0, 2.0, 1.5, 40)
        .unwrap()
        .with_auto_floor(1.0);
    let filter = build_filter(path.gap_floor, 6.0).unwrap();
    let opts = TransportOptions {
        steps: 40,
        step_check: false,
        constants: true,
    };
    let res = transport(&path, &filter, &Region::new(0..2), opts).unwrap();
    assert!(res.final_fidelity > 0.999, "{}", res.final_fidelity);
    assert!(res.max_unitarity_defect < 1e-8);
    assert!(res.total_holds);
    assert!((res.delta_s - res.delta_s_exact).abs() < 1e-3);
}

#[test]
fn hubbard_spin_form_matches_fermionic_matrix() {
    let spec = LatticeSpec::new(2, 2).unwrap();
    for ordering in [ModeOrdering::RowMajor, ModeOrdering::Snake] {
        let f = hubbard(&spec, 1.0, 3.0, 0.2, ordering);
        let spin = assemble(&jordan_wigner(&f).unwrap()).unwrap();
        assert!(max_abs_diff(spin.matrix(), &fermionic_matrix(&f)) < 1e-12);
    }
}

#[test]
fn swap_of_maximally_entangled_pairs_hits_the_cap() {
    for d in 2..=3 {
        let psi = PureState::maximally_entangled(d).product(&PureState::maximally_entangled(d));
        let rep = total_entangling_check(&pauli::swap(d), [d, d, d, d], &psi).unwrap();
        assert!((rep.change - 2.0 * (d as f64).ln()).abs() < 1e-9);
        assert!(rep.holds);
    }
}

#[test]
fn scans_are_reproducible() {
    let a = ratio_scan(&[2, 4], &[0.3, 0.01], 50, 17, SpectralProfile::Mixed).unwrap();
    let b = ratio_scan(&[2, 4], &[0.3, 0.01], 50, 17, SpectralProfile::Mixed).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
