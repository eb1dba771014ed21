//! The real-time entropy rate of a lattice cut against the bipartite
//! entangling rate of the terms that straddle it.

use entlab::dynamics::{realtime_entropy_rate, realtime_rate_finite_difference};
use entlab::hamiltonian::{assemble, tfim, Potential};
use entlab::lattice::{LatticeSpec, Region};
use entlab::operator::{permute_state, HermitianOperator, PureState};
use entlab::random::{random_pure_state, seeded};
use entlab::rates::{entangling_rate, BipartiteSetting};

#[test]
fn crossing_terms_carry_the_whole_rate() {
    let spec = LatticeSpec::chain(8).unwrap();
    let pot = tfim(&spec, 1.0, 1.3).unwrap();
    let region = Region::new([2, 3, 4]);
    let mut rng = seeded(808);
    for _ in 0..3 {
        let psi = random_pure_state(vec![2; 8], &mut rng);
        let rr = realtime_entropy_rate(&pot, &spec, &psi, &region).unwrap();
        assert!(
            rr.max_interior <= 1e-10,
            "interior term leaked {}",
            rr.max_interior
        );
        assert!(rr.rate.abs() <= rr.bound);

        // Move the region to the front and keep only the crossing terms.
        let order = [2, 3, 4, 0, 1, 5, 6, 7];
        let new_pos = |s: usize| order.iter().position(|&o| o == s).unwrap();
        let mut cut = Potential::new(8, 2);
        for t in &pot.terms {
            let inside = t.sites.iter().filter(|s| region.contains(**s)).count();
            if inside > 0 && inside < t.sites.len() {
                let sites: Vec<usize> = t.sites.iter().map(|&s| new_pos(s)).collect();
                cut.add_term(sites, t.op.clone(), new_pos(t.anchor))
                    .unwrap();
            }
        }
        let h = assemble(&cut).unwrap();
        let amps = permute_state(psi.amplitudes(), &[2; 8], &order);
        let moved = PureState::new(amps, vec![1, 8, 32, 1]).unwrap();
        let set = BipartiteSetting::new(
            [1, 8, 32, 1],
            HermitianOperator::new(h.into_matrix(), None).unwrap(),
            moved,
        )
        .unwrap();
        let gamma = entangling_rate(&set).unwrap();
        assert!((gamma - rr.rate).abs() <= 1e-9, "{gamma} vs {}", rr.rate);

        let fd = realtime_rate_finite_difference(&pot, &psi, &region, 1e-4).unwrap();
        assert!(
            (fd - rr.rate).abs() <= 1e-6 * rr.rate.abs().max(1e-3),
            "{fd} vs {}",
            rr.rate
        );
    }
}

#[test]
fn product_state_across_the_cut_has_zero_rate() {
    let spec = LatticeSpec::chain(6).unwrap();
    let pot = tfim(&spec, 1.0, 0.7).unwrap();
    let mut rng = seeded(9);
    let left = random_pure_state(vec![2; 3], &mut rng);
    let right = random_pure_state(vec![2; 3], &mut rng);
    let psi = left.product(&right);
    let region = Region::new(0..3);
    // Rank one across the cut: the library falls back to finite differences.
    let rr = realtime_entropy_rate(&pot, &spec, &psi, &region).unwrap();
    assert!(rr.finite_difference);
    assert!(rr.rate.abs() < 1e-6);
}
