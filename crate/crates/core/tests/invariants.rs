//! Property tests of structural invariants.

use proptest::prelude::*;

use entlab::lattice::{boundary_and_area, boundary_profile, torus_distance, LatticeSpec, Region};
use entlab::operator::*;
use entlab::random::{random_density, random_hermitian, random_pure_state, seeded};
use entlab::rates::{entangling_rate, mixing_rate, BipartiteSetting, TwoStateEnsemble};

fn spec_strategy() -> impl Strategy<Value = LatticeSpec> {
    (1usize..=3, 3usize..=6, any::<bool>()).prop_map(|(nu, l, open)| {
        let s = LatticeSpec::new(nu, l).unwrap();
        if open {
            s.open()
        } else {
            s
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(spec in spec_strategy(), a in 0usize..1000, b in 0usize..1000, c in 0usize..1000) {
        let n = spec.n_sites();
        let (x, y, z) = (a % n, b % n, c % n);
        let d = |u, v| torus_distance(u, v, &spec).unwrap();
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert_eq!(d(x, y) == 0, x == y);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z));
        prop_assert!(d(x, y) <= spec.max_distance());
    }

    #[test]
    fn profile_obeys_cap(spec in spec_strategy(), mask in prop::collection::vec(any::<bool>(), 216)) {
        let n = spec.n_sites();
        let region = Region::new((0..n).filter(|&v| mask[v]));
        prop_assume!(!region.is_empty() && region.len() < n);
        let area = boundary_and_area(&region, &spec).unwrap().area;
        let complement = boundary_and_area(&region.complement(&spec), &spec).unwrap().area;
        prop_assert_eq!(area, complement);
        for row in boundary_profile(&region, &spec, 3).unwrap() {
            prop_assert!(row.m as f64 <= row.bound);
        }
    }

    #[test]
    fn entropy_within_log_dim(seed in any::<u64>(), n in 2usize..6, rank in 1usize..6) {
        let rho = random_density(n, rank.min(n), &mut seeded(seed));
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (n as f64).ln() + 1e-12);
        prop_assert!(s <= (rank.min(n) as f64).ln() + 1e-9);
    }

    #[test]
    fn reduced_states_share_spectrum(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let psi = random_pure_state(vec![da, db], &mut seeded(seed));
        let a = psi.entanglement_entropy(&[0]).unwrap();
        let b = psi.entanglement_entropy(&[1]).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn mixing_rate_is_odd_in_h(seed in any::<u64>(), p in 0.05f64..0.95) {
        let mut rng = seeded(seed);
        let ens = TwoStateEnsemble::new(p, random_density(3, 3, &mut rng), random_density(3, 3, &mut rng)).unwrap();
        let h = HermitianOperator::new(random_hermitian(3, &mut rng), None).unwrap();
        let up = mixing_rate(&ens, &h).unwrap();
        let down = mixing_rate(&ens, &h.scaled(-1.0)).unwrap();
        prop_assert!((up + down).abs() < 1e-10 * up.abs().max(1.0));
    }

    #[test]
    fn entangling_rate_respects_log_cap(seed in any::<u64>(), a in 1usize..3, da in 2usize..4, db in 2usize..4, b in 1usize..3) {
        let mut rng = seeded(seed);
        let h = HermitianOperator::new(random_hermitian(da * db, &mut rng), None).unwrap();
        let psi = random_pure_state(vec![a, da, db, b], &mut rng);
        let set = BipartiteSetting::new([a, da, db, b], h, psi).unwrap();
        let g = entangling_rate(&set).unwrap();
        prop_assert!(g.abs() <= 4.0 * set.h_norm() * (set.d() as f64).ln() + 1e-10);
    }

    #[test]
    fn trace_norm_dominates_operator_norm(seed in any::<u64>(), n in 1usize..7) {
        let m = random_hermitian(n, &mut seeded(seed));
        let t = trace_norm(&m);
        let o = operator_norm(&m);
        prop_assert!(o <= t + 1e-12);
        prop_assert!(t <= n as f64 * o + 1e-9);
    }
}
