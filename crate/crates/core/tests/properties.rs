use std::f64::consts::PI;

use proptest::prelude::*;

use nosig_core::bohm::{decompose, normalize_on_grid, quantum_potential, EdgeRule, SignConvention};
use nosig_core::epr::{
    chsh_exact, eavesdrop_policy, joint_distribution, sample_trials, BasisRule, ChshAngles,
    DetectorSettings,
};
use nosig_core::evolution::{generator_locality_defect, verify_factorization};
use nosig_core::hamiltonian::{local_sum, PhysicalConstants};
use nosig_core::random::{random_density, random_hermitian, random_ket, seeded};
use nosig_core::state::{schmidt_state, PointerGrid, SPIN_A, SPIN_B};
use nosig_core::tensor::{
    c64, embed_labeled, expm_hermitian, kron, max_abs_diff, partial_trace, trace_distance,
    PhaseSign, SpaceSignature, C64,
};

fn sig(labels: &[(&str, usize)]) -> SpaceSignature {
    SpaceSignature::new(labels.iter().copied()).unwrap()
}

fn angle() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_is_associative(seed in any::<u64>(), da in 1usize..4, db in 1usize..4, dc in 1usize..4) {
        let mut rng = seeded(seed);
        let a = random_hermitian(&sig(&[("a", da)]), &mut rng).unwrap();
        let b = random_hermitian(&sig(&[("b", db)]), &mut rng).unwrap();
        let c = random_hermitian(&sig(&[("c", dc)]), &mut rng).unwrap();
        let left = kron(&[&kron(&[&a, &b]).unwrap(), &c]).unwrap();
        let right = kron(&[&a, &kron(&[&b, &c]).unwrap()]).unwrap();
        prop_assert_eq!(left.signature(), right.signature());
        prop_assert!(max_abs_diff(left.entries(), right.entries()) < 1e-14);
    }

    #[test]
    fn partial_trace_recovers_product_factor(seed in any::<u64>(), da in 1usize..4, db in 1usize..5) {
        let mut rng = seeded(seed);
        let ra = random_density(&sig(&[(SPIN_A, da)]), &mut rng).unwrap();
        let rb = random_density(&sig(&[(SPIN_B, db)]), &mut rng).unwrap();
        let joint = rb.tensor(&ra).unwrap();
        let back = partial_trace(&joint, &[SPIN_A]).unwrap();
        prop_assert!(max_abs_diff(back.entries(), ra.entries()) < 1e-13);
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = seeded(seed);
        let s = sig(&[("q", d)]);
        let (a, b, c) = (
            random_density(&s, &mut rng).unwrap(),
            random_density(&s, &mut rng).unwrap(),
            random_density(&s, &mut rng).unwrap(),
        );
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-13);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-13);
        let ac = trace_distance(&a, &c).unwrap();
        let cb = trace_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn evolution_composes(seed in any::<u64>(), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let mut rng = seeded(seed);
        let h = random_hermitian(&sig(&[("q", 4)]), &mut rng).unwrap();
        let us = expm_hermitian(&h, s, PhaseSign::Plus).unwrap();
        let ut = expm_hermitian(&h, t, PhaseSign::Plus).unwrap();
        let ust = expm_hermitian(&h, s + t, PhaseSign::Plus).unwrap();
        prop_assert!(max_abs_diff(us.matmul(&ut).unwrap().entries(), ust.entries()) < 1e-11);
        let back = expm_hermitian(&h, -s, PhaseSign::Minus).unwrap();
        prop_assert!(max_abs_diff(back.entries(), us.entries()) < 1e-12);
    }

    #[test]
    fn local_sums_factorize(seed in any::<u64>(), t in -10.0..10.0f64) {
        let mut rng = seeded(seed);
        let h_a = random_hermitian(&sig(&[(SPIN_A, 2)]), &mut rng).unwrap();
        let h_b = random_hermitian(&sig(&[(SPIN_B, 3)]), &mut rng).unwrap();
        prop_assert!(verify_factorization(&h_a, &h_b, t).unwrap() < 1e-9);
    }

    #[test]
    fn locality_defect_ignores_local_terms(seed in any::<u64>(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let mut rng = seeded(seed);
        let full = sig(&[(SPIN_A, 2), (SPIN_B, 3)]);
        let h = random_hermitian(&full, &mut rng).unwrap();
        let base = generator_locality_defect(&h, &[SPIN_A], &[SPIN_B]).unwrap().defect;
        let h_a = random_hermitian(&sig(&[(SPIN_A, 2)]), &mut rng).unwrap();
        let h_b = random_hermitian(&sig(&[(SPIN_B, 3)]), &mut rng).unwrap();
        let shifted = h
            .add(&embed_labeled(&h_a, &full).unwrap().scale(x)).unwrap()
            .add(&embed_labeled(&h_b, &full).unwrap().scale(y)).unwrap();
        let moved = generator_locality_defect(&shifted, &[SPIN_A], &[SPIN_B]).unwrap().defect;
        prop_assert!((base - moved).abs() < 1e-11);
        let pure_local = local_sum(&h_a, &h_b, &full).unwrap();
        prop_assert!(generator_locality_defect(&pure_local, &[SPIN_A], &[SPIN_B]).unwrap().defect < 1e-12);
    }

    #[test]
    fn remote_hamiltonian_never_moves_local_marginal(seed in any::<u64>(), t in -5.0..5.0f64, minus in any::<bool>()) {
        let sign = if minus { PhaseSign::Minus } else { PhaseSign::Plus };
        let mut rng = seeded(seed);
        let a = sig(&[(SPIN_A, 2)]);
        let bp = sig(&[("D", 2), (SPIN_B, 2)]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi0 = schmidt_state(&[c64(r, 0.0), c64(0.0, r)], &bp, &a).unwrap();
        let h_a = random_hermitian(&a, &mut rng).unwrap();
        let full = psi0.signature().clone();
        let mut marginals = Vec::new();
        for _ in 0..2 {
            let h_db = random_hermitian(&bp, &mut rng).unwrap();
            let h = local_sum(&h_a, &h_db, &full).unwrap();
            let psi = nosig_core::evolution::evolve_with(&h, &psi0, t, sign).unwrap();
            marginals.push(partial_trace(&psi.density(), &[SPIN_A]).unwrap());
        }
        prop_assert!(trace_distance(&marginals[0], &marginals[1]).unwrap() < 1e-9);
    }

    #[test]
    fn joint_tables_are_valid(ta in angle(), tb in angle(), te in angle()) {
        let s = DetectorSettings::new(ta, tb).unwrap();
        let clean = joint_distribution(&s);
        prop_assert!(clean.is_valid(1e-14));
        prop_assert!((clean.correlation() + (ta - tb).cos()).abs() < 1e-12);
        let eve = eavesdrop_policy(BasisRule::Fixed(te)).transform(&s);
        prop_assert!(eve.is_valid(1e-14));
        prop_assert!((eve.marginal_a(1) - 0.5).abs() < 1e-14);
        prop_assert!((eve.marginal_b(-1) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn chsh_respects_tsirelson_and_local_bound_under_eve(a in angle(), a2 in angle(), b in angle(), b2 in angle()) {
        let angles = ChshAngles::new(a, a2, b, b2);
        prop_assert!(chsh_exact(&angles, None) <= 2.0 * std::f64::consts::SQRT_2 + 1e-12);
        let eve = eavesdrop_policy(BasisRule::UniformRandom);
        prop_assert!(chsh_exact(&angles, Some(&eve)) <= 2.0 + 1e-12);
    }

    #[test]
    fn trials_depend_only_on_seed_and_index(seed in any::<u64>(), ta in angle(), tb in angle()) {
        let first = DetectorSettings::new(ta, tb).unwrap();
        let second = DetectorSettings::new(tb, ta).unwrap();
        let short = sample_trials(&[first], 64, seed, None).unwrap();
        let long = sample_trials(&[first, second], 64, seed, None).unwrap();
        prop_assert_eq!(&short[..], &long[..64]);
    }

    #[test]
    fn quantum_potential_sees_only_amplitude(seed in any::<u64>(), phase in -PI..PI) {
        let mut rng = seeded(seed);
        let g = PointerGrid::centered(40, 0.2).unwrap();
        let ket = random_ket(&g.signature("x"), &mut rng).unwrap();
        let psi = normalize_on_grid(ket.amplitudes().as_slice(), g.spacing()).unwrap();
        let rotated: Vec<C64> = psi.iter().map(|z| z * C64::from_polar(1.0, phase)).collect();
        let consts = PhysicalConstants::default();
        let q = |v: &[C64], sign| {
            let f = decompose(v, &g, &consts).unwrap();
            quantum_potential(&f, &consts, sign, EdgeRule::OneSided).unwrap().values
        };
        let base = q(&psi, SignConvention::Paper);
        for (a, b) in q(&rotated, SignConvention::Paper).iter().zip(&base) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        for (a, b) in q(&psi, SignConvention::Standard).iter().zip(&base) {
            prop_assert!(*a == -*b || (a.is_nan() && b.is_nan()));
        }
    }
}

#[test]
fn tsirelson_bound_on_coarse_grid() {
    let step = PI / 12.0;
    let mut best: f64 = 0.0;
    for i in 0..24 {
        for j in 0..24 {
            for k in 0..24 {
                for l in 0..24 {
                    let angles = ChshAngles::new(
                        i as f64 * step,
                        j as f64 * step,
                        k as f64 * step,
                        l as f64 * step,
                    );
                    best = best.max(chsh_exact(&angles, None));
                }
            }
        }
    }
    assert!(best <= 2.0 * std::f64::consts::SQRT_2 + 1e-12);
    assert!((best - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
}
