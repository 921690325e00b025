use proptest::prelude::*;
use qutrit::qmath::{distance_mod_phase, haar_unitary, random_density, trace_distance};
use qutrit::synth::{decompose, Scheme};
use qutrit::tomo::{mle_reconstruct, simulate_fractions, MleOptions, Noise, ReadoutSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any unitary is recovered up to a global phase by either scheme.
    #[test]
    fn decomposition_recomposes(seed in any::<u64>(), dual in any::<bool>()) {
        let u = haar_unitary(&mut ChaCha8Rng::seed_from_u64(seed));
        let scheme = if dual { Scheme::DualTone } else { Scheme::SingleTone };
        let seq = decompose(&u, scheme).unwrap();
        prop_assert_eq!(seq.len(), 3);
        prop_assert!(distance_mod_phase(&seq.unitary(), &u) < 1e-9);
    }

    /// Reconstruction from shot-noise data is a valid density matrix near the
    /// source state.
    #[test]
    fn mle_output_is_physical(seed in any::<u64>(), atoms in 1_000u64..200_000) {
        let rho = random_density(&mut ChaCha8Rng::seed_from_u64(seed));
        let set = ReadoutSet::standard();
        let data = simulate_fractions(&rho, &set, &Noise::Multinomial { atoms, seed }).unwrap();
        let rec = mle_reconstruct(&data, &set, &MleOptions::default()).unwrap().rho;
        let m = rec.matrix();
        prop_assert!((m.trace().re - 1.0).abs() < 1e-9);
        prop_assert!(m.trace().im.abs() < 1e-12);
        prop_assert!(rec.eigenvalues().iter().all(|&l| l > -1e-9));
        prop_assert!(trace_distance(m, rho.matrix()) < 20.0 / (atoms as f64).sqrt());
    }
}
