use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use amicus_ip::corpus::{generate_synthetic, load_corpus, save_corpus, SynthConfig};
use amicus_ip::ipmodel::{expected_votes, putil_factor, vote_logit, CaseParams, JusticeParams, ModelKind};
use amicus_ip::math::{is_simplex, log_sigmoid, log_sum_exp, sample_dirichlet, sigmoid};
use amicus_ip::predict::pairwise_partition_accuracy;
use amicus_ip::Side;

fn simplex(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, dim).prop_map(|v| {
        let z: f64 = v.iter().sum();
        v.into_iter().map(|x| x / z).collect()
    })
}

fn kappa() -> impl Strategy<Value = CaseParams> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b, p, r)| CaseParams::new(a, b, p, r))
}

/// Roster of `n` justices in `dim` topics, with a theta, a brief and a kappa.
fn scene() -> impl Strategy<Value = (Vec<JusticeParams>, Vec<f64>, Vec<f64>, CaseParams)> {
    (1usize..6, 1usize..10).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(prop::collection::vec(-4.0f64..4.0, dim).prop_map(JusticeParams::new), n),
            simplex(dim),
            simplex(dim),
            kappa(),
        )
    })
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Petitioner), Just(Side::Respondent)]
}

fn partition(n: usize) -> impl Strategy<Value = BTreeMap<usize, Side>> {
    prop::collection::vec(side(), n).prop_map(|v| v.into_iter().enumerate().collect())
}

fn flip_all(p: &BTreeMap<usize, Side>) -> BTreeMap<usize, Side> {
    p.iter().map(|(&j, &s)| (j, s.flip())).collect()
}

proptest! {
    #[test]
    fn sigmoid_is_symmetric(x in -800.0f64..800.0) {
        prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        prop_assert!(log_sigmoid(x) <= 0.0);
        prop_assert!(log_sigmoid(x).is_finite());
    }

    #[test]
    fn log_sum_exp_bounds(xs in prop::collection::vec(-1e3f64..1e3, 1..20)) {
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&xs);
        prop_assert!(l >= m);
        prop_assert!(l <= m + (xs.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn dirichlet_draws_lie_on_simplex(dim in 1usize..40, conc in 0.001f64..10.0, seed: u64) {
        let v = sample_dirichlet(dim, conc, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(is_simplex(&v, 1e-9));
    }

    #[test]
    fn utility_factor_nonnegative((psi, theta, delta, k) in scene(), s in side(), xi in 0.0f64..10.0) {
        prop_assert!(putil_factor(&psi, &theta, &delta, &k, s, xi).unwrap() >= 0.0);
    }

    #[test]
    fn expected_votes_split_the_bench((psi, theta, delta, k) in scene()) {
        let k = CaseParams { c_r: k.c_p, ..k };
        let pet = expected_votes(&psi, &theta, &delta, &k, Side::Petitioner).unwrap();
        let resp = expected_votes(&psi, &theta, &delta, &k, Side::Respondent).unwrap();
        let n = psi.len() as f64;
        prop_assert!((0.0..=n).contains(&pet));
        prop_assert!((pet + resp - n).abs() < 1e-9);
    }

    #[test]
    fn amici_without_brief_terms_is_issues((psi, theta, delta, k) in scene()) {
        let k0 = CaseParams { c_p: 0.0, c_r: 0.0, ..k };
        for j in &psi {
            let a = vote_logit(&j.psi, &theta, Some(&delta), Some(&delta), &k0, ModelKind::Amici).unwrap();
            let i = vote_logit(&j.psi, &theta, None, None, &k, ModelKind::Issues).unwrap();
            prop_assert!((a - i).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_side_contributes_nothing((psi, theta, delta, k) in scene()) {
        let kr = CaseParams { c_r: 0.0, ..k };
        for j in &psi {
            let one = vote_logit(&j.psi, &theta, Some(&delta), None, &k, ModelKind::Amici).unwrap();
            let both = vote_logit(&j.psi, &theta, Some(&delta), Some(&delta), &kr, ModelKind::Amici).unwrap();
            prop_assert!((one - both).abs() <= 1e-12);
        }
    }

    #[test]
    fn accuracy_in_unit_interval_and_flip_invariant((p, a) in (2usize..12).prop_flat_map(|n| (partition(n), partition(n)))) {
        let acc = pairwise_partition_accuracy(&p, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert_eq!(acc, pairwise_partition_accuracy(&flip_all(&p), &a).unwrap());
        prop_assert_eq!(acc, pairwise_partition_accuracy(&p, &flip_all(&a)).unwrap());
        prop_assert_eq!(acc, pairwise_partition_accuracy(&flip_all(&p), &flip_all(&a)).unwrap());
        prop_assert_eq!(acc, pairwise_partition_accuracy(&a, &p).unwrap());
        prop_assert_eq!(pairwise_partition_accuracy(&p, &p).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corpus_round_trips(seed: u64, briefs in 0usize..4, utility: bool) {
        let cfg = SynthConfig {
            num_cases: 20,
            num_topics: 3,
            vocab_size: 40,
            tokens_per_doc: 30,
            briefs_per_case: (0, briefs),
            utility_briefs: utility,
            ..Default::default()
        };
        let (corpus, _) = generate_synthetic(&cfg, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        prop_assert_eq!(load_corpus(&path).unwrap(), corpus);
    }
}
