mod common;

use common::game;
use proptest::prelude::*;
use sgplan::game_model::{as_generative, random_game, GenerativeModel, RandomGameSpec};
use sgplan::seed::SplitMix64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_games_validate(
        n_states in 1usize..=8,
        n_rows in 1usize..=4,
        n_cols in 1usize..=4,
        branching in 1usize..=8,
        scale in 0.1f64..10.0,
        seed in any::<u64>(),
        zero_sum in any::<bool>(),
    ) {
        let g = random_game(RandomGameSpec {
            n_states,
            n_rows,
            n_cols,
            branching: branching.min(n_states),
            payoff_scale: scale,
            seed,
            zero_sum,
        })
        .unwrap();
        prop_assert!(g.validate().is_empty());
        prop_assert_eq!(g.is_zero_sum(), zero_sum);
        prop_assert!(g.r_max() >= g.stages().iter().map(|s| s.max_abs()).fold(0.0, f64::max));
    }
}

#[test]
fn sampled_frequencies_match_kernel() {
    for seed in 0..3 {
        let g = game(6, 2, 4, seed, false);
        let model = as_generative(&g);
        let mut rng = SplitMix64::new(seed ^ 0xABCD);
        let draws = 100_000;
        let mut counts = vec![0usize; g.n_states()];
        for _ in 0..draws {
            counts[model.sample(2, 1, 0, &mut rng)] += 1;
        }
        let mut exact = vec![0.0; g.n_states()];
        for &(s, p) in g.transition(2, 1, 0) {
            exact[s] += p;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "total variation {tv}");
    }
}
