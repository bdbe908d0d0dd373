//! Random team generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::Team;

/// Draws a team with `species` species and `traits` traits. Counts are
/// uniform over the inclusive `count_range`; trait values are uniform in
/// `[0, 1]` and each trait column is rescaled so its largest entry is one.
pub fn generate_random_team(
    species: usize,
    traits: usize,
    count_range: (u32, u32),
    seed: u64,
) -> Result<Team> {
    let (lo, hi) = count_range;
    if species == 0 || traits == 0 {
        return Err(Error::Config("teams need at least one species and one trait".into()));
    }
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!(
            "count range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<u32> = (0..species).map(|_| rng.random_range(lo..=hi)).collect();
    let mut q: Vec<Vec<f64>> = (0..species)
        .map(|_| (0..traits).map(|_| rng.random::<f64>()).collect())
        .collect();
    for u in 0..traits {
        let mut top = q.iter().map(|row| row[u]).fold(0.0, f64::max);
        // an all-zero column is redrawn
        while top == 0.0 {
            for row in q.iter_mut() {
                row[u] = rng.random::<f64>();
            }
            top = q.iter().map(|row| row[u]).fold(0.0, f64::max);
        }
        for row in q.iter_mut() {
            row[u] /= top;
        }
    }
    Team::new(counts, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_in_range_and_deterministic() {
        for seed in 0..50 {
            let team = generate_random_team(4, 3, (1, 10), seed).unwrap();
            assert!(team.counts().iter().all(|c| (1..=10).contains(c)));
            assert_eq!(team, generate_random_team(4, 3, (1, 10), seed).unwrap());
            for u in 0..3 {
                let top = (0..4).map(|s| team.species_traits(s)[u]).fold(0.0, f64::max);
                assert_eq!(top, 1.0);
            }
        }
        assert_ne!(
            generate_random_team(4, 3, (1, 10), 1).unwrap(),
            generate_random_team(4, 3, (1, 10), 2).unwrap()
        );
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(generate_random_team(4, 3, (0, 10), 0).is_err());
        assert!(generate_random_team(4, 3, (5, 2), 0).is_err());
        assert!(generate_random_team(0, 3, (1, 2), 0).is_err());
    }
}
