//! Brute-force distribution time of a nested chain, used to check the
//! `(3/2)ⁿ` waiting factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChainParams, LinkParams};
use crate::error::{Error, Result};

pub const MIN_TRIALS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    /// Sample mean of the distribution time, s.
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Number of attempts up to and including the first success.
fn attempts(p: f64, rng: &mut ChaCha8Rng) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / (-p).ln_1p()).floor() + 1.0
}

/// Completion time of a level-`level` segment. A swap starts once both
/// halves are ready; on failure both halves are regenerated.
fn segment_time(level: u32, slot: f64, p0: f64, swap: f64, rng: &mut ChaCha8Rng) -> f64 {
    if level == 0 {
        return attempts(p0, rng) * slot;
    }
    let mut elapsed = 0.0;
    loop {
        let a = segment_time(level - 1, slot, p0, swap, rng);
        let b = segment_time(level - 1, slot, p0, swap, rng);
        elapsed += a.max(b);
        if rng.random::<f64>() < swap {
            return elapsed;
        }
    }
}

/// Mean time to distribute one pair over one channel set. Trial `i` draws
/// from stream `i` of a ChaCha8 generator seeded with `seed`, so the result
/// does not depend on thread scheduling.
pub fn monte_carlo_time(
    chain: &ChainParams,
    link: &LinkParams,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    chain.validate()?;
    link.validate()?;
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let p0 = link.p0();
    if !(p0 > 0.0) {
        return Err(Error::InvalidArgument(
            "P0 is zero; the link never succeeds".into(),
        ));
    }
    let slot = link.attempt_time();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            segment_time(chain.n, slot, p0, chain.swap_success, &mut rng)
        })
        .collect();
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}
