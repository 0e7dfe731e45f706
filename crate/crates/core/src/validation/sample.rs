use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::ValidationError;
use crate::ingest::CitanceKey;

pub const DEFAULT_SAMPLE_SIZE: usize = 50;

/// Independent stream seed for one query, so adding or removing a query
/// never changes another query's sample.
pub fn query_seed(seed: u64, query_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(query_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Draws `min(n, available)` distinct citances uniformly without
/// replacement. The result depends only on the set of keys and the seed,
/// and is returned sorted.
pub fn sample_matches(
    keys: &[CitanceKey],
    n: usize,
    seed: u64,
) -> Result<Vec<CitanceKey>, ValidationError> {
    if n == 0 {
        return Err(ValidationError::ZeroSampleSize);
    }
    let mut pool = keys.to_vec();
    pool.sort();
    pool.dedup();
    if pool.is_empty() {
        return Err(ValidationError::NoMatches);
    }
    if n >= pool.len() {
        return Ok(pool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}
