use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Reproducible RNG for chunk `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact, order-independent merging of partial estimator states.
pub trait Merge {
    fn merge(&mut self, other: &Self);
}

/// Split `total` samples into chunks of at most `chunk`; the last chunk is short.
pub fn chunk_sizes(total: u64, chunk: u64) -> Vec<u64> {
    let chunk = chunk.max(1);
    let full = total / chunk;
    let mut v = vec![chunk; full as usize];
    if total % chunk != 0 {
        v.push(total % chunk);
    }
    v
}

/// Run `f(chunk_index, size, rng)` over all chunks in parallel and merge in chunk order.
///
/// Each chunk draws from its own ChaCha stream, so results do not depend on the
/// number of worker threads.
pub fn run_chunks<A, F>(seed: u64, stream_base: u64, sizes: &[u64], f: F) -> A
where
    A: Merge + Default + Send,
    F: Fn(u64, u64, &mut ChaCha8Rng) -> A + Sync,
{
    let parts: Vec<A> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut rng = stream_rng(seed, stream_base + i as u64);
            f(i as u64, n, &mut rng)
        })
        .collect();
    let mut acc = A::default();
    for p in &parts {
        acc.merge(p);
    }
    acc
}
