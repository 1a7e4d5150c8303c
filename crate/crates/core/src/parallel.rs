//! Deterministic parallel reduction over path indices.
//!
//! Indices are cut into fixed-size chunks independent of the worker count.
//! Chunks run in parallel in bounded waves and their accumulators are merged
//! strictly in chunk order, so results are bit-identical for any pool size.

use rayon::prelude::*;

use crate::error::Result;

pub const CHUNK: u64 = 2048;
const WAVE: u64 = 64;

/// Folds every index in `0..count` into per-chunk accumulators and merges them
/// in index order.
pub fn reduce_indices<A, I, F, M>(count: u64, init: I, fold: F, mut merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) -> Result<()> + Sync,
    M: FnMut(&mut A, A),
{
    let mut total = init();
    let chunks = count.div_ceil(CHUNK);
    let mut wave_start = 0;
    while wave_start < chunks {
        let wave_end = (wave_start + WAVE).min(chunks);
        let partials = (wave_start..wave_end)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(count);
                for i in lo..hi {
                    fold(&mut acc, i)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<A>>>()?;
        for p in partials {
            merge(&mut total, p);
        }
        wave_start = wave_end;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::NeumaierSum;

    fn run(threads: usize) -> f64 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            reduce_indices(
                300_001,
                NeumaierSum::new,
                |acc, i| {
                    acc.add(((i as f64) * 0.37).sin() / (1.0 + i as f64));
                    Ok(())
                },
                |a, b| a.merge(&b),
            )
            .unwrap()
            .value()
        })
    }

    #[test]
    fn independent_of_worker_count() {
        let one = run(1);
        assert_eq!(one.to_bits(), run(3).to_bits());
        assert_eq!(one.to_bits(), run(8).to_bits());
    }

    #[test]
    fn empty_range() {
        let v = reduce_indices(0, || 5u64, |_, _| Ok(()), |a, b| *a += b).unwrap();
        assert_eq!(v, 5);
    }
}
