//! Seeded, labelled random streams.
//!
//! Every consumer of randomness (an interference source, a node, a trial)
//! gets its own [`RngStream`] derived from the experiment seed and a stable
//! stream id. Streams are ChaCha8 keyed by the seed with the stream id
//! selecting the ChaCha stream, so two ids never share a keystream.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::time::Duration;

/// Stable identifier of one random stream.
///
/// Built from a textual label plus any number of integer components; the
/// hash is FNV-1a followed by a splitmix finaliser, both fixed here so ids
/// do not change between toolchains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId(u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamId {
    pub const fn raw(id: u64) -> Self {
        StreamId(id)
    }

    pub fn label(label: &str) -> Self {
        let h = label
            .bytes()
            .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME));
        StreamId(splitmix(h))
    }

    /// Derives a child id, e.g. one per trial index.
    pub fn with(self, component: u64) -> Self {
        StreamId(splitmix(self.0 ^ splitmix(component)))
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// A deterministic random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: StreamId) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id.value());
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw in `[lo, hi]`; returns `lo` when the range is empty.
    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            lo
        } else {
            self.inner.random_range(lo..=hi)
        }
    }

    /// Uniform integer draw in `[lo, hi]`.
    pub fn uniform_u64(&mut self, lo: u64, hi: u64) -> u64 {
        if hi <= lo {
            lo
        } else {
            self.inner.random_range(lo..=hi)
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Samples an exponentially distributed duration with the given mean,
/// rounded to the nearest microsecond and floored at 1 µs.
pub fn draw_exponential(rng: &mut RngStream, mean: Duration) -> Result<Duration> {
    if mean.is_zero() {
        return Err(Error::ZeroMean);
    }
    let x: f64 = rng.sample(Exp1);
    let us = (x * mean.as_micros() as f64).round() as u64;
    Ok(Duration::from_micros(us.max(1)))
}
