//! Deterministic counter-based random substreams.
//!
//! Every Monte Carlo quantity in this crate is driven by substreams derived
//! from a single experiment seed, a purpose label, and a replication counter.
//! Replication `t` always sees the same draws no matter which worker thread
//! evaluates it, so estimates are bit-identical for any worker count.

/// Weyl increment from splitmix64.
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string; used to fold purpose labels into seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A single random stream: splitmix64 with a per-stream odd increment, so
/// distinct counters yield genuinely distinct sequences rather than phases
/// of one sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    state: u64,
    gamma: u64,
}

impl RngStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(self.gamma);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }
}

/// A family of substreams rooted at one seed. Labels carve out independent
/// sub-families (e.g. per scenario, per checker); counters index replications.
#[derive(Clone, Copy, Debug)]
pub struct Substreams {
    seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Substreams {
            seed: mix64(seed ^ GOLDEN_GAMMA),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent sub-family for a named purpose.
    pub fn labeled(&self, label: &str) -> Substreams {
        Substreams {
            seed: mix64(self.seed ^ fnv1a(label.as_bytes())),
        }
    }

    /// The stream for replication `counter`.
    pub fn stream(&self, counter: u64) -> RngStream {
        let state = mix64(self.seed ^ mix64(counter.wrapping_mul(GOLDEN_GAMMA)));
        let gamma = mix64(state ^ GOLDEN_GAMMA) | 1;
        RngStream { state, gamma }
    }
}

/// Fixed chunk size for parallel Monte Carlo accumulation. Chunk boundaries
/// depend only on the replication index, never on the worker count, so the
/// sequential merge of per-chunk partials is reproducible on any pool.
pub const MC_CHUNK: u64 = 8192;

/// Runs `step` for replications `0..reps`, each with its own substream, and
/// merges per-chunk accumulators in chunk order (pairwise-style summation).
pub fn mc_accumulate<A, M, S>(streams: &Substreams, reps: u64, make: M, step: S) -> A
where
    A: Send,
    M: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &mut RngStream) + Sync,
    A: Merge,
{
    use rayon::prelude::*;
    if reps == 0 {
        return make();
    }
    let chunks = reps.div_ceil(MC_CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = make();
            let lo = c * MC_CHUNK;
            let hi = (lo + MC_CHUNK).min(reps);
            for t in lo..hi {
                let mut stream = streams.stream(t);
                step(&mut acc, t, &mut stream);
            }
            acc
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("at least one chunk");
    for p in iter {
        total.merge(p);
    }
    total
}

/// Accumulators that can absorb another partial of the same shape.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

/// Streaming mean / standard-error accumulator for one statistic.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStat {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl RunningStat {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Sample standard error of the mean; 0 for fewer than two points.
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

impl Merge for RunningStat {
    fn merge(&mut self, other: Self) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

impl Merge for Vec<RunningStat> {
    fn merge(&mut self, other: Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}
