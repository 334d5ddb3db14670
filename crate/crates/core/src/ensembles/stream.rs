use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Child index reserved for matrix draws under a trial stream.
pub const DRAWS: u64 = 0;
/// Child index reserved for algorithm randomness (random signing).
pub const SIGNS: u64 = 1;
/// Root-level child index reserved for calibration runs; never used as a trial index.
pub const CALIBRATION: u64 = u64::MAX;

/// Deterministic random stream addressed by `(master_seed, path)`.
///
/// Streams are split by appending indices to the path, never by advancing a
/// shared generator, so draw `k` of trial `t` is the same no matter which
/// thread computes it or in which order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        RngStream {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        RngStream {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    fn key(&self) -> u64 {
        let mut h = splitmix64(self.master_seed ^ 0x6D61_7464_6973_6321);
        for (depth, &p) in self.path.iter().enumerate() {
            h = splitmix64(h ^ splitmix64(p.wrapping_add((depth as u64) << 56)));
        }
        h
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut h = self.key();
        for chunk in seed.chunks_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
