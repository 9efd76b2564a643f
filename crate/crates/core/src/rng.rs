//! Counter-based random stream derivation.
//!
//! Every unit of work (replication, scheme, bootstrap replicate, ...) gets its
//! own ChaCha stream addressed by a path of indices below a master seed, so a
//! result never depends on which thread ran which task or in what order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    master: u64,
    id: u64,
}

const ROOT_ID: u64 = 0x6a09_e667_f3bc_c908;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            id: ROOT_ID,
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Child stream `index` of this stream.
    pub fn child(&self, index: u64) -> Self {
        Self {
            master: self.master,
            id: splitmix64(self.id ^ splitmix64(index.wrapping_add(0x2545_f491_4f6c_dd1d))),
        }
    }

    /// Follow a path of child indices.
    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.child(i))
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.id);
        rng
    }
}
