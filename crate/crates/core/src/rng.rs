//! Deterministic random streams.
//!
//! Every stream is a ChaCha20 generator keyed by the 256-bit word
//! `seed || index || purpose || REVISION` (little endian). Runs, replicates
//! and the different random ingredients of one run therefore draw from
//! disjoint keys, and results do not depend on how work is scheduled over
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const REVISION: u64 = 1;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    TieJitter = 1,
    Dataset = 2,
    BootstrapReplicate = 3,
    ReplicateTies = 4,
}

pub type Stream = ChaCha20Rng;

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> Stream {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[24..32].copy_from_slice(&REVISION.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}
