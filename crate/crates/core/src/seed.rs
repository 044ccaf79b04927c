// SPDX-License-Identifier: Apache-2.0

//! Splitting one master seed into independent named streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! ChaCha stream id selecting the consumer:
//!
//! | stream            | id              |
//! |-------------------|-----------------|
//! | agent             | 1               |
//! | environment       | 2               |
//! | replication `k`   | `0x100 + k`     |
//!
//! A replication's seed is the first `u64` drawn from its stream; that seed
//! then acts as the master seed of the replicated run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Agent,
    Environment,
    Replication(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Agent => 1,
            Stream::Environment => 2,
            Stream::Replication(k) => 0x100 + k,
        }
    }
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.id());
    rng
}

pub fn replication_seed(master: u64, k: u64) -> u64 {
    stream_rng(master, Stream::Replication(k)).next_u64()
}
