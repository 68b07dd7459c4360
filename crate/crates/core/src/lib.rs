//! Tracking a moving point through covering regions with few handovers:
//! offline-optimal greedy solving, online trackers, lower-bound
//! constructions and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod adversary;
pub mod events;
pub mod geometry;
pub mod harness;
pub mod offline;
pub mod online;
pub mod scenario;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use events::{Event, EventKind, EventStream, Trajectory};
pub use geometry::{Point, Region, RegionId, RegionShape};

/// Seed of trial `index` under a master seed: the first word of stream
/// `index` of a ChaCha8 generator keyed by `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}
