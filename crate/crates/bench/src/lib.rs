//! Shared helpers for the benchmark targets.

use silicon_entropy_core::bits::BitVector;
use silicon_entropy_core::dram::{ArrayGeometry, DramDevice, ProcessParams};
use silicon_entropy_core::rng::Stream;

pub fn megabit_device(seed: u64) -> DramDevice {
    DramDevice::new(seed, ArrayGeometry::megabit(), ProcessParams::default()).unwrap()
}

pub fn uniform_bits(seed: u64, len: usize) -> BitVector {
    let mut rng = Stream::new(seed);
    (0..len).map(|_| rng.next_bool()).collect()
}
