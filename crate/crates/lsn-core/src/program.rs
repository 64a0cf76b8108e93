//! Machine programs: the deterministic step function run at every firing.

use alloc::boxed::Box;
use alloc::vec::Vec;

/// A synchronous Mealy step: consumes one token per in-edge, produces one
/// token per out-edge, and advances internal state. Implementations must be
/// deterministic; the engine's reproducibility and determinacy guarantees
/// assume it.
pub trait MachineProgram {
    /// `inputs` holds one token per in-edge (in-edge order); `outputs` has
    /// one slot per out-edge to fill.
    fn step(&mut self, inputs: &[u64], outputs: &mut [u64]);
}

/// Default program: every output carries (sum of inputs + state) mod 2^64,
/// and the state becomes that value. State-bearing and collision-sensitive,
/// so any reordering of consumed tokens propagates into all later outputs.
pub struct LaggedSum {
    state: u64,
}

impl LaggedSum {
    pub fn new(initial_state: u64) -> Self {
        LaggedSum {
            state: initial_state,
        }
    }
}

impl MachineProgram for LaggedSum {
    fn step(&mut self, inputs: &[u64], outputs: &mut [u64]) {
        let out = inputs
            .iter()
            .fold(self.state, |acc, &x| acc.wrapping_add(x));
        self.state = out;
        outputs.fill(out);
    }
}

/// SplitMix64 scramble, used to give each machine a distinctive initial
/// state (all-zero states would emit all-zero streams and blunt the
/// determinacy comparison).
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// One [`LaggedSum`] per machine, each seeded from its index.
pub fn default_programs(machine_count: usize) -> Vec<Box<dyn MachineProgram>> {
    (0..machine_count)
        .map(|i| Box::new(LaggedSum::new(splitmix64(i as u64 + 1))) as Box<dyn MachineProgram>)
        .collect()
}
