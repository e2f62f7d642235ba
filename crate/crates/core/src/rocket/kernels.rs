use serde::{Deserialize, Serialize};

pub const KERNEL_LEN: usize = 9;
pub const NUM_KERNELS: usize = 84;
/// Number of +2 weights per kernel; the remaining six are −1.
pub const NUM_POSITIVE: usize = 3;

/// A length-9 kernel with three weights of +2 and six of −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelPattern {
    weights: [i8; KERNEL_LEN],
}

impl KernelPattern {
    /// Builds the pattern with +2 at the given (distinct, in-range) positions.
    pub fn from_positive(indices: [usize; NUM_POSITIVE]) -> Self {
        let mut weights = [-1i8; KERNEL_LEN];
        for i in indices {
            weights[i] = 2;
        }
        KernelPattern { weights }
    }

    pub fn weights(&self) -> [i8; KERNEL_LEN] {
        self.weights
    }

    pub fn weights_f64(&self) -> [f64; KERNEL_LEN] {
        self.weights.map(f64::from)
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..KERNEL_LEN).filter(|&i| self.weights[i] == 2).collect()
    }

    /// Checks the three-positive/six-negative structure.
    pub fn is_valid(&self) -> bool {
        let pos = self.weights.iter().filter(|&&w| w == 2).count();
        let neg = self.weights.iter().filter(|&&w| w == -1).count();
        pos == NUM_POSITIVE && neg == KERNEL_LEN - NUM_POSITIVE
    }
}

/// All C(9,3) = 84 patterns, ordered lexicographically by their +2 index triple.
pub fn enumerate_kernels() -> Vec<KernelPattern> {
    let mut out = Vec::with_capacity(NUM_KERNELS);
    for a in 0..KERNEL_LEN {
        for b in a + 1..KERNEL_LEN {
            for c in b + 1..KERNEL_LEN {
                out.push(KernelPattern::from_positive([a, b, c]));
            }
        }
    }
    out
}
