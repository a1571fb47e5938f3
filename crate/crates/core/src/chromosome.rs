use std::fmt;

/// Fixed-length bit string; bit `i` set means feature `i` is selected.
///
/// Ordering is lexicographic over bits with `false < true`, starting at
/// feature 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    bits: Vec<bool>,
}

impl Chromosome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(w: usize) -> Self {
        Self { bits: vec![false; w] }
    }

    pub fn ones(w: usize) -> Self {
        Self { bits: vec![true; w] }
    }

    /// Chromosome of width `w` with the listed features set.
    pub fn from_indices(w: usize, selected: &[usize]) -> Self {
        let mut c = Self::zeros(w);
        for &i in selected {
            c.bits[i] = true;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Cardinality of the encoded subset.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Selected feature indices, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// Hex form of the integer `sum(2^i)` over selected `i`, most
    /// significant digit first, padded to `ceil(w / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.bits.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4)
                    .filter(|&b| self.bits.get(4 * d + b).copied().unwrap_or(false))
                    .fold(0u32, |acc, b| acc | (1 << b));
                char::from_digit(nibble, 16).unwrap_or('0')
            })
            .collect()
    }

    /// Inverse of [`Chromosome::to_hex`] for width `w`.
    pub fn from_hex(w: usize, hex: &str) -> Option<Self> {
        let digits: Vec<u32> = hex.chars().map(|c| c.to_digit(16)).collect::<Option<_>>()?;
        let mut bits = vec![false; w];
        for (pos, &nibble) in digits.iter().rev().enumerate() {
            for b in 0..4 {
                if nibble & (1 << b) != 0 {
                    *bits.get_mut(4 * pos + b)? = true;
                }
            }
        }
        Some(Self { bits })
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
