use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest receiver count an [`ActionProfile`] can hold.
pub const MAX_RECEIVERS: usize = 64;

/// A binary action per receiver, equivalently the subset of receivers told to
/// take action 1. Bit `i` belongs to receiver `i` (0-based).
///
/// Ordering is by length, then by bitmask, so a list of profiles sorts the
/// same way as the indices of an explicit set-function table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile {
    n: u8,
    mask: u64,
}

impl ActionProfile {
    pub fn from_mask(n: usize, mask: u64) -> Result<Self> {
        if n > MAX_RECEIVERS {
            return Err(Error::CapExceeded(format!(
                "{n} receivers; profiles hold at most {MAX_RECEIVERS}"
            )));
        }
        if n < 64 && mask >> n != 0 {
            return Err(Error::Invalid(format!(
                "mask {mask:#x} has bits beyond n = {n}"
            )));
        }
        Ok(ActionProfile { n: n as u8, mask })
    }

    /// Caller guarantees `n <= 64` and no stray bits.
    pub(crate) fn raw(n: usize, mask: u64) -> Self {
        debug_assert!(n <= MAX_RECEIVERS && (n == 64 || mask >> n == 0));
        ActionProfile { n: n as u8, mask }
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_mask(n, 0)
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::from_mask(n, full_mask(n))
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = 0u64;
        for i in members {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            mask |= 1 << i;
        }
        Self::from_mask(n, mask)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut mask = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 if i < 64 => mask |= 1 << i,
                1 => {}
                _ => {
                    return Err(Error::Invalid(format!(
                        "profile bit {i} is {b}, expected 0 or 1"
                    )))
                }
            }
        }
        Self::from_mask(bits.len(), mask)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n() && self.mask >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        debug_assert!(i < self.n());
        ActionProfile {
            mask: self.mask | 1 << i,
            ..self
        }
    }

    pub fn without(self, i: usize) -> Self {
        ActionProfile {
            mask: self.mask & !(1 << i),
            ..self
        }
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn complement(self) -> Self {
        ActionProfile {
            mask: !self.mask & full_mask(self.n()),
            ..self
        }
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&i| self.contains(i))
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.n()).map(|i| u8::from(self.contains(i))).collect()
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl fmt::Debug for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl Serialize for ActionProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActionProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        ActionProfile::from_bits(&bits).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_and_bits_agree() {
        let s = ActionProfile::from_members(4, [0, 2]).unwrap();
        assert_eq!(s.bits(), vec![1, 0, 1, 0]);
        assert_eq!(s.members().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.complement().bits(), vec![0, 1, 0, 1]);
        assert_eq!(s.to_string(), "1010");
    }

    #[test]
    fn serde_round_trip() {
        let s = ActionProfile::from_bits(&[0, 1, 1]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, "[0,1,1]");
        assert_eq!(serde_json::from_str::<ActionProfile>(&text).unwrap(), s);
        assert!(serde_json::from_str::<ActionProfile>("[0,2]").is_err());
    }

    #[test]
    fn sixty_four_receivers() {
        let full = ActionProfile::full(64).unwrap();
        assert_eq!(full.len(), 64);
        assert!(full.complement().is_empty());
        assert!(ActionProfile::full(65).is_err());
    }

    #[test]
    fn stray_bits_rejected() {
        assert!(ActionProfile::from_mask(2, 0b100).is_err());
        assert!(ActionProfile::from_members(2, [2]).is_err());
    }
}
