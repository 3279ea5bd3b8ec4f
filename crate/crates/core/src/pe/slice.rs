use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radix-`2^k` decomposition of a signed weight, least significant slice
/// first. Lower slices are unsigned; the top slice is two's-complement
/// signed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSlices {
    pub slice_bits: u32,
    pub slices: Vec<i64>,
}

impl WeightSlices {
    pub fn reconstruct(&self) -> i64 {
        self.slices
            .iter()
            .enumerate()
            .map(|(i, s)| s << (self.slice_bits * i as u32))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

pub(crate) fn signed_range(bits: u32) -> (i64, i64) {
    (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
}

/// Splits a `w_q`-bit two's-complement weight into `ceil(w_q/k)` slices.
pub fn slice_signed(w: i64, wq: u32, k: u32) -> Result<WeightSlices> {
    if k == 0 || wq == 0 || wq > 32 || k > 32 {
        return Err(Error::InvalidPeConfig(format!(
            "slice k={k} and width w_q={wq} must be in 1..=32"
        )));
    }
    let (lo, hi) = signed_range(wq);
    if !(lo..=hi).contains(&w) {
        return Err(Error::OperandOutOfRange(format!(
            "weight {w} does not fit in {wq}-bit two's complement"
        )));
    }
    let n = wq.div_ceil(k);
    let mask = (1i64 << k) - 1;
    let slices = (0..n)
        .map(|i| {
            let shifted = w >> (k * i);
            if i + 1 == n {
                shifted
            } else {
                shifted & mask
            }
        })
        .collect();
    Ok(WeightSlices {
        slice_bits: k,
        slices,
    })
}

/// Splits an unsigned `n`-bit activation into `ceil(n/k)` unsigned slices.
pub fn slice_unsigned(a: i64, n: u32, k: u32) -> Result<Vec<i64>> {
    if k == 0 || n == 0 || n > 32 {
        return Err(Error::InvalidPeConfig(format!(
            "slice k={k} and width N={n} must be positive"
        )));
    }
    if !(0..(1i64 << n)).contains(&a) {
        return Err(Error::OperandOutOfRange(format!(
            "activation {a} does not fit in {n}-bit unsigned"
        )));
    }
    let mask = (1i64 << k) - 1;
    Ok((0..n.div_ceil(k)).map(|i| (a >> (k * i)) & mask).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(slice_signed(-3, 4, 2).unwrap().slices, vec![1, -1]);
        assert_eq!(slice_signed(93, 8, 4).unwrap().slices, vec![13, 5]);
        assert_eq!(slice_signed(-128, 8, 2).unwrap().slices, vec![0, 0, 0, -2]);
    }

    #[test]
    fn non_dividing_slice_sign_extends_top() {
        let s = slice_signed(-3, 3, 2).unwrap();
        assert_eq!(s.slices, vec![1, -1]);
        assert_eq!(s.reconstruct(), -3);
        assert_eq!(slice_signed(0, 1, 4).unwrap().slices, vec![0]);
        assert_eq!(slice_signed(-1, 1, 4).unwrap().slices, vec![-1]);
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(
            slice_signed(8, 4, 2),
            Err(Error::OperandOutOfRange(_))
        ));
        assert!(slice_unsigned(256, 8, 2).is_err());
        assert!(slice_unsigned(-1, 8, 2).is_err());
    }

    #[test]
    fn unsigned_slices() {
        assert_eq!(slice_unsigned(0b1101_0110, 8, 2).unwrap(), vec![2, 1, 1, 3]);
    }
}
