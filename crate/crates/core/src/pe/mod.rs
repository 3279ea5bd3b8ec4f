//! Precision-scalable processing elements.
//!
//! A PE is described along four axes: bit-serial or bit-parallel input
//! processing, sum-apart or sum-together consolidation, scaling of one or
//! both operands, and the operand slice `k`.

mod cost;
mod sim;
mod slice;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{
    cycles_per_issue, pairs_per_issue, pe_cost, pe_efficiency, ppg_ops_per_mac, PeCost,
};
pub use sim::{dot_product, finalize_partials, pe_mac, DotProduct, MacOutput};
pub use slice::{slice_signed, slice_unsigned, WeightSlices};

/// Default accumulator width in bits.
pub const DEFAULT_ACCUMULATOR_BITS: u32 = 30;

/// Widest activation the simulator accepts.
pub const MAX_ACTIVATION_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Processing {
    #[serde(rename = "bs")]
    BitSerial,
    #[serde(rename = "bp")]
    BitParallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Consolidation {
    #[serde(rename = "sa")]
    SumApart,
    #[serde(rename = "st")]
    SumTogether,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scaling {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

/// The style family without slice width, e.g. `bp-st-1d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PEFamily {
    pub processing: Processing,
    pub consolidation: Consolidation,
    pub scaling: Scaling,
}

impl PEFamily {
    pub const BP_ST_1D: PEFamily = PEFamily {
        processing: Processing::BitParallel,
        consolidation: Consolidation::SumTogether,
        scaling: Scaling::OneD,
    };

    /// All eight families in enumeration order (BS before BP, SA before ST,
    /// 1D before 2D).
    pub fn all() -> Vec<PEFamily> {
        let mut out = Vec::with_capacity(8);
        for processing in [Processing::BitSerial, Processing::BitParallel] {
            for consolidation in [Consolidation::SumApart, Consolidation::SumTogether] {
                for scaling in [Scaling::OneD, Scaling::TwoD] {
                    out.push(PEFamily {
                        processing,
                        consolidation,
                        scaling,
                    });
                }
            }
        }
        out
    }

    pub fn is_parallel(self) -> bool {
        self.processing == Processing::BitParallel
    }

    pub fn is_two_d(self) -> bool {
        self.scaling == Scaling::TwoD
    }

    pub fn is_sum_apart(self) -> bool {
        self.consolidation == Consolidation::SumApart
    }
}

impl fmt::Display for PEFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.processing {
            Processing::BitSerial => "bs",
            Processing::BitParallel => "bp",
        };
        let c = match self.consolidation {
            Consolidation::SumApart => "sa",
            Consolidation::SumTogether => "st",
        };
        let s = match self.scaling {
            Scaling::OneD => "1d",
            Scaling::TwoD => "2d",
        };
        write!(f, "{p}-{c}-{s}")
    }
}

impl FromStr for PEFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(['-', '_']).collect();
        let bad = || Error::InvalidPeConfig(format!("unknown PE style `{s}`"));
        let [p, c, d] = parts.as_slice() else {
            return Err(bad());
        };
        let processing = match *p {
            "bs" => Processing::BitSerial,
            "bp" => Processing::BitParallel,
            _ => return Err(bad()),
        };
        let consolidation = match *c {
            "sa" => Consolidation::SumApart,
            "st" => Consolidation::SumTogether,
            _ => return Err(bad()),
        };
        let scaling = match *d {
            "1d" => Scaling::OneD,
            "2d" => Scaling::TwoD,
            _ => return Err(bad()),
        };
        Ok(PEFamily {
            processing,
            consolidation,
            scaling,
        })
    }
}

impl TryFrom<String> for PEFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PEFamily> for String {
    fn from(f: PEFamily) -> String {
        f.to_string()
    }
}

/// A point in the PE design space: family, slice `k` and activation width
/// `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PEStyle {
    pub family: PEFamily,
    pub slice: u32,
    pub activation_bits: u32,
}

impl PEStyle {
    pub fn new(family: PEFamily, slice: u32, activation_bits: u32) -> Result<Self> {
        if activation_bits == 0 || activation_bits > MAX_ACTIVATION_BITS {
            return Err(Error::InvalidPeConfig(format!(
                "activation width must be in 1..={MAX_ACTIVATION_BITS}, got {activation_bits}"
            )));
        }
        if slice == 0 || slice > activation_bits {
            return Err(Error::InvalidPeConfig(format!(
                "slice k={slice} must be in 1..={activation_bits}"
            )));
        }
        if (family.is_parallel() || family.is_two_d()) && !activation_bits.is_multiple_of(slice) {
            return Err(Error::InvalidPeConfig(format!(
                "slice k={slice} must divide N={activation_bits} for {family}"
            )));
        }
        Ok(Self {
            family,
            slice,
            activation_bits,
        })
    }

    /// The `bp-st-1d` style at N = 8.
    pub fn bp_st_1d(slice: u32) -> Result<Self> {
        Self::new(PEFamily::BP_ST_1D, slice, 8)
    }

    /// Every family crossed with every slice width.
    pub fn taxonomy(slices: &[u32], activation_bits: u32) -> Result<Vec<PEStyle>> {
        let mut out = Vec::new();
        for family in PEFamily::all() {
            for &k in slices {
                out.push(PEStyle::new(family, k, activation_bits)?);
            }
        }
        Ok(out)
    }

    /// Number of weight slices for a `w_q`-bit weight.
    pub fn weight_slices(&self, wq: u32) -> u32 {
        wq.div_ceil(self.slice)
    }

    /// Number of activation slices (2D scaling only; otherwise 1).
    pub fn activation_slices(&self) -> u32 {
        if self.family.is_two_d() {
            self.activation_bits / self.slice
        } else {
            1
        }
    }
}

impl fmt::Display for PEStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/k{}", self.family, self.slice)
    }
}

/// A PE style with its accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PEConfig {
    pub style: PEStyle,
    pub accumulator_bits: u32,
}

impl PEConfig {
    pub fn new(style: PEStyle, accumulator_bits: u32) -> Result<Self> {
        if !(2..=62).contains(&accumulator_bits) {
            return Err(Error::InvalidPeConfig(format!(
                "accumulator width must be in 2..=62, got {accumulator_bits}"
            )));
        }
        Ok(Self {
            style,
            accumulator_bits,
        })
    }

    pub fn with_default_accumulator(style: PEStyle) -> Self {
        Self {
            style,
            accumulator_bits: DEFAULT_ACCUMULATOR_BITS,
        }
    }

    pub fn slice(&self) -> u32 {
        self.style.slice
    }

    pub fn activation_bits(&self) -> u32 {
        self.style.activation_bits
    }

    /// Partial product generators: `N/k` for BP-1D, `(N/k)^2` for BP-2D and
    /// one serial lane for BS.
    pub fn ppg_count(&self) -> u32 {
        let per_bus = self.style.activation_bits / self.style.slice;
        match (self.style.family.processing, self.style.family.scaling) {
            (Processing::BitSerial, _) => 1,
            (Processing::BitParallel, Scaling::OneD) => per_bus,
            (Processing::BitParallel, Scaling::TwoD) => per_bus * per_bus,
        }
    }

    /// Whether an accumulation of `length` full-range products fits the
    /// accumulator.
    pub fn accumulator_suffices(&self, wq: u32, length: u64) -> bool {
        let max_a = (1u128 << self.style.activation_bits) - 1;
        let max_w = 1u128 << (wq.max(1) - 1);
        max_a * max_w * u128::from(length) < (1u128 << (self.accumulator_bits - 1))
    }

    pub(crate) fn check_weight_bits(&self, wq: u32) -> Result<()> {
        if wq == 0 || wq > self.style.activation_bits {
            return Err(Error::InvalidPeConfig(format!(
                "weight width {wq} must be in 1..={}",
                self.style.activation_bits
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_round_trips_through_text() {
        for fam in PEFamily::all() {
            assert_eq!(fam.to_string().parse::<PEFamily>().unwrap(), fam);
        }
        assert!("bp-xx-1d".parse::<PEFamily>().is_err());
        assert_eq!("BP_ST_1D".parse::<PEFamily>().unwrap(), PEFamily::BP_ST_1D);
    }

    #[test]
    fn slice_must_divide_n_for_bit_parallel() {
        assert!(PEStyle::bp_st_1d(3).is_err());
        let bs = PEFamily {
            processing: Processing::BitSerial,
            consolidation: Consolidation::SumTogether,
            scaling: Scaling::OneD,
        };
        assert!(PEStyle::new(bs, 3, 8).is_ok());
        assert!(PEStyle::new(bs, 9, 8).is_err());
    }

    #[test]
    fn ppg_counts() {
        let c = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(2).unwrap());
        assert_eq!(c.ppg_count(), 4);
        let fam = PEFamily {
            scaling: Scaling::TwoD,
            ..PEFamily::BP_ST_1D
        };
        let c2 = PEConfig::with_default_accumulator(PEStyle::new(fam, 2, 8).unwrap());
        assert_eq!(c2.ppg_count(), 16);
    }

    #[test]
    fn taxonomy_size() {
        assert_eq!(PEStyle::taxonomy(&[1, 2, 4], 8).unwrap().len(), 24);
    }

    #[test]
    fn accumulator_bound() {
        let c = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(1).unwrap());
        assert!(c.accumulator_suffices(8, 1 << 14));
        assert!(!c.accumulator_suffices(8, 1 << 15));
    }
}
