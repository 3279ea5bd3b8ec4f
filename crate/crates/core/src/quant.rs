//! Uniform quantization and parameter-memory accounting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{LayerTag, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signedness {
    Signed,
    Unsigned,
}

/// Step size, word-length and signedness of a quantizer. The integer
/// bounds `Q_n`/`Q_p` are always derived from `bits` and `signedness`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    step: f64,
    bits: u32,
    signedness: Signedness,
}

impl QuantParams {
    pub fn new(step: f64, bits: u32, signedness: Signedness) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidQuantizer(format!(
                "step size must be finite and > 0, got {step}"
            )));
        }
        if !(1..=32).contains(&bits) {
            return Err(Error::InvalidQuantizer(format!(
                "bits must be in 1..=32, got {bits}"
            )));
        }
        Ok(Self {
            step,
            bits,
            signedness,
        })
    }

    pub fn signed(step: f64, bits: u32) -> Result<Self> {
        Self::new(step, bits, Signedness::Signed)
    }

    pub fn unsigned(step: f64, bits: u32) -> Result<Self> {
        Self::new(step, bits, Signedness::Unsigned)
    }

    /// Step size chosen so that the largest magnitude in `values` maps to
    /// `Q_p`. Falls back to a unit step for all-zero input.
    pub fn calibrate(values: &[f64], bits: u32, signedness: Signedness) -> Result<Self> {
        let probe = Self::new(1.0, bits, signedness)?;
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let step = if max > 0.0 { max / probe.qp() as f64 } else { 1.0 };
        Self::new(step, bits, signedness)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn signedness(&self) -> Signedness {
        self.signedness
    }

    pub fn qn(&self) -> i64 {
        match self.signedness {
            Signedness::Signed => -(1i64 << (self.bits - 1)),
            Signedness::Unsigned => 0,
        }
    }

    pub fn qp(&self) -> i64 {
        match self.signedness {
            Signedness::Signed => (1i64 << (self.bits - 1)) - 1,
            Signedness::Unsigned => (1i64 << self.bits) - 1,
        }
    }
}

/// Quantizes `v` to `(v_int, v_int * step)`. Rounds half away from zero
/// after clamping; NaN maps to zero.
pub fn quantize(v: f64, p: &QuantParams) -> (i64, f64) {
    let scaled = (v / p.step).clamp(p.qn() as f64, p.qp() as f64);
    let v_int = if scaled.is_nan() { 0 } else { scaled.round() as i64 };
    (v_int, v_int as f64 * p.step)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FootprintUnit {
    Bits,
    #[default]
    Mbit,
    /// Megabytes at 8e6 bits each.
    MB,
}

impl FootprintUnit {
    pub fn bits_per_unit(self) -> f64 {
        match self {
            FootprintUnit::Bits => 1.0,
            FootprintUnit::Mbit => 1e6,
            FootprintUnit::MB => 8e6,
        }
    }

    pub fn convert(self, bits: u64) -> f64 {
        bits as f64 / self.bits_per_unit()
    }
}

impl fmt::Display for FootprintUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FootprintUnit::Bits => "bits",
            FootprintUnit::Mbit => "Mbit",
            FootprintUnit::MB => "MB",
        })
    }
}

impl FromStr for FootprintUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" | "bit" | "b" => Ok(FootprintUnit::Bits),
            "Mbit" | "mbit" | "Mb" => Ok(FootprintUnit::Mbit),
            "MB" | "mb" => Ok(FootprintUnit::MB),
            other => Err(Error::Precondition(format!(
                "unknown unit `{other}` (expected bits, Mbit or MB)"
            ))),
        }
    }
}

/// Which layers the footprint counts and how it is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintPolicy {
    pub include_projection_convs: bool,
    /// Count the 8-bit boundary (stem) layers.
    pub include_stem_last_8bit: bool,
    pub unit: FootprintUnit,
}

impl Default for FootprintPolicy {
    fn default() -> Self {
        Self {
            include_projection_convs: false,
            include_stem_last_8bit: true,
            unit: FootprintUnit::Mbit,
        }
    }
}

impl FootprintPolicy {
    fn includes(&self, tag: LayerTag) -> bool {
        match tag {
            LayerTag::Projection => self.include_projection_convs,
            LayerTag::Stem => self.include_stem_last_8bit,
            LayerTag::Block => true,
        }
    }
}

/// Weight storage of the included layers in bits (weights only).
pub fn footprint(net: &NetworkSpec, policy: &FootprintPolicy) -> u64 {
    net.layers
        .iter()
        .filter(|l| policy.includes(l.tag))
        .map(|l| l.weight_bits())
        .sum()
}

/// Footprint with every included weight stored at `bits` (e.g. 32 for a
/// floating-point baseline).
pub fn footprint_at(net: &NetworkSpec, policy: &FootprintPolicy, bits: u32) -> u64 {
    net.layers
        .iter()
        .filter(|l| policy.includes(l.tag))
        .map(|l| l.weight_count() * u64::from(bits))
        .sum()
}

pub fn compression_factor(fp_bits: f64, q_bits: f64) -> Result<f64> {
    if q_bits == 0.0 {
        return Err(Error::ZeroDenominator("quantized footprint"));
    }
    Ok(fp_bits / q_bits)
}
