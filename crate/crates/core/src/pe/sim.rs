//! Bit-level functional model of one PE.
//!
//! Every partial product is formed as an AND array over the bits of a
//! `k`-bit weight slice; the most significant bit of the top (signed) slice
//! is weighted negatively. Products are shifted by their slice position and
//! either reduced immediately (sum-together) or kept in one accumulator per
//! weight-slice position until [`finalize_partials`] (sum-apart).

use serde::{Deserialize, Serialize};

use super::cost::{cycles_per_issue, pairs_per_issue};
use super::slice::{signed_range, slice_signed, slice_unsigned};
use super::{PEConfig, Processing};
use crate::error::{Error, Result};

/// Result of a single issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacOutput {
    pub result: i64,
    pub cycles: u32,
    /// Per-slice accumulators of a sum-apart PE, least significant first.
    /// Empty for sum-together designs.
    pub partials: Vec<i64>,
}

/// Result of a multi-issue dot product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotProduct {
    pub result: i64,
    pub cycles: u64,
    pub issues: u64,
    pub partials: Vec<i64>,
}

/// Partial product of an unsigned operand and one weight slice.
fn ppg(a: i64, slice: i64, k: u32, signed_top: bool) -> i64 {
    let bits = slice & ((1i64 << k) - 1);
    (0..k)
        .filter(|j| (bits >> j) & 1 == 1)
        .map(|j| {
            let term = a << j;
            if signed_top && j + 1 == k {
                -term
            } else {
                term
            }
        })
        .sum()
}

fn check_fits(value: i64, width: u32) -> Result<i64> {
    let (lo, hi) = signed_range(width);
    if (lo..=hi).contains(&value) {
        Ok(value)
    } else {
        Err(Error::AccumulatorOverflow { value, width })
    }
}

/// Recombines sum-apart accumulators by shift-add.
pub fn finalize_partials(slice_bits: u32, partials: &[i64]) -> i64 {
    partials
        .iter()
        .enumerate()
        .map(|(i, p)| p << (slice_bits * i as u32))
        .sum()
}

struct Accumulators {
    width: u32,
    total: i64,
    partials: Vec<i64>,
}

impl Accumulators {
    fn new(cfg: &PEConfig, wq: u32) -> Self {
        let partials = if cfg.style.family.is_sum_apart() {
            vec![0; cfg.style.weight_slices(wq) as usize]
        } else {
            Vec::new()
        };
        Self {
            width: cfg.accumulator_bits,
            total: 0,
            partials,
        }
    }

    fn result(&self, k: u32) -> Result<i64> {
        if self.partials.is_empty() {
            Ok(self.total)
        } else {
            check_fits(finalize_partials(k, &self.partials), self.width)
        }
    }
}

fn check_operands(cfg: &PEConfig, wq: u32, a: &[i64], w: &[i64]) -> Result<()> {
    cfg.check_weight_bits(wq)?;
    if a.len() != w.len() {
        return Err(Error::Precondition(format!(
            "{} activations but {} weights",
            a.len(),
            w.len()
        )));
    }
    let n = cfg.style.activation_bits;
    if let Some(bad) = a.iter().find(|&&x| !(0..(1i64 << n)).contains(&x)) {
        return Err(Error::OperandOutOfRange(format!(
            "activation {bad} does not fit in {n}-bit unsigned"
        )));
    }
    let (lo, hi) = signed_range(wq);
    if let Some(bad) = w.iter().find(|&&x| !(lo..=hi).contains(&x)) {
        return Err(Error::OperandOutOfRange(format!(
            "weight {bad} does not fit in {wq}-bit two's complement"
        )));
    }
    Ok(())
}

/// One issue: every lane's products enter the accumulators.
fn issue(cfg: &PEConfig, wq: u32, a: &[i64], w: &[i64], acc: &mut Accumulators) -> Result<u32> {
    let style = cfg.style;
    let k = style.slice;
    let n = style.activation_bits;
    let sum_apart = !acc.partials.is_empty();
    let mut tree = 0i64;
    for (&ai, &wi) in a.iter().zip(w) {
        let ws = slice_signed(wi, wq, k)?;
        let act: Vec<i64> = if style.family.is_two_d() {
            slice_unsigned(ai, n, k)?
        } else {
            vec![ai]
        };
        let top = ws.len() - 1;
        for (i, &s) in ws.slices.iter().enumerate() {
            let mut slice_sum = 0i64;
            for (j, &aj) in act.iter().enumerate() {
                slice_sum += ppg(aj, s, k, i == top) << (k * j as u32);
            }
            if sum_apart {
                acc.partials[i] = check_fits(acc.partials[i] + slice_sum, acc.width)?;
            } else {
                tree += slice_sum << (k * i as u32);
            }
        }
    }
    if !sum_apart {
        acc.total = check_fits(acc.total + tree, acc.width)?;
    }
    Ok(match style.family.processing {
        Processing::BitParallel => 1,
        Processing::BitSerial => cycles_per_issue(cfg, wq),
    })
}

/// Simulates one issue of at most `pairs_per_issue` activation/weight
/// pairs. Unused lanes idle.
pub fn pe_mac(cfg: &PEConfig, wq: u32, activations: &[i64], weights: &[i64]) -> Result<MacOutput> {
    check_operands(cfg, wq, activations, weights)?;
    let lanes = pairs_per_issue(cfg, wq) as usize;
    if activations.len() > lanes {
        return Err(Error::Precondition(format!(
            "{} pairs exceed the {lanes} lanes of one issue",
            activations.len()
        )));
    }
    let mut acc = Accumulators::new(cfg, wq);
    let cycles = issue(cfg, wq, activations, weights, &mut acc)?;
    Ok(MacOutput {
        result: acc.result(cfg.style.slice)?,
        cycles,
        partials: acc.partials,
    })
}

/// Dot product of arbitrary length, issued `pairs_per_issue` pairs at a
/// time into persistent accumulators.
pub fn dot_product(
    cfg: &PEConfig,
    wq: u32,
    activations: &[i64],
    weights: &[i64],
) -> Result<DotProduct> {
    check_operands(cfg, wq, activations, weights)?;
    let lanes = pairs_per_issue(cfg, wq) as usize;
    let mut acc = Accumulators::new(cfg, wq);
    let mut cycles = 0u64;
    let mut issues = 0u64;
    for (a, w) in activations.chunks(lanes).zip(weights.chunks(lanes)) {
        cycles += u64::from(issue(cfg, wq, a, w, &mut acc)?);
        issues += 1;
    }
    Ok(DotProduct {
        result: acc.result(cfg.style.slice)?,
        cycles,
        issues,
        partials: acc.partials,
    })
}
