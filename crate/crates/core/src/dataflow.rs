//! Analytical mapping of CONV layers onto an `H x W x D` PE array.
//!
//! `H` tiles the feature-map rows (weights are reused along it), `W` tiles
//! input channels (partial sums are reduced along it) and `D` tiles output
//! channels (activations are broadcast along it). Each PE additionally packs
//! several weight/activation pairs per issue when weights are narrow.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pe::{cycles_per_issue, pairs_per_issue, PEConfig};
use crate::workload::{ConvLayerSpec, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArrayDims {
    pub h: u32,
    pub w: u32,
    pub d: u32,
}

impl ArrayDims {
    pub fn new(h: u32, w: u32, d: u32) -> Result<Self> {
        let dims = Self { h, w, d };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 || self.d == 0 {
            return Err(Error::InvalidDims(format!(
                "{self}: every dimension must be >= 1"
            )));
        }
        Ok(())
    }

    pub fn n_pe(&self) -> u64 {
        u64::from(self.h) * u64::from(self.w) * u64::from(self.d)
    }
}

impl fmt::Display for ArrayDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.d)
    }
}

/// Parallel BRAM ports, split by buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BramNpa {
    pub psums: u64,
    pub activations: u64,
    pub weights: u64,
    pub total: u64,
}

/// Parallel BRAM accesses `H*D + H*W*(N/w_q) + W*D`.
pub fn bram_npa(dims: ArrayDims, n_bits: u32, wq: u32) -> Result<BramNpa> {
    dims.validate()?;
    if wq == 0 || wq > n_bits || !n_bits.is_multiple_of(wq) {
        return Err(Error::Precondition(format!(
            "parallel BRAM count needs 1 <= w_q <= N with w_q | N (N={n_bits}, w_q={wq})"
        )));
    }
    let (h, w, d) = (u64::from(dims.h), u64::from(dims.w), u64::from(dims.d));
    let psums = h * d;
    let activations = h * w * u64::from(n_bits / wq);
    let weights = w * d;
    Ok(BramNpa {
        psums,
        activations,
        weights,
        total: psums + activations + weights,
    })
}

/// Lower bound `3 * n^(2/3)` on parallel BRAM accesses for a cube-shaped
/// array with `N = w_q`. Exact for perfect cubes.
pub fn min_bram_symmetric(n_pe: u64) -> f64 {
    let r = (n_pe as f64).cbrt().round() as u64;
    if r * r * r == n_pe {
        (3 * r * r) as f64
    } else {
        3.0 * (n_pe as f64).powf(2.0 / 3.0)
    }
}

/// Cycle counts of one precision group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMapping {
    pub channels: u32,
    pub bits: u32,
    /// Pairs per PE issue.
    pub packing: u32,
    pub cycles_per_issue: u32,
    pub p_ideal: Ratio<u64>,
    pub p_actual: u64,
}

/// Tiling result of one layer on one array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMapping {
    pub layer: String,
    pub weight_label: String,
    pub dims: ArrayDims,
    pub activation_bits: u32,
    pub groups: Vec<GroupMapping>,
    pub p_ideal: Ratio<u64>,
    pub p_actual: u64,
}

/// How partial-sum traffic is counted per port and cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsumTraffic {
    #[default]
    ReadWrite,
    WriteOnly,
}

impl PsumTraffic {
    pub fn accesses(self) -> u64 {
        match self {
            PsumTraffic::ReadWrite => 2,
            PsumTraffic::WriteOnly => 1,
        }
    }
}

/// Per-stream demand in bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub weights: f64,
    pub activations: f64,
    pub psums: f64,
}

impl Bandwidth {
    pub fn total(&self) -> f64 {
        self.weights + self.activations + self.psums
    }
}

/// One row of the per-layer mapping table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub layer: String,
    #[serde(rename = "H")]
    pub h: u32,
    #[serde(rename = "W")]
    pub w: u32,
    #[serde(rename = "D")]
    pub d: u32,
    pub w_q: String,
    pub p_ideal: f64,
    pub p_actual: u64,
    pub u: f64,
    pub bw_weights: f64,
    pub bw_acts: f64,
    pub bw_psums: f64,
}

impl LayerMapping {
    pub fn utilization(&self) -> f64 {
        ratio_to_f64(self.p_ideal) / self.p_actual as f64
    }

    /// Bits moved through the array ports in one cycle of this layer,
    /// summed over its groups and weighted by their cycle counts.
    pub fn port_bits(&self, accumulator_bits: u32, psum: PsumTraffic) -> u64 {
        let (h, w, d) = dims_u64(self.dims);
        let n = u64::from(self.activation_bits);
        self.groups
            .iter()
            .map(|g| {
                let per_cycle = w * d * u64::from(g.bits)
                    + h * w * u64::from(g.packing) * n
                    + h * d * u64::from(accumulator_bits) * psum.accesses();
                g.p_actual * per_cycle
            })
            .sum()
    }

    /// Peak per-stream demand at `f_mhz`; channel-wise layers report the
    /// most demanding group for each stream.
    pub fn bandwidth(&self, f_mhz: f64, accumulator_bits: u32, psum: PsumTraffic) -> Bandwidth {
        let (h, w, d) = dims_u64(self.dims);
        let n = u64::from(self.activation_bits);
        let f = f_mhz * 1e6;
        let weights = self
            .groups
            .iter()
            .map(|g| w * d * u64::from(g.bits))
            .max()
            .unwrap_or(0);
        let acts = self
            .groups
            .iter()
            .map(|g| h * w * u64::from(g.packing) * n)
            .max()
            .unwrap_or(0);
        let psums = h * d * u64::from(accumulator_bits) * psum.accesses();
        Bandwidth {
            weights: weights as f64 * f,
            activations: acts as f64 * f,
            psums: psums as f64 * f,
        }
    }

    pub fn row(&self, f_mhz: f64, accumulator_bits: u32, psum: PsumTraffic) -> MappingRow {
        let bw = self.bandwidth(f_mhz, accumulator_bits, psum);
        MappingRow {
            layer: self.layer.clone(),
            h: self.dims.h,
            w: self.dims.w,
            d: self.dims.d,
            w_q: self.weight_label.clone(),
            p_ideal: ratio_to_f64(self.p_ideal),
            p_actual: self.p_actual,
            u: self.utilization(),
            bw_weights: bw.weights,
            bw_acts: bw.activations,
            bw_psums: bw.psums,
        }
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn dims_u64(dims: ArrayDims) -> (u64, u64, u64) {
    (u64::from(dims.h), u64::from(dims.w), u64::from(dims.d))
}

/// Closed-form cycle counts of one layer slice with `od` output channels.
/// `P_actual = ceil(ceil(I_H/H) * ceil(I_W/(W*p)) * ceil(O_D/D) * I_H * (K/S)^2)`
/// where `p` is the packing factor; bit-serial PEs multiply by their cycles
/// per issue.
pub fn layer_cycles(
    layer: &ConvLayerSpec,
    od: u32,
    dims: ArrayDims,
    packing: u32,
    cycles_per_issue: u32,
) -> (Ratio<u64>, u64) {
    let (h, w, d) = dims_u64(dims);
    let ih = u64::from(layer.input_height);
    let iw = u64::from(layer.input_channels);
    let od = u64::from(od);
    let k2 = u64::from(layer.kernel).pow(2);
    let s2 = u64::from(layer.stride).pow(2);
    let p = u64::from(packing);
    let c = u64::from(cycles_per_issue);
    let ideal = Ratio::new(ih * ih * iw * od * k2 * c, s2 * h * w * p * d);
    let tiles = ih.div_ceil(h) * iw.div_ceil(w * p) * od.div_ceil(d);
    let actual = (tiles * ih * k2 * c).div_ceil(s2);
    (ideal, actual)
}

/// Maps `layer` onto `dims` for the given PE. Channel-wise layers are
/// mapped group by group and summed.
pub fn utilization(layer: &ConvLayerSpec, dims: ArrayDims, pe: &PEConfig) -> Result<LayerMapping> {
    dims.validate()?;
    let n = pe.style.activation_bits;
    if layer.activation_bits != n {
        return Err(Error::Precondition(format!(
            "layer `{}` has {}-bit activations but the PE is built for {n} bit",
            layer.name, layer.activation_bits
        )));
    }
    let mut groups = Vec::new();
    let mut p_ideal = Ratio::from_integer(0u64);
    let mut p_actual = 0u64;
    for g in layer.groups() {
        if g.bits == 0 || g.bits > n {
            return Err(Error::InvalidLayer {
                layer: layer.name.clone(),
                field: "wq",
                reason: format!("weight width {} exceeds the PE's N = {n}", g.bits),
            });
        }
        let packing = pairs_per_issue(pe, g.bits);
        let cpi = cycles_per_issue(pe, g.bits);
        let (ideal, actual) = layer_cycles(layer, g.channels, dims, packing, cpi);
        p_ideal += ideal;
        p_actual += actual;
        groups.push(GroupMapping {
            channels: g.channels,
            bits: g.bits,
            packing,
            cycles_per_issue: cpi,
            p_ideal: ideal,
            p_actual: actual,
        });
    }
    Ok(LayerMapping {
        layer: layer.name.clone(),
        weight_label: layer.weight_label(),
        dims,
        activation_bits: n,
        groups,
        p_ideal,
        p_actual,
    })
}

/// Per-layer mappings of a whole network, evaluated layer by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkMapping {
    pub layers: Vec<LayerMapping>,
    pub total_cycles: u64,
}

impl NetworkMapping {
    pub fn frames_per_second(&self, f_mhz: f64) -> Result<f64> {
        if self.total_cycles == 0 {
            return Err(Error::ZeroDenominator("network cycle count"));
        }
        Ok(f_mhz * 1e6 / self.total_cycles as f64)
    }
}

pub fn network_cycles(net: &NetworkSpec, dims: ArrayDims, pe: &PEConfig) -> Result<NetworkMapping> {
    let layers = net
        .layers
        .iter()
        .map(|l| utilization(l, dims, pe))
        .collect::<Result<Vec<_>>>()?;
    let total_cycles = layers.iter().map(|m| m.p_actual).sum();
    Ok(NetworkMapping {
        layers,
        total_cycles,
    })
}

/// Global buffer sizes and BRAM block counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferPlan {
    pub weights_bits: u64,
    pub activations_bits: u64,
    pub psums_bits: u64,
    pub block_bits: u64,
    pub weight_blocks: u64,
    pub activation_blocks: u64,
    pub psum_blocks: u64,
    /// Blocks needed to hold the combined capacity.
    pub capacity_blocks: u64,
    pub ports: BramNpa,
    /// Capacity blocks, but never fewer than the parallel port count.
    pub total_blocks: u64,
}

/// Sizes the three global buffers for the largest layer of `net`: the
/// biggest weight tensor at its word-lengths, and the biggest output
/// feature map held once as activations and once as partial sums.
pub fn buffer_plan(
    net: &NetworkSpec,
    dims: ArrayDims,
    pe: &PEConfig,
    block_bits: u64,
) -> Result<BufferPlan> {
    if block_bits == 0 {
        return Err(Error::ZeroDenominator("BRAM block size"));
    }
    let ports = bram_npa(dims, pe.style.activation_bits, pe.style.slice)?;
    let weights_bits = net.layers.iter().map(|l| l.weight_bits()).max().unwrap_or(0);
    let activations_bits = net
        .layers
        .iter()
        .map(|l| l.output_elements() * u64::from(l.activation_bits))
        .max()
        .unwrap_or(0);
    let psums_bits = net
        .layers
        .iter()
        .map(|l| l.output_elements() * u64::from(pe.accumulator_bits))
        .max()
        .unwrap_or(0);
    let capacity_blocks = (weights_bits + activations_bits + psums_bits).div_ceil(block_bits);
    Ok(BufferPlan {
        weights_bits,
        activations_bits,
        psums_bits,
        block_bits,
        weight_blocks: weights_bits.div_ceil(block_bits),
        activation_blocks: activations_bits.div_ceil(block_bits),
        psum_blocks: psums_bits.div_ceil(block_bits),
        capacity_blocks,
        ports,
        total_blocks: if net.layers.is_empty() {
            0
        } else {
            capacity_blocks.max(ports.total)
        },
    })
}
