use serde::{Deserialize, Serialize};

use super::{max_pe_count, EvalOptions, HardwareConstraints};
use crate::calib::Calibration;
use crate::dataflow::{
    bram_npa, buffer_plan, network_cycles, ArrayDims, BufferPlan, MappingRow, NetworkMapping,
};
use crate::error::{Error, Result};
use crate::pe::{ppg_ops_per_mac, PEConfig};
use crate::workload::NetworkSpec;

/// A concrete accelerator: PE, array shape, clock and the per-layer mapping
/// of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub network: String,
    pub pe: PEConfig,
    pub dims: ArrayDims,
    pub f_mhz: f64,
    pub klut: f64,
    pub buffers: BufferPlan,
    pub mapping: NetworkMapping,
    pub options: EvalOptions,
}

impl DesignPoint {
    /// Maps `net` onto `dims` and checks every resource and bandwidth
    /// constraint. Violations are reported as [`Error::Infeasible`].
    pub fn build(
        net: &NetworkSpec,
        pe: PEConfig,
        dims: ArrayDims,
        hwc: &HardwareConstraints,
        calib: &Calibration,
        options: EvalOptions,
    ) -> Result<Self> {
        let widths: Vec<u32> = (1..=pe.style.activation_bits).collect();
        net.validate(&widths)?;
        hwc.validate()?;
        options.validate()?;
        dims.validate()?;
        let entry = calib.entry(pe.style.family, pe.style.slice)?;
        let cap = max_pe_count(&pe, hwc, calib)?;
        if dims.n_pe() > cap {
            return Err(Error::Infeasible(format!(
                "{dims} needs {} PEs, threshold is {cap}",
                dims.n_pe()
            )));
        }
        let klut = dims.n_pe() as f64 * entry.lut_per_pe / (1.0 - hwc.lut_overhead) / 1e3;
        if klut * 1e3 > hwc.lut_budget as f64 {
            return Err(Error::Infeasible(format!(
                "{klut:.1} kLUT exceeds the budget of {} LUTs",
                hwc.lut_budget
            )));
        }
        let buffers = buffer_plan(net, dims, &pe, options.block_bits)?;
        if buffers.total_blocks > hwc.bram_budget {
            return Err(Error::Infeasible(format!(
                "{} BRAM blocks exceed the budget of {}",
                buffers.total_blocks, hwc.bram_budget
            )));
        }
        check_port_rate(net, &pe, entry.f_mhz, hwc, &options)?;
        let mapping = network_cycles(net, dims, &pe)?;
        for (layer, m) in net.layers.iter().zip(&mapping.layers) {
            let min = min_layer_cycles(layer.weight_bits(), entry.f_mhz, hwc, &options);
            if m.p_actual < min {
                return Err(Error::Infeasible(format!(
                    "layer `{}` streams weights faster than the DRAM bandwidth",
                    layer.name
                )));
            }
        }
        Ok(Self {
            network: net.name.clone(),
            pe,
            dims,
            f_mhz: entry.f_mhz,
            klut,
            buffers,
            mapping,
            options,
        })
    }

    pub fn n_pe(&self) -> u64 {
        self.dims.n_pe()
    }

    pub fn mapping_rows(&self) -> Vec<MappingRow> {
        self.mapping
            .layers
            .iter()
            .map(|m| m.row(self.f_mhz, self.pe.accumulator_bits, self.options.psum_traffic))
            .collect()
    }
}

/// Fewest cycles a layer may take without exceeding the DRAM bandwidth
/// while its weights stream in.
pub(crate) fn min_layer_cycles(
    weight_bits: u64,
    f_mhz: f64,
    hwc: &HardwareConstraints,
    options: &EvalOptions,
) -> u64 {
    let per_frame = weight_bits as f64 / f64::from(options.batch);
    (per_frame * f_mhz * 1e6 / hwc.dram_bw).ceil() as u64
}

/// Every BRAM port moves at most one word per cycle; the widest word must
/// fit the per-port bandwidth.
pub(crate) fn check_port_rate(
    net: &NetworkSpec,
    pe: &PEConfig,
    f_mhz: f64,
    hwc: &HardwareConstraints,
    options: &EvalOptions,
) -> Result<()> {
    let widest_weight = net
        .layers
        .iter()
        .map(|l| l.max_weight_bits())
        .max()
        .unwrap_or(0);
    let psum = pe.accumulator_bits * options.psum_traffic.accesses() as u32;
    let word = widest_weight.max(pe.style.activation_bits).max(psum);
    let rate = f64::from(word) * f_mhz * 1e6;
    if rate > hwc.onchip_bw_per_port {
        return Err(Error::Infeasible(format!(
            "{word}-bit port words at {f_mhz} MHz need {:.2} Gbit/s per port, budget {:.2}",
            rate / 1e9,
            hwc.onchip_bw_per_port / 1e9
        )));
    }
    Ok(())
}

/// Energy per frame in mJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute_mj: f64,
    pub bram_mj: f64,
    pub dram_mj: f64,
    pub total_mj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub network: String,
    pub pe_style: String,
    pub k: u32,
    pub accumulator_bits: u32,
    pub dims: ArrayDims,
    pub n_pe: u64,
    pub f_mhz: f64,
    pub klut: f64,
    pub bram_blocks: u64,
    pub bram_npa: u64,
    pub total_cycles: u64,
    pub total_macs: u64,
    pub frames_per_s: f64,
    pub gops_per_s: f64,
    pub gops_per_s_per_w: f64,
    pub dram_traffic_bits: f64,
    pub energy: EnergyBreakdown,
    pub utilization: UtilizationSummary,
}

/// Off-chip bits per frame: weights once per batch, the input image, and
/// the configured base traffic.
pub fn dram_traffic_bits(net: &NetworkSpec, options: &EvalOptions) -> f64 {
    let weights: u64 = net.layers.iter().map(|l| l.weight_bits()).sum();
    let image = net
        .first()
        .map(|l| l.input_elements() * u64::from(l.activation_bits))
        .unwrap_or(0);
    weights as f64 / f64::from(options.batch) + image as f64 + options.base_traffic_bits as f64
}

/// Throughput and per-frame energy of `design` running `net`.
pub fn evaluate(
    design: &DesignPoint,
    net: &NetworkSpec,
    hwc: &HardwareConstraints,
    calib: &Calibration,
) -> Result<DesignReport> {
    if net.layers.len() != design.mapping.layers.len() {
        return Err(Error::Precondition(format!(
            "design maps {} layers, network `{}` has {}",
            design.mapping.layers.len(),
            net.name,
            net.layers.len()
        )));
    }
    let frames_per_s = design.mapping.frames_per_second(design.f_mhz)?;
    let pe = &design.pe;
    let entry = calib.entry(pe.style.family, pe.style.slice)?;

    let mut compute_pj = 0.0;
    for layer in &net.layers {
        let macs_per_channel = layer.macs() / u64::from(layer.output_channels);
        for g in layer.groups() {
            let ops = macs_per_channel
                * u64::from(g.channels)
                * u64::from(ppg_ops_per_mac(&pe.style, g.bits));
            compute_pj += ops as f64 * entry.energy_per_ppg_op(pe.style.family, g.bits)?;
        }
    }
    let port_bits: u64 = design
        .mapping
        .layers
        .iter()
        .map(|m| m.port_bits(pe.accumulator_bits, design.options.psum_traffic))
        .sum();
    let bram_pj = port_bits as f64 * calib.bram_energy_pj_per_bit;
    let traffic = dram_traffic_bits(net, &design.options);
    let dram_pj = traffic * hwc.dram_energy;

    let compute_mj = compute_pj * 1e-9;
    let bram_mj = bram_pj * 1e-9;
    let dram_mj = dram_pj * 1e-9;
    let total_mj = compute_mj + bram_mj + dram_mj;

    let total_macs = net.total_macs();
    let gops_per_s = frames_per_s * 2.0 * total_macs as f64 / 1e9;
    let watts = total_mj * 1e-3 * frames_per_s;
    let gops_per_s_per_w = if watts > 0.0 { gops_per_s / watts } else { 0.0 };

    let utils: Vec<f64> = design
        .mapping
        .layers
        .iter()
        .map(|m| m.utilization())
        .collect();
    let utilization = UtilizationSummary {
        min: utils.iter().copied().fold(f64::INFINITY, f64::min),
        mean: utils.iter().sum::<f64>() / utils.len() as f64,
        max: utils.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };

    Ok(DesignReport {
        network: design.network.clone(),
        pe_style: pe.style.family.to_string(),
        k: pe.style.slice,
        accumulator_bits: pe.accumulator_bits,
        dims: design.dims,
        n_pe: design.n_pe(),
        f_mhz: design.f_mhz,
        klut: design.klut,
        bram_blocks: design.buffers.total_blocks,
        bram_npa: bram_npa(design.dims, pe.style.activation_bits, pe.style.slice)?.total,
        total_cycles: design.mapping.total_cycles,
        total_macs,
        frames_per_s,
        gops_per_s,
        gops_per_s_per_w,
        dram_traffic_bits: traffic,
        energy: EnergyBreakdown {
            compute_mj,
            bram_mj,
            dram_mj,
            total_mj,
        },
        utilization,
    })
}
