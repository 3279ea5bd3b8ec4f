use serde::{Deserialize, Serialize};

use super::evaluate::{check_port_rate, min_layer_cycles};
use super::{max_pe_count, DesignPoint, EvalOptions, HardwareConstraints};
use crate::calib::Calibration;
use crate::dataflow::{bram_npa, buffer_plan, ArrayDims};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::pe::{cycles_per_issue, pairs_per_issue, PEConfig};
use crate::workload::NetworkSpec;

/// A feasible array shape with its objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub dims: ArrayDims,
    pub total_cycles: u64,
    pub bram_npa: u64,
    pub n_pe: u64,
}

impl Candidate {
    /// Total order: cycles, parallel BRAMs, PEs, then `(H, W, D)`.
    pub fn key(&self) -> (u64, u64, u64, u32, u32, u32) {
        (
            self.total_cycles,
            self.bram_npa,
            self.n_pe,
            self.dims.h,
            self.dims.w,
            self.dims.d,
        )
    }

    /// Weak dominance in (cycles, parallel BRAMs, PEs).
    pub fn weakly_dominates(&self, other: &Candidate) -> bool {
        self.total_cycles <= other.total_cycles
            && self.bram_npa <= other.bram_npa
            && self.n_pe <= other.n_pe
    }
}

/// Bounds of the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub max_h: u32,
    pub max_w: u32,
    pub max_d: u32,
    pub max_pes: u64,
}

impl SearchSpace {
    pub fn new(net: &NetworkSpec, pe: &PEConfig, max_pes: u64) -> Self {
        let max_ih = net.layers.iter().map(|l| l.input_height).max().unwrap_or(1);
        let max_iw = net.layers.iter().map(|l| l.input_channels).max().unwrap_or(1);
        let max_od = net.layers.iter().map(|l| l.output_channels).max().unwrap_or(1);
        let pack = pairs_per_issue(pe, pe.style.slice);
        Self {
            max_h: max_ih,
            max_w: max_iw.div_ceil(pack),
            max_d: max_od,
            max_pes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArraySearch {
    pub best: DesignPoint,
    /// Non-dominated candidates in objective order; the first is `best`.
    pub pareto: Vec<Candidate>,
    pub space: SearchSpace,
    pub evaluated: u64,
    pub feasible: u64,
}

struct GroupTerm {
    ih: u64,
    iw: u64,
    od: u64,
    k2c: u64,
    s2: u64,
    pack: u64,
}

struct LayerTerms {
    groups: Vec<GroupTerm>,
    min_cycles: u64,
}

fn layer_terms(
    net: &NetworkSpec,
    pe: &PEConfig,
    f_mhz: f64,
    hwc: &HardwareConstraints,
    options: &EvalOptions,
) -> Vec<LayerTerms> {
    net.layers
        .iter()
        .map(|l| LayerTerms {
            groups: l
                .groups()
                .iter()
                .map(|g| GroupTerm {
                    ih: u64::from(l.input_height),
                    iw: u64::from(l.input_channels),
                    od: u64::from(g.channels),
                    k2c: u64::from(l.kernel).pow(2) * u64::from(cycles_per_issue(pe, g.bits)),
                    s2: u64::from(l.stride).pow(2),
                    pack: u64::from(pairs_per_issue(pe, g.bits)),
                })
                .collect(),
            min_cycles: min_layer_cycles(l.weight_bits(), f_mhz, hwc, options),
        })
        .collect()
}

/// Total cycles on `(h, w, d)`, or `None` when a layer violates the DRAM
/// roofline.
fn total_cycles(terms: &[LayerTerms], h: u64, w: u64, d: u64) -> Option<u64> {
    let mut total = 0u64;
    for layer in terms {
        let mut cycles = 0u64;
        for g in &layer.groups {
            let tiles = g.ih.div_ceil(h) * g.iw.div_ceil(w * g.pack) * g.od.div_ceil(d);
            cycles += (tiles * g.ih * g.k2c).div_ceil(g.s2);
        }
        if cycles < layer.min_cycles {
            return None;
        }
        total += cycles;
    }
    Some(total)
}

/// Every feasible candidate in ascending [`Candidate::key`] order, plus the
/// number of shapes visited.
pub fn enumerate_candidates(
    net: &NetworkSpec,
    pe: &PEConfig,
    hwc: &HardwareConstraints,
    calib: &Calibration,
    options: &EvalOptions,
    exec: Exec,
) -> Result<(Vec<Candidate>, SearchSpace, u64)> {
    let widths: Vec<u32> = (1..=pe.style.activation_bits).collect();
    net.validate(&widths)?;
    hwc.validate()?;
    options.validate()?;
    let entry = calib.entry(pe.style.family, pe.style.slice)?;
    let space = SearchSpace::new(net, pe, max_pe_count(pe, hwc, calib)?);
    if space.max_pes == 0 {
        return Err(Error::Infeasible("the LUT budget does not fit a single PE".into()));
    }
    check_port_rate(net, pe, entry.f_mhz, hwc, options)?;
    let unit = ArrayDims::new(1, 1, 1)?;
    let capacity = buffer_plan(net, unit, pe, options.block_bits)?.capacity_blocks;
    if capacity > hwc.bram_budget {
        return Err(Error::Infeasible(format!(
            "buffers need {capacity} BRAM blocks, budget is {}",
            hwc.bram_budget
        )));
    }
    let terms = layer_terms(net, pe, entry.f_mhz, hwc, options);
    let n = pe.style.activation_bits;
    let k = pe.style.slice;

    let mut rows: Vec<(u32, u32)> = Vec::new();
    for h in 1..=space.max_h {
        for w in 1..=space.max_w {
            if u64::from(h) * u64::from(w) > space.max_pes {
                break;
            }
            rows.push((h, w));
        }
    }
    let per_row = exec.map(&rows, |&(h, w)| {
        let hw = u64::from(h) * u64::from(w);
        let max_d = u64::from(space.max_d).min(space.max_pes / hw) as u32;
        let mut found = Vec::new();
        for d in 1..=max_d {
            let dims = ArrayDims { h, w, d };
            let Ok(npa) = bram_npa(dims, n, k) else {
                continue;
            };
            if npa.total > hwc.bram_budget {
                continue;
            }
            if let Some(cycles) = total_cycles(&terms, u64::from(h), u64::from(w), u64::from(d)) {
                found.push(Candidate {
                    dims,
                    total_cycles: cycles,
                    bram_npa: npa.total,
                    n_pe: dims.n_pe(),
                });
            }
        }
        (u64::from(max_d), found)
    });
    let evaluated = per_row.iter().map(|(n, _)| n).sum();
    let mut all: Vec<Candidate> = per_row.into_iter().flat_map(|(_, f)| f).collect();
    all.sort_unstable_by_key(Candidate::key);
    Ok((all, space, evaluated))
}

/// Non-dominated subset of candidates sorted by [`Candidate::key`]. Every
/// dropped candidate is weakly dominated by a retained one.
pub fn pareto_front(sorted: &[Candidate]) -> Vec<Candidate> {
    let mut front: Vec<Candidate> = Vec::new();
    for c in sorted {
        if !front.iter().any(|f| f.weakly_dominates(c)) {
            front.push(*c);
        }
    }
    front
}

/// Exhaustive array-shape search minimizing total cycles, with ties broken
/// by fewer parallel BRAM accesses, fewer PEs and lexicographic shape.
pub fn array_dse(
    net: &NetworkSpec,
    pe: &PEConfig,
    hwc: &HardwareConstraints,
    calib: &Calibration,
    options: &EvalOptions,
    exec: Exec,
) -> Result<ArraySearch> {
    let (all, space, evaluated) = enumerate_candidates(net, pe, hwc, calib, options, exec)?;
    let Some(first) = all.first() else {
        return Err(Error::Infeasible(format!(
            "no array shape for `{}` satisfies the constraints",
            net.name
        )));
    };
    let best = DesignPoint::build(net, *pe, first.dims, hwc, calib, *options)?;
    Ok(ArraySearch {
        best,
        pareto: pareto_front(&all),
        space,
        evaluated,
        feasible: all.len() as u64,
    })
}
