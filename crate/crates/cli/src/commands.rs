use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mpdse::dataflow::MappingRow;
use mpdse::dse::{evaluate, full_flow, pe_dse as rank_pes, EvalOptions, FlowOptions, PeRanking};
use mpdse::exec::configure_threads;
use mpdse::pe::{PEFamily, DEFAULT_ACCUMULATOR_BITS};
use mpdse::quant::{compression_factor, footprint as weight_bits, footprint_at, FootprintPolicy, FootprintUnit};
use mpdse::workload::{parse_workload, resnet, ResNetVariant};
use mpdse::{
    ArrayDims, Calibration, DesignPoint, DesignReport, Exec, HardwareConstraints, NetworkSpec,
    PEConfig, PEStyle, TOOL_VERSION,
};
use serde::{Deserialize, Serialize};

use crate::render::{csv_string, json_string, key_values, table, write};
use crate::{Format, Global};

pub fn load_calibration(g: &Global) -> Result<Calibration> {
    match &g.calib {
        None => Ok(Calibration::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading calibration {}", path.display()))?;
            Calibration::from_json(&text).with_context(|| format!("calibration {}", path.display()))
        }
    }
}

fn load_constraints(g: &Global) -> Result<HardwareConstraints> {
    match &g.constraints {
        None => Ok(HardwareConstraints::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading constraints {}", path.display()))?;
            HardwareConstraints::from_json(&text)
                .with_context(|| format!("constraints {}", path.display()))
        }
    }
}

/// Parallel unless `--jobs 1`.
pub fn exec_for(g: &Global) -> Result<Exec> {
    match g.jobs {
        None => Ok(Exec::Auto),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            configure_threads(n)?;
            Ok(Exec::Auto)
        }
    }
}

fn out_dir(g: &Global) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

/// A built-in ResNet name, or a workload file.
pub fn load_network(net: &str, wq: Option<u32>) -> Result<NetworkSpec> {
    if let Ok(variant) = net.parse::<ResNetVariant>() {
        return Ok(resnet(variant, wq.unwrap_or(8))?);
    }
    let text = fs::read_to_string(net).with_context(|| format!("reading workload {net}"))?;
    let parsed = parse_workload(&text).with_context(|| format!("workload {net}"))?;
    Ok(match wq {
        Some(bits) => parsed.with_inner_bits(bits),
        None => parsed,
    })
}

fn families(names: &[String]) -> Result<Vec<PEFamily>> {
    if names.is_empty() {
        return Ok(PEFamily::all());
    }
    names
        .iter()
        .map(|n| n.parse::<PEFamily>().map_err(anyhow::Error::from))
        .collect()
}

fn styles(families: &[PEFamily], slices: &[u32]) -> Result<Vec<PEStyle>> {
    let mut out = Vec::new();
    for &k in slices {
        for &f in families {
            out.push(PEStyle::new(f, k, 8)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct PeDseArgs {
    /// Weight word-lengths to rank for.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4, 8])]
    pub wq: Vec<u32>,
    /// PE families, e.g. bp-st-1d (default: all eight).
    #[arg(long, value_delimiter = ',')]
    pub styles: Vec<String>,
    /// Operand slice widths.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4])]
    pub k: Vec<u32>,
}

#[derive(Serialize)]
struct RankRow {
    w_q: u32,
    rank: usize,
    style: String,
    k: u32,
    bits_per_s_per_lut: f64,
    luts: f64,
    f_mhz: f64,
}

fn rank_rows(ranking: &PeRanking) -> Vec<RankRow> {
    ranking
        .per_wq
        .iter()
        .flat_map(|(wq, list)| {
            list.iter().enumerate().map(move |(i, e)| RankRow {
                w_q: *wq,
                rank: i + 1,
                style: e.style.family.to_string(),
                k: e.style.slice,
                bits_per_s_per_lut: e.efficiency,
                luts: e.luts,
                f_mhz: e.f_mhz,
            })
        })
        .collect()
}

pub fn pe_dse(g: &Global, a: &PeDseArgs) -> Result<()> {
    let calib = load_calibration(g)?;
    let candidates = styles(&families(&a.styles)?, &a.k)?;
    let ranking = rank_pes(&candidates, &a.wq, &calib, DEFAULT_ACCUMULATOR_BITS)?;
    let rows = rank_rows(&ranking);
    let csv = csv_string(&rows)?;
    write(&out_dir(g), "pe_ranking.csv", &csv)?;
    match g.format {
        Format::Csv => print!("{csv}"),
        Format::Json => print!("{}", json_string(&ranking)?),
        Format::Table => print!(
            "{}",
            table(
                &["w_q", "rank", "style", "k", "bits/s/LUT", "LUTs", "f (MHz)"],
                &rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.w_q.to_string(),
                            r.rank.to_string(),
                            r.style.clone(),
                            r.k.to_string(),
                            format!("{:.4e}", r.bits_per_s_per_lut),
                            format!("{:.1}", r.luts),
                            format!("{:.0}", r.f_mhz),
                        ]
                    })
                    .collect::<Vec<_>>()
            )
        ),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// resnet18, resnet50, resnet152 or a workload file.
    #[arg(long)]
    pub net: String,
    /// Weight word-length of every non-stem layer.
    #[arg(long)]
    pub wq: Option<u32>,
    /// Restrict PE candidates to this operand slice.
    #[arg(long)]
    pub k: Option<u32>,
    /// Restrict PE candidates to these families.
    #[arg(long, value_delimiter = ',')]
    pub styles: Vec<String>,
    /// Accumulator width of the PE.
    #[arg(long, default_value_t = DEFAULT_ACCUMULATOR_BITS)]
    pub accumulator_bits: u32,
    /// Frames sharing one weight fetch.
    #[arg(long, default_value_t = 1)]
    pub batch: u32,
}

/// Everything needed to rebuild a design.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignFile {
    pub tool_version: String,
    pub network: NetworkSpec,
    pub pe: PEConfig,
    pub dims: ArrayDims,
    pub options: EvalOptions,
}

#[derive(Serialize)]
struct FootprintSummary {
    policy: FootprintPolicy,
    quantized: f64,
    baseline_fp32: f64,
    compression: f64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    tool_version: &'a str,
    report: &'a DesignReport,
    dims: ArrayDims,
    mapping: &'a [MappingRow],
    footprint: FootprintSummary,
    constraints: &'a HardwareConstraints,
    calibration: &'a Calibration,
}

fn footprint_summary(net: &NetworkSpec, policy: FootprintPolicy) -> Result<FootprintSummary> {
    let q = weight_bits(net, &policy);
    let fp = footprint_at(net, &policy, 32);
    Ok(FootprintSummary {
        policy,
        quantized: policy.unit.convert(q),
        baseline_fp32: policy.unit.convert(fp),
        compression: compression_factor(fp as f64, q as f64)?,
    })
}

fn emit_design(
    g: &Global,
    dir: Option<&Path>,
    net: &NetworkSpec,
    design: &DesignPoint,
    report: &DesignReport,
    hwc: &HardwareConstraints,
    calib: &Calibration,
) -> Result<()> {
    let rows = design.mapping_rows();
    let report_json = json_string(&ReportFile {
        tool_version: TOOL_VERSION,
        report,
        dims: design.dims,
        mapping: &rows,
        footprint: footprint_summary(net, FootprintPolicy::default())?,
        constraints: hwc,
        calibration: calib,
    })?;
    let mapping_csv = csv_string(&rows)?;
    if let Some(dir) = dir {
        let design_file = DesignFile {
            tool_version: TOOL_VERSION.to_string(),
            network: net.clone(),
            pe: design.pe,
            dims: design.dims,
            options: design.options,
        };
        write(dir, "design.json", &json_string(&design_file)?)?;
        write(dir, "mapping.csv", &mapping_csv)?;
        write(dir, "report.json", &report_json)?;
    }
    match g.format {
        Format::Json => print!("{report_json}"),
        Format::Csv => print!("{mapping_csv}"),
        Format::Table => {
            let e = &report.energy;
            print!(
                "{}",
                key_values(&[
                    ("network", report.network.clone()),
                    ("pe", format!("{}/k{}", report.pe_style, report.k)),
                    ("array", format!("{} ({} PEs)", report.dims, report.n_pe)),
                    ("clock", format!("{:.0} MHz", report.f_mhz)),
                    ("LUTs", format!("{:.1} k", report.klut)),
                    ("BRAM blocks", format!("{} ({} parallel)", report.bram_blocks, report.bram_npa)),
                    ("cycles/frame", report.total_cycles.to_string()),
                    ("frames/s", format!("{:.2}", report.frames_per_s)),
                    ("GOps/s", format!("{:.2}", report.gops_per_s)),
                    ("GOps/s/W", format!("{:.3}", report.gops_per_s_per_w)),
                    (
                        "energy/frame",
                        format!(
                            "{:.2} mJ (compute {:.2}, BRAM {:.2}, DRAM {:.2})",
                            e.total_mj, e.compute_mj, e.bram_mj, e.dram_mj
                        ),
                    ),
                ])
            );
            println!();
            print!(
                "{}",
                table(
                    &["layer", "w_q", "P_ideal", "P_actual", "U"],
                    &rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.layer.clone(),
                                r.w_q.clone(),
                                format!("{:.1}", r.p_ideal),
                                r.p_actual.to_string(),
                                format!("{:.3}", r.u),
                            ]
                        })
                        .collect::<Vec<_>>()
                )
            );
        }
    }
    Ok(())
}

pub fn explore(g: &Global, a: &ExploreArgs) -> Result<()> {
    let calib = load_calibration(g)?;
    let hwc = load_constraints(g)?;
    let exec = exec_for(g)?;
    let net = load_network(&a.net, a.wq)?;
    let slices = a.k.map_or_else(|| vec![1, 2, 4], |k| vec![k]);
    let options = FlowOptions {
        styles: styles(&families(&a.styles)?, &slices)?,
        style: None,
        accumulator_bits: a.accumulator_bits,
        eval: EvalOptions {
            batch: a.batch,
            ..Default::default()
        },
        exec,
    };
    let flow = full_flow(&net, &hwc, &calib, &options)?;
    emit_design(g, Some(&out_dir(g)), &net, &flow.design, &flow.report, &hwc, &calib)
}

#[derive(Debug, Args)]
pub struct FootprintArgs {
    /// resnet18, resnet50, resnet152 or a workload file.
    #[arg(long)]
    pub net: String,
    /// Weight word-length of every non-stem layer.
    #[arg(long)]
    pub wq: Option<u32>,
    /// Baseline storage: fp32 or a bit width.
    #[arg(long, default_value = "fp32")]
    pub baseline: String,
    /// bits, Mbit or MB.
    #[arg(long, default_value = "Mbit")]
    pub unit: FootprintUnit,
    /// Count projection (downsample) convolutions.
    #[arg(long)]
    pub include_projections: bool,
    /// Leave out the 8-bit stem layer.
    #[arg(long)]
    pub exclude_stem: bool,
}

fn baseline_bits(s: &str) -> Result<u32> {
    let digits = s.strip_prefix("fp").unwrap_or(s);
    match digits.parse::<u32>() {
        Ok(b) if (1..=64).contains(&b) => Ok(b),
        _ => bail!("baseline must be fp32, fp16 or a bit width, got `{s}`"),
    }
}

#[derive(Serialize)]
struct FootprintOutput {
    network: String,
    policy: FootprintPolicy,
    unit: String,
    quantized: f64,
    baseline_bits: u32,
    baseline: f64,
    compression: f64,
}

pub fn footprint(g: &Global, a: &FootprintArgs) -> Result<()> {
    let net = load_network(&a.net, a.wq)?;
    let policy = FootprintPolicy {
        include_projection_convs: a.include_projections,
        include_stem_last_8bit: !a.exclude_stem,
        unit: a.unit,
    };
    let bits = baseline_bits(&a.baseline)?;
    let q = weight_bits(&net, &policy);
    let fp = footprint_at(&net, &policy, bits);
    let out = FootprintOutput {
        network: net.name.clone(),
        policy,
        unit: a.unit.to_string(),
        quantized: a.unit.convert(q),
        baseline_bits: bits,
        baseline: a.unit.convert(fp),
        compression: compression_factor(fp as f64, q as f64)?,
    };
    match g.format {
        Format::Json => print!("{}", json_string(&out)?),
        Format::Csv => print!("{}", csv_string(&[&out])?),
        Format::Table => print!(
            "{}",
            key_values(&[
                ("network", out.network.clone()),
                (
                    "policy",
                    format!(
                        "projections {}, stem {}",
                        if policy.include_projection_convs { "included" } else { "excluded" },
                        if policy.include_stem_last_8bit { "included" } else { "excluded" },
                    ),
                ),
                ("quantized", format!("{:.3} {}", out.quantized, out.unit)),
                ("baseline", format!("{:.3} {} ({bits} bit)", out.baseline, out.unit)),
                ("compression", format!("{:.2}x", out.compression)),
            ])
        ),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// design.json written by `explore`.
    pub design: PathBuf,
}

pub fn report(g: &Global, a: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.design)
        .with_context(|| format!("reading {}", a.design.display()))?;
    let file: DesignFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.design.display()))?;
    let calib = load_calibration(g)?;
    let hwc = load_constraints(g)?;
    let design = DesignPoint::build(&file.network, file.pe, file.dims, &hwc, &calib, file.options)?;
    let report = evaluate(&design, &file.network, &hwc, &calib)?;
    emit_design(g, g.out.as_deref(), &file.network, &design, &report, &hwc, &calib)
}
