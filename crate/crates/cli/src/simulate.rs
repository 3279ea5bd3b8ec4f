use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mpdse::pe::{dot_product, pe_mac, PEFamily, DEFAULT_ACCUMULATOR_BITS};
use mpdse::workload::parse_workload;
use mpdse::{PEConfig, PEStyle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::exec_for;
use crate::render::{json_string, table, write};
use crate::{Format, Global, Mismatch};

const WORD_LENGTHS: [u32; 4] = [1, 2, 4, 8];
const MAX_DUMPS: usize = 10;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sweep every activation and weight value.
    #[arg(long, conflicts_with = "layer")]
    pub exhaustive: bool,
    /// Workload file whose layers are simulated with random operands.
    #[arg(long)]
    pub layer: Option<PathBuf>,
    /// Slice each output-channel group at its own word-length instead of
    /// the layer's widest.
    #[arg(long, requires = "layer")]
    pub channelwise: bool,
    /// Operand slice widths.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4])]
    pub k: Vec<u32>,
    /// PE families (default: all eight).
    #[arg(long, value_delimiter = ',')]
    pub styles: Vec<String>,
    /// Random dot products per PE when neither --exhaustive nor --layer is given.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Length of each random dot product.
    #[arg(long, default_value_t = 576)]
    pub length: usize,
    /// Activation width.
    #[arg(long, default_value_t = 8)]
    pub n_bits: u32,
}

#[derive(Debug, Clone, Serialize)]
struct Dump {
    pe: String,
    w_q: u32,
    context: String,
    expected: i64,
    got: i64,
}

#[derive(Debug, Serialize)]
struct PeSummary {
    pe: String,
    cases: u64,
    mismatches: u64,
}

#[derive(Debug, Serialize)]
struct Summary {
    mode: &'static str,
    seed: u64,
    cases: u64,
    mismatches: u64,
    per_pe: Vec<PeSummary>,
    dumps: Vec<Dump>,
}

struct Outcome {
    cases: u64,
    mismatches: u64,
    dumps: Vec<Dump>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            cases: 0,
            mismatches: 0,
            dumps: Vec::new(),
        }
    }

    fn check(&mut self, cfg: &PEConfig, wq: u32, context: impl FnOnce() -> String, expected: i64, got: i64) {
        self.cases += 1;
        if expected != got {
            self.mismatches += 1;
            if self.dumps.len() < MAX_DUMPS {
                self.dumps.push(Dump {
                    pe: cfg.style.to_string(),
                    w_q: wq,
                    context: context(),
                    expected,
                    got,
                });
            }
        }
    }
}

fn random_operands(rng: &mut ChaCha8Rng, n_bits: u32, wq: u32, len: usize) -> (Vec<i64>, Vec<i64>) {
    let half = 1i64 << (wq - 1);
    let a = (0..len).map(|_| rng.random_range(0..1i64 << n_bits)).collect();
    let w = (0..len).map(|_| rng.random_range(-half..half)).collect();
    (a, w)
}

fn oracle(a: &[i64], w: &[i64]) -> i64 {
    a.iter().zip(w).map(|(x, y)| x * y).sum()
}

fn exhaustive(cfg: &PEConfig) -> Result<Outcome> {
    let mut out = Outcome::new();
    let n = cfg.style.activation_bits;
    for wq in WORD_LENGTHS.into_iter().filter(|&wq| wq <= n) {
        let half = 1i64 << (wq - 1);
        for a in 0..1i64 << n {
            for w in -half..half {
                let got = pe_mac(cfg, wq, &[a], &[w])?.result;
                out.check(cfg, wq, || format!("a={a} w={w}"), a * w, got);
            }
        }
    }
    Ok(out)
}

fn random_vectors(cfg: &PEConfig, seed: u64, trials: usize, len: usize) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::new();
    let n = cfg.style.activation_bits;
    for t in 0..trials {
        let wq = WORD_LENGTHS[t % WORD_LENGTHS.len()].min(n);
        let (a, w) = random_operands(&mut rng, n, wq, len);
        let got = dot_product(cfg, wq, &a, &w)?.result;
        out.check(cfg, wq, || format!("trial {t}, length {len}"), oracle(&a, &w), got);
    }
    Ok(out)
}

fn layers(cfg: &PEConfig, seed: u64, net: &mpdse::NetworkSpec, channelwise: bool) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::new();
    let n = cfg.style.activation_bits;
    for layer in &net.layers {
        let len = (layer.input_channels * layer.kernel * layer.kernel) as usize;
        let widest = layer.max_weight_bits();
        let mut channel = 0;
        for g in layer.groups() {
            let wq = if channelwise { g.bits } else { widest };
            for _ in 0..g.channels {
                let (a, w) = random_operands(&mut rng, n, wq, len);
                let got = dot_product(cfg, wq, &a, &w)?.result;
                let ch = channel;
                out.check(cfg, wq, || format!("layer {} channel {ch}", layer.name), oracle(&a, &w), got);
                channel += 1;
            }
        }
    }
    Ok(out)
}

pub fn run(g: &Global, a: &SimulateArgs) -> Result<()> {
    let families: Vec<PEFamily> = if a.styles.is_empty() {
        PEFamily::all()
    } else {
        a.styles.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let mut configs = Vec::new();
    for &k in &a.k {
        for &f in &families {
            configs.push(PEConfig::new(PEStyle::new(f, k, a.n_bits)?, DEFAULT_ACCUMULATOR_BITS)?);
        }
    }
    let net = match &a.layer {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(parse_workload(&text).with_context(|| format!("workload {}", path.display()))?)
        }
        None => None,
    };
    let mode = if a.exhaustive {
        "exhaustive"
    } else if net.is_some() {
        "layer"
    } else {
        "random"
    };
    let exec = exec_for(g)?;
    let results = exec.map(&configs, |cfg| match &net {
        _ if a.exhaustive => exhaustive(cfg),
        Some(net) => layers(cfg, g.seed, net, a.channelwise),
        None => random_vectors(cfg, g.seed, a.trials, a.length),
    });
    let mut summary = Summary {
        mode,
        seed: g.seed,
        cases: 0,
        mismatches: 0,
        per_pe: Vec::new(),
        dumps: Vec::new(),
    };
    for (cfg, r) in configs.iter().zip(results) {
        let r = r?;
        summary.cases += r.cases;
        summary.mismatches += r.mismatches;
        summary.per_pe.push(PeSummary {
            pe: cfg.style.to_string(),
            cases: r.cases,
            mismatches: r.mismatches,
        });
        summary.dumps.extend(r.dumps);
    }
    summary.dumps.truncate(MAX_DUMPS);

    let json = json_string(&summary)?;
    if let Some(dir) = &g.out {
        write(dir, "simulation.json", &json)?;
    }
    match g.format {
        Format::Json => print!("{json}"),
        Format::Csv => print!("{}", crate::render::csv_string(&summary.per_pe)?),
        Format::Table => {
            let rows: Vec<Vec<String>> = summary
                .per_pe
                .iter()
                .map(|p| vec![p.pe.clone(), p.cases.to_string(), p.mismatches.to_string()])
                .collect();
            print!("{}", table(&["pe", "cases", "mismatches"], &rows));
            println!("{mode}: {} cases, {} mismatches", summary.cases, summary.mismatches);
        }
    }
    if let Some(d) = summary.dumps.first() {
        return Err(Mismatch(format!(
            "{} w_q={} {}: expected {}, got {}",
            d.pe, d.w_q, d.context, d.expected, d.got
        ))
        .into());
    }
    Ok(())
}
