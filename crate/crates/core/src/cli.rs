//! Command-line front end: `evaluate`, `compare`, `explore` and `emit-model`.
//!
//! Exit codes: 0 success, 1 no candidate satisfies the constraints,
//! 2 input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::costmodel::evaluate;
use crate::error::Error;
use crate::explorer::{config_grid, explore, explore_groupings, Constraints, ExploreOptions};
use crate::fixed::Centi;
use crate::fusion::{
    layer_by_layer, pool_delimited, FusionGrouping, GroupingMode, DEFAULT_GROUPING_CAP,
};
use crate::hwmodel::{Arch, HardwareConfig, SramSizes, TechDoc, TechParams};
use crate::netmodel::{build_vgg16, json_error, parse_network, NetworkModel};
use crate::report::{
    render, CompareDoc, ConstraintsDoc, EvaluateDoc, ExploreDoc, InputsDoc, OutputFormat,
    RecordsMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_CANDIDATE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dla-eval",
    version,
    about = "Pre-RTL cost evaluator for CNN accelerators with fused-layer support"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cost report for one configuration and grouping.
    Evaluate(RunArgs),
    /// Fused grouping against the layer-by-layer baseline.
    Compare(RunArgs),
    /// Search configurations and groupings for the minimum-energy candidate.
    Explore(RunArgs),
    /// Write the built-in VGG-16 network file.
    EmitModel {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RecordsArg {
    Full,
    Failures,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchArg {
    Blockwise,
    Vectorwise,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Network file path or `builtin:vgg16`.
    #[arg(long)]
    model: String,
    /// `pool`, `layer`, `explicit:<b0,b1,...>` (group start indices), or `all` (explore only).
    #[arg(long, default_value = "pool")]
    grouping: String,
    #[arg(long, value_enum, default_value = "blockwise")]
    arch: ArchArg,
    /// Parallelism factors F1,F2,F3,F4.
    #[arg(long)]
    f: Option<String>,
    /// JSON file with `configs` and an optional `tech` section.
    #[arg(long)]
    config_set: Option<PathBuf>,
    /// Factor values for the default explore grid.
    #[arg(long, default_value = "2,4,8,16")]
    f_values: String,
    /// Restrict the default grid to F1 = F2 = F3 = F4.
    #[arg(long)]
    uniform: bool,
    /// Bytes; accepts K/M/G suffixes (decimal).
    #[arg(long)]
    max_bw: Option<String>,
    /// Cycles; accepts K/M/G suffixes (decimal).
    #[arg(long)]
    max_latency: Option<String>,
    /// nJ by default; accepts nJ/uJ/mJ/J suffixes.
    #[arg(long)]
    max_energy: Option<String>,
    /// um² by default; accepts um2/mm2 suffixes.
    #[arg(long)]
    max_area: Option<String>,
    /// JSON file of technology overrides.
    #[arg(long)]
    tech: Option<PathBuf>,
    #[arg(long)]
    e_dram: Option<f64>,
    #[arg(long)]
    e_sram: Option<f64>,
    #[arg(long)]
    e_pe: Option<f64>,
    #[arg(long)]
    t_pl: Option<u64>,
    #[arg(long)]
    dram_bytes_per_cycle: Option<u64>,
    /// Fixed SRAM capacities in bytes: ifm,wb,ofm.
    #[arg(long)]
    sram_caps: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    records: RecordsArg,
    #[arg(long, default_value_t = DEFAULT_GROUPING_CAP)]
    grouping_cap: u64,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] Error),
}

type CliResult<T> = std::result::Result<T, CliError>;

fn input<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Input(msg.into()))
}

/// Runs the CLI with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                EXIT_INPUT_ERROR
            } else {
                let _ = write!(stdout, "{e}");
                EXIT_OK
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Explore(a) => cmd_explore(&a),
        Command::EmitModel { out } => Ok(Output {
            text: build_vgg16().to_document(),
            out,
            code: EXIT_OK,
        }),
    };
    match outcome {
        Ok(o) => match o.out {
            Some(path) => match fs::write(&path, &o.text) {
                Ok(()) => o.code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                    EXIT_INPUT_ERROR
                }
            },
            None => {
                let _ = stdout.write_all(o.text.as_bytes());
                o.code
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

struct Output {
    text: String,
    out: Option<PathBuf>,
    code: i32,
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).or_else(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn load_model(source: &str) -> CliResult<NetworkModel> {
    match source.strip_prefix("builtin:") {
        Some("vgg16") => Ok(build_vgg16()),
        Some(other) => input(format!("unknown builtin model `{other}`")),
        None => {
            let text = read_file(Path::new(source))?;
            Ok(parse_network(&text)?.resolve()?)
        }
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<u64>> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .or_else(|_| {
            input(format!(
                "{what}: expected comma-separated non-negative integers, got `{s}`"
            ))
        })
}

enum GroupingSel {
    Fixed(FusionGrouping),
    Mode(GroupingMode),
}

fn grouping_selector(s: &str, model: &NetworkModel, allow_all: bool) -> CliResult<GroupingSel> {
    let g = match s {
        "pool" => return Ok(GroupingSel::Mode(GroupingMode::PoolDelimitedOnly)),
        "all" if allow_all => return Ok(GroupingSel::Mode(GroupingMode::AllContiguous)),
        "layer" => layer_by_layer(model),
        _ => match s.strip_prefix("explicit:") {
            Some("") => FusionGrouping::from_starts(&[], model.len())?,
            Some(list) => {
                let starts: Vec<usize> = parse_list(list, "--grouping")?
                    .into_iter()
                    .map(|v| v as usize)
                    .collect();
                FusionGrouping::from_starts(&starts, model.len())?
            }
            None => return input(format!("--grouping: unknown selector `{s}`")),
        },
    };
    g.validate_for(model)?;
    Ok(GroupingSel::Fixed(g))
}

fn single_grouping(s: &str, model: &NetworkModel) -> CliResult<FusionGrouping> {
    match grouping_selector(s, model, false)? {
        GroupingSel::Fixed(g) => Ok(g),
        GroupingSel::Mode(_) => Ok(pool_delimited(model)),
    }
}

fn arch_of(a: ArchArg) -> Arch {
    match a {
        ArchArg::Blockwise => Arch::Blockwise,
        ArchArg::Vectorwise => Arch::Vectorwise,
    }
}

fn single_config(a: &RunArgs) -> CliResult<HardwareConfig> {
    let Some(f) = &a.f else {
        return input("--f F1,F2,F3,F4 is required");
    };
    let v = parse_list(f, "--f")?;
    let [f1, f2, f3, f4] = v[..] else {
        return input(format!("--f: expected 4 factors, got {}", v.len()));
    };
    Ok(HardwareConfig::new(arch_of(a.arch), f1, f2, f3, f4)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSetDoc {
    configs: Vec<HardwareConfig>,
    #[serde(default)]
    tech: Option<TechDoc>,
}

fn load_config_set(path: &Path) -> CliResult<ConfigSetDoc> {
    let text = read_file(path)?;
    Ok(serde_json::from_str(&text).map_err(json_error)?)
}

/// Parses a decimal quantity with an optional unit suffix into an exact
/// integer count of `resolution`-sized steps.
fn parse_quantity(
    s: &str,
    units: &[(&str, u32)],
    resolution_exp: u32,
    flag: &str,
) -> CliResult<u64> {
    let bad = || CliError::Input(format!("{flag}: cannot parse `{s}`"));
    let t = s.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(t.len());
    let (num, unit) = (t[..split].trim(), t[split..].trim());
    let unit_exp = units
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, e)| *e)
        .ok_or_else(bad)?;
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (num, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits: u128 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let shift = exp + unit_exp as i32 + resolution_exp as i32 - frac.len() as i32;
    let value = if shift >= 0 {
        10u128
            .checked_pow(shift as u32)
            .and_then(|p| digits.checked_mul(p))
    } else {
        let p = 10u128.checked_pow((-shift) as u32);
        p.filter(|p| digits.is_multiple_of(*p)).map(|p| digits / p)
    };
    value.and_then(|v| u64::try_from(v).ok()).ok_or_else(|| {
        CliError::Input(format!(
            "{flag}: `{s}` is out of range or finer than the supported resolution"
        ))
    })
}

const COUNT_UNITS: [(&str, u32); 4] = [("", 0), ("K", 3), ("M", 6), ("G", 9)];
// exponents relative to 1 nJ
const ENERGY_UNITS: [(&str, u32); 5] = [("", 0), ("nJ", 0), ("uJ", 3), ("mJ", 6), ("J", 9)];
const AREA_UNITS: [(&str, u32); 3] = [("", 0), ("um2", 0), ("mm2", 6)];

fn constraints(a: &RunArgs) -> CliResult<Constraints> {
    let opt = |v: &Option<String>, units: &[(&str, u32)], res: u32, flag: &str| {
        v.as_deref()
            .map(|s| parse_quantity(s, units, res, flag))
            .transpose()
    };
    Ok(Constraints {
        max_bandwidth_bytes: opt(&a.max_bw, &COUNT_UNITS, 0, "--max-bw")?,
        max_latency_cycles: opt(&a.max_latency, &COUNT_UNITS, 0, "--max-latency")?,
        max_energy: opt(&a.max_energy, &ENERGY_UNITS, 2, "--max-energy")?.map(Centi),
        max_area: opt(&a.max_area, &AREA_UNITS, 2, "--max-area")?.map(Centi),
    })
}

/// Defaults, then the config-set `tech` section, then `--tech`, then flags.
fn tech_params(a: &RunArgs, set_tech: Option<&TechDoc>) -> CliResult<TechParams> {
    let mut t = TechParams::default();
    if let Some(doc) = set_tech {
        t = t.apply(doc)?;
    }
    if let Some(path) = &a.tech {
        let doc: TechDoc = serde_json::from_str(&read_file(path)?).map_err(json_error)?;
        t = t.apply(&doc)?;
    }
    let flags = TechDoc {
        e_dram_nj: a.e_dram,
        e_sram_nj: a.e_sram,
        e_pe_nj: a.e_pe,
        t_pl: a.t_pl,
        dram_bytes_per_cycle: a.dram_bytes_per_cycle,
        ..TechDoc::default()
    };
    Ok(t.apply(&flags)?)
}

fn sram_caps(a: &RunArgs) -> CliResult<Option<SramSizes>> {
    let Some(s) = &a.sram_caps else {
        return Ok(None);
    };
    let v = parse_list(s, "--sram-caps")?;
    let [ifm_bytes, wb_bytes, ofm_bytes] = v[..] else {
        return input("--sram-caps: expected ifm,wb,ofm");
    };
    Ok(Some(SramSizes {
        ifm_bytes,
        wb_bytes,
        ofm_bytes,
    }))
}

fn format_of(a: &RunArgs) -> OutputFormat {
    match a.format {
        FormatArg::Json => OutputFormat::Json,
        FormatArg::Csv => OutputFormat::Csv,
    }
}

fn records_of(a: &RunArgs) -> RecordsMode {
    match a.records {
        RecordsArg::Full => RecordsMode::Full,
        RecordsArg::Failures => RecordsMode::Failures,
        RecordsArg::None => RecordsMode::None,
    }
}

fn inputs_doc(
    command: &str,
    a: &RunArgs,
    model: &NetworkModel,
    config: Option<HardwareConfig>,
    constraints: &Constraints,
    tech: &TechParams,
    caps: Option<SramSizes>,
) -> InputsDoc {
    InputsDoc {
        command: command.to_string(),
        model: a.model.clone(),
        model_name: model.name.clone(),
        layers: model.len(),
        bytes_per_element: model.bytes_per_element,
        grouping: a.grouping.clone(),
        config,
        config_set: a.config_set.as_ref().map(|p| p.display().to_string()),
        constraints: ConstraintsDoc::from(constraints),
        tech: tech.to_doc(),
        sram_caps: caps,
        records: (command == "explore").then(|| records_of(a)),
    }
}

fn cmd_evaluate(a: &RunArgs) -> CliResult<Output> {
    let model = load_model(&a.model)?;
    let grouping = single_grouping(&a.grouping, &model)?;
    let config = single_config(a)?;
    let tech = tech_params(a, None)?;
    let caps = sram_caps(a)?;
    let cons = constraints(a)?;
    let report = evaluate(&model, &grouping, &config, &tech, caps.as_ref())?;
    let inputs = inputs_doc("evaluate", a, &model, Some(config), &cons, &tech, caps);
    let doc = EvaluateDoc::new(inputs, &config, &grouping, &report);
    Ok(Output {
        text: render(&doc, format_of(a)),
        out: a.out.clone(),
        code: EXIT_OK,
    })
}

fn cmd_compare(a: &RunArgs) -> CliResult<Output> {
    let model = load_model(&a.model)?;
    let grouping = single_grouping(&a.grouping, &model)?;
    let config = single_config(a)?;
    let tech = tech_params(a, None)?;
    let caps = sram_caps(a)?;
    let cons = constraints(a)?;
    let baseline_grouping = layer_by_layer(&model);
    let fused = evaluate(&model, &grouping, &config, &tech, caps.as_ref())?;
    let baseline = evaluate(&model, &baseline_grouping, &config, &tech, caps.as_ref())?;
    let inputs = inputs_doc("compare", a, &model, Some(config), &cons, &tech, caps);
    let doc = CompareDoc::new(
        inputs,
        &model,
        &config,
        &grouping,
        &fused,
        &baseline_grouping,
        &baseline,
    );
    Ok(Output {
        text: render(&doc, format_of(a)),
        out: a.out.clone(),
        code: EXIT_OK,
    })
}

fn cmd_explore(a: &RunArgs) -> CliResult<Output> {
    let model = load_model(&a.model)?;
    let selector = grouping_selector(&a.grouping, &model, true)?;
    let (configs, set_tech) = match &a.config_set {
        Some(path) => {
            let set = load_config_set(path)?;
            (set.configs, set.tech)
        }
        None => {
            let values = parse_list(&a.f_values, "--f-values")?;
            (config_grid(arch_of(a.arch), &values, a.uniform)?, None)
        }
    };
    let tech = tech_params(a, set_tech.as_ref())?;
    let caps = sram_caps(a)?;
    let cons = constraints(a)?;
    let options = ExploreOptions {
        sram_caps: caps,
        grouping_cap: a.grouping_cap,
    };
    let result = match selector {
        GroupingSel::Mode(mode) => explore(&model, &configs, mode, &cons, &tech, &options)?,
        GroupingSel::Fixed(g) => {
            explore_groupings(&model, &configs, vec![g], &cons, &tech, &options)?
        }
    };
    let inputs = inputs_doc("explore", a, &model, None, &cons, &tech, caps);
    let doc = ExploreDoc::new(inputs, &result, records_of(a));
    Ok(Output {
        text: render(&doc, format_of(a)),
        out: a.out.clone(),
        code: if result.best.is_some() {
            EXIT_OK
        } else {
            EXIT_NO_CANDIDATE
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str, units: &[(&str, u32)], res: u32) -> Option<u64> {
        parse_quantity(s, units, res, "--x").ok()
    }

    #[test]
    fn quantities() {
        assert_eq!(q("20e6", &COUNT_UNITS, 0), Some(20_000_000));
        assert_eq!(q("20M", &COUNT_UNITS, 0), Some(20_000_000));
        assert_eq!(q("12000000", &COUNT_UNITS, 0), Some(12_000_000));
        assert_eq!(q("1.5K", &COUNT_UNITS, 0), Some(1_500));
        assert_eq!(q("1.5", &COUNT_UNITS, 0), None);
        assert_eq!(q("65mJ", &ENERGY_UNITS, 2), Some(6_500_000_000));
        assert_eq!(q("0.01", &ENERGY_UNITS, 2), Some(1));
        assert_eq!(q("0.001", &ENERGY_UNITS, 2), None);
        assert_eq!(q("45e6", &AREA_UNITS, 2), Some(4_500_000_000));
        assert_eq!(q("45mm2", &AREA_UNITS, 2), Some(4_500_000_000));
        assert_eq!(q("abc", &COUNT_UNITS, 0), None);
        assert_eq!(q("-5", &COUNT_UNITS, 0), None);
        assert_eq!(q("5 parsecs", &COUNT_UNITS, 0), None);
        assert_eq!(q("", &COUNT_UNITS, 0), None);
        assert_eq!(q("1e40", &COUNT_UNITS, 0), None);
    }
}
