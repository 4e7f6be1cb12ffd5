//! Report documents for the CLI. Keys are emitted in declaration order and
//! every quantity is an integer or a fixed-precision string, so identical
//! inputs always produce identical bytes.

use serde::Serialize;
use serde_json::Value;

use crate::costmodel::{CostReport, CostTotals, EnergyBreakdown};
use crate::explorer::{CandidateRecord, ConstraintFlags, Constraints, DseResult};
use crate::fixed::{format_scaled, format_tenths, percent_tenths, Centi};
use crate::fusion::{Feasibility, FusionGrouping};
use crate::hwmodel::{AreaBreakdown, HardwareConfig, SramSizes, TechDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordsMode {
    #[default]
    Full,
    Failures,
    None,
}

/// Echo of the run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct InputsDoc {
    pub command: String,
    pub model: String,
    pub model_name: String,
    pub layers: usize,
    pub bytes_per_element: u64,
    pub grouping: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<HardwareConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_set: Option<String>,
    pub constraints: ConstraintsDoc,
    pub tech: TechDoc,
    pub sram_caps: Option<SramSizes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<RecordsMode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintsDoc {
    pub max_bandwidth_bytes: Option<u64>,
    pub max_latency_cycles: Option<u64>,
    pub max_energy_nj_x100: Option<u64>,
    pub max_area_um2_x100: Option<u64>,
}

impl From<&Constraints> for ConstraintsDoc {
    fn from(c: &Constraints) -> Self {
        ConstraintsDoc {
            max_bandwidth_bytes: c.max_bandwidth_bytes,
            max_latency_cycles: c.max_latency_cycles,
            max_energy_nj_x100: c.max_energy.map(Centi::hundredths),
            max_area_um2_x100: c.max_area.map(Centi::hundredths),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyDoc {
    pub e_dram_nj_x100: u64,
    pub e_sram_nj_x100: u64,
    pub e_pe_nj_x100: u64,
    pub total_nj_x100: u64,
    pub total_nj: String,
    pub total_mj: String,
}

impl From<&EnergyBreakdown> for EnergyDoc {
    fn from(e: &EnergyBreakdown) -> Self {
        EnergyDoc {
            e_dram_nj_x100: e.e_dram.hundredths(),
            e_sram_nj_x100: e.e_sram.hundredths(),
            e_pe_nj_x100: e.e_pe.hundredths(),
            total_nj_x100: e.total.hundredths(),
            total_nj: e.total.to_string(),
            total_mj: mj(e.total),
        }
    }
}

fn mj(e: Centi) -> String {
    format_scaled(e.hundredths(), 6, 6)
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaDoc {
    pub a_pb_um2_x100: u64,
    pub a_ifm_um2_x100: u64,
    pub a_wb_um2_x100: u64,
    pub a_ofm_um2_x100: u64,
    pub total_um2_x100: u64,
    pub total_um2: String,
}

impl From<&AreaBreakdown> for AreaDoc {
    fn from(a: &AreaBreakdown) -> Self {
        AreaDoc {
            a_pb_um2_x100: a.a_pb.hundredths(),
            a_ifm_um2_x100: a.a_ifm.hundredths(),
            a_wb_um2_x100: a.a_wb.hundredths(),
            a_ofm_um2_x100: a.a_ofm.hundredths(),
            total_um2_x100: a.total.hundredths(),
            total_um2: a.total.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyDoc {
    pub total_cycles: u64,
    pub t_rd_w: u64,
    pub t_pb: u64,
    pub t_pl: u64,
    pub t_rd_if: u64,
    pub t_wr_of: u64,
    pub per_layer: Vec<crate::costmodel::LayerLatency>,
    pub per_group: Vec<crate::costmodel::GroupLatency>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultsDoc {
    pub config: HardwareConfig,
    pub grouping: FusionGrouping,
    pub bandwidth_bytes: u64,
    pub latency: LatencyDoc,
    pub counts: crate::costmodel::AccessCounts,
    pub energy: EnergyDoc,
    pub sram: SramSizes,
    pub area: AreaDoc,
}

impl ResultsDoc {
    pub fn new(config: &HardwareConfig, grouping: &FusionGrouping, r: &CostReport) -> Self {
        let l = &r.latency;
        ResultsDoc {
            config: *config,
            grouping: grouping.clone(),
            bandwidth_bytes: r.bandwidth_bytes,
            latency: LatencyDoc {
                total_cycles: l.total,
                t_rd_w: l.layers.iter().map(|x| x.t_rd_w).sum(),
                t_pb: l.layers.iter().map(|x| x.t_pb).sum(),
                t_pl: l.layers.iter().map(|x| x.t_pl).sum(),
                t_rd_if: l.groups.iter().map(|x| x.t_rd_if).sum(),
                t_wr_of: l.groups.iter().map(|x| x.t_wr_of).sum(),
                per_layer: l.layers.clone(),
                per_group: l.groups.clone(),
            },
            counts: r.counts,
            energy: EnergyDoc::from(&r.energy),
            sram: r.sram,
            area: AreaDoc::from(&r.area),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupDoc {
    pub group: usize,
    pub layers: [usize; 2],
    pub bandwidth_bytes: u64,
    pub latency_cycles: u64,
    pub energy_nj_x100: u64,
}

fn group_docs(r: &CostReport) -> Vec<GroupDoc> {
    r.per_group
        .iter()
        .map(|g| GroupDoc {
            group: g.group,
            layers: g.layers,
            bandwidth_bytes: g.bandwidth_bytes,
            latency_cycles: g.latency_cycles,
            energy_nj_x100: g.energy.total.hundredths(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateDoc {
    pub inputs: InputsDoc,
    pub results: ResultsDoc,
    pub per_group: Vec<GroupDoc>,
}

impl EvaluateDoc {
    pub fn new(
        inputs: InputsDoc,
        config: &HardwareConfig,
        grouping: &FusionGrouping,
        report: &CostReport,
    ) -> Self {
        EvaluateDoc {
            inputs,
            results: ResultsDoc::new(config, grouping, report),
            per_group: group_docs(report),
        }
    }
}

/// `(baseline − fused) / baseline`, kept as its exact integer parts.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionDoc {
    pub percent: String,
    pub percent_x10: i64,
    pub numerator: i64,
    pub denominator: u64,
}

impl ReductionDoc {
    pub fn new(baseline: u64, fused: u64) -> Self {
        let num = baseline as i128 - fused as i128;
        let tenths = if baseline == 0 {
            0
        } else {
            percent_tenths(num, baseline as i128)
        };
        ReductionDoc {
            percent: format_tenths(tenths),
            percent_x10: tenths as i64,
            numerator: num as i64,
            denominator: baseline,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionsDoc {
    pub bandwidth: ReductionDoc,
    pub latency: ReductionDoc,
    pub energy: ReductionDoc,
    pub conventions: Vec<&'static str>,
}

/// Counting conventions the reductions depend on.
pub const COMPARE_CONVENTIONS: [&str; 4] = [
    "baseline runs every layer, pools included, as its own DRAM round trip",
    "pool layers fuse into the group of the preceding conv",
    "each input, weight and output element is counted once at the SRAM boundary",
    "PE energy is charged per PE-array active cycle",
];

#[derive(Debug, Clone, Serialize)]
pub struct CompareTotalsDoc {
    pub grouping: FusionGrouping,
    pub bandwidth_bytes: u64,
    pub latency_cycles: u64,
    pub energy: EnergyDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResultsDoc {
    pub config: HardwareConfig,
    pub area: AreaDoc,
    pub fused: CompareTotalsDoc,
    pub baseline: CompareTotalsDoc,
}

/// One row per fused group: its energy against the same layers run layer by layer.
#[derive(Debug, Clone, Serialize)]
pub struct CompareGroupDoc {
    pub group: usize,
    pub layers: [usize; 2],
    pub first_layer: String,
    pub last_layer: String,
    pub fused_energy_nj_x100: u64,
    pub baseline_energy_nj_x100: u64,
    pub fused_bandwidth_bytes: u64,
    pub baseline_bandwidth_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareDoc {
    pub inputs: InputsDoc,
    pub results: CompareResultsDoc,
    pub reductions: ReductionsDoc,
    pub per_group: Vec<CompareGroupDoc>,
}

impl CompareDoc {
    pub fn new(
        inputs: InputsDoc,
        model: &crate::netmodel::NetworkModel,
        config: &HardwareConfig,
        fused_grouping: &FusionGrouping,
        fused: &CostReport,
        baseline_grouping: &FusionGrouping,
        baseline: &CostReport,
    ) -> Self {
        let totals = |g: &FusionGrouping, r: &CostReport| CompareTotalsDoc {
            grouping: g.clone(),
            bandwidth_bytes: r.bandwidth_bytes,
            latency_cycles: r.latency.total,
            energy: EnergyDoc::from(&r.energy),
        };
        let per_group = fused
            .per_group
            .iter()
            .map(|g| {
                let [start, end] = g.layers;
                let base = baseline
                    .per_group
                    .iter()
                    .filter(|b| b.layers[0] >= start && b.layers[1] <= end);
                let (mut e, mut bw) = (Centi::ZERO, 0);
                for b in base {
                    e += b.energy.total;
                    bw += b.bandwidth_bytes;
                }
                CompareGroupDoc {
                    group: g.group,
                    layers: g.layers,
                    first_layer: model.layers[start].name.clone(),
                    last_layer: model.layers[end - 1].name.clone(),
                    fused_energy_nj_x100: g.energy.total.hundredths(),
                    baseline_energy_nj_x100: e.hundredths(),
                    fused_bandwidth_bytes: g.bandwidth_bytes,
                    baseline_bandwidth_bytes: bw,
                }
            })
            .collect();
        CompareDoc {
            inputs,
            results: CompareResultsDoc {
                config: *config,
                area: AreaDoc::from(&fused.area),
                fused: totals(fused_grouping, fused),
                baseline: totals(baseline_grouping, baseline),
            },
            reductions: ReductionsDoc {
                bandwidth: ReductionDoc::new(baseline.bandwidth_bytes, fused.bandwidth_bytes),
                latency: ReductionDoc::new(baseline.latency.total, fused.latency.total),
                energy: ReductionDoc::new(
                    baseline.energy.total.hundredths(),
                    fused.energy.total.hundredths(),
                ),
                conventions: COMPARE_CONVENTIONS.to_vec(),
            },
            per_group,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TotalsDoc {
    pub bandwidth_bytes: u64,
    pub latency_cycles: u64,
    pub energy_nj_x100: u64,
    pub area_um2_x100: u64,
}

impl From<&CostTotals> for TotalsDoc {
    fn from(t: &CostTotals) -> Self {
        TotalsDoc {
            bandwidth_bytes: t.bandwidth_bytes,
            latency_cycles: t.latency_cycles,
            energy_nj_x100: t.energy.hundredths(),
            area_um2_x100: t.area.hundredths(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordDoc {
    pub index: usize,
    pub config: HardwareConfig,
    pub grouping: FusionGrouping,
    pub totals: TotalsDoc,
    pub constraints: ConstraintFlags,
    pub feasibility: Feasibility,
    pub passed: bool,
}

impl RecordDoc {
    fn new(r: &CandidateRecord, groupings: &[FusionGrouping]) -> Self {
        RecordDoc {
            index: r.index,
            config: r.config,
            grouping: groupings[r.grouping].clone(),
            totals: TotalsDoc::from(&r.totals),
            constraints: r.flags,
            feasibility: r.feasibility,
            passed: r.passed(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreSummaryDoc {
    pub configs: usize,
    pub groupings: usize,
    pub evaluated: usize,
    pub feasible: usize,
    pub passing: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BestDoc {
    pub index: usize,
    pub totals: TotalsDoc,
    pub report: ResultsDoc,
    pub per_group: Vec<GroupDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreDoc {
    pub inputs: InputsDoc,
    pub results: ExploreSummaryDoc,
    pub best: Option<BestDoc>,
    pub records: Vec<RecordDoc>,
}

impl ExploreDoc {
    pub fn new(inputs: InputsDoc, result: &DseResult, mode: RecordsMode) -> Self {
        let best = result.best.as_ref().map(|b| {
            let r = &result.records[b.record];
            BestDoc {
                index: r.index,
                totals: TotalsDoc::from(&r.totals),
                report: ResultsDoc::new(&r.config, &result.groupings[r.grouping], &b.report),
                per_group: group_docs(&b.report),
            }
        });
        let records = result
            .records
            .iter()
            .filter(|r| match mode {
                RecordsMode::Full => true,
                RecordsMode::Failures => !r.passed(),
                RecordsMode::None => false,
            })
            .map(|r| RecordDoc::new(r, &result.groupings))
            .collect();
        ExploreDoc {
            inputs,
            results: ExploreSummaryDoc {
                configs: result.configs.len(),
                groupings: result.groupings.len(),
                evaluated: result.evaluated,
                feasible: result.feasible,
                passing: result.passing,
            },
            best,
            records,
        }
    }
}

/// Renders a document as pretty JSON or as flattened `path,value` CSV rows.
pub fn render<T: Serialize>(doc: &T, format: OutputFormat) -> String {
    let value = serde_json::to_value(doc).expect("report documents serialize");
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("report documents serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => to_csv(&value),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn to_csv(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "value"]).expect("in-memory write");
    for (path, value) in rows {
        w.write_record([path, value]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: u64,
        b: Vec<[u64; 2]>,
        c: Option<String>,
        d: &'static str,
    }

    #[test]
    fn csv_flattens_in_key_order() {
        let s = Sample {
            a: 1,
            b: vec![[0, 3]],
            c: None,
            d: "x,y",
        };
        assert_eq!(
            render(&s, OutputFormat::Csv),
            "path,value\na,1\nb.0.0,0\nb.0.1,3\nc,\nd,\"x,y\"\n"
        );
        assert_eq!(
            render(&s, OutputFormat::Json),
            "{\n  \"a\": 1,\n  \"b\": [\n    [\n      0,\n      3\n    ]\n  ],\n  \"c\": null,\n  \"d\": \"x,y\"\n}\n"
        );
    }

    #[test]
    fn reduction_rounding() {
        let r = ReductionDoc::new(44_991_680, 17_896_640);
        assert_eq!(
            (r.percent.as_str(), r.percent_x10, r.numerator),
            ("60.2", 602, 27_095_040)
        );
        assert_eq!(ReductionDoc::new(10, 10).percent, "0.0");
    }
}
