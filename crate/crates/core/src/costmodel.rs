//! Bandwidth, latency and energy of a (model, grouping, config) triple.
//!
//! Inside a fused group every layer still fetches its own weights from DRAM;
//! only the group's first input frame and last output frame cross DRAM.
//! Latency terms are summed with no overlap between transfers and compute.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed::Centi;
use crate::fusion::FusionGrouping;
use crate::hwmodel::{
    area, required_sram, Arch, AreaBreakdown, HardwareConfig, SramSizes, TechParams,
};
use crate::netmodel::{ConvLayer, LayerKind, NetworkModel};

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// DRAM elements moved by one fused group: every member's weights plus the
/// group's input and output frames.
pub fn group_bandwidth(model: &NetworkModel, group: Range<usize>) -> Result<u64> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let layers = &model.layers[group];
    let weights: u64 = layers.iter().map(ConvLayer::weight_elems).sum();
    let first = layers.first().expect("non-empty group");
    let last = layers.last().expect("non-empty group");
    Ok(weights + first.input_elems() + last.output_elems())
}

fn grouping_elements(model: &NetworkModel, grouping: &FusionGrouping) -> u64 {
    grouping
        .groups()
        .iter()
        .map(|g| group_bandwidth(model, g.clone()).expect("grouping ranges are non-empty"))
        .sum()
}

/// Total DRAM traffic in bytes.
pub fn network_bandwidth(model: &NetworkModel, grouping: &FusionGrouping) -> u64 {
    grouping_elements(model, grouping) * model.bytes_per_element
}

/// PE-array active cycles for one layer (t_PB).
pub fn compute_cycles(layer: &ConvLayer, config: &HardwareConfig) -> u64 {
    let HardwareConfig { f1, f2, f3, f4, .. } = *config;
    let (m, n) = (layer.out_channels, layer.in_channels);
    let (oh, ow) = (layer.out_h, layer.out_w);
    match (layer.kind, config.arch) {
        (LayerKind::Pool, _) => ceil_div(m * oh * ow, f1 * f2),
        (LayerKind::Conv, Arch::Blockwise) => {
            ceil_div(m, f1)
                * ceil_div(n, f4)
                * ceil_div(oh, f2)
                * ceil_div(ow, f3)
                * ceil_div(layer.kernel_h, 3)
                * ceil_div(layer.kernel_w, 3)
        }
        (LayerKind::Conv, Arch::Vectorwise) => {
            ceil_div(m, f1)
                * ceil_div(n, f4)
                * ceil_div(oh, f2)
                * ow
                * layer.kernel_h
                * ceil_div(layer.kernel_w, 3)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerLatency {
    pub layer: usize,
    pub t_rd_w: u64,
    pub t_pb: u64,
    pub t_pl: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupLatency {
    pub group: usize,
    pub t_rd_if: u64,
    pub t_wr_of: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatencyBreakdown {
    pub total: u64,
    pub layers: Vec<LayerLatency>,
    pub groups: Vec<GroupLatency>,
}

impl LatencyBreakdown {
    fn group_total(&self, group: usize, range: Range<usize>) -> u64 {
        let g = &self.groups[group];
        let layers: u64 = self.layers[range]
            .iter()
            .map(|l| l.t_rd_w + l.t_pb + l.t_pl)
            .sum();
        layers + g.t_rd_if + g.t_wr_of
    }
}

pub fn network_latency(
    model: &NetworkModel,
    grouping: &FusionGrouping,
    config: &HardwareConfig,
    tech: &TechParams,
) -> LatencyBreakdown {
    let bpe = model.bytes_per_element;
    let bus = tech.dram_bytes_per_cycle;
    let layers: Vec<LayerLatency> = model
        .layers
        .iter()
        .map(|l| LayerLatency {
            layer: l.id,
            t_rd_w: ceil_div(l.weight_elems() * bpe, bus),
            t_pb: compute_cycles(l, config),
            t_pl: tech.t_pl,
        })
        .collect();
    let groups: Vec<GroupLatency> = grouping
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| GroupLatency {
            group: i,
            t_rd_if: ceil_div(model.layers[g.start].input_elems() * bpe, bus),
            t_wr_of: ceil_div(model.layers[g.end - 1].output_elems() * bpe, bus),
        })
        .collect();
    let total = layers
        .iter()
        .map(|l| l.t_rd_w + l.t_pb + l.t_pl)
        .sum::<u64>()
        + groups.iter().map(|g| g.t_rd_if + g.t_wr_of).sum::<u64>();
    LatencyBreakdown {
        total,
        layers,
        groups,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AccessCounts {
    /// DRAM element accesses.
    pub c_dram: u64,
    /// SRAM element accesses: every layer's input, weight and output elements once.
    pub c_sram: u64,
    /// PE-array active cycles.
    pub c_pe: u64,
}

fn group_counts(
    model: &NetworkModel,
    group: Range<usize>,
    config: &HardwareConfig,
) -> AccessCounts {
    let c_dram = group_bandwidth(model, group.clone()).expect("grouping ranges are non-empty");
    let layers = &model.layers[group];
    AccessCounts {
        c_dram,
        c_sram: layers
            .iter()
            .map(|l| l.input_elems() + l.weight_elems() + l.output_elems())
            .sum(),
        c_pe: layers.iter().map(|l| compute_cycles(l, config)).sum(),
    }
}

pub fn access_counts(
    model: &NetworkModel,
    grouping: &FusionGrouping,
    config: &HardwareConfig,
) -> AccessCounts {
    grouping
        .groups()
        .iter()
        .map(|g| group_counts(model, g.clone(), config))
        .fold(AccessCounts::default(), |a, b| AccessCounts {
            c_dram: a.c_dram + b.c_dram,
            c_sram: a.c_sram + b.c_sram,
            c_pe: a.c_pe + b.c_pe,
        })
}

/// Energy terms in 0.01 nJ units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub e_dram: Centi,
    pub e_sram: Centi,
    pub e_pe: Centi,
    pub total: Centi,
}

pub fn energy(counts: &AccessCounts, tech: &TechParams) -> EnergyBreakdown {
    let e_dram = counts.c_dram * tech.e_dram;
    let e_sram = counts.c_sram * tech.e_sram;
    let e_pe = counts.c_pe * tech.e_pe;
    EnergyBreakdown {
        e_dram,
        e_sram,
        e_pe,
        total: e_dram + e_sram + e_pe,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupRecord {
    pub group: usize,
    pub layers: [usize; 2],
    pub bandwidth_bytes: u64,
    pub latency_cycles: u64,
    pub counts: AccessCounts,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub bandwidth_bytes: u64,
    pub latency: LatencyBreakdown,
    pub counts: AccessCounts,
    pub energy: EnergyBreakdown,
    pub sram: SramSizes,
    pub area: AreaBreakdown,
    pub per_group: Vec<GroupRecord>,
}

/// The four headline metrics of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostTotals {
    pub bandwidth_bytes: u64,
    pub latency_cycles: u64,
    pub energy: Centi,
    pub area: Centi,
}

impl CostReport {
    pub fn totals(&self) -> CostTotals {
        CostTotals {
            bandwidth_bytes: self.bandwidth_bytes,
            latency_cycles: self.latency.total,
            energy: self.energy.total,
            area: self.area.total,
        }
    }
}

/// Headline totals without per-layer or per-group detail; what the explorer
/// computes for every candidate.
pub fn evaluate_totals(
    model: &NetworkModel,
    grouping: &FusionGrouping,
    config: &HardwareConfig,
    tech: &TechParams,
    sram: &SramSizes,
) -> CostTotals {
    let bpe = model.bytes_per_element;
    let bus = tech.dram_bytes_per_cycle;
    let c_dram = grouping_elements(model, grouping);
    let (mut c_sram, mut c_pe, mut layer_cycles) = (0, 0, 0);
    for l in &model.layers {
        let t_pb = compute_cycles(l, config);
        c_sram += l.input_elems() + l.weight_elems() + l.output_elems();
        c_pe += t_pb;
        layer_cycles += ceil_div(l.weight_elems() * bpe, bus) + t_pb + tech.t_pl;
    }
    let io_cycles: u64 = grouping
        .groups()
        .iter()
        .map(|g| {
            ceil_div(model.layers[g.start].input_elems() * bpe, bus)
                + ceil_div(model.layers[g.end - 1].output_elems() * bpe, bus)
        })
        .sum();
    CostTotals {
        bandwidth_bytes: c_dram * bpe,
        latency_cycles: layer_cycles + io_cycles,
        energy: energy(
            &AccessCounts {
                c_dram,
                c_sram,
                c_pe,
            },
            tech,
        )
        .total,
        area: area(config, sram, tech).total,
    }
}

/// Full cost report. SRAM is auto-sized from the model unless `sram` is given.
pub fn evaluate(
    model: &NetworkModel,
    grouping: &FusionGrouping,
    config: &HardwareConfig,
    tech: &TechParams,
    sram: Option<&SramSizes>,
) -> Result<CostReport> {
    grouping.validate_for(model)?;
    tech.validate()?;
    let sram = sram.copied().unwrap_or_else(|| required_sram(model));
    let latency = network_latency(model, grouping, config, tech);
    let per_group: Vec<GroupRecord> = grouping
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let counts = group_counts(model, g.clone(), config);
            GroupRecord {
                group: i,
                layers: [g.start, g.end],
                bandwidth_bytes: counts.c_dram * model.bytes_per_element,
                latency_cycles: latency.group_total(i, g.clone()),
                counts,
                energy: energy(&counts, tech),
            }
        })
        .collect();
    let counts = access_counts(model, grouping, config);
    Ok(CostReport {
        bandwidth_bytes: counts.c_dram * model.bytes_per_element,
        energy: energy(&counts, tech),
        area: area(config, &sram, tech),
        latency,
        counts,
        sram,
        per_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{layer_by_layer, pool_delimited};
    use crate::netmodel::{build_vgg16, RawNetwork};

    fn all_ones() -> NetworkModel {
        RawNetwork::new("one", 1, 1, 1)
            .conv(1, 1, 1, 0)
            .resolve()
            .unwrap()
    }

    #[test]
    fn group_bandwidth_examples() {
        let vgg = build_vgg16();
        assert_eq!(group_bandwidth(&vgg, 0..1).unwrap(), 3_363_520);
        assert_eq!(group_bandwidth(&vgg, 0..3).unwrap(), 991_936);
        assert_eq!(group_bandwidth(&all_ones(), 0..1).unwrap(), 3);
        assert_eq!(group_bandwidth(&vgg, 2..2), Err(Error::EmptyGroup));
    }

    #[test]
    fn vgg_network_bandwidth() {
        let vgg = build_vgg16();
        assert_eq!(network_bandwidth(&vgg, &pool_delimited(&vgg)), 17_896_640);
        assert_eq!(network_bandwidth(&vgg, &layer_by_layer(&vgg)), 44_991_680);
        let wide = vgg.to_raw().with_bytes_per_element(2).resolve().unwrap();
        assert_eq!(
            network_bandwidth(&wide, &pool_delimited(&wide)),
            2 * 17_896_640
        );
    }

    #[test]
    fn compute_cycle_examples() {
        let vgg = build_vgg16();
        let conv1_2 = &vgg.layers[1];
        assert_eq!(
            compute_cycles(conv1_2, &HardwareConfig::blockwise(4, 4, 4, 4)),
            802_816
        );
        assert_eq!(
            compute_cycles(conv1_2, &HardwareConfig::vectorwise(4, 4, 4)),
            9_633_792
        );
        let one = all_ones();
        assert_eq!(
            compute_cycles(&one.layers[0], &HardwareConfig::blockwise(1, 1, 1, 1)),
            1
        );
        // pool1: 64·112·112 outputs over F1·F2 = 16 lanes
        assert_eq!(
            compute_cycles(&vgg.layers[2], &HardwareConfig::blockwise(4, 4, 4, 4)),
            50_176
        );
    }

    #[test]
    fn vgg_latency() {
        let vgg = build_vgg16();
        let cfg = HardwareConfig::blockwise(4, 4, 4, 4);
        let tech = TechParams::default();
        let fused = network_latency(&vgg, &pool_delimited(&vgg), &cfg, &tech);
        assert_eq!(fused.total, 11_429_336);
        let conv_pb: u64 = fused
            .layers
            .iter()
            .zip(&vgg.layers)
            .filter(|(_, l)| !l.is_pool())
            .map(|(t, _)| t.t_pb)
            .sum();
        let pool_pb: u64 = fused
            .layers
            .iter()
            .zip(&vgg.layers)
            .filter(|(_, l)| l.is_pool())
            .map(|(t, _)| t.t_pb)
            .sum();
        let rd_w: u64 = fused.layers.iter().map(|t| t.t_rd_w).sum();
        let io: u64 = fused.groups.iter().map(|g| g.t_rd_if + g.t_wr_of).sum();
        assert_eq!(
            (conv_pb, pool_pb, rd_w, io),
            (6_857_728, 95_648, 3_677_616, 796_544)
        );
        let base = network_latency(&vgg, &layer_by_layer(&vgg), &cfg, &tech);
        assert_eq!(base.total, 18_203_096);
        let base_io: u64 = base.groups.iter().map(|g| g.t_rd_if + g.t_wr_of).sum();
        assert_eq!(base_io, 30_281_216 / 4);
    }

    #[test]
    fn pool_only_latency() {
        let m = RawNetwork::new("p", 4, 8, 8).pool(2, 2).resolve().unwrap();
        let cfg = HardwareConfig::blockwise(2, 2, 2, 2);
        let tech = TechParams::default();
        let lat = network_latency(&m, &layer_by_layer(&m), &cfg, &tech);
        assert_eq!(lat.layers[0].t_rd_w, 0);
        // t_pb = ceil(4·4·4/4) = 16, t_rd_if = 256/4, t_wr_of = 64/4
        assert_eq!(lat.total, 16 + 100 + 64 + 16);
    }

    #[test]
    fn vgg_access_counts() {
        let vgg = build_vgg16();
        let cfg = HardwareConfig::blockwise(4, 4, 4, 4);
        let fused = access_counts(&vgg, &pool_delimited(&vgg), &cfg);
        assert_eq!(
            fused,
            AccessCounts {
                c_dram: 17_896_640,
                c_sram: 44_991_680,
                c_pe: 6_953_376
            }
        );
        let base = access_counts(&vgg, &layer_by_layer(&vgg), &cfg);
        assert_eq!(
            base,
            AccessCounts {
                c_dram: 44_991_680,
                ..fused
            }
        );
        let one = access_counts(
            &all_ones(),
            &layer_by_layer(&all_ones()),
            &HardwareConfig::blockwise(1, 1, 1, 1),
        );
        assert_eq!(
            one,
            AccessCounts {
                c_dram: 3,
                c_sram: 3,
                c_pe: 1
            }
        );
    }

    #[test]
    fn energy_examples() {
        let tech = TechParams::default();
        let e = energy(
            &AccessCounts {
                c_dram: 1_000_000,
                c_sram: 2_000_000,
                c_pe: 3_000_000,
            },
            &tech,
        );
        assert_eq!(e.total, Centi::from_units(1_230_000));
        assert_eq!(energy(&AccessCounts::default(), &tech).total, Centi::ZERO);
        let vgg = access_counts(
            &build_vgg16(),
            &pool_delimited(&build_vgg16()),
            &HardwareConfig::blockwise(4, 4, 4, 4),
        );
        let e = energy(&vgg, &tech);
        assert_eq!(e.total, Centi(2_246_534_176));
        assert_eq!(e.total, e.e_dram + e.e_sram + e.e_pe);
    }

    #[test]
    fn evaluate_vgg_and_decomposition() {
        let vgg = build_vgg16();
        let g = pool_delimited(&vgg);
        let r = evaluate(
            &vgg,
            &g,
            &HardwareConfig::blockwise(4, 4, 4, 4),
            &TechParams::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.bandwidth_bytes, 17_896_640);
        assert_eq!(r.latency.total, 11_429_336);
        assert_eq!(r.energy.total, Centi(2_246_534_176));
        assert_eq!(r.area.total, Centi::from_units(36_407_296));
        assert_eq!(r.per_group.len(), 5);
        assert_eq!(
            r.per_group.iter().map(|g| g.counts.c_dram).sum::<u64>(),
            17_896_640
        );
        assert_eq!(
            r.per_group.iter().map(|g| g.latency_cycles).sum::<u64>(),
            r.latency.total
        );
        assert_eq!(
            r.per_group.iter().map(|g| g.energy.total).sum::<Centi>(),
            r.energy.total
        );
    }

    #[test]
    fn fast_totals_match_report() {
        let vgg = build_vgg16();
        let tech = TechParams::default();
        let sram = required_sram(&vgg);
        for cfg in [
            HardwareConfig::blockwise(4, 4, 4, 4),
            HardwareConfig::vectorwise(2, 8, 4),
        ] {
            for g in [pool_delimited(&vgg), layer_by_layer(&vgg)] {
                let r = evaluate(&vgg, &g, &cfg, &tech, None).unwrap();
                assert_eq!(evaluate_totals(&vgg, &g, &cfg, &tech, &sram), r.totals());
            }
        }
    }

    #[test]
    fn evaluate_single_layer() {
        let m = RawNetwork::new("s", 3, 16, 16)
            .conv(8, 3, 1, 1)
            .resolve()
            .unwrap();
        let r = evaluate(
            &m,
            &layer_by_layer(&m),
            &HardwareConfig::vectorwise(2, 2, 2),
            &TechParams::default(),
            None,
        )
        .unwrap();
        let g = &r.per_group[0];
        assert_eq!(r.per_group.len(), 1);
        assert_eq!(
            (g.bandwidth_bytes, g.latency_cycles, g.energy),
            (r.bandwidth_bytes, r.latency.total, r.energy)
        );
    }

    #[test]
    fn evaluate_rejects_pool_started_group() {
        let vgg = build_vgg16();
        let g = FusionGrouping::from_starts(&[2], 18).unwrap();
        assert!(evaluate(
            &vgg,
            &g,
            &HardwareConfig::blockwise(1, 1, 1, 1),
            &TechParams::default(),
            None
        )
        .is_err());
    }
}
