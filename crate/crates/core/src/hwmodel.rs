//! Accelerator geometry, technology constants, SRAM sizing and area.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Centi;
use crate::netmodel::NetworkModel;

/// PE-block organisation.
///
/// `Blockwise` blocks are `F2 × F3` PEs, each with nine multipliers and an
/// adder tree consuming a 3×3 kernel patch. `Vectorwise` blocks are `F2 × 3`
/// single-multiplier PEs driven by a 1-D broadcast dataflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Blockwise,
    Vectorwise,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Blockwise => "blockwise",
            Arch::Vectorwise => "vectorwise",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blockwise" | "blockwise3x3" => Ok(Arch::Blockwise),
            "vectorwise" => Ok(Arch::Vectorwise),
            other => Err(Error::InvalidConfig(format!(
                "unknown architecture `{other}`"
            ))),
        }
    }
}

/// Architecture plus parallelism factors.
///
/// `f1` output channels, `f2` PE rows per block, `f3` PE columns per block,
/// `f4` input channels. `f3` is always 3 for vectorwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HardwareConfig {
    pub arch: Arch,
    pub f1: u64,
    pub f2: u64,
    pub f3: u64,
    pub f4: u64,
}

impl HardwareConfig {
    /// Validates factors; a vectorwise `f3` is replaced by 3.
    pub fn new(arch: Arch, f1: u64, f2: u64, f3: u64, f4: u64) -> Result<Self> {
        let f3 = match arch {
            Arch::Blockwise => f3,
            Arch::Vectorwise => 3,
        };
        if [f1, f2, f3, f4].contains(&0) {
            return Err(Error::InvalidConfig(
                "parallelism factors must be >= 1".into(),
            ));
        }
        Ok(HardwareConfig {
            arch,
            f1,
            f2,
            f3,
            f4,
        })
    }

    pub fn blockwise(f1: u64, f2: u64, f3: u64, f4: u64) -> Self {
        Self::new(Arch::Blockwise, f1, f2, f3, f4).expect("positive factors")
    }

    pub fn vectorwise(f1: u64, f2: u64, f4: u64) -> Self {
        Self::new(Arch::Vectorwise, f1, f2, 3, f4).expect("positive factors")
    }

    pub fn factors(&self) -> [u64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

impl fmt::Display for HardwareConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({},{},{},{})",
            self.arch, self.f1, self.f2, self.f3, self.f4
        )
    }
}

impl Serialize for HardwareConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigDoc {
            arch: self.arch,
            f: self.factors(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HardwareConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ConfigDoc::deserialize(d)?;
        let [f1, f2, f3, f4] = doc.f;
        HardwareConfig::new(doc.arch, f1, f2, f3, f4).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    arch: Arch,
    f: [u64; 4],
}

/// Calibration constants. Energies in 0.01 nJ units, areas in 0.01 um² units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TechParams {
    /// Per DRAM element access.
    pub e_dram: Centi,
    /// Per SRAM element access.
    pub e_sram: Centi,
    /// Per PE-array active cycle.
    pub e_pe: Centi,
    pub a_pe_blockwise: Centi,
    pub a_pe_vectorwise: Centi,
    pub a_sram_per_byte: Centi,
    pub dram_bytes_per_cycle: u64,
    /// Pipeline latency charged once per layer, in cycles.
    pub t_pl: u64,
}

impl Default for TechParams {
    fn default() -> Self {
        TechParams {
            e_dram: Centi(100),
            e_sram: Centi(10),
            e_pe: Centi(1),
            a_pe_blockwise: Centi::from_units(5_000),
            a_pe_vectorwise: Centi::from_units(600),
            a_sram_per_byte: Centi::from_units(4),
            dram_bytes_per_cycle: 4,
            t_pl: 100,
        }
    }
}

impl TechParams {
    pub fn a_pe(&self, arch: Arch) -> Centi {
        match arch {
            Arch::Blockwise => self.a_pe_blockwise,
            Arch::Vectorwise => self.a_pe_vectorwise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dram_bytes_per_cycle == 0 {
            return Err(Error::InvalidTech(
                "dram_bytes_per_cycle must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Applies the fields present in `doc` on top of `self`.
    pub fn apply(&self, doc: &TechDoc) -> Result<TechParams> {
        let centi = |name: &str, v: Option<f64>, cur: Centi| -> Result<Centi> {
            match v {
                None => Ok(cur),
                Some(x) => Centi::from_f64(x).ok_or_else(|| {
                    Error::InvalidTech(format!(
                        "{name} = {x} must be a non-negative multiple of 0.01"
                    ))
                }),
            }
        };
        let t = TechParams {
            e_dram: centi("e_dram_nj", doc.e_dram_nj, self.e_dram)?,
            e_sram: centi("e_sram_nj", doc.e_sram_nj, self.e_sram)?,
            e_pe: centi("e_pe_nj", doc.e_pe_nj, self.e_pe)?,
            a_pe_blockwise: centi(
                "a_pe_blockwise_um2",
                doc.a_pe_blockwise_um2,
                self.a_pe_blockwise,
            )?,
            a_pe_vectorwise: centi(
                "a_pe_vectorwise_um2",
                doc.a_pe_vectorwise_um2,
                self.a_pe_vectorwise,
            )?,
            a_sram_per_byte: centi(
                "a_sram_per_byte_um2",
                doc.a_sram_per_byte_um2,
                self.a_sram_per_byte,
            )?,
            dram_bytes_per_cycle: doc
                .dram_bytes_per_cycle
                .unwrap_or(self.dram_bytes_per_cycle),
            t_pl: doc.t_pl.unwrap_or(self.t_pl),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_doc(&self) -> TechDoc {
        TechDoc {
            e_dram_nj: Some(self.e_dram.as_f64()),
            e_sram_nj: Some(self.e_sram.as_f64()),
            e_pe_nj: Some(self.e_pe.as_f64()),
            a_pe_blockwise_um2: Some(self.a_pe_blockwise.as_f64()),
            a_pe_vectorwise_um2: Some(self.a_pe_vectorwise.as_f64()),
            a_sram_per_byte_um2: Some(self.a_sram_per_byte.as_f64()),
            dram_bytes_per_cycle: Some(self.dram_bytes_per_cycle),
            t_pl: Some(self.t_pl),
        }
    }
}

/// Technology overrides as they appear in files, in natural units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_dram_nj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_sram_nj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_pe_nj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_pe_blockwise_um2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_pe_vectorwise_um2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sram_per_byte_um2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dram_bytes_per_cycle: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_pl: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SramSizes {
    pub ifm_bytes: u64,
    pub wb_bytes: u64,
    pub ofm_bytes: u64,
}

/// Area terms in 0.01 um² units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AreaBreakdown {
    pub a_pb: Centi,
    pub a_ifm: Centi,
    pub a_wb: Centi,
    pub a_ofm: Centi,
    pub total: Centi,
}

pub fn pe_count(config: &HardwareConfig) -> u64 {
    let cols = match config.arch {
        Arch::Blockwise => config.f3,
        Arch::Vectorwise => 3,
    };
    config.f1 * config.f4 * config.f2 * cols
}

/// Buffer sizes that hold the largest input frame, weight tensor and output
/// frame of any layer. These cover the residency needs of every grouping.
pub fn required_sram(model: &NetworkModel) -> SramSizes {
    let bpe = model.bytes_per_element;
    let max_of = |f: fn(&crate::netmodel::ConvLayer) -> u64| {
        model.layers.iter().map(f).max().unwrap_or(0) * bpe
    };
    SramSizes {
        ifm_bytes: max_of(|l| l.input_elems()),
        wb_bytes: max_of(|l| l.weight_elems()),
        ofm_bytes: max_of(|l| l.output_elems()),
    }
}

pub fn area(config: &HardwareConfig, sram: &SramSizes, tech: &TechParams) -> AreaBreakdown {
    let a_pb = pe_count(config) * tech.a_pe(config.arch);
    let a_ifm = sram.ifm_bytes * tech.a_sram_per_byte;
    let a_wb = sram.wb_bytes * tech.a_sram_per_byte;
    let a_ofm = sram.ofm_bytes * tech.a_sram_per_byte;
    AreaBreakdown {
        a_pb,
        a_ifm,
        a_wb,
        a_ofm,
        total: a_pb + a_ifm + a_wb + a_ofm,
    }
}
