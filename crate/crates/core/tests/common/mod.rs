//! Test-only oracle and random workload generator.
//!
//! The replay counter recomputes shapes by sliding windows and counts every
//! modeled transaction one at a time; it shares no code with the closed-form
//! cost model.

#![allow(dead_code)]

use std::ops::Range;

use dla_eval::hwmodel::{Arch, HardwareConfig};
use dla_eval::netmodel::{LayerKind, NetworkModel, RawNetwork};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Replay {
    pub dram: u64,
    pub sram: u64,
    pub pe: u64,
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    kind: LayerKind,
    c_in: u64,
    c_out: u64,
    h_in: u64,
    w_in: u64,
    kh: u64,
    kw: u64,
    h_out: u64,
    w_out: u64,
}

/// Number of window placements along one axis.
fn placements(input: u64, pad: u64, kernel: u64, stride: u64) -> u64 {
    let mut count = 0;
    let mut start = 0;
    while start + kernel <= input + 2 * pad {
        count += 1;
        start += stride;
    }
    count
}

fn shapes(raw: &RawNetwork) -> Vec<Shape> {
    let (mut c, mut h, mut w) = (raw.input.channels, raw.input.height, raw.input.width);
    raw.layers
        .iter()
        .map(|l| {
            let h_out = placements(h, l.padding[0], l.kernel[0], l.stride[0]);
            let w_out = placements(w, l.padding[1], l.kernel[1], l.stride[1]);
            let c_out = l.out_channels.unwrap_or(c);
            let s = Shape {
                kind: l.kind,
                c_in: c,
                c_out,
                h_in: h,
                w_in: w,
                kh: l.kernel[0],
                kw: l.kernel[1],
                h_out,
                w_out,
            };
            (c, h, w) = (c_out, h_out, w_out);
            s
        })
        .collect()
}

fn touch_frame(c: u64, h: u64, w: u64, counter: &mut u64) {
    for _ in 0..c {
        for _ in 0..h {
            for _ in 0..w {
                *counter += 1;
            }
        }
    }
}

fn touch_weights(s: &Shape, counter: &mut u64) {
    if s.kind == LayerKind::Pool {
        return;
    }
    for _ in 0..s.c_out {
        for _ in 0..s.c_in {
            for _ in 0..s.kh {
                for _ in 0..s.kw {
                    *counter += 1;
                }
            }
        }
    }
}

fn steps(n: u64, step: u64) -> impl Iterator<Item = u64> {
    (0..n).step_by(step as usize)
}

fn pe_tiles(s: &Shape, cfg: &HardwareConfig) -> u64 {
    let mut tiles = 0;
    match (s.kind, cfg.arch) {
        (LayerKind::Pool, _) => {
            tiles += steps(s.c_out * s.h_out * s.w_out, cfg.f1 * cfg.f2).count() as u64;
        }
        (LayerKind::Conv, Arch::Blockwise) => {
            for _ in steps(s.c_out, cfg.f1) {
                for _ in steps(s.c_in, cfg.f4) {
                    for _ in steps(s.h_out, cfg.f2) {
                        for _ in steps(s.w_out, cfg.f3) {
                            for _ in steps(s.kh, 3) {
                                for _ in steps(s.kw, 3) {
                                    tiles += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        (LayerKind::Conv, Arch::Vectorwise) => {
            for _ in steps(s.c_out, cfg.f1) {
                for _ in steps(s.c_in, cfg.f4) {
                    for _ in steps(s.h_out, cfg.f2) {
                        for _ in 0..s.w_out {
                            for _ in 0..s.kh {
                                for _ in steps(s.kw, 3) {
                                    tiles += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    tiles
}

/// Replays every DRAM, SRAM and PE transaction for the grouping.
pub fn replay(raw: &RawNetwork, groups: &[Range<usize>], cfg: &HardwareConfig) -> Replay {
    let shapes = shapes(raw);
    let mut r = Replay::default();
    for g in groups {
        let first = &shapes[g.start];
        touch_frame(first.c_in, first.h_in, first.w_in, &mut r.dram);
        for s in &shapes[g.clone()] {
            touch_weights(s, &mut r.dram);
        }
        let last = &shapes[g.end - 1];
        touch_frame(last.c_out, last.h_out, last.w_out, &mut r.dram);
    }
    for s in &shapes {
        touch_frame(s.c_in, s.h_in, s.w_in, &mut r.sram);
        touch_weights(s, &mut r.sram);
        touch_frame(s.c_out, s.h_out, s.w_out, &mut r.sram);
        r.pe += pe_tiles(s, cfg);
    }
    r
}

/// Eq.-style latency recomputed from replayed byte counts.
pub fn replay_latency(
    raw: &RawNetwork,
    groups: &[Range<usize>],
    cfg: &HardwareConfig,
    bus: u64,
    t_pl: u64,
) -> u64 {
    let shapes = shapes(raw);
    let bpe = raw.bytes_per_element;
    let cycles = |bytes: u64| bytes.div_ceil(bus);
    let mut total = 0;
    for g in groups {
        for s in &shapes[g.clone()] {
            let mut w = 0;
            touch_weights(s, &mut w);
            total += cycles(w * bpe) + pe_tiles(s, cfg) + t_pl;
        }
        let (first, last) = (&shapes[g.start], &shapes[g.end - 1]);
        total += cycles(first.c_in * first.h_in * first.w_in * bpe);
        total += cycles(last.c_out * last.h_out * last.w_out * bpe);
    }
    total
}

/// A random valid model: at most `max_layers` layers, channels and spatial
/// dims at most 32.
pub fn random_model<R: Rng>(rng: &mut R, max_layers: usize) -> NetworkModel {
    let (c, h, w) = (
        rng.gen_range(1..=32),
        rng.gen_range(1..=32),
        rng.gen_range(1..=32),
    );
    let mut raw = RawNetwork::new("random", c, h, w).with_bytes_per_element(rng.gen_range(1..=2));
    let (mut cur_h, mut cur_w) = (h, w);
    for i in 0..rng.gen_range(1..=max_layers) {
        if rng.gen_bool(0.3) {
            let kh = rng.gen_range(1..=3u64).min(cur_h);
            let kw = rng.gen_range(1..=3u64).min(cur_w);
            let s = rng.gen_range(1..=3);
            raw = raw.pool_named(format!("p{i}"), [kh, kw], [s, s]);
        } else {
            let pad = rng.gen_range(0..=2u64);
            let kh = rng.gen_range(1..=5u64).min(cur_h + 2 * pad);
            let kw = rng.gen_range(1..=5u64).min(cur_w + 2 * pad);
            let s = [rng.gen_range(1..=2), rng.gen_range(1..=2)];
            raw = raw.conv_named(
                format!("c{i}"),
                rng.gen_range(1..=32),
                [kh, kw],
                s,
                [pad, pad],
            );
        }
        let m = raw.resolve().expect("generator keeps shapes valid");
        let last = m.layers.last().unwrap();
        (cur_h, cur_w) = (last.out_h, last.out_w);
    }
    raw.resolve().unwrap()
}

pub fn random_config<R: Rng>(rng: &mut R) -> HardwareConfig {
    let arch = if rng.gen_bool(0.5) {
        Arch::Blockwise
    } else {
        Arch::Vectorwise
    };
    let mut f = || rng.gen_range(1..=8);
    HardwareConfig::new(arch, f(), f(), f(), f()).unwrap()
}

/// A random partition of `0..n` into contiguous groups (pool rule ignored).
pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for gap in 1..n {
        if rng.gen_bool(0.5) {
            groups.push(start..gap);
            start = gap;
        }
    }
    groups.push(start..n);
    groups
}
