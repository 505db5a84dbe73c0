//! Reproducible synthetic benchmarks with heterogeneous row heights,
//! locality-driven nets and large multi-pin macros.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PlaceError, Result};
use crate::model::{CellKind, Design, DieSpec, HbtSpec, Instance, Net, PinDef, PinRef, TechProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub cells: usize,
    pub macros: usize,
    /// Target macro area over die area (bottom-die footprints).
    pub macro_ratio: f64,
    pub seed: u64,
    pub row_height: [f64; 2],
    pub max_util: f64,
    /// HBT geometry and cost. Size and spacing shrink on dies too small to
    /// hold one terminal per net.
    pub hbt: HbtSpec,
    /// Target fraction of the combined die capacity filled by instances.
    pub fill: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            cells: 1000,
            macros: 4,
            macro_ratio: 0.3,
            seed: 1,
            row_height: [48.0, 33.0],
            max_util: 0.8,
            hbt: HbtSpec { size: 20.0, spacing: 10.0, cost: 10.0 },
            fill: 0.75,
        }
    }
}

const CELL_WIDTHS: [f64; 8] = [8.0, 10.0, 12.0, 14.0, 16.0, 20.0, 24.0, 30.0];

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

fn even(v: f64) -> f64 {
    (2.0 * (v / 2.0).round()).max(2.0)
}

/// Generates a design from `spec`. Same spec, same design.
pub fn gen_synthetic(spec: &GenSpec) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [rh_bot, rh_top] = spec.row_height;
    let u = spec.max_util;

    // Cell kinds: same widths on both dies, heights follow the rows.
    let mut kinds = [Vec::new(), Vec::new()];
    for (k, &w) in CELL_WIDTHS.iter().enumerate() {
        let npins = 2 + k % 3;
        for (d, rh) in [(0, rh_bot), (1, rh_top)] {
            let pins = (0..npins)
                .map(|p| {
                    let fx = (p as f64 + 0.5) / npins as f64 - 0.5;
                    let fy = if p % 2 == 0 { 0.25 } else { -0.25 };
                    PinDef { name: format!("p{p}"), x: (fx * w).round(), y: (fy * rh).round() }
                })
                .collect();
            kinds[d].push(CellKind { name: format!("C{k}"), width: w, height: rh, pins });
        }
    }
    let kind_of: Vec<usize> = (0..spec.cells).map(|_| rng.gen_range(0..CELL_WIDTHS.len())).collect();
    let cell_area: f64 = kind_of
        .iter()
        .map(|&k| CELL_WIDTHS[k] * (rh_bot + rh_top) / 2.0)
        .sum();

    let budget = 2.0 * u * spec.fill - spec.macro_ratio;
    if spec.macro_ratio < 0.0 || budget <= 0.05 {
        return Err(PlaceError::Infeasible(format!(
            "macro ratio {} leaves no room for cells at utilization {u}",
            spec.macro_ratio
        )));
    }
    if spec.macros > 0 && spec.macro_ratio / spec.macros as f64 > 0.9 * u {
        return Err(PlaceError::Infeasible(format!(
            "{} macros at ratio {} do not fit a die at utilization {u}",
            spec.macros, spec.macro_ratio
        )));
    }
    let area = (cell_area / budget).max(1.0);
    let step = lcm(rh_bot as u64, rh_top as u64) as f64;
    let height = ((area.sqrt() / step).round().max(1.0)) * step;
    let width = even(area / height);
    let die_area = width * height;

    // Macros: equal areas, random aspect, slightly smaller on the top die.
    let mut macro_dims = Vec::new();
    for _ in 0..spec.macros {
        let a = spec.macro_ratio * die_area / spec.macros as f64;
        let aspect: f64 = rng.gen_range(0.7..1.4);
        let w = even((a * aspect).sqrt()).min(even(0.9 * width));
        let h = even(a / w).min(even(0.9 * height));
        macro_dims.push((w, h));
    }
    for (m, &(w, h)) in macro_dims.iter().enumerate() {
        let npins = 24;
        let mut bot = Vec::new();
        let mut top = Vec::new();
        let (wt, ht) = (even(0.9 * w), even(0.9 * h));
        for p in 0..npins {
            let fx: f64 = rng.gen_range(-0.45..0.45);
            let fy: f64 = rng.gen_range(-0.45..0.45);
            bot.push(PinDef { name: format!("m{p}"), x: (fx * w).round(), y: (fy * h).round() });
            top.push(PinDef { name: format!("m{p}"), x: (fx * wt).round(), y: (fy * ht).round() });
        }
        kinds[0].push(CellKind { name: format!("M{m}"), width: w, height: h, pins: bot });
        kinds[1].push(CellKind { name: format!("M{m}"), width: wt, height: ht, pins: top });
    }

    let mut instances: Vec<Instance> = kind_of
        .iter()
        .enumerate()
        .map(|(i, &k)| Instance { name: format!("c{i}"), kind: k, is_macro: false })
        .collect();
    for m in 0..spec.macros {
        instances.push(Instance { name: format!("m{m}"), kind: CELL_WIDTHS.len() + m, is_macro: true });
    }

    // Hidden lattice positions drive net locality.
    let side = (spec.cells as f64).sqrt().ceil().max(1.0) as usize;
    let mut slots: Vec<usize> = (0..side * side).collect();
    slots.shuffle(&mut rng);
    let mut at = vec![usize::MAX; side * side];
    for c in 0..spec.cells {
        at[slots[c]] = c;
    }
    let pos = |c: usize| (slots[c] % side, slots[c] / side);
    let near = |rng: &mut ChaCha8Rng, (a, b): (usize, usize), r: isize| -> Option<usize> {
        for _ in 0..8 {
            let x = a as isize + rng.gen_range(-r..=r);
            let y = b as isize + rng.gen_range(-r..=r);
            if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
                let c = at[y as usize * side + x as usize];
                if c != usize::MAX {
                    return Some(c);
                }
            }
        }
        None
    };
    let cell_pin = |rng: &mut ChaCha8Rng, c: usize| PinRef { inst: c, pin: rng.gen_range(0..2 + kind_of[c] % 3) };

    let mut nets = Vec::new();
    for c in 0..spec.cells {
        let r: f64 = rng.gen();
        let degree = if r < 0.6 {
            2
        } else if r < 0.8 {
            3
        } else if r < 0.95 {
            rng.gen_range(4..=6)
        } else {
            rng.gen_range(7..=16)
        };
        let mut members = vec![c];
        let radius = if degree > 6 { 4 } else { 2 };
        for _ in 1..degree {
            if let Some(o) = near(&mut rng, pos(c), radius) {
                if !members.contains(&o) {
                    members.push(o);
                }
            }
        }
        if members.len() < 2 {
            continue;
        }
        let pins = members.iter().map(|&m| cell_pin(&mut rng, m)).collect();
        nets.push(Net { name: format!("n{}", nets.len()), pins });
    }
    for m in 0..spec.macros {
        let inst = spec.cells + m;
        let anchor = (rng.gen_range(0..side), rng.gen_range(0..side));
        let npins = instances_pins(&kinds[0][CELL_WIDTHS.len() + m]);
        for p in 0..npins {
            let mut pins = vec![PinRef { inst, pin: p }];
            for _ in 0..rng.gen_range(1..=3) {
                if let Some(o) = near(&mut rng, anchor, 5) {
                    if !pins.iter().any(|q: &PinRef| q.inst == o) {
                        pins.push(cell_pin(&mut rng, o));
                    }
                }
            }
            if pins.len() >= 2 {
                nets.push(Net { name: format!("n{}", nets.len()), pins });
            }
        }
    }

    let die = DieSpec {
        width,
        height,
        max_util: [u, u],
        row_height: [rh_bot, rh_top],
        site_width: [1.0, 1.0],
    };
    // Small dies get a finer HBT grid so that every net could cross.
    let mut hbt = spec.hbt;
    let slots = |p: f64| (width / p).floor() * (height / p).floor();
    while slots(hbt.pitch()) < nets.len() as f64 && (hbt.size > 1.0 || hbt.spacing > 1.0) {
        hbt.size = (hbt.size * 0.8).floor().max(1.0);
        hbt.spacing = (hbt.spacing * 0.8).floor().max(1.0);
    }
    let [kb, kt] = kinds;
    Design::new(die, hbt, [TechProfile { kinds: kb }, TechProfile { kinds: kt }], instances, nets)
}

fn instances_pins(k: &CellKind) -> usize {
    k.pins.len()
}

/// Two internally connected groups of equal cells, each filling 40% of a
/// die. At utilization 0.5 no die can hold both groups.
pub fn two_cliques(cells_per_group: usize, seed: u64) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 16.0;
    let rh = [16.0, 16.0];
    let kinds = rh.map(|h| {
        let pins = vec![
            PinDef { name: "a".into(), x: -4.0, y: 0.0 },
            PinDef { name: "b".into(), x: 4.0, y: 0.0 },
        ];
        TechProfile { kinds: vec![CellKind { name: "G".into(), width: w, height: h, pins }] }
    });
    let n = 2 * cells_per_group;
    let group_area = cells_per_group as f64 * w * 16.0;
    let area = group_area / 0.4;
    let height = ((area.sqrt() / 48.0).round().max(1.0)) * 48.0;
    let width = even(area / height);
    let instances = (0..n).map(|i| Instance { name: format!("g{i}"), kind: 0, is_macro: false }).collect();
    let mut nets = Vec::new();
    for g in 0..2 {
        let base = g * cells_per_group;
        for i in 0..cells_per_group {
            let mut pins = vec![PinRef { inst: base + i, pin: 1 }];
            while pins.len() < 4 {
                let j = base + rng.gen_range(0..cells_per_group);
                if pins.iter().all(|p| p.inst != j) {
                    pins.push(PinRef { inst: j, pin: 0 });
                }
            }
            nets.push(Net { name: format!("k{}", nets.len()), pins });
        }
    }
    let die = DieSpec { width, height, max_util: [0.5, 0.5], row_height: rh, site_width: [1.0, 1.0] };
    let hbt = HbtSpec { size: 20.0, spacing: 2.0, cost: 10.0 };
    Design::new(die, hbt, kinds, instances, nets)
}
