//! Design data model: technology profiles, die and HBT specs, the netlist,
//! placement state, solutions and the exact die-to-die score.

mod io;
mod score;

pub use io::{parse_design, read_solution, write_design, write_solution};
pub use score::{
    crossing_indicator, derive_partition, evaluate_score, pin_position, round_half_up,
    ScoreMode, Score,
};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PlaceError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Die {
    Bottom = 0,
    Top = 1,
}

impl Die {
    pub const BOTH: [Die; 2] = [Die::Bottom, Die::Top];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Die selected by a partition bit (`true` is the top die).
    #[inline]
    pub fn from_delta(delta: bool) -> Die {
        if delta {
            Die::Top
        } else {
            Die::Bottom
        }
    }

    #[inline]
    pub fn is_top(self) -> bool {
        self == Die::Top
    }

    #[inline]
    pub fn other(self) -> Die {
        match self {
            Die::Bottom => Die::Top,
            Die::Top => Die::Bottom,
        }
    }
}

impl fmt::Display for Die {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Die::Bottom => "bottom",
            Die::Top => "top",
        })
    }
}

/// Counterclockwise macro rotation. Mirroring is not supported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn quarter_turns(self) -> u8 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }

    pub fn from_quarter_turns(q: u8) -> Rotation {
        Rotation::ALL[(q % 4) as usize]
    }

    pub fn degrees(self) -> u32 {
        self.quarter_turns() as u32 * 90
    }

    /// Decodes the binary pair `(r, r')` of the rotation MILP:
    /// `(0,0)→0°, (0,1)→90°, (1,1)→180°, (1,0)→270°`.
    pub fn from_bits(r: bool, r_prime: bool) -> Rotation {
        match (r, r_prime) {
            (false, false) => Rotation::R0,
            (false, true) => Rotation::R90,
            (true, true) => Rotation::R180,
            (true, false) => Rotation::R270,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Rotation::R0 => (false, false),
            Rotation::R90 => (false, true),
            Rotation::R180 => (true, true),
            Rotation::R270 => (true, false),
        }
    }

    /// Rotations after `self`, composed additively mod 360°.
    pub fn then(self, other: Rotation) -> Rotation {
        Rotation::from_quarter_turns(self.quarter_turns() + other.quarter_turns())
    }

    /// Rotates a pin offset about the instance center. Written in the
    /// binary-pair form so it agrees term by term with the rotation MILP.
    #[inline]
    pub fn apply(self, ox: f64, oy: f64) -> (f64, f64) {
        let (r, rp) = self.bits();
        let (r, rp) = (r as i32 as f64, rp as i32 as f64);
        let diag = 1.0 - r - rp;
        let off = r - rp;
        (diag * ox + off * oy, -off * ox + diag * oy)
    }

    /// Whether width and height trade places.
    pub fn swaps_dims(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }

    pub fn footprint(self, w: f64, h: f64) -> (f64, f64) {
        if self.swaps_dims() {
            (h, w)
        } else {
            (w, h)
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Rotation::R0 => "R0",
            Rotation::R90 => "R90",
            Rotation::R180 => "R180",
            Rotation::R270 => "R270",
        }
    }

    pub fn parse(s: &str) -> Option<Rotation> {
        match s {
            "R0" | "0" => Some(Rotation::R0),
            "R90" | "90" => Some(Rotation::R90),
            "R180" | "180" => Some(Rotation::R180),
            "R270" | "270" => Some(Rotation::R270),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinDef {
    pub name: String,
    /// Offset from the instance center.
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellKind {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub pins: Vec<PinDef>,
}

impl CellKind {
    pub fn pin_index(&self, name: &str) -> Option<usize> {
        self.pins.iter().position(|p| p.name == name)
    }
}

/// Library of cell kinds for one die. Kinds share indices across the two
/// dies' profiles, and so do the pins of each kind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TechProfile {
    pub kinds: Vec<CellKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DieSpec {
    pub width: f64,
    pub height: f64,
    /// Maximum utilization per die, indexed by [`Die::index`].
    pub max_util: [f64; 2],
    pub row_height: [f64; 2],
    pub site_width: [f64; 2],
}

impl DieSpec {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn num_rows(&self, die: Die) -> usize {
        (self.height / self.row_height[die.index()] + 1e-9).floor() as usize
    }

    pub fn num_sites(&self, die: Die) -> usize {
        (self.width / self.site_width[die.index()] + 1e-9).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HbtSpec {
    /// Side of the square terminal.
    pub size: f64,
    pub spacing: f64,
    /// Cost per inserted terminal.
    pub cost: f64,
}

impl HbtSpec {
    /// Side of the padded square used for legalization.
    pub fn pitch(&self) -> f64 {
        self.size + self.spacing
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub kind: usize,
    pub is_macro: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PinRef {
    pub inst: usize,
    /// Pin index within the instance's kind.
    pub pin: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Net {
    pub name: String,
    pub pins: Vec<PinRef>,
}

/// Immutable netlist with per-die technology and region specs.
#[derive(Clone, Debug)]
pub struct Design {
    pub die: DieSpec,
    pub hbt: HbtSpec,
    /// Technology profiles indexed by [`Die::index`].
    pub tech: [TechProfile; 2],
    pub instances: Vec<Instance>,
    pub nets: Vec<Net>,
    /// Indices of macro instances.
    pub macros: Vec<usize>,
    /// Indices of nets touching at least one macro.
    pub macro_nets: Vec<usize>,
    /// For every instance, the `(net, position in net)` pairs it drives.
    pub inst_pins: Vec<Vec<(usize, usize)>>,
    /// Flattened pin table (all nets back to back).
    pub pins: PinTable,
    inst_index: HashMap<String, usize>,
    net_index: HashMap<String, usize>,
}

/// All pins of all nets laid out contiguously, net by net.
#[derive(Clone, Debug, Default)]
pub struct PinTable {
    /// `net_start[e]..net_start[e + 1]` are the flat pins of net `e`.
    pub net_start: Vec<usize>,
    pub inst: Vec<usize>,
    pub pin: Vec<usize>,
    pub net: Vec<usize>,
}

impl PinTable {
    #[inline]
    pub fn net_range(&self, e: usize) -> std::ops::Range<usize> {
        self.net_start[e]..self.net_start[e + 1]
    }

    pub fn len(&self) -> usize {
        self.inst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inst.is_empty()
    }

    pub fn num_nets(&self) -> usize {
        self.net_start.len().saturating_sub(1)
    }
}

impl Design {
    /// Cross-links a netlist and validates every invariant of the model.
    pub fn new(
        die: DieSpec,
        hbt: HbtSpec,
        tech: [TechProfile; 2],
        instances: Vec<Instance>,
        nets: Vec<Net>,
    ) -> Result<Design> {
        validate_specs(&die, &hbt)?;
        validate_tech(&tech)?;
        let mut inst_index = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if inst.kind >= tech[0].kinds.len() {
                return Err(PlaceError::InvalidDimension(format!(
                    "instance `{}` has unknown kind index {}",
                    inst.name, inst.kind
                )));
            }
            if inst_index.insert(inst.name.clone(), i).is_some() {
                return Err(PlaceError::InvalidDimension(format!(
                    "duplicate instance `{}`",
                    inst.name
                )));
            }
        }
        let mut net_index = HashMap::with_capacity(nets.len());
        let mut inst_pins = vec![Vec::new(); instances.len()];
        let mut pins = PinTable { net_start: vec![0], ..Default::default() };
        for (e, net) in nets.iter().enumerate() {
            if net.pins.is_empty() {
                return Err(PlaceError::InvalidDimension(format!("net `{}` has no pins", net.name)));
            }
            if net_index.insert(net.name.clone(), e).is_some() {
                return Err(PlaceError::InvalidDimension(format!("duplicate net `{}`", net.name)));
            }
            for (k, p) in net.pins.iter().enumerate() {
                let inst = instances.get(p.inst).ok_or_else(|| {
                    PlaceError::InvalidDimension(format!("net `{}` references instance {}", net.name, p.inst))
                })?;
                if p.pin >= tech[0].kinds[inst.kind].pins.len() {
                    return Err(PlaceError::InvalidDimension(format!(
                        "net `{}` references pin {} of `{}`",
                        net.name, p.pin, inst.name
                    )));
                }
                inst_pins[p.inst].push((e, k));
                pins.inst.push(p.inst);
                pins.pin.push(p.pin);
                pins.net.push(e);
            }
            pins.net_start.push(pins.inst.len());
        }
        let macros: Vec<usize> = (0..instances.len()).filter(|&i| instances[i].is_macro).collect();
        let macro_nets = (0..nets.len())
            .filter(|&e| nets[e].pins.iter().any(|p| instances[p.inst].is_macro))
            .collect();
        Ok(Design {
            die,
            hbt,
            tech,
            instances,
            nets,
            macros,
            macro_nets,
            inst_pins,
            pins,
            inst_index,
            net_index,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn instance_by_name(&self, name: &str) -> Option<usize> {
        self.inst_index.get(name).copied()
    }

    pub fn net_by_name(&self, name: &str) -> Option<usize> {
        self.net_index.get(name).copied()
    }

    pub fn profile(&self, die: Die) -> &TechProfile {
        &self.tech[die.index()]
    }

    pub fn kind(&self, inst: usize, die: Die) -> &CellKind {
        &self.tech[die.index()].kinds[self.instances[inst].kind]
    }

    /// Unrotated `(width, height)` of an instance on a die.
    pub fn dims(&self, inst: usize, die: Die) -> (f64, f64) {
        let k = self.kind(inst, die);
        (k.width, k.height)
    }

    pub fn area(&self, inst: usize, die: Die) -> f64 {
        let (w, h) = self.dims(inst, die);
        w * h
    }

    /// Unrotated pin offset from the instance center on a die.
    pub fn pin_offset(&self, pin: PinRef, die: Die) -> (f64, f64) {
        let p = &self.kind(pin.inst, die).pins[pin.pin];
        (p.x, p.y)
    }

    /// Total macro footprint over die area, using bottom-die footprints.
    pub fn macro_area_ratio(&self) -> f64 {
        let a: f64 = self.macros.iter().map(|&m| self.area(m, Die::Bottom)).sum();
        a / self.die.area()
    }

    /// Number of pins on an instance (the `|E_i|` of the preconditioner).
    pub fn pin_degree(&self, inst: usize) -> usize {
        self.inst_pins[inst].len()
    }

    /// Whether every length in the design is a multiple of one half, so
    /// scores can be evaluated in exact integer arithmetic on a half-unit grid.
    pub fn is_half_unit_exact(&self) -> bool {
        let half = |v: f64| (2.0 * v).fract() == 0.0 && v.abs() < 1e12;
        self.tech.iter().all(|t| {
            t.kinds.iter().all(|k| {
                half(k.width) && half(k.height) && k.pins.iter().all(|p| half(p.x) && half(p.y))
            })
        })
    }
}

fn validate_specs(die: &DieSpec, hbt: &HbtSpec) -> Result<()> {
    let bad = |m: String| Err(PlaceError::InvalidDimension(m));
    if !(die.width > 0.0 && die.height > 0.0) {
        return bad(format!("die size {} x {}", die.width, die.height));
    }
    for d in Die::BOTH {
        let u = die.max_util[d.index()];
        if !(u > 0.0 && u <= 1.0) {
            return bad(format!("{d} die max utilization {u}"));
        }
        let rh = die.row_height[d.index()];
        if !(rh > 0.0) {
            return bad(format!("{d} die row height {rh}"));
        }
        let rows = die.height / rh;
        if (rows - rows.round()).abs() > 1e-9 {
            return bad(format!("{d} die rows of height {rh} do not tile die height {}", die.height));
        }
        let sw = die.site_width[d.index()];
        if !(sw > 0.0) {
            return bad(format!("{d} die site width {sw}"));
        }
    }
    if !(hbt.size > 0.0) || !(hbt.spacing >= 0.0) || !(hbt.cost >= 0.0) {
        return bad(format!("HBT size {} spacing {} cost {}", hbt.size, hbt.spacing, hbt.cost));
    }
    Ok(())
}

fn validate_tech(tech: &[TechProfile; 2]) -> Result<()> {
    let bad = |m: String| Err(PlaceError::InvalidDimension(m));
    if tech[0].kinds.len() != tech[1].kinds.len() {
        return bad("top and bottom profiles declare different cell kinds".into());
    }
    for (a, b) in tech[0].kinds.iter().zip(&tech[1].kinds) {
        if a.name != b.name || a.pins.len() != b.pins.len() {
            return bad(format!("cell kind `{}` differs between profiles", a.name));
        }
        for (pa, pb) in a.pins.iter().zip(&b.pins) {
            if pa.name != pb.name {
                return bad(format!("pin `{}` of `{}` missing from one profile", pa.name, a.name));
            }
        }
        for k in [a, b] {
            if !(k.width > 0.0 && k.height > 0.0) {
                return bad(format!("cell `{}` is {} x {}", k.name, k.width, k.height));
            }
            for p in &k.pins {
                if p.x.abs() > k.width / 2.0 || p.y.abs() > k.height / 2.0 {
                    return bad(format!("pin `{}/{}` offset lies outside the cell", k.name, p.name));
                }
            }
        }
    }
    Ok(())
}

/// Mutable global-placement coordinates. All coordinates are instance
/// centers; `z` lies in `[depth/4, 3·depth/4]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Rotation per instance; always `R0` for standard cells.
    pub rotation: Vec<Rotation>,
    /// Region depth `d_z`.
    pub depth: f64,
}

impl PlacementState {
    pub fn new(n: usize, depth: f64) -> Self {
        PlacementState {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: vec![depth / 2.0; n],
            rotation: vec![Rotation::R0; n],
            depth,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn die_of(&self, inst: usize) -> Die {
        Die::from_delta(self.z[inst] - self.depth / 2.0 > 0.0)
    }

    pub fn dies(&self) -> Vec<Die> {
        (0..self.len()).map(|i| self.die_of(i)).collect()
    }

    /// Z-coordinate of a die plane.
    pub fn plane(&self, die: Die) -> f64 {
        match die {
            Die::Bottom => self.depth / 4.0,
            Die::Top => 3.0 * self.depth / 4.0,
        }
    }

    /// Planar pin position using the instance's current die profile.
    pub fn pin_xy(&self, design: &Design, pin: PinRef) -> (f64, f64) {
        let die = self.die_of(pin.inst);
        let (ox, oy) = design.pin_offset(pin, die);
        let (rx, ry) = self.rotation[pin.inst].apply(ox, oy);
        (self.x[pin.inst] + rx, self.y[pin.inst] + ry)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub die: Die,
    /// Lower-left corner of the (rotated) footprint.
    pub x: i64,
    pub y: i64,
    pub rotation: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hbt {
    pub net: usize,
    /// Terminal center.
    pub x: i64,
    pub y: i64,
}

/// A finished placement: one record per instance plus the HBT list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solution {
    pub placements: Vec<Placement>,
    pub hbts: Vec<Hbt>,
}

impl Solution {
    /// Rotated footprint of an instance.
    pub fn footprint(&self, design: &Design, inst: usize) -> (f64, f64) {
        let p = &self.placements[inst];
        let (w, h) = design.dims(inst, p.die);
        p.rotation.footprint(w, h)
    }

    pub fn center(&self, design: &Design, inst: usize) -> (f64, f64) {
        let p = &self.placements[inst];
        let (w, h) = self.footprint(design, inst);
        (p.x as f64 + w / 2.0, p.y as f64 + h / 2.0)
    }

    pub fn dies(&self) -> Vec<Die> {
        self.placements.iter().map(|p| p.die).collect()
    }
}
