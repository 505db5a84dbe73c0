//! Macro rotation: extraction of the rotation problem from a partitioned
//! placement, an exact branch-and-bound solver and application of the
//! chosen rotations.

use crate::error::{PlaceError, Result};
use crate::legalize::insert_hbts;
use crate::model::{Design, Die, PinRef, PlacementState, Rotation};

/// A macro pin: center of its macro plus the current offset, which the
/// rotation turns about the center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroPin {
    /// Index into `RotationProblem::macros`.
    pub slot: usize,
    pub cx: f64,
    pub cy: f64,
    pub ox: f64,
    pub oy: f64,
}

impl MacroPin {
    pub fn at(&self, r: Rotation) -> (f64, f64) {
        let (x, y) = r.apply(self.ox, self.oy);
        (self.cx + x, self.cy + y)
    }
}

/// One objective net: fixed pins (cells and the HBT) reduced to their
/// bounding box, plus macro pins.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationNet {
    /// `(x_lo, x_hi, y_lo, y_hi)` of the fixed pins.
    pub fixed: Option<[f64; 4]>,
    pub pins: Vec<MacroPin>,
}

impl RotationNet {
    /// Exact HPWL for a full assignment.
    pub fn span(&self, rot: &[Rotation]) -> f64 {
        let mut b = self.fixed.unwrap_or([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]);
        for p in &self.pins {
            grow(&mut b, p.at(rot[p.slot]));
        }
        (b[1] - b[0]) + (b[3] - b[2])
    }
}

fn grow(b: &mut [f64; 4], (x, y): (f64, f64)) {
    b[0] = b[0].min(x);
    b[1] = b[1].max(x);
    b[2] = b[2].min(y);
    b[3] = b[3].max(y);
}

fn span_of(b: &[f64; 4]) -> f64 {
    if b[0] > b[1] {
        0.0
    } else {
        (b[1] - b[0]) + (b[3] - b[2])
    }
}

/// Rotation variables per macro and the nets that touch them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RotationProblem {
    /// Instance index per slot.
    pub macros: Vec<usize>,
    /// Rotations (by quarter turns) whose footprint fits the die.
    pub allowed: Vec<[bool; 4]>,
    pub nets: Vec<RotationNet>,
}

impl RotationProblem {
    pub fn is_empty(&self) -> bool {
        self.macros.is_empty() || self.nets.is_empty()
    }

    pub fn objective(&self, rot: &[Rotation]) -> f64 {
        self.nets.iter().map(|n| n.span(rot)).sum()
    }
}

/// Rotation per slot with its objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationAssignment {
    pub rotations: Vec<Rotation>,
    pub objective: f64,
    /// Search nodes visited.
    pub nodes: usize,
}

/// Extracts the rotation problem from a partitioned state. Crossing nets
/// get an HBT at the center of their optimal region; it acts as a fixed
/// pin of both partial nets, and each partial net is one objective net.
pub fn build_problem(design: &Design, st: &PlacementState) -> RotationProblem {
    let n = design.num_instances();
    let mut slot = vec![usize::MAX; n];
    let mut macros = Vec::new();
    let mut allowed = Vec::new();
    for i in 0..n {
        if design.instances[i].is_macro {
            slot[i] = macros.len();
            macros.push(i);
            let (w, h) = design.dims(i, st.die_of(i));
            let (w, h) = st.rotation[i].footprint(w, h);
            allowed.push(Rotation::ALL.map(|r| {
                let (rw, rh) = r.footprint(w, h);
                r == Rotation::R0 || (rw <= design.die.width && rh <= design.die.height)
            }));
        }
    }
    let mut hbt = vec![None; design.nets.len()];
    for (e, x, y) in insert_hbts(design, st) {
        hbt[e] = Some((x, y));
    }
    let dies = st.dies();
    let mut nets = Vec::new();
    for (e, net) in design.nets.iter().enumerate() {
        if !net.pins.iter().any(|p| slot[p.inst] != usize::MAX) {
            continue;
        }
        let groups: &[Option<Die>] = if hbt[e].is_some() { &[Some(Die::Top), Some(Die::Bottom)] } else { &[None] };
        for &g in groups {
            let mut fixed: Option<[f64; 4]> = None;
            let mut pins = Vec::new();
            for &p in &net.pins {
                if g.is_some_and(|d| dies[p.inst] != d) {
                    continue;
                }
                if slot[p.inst] != usize::MAX {
                    let die = dies[p.inst];
                    let (ox, oy) = design.pin_offset(p, die);
                    let (ox, oy) = st.rotation[p.inst].apply(ox, oy);
                    pins.push(MacroPin { slot: slot[p.inst], cx: st.x[p.inst], cy: st.y[p.inst], ox, oy });
                } else {
                    add_fixed(&mut fixed, st.pin_xy(design, PinRef { inst: p.inst, pin: p.pin }));
                }
            }
            if pins.is_empty() {
                continue;
            }
            if let Some(h) = hbt[e] {
                add_fixed(&mut fixed, h);
            }
            nets.push(RotationNet { fixed, pins });
        }
    }
    RotationProblem { macros, allowed, nets }
}

fn add_fixed(b: &mut Option<[f64; 4]>, p: (f64, f64)) {
    let mut v = b.unwrap_or([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]);
    grow(&mut v, p);
    *b = Some(v);
}

/// Candidate order: lexicographic in the binary pair `(r, r')`.
const LEX_ORDER: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R270, Rotation::R180];

struct Search<'a> {
    p: &'a RotationProblem,
    /// Net indices per slot.
    nets_of: Vec<Vec<usize>>,
    rot: Vec<Option<Rotation>>,
    bound: Vec<f64>,
    total: f64,
    best: f64,
    best_rot: Vec<Rotation>,
    eps: f64,
    nodes: usize,
}

impl Search<'_> {
    /// Lower bound on one net's span under the partial assignment: the box
    /// of fixed and assigned pins, widened by each open macro at its
    /// cheapest rotation.
    fn net_bound(&self, e: usize) -> f64 {
        let net = &self.p.nets[e];
        let mut b = net.fixed.unwrap_or([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]);
        for pin in &net.pins {
            if let Some(r) = self.rot[pin.slot] {
                grow(&mut b, pin.at(r));
            }
        }
        let mut lb = span_of(&b);
        let mut open: Vec<usize> = net.pins.iter().filter(|p| self.rot[p.slot].is_none()).map(|p| p.slot).collect();
        open.sort_unstable();
        open.dedup();
        for s in open {
            let cheapest = Rotation::ALL
                .iter()
                .filter(|r| self.p.allowed[s][r.quarter_turns() as usize])
                .map(|&r| {
                    let mut bb = b;
                    for pin in net.pins.iter().filter(|p| p.slot == s) {
                        grow(&mut bb, pin.at(r));
                    }
                    span_of(&bb)
                })
                .fold(f64::INFINITY, f64::min);
            lb = lb.max(cheapest);
        }
        lb
    }

    fn dfs(&mut self, k: usize) {
        self.nodes += 1;
        if k == self.rot.len() {
            // Bounds are exact spans once every macro is fixed.
            if self.total < self.best - self.eps {
                self.best = self.total;
                self.best_rot = self.rot.iter().map(|r| r.unwrap()).collect();
            }
            return;
        }
        for r in LEX_ORDER {
            if !self.p.allowed[k][r.quarter_turns() as usize] {
                continue;
            }
            self.rot[k] = Some(r);
            let nets = std::mem::take(&mut self.nets_of[k]);
            let saved: Vec<f64> = nets.iter().map(|&e| self.bound[e]).collect();
            for &e in &nets {
                let b = self.net_bound(e);
                self.total += b - self.bound[e];
                self.bound[e] = b;
            }
            if self.total < self.best - self.eps {
                self.dfs(k + 1);
            }
            for (&e, s) in nets.iter().zip(saved) {
                self.total += s - self.bound[e];
                self.bound[e] = s;
            }
            self.nets_of[k] = nets;
        }
        self.rot[k] = None;
    }
}

/// Exact minimizer of the rotation problem by branch-and-bound with
/// per-net interval bounds. Among optimal assignments the lexicographically
/// smallest `(r₁, r'₁, r₂, r'₂, …)` is returned.
pub fn solve_exact(p: &RotationProblem) -> RotationAssignment {
    let k = p.macros.len();
    let mut nets_of = vec![Vec::new(); k];
    for (e, net) in p.nets.iter().enumerate() {
        let mut slots: Vec<usize> = net.pins.iter().map(|x| x.slot).collect();
        slots.sort_unstable();
        slots.dedup();
        for s in slots {
            nets_of[s].push(e);
        }
    }
    let scale = p
        .nets
        .iter()
        .flat_map(|n| n.pins.iter().map(|q| q.cx.abs() + q.cy.abs() + q.ox.abs() + q.oy.abs()))
        .fold(1.0, f64::max);
    let mut s = Search {
        p,
        nets_of,
        rot: vec![None; k],
        bound: vec![0.0; p.nets.len()],
        total: 0.0,
        best: f64::INFINITY,
        best_rot: vec![Rotation::R0; k],
        eps: 1e-9 * scale,
        nodes: 0,
    };
    for e in 0..p.nets.len() {
        s.bound[e] = s.net_bound(e);
        s.total += s.bound[e];
    }
    s.dfs(0);
    let objective = p.objective(&s.best_rot);
    RotationAssignment { rotations: s.best_rot, objective, nodes: s.nodes }
}

/// Turns each listed instance by its rotation about its center. Footprints
/// and pin offsets follow from the stored rotation.
pub fn apply_rotation(design: &Design, st: &mut PlacementState, turns: &[(usize, Rotation)]) -> Result<()> {
    if let Some(&(i, _)) = turns.iter().find(|(i, _)| !design.instances[*i].is_macro) {
        return Err(PlaceError::RotateCell(design.instances[i].name.clone()));
    }
    for &(i, r) in turns {
        st.rotation[i] = st.rotation[i].then(r);
    }
    Ok(())
}

/// Builds, solves and applies the rotation problem. Returns the assignment.
pub fn rotate_macros(design: &Design, st: &mut PlacementState) -> Result<RotationAssignment> {
    let p = build_problem(design, st);
    let a = solve_exact(&p);
    let turns: Vec<(usize, Rotation)> = p.macros.iter().copied().zip(a.rotations.iter().copied()).collect();
    apply_rotation(design, st, &turns)?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(fixed: (f64, f64), ox: f64, oy: f64) -> RotationProblem {
        RotationProblem {
            macros: vec![0],
            allowed: vec![[true; 4]],
            nets: vec![RotationNet {
                fixed: Some([fixed.0, fixed.0, fixed.1, fixed.1]),
                pins: vec![MacroPin { slot: 0, cx: 0.0, cy: 0.0, ox, oy }],
            }],
        }
    }

    #[test]
    fn half_turn_reaches_fixed_pin() {
        let p = single((-3.0, 0.0), 2.0, 0.0);
        let spans: Vec<f64> = Rotation::ALL.iter().map(|&r| p.objective(&[r])).collect();
        assert_eq!(spans, vec![5.0 + 0.0, 3.0 + 2.0, 1.0, 3.0 + 2.0]);
        let a = solve_exact(&p);
        assert_eq!(a.rotations, vec![Rotation::R180]);
        assert_eq!(a.objective, 1.0);
    }

    #[test]
    fn symmetric_pins_keep_zero() {
        let pins = vec![
            MacroPin { slot: 0, cx: 5.0, cy: 5.0, ox: 2.0, oy: 1.0 },
            MacroPin { slot: 0, cx: 5.0, cy: 5.0, ox: -2.0, oy: -1.0 },
        ];
        let p = RotationProblem { macros: vec![3], allowed: vec![[true; 4]], nets: vec![RotationNet { fixed: None, pins }] };
        let a = solve_exact(&p);
        assert_eq!(a.rotations, vec![Rotation::R0]);
        // 90° and 270° tie with 0° here as well.
        assert_eq!(p.objective(&[Rotation::R90]), p.objective(&[Rotation::R0]));
    }

    #[test]
    fn empty_problem() {
        let a = solve_exact(&RotationProblem::default());
        assert!(a.rotations.is_empty());
        assert_eq!(a.objective, 0.0);
    }
}
