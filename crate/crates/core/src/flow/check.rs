//! Independent legality checker. Uses only the data model and the score
//! evaluator.

use serde::Serialize;

use crate::model::{crossing_indicator, evaluate_score, Design, Die, Rotation, Score, ScoreMode, Solution};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub violations: Vec<String>,
    pub score: Option<Score>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Box2 {
    inst: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

/// Validates non-overlap, row and site alignment, die bounds, rotation
/// rules, utilization limits and the one-HBT-per-crossing-net rule, then
/// scores the solution.
pub fn check_solution(design: &Design, sol: &Solution) -> CheckReport {
    let mut v = Vec::new();
    let n = design.num_instances();
    if sol.placements.len() != n {
        v.push(format!("{} placements for {} instances", sol.placements.len(), n));
        return CheckReport { violations: v, score: None };
    }
    let spec = &design.die;
    let mut boxes: [Vec<Box2>; 2] = [Vec::new(), Vec::new()];
    let mut area = [0.0; 2];
    for i in 0..n {
        let p = &sol.placements[i];
        let name = &design.instances[i].name;
        let (w, h) = sol.footprint(design, i);
        let (x0, y0) = (p.x as f64, p.y as f64);
        let d = p.die.index();
        area[d] += w * h;
        if x0 < 0.0 || y0 < 0.0 || x0 + w > spec.width || y0 + h > spec.height {
            v.push(format!("{name} at ({}, {}) size {w}x{h} leaves the die", p.x, p.y));
        }
        if !design.instances[i].is_macro {
            if p.rotation != Rotation::R0 {
                v.push(format!("cell {name} is rotated {}", p.rotation.label()));
            }
            let rh = spec.row_height[d];
            let sw = spec.site_width[d];
            if (y0 / rh).fract().abs() > 1e-9 {
                v.push(format!("cell {name} at y = {} is off the {} die rows", p.y, p.die));
            }
            if (x0 / sw).fract().abs() > 1e-9 {
                v.push(format!("cell {name} at x = {} is off the {} die sites", p.x, p.die));
            }
        }
        boxes[d].push(Box2 { inst: i, x0, y0, x1: x0 + w, y1: y0 + h });
    }
    for die in Die::BOTH {
        let d = die.index();
        let cap = spec.max_util[d] * spec.area();
        if area[d] > cap + 1e-6 {
            v.push(format!("{die} die utilization {:.4} exceeds {}", area[d] / spec.area(), spec.max_util[d]));
        }
        let bs = &mut boxes[d];
        bs.sort_by(|a, b| a.x0.total_cmp(&b.x0).then(a.inst.cmp(&b.inst)));
        for a in 0..bs.len() {
            for b in a + 1..bs.len() {
                if bs[b].x0 >= bs[a].x1 {
                    break;
                }
                if bs[a].y0 < bs[b].y1 && bs[b].y0 < bs[a].y1 {
                    let (p, q) = (bs[a].inst, bs[b].inst);
                    v.push(format!(
                        "{} and {} overlap on the {die} die at ({}, {}) and ({}, {})",
                        design.instances[p].name,
                        design.instances[q].name,
                        bs[a].x0,
                        bs[a].y0,
                        bs[b].x0,
                        bs[b].y0
                    ));
                }
            }
        }
    }

    let mut hbt_count = vec![0usize; design.nets.len()];
    for t in &sol.hbts {
        if t.net >= design.nets.len() {
            v.push(format!("HBT references unknown net {}", t.net));
            continue;
        }
        hbt_count[t.net] += 1;
        let half = design.hbt.size / 2.0;
        let (x, y) = (t.x as f64, t.y as f64);
        if x - half < 0.0 || y - half < 0.0 || x + half > spec.width || y + half > spec.height {
            v.push(format!("HBT of net {} at ({}, {}) leaves the die", design.nets[t.net].name, t.x, t.y));
        }
    }
    for (e, net) in design.nets.iter().enumerate() {
        let crossing = crossing_indicator(net.pins.iter().map(|p| sol.placements[p.inst].die.is_top())) == 1;
        match (crossing, hbt_count[e]) {
            (true, 0) => v.push(format!("crossing net {} has no HBT", net.name)),
            (false, k) if k > 0 => v.push(format!("net {} does not cross dies but has {k} HBT(s)", net.name)),
            (_, k) if k > 1 => v.push(format!("net {} has {k} HBTs", net.name)),
            _ => {}
        }
    }
    let pitch = design.hbt.pitch();
    let mut hs: Vec<(f64, f64, usize)> = sol.hbts.iter().map(|t| (t.x as f64, t.y as f64, t.net)).collect();
    hs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for a in 0..hs.len() {
        for b in a + 1..hs.len() {
            if hs[b].0 - hs[a].0 >= pitch - 1e-9 {
                break;
            }
            if (hs[b].1 - hs[a].1).abs() < pitch - 1e-9 {
                v.push(format!(
                    "HBTs of nets {} and {} closer than {pitch} at ({}, {}) and ({}, {})",
                    design.nets.get(hs[a].2).map_or("?", |n| &n.name),
                    design.nets.get(hs[b].2).map_or("?", |n| &n.name),
                    hs[a].0,
                    hs[a].1,
                    hs[b].0,
                    hs[b].1
                ));
            }
        }
    }
    let score = evaluate_score(design, sol, ScoreMode::Strict)
        .or_else(|_| evaluate_score(design, sol, ScoreMode::Diagnostic))
        .ok();
    CheckReport { violations: v, score }
}
