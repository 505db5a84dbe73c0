//! Detailed placement on a legal solution: window reordering and global
//! swaps per die, then one HBT remap followed by another refinement pass.
//! Every accepted move strictly lowers the D2D wirelength and keeps the
//! solution legal.

use std::collections::HashSet;

use serde::Serialize;

use crate::legalize::{hbt_targets, legalize_hbts};
use crate::model::{evaluate_score, pin_position, Design, Die, Hbt, PinRef, ScoreMode, Solution};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DpConfig {
    /// Cells per reordering window.
    pub window: usize,
    /// Same-width neighbors tried per cell in the global swap.
    pub swap_candidates: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig { window: 3, swap_candidates: 4 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DpStats {
    pub reorders: usize,
    pub swaps: usize,
    pub gap_moves: usize,
    pub hbt_moves: usize,
    pub hpwl_before: f64,
    pub hpwl_after: f64,
}

const EPS: f64 = 1e-9;

/// Per-die working view: row membership and blockages.
struct DieView {
    die: Die,
    row_h: f64,
    site: f64,
    width: f64,
    rows: Vec<Vec<usize>>,
    /// Macro rectangles `(x0, y0, x1, y1)`.
    blocks: Vec<[f64; 4]>,
    /// HBT center per net, if crossing.
    hbt: Vec<Option<(f64, f64)>>,
}

impl DieView {
    fn new(design: &Design, sol: &Solution, die: Die) -> Self {
        let d = die.index();
        let row_h = design.die.row_height[d];
        let nrows = design.die.num_rows(die);
        let mut rows = vec![Vec::new(); nrows];
        let mut blocks = Vec::new();
        for (i, p) in sol.placements.iter().enumerate() {
            if p.die != die {
                continue;
            }
            if design.instances[i].is_macro {
                let (w, h) = sol.footprint(design, i);
                blocks.push([p.x as f64, p.y as f64, p.x as f64 + w, p.y as f64 + h]);
            } else {
                let r = (p.y as f64 / row_h).round() as usize;
                rows[r.min(nrows - 1)].push(i);
            }
        }
        for r in &mut rows {
            r.sort_by_key(|&i| (sol.placements[i].x, i));
        }
        let mut hbt = vec![None; design.nets.len()];
        for t in &sol.hbts {
            hbt[t.net] = Some((t.x as f64, t.y as f64));
        }
        DieView { die, row_h, site: design.die.site_width[d], width: design.die.width, rows, blocks, hbt }
    }

    fn blocked(&self, r: usize, x0: f64, x1: f64) -> bool {
        let (y0, y1) = (r as f64 * self.row_h, (r + 1) as f64 * self.row_h);
        self.blocks.iter().any(|b| b[0] < x1 && x0 < b[2] && b[1] < y1 && y0 < b[3])
    }
}

/// HPWL of the part of net `e` on `die`, including its HBT.
fn partial_cost(design: &Design, sol: &Solution, die: Die, hbt: Option<(f64, f64)>, e: usize) -> f64 {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut any = false;
    let mut add = |x: f64, y: f64| {
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    };
    for &p in &design.nets[e].pins {
        if sol.placements[p.inst].die == die {
            let (x, y) = pin_position(design, sol, p);
            add(x, y);
            any = true;
        }
    }
    if !any {
        return 0.0;
    }
    if let Some((x, y)) = hbt {
        add(x, y);
    }
    (b[1] - b[0]) + (b[3] - b[2])
}

fn nets_of(design: &Design, insts: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = insts.iter().flat_map(|&i| design.inst_pins[i].iter().map(|&(e, _)| e)).collect();
    s.sort_unstable();
    s.dedup();
    s
}

fn cost_of(design: &Design, sol: &Solution, view: &DieView, nets: &[usize]) -> f64 {
    nets.iter().map(|&e| partial_cost(design, sol, view.die, view.hbt[e], e)).sum()
}

fn width_of(design: &Design, sol: &Solution, i: usize) -> f64 {
    sol.footprint(design, i).0
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn reorder_view(design: &Design, sol: &mut Solution, view: &mut DieView, k: usize) -> usize {
    if k < 2 {
        return 0;
    }
    let perms = permutations(k);
    let mut accepted = 0;
    for r in 0..view.rows.len() {
        let len = view.rows[r].len();
        if len < k {
            continue;
        }
        for s in 0..=len - k {
            let cells: Vec<usize> = view.rows[r][s..s + k].to_vec();
            let x0 = sol.placements[cells[0]].x as f64;
            let last = cells[k - 1];
            let x1 = sol.placements[last].x as f64 + width_of(design, sol, last);
            if view.blocked(r, x0, x1) {
                continue;
            }
            let widths: Vec<f64> = cells.iter().map(|&c| width_of(design, sol, c)).collect();
            // Gaps between consecutive cells stay in place.
            let mut gaps = vec![0.0];
            for j in 1..k {
                gaps.push(sol.placements[cells[j]].x as f64 - (sol.placements[cells[j - 1]].x as f64 + widths[j - 1]));
            }
            let nets = nets_of(design, &cells);
            let orig: Vec<i64> = cells.iter().map(|&c| sol.placements[c].x).collect();
            let base = cost_of(design, sol, view, &nets);
            let mut best = (base, None);
            for perm in perms.iter().skip(1) {
                let mut x = x0;
                for (j, &pi) in perm.iter().enumerate() {
                    x += gaps[j];
                    sol.placements[cells[pi]].x = x as i64;
                    x += widths[pi];
                }
                let c = cost_of(design, sol, view, &nets);
                if c < best.0 - EPS {
                    best = (c, Some(perm.clone()));
                }
            }
            match best.1 {
                Some(perm) => {
                    let mut x = x0;
                    for (j, &pi) in perm.iter().enumerate() {
                        x += gaps[j];
                        sol.placements[cells[pi]].x = x as i64;
                        x += widths[pi];
                    }
                    for (j, &pi) in perm.iter().enumerate() {
                        view.rows[r][s + j] = cells[pi];
                    }
                    accepted += 1;
                }
                None => {
                    for (&c, &x) in cells.iter().zip(&orig) {
                        sol.placements[c].x = x;
                    }
                }
            }
        }
    }
    accepted
}

/// Tries every permutation of each window of `k` consecutive cells in a
/// row (gaps between them kept) and keeps the best strictly improving one.
pub fn local_reorder(design: &Design, sol: &mut Solution, die: Die, k: usize) -> usize {
    let mut view = DieView::new(design, sol, die);
    reorder_view(design, sol, &mut view, k)
}

/// Center of the region minimizing the HPWL of `i`'s nets with the other
/// pins fixed: the median of the other pins' box endpoints.
fn target_of(design: &Design, sol: &Solution, view: &DieView, i: usize) -> Option<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(e, _) in &design.inst_pins[i] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let mut add = |x: f64, y: f64| {
            b[0] = b[0].min(x);
            b[1] = b[1].max(x);
            b[2] = b[2].min(y);
            b[3] = b[3].max(y);
        };
        for &p in &design.nets[e].pins {
            if p.inst != i && sol.placements[p.inst].die == view.die {
                let (x, y) = pin_position(design, sol, p);
                add(x, y);
            }
        }
        if let Some((x, y)) = view.hbt[e] {
            add(x, y);
        }
        if b[0].is_finite() {
            xs.extend([b[0], b[1]]);
            ys.extend([b[2], b[3]]);
        }
    }
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(((xs[m - 1] + xs[m]) / 2.0, (ys[m - 1] + ys[m]) / 2.0))
}

/// Free intervals of row `r`, excluding `skip`.
fn gaps(design: &Design, sol: &Solution, view: &DieView, r: usize, skip: usize) -> Vec<(f64, f64)> {
    let (y0, y1) = (r as f64 * view.row_h, (r + 1) as f64 * view.row_h);
    let mut occ: Vec<(f64, f64)> = view
        .blocks
        .iter()
        .filter(|b| b[1] < y1 && y0 < b[3])
        .map(|b| (b[0], b[2]))
        .chain(view.rows[r].iter().filter(|&&c| c != skip).map(|&c| {
            let x = sol.placements[c].x as f64;
            (x, x + width_of(design, sol, c))
        }))
        .collect();
    occ.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cur = 0.0;
    for (a, b) in occ.into_iter().chain([(view.width, view.width)]) {
        if a > cur {
            out.push((cur, a));
        }
        cur = f64::max(cur, b);
    }
    out
}

fn swap_view(design: &Design, sol: &mut Solution, view: &mut DieView, candidates: usize) -> (usize, usize) {
    let (mut swaps, mut moves) = (0, 0);
    let nrows = view.rows.len();
    let cells: Vec<usize> = view.rows.iter().flatten().copied().collect();
    for a in cells {
        let Some((tx, ty)) = target_of(design, sol, view, a) else { continue };
        let wa = width_of(design, sol, a);
        let ra = (sol.placements[a].y as f64 / view.row_h).round() as usize;
        let (ax, ay) = (sol.placements[a].x, sol.placements[a].y);
        let cur_cx = ax as f64 + wa / 2.0;
        let cur_cy = ay as f64 + view.row_h / 2.0;
        if (cur_cx - tx).abs() < wa && (cur_cy - ty).abs() < view.row_h {
            continue;
        }
        let tr = ((ty / view.row_h - 0.5).round().max(0.0) as usize).min(nrows - 1);
        let mut done = false;
        for r in [tr, tr.saturating_sub(1), (tr + 1).min(nrows - 1)] {
            if done {
                break;
            }
            // Same-width cells nearest the target.
            let row = &view.rows[r];
            let pos = row.partition_point(|&c| (sol.placements[c].x as f64) < tx - wa / 2.0);
            let lo = pos.saturating_sub(candidates);
            let hi = (pos + candidates).min(row.len());
            let cand: Vec<usize> = row[lo..hi]
                .iter()
                .copied()
                .filter(|&b| b != a && (width_of(design, sol, b) - wa).abs() < EPS)
                .collect();
            for b in cand {
                let nets = nets_of(design, &[a, b]);
                let before = cost_of(design, sol, view, &nets);
                let (bx, by) = (sol.placements[b].x, sol.placements[b].y);
                sol.placements[a].x = bx;
                sol.placements[a].y = by;
                sol.placements[b].x = ax;
                sol.placements[b].y = ay;
                if cost_of(design, sol, view, &nets) < before - EPS {
                    let rb = r;
                    let ia = view.rows[ra].iter().position(|&c| c == a).unwrap();
                    let ib = view.rows[rb].iter().position(|&c| c == b).unwrap();
                    view.rows[ra][ia] = b;
                    view.rows[rb][ib] = a;
                    swaps += 1;
                    done = true;
                    break;
                }
                sol.placements[a].x = ax;
                sol.placements[a].y = ay;
                sol.placements[b].x = bx;
                sol.placements[b].y = by;
            }
            if done {
                break;
            }
            // Move into a free gap near the target.
            let nets = nets_of(design, &[a]);
            let before = cost_of(design, sol, view, &nets);
            let mut best: Option<(f64, i64)> = None;
            for (g0, g1) in gaps(design, sol, view, r, a) {
                if g1 - g0 < wa - EPS {
                    continue;
                }
                let want = ((tx - wa / 2.0) / view.site).round() * view.site;
                let lo = (g0 / view.site - EPS).ceil() * view.site;
                let hi = ((g1 - wa) / view.site + EPS).floor() * view.site;
                if hi < lo {
                    continue;
                }
                let x = want.clamp(lo, hi);
                sol.placements[a].x = x as i64;
                sol.placements[a].y = (r as f64 * view.row_h) as i64;
                let c = cost_of(design, sol, view, &nets);
                if c < before - EPS && best.map_or(true, |b| c < b.0) {
                    best = Some((c, x as i64));
                }
            }
            match best {
                Some((_, x)) => {
                    sol.placements[a].x = x;
                    sol.placements[a].y = (r as f64 * view.row_h) as i64;
                    view.rows[ra].retain(|&c| c != a);
                    let row = &mut view.rows[r];
                    let at = row.partition_point(|&c| sol.placements[c].x < x);
                    row.insert(at, a);
                    moves += 1;
                    done = true;
                }
                None => {
                    sol.placements[a].x = ax;
                    sol.placements[a].y = ay;
                }
            }
        }
    }
    (swaps, moves)
}

/// Swaps equal-width cells and moves cells into free gaps near the optimal
/// region of their nets, accepting only strict improvements. Returns the
/// numbers of swaps and gap moves.
pub fn global_swap(design: &Design, sol: &mut Solution, die: Die, cfg: &DpConfig) -> (usize, usize) {
    let mut view = DieView::new(design, sol, die);
    swap_view(design, sol, &mut view, cfg.swap_candidates)
}

fn hpwl(design: &Design, sol: &Solution) -> f64 {
    evaluate_score(design, sol, ScoreMode::Diagnostic).map_or(f64::INFINITY, |s| s.hpwl)
}

/// One refinement pass on both dies. The dies run independently: a cell
/// move only changes the partial nets of its own die, and HBTs are fixed.
fn dp_pass(design: &Design, sol: &mut Solution, cfg: &DpConfig, stats: &mut DpStats) {
    let results = crate::par::map(Die::BOTH.to_vec(), |die| {
        let mut local = sol.clone();
        let mut view = DieView::new(design, &local, die);
        let r = reorder_view(design, &mut local, &mut view, cfg.window);
        let (s, m) = swap_view(design, &mut local, &mut view, cfg.swap_candidates);
        (die, local, r, s, m)
    });
    for (die, local, r, s, m) in results {
        for (i, p) in local.placements.iter().enumerate() {
            if p.die == die {
                sol.placements[i] = *p;
            }
        }
        stats.reorders += r;
        stats.swaps += s;
        stats.gap_moves += m;
    }
}

/// Re-centers HBTs on their updated optimal regions. The relegalized set
/// is kept only if it lowers the wirelength; afterwards each HBT still away
/// from its target is moved to the nearest free grid cell when that helps.
fn remap_hbts(design: &Design, sol: &mut Solution) -> usize {
    let dies = sol.dies();
    let targets = hbt_targets(design, &dies, |p| {
        pin_position(design, sol, PinRef { inst: design.pins.inst[p], pin: design.pins.pin[p] })
    });
    let degree: Vec<usize> = design.nets.iter().map(|n| n.pins.len()).collect();
    let mut moved = 0;
    if let Ok(legal) = legalize_hbts(&targets, &degree, &design.hbt, design.die.width, design.die.height) {
        let mut trial = sol.clone();
        trial.hbts = legal.iter().map(|&(net, x, y)| Hbt { net, x, y }).collect();
        if hpwl(design, &trial) < hpwl(design, sol) - EPS {
            moved += trial.hbts.iter().zip(&sol.hbts).filter(|(a, b)| a != b).count();
            *sol = trial;
        }
    }
    let pitch = design.hbt.pitch();
    let cell = |v: i64| ((v as f64 / pitch - 0.5).round()) as i64;
    let mut used: HashSet<(i64, i64)> = sol.hbts.iter().map(|t| (cell(t.x), cell(t.y))).collect();
    let nx = (design.die.width / pitch + EPS).floor() as i64;
    let ny = (design.die.height / pitch + EPS).floor() as i64;
    let mut idx: Vec<usize> = (0..sol.hbts.len()).collect();
    idx.sort_by_key(|&k| std::cmp::Reverse(degree[sol.hbts[k].net]));
    let target_of: std::collections::HashMap<usize, (f64, f64)> = targets.iter().map(|&(e, x, y)| (e, (x, y))).collect();
    for k in idx {
        let t = sol.hbts[k];
        let Some(&(tx, ty)) = target_of.get(&t.net) else { continue };
        let gi = ((tx / pitch - 0.5).round() as i64).clamp(0, nx - 1);
        let gj = ((ty / pitch - 0.5).round() as i64).clamp(0, ny - 1);
        let old = (cell(t.x), cell(t.y));
        if old == (gi, gj) {
            continue;
        }
        let cost = |sol: &Solution| -> f64 {
            let h = Some((sol.hbts[k].x as f64, sol.hbts[k].y as f64));
            Die::BOTH.iter().map(|&d| partial_cost(design, sol, d, h, t.net)).sum()
        };
        let before = cost(sol);
        let mut best: Option<(f64, (i64, i64))> = None;
        for i in (gi - 1).max(0)..=(gi + 1).min(nx - 1) {
            for j in (gj - 1).max(0)..=(gj + 1).min(ny - 1) {
                if used.contains(&(i, j)) {
                    continue;
                }
                sol.hbts[k].x = ((i as f64 + 0.5) * pitch).round() as i64;
                sol.hbts[k].y = ((j as f64 + 0.5) * pitch).round() as i64;
                let c = cost(sol);
                if c < before - EPS && best.map_or(true, |b| c < b.0) {
                    best = Some((c, (i, j)));
                }
            }
        }
        match best {
            Some((_, (i, j))) => {
                sol.hbts[k].x = ((i as f64 + 0.5) * pitch).round() as i64;
                sol.hbts[k].y = ((j as f64 + 0.5) * pitch).round() as i64;
                used.remove(&old);
                used.insert((i, j));
                moved += 1;
            }
            None => sol.hbts[k] = t,
        }
    }
    moved
}

/// Remaps HBTs to their updated optimal regions, then runs one more
/// refinement pass.
pub fn refine_with_hbt_remap(design: &Design, sol: &mut Solution, cfg: &DpConfig) -> DpStats {
    let mut stats = DpStats { hpwl_before: hpwl(design, sol), ..Default::default() };
    stats.hbt_moves = remap_hbts(design, sol);
    dp_pass(design, sol, cfg, &mut stats);
    stats.hpwl_after = hpwl(design, sol);
    stats
}

/// Full detailed placement: one refinement pass, the HBT remap and one
/// more pass.
pub fn detailed_place(design: &Design, sol: &mut Solution, cfg: &DpConfig) -> DpStats {
    let before = hpwl(design, sol);
    let mut stats = DpStats::default();
    dp_pass(design, sol, cfg, &mut stats);
    let second = refine_with_hbt_remap(design, sol, cfg);
    DpStats {
        reorders: stats.reorders + second.reorders,
        swaps: stats.swaps + second.swaps,
        gap_moves: stats.gap_moves + second.gap_moves,
        hbt_moves: second.hbt_moves,
        hpwl_before: before,
        hpwl_after: second.hpwl_after,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_sorted() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }
}
