use crate::error::{PlaceError, Result};

/// Axis-aligned rectangle by lower-left corner and size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn cx(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn cy(&self) -> f64 {
        self.y + self.h / 2.0
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

/// `x_to - x_from ≥ gap`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    gap: f64,
}

/// Minimizes `Σ(x_i - d_i)²` subject to difference constraints and box
/// bounds by Hildreth's row-action method on the dual.
fn project_qp(d: &[f64], edges: &[Edge], hi: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut x = d.to_vec();
    let mut mu_e = vec![0.0; edges.len()];
    let mut mu_lo = vec![0.0; n];
    let mut mu_hi = vec![0.0; n];
    for _ in 0..20_000 {
        let mut worst: f64 = 0.0;
        for (k, e) in edges.iter().enumerate() {
            let slack = x[e.to] - x[e.from] - e.gap;
            worst = worst.max(-slack);
            let delta = (-slack / 2.0).max(-mu_e[k]);
            mu_e[k] += delta;
            x[e.to] += delta;
            x[e.from] -= delta;
        }
        for i in 0..n {
            worst = worst.max(-x[i]).max(x[i] - hi[i]);
            let delta = (-x[i]).max(-mu_lo[i]);
            mu_lo[i] += delta;
            x[i] += delta;
            let delta = (x[i] - hi[i]).max(-mu_hi[i]);
            mu_hi[i] += delta;
            x[i] -= delta;
        }
        if worst < 1e-7 {
            break;
        }
    }
    x
}

fn snap_down(v: f64, g: f64) -> f64 {
    (v / g + 1e-9).floor() * g
}

fn snap_up(v: f64, g: f64) -> f64 {
    (v / g - 1e-9).ceil() * g
}

/// Grid-aligned feasible positions near `x` under the constraint graph,
/// by a forward then a backward longest-path sweep over `order`.
fn snap_axis(x: &[f64], size: &[f64], edges: &[Edge], order: &[usize], extent: f64, g: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for e in edges {
        preds[e.to].push(e.from);
        succs[e.from].push(e.to);
    }
    let mut out: Vec<f64> = (0..n).map(|i| snap_down(x[i] + g / 2.0, g).max(0.0)).collect();
    for &i in order {
        for &p in &preds[i] {
            out[i] = out[i].max(snap_up(out[p] + size[p], g));
        }
    }
    for &i in order.iter().rev() {
        out[i] = out[i].min(snap_down(extent - size[i], g));
        for &s in &succs[i] {
            out[i] = out[i].min(snap_down(out[s] - size[i], g));
        }
    }
    let ok = (0..n).all(|i| out[i] >= -1e-9 && out[i] + size[i] <= extent + 1e-9)
        && edges.iter().all(|e| out[e.to] - out[e.from] >= size[e.from] - 1e-9);
    ok.then_some(out)
}

/// Longest-path start of every node from 0; returns the overflowing node
/// with the largest excess, if any.
fn longest_path(size: &[f64], edges: &[Edge], order: &[usize], extent: f64) -> (Vec<f64>, Option<usize>) {
    let n = size.len();
    let mut lp = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    for e in edges {
        preds[e.to].push(e.from);
    }
    for &i in order {
        for &p in &preds[i] {
            lp[i] = f64::max(lp[i], lp[p] + size[p]);
        }
    }
    let worst = (0..n)
        .filter(|&i| lp[i] + size[i] > extent + 1e-9)
        .max_by(|&a, &b| (lp[a] + size[a]).total_cmp(&(lp[b] + size[b])));
    (lp, worst)
}

/// Removes macro overlaps on one die.
///
/// Each pair gets a horizontal or vertical relation (the axis on which the
/// pair is separated, or the cheaper push when overlapping). Relations on
/// an overlong chain are flipped to the other axis until both axes fit.
/// Positions then minimize squared displacement under the relations and
/// are snapped to `grid` (x) and `row` (y). Falls back to greedy
/// candidate-point placement when that fails.
pub fn legalize_macros(rects: &[Rect], width: f64, height: f64, grid: f64, row: f64) -> Result<Vec<(f64, f64)>> {
    let n = rects.len();
    let area: f64 = rects.iter().map(|r| r.w * r.h).sum();
    if area > width * height + 1e-9 {
        return Err(PlaceError::Infeasible(format!("macro area {area} exceeds die area {}", width * height)));
    }
    if let Some(r) = rects.iter().find(|r| r.w > width + 1e-9 || r.h > height + 1e-9) {
        return Err(PlaceError::Infeasible(format!("macro {}x{} larger than the die", r.w, r.h)));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Horizontal relation per pair (true) or vertical (false); i < j.
    let mut horiz = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&rects[i], &rects[j]);
            let ox = (a.w + b.w) / 2.0 - (a.cx() - b.cx()).abs();
            let oy = (a.h + b.h) / 2.0 - (a.cy() - b.cy()).abs();
            horiz[i][j] = if ox <= 0.0 && oy <= 0.0 {
                ox <= oy
            } else if ox <= 0.0 || oy <= 0.0 {
                ox <= 0.0
            } else {
                ox * a.h.min(b.h) <= oy * a.w.min(b.w)
            };
        }
    }
    let order_x = sorted(n, |i| rects[i].cx());
    let order_y = sorted(n, |i| rects[i].cy());
    let rank = |order: &[usize]| {
        let mut r = vec![0; n];
        for (k, &i) in order.iter().enumerate() {
            r[i] = k;
        }
        r
    };
    let (rx, ry) = (rank(&order_x), rank(&order_y));
    let build = |horiz: &Vec<Vec<bool>>| {
        let mut ex = Vec::new();
        let mut ey = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if horiz[i][j] {
                    let (f, t) = if rx[i] < rx[j] { (i, j) } else { (j, i) };
                    ex.push(Edge { from: f, to: t, gap: rects[f].w });
                } else {
                    let (f, t) = if ry[i] < ry[j] { (i, j) } else { (j, i) };
                    ey.push(Edge { from: f, to: t, gap: rects[f].h });
                }
            }
        }
        (ex, ey)
    };
    let ws: Vec<f64> = rects.iter().map(|r| r.w).collect();
    let hs: Vec<f64> = rects.iter().map(|r| r.h).collect();
    for _ in 0..=n * n {
        let (ex, ey) = build(&horiz);
        let (lpx, bad_x) = longest_path(&ws, &ex, &order_x, width);
        let (lpy, bad_y) = longest_path(&hs, &ey, &order_y, height);
        if bad_x.is_none() && bad_y.is_none() {
            let dx: Vec<f64> = rects.iter().map(|r| r.x).collect();
            let dy: Vec<f64> = rects.iter().map(|r| r.y).collect();
            let hix: Vec<f64> = ws.iter().map(|w| width - w).collect();
            let hiy: Vec<f64> = hs.iter().map(|h| height - h).collect();
            let qx = project_qp(&dx, &ex, &hix);
            let qy = project_qp(&dy, &ey, &hiy);
            let sx = snap_axis(&qx, &ws, &ex, &order_x, width, grid).or_else(|| snap_axis(&qx, &ws, &ex, &order_x, width, 1.0));
            let sy = snap_axis(&qy, &hs, &ey, &order_y, height, row).or_else(|| snap_axis(&qy, &hs, &ey, &order_y, height, 1.0));
            if let (Some(sx), Some(sy)) = (sx, sy) {
                return Ok(sx.into_iter().zip(sy).collect());
            }
            break;
        }
        // Flip the cheapest relation on the critical chain.
        let (end, lp, sizes, is_h) = match bad_x {
            Some(e) => (e, &lpx, &ws, true),
            None => (bad_y.unwrap(), &lpy, &hs, false),
        };
        let edges = if is_h { build(&horiz).0 } else { build(&horiz).1 };
        let mut chain = Vec::new();
        let mut cur = end;
        while let Some(e) = edges.iter().find(|e| e.to == cur && (lp[e.from] + sizes[e.from] - lp[cur]).abs() < 1e-9) {
            chain.push((e.from, e.to));
            cur = e.from;
        }
        let cost = |(a, b): (usize, usize)| {
            let (p, q) = (&rects[a], &rects[b]);
            if is_h {
                (p.h + q.h) / 2.0 - (p.cy() - q.cy()).abs()
            } else {
                (p.w + q.w) / 2.0 - (p.cx() - q.cx()).abs()
            }
        };
        match chain.into_iter().min_by(|&a, &b| cost(a).total_cmp(&cost(b))) {
            Some((a, b)) => {
                let (i, j) = (a.min(b), a.max(b));
                horiz[i][j] = !horiz[i][j];
            }
            None => break,
        }
    }
    greedy_candidates(rects, width, height, grid, row)
}

fn sorted(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut o: Vec<usize> = (0..n).collect();
    o.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    o
}

/// Places macros largest first at the closest legal candidate point: the
/// desired position, the die edges and the edges of placed macros.
fn greedy_candidates(rects: &[Rect], width: f64, height: f64, grid: f64, row: f64) -> Result<Vec<(f64, f64)>> {
    let n = rects.len();
    let order = sorted(n, |i| -rects[i].w * rects[i].h);
    let mut placed: Vec<Rect> = Vec::new();
    let mut out = vec![(0.0, 0.0); n];
    for i in order {
        let r = rects[i];
        let mut xs = vec![snap_down(r.x.clamp(0.0, width - r.w), grid), 0.0, snap_down(width - r.w, grid)];
        let mut ys = vec![snap_down(r.y.clamp(0.0, height - r.h), row), 0.0, snap_down(height - r.h, 1.0)];
        for p in &placed {
            xs.push(snap_up(p.x + p.w, grid));
            xs.push(snap_down(p.x - r.w, grid));
            ys.push(snap_up(p.y + p.h, 1.0));
            ys.push(snap_down(p.y - r.h, 1.0));
        }
        let mut best: Option<(f64, f64, f64)> = None;
        for &x in &xs {
            for &y in &ys {
                let c = Rect { x, y, ..r };
                if x < 0.0 || y < 0.0 || x + r.w > width + 1e-9 || y + r.h > height + 1e-9 {
                    continue;
                }
                if placed.iter().any(|p| p.overlaps(&c)) {
                    continue;
                }
                let cost = (x - r.x).powi(2) + (y - r.y).powi(2);
                if best.map_or(true, |b| cost < b.0) {
                    best = Some((cost, x, y));
                }
            }
        }
        let (_, x, y) = best.ok_or_else(|| PlaceError::Infeasible("no legal position for a macro".into()))?;
        placed.push(Rect { x, y, ..r });
        out[i] = (x, y);
    }
    Ok(out)
}
