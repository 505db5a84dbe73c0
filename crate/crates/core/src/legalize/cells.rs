use super::macros::Rect;
use crate::error::{PlaceError, Result};
use crate::model::Die;

#[derive(Clone, Copy, Debug)]
struct Cluster {
    /// Cell weight sum.
    e: f64,
    q: f64,
    w: f64,
    x: f64,
    /// Index of the first member in the segment's cell list.
    first: usize,
}

/// Free interval of one row between blockages.
#[derive(Clone, Debug)]
struct Segment {
    x0: f64,
    x1: f64,
    used: f64,
    cells: Vec<(usize, f64)>,
    clusters: Vec<Cluster>,
}

impl Segment {
    fn new(x0: f64, x1: f64) -> Self {
        Segment { x0, x1, used: 0.0, cells: Vec::new(), clusters: Vec::new() }
    }

    fn place(&self, q: f64, e: f64, w: f64) -> f64 {
        (q / e).clamp(self.x0, self.x1 - w)
    }

    /// Position the new cell would get if appended at desired `xd`.
    fn trial(&self, xd: f64, w: f64) -> f64 {
        let (mut e, mut q, mut wt) = (1.0, xd, w);
        let mut k = self.clusters.len();
        loop {
            let x = self.place(q, e, wt);
            if k > 0 && self.clusters[k - 1].x + self.clusters[k - 1].w > x {
                let p = self.clusters[k - 1];
                q = p.q + q - e * p.w;
                e += p.e;
                wt += p.w;
                k -= 1;
                continue;
            }
            return x + wt - w;
        }
    }

    fn commit(&mut self, cell: usize, xd: f64, w: f64) {
        let first = self.cells.len();
        self.cells.push((cell, w));
        self.used += w;
        let mut c = Cluster { e: 1.0, q: xd, w, x: 0.0, first };
        c.x = self.place(c.q, c.e, c.w);
        while let Some(p) = self.clusters.last().copied() {
            if p.x + p.w <= c.x {
                break;
            }
            self.clusters.pop();
            c = Cluster { e: p.e + c.e, q: p.q + c.q - c.e * p.w, w: p.w + c.w, x: 0.0, first: p.first };
            c.x = self.place(c.q, c.e, c.w);
        }
        self.clusters.push(c);
    }
}

/// Legalizes standard cells on one die.
///
/// Rows of height `row` tile the die; `blockages` (legal macros) cut them
/// into segments aligned to the site grid. Cells are taken in order of
/// desired `x`; each goes to the segment where appending it, with
/// Abacus cluster collapsing, moves it least. Returns lower-left corners in
/// input order, on rows and sites.
pub fn legalize_cells(
    die: Die,
    cells: &[Rect],
    width: f64,
    height: f64,
    row: f64,
    site: f64,
    blockages: &[Rect],
) -> Result<Vec<(f64, f64)>> {
    if let Some(c) = cells.iter().find(|c| c.h > row + 1e-9) {
        return Err(PlaceError::Legalize { die, msg: format!("cell height {} exceeds row height {row}", c.h) });
    }
    let nrows = (height / row + 1e-9).floor() as usize;
    let mut rows: Vec<Vec<Segment>> = (0..nrows)
        .map(|r| {
            let (y0, y1) = (r as f64 * row, (r + 1) as f64 * row);
            let mut cuts: Vec<(f64, f64)> = blockages
                .iter()
                .filter(|b| b.y < y1 - 1e-9 && b.y + b.h > y0 + 1e-9)
                .map(|b| (b.x, b.x + b.w))
                .collect();
            cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut segs = Vec::new();
            let mut start = 0.0;
            for (a, b) in cuts.into_iter().chain([(width, width)]) {
                let x0 = (start / site - 1e-9).ceil() * site;
                let x1 = (a / site + 1e-9).floor() * site;
                if x1 > x0 {
                    segs.push(Segment::new(x0, x1));
                }
                start = f64::max(start, b);
            }
            segs
        })
        .collect();
    let widths: Vec<f64> = cells.iter().map(|c| (c.w / site - 1e-9).ceil() * site).collect();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].x.total_cmp(&cells[b].x).then(a.cmp(&b)));
    let mut where_: Vec<(usize, usize)> = vec![(0, 0); cells.len()];
    for &c in &order {
        let (xd, yd, w) = (cells[c].x, cells[c].y, widths[c]);
        let home = ((yd / row).round().max(0.0) as usize).min(nrows.saturating_sub(1));
        let mut best: Option<(f64, usize, usize)> = None;
        for dist in 0..nrows {
            let lo_dy = (dist as f64 - 0.5).max(0.0) * row;
            if best.is_some_and(|b| lo_dy * lo_dy > b.0) {
                break;
            }
            let mut cand = vec![home + dist];
            if dist > 0 && home >= dist {
                cand.push(home - dist);
            }
            for r in cand.into_iter().filter(|&r| r < nrows) {
                let dy = r as f64 * row - yd;
                for (s, seg) in rows[r].iter().enumerate() {
                    if seg.used + w > seg.x1 - seg.x0 + 1e-9 {
                        continue;
                    }
                    let dx = seg.trial(xd, w) - xd;
                    let cost = dx * dx + dy * dy;
                    if best.map_or(true, |b| cost < b.0) {
                        best = Some((cost, r, s));
                    }
                }
            }
        }
        let (_, r, s) = best.ok_or_else(|| PlaceError::Legalize {
            die,
            msg: format!("no row capacity left for a cell of width {w}"),
        })?;
        rows[r][s].commit(c, xd, w);
        where_[c] = (r, s);
    }
    let mut out = vec![(0.0, 0.0); cells.len()];
    for (r, segs) in rows.iter().enumerate() {
        for seg in segs {
            for (k, cl) in seg.clusters.iter().enumerate() {
                let end = seg.clusters.get(k + 1).map_or(seg.cells.len(), |n| n.first);
                let mut x = seg.x0 + ((cl.x - seg.x0) / site).round() * site;
                for &(cell, w) in &seg.cells[cl.first..end] {
                    out[cell] = (x, r as f64 * row);
                    x += w;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(x: f64, y: f64, w: f64) -> Rect {
        Rect { x, y, w, h: 10.0 }
    }

    #[test]
    fn single_cell_snaps_to_site() {
        let out = legalize_cells(Die::Bottom, &[cell(12.4, 21.0, 4.0)], 100.0, 100.0, 10.0, 1.0, &[]).unwrap();
        assert_eq!(out, vec![(12.0, 20.0)]);
    }

    #[test]
    fn two_overlapping_cells_split_displacement() {
        // Both want x = 10 with width 4: cluster optimum puts the pair at 8.
        let out = legalize_cells(Die::Bottom, &[cell(10.0, 0.0, 4.0), cell(10.0, 0.0, 4.0)], 100.0, 10.0, 10.0, 1.0, &[]).unwrap();
        assert_eq!(out, vec![(8.0, 0.0), (12.0, 0.0)]);
    }

    #[test]
    fn blockage_is_avoided() {
        let b = Rect { x: 10.0, y: 0.0, w: 20.0, h: 20.0 };
        let out = legalize_cells(Die::Bottom, &[cell(15.0, 0.0, 4.0)], 100.0, 30.0, 10.0, 1.0, &[b]).unwrap();
        let r = Rect { x: out[0].0, y: out[0].1, w: 4.0, h: 10.0 };
        assert!(!r.overlaps(&b));
    }

    #[test]
    fn full_rows_error() {
        let cells: Vec<Rect> = (0..3).map(|_| cell(0.0, 0.0, 6.0)).collect();
        assert!(legalize_cells(Die::Bottom, &cells, 10.0, 20.0, 10.0, 1.0, &[]).is_err());
    }
}
