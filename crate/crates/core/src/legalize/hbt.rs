use crate::error::{PlaceError, Result};
use crate::model::{Design, Die, HbtSpec, PinRef, PlacementState};
use crate::wirelength::{interval, optimal_interval};

/// Centers of the optimal HBT regions, one per crossing net, from flat
/// pin positions and per-instance dies. Returns `(net, x, y)`.
pub fn hbt_targets(design: &Design, dies: &[Die], pin_xy: impl Fn(usize) -> (f64, f64)) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for e in 0..design.pins.num_nets() {
        let r = design.pins.net_range(e);
        let die = |p: usize| dies[design.pins.inst[p]];
        let first = die(r.start);
        if !r.clone().any(|p| die(p) != first) {
            continue;
        }
        let side = |d: Die| {
            let ps: Vec<(f64, f64)> = r.clone().filter(|&p| die(p) == d).map(&pin_xy).collect();
            (interval(ps.iter().map(|a| a.0)).unwrap(), interval(ps.iter().map(|a| a.1)).unwrap())
        };
        let (tx, ty) = side(Die::Top);
        let (bx, by) = side(Die::Bottom);
        let ix = optimal_interval(tx, bx);
        let iy = optimal_interval(ty, by);
        out.push((e, (ix.0 + ix.1) / 2.0, (iy.0 + iy.1) / 2.0));
    }
    out
}

/// One HBT per crossing net of `st`, at the center of its optimal region.
pub fn insert_hbts(design: &Design, st: &PlacementState) -> Vec<(usize, f64, f64)> {
    let dies = st.dies();
    hbt_targets(design, &dies, |p| st.pin_xy(design, PinRef { inst: design.pins.inst[p], pin: design.pins.pin[p] }))
}

/// Snaps HBT centers onto the grid of pitch `w'+s'` anchored at the
/// origin, one terminal per grid cell. Terminals are assigned in order of
/// decreasing net degree to the nearest free cell. `degree` is indexed by
/// net. Returns integer centers in input order.
pub fn legalize_hbts(
    hbts: &[(usize, f64, f64)],
    degree: &[usize],
    spec: &HbtSpec,
    width: f64,
    height: f64,
) -> Result<Vec<(usize, i64, i64)>> {
    let pitch = spec.pitch();
    let nx = (width / pitch + 1e-9).floor() as i64;
    let ny = (height / pitch + 1e-9).floor() as i64;
    if (nx * ny).max(0) < hbts.len() as i64 {
        return Err(PlaceError::Infeasible(format!(
            "{} HBTs but only {} grid cells of pitch {pitch}",
            hbts.len(),
            (nx * ny).max(0)
        )));
    }
    let mut order: Vec<usize> = (0..hbts.len()).collect();
    order.sort_by(|&a, &b| degree[hbts[b].0].cmp(&degree[hbts[a].0]).then(hbts[a].0.cmp(&hbts[b].0)));
    let mut used = std::collections::HashSet::new();
    let mut out = vec![(0, 0, 0); hbts.len()];
    for k in order {
        let (net, x, y) = hbts[k];
        let gi = ((x / pitch - 0.5).round() as i64).clamp(0, nx - 1);
        let gj = ((y / pitch - 0.5).round() as i64).clamp(0, ny - 1);
        let center = |i: i64, j: i64| ((i as f64 + 0.5) * pitch, (j as f64 + 0.5) * pitch);
        let dist = |i: i64, j: i64| {
            let (cx, cy) = center(i, j);
            (cx - x).powi(2) + (cy - y).powi(2)
        };
        // Ring search; a ring at Chebyshev radius r holds all cells closer
        // than r·pitch, so stop one ring after the first hit.
        let mut best: Option<(f64, i64, i64)> = None;
        let mut r = 0;
        loop {
            for i in (gi - r).max(0)..=(gi + r).min(nx - 1) {
                for j in (gj - r).max(0)..=(gj + r).min(ny - 1) {
                    if (i - gi).abs() != r && (j - gj).abs() != r {
                        continue;
                    }
                    if used.contains(&(i, j)) {
                        continue;
                    }
                    let dd = dist(i, j);
                    if best.map_or(true, |b| (dd, i, j) < (b.0, b.1, b.2)) {
                        best = Some((dd, i, j));
                    }
                }
            }
            if let Some(b) = best {
                if (r as f64 * pitch).powi(2) > b.0 || r > nx.max(ny) {
                    break;
                }
            }
            r += 1;
        }
        let (_, i, j) = best.unwrap();
        used.insert((i, j));
        let (cx, cy) = center(i, j);
        out[k] = (net, cx.round() as i64, cy.round() as i64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> HbtSpec {
        HbtSpec { size: 2.0, spacing: 1.0, cost: 1.0 }
    }

    #[test]
    fn padded_pitch() {
        assert_eq!(spec().pitch(), 3.0);
    }

    #[test]
    fn single_hbt_snaps_to_nearest_cell() {
        let out = legalize_hbts(&[(0, 4.9, 1.0)], &[2], &spec(), 30.0, 30.0).unwrap();
        // Cell centers at 1.5 + 3k.
        assert_eq!(out, vec![(0, 5, 2)]);
    }

    #[test]
    fn coincident_hbts_separate() {
        let out = legalize_hbts(&[(0, 7.5, 7.5), (1, 7.5, 7.5)], &[2, 3], &spec(), 30.0, 30.0).unwrap();
        let dx = (out[0].1 - out[1].1).abs().max((out[0].2 - out[1].2).abs());
        assert!(dx >= 3);
        // Higher degree keeps the exact spot.
        assert_eq!((out[1].1, out[1].2), (8, 8));
    }

    #[test]
    fn too_many_hbts() {
        let h: Vec<_> = (0..5).map(|e| (e, 1.0, 1.0)).collect();
        assert!(legalize_hbts(&h, &[2; 5], &spec(), 6.0, 6.0).is_err());
    }
}
