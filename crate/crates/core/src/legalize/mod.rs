//! Die-by-die legalization of macros, standard cells and HBTs.

mod cells;
mod hbt;
mod macros;

use serde::Serialize;

pub use cells::legalize_cells;
pub use hbt::{hbt_targets, insert_hbts, legalize_hbts};
pub use macros::{legalize_macros, Rect};

use crate::error::Result;
use crate::model::{round_half_up, Design, Die, Hbt, Placement, PlacementState, Solution};

/// Displacements introduced by legalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LegalStats {
    pub max_macro_displacement: f64,
    pub avg_cell_displacement: f64,
    pub max_cell_displacement: f64,
    pub max_hbt_displacement: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Legalizes a partitioned state into a solution. `hbts` gives the
/// preferred terminal center per crossing net; crossing nets missing from
/// it use their optimal-region center. The partition is preserved.
pub fn legalize(design: &Design, st: &PlacementState, hbts: &[(usize, f64, f64)]) -> Result<(Solution, LegalStats)> {
    let n = design.num_instances();
    let dies = st.dies();
    let footprint = |i: usize| {
        let (w, h) = design.dims(i, dies[i]);
        st.rotation[i].footprint(w, h)
    };
    let spec = &design.die;
    let per_die = crate::par::map(Die::BOTH.to_vec(), |die| -> Result<Vec<(usize, f64, f64)>> {
        let d = die.index();
        let (site, row) = (spec.site_width[d], spec.row_height[d]);
        let mac: Vec<usize> = (0..n).filter(|&i| dies[i] == die && design.instances[i].is_macro).collect();
        let rects: Vec<Rect> = mac
            .iter()
            .map(|&i| {
                let (w, h) = footprint(i);
                Rect { x: st.x[i] - w / 2.0, y: st.y[i] - h / 2.0, w, h }
            })
            .collect();
        let legal_m = legalize_macros(&rects, spec.width, spec.height, site, row)?;
        let blocks: Vec<Rect> = rects.iter().zip(&legal_m).map(|(r, &(x, y))| Rect { x, y, ..*r }).collect();
        let cel: Vec<usize> = (0..n).filter(|&i| dies[i] == die && !design.instances[i].is_macro).collect();
        let crects: Vec<Rect> = cel
            .iter()
            .map(|&i| {
                let (w, h) = footprint(i);
                Rect { x: st.x[i] - w / 2.0, y: st.y[i] - h / 2.0, w, h }
            })
            .collect();
        let legal_c = legalize_cells(die, &crects, spec.width, spec.height, row, site, &blocks)?;
        let mut out: Vec<(usize, f64, f64)> = mac.iter().zip(legal_m).map(|(&i, (x, y))| (i, x, y)).collect();
        out.extend(cel.iter().zip(legal_c).map(|(&i, (x, y))| (i, x, y)));
        Ok(out)
    });
    let mut placements = vec![Placement { die: Die::Bottom, x: 0, y: 0, rotation: Default::default() }; n];
    let mut stats = LegalStats::default();
    let mut cell_sum = 0.0;
    let mut cells = 0usize;
    for res in per_die {
        for (i, x, y) in res? {
            let (w, h) = footprint(i);
            let disp = dist((x + w / 2.0, y + h / 2.0), (st.x[i], st.y[i]));
            if design.instances[i].is_macro {
                stats.max_macro_displacement = stats.max_macro_displacement.max(disp);
            } else {
                cell_sum += disp;
                cells += 1;
                stats.max_cell_displacement = stats.max_cell_displacement.max(disp);
            }
            placements[i] = Placement { die: dies[i], x: round_half_up(x), y: round_half_up(y), rotation: st.rotation[i] };
        }
    }
    stats.avg_cell_displacement = if cells > 0 { cell_sum / cells as f64 } else { 0.0 };

    let mut preferred = vec![None; design.nets.len()];
    for &(e, x, y) in hbts {
        preferred[e] = Some((x, y));
    }
    let targets: Vec<(usize, f64, f64)> = insert_hbts(design, st)
        .into_iter()
        .map(|(e, x, y)| {
            let (px, py) = preferred[e].unwrap_or((x, y));
            (e, px, py)
        })
        .collect();
    let degree: Vec<usize> = design.nets.iter().map(|n| n.pins.len()).collect();
    let legal_h = legalize_hbts(&targets, &degree, &design.hbt, spec.width, spec.height)?;
    for (t, h) in targets.iter().zip(&legal_h) {
        stats.max_hbt_displacement = stats.max_hbt_displacement.max(dist((t.1, t.2), (h.1 as f64, h.2 as f64)));
    }
    let hbts = legal_h.into_iter().map(|(net, x, y)| Hbt { net, x, y }).collect();
    Ok((Solution { placements, hbts }, stats))
}
