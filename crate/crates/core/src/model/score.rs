use super::{Design, PinRef, Solution};
use crate::error::{PlaceError, Result};

/// Die assignment from center depths: top iff `z - depth/2 > 0`.
/// The midplane itself belongs to the bottom die.
pub fn derive_partition(z: &[f64], depth: f64) -> Vec<bool> {
    z.iter().map(|&zi| zi - depth / 2.0 > 0.0).collect()
}

/// `max δ - min δ` over the net's instances.
pub fn crossing_indicator(delta: impl IntoIterator<Item = bool>) -> u8 {
    let mut seen = [false; 2];
    for d in delta {
        seen[d as usize] = true;
    }
    (seen[0] && seen[1]) as u8
}

/// Rounds to the nearest integer, ties toward +∞.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Legal pin position of a placed instance.
pub fn pin_position(design: &Design, solution: &Solution, pin: PinRef) -> (f64, f64) {
    let p = &solution.placements[pin.inst];
    let (cx, cy) = solution.center(design, pin.inst);
    let (ox, oy) = design.pin_offset(pin, p.die);
    let (rx, ry) = p.rotation.apply(ox, oy);
    (cx + rx, cy + ry)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreMode {
    /// HBT set must match the crossing nets exactly.
    Strict,
    /// Crossing nets without an HBT are scored as if the terminal sat at
    /// its optimal position; HBTs on non-crossing nets are ignored.
    Diagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Score {
    pub hpwl: f64,
    pub hbt_count: usize,
    pub raw_score: f64,
}

/// Die-to-die HPWL plus HBT cost of a solution.
///
/// Every net contributes the HPWL of its top and bottom partial nets, each
/// including the HBT center when the net crosses dies. When all lengths
/// are half-unit multiples the sum is accumulated in exact integer
/// arithmetic on a doubled grid.
pub fn evaluate_score(design: &Design, solution: &Solution, mode: ScoreMode) -> Result<Score> {
    let mut hbt_of = vec![None; design.nets.len()];
    for t in &solution.hbts {
        if hbt_of[t.net].replace((t.x, t.y)).is_some() && mode == ScoreMode::Strict {
            return Err(PlaceError::DuplicateHbt(design.nets[t.net].name.clone()));
        }
    }
    let exact = design.is_half_unit_exact();
    let mut total2: i128 = 0;
    let mut total = 0.0f64;
    let mut hbt_count = 0;
    for (e, net) in design.nets.iter().enumerate() {
        let crossing = crossing_indicator(net.pins.iter().map(|p| solution.placements[p.inst].die.is_top())) == 1;
        let hbt = match (crossing, hbt_of[e]) {
            (true, Some(t)) => Some((t.0 as f64, t.1 as f64)),
            (true, None) if mode == ScoreMode::Strict => {
                return Err(PlaceError::MissingHbt(net.name.clone()))
            }
            (true, None) => None,
            (false, Some(_)) if mode == ScoreMode::Strict => {
                return Err(PlaceError::UnexpectedHbt(net.name.clone()))
            }
            (false, _) => None,
        };
        if crossing {
            hbt_count += 1;
        }
        let mut boxes = [BoxAcc::default(); 2];
        for &p in &net.pins {
            let (x, y) = pin_position(design, solution, p);
            boxes[solution.placements[p.inst].die.index()].add(x, y);
        }
        if crossing {
            match hbt {
                Some((hx, hy)) => {
                    for b in &mut boxes {
                        b.add(hx, hy);
                    }
                }
                None => {
                    // Diagnostic: terminal at its optimal position.
                    let w = crate::wirelength::bistratal_axis_from_boxes(
                        boxes[1].x_interval(),
                        boxes[0].x_interval(),
                    ) + crate::wirelength::bistratal_axis_from_boxes(
                        boxes[1].y_interval(),
                        boxes[0].y_interval(),
                    );
                    total += w;
                    total2 += (2.0 * w).round() as i128;
                    continue;
                }
            }
        }
        for b in &boxes {
            if b.count > 0 {
                let span = (b.max_x - b.min_x) + (b.max_y - b.min_y);
                total += span;
                if exact {
                    total2 += ((2.0 * b.max_x) as i128 - (2.0 * b.min_x) as i128)
                        + ((2.0 * b.max_y) as i128 - (2.0 * b.min_y) as i128);
                }
            }
        }
    }
    let hpwl = if exact { total2 as f64 / 2.0 } else { total };
    Ok(Score { hpwl, hbt_count, raw_score: hpwl + design.hbt.cost * hbt_count as f64 })
}

#[derive(Clone, Copy, Debug)]
struct BoxAcc {
    count: usize,
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Default for BoxAcc {
    fn default() -> Self {
        BoxAcc {
            count: 0,
            min_x: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            min_y: f64::INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }
}

impl BoxAcc {
    fn add(&mut self, x: f64, y: f64) {
        self.count += 1;
        self.min_x = self.min_x.min(x);
        self.max_x = self.max_x.max(x);
        self.min_y = self.min_y.min(y);
        self.max_y = self.max_y.max(y);
    }

    fn x_interval(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min_x, self.max_x))
    }

    fn y_interval(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min_y, self.max_y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    /// One 1x1 kind with a single pin at its center on both dies.
    pub(crate) fn point_design(n: usize, nets: Vec<Vec<usize>>) -> Design {
        let kind = CellKind {
            name: "P".into(),
            width: 2.0,
            height: 2.0,
            pins: vec![PinDef { name: "o".into(), x: 0.0, y: 0.0 }],
        };
        let tech = [TechProfile { kinds: vec![kind.clone()] }, TechProfile { kinds: vec![kind] }];
        let instances = (0..n).map(|i| Instance { name: format!("i{i}"), kind: 0, is_macro: false }).collect();
        let nets = nets
            .into_iter()
            .enumerate()
            .map(|(e, p)| Net {
                name: format!("n{e}"),
                pins: p.into_iter().map(|inst| PinRef { inst, pin: 0 }).collect(),
            })
            .collect();
        Design::new(
            DieSpec {
                width: 100.0,
                height: 100.0,
                max_util: [1.0, 1.0],
                row_height: [2.0, 2.0],
                site_width: [1.0, 1.0],
            },
            HbtSpec { size: 1.0, spacing: 0.0, cost: 10.0 },
            tech,
            instances,
            nets,
        )
        .unwrap()
    }

    /// Places instance centers at the given points.
    fn place(points: &[(i64, i64, Die)]) -> Solution {
        Solution {
            placements: points
                .iter()
                .map(|&(x, y, die)| Placement { die, x: x - 1, y: y - 1, rotation: Rotation::R0 })
                .collect(),
            hbts: vec![],
        }
    }

    #[test]
    fn partition_is_strict_indicator() {
        assert_eq!(derive_partition(&[3.0], 4.0), vec![true]);
        assert_eq!(derive_partition(&[2.0], 4.0), vec![false]);
        assert_eq!(derive_partition(&[1.0, 3.0, 2.0], 4.0), vec![false, true, false]);
    }

    #[test]
    fn crossing() {
        assert_eq!(crossing_indicator([false, false, false]), 0);
        assert_eq!(crossing_indicator([false, true]), 1);
        assert_eq!(crossing_indicator([true, true, false, true]), 1);
    }

    #[test]
    fn raw_score_formula() {
        // hpwl 100 from one net, three crossing nets with coincident pins.
        let d = point_design(8, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        let mut sol = place(&[
            (0, 0, Die::Top),
            (50, 50, Die::Top),
            (10, 10, Die::Top),
            (10, 10, Die::Bottom),
            (20, 20, Die::Top),
            (20, 20, Die::Bottom),
            (30, 30, Die::Top),
            (30, 30, Die::Bottom),
        ]);
        sol.hbts = vec![Hbt { net: 1, x: 10, y: 10 }, Hbt { net: 2, x: 20, y: 20 }, Hbt { net: 3, x: 30, y: 30 }];
        let s = evaluate_score(&d, &sol, ScoreMode::Strict).unwrap();
        assert_eq!(s.hpwl, 100.0);
        assert_eq!(s.hbt_count, 3);
        assert_eq!(s.raw_score, 130.0);
    }

    #[test]
    fn single_die_reduces_to_2d_hpwl() {
        let d = point_design(3, vec![vec![0, 1, 2]]);
        let sol = place(&[(0, 0, Die::Bottom), (6, 2, Die::Bottom), (3, 9, Die::Bottom)]);
        let s = evaluate_score(&d, &sol, ScoreMode::Strict).unwrap();
        assert_eq!(s.hpwl, 6.0 + 9.0);
        assert_eq!(s.raw_score, s.hpwl);
    }

    #[test]
    fn two_pin_crossing_with_hbt() {
        let d = point_design(2, vec![vec![0, 1]]);
        let mut sol = place(&[(0, 0, Die::Top), (4, 0, Die::Bottom)]);
        sol.hbts = vec![Hbt { net: 0, x: 2, y: 0 }];
        let s = evaluate_score(&d, &sol, ScoreMode::Strict).unwrap();
        assert_eq!(s.hpwl, 4.0);
    }

    #[test]
    fn hbt_mismatch_errors() {
        let d = point_design(2, vec![vec![0, 1]]);
        let sol = place(&[(0, 0, Die::Top), (4, 0, Die::Bottom)]);
        assert!(matches!(evaluate_score(&d, &sol, ScoreMode::Strict), Err(PlaceError::MissingHbt(_))));
        let diag = evaluate_score(&d, &sol, ScoreMode::Diagnostic).unwrap();
        assert_eq!(diag.hpwl, 4.0);

        let mut sol = place(&[(0, 0, Die::Top), (4, 0, Die::Top)]);
        sol.hbts = vec![Hbt { net: 0, x: 2, y: 0 }];
        assert!(matches!(evaluate_score(&d, &sol, ScoreMode::Strict), Err(PlaceError::UnexpectedHbt(_))));
    }

    #[test]
    fn round_half_up_ties() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(-2.5), -2);
        assert_eq!(round_half_up(2.49), 2);
    }
}
