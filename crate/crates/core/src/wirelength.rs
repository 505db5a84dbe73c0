//! Wirelength models: exact partial-net HPWL, the weighted-average (WA)
//! smoothing, the optimal HBT region and the bistratal wirelength used by
//! 3D global placement, plus its finite-difference depth gradient.

use crate::model::Die;
use crate::par;

/// Nets per parallel work unit. Fixed so results do not depend on the
/// number of threads.
const NET_CHUNK: usize = 512;

/// `max - min` of a coordinate list, 0 when empty.
pub fn partial_hpwl(coords: &[f64]) -> f64 {
    match interval(coords.iter().copied()) {
        Some((lo, hi)) => hi - lo,
        None => 0.0,
    }
}

/// Bounding interval of a coordinate stream.
pub fn interval(coords: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    coords.into_iter().fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// WA smoothing of `max - min` and its gradient.
pub fn wa_smooth(coords: &[f64], gamma: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; coords.len()];
    let v = wa_accumulate(coords.len(), |k| coords[k], gamma, |k, g| grad[k] += g);
    (v, grad)
}

/// WA smoothing over `n` values given by `at`; gradient contributions are
/// reported through `emit(k, d)`. Exponents are shifted by the extrema so
/// nothing overflows.
fn wa_accumulate(n: usize, at: impl Fn(usize) -> f64, gamma: f64, mut emit: impl FnMut(usize, f64)) -> f64 {
    if n < 2 {
        for k in 0..n {
            emit(k, 0.0);
        }
        return 0.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let v = at(k);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (mut sa, mut sxa, mut sb, mut sxb) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let v = at(k);
        let a = ((v - hi) / gamma).exp();
        let b = ((lo - v) / gamma).exp();
        sa += a;
        sxa += v * a;
        sb += b;
        sxb += v * b;
    }
    let plus = sxa / sa;
    let minus = sxb / sb;
    for k in 0..n {
        let v = at(k);
        let a = ((v - hi) / gamma).exp();
        let b = ((lo - v) / gamma).exp();
        let dp = a / sa * (1.0 + (v - plus) / gamma);
        let dm = b / sb * (1.0 - (v - minus) / gamma);
        emit(k, dp - dm);
    }
    plus - minus
}

/// Optimal HBT interval along one axis given the top and bottom partial
/// net intervals. Any HBT coordinate inside it minimizes the sum of the
/// two partial spans.
pub fn optimal_interval(top: (f64, f64), bottom: (f64, f64)) -> (f64, f64) {
    let a = top.0.max(bottom.0);
    let b = top.1.min(bottom.1);
    (a.min(b), a.max(b))
}

/// Bistratal wirelength along one axis from the two partial intervals.
///
/// With both dies present this is `max(p, p⁺ + p⁻)`: the partial spans
/// when the boxes overlap (the HBT sits in the overlap), otherwise the full
/// span. An empty side contributes nothing.
pub fn bistratal_axis_from_boxes(top: Option<(f64, f64)>, bottom: Option<(f64, f64)>) -> f64 {
    match (top, bottom) {
        (None, None) => 0.0,
        (Some((lo, hi)), None) | (None, Some((lo, hi))) => hi - lo,
        (Some(t), Some(b)) => {
            let full = t.1.max(b.1) - t.0.min(b.0);
            full.max((t.1 - t.0) + (b.1 - b.0))
        }
    }
}

/// Bistratal wirelength along one axis from per-pin coordinates and dies.
pub fn bistratal_axis(coords: &[f64], dies: &[Die]) -> f64 {
    let top = interval(coords.iter().zip(dies).filter(|(_, d)| d.is_top()).map(|(&c, _)| c));
    let bottom = interval(coords.iter().zip(dies).filter(|(_, d)| !d.is_top()).map(|(&c, _)| c));
    bistratal_axis_from_boxes(top, bottom)
}

/// Flat pin coordinates of a netlist, net by net.
#[derive(Clone, Copy, Debug)]
pub struct PinCoords<'a> {
    /// `net_start[e]..net_start[e + 1]` are the pins of net `e`.
    pub net_start: &'a [usize],
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub die: &'a [Die],
}

impl PinCoords<'_> {
    pub fn num_nets(&self) -> usize {
        self.net_start.len().saturating_sub(1)
    }

    fn range(&self, e: usize) -> std::ops::Range<usize> {
        self.net_start[e]..self.net_start[e + 1]
    }
}

/// Smoothed 3D wirelength objective with per-pin gradients.
#[derive(Clone, Debug, Default)]
pub struct WlEval {
    /// `Σ Ŵ_Bi + α Σ p̂(z)`.
    pub value: f64,
    /// Smoothed bistratal part alone.
    pub bistratal: f64,
    /// Smoothed z-span part alone (not yet multiplied by α).
    pub z_span: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// Gradient of `Σ p̂(z)` (the HBT-count proxy), without α.
    pub grad_z_hbt: Vec<f64>,
}

/// Exact bistratal wirelength of all nets.
pub fn exact_bistratal_total(pc: &PinCoords) -> f64 {
    (0..pc.num_nets())
        .map(|e| {
            let r = pc.range(e);
            bistratal_axis(&pc.x[r.clone()], &pc.die[r.clone()]) + bistratal_axis(&pc.y[r.clone()], &pc.die[r])
        })
        .sum()
}

/// Smoothed bistratal objective of one axis of one net. The branch
/// (full span or two partial spans) is picked from exact extents and then
/// smoothed with WA.
fn bistratal_axis_smooth(c: &[f64], die: &[Die], gamma: f64, grad: &mut [f64]) -> f64 {
    let top = interval(c.iter().zip(die).filter(|(_, d)| d.is_top()).map(|(&v, _)| v));
    let bottom = interval(c.iter().zip(die).filter(|(_, d)| !d.is_top()).map(|(&v, _)| v));
    let split = match (top, bottom) {
        (Some(t), Some(b)) => (t.1 - t.0) + (b.1 - b.0) > t.1.max(b.1) - t.0.min(b.0),
        _ => false,
    };
    if !split {
        return wa_accumulate(c.len(), |k| c[k], gamma, |k, g| grad[k] += g);
    }
    let mut v = 0.0;
    for side in [Die::Top, Die::Bottom] {
        let idx: Vec<usize> = (0..c.len()).filter(|&k| die[k] == side).collect();
        v += wa_accumulate(idx.len(), |k| c[idx[k]], gamma, |k, g| grad[idx[k]] += g);
    }
    v
}

/// Smoothed objective `Σ Ŵ_Bi(e) + α Σ p̂_e(z)` and its planar and depth
/// gradients at pin level.
pub fn gp_wirelength_objective(pc: &PinCoords, gamma: f64, alpha: f64) -> WlEval {
    let n = pc.x.len();
    let mut out = WlEval {
        grad_x: vec![0.0; n],
        grad_y: vec![0.0; n],
        grad_z_hbt: vec![0.0; n],
        ..Default::default()
    };
    let chunks = par::ranges(pc.num_nets(), NET_CHUNK);
    // Pin ranges of consecutive nets are contiguous, so each chunk owns a
    // disjoint slice of the gradient arrays.
    let mut work = Vec::with_capacity(chunks.len());
    let (mut gx, mut gy, mut gz) = (&mut out.grad_x[..], &mut out.grad_y[..], &mut out.grad_z_hbt[..]);
    for r in chunks {
        let len = pc.net_start[r.end] - pc.net_start[r.start];
        let (a, ra) = gx.split_at_mut(len);
        let (b, rb) = gy.split_at_mut(len);
        let (c, rc) = gz.split_at_mut(len);
        gx = ra;
        gy = rb;
        gz = rc;
        work.push((r, a, b, c));
    }
    let sums = par::map(work, |(nets, gx, gy, gz)| {
        let base = pc.net_start[nets.start];
        let (mut bi, mut zs) = (0.0, 0.0);
        for e in nets {
            let r = pc.range(e);
            let l = r.start - base..r.end - base;
            let die = &pc.die[r.clone()];
            bi += bistratal_axis_smooth(&pc.x[r.clone()], die, gamma, &mut gx[l.clone()]);
            bi += bistratal_axis_smooth(&pc.y[r.clone()], die, gamma, &mut gy[l.clone()]);
            if alpha != 0.0 {
                let z = &pc.z[r];
                let gzl = &mut gz[l];
                zs += wa_accumulate(z.len(), |k| z[k], gamma, |k, g| gzl[k] += g);
            }
        }
        (bi, zs)
    });
    for (bi, zs) in sums {
        out.bistratal += bi;
        out.z_span += zs;
    }
    out.value = out.bistratal + alpha * out.z_span;
    out
}

/// Smoothed die-to-die objective for planar multi-die placement with
/// explicit HBTs.
#[derive(Clone, Debug, Default)]
pub struct D2dEval {
    pub value: f64,
    /// Per-pin gradients.
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// Per-net HBT gradients (zero for nets without an HBT).
    pub hbt_grad: Vec<(f64, f64)>,
}

/// `Σ_e WA(ê⁺) + WA(ê⁻)` where a net's HBT joins both partial nets. Nets
/// without an HBT are smoothed as a single pin set. `pc.z` is unused.
pub fn d2d_wirelength_objective(pc: &PinCoords, hbt: &[Option<(f64, f64)>], gamma: f64) -> D2dEval {
    let n = pc.x.len();
    let mut out = D2dEval {
        grad_x: vec![0.0; n],
        grad_y: vec![0.0; n],
        hbt_grad: vec![(0.0, 0.0); pc.num_nets()],
        ..Default::default()
    };
    let mut idx = Vec::new();
    for e in 0..pc.num_nets() {
        let r = pc.range(e);
        let Some((hx, hy)) = hbt[e] else {
            for (c, g) in [(pc.x, &mut out.grad_x), (pc.y, &mut out.grad_y)] {
                let c = &c[r.clone()];
                let g = &mut g[r.clone()];
                out.value += wa_accumulate(c.len(), |k| c[k], gamma, |k, d| g[k] += d);
            }
            continue;
        };
        for side in [Die::Top, Die::Bottom] {
            idx.clear();
            idx.extend(r.clone().filter(|&p| pc.die[p] == side));
            let m = idx.len();
            let mut th = (0.0, 0.0);
            let at = |c: &[f64], h: f64, k: usize| if k < m { c[idx[k]] } else { h };
            out.value += wa_accumulate(m + 1, |k| at(pc.x, hx, k), gamma, |k, d| {
                if k < m {
                    out.grad_x[idx[k]] += d
                } else {
                    th.0 += d
                }
            });
            out.value += wa_accumulate(m + 1, |k| at(pc.y, hy, k), gamma, |k, d| {
                if k < m {
                    out.grad_y[idx[k]] += d
                } else {
                    th.1 += d
                }
            });
            out.hbt_grad[e].0 += th.0;
            out.hbt_grad[e].1 += th.1;
        }
    }
    out
}

/// Per-die extent of one axis keeping the two smallest and two largest
/// values (with multiplicity) so a single pin can be removed in O(1).
#[derive(Clone, Copy, Debug)]
pub struct Extent {
    pub count: usize,
    pub min1: f64,
    pub min2: f64,
    pub max1: f64,
    pub max2: f64,
}

impl Default for Extent {
    fn default() -> Self {
        Extent {
            count: 0,
            min1: f64::INFINITY,
            min2: f64::INFINITY,
            max1: f64::NEG_INFINITY,
            max2: f64::NEG_INFINITY,
        }
    }
}

impl Extent {
    pub fn add(&mut self, v: f64) {
        self.count += 1;
        if v < self.min1 {
            self.min2 = self.min1;
            self.min1 = v;
        } else if v < self.min2 {
            self.min2 = v;
        }
        if v > self.max1 {
            self.max2 = self.max1;
            self.max1 = v;
        } else if v > self.max2 {
            self.max2 = v;
        }
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min1, self.max1))
    }

    /// Interval after removing one occurrence of `v`.
    pub fn without(&self, v: f64) -> Option<(f64, f64)> {
        if self.count <= 1 {
            return None;
        }
        let lo = if v == self.min1 { self.min2 } else { self.min1 };
        let hi = if v == self.max1 { self.max2 } else { self.max1 };
        Some((lo, hi))
    }
}

fn with_point(iv: Option<(f64, f64)>, v: f64) -> Option<(f64, f64)> {
    Some(match iv {
        None => (v, v),
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
    })
}

/// Bistratal wirelength (both axes) of one net with pin `k` forced onto
/// `die`, recomputed from scratch.
fn bistratal_with_pin_on(c: &PinCoords, r: std::ops::Range<usize>, k: usize, die: Die) -> f64 {
    let mut iv = [[None; 2]; 2];
    for p in r {
        let d = if p == k { die } else { c.die[p] };
        iv[0][d.index()] = with_point(iv[0][d.index()], c.x[p]);
        iv[1][d.index()] = with_point(iv[1][d.index()], c.y[p]);
    }
    bistratal_axis_from_boxes(iv[0][1], iv[0][0]) + bistratal_axis_from_boxes(iv[1][1], iv[1][0])
}

/// Finite-difference depth gradient of `Σ W_Bi` per pin:
/// `(4/d_z)·(W_Bi(pin on top) - W_Bi(pin on bottom))` with planar
/// coordinates held fixed. Reference version, quadratic in net degree.
pub fn fd_z_gradient_naive(pc: &PinCoords, depth: f64) -> Vec<f64> {
    let mut g = vec![0.0; pc.x.len()];
    for e in 0..pc.num_nets() {
        let r = pc.range(e);
        for k in r.clone() {
            let up = bistratal_with_pin_on(pc, r.clone(), k, Die::Top);
            let down = bistratal_with_pin_on(pc, r.clone(), k, Die::Bottom);
            g[k] = 4.0 / depth * (up - down);
        }
    }
    g
}

/// Same gradient as [`fd_z_gradient_naive`] in time linear in the pin
/// count, using second extrema to remove a pin from its die.
pub fn fd_z_gradient_incremental(pc: &PinCoords, depth: f64) -> Vec<f64> {
    let mut g = vec![0.0; pc.x.len()];
    let chunks = par::ranges(pc.num_nets(), NET_CHUNK);
    let mut work = Vec::with_capacity(chunks.len());
    let mut rest = &mut g[..];
    for r in chunks {
        let (a, b) = rest.split_at_mut(pc.net_start[r.end] - pc.net_start[r.start]);
        rest = b;
        work.push((r, a));
    }
    par::map(work, |(nets, out)| {
        let base = pc.net_start[nets.start];
        for e in nets {
            let r = pc.range(e);
            let mut ex = [Extent::default(); 2];
            let mut ey = [Extent::default(); 2];
            for p in r.clone() {
                ex[pc.die[p].index()].add(pc.x[p]);
                ey[pc.die[p].index()].add(pc.y[p]);
            }
            let full = |ex: &[Extent; 2], ey: &[Extent; 2]| {
                bistratal_axis_from_boxes(ex[1].interval(), ex[0].interval())
                    + bistratal_axis_from_boxes(ey[1].interval(), ey[0].interval())
            };
            let here = full(&ex, &ey);
            for k in r {
                let d = pc.die[k];
                let (s, o) = (d.index(), d.other().index());
                let mut ix = [None; 2];
                let mut iy = [None; 2];
                ix[s] = ex[s].without(pc.x[k]);
                iy[s] = ey[s].without(pc.y[k]);
                ix[o] = with_point(ex[o].interval(), pc.x[k]);
                iy[o] = with_point(ey[o].interval(), pc.y[k]);
                let moved = bistratal_axis_from_boxes(ix[1], ix[0]) + bistratal_axis_from_boxes(iy[1], iy[0]);
                let (up, down) = if d.is_top() { (here, moved) } else { (moved, here) };
                out[k - base] = 4.0 / depth * (up - down);
            }
        }
    });
    g
}

/// Rescales the depth gradient to the planar gradient magnitude and adds
/// the HBT-count term: `(‖gx‖₁ + ‖gy‖₁)/(2‖gz‖₁)·gz + α·gz_hbt`.
pub fn normalize_z_gradient(gx: &[f64], gy: &[f64], gz: &[f64], gz_hbt: &[f64], alpha: f64) -> Vec<f64> {
    let l1 = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>();
    let nz = l1(gz);
    let s = if nz > 0.0 { (l1(gx) + l1(gy)) / (2.0 * nz) } else { 0.0 };
    gz.iter().zip(gz_hbt).map(|(&a, &b)| s * a + alpha * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dies(bits: &[u8]) -> Vec<Die> {
        bits.iter().map(|&b| Die::from_delta(b == 1)).collect()
    }

    #[test]
    fn partial_spans() {
        assert_eq!(partial_hpwl(&[]), 0.0);
        assert_eq!(partial_hpwl(&[3.0]), 0.0);
        assert_eq!(partial_hpwl(&[3.0, -1.0, 2.0]), 4.0);
    }

    #[test]
    fn wa_two_points() {
        // Closed form for two points at distance d: d·tanh(d/2γ).
        let (v, g) = wa_smooth(&[0.0, 10.0], 1.0);
        let oracle = 10.0 * (5.0f64).tanh();
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        assert!((v - 9.9991).abs() < 1e-4);
        assert!((g[0] + g[1]).abs() < 1e-12);
    }

    #[test]
    fn wa_gradient_matches_central_difference() {
        let c = [1.0, 4.5, -2.0, 3.3, 4.4];
        let (_, g) = wa_smooth(&c, 0.7);
        for k in 0..c.len() {
            let h = 1e-6;
            let mut p = c;
            let mut m = c;
            p[k] += h;
            m[k] -= h;
            let fd = (wa_smooth(&p, 0.7).0 - wa_smooth(&m, 0.7).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "pin {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn wa_survives_large_coordinates() {
        let (v, g) = wa_smooth(&[1e6, 1e6 + 2000.0], 0.01);
        assert!((v - 2000.0).abs() < 1e-9);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn bistratal_overlapping_and_disjoint() {
        // Overlapping boxes: HBT sits in the overlap.
        assert_eq!(bistratal_axis(&[0.0, 4.0, 1.0, 3.0], &dies(&[1, 1, 0, 0])), 4.0 + 2.0);
        // Disjoint boxes: full span.
        assert_eq!(bistratal_axis(&[0.0, 1.0, 3.0, 4.0], &dies(&[1, 1, 0, 0])), 4.0);
        assert_eq!(bistratal_axis(&[0.0, 1.0, 3.0], &dies(&[1, 1, 1])), 3.0);
    }

    #[test]
    fn optimal_interval_cases() {
        assert_eq!(optimal_interval((0.0, 1.0), (3.0, 4.0)), (1.0, 3.0));
        assert_eq!(optimal_interval((0.0, 4.0), (1.0, 3.0)), (1.0, 3.0));
        assert_eq!(optimal_interval((0.0, 2.0), (1.0, 5.0)), (1.0, 2.0));
    }

    fn coords<'a>(ns: &'a [usize], x: &'a [f64], y: &'a [f64], z: &'a [f64], d: &'a [Die]) -> PinCoords<'a> {
        PinCoords { net_start: ns, x, y, z, die: d }
    }

    #[test]
    fn incremental_fd_gradient_equals_naive() {
        let ns = [0, 4, 6, 11];
        let x = [0.0, 4.0, 1.0, 3.0, 2.0, 2.0, 5.0, 1.0, 1.0, 9.0, 5.0];
        let y = [1.0, 1.0, 7.0, 0.0, 3.0, 8.0, 2.0, 2.0, 6.0, 0.0, 6.0];
        let z = [0.0; 11];
        let d = dies(&[1, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0]);
        let pc = coords(&ns, &x, &y, &z, &d);
        assert_eq!(fd_z_gradient_naive(&pc, 8.0), fd_z_gradient_incremental(&pc, 8.0));
    }

    #[test]
    fn normalization_example() {
        let g = normalize_z_gradient(&[2.0, 0.0], &[0.0, 2.0], &[1.0, 1.0], &[0.0, 0.0], 0.0);
        assert_eq!(g, vec![1.0, 1.0]);
        let g = normalize_z_gradient(&[2.0], &[1.0], &[0.0], &[0.5], 2.0);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn objective_gradient_matches_central_difference() {
        let ns = [0, 3, 7];
        let mut x = vec![0.0, 4.0, 1.5, 3.0, 2.0, 2.2, 5.0];
        let y = vec![1.0, 1.0, 7.0, 0.0, 3.0, 8.0, 2.0];
        let z = vec![1.0, 3.0, 2.0, 1.0, 3.0, 3.0, 2.5];
        let d = dies(&[1, 1, 0, 0, 1, 0, 0]);
        let ev = gp_wirelength_objective(&coords(&ns, &x, &y, &z, &d), 0.5, 0.3);
        for k in 0..x.len() {
            let h = 1e-6;
            x[k] += h;
            let p = gp_wirelength_objective(&coords(&ns, &x, &y, &z, &d), 0.5, 0.3).value;
            x[k] -= 2.0 * h;
            let m = gp_wirelength_objective(&coords(&ns, &x, &y, &z, &d), 0.5, 0.3).value;
            x[k] += h;
            assert!(((p - m) / (2.0 * h) - ev.grad_x[k]).abs() < 1e-5);
        }
    }
}
