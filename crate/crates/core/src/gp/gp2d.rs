use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gp3d::clamp_center;
use super::{
    gamma_for, initial_lambda, lambda_multiplier, precondition, random_fillers, GpConfig, GpOutcome, IterRecord,
    Nesterov, Objective,
};
use crate::density::{filler_spec, Charge, ChargeSet, Cuboid, DensityField, Grid};
use crate::error::{PlaceError, Result};
use crate::model::{Design, Die, PinRef, PlacementState};
use crate::legalize::hbt_targets;
use crate::wirelength::{d2d_wirelength_objective, interval, PinCoords};

/// Planar layers: the two dies and the HBT layer.
const LAYERS: usize = 3;
const HBT_LAYER: usize = 2;

/// Planar objective `Σ_e Ŵ_e + Σ_l λ_l·U_l` with fixed partition and one
/// movable HBT per crossing net. Variables are `[x; m] ++ [y; m]` with
/// objects ordered as instances, fillers, HBTs.
struct Gp2dObjective<'a> {
    design: &'a Design,
    cfg: &'a GpConfig,
    grid: Grid,
    fields: Vec<DensityField>,
    n: usize,
    m: usize,
    /// Layer and footprint per object.
    layer: Vec<usize>,
    size: Vec<(f64, f64)>,
    is_macro: Vec<bool>,
    pins: Vec<usize>,
    pin_die: Vec<Die>,
    offsets: Vec<(f64, f64)>,
    /// Object index of each net's HBT.
    hbt_obj: Vec<Option<usize>>,
    lambda: [f64; LAYERS],
    gamma: f64,
    overflow: [f64; LAYERS],
    wl_norm: [f64; LAYERS],
    density_norm: [f64; LAYERS],
    wl_exact: f64,
}

impl<'a> Gp2dObjective<'a> {
    fn eval_inner(&mut self, v: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (n, m) = (self.n, self.m);
        let d = self.design;
        let (xs, ys) = v.split_at(m);
        let np = d.pins.len();
        let px: Vec<f64> = (0..np).map(|p| xs[d.pins.inst[p]] + self.offsets[p].0).collect();
        let py: Vec<f64> = (0..np).map(|p| ys[d.pins.inst[p]] + self.offsets[p].1).collect();
        let hbt: Vec<Option<(f64, f64)>> = self.hbt_obj.iter().map(|o| o.map(|k| (xs[k], ys[k]))).collect();
        let pc = PinCoords { net_start: &d.pins.net_start, x: &px, y: &py, z: &px, die: &self.pin_die };
        let wl = d2d_wirelength_objective(&pc, &hbt, self.gamma);
        let mut g = vec![[0.0; 3]; m];
        for p in 0..np {
            let i = d.pins.inst[p];
            g[i][0] += wl.grad_x[p];
            g[i][1] += wl.grad_y[p];
        }
        for (e, o) in self.hbt_obj.iter().enumerate() {
            if let Some(k) = *o {
                g[k][0] += wl.hbt_grad[e].0;
                g[k][1] += wl.hbt_grad[e].1;
            }
        }
        self.wl_exact = exact_d2d(&pc, &hbt);
        self.wl_norm = [0.0; LAYERS];
        for i in 0..m {
            self.wl_norm[self.layer[i]] += g[i][0].abs() + g[i][1].abs();
        }

        let mut q = vec![0.0; m];
        let mut energy = 0.0;
        for l in 0..LAYERS {
            let idx: Vec<usize> = (0..m).filter(|&i| self.layer[i] == l).collect();
            let charges: Vec<Charge> = idx
                .iter()
                .map(|&i| {
                    let (w, h) = self.size[i];
                    Charge { cuboid: Cuboid { x: xs[i], y: ys[i], z: 0.5, w, h, d: 1.0 }, weight: 1.0 }
                })
                .collect();
            let is_macro: Vec<bool> = idx.iter().map(|&i| self.is_macro[i]).collect();
            let is_filler: Vec<bool> = idx.iter().map(|&i| i >= n && l != HBT_LAYER).collect();
            let ev = self.fields[l].evaluate(&ChargeSet { charges: &charges, is_macro: &is_macro, is_filler: &is_filler });
            energy += self.lambda[l] * ev.energy;
            self.overflow[l] = ev.overflow;
            self.density_norm[l] = ev.grad.iter().map(|a| a[0].abs() + a[1].abs()).sum();
            for (k, &i) in idx.iter().enumerate() {
                q[i] = charges[k].cuboid.volume();
                g[i][0] += self.lambda[l] * ev.grad[k][0];
                g[i][1] += self.lambda[l] * ev.grad[k][1];
            }
        }
        let lam: Vec<f64> = (0..m).map(|i| self.lambda[self.layer[i]]).collect();
        precondition(&mut g, self.cfg.precond, &lam, &q, &self.pins, &self.is_macro);
        for i in 0..m {
            grad[i] = g[i][0];
            grad[m + i] = g[i][1];
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(PlaceError::NonFinite { iteration: 0, object: "planar gradient".into() });
        }
        Ok(wl.value + energy)
    }
}

impl Objective for Gp2dObjective<'_> {
    fn eval(&mut self, v: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.eval_inner(v, grad)
    }

    fn project(&self, v: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            let (w, h) = self.size[i];
            v[i] = clamp_center(v[i], w, self.grid.dx());
            v[m + i] = clamp_center(v[m + i], h, self.grid.dy());
        }
    }

    fn probe_length(&self) -> f64 {
        (self.grid.wb + self.grid.hb) / 2.0
    }

    fn max_move(&self) -> f64 {
        (self.grid.wb + self.grid.hb) / 2.0
    }
}

/// Exact D2D HPWL with the given HBT positions.
fn exact_d2d(pc: &PinCoords, hbt: &[Option<(f64, f64)>]) -> f64 {
    let span = |iv: Option<(f64, f64)>| iv.map_or(0.0, |(a, b)| b - a);
    let mut total = 0.0;
    for (e, t) in hbt.iter().enumerate().take(pc.num_nets()) {
        let r = pc.net_start[e]..pc.net_start[e + 1];
        match *t {
            None => {
                total += span(interval(r.clone().map(|p| pc.x[p]))) + span(interval(r.map(|p| pc.y[p])));
            }
            Some((hx, hy)) => {
                for side in [Die::Top, Die::Bottom] {
                    let sel = || r.clone().filter(move |&p| pc.die[p] == side);
                    total += span(interval(sel().map(|p| pc.x[p]).chain([hx])))
                        + span(interval(sel().map(|p| pc.y[p]).chain([hy])));
                }
            }
        }
    }
    total
}

/// Planar multi-die global placement with the partition fixed by `init`
/// (every `z` on a die plane). Each die and the HBT layer get their own
/// density field and weight; HBTs start at the centers of their optimal
/// regions. Fillers start at `fillers` (top die first, as returned by the
/// 3D placement) when the counts match, and uniformly at random otherwise.
pub fn run_gp2d_multi(
    design: &Design,
    init: &PlacementState,
    fillers: Option<&[(f64, f64)]>,
    cfg: &GpConfig,
) -> Result<GpOutcome> {
    let n = design.num_instances();
    let dies = init.dies();
    let np = design.pins.len();
    let planar = cfg.grid_xy.unwrap_or_else(|| Grid::planar_size(n));
    let grid = Grid::with_depth(design.die.width, design.die.height, planar, planar, 1, 1.0);

    let mut layer: Vec<usize> = dies.iter().map(|d| d.index()).collect();
    let mut size: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (w, h) = design.dims(i, dies[i]);
            init.rotation[i].footprint(w, h)
        })
        .collect();
    let mut is_macro: Vec<bool> = design.instances.iter().map(|x| x.is_macro).collect();
    let mut pins: Vec<usize> = (0..n).map(|i| design.pin_degree(i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x2545_f491_4f6c_dd1d);
    let mut filler_xy = Vec::new();
    let mut specs = Vec::new();
    for d in [Die::Top, Die::Bottom] {
        let cells: Vec<usize> = (0..n).filter(|&i| !is_macro[i]).collect();
        let avg = if cells.is_empty() {
            design.die.area() / 64.0
        } else {
            cells.iter().map(|&i| design.area(i, d)).sum::<f64>() / cells.len() as f64
        };
        // Planar fillers: depth 1, so the volume rule reduces to area.
        specs.push((d, filler_spec(design.die.width, design.die.height, 2.0, design.die.max_util[d.index()], avg)));
    }
    let total: usize = specs.iter().map(|(_, f)| f.count).sum();
    let mut start = match fillers {
        Some(f) if f.len() == total => f.to_vec(),
        _ => random_fillers(total, grid.dx(), grid.dy(), &mut rng),
    }
    .into_iter();
    for (d, f) in specs {
        for xy in start.by_ref().take(f.count) {
            layer.push(d.index());
            size.push((f.width, f.height));
            is_macro.push(false);
            pins.push(0);
            filler_xy.push(xy);
        }
    }

    let pin_die: Vec<Die> = (0..np).map(|p| dies[design.pins.inst[p]]).collect();
    let offsets: Vec<(f64, f64)> = (0..np)
        .map(|p| {
            let pr = PinRef { inst: design.pins.inst[p], pin: design.pins.pin[p] };
            let (ox, oy) = design.pin_offset(pr, dies[pr.inst]);
            init.rotation[pr.inst].apply(ox, oy)
        })
        .collect();
    let side = design.hbt.pitch();
    let mut hbt_obj = vec![None; design.nets.len()];
    let hbt_xy = hbt_targets(design, &dies, |p| {
        init.pin_xy(design, PinRef { inst: design.pins.inst[p], pin: design.pins.pin[p] })
    });
    for (k, &(e, _, _)) in hbt_xy.iter().enumerate() {
        hbt_obj[e] = Some(n + filler_xy.len() + k);
    }
    for _ in &hbt_xy {
        layer.push(HBT_LAYER);
        size.push((side, side));
        is_macro.push(false);
        pins.push(2);
    }
    let m = layer.len();
    let mut obj = Gp2dObjective {
        design,
        cfg,
        grid,
        fields: (0..LAYERS).map(|_| DensityField::new(grid)).collect(),
        n,
        m,
        layer,
        size,
        is_macro,
        pins,
        pin_die,
        offsets,
        hbt_obj,
        lambda: [0.0; LAYERS],
        gamma: (grid.wb + grid.hb) / 2.0,
        overflow: [0.0; LAYERS],
        wl_norm: [0.0; LAYERS],
        density_norm: [0.0; LAYERS],
        wl_exact: 0.0,
    };
    let mut x0 = vec![0.0; 2 * m];
    for i in 0..n {
        x0[i] = init.x[i];
        x0[m + i] = init.y[i];
    }
    for (k, &(x, y)) in filler_xy.iter().enumerate() {
        x0[n + k] = x;
        x0[m + n + k] = y;
    }
    let hb0 = n + filler_xy.len();
    for (k, &(_, x, y)) in hbt_xy.iter().enumerate() {
        x0[hb0 + k] = x;
        x0[m + hb0 + k] = y;
    }
    let mut v0 = x0.clone();
    obj.project(&mut v0);
    let mut scratch = vec![0.0; 2 * m];
    obj.eval(&v0, &mut scratch)?;
    for l in 0..LAYERS {
        obj.lambda[l] = initial_lambda(obj.wl_norm[l], obj.density_norm[l], cfg.warm_lambda_scale);
    }
    let bin = (grid.wb + grid.hb) / 2.0;
    let worst = |o: &[f64; LAYERS]| o.iter().copied().fold(0.0, f64::max);
    obj.gamma = gamma_for(worst(&obj.overflow), cfg.stop_overflow, bin, cfg.gamma_range);

    let mut opt = Nesterov::new(x0, &mut obj)?;
    let mut log = Vec::new();
    let crossing = hbt_xy.len();
    let mut prev = obj.overflow;
    let mut best = (f64::INFINITY, opt.v.clone());
    let mut streak = 0;
    let (mut converged, mut diverged) = (false, false);
    let mut iters = 0;
    for it in 0..cfg.max_iters {
        iters = it;
        let ovf = worst(&obj.overflow);
        log.push(IterRecord { iter: it, wl: obj.wl_exact, hbts: crossing, overflow: ovf });
        if ovf < best.0 {
            best = (ovf, opt.v.clone());
            streak = 0;
        } else if ovf > best.0 + 0.05 {
            streak += 1;
        }
        if ovf <= cfg.stop_overflow && it >= cfg.min_iters {
            converged = true;
            break;
        }
        if streak >= cfg.divergence_window {
            log::warn!("planar placement diverging at iteration {it}; using best state");
            diverged = true;
            break;
        }
        obj.gamma = gamma_for(ovf, cfg.stop_overflow, bin, cfg.gamma_range);
        for l in 0..LAYERS {
            obj.lambda[l] *= lambda_multiplier(prev[l], obj.overflow[l], cfg.mu_range);
        }
        prev = obj.overflow;
        match opt.step(&mut obj) {
            Ok(true) => {}
            Ok(false) => break,
            Err(PlaceError::NonFinite { object, .. }) => return Err(PlaceError::NonFinite { iteration: it, object }),
            Err(e) => return Err(e),
        }
    }
    let cur = worst(&obj.overflow);
    let (v, overflow) = if diverged || !converged && best.0 < cur { (best.1, best.0) } else { (opt.v.clone(), cur) };
    let mut st = init.clone();
    for i in 0..n {
        st.x[i] = v[i];
        st.y[i] = v[m + i];
    }
    let hbts = hbt_xy.iter().enumerate().map(|(k, &(e, _, _))| (e, v[hb0 + k], v[m + hb0 + k])).collect();
    log::info!("planar placement: {} iterations, overflow {:.4}", iters + 1, overflow);
    Ok(GpOutcome {
        state: st,
        fillers: Vec::new(),
        hbts,
        log,
        overflow,
        iterations: iters + 1,
        converged,
        diverged,
        repaired: 0,
    })
}
