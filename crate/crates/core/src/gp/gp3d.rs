use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    finalize_partition, gamma_for, hbt_alpha, initial_lambda, lambda_multiplier, plan_grid, precondition,
    random_fillers, GpConfig, GpOutcome, IterRecord, Nesterov, Objective,
};
use crate::density::{dynamic_size, filler_spec, filler_z, Charge, ChargeSet, Cuboid, DensityField, Grid};
use crate::error::{PlaceError, Result};
use crate::model::{Design, Die, PlacementState};
use crate::wirelength::{
    exact_bistratal_total, fd_z_gradient_incremental, gp_wirelength_objective, normalize_z_gradient, PinCoords,
};

/// Norms and statistics of the last evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct EvalStats {
    pub overflow: f64,
    pub wl_norm: f64,
    pub density_norm: f64,
    pub wl_exact: f64,
    pub hbts: usize,
}

/// The 3D objective `Σ Ŵ_e + λ·U` over instances and fillers.
///
/// Variables are laid out as `[x; m] ++ [y; m] ++ [z; n]` for `n`
/// instances and `m - n` fillers.
pub(crate) struct Gp3dObjective<'a> {
    design: &'a Design,
    cfg: &'a GpConfig,
    pub grid: Grid,
    field: DensityField,
    n: usize,
    m: usize,
    /// Rotated footprint per instance and die.
    dims: Vec<[(f64, f64); 2]>,
    /// Rotated pin offset per flat pin and die.
    offsets: Vec<[(f64, f64); 2]>,
    filler_dims: Vec<(f64, f64)>,
    filler_z: Vec<f64>,
    is_macro: Vec<bool>,
    pins: Vec<usize>,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub stats: EvalStats,
}

impl<'a> Gp3dObjective<'a> {
    pub fn new(design: &'a Design, st: &PlacementState, cfg: &'a GpConfig, grid: Grid) -> Self {
        let n = design.num_instances();
        let dz = grid.dz();
        let dims = (0..n)
            .map(|i| Die::BOTH.map(|d| {
                let (w, h) = design.dims(i, d);
                st.rotation[i].footprint(w, h)
            }))
            .collect();
        let offsets = (0..design.pins.len())
            .map(|p| {
                let pr = crate::model::PinRef { inst: design.pins.inst[p], pin: design.pins.pin[p] };
                Die::BOTH.map(|d| {
                    let (ox, oy) = design.pin_offset(pr, d);
                    st.rotation[pr.inst].apply(ox, oy)
                })
            })
            .collect();
        let mut filler_dims = Vec::new();
        let mut fz = Vec::new();
        for d in [Die::Top, Die::Bottom] {
            let cells: Vec<usize> = (0..n).filter(|&i| !design.instances[i].is_macro).collect();
            let avg = if cells.is_empty() {
                design.die.area() / 64.0
            } else {
                cells.iter().map(|&i| design.area(i, d)).sum::<f64>() / cells.len() as f64
            };
            let f = filler_spec(design.die.width, design.die.height, dz, design.die.max_util[d.index()], avg);
            filler_dims.extend(std::iter::repeat((f.width, f.height)).take(f.count));
            fz.extend(std::iter::repeat(filler_z(d, dz)).take(f.count));
        }
        let m = n + filler_dims.len();
        let is_macro = (0..m).map(|i| i < n && design.instances[i].is_macro).collect();
        let pins = (0..m).map(|i| if i < n { design.pin_degree(i) } else { 0 }).collect();
        Gp3dObjective {
            design,
            cfg,
            grid,
            field: DensityField::new(grid),
            n,
            m,
            dims,
            offsets,
            filler_dims,
            filler_z: fz,
            is_macro,
            pins,
            lambda: 0.0,
            gamma: grid.wb.max(grid.hb),
            alpha: hbt_alpha(design, grid.dz(), cfg),
            stats: EvalStats::default(),
        }
    }

    pub fn num_fillers(&self) -> usize {
        self.m - self.n
    }

    fn size_of(&self, i: usize, z: f64) -> (f64, f64) {
        let [b, t] = self.dims[i];
        dynamic_size(t, b, self.is_macro[i], z, self.grid.dz())
    }

    fn pin_offset(&self, p: usize, z: f64, is_macro: bool) -> (f64, f64) {
        let [b, t] = self.offsets[p];
        dynamic_size(t, b, is_macro, z, self.grid.dz())
    }

    /// Packs a state and filler positions into the variable vector.
    pub fn pack(&self, st: &PlacementState, fillers: &[(f64, f64)]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut v = vec![0.0; 2 * m + n];
        for i in 0..n {
            v[i] = st.x[i];
            v[m + i] = st.y[i];
            v[2 * m + i] = st.z[i];
        }
        for (k, &(x, y)) in fillers.iter().enumerate() {
            v[n + k] = x;
            v[m + n + k] = y;
        }
        v
    }

    pub fn unpack(&self, v: &[f64], st: &mut PlacementState) -> Vec<(f64, f64)> {
        let (n, m) = (self.n, self.m);
        for i in 0..n {
            st.x[i] = v[i];
            st.y[i] = v[m + i];
            st.z[i] = v[2 * m + i];
        }
        (n..m).map(|k| (v[k], v[m + k])).collect()
    }

    /// Objective value, per-object gradient before preconditioning and
    /// per-object charge volume.
    fn raw_gradient(&mut self, v: &[f64]) -> (f64, Vec<[f64; 3]>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let d = self.design;
        let dz = self.grid.dz();
        let (xs, rest) = v.split_at(m);
        let (ys, zs) = rest.split_at(m);

        let np = d.pins.len();
        let mut px = Vec::with_capacity(np);
        let mut py = Vec::with_capacity(np);
        let mut pz = Vec::with_capacity(np);
        let mut pd = Vec::with_capacity(np);
        for p in 0..np {
            let i = d.pins.inst[p];
            let (ox, oy) = self.pin_offset(p, zs[i], self.is_macro[i]);
            px.push(xs[i] + ox);
            py.push(ys[i] + oy);
            pz.push(zs[i]);
            pd.push(Die::from_delta(zs[i] - dz / 2.0 > 0.0));
        }
        let pc = PinCoords { net_start: &d.pins.net_start, x: &px, y: &py, z: &pz, die: &pd };
        let wl = gp_wirelength_objective(&pc, self.gamma, self.alpha);
        let fd = fd_z_gradient_incremental(&pc, dz);
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        let mut gzb = vec![0.0; n];
        let mut gzh = vec![0.0; n];
        for p in 0..np {
            let i = d.pins.inst[p];
            gx[i] += wl.grad_x[p];
            gy[i] += wl.grad_y[p];
            gzb[i] += fd[p];
            gzh[i] += wl.grad_z_hbt[p];
        }
        let gz = normalize_z_gradient(&gx, &gy, &gzb, &gzh, self.alpha);

        let mut charges = Vec::with_capacity(m);
        let mut q = Vec::with_capacity(m);
        for i in 0..m {
            let (w, h, z) = if i < n {
                let (w, h) = self.size_of(i, zs[i]);
                (w, h, zs[i])
            } else {
                let (w, h) = self.filler_dims[i - n];
                (w, h, self.filler_z[i - n])
            };
            let c = Cuboid { x: xs[i], y: ys[i], z, w, h, d: dz / 2.0 };
            q.push(c.volume());
            charges.push(Charge { cuboid: c, weight: 1.0 });
        }
        let is_filler: Vec<bool> = (0..m).map(|i| i >= n).collect();
        let dens = self.field.evaluate(&ChargeSet { charges: &charges, is_macro: &self.is_macro, is_filler: &is_filler });

        let l1 = |a: &[f64]| a.iter().map(|v| v.abs()).sum::<f64>();
        self.stats.wl_norm = l1(&gx) + l1(&gy) + l1(&gz);
        self.stats.density_norm = dens.grad.iter().map(|g| g[0].abs() + g[1].abs() + g[2].abs()).sum();
        self.stats.overflow = dens.overflow;
        self.stats.wl_exact = exact_bistratal_total(&pc);
        self.stats.hbts = crossing_count(d, &pd);

        let total: Vec<[f64; 3]> = (0..m)
            .map(|i| {
                let g = dens.grad[i];
                if i < n {
                    [gx[i] + self.lambda * g[0], gy[i] + self.lambda * g[1], gz[i] + self.lambda * g[2]]
                } else {
                    [self.lambda * g[0], self.lambda * g[1], 0.0]
                }
            })
            .collect();
        (wl.value + self.lambda * dens.energy, total, q)
    }
}

impl Objective for Gp3dObjective<'_> {
    fn eval(&mut self, v: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (n, m) = (self.n, self.m);
        let d = self.design;
        let (value, mut total, q) = self.raw_gradient(v);
        let lam = vec![self.lambda; m];
        precondition(&mut total, self.cfg.precond, &lam, &q, &self.pins, &self.is_macro);
        for i in 0..m {
            grad[i] = total[i][0];
            grad[m + i] = total[i][1];
            if i < n {
                grad[2 * m + i] = total[i][2];
            }
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            let obj = if k % m < n { d.instances[k % m].name.clone() } else { "filler".into() };
            return Err(PlaceError::NonFinite { iteration: 0, object: obj });
        }
        Ok(value)
    }

    fn project(&self, v: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let dz = self.grid.dz();
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        for i in 0..n {
            let z = v[2 * m + i].clamp(dz / 4.0, 3.0 * dz / 4.0);
            v[2 * m + i] = z;
            let (w, h) = self.size_of(i, z);
            v[i] = clamp_center(v[i], w, dx);
            v[m + i] = clamp_center(v[m + i], h, dy);
        }
        for k in n..m {
            let (w, h) = self.filler_dims[k - n];
            v[k] = clamp_center(v[k], w, dx);
            v[m + k] = clamp_center(v[m + k], h, dy);
        }
    }

    fn probe_length(&self) -> f64 {
        (self.grid.wb + self.grid.hb) / 2.0
    }

    fn max_move(&self) -> f64 {
        (self.grid.wb + self.grid.hb) / 2.0
    }
}

pub(crate) fn clamp_center(c: f64, size: f64, extent: f64) -> f64 {
    if size >= extent {
        extent / 2.0
    } else {
        c.clamp(size / 2.0, extent - size / 2.0)
    }
}

pub(crate) fn crossing_count(d: &Design, pin_die: &[Die]) -> usize {
    (0..d.pins.num_nets())
        .filter(|&e| {
            let r = d.pins.net_range(e);
            let first = pin_die[r.start];
            pin_die[r].iter().any(|&x| x != first)
        })
        .count()
}

/// 3D global placement from `init`. Fillers start at `fillers` when given
/// (warm start) and uniformly at random otherwise. At exit every `z` is
/// snapped to its die plane after enforcing the utilization limits.
/// Gradients of a cold 3D placement at its first iterate, with the inputs
/// of the preconditioner divisor. Objects are the instances followed by
/// the fillers.
#[derive(Clone, Debug)]
pub struct StartGradients {
    /// `∇W + λ₀∇U` per object, not preconditioned.
    pub grad: Vec<[f64; 3]>,
    pub lambda: f64,
    /// Charge volume `q_i`.
    pub charge: Vec<f64>,
    pub pins: Vec<usize>,
    pub is_macro: Vec<bool>,
    pub num_instances: usize,
}

pub fn start_gradients(design: &Design, cfg: &GpConfig) -> StartGradients {
    let grid = plan_grid(design, cfg);
    let st = super::initial_state(design, grid.dz(), cfg);
    let mut obj = Gp3dObjective::new(design, &st, cfg, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let f0 = random_fillers(obj.num_fillers(), grid.dx(), grid.dy(), &mut rng);
    let mut v = obj.pack(&st, &f0);
    obj.project(&mut v);
    obj.raw_gradient(&v);
    obj.lambda = initial_lambda(obj.stats.wl_norm, obj.stats.density_norm, cfg.lambda_scale);
    let (_, grad, charge) = obj.raw_gradient(&v);
    StartGradients {
        grad,
        lambda: obj.lambda,
        charge,
        pins: obj.pins.clone(),
        is_macro: obj.is_macro.clone(),
        num_instances: obj.n,
    }
}

pub fn run_gp3d(
    design: &Design,
    init: &PlacementState,
    fillers: Option<&[(f64, f64)]>,
    cfg: &GpConfig,
) -> Result<GpOutcome> {
    let grid = plan_grid(design, cfg);
    let mut st = init.clone();
    st.depth = grid.dz();
    let mut obj = Gp3dObjective::new(design, &st, cfg, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let f0 = match fillers {
        Some(f) if f.len() == obj.num_fillers() => f.to_vec(),
        _ => random_fillers(obj.num_fillers(), grid.dx(), grid.dy(), &mut rng),
    };
    let x0 = obj.pack(&st, &f0);
    let mut scratch = vec![0.0; x0.len()];
    let mut v0 = x0.clone();
    obj.project(&mut v0);
    obj.eval(&v0, &mut scratch)?;
    let scale = if fillers.is_some() { cfg.warm_lambda_scale } else { cfg.lambda_scale };
    obj.lambda = initial_lambda(obj.stats.wl_norm, obj.stats.density_norm, scale);
    let bin = (grid.wb + grid.hb) / 2.0;
    obj.gamma = gamma_for(obj.stats.overflow, cfg.stop_overflow, bin, cfg.gamma_range);

    let mut opt = Nesterov::new(x0, &mut obj)?;
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, opt.u.clone());
    let mut prev_ovf = obj.stats.overflow;
    let mut worse_streak = 0;
    let (mut converged, mut diverged) = (false, false);
    let mut iters = 0;
    for it in 0..cfg.max_iters {
        iters = it;
        let s = obj.stats;
        log.push(IterRecord { iter: it, wl: s.wl_exact, hbts: s.hbts, overflow: s.overflow });
        if s.overflow < best.0 {
            best = (s.overflow, opt.v.clone());
            worse_streak = 0;
        } else if s.overflow > best.0 + 0.05 {
            worse_streak += 1;
        }
        if s.overflow <= cfg.stop_overflow && it >= cfg.min_iters {
            converged = true;
            break;
        }
        if worse_streak >= cfg.divergence_window {
            log::warn!("3D placement diverging at iteration {it}; using best state (overflow {:.3})", best.0);
            diverged = true;
            break;
        }
        obj.gamma = gamma_for(s.overflow, cfg.stop_overflow, bin, cfg.gamma_range);
        obj.lambda *= lambda_multiplier(prev_ovf, s.overflow, cfg.mu_range);
        prev_ovf = s.overflow;
        match opt.step(&mut obj) {
            Ok(true) => {}
            Ok(false) => break,
            Err(PlaceError::NonFinite { object, .. }) => {
                return Err(PlaceError::NonFinite { iteration: it, object });
            }
            Err(e) => return Err(e),
        }
    }
    let (final_v, overflow) = if diverged || !converged && best.0 < obj.stats.overflow {
        (best.1, best.0)
    } else {
        (opt.v.clone(), obj.stats.overflow)
    };
    let fillers = obj.unpack(&final_v, &mut st);
    log::info!("3D placement: {} iterations, overflow {:.4}, converged {converged}", iters + 1, overflow);
    let repaired = finalize_partition(design, &mut st)?;
    Ok(GpOutcome {
        state: st,
        fillers,
        hbts: Vec::new(),
        log,
        overflow,
        iterations: iters + 1,
        converged,
        diverged,
        repaired,
    })
}
