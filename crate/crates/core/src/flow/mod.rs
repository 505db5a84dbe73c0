//! End-to-end flow: 3D global placement, macro rotation, a second global
//! placement (3D or planar multi-die), legalization and detailed placement,
//! plus synthetic benchmarks and an independent solution checker.

pub mod check;
pub mod gen;

use web_time::Instant;

use serde::Serialize;

pub use check::{check_solution, CheckReport};
pub use gen::{gen_synthetic, two_cliques, GenSpec};

use crate::density::{ChargeSet, Charge, Cuboid, DensityField, Grid};
use crate::dp::{detailed_place, DpConfig, DpStats};
use crate::error::Result;
use crate::gp::{
    initial_state, plan_grid, run_gp2d_multi, run_gp3d, select_flow, FlowKind, GpConfig, IterRecord,
};
use crate::legalize::{legalize, LegalStats};
use crate::model::{evaluate_score, Design, PlacementState, ScoreMode, Solution};
use crate::rotation::rotate_macros;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowChoice {
    #[default]
    Auto,
    #[serde(rename = "3d")]
    Force3d,
    #[serde(rename = "2d")]
    Force2d,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FlowConfig {
    pub gp: GpConfig,
    pub flow: FlowChoice,
    pub skip_rotation: bool,
    pub dp: DpConfig,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub gp: f64,
    pub rotation: f64,
    pub gp2: f64,
    pub legalize: f64,
    pub dp: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowReport {
    pub hpwl: f64,
    pub hbt_count: usize,
    pub raw_score: f64,
    pub runtime: StageTimes,
    pub final_overflow: f64,
    pub flow: FlowKind,
    pub macro_area_ratio: f64,
    pub rotation_skipped: bool,
    /// `(instance, degrees)` for every macro turned by the rotation stage.
    pub rotations: Vec<(String, u32)>,
    pub gp_iterations: usize,
    pub gp2_iterations: usize,
    pub diverged: bool,
    /// Cells moved across dies to meet the utilization limits.
    pub repaired: usize,
    pub legalization: LegalStats,
    pub detailed: DpStats,
    pub seed: u64,
}

pub struct FlowResult {
    pub solution: Solution,
    pub report: FlowReport,
    /// Iteration log of both global placements, back to back.
    pub log: Vec<IterRecord>,
    /// State after the first global placement.
    pub gp_state: PlacementState,
}

/// Runs the full flow on `design`.
pub fn run_flow(design: &Design, cfg: &FlowConfig) -> Result<FlowResult> {
    let t0 = Instant::now();
    let gcfg = &cfg.gp;
    let grid = plan_grid(design, gcfg);
    let init = initial_state(design, grid.dz(), gcfg);
    let gp = run_gp3d(design, &init, None, gcfg).map_err(|e| e.in_stage("global placement"))?;
    let t_gp = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut st = gp.state.clone();
    let mut rotations = Vec::new();
    if !cfg.skip_rotation && !design.macros.is_empty() {
        let a = rotate_macros(design, &mut st).map_err(|e| e.in_stage("rotation"))?;
        for &m in &design.macros {
            if st.rotation[m] != gp.state.rotation[m] {
                rotations.push((design.instances[m].name.clone(), st.rotation[m].degrees()));
            }
        }
        log::info!("rotation: objective {:.1}, {} nodes, {} macros turned", a.objective, a.nodes, rotations.len());
    }
    let t_rot = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let kind = match cfg.flow {
        FlowChoice::Auto => select_flow(design),
        FlowChoice::Force3d => FlowKind::Gp3d,
        FlowChoice::Force2d => FlowKind::Gp2dMulti,
    };
    let gp2 = match kind {
        FlowKind::Gp3d => run_gp3d(design, &st, Some(&gp.fillers), gcfg),
        FlowKind::Gp2dMulti => run_gp2d_multi(design, &st, Some(&gp.fillers), gcfg),
    }
    .map_err(|e| e.in_stage("second global placement"))?;
    let t_gp2 = t2.elapsed().as_secs_f64();

    let t3 = Instant::now();
    let (mut solution, legal) = legalize(design, &gp2.state, &gp2.hbts).map_err(|e| e.in_stage("legalization"))?;
    let t_leg = t3.elapsed().as_secs_f64();

    let t4 = Instant::now();
    let detailed = detailed_place(design, &mut solution, &cfg.dp);
    let t_dp = t4.elapsed().as_secs_f64();

    let score = evaluate_score(design, &solution, ScoreMode::Strict).map_err(|e| e.in_stage("scoring"))?;
    let mut log = gp.log.clone();
    let offset = gp.iterations;
    log.extend(gp2.log.iter().map(|r| IterRecord { iter: r.iter + offset, ..*r }));
    let report = FlowReport {
        hpwl: score.hpwl,
        hbt_count: score.hbt_count,
        raw_score: score.raw_score,
        runtime: StageTimes {
            gp: t_gp,
            rotation: t_rot,
            gp2: t_gp2,
            legalize: t_leg,
            dp: t_dp,
            total: t0.elapsed().as_secs_f64(),
        },
        final_overflow: gp2.overflow,
        flow: kind,
        macro_area_ratio: design.macro_area_ratio(),
        rotation_skipped: cfg.skip_rotation,
        rotations,
        gp_iterations: gp.iterations,
        gp2_iterations: gp2.iterations,
        diverged: gp.diverged || gp2.diverged,
        repaired: gp.repaired + gp2.repaired,
        legalization: legal,
        detailed,
        seed: gcfg.seed,
    };
    Ok(FlowResult { solution, report, log, gp_state: gp.state })
}

/// Solved density, potential and field of a state's instances on the
/// placement grid, for inspection. Maps are stored x-fastest, then y,
/// then z.
#[derive(Serialize)]
pub struct FieldSnapshot {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub field: [Vec<f64>; 3],
}

pub fn field_snapshot(design: &Design, st: &PlacementState, cfg: &GpConfig) -> FieldSnapshot {
    let grid = plan_grid(design, cfg);
    let dz = grid.dz();
    let scale = dz / st.depth;
    let charges: Vec<Charge> = (0..design.num_instances())
        .map(|i| {
            let (w, h) = design.dims(i, st.die_of(i));
            let (w, h) = st.rotation[i].footprint(w, h);
            Charge { cuboid: Cuboid { x: st.x[i], y: st.y[i], z: st.z[i] * scale, w, h, d: dz / 2.0 }, weight: 1.0 }
        })
        .collect();
    let is_macro: Vec<bool> = design.instances.iter().map(|i| i.is_macro).collect();
    let is_filler = vec![false; charges.len()];
    let mut f = DensityField::new(grid);
    f.evaluate(&ChargeSet { charges: &charges, is_macro: &is_macro, is_filler: &is_filler });
    FieldSnapshot { grid, rho: f.rho, phi: f.phi, field: f.field }
}
