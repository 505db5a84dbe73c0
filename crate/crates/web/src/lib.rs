//! Browser demo for the placer: place a small synthetic design and draw
//! both dies, browse depth slices of the density after 3D global
//! placement, and explore the bistratal wirelength of one net.
//!
//! The exported functions return JSON strings. The `*_json` functions
//! underneath are plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use place3d::flow::{field_snapshot, gen_synthetic, run_flow, FlowChoice, FlowConfig, FlowReport, GenSpec};
use place3d::wirelength::{bistratal_axis_from_boxes, interval, optimal_interval};
use place3d::model::PlacementState;
use place3d::Design;

#[derive(Serialize)]
struct Rect {
    name: String,
    top: bool,
    #[serde(rename = "macro")]
    is_macro: bool,
    x: i64,
    y: i64,
    w: f64,
    h: f64,
}

#[derive(Serialize)]
struct Layout<'a> {
    width: f64,
    height: f64,
    hbt_size: f64,
    rects: Vec<Rect>,
    hbts: Vec<(i64, i64)>,
    report: &'a FlowReport,
}

#[derive(Serialize)]
struct Slice {
    nx: usize,
    ny: usize,
    nz: usize,
    layer: usize,
    /// Bin densities of the layer, row by row from the bottom.
    values: Vec<f64>,
    max: f64,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct AxisReport {
    pub full: f64,
    pub top_span: f64,
    pub bottom_span: f64,
    pub bistratal: f64,
    /// Interval of HBT coordinates achieving the bistratal length, when
    /// the net has pins on both dies.
    pub optimal: Option<(f64, f64)>,
}

/// A generated design and its latest placement.
#[wasm_bindgen]
pub struct Demo {
    design: Design,
    cfg: FlowConfig,
    gp_state: Option<PlacementState>,
}

impl Demo {
    pub fn create(cells: usize, macro_ratio: f64, seed: u64) -> Result<Demo, String> {
        let spec = GenSpec { cells, macros: 3, macro_ratio, seed, ..Default::default() };
        let design = gen_synthetic(&spec).map_err(|e| e.to_string())?;
        let mut cfg = FlowConfig::default();
        cfg.gp.seed = seed;
        Ok(Demo { design, cfg, gp_state: None })
    }

    pub fn place_json(&mut self, flow: &str) -> Result<String, String> {
        self.cfg.flow = match flow {
            "3d" => FlowChoice::Force3d,
            "2d" => FlowChoice::Force2d,
            _ => FlowChoice::Auto,
        };
        let res = run_flow(&self.design, &self.cfg).map_err(|e| e.to_string())?;
        let d = &self.design;
        let rects = (0..d.num_instances())
            .map(|i| {
                let p = &res.solution.placements[i];
                let (w, h) = res.solution.footprint(d, i);
                Rect {
                    name: d.instances[i].name.clone(),
                    top: p.die.is_top(),
                    is_macro: d.instances[i].is_macro,
                    x: p.x,
                    y: p.y,
                    w,
                    h,
                }
            })
            .collect();
        let layout = Layout {
            width: d.die.width,
            height: d.die.height,
            hbt_size: d.hbt.size,
            rects,
            hbts: res.solution.hbts.iter().map(|t| (t.x, t.y)).collect(),
            report: &res.report,
        };
        let json = serde_json::to_string(&layout).map_err(|e| e.to_string())?;
        self.gp_state = Some(res.gp_state);
        Ok(json)
    }

    pub fn density_slice_json(&self, layer: usize) -> Result<String, String> {
        let st = self.gp_state.as_ref().ok_or("place the design first")?;
        let snap = field_snapshot(&self.design, st, &self.cfg.gp);
        let g = snap.grid;
        let k = layer.min(g.nz - 1);
        let values: Vec<f64> = (0..g.ny).flat_map(|j| (0..g.nx).map(move |i| g.idx(i, j, k))).map(|b| snap.rho[b]).collect();
        let max = snap.rho.iter().cloned().fold(0.0, f64::max);
        serde_json::to_string(&Slice { nx: g.nx, ny: g.ny, nz: g.nz, layer: k, values, max }).map_err(|e| e.to_string())
    }
}

/// Bistratal wirelength of a net along one axis. `top[i]` is non-zero for
/// pins on the top die.
pub fn bistratal_report(coords: &[f64], top: &[u8]) -> AxisReport {
    let side = |want: bool| interval(coords.iter().zip(top).filter(|(_, &t)| (t != 0) == want).map(|(&c, _)| c));
    let (t, b) = (side(true), side(false));
    let span = |i: Option<(f64, f64)>| i.map_or(0.0, |(lo, hi)| hi - lo);
    AxisReport {
        full: span(interval(coords.iter().copied())),
        top_span: span(t),
        bottom_span: span(b),
        bistratal: bistratal_axis_from_boxes(t, b),
        optimal: t.zip(b).map(|(t, b)| optimal_interval(t, b)),
    }
}

#[wasm_bindgen]
impl Demo {
    /// Generates a synthetic design with three macros.
    #[wasm_bindgen(constructor)]
    pub fn new(cells: usize, macro_ratio: f64, seed: u32) -> Result<Demo, JsError> {
        Demo::create(cells, macro_ratio, seed as u64).map_err(|e| JsError::new(&e))
    }

    /// Runs the full flow (`"auto"`, `"3d"` or `"2d"` second placement) and
    /// returns the legalized layout with the score report.
    pub fn place(&mut self, flow: &str) -> Result<String, JsError> {
        self.place_json(flow).map_err(|e| JsError::new(&e))
    }

    /// Density of one depth layer after the first global placement.
    pub fn density_slice(&self, layer: usize) -> Result<String, JsError> {
        self.density_slice_json(layer).map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen]
pub fn bistratal(coords: &[f64], top: &[u8]) -> String {
    serde_json::to_string(&bistratal_report(coords, top)).unwrap_or_default()
}
