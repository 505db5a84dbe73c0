use place3d::flow::{check_solution, gen_synthetic, run_flow, FlowConfig, GenSpec};
use place3d::gp::{initial_state, plan_grid, run_gp3d, GpConfig};
use place3d::legalize::{insert_hbts, legalize};
use place3d::model::{evaluate_score, PinRef, ScoreMode};
use place3d::wirelength::{interval, optimal_interval};
use place3d::{Design, Die};

fn design(seed: u64, cells: usize, macros: usize, ratio: f64) -> Design {
    gen_synthetic(&GenSpec { cells, macros, macro_ratio: ratio, seed, ..Default::default() }).unwrap()
}

#[test]
fn same_seed_same_solution() {
    let d = design(4, 600, 3, 0.3);
    let cfg = FlowConfig::default();
    let a = run_flow(&d, &cfg).unwrap();
    let b = run_flow(&d, &cfg).unwrap();
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.report.raw_score, b.report.raw_score);
}

#[test]
fn checker_agrees_with_scorer() {
    for seed in 1..=3 {
        let d = design(seed, 400, 2, 0.2);
        let res = run_flow(&d, &FlowConfig::default()).unwrap();
        let chk = check_solution(&d, &res.solution);
        assert!(chk.passed(), "{:?}", chk.violations);
        let score = evaluate_score(&d, &res.solution, ScoreMode::Strict).unwrap();
        assert_eq!(chk.score, Some(score));
        assert_eq!(res.report.raw_score, score.raw_score);
    }
}

#[test]
fn legalization_keeps_dies_and_hbts_start_in_their_regions() {
    for seed in 1..=3 {
        let d = design(seed, 500, 3, 0.3);
        let cfg = GpConfig { seed, ..Default::default() };
        let init = initial_state(&d, plan_grid(&d, &cfg).dz(), &cfg);
        let st = run_gp3d(&d, &init, None, &cfg).unwrap().state;

        let hbts = insert_hbts(&d, &st);
        for &(e, x, y) in &hbts {
            let r = d.pins.net_range(e);
            let pos = |p: usize| st.pin_xy(&d, PinRef { inst: d.pins.inst[p], pin: d.pins.pin[p] });
            let side = |want: Die| {
                let ps: Vec<(f64, f64)> = r.clone().filter(|&p| st.die_of(d.pins.inst[p]) == want).map(pos).collect();
                (interval(ps.iter().map(|a| a.0)).unwrap(), interval(ps.iter().map(|a| a.1)).unwrap())
            };
            let (t, b) = (side(Die::Top), side(Die::Bottom));
            let (ix, iy) = (optimal_interval(t.0, b.0), optimal_interval(t.1, b.1));
            assert!(ix.0 <= x && x <= ix.1 && iy.0 <= y && y <= iy.1, "net {e}");
        }

        let (sol, _) = legalize(&d, &st, &[]).unwrap();
        assert_eq!(sol.dies(), st.dies());
        assert!(check_solution(&d, &sol).passed());
    }
}

#[test]
fn last_quarter_overflow_mostly_falls() {
    // Soft monotonicity: over the final quarter of each run, overflow ends
    // no higher than it started in at least 9 of 10 runs.
    let mut falling = 0;
    for seed in 1..=10 {
        let d = design(seed, 300, 2, 0.25);
        let cfg = GpConfig { seed, ..Default::default() };
        let init = initial_state(&d, plan_grid(&d, &cfg).dz(), &cfg);
        let log = run_gp3d(&d, &init, None, &cfg).unwrap().log;
        let q = &log[log.len() * 3 / 4..];
        falling += (q.last().unwrap().overflow <= q[0].overflow) as usize;
    }
    assert!(falling >= 9, "{falling} of 10");
}
