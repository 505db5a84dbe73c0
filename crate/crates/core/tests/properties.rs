use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use place3d::density::{
    accumulate_direct, dynamic_size, filler_spec, macro_prefix_density, Charge, Cuboid, Grid,
};
use place3d::flow::{gen_synthetic, GenSpec};
use place3d::gp::{divisor, finalize_partition, gamma_for, lambda_multiplier, PrecondRule};
use place3d::model::{
    crossing_indicator, derive_partition, evaluate_score, parse_design, read_solution, write_design, write_solution,
    Hbt, Placement, PlacementState, ScoreMode,
};
use place3d::rotation::{apply_rotation, solve_exact, MacroPin, RotationNet, RotationProblem};
use place3d::wirelength::{
    bistratal_axis, fd_z_gradient_incremental, fd_z_gradient_naive, interval, optimal_interval, partial_hpwl,
    wa_smooth, PinCoords,
};
use place3d::{Design, Die, Rotation, Solution};

fn dies_from(bits: &[bool]) -> Vec<Die> {
    bits.iter().map(|&b| Die::from_delta(b)).collect()
}

fn net_strategy(max_deg: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1..=max_deg).prop_flat_map(|n| (prop::collection::vec(-50i32..50, n), prop::collection::vec(any::<bool>(), n)))
        .prop_map(|(c, d)| (c.into_iter().map(f64::from).collect(), d))
}

fn small_design(seed: u64, cells: usize, macros: usize) -> Design {
    let spec = GenSpec {
        cells,
        macros,
        macro_ratio: if macros == 0 { 0.0 } else { 0.25 },
        seed,
        ..Default::default()
    };
    gen_synthetic(&spec).expect("generate")
}

/// Random (not necessarily legal) solution with one HBT per crossing net.
fn random_solution(design: &Design, seed: u64) -> Solution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (design.die.width as i64, design.die.height as i64);
    let placements: Vec<Placement> = design
        .instances
        .iter()
        .map(|inst| Placement {
            die: Die::from_delta(rng.gen_bool(0.5)),
            x: rng.gen_range(0..w),
            y: rng.gen_range(0..h),
            rotation: if inst.is_macro { Rotation::from_quarter_turns(rng.gen_range(0..4)) } else { Rotation::R0 },
        })
        .collect();
    let hbts = design
        .nets
        .iter()
        .enumerate()
        .filter(|(_, n)| crossing_indicator(n.pins.iter().map(|p| placements[p.inst].die.is_top())) == 1)
        .map(|(e, _)| Hbt { net: e, x: rng.gen_range(0..w), y: rng.gen_range(0..h) })
        .collect();
    Solution { placements, hbts }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ------------------------------------------------------------ model

    #[test]
    fn partition_is_idempotent_and_matches_crossing(z in prop::collection::vec(0.25f64..0.75, 1..20), depth in 1.0f64..100.0) {
        let z: Vec<f64> = z.iter().map(|v| v * depth).collect();
        let delta = derive_partition(&z, depth);
        let snapped: Vec<f64> = delta.iter().map(|&d| if d { 0.75 * depth } else { 0.25 * depth }).collect();
        prop_assert_eq!(derive_partition(&snapped, depth), delta.clone());
        let all_equal = delta.iter().all(|&d| d == delta[0]);
        prop_assert_eq!(crossing_indicator(delta.iter().copied()) == 0, all_equal);
    }

    #[test]
    fn score_matches_bounding_boxes(seed in 0u64..1000, macros in 0usize..3) {
        let design = small_design(seed, 60, macros);
        let sol = random_solution(&design, seed ^ 0xabc);
        let score = evaluate_score(&design, &sol, ScoreMode::Strict).unwrap();
        let mut hpwl = 0.0;
        let mut crossing = 0;
        for (e, net) in design.nets.iter().enumerate() {
            let mut boxes: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
            for p in &net.pins {
                let pl = sol.placements[p.inst];
                let (w, h) = design.dims(p.inst, pl.die);
                let (fw, fh) = pl.rotation.footprint(w, h);
                let (ox, oy) = design.pin_offset(*p, pl.die);
                let (rx, ry) = pl.rotation.apply(ox, oy);
                boxes[pl.die.index()].push((pl.x as f64 + fw / 2.0 + rx, pl.y as f64 + fh / 2.0 + ry));
            }
            if !boxes[0].is_empty() && !boxes[1].is_empty() {
                crossing += 1;
                let t = sol.hbts.iter().find(|t| t.net == e).unwrap();
                for b in &mut boxes {
                    b.push((t.x as f64, t.y as f64));
                }
            }
            for b in &boxes {
                if let (Some(x), Some(y)) = (interval(b.iter().map(|p| p.0)), interval(b.iter().map(|p| p.1))) {
                    hpwl += (x.1 - x.0) + (y.1 - y.0);
                }
            }
        }
        prop_assert_eq!(score.hbt_count, crossing);
        prop_assert!((score.hpwl - hpwl).abs() <= 1e-9 * hpwl.max(1.0), "{} vs {}", score.hpwl, hpwl);
        prop_assert_eq!(score.raw_score, score.hpwl + design.hbt.cost * crossing as f64);
    }

    #[test]
    fn design_text_round_trips(seed in 0u64..1000, cells in 20usize..120, macros in 0usize..4) {
        let design = small_design(seed, cells, macros);
        let mut a = Vec::new();
        write_design(&design, &mut a).unwrap();
        let again = parse_design(&a[..]).unwrap();
        let mut b = Vec::new();
        write_design(&again, &mut b).unwrap();
        prop_assert_eq!(String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
    }

    #[test]
    fn solution_text_round_trips(seed in 0u64..1000) {
        let design = small_design(seed, 50, 2);
        let sol = random_solution(&design, seed);
        let mut text = Vec::new();
        write_solution(&design, &sol, &mut text).unwrap();
        prop_assert_eq!(read_solution(&design, &text[..]).unwrap(), sol);
    }

    #[test]
    fn rotation_bits_and_turns_agree(q in 0u8..4, p in 0u8..4) {
        let r = Rotation::from_quarter_turns(q);
        let (a, b) = r.bits();
        prop_assert_eq!(Rotation::from_bits(a, b), r);
        prop_assert_eq!(r.degrees(), 90 * q as u32);
        prop_assert_eq!(r.then(Rotation::from_quarter_turns(p)).quarter_turns(), (q + p) % 4);
    }

    // ------------------------------------------------------------ wirelength

    #[test]
    fn bistratal_between_span_and_twice_span((c, d) in net_strategy(12)) {
        let full = partial_hpwl(&c);
        let b = bistratal_axis(&c, &dies_from(&d));
        prop_assert!(b >= full && b <= 2.0 * full);
    }

    #[test]
    fn wa_grows_toward_span_as_gamma_halves(c in prop::collection::vec(-100.0f64..100.0, 2..16), g0 in 1.0f64..50.0) {
        let span = partial_hpwl(&c);
        let mut prev = f64::NEG_INFINITY;
        let mut gamma = g0;
        for _ in 0..8 {
            let (v, _) = wa_smooth(&c, gamma);
            prop_assert!(v >= prev - 1e-9 && v <= span + 1e-9);
            prev = v;
            gamma /= 2.0;
        }
    }

    #[test]
    fn wa_gradient_matches_central_difference(c in prop::collection::vec(-100.0f64..100.0, 2..16), gamma in 0.5f64..20.0) {
        let (_, g) = wa_smooth(&c, gamma);
        let h = 1e-5;
        let scale = g.iter().map(|v| v.abs()).fold(1e-6, f64::max);
        for k in 0..c.len() {
            let (mut p, mut m) = (c.clone(), c.clone());
            p[k] += h;
            m[k] -= h;
            let fd = (wa_smooth(&p, gamma).0 - wa_smooth(&m, gamma).0) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn optimal_interval_touches_both_boxes(a in -50.0f64..50.0, wa in 0.0f64..40.0, b in -50.0f64..50.0, wb in 0.0f64..40.0) {
        let (t, s) = ((a, a + wa), (b, b + wb));
        let (lo, hi) = optimal_interval(t, s);
        prop_assert!(lo <= hi);
        for bx in [t, s] {
            prop_assert!(lo <= bx.1 && hi >= bx.0);
        }
        // Any point inside adds no length to the two partial spans.
        let mid = (lo + hi) / 2.0;
        let with = |bx: (f64, f64)| bx.1.max(mid) - bx.0.min(mid);
        let b = bistratal_axis(&[t.0, t.1, s.0, s.1], &[Die::Top, Die::Top, Die::Bottom, Die::Bottom]);
        prop_assert!((with(t) + with(s) - b).abs() < 1e-9);
    }

    #[test]
    fn incremental_depth_gradient_is_exact(nets in prop::collection::vec(net_strategy(10), 1..30)) {
        let mut ns = vec![0];
        let (mut x, mut y, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for (c, bits) in &nets {
            x.extend(c);
            y.extend(c.iter().rev());
            d.extend(dies_from(bits));
            ns.push(x.len());
        }
        let z = vec![0.0; x.len()];
        let pc = PinCoords { net_start: &ns, x: &x, y: &y, z: &z, die: &d };
        prop_assert_eq!(fd_z_gradient_naive(&pc, 6.0), fd_z_gradient_incremental(&pc, 6.0));
    }

    // ------------------------------------------------------------ density

    #[test]
    fn charge_is_conserved(seed in 0u64..10_000, n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid::new(rng.gen_range(10.0..300.0), rng.gen_range(10.0..300.0), rng.gen_range(2..16), rng.gen_range(2..16), rng.gen_range(2..8));
        let charges: Vec<Charge> = (0..n)
            .map(|_| {
                let (w, h, d) = (rng.gen_range(0.0..g.dx()), rng.gen_range(0.0..g.dy()), rng.gen_range(0.0..g.dz()));
                let c = Cuboid {
                    x: rng.gen_range(w / 2.0..=g.dx() - w / 2.0),
                    y: rng.gen_range(h / 2.0..=g.dy() - h / 2.0),
                    z: rng.gen_range(d / 2.0..=g.dz() - d / 2.0),
                    w, h, d,
                };
                Charge { cuboid: c, weight: rng.gen_range(0.1..2.0) }
            })
            .collect();
        let want: f64 = charges.iter().map(|q| q.weight * q.cuboid.volume()).sum();
        let mut direct = g.zeros();
        accumulate_direct(&g, &charges, &mut direct);
        let prefix = macro_prefix_density(&g, &charges);
        for rho in [direct, prefix] {
            let total: f64 = rho.iter().sum::<f64>() * g.bin_volume();
            prop_assert!((total - want).abs() <= 1e-9 * want.max(1e-12), "{} vs {}", total, want);
        }
    }

    #[test]
    fn filler_volume_fills_the_gap(dx in 10.0f64..1e4, dy in 10.0f64..1e4, dz in 1.0f64..100.0, u in 0.05f64..1.0, cell in 1.0f64..500.0) {
        let f = filler_spec(dx, dy, dz, u, cell);
        let want = 0.5 * dx * dy * dz * (1.0 - u);
        prop_assert!((f.volume - want).abs() <= 1e-9 * want.max(1.0));
        if f.count > 0 {
            let total = f.count as f64 * f.width * f.height * dz / 2.0;
            prop_assert!((total - want).abs() <= 1e-9 * want);
        }
    }

    #[test]
    fn macro_footprint_is_continuous_in_depth(t in (1.0f64..100.0, 1.0f64..100.0), b in (1.0f64..100.0, 1.0f64..100.0), z in 0.0f64..1.0, dz in 1.0f64..64.0) {
        let eps = 1e-3 * dz;
        let z = z * dz;
        let a = dynamic_size(t, b, true, z, dz);
        let c = dynamic_size(t, b, true, z + eps, dz);
        prop_assert!((a.0 - c.0).abs() <= eps * 2.0 * (t.0 - b.0).abs() / dz + 1e-12);
        prop_assert!((a.1 - c.1).abs() <= eps * 2.0 * (t.1 - b.1).abs() / dz + 1e-12);
    }

    // ------------------------------------------------------------ global placement

    #[test]
    fn clamped_divisors_never_below_one(is_macro: bool, pins in 0usize..500, lq in 0.0f64..1e3) {
        prop_assert!(divisor(PrecondRule::Clamped, is_macro, pins, lq) >= 1.0);
    }

    #[test]
    fn schedules_stay_in_range(prev in 0.0f64..1.0, now in 0.0f64..1.0, ovf in 0.0f64..1.5) {
        let mu = lambda_multiplier(prev, now, (1.01, 1.05));
        prop_assert!((1.01..=1.05).contains(&mu));
        let g = gamma_for(ovf, 0.1, 8.0, (0.5, 4.0));
        prop_assert!(g > 0.0 && g >= 4.0 - 1e-12 && g <= 32.0 + 1e-12);
    }

    #[test]
    fn snapping_keeps_dies_when_limits_hold(seed in 0u64..1000) {
        let design = small_design(seed, 80, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = 32.0;
        let mut st = PlacementState::new(design.num_instances(), depth);
        for i in 0..st.len() {
            st.z[i] = rng.gen_range(depth / 4.0..=3.0 * depth / 4.0);
        }
        let before = st.dies();
        let moved = finalize_partition(&design, &mut st);
        if let Ok(0) = moved {
            prop_assert_eq!(st.dies(), before);
            prop_assert!(st.z.iter().all(|&z| z == depth / 4.0 || z == 3.0 * depth / 4.0));
        }
    }

    // ------------------------------------------------------------ rotation

    #[test]
    fn exact_rotation_never_worse_than_identity(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=5);
        let nets = (0..rng.gen_range(1..8))
            .map(|_| RotationNet {
                fixed: rng.gen_bool(0.5).then(|| { let x = rng.gen_range(0.0..100.0); let y = rng.gen_range(0.0..100.0); [x, x, y, y] }),
                pins: (0..rng.gen_range(1..4))
                    .map(|_| MacroPin { slot: rng.gen_range(0..k), cx: 50.0, cy: 50.0, ox: rng.gen_range(-20.0..20.0), oy: rng.gen_range(-20.0..20.0) })
                    .collect(),
            })
            .collect();
        let p = RotationProblem { macros: (0..k).collect(), allowed: vec![[true; 4]; k], nets };
        let a = solve_exact(&p);
        prop_assert!(a.objective <= p.objective(&vec![Rotation::R0; k]) + 1e-9);
        let other: Vec<Rotation> = (0..k).map(|_| Rotation::from_quarter_turns(rng.gen_range(0..4))).collect();
        prop_assert!(a.objective <= p.objective(&other) + 1e-9);
        // The net bound of every net is its exact span.
        for net in &p.nets {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            if let Some(f) = net.fixed { xs.extend([f[0], f[1]]); ys.extend([f[2], f[3]]); }
            for q in &net.pins {
                let (x, y) = q.at(a.rotations[q.slot]);
                xs.push(x);
                ys.push(y);
            }
            prop_assert!((net.span(&a.rotations) - partial_hpwl(&xs) - partial_hpwl(&ys)).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_keeps_macro_center_and_area(seed in 0u64..1000, q in 0u8..4) {
        let design = small_design(seed, 40, 3);
        let mut st = PlacementState::new(design.num_instances(), 16.0);
        let m = design.macros[0];
        st.x[m] = 123.0;
        st.y[m] = 77.0;
        let (w, h) = design.dims(m, st.die_of(m));
        apply_rotation(&design, &mut st, &[(m, Rotation::from_quarter_turns(q))]).unwrap();
        let (fw, fh) = st.rotation[m].footprint(w, h);
        prop_assert_eq!((st.x[m], st.y[m]), (123.0, 77.0));
        prop_assert_eq!(fw * fh, w * h);
        let cell = (0..design.num_instances()).find(|&i| !design.instances[i].is_macro).unwrap();
        prop_assert!(apply_rotation(&design, &mut st, &[(cell, Rotation::R90)]).is_err());
    }
}
