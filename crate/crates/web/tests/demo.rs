use place3d_web::{bistratal_report, AxisReport, Demo};

#[test]
fn overlapping_boxes_use_partial_spans() {
    // Top pins span [0, 4], bottom pins [2, 5]: partial spans 4 + 3 exceed
    // the full span 5.
    let r = bistratal_report(&[0.0, 4.0, 2.0, 5.0], &[1, 1, 0, 0]);
    assert_eq!(r, AxisReport { full: 5.0, top_span: 4.0, bottom_span: 3.0, bistratal: 7.0, optimal: Some((2.0, 4.0)) });
}

#[test]
fn disjoint_boxes_use_full_span() {
    let r = bistratal_report(&[0.0, 1.0, 6.0, 9.0], &[1, 1, 0, 0]);
    assert_eq!(r.bistratal, 9.0);
    assert_eq!(r.optimal, Some((1.0, 6.0)));
}

#[test]
fn single_die_net_has_no_hbt_range() {
    let r = bistratal_report(&[3.0, 7.0], &[0, 0]);
    assert_eq!(r.bistratal, 4.0);
    assert_eq!(r.optimal, None);
}

#[test]
fn place_then_slice() {
    let mut demo = Demo::create(150, 0.25, 3).unwrap();
    assert!(demo.density_slice_json(0).is_err());
    let layout: serde_json::Value = serde_json::from_str(&demo.place_json("auto").unwrap()).unwrap();
    assert_eq!(layout["rects"].as_array().unwrap().len(), 153);
    let hbts = layout["hbts"].as_array().unwrap().len();
    assert_eq!(layout["report"]["hbt_count"].as_u64().unwrap() as usize, hbts);

    let slice: serde_json::Value = serde_json::from_str(&demo.density_slice_json(99).unwrap()).unwrap();
    let (nx, ny, nz) = (slice["nx"].as_u64().unwrap(), slice["ny"].as_u64().unwrap(), slice["nz"].as_u64().unwrap());
    assert_eq!(slice["layer"].as_u64().unwrap(), nz - 1);
    assert_eq!(slice["values"].as_array().unwrap().len() as u64, nx * ny);
}

#[test]
fn infeasible_design_is_reported() {
    assert!(Demo::create(100, 3.0, 1).is_err());
}
