//! Line-oriented text formats for designs and solutions.
//!
//! Design files:
//!
//! ```text
//! DieSize 1000 990
//! TopDieMaxUtil 0.8
//! BottomDieMaxUtil 0.8
//! TopDieRowHeight 33
//! BottomDieRowHeight 45
//! TopDieTech
//! Cell INV 4 33 2
//! Pin A -1 0
//! Pin Y 1 0
//! BottomDieTech
//! Cell INV 6 45 2
//! Pin A -2 0
//! Pin Y 2 0
//! HBT 10 5 10
//! Inst u1 INV 0
//! Net n1 1
//! Pin u1/A
//! ```
//!
//! `TopDieSiteWidth` / `BottomDieSiteWidth` are optional (default 1).
//! Blank lines and `#` comments are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{
    CellKind, Design, Die, DieSpec, Hbt, HbtSpec, Instance, Net, PinDef, PinRef, Placement,
    Rotation, Solution, TechProfile,
};
use crate::error::{PlaceError, Result};

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
    peeked: Option<(usize, Vec<String>)>,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Lines { inner: reader.lines(), line_no: 0, peeked: None }
    }

    /// Next non-empty tokenized line.
    fn next(&mut self) -> Result<Option<(usize, Vec<String>)>> {
        if let Some(p) = self.peeked.take() {
            return Ok(Some(p));
        }
        for line in self.inner.by_ref() {
            let line = line?;
            self.line_no += 1;
            let body = line.split('#').next().unwrap_or("");
            let tokens: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
            if !tokens.is_empty() {
                return Ok(Some((self.line_no, tokens)));
            }
        }
        Ok(None)
    }

    fn peek_keyword(&mut self) -> Result<Option<&str>> {
        if self.peeked.is_none() {
            self.peeked = self.next()?;
        }
        Ok(self.peeked.as_ref().map(|(_, t)| t[0].as_str()))
    }
}

fn expect_len(line: usize, tokens: &[String], n: usize) -> Result<()> {
    if tokens.len() != n {
        return Err(PlaceError::syntax(
            line,
            format!("`{}` expects {} fields, found {}", tokens[0], n - 1, tokens.len() - 1),
        ));
    }
    Ok(())
}

fn num(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| PlaceError::syntax(line, format!("expected a number, found `{s}`")))?;
    if !v.is_finite() {
        return Err(PlaceError::syntax(line, format!("non-finite number `{s}`")));
    }
    Ok(v)
}

fn count(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| PlaceError::syntax(line, format!("expected a count, found `{s}`")))
}

fn flag(line: usize, s: &str) -> Result<bool> {
    match s {
        "0" | "false" | "N" => Ok(false),
        "1" | "true" | "Y" => Ok(true),
        _ => Err(PlaceError::syntax(line, format!("expected 0 or 1, found `{s}`"))),
    }
}

fn positive(line: usize, what: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(PlaceError::InvalidDimension(format!("line {line}: {what} must be positive, got {v}")))
    }
}

fn parse_tech<R: BufRead>(lines: &mut Lines<R>) -> Result<TechProfile> {
    let mut profile = TechProfile::default();
    while lines.peek_keyword()? == Some("Cell") {
        let (ln, t) = lines.next()?.expect("peeked");
        expect_len(ln, &t, 5)?;
        let width = positive(ln, "cell width", num(ln, &t[2])?)?;
        let height = positive(ln, "cell height", num(ln, &t[3])?)?;
        let npins = count(ln, &t[4])?;
        let mut pins = Vec::with_capacity(npins);
        for _ in 0..npins {
            let (pl, pt) = lines
                .next()?
                .ok_or_else(|| PlaceError::syntax(ln, format!("cell `{}` is missing pins", t[1])))?;
            if pt[0] != "Pin" {
                return Err(PlaceError::syntax(pl, format!("expected `Pin`, found `{}`", pt[0])));
            }
            expect_len(pl, &pt, 4)?;
            pins.push(PinDef { name: pt[1].clone(), x: num(pl, &pt[2])?, y: num(pl, &pt[3])? });
        }
        profile.kinds.push(CellKind { name: t[1].clone(), width, height, pins });
    }
    Ok(profile)
}

/// Parses a design from its text form.
pub fn parse_design<R: BufRead>(reader: R) -> Result<Design> {
    let mut lines = Lines::new(reader);
    let mut size: Option<(f64, f64)> = None;
    let mut util = [None; 2];
    let mut row = [None; 2];
    let mut site = [1.0f64; 2];
    let mut tech: [Option<TechProfile>; 2] = [None, None];
    let mut hbt: Option<HbtSpec> = None;
    let mut raw_insts: Vec<(usize, String, String, bool)> = Vec::new();
    let mut raw_nets: Vec<(usize, String, Vec<(usize, String)>)> = Vec::new();

    while let Some((ln, t)) = lines.next()? {
        let die_of = |kw: &str| if kw.starts_with("Top") { Die::Top } else { Die::Bottom };
        match t[0].as_str() {
            "DieSize" => {
                expect_len(ln, &t, 3)?;
                size = Some((
                    positive(ln, "die width", num(ln, &t[1])?)?,
                    positive(ln, "die height", num(ln, &t[2])?)?,
                ));
            }
            "TopDieMaxUtil" | "BottomDieMaxUtil" => {
                expect_len(ln, &t, 2)?;
                util[die_of(&t[0]).index()] = Some(num(ln, &t[1])?);
            }
            "TopDieRowHeight" | "BottomDieRowHeight" => {
                expect_len(ln, &t, 2)?;
                row[die_of(&t[0]).index()] = Some(positive(ln, "row height", num(ln, &t[1])?)?);
            }
            "TopDieSiteWidth" | "BottomDieSiteWidth" => {
                expect_len(ln, &t, 2)?;
                site[die_of(&t[0]).index()] = positive(ln, "site width", num(ln, &t[1])?)?;
            }
            "TopDieTech" | "BottomDieTech" => {
                expect_len(ln, &t, 1)?;
                tech[die_of(&t[0]).index()] = Some(parse_tech(&mut lines)?);
            }
            "HBT" => {
                expect_len(ln, &t, 4)?;
                hbt = Some(HbtSpec {
                    size: positive(ln, "HBT size", num(ln, &t[1])?)?,
                    spacing: num(ln, &t[2])?,
                    cost: num(ln, &t[3])?,
                });
            }
            "Inst" => {
                expect_len(ln, &t, 4)?;
                raw_insts.push((ln, t[1].clone(), t[2].clone(), flag(ln, &t[3])?));
            }
            "Net" => {
                expect_len(ln, &t, 3)?;
                let n = count(ln, &t[2])?;
                let mut pins = Vec::with_capacity(n);
                for _ in 0..n {
                    let (pl, pt) = lines
                        .next()?
                        .ok_or_else(|| PlaceError::syntax(ln, format!("net `{}` is missing pins", t[1])))?;
                    if pt[0] != "Pin" {
                        return Err(PlaceError::syntax(pl, format!("expected `Pin`, found `{}`", pt[0])));
                    }
                    expect_len(pl, &pt, 2)?;
                    pins.push((pl, pt[1].clone()));
                }
                raw_nets.push((ln, t[1].clone(), pins));
            }
            other => return Err(PlaceError::syntax(ln, format!("unknown keyword `{other}`"))),
        }
    }

    let missing = |what: &str| PlaceError::syntax(lines.line_no, format!("missing `{what}`"));
    let (width, height) = size.ok_or_else(|| missing("DieSize"))?;
    let die = DieSpec {
        width,
        height,
        max_util: [
            util[0].ok_or_else(|| missing("BottomDieMaxUtil"))?,
            util[1].ok_or_else(|| missing("TopDieMaxUtil"))?,
        ],
        row_height: [
            row[0].ok_or_else(|| missing("BottomDieRowHeight"))?,
            row[1].ok_or_else(|| missing("TopDieRowHeight"))?,
        ],
        site_width: site,
    };
    let [bottom, top] = tech;
    let tech = [
        bottom.ok_or_else(|| missing("BottomDieTech"))?,
        top.ok_or_else(|| missing("TopDieTech"))?,
    ];
    let hbt = hbt.ok_or_else(|| missing("HBT"))?;

    // Kinds are indexed by the top profile; the bottom one is reordered to match.
    let kind_index: HashMap<&str, usize> =
        tech[1].kinds.iter().enumerate().map(|(i, k)| (k.name.as_str(), i)).collect();
    let mut bottom_sorted: Vec<Option<CellKind>> = vec![None; tech[1].kinds.len()];
    for k in &tech[0].kinds {
        let i = *kind_index.get(k.name.as_str()).ok_or_else(|| {
            PlaceError::InvalidDimension(format!("cell `{}` missing from top profile", k.name))
        })?;
        // Pins follow the top profile's order as well.
        let top_kind = &tech[1].kinds[i];
        let mut pins = Vec::with_capacity(top_kind.pins.len());
        for p in &top_kind.pins {
            let bp = k.pins.iter().find(|q| q.name == p.name).ok_or_else(|| {
                PlaceError::InvalidDimension(format!("pin `{}/{}` missing from bottom profile", k.name, p.name))
            })?;
            pins.push(bp.clone());
        }
        if pins.len() != k.pins.len() {
            return Err(PlaceError::InvalidDimension(format!("cell `{}` pins differ between profiles", k.name)));
        }
        bottom_sorted[i] = Some(CellKind { pins, ..k.clone() });
    }
    let bottom_kinds = bottom_sorted
        .into_iter()
        .zip(&tech[1].kinds)
        .map(|(k, t)| {
            k.ok_or_else(|| PlaceError::InvalidDimension(format!("cell `{}` missing from bottom profile", t.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let tech = [TechProfile { kinds: bottom_kinds }, tech[1].clone()];

    let mut instances = Vec::with_capacity(raw_insts.len());
    for (ln, name, kind, is_macro) in raw_insts {
        let k = *kind_index
            .get(kind.as_str())
            .ok_or_else(|| PlaceError::syntax(ln, format!("instance `{name}` has unknown cell `{kind}`")))?;
        instances.push(Instance { name, kind: k, is_macro });
    }
    let inst_index: HashMap<&str, usize> =
        instances.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut nets = Vec::with_capacity(raw_nets.len());
    for (_, name, pins) in raw_nets {
        let mut refs = Vec::with_capacity(pins.len());
        for (pl, p) in pins {
            let dangling = || PlaceError::DanglingPin { line: pl, net: name.clone(), pin: p.clone() };
            let (iname, pname) = p.split_once('/').ok_or_else(dangling)?;
            let inst = *inst_index.get(iname).ok_or_else(dangling)?;
            let pin = tech[1].kinds[instances[inst].kind].pin_index(pname).ok_or_else(dangling)?;
            refs.push(PinRef { inst, pin });
        }
        nets.push(Net { name, pins: refs });
    }
    Design::new(die, hbt, tech, instances, nets)
}

fn write_profile(out: &mut String, header: &str, profile: &TechProfile) {
    let _ = writeln!(out, "{header}");
    for k in &profile.kinds {
        let _ = writeln!(out, "Cell {} {} {} {}", k.name, k.width, k.height, k.pins.len());
        for p in &k.pins {
            let _ = writeln!(out, "Pin {} {} {}", p.name, p.x, p.y);
        }
    }
}

/// Writes a design in canonical form; `parse_design` reads it back unchanged.
pub fn write_design<W: Write>(design: &Design, mut w: W) -> Result<()> {
    let mut out = String::new();
    let d = &design.die;
    let _ = writeln!(out, "DieSize {} {}", d.width, d.height);
    let _ = writeln!(out, "TopDieMaxUtil {}", d.max_util[1]);
    let _ = writeln!(out, "BottomDieMaxUtil {}", d.max_util[0]);
    let _ = writeln!(out, "TopDieRowHeight {}", d.row_height[1]);
    let _ = writeln!(out, "BottomDieRowHeight {}", d.row_height[0]);
    let _ = writeln!(out, "TopDieSiteWidth {}", d.site_width[1]);
    let _ = writeln!(out, "BottomDieSiteWidth {}", d.site_width[0]);
    write_profile(&mut out, "TopDieTech", &design.tech[1]);
    write_profile(&mut out, "BottomDieTech", &design.tech[0]);
    let h = &design.hbt;
    let _ = writeln!(out, "HBT {} {} {}", h.size, h.spacing, h.cost);
    for inst in &design.instances {
        let kind = &design.tech[1].kinds[inst.kind].name;
        let _ = writeln!(out, "Inst {} {} {}", inst.name, kind, inst.is_macro as u8);
    }
    for net in &design.nets {
        let _ = writeln!(out, "Net {} {}", net.name, net.pins.len());
        for p in &net.pins {
            let inst = &design.instances[p.inst];
            let pin = &design.tech[1].kinds[inst.kind].pins[p.pin].name;
            let _ = writeln!(out, "Pin {}/{}", inst.name, pin);
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes a solution: per-die placement blocks, then the HBT list.
pub fn write_solution<W: Write>(design: &Design, solution: &Solution, mut w: W) -> Result<()> {
    let mut out = String::new();
    for (die, header) in [(Die::Top, "TopDiePlacement"), (Die::Bottom, "BottomDiePlacement")] {
        let on_die: Vec<usize> =
            (0..solution.placements.len()).filter(|&i| solution.placements[i].die == die).collect();
        let _ = writeln!(out, "{header} {}", on_die.len());
        for i in on_die {
            let p = &solution.placements[i];
            let _ = writeln!(out, "Inst {} {} {} {}", design.instances[i].name, p.x, p.y, p.rotation.label());
        }
    }
    let _ = writeln!(out, "NumHBTs {}", solution.hbts.len());
    for t in &solution.hbts {
        let _ = writeln!(out, "HBT {} {} {}", design.nets[t.net].name, t.x, t.y);
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn int(line: usize, s: &str) -> Result<i64> {
    s.parse().map_err(|_| PlaceError::syntax(line, format!("expected an integer, found `{s}`")))
}

/// Reads a solution written by [`write_solution`] against its design.
pub fn read_solution<R: BufRead>(design: &Design, reader: R) -> Result<Solution> {
    let mut lines = Lines::new(reader);
    let mut placements: Vec<Option<Placement>> = vec![None; design.num_instances()];
    let mut hbts = Vec::new();
    let mut die = None;
    while let Some((ln, t)) = lines.next()? {
        match t[0].as_str() {
            "TopDiePlacement" | "BottomDiePlacement" => {
                die = Some(if t[0].starts_with("Top") { Die::Top } else { Die::Bottom });
            }
            "NumHBTs" => die = None,
            "Inst" => {
                expect_len(ln, &t, 5)?;
                let d = die.ok_or_else(|| PlaceError::syntax(ln, "`Inst` outside a placement block"))?;
                let i = design
                    .instance_by_name(&t[1])
                    .ok_or_else(|| PlaceError::syntax(ln, format!("unknown instance `{}`", t[1])))?;
                let rotation = Rotation::parse(&t[4])
                    .ok_or_else(|| PlaceError::syntax(ln, format!("bad rotation `{}`", t[4])))?;
                if placements[i].is_some() {
                    return Err(PlaceError::syntax(ln, format!("instance `{}` placed twice", t[1])));
                }
                placements[i] = Some(Placement { die: d, x: int(ln, &t[2])?, y: int(ln, &t[3])?, rotation });
            }
            "HBT" => {
                expect_len(ln, &t, 4)?;
                let net = design
                    .net_by_name(&t[1])
                    .ok_or_else(|| PlaceError::syntax(ln, format!("unknown net `{}`", t[1])))?;
                hbts.push(Hbt { net, x: int(ln, &t[2])?, y: int(ln, &t[3])? });
            }
            other => return Err(PlaceError::syntax(ln, format!("unknown keyword `{other}`"))),
        }
    }
    let placements = placements
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| {
                PlaceError::syntax(lines.line_no, format!("instance `{}` is not placed", design.instances[i].name))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Solution { placements, hbts })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "\
DieSize 100 99
TopDieMaxUtil 0.8
BottomDieMaxUtil 0.8
TopDieRowHeight 33
BottomDieRowHeight 11
TopDieTech
Cell INV 4 33 2
Pin A -1 0
Pin Y 1.5 0
BottomDieTech
Cell INV 6 11 2
Pin Y 2 0
Pin A -2 0
HBT 10 5 10
Inst u1 INV 0
Inst u2 INV 0
Net n1 2
Pin u1/Y
Pin u2/A
";

    #[test]
    fn minimal_design() {
        let d = parse_design(MINIMAL.as_bytes()).unwrap();
        assert_eq!(d.num_instances(), 2);
        assert_eq!(d.nets.len(), 1);
        assert_eq!(d.hbt.cost, 10.0);
        assert_eq!(d.die.max_util, [0.8, 0.8]);
        assert_eq!(d.die.site_width, [1.0, 1.0]);
        // Bottom pins are reordered to follow the top profile.
        let y_bottom = d.pin_offset(PinRef { inst: 0, pin: 1 }, Die::Bottom);
        assert_eq!(y_bottom, (2.0, 0.0));
        assert_eq!(d.pin_offset(PinRef { inst: 0, pin: 1 }, Die::Top), (1.5, 0.0));
    }

    #[test]
    fn dangling_reference() {
        let text = MINIMAL.replace("Pin u2/A", "Pin u9/A");
        match parse_design(text.as_bytes()) {
            Err(PlaceError::DanglingPin { line, pin, .. }) => {
                assert_eq!(line, 19);
                assert_eq!(pin, "u9/A");
            }
            other => panic!("expected dangling pin, got {other:?}"),
        }
        let text = MINIMAL.replace("Pin u2/A", "Pin u2/Q");
        assert!(matches!(parse_design(text.as_bytes()), Err(PlaceError::DanglingPin { .. })));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = MINIMAL.replace("DieSize 100 99", "DieSize 100 abc");
        match parse_design(text.as_bytes()) {
            Err(PlaceError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_dimension() {
        let text = MINIMAL.replace("Cell INV 4 33 2", "Cell INV 0 33 2");
        assert!(matches!(parse_design(text.as_bytes()), Err(PlaceError::InvalidDimension(_))));
        let text = MINIMAL.replace("DieSize 100 99", "DieSize -5 99");
        assert!(matches!(parse_design(text.as_bytes()), Err(PlaceError::InvalidDimension(_))));
    }

    #[test]
    fn rows_must_tile_die() {
        let text = MINIMAL.replace("BottomDieRowHeight 11", "BottomDieRowHeight 10");
        assert!(matches!(parse_design(text.as_bytes()), Err(PlaceError::InvalidDimension(_))));
    }

    #[test]
    fn pin_outside_cell_rejected() {
        let text = MINIMAL.replace("Pin Y 1.5 0", "Pin Y 2.5 0");
        assert!(matches!(parse_design(text.as_bytes()), Err(PlaceError::InvalidDimension(_))));
    }

    #[test]
    fn empty_solution_is_header_only() {
        let text = MINIMAL.lines().take_while(|l| !l.starts_with("Inst")).collect::<Vec<_>>().join("\n");
        let d = parse_design(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_solution(&d, &Solution::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "TopDiePlacement 0\nBottomDiePlacement 0\nNumHBTs 0\n");
    }

    #[test]
    fn solution_round_trip() {
        let d = parse_design(MINIMAL.as_bytes()).unwrap();
        let sol = Solution {
            placements: vec![
                Placement { die: Die::Top, x: 3, y: 33, rotation: Rotation::R0 },
                Placement { die: Die::Bottom, x: 10, y: 0, rotation: Rotation::R0 },
            ],
            hbts: vec![Hbt { net: 0, x: 7, y: 8 }],
        };
        let mut buf = Vec::new();
        write_solution(&d, &sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("Inst")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("HBT")).count(), 1);
        assert_eq!(read_solution(&d, text.as_bytes()).unwrap(), sol);
    }
}
