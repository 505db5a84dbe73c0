//! Electrostatic density model: charge accumulation (direct traversal for
//! cells and fillers, corner maps plus one prefix sum for macros), the
//! spectral Poisson solve, fields, energy, gradients and overflow.

mod grid;
mod spectral;

use std::io::{self, Write};

pub use grid::{
    accumulate_direct, corner_map, field_integral_direct, field_integral_prefix, field_integrals,
    for_each_overlap, macro_prefix_density, prefix_sum_3d, suffix_sum_3d, Charge, Cuboid, Grid, SuffixFields,
};
pub use spectral::{PoissonSolver, Spectrum, Transforms};

use crate::model::Die;

/// Dynamic planar size of an instance at depth `z`.
///
/// Cells take the footprint of the die they currently sit on. Macros blend
/// linearly between the bottom footprint at `z = d_z/4` and the top
/// footprint at `z = 3d_z/4`; `z` is clamped to that range.
pub fn dynamic_size(top: (f64, f64), bottom: (f64, f64), is_macro: bool, z: f64, dz: f64) -> (f64, f64) {
    if !is_macro {
        return if z - dz / 2.0 > 0.0 { top } else { bottom };
    }
    let t = (2.0 * z / dz - 0.5).clamp(0.0, 1.0);
    (t * top.0 + (1.0 - t) * bottom.0, t * top.1 + (1.0 - t) * bottom.1)
}

/// Electrostatic energy `½·Σ_b ρ_b φ_b vol(b)`.
pub fn energy(grid: &Grid, rho: &[f64], phi: &[f64]) -> f64 {
    0.5 * grid.bin_volume() * rho.iter().zip(phi).map(|(r, p)| r * p).sum::<f64>()
}

/// `Σ_b max(ρ_b - ρ_t, 0)·vol(b) / movable volume`.
pub fn overflow(grid: &Grid, rho: &[f64], target: f64, movable_volume: f64) -> f64 {
    if movable_volume <= 0.0 {
        return 0.0;
    }
    let excess: f64 = rho.iter().map(|&r| (r - target).max(0.0)).sum();
    excess * grid.bin_volume() / movable_volume
}

/// Filler charges of one die.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FillerSpec {
    pub count: usize,
    pub width: f64,
    pub height: f64,
    /// Total filler volume `½·d_x·d_y·d_z·(1-u)`.
    pub volume: f64,
}

/// Filler count and size for a die: enough fillers of roughly the average
/// cell volume to fill `½·d_x·d_y·d_z·(1-u)` exactly.
pub fn filler_spec(dx: f64, dy: f64, dz: f64, util: f64, avg_cell_area: f64) -> FillerSpec {
    let volume = 0.5 * dx * dy * dz * (1.0 - util);
    if volume <= 0.0 || avg_cell_area <= 0.0 {
        return FillerSpec { count: 0, width: 0.0, height: 0.0, volume: 0.0 };
    }
    let unit = avg_cell_area * dz / 2.0;
    let count = (volume / unit).ceil().max(1.0) as usize;
    let side = (volume / (count as f64 * dz / 2.0)).sqrt();
    FillerSpec { count, width: side, height: side, volume }
}

/// Plane of a die's fillers.
pub fn filler_z(die: Die, dz: f64) -> f64 {
    match die {
        Die::Top => 0.75 * dz,
        Die::Bottom => 0.25 * dz,
    }
}

/// Solved density state of one grid.
pub struct DensityField {
    pub grid: Grid,
    solver: PoissonSolver,
    /// Density of instances only (used for overflow).
    pub rho_inst: Vec<f64>,
    /// Density of instances and fillers.
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub field: [Vec<f64>; 3],
}

/// Energy, per-object gradient and overflow of one evaluation.
#[derive(Clone, Debug, Default)]
pub struct DensityEval {
    pub energy: f64,
    /// `∇U_i = -ω_i Σ_b E_b·vol(D_i∩b)` per object, in input order.
    pub grad: Vec<[f64; 3]>,
    pub overflow: f64,
}

/// Objects of one density evaluation.
pub struct ChargeSet<'a> {
    pub charges: &'a [Charge],
    /// Objects evaluated through corner maps and prefix sums.
    pub is_macro: &'a [bool],
    /// Fillers are excluded from overflow.
    pub is_filler: &'a [bool],
}

impl DensityField {
    pub fn new(grid: Grid) -> DensityField {
        DensityField {
            grid,
            solver: PoissonSolver::new(grid),
            rho_inst: grid.zeros(),
            rho: grid.zeros(),
            phi: grid.zeros(),
            field: [grid.zeros(), grid.zeros(), grid.zeros()],
        }
    }

    /// Accumulates the density of `set`, solves for potential and field
    /// and returns energy, gradients and overflow at target density 1.
    pub fn evaluate(&mut self, set: &ChargeSet) -> DensityEval {
        let g = self.grid;
        let macros: Vec<Charge> =
            set.charges.iter().zip(set.is_macro).filter(|(_, &m)| m).map(|(c, _)| *c).collect();
        let mut rho_inst = macro_prefix_density(&g, &macros);
        let mut rho_fill = g.zeros();
        let inv = 1.0 / g.bin_volume();
        let mut movable = 0.0;
        for (n, q) in set.charges.iter().enumerate() {
            if set.is_macro[n] {
                movable += q.weight * q.cuboid.volume();
                continue;
            }
            let target = if set.is_filler[n] { &mut rho_fill } else { &mut rho_inst };
            if !set.is_filler[n] {
                movable += q.weight * q.cuboid.volume();
            }
            for_each_overlap(&g, &q.cuboid, |b, v| target[b] += q.weight * v * inv);
        }
        let rho: Vec<f64> = rho_inst.iter().zip(&rho_fill).map(|(a, b)| a + b).collect();
        let (_, phi, field) = self.solver.solve(&rho);
        let energy = energy(&g, &rho, &phi);
        let overflow = overflow(&g, &rho_inst, 1.0, movable);

        let fields = [&field[0][..], &field[1][..], &field[2][..]];
        let cuboids: Vec<Cuboid> = set.charges.iter().map(|q| q.cuboid).collect();
        let mut grad = field_integrals(&g, &cuboids, fields);
        if !macros.is_empty() {
            let sf = SuffixFields::new(&g, fields);
            for (n, q) in set.charges.iter().enumerate() {
                if set.is_macro[n] {
                    grad[n] = field_integral_prefix(&g, &q.cuboid, &sf);
                }
            }
        }
        for (n, q) in set.charges.iter().enumerate() {
            grad[n] = grad[n].map(|s| -q.weight * s);
            if set.is_filler[n] {
                grad[n][2] = 0.0;
            }
        }
        self.rho_inst = rho_inst;
        self.rho = rho;
        self.phi = phi;
        self.field = field;
        DensityEval { energy, grad, overflow }
    }
}

/// Writes a map as `PLACE3D-FIELD nx ny nz f64le` followed by the raw
/// little-endian values in `i + nx·(j + ny·k)` order.
pub fn write_field(mut w: impl Write, grid: &Grid, data: &[f64]) -> io::Result<()> {
    writeln!(w, "PLACE3D-FIELD {} {} {} f64le", grid.nx, grid.ny, grid.nz)?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macro_blend_endpoints() {
        let (t, b) = ((4.0, 6.0), (2.0, 3.0));
        assert_eq!(dynamic_size(t, b, true, 1.0, 4.0), b);
        assert_eq!(dynamic_size(t, b, true, 3.0, 4.0), t);
        assert_eq!(dynamic_size(t, b, true, 2.0, 4.0), (3.0, 4.5));
        assert_eq!(dynamic_size(t, b, true, 0.0, 4.0), b);
        assert_eq!(dynamic_size(t, b, false, 2.0, 4.0), b);
        assert_eq!(dynamic_size(t, b, false, 2.5, 4.0), t);
    }

    #[test]
    fn filler_volume_exact() {
        let f = filler_spec(100.0, 80.0, 40.0, 0.8, 7.0);
        let want = 0.5 * 100.0 * 80.0 * 40.0 * 0.2;
        assert!((f.count as f64 * f.width * f.height * 20.0 - want).abs() < 1e-9 * want);
        assert_eq!(filler_spec(1.0, 1.0, 1.0, 1.0, 1.0).count, 0);
    }

    #[test]
    fn overflow_cases() {
        let g = Grid::new(2.0, 1.0, 2, 1, 1);
        assert_eq!(overflow(&g, &[1.0, 0.5], 1.0, 1.5), 0.0);
        // Two unit cubes stacked in one bin.
        assert_eq!(overflow(&g, &[2.0, 0.0], 1.0, 2.0), 0.5);
    }

    #[test]
    fn field_dump_header() {
        let g = Grid::new(2.0, 2.0, 2, 1, 1);
        let mut buf = Vec::new();
        write_field(&mut buf, &g, &[1.0, 2.0]).unwrap();
        let head = b"PLACE3D-FIELD 2 1 1 f64le\n";
        assert_eq!(&buf[..head.len()], head);
        assert_eq!(buf.len(), head.len() + 16);
    }
}
