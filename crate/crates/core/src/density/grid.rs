use crate::par;

/// Regular bin lattice over the placement region `[0,d_x]×[0,d_y]×[0,d_z]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Bin extents `w_b`, `h_b`, `d_b`.
    pub wb: f64,
    pub hb: f64,
    pub db: f64,
}

impl Grid {
    /// Grid with `d_b = (w_b + h_b)/2`, so the region depth is `nz·d_b`.
    pub fn new(dx: f64, dy: f64, nx: usize, ny: usize, nz: usize) -> Grid {
        let wb = dx / nx as f64;
        let hb = dy / ny as f64;
        Grid { nx, ny, nz, wb, hb, db: (wb + hb) / 2.0 }
    }

    /// Grid with an explicit bin depth (planar layers use the full region
    /// depth as one bin).
    pub fn with_depth(dx: f64, dy: f64, nx: usize, ny: usize, nz: usize, dz: f64) -> Grid {
        Grid { nx, ny, nz, wb: dx / nx as f64, hb: dy / ny as f64, db: dz / nz as f64 }
    }

    /// Planar resolution for `n_cells` movable objects: the largest power
    /// of two `N` with at least four objects per 2D bin on average, in
    /// `[8, 256]`.
    pub fn planar_size(n_cells: usize) -> usize {
        let mut n = 8;
        while n < 256 && (2 * n) * (2 * n) * 4 <= n_cells {
            n *= 2;
        }
        n
    }

    pub fn dx(&self) -> f64 {
        self.wb * self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.hb * self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        self.db * self.nz as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin_volume(&self) -> f64 {
        self.wb * self.hb * self.db
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    /// Center of bin `(i, j, k)`.
    pub fn bin_center(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        ((i as f64 + 0.5) * self.wb, (j as f64 + 0.5) * self.hb, (k as f64 + 0.5) * self.db)
    }
}

/// Axis-aligned box given by its center and extents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cuboid {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub h: f64,
    pub d: f64,
}

impl Cuboid {
    pub fn volume(&self) -> f64 {
        self.w * self.h * self.d
    }

    fn lo_hi(&self, axis: usize) -> (f64, f64) {
        let (c, s) = match axis {
            0 => (self.x, self.w),
            1 => (self.y, self.h),
            _ => (self.z, self.d),
        };
        (c - s / 2.0, c + s / 2.0)
    }
}

/// A weighted charge: the object occupies `cuboid` with density `weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Charge {
    pub cuboid: Cuboid,
    pub weight: f64,
}

/// Bins touched by `[lo, hi]` along one axis with their overlap lengths.
fn axis_overlaps(lo: f64, hi: f64, size: f64, n: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let lo = lo.max(0.0);
    let hi = hi.min(size * n as f64);
    if hi <= lo {
        return;
    }
    let first = ((lo / size).floor() as usize).min(n - 1);
    let last = (((hi / size).ceil() as usize).max(1) - 1).min(n - 1);
    for i in first..=last {
        let a = lo.max(i as f64 * size);
        let b = hi.min((i + 1) as f64 * size);
        if b > a {
            out.push((i, b - a));
        }
    }
}

/// Visits every bin overlapped by the cuboid with the overlap volume.
pub fn for_each_overlap(grid: &Grid, c: &Cuboid, mut f: impl FnMut(usize, f64)) {
    let mut ox = Vec::new();
    let mut oy = Vec::new();
    let mut oz = Vec::new();
    let (a, b) = c.lo_hi(0);
    axis_overlaps(a, b, grid.wb, grid.nx, &mut ox);
    let (a, b) = c.lo_hi(1);
    axis_overlaps(a, b, grid.hb, grid.ny, &mut oy);
    let (a, b) = c.lo_hi(2);
    axis_overlaps(a, b, grid.db, grid.nz, &mut oz);
    for &(k, lz) in &oz {
        for &(j, ly) in &oy {
            let row = grid.nx * (j + grid.ny * k);
            for &(i, lx) in &ox {
                f(row + i, lx * ly * lz);
            }
        }
    }
}

/// Adds `ω·vol(D∩b)/vol(b)` of every charge into `rho` by bin traversal.
pub fn accumulate_direct(grid: &Grid, charges: &[Charge], rho: &mut [f64]) {
    let inv = 1.0 / grid.bin_volume();
    for q in charges {
        for_each_overlap(grid, &q.cuboid, |b, v| rho[b] += q.weight * v * inv);
    }
}

/// Bilinear-hat weights of one normalized coordinate: at most two
/// `(bin index, weight)` pairs. Indices are 0-based, i.e. entry `i`
/// carries `g(i - t)`.
fn hat(t: f64, n: usize) -> [(usize, f64); 2] {
    let f = t.floor();
    let frac = t - f;
    let i = f as isize;
    let mut out = [(usize::MAX, 0.0); 2];
    if i >= 0 && (i as usize) < n {
        out[0] = (i as usize, 1.0 - frac);
    }
    if frac > 0.0 && i + 1 >= 0 && ((i + 1) as usize) < n {
        out[1] = ((i + 1) as usize, frac);
    }
    out
}

/// Sparse corner map of a point: `A_ijk = g(i-x̂)·g(j-ŷ)·g(k-ẑ)` with
/// 0-based bin indices and `g(a) = max(1-|a|, 0)`. Entries past the last
/// bin are dropped; they only affect prefix sums outside the grid.
pub fn corner_map(grid: &Grid, x: f64, y: f64, z: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(8);
    visit_corner(grid, x, y, z, |b, w| out.push((b, w)));
    out
}

fn visit_corner(grid: &Grid, x: f64, y: f64, z: f64, mut f: impl FnMut(usize, f64)) {
    let x = x.clamp(0.0, grid.dx()) / grid.wb;
    let y = y.clamp(0.0, grid.dy()) / grid.hb;
    let z = z.clamp(0.0, grid.dz()) / grid.db;
    for (k, gz) in hat(z, grid.nz) {
        if k == usize::MAX || gz == 0.0 {
            continue;
        }
        for (j, gy) in hat(y, grid.ny) {
            if j == usize::MAX || gy == 0.0 {
                continue;
            }
            for (i, gx) in hat(x, grid.nx) {
                if i == usize::MAX || gx == 0.0 {
                    continue;
                }
                f(grid.idx(i, j, k), gx * gy * gz);
            }
        }
    }
}

/// The eight signed corners of a cuboid: `(x, y, z, -σxσyσz)`.
fn signed_corners(c: &Cuboid) -> [(f64, f64, f64, f64); 8] {
    let mut out = [(0.0, 0.0, 0.0, 0.0); 8];
    for (n, slot) in out.iter_mut().enumerate() {
        let sx = if n & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if n & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if n & 4 == 0 { -1.0 } else { 1.0 };
        *slot = (c.x + sx * c.w / 2.0, c.y + sy * c.h / 2.0, c.z + sz * c.d / 2.0, -sx * sy * sz);
    }
    out
}

/// Inclusive prefix sum along x, then y, then z, in place.
pub fn prefix_sum_3d(grid: &Grid, a: &mut [f64]) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    for k in 0..nz {
        for j in 0..ny {
            let r = nx * (j + ny * k);
            for i in 1..nx {
                a[r + i] += a[r + i - 1];
            }
        }
    }
    for k in 0..nz {
        for j in 1..ny {
            for i in 0..nx {
                a[grid.idx(i, j, k)] += a[grid.idx(i, j - 1, k)];
            }
        }
    }
    let plane = nx * ny;
    for k in 1..nz {
        for p in 0..plane {
            a[k * plane + p] += a[(k - 1) * plane + p];
        }
    }
}

/// Inclusive suffix sum along every axis: the adjoint of [`prefix_sum_3d`].
pub fn suffix_sum_3d(grid: &Grid, a: &mut [f64]) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    for k in 0..nz {
        for j in 0..ny {
            let r = nx * (j + ny * k);
            for i in (0..nx.saturating_sub(1)).rev() {
                a[r + i] += a[r + i + 1];
            }
        }
    }
    for k in 0..nz {
        for j in (0..ny.saturating_sub(1)).rev() {
            for i in 0..nx {
                a[grid.idx(i, j, k)] += a[grid.idx(i, j + 1, k)];
            }
        }
    }
    let plane = nx * ny;
    for k in (0..nz.saturating_sub(1)).rev() {
        for p in 0..plane {
            a[k * plane + p] += a[(k + 1) * plane + p];
        }
    }
}

/// Density of macro cuboids through signed corner maps and a single 3D
/// prefix sum; `O(bins + macros)`.
pub fn macro_prefix_density(grid: &Grid, macros: &[Charge]) -> Vec<f64> {
    let mut a = grid.zeros();
    if macros.is_empty() {
        return a;
    }
    for q in macros {
        for (x, y, z, s) in signed_corners(&q.cuboid) {
            visit_corner(grid, x, y, z, |b, g| a[b] += s * q.weight * g);
        }
    }
    prefix_sum_3d(grid, &mut a);
    a
}

/// Overlap-weighted field sums `Σ_b E_b·vol(D∩b)` for one cuboid by bin
/// traversal.
pub fn field_integral_direct(grid: &Grid, c: &Cuboid, fields: [&[f64]; 3]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for_each_overlap(grid, c, |b, v| {
        for a in 0..3 {
            s[a] += fields[a][b] * v;
        }
    });
    s
}

/// Suffix-summed field maps used by [`field_integral_prefix`].
#[derive(Clone, Debug)]
pub struct SuffixFields {
    maps: [Vec<f64>; 3],
}

impl SuffixFields {
    pub fn new(grid: &Grid, fields: [&[f64]; 3]) -> SuffixFields {
        let maps = fields.map(|f| {
            let mut m = f.to_vec();
            suffix_sum_3d(grid, &mut m);
            m
        });
        SuffixFields { maps }
    }
}

/// Same as [`field_integral_direct`] through the eight corner maps of the
/// cuboid, at most 64 bin reads per field.
pub fn field_integral_prefix(grid: &Grid, c: &Cuboid, sf: &SuffixFields) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (x, y, z, sign) in signed_corners(c) {
        visit_corner(grid, x, y, z, |b, g| {
            for a in 0..3 {
                s[a] += sign * g * sf.maps[a][b];
            }
        });
    }
    let v = grid.bin_volume();
    s.map(|t| t * v)
}

/// Field integrals for many cuboids, in input order.
pub fn field_integrals(grid: &Grid, cuboids: &[Cuboid], fields: [&[f64]; 3]) -> Vec<[f64; 3]> {
    let chunks = par::ranges(cuboids.len(), 1024);
    par::map(chunks, |r| cuboids[r].iter().map(|c| field_integral_direct(grid, c, fields)).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(n as f64, n as f64, n, n, n)
    }

    #[test]
    fn unit_cube_fills_one_bin() {
        let g = unit_grid(3);
        let mut rho = g.zeros();
        let c = Cuboid { x: 1.5, y: 0.5, z: 2.5, w: 1.0, h: 1.0, d: 1.0 };
        accumulate_direct(&g, &[Charge { cuboid: c, weight: 1.0 }], &mut rho);
        assert_eq!(rho[g.idx(1, 0, 2)], 1.0);
        assert_eq!(rho.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn straddling_splits_evenly() {
        let g = unit_grid(2);
        let mut rho = g.zeros();
        let c = Cuboid { x: 1.0, y: 0.5, z: 0.5, w: 1.0, h: 1.0, d: 1.0 };
        accumulate_direct(&g, &[Charge { cuboid: c, weight: 1.0 }], &mut rho);
        assert_eq!(rho[g.idx(0, 0, 0)], 0.5);
        assert_eq!(rho[g.idx(1, 0, 0)], 0.5);
    }

    #[test]
    fn corner_map_examples() {
        let g = unit_grid(4);
        assert_eq!(corner_map(&g, 1.0, 2.0, 3.0), vec![(g.idx(1, 2, 3), 1.0)]);
        let m = corner_map(&g, 0.5, 0.0, 0.0);
        assert_eq!(m, vec![(g.idx(0, 0, 0), 0.5), (g.idx(1, 0, 0), 0.5)]);
        let m = corner_map(&g, 0.5, 0.5, 0.5);
        assert_eq!(m.len(), 8);
        assert!(m.iter().all(|&(_, w)| w == 0.125));
    }

    #[test]
    fn prefix_sum_of_ones() {
        let g = unit_grid(2);
        let mut a = vec![1.0; 8];
        prefix_sum_3d(&g, &mut a);
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    assert_eq!(a[g.idx(i, j, k)], ((i + 1) * (j + 1) * (k + 1)) as f64);
                }
            }
        }
        let mut a = vec![0.0; 8];
        a[0] = 1.0;
        prefix_sum_3d(&g, &mut a);
        assert!(a.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn macro_over_two_bins() {
        let g = unit_grid(2);
        let c = Cuboid { x: 1.0, y: 0.5, z: 0.5, w: 2.0, h: 1.0, d: 1.0 };
        let rho = macro_prefix_density(&g, &[Charge { cuboid: c, weight: 1.0 }]);
        let mut want = g.zeros();
        want[g.idx(0, 0, 0)] = 1.0;
        want[g.idx(1, 0, 0)] = 1.0;
        for (a, b) in rho.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(macro_prefix_density(&g, &[]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn suffix_is_adjoint_of_prefix() {
        let g = Grid::new(3.0, 2.0, 3, 2, 2);
        let a: Vec<f64> = (0..g.len()).map(|i| (i * 7 % 5) as f64 - 1.5).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| (i * 3 % 4) as f64 + 0.25).collect();
        let mut pa = a.clone();
        prefix_sum_3d(&g, &mut pa);
        let mut sb = b.clone();
        suffix_sum_3d(&g, &mut sb);
        let l: f64 = pa.iter().zip(&b).map(|(x, y)| x * y).sum();
        let r: f64 = a.iter().zip(&sb).map(|(x, y)| x * y).sum();
        assert!((l - r).abs() < 1e-9);
    }

    #[test]
    fn planar_size_bounds() {
        assert_eq!(Grid::planar_size(10), 8);
        assert_eq!(Grid::planar_size(5000), 32);
        assert_eq!(Grid::planar_size(10_000_000), 256);
    }
}
