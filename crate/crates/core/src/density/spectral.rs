use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

/// Cosine and sine transforms of bin-centered samples, built on
/// length-`2N` FFTs with cached plans.
pub struct Transforms {
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl Default for Transforms {
    fn default() -> Self {
        Transforms::new()
    }
}

impl Transforms {
    pub fn new() -> Transforms {
        Transforms { fwd: HashMap::new(), inv: HashMap::new() }
    }

    fn plans(&mut self, n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        let mut planner = FftPlanner::new();
        let f = self.fwd.entry(n).or_insert_with(|| planner.plan_fft_forward(2 * n)).clone();
        let i = self.inv.entry(n).or_insert_with(|| planner.plan_fft_inverse(2 * n)).clone();
        (f, i)
    }

    /// `X_k = Σ_m x_m cos(πk(m+½)/N)`, in place.
    pub fn dct2(&mut self, x: &mut [f64]) {
        let n = x.len();
        let (fft, _) = self.plans(n);
        let mut buf = Vec::with_capacity(2 * n);
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.extend(x.iter().rev().map(|&v| Complex64::new(v, 0.0)));
        fft.process(&mut buf);
        for (k, out) in x.iter_mut().enumerate() {
            let t = Complex64::from_polar(1.0, -PI * k as f64 / (2 * n) as f64);
            *out = 0.5 * (buf[k] * t).re;
        }
    }

    /// `x_m = Σ_k Z_k cos(πk(m+½)/N)`, in place.
    pub fn cos_synth(&mut self, z: &mut [f64]) {
        let n = z.len();
        let (_, ifft) = self.plans(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (k, &v) in z.iter().enumerate() {
            buf[k] = v * Complex64::from_polar(1.0, PI * k as f64 / (2 * n) as f64);
        }
        ifft.process(&mut buf);
        for (m, out) in z.iter_mut().enumerate() {
            *out = buf[m].re;
        }
    }

    /// `x_m = Σ_{k≥1} Z_k sin(πk(m+½)/N)`, in place (`Z_0` is ignored).
    pub fn sin_synth(&mut self, z: &mut [f64]) {
        let n = z.len();
        // sin(πk(m+½)/N) = (-1)^m cos(π(N-k)(m+½)/N)
        let mut c = vec![0.0; n];
        for k in 1..n {
            c[n - k] = z[k];
        }
        self.cos_synth(&mut c);
        for (m, out) in z.iter_mut().enumerate() {
            *out = if m % 2 == 0 { c[m] } else { -c[m] };
        }
    }
}

/// Applies a 1D transform to every line of a 3D map along `axis`.
fn along_axis(grid: &Grid, a: &mut [f64], axis: usize, mut f: impl FnMut(&mut [f64])) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    match axis {
        0 => {
            for line in a.chunks_mut(nx) {
                f(line);
            }
        }
        1 => {
            let mut buf = vec![0.0; ny];
            for k in 0..nz {
                for i in 0..nx {
                    for j in 0..ny {
                        buf[j] = a[grid.idx(i, j, k)];
                    }
                    f(&mut buf);
                    for j in 0..ny {
                        a[grid.idx(i, j, k)] = buf[j];
                    }
                }
            }
        }
        _ => {
            let mut buf = vec![0.0; nz];
            let plane = nx * ny;
            for p in 0..plane {
                for k in 0..nz {
                    buf[k] = a[p + k * plane];
                }
                f(&mut buf);
                for k in 0..nz {
                    a[p + k * plane] = buf[k];
                }
            }
        }
    }
}

/// Spectral Poisson solver for `∇²φ = -ρ` on the grid with Neumann
/// boundaries.
pub struct PoissonSolver {
    pub grid: Grid,
    tf: Transforms,
}

/// Cosine coefficients `a_jkl` of a density map.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub coeffs: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(grid: Grid) -> PoissonSolver {
        PoissonSolver { grid, tf: Transforms::new() }
    }

    fn omega(&self) -> [Vec<f64>; 3] {
        let g = &self.grid;
        [
            (0..g.nx).map(|j| PI * j as f64 / g.dx()).collect(),
            (0..g.ny).map(|k| PI * k as f64 / g.dy()).collect(),
            (0..g.nz).map(|l| PI * l as f64 / g.dz()).collect(),
        ]
    }

    /// `a_jkl = (1/N)·Σ_b ρ_b cos(ω_j x_b) cos(ω_k y_b) cos(ω_l z_b)`.
    pub fn analyze(&mut self, rho: &[f64]) -> Spectrum {
        let g = self.grid;
        let mut a = rho.to_vec();
        for axis in 0..3 {
            let tf = &mut self.tf;
            along_axis(&g, &mut a, axis, |l| tf.dct2(l));
        }
        let s = 1.0 / g.len() as f64;
        a.iter_mut().for_each(|v| *v *= s);
        Spectrum { coeffs: a }
    }

    /// Synthesizes `Σ c_j c_k c_l a_jkl·m_jkl·basis` where the basis is a
    /// cosine on every axis except `sine_axis`, `c_0 = 1` and `c_{>0} = 2`.
    /// The DC term is always excluded.
    fn synth(&mut self, sp: &Spectrum, sine_axis: Option<usize>, mult: impl Fn([f64; 3], f64) -> f64) -> Vec<f64> {
        let g = self.grid;
        let w = self.omega();
        let mut a = sp.coeffs.clone();
        for l in 0..g.nz {
            for k in 0..g.ny {
                for j in 0..g.nx {
                    let b = g.idx(j, k, l);
                    if j == 0 && k == 0 && l == 0 {
                        a[b] = 0.0;
                        continue;
                    }
                    let om = [w[0][j], w[1][k], w[2][l]];
                    let c = [j, k, l].iter().map(|&t| if t == 0 { 1.0 } else { 2.0 }).product::<f64>();
                    let o2 = om[0] * om[0] + om[1] * om[1] + om[2] * om[2];
                    a[b] *= c * mult(om, o2);
                }
            }
        }
        for axis in 0..3 {
            let tf = &mut self.tf;
            if sine_axis == Some(axis) {
                along_axis(&g, &mut a, axis, |l| tf.sin_synth(l));
            } else {
                along_axis(&g, &mut a, axis, |l| tf.cos_synth(l));
            }
        }
        a
    }

    /// Potential `φ = Σ a_jkl/|ω|²·cos·cos·cos`.
    pub fn potential(&mut self, sp: &Spectrum) -> Vec<f64> {
        self.synth(sp, None, |_, o2| 1.0 / o2)
    }

    /// Field `E = -∇φ`, one map per axis.
    pub fn field(&mut self, sp: &Spectrum) -> [Vec<f64>; 3] {
        [
            self.synth(sp, Some(0), |o, o2| o[0] / o2),
            self.synth(sp, Some(1), |o, o2| o[1] / o2),
            self.synth(sp, Some(2), |o, o2| o[2] / o2),
        ]
    }

    /// Potential and field of a density map.
    pub fn solve(&mut self, rho: &[f64]) -> (Spectrum, Vec<f64>, [Vec<f64>; 3]) {
        let sp = self.analyze(rho);
        let phi = self.potential(&sp);
        let e = self.field(&sp);
        (sp, phi, e)
    }
}
