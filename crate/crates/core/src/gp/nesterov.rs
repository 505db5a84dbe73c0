use crate::error::{PlaceError, Result};

/// A differentiable objective over a flat variable vector.
pub trait Objective {
    /// Evaluates at `v`, writing the (preconditioned) descent gradient into
    /// `grad`, and returns the objective value.
    fn eval(&mut self, v: &[f64], grad: &mut [f64]) -> Result<f64>;
    /// Projects `v` onto the feasible box in place.
    fn project(&self, v: &mut [f64]);
    /// Length scale for the first step-size probe.
    fn probe_length(&self) -> f64 {
        1.0
    }
    /// Largest coordinate change allowed in one step.
    fn max_move(&self) -> f64 {
        f64::INFINITY
    }
}

/// Accelerated gradient descent with a Lipschitz step-size prediction and
/// bounded backtracking.
#[derive(Clone, Debug)]
pub struct Nesterov {
    /// Major solution.
    pub u: Vec<f64>,
    /// Reference solution where the gradient was last evaluated.
    pub v: Vec<f64>,
    pub grad: Vec<f64>,
    pub value: f64,
    pub step: f64,
    a: f64,
    max_backtracks: usize,
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Nesterov {
    pub fn new(x0: Vec<f64>, obj: &mut impl Objective) -> Result<Nesterov> {
        let mut u = x0;
        obj.project(&mut u);
        let mut grad = vec![0.0; u.len()];
        let value = obj.eval(&u, &mut grad)?;
        let gn = norm(&grad);
        let mut step = 0.0;
        if gn > 0.0 {
            let h = obj.probe_length();
            let mut t: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| x - h * g / gn).collect();
            obj.project(&mut t);
            let mut gt = vec![0.0; t.len()];
            obj.eval(&t, &mut gt)?;
            let dg = dist(&gt, &grad);
            step = if dg > 0.0 { dist(&t, &u) / dg } else { h / gn };
            // Restore the objective's cached state at the start point.
            obj.eval(&u, &mut gt)?;
        }
        Ok(Nesterov { v: u.clone(), u, grad, value, step, a: 1.0, max_backtracks: 3 })
    }

    /// One accelerated step. Returns `false` once the step size has
    /// underflowed and no further progress is possible.
    pub fn step(&mut self, obj: &mut impl Objective) -> Result<bool> {
        if !(self.step > 1e-300) {
            return Ok(norm(&self.grad) == 0.0);
        }
        let gmax = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax > 0.0 {
            self.step = self.step.min(obj.max_move() / gmax);
        }
        let a_new = (1.0 + (4.0 * self.a * self.a + 1.0).sqrt()) / 2.0;
        let coef = (self.a - 1.0) / a_new;
        let mut g_new = vec![0.0; self.u.len()];
        let mut tries = 0;
        loop {
            let mut u_new: Vec<f64> = self.v.iter().zip(&self.grad).map(|(v, g)| v - self.step * g).collect();
            obj.project(&mut u_new);
            let mut v_new: Vec<f64> = u_new.iter().zip(&self.u).map(|(n, o)| n + coef * (n - o)).collect();
            obj.project(&mut v_new);
            let value = obj.eval(&v_new, &mut g_new)?;
            if !value.is_finite() || g_new.iter().any(|g| !g.is_finite()) {
                return Err(PlaceError::NonFinite { iteration: 0, object: "gradient".into() });
            }
            let dv = dist(&v_new, &self.v);
            let dg = dist(&g_new, &self.grad);
            let predicted = if dg > 0.0 { dv / dg } else { self.step };
            tries += 1;
            if predicted >= 0.95 * self.step || tries > self.max_backtracks {
                // Momentum restart once the step turns uphill.
                let uphill: f64 =
                    g_new.iter().zip(u_new.iter().zip(&self.u)).map(|(g, (n, o))| g * (n - o)).sum();
                self.a = if uphill > 0.0 { 1.0 } else { a_new };
                self.u = u_new;
                self.v = v_new;
                std::mem::swap(&mut self.grad, &mut g_new);
                self.value = value;
                self.step = predicted;
                return Ok(true);
            }
            self.step = predicted;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        c: Vec<f64>,
        m: Vec<f64>,
        lo: f64,
    }

    impl Objective for Quadratic {
        fn eval(&mut self, v: &[f64], g: &mut [f64]) -> Result<f64> {
            let mut f = 0.0;
            for i in 0..v.len() {
                g[i] = self.c[i] * (v[i] - self.m[i]);
                f += 0.5 * self.c[i] * (v[i] - self.m[i]).powi(2);
            }
            Ok(f)
        }
        fn project(&self, v: &mut [f64]) {
            v.iter_mut().for_each(|x| *x = x.max(self.lo));
        }
    }

    #[test]
    fn quadratic_converges() {
        let mut q = Quadratic { c: vec![1.0, 4.0, 9.0, 0.5], m: vec![3.0, -2.0, 0.5, 10.0], lo: -100.0 };
        let mut n = Nesterov::new(vec![0.0; 4], &mut q).unwrap();
        for _ in 0..200 {
            n.step(&mut q).unwrap();
        }
        for (u, m) in n.u.iter().zip(&q.m) {
            assert!((u - m).abs() < 1e-6, "{u} vs {m}");
        }
    }

    #[test]
    fn zero_gradient_keeps_state() {
        let mut q = Quadratic { c: vec![1.0, 1.0], m: vec![2.0, 3.0], lo: -100.0 };
        let mut n = Nesterov::new(vec![2.0, 3.0], &mut q).unwrap();
        n.step(&mut q).unwrap();
        assert_eq!(n.u, vec![2.0, 3.0]);
    }

    #[test]
    fn projection_clamps_exactly() {
        let mut q = Quadratic { c: vec![1.0], m: vec![-5.0], lo: 1.0 };
        let mut n = Nesterov::new(vec![4.0], &mut q).unwrap();
        for _ in 0..20 {
            n.step(&mut q).unwrap();
        }
        assert_eq!(n.u, vec![1.0]);
    }
}
