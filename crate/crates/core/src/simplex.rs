//! Derivative-free Nelder–Mead minimization.
//!
//! Objectives may return `+∞` to mark infeasible points; those vertices are
//! always ranked worst and never accepted as improvements.

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Converged when `f_worst − f_best ≤ f_tolerance · max(1, |f_best|)`.
    pub f_tolerance: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iterations: 300,
            f_tolerance: 1e-10,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let dim = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..dim {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[dim].1;
            if worst.is_finite() && worst - best <= self.f_tolerance * best.abs().max(1.0) {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / dim as f64;
                }
            }
            let along = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst_x = simplex[dim].0.clone();
            let second = simplex[dim - 1].1;

            let xr = along(REFLECT, &worst_x);
            let fr = eval(&xr);
            if fr < best {
                let xe = along(EXPAND, &worst_x);
                let fe = eval(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < second {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst {
                    let xc = along(CONTRACT, &worst_x);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-CONTRACT, &worst_x);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < worst.min(fr) {
                    simplex[dim] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = anchor
                            .iter()
                            .zip(&vertex.0)
                            .map(|(a, v)| a + SHRINK * (v - a))
                            .collect();
                        let v = eval(&x);
                        *vertex = (x, v);
                    }
                }
            }
            trace.push(simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min));
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            converged,
            trace,
        }
    }
}
