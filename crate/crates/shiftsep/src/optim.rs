//! Bounded Nelder-Mead simplex minimizer for the smooth localization
//! objective. Points are clamped to the box after every simplex move.

pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn clamp(&self, x: &mut [f64]) {
        for ((value, &lo), &hi) in x.iter_mut().zip(self.lower.iter()).zip(self.upper.iter()) {
            *value = value.clamp(lo, hi);
        }
    }
}

pub(crate) struct NelderMead {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 4000,
            f_tol: 1e-12,
            x_tol: 1e-10,
        }
    }
}

impl NelderMead {
    /// Minimize `f` from `start` inside `bounds`. Returns (x, f(x)).
    pub fn minimize(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        start: &[f64],
        bounds: &Bounds,
    ) -> (Vec<f64>, f64) {
        let dim = start.len();
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

        let mut evals = 0usize;
        let eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        // Initial simplex: start plus one vertex per axis, stepped by a
        // fraction of the box width.
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let mut x0 = start.to_vec();
        bounds.clamp(&mut x0);
        let f0 = eval(&x0, &mut evals);
        simplex.push((x0.clone(), f0));
        for axis in 0..dim {
            let width = bounds.upper[axis] - bounds.lower[axis];
            let step = if width > 0.0 { 0.05 * width } else { 0.1 };
            let mut x = x0.clone();
            x[axis] = if x[axis] + step <= bounds.upper[axis] {
                x[axis] + step
            } else {
                x[axis] - step
            };
            bounds.clamp(&mut x);
            let fx = eval(&x, &mut evals);
            simplex.push((x, fx));
        }

        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let best = simplex[0].1;
            let worst = simplex[dim].1;
            let spread = (worst - best).abs();
            let diameter = (1..=dim)
                .map(|i| {
                    simplex[i]
                        .0
                        .iter()
                        .zip(simplex[0].0.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            if spread <= self.f_tol * (1.0 + best.abs()) && diameter <= self.x_tol {
                break;
            }

            // Centroid of all but the worst vertex.
            let mut centroid = vec![0.0; dim];
            for vertex in simplex.iter().take(dim) {
                for (c, x) in centroid.iter_mut().zip(vertex.0.iter()) {
                    *c += x / dim as f64;
                }
            }

            let reflect = |scale: f64| -> Vec<f64> {
                let mut x: Vec<f64> = centroid
                    .iter()
                    .zip(simplex[dim].0.iter())
                    .map(|(c, w)| c + scale * (c - w))
                    .collect();
                bounds.clamp(&mut x);
                x
            };

            let xr = reflect(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = reflect(gamma);
                let fe = eval(&xe, &mut evals);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
                continue;
            }
            let xc = reflect(-rho);
            let fc = eval(&xc, &mut evals);
            if fc < simplex[dim].1 {
                simplex[dim] = (xc, fc);
                continue;
            }
            // Shrink toward the best vertex.
            let best_x = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                for (x, b) in vertex.0.iter_mut().zip(best_x.iter()) {
                    *x = b + sigma * (*x - b);
                }
                bounds.clamp(&mut vertex.0);
                vertex.1 = eval(&vertex.0, &mut evals);
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        simplex.swap_remove(0)
    }
}
