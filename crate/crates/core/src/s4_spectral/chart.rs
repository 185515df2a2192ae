//! Exponential-map charts on S⁴ and Newton iteration for critical points of
//! smooth functions given as point evaluators.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

/// Normal-coordinate chart at `base`: `ξ ↦ cos|ξ| base + sin|ξ| ξ/|ξ|` with
/// `ξ` expanded in an orthonormal tangent frame.
#[derive(Debug, Clone)]
pub struct TangentChart {
    base: [f64; 5],
    frame: [[f64; 5]; 4],
}

impl TangentChart {
    pub fn at(base: [f64; 5]) -> Self {
        let base = normalized(base);
        // drop the standard axis most aligned with base, Gram–Schmidt the rest
        let skip = (0..5)
            .max_by(|&i, &j| base[i].abs().total_cmp(&base[j].abs()))
            .unwrap();
        let mut frame = [[0.0; 5]; 4];
        let mut n = 0;
        for axis in (0..5).filter(|&i| i != skip) {
            let mut v = [0.0; 5];
            v[axis] = 1.0;
            for _ in 0..2 {
                let d = dot(&v, &base);
                axpy(&mut v, -d, &base);
                for prev in frame.iter().take(n) {
                    let d = dot(&v, prev);
                    axpy(&mut v, -d, prev);
                }
            }
            frame[n] = normalized(v);
            n += 1;
        }
        TangentChart { base, frame }
    }

    pub fn base(&self) -> &[f64; 5] {
        &self.base
    }

    pub fn frame(&self) -> &[[f64; 5]; 4] {
        &self.frame
    }

    /// Ambient tangent vector of chart coordinates `xi`.
    pub fn tangent(&self, xi: &[f64; 4]) -> [f64; 5] {
        let mut v = [0.0; 5];
        for (c, e) in xi.iter().zip(&self.frame) {
            axpy(&mut v, *c, e);
        }
        v
    }

    pub fn point(&self, xi: &[f64; 4]) -> [f64; 5] {
        let v = self.tangent(xi);
        let r = norm(&v);
        if r == 0.0 {
            return self.base;
        }
        let (s, c) = r.sin_cos();
        let mut x = self.base.map(|b| c * b);
        axpy(&mut x, s / r, &v);
        normalized(x)
    }
}

/// Value, gradient and Hessian of `f ∘ exp` at the chart origin.
#[derive(Debug, Clone, Copy)]
pub struct LocalDerivatives {
    pub value: f64,
    pub gradient: [f64; 4],
    pub hessian: [[f64; 4]; 4],
}

impl LocalDerivatives {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Hessian eigenvalues in ascending order.
    pub fn hessian_eigenvalues(&self) -> [f64; 4] {
        let m = Matrix4::from_fn(|i, j| self.hessian[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3]]
    }
}

/// Fourth-order central differences for the gradient, second-order for the
/// Hessian, both with step `h` in normal coordinates.
pub fn chart_derivatives(f: &mut impl FnMut(&[f64; 5]) -> f64, chart: &TangentChart, h: f64) -> LocalDerivatives {
    let mut at = |xi: [f64; 4]| f(&chart.point(&xi));
    let f0 = at([0.0; 4]);
    let mut gradient = [0.0; 4];
    let mut hessian = [[0.0; 4]; 4];
    let e = |i: usize, s: f64| {
        let mut xi = [0.0; 4];
        xi[i] = s;
        xi
    };
    for i in 0..4 {
        let p1 = at(e(i, h));
        let m1 = at(e(i, -h));
        let p2 = at(e(i, 2.0 * h));
        let m2 = at(e(i, -2.0 * h));
        gradient[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        hessian[i][i] = (p1 - 2.0 * f0 + m1) / (h * h);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut pp = [0.0; 4];
            pp[i] = h;
            pp[j] = h;
            let mut pm = pp;
            pm[j] = -h;
            let mp = pm.map(|v| -v);
            let mm = pp.map(|v| -v);
            let v = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h * h);
            hessian[i][j] = v;
            hessian[j][i] = v;
        }
    }
    LocalDerivatives {
        value: f0,
        gradient,
        hessian,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub fd_step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Largest geodesic step per iteration.
    pub max_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            fd_step: 1e-4,
            grad_tol: 1e-9,
            max_iters: 50,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalSearch {
    pub location: [f64; 5],
    pub derivatives: LocalDerivatives,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration for `∇f = 0` in successive exponential charts.
pub fn newton_critical(f: &mut impl FnMut(&[f64; 5]) -> f64, start: [f64; 5], opts: &NewtonOptions) -> CriticalSearch {
    let mut x = normalized(start);
    let mut chart = TangentChart::at(x);
    let mut d = chart_derivatives(f, &chart, opts.fd_step);
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let g = Vector4::from(d.gradient);
        if g.norm() <= 0.01 * opts.grad_tol {
            break;
        }
        let h = Matrix4::from_fn(|i, j| d.hessian[i][j]);
        let Some(step) = h.lu().solve(&(-g)) else {
            break;
        };
        let mut step = step;
        let len = step.norm();
        if !len.is_finite() {
            break;
        }
        if len > opts.max_step {
            step *= opts.max_step / len;
        }
        x = chart.point(&[step[0], step[1], step[2], step[3]]);
        chart = TangentChart::at(x);
        d = chart_derivatives(f, &chart, opts.fd_step);
        iterations += 1;
        if len < 1e-14 {
            break;
        }
    }
    CriticalSearch {
        location: x,
        converged: d.grad_norm() <= opts.grad_tol,
        derivatives: d,
        iterations,
    }
}

pub fn geodesic_distance(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    // atan2 form stays accurate for nearly equal and nearly antipodal points
    let mut cross2 = 0.0;
    for i in 0..5 {
        for j in i + 1..5 {
            let c = a[i] * b[j] - a[j] * b[i];
            cross2 += c * c;
        }
    }
    cross2.sqrt().atan2(dot(a, b))
}

pub(crate) fn dot(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64; 5]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalized(a: [f64; 5]) -> [f64; 5] {
    let n = norm(&a);
    a.map(|v| v / n)
}

fn axpy(y: &mut [f64; 5], a: f64, x: &[f64; 5]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal_and_tangent() {
        let chart = TangentChart::at([0.3, -0.2, 0.5, 0.1, 0.6]);
        let b = chart.base();
        for (i, e) in chart.frame().iter().enumerate() {
            assert!(dot(e, b).abs() < 1e-15);
            for (j, g) in chart.frame().iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(e, g) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_map_moves_by_geodesic_length() {
        let chart = TangentChart::at([0.0, 0.0, 0.0, 0.0, 1.0]);
        let x = chart.point(&[0.3, 0.4, 0.0, 0.0]);
        assert!((geodesic_distance(&x, chart.base()) - 0.5).abs() < 1e-15);
        assert!((norm(&x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn height_function_critical_points() {
        let mut f = |x: &[f64; 5]| 2.0 + x[4];
        let top = newton_critical(&mut f, normalized([0.1, 0.2, 0.0, -0.1, 0.9]), &NewtonOptions::default());
        assert!(top.converged);
        assert!(geodesic_distance(&top.location, &[0.0, 0.0, 0.0, 0.0, 1.0]) < 1e-8);
        // Hessian of x5 at the north pole is -I in normal coordinates
        for ev in top.derivatives.hessian_eigenvalues() {
            assert!((ev + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn geodesic_distance_edge_cases() {
        let a = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(geodesic_distance(&a, &a), 0.0);
        assert!((geodesic_distance(&a, &[-1.0, 0.0, 0.0, 0.0, 0.0]) - std::f64::consts::PI).abs() < 1e-15);
        assert!((geodesic_distance(&a, &[0.0, 1.0, 0.0, 0.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
