//! Central finite differences for the horizontal vector fields
//! `X_i = d_i + 2 x_{i+n} d_t` and `Y_i = d_{i+n} - 2 x_i d_t`.

use crate::group::{self, GroupSpace, Point};

/// Default step in gauge-normalized coordinates.
pub const DEFAULT_STEP: f64 = 1e-5;

fn partial<F: Fn(&[f64]) -> f64>(f: &F, p: &[f64], axis: usize, h: f64) -> f64 {
    let mut a = p.to_vec();
    let mut b = p.to_vec();
    a[axis] += h;
    b[axis] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// Horizontal gradient `(X_1 f, .., X_n f, Y_1 f, .., Y_n f)` from central
/// differences along the coordinate axes. On `R^d` this is the ordinary
/// gradient.
pub fn horizontal_gradient_fd<F: Fn(&[f64]) -> f64>(
    space: &GroupSpace,
    f: F,
    p: &Point,
    h: f64,
) -> Vec<f64> {
    let p = p.coords();
    match *space {
        GroupSpace::Euclidean { d } => (0..d).map(|i| partial(&f, p, i, h)).collect(),
        GroupSpace::Heisenberg { n } => {
            let dt = partial(&f, p, 2 * n, h);
            let mut out = vec![0.0; 2 * n];
            for i in 0..n {
                out[i] = partial(&f, p, i, h) + 2.0 * p[i + n] * dt;
                out[i + n] = partial(&f, p, i + n, h) - 2.0 * p[i] * dt;
            }
            out
        }
    }
}

/// Sub-Laplacian `sum X_i^2 + Y_i^2` from second central differences along
/// the flows `p -> p . (eps e_k, 0)` of the horizontal fields.
pub fn sublaplacian_fd<F: Fn(&[f64]) -> f64>(space: &GroupSpace, f: F, p: &Point, h: f64) -> f64 {
    let p = p.coords();
    let f0 = f(p);
    let mut total = 0.0;
    for k in 0..space.horizontal_len() {
        let mut e = vec![0.0; space.coord_len()];
        e[k] = h;
        let fwd = group::product(space, p, &e);
        e[k] = -h;
        let bwd = group::product(space, p, &e);
        total += (f(&fwd) - 2.0 * f0 + f(&bwd)) / (h * h);
    }
    total
}

/// [`horizontal_gradient_fd`] evaluated at the gauge-normalized point
/// `delta_{1/||p||} p` on `g = f o delta_{||p||}` and scaled back, so the
/// step `h` is relative to the size of `p`.
pub fn horizontal_gradient_fd_normalized<F: Fn(&[f64]) -> f64>(
    space: &GroupSpace,
    f: F,
    p: &Point,
    h: f64,
) -> Vec<f64> {
    let rho: f64 = group::gauge(space, p.coords());
    if rho == 0.0 {
        return horizontal_gradient_fd(space, f, p, h);
    }
    let g = |q: &[f64]| f(&group::dilation(space, rho, q));
    let unit = Point::new(group::dilation(space, 1.0 / rho, p.coords()));
    horizontal_gradient_fd(space, g, &unit, h)
        .into_iter()
        .map(|v| v / rho)
        .collect()
}

/// [`sublaplacian_fd`] with the same gauge normalization.
pub fn sublaplacian_fd_normalized<F: Fn(&[f64]) -> f64>(
    space: &GroupSpace,
    f: F,
    p: &Point,
    h: f64,
) -> f64 {
    let rho: f64 = group::gauge(space, p.coords());
    if rho == 0.0 {
        return sublaplacian_fd(space, f, p, h);
    }
    let g = |q: &[f64]| f(&group::dilation(space, rho, q));
    let unit = Point::new(group::dilation(space, 1.0 / rho, p.coords()));
    sublaplacian_fd(space, g, &unit, h) / (rho * rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> GroupSpace {
        GroupSpace::heisenberg(1).unwrap()
    }

    #[test]
    fn gradient_of_coordinates() {
        let g = horizontal_gradient_fd(&h1(), |q| q[0], &Point::from([0.3, -0.2, 0.9]), 1e-5);
        assert!((g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10);
        let g = horizontal_gradient_fd(&h1(), |q| q[2], &Point::from([1.0, 2.0, 0.0]), 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn sublaplacian_of_simple_fields() {
        let p = Point::from([0.4, 0.1, -0.3]);
        let v = sublaplacian_fd(&h1(), |q| q[0] * q[0], &p, 1e-3);
        assert!((v - 2.0).abs() < 1e-6);
        let v = sublaplacian_fd(&h1(), |_| 3.5, &p, 1e-3);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn euclidean_gradient() {
        let e2 = GroupSpace::euclidean(2).unwrap();
        let g = horizontal_gradient_fd(&e2, |q| q[0] * q[1], &Point::from([2.0, 3.0]), 1e-5);
        assert!((g[0] - 3.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }
}
