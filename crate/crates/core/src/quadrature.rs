//! Quadrature on the unit interval and on the reference triangle
//! `{(xi, eta) : xi, eta >= 0, xi + eta <= 1}`.
//!
//! Triangle rules are collapsed (Duffy) products of Gauss-Legendre rules, so a
//! rule of any polynomial exactness degree is available.

use crate::scalar::Real;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LineRule<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> LineRule<T> {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one point");
        let mut points = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_n.
            let theta = T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + half);
            let mut x = theta.cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::lit(4.0) {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            // map from [-1, 1] to [0, 1]
            points[i] = (T::one() - x) * half;
            points[n - 1 - i] = (T::one() + x) * half;
            weights[i] = w * half;
            weights[n - 1 - i] = w * half;
        }
        if n % 2 == 1 {
            points[n / 2] = half;
        }
        Self { points, weights }
    }

    /// Smallest rule exact for polynomials of `degree`.
    pub fn with_degree(degree: usize) -> Self {
        Self::gauss_legendre(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let dp = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Quadrature rule on the reference triangle; weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> TriangleRule<T> {
    /// Collapsed Gauss rule exact for all polynomials of total `degree`.
    pub fn with_degree(degree: usize) -> Self {
        // The collapse Jacobian (1 - u) raises the degree in u by one.
        let ru = LineRule::<T>::with_degree(degree + 1);
        let rv = LineRule::<T>::with_degree(degree);
        let mut points = Vec::with_capacity(ru.len() * rv.len());
        let mut weights = Vec::with_capacity(ru.len() * rv.len());
        for (&u, &wu) in ru.points.iter().zip(&ru.weights) {
            for (&v, &wv) in rv.points.iter().zip(&rv.weights) {
                points.push([u, v * (T::one() - u)]);
                weights.push(wu * wv * (T::one() - u));
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
