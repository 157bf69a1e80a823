//! Quadrature rules: Gauss-Legendre on [0, 1], reference triangle and
//! tetrahedron rules of requested polynomial degree, and tensor helpers.
//!
//! Simplex rules above degree 2 are collapsed (Duffy-type) tensor products of
//! Gauss-Legendre rules, sized so that the pulled-back integrand including the
//! map Jacobian is integrated exactly.  All weights are positive, which
//! matters for the logarithmic integrands fed through these rules.

/// Quadrature resolution used across assembly and error integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Polynomial exactness degree of the cell rules.
    pub volume_degree: usize,
    /// Gauss point count per clipped sub-segment of a line integral.
    pub line_points: usize,
    /// Polynomial exactness degree of the boundary facet rules.
    pub facet_degree: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            volume_degree: 4,
            line_points: 3,
            facet_degree: 2,
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1]; exact for degree 2n - 1.
/// Computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one Gauss point");
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Initial guess for the k-th root of P_n on [-1, 1].
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1].
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature point on the reference triangle {x, y >= 0, x + y <= 1}.
/// Weights sum to the reference area 1/2.
pub type TriPoint = (f64, f64, f64);

/// Reference triangle rule exact for polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> Vec<TriPoint> {
    if degree <= 2 {
        // Edge-midpoint rule, exact through degree 2.
        let w = 1.0 / 6.0;
        return vec![(0.5, 0.0, w), (0.5, 0.5, w), (0.0, 0.5, w)];
    }
    // Collapsed product x = u, y = v (1 - u); the Jacobian (1 - u) raises the
    // u-degree by one beyond the pullback degree.
    let n_u = (degree + 3) / 2; // 2 n - 1 >= degree + 1
    let n_v = (degree + 2) / 2; // 2 n - 1 >= degree
    let gu = gauss_legendre_01(n_u);
    let gv = gauss_legendre_01(n_v);
    let mut out = Vec::with_capacity(n_u * n_v);
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            out.push((u, v * (1.0 - u), wu * wv * (1.0 - u)));
        }
    }
    out
}

/// A quadrature point on the reference tetrahedron
/// {x, y, z >= 0, x + y + z <= 1}.  Weights sum to the reference volume 1/6.
pub type TetPoint = (f64, f64, f64, f64);

/// Reference tetrahedron rule exact for polynomials of total degree `degree`.
pub fn tet_rule(degree: usize) -> Vec<TetPoint> {
    if degree <= 1 {
        return vec![(0.25, 0.25, 0.25, 1.0 / 6.0)];
    }
    if degree == 2 {
        // Classic 4-point rule at (a, b, b, b) permutations.
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        let w = 1.0 / 24.0;
        return vec![
            (a, b, b, w),
            (b, a, b, w),
            (b, b, a, w),
            (b, b, b, w),
        ];
    }
    // Collapsed product x = u, y = v (1 - u), z = t (1 - u)(1 - v);
    // Jacobian (1 - u)^2 (1 - v).
    let n_u = (degree + 4) / 2; // 2 n - 1 >= degree + 2
    let n_v = (degree + 3) / 2; // 2 n - 1 >= degree + 1
    let n_t = (degree + 2) / 2; // 2 n - 1 >= degree
    let gu = gauss_legendre_01(n_u);
    let gv = gauss_legendre_01(n_v);
    let gt = gauss_legendre_01(n_t);
    let mut out = Vec::with_capacity(n_u * n_v * n_t);
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            for &(t, wt) in &gt {
                let x = u;
                let y = v * (1.0 - u);
                let z = t * (1.0 - u) * (1.0 - v);
                let w = wu * wv * wt * (1.0 - u) * (1.0 - u) * (1.0 - v);
                out.push((x, y, z, w));
            }
        }
    }
    out
}

/// Gauss rule on [0, 1] with the point count needed for `degree` exactness.
pub fn interval_rule_for_degree(degree: usize) -> Vec<(f64, f64)> {
    gauss_legendre_01(degree / 2 + 1)
}
