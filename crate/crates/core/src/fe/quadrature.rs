use crate::error::{Error, Result};
use crate::fe::reference::ElementKind;

/// Highest polynomial degree any rule here is built for.
pub const MAX_DEGREE: usize = 10;

/// Points and weights on a reference domain.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

fn check_degree(kind: &'static str, degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree { kind, degree });
    }
    Ok(())
}

/// Volume rule on the reference element exact for polynomials of total
/// degree `degree` (tensor-degree for quadrilaterals and hexahedra).
pub fn volume_rule(kind: ElementKind, degree: usize) -> Result<QuadratureRule> {
    check_degree(kind.keyword(), degree)?;
    match kind {
        ElementKind::Quadrilateral => Ok(tensor_rule(2, points_for(degree), -1.0, 1.0)),
        ElementKind::Hexahedron => Ok(tensor_rule(3, points_for(degree), -1.0, 1.0)),
        ElementKind::Simplex => Ok(triangle_rule(degree)),
    }
}

/// Rule over the unit facet `[0,1]^(dim-1)` used to integrate on element
/// faces, exact to `degree` in each facet coordinate.
pub fn facet_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    check_degree("facet", degree)?;
    Ok(tensor_rule(dim - 1, points_for(degree), 0.0, 1.0))
}

fn tensor_rule(dim: usize, n: usize, a: f64, b: f64) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let x: Vec<f64> = x.iter().map(|t| a + half * (t + 1.0)).collect();
    let w: Vec<f64> = w.iter().map(|t| t * half).collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut rest = flat;
        let mut p = [0.0; 3];
        let mut weight = 1.0;
        for slot in p.iter_mut().take(dim) {
            let i = rest % n;
            rest /= n;
            *slot = x[i];
            weight *= w[i];
        }
        points.push(p);
        weights.push(weight);
    }
    QuadratureRule { points, weights }
}

/// Orbit of the symmetric point with barycentric coordinates `(a, a, 1-2a)`.
fn orbit3(a: f64, weight: f64, points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a], [b, a], [a, b]] {
        points.push([p[0], p[1], 0.0]);
        weights.push(0.5 * weight);
    }
}

/// Positive interior rules on the unit triangle: symmetric rules up to
/// degree 5, collapsed Gauss products above.
fn triangle_rule(degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        0 | 1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0, 0.0]);
            weights.push(0.5);
        }
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights),
        3 | 4 => {
            orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut points, &mut weights);
            orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut points, &mut weights);
        }
        5 => {
            points.push([1.0 / 3.0, 1.0 / 3.0, 0.0]);
            weights.push(0.5 * 0.225);
            orbit3(0.470_142_064_105_115, 0.132_394_152_788_506, &mut points, &mut weights);
            orbit3(0.101_286_507_323_456, 0.125_939_180_544_827, &mut points, &mut weights);
        }
        _ => {
            // (u, v) in [0,1]^2 -> (u (1 - v), v), Jacobian (1 - v).
            let nu = points_for(degree);
            let nv = points_for(degree + 1);
            let (xu, wu) = gauss_legendre(nu);
            let (xv, wv) = gauss_legendre(nv);
            for (v, wvv) in xv.iter().zip(&wv) {
                let v = 0.5 * (v + 1.0);
                for (u, wuu) in xu.iter().zip(&wu) {
                    let u = 0.5 * (u + 1.0);
                    points.push([u * (1.0 - v), v, 0.0]);
                    weights.push(0.25 * wuu * wvv * (1.0 - v));
                }
            }
        }
    }
    QuadratureRule { points, weights }
}
