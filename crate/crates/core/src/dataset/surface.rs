//! Analytic surfaces: area-weighted sampling and exact point-to-surface distance.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3, Vector4};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, Point};
use crate::error::{Error, Result};

/// Surface geometry in its local frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Sphere {
        radius: f64,
    },
    /// Ring around the z axis.
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    /// Open tube around the z axis, `|z| <= height / 2`.
    Cylinder {
        radius: f64,
        height: f64,
    },
    /// Rectangle in the xy plane centered at the origin.
    Plane {
        width: f64,
        depth: f64,
    },
    /// `(|x/a|^(2/e2) + |y/b|^(2/e2))^(e2/e1) + |z/c|^(2/e1) = 1` with exponents in `[0.2, 1]`.
    Superellipsoid {
        axes: [f64; 3],
        e1: f64,
        e2: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Torus,
    Cylinder,
    Plane,
    Superellipsoid,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Torus,
        ShapeKind::Cylinder,
        ShapeKind::Plane,
        ShapeKind::Superellipsoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Torus => "torus",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Plane => "plane",
            ShapeKind::Superellipsoid => "superellipsoid",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown surface kind `{s}`")))
    }
}

/// Rigid transform `world = rotation * local + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0; 3],
    };

    pub fn random(rng: &mut impl Rng, max_offset: f64) -> Pose {
        let t = if max_offset > 0.0 {
            [0; 3].map(|_| rng.gen_range(-max_offset..=max_offset))
        } else {
            [0.0; 3]
        };
        Pose {
            rotation: random_rotation(rng),
            translation: t,
        }
    }

    pub fn to_world(&self, p: &Point) -> Point {
        let r = &self.rotation;
        let t = &self.translation;
        [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i])
    }

    pub fn to_local(&self, p: &Point) -> Point {
        let r = &self.rotation;
        let d = [
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ];
        [0, 1, 2].map(|j| r[0][j] * d[0] + r[1][j] * d[1] + r[2][j] * d[2])
    }

    /// Largest deviation of `R^T R` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let m = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }
}

/// Rotation drawn uniformly from SO(3) via a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let q = loop {
        let v: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        if norm2 > 1e-12 {
            break nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]);
        }
    };
    let m = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}

/// A posed analytic surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub surface: Surface,
    pub pose: Pose,
}

impl ShapeSpec {
    pub fn new(surface: Surface, pose: Pose) -> Result<Self> {
        surface.validate()?;
        if pose.orthogonality_error() > 1e-9 || pose.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("pose is not a rigid transform".into()));
        }
        Ok(Self { surface, pose })
    }

    pub fn at_origin(surface: Surface) -> Result<Self> {
        Self::new(surface, Pose::IDENTITY)
    }

    pub fn kind(&self) -> ShapeKind {
        self.surface.kind()
    }

    /// Unsigned Euclidean distance from a world-space point to the surface.
    pub fn distance(&self, p: &Point) -> f64 {
        self.surface.distance(&self.pose.to_local(p))
    }

    /// `n` independent area-weighted samples in world space.
    pub fn sample_random(&self, n: usize, rng: &mut impl Rng) -> Vec<Point> {
        self.surface
            .sample_local(n, rng)
            .iter()
            .map(|p| self.pose.to_world(p))
            .collect()
    }
}

impl Surface {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Surface::Sphere { .. } => ShapeKind::Sphere,
            Surface::Torus { .. } => ShapeKind::Torus,
            Surface::Cylinder { .. } => ShapeKind::Cylinder,
            Surface::Plane { .. } => ShapeKind::Plane,
            Surface::Superellipsoid { .. } => ShapeKind::Superellipsoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |vals: &[f64]| vals.iter().all(|v| v.is_finite() && *v > 0.0);
        let ok = match *self {
            Surface::Sphere { radius } => positive(&[radius]),
            Surface::Torus {
                major_radius,
                minor_radius,
            } => positive(&[major_radius, minor_radius]) && minor_radius < major_radius,
            Surface::Cylinder { radius, height } => positive(&[radius, height]),
            Surface::Plane { width, depth } => positive(&[width, depth]),
            Surface::Superellipsoid { axes, e1, e2 } => {
                positive(&axes) && [e1, e2].iter().all(|e| (0.2..=1.0).contains(e))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid surface parameters: {self:?}")))
        }
    }

    /// Surface area (mesh approximation for the superellipsoid).
    pub fn area(&self) -> f64 {
        match *self {
            Surface::Sphere { radius } => 4.0 * PI * radius * radius,
            Surface::Torus {
                major_radius,
                minor_radius,
            } => 4.0 * PI * PI * major_radius * minor_radius,
            Surface::Cylinder { radius, height } => 2.0 * PI * radius * height,
            Surface::Plane { width, depth } => width * depth,
            Surface::Superellipsoid { axes, e1, e2 } => SuperMesh::new(Superquadric { axes, e1, e2 }, 96, 192).total,
        }
    }

    pub fn distance(&self, p: &Point) -> f64 {
        let [x, y, z] = *p;
        match *self {
            Surface::Sphere { radius } => ((x * x + y * y + z * z).sqrt() - radius).abs(),
            Surface::Torus {
                major_radius,
                minor_radius,
            } => {
                let ring = (x * x + y * y).sqrt() - major_radius;
                ((ring * ring + z * z).sqrt() - minor_radius).abs()
            }
            Surface::Cylinder { radius, height } => {
                let radial = (x * x + y * y).sqrt() - radius;
                let over = (z.abs() - height / 2.0).max(0.0);
                (radial * radial + over * over).sqrt()
            }
            Surface::Plane { width, depth } => {
                let dx = (x.abs() - width / 2.0).max(0.0);
                let dy = (y.abs() - depth / 2.0).max(0.0);
                (dx * dx + dy * dy + z * z).sqrt()
            }
            Surface::Superellipsoid { axes, e1, e2 } => Superquadric { axes, e1, e2 }.distance(p),
        }
    }

    fn sample_local(&self, n: usize, rng: &mut impl Rng) -> Vec<Point> {
        match *self {
            Surface::Sphere { radius } => (0..n)
                .map(|_| loop {
                    let v: [f64; 3] = [0; 3].map(|_| rng.sample(StandardNormal));
                    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    if norm > 1e-9 {
                        break v.map(|c| c * radius / norm);
                    }
                })
                .collect(),
            Surface::Torus {
                major_radius: big,
                minor_radius: small,
            } => (0..n)
                .map(|_| {
                    // Area element is proportional to R + r cos(theta).
                    let theta = loop {
                        let t = rng.gen_range(0.0..2.0 * PI);
                        if rng.gen::<f64>() * (big + small) <= big + small * t.cos() {
                            break t;
                        }
                    };
                    let phi = rng.gen_range(0.0..2.0 * PI);
                    let ring = big + small * theta.cos();
                    [ring * phi.cos(), ring * phi.sin(), small * theta.sin()]
                })
                .collect(),
            Surface::Cylinder { radius, height } => (0..n)
                .map(|_| {
                    let phi = rng.gen_range(0.0..2.0 * PI);
                    let z = rng.gen_range(-height / 2.0..=height / 2.0);
                    [radius * phi.cos(), radius * phi.sin(), z]
                })
                .collect(),
            Surface::Plane { width, depth } => (0..n)
                .map(|_| {
                    [
                        rng.gen_range(-width / 2.0..=width / 2.0),
                        rng.gen_range(-depth / 2.0..=depth / 2.0),
                        0.0,
                    ]
                })
                .collect(),
            Surface::Superellipsoid { axes, e1, e2 } => {
                SuperMesh::new(Superquadric { axes, e1, e2 }, 48, 96).sample(n, rng)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Superquadric {
    axes: [f64; 3],
    e1: f64,
    e2: f64,
}

fn signed_pow(base: f64, e: f64) -> f64 {
    base.signum() * base.abs().powf(e)
}

impl Superquadric {
    fn implicit(&self, p: &Point) -> f64 {
        let [a, b, c] = self.axes;
        let g = (p[0] / a).abs().powf(2.0 / self.e2) + (p[1] / b).abs().powf(2.0 / self.e2);
        g.powf(self.e2 / self.e1) + (p[2] / c).abs().powf(2.0 / self.e1)
    }

    /// Implicit value, gradient and Hessian.
    fn derivatives(&self, p: &Point) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let p1 = 2.0 / self.e1;
        let p2 = 2.0 / self.e2;
        let q = self.e2 / self.e1;
        let mut dg = [0.0; 2];
        let mut ddg = [0.0; 2];
        let mut g = 0.0;
        for i in 0..2 {
            let a = self.axes[i];
            let u = p[i].abs() / a;
            g += u.powf(p2);
            dg[i] = p2 * u.powf(p2 - 1.0) * p[i].signum() / a;
            ddg[i] = p2 * (p2 - 1.0) * u.powf(p2 - 2.0) / (a * a);
        }
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        let mut value = 0.0;
        if g > 1e-30 {
            value = g.powf(q);
            let d1 = q * g.powf(q - 1.0);
            let d2 = q * (q - 1.0) * g.powf(q - 2.0);
            for i in 0..2 {
                grad[i] = d1 * dg[i];
                for j in 0..2 {
                    hess[(i, j)] = d2 * dg[i] * dg[j];
                }
                hess[(i, i)] += d1 * ddg[i];
            }
        }
        let c = self.axes[2];
        let w = p[2].abs() / c;
        value += w.powf(p1);
        grad[2] = p1 * w.powf(p1 - 1.0) * p[2].signum() / c;
        hess[(2, 2)] = p1 * (p1 - 1.0) * w.powf(p1 - 2.0) / (c * c);
        (value, grad, hess)
    }

    /// Scales `p` along its ray onto the surface (the implicit function is
    /// homogeneous of degree `2 / e1`).
    fn radial(&self, p: &Point) -> Option<Point> {
        let f = self.implicit(p);
        if !(f > 0.0 && f.is_finite()) {
            return None;
        }
        let t = f.powf(-self.e1 / 2.0);
        Some(p.map(|v| v * t))
    }

    fn param_point(&self, eta: f64, omega: f64) -> Point {
        let [a, b, c] = self.axes;
        let ce = signed_pow(eta.cos(), self.e1);
        [
            a * ce * signed_pow(omega.cos(), self.e2),
            b * ce * signed_pow(omega.sin(), self.e2),
            c * signed_pow(eta.sin(), self.e1),
        ]
    }

    /// Solves the stationarity system `x - p + mu * grad F(x) = 0`, `F(x) = 1`
    /// by damped Newton from `start`. Returns the foot point on convergence.
    fn project_from(&self, p: &Point, start: Point) -> Option<Point> {
        let target = Vector3::from(*p);
        let mut x = Vector3::from(start);
        let (_, n0, _) = self.derivatives(&start);
        let mut mu = (target - x).dot(&n0) / n0.norm_squared().max(1e-300);
        let residual = |x: &Vector3<f64>, mu: f64| {
            let (f, grad, hess) = self.derivatives(&[x[0], x[1], x[2]]);
            let r3 = x - target + grad * mu;
            (Vector4::new(r3[0], r3[1], r3[2], f - 1.0), grad, hess)
        };
        let (mut r, mut grad, mut hess) = residual(&x, mu);
        for _ in 0..100 {
            if r.norm() < 1e-12 {
                break;
            }
            let mut jac = Matrix4::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    jac[(i, j)] = mu * hess[(i, j)] + if i == j { 1.0 } else { 0.0 };
                }
                jac[(i, 3)] = grad[i];
                jac[(3, i)] = grad[i];
            }
            let step = jac.lu().solve(&(-r))?;
            let mut t = 1.0;
            loop {
                let xn = x + Vector3::new(step[0], step[1], step[2]) * t;
                let mun = mu + step[3] * t;
                let (rn, gn, hn) = residual(&xn, mun);
                if rn.norm() < r.norm() * (1.0 - 1e-4 * t) || t < 1e-8 {
                    x = xn;
                    mu = mun;
                    r = rn;
                    grad = gn;
                    hess = hn;
                    break;
                }
                t *= 0.5;
            }
        }
        (r.norm() <= 1e-8 && r.iter().all(|v| v.is_finite())).then(|| [x[0], x[1], x[2]])
    }

    fn distance(&self, p: &Point) -> f64 {
        // Coarse parametric lattice: a second start and a safety bound.
        let (mut best_vertex, mut best_d2) = ([0.0; 3], f64::INFINITY);
        let (rows, cols) = (24, 48);
        for i in 0..=rows {
            let eta = -PI / 2.0 + PI * i as f64 / rows as f64;
            for j in 0..cols {
                let v = self.param_point(eta, -PI + 2.0 * PI * j as f64 / cols as f64);
                let d = dist2(&v, p);
                if d < best_d2 {
                    best_d2 = d;
                    best_vertex = v;
                }
            }
        }
        let mut starts = vec![best_vertex];
        if let Some(s) = self.radial(p) {
            starts.insert(0, s);
        }
        starts
            .into_iter()
            .filter_map(|s| self.project_from(p, s))
            .map(|x| dist2(&x, p))
            .fold(best_d2, f64::min)
            .sqrt()
    }
}

/// Triangulated parametric lattice used for area-weighted sampling.
struct SuperMesh {
    shape: Superquadric,
    triangles: Vec<[Point; 3]>,
    weights: Vec<f64>,
    total: f64,
}

impl SuperMesh {
    fn new(shape: Superquadric, rows: usize, cols: usize) -> Self {
        let vertex = |i: usize, j: usize| {
            let eta = -PI / 2.0 + PI * i as f64 / rows as f64;
            shape.param_point(eta, -PI + 2.0 * PI * (j % cols) as f64 / cols as f64)
        };
        let mut triangles = Vec::with_capacity(2 * rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let (a, b, c, d) = (vertex(i, j), vertex(i, j + 1), vertex(i + 1, j), vertex(i + 1, j + 1));
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            }
        }
        let weights: Vec<f64> = triangles.iter().map(triangle_area).collect();
        let total = weights.iter().sum();
        Self {
            shape,
            triangles,
            weights,
            total,
        }
    }

    /// Samples the mesh by area, then projects radially onto the exact surface.
    fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<Point> {
        let pick = WeightedIndex::new(self.weights.iter().map(|w| w.max(0.0))).expect("mesh has positive area");
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let [a, b, c] = self.triangles[pick.sample(rng)];
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = [0, 1, 2].map(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]));
            if let Some(s) = self.shape.radial(&p) {
                out.push(s);
            }
        }
        out
    }
}

fn triangle_area(t: &[Point; 3]) -> f64 {
    let u = Vector3::from(t[1]) - Vector3::from(t[0]);
    let v = Vector3::from(t[2]) - Vector3::from(t[0]);
    0.5 * u.cross(&v).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn superq() -> Surface {
        Surface::Superellipsoid {
            axes: [1.0, 0.7, 0.5],
            e1: 0.5,
            e2: 0.8,
        }
    }

    #[test]
    fn closed_form_distances() {
        let sphere = Surface::Sphere { radius: 1.0 };
        assert_eq!(sphere.distance(&[0.0, 0.0, 2.0]), 1.0);
        let torus = Surface::Torus {
            major_radius: 0.7,
            minor_radius: 0.3,
        };
        assert!((torus.distance(&[0.0; 3]) - 0.4).abs() < 1e-15);
        let tube = Surface::Cylinder {
            radius: 1.0,
            height: 2.0,
        };
        assert!((tube.distance(&[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((tube.distance(&[1.0, 0.0, 2.0]) - 1.0).abs() < 1e-15);
        let plane = Surface::Plane { width: 2.0, depth: 2.0 };
        assert_eq!(plane.distance(&[0.5, 0.5, -0.25]), 0.25);
        assert!((plane.distance(&[4.0, 0.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn samples_lie_on_every_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let surfaces = [
            Surface::Sphere { radius: 1.3 },
            Surface::Torus {
                major_radius: 1.0,
                minor_radius: 0.25,
            },
            Surface::Cylinder {
                radius: 0.5,
                height: 3.0,
            },
            Surface::Plane { width: 1.0, depth: 2.0 },
            superq(),
        ];
        for s in surfaces {
            let geometry = ShapeSpec::new(s, Pose::random(&mut rng, 2.0)).unwrap();
            for p in geometry.sample_random(300, &mut rng) {
                assert!(
                    geometry.distance(&p) < 1e-9,
                    "{:?}: {}",
                    geometry.kind(),
                    geometry.distance(&p)
                );
            }
        }
    }

    #[test]
    fn superellipsoid_with_unit_exponents_is_an_ellipsoid_and_sphere() {
        let sphere = Surface::Superellipsoid {
            axes: [1.0; 3],
            e1: 1.0,
            e2: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p: Point = [0; 3].map(|_| rng.gen_range(-2.0..2.0));
            let exact = ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs();
            assert!((sphere.distance(&p) - exact).abs() < 1e-9);
        }
        assert!((sphere.area() - 4.0 * PI).abs() / (4.0 * PI) < 1e-2);
    }

    #[test]
    fn superellipsoid_foot_point_is_closer_than_any_dense_sample() {
        let s = superq();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dense = s.sample_local(40_000, &mut rng);
        for _ in 0..50 {
            let p: Point = [0; 3].map(|_| rng.gen_range(-1.5..1.5));
            let d = s.distance(&p);
            let sampled = dense.iter().map(|q| dist2(q, &p)).fold(f64::INFINITY, f64::min).sqrt();
            assert!(d <= sampled + 1e-12);
            assert!(sampled - d < 0.05, "{p:?}: analytic {d}, sampled {sampled}");
        }
    }

    #[test]
    fn pose_round_trip_and_rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pose = Pose::random(&mut rng, 1.0);
        assert!(pose.orthogonality_error() < 1e-12);
        let p = [0.3, -1.2, 2.5];
        let back = pose.to_local(&pose.to_world(&p));
        assert!(dist2(&p, &back) < 1e-24);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ShapeSpec::at_origin(Surface::Sphere { radius: -1.0 }).is_err());
        assert!(ShapeSpec::at_origin(Surface::Torus {
            major_radius: 0.2,
            minor_radius: 0.3
        })
        .is_err());
        assert!(ShapeSpec::at_origin(Surface::Superellipsoid {
            axes: [1.0; 3],
            e1: 1.5,
            e2: 1.0
        })
        .is_err());
        assert!("cone".parse::<ShapeKind>().is_err());
    }
}
