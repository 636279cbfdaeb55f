//! Serial revolute chains and their sphere decompositions.

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::motion::Point3;

/// A bounding sphere placed at `fraction` of the way along its link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTemplate {
    pub fraction: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Joint position in the parent frame.
    pub origin: Point3,
    /// Revolute axis in the link frame.
    pub axis: Point3,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub spheres: Vec<SphereTemplate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    /// World position of the base frame.
    pub base: Point3,
    /// Base yaw about world z (radians).
    #[serde(default)]
    pub base_yaw: f64,
    pub links: Vec<Link>,
    /// End-effector point in the last link frame.
    pub tool: Point3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Point3,
    pub radius: f64,
}

impl Sphere {
    /// Distance between surfaces; negative when overlapping.
    pub fn surface_distance(&self, other: &Sphere) -> f64 {
        distance(self.center, other.center) - self.radius - other.radius
    }
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn v3(p: Point3) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

impl KinematicChain {
    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return invalid("kinematic chain needs at least one joint");
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.lower <= l.upper) {
                return invalid(format!("joint {i} has lower limit above upper limit"));
            }
            if v3(l.axis).norm() < 1e-12 {
                return invalid(format!("joint {i} has a zero rotation axis"));
            }
            if let Some(s) = l.spheres.iter().find(|s| !(s.radius > 0.0) || !(0.0..=1.0).contains(&s.fraction)) {
                return invalid(format!("joint {i} sphere {s:?} needs radius > 0 and fraction in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn sphere_count(&self) -> usize {
        self.links.iter().map(|l| l.spheres.len()).sum()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.upper).collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.links).all(|(v, l)| *v >= l.lower && *v <= l.upper)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, l) in q.iter_mut().zip(&self.links) {
            *v = v.clamp(l.lower, l.upper);
        }
    }

    fn base_frame(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.base[0], self.base[1], self.base[2]),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.base_yaw),
        )
    }

    /// Joint points `p_0..p_n`: every joint origin followed by the tool
    /// point, in world coordinates.
    pub fn joint_points(&self, q: &[f64]) -> Result<Vec<Point3>> {
        let frames = forward_kinematics(self, q)?;
        let mut pts: Vec<Point3> = frames.iter().map(|f| [f.translation.x, f.translation.y, f.translation.z]).collect();
        let tool = frames.last().expect("non-empty chain") * nalgebra::Point3::from(v3(self.tool));
        pts.push([tool.x, tool.y, tool.z]);
        Ok(pts)
    }

    pub fn end_effector(&self, q: &[f64]) -> Result<Point3> {
        Ok(*self.joint_points(q)?.last().expect("tool point"))
    }
}

/// World frame of every joint after applying its rotation.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Isometry3<f64>>> {
    if q.len() != chain.dof() {
        return Err(Error::DimensionMismatch { expected: chain.dof(), actual: q.len() });
    }
    let mut frame = chain.base_frame();
    let mut out = Vec::with_capacity(q.len());
    for (link, &angle) in chain.links.iter().zip(q) {
        let axis = Unit::new_normalize(v3(link.axis));
        frame = frame
            * Isometry3::from_parts(
                Translation3::new(link.origin[0], link.origin[1], link.origin[2]),
                UnitQuaternion::from_axis_angle(&axis, angle),
            );
        out.push(frame);
    }
    Ok(out)
}

/// Spheres of every link template, placed along the segment from the
/// link's joint to the next joint (or the tool point for the last link).
pub fn robot_spheres(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Sphere>> {
    let pts = chain.joint_points(q)?;
    let mut out = Vec::with_capacity(chain.sphere_count());
    for (i, link) in chain.links.iter().enumerate() {
        let (a, b) = (pts[i], pts[i + 1]);
        for s in &link.spheres {
            let u = s.fraction;
            out.push(Sphere {
                center: [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2])],
                radius: s.radius,
            });
        }
    }
    Ok(out)
}

/// Evenly spaced fractions `0, 1/(k-1), ..., 1`.
pub fn even_fractions(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}

fn templates(len_fractions: &[f64], radius: f64) -> Vec<SphereTemplate> {
    len_fractions.iter().map(|&fraction| SphereTemplate { fraction, radius }).collect()
}

/// A seven-joint arm with alternating yaw and pitch joints and segments of
/// 0.34, 0.40, 0.40 and 0.20 m, mounted at `base` and facing `base_yaw`.
pub fn seven_dof_arm(base: Point3, base_yaw: f64) -> KinematicChain {
    use std::f64::consts::PI;
    let deg = |d: f64| d * PI / 180.0;
    let z = [0.0, 0.0, 1.0];
    let y = [0.0, 1.0, 0.0];
    let link = |origin: Point3, axis: Point3, lim: f64, spheres: Vec<SphereTemplate>| Link {
        origin,
        axis,
        lower: -deg(lim),
        upper: deg(lim),
        spheres,
    };
    KinematicChain {
        base,
        base_yaw,
        links: vec![
            link([0.0, 0.0, 0.0], z, 170.0, templates(&[0.0, 0.5, 1.0], 0.08)),
            link([0.0, 0.0, 0.34], y, 120.0, Vec::new()),
            link([0.0, 0.0, 0.0], z, 170.0, templates(&[0.25, 0.5, 0.75, 1.0], 0.065)),
            link([0.0, 0.0, 0.40], y, 120.0, Vec::new()),
            link([0.0, 0.0, 0.0], z, 170.0, templates(&[0.25, 0.5, 0.75, 1.0], 0.055)),
            link([0.0, 0.0, 0.40], y, 120.0, Vec::new()),
            link([0.0, 0.0, 0.0], z, 175.0, templates(&[0.5, 1.0], 0.05)),
        ],
        tool: [0.0, 0.0, 0.20],
    }
}

/// Planar two-link arm in the xy-plane with unit links.
pub fn planar_two_link() -> KinematicChain {
    use std::f64::consts::PI;
    let z = [0.0, 0.0, 1.0];
    KinematicChain {
        base: [0.0; 3],
        base_yaw: 0.0,
        links: vec![
            Link { origin: [0.0; 3], axis: z, lower: -PI, upper: PI, spheres: templates(&[0.0, 0.5, 1.0], 0.3) },
            Link { origin: [1.0, 0.0, 0.0], axis: z, lower: -PI, upper: PI, spheres: templates(&[0.5, 1.0], 0.3) },
        ],
        tool: [1.0, 0.0, 0.0],
    }
}

/// Position-only inverse kinematics by damped least squares with a
/// numerical Jacobian. Returns the best configuration found and its error.
pub fn solve_ik(chain: &KinematicChain, target: Point3, start: &[f64], iters: usize) -> Result<(Vec<f64>, f64)> {
    let n = chain.dof();
    let mut q = start.to_vec();
    chain.clamp(&mut q);
    let err_of = |q: &[f64]| -> Result<Vector3<f64>> { Ok(v3(target) - v3(chain.end_effector(q)?)) };
    let mut err = err_of(&q)?;
    for _ in 0..iters {
        if err.norm() < 1e-6 {
            break;
        }
        let mut jac = nalgebra::DMatrix::zeros(3, n);
        for k in 0..n {
            let mut qp = q.clone();
            qp[k] += 1e-6;
            let d = (v3(chain.end_effector(&qp)?) - v3(chain.end_effector(&q)?)) / 1e-6;
            jac.set_column(k, &d);
        }
        let damping = 1e-3;
        let jjt = &jac * jac.transpose() + nalgebra::DMatrix::identity(3, 3) * damping;
        let Some(sol) = jjt.lu().solve(&nalgebra::DVector::from_column_slice(err.as_slice())) else {
            break;
        };
        let dq = jac.transpose() * sol;
        let mut next: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, b)| a + b).collect();
        chain.clamp(&mut next);
        let next_err = err_of(&next)?;
        if next_err.norm() >= err.norm() {
            break;
        }
        q = next;
        err = next_err;
    }
    Ok((q, err.norm()))
}
