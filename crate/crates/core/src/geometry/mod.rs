//! Kinematics, sphere decompositions and probabilistic collision bounds.

mod chain;
mod collision;

pub use chain::{
    distance, even_fractions, forward_kinematics, planar_two_link, robot_spheres, seven_dof_arm, solve_ik,
    KinematicChain, Link, Sphere, SphereTemplate,
};
pub use collision::{
    bound_factored, check_confidence, collision_bound, collision_bound_with, factor_cov, human_spheres, isotropic,
    mc_collision_oracle, pose_spheres, BoundOptions, BoundResult, Cov3, Factored, GaussianSphere, BISECTION_TOL,
    COV_JITTER,
};
