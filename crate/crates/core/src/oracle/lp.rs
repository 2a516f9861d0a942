//! Load feasibility for a set of soft-finger contacts with linearized friction.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::Vector3;

type V3 = Vector3<f64>;

/// Residual tolerance of the feasibility problem.
pub const LP_TOL: f64 = 1e-8;

/// One contact, in SI units relative to the wrench reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Contact position, m.
    pub position: V3,
    /// Unit direction of the normal force applied to the object.
    pub force_dir: V3,
    /// Effective radius of the contact patch for torsional friction, m.
    pub torsion_radius: f64,
}

/// Deterministic tangent basis orthogonal to unit `n`.
pub fn tangent_basis(n: &V3) -> (V3, V3) {
    let a = n.abs();
    let helper = if a.x <= a.y && a.x <= a.z {
        V3::x()
    } else if a.y <= a.z {
        V3::y()
    } else {
        V3::z()
    };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Wrench generators `[f; r × f + τ]` of one contact. Every generator carries
/// unit normal force: four inscribed friction-pyramid edges and two
/// torsional generators of moment `±μρ` about the normal.
pub fn wrench_generators(c: &Contact, mu: f64) -> [[f64; 6]; 6] {
    let n = c.force_dir;
    let (t1, t2) = tangent_basis(&n);
    let wrench = |f: V3, tau: V3| {
        let m = c.position.cross(&f) + tau;
        [f.x, f.y, f.z, m.x, m.y, m.z]
    };
    let twist = n * (mu * c.torsion_radius);
    [
        wrench(n + t1 * mu, V3::zeros()),
        wrench(n - t1 * mu, V3::zeros()),
        wrench(n + t2 * mu, V3::zeros()),
        wrench(n - t2 * mu, V3::zeros()),
        wrench(n, twist),
        wrench(n, -twist),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCheck {
    pub feasible: bool,
    /// Minimal L1 wrench residual found (N and N·m mixed).
    pub residual: f64,
    /// Generator weights per contact (normal-force budget use, N).
    pub weights: Vec<[f64; 6]>,
}

/// Whether the contacts can balance `external` (force, moment) with each
/// contact's total normal force at most `max_normal`.
///
/// Solved as `min Σ|s|` subject to `Σ λ·w + s = −external`, `λ ≥ 0` and the
/// per-contact normal budget; feasible when the optimum is within
/// `LP_TOL · max(1, ‖external‖∞)`.
pub fn resists_wrench(contacts: &[Contact], mu: f64, max_normal: f64, external: [f64; 6]) -> LoadCheck {
    let gens: Vec<[[f64; 6]; 6]> = contacts.iter().map(|c| wrench_generators(c, mu)).collect();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<Vec<_>> = gens
        .iter()
        .map(|_| (0..6).map(|_| problem.add_var(0.0, (0.0, f64::INFINITY))).collect())
        .collect();
    let slack_pos: Vec<_> = (0..6).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let slack_neg: Vec<_> = (0..6).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for row in 0..6 {
        let mut terms = Vec::new();
        for (c, g) in gens.iter().enumerate() {
            for (j, w) in g.iter().enumerate() {
                if w[row] != 0.0 {
                    terms.push((lambda[c][j], w[row]));
                }
            }
        }
        terms.push((slack_pos[row], 1.0));
        terms.push((slack_neg[row], -1.0));
        problem.add_constraint(&terms[..], ComparisonOp::Eq, -external[row]);
    }
    for vars in &lambda {
        let terms: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
        problem.add_constraint(&terms[..], ComparisonOp::Le, max_normal);
    }
    let scale = external.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let infeasible = |residual: f64| LoadCheck {
        feasible: false,
        residual,
        weights: Vec::new(),
    };
    let solution = match problem.solve().map(|o| o.into_solution()) {
        Ok(Ok(s)) => s,
        _ => return infeasible(f64::INFINITY),
    };
    let weights: Vec<[f64; 6]> = lambda
        .iter()
        .map(|vars| std::array::from_fn(|j| solution.var_value(vars[j]).max(0.0)))
        .collect();
    // recompute the residual from the weights rather than trusting the objective
    let mut residual = 0.0;
    for row in 0..6 {
        let mut sum = external[row];
        for (c, g) in gens.iter().enumerate() {
            for j in 0..6 {
                sum += weights[c][j] * g[j][row];
            }
        }
        residual += sum.abs();
    }
    let within_budget = weights
        .iter()
        .all(|w| w.iter().sum::<f64>() <= max_normal * (1.0 + LP_TOL) + LP_TOL);
    LoadCheck {
        feasible: residual <= LP_TOL * scale && within_budget,
        residual,
        weights,
    }
}
