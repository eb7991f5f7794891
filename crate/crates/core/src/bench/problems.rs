//! Benchmark problems on the unit square, periodic in `x` with Dirichlet
//! anchoring on `y = 0` and `y = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::{Layout, Model};
use crate::energy::{director_l2_distance, ElectricConstants, FrankConstants};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nonlinear::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Twist,
    TiltTwist,
    Nano,
    Flexo,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [ProblemKind::Twist, ProblemKind::TiltTwist, ProblemKind::Nano, ProblemKind::Flexo];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Twist => "twist",
            ProblemKind::TiltTwist => "tilt-twist",
            ProblemKind::Nano => "nano",
            ProblemKind::Flexo => "flexo",
        }
    }

    pub fn spec(self) -> ProblemSpec {
        match self {
            ProblemKind::Twist => twist_problem(),
            ProblemKind::TiltTwist => tilt_twist_problem(),
            ProblemKind::Nano => nano_problem(),
            ProblemKind::Flexo => flexo_problem(),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "tilt_twist" && *k == ProblemKind::TiltTwist))
            .ok_or_else(|| Error::invalid(format!("unknown problem '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchoring {
    /// `(cos t, 0, sin t)` with `t = -theta0` below and `theta0` above.
    Twist { theta0: f64 },
    /// Striped pattern on both plates, repeated `copies` times across `x`.
    Pattern { copies: u32 },
}

/// A benchmark: material constants, anchoring and reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub frank: FrankConstants<f64>,
    pub electric: Option<ElectricConstants<f64>>,
    pub periodic_x: bool,
    /// Expected free energy `∫ w_F`.
    pub reference_energy: Option<f64>,
    /// The reference value depends on an ambiguous setup and is only indicative.
    pub reference_is_approximate: bool,
    anchoring: Anchoring,
    analytic: bool,
}

/// Striped anchoring with `r = 0.25`, `s = 0.95`: returns `(0, cos a, sin a)`.
pub fn nano_pattern(x: f64) -> [f64; 3] {
    let (r, s) = (0.25, 0.95);
    let t = 2.0 * PI * (x + r);
    let xm = -s * t.sin() / (-s * t.cos() - 1.0);
    let xp = -s * t.sin() / (-s * t.cos() + 1.0);
    let a = r * (PI + 2.0 * xm.atan() - 2.0 * xp.atan());
    [0.0, a.cos(), a.sin()]
}

pub fn twist_problem() -> ProblemSpec {
    ProblemSpec {
        kind: ProblemKind::Twist,
        frank: FrankConstants::new(1.0, 1.2, 1.0).expect("valid constants"),
        electric: None,
        periodic_x: true,
        reference_energy: Some(0.37011),
        reference_is_approximate: false,
        anchoring: Anchoring::Twist { theta0: PI / 8.0 },
        analytic: true,
    }
}

pub fn tilt_twist_problem() -> ProblemSpec {
    ProblemSpec {
        kind: ProblemKind::TiltTwist,
        frank: FrankConstants::new(1.0, 3.0, 1.2).expect("valid constants"),
        electric: None,
        periodic_x: true,
        reference_energy: Some(3.59294),
        reference_is_approximate: false,
        anchoring: Anchoring::Twist { theta0: PI / 4.0 },
        analytic: false,
    }
}

pub fn nano_problem() -> ProblemSpec {
    ProblemSpec {
        kind: ProblemKind::Nano,
        frank: FrankConstants::new(1.0, 0.62903, 1.32258).expect("valid constants"),
        electric: None,
        periodic_x: true,
        reference_energy: Some(3.89001),
        reference_is_approximate: false,
        anchoring: Anchoring::Pattern { copies: 1 },
        analytic: false,
    }
}

pub fn flexo_problem() -> ProblemSpec {
    ProblemSpec {
        kind: ProblemKind::Flexo,
        frank: FrankConstants::new(1.0, 4.0, 1.0).expect("valid constants"),
        electric: Some(ElectricConstants { eps0: 1.42809, eps_par: 7.0, eps_perp: 7.0, e_s: 1.5, e_b: -1.5 }),
        periodic_x: true,
        reference_energy: Some(16.413),
        reference_is_approximate: true,
        anchoring: Anchoring::Pattern { copies: 2 },
        analytic: false,
    }
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Director prescribed on `y = 0`.
    pub fn bottom_trace(&self, x: f64) -> [f64; 3] {
        match self.anchoring {
            Anchoring::Twist { theta0 } => [theta0.cos(), 0.0, -theta0.sin()],
            Anchoring::Pattern { copies } => nano_pattern((f64::from(copies) * x).rem_euclid(1.0)),
        }
    }

    /// Director prescribed on `y = 1`.
    pub fn top_trace(&self, x: f64) -> [f64; 3] {
        match self.anchoring {
            Anchoring::Twist { theta0 } => [theta0.cos(), 0.0, theta0.sin()],
            Anchoring::Pattern { .. } => self.bottom_trace(x),
        }
    }

    pub fn has_analytic(&self) -> bool {
        self.analytic
    }

    /// Exact minimizer, when known.
    pub fn analytic_solution(&self, _x: f64, y: f64) -> Option<[f64; 3]> {
        match (self.analytic, self.anchoring) {
            (true, Anchoring::Twist { theta0 }) => {
                let t = theta0 * (2.0 * y - 1.0);
                Some([t.cos(), 0.0, t.sin()])
            }
            _ => None,
        }
    }

    /// Amplitude of the out-of-plane start perturbation used unless overridden.
    pub fn default_perturbation(&self) -> f64 {
        if self.kind == ProblemKind::TiltTwist {
            1e-2
        } else {
            0.0
        }
    }

    pub fn layout(&self, mesh: Mesh, method: Method) -> Result<Layout> {
        match (self.electric.is_some(), method) {
            (true, Method::Lagrangian) => Ok(Layout::flexo(mesh)),
            (true, _) => Err(Error::invalid("the flexoelectric problem supports only the multiplier formulation")),
            (false, Method::Lagrangian) => Ok(Layout::lagrangian(mesh)),
            (false, _) => Ok(Layout::penalty(mesh)),
        }
    }

    pub fn model(&self, method: Method, zeta: Option<f64>) -> Result<Model<f64>> {
        match (method, self.electric) {
            (Method::Lagrangian, Some(ec)) => Ok(Model::flexo(self.frank, ec)),
            (Method::Lagrangian, None) => Ok(Model::lagrangian(self.frank)),
            (_, Some(_)) => Err(Error::invalid("the flexoelectric problem supports only the multiplier formulation")),
            (_, None) => {
                let z = zeta.ok_or_else(|| Error::invalid("penalty methods need a penalty weight"))?;
                if !(z > 0.0 && z.is_finite()) {
                    return Err(Error::invalid(format!("penalty weight must be positive, got {z}")));
                }
                Ok(Model::penalty(self.frank, z))
            }
        }
    }

    /// Starting state: the nodewise-normalized linear blend of the two traces,
    /// tilted out of the anchoring plane by `perturb * sin(pi y)` on `n2`.
    /// Potential and multiplier start at zero.
    pub fn initial_guess(&self, layout: &Layout, perturb: f64) -> Vec<f64> {
        let space = layout.space();
        let s = layout.stride();
        let mut x = vec![0.0; layout.dof_count()];
        for node in 0..layout.node_count() {
            let [px, py] = space.node_coord::<f64>(node);
            let (b, t) = (self.bottom_trace(px), self.top_trace(px));
            let mut n = [0.0; 3];
            for c in 0..3 {
                n[c] = (1.0 - py) * b[c] + py * t[c];
            }
            if !space.is_boundary_node(node) {
                n[1] += perturb * (PI * py).sin();
            }
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            let n = if len > 1e-12 { n.map(|v| v / len) } else { [1.0, 0.0, 0.0] };
            x[node * s..node * s + 3].copy_from_slice(&n);
        }
        x
    }

    /// `L2` distance of the director part of `x` from the exact minimizer.
    pub fn l2_error(&self, layout: &Layout, x: &[f64]) -> Result<f64> {
        if !self.analytic {
            return Err(Error::UnsupportedMetric(format!("no analytic solution for problem '{}'", self.name())));
        }
        let field = &x[..layout.field_dofs()];
        director_l2_distance(&layout.space(), field, |px, py| {
            self.analytic_solution(px, py).expect("analytic solution present")
        })
    }
}
