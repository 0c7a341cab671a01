//! Static description of every scenario: the config keys it reads and
//! the artifacts it writes. The runner hands each scenario a config
//! projected onto its keys, so a key missing here cannot influence it.

use std::fmt::{self, Write as _};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::config::expand_keys;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Mesh,
    SolveNs,
    SolveFsi,
    Sensitivity,
    TaylorTest,
    Mms,
    Probes,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Mesh,
        Scenario::SolveNs,
        Scenario::SolveFsi,
        Scenario::Sensitivity,
        Scenario::TaylorTest,
        Scenario::Mms,
        Scenario::Probes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Mesh => "mesh",
            Scenario::SolveNs => "solve-ns",
            Scenario::SolveFsi => "solve-fsi",
            Scenario::Sensitivity => "sensitivity",
            Scenario::TaylorTest => "taylor-test",
            Scenario::Mms => "mms",
            Scenario::Probes => "probes",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sc| sc.name() == s)
    }

    pub fn spec(self) -> &'static ScenarioSpec {
        REGISTRY.iter().find(|s| s.scenario == self).expect("every scenario is registered")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub struct Artifact {
    pub file: &'static str,
    /// frozen column list for CSV files, field list for VTK files
    pub contents: &'static str,
}

pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub summary: &'static str,
    pub computes: &'static str,
    /// config subtrees read; each entry covers every leaf below it
    pub reads: &'static [&'static str],
    pub outputs: &'static [Artifact],
    pub checks: &'static [&'static str],
}

const MESH_TXT: Artifact = Artifact {
    file: "mesh.txt",
    contents: "line-oriented mesh (vertices, triangles with subdomain, tagged boundary edges)",
};
const SUMMARY: Artifact = Artifact {
    file: "summary.json",
    contents: "resolved config, config hash, results, checks, artifact hashes",
};

pub static REGISTRY: [ScenarioSpec; 7] = [
    ScenarioSpec {
        scenario: Scenario::Mesh,
        summary: "Build the channel mesh with its obstacle and validate it.",
        computes: "Triangulation of the fluid channel and the solid obstacle with a conforming \
                   interface, boundary tags, and an independent half-edge validation \
                   (orientation, Euler characteristic with holes, tag lengths).",
        reads: &["geometry", "refinements"],
        outputs: &[
            MESH_TXT,
            Artifact { file: "fields_mesh.vtk", contents: "P2 node set, cell data `subdomain`" },
            Artifact { file: "report_mesh.csv", contents: "tag,edges,length" },
            SUMMARY,
        ],
        checks: &["positively oriented", "single component", "euler characteristic with holes is 1"],
    },
    ScenarioSpec {
        scenario: Scenario::SolveNs,
        summary: "Steady Navier-Stokes on the undeformed fluid domain.",
        computes: "Taylor-Hood P2/P1 discretization with the configured inflow profile, no-slip walls \
                   and obstacle, do-nothing outflow; Picard iteration with lagged convection \
                   started from zero.",
        reads: &["geometry", "refinements", "physics.viscosity", "inflow", "fluid"],
        outputs: &[
            MESH_TXT,
            Artifact { file: "fields_fluid.vtk", contents: "velocity, pressure" },
            Artifact { file: "report_picard.csv", contents: "iter,residual,ratio" },
            SUMMARY,
        ],
        checks: &["picard converged", "picard increments contract"],
    },
    ScenarioSpec {
        scenario: Scenario::SolveFsi,
        summary: "Coupled steady fluid-structure solve on the reference domain.",
        computes: "Partitioned fixed point: transformed Navier-Stokes on the pullback of the \
                   harmonic extension of the solid displacement, interface traction, linear \
                   elasticity solve, relaxed update of the displacement.",
        reads: &["geometry", "refinements", "physics", "inflow", "coupling"],
        outputs: &[
            MESH_TXT,
            Artifact { file: "fields_fsi.vtk", contents: "velocity, pressure, displacement" },
            Artifact {
                file: "report_outer.csv",
                contents: "iter,du,ratio,fluid_iterations,min_det,min_eig_a",
            },
            Artifact { file: "report_quality.csv", contents: "element,min_det,min_eig_a" },
            SUMMARY,
        ],
        checks: &["flow map untangled", "diffusion field elliptic", "outer increments contract"],
    },
    ScenarioSpec {
        scenario: Scenario::Sensitivity,
        summary: "Derivative of the coupled state with respect to the inflow data.",
        computes: "Linearization at the converged coupled state. Two linearized fluid systems \
                   share one operator: one driven by the inflow direction, one by the extension \
                   of a displacement increment. They are coupled to the solid through a fixed \
                   point whose contraction constant is estimated by power iteration.",
        reads: &[
            "geometry",
            "refinements",
            "physics",
            "inflow",
            "direction",
            "coupling",
            "sensitivity",
            "probes.samples",
            "seed",
        ],
        outputs: &[
            MESH_TXT,
            Artifact {
                file: "fields_sensitivity.vtk",
                contents: "velocity, pressure, displacement, d_velocity, d_pressure, d_displacement",
            },
            Artifact {
                file: "report_outer.csv",
                contents: "iter,du,ratio,fluid_iterations,min_det,min_eig_a",
            },
            Artifact { file: "report_sensitivity.csv", contents: "iter,residual,ratio" },
            SUMMARY,
        ],
        checks: &[
            "derivative fixed point contracts",
            "coupling radius below one",
            "observed rate bounded by the radius",
        ],
    },
    ScenarioSpec {
        scenario: Scenario::TaylorTest,
        summary: "First-order Taylor remainder test of the inflow-to-state derivative.",
        computes: "Coupled solves at g + h dg for every step h, compared with the base state plus \
                   h times the sensitivity; log-log slopes of the remainders in H1 (displacement, \
                   velocity) and L2 (pressure).",
        reads: &["geometry", "refinements", "physics", "inflow", "direction", "taylor"],
        outputs: &[
            MESH_TXT,
            Artifact { file: "report_taylor.csv", contents: "h,r_u,r_w,r_p,valid" },
            SUMMARY,
        ],
        checks: &["displacement slope", "velocity slope", "pressure slope"],
    },
    ScenarioSpec {
        scenario: Scenario::Mms,
        summary: "Manufactured-solution convergence study of the fluid solver.",
        computes: "Navier-Stokes with a manufactured force and boundary data on the unit square, \
                   uniformly refined; least-squares rates of the velocity H1 and pressure L2 \
                   errors.",
        reads: &["mms", "fluid"],
        outputs: &[
            Artifact {
                file: "report_mms.csv",
                contents: "h,dofs,velocity_h1,velocity_l2,pressure_l2,iterations",
            },
            SUMMARY,
        ],
        checks: &["velocity H1 rate within 0.2 of 2", "pressure L2 rate within 0.3 of 2"],
    },
    ScenarioSpec {
        scenario: Scenario::Probes,
        summary: "Contraction constants over a sweep of inflow magnitudes.",
        computes: "For each magnitude: the mean Picard ratio, the asymptotic outer ratio, the \
                   power-iteration radius of the derivative coupling map, and the ratio of the \
                   constant-coefficient linearized iteration.",
        reads: &[
            "geometry",
            "refinements",
            "physics",
            "inflow",
            "coupling",
            "probes.magnitudes",
            "probes.samples",
            "seed",
        ],
        outputs: &[
            Artifact {
                file: "report_probes.csv",
                contents: "magnitude,picard_ratio,outer_ratio,coupling_radius,t_ratio",
            },
            SUMMARY,
        ],
        checks: &["all contraction constants below one"],
    },
];

/// Text for `describe`.
pub fn describe(scenario: Scenario) -> String {
    let spec = scenario.spec();
    let mut s = String::new();
    writeln!(s, "scenario: {}", spec.scenario).unwrap();
    writeln!(s, "{}\n", spec.summary).unwrap();
    writeln!(s, "computes:\n  {}\n", spec.computes.split_whitespace().collect::<Vec<_>>().join(" ")).unwrap();
    writeln!(s, "config keys read:").unwrap();
    for key in expand_keys(spec.reads) {
        writeln!(s, "  {key}").unwrap();
    }
    writeln!(s, "\noutputs:").unwrap();
    for a in spec.outputs {
        writeln!(s, "  {:<24} {}", a.file, a.contents).unwrap();
    }
    writeln!(s, "\nchecks:").unwrap();
    for c in spec.checks {
        writeln!(s, "  {c}").unwrap();
    }
    s
}
