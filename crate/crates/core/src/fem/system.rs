use std::collections::BTreeMap;

use crate::error::{FemError, SolverError};
use crate::linalg::{CsrMatrix, DirectSolver, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};

use super::space::FeSpace;

/// Prescribed values per dof. A prescription of higher priority overrides a
/// lower one; two prescriptions of equal priority must agree exactly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraints {
    values: BTreeMap<usize, (f64, u8)>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, dof: usize, value: f64) -> Result<(), FemError> {
        self.set_with_priority(dof, value, u8::MAX)
    }

    pub fn set_with_priority(&mut self, dof: usize, value: f64, priority: u8) -> Result<(), FemError> {
        match self.values.get(&dof) {
            Some(&(_, p)) if p > priority => Ok(()),
            Some(&(v, p)) if p == priority && v != value => Err(FemError::ConflictingDirichlet {
                dof,
                first: v,
                second: value,
            }),
            _ => {
                self.values.insert(dof, (value, priority));
                Ok(())
            }
        }
    }

    /// Prescribes `f(x)` on every node of `tag`, with dofs shifted by `offset`.
    pub fn prescribe_tag(
        &mut self,
        mesh: &Mesh,
        space: &FeSpace,
        tag: BoundaryTag,
        offset: usize,
        f: impl Fn([f64; 2]) -> [f64; 2],
    ) -> Result<(), FemError> {
        let c = space.components();
        let coords = space.node_coords(mesh);
        for n in space.boundary_nodes(mesh, tag)? {
            let v = f(coords[n]);
            for k in 0..c {
                self.set_with_priority(offset + c * n + k, v[k], tag.dirichlet_priority())?;
            }
        }
        Ok(())
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).map(|&(v, _)| v)
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.values.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&d, &(v, _))| (d, v))
    }

    /// Same dofs, all values replaced by zero.
    pub fn homogeneous(&self) -> Self {
        Self {
            values: self.values.iter().map(|(&d, &(_, p))| (d, (0.0, p))).collect(),
        }
    }

    /// Values scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|(&d, &(v, p))| (d, (s * v, p))).collect(),
        }
    }
}

/// Symmetric elimination of a fixed dof set. Keeps the eliminated columns so
/// that new Dirichlet values only change the right-hand side.
#[derive(Clone, Debug)]
pub struct Elimination {
    mask: Vec<bool>,
    dofs: Vec<usize>,
    /// original entries `A[i, c]` for free rows `i` and constrained columns `c`
    lift: CsrMatrix,
    /// diagonal placed on constrained rows, matched to the free diagonal so
    /// pivot thresholds stay meaningful for badly scaled operators
    diag: f64,
}

impl Elimination {
    /// Returns the elimination record and the reduced matrix (scaled
    /// identity rows and columns at constrained dofs).
    pub fn new(a: &CsrMatrix, dofs: &[usize]) -> (Self, CsrMatrix) {
        let n = a.nrows();
        let mut mask = vec![false; n];
        for &d in dofs {
            mask[d] = true;
        }
        let mut reduced = TripletBuilder::with_capacity(n, n, a.nnz());
        let mut lift = TripletBuilder::new(n, n);
        let mut diag: f64 = 0.0;
        for (i, j, v) in a.triplets() {
            if i == j && !mask[i] {
                diag = diag.max(v.abs());
            }
            match (mask[i], mask[j]) {
                (false, false) => reduced.push(i, j, v),
                (false, true) => lift.push(i, j, v),
                _ => {}
            }
        }
        let mut sorted: Vec<usize> = dofs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if !(diag > 0.0 && diag.is_finite()) {
            diag = 1.0;
        }
        for &d in &sorted {
            reduced.push(d, d, diag);
        }
        (
            Self {
                mask,
                dofs: sorted,
                lift: lift.build(),
                diag,
            },
            reduced.build(),
        )
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.mask[dof]
    }

    /// Reduced right-hand side for load `b` and prescribed values `c`
    /// (missing entries count as zero).
    pub fn rhs(&self, b: &[f64], c: &Constraints) -> Vec<f64> {
        let n = self.mask.len();
        let mut g = vec![0.0; n];
        for (d, v) in c.iter() {
            debug_assert!(self.mask[d], "prescription on unconstrained dof {d}");
            g[d] = v;
        }
        let mut r = b.to_vec();
        self.lift.mul_vec_add(-1.0, &g, &mut r);
        for &d in &self.dofs {
            r[d] = self.diag * g[d];
        }
        r
    }
}

/// A matrix factored once under a fixed constrained dof set.
#[derive(Clone, Debug)]
pub struct FactoredSystem {
    elimination: Elimination,
    solver: DirectSolver,
}

impl FactoredSystem {
    pub fn new(a: &CsrMatrix, dofs: &[usize]) -> Result<Self, SolverError> {
        let (elimination, reduced) = Elimination::new(a, dofs);
        let solver = DirectSolver::new(reduced)?;
        Ok(Self {
            elimination,
            solver,
        })
    }

    pub fn dim(&self) -> usize {
        self.solver.matrix().nrows()
    }

    pub fn elimination(&self) -> &Elimination {
        &self.elimination
    }

    /// Solution with constrained dofs set exactly to their prescribed values.
    pub fn solve(&self, b: &[f64], c: &Constraints) -> Result<Vec<f64>, SolverError> {
        let r = self.elimination.rhs(b, c);
        let mut x = self.solver.solve(&r)?;
        for &d in self.elimination.dofs() {
            x[d] = c.get(d).unwrap_or(0.0);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        Ok(x)
    }

    pub fn solve_homogeneous(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve(b, &Constraints::new())
    }
}

/// Velocity–pressure block system stored as one matrix:
/// `[[A, B1], [B2, C]]` with velocity dofs first.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub n_velocity: usize,
    pub n_pressure: usize,
}

/// A saddle system after Dirichlet elimination.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Constraints,
}

impl SaddleSystem {
    pub fn dim(&self) -> usize {
        self.n_velocity + self.n_pressure
    }

    /// Extracts block `(r, c)` with `0` = velocity and `1` = pressure.
    pub fn block(&self, r: usize, c: usize) -> CsrMatrix {
        let ranges = [(0, self.n_velocity), (self.n_velocity, self.dim())];
        let (r0, r1) = ranges[r];
        let (c0, c1) = ranges[c];
        let mut b = TripletBuilder::new(r1 - r0, c1 - c0);
        for (i, j, v) in self.matrix.triplets() {
            if (r0..r1).contains(&i) && (c0..c1).contains(&j) {
                b.push(i - r0, j - c0, v);
            }
        }
        b.build()
    }

    /// Symmetric elimination of the prescribed dofs. With `pin_pressure`,
    /// the first pressure dof is additionally fixed to zero.
    pub fn apply_dirichlet(&self, constraints: &Constraints, pin_pressure: bool) -> Result<ConstrainedSystem, FemError> {
        let mut c = constraints.clone();
        if pin_pressure {
            c.set(self.n_velocity, 0.0)?;
        }
        let (elim, matrix) = Elimination::new(&self.matrix, &c.dofs());
        let rhs = elim.rhs(&self.rhs, &c);
        Ok(ConstrainedSystem {
            matrix,
            rhs,
            constraints: c,
        })
    }
}

/// Direct solve of a constrained system; constrained entries are returned
/// exactly as prescribed.
pub fn solve_sparse(system: &ConstrainedSystem) -> Result<Vec<f64>, SolverError> {
    let mut x = DirectSolver::new(system.matrix.clone())?.solve(&system.rhs)?;
    for (d, v) in system.constraints.iter() {
        x[d] = v;
    }
    Ok(x)
}
