//! Degree-of-freedom layouts.
//!
//! The plastic field is stored per node as coefficients in an orthonormal
//! (Frobenius) basis of the admissible nodal subspace: the tensor space of
//! the model intersected with the micro-hard constraint `p × n = 0` on the
//! faces the node lies on. Orthonormality makes `|q|` of a nodal tensor equal
//! to the Euclidean norm of its coefficients, so the dissipation prox is an
//! exact per-node shrinkage.

use std::ops::Range;

use crate::grid::{BoundaryConfig, FaceSet, Grid, TensorField};
use crate::scalar::Real;
use crate::tensor::Mat3;

/// Pointwise constraint on the plastic tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TensorSpace {
    /// All of ℝ³ˣ³.
    Full,
    /// Trace-free tensors, sl(3).
    TraceFree,
    /// Symmetric trace-free tensors, Sym(3) ∩ sl(3).
    SymTraceFree,
}

impl TensorSpace {
    /// Orthogonal projection of a tensor onto the space.
    pub fn project<T: Real>(self, x: &Mat3<T>) -> Mat3<T> {
        match self {
            TensorSpace::Full => *x,
            TensorSpace::TraceFree => x.dev(),
            TensorSpace::SymTraceFree => x.sym().dev(),
        }
    }
}

/// Nodal constraint class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeKind {
    Interior,
    /// On micro-hard faces sharing the single normal axis `k`.
    Face(usize),
    /// On micro-hard faces with two or more distinct normals.
    Pinned,
}

impl NodeKind {
    fn slot(self) -> usize {
        match self {
            NodeKind::Interior => 0,
            NodeKind::Face(k) => 1 + k,
            NodeKind::Pinned => 4,
        }
    }
}

fn interior_basis<T: Real>(space: TensorSpace) -> Vec<Mat3<T>> {
    let r2 = T::lit(2.0).sqrt();
    let r6 = T::lit(6.0).sqrt();
    let e = Mat3::<T>::unit;
    let sym_dev = || {
        vec![
            (e(0, 1) + e(1, 0)) * (T::one() / r2),
            (e(0, 2) + e(2, 0)) * (T::one() / r2),
            (e(1, 2) + e(2, 1)) * (T::one() / r2),
            (e(0, 0) - e(1, 1)) * (T::one() / r2),
            (e(0, 0) + e(1, 1) - e(2, 2) * T::lit(2.0)) * (T::one() / r6),
        ]
    };
    match space {
        TensorSpace::Full => (0..9).map(|k| e(k / 3, k % 3)).collect(),
        TensorSpace::SymTraceFree => sym_dev(),
        TensorSpace::TraceFree => {
            let mut b = sym_dev();
            b.push((e(0, 1) - e(1, 0)) * (T::one() / r2));
            b.push((e(0, 2) - e(2, 0)) * (T::one() / r2));
            b.push((e(1, 2) - e(2, 1)) * (T::one() / r2));
            b
        }
    }
}

/// Basis of `{X ∈ space : X_ij = 0 for j ≠ k}`.
fn face_basis<T: Real>(space: TensorSpace, k: usize) -> Vec<Mat3<T>> {
    match space {
        TensorSpace::Full => (0..3).map(|i| Mat3::unit(i, k)).collect(),
        // The diagonal entry p_kk is forced to zero by tr p = 0.
        TensorSpace::TraceFree => (0..3).filter(|&i| i != k).map(|i| Mat3::unit(i, k)).collect(),
        // Symmetry also removes column k except p_kk, which is trace-free.
        TensorSpace::SymTraceFree => Vec::new(),
    }
}

/// Layout of the plastic unknowns.
#[derive(Clone, Debug)]
pub struct PLayout<T> {
    space: TensorSpace,
    micro_hard: FaceSet,
    kinds: Vec<NodeKind>,
    offsets: Vec<usize>,
    bases: [Vec<Mat3<T>>; 5],
    dof_node: Vec<usize>,
}

impl<T: Real> PLayout<T> {
    pub fn new(grid: &Grid<T>, space: TensorSpace, micro_hard: FaceSet) -> Self {
        let bases = [
            interior_basis(space),
            face_basis(space, 0),
            face_basis(space, 1),
            face_basis(space, 2),
            Vec::new(),
        ];
        let mut kinds = Vec::with_capacity(grid.node_count());
        let mut offsets = Vec::with_capacity(grid.node_count() + 1);
        let mut dof_node = Vec::new();
        offsets.push(0);
        for node in 0..grid.node_count() {
            let axes = grid.node_faces(node).intersection(micro_hard).normal_axes();
            let kind = match axes.as_slice() {
                [] => NodeKind::Interior,
                [k] => NodeKind::Face(*k),
                _ => NodeKind::Pinned,
            };
            let nb = bases[kind.slot()].len();
            dof_node.extend(std::iter::repeat(node).take(nb));
            offsets.push(offsets[node] + nb);
            kinds.push(kind);
        }
        PLayout {
            space,
            micro_hard,
            kinds,
            offsets,
            bases,
            dof_node,
        }
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn micro_hard(&self) -> FaceSet {
        self.micro_hard
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn ndofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn node_dofs(&self, node: usize) -> Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    pub fn node_basis(&self, node: usize) -> &[Mat3<T>] {
        &self.bases[self.kinds[node].slot()]
    }

    /// Node owning each degree of freedom.
    pub fn dof_node(&self) -> &[usize] {
        &self.dof_node
    }

    /// True when the node carries no micro-hard constraint.
    pub fn is_unconstrained(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Interior
    }

    /// Nodal tensor from coefficients.
    pub fn node_tensor(&self, coeffs: &[T], node: usize) -> Mat3<T> {
        let mut m = Mat3::zero();
        for (b, c) in self.node_basis(node).iter().zip(&coeffs[self.node_dofs(node)]) {
            m += *b * *c;
        }
        m
    }

    pub fn to_field(&self, coeffs: &[T]) -> TensorField<T> {
        TensorField {
            values: (0..self.node_count()).map(|n| self.node_tensor(coeffs, n)).collect(),
        }
    }

    /// Orthogonal projection of a nodal field onto the admissible subspace.
    pub fn project_field(&self, field: &TensorField<T>) -> Vec<T> {
        let mut c = vec![T::zero(); self.ndofs()];
        for node in 0..self.node_count() {
            let range = self.node_dofs(node);
            for (slot, b) in c[range].iter_mut().zip(self.node_basis(node)) {
                *slot = b.inner(&field.values[node]);
            }
        }
        c
    }

    /// Coefficient-space Euclidean norm of one node's block.
    pub fn node_norm(&self, coeffs: &[T], node: usize) -> T {
        coeffs[self.node_dofs(node)]
            .iter()
            .map(|x| *x * *x)
            .sum::<T>()
            .sqrt()
    }

    /// Per-dof lumped mass (the nodal weight of the owning node).
    pub fn dof_weights(&self, nodal_weights: &[T]) -> Vec<T> {
        self.dof_node.iter().map(|&n| nodal_weights[n]).collect()
    }
}

/// Which displacement components are free (not on Γ).
#[derive(Clone, Debug, PartialEq)]
pub struct ULayout {
    free: Vec<bool>,
}

impl ULayout {
    pub fn new<T: Real>(grid: &Grid<T>, boundary: &BoundaryConfig<T>) -> Self {
        Self::from_gamma(grid, boundary.gamma_faces)
    }

    pub fn from_gamma<T: Real>(grid: &Grid<T>, gamma: FaceSet) -> Self {
        let mut free = Vec::with_capacity(3 * grid.node_count());
        for node in 0..grid.node_count() {
            let fixed = !grid.node_faces(node).intersection(gamma).is_empty();
            free.extend([!fixed; 3]);
        }
        ULayout { free }
    }

    pub fn ndofs(&self) -> usize {
        self.free.len()
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.free[dof]
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.free.len()).filter(|&d| self.free[d]).collect()
    }

    /// Zeroes the constrained entries.
    pub fn mask<T: Real>(&self, v: &mut [T]) {
        for (x, &f) in v.iter_mut().zip(&self.free) {
            if !f {
                *x = T::zero();
            }
        }
    }
}
