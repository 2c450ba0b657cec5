//! Structured hexahedral grids, nodal fields and trilinear shape functions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{Mat3, Vec3};

/// Axis-aligned box `origin + [0, n_x h_x] × [0, n_y h_y] × [0, n_z h_z]`
/// split into identical cells. Nodes are numbered with `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub n: [usize; 3],
    pub h: [T; 3],
    pub origin: Vec3<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(n: [usize; 3], h: [T; 3], origin: Vec3<T>) -> Result<Self> {
        if n.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParams(format!("cells per axis must be positive, got {n:?}")));
        }
        if h.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidParams("cell size must be positive and finite".into()));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("origin must be finite".into()));
        }
        Ok(Grid { n, h, origin })
    }

    /// Box of the given extent split into `n` cells per axis.
    pub fn with_size(n: [usize; 3], size: Vec3<T>, origin: Vec3<T>) -> Result<Self> {
        if n.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParams(format!("cells per axis must be positive, got {n:?}")));
        }
        let h = [
            size[0] / T::count(n[0]),
            size[1] / T::count(n[1]),
            size[2] / T::count(n[2]),
        ];
        Self::new(n, h, origin)
    }

    pub fn unit_cube(n: usize) -> Self {
        Self::with_size([n; 3], [T::one(); 3], [T::zero(); 3]).expect("valid unit cube")
    }

    pub fn nodes_per_axis(&self) -> [usize; 3] {
        [self.n[0] + 1, self.n[1] + 1, self.n[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().product()
    }

    pub fn size(&self) -> Vec3<T> {
        [
            self.h[0] * T::count(self.n[0]),
            self.h[1] * T::count(self.n[1]),
            self.h[2] * T::count(self.n[2]),
        ]
    }

    pub fn volume(&self) -> T {
        let s = self.size();
        s[0] * s[1] * s[2]
    }

    pub fn cell_volume(&self) -> T {
        self.h[0] * self.h[1] * self.h[2]
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.nodes_per_axis();
        i + nx * (j + ny * k)
    }

    #[inline]
    pub fn node_ijk(&self, node: usize) -> [usize; 3] {
        let [nx, ny, _] = self.nodes_per_axis();
        [node % nx, (node / nx) % ny, node / (nx * ny)]
    }

    pub fn node_position(&self, node: usize) -> Vec3<T> {
        let ijk = self.node_ijk(node);
        [0, 1, 2].map(|d| self.origin[d] + T::count(ijk[d]) * self.h[d])
    }

    #[inline]
    pub fn cell_ijk(&self, cell: usize) -> [usize; 3] {
        [
            cell % self.n[0],
            (cell / self.n[0]) % self.n[1],
            cell / (self.n[0] * self.n[1]),
        ]
    }

    /// Global node numbers of a cell; local node `a = ax + 2 ay + 4 az`.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let [ci, cj, ck] = self.cell_ijk(cell);
        std::array::from_fn(|a| self.node_index(ci + (a & 1), cj + ((a >> 1) & 1), ck + ((a >> 2) & 1)))
    }

    pub fn cell_origin(&self, cell: usize) -> Vec3<T> {
        let ijk = self.cell_ijk(cell);
        [0, 1, 2].map(|d| self.origin[d] + T::count(ijk[d]) * self.h[d])
    }

    /// Physical coordinates of the eight Gauss points of a cell.
    pub fn gauss_points(&self, cell: usize) -> [Vec3<T>; 8] {
        let o = self.cell_origin(cell);
        let xi = gauss_abscissae::<T>();
        std::array::from_fn(|g| {
            let gi = [g & 1, (g >> 1) & 1, (g >> 2) & 1];
            [0, 1, 2].map(|d| o[d] + xi[gi[d]] * self.h[d])
        })
    }

    /// Faces of the box that contain the node.
    pub fn node_faces(&self, node: usize) -> FaceSet {
        let ijk = self.node_ijk(node);
        let mut set = FaceSet::empty();
        for d in 0..3 {
            if ijk[d] == 0 {
                set.insert(Face::new(d, false));
            }
            if ijk[d] == self.n[d] {
                set.insert(Face::new(d, true));
            }
        }
        set
    }

    /// `∫ N_j dx` for every node (lumped mass weights).
    pub fn nodal_weights(&self) -> Vec<T> {
        let mut w = vec![T::zero(); self.node_count()];
        let share = self.cell_volume() / T::lit(8.0);
        for cell in 0..self.cell_count() {
            for n in self.cell_nodes(cell) {
                w[n] += share;
            }
        }
        w
    }

    /// Same box shifted by `delta`.
    pub fn translated(&self, delta: Vec3<T>) -> Self {
        Grid {
            n: self.n,
            h: self.h,
            origin: [0, 1, 2].map(|d| self.origin[d] + delta[d]),
        }
    }
}

/// Gauss abscissae of the two-point rule on `[0, 1]`.
pub fn gauss_abscissae<T: Real>() -> [T; 2] {
    let d = T::lit(0.5) / T::lit(3.0).sqrt();
    [T::lit(0.5) - d, T::lit(0.5) + d]
}

/// One face of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    axis: u8,
    upper: bool,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face { axis: 0, upper: false },
        Face { axis: 0, upper: true },
        Face { axis: 1, upper: false },
        Face { axis: 1, upper: true },
        Face { axis: 2, upper: false },
        Face { axis: 2, upper: true },
    ];

    pub fn new(axis: usize, upper: bool) -> Self {
        assert!(axis < 3);
        Face { axis: axis as u8, upper }
    }

    /// Index of the outward normal axis.
    pub fn axis(self) -> usize {
        self.axis as usize
    }

    pub fn is_upper(self) -> bool {
        self.upper
    }

    fn bit(self) -> u8 {
        1 << (2 * self.axis + self.upper as u8)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = ["x", "y", "z"][self.axis()];
        write!(f, "{axis}{}", if self.upper { "+" } else { "-" })
    }
}

impl FromStr for Face {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("unknown face '{s}' (expected x-, x+, y-, y+, z-, z+)"));
        let mut chars = s.chars();
        let axis = match chars.next() {
            Some('x') => 0,
            Some('y') => 1,
            Some('z') => 2,
            _ => return Err(bad()),
        };
        let upper = match chars.next() {
            Some('-') => false,
            Some('+') => true,
            _ => return Err(bad()),
        };
        if chars.next().is_some() {
            return Err(bad());
        }
        Ok(Face::new(axis, upper))
    }
}

/// Subset of the six box faces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FaceSet(u8);

impl FaceSet {
    pub fn empty() -> Self {
        FaceSet(0)
    }

    pub fn all() -> Self {
        FaceSet(0b11_1111)
    }

    pub fn from_faces(faces: impl IntoIterator<Item = Face>) -> Self {
        let mut s = Self::empty();
        for f in faces {
            s.insert(f);
        }
        s
    }

    pub fn insert(&mut self, f: Face) {
        self.0 |= f.bit();
    }

    pub fn contains(self, f: Face) -> bool {
        self.0 & f.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: FaceSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersection(self, other: FaceSet) -> FaceSet {
        FaceSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Face> {
        Face::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// Distinct normal axes among the faces.
    pub fn normal_axes(self) -> Vec<usize> {
        let mut axes: Vec<usize> = self.iter().map(Face::axis).collect();
        axes.dedup();
        axes
    }
}

/// Per-node 3-vectors, e.g. the displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    pub values: Vec<Vec3<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        VectorField {
            values: vec![[T::zero(); 3]; grid.node_count()],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        VectorField {
            values: (0..grid.node_count()).map(|n| f(grid.node_position(n))).collect(),
        }
    }

    pub fn as_flat(&self) -> Vec<T> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[T]) -> Self {
        VectorField {
            values: flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        }
    }
}

/// Per-node 3×3 tensors, e.g. the plastic distortion.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    pub values: Vec<Mat3<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        TensorField {
            values: vec![Mat3::zero(); grid.node_count()],
        }
    }

    pub fn constant(grid: &Grid<T>, value: Mat3<T>) -> Self {
        TensorField {
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(Vec3<T>) -> Mat3<T>) -> Self {
        TensorField {
            values: (0..grid.node_count()).map(|n| f(grid.node_position(n))).collect(),
        }
    }

    pub fn max_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }
}

/// Per-node scalars, e.g. the accumulated plastic strain.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        ScalarField {
            values: vec![T::zero(); grid.node_count()],
        }
    }
}

/// Boundary data: the Dirichlet part Γ for the displacement with an affine
/// displacement program, and the faces carrying the micro-hard condition
/// `p × n = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConfig<T> {
    pub gamma_faces: FaceSet,
    /// Prescribed displacement per unit amplitude, `u_D(x) = G (x − origin)`.
    pub dirichlet_gradient: Mat3<T>,
    pub micro_hard_faces: FaceSet,
}

impl<T: Real> BoundaryConfig<T> {
    /// Micro-hard faces default to the Dirichlet faces.
    pub fn new(gamma_faces: FaceSet, dirichlet_gradient: Mat3<T>) -> Result<Self> {
        Self::with_micro_hard(gamma_faces, dirichlet_gradient, gamma_faces)
    }

    pub fn with_micro_hard(
        gamma_faces: FaceSet,
        dirichlet_gradient: Mat3<T>,
        micro_hard_faces: FaceSet,
    ) -> Result<Self> {
        if gamma_faces.is_empty() {
            return Err(Error::InvalidParams(
                "the Dirichlet boundary must contain at least one face".into(),
            ));
        }
        if !dirichlet_gradient.is_finite() {
            return Err(Error::InfeasibleBc("non-finite Dirichlet gradient".into()));
        }
        Ok(BoundaryConfig {
            gamma_faces,
            dirichlet_gradient,
            micro_hard_faces,
        })
    }

    /// Prescribed displacement at a point for the given amplitude.
    pub fn dirichlet_value(&self, grid: &Grid<T>, x: Vec3<T>, amplitude: T) -> Vec3<T> {
        let rel = [0, 1, 2].map(|d| x[d] - grid.origin[d]);
        self.dirichlet_gradient.mul_vec(&rel).map(|v| v * amplitude)
    }

    /// True when the node lies on Γ.
    pub fn is_dirichlet_node(&self, grid: &Grid<T>, node: usize) -> bool {
        !grid.node_faces(node).intersection(self.gamma_faces).is_empty()
    }
}

/// Values and physical gradients of the eight trilinear shape functions at the
/// 2×2×2 Gauss points of a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeData<T> {
    /// `values[g][a] = N_a(x_g)`.
    pub values: [[T; 8]; 8],
    /// `gradients[g][a] = ∇N_a(x_g)`.
    pub gradients: [[Vec3<T>; 8]; 8],
    /// Quadrature weight of each Gauss point.
    pub weight: T,
}

impl<T: Real> ShapeData<T> {
    pub fn new(h: [T; 3]) -> Self {
        let xi = gauss_abscissae::<T>();
        let one = T::one();
        let mut values = [[T::zero(); 8]; 8];
        let mut gradients = [[[T::zero(); 3]; 8]; 8];
        for g in 0..8 {
            let q = [xi[g & 1], xi[(g >> 1) & 1], xi[(g >> 2) & 1]];
            for a in 0..8 {
                let bits = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                let f: [T; 3] = std::array::from_fn(|d| if bits[d] == 1 { q[d] } else { one - q[d] });
                let df: [T; 3] = std::array::from_fn(|d| if bits[d] == 1 { one } else { -one });
                values[g][a] = f[0] * f[1] * f[2];
                gradients[g][a] = [
                    df[0] * f[1] * f[2] / h[0],
                    f[0] * df[1] * f[2] / h[1],
                    f[0] * f[1] * df[2] / h[2],
                ];
            }
        }
        ShapeData {
            values,
            gradients,
            weight: h[0] * h[1] * h[2] / T::lit(8.0),
        }
    }
}

/// Shape-function data for one cell (identical for every cell of the grid).
pub fn shape_gradients<T: Real>(grid: &Grid<T>, cell: usize) -> Result<ShapeData<T>> {
    if cell >= grid.cell_count() {
        return Err(Error::IndexOutOfRange {
            index: cell,
            len: grid.cell_count(),
        });
    }
    Ok(ShapeData::new(grid.h))
}

/// Enforces `p × n = 0` nodally: on a face with normal `e_k` every row of `p`
/// is made parallel to `e_k`, i.e. `p_ij = 0` for `j ≠ k`.
pub fn apply_micro_hard_mask<T: Real>(
    grid: &Grid<T>,
    micro_hard_faces: FaceSet,
    p: &TensorField<T>,
) -> TensorField<T> {
    let mut out = p.clone();
    for (node, value) in out.values.iter_mut().enumerate() {
        for face in grid.node_faces(node).intersection(micro_hard_faces).iter() {
            let k = face.axis();
            for i in 0..3 {
                for j in 0..3 {
                    if j != k {
                        value[(i, j)] = T::zero();
                    }
                }
            }
        }
    }
    out
}
