//! Assembly of the quadratic-form blocks of the bilinear form
//! `a((u,p),(v,q)) = ∫ ⟨C sym(∇u − p), sym(∇v − q)⟩ + μL_c²⟨Curl p, Curl q⟩ + μk₁⟨sym p, sym q⟩`
//! and the discrete differential operators on the nodal trilinear space.
//!
//! Displacement blocks use all `3N` nodal components (`3 node + c`); the
//! constrained version drops the Dirichlet rows and columns. Plastic blocks
//! act on the coefficient vector of a [`PLayout`], so micro-hard constraints
//! are already eliminated.

use crate::dofs::{PLayout, TensorSpace, ULayout};
use crate::error::{Error, Result};
use crate::grid::{BoundaryConfig, Grid, ShapeData, TensorField, VectorField};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::tensor::{cross, l_apply, MaterialParams, Mat3, TensorGradient, Vec3};

/// Mesh, boundary data and unknown layouts of one problem.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub grid: Grid<T>,
    pub boundary: BoundaryConfig<T>,
    pub u_layout: ULayout,
    pub p_layout: PLayout<T>,
    pub shape: ShapeData<T>,
    /// `∫ N_j dx` per node.
    pub nodal_weights: Vec<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(grid: Grid<T>, boundary: BoundaryConfig<T>, space: TensorSpace) -> Self {
        let u_layout = ULayout::new(&grid, &boundary);
        let p_layout = PLayout::new(&grid, space, boundary.micro_hard_faces);
        let shape = ShapeData::new(grid.h);
        let nodal_weights = grid.nodal_weights();
        Discretization {
            grid,
            boundary,
            u_layout,
            p_layout,
            shape,
            nodal_weights,
        }
    }

    pub fn nu(&self) -> usize {
        self.u_layout.ndofs()
    }

    pub fn np(&self) -> usize {
        self.p_layout.ndofs()
    }

    /// Lumped weight of every plastic coefficient.
    pub fn p_weights(&self) -> Vec<T> {
        self.p_layout.dof_weights(&self.nodal_weights)
    }

    /// Full displacement vector holding the Dirichlet values at the given
    /// amplitude on Γ and zero elsewhere.
    pub fn dirichlet_lift(&self, amplitude: T) -> Vec<T> {
        let mut u = vec![T::zero(); self.nu()];
        for node in 0..self.grid.node_count() {
            if self.boundary.is_dirichlet_node(&self.grid, node) {
                let x = self.grid.node_position(node);
                let v = self.boundary.dirichlet_value(&self.grid, x, amplitude);
                u[3 * node..3 * node + 3].copy_from_slice(&v);
            }
        }
        u
    }

    /// Consistent load vector of a constant body force, `∫ f·N_a dx`.
    pub fn body_force_vector(&self, f: Vec3<T>) -> Vec<T> {
        let mut b = vec![T::zero(); self.nu()];
        for (node, w) in self.nodal_weights.iter().enumerate() {
            for c in 0..3 {
                b[3 * node + c] = f[c] * *w;
            }
        }
        b
    }
}

/// Which operator `assemble_block` returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockTag {
    /// `∫⟨C sym ∇u, sym ∇v⟩`.
    Uu,
    /// `−∫⟨C sym ∇u, sym q⟩` (rows u, columns p).
    Up,
    /// `∫⟨C sym p, sym q⟩`.
    PpElastic,
    /// `∫⟨Curl p, Curl q⟩`.
    PpCurl,
    /// `2 Σᵢ ∫⟨skew ∇pᵢ, ∇qᵢ⟩`, the microstress route to the defect form.
    PpMicro,
    /// `∫⟨sym p, sym q⟩`.
    PpSym,
    /// Consistent mass `∫⟨p, q⟩`.
    Mass,
    /// Diagonal lumped mass.
    Lumped,
    /// The full coercive form `a` on (free u, p), requiring `k₁ > 0`.
    Joint,
}

/// Every block of the bilinear form, unconstrained in u.
#[derive(Clone, Debug)]
pub struct AssembledBlocks<T> {
    pub kuu: CsrMatrix<T>,
    pub kup: CsrMatrix<T>,
    pub kpp_elastic: CsrMatrix<T>,
    pub kcurl: CsrMatrix<T>,
    pub kmicro: CsrMatrix<T>,
    pub ksym: CsrMatrix<T>,
    pub mass: CsrMatrix<T>,
    pub lumped: Vec<T>,
}

/// Route used for the defect-energy operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DefectForm {
    /// `⟨Curl p, Curl q⟩`.
    #[default]
    Curl,
    /// `2 Σᵢ ⟨skew ∇pᵢ, ∇qᵢ⟩` (microstress form).
    Microstress,
}

impl<T: Real> AssembledBlocks<T> {
    pub fn defect(&self, form: DefectForm) -> &CsrMatrix<T> {
        match form {
            DefectForm::Curl => &self.kcurl,
            DefectForm::Microstress => &self.kmicro,
        }
    }

    /// `A_p = K_el + μL_c² K_defect + μk₁ K_sym` (the last term only when
    /// `kinematic`).
    pub fn plastic_operator(
        &self,
        params: &MaterialParams<T>,
        form: DefectForm,
        kinematic: bool,
    ) -> Result<CsrMatrix<T>> {
        if kinematic && !(params.k1 > T::zero()) {
            return Err(Error::SingularBlock(
                "kinematic hardening needs k1 > 0 for a coercive plastic block".into(),
            ));
        }
        let curl_coef = params.mu * params.lc * params.lc;
        let sym_coef = if kinematic { params.mu * params.k1 } else { T::zero() };
        CsrMatrix::linear_combination(&[
            (T::one(), &self.kpp_elastic),
            (curl_coef, self.defect(form)),
            (sym_coef, &self.ksym),
        ])
    }
}

#[derive(Clone, Copy)]
struct PDof<T> {
    global: usize,
    local_node: usize,
    basis: Mat3<T>,
}

fn cell_p_dofs<T: Real>(layout: &PLayout<T>, nodes: &[usize; 8]) -> Vec<PDof<T>> {
    let mut out = Vec::with_capacity(72);
    for (a, &node) in nodes.iter().enumerate() {
        for (b, basis) in layout.node_dofs(node).zip(layout.node_basis(node)) {
            out.push(PDof {
                global: b,
                local_node: a,
                basis: *basis,
            });
        }
    }
    out
}

/// Curl of `N(x) B` for a constant tensor `B`: row `i` is `∇N × Bᵢ`.
#[inline]
fn curl_of_scaled<T: Real>(grad_n: &Vec3<T>, b: &Mat3<T>) -> Mat3<T> {
    Mat3::from_rows([0, 1, 2].map(|i| cross(grad_n, &b.row(i))))
}

/// Assembles every block. Elastic blocks use `params`; the others are
/// parameter-free.
pub fn assemble_all<T: Real>(disc: &Discretization<T>, params: &MaterialParams<T>) -> AssembledBlocks<T> {
    let grid = &disc.grid;
    let shape = &disc.shape;
    let nu = disc.nu();
    let np = disc.np();
    let two_mu = T::lit(2.0) * params.mu;
    let lambda = params.lambda;
    let w = shape.weight;

    let mut kuu = TripletBuilder::with_capacity(nu, nu, grid.cell_count() * 24 * 24);
    let mut kup = TripletBuilder::new(nu, np);
    let mut kel = TripletBuilder::new(np, np);
    let mut kcurl = TripletBuilder::new(np, np);
    let mut kmicro = TripletBuilder::new(np, np);
    let mut ksym = TripletBuilder::new(np, np);
    let mut mass = TripletBuilder::new(np, np);

    for cell in 0..grid.cell_count() {
        let nodes = grid.cell_nodes(cell);
        let pd = cell_p_dofs(&disc.p_layout, &nodes);
        let m = pd.len();
        let mut luu = vec![T::zero(); 24 * 24];
        let mut lup = vec![T::zero(); 24 * m];
        let mut lel = vec![T::zero(); m * m];
        let mut lcurl = vec![T::zero(); m * m];
        let mut lmicro = vec![T::zero(); m * m];
        let mut lsym = vec![T::zero(); m * m];
        let mut lmass = vec![T::zero(); m * m];

        let sym_b: Vec<Mat3<T>> = pd.iter().map(|d| d.basis.sym()).collect();
        let tr_b: Vec<T> = pd.iter().map(|d| d.basis.trace()).collect();

        for g in 0..8 {
            let n = &shape.values[g];
            let dn = &shape.gradients[g];
            // u dof (a, c): G = e_c ⊗ ∇N_a
            let ug: Vec<(Mat3<T>, T)> = (0..24)
                .map(|l| {
                    let (a, c) = (l / 3, l % 3);
                    let mut gm = Mat3::zero();
                    gm.0[c] = dn[a];
                    (gm.sym(), dn[a][c])
                })
                .collect();
            let curls: Vec<Mat3<T>> = pd.iter().map(|d| curl_of_scaled(&dn[d.local_node], &d.basis)).collect();
            // skew(Bᵢ ⊗ ∇N) per row i
            let skews: Vec<[Mat3<T>; 3]> = pd
                .iter()
                .map(|d| [0, 1, 2].map(|i| Mat3::outer(&d.basis.row(i), &dn[d.local_node]).skew()))
                .collect();

            for r in 0..24 {
                for c in r..24 {
                    let v = two_mu * ug[r].0.inner(&ug[c].0) + lambda * ug[r].1 * ug[c].1;
                    luu[r * 24 + c] += w * v;
                }
                for (c, d) in pd.iter().enumerate() {
                    let na = n[d.local_node];
                    let v = two_mu * ug[r].0.inner(&sym_b[c]) + lambda * ug[r].1 * tr_b[c];
                    lup[r * m + c] -= w * na * v;
                }
            }
            for r in 0..m {
                let nr = n[pd[r].local_node];
                for c in r..m {
                    let nc = n[pd[c].local_node];
                    let gc = dn[pd[c].local_node];
                    let nn = w * nr * nc;
                    let ss = sym_b[r].inner(&sym_b[c]);
                    lel[r * m + c] += nn * (two_mu * ss + lambda * tr_b[r] * tr_b[c]);
                    lsym[r * m + c] += nn * ss;
                    lmass[r * m + c] += nn * pd[r].basis.inner(&pd[c].basis);
                    lcurl[r * m + c] += w * curls[r].inner(&curls[c]);
                    let mut micro = T::zero();
                    for i in 0..3 {
                        micro += skews[r][i].inner(&Mat3::outer(&pd[c].basis.row(i), &gc));
                    }
                    lmicro[r * m + c] += w * T::lit(2.0) * micro;
                }
            }
        }

        let udofs: [usize; 24] = std::array::from_fn(|l| 3 * nodes[l / 3] + l % 3);
        push_symmetric(&mut kuu, &udofs, &luu);
        for r in 0..24 {
            for (c, d) in pd.iter().enumerate() {
                kup.push(udofs[r], d.global, lup[r * m + c]);
            }
        }
        let pdofs: Vec<usize> = pd.iter().map(|d| d.global).collect();
        push_symmetric(&mut kel, &pdofs, &lel);
        push_symmetric(&mut kcurl, &pdofs, &lcurl);
        push_symmetric(&mut kmicro, &pdofs, &lmicro);
        push_symmetric(&mut ksym, &pdofs, &lsym);
        push_symmetric(&mut mass, &pdofs, &lmass);
    }

    AssembledBlocks {
        kuu: kuu.build(),
        kup: kup.build(),
        kpp_elastic: kel.build(),
        kcurl: kcurl.build(),
        kmicro: kmicro.build(),
        ksym: ksym.build(),
        mass: mass.build(),
        lumped: disc.p_weights(),
    }
}

/// Pushes a local matrix given by its upper triangle, mirrored so the global
/// matrix is exactly symmetric.
fn push_symmetric<T: Real>(b: &mut TripletBuilder<T>, dofs: &[usize], upper: &[T]) {
    let m = dofs.len();
    for r in 0..m {
        b.push(dofs[r], dofs[r], upper[r * m + r]);
        for c in r + 1..m {
            let v = upper[r * m + c];
            b.push(dofs[r], dofs[c], v);
            b.push(dofs[c], dofs[r], v);
        }
    }
}

/// One block of the bilinear form with the Dirichlet displacement components
/// eliminated. Plastic constraints are part of the layout.
pub fn assemble_block<T: Real>(
    disc: &Discretization<T>,
    params: &MaterialParams<T>,
    which: BlockTag,
) -> Result<CsrMatrix<T>> {
    if which == BlockTag::Joint && !(params.k1 > T::zero()) {
        return Err(Error::SingularBlock(
            "the joint form is only coercive for k1 > 0".into(),
        ));
    }
    let blocks = assemble_all(disc, params);
    let free = disc.u_layout.free_dofs();
    let all_p: Vec<usize> = (0..disc.np()).collect();
    Ok(match which {
        BlockTag::Uu => blocks.kuu.restrict(&free, &free),
        BlockTag::Up => blocks.kup.restrict(&free, &all_p),
        BlockTag::PpElastic => blocks.kpp_elastic,
        BlockTag::PpCurl => blocks.kcurl,
        BlockTag::PpMicro => blocks.kmicro,
        BlockTag::PpSym => blocks.ksym,
        BlockTag::Mass => blocks.mass,
        BlockTag::Lumped => CsrMatrix::diagonal_matrix(&blocks.lumped),
        BlockTag::Joint => joint_matrix(disc, &blocks, params, DefectForm::Curl)?,
    })
}

/// The joint operator on `(u_free, p)` ordered u first.
pub fn joint_matrix<T: Real>(
    disc: &Discretization<T>,
    blocks: &AssembledBlocks<T>,
    params: &MaterialParams<T>,
    form: DefectForm,
) -> Result<CsrMatrix<T>> {
    let free = disc.u_layout.free_dofs();
    let nf = free.len();
    let np = disc.np();
    let app = blocks.plastic_operator(params, form, true)?;
    let mut map = vec![usize::MAX; disc.nu()];
    for (k, &d) in free.iter().enumerate() {
        map[d] = k;
    }
    let mut b = TripletBuilder::new(nf + np, nf + np);
    for (k, &d) in free.iter().enumerate() {
        for (c, v) in blocks.kuu.row(d) {
            if map[c] != usize::MAX {
                b.push(k, map[c], v);
            }
        }
        for (c, v) in blocks.kup.row(d) {
            b.push(k, nf + c, v);
        }
    }
    let kpu = blocks.kup.transpose();
    for r in 0..np {
        for (c, v) in kpu.row(r) {
            if map[c] != usize::MAX {
                b.push(nf + r, map[c], v);
            }
        }
        for (c, v) in app.row(r) {
            b.push(nf + r, nf + c, v);
        }
    }
    Ok(b.build())
}

/// Interpolated values of a nodal tensor field at the Gauss points of every
/// cell.
pub fn interpolate_tensor<T: Real>(grid: &Grid<T>, p: &TensorField<T>) -> Vec<[Mat3<T>; 8]> {
    let shape = ShapeData::new(grid.h);
    (0..grid.cell_count())
        .map(|cell| {
            let nodes = grid.cell_nodes(cell);
            std::array::from_fn(|g| {
                let mut m = Mat3::zero();
                for a in 0..8 {
                    m += p.values[nodes[a]] * shape.values[g][a];
                }
                m
            })
        })
        .collect()
}

/// `∇X` of the trilinear interpolant at the Gauss points.
pub fn tensor_gradient<T: Real>(grid: &Grid<T>, p: &TensorField<T>) -> Vec<[TensorGradient<T>; 8]> {
    let shape = ShapeData::new(grid.h);
    (0..grid.cell_count())
        .map(|cell| {
            let nodes = grid.cell_nodes(cell);
            std::array::from_fn(|g| {
                let mut out = [[[T::zero(); 3]; 3]; 3];
                // differences to the first node: constants give exactly zero
                let base = p.values[nodes[0]];
                for a in 1..8 {
                    let dn = shape.gradients[g][a];
                    let v = p.values[nodes[a]] - base;
                    for i in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                out[i][j][k] += v[(i, j)] * dn[k];
                            }
                        }
                    }
                }
                out
            })
        })
        .collect()
}

/// Curl of the trilinear interpolant at the Gauss points of every cell.
pub fn discrete_curl<T: Real>(grid: &Grid<T>, p: &TensorField<T>) -> Vec<[Mat3<T>; 8]> {
    tensor_gradient(grid, p)
        .into_iter()
        .map(|cell| cell.map(|g| l_apply(&g)))
        .collect()
}

/// `∇u` of the trilinear interpolant at the Gauss points (`(∇u)_ck = ∂u_c/∂x_k`).
pub fn displacement_gradient<T: Real>(grid: &Grid<T>, u: &VectorField<T>) -> Vec<[Mat3<T>; 8]> {
    let shape = ShapeData::new(grid.h);
    (0..grid.cell_count())
        .map(|cell| {
            let nodes = grid.cell_nodes(cell);
            std::array::from_fn(|g| {
                let mut m = Mat3::zero();
                let base = u.values[nodes[0]];
                for a in 1..8 {
                    let d: Vec3<T> = std::array::from_fn(|i| u.values[nodes[a]][i] - base[i]);
                    m += Mat3::outer(&d, &shape.gradients[g][a]);
                }
                m
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Face, FaceSet};
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MaterialParams<f64> {
        MaterialParams::new(1.0, 1.5, 0.5, 0.0, 0.3, 0.01).unwrap()
    }

    fn disc(n: usize, gamma: FaceSet, hard: FaceSet, space: TensorSpace) -> Discretization<f64> {
        let grid = Grid::unit_cube(n);
        let bc = BoundaryConfig::with_micro_hard(gamma, Mat3::unit(0, 1), hard).unwrap();
        Discretization::new(grid, bc, space)
    }

    #[test]
    fn blocks_are_exactly_symmetric() {
        let d = disc(2, FaceSet::all(), FaceSet::all(), TensorSpace::TraceFree);
        let b = assemble_all(&d, &params());
        for m in [&b.kuu, &b.kpp_elastic, &b.kcurl, &b.kmicro, &b.ksym, &b.mass] {
            assert!(m.is_symmetric());
        }
    }

    #[test]
    fn kuu_annihilates_rigid_translations() {
        let d = disc(1, FaceSet::all(), FaceSet::empty(), TensorSpace::TraceFree);
        let b = assemble_all(&d, &params());
        for c in 0..3 {
            let t: Vec<f64> = (0..d.nu()).map(|k| if k % 3 == c { 1.0 } else { 0.0 }).collect();
            let r = b.kuu.apply(&t);
            assert!(r.iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn curl_form_vanishes_on_constant_fields() {
        let d = disc(2, FaceSet::all(), FaceSet::empty(), TensorSpace::TraceFree);
        let b = assemble_all(&d, &params());
        let skew = Mat3::skew_from_axial(&[0.3, -1.2, 0.7]);
        let z = d.p_layout.project_field(&TensorField::constant(&d.grid, skew));
        assert!(b.kcurl.quad_form(&z).abs() < 1e-14);
        assert!(b.kmicro.quad_form(&z).abs() < 1e-14);
        assert!(b.ksym.quad_form(&z).abs() < 1e-14);
    }

    #[test]
    fn micro_and_curl_forms_agree() {
        let d = disc(2, FaceSet::all(), FaceSet::empty(), TensorSpace::TraceFree);
        let b = assemble_all(&d, &params());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..d.np()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..d.np()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = dot(&x, &b.kcurl.apply(&y));
        let m = dot(&x, &b.kmicro.apply(&y));
        assert!((a - m).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn joint_form_is_positive_on_random_vectors() {
        let d = disc(2, FaceSet::all(), FaceSet::all(), TensorSpace::TraceFree);
        let j = assemble_block(&d, &params(), BlockTag::Joint).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z: Vec<f64> = (0..j.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(j.quad_form(&z) > 0.0);
        }
        let mut p = params();
        p.k1 = 0.0;
        assert!(matches!(
            assemble_block(&d, &p, BlockTag::Joint),
            Err(Error::SingularBlock(_))
        ));
    }

    #[test]
    fn constrained_assembly_matches_restriction() {
        let hard = FaceSet::from_faces([Face::new(1, false), Face::new(2, true)]);
        let masked = disc(2, FaceSet::all(), hard, TensorSpace::Full);
        let open = disc(2, FaceSet::all(), FaceSet::empty(), TensorSpace::Full);
        let bm = assemble_all(&masked, &params());
        let bo = assemble_all(&open, &params());
        // Full-space bases are unit tensors, so the constrained dofs are a
        // subset of the open ones.
        let mut keep = Vec::new();
        for node in 0..masked.grid.node_count() {
            for b in masked.p_layout.node_basis(node) {
                let pos = open.p_layout.node_basis(node).iter().position(|x| x == b).unwrap();
                keep.push(open.p_layout.node_dofs(node).start + pos);
            }
        }
        for (a, b) in [(&bm.kcurl, &bo.kcurl), (&bm.kpp_elastic, &bo.kpp_elastic), (&bm.mass, &bo.mass)] {
            let r = b.restrict(&keep, &keep);
            assert_eq!(a.to_dense(), r.to_dense());
        }
    }

    #[test]
    fn quadratic_form_matches_quadrature() {
        let d = disc(2, FaceSet::all(), FaceSet::empty(), TensorSpace::TraceFree);
        let b = assemble_all(&d, &params());
        let field = TensorField::from_fn(&d.grid, |x| {
            Mat3::from_fn(|i, j| (x[i] + 2.0 * x[j] * x[(i + 1) % 3]) * (1.0 + i as f64 - j as f64)).dev()
        });
        let z = d.p_layout.project_field(&field);
        let curls = discrete_curl(&d.grid, &field);
        let vals = interpolate_tensor(&d.grid, &field);
        let w = d.shape.weight;
        let mut ccurl = 0.0;
        let mut cmass = 0.0;
        for (cc, vv) in curls.iter().zip(&vals) {
            for g in 0..8 {
                ccurl += w * cc[g].inner(&cc[g]);
                cmass += w * vv[g].inner(&vv[g]);
            }
        }
        assert!((b.kcurl.quad_form(&z) - ccurl).abs() <= 1e-12 * ccurl);
        assert!((b.mass.quad_form(&z) - cmass).abs() <= 1e-12 * cmass);
    }

    #[test]
    fn curl_of_row_rotation_field() {
        let grid = Grid::<f64>::unit_cube(2);
        let a = [[1.0, 2.0, -1.0], [0.5, 0.0, 3.0], [-2.0, 1.0, 1.0]];
        let field = TensorField::from_fn(&grid, |x| Mat3::from_rows([0, 1, 2].map(|i| cross(&a[i], &x))));
        for cell in discrete_curl(&grid, &field) {
            for c in cell {
                for i in 0..3 {
                    for k in 0..3 {
                        assert!((c[(i, k)] - 2.0 * a[i][k]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn curl_of_interpolated_gradient_vanishes() {
        let grid = Grid::<f64>::unit_cube(3);
        // v = (x y, y z + x², z x): nodal interpolant of ∇v
        let field = TensorField::from_fn(&grid, |x| {
            Mat3::from_rows([[x[1], x[0], 0.0], [2.0 * x[0], x[2], x[1]], [x[2], 0.0, x[0]]])
        });
        for cell in discrete_curl(&grid, &field) {
            for c in cell {
                assert!(c.max_abs() < 1e-12);
            }
        }
    }
}
