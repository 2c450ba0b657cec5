use gradplast::korn::estimate_min_quotient;
use gradplast::solver::{plastic_multiplier, run_program, time_step};
use gradplast::{
    BoundaryConfig, Error, Face, FaceSet, Grid, KornProblem, LoadStep, Mat3, MaterialParams, ModelVariant, Problem,
    SimState, SolverConfig, VariantTag,
};

fn layer_shear() -> BoundaryConfig {
    BoundaryConfig::new(FaceSet::from_faces([Face::new(1, false), Face::new(1, true)]), Mat3::unit(0, 1)).unwrap()
}

fn params() -> MaterialParams {
    MaterialParams::new(1.0, 1.5, 0.5, 0.5, 0.2, 0.01).unwrap()
}

fn shear_program(n: usize) -> Vec<LoadStep> {
    (1..=n).map(|k| LoadStep::displacement(0.004 * k as f64)).collect()
}

#[test]
fn every_flow_variant_satisfies_the_yield_conditions() {
    let cfg = SolverConfig::default();
    for tag in [VariantTag::KinSpin, VariantTag::IsoSpin, VariantTag::IsoIrrot, VariantTag::KinIrrot] {
        let variant = ModelVariant::new(tag, params()).unwrap();
        let pb = Problem::new(variant, Grid::unit_cube(3), layer_shear(), &cfg).unwrap();
        let out = run_program(&pb, &shear_program(6), &cfg).unwrap();
        let mut prev = SimState::zero(pb.grid());
        for (state, rep) in &out {
            assert!(rep.kkt_max_violation <= 1e-6 * 0.01, "{tag}: {rep:?}");
            assert!(rep.max_flow_angle <= 1e-6, "{tag}");
            assert!(rep.plastic_work >= -1e-10 * rep.energy.scale(), "{tag}");
            assert!(rep.vi_residual.unwrap() >= -1e-8, "{tag}");
            for (g1, g0) in state.gamma.values.iter().zip(&prev.gamma.values) {
                assert!(g1 >= g0);
            }
            for p in &state.p.values {
                assert!(p.trace().abs() < 1e-14);
                if tag.is_irrotational() {
                    assert!(p.skew().norm() < 1e-14);
                }
            }
            prev = state.clone();
        }
        assert!(out.last().unwrap().1.active_node_fraction > 0.0, "{tag} never yielded");
    }
}

#[test]
fn plastic_multiplier_is_rate_scaled_increment() {
    let cfg = SolverConfig::default();
    let variant = ModelVariant::new(VariantTag::KinSpin, params()).unwrap();
    let pb = Problem::new(variant, Grid::unit_cube(2), layer_shear(), &cfg).unwrap();
    let s0 = SimState::zero(pb.grid());
    let load = LoadStep {
        dt: 0.25,
        ..LoadStep::displacement(0.05)
    };
    let (s1, _) = time_step(&pb, &s0, &load, &cfg).unwrap();
    let lam = plastic_multiplier(&s0, &s1, load.dt);
    for (l, p) in lam.values.iter().zip(&s1.p.values) {
        assert!((l - p.norm() / 0.25).abs() < 1e-15);
    }
    assert_eq!(s1.t, 0.25);
}

#[test]
fn non_finite_load_is_rejected() {
    let cfg = SolverConfig::default();
    let variant = ModelVariant::new(VariantTag::KinSpin, params()).unwrap();
    let pb = Problem::new(variant, Grid::unit_cube(1), layer_shear(), &cfg).unwrap();
    let r = time_step(&pb, &SimState::zero(pb.grid()), &LoadStep::displacement(f64::NAN), &cfg);
    assert!(matches!(r, Err(Error::InfeasibleBc(_))));
}

#[test]
fn hardening_modulus_is_required() {
    let mut p = params();
    p.k1 = 0.0;
    assert!(matches!(ModelVariant::new(VariantTag::KinSpin, p), Err(Error::InvalidParams(_))));
    let mut p = params();
    p.k2 = 0.0;
    assert!(matches!(ModelVariant::new(VariantTag::IsoIrrot, p), Err(Error::InvalidParams(_))));
}

#[test]
fn body_force_does_work() {
    let cfg = SolverConfig::default();
    let variant = ModelVariant::new(VariantTag::KinSpin, params()).unwrap();
    let pb = Problem::new(variant, Grid::unit_cube(3), layer_shear(), &cfg).unwrap();
    let load = LoadStep {
        body_force: [0.01, 0.0, 0.0],
        ..LoadStep::displacement(0.0)
    };
    let (s, rep) = time_step(&pb, &SimState::zero(pb.grid()), &load, &cfg).unwrap();
    // interior nodes move along the force
    let mid = pb.grid().node_index(1, 1, 1);
    assert!(s.u.values[mid][0] > 0.0);
    assert!(rep.energy.load < 0.0);
    assert!(rep.energy.total() < 0.0);
}

#[test]
fn korn_minimum_grows_with_the_constrained_set() {
    let grid = Grid::unit_cube(3);
    let mut last = 0.0;
    let mut faces = FaceSet::empty();
    for face in [Face::new(0, false), Face::new(1, false), Face::new(2, true)] {
        faces.insert(face);
        let pb = KornProblem::new(grid.clone(), faces, 1.0).unwrap();
        let l = estimate_min_quotient(&pb, 1e-10).unwrap();
        assert!(l >= last * (1.0 - 1e-8), "{l} < {last}");
        last = l;
    }
}

#[test]
fn korn_minimum_is_translation_invariant() {
    let grid = Grid::unit_cube(3);
    let a = estimate_min_quotient(&KornProblem::new(grid.clone(), FaceSet::all(), 1.0).unwrap(), 1e-10).unwrap();
    let moved = grid.translated([3.5, -2.0, 10.0]);
    let b = estimate_min_quotient(&KornProblem::new(moved, FaceSet::all(), 1.0).unwrap(), 1e-10).unwrap();
    assert!((a - b).abs() <= 1e-8 * a);
}
