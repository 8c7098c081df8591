mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use specgap::discretization::{coefficient_range_on_quadrature, laplacian_stiffness};
use specgap::eigensolve::smallest_eigenvalues_with_fallback;
use specgap::{
    assemble_mass, CoefficientModel, ParameterPoint, QuadratureRule, SplitMix64,
    StiffnessAssembler, ToleranceSpec, TridiagonalSymmetric, UniformMesh,
};

fn assembler(n: usize, c0: f64, s: usize) -> StiffnessAssembler {
    StiffnessAssembler::new(
        UniformMesh::new(n).unwrap(),
        CoefficientModel::affine(1.0, c0, s).unwrap(),
        QuadratureRule::Gauss2,
    )
    .unwrap()
}

fn random_point(rng: &mut SplitMix64, s: usize) -> ParameterPoint {
    ParameterPoint::new((0..s).map(|_| rng.next_f64() - 0.5).collect()).unwrap()
}

#[test]
fn mass_matrix_entries() {
    let m = assemble_mass(&UniformMesh::new(4).unwrap());
    assert_eq!(m.diag(), &[1.0 / 6.0; 3]);
    assert_eq!(m.off(), &[1.0 / 24.0; 2]);
    let m = assemble_mass(&UniformMesh::new(2).unwrap());
    assert_eq!((m.diag(), m.off()), (&[1.0 / 3.0][..], &[][..]));
}

#[test]
fn mass_matrix_is_positive_definite() {
    for n in [2, 3, 8, 64, 128] {
        let mesh = UniformMesh::new(n).unwrap();
        let m = assemble_mass(&mesh);
        let (lo, hi) = m.gershgorin();
        let (r, _) = smallest_eigenvalues_with_fallback(
            &m,
            &TridiagonalSymmetric::identity(m.len()),
            1,
            (lo, hi),
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert!(r.values[0] > 0.0, "n = {n}: {}", r.values[0]);
    }
}

/// Exact average of `sin(j pi x)` over `[x0, x1]`.
fn exact_sine_average(j: usize, x0: f64, x1: f64) -> f64 {
    let w = j as f64 * PI;
    ((w * x0).cos() - (w * x1).cos()) / (w * (x1 - x0))
}

#[test]
fn gauss2_matches_exact_sine_integrals() {
    let mesh = UniformMesh::new(64).unwrap();
    let h = mesh.h();
    for j in 1..=8 {
        // Single active term: a = 1 + y_j a_j with y_j = 1/2.
        let model = CoefficientModel::affine(1.0, 1.0, j).unwrap();
        let asm = StiffnessAssembler::new(mesh, model, QuadratureRule::Gauss2).unwrap();
        let mut y = vec![0.0; j];
        y[j - 1] = 0.5;
        let y = ParameterPoint::new(y).unwrap();
        let averages = asm.element_averages(&asm.nodal_coefficient(&y).unwrap());
        let sup = model.term_sup_norm(j);
        let bound = (j as f64 * PI * h).powi(4) / 180.0;
        for (e, avg) in averages.iter().enumerate() {
            let x0 = e as f64 * h;
            let exact = 1.0 + 0.5 * sup * exact_sine_average(j, x0, x0 + h);
            let rel = (avg - exact).abs() / (0.5 * sup);
            assert!(rel <= bound, "j = {j}, element {e}: {rel:e} > {bound:e}");
        }
    }
}

#[test]
fn laplacian_stiffness_for_constant_coefficient() {
    let a = assembler(64, 0.0, 100)
        .assemble(&ParameterPoint::zeros(100))
        .unwrap()
        .0;
    assert!(a.diag().iter().all(|&d| (d - 128.0).abs() < 1e-12));
    assert!(a.off().iter().all(|&o| (o + 64.0).abs() < 1e-12));
}

#[test]
fn quadrature_range_examples() {
    let mesh = UniformMesh::new(64).unwrap();
    let affine = CoefficientModel::affine(1.0, 1.0, 100).unwrap();
    let corner = ParameterPoint::filled(100, -0.5).unwrap();
    let (lo, hi) =
        coefficient_range_on_quadrature(&mesh, &affine, &corner, QuadratureRule::Gauss2).unwrap();
    assert!(lo >= affine.bounds().min && lo <= hi);

    let flat = CoefficientModel::affine(1.0, 0.0, 100).unwrap();
    assert_eq!(
        coefficient_range_on_quadrature(&mesh, &flat, &corner, QuadratureRule::Gauss2).unwrap(),
        (1.0, 1.0)
    );
    let ln = CoefficientModel::log_normal(0.0, 1.0, 100).unwrap();
    let (lo, hi) = coefficient_range_on_quadrature(
        &mesh,
        &ln,
        &ParameterPoint::zeros(100),
        QuadratureRule::Gauss2,
    )
    .unwrap();
    assert!((lo - 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
}

#[test]
fn constant_vector_quadratic_form_is_bracketed() {
    let mut rng = SplitMix64::new(11);
    let mesh = UniformMesh::new(8).unwrap();
    let k = laplacian_stiffness(&mesh);
    let v = vec![1.0; mesh.dof()];
    let asm = assembler(8, 1.0, 100);
    let b = asm.model().bounds();
    for _ in 0..200 {
        let a = asm.assemble(&random_point(&mut rng, 100)).unwrap().0;
        let q = a.quadratic_form(&v);
        let base = k.quadratic_form(&v);
        assert!(b.min * base <= q && q <= b.max.finite().unwrap() * base);
    }
}

#[test]
fn spectral_sandwich_against_laplacian() {
    let mut rng = SplitMix64::new(5);
    for n in [3, 8, 16] {
        let asm = assembler(n, 1.0, 100);
        let k = laplacian_stiffness(asm.mesh());
        for _ in 0..50 {
            let (a, nodal) = asm.assemble(&random_point(&mut rng, 100)).unwrap();
            // Eigenvalues of (A, K) lie in [lo, hi].
            let eig = common::dense_pencil_eigenvalues(&a, &k);
            assert!(
                eig[0] >= nodal.lo * (1.0 - 1e-12),
                "{} < {}",
                eig[0],
                nodal.lo
            );
            assert!(*eig.last().unwrap() <= nodal.hi * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stiffness_sign_pattern(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let a = assembler(n, 1.2, 100).assemble(&random_point(&mut rng, 100)).unwrap().0;
        prop_assert!(a.diag().iter().all(|d| *d > 0.0));
        prop_assert!(a.off().iter().all(|o| *o < 0.0));
    }

    #[test]
    fn quadratic_form_is_monotone_in_coefficient(
        n in 2usize..16,
        delta in 0.0f64..0.5,
        v in prop::collection::vec(-1.0f64..1.0, 15),
        seed in any::<u64>(),
    ) {
        // Raising a0 raises a(x, y) pointwise.
        let mesh = UniformMesh::new(n).unwrap();
        let mut rng = SplitMix64::new(seed);
        let y = random_point(&mut rng, 20);
        let low = StiffnessAssembler::new(mesh, CoefficientModel::affine(1.0, 1.0, 20).unwrap(), QuadratureRule::Gauss2).unwrap();
        let high = StiffnessAssembler::new(mesh, CoefficientModel::affine(1.0 + delta, 1.0, 20).unwrap(), QuadratureRule::Gauss2).unwrap();
        let v = &v[..mesh.dof()];
        let ql = low.assemble(&y).unwrap().0.quadratic_form(v);
        let qh = high.assemble(&y).unwrap().0.quadratic_form(v);
        prop_assert!(ql <= qh + 1e-12 * qh.abs());
    }
}
