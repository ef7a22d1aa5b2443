use approx::assert_relative_eq;
use fraclap::linalg::norm_inf;
use fraclap::operator::{direct_entry, exact_entry, exact_matrix, xi};
use fraclap::{
    assemble_direct_matrix, audit_solvability, normalization_constant, DenseMatrix, Error,
    FastOperator, GradedMesh, LinearOperator, Regime, Scheme, SoeApproximation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_term(beta: f64, lambda: f64, delta_x: f64, x_max: f64) -> SoeApproximation {
    SoeApproximation::from_terms(beta, delta_x, x_max, vec![lambda], vec![1.0]).unwrap()
}

fn five_terms(beta: f64, delta_x: f64, x_max: f64) -> SoeApproximation {
    SoeApproximation::from_terms(
        beta,
        delta_x,
        x_max,
        vec![0.3, 1.1, 4.0, 17.0, 60.0],
        vec![0.2, 0.7, 1.5, 3.0, 9.0],
    )
    .unwrap()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn normalization_constant_reference_values() {
    let cases = [
        (0.8, 0.28195845299999037907),
        (0.2, 0.090313982871455613452),
        (0.5, 0.19947114020071633897),
        (1.5, 0.29920671030107450845),
        (0.9, 0.30237048634305345633),
    ];
    for (alpha, want) in cases {
        assert_relative_eq!(
            normalization_constant(alpha).unwrap(),
            want,
            max_relative = 1e-14
        );
    }
    assert_relative_eq!(
        normalization_constant(1.0).unwrap(),
        1.0 / std::f64::consts::PI,
        max_relative = 1e-15
    );
    assert_eq!(
        normalization_constant(2.0),
        Err(Error::AlphaOutOfRange(2.0))
    );
}

#[test]
fn regimes() {
    assert_eq!(Regime::of(0.3).unwrap(), Regime::Sub);
    assert_eq!(Regime::of(1.0).unwrap(), Regime::One);
    assert_eq!(Regime::of(1.0 + 1e-13).unwrap(), Regime::One);
    assert_eq!(Regime::of(1.2).unwrap(), Regime::Super);
    assert!(Regime::of(0.0).is_err());
    assert_eq!(Regime::Sub.soe_beta(0.4), 1.4);
    assert_eq!(Regime::One.soe_beta(1.0), 1.0);
    assert_eq!(Regime::Super.soe_beta(1.6), 1.6);
}

#[test]
fn coefficient_examples_single_exponential() {
    let mesh = GradedMesh::uniform(0.0, 8.0, 8).unwrap();
    let op = FastOperator::with_soe(
        &mesh,
        0.5,
        Scheme::Original,
        single_term(1.5, 1.0, 1.0, 8.0),
    )
    .unwrap();
    let c = op.coefficients();
    let e = (-1.0f64).exp();
    assert_eq!(c.classes(), 1);
    assert_relative_eq!(c.omega(3, 0), e, max_relative = 1e-15);
    assert_relative_eq!(c.mu_left(3, 0), e * e, max_relative = 1e-14);
    assert_relative_eq!(
        c.nu_left(3, 0).unwrap(),
        e * (1.0 - 2.0 * e),
        max_relative = 1e-14
    );
    assert_relative_eq!(c.mu_right(3, 0), e * e, max_relative = 1e-14);
    assert_relative_eq!(
        c.nu_right(3, 0).unwrap(),
        e * (1.0 - 2.0 * e),
        max_relative = 1e-14
    );
    assert_eq!(c.omega_matrix().len(), 8);

    let sup = FastOperator::with_soe(
        &mesh,
        1.5,
        Scheme::Modified,
        single_term(1.5, 1.0, 1.0, 8.0),
    )
    .unwrap();
    let c = sup.coefficients();
    assert_eq!(c.nu_left(3, 0), None);
    assert_relative_eq!(c.mu_left(3, 0), e * (1.0 - e), max_relative = 1e-14);
}

#[test]
fn coefficients_for_tiny_lambda_h() {
    let mesh = GradedMesh::uniform(0.0, 8.0, 8).unwrap();
    let op = FastOperator::with_soe(
        &mesh,
        0.5,
        Scheme::Original,
        single_term(1.5, 1e-10, 1.0, 8.0),
    )
    .unwrap();
    let c = op.coefficients();
    let half = c.omega(2, 0) * 0.5;
    assert_relative_eq!(c.mu_left(2, 0), half, max_relative = 1e-9);
    assert_relative_eq!(c.nu_left(2, 0).unwrap(), half, max_relative = 1e-9);
    assert!(c.mu_left(2, 0).is_finite());
}

#[test]
fn graded_mesh_tables_share_mirrored_steps() {
    let mesh = GradedMesh::new(0.0, 2.0, 32, 2.0).unwrap();
    let op = FastOperator::new(&mesh, 0.5, Scheme::Original, 1e-8).unwrap();
    assert_eq!(op.coefficients().classes(), 16);
    let uniform = GradedMesh::new(0.0, 2.0, 32, 1.0).unwrap();
    let op = FastOperator::new(&uniform, 0.5, Scheme::Original, 1e-8).unwrap();
    assert!(op.coefficients().classes() <= 2);
}

/// `int_0^1 e^(-x u) (1 - u) du`, `int_0^1 e^(-x u) u du` and `int_0^1 e^(-x u) du`,
/// by power series for small `x` and in closed form otherwise.
fn hat_moments(x: f64) -> (f64, f64, f64) {
    if x < 2.0 {
        let (mut near, mut far, mut flat) = (0.0, 0.0, 0.0);
        let mut term = 1.0;
        for k in 0..60 {
            let k = k as f64;
            near += term / ((k + 1.0) * (k + 2.0));
            far += term / (k + 2.0);
            flat += term / (k + 1.0);
            term *= -x / (k + 1.0);
        }
        (near, far, flat)
    } else {
        let e = (-x).exp();
        (
            (x - 1.0 + e) / (x * x),
            (1.0 - e * (1.0 + x)) / (x * x),
            (1.0 - e) / x,
        )
    }
}

/// Direct evaluation of the left/right tails: each cell contributes the closed-form
/// integral of the interpolant against the exponential.
fn tails_by_cells(
    op: &FastOperator,
    v: &[f64],
    s: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mesh = op.mesh();
    let m = mesh.n() - 1;
    let lambda = op.soe().exponents()[s];
    let val = |j: usize| if j == 0 || j > m { 0.0 } else { v[j - 1] };
    let sub = op.regime() == Regime::Sub;
    let cell = |j: usize, v_near: f64, v_far: f64| -> (f64, f64) {
        // Cell of width h_j adjacent to the near node.
        let h = mesh.h(j);
        let x = lambda * h;
        let (near, far, flat) = hat_moments(x);
        if sub {
            let (near, far) = (h * near, h * far);
            let t = near * v_near + far * v_far;
            (t, near.abs() * v_near.abs() + far.abs() * v_far.abs())
        } else {
            (flat * (v_near - v_far), flat * (v_near.abs() + v_far.abs()))
        }
    };
    let mut left = vec![0.0; m];
    let mut left_mag = vec![0.0; m];
    let mut right = vec![0.0; m];
    let mut right_mag = vec![0.0; m];
    for i in 1..=m {
        for j in 1..i {
            let decay = (-lambda * mesh.distance(i, j)).exp();
            let (t, mag) = cell(j, val(j), val(j - 1));
            left[i - 1] += decay * t;
            left_mag[i - 1] += decay * mag;
        }
        for j in i + 1..=m {
            let decay = (-lambda * mesh.distance(i, j)).exp();
            let (t, mag) = cell(j + 1, val(j), val(j + 1));
            right[i - 1] += decay * t;
            right_mag[i - 1] += decay * mag;
        }
    }
    (left, left_mag, right, right_mag)
}

#[test]
fn sweeps_match_cellwise_integrals() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (alpha, scheme, kappa) in [
        (0.6, Scheme::Original, 1.0),
        (0.6, Scheme::Original, 2.5),
        (1.0, Scheme::Modified, 1.5),
        (1.5, Scheme::Modified, 2.0),
    ] {
        let mesh = GradedMesh::new(0.0, 2.0, 64, kappa).unwrap();
        let beta = Regime::of(alpha).unwrap().soe_beta(alpha);
        let soe = five_terms(beta, mesh.stats().h_min, 2.0);
        let op = FastOperator::with_soe(&mesh, alpha, scheme, soe).unwrap();
        let v = random_vector(&mut rng, 63);
        let sl = op.sweep_left(&v);
        let sr = op.sweep_right(&v);
        assert!(sl[0].iter().all(|&x| x == 0.0));
        assert!(sr[62].iter().all(|&x| x == 0.0));
        for s in 0..5 {
            let (l, lm, r, rm) = tails_by_cells(&op, &v, s);
            for k in 0..63 {
                assert!(
                    (sl[k][s] - l[k]).abs() <= 1e-12 * lm[k],
                    "alpha={alpha} s={s} row={k}"
                );
                assert!(
                    (sr[k][s] - r[k]).abs() <= 1e-12 * rm[k],
                    "alpha={alpha} s={s} row={k}"
                );
            }
        }
    }
}

#[test]
fn apply_matches_materialized_columns_and_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (alpha, scheme) in [
        (0.3, Scheme::Original),
        (1.0, Scheme::Modified),
        (1.7, Scheme::Modified),
    ] {
        let mesh = GradedMesh::new(0.0, 2.0, 48, 2.0).unwrap();
        let op = FastOperator::new(&mesh, alpha, scheme, 1e-8).unwrap();
        let m = op.materialize_unscaled().unwrap();
        let v = random_vector(&mut rng, 47);
        let direct = m.matvec(&v);
        let fast = op.apply_unscaled(&v);
        let scale = norm_inf(&direct);
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let scaled = op.apply_fast(&v);
        for (a, b) in scaled.iter().zip(&fast) {
            assert_relative_eq!(*a, op.c_alpha() * b, max_relative = 1e-15);
        }
        assert_eq!(op.apply(&v), scaled);
        assert_eq!(op.dim(), 47);
        let full = op.materialize_fast_matrix().unwrap();
        assert!(full.max_abs_diff(&m.scaled(op.c_alpha())) == 0.0);
    }
}

#[test]
fn mirror_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (alpha, scheme) in [
        (0.5, Scheme::Original),
        (0.5, Scheme::Modified),
        (1.5, Scheme::Modified),
    ] {
        let mesh = GradedMesh::new(0.0, 2.0, 16, 3.0).unwrap();
        let op = FastOperator::new(&mesh, alpha, scheme, 1e-10).unwrap();
        let v = random_vector(&mut rng, 15);
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let a = op.apply_unscaled(&v);
        let b = op.apply_unscaled(&rev);
        let scale = norm_inf(&a);
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
        let m = op.materialize_unscaled().unwrap();
        let n = m.rows();
        let scale = m.norm_inf();
        for i in 0..n {
            for j in 0..n {
                assert!((m[(i, j)] - m[(n - 1 - i, n - 1 - j)]).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn modified_differs_from_original_only_in_band_on_uniform_mesh() {
    let mesh = GradedMesh::new(0.0, 2.0, 32, 1.0).unwrap();
    let orig = FastOperator::new(&mesh, 0.6, Scheme::Original, 1e-10).unwrap();
    let modi = FastOperator::new(&mesh, 0.6, Scheme::Modified, 1e-10).unwrap();
    assert!(modi.eta().iter().all(|&e| e == 0.0));
    let a = orig.materialize_unscaled().unwrap();
    let b = modi.materialize_unscaled().unwrap();
    let mut band_differs = false;
    for i in 0..31usize {
        for j in 0..31usize {
            if i.abs_diff(j) > 1 {
                assert_eq!(a[(i, j)], b[(i, j)]);
            } else {
                band_differs |= a[(i, j)] != b[(i, j)];
            }
        }
    }
    assert!(band_differs);
}

#[test]
fn local_part_examples() {
    let mesh = GradedMesh::uniform(0.0, 4.0, 4).unwrap();
    let op = FastOperator::new(&mesh, 0.5, Scheme::Original, 1e-8).unwrap();
    // h = 1: the bracket is [-2, 8, -2] per row.
    assert_eq!(op.near_field(2), [-2.0, 8.0, -2.0]);
    let y = op.local_part_original(&[1.0, 1.0, 1.0]);
    assert_eq!(y, vec![6.0, 4.0, 6.0]);
    // On a uniform mesh the modified local part vanishes.
    assert_eq!(op.local_part_modified(&[1.0, 2.0, 3.0]), vec![0.0; 3]);

    let graded = GradedMesh::new(0.0, 2.0, 8, 2.0).unwrap();
    let op = FastOperator::new(&graded, 0.5, Scheme::Modified, 1e-8).unwrap();
    // The three-point stencil differentiates linear data exactly.
    let lin: Vec<f64> = graded.nodes()[1..8].to_vec();
    let y = op.local_part_modified(&lin);
    for (k, yk) in y.iter().enumerate().skip(1).take(5) {
        assert_relative_eq!(*yk, op.eta()[k], max_relative = 1e-12);
    }

    let one = FastOperator::new(&mesh, 1.0, Scheme::Original, 1e-8).unwrap();
    assert_eq!(one.near_field(2), [-1.0, 2.0, -1.0]);
}

#[test]
fn direct_matrix_examples() {
    let mesh = GradedMesh::uniform(0.0, 8.0, 8).unwrap();
    let a = assemble_direct_matrix(&mesh, 0.5).unwrap();
    assert_relative_eq!(a[(3, 3)], 8.0, max_relative = 1e-15);
    assert_relative_eq!(a[(3, 2)], 4.0 * (2f64.sqrt() - 2.0), max_relative = 1e-14);
    assert_relative_eq!(a[(3, 4)], 4.0 * (2f64.sqrt() - 2.0), max_relative = 1e-14);
    // Second neighbour: (3^p - 2*2^p + 1) / (alpha p) with p = 1/2.
    let want = (3f64.sqrt() - 2.0 * 2f64.sqrt() + 1.0) * 4.0;
    assert_relative_eq!(a[(3, 1)], want, max_relative = 1e-13);
    assert!(matches!(
        assemble_direct_matrix(&mesh, 1.2),
        Err(Error::DirectRegime(_))
    ));
    let big = GradedMesh::new(0.0, 2.0, 8192, 1.0).unwrap();
    assert!(matches!(
        assemble_direct_matrix(&big, 0.5),
        Err(Error::AuditCapExceeded { .. })
    ));
}

#[test]
fn direct_row_sums_equal_closed_form() {
    for (alpha, kappa) in [(0.2, 1.0), (0.5, 3.0), (0.8, 2.0)] {
        let mesh = GradedMesh::new(0.0, 2.0, 64, kappa).unwrap();
        let a = assemble_direct_matrix(&mesh, alpha).unwrap();
        for i in 1..64 {
            let sum: f64 = a.row(i - 1).iter().sum();
            let want = xi(&mesh, alpha, i);
            let mag: f64 = a.row(i - 1).iter().map(|v| v.abs()).sum();
            assert!((sum - want).abs() <= 1e-12 * mag, "alpha={alpha} i={i}");
            assert!(want > 0.0);
        }
    }
}

#[test]
fn exact_entries_reproduce_direct_entries() {
    for (alpha, kappa) in [(0.2, 1.0), (0.5, 3.0), (0.9, 1.7)] {
        let mesh = GradedMesh::new(0.0, 2.0, 32, kappa).unwrap();
        for i in 1..32 {
            for j in 1..32 {
                let d = direct_entry(&mesh, alpha, i, j);
                let e = exact_entry(&mesh, alpha, Scheme::Original, i, j);
                assert!(
                    (d - e).abs() <= 1e-11 * d.abs().max(1.0),
                    "{alpha} {i} {j}: {d} {e}"
                );
            }
        }
    }
}

fn row_norm_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(b.row(i))
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn fast_matrix_is_close_to_exact_matrix() {
    for (alpha, scheme, kappa) in [
        (0.4, Scheme::Original, 1.0),
        (0.4, Scheme::Modified, 2.0),
        (1.0, Scheme::Modified, 2.0),
        (1.5, Scheme::Modified, 1.0),
    ] {
        let mesh = GradedMesh::new(0.0, 2.0, 64, kappa).unwrap();
        let op = FastOperator::new(&mesh, alpha, scheme, 1e-8).unwrap();
        let fast = op.materialize_unscaled().unwrap();
        let exact = exact_matrix(&mesh, alpha, scheme).unwrap();
        let d = row_norm_diff(&fast, &exact);
        // Each row sees the kernel error over at most the whole interval, twice for
        // the derivative regimes (the derivative of a hat function has total variation 2/h).
        let bound = match Regime::of(alpha).unwrap() {
            Regime::Sub => 2.0 * 1e-8 * 2.0,
            _ => 4.0 * 1e-8 * 64.0 / alpha,
        };
        assert!(d <= bound, "alpha={alpha} {scheme}: {d:e} > {bound:e}");
    }
}

#[test]
fn soe_mismatch_and_window_errors() {
    let mesh = GradedMesh::new(0.0, 2.0, 16, 1.0).unwrap();
    let soe = five_terms(1.2, 0.125, 2.0);
    assert!(matches!(
        FastOperator::with_soe(&mesh, 0.5, Scheme::Original, soe),
        Err(Error::SoeExponentMismatch { .. })
    ));
    let narrow = five_terms(1.5, 0.2, 2.0);
    assert!(matches!(
        FastOperator::with_soe(&mesh, 0.5, Scheme::Original, narrow),
        Err(Error::WindowDoesNotCover { .. })
    ));
    let short = five_terms(1.5, 0.1, 1.5);
    assert!(matches!(
        FastOperator::with_soe(&mesh, 0.5, Scheme::Original, short),
        Err(Error::WindowDoesNotCover { .. })
    ));
}

#[test]
fn audit_small_examples() {
    let mesh = GradedMesh::uniform(0.0, 2.0, 4).unwrap();
    let m = DenseMatrix::from_rows(&[vec![3.0, -1.0], vec![-1.0, 3.0]]).unwrap();
    let r = audit_solvability(&m, &mesh, 0.5, 1e-8).unwrap();
    assert!(r.pass && r.diag_all_positive && r.offdiag_all_nonpositive);
    assert_eq!(r.min_row_gap, 2.0);
    assert_eq!(r.eps_threshold, None);

    let bad = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 3.0]]).unwrap();
    let r = audit_solvability(&bad, &mesh, 0.5, 1e-8).unwrap();
    assert!(!r.pass && !r.offdiag_all_nonpositive && !r.strictly_dominant());
    assert!(r.to_string().contains("pass: false"));

    let rect = DenseMatrix::zeros(2, 3);
    assert!(audit_solvability(&rect, &mesh, 0.5, 1e-8).is_err());
}

#[test]
fn audits_of_assembled_operators() {
    for (alpha, kappa) in [(0.2, 1.0), (0.5, 3.0), (0.8, 1.0)] {
        let mesh = GradedMesh::new(0.0, 2.0, 64, kappa).unwrap();
        let op = FastOperator::new(&mesh, alpha, Scheme::Original, 1e-8).unwrap();
        let r = op.audit().unwrap();
        assert!(r.pass, "alpha={alpha} kappa={kappa}: {r}");
        let t = r.eps_threshold.unwrap();
        assert!(t >= 1e-8);
        assert_eq!(r.xi.as_ref().unwrap().len(), 63);
    }
    for alpha in [0.5, 1.0, 1.5] {
        let mesh = GradedMesh::new(0.0, 2.0, 64, 1.0).unwrap();
        let op = FastOperator::new(&mesh, alpha, Scheme::Modified, 1e-8).unwrap();
        let r = op.audit().unwrap();
        assert!(r.pass, "alpha={alpha}: {r}");
    }
}

#[test]
fn uniform_threshold_lower_bound() {
    let (alpha, n) = (0.5, 64);
    let mesh = GradedMesh::new(0.0, 2.0, n, 1.0).unwrap();
    let g = fraclap::operator::g_alpha(alpha, n, 2.0);
    let mut smallest = f64::INFINITY;
    for i in 1..n {
        for j in 1..n {
            if i != j {
                let a = direct_entry(&mesh, alpha, i, j);
                smallest = smallest.min(-2.0 * a / (mesh.h(j) + mesh.h(j + 1)));
            }
        }
    }
    assert_relative_eq!(g, smallest, max_relative = 1e-10);
}

#[test]
fn nonlocal_sums_do_not_depend_on_thread_count() {
    let mesh = GradedMesh::new(0.0, 2.0, 4096, 2.0).unwrap();
    let op = FastOperator::new(&mesh, 0.7, Scheme::Original, 1e-8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_vector(&mut rng, 4095);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| op.apply_unscaled(&v))
    };
    let one = run(1);
    let many = run(4);
    assert!(one
        .iter()
        .zip(&many)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}
