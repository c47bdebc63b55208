use super::*;

type Set = ConstraintSet<f64>;

fn boxed(lo: &[f64], hi: &[f64]) -> Set {
    ConstraintSet::box_set(lo.to_vec(), hi.to_vec()).unwrap()
}

fn ball(center: &[f64], radius: f64) -> Set {
    ConstraintSet::l2_ball(center.to_vec(), radius).unwrap()
}

/// Allocation polytope: x ∈ [0, 35]³ with Σx = 90.
fn allocation_triangle() -> Set {
    let hyper =
        ConstraintSet::hyperplanes(Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]), vec![90.0]).unwrap();
    ConstraintSet::intersection(
        vec![boxed(&[0.0; 3], &[35.0; 3]), hyper],
        vec![30.0, 30.0, 30.0],
    )
    .unwrap()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} != {b:?}");
    }
}

#[test]
fn contains_box_boundary() {
    let set = boxed(&[0.0, 0.0], &[35.0, 35.0]);
    assert!(set.contains(&[10.0, 35.0], 0.0).unwrap());
    assert!(!set.contains(&[10.0, 35.1], 0.0).unwrap());
}

#[test]
fn contains_ball_on_boundary() {
    let set = ball(&[0.0, 0.0], 0.02f64.sqrt());
    assert!(set.contains(&[0.1, 0.1], 1e-9).unwrap());
}

#[test]
fn contains_hyperplane_sum() {
    let set =
        ConstraintSet::hyperplanes(Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]), vec![90.0]).unwrap();
    assert!(!set.contains(&[30.0, 30.0, 31.0], 1e-6).unwrap());
    assert!(set.contains(&[30.0, 30.0, 30.0], 1e-6).unwrap());
}

#[test]
fn contains_dimension_mismatch() {
    let set = boxed(&[0.0, 0.0], &[1.0, 1.0]);
    assert!(matches!(
        set.contains(&[0.0], 0.0),
        Err(GeometryError::DimensionMismatch { .. })
    ));
}

#[test]
fn lmo_box_picks_signs() {
    let set = boxed(&[-1.0, -1.0], &[1.0, 1.0]);
    assert_eq!(set.lmo(&[3.0, -2.0]).unwrap(), vec![1.0, -1.0]);
}

#[test]
fn lmo_ball_is_scaled_gradient() {
    let set = ball(&[0.0, 0.0], 0.02f64.sqrt());
    let c = set.lmo(&[1.0, 1.0]).unwrap();
    assert_close(&c, &[0.1, 0.1], 1e-12);
}

#[test]
fn lmo_allocation_triangle() {
    // Unique maximizer among the triangle's vertices for g = (3, 2, 1).
    let set = allocation_triangle();
    let c = set.lmo(&[3.0, 2.0, 1.0]).unwrap();
    assert_close(&c, &[35.0, 35.0, 20.0], 1e-7);
}

#[test]
fn lmo_zero_gradient_is_deterministic() {
    let set = boxed(&[-1.0, 0.5], &[1.0, 2.0]);
    assert_eq!(set.lmo(&[0.0, 0.0]).unwrap(), vec![-1.0, 0.5]);
    let tri = allocation_triangle();
    assert_eq!(tri.lmo(&[0.0; 3]).unwrap(), vec![30.0, 30.0, 30.0]);
}

#[test]
fn lmo_rejects_unbounded() {
    let set = ConstraintSet::halfspaces(Matrix::from_rows(&[vec![1.0, 0.0]]), vec![1.0]).unwrap();
    assert!(matches!(
        set.lmo(&[1.0, 0.0]),
        Err(GeometryError::Unbounded)
    ));
}

#[test]
fn project_box_clips() {
    let set = boxed(&[0.0; 3], &[35.0; 3]);
    let y = set.project(&[-5.0, 10.0, 40.0]).unwrap();
    assert_close(&y, &[0.0, 10.0, 35.0], 1e-12);
}

#[test]
fn project_ball_shrinks_radially() {
    let set = ball(&[0.0, 0.0], 0.02f64.sqrt());
    let y = set.project(&[0.3, 0.4]).unwrap();
    let r = 0.02f64.sqrt();
    assert_close(&y, &[r * 0.6, r * 0.8], 1e-12);
}

#[test]
fn project_allocation_triangle_center() {
    // Hyperplane projection of the origin lands inside the box, so it is the
    // exact minimizer.
    let set = allocation_triangle();
    let y = set.project(&[0.0; 3]).unwrap();
    assert_close(&y, &[30.0; 3], 1e-7);
}

#[test]
fn project_is_idempotent() {
    let set = allocation_triangle();
    let y = set.project(&[100.0, -3.0, 17.0]).unwrap();
    let yy = set.project(&y).unwrap();
    assert!(linalg::dist2(&y, &yy) <= 1e-8);
    assert!(set.contains(&y, 1e-6).unwrap());
}

#[test]
fn project_weighted_l1() {
    let set = ConstraintSet::weighted_l1(vec![1.0, 2.0], 1.0).unwrap();
    // Feasible input unchanged.
    let y = set.project(&[0.2, 0.2]).unwrap();
    assert_close(&y, &[0.2, 0.2], 1e-12);
    // Infeasible input lands on the budget boundary.
    let y = set.project(&[2.0, 2.0]).unwrap();
    assert!(set.contains(&y, 1e-9).unwrap());
    let spent: f64 = y[0].abs() + 2.0 * y[1].abs();
    assert!((spent - 1.0).abs() <= 1e-9, "budget not tight: {spent}");
}

#[test]
fn fw_gap_zero_at_maximizer() {
    let set = boxed(&[-1.0, -1.0], &[1.0, 1.0]);
    let gap = set.fw_gap_point(&[1.0, -1.0], &[3.0, -2.0]).unwrap();
    assert!(gap.abs() <= 1e-12);
}

#[test]
fn fw_gap_at_center() {
    let set = boxed(&[-1.0, -1.0], &[1.0, 1.0]);
    let gap = set.fw_gap_point(&[0.0, 0.0], &[3.0, -2.0]).unwrap();
    assert!((gap - 5.0).abs() <= 1e-12);
}

#[test]
fn fw_gap_allocation_triangle() {
    let set = allocation_triangle();
    let gap = set.fw_gap_point(&[30.0; 3], &[3.0, 2.0, 1.0]).unwrap();
    assert!((gap - 15.0).abs() <= 1e-6, "gap {gap}");
}

#[test]
fn fw_gap_rejects_infeasible_point() {
    let set = boxed(&[0.0, 0.0], &[1.0, 1.0]);
    assert!(matches!(
        set.fw_gap_point(&[2.0, 0.0], &[1.0, 0.0]),
        Err(GeometryError::InfeasiblePoint { .. })
    ));
}

#[test]
fn diameter_ball_and_box() {
    let set = ball(&[0.0, 0.0], 0.02f64.sqrt());
    assert!((set.diameter().unwrap() - 2.0 * 0.02f64.sqrt()).abs() <= 1e-12);
    let set = boxed(&[0.0; 3], &[35.0; 3]);
    assert!((set.diameter().unwrap() - 35.0 * 3.0f64.sqrt()).abs() <= 1e-9);
}

#[test]
fn diameter_allocation_triangle_by_vertex_enumeration() {
    // The feasible region is the triangle with vertices (35,35,20), (35,20,35),
    // (20,35,35); its diameter is the side length 15√2.
    let set = allocation_triangle();
    let d = set.diameter().unwrap();
    assert!((d - 15.0 * 2.0f64.sqrt()).abs() <= 1e-7, "diameter {d}");
}

#[test]
fn simplex_box_tiebreak_lowest_index() {
    // maximize x₁ over the unit box in five dimensions; free coordinates sit
    // at their lower bound.
    let n = 5;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        rows.push(r.clone());
        rhs.push(1.0);
        r[i] = -1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    let a = Matrix::from_rows(&rows);
    let e = Matrix::zeros(0, n);
    let mut g = vec![0.0; n];
    g[0] = 1.0;
    let x = simplex_solve(&a, &rhs, &e, &[], &g).unwrap();
    assert_close(&x, &[1.0, 0.0, 0.0, 0.0, 0.0], 1e-9);
}

#[test]
fn simplex_allocation_triangle_ties() {
    // Every feasible point attains objective 90 for g = (1,1,1); the result
    // must be a feasible vertex and deterministic across calls.
    let set = allocation_triangle();
    let (a, b, e, d) = set.flatten_polyhedral().unwrap();
    let x1 = simplex_solve(&a, &b, &e, &d, &[1.0; 3]).unwrap();
    let x2 = simplex_solve(&a, &b, &e, &d, &[1.0; 3]).unwrap();
    assert_eq!(x1, x2);
    assert!(set.contains(&x1, 1e-7).unwrap());
    let obj: f64 = x1.iter().sum();
    assert!((obj - 90.0).abs() <= 1e-7);
    // The lowest-index tie-break drives the first two coordinates to their
    // upper bounds.
    assert_close(&x1, &[35.0, 35.0, 20.0], 1e-9);
}

#[test]
fn simplex_single_link_capacity() {
    // maximize 2x₁ + x₂ s.t. x₁ + x₂ ≤ 50, 0 ≤ x ≤ 50.
    let a = Matrix::from_rows(&[
        vec![1.0, 1.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![-1.0, 0.0],
        vec![0.0, -1.0],
    ]);
    let b = vec![50.0, 50.0, 50.0, 0.0, 0.0];
    let e = Matrix::zeros(0, 2);
    let x = simplex_solve(&a, &b, &e, &[], &[2.0, 1.0]).unwrap();
    assert_close(&x, &[50.0, 0.0], 1e-9);
}

#[test]
fn simplex_detects_infeasible() {
    // x ≤ 0 and x ≥ 1 simultaneously.
    let a = Matrix::from_rows(&[vec![1.0], vec![-1.0]]);
    let b = vec![0.0, -1.0];
    let e = Matrix::zeros(0, 1);
    assert!(matches!(
        simplex_solve(&a, &b, &e, &[], &[1.0]),
        Err(GeometryError::Infeasible)
    ));
}

#[test]
fn simplex_detects_unbounded() {
    let a = Matrix::from_rows(&[vec![-1.0]]);
    let b = vec![0.0];
    let e = Matrix::zeros(0, 1);
    assert!(matches!(
        simplex_solve(&a, &b, &e, &[], &[1.0]),
        Err(GeometryError::Unbounded)
    ));
}

#[test]
fn intersection_requires_feasible_anchor() {
    let err = ConstraintSet::intersection(vec![boxed(&[0.0, 0.0], &[1.0, 1.0])], vec![2.0, 0.0]);
    assert!(matches!(err, Err(GeometryError::InvalidSet(_))));
}

#[test]
fn zero_weight_l1_needs_bounding_member() {
    let wl1 = ConstraintSet::weighted_l1(vec![0.0, 1.0], 1.0).unwrap();
    // Standalone lmo is rejected (unbounded coordinate).
    assert!(matches!(
        wl1.lmo(&[1.0, 0.0]),
        Err(GeometryError::Unbounded)
    ));
    // Intersection with a box is accepted.
    let ok = ConstraintSet::intersection(
        vec![boxed(&[-1.0, -1.0], &[1.0, 1.0]), wl1.clone()],
        vec![0.0, 0.0],
    );
    assert!(ok.is_ok());
    // Intersection with only a halfspace is rejected at construction.
    let hs = ConstraintSet::halfspaces(Matrix::from_rows(&[vec![1.0, 0.0]]), vec![1.0]).unwrap();
    let err = ConstraintSet::intersection(vec![hs, wl1], vec![0.0, 0.0]);
    assert!(matches!(err, Err(GeometryError::InvalidSet(_))));
}

#[test]
fn reacher_style_intersection_oracles() {
    // |u₁+u₂| ≤ 0.1 and ‖u‖ ≤ √0.02.
    let halves = ConstraintSet::halfspaces(
        Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]),
        vec![0.1, 0.1],
    )
    .unwrap();
    let set = ConstraintSet::intersection(
        vec![halves, ball(&[0.0, 0.0], 0.02f64.sqrt())],
        vec![0.0, 0.0],
    )
    .unwrap();
    let y = set.project(&[0.5, 0.5]).unwrap();
    assert!(set.contains(&y, 1e-6).unwrap());
    // By symmetry the projection of (t, t) lands at (0.05, 0.05).
    assert_close(&y, &[0.05, 0.05], 1e-6);
    let c = set.lmo(&[1.0, -1.0]).unwrap();
    assert!(set.contains(&c, 1e-6).unwrap());
    // g ⟂ the sum constraint, so the optimum is the ball point √0.01·(1,−1).
    assert_close(&c, &[0.1, -0.1], 1e-5);
    let gap = set.fw_gap_point(&c, &[1.0, -1.0]).unwrap();
    assert!(gap.abs() <= 1e-5);
}

#[test]
fn redundant_hyperplane_rows_project_exactly() {
    // Duplicated equality rows make the Gram matrix singular; the per-row
    // decomposition still reaches the exact affine projection.
    let e = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
    let set = ConstraintSet::hyperplanes(e, vec![1.0, 2.0]).unwrap();
    let y = set.project(&[1.0, 1.0]).unwrap();
    assert_close(&y, &[0.5, 0.5], 1e-8);
    assert!(set.contains(&y, 1e-7).unwrap());
}
