//! Clamped one-dimensional B-splines and their 3D tensor products.
//!
//! Each spatially varying coefficient function is represented as
//! `g(s) = f(s)' * alpha`, where `f` collects tensor products of
//! one-dimensional second-order B-splines. The 1D basis is *clamped*: the
//! first two and last two raw basis functions are summed so that
//! `g'(A) = g'(B) = 0` holds for every coefficient vector, which folds the
//! coefficient constraints `alpha_0 = alpha_1` and
//! `alpha_{end-1} = alpha_{end}` directly into the basis.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Order of the basis splines (quadratic).
pub const SPLINE_ORDER: usize = 2;

/// A clamped second-order B-spline basis on an interval.
///
/// The knot vector is uniform with `m_eff` spans and full end-knot
/// multiplicity; after folding, the basis has exactly `m_eff` free
/// functions that form a partition of unity on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1d {
    a: f64,
    b: f64,
    /// Number of folded basis functions (= number of knot spans).
    m_eff: usize,
    /// Full knot vector including end multiplicities.
    knots: Vec<f64>,
}

impl Basis1d {
    /// Uniform clamped basis with `m_eff >= 2` functions on `[a, b]`.
    pub fn new(a: f64, b: f64, m_eff: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidBasis(format!("bad interval [{a}, {b}]")));
        }
        if m_eff < 2 {
            return Err(Error::InvalidBasis(format!(
                "need at least 2 basis functions per axis, got {m_eff}"
            )));
        }
        let spans = m_eff;
        let delta = (b - a) / spans as f64;
        // [a, a, a, a+d, ..., b-d, b, b, b]
        let mut knots = Vec::with_capacity(spans + 5);
        knots.extend_from_slice(&[a, a, a]);
        for i in 1..spans {
            knots.push(a + i as f64 * delta);
        }
        knots.extend_from_slice(&[b, b, b]);
        Ok(Basis1d { a, b, m_eff, knots })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Number of folded basis functions.
    pub fn len(&self) -> usize {
        self.m_eff
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Knot span index such that `knots[mu] <= t < knots[mu + 1]`
    /// (with `t = b` assigned to the last non-empty span).
    fn span(&self, t: f64) -> usize {
        let spans = self.m_eff;
        let delta = (self.b - self.a) / spans as f64;
        let idx = (((t - self.a) / delta).floor() as usize).min(spans - 1);
        idx + SPLINE_ORDER
    }

    /// The three nonzero raw quadratic functions at `t`, by the triangular
    /// Cox-de Boor recursion, together with the index of the first one.
    fn raw_nonzero(&self, t: f64) -> (usize, [f64; SPLINE_ORDER + 1]) {
        let mu = self.span(t);
        let knots = &self.knots;
        let mut values = [0.0; SPLINE_ORDER + 1];
        values[0] = 1.0;
        let mut left = [0.0; SPLINE_ORDER + 1];
        let mut right = [0.0; SPLINE_ORDER + 1];
        for r in 1..=SPLINE_ORDER {
            left[r] = t - knots[mu + 1 - r];
            right[r] = knots[mu + r] - t;
            let mut saved = 0.0;
            for s in 0..r {
                let denom = right[s + 1] + left[r - s];
                let tmp = if denom != 0.0 { values[s] / denom } else { 0.0 };
                values[s] = saved + right[s + 1] * tmp;
                saved = left[r - s] * tmp;
            }
            values[r] = saved;
        }
        (mu - SPLINE_ORDER, values)
    }

    /// Evaluate all folded basis functions at `t`, writing into `out`
    /// (length `m_eff`). Returns an error outside `[a, b]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !(self.a..=self.b).contains(&t) {
            return Err(Error::PointOutsideDomain(t, f64::NAN, f64::NAN));
        }
        debug_assert_eq!(out.len(), self.m_eff);
        out.fill(0.0);
        let (first, values) = self.raw_nonzero(t);
        let raw_count = self.m_eff + 2;
        for (offset, &v) in values.iter().enumerate() {
            let raw = first + offset;
            // Fold raw indices into the clamped basis: 0 and 1 merge into
            // folded 0, the last two merge into folded m_eff-1.
            let folded = if raw <= 1 {
                0
            } else if raw >= raw_count - 2 {
                self.m_eff - 1
            } else {
                raw - 1
            };
            out[folded] += v;
        }
        Ok(())
    }

    /// Evaluate all folded basis functions at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.m_eff];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// Tensor-product basis of three clamped 1D bases.
///
/// Coefficients are ordered with the x-index slowest and the z-index
/// fastest: `alpha[(i * m_y + j) * m_z + k]` multiplies
/// `B_{x,i}(s1) * B_{y,j}(s2) * B_{z,k}(s3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis3 {
    pub x: Basis1d,
    pub y: Basis1d,
    pub z: Basis1d,
}

impl SplineBasis3 {
    /// Basis with `m_eff` functions per axis over the given box.
    pub fn new(bounds: (f64, f64, f64, f64, f64, f64), m_eff: usize) -> Result<Self> {
        Ok(SplineBasis3 {
            x: Basis1d::new(bounds.0, bounds.1, m_eff)?,
            y: Basis1d::new(bounds.2, bounds.3, m_eff)?,
            z: Basis1d::new(bounds.4, bounds.5, m_eff)?,
        })
    }

    /// Total number of tensor basis functions.
    pub fn len(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluate the full basis vector `f(s)` into `out` (length [`len`](Self::len)).
    pub fn eval_into(&self, s: [f64; 3], out: &mut [f64]) -> Result<()> {
        let (nx, ny, nz) = (self.x.len(), self.y.len(), self.z.len());
        debug_assert_eq!(out.len(), nx * ny * nz);
        let mut bx = vec![0.0; nx];
        let mut by = vec![0.0; ny];
        let mut bz = vec![0.0; nz];
        self.x.eval_into(s[0], &mut bx).map_err(|_| domain_err(s))?;
        self.y.eval_into(s[1], &mut by).map_err(|_| domain_err(s))?;
        self.z.eval_into(s[2], &mut bz).map_err(|_| domain_err(s))?;
        let mut idx = 0;
        for &vx in &bx {
            for &vy in &by {
                let vxy = vx * vy;
                for &vz in &bz {
                    out[idx] = vxy * vz;
                    idx += 1;
                }
            }
        }
        Ok(())
    }

    /// Evaluate the full basis vector `f(s)`.
    pub fn eval(&self, s: [f64; 3]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    /// Basis rows for a list of sites, as an `n x p` row-major matrix.
    pub fn rows(&self, sites: &[[f64; 3]]) -> Result<Vec<f64>> {
        let p = self.len();
        let mut rows = vec![0.0; sites.len() * p];
        for (r, &s) in sites.iter().enumerate() {
            self.eval_into(s, &mut rows[r * p..(r + 1) * p])?;
        }
        Ok(rows)
    }
}

fn domain_err(s: [f64; 3]) -> Error {
    Error::PointOutsideDomain(s[0], s[1], s[2])
}

/// One scalar function on the domain: a tensor basis plus its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineField {
    pub basis: SplineBasis3,
    pub coeffs: Vec<f64>,
}

impl SplineField {
    pub fn new(basis: SplineBasis3, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(SplineField { basis, coeffs })
    }

    /// The constant field `g = c` (exactly representable since the basis is
    /// a partition of unity).
    pub fn constant(basis: SplineBasis3, c: f64) -> Self {
        let coeffs = vec![c; basis.len()];
        SplineField { basis, coeffs }
    }

    /// `g(s) = f(s)' * alpha`.
    pub fn eval(&self, s: [f64; 3]) -> Result<f64> {
        let f = self.basis.eval(s)?;
        Ok(f.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum())
    }
}

/// Least-squares projection of target values onto the tensor basis.
///
/// Solves `min_alpha sum_q (f(s_q)' alpha - target_q)^2`. Requires at least
/// `p` sample points and a full-rank design; a rank-deficient design is
/// reported with the axis whose 1D design is deficient.
pub fn project(basis: &SplineBasis3, points: &[[f64; 3]], targets: &[f64]) -> Result<Vec<f64>> {
    let p = basis.len();
    if points.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} target values",
            points.len(),
            targets.len()
        )));
    }
    if points.len() < p {
        return Err(Error::InvalidParameter(format!(
            "need at least {p} sample points for projection, got {}",
            points.len()
        )));
    }
    let rows = basis.rows(points)?;
    let design = DMatrix::from_row_slice(points.len(), p, &rows);
    let rhs = DVector::from_column_slice(targets);

    // Normal equations with a Cholesky solve; the Gram matrix doubles as the
    // rank check.
    let gram = design.transpose() * &design;
    let atb = design.transpose() * rhs;
    match nalgebra::Cholesky::new(gram.clone()) {
        Some(chol) => Ok(chol.solve(&atb).iter().copied().collect()),
        None => Err(Error::RankDeficient {
            axis: diagnose_deficient_axis(basis, points),
        }),
    }
}

/// Name the axis whose 1D design matrix loses rank, or "joint" when every
/// axis looks fine in isolation.
fn diagnose_deficient_axis(basis: &SplineBasis3, points: &[[f64; 3]]) -> String {
    let axes: [(&str, &Basis1d, usize); 3] = [
        ("x", &basis.x, 0),
        ("y", &basis.y, 1),
        ("z", &basis.z, 2),
    ];
    for (name, b, dim) in axes {
        let mut design = DMatrix::zeros(points.len(), b.len());
        let mut row = vec![0.0; b.len()];
        for (r, pt) in points.iter().enumerate() {
            if b.eval_into(pt[dim], &mut row).is_err() {
                continue;
            }
            for (c, &v) in row.iter().enumerate() {
                design[(r, c)] = v;
            }
        }
        let svd = design.svd(false, false);
        let max_sv = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * max_sv.max(1.0))
            .count();
        if rank < b.len() {
            return name.to_string();
        }
    }
    "joint".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    /// Textbook Cox-de Boor evaluation of a single raw basis function,
    /// independent of the optimized triangular scheme above.
    fn cox_de_boor(knots: &[f64], i: usize, r: usize, t: f64, b_end: f64) -> f64 {
        if r == 0 {
            let upper_closed = knots[i + 1] == b_end;
            if (knots[i] <= t && t < knots[i + 1]) || (upper_closed && t == b_end && knots[i] < knots[i + 1]) {
                return 1.0;
            }
            return 0.0;
        }
        let mut value = 0.0;
        let d1 = knots[i + r] - knots[i];
        if d1 > 0.0 {
            value += (t - knots[i]) / d1 * cox_de_boor(knots, i, r - 1, t, b_end);
        }
        let d2 = knots[i + r + 1] - knots[i + 1];
        if d2 > 0.0 {
            value += (knots[i + r + 1] - t) / d2 * cox_de_boor(knots, i + 1, r - 1, t, b_end);
        }
        value
    }

    fn folded_oracle(basis: &Basis1d, t: f64) -> Vec<f64> {
        let raw_count = basis.m_eff + 2;
        let raw: Vec<f64> = (0..raw_count)
            .map(|i| cox_de_boor(&basis.knots, i, SPLINE_ORDER, t, basis.b))
            .collect();
        let mut folded = vec![0.0; basis.m_eff];
        folded[0] = raw[0] + raw[1];
        for i in 1..basis.m_eff - 1 {
            folded[i] = raw[i + 1];
        }
        folded[basis.m_eff - 1] += raw[raw_count - 2] + raw[raw_count - 1];
        folded
    }

    #[test]
    fn matches_direct_cox_de_boor_recursion() {
        let basis = Basis1d::new(-2.0, 5.0, 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..500 {
            let t = rng.gen_range(-2.0..=5.0);
            let fast = basis.eval(t).unwrap();
            let slow = folded_oracle(&basis, t);
            for (a, b) in fast.iter().zip(&slow) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
        }
        // Endpoints.
        for t in [-2.0, 5.0] {
            let fast = basis.eval(t).unwrap();
            let slow = folded_oracle(&basis, t);
            for (a, b) in fast.iter().zip(&slow) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn partition_of_unity_1d() {
        for m_eff in [2, 3, 5] {
            let basis = Basis1d::new(0.0, 40.0, m_eff).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            for _ in 0..200 {
                let t = rng.gen_range(0.0..=40.0);
                let sum: f64 = basis.eval(t).unwrap().iter().sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_3d_and_nonnegative() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = [
                rng.gen_range(0.0..=40.0),
                rng.gen_range(0.0..=40.0),
                rng.gen_range(0.0..=40.0),
            ];
            let f = basis.eval(s).unwrap();
            assert!(f.iter().all(|&v| v >= 0.0));
            let sum: f64 = f.iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn corner_evaluates_to_first_basis_triple() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let f = basis.eval([0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-14);
        assert!(f[1..].iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn midpoint_basis_is_symmetric_under_axis_reversal() {
        let basis = Basis1d::new(0.0, 40.0, 3).unwrap();
        let f = basis.eval(20.0).unwrap();
        let mut rev = f.clone();
        rev.reverse();
        for (a, b) in f.iter().zip(&rev) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn eval_is_linear_in_coefficients() {
        let basis = SplineBasis3::new((0.0, 1.0, 0.0, 1.0, 0.0, 1.0), 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let p = basis.len();
        let ca: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cb: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (wa, wb) = (0.3, -1.7);
        let mix: Vec<f64> = ca.iter().zip(&cb).map(|(a, b)| wa * a + wb * b).collect();
        let fa = SplineField::new(basis.clone(), ca).unwrap();
        let fb = SplineField::new(basis.clone(), cb).unwrap();
        let fm = SplineField::new(basis, mix).unwrap();
        for _ in 0..50 {
            let s = [rng.gen(), rng.gen(), rng.gen()];
            let lhs = fm.eval(s).unwrap();
            let rhs = wa * fa.eval(s).unwrap() + wb * fb.eval(s).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }

    #[test]
    fn constant_fields_are_exact() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let field = SplineField::constant(basis, 2.75);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = [
                rng.gen_range(0.0..=40.0),
                rng.gen_range(0.0..=40.0),
                rng.gen_range(0.0..=40.0),
            ];
            assert_relative_eq!(field.eval(s).unwrap(), 2.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_derivative_at_domain_faces() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let field = SplineField::new(basis, coeffs).unwrap();
        let h = 1e-4;
        // Central difference across each domain face at random transverse points.
        for _ in 0..40 {
            let u = rng.gen_range(0.0..=40.0);
            let v = rng.gen_range(0.0..=40.0);
            for (lo, hi, make) in [
                (0.0, 40.0, (|t: f64, u: f64, v: f64| [t, u, v]) as fn(f64, f64, f64) -> [f64; 3]),
                (0.0, 40.0, |t, u, v| [u, t, v]),
                (0.0, 40.0, |t, u, v| [u, v, t]),
            ] {
                for edge in [lo, hi] {
                    let t0 = edge.clamp(lo + h, hi - h);
                    let d = (field.eval(make(t0 + h, u, v)).unwrap()
                        - field.eval(make(t0 - h, u, v)).unwrap())
                        / (2.0 * h);
                    assert!(
                        d.abs() < 1e-6 * scale.max(1.0),
                        "boundary derivative {d} too large"
                    );
                }
            }
        }
    }

    #[test]
    fn projection_of_constant_recovers_constant() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let grid = crate::grid::GridSpec::new(6, 6, 6, (0.0, 40.0, 0.0, 40.0, 0.0, 40.0)).unwrap();
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    pts.push(grid.cell_center(i, j, k).unwrap());
                }
            }
        }
        let targets = vec![1.25; pts.len()];
        let alpha = project(&basis, &pts, &targets).unwrap();
        for a in &alpha {
            assert_relative_eq!(*a, 1.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_interpolates_in_span_functions() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let truth: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let field = SplineField::new(basis.clone(), truth.clone()).unwrap();
        let grid = crate::grid::GridSpec::new(8, 8, 8, (0.0, 40.0, 0.0, 40.0, 0.0, 40.0)).unwrap();
        let mut pts = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    pts.push(grid.cell_center(i, j, k).unwrap());
                }
            }
        }
        let targets: Vec<f64> = pts.iter().map(|&s| field.eval(s).unwrap()).collect();
        let alpha = project(&basis, &pts, &targets).unwrap();
        let mut resid = 0.0f64;
        let refit = SplineField::new(basis, alpha).unwrap();
        for (pt, t) in pts.iter().zip(&targets) {
            resid += (refit.eval(*pt).unwrap() - t).powi(2);
        }
        assert!(resid.sqrt() < 1e-10, "residual {resid}");
    }

    #[test]
    fn projection_residual_matches_dense_normal_equations() {
        let basis = SplineBasis3::new((0.0, 40.0, 0.0, 40.0, 0.0, 40.0), 3).unwrap();
        let grid = crate::grid::GridSpec::new(7, 7, 7, (0.0, 40.0, 0.0, 40.0, 0.0, 40.0)).unwrap();
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    pts.push(grid.cell_center(i, j, k).unwrap());
                }
            }
        }
        let targets: Vec<f64> = pts
            .iter()
            .map(|s| (0.3 * s[0]).sin() + (0.2 * s[1]).sin() * (0.15 * s[2]).cos())
            .collect();
        let alpha = project(&basis, &pts, &targets).unwrap();
        let refit = SplineField::new(basis.clone(), alpha).unwrap();
        let resid: f64 = pts
            .iter()
            .zip(&targets)
            .map(|(pt, t)| (refit.eval(*pt).unwrap() - t).powi(2))
            .sum();

        // Dense normal-equations oracle via explicit matrix inverse.
        let rows = basis.rows(&pts).unwrap();
        let design = DMatrix::from_row_slice(pts.len(), basis.len(), &rows);
        let rhs = DVector::from_column_slice(&targets);
        let gram = design.transpose() * &design;
        let alpha_dense = gram.try_inverse().unwrap() * design.transpose() * &rhs;
        let resid_dense = (design * alpha_dense - rhs).norm_squared();
        assert_relative_eq!(resid, resid_dense, epsilon = 1e-8);
    }

    #[test]
    fn rank_deficiency_names_the_offending_axis() {
        let basis = SplineBasis3::new((0.0, 1.0, 0.0, 1.0, 0.0, 1.0), 3).unwrap();
        // All points share the same z coordinate: the z-axis design is rank 1.
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64 / 9.0, j as f64 / 9.0, 0.5]);
            }
        }
        let targets = vec![0.0; pts.len()];
        match project(&basis, &pts, &targets) {
            Err(Error::RankDeficient { axis }) => assert_eq!(axis, "z"),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn out_of_domain_evaluation_errors() {
        let basis = SplineBasis3::new((0.0, 1.0, 0.0, 1.0, 0.0, 1.0), 3).unwrap();
        assert!(basis.eval([1.5, 0.5, 0.5]).is_err());
        assert!(basis.eval([0.5, -0.1, 0.5]).is_err());
    }
}
