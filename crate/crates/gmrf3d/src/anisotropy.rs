//! The anisotropy tensor `H(s)`, its parametrization, and the analytic
//! properties of the stationary field.
//!
//! `H = gamma*I + v*v' + omega*omega'` with `v ⊥ omega`. The secondary
//! vector is built from two unit vectors spanning the plane orthogonal to
//! `v`: `omega = rho1 * w1/|w1| + rho2 * w2/|w2|` with `w1 = (-vy, vx, 0)`
//! and `w2 = v x w1`. The eigenvalues of `H` are `gamma`, `gamma + |v|^2`,
//! and `gamma + |omega|^2` with eigenvectors `v x omega`, `v`, `omega`.
//!
//! For the stationary field driven by `(kappa^2 - div H grad) u = W`, the
//! marginal variance is `1 / (8 pi kappa sqrt(det H))` and the covariance is
//! exponential in the `H`-deformed distance.

use crate::error::{Error, Result};
use crate::spline::SplineBasis3;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Relative threshold below which `(v_x, v_y)` counts as degenerate and the
/// frame falls back to a fixed basis (the "gimbal lock" configuration where
/// `v` points along the z-axis).
const AXIS_EPS: f64 = 1e-8;

/// Number of spatially varying coefficient functions:
/// `log kappa^2, log gamma, v_x, v_y, v_z, rho_1, rho_2`.
pub const NUM_FIELDS: usize = 7;

/// Field indices into the 7-vector of local function values.
pub mod field {
    pub const LOG_KAPPA2: usize = 0;
    pub const LOG_GAMMA: usize = 1;
    pub const V_X: usize = 2;
    pub const V_Y: usize = 3;
    pub const V_Z: usize = 4;
    pub const RHO_1: usize = 5;
    pub const RHO_2: usize = 6;
}

/// Anisotropy parameters at a single location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAnisotropy {
    pub gamma: f64,
    pub v: Vector3<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

/// Orthonormal pair spanning the plane with normal `v`, used to build
/// `omega`. `None` when `v = 0` (no plane defined).
fn orthogonal_frame(v: &Vector3<f64>) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return None;
    }
    let n1 = v.x.hypot(v.y);
    if n1 > AXIS_EPS * vnorm {
        let e1 = Vector3::new(-v.y, v.x, 0.0) / n1;
        let w2 = v.cross(&Vector3::new(-v.y, v.x, 0.0));
        Some((e1, w2 / w2.norm()))
    } else {
        // v is (numerically) along the z-axis; any horizontal frame works.
        let e1 = Vector3::new(1.0, 0.0, 0.0);
        let w2 = v.cross(&e1);
        Some((e1, w2 / w2.norm()))
    }
}

impl LocalAnisotropy {
    pub fn new(gamma: f64, v: [f64; 3], rho1: f64, rho2: f64) -> Self {
        LocalAnisotropy {
            gamma,
            v: Vector3::from(v),
            rho1,
            rho2,
        }
    }

    /// The secondary anisotropy vector `omega`, orthogonal to `v` with
    /// `|omega|^2 = rho1^2 + rho2^2`.
    pub fn omega(&self) -> Result<Vector3<f64>> {
        if self.rho1 == 0.0 && self.rho2 == 0.0 {
            return Ok(Vector3::zeros());
        }
        match orthogonal_frame(&self.v) {
            Some((e1, e2)) => Ok(self.rho1 * e1 + self.rho2 * e2),
            None => Err(Error::DegenerateAnisotropy {
                rho1: self.rho1,
                rho2: self.rho2,
            }),
        }
    }

    /// The symmetric positive definite tensor
    /// `H = gamma*I + v*v' + omega*omega'`.
    pub fn tensor(&self) -> Result<Matrix3<f64>> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        let omega = self.omega()?;
        Ok(Matrix3::identity() * self.gamma
            + self.v * self.v.transpose()
            + omega * omega.transpose())
    }

    /// `H` together with its derivatives with respect to
    /// `(gamma, v_x, v_y, v_z, rho1, rho2)`.
    ///
    /// In the gimbal-lock fallback the frame is held fixed, so the reported
    /// derivatives with respect to `v` ignore the (undefined) frame rotation.
    pub fn tensor_with_jacobian(&self) -> Result<(Matrix3<f64>, [Matrix3<f64>; 6])> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        let v = self.v;
        let (rho1, rho2) = (self.rho1, self.rho2);
        let zero_rho = rho1 == 0.0 && rho2 == 0.0;
        let frame = orthogonal_frame(&v);
        let (e1, e2) = match (frame, zero_rho) {
            (Some(f), _) => f,
            // omega == 0 identically: frame only appears multiplied by rho.
            (None, true) => (Vector3::x(), Vector3::y()),
            (None, false) => {
                return Err(Error::DegenerateAnisotropy { rho1, rho2 });
            }
        };
        let omega = rho1 * e1 + rho2 * e2;
        let h = Matrix3::identity() * self.gamma
            + v * v.transpose()
            + omega * omega.transpose();

        let sym = |a: &Vector3<f64>, b: &Vector3<f64>| a * b.transpose() + b * a.transpose();

        let mut jac = [Matrix3::zeros(); 6];
        jac[0] = Matrix3::identity();

        // Frame derivatives (standard branch only; zero in the fallback).
        let n1 = v.x.hypot(v.y);
        let vnorm = v.norm();
        let standard = vnorm > 0.0 && n1 > AXIS_EPS * vnorm;
        for (slot, unit) in [(1, Vector3::x()), (2, Vector3::y()), (3, Vector3::z())] {
            let mut d = sym(&unit, &v);
            if standard && !zero_rho {
                let w1 = Vector3::new(-v.y, v.x, 0.0);
                let w2 = v.cross(&w1);
                let n2 = w2.norm();
                let dw1 = match slot {
                    1 => Vector3::new(0.0, 1.0, 0.0),
                    2 => Vector3::new(-1.0, 0.0, 0.0),
                    _ => Vector3::zeros(),
                };
                let dw2 = match slot {
                    1 => Vector3::new(-v.z, 0.0, 2.0 * v.x),
                    2 => Vector3::new(0.0, -v.z, 2.0 * v.y),
                    _ => Vector3::new(-v.x, -v.y, 0.0),
                };
                let dn1 = w1.dot(&dw1) / n1;
                let dn2 = w2.dot(&dw2) / n2;
                let de1 = (dw1 - e1 * dn1) / n1;
                let de2 = (dw2 - e2 * dn2) / n2;
                let domega = rho1 * de1 + rho2 * de2;
                d += sym(&domega, &omega);
            }
            jac[slot] = d;
        }
        jac[4] = sym(&e1, &omega);
        jac[5] = sym(&e2, &omega);
        Ok((h, jac))
    }
}

/// Marginal variance `1 / (8 pi kappa sqrt(det H))` of the stationary field.
pub fn marginal_variance(kappa2: f64, h: &Matrix3<f64>) -> Result<f64> {
    check_spd(kappa2, h)?;
    let det = h.determinant();
    Ok(1.0 / (8.0 * std::f64::consts::PI * kappa2.sqrt() * det.sqrt()))
}

/// Exponential covariance `sigma_m^2 * exp(-kappa * |H^{-1/2}(s1 - s2)|)`.
pub fn analytic_covariance(kappa2: f64, h: &Matrix3<f64>, s1: [f64; 3], s2: [f64; 3]) -> Result<f64> {
    let sm2 = marginal_variance(kappa2, h)?;
    let d = Vector3::from(s1) - Vector3::from(s2);
    // |H^{-1/2} d| = sqrt(d' H^{-1} d) via a small Cholesky solve.
    let chol = nalgebra::Cholesky::new(*h).ok_or(Error::InvalidParameter(
        "H is not positive definite".to_string(),
    ))?;
    let hd = chol.solve(&d);
    let dist = d.dot(&hd).max(0.0).sqrt();
    Ok(sm2 * (-kappa2.sqrt() * dist).exp())
}

/// Distance along each coordinate axis at which the correlation of the
/// stationary field drops to `level`:
/// `r_d = -ln(level) / (kappa * sqrt((H^{-1})_{dd}))`.
///
/// The conventional "spatial range" corresponds to `level = 0.05`.
pub fn principal_ranges(kappa2: f64, h: &Matrix3<f64>, level: f64) -> Result<[f64; 3]> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "correlation level must lie in (0, 1), got {level}"
        )));
    }
    check_spd(kappa2, h)?;
    let hinv = h
        .try_inverse()
        .ok_or(Error::InvalidParameter("H is singular".to_string()))?;
    let kappa = kappa2.sqrt();
    let factor = -level.ln() / kappa;
    Ok([
        factor / hinv[(0, 0)].sqrt(),
        factor / hinv[(1, 1)].sqrt(),
        factor / hinv[(2, 2)].sqrt(),
    ])
}

/// Marginal variance by numeric quadrature of the spectral density
/// `(2 pi)^{-3} (kappa^2 + w' H w)^{-2}` over frequency space.
///
/// Spherical product rule: Gauss-Legendre in the polar cosine and in a
/// compactified radius `r = tan(u)`, trapezoid in azimuth. Serves as an
/// independent check of [`marginal_variance`].
pub fn marginal_variance_quadrature(
    kappa2: f64,
    h: &Matrix3<f64>,
    n_radial: usize,
    n_polar: usize,
    n_azimuth: usize,
) -> f64 {
    let (r_nodes, r_weights) = gauss_legendre(n_radial, 0.0, std::f64::consts::FRAC_PI_2);
    let (c_nodes, c_weights) = gauss_legendre(n_polar, -1.0, 1.0);
    let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
    let mut total = 0.0;
    for (ci, cw) in c_nodes.iter().zip(&c_weights) {
        let sin_theta = (1.0 - ci * ci).max(0.0).sqrt();
        for a in 0..n_azimuth {
            let phi = a as f64 * dphi;
            let u = Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), *ci);
            let quad_form = (h * u).dot(&u);
            let mut radial = 0.0;
            for (ui, uw) in r_nodes.iter().zip(&r_weights) {
                let r = ui.tan();
                let sec2 = 1.0 + r * r;
                let dens = (kappa2 + quad_form * r * r).powi(-2);
                radial += uw * r * r * dens * sec2;
            }
            total += cw * dphi * radial;
        }
    }
    total / (2.0 * std::f64::consts::PI).powi(3)
}

fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on Legendre polynomials; standard Golub-Welsch-free
    // construction, accurate to machine precision for moderate n.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes[i] = -x;
                nodes[n - 1 - i] = x;
                weights[i] = w;
                weights[n - 1 - i] = w;
                break;
            }
        }
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn check_spd(kappa2: f64, h: &Matrix3<f64>) -> Result<()> {
    if !(kappa2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa^2 must be positive, got {kappa2}"
        )));
    }
    if nalgebra::Cholesky::new(*h).is_none() {
        return Err(Error::InvalidParameter(
            "H is not positive definite".to_string(),
        ));
    }
    Ok(())
}

/// The three model flavors, ordered by increasing flexibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Stationary isotropic: `theta = (log kappa^2, log gamma, log tau_N)`.
    Si,
    /// Stationary anisotropic:
    /// `theta = (log kappa^2, log gamma, v_x, v_y, v_z, rho_1, rho_2, log tau_N)`.
    Sa,
    /// Non-stationary anisotropic: one coefficient block per function in the
    /// same order, followed by `log tau_N`.
    Na,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Si => "si",
            ModelKind::Sa => "sa",
            ModelKind::Na => "na",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(ModelKind::Si),
            "sa" => Ok(ModelKind::Sa),
            "na" => Ok(ModelKind::Na),
            other => Err(Error::InvalidParameter(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A model flavor bound to (for the non-stationary case) its spline basis.
///
/// Evaluates the seven coefficient functions and maps between the packed
/// parameter vector `theta` (field parameters followed by `log tau_N`) and
/// local anisotropy values.
#[derive(Debug, Clone)]
pub struct AnisotropyModel {
    kind: ModelKind,
    basis: Option<SplineBasis3>,
}

impl AnisotropyModel {
    pub fn stationary_isotropic() -> Self {
        AnisotropyModel {
            kind: ModelKind::Si,
            basis: None,
        }
    }

    pub fn stationary_anisotropic() -> Self {
        AnisotropyModel {
            kind: ModelKind::Sa,
            basis: None,
        }
    }

    pub fn nonstationary(basis: SplineBasis3) -> Self {
        AnisotropyModel {
            kind: ModelKind::Na,
            basis: Some(basis),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn basis(&self) -> Option<&SplineBasis3> {
        self.basis.as_ref()
    }

    /// Coefficients per spatially varying function (1 for stationary kinds).
    pub fn block_len(&self) -> usize {
        match self.kind {
            ModelKind::Si | ModelKind::Sa => 1,
            ModelKind::Na => self.basis.as_ref().map(|b| b.len()).unwrap_or(0),
        }
    }

    /// Length of the full parameter vector including `log tau_N`:
    /// 3 (SI), 8 (SA), or `7 p + 1` (NA).
    pub fn theta_dim(&self) -> usize {
        match self.kind {
            ModelKind::Si => 3,
            ModelKind::Sa => 8,
            ModelKind::Na => NUM_FIELDS * self.block_len() + 1,
        }
    }

    pub fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_dim() {
            return Err(Error::InvalidParameter(format!(
                "theta has length {} but the {} model needs {}",
                theta.len(),
                self.kind.as_str(),
                self.theta_dim()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in theta".to_string()));
        }
        Ok(())
    }

    /// `log tau_N` (last entry of theta).
    pub fn log_tau(&self, theta: &[f64]) -> f64 {
        theta[theta.len() - 1]
    }

    /// The seven local function values
    /// `(log kappa^2, log gamma, v_x, v_y, v_z, rho_1, rho_2)` from a basis
    /// row. Stationary kinds ignore the row.
    pub fn fields_from_row(&self, theta: &[f64], row: &[f64]) -> [f64; NUM_FIELDS] {
        match self.kind {
            ModelKind::Si => [theta[0], theta[1], 0.0, 0.0, 0.0, 0.0, 0.0],
            ModelKind::Sa => [
                theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6],
            ],
            ModelKind::Na => {
                let p = self.block_len();
                let mut out = [0.0; NUM_FIELDS];
                for (f, slot) in out.iter_mut().enumerate() {
                    let block = &theta[f * p..(f + 1) * p];
                    *slot = block.iter().zip(row).map(|(a, b)| a * b).sum();
                }
                out
            }
        }
    }

    /// Accumulate `d(objective)/d(field value at site)` into the gradient of
    /// theta, chaining through the basis expansion for the NA model.
    pub fn scatter_field_grad(&self, grad: &mut [f64], field_idx: usize, row: &[f64], d: f64) {
        match self.kind {
            ModelKind::Si => {
                // Only the two isotropic functions are parameters.
                if field_idx < 2 {
                    grad[field_idx] += d;
                }
            }
            ModelKind::Sa => grad[field_idx] += d,
            ModelKind::Na => {
                let p = self.block_len();
                let block = &mut grad[field_idx * p..(field_idx + 1) * p];
                for (g, &b) in block.iter_mut().zip(row) {
                    *g += d * b;
                }
            }
        }
    }

    /// Basis row at a site (empty slice semantics for stationary kinds).
    pub fn basis_row(&self, s: [f64; 3]) -> Result<Vec<f64>> {
        match &self.basis {
            Some(b) => b.eval(s),
            None => Ok(Vec::new()),
        }
    }

    /// Evaluate `(kappa^2(s), local anisotropy at s)`.
    pub fn local_at(&self, theta: &[f64], s: [f64; 3]) -> Result<(f64, LocalAnisotropy)> {
        self.validate_theta(theta)?;
        let row = self.basis_row(s)?;
        let f = self.fields_from_row(theta, &row);
        Ok((
            f[field::LOG_KAPPA2].exp(),
            LocalAnisotropy::new(
                f[field::LOG_GAMMA].exp(),
                [f[field::V_X], f[field::V_Y], f[field::V_Z]],
                f[field::RHO_1],
                f[field::RHO_2],
            ),
        ))
    }

    /// Evaluate `(kappa^2(s), H(s))`.
    pub fn evaluate_fields(&self, theta: &[f64], s: [f64; 3]) -> Result<(f64, Matrix3<f64>)> {
        let (kappa2, local) = self.local_at(theta, s)?;
        Ok((kappa2, local.tensor()?))
    }
}
