//! Embedded Riemannian manifolds used by the solver.
//!
//! Every manifold here is an embedded submanifold of a matrix space
//! `R^{rows x cols}` and inherits the Frobenius inner product as its metric.
//! Points and tangent vectors are therefore stored as dense ambient matrices;
//! fixed-rank points additionally carry their thin SVD factors.
//!
//! | kind                  | ambient shape | intrinsic dimension |
//! |-----------------------|---------------|---------------------|
//! | `Euclidean(n)`        | `n x 1`       | `n`                 |
//! | `Sphere(n)`           | `n x 1`       | `n - 1`             |
//! | `Oblique(q, s)`       | `q x s`       | `q (s - 1)`         |
//! | `FixedRank(q, s, p)`  | `q x s`       | `p (q + s - p)`     |

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `||x|| = 1` (sphere) and unit rows (oblique).
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance on the orthonormality of fixed-rank factors.
pub const FACTOR_ORTHO_TOL: f64 = 1e-10;
/// Relative singular value threshold below which a fixed-rank retraction fails.
pub const RANK_DROP_REL_TOL: f64 = 1e-12;
/// Post-orthogonalization norm below which a random basis candidate is redrawn.
pub const BASIS_REJECT_NORM: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("invalid manifold: {0}")]
    InvalidKind(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("point does not satisfy the manifold invariants: {0}")]
    NotOnManifold(String),
    #[error("tangent vector is anchored at a different point")]
    AnchorMismatch,
    #[error("retraction dropped rank: smallest kept singular value {sigma_min:e}, largest {sigma_max:e}")]
    RankDrop { sigma_min: f64, sigma_max: f64 },
    #[error("operation `{0}` is not available on this manifold")]
    Unsupported(&'static str),
    #[error("could not build an orthonormal tangent basis after {attempts} draws")]
    BasisDegenerate { attempts: usize },
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Euclidean(usize),
    Sphere(usize),
    /// `q x s` matrices with unit-norm rows.
    Oblique(usize, usize),
    /// `q x s` matrices of rank exactly `p`.
    FixedRank(usize, usize, usize),
}

impl ManifoldKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ManifoldKind::Euclidean(n) => n >= 1,
            ManifoldKind::Sphere(n) => n >= 2,
            ManifoldKind::Oblique(q, s) => q >= 1 && s >= 1,
            ManifoldKind::FixedRank(q, s, p) => p >= 1 && p <= q.min(s),
        };
        if ok {
            Ok(())
        } else {
            Err(ManifoldError::InvalidKind(format!("{self:?}")))
        }
    }

    /// Intrinsic dimension `d`.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldKind::Euclidean(n) => n,
            ManifoldKind::Sphere(n) => n - 1,
            ManifoldKind::Oblique(q, s) => q * (s - 1),
            ManifoldKind::FixedRank(q, s, p) => p * (q + s - p),
        }
    }

    pub fn ambient_shape(&self) -> (usize, usize) {
        match *self {
            ManifoldKind::Euclidean(n) | ManifoldKind::Sphere(n) => (n, 1),
            ManifoldKind::Oblique(q, s) | ManifoldKind::FixedRank(q, s, _) => (q, s),
        }
    }

    pub fn has_exp_map(&self) -> bool {
        !matches!(self, ManifoldKind::FixedRank(..))
    }

    fn check_shape(&self, m: &DMatrix<f64>) -> Result<()> {
        let expected = self.ambient_shape();
        let got = m.shape();
        if expected == got {
            Ok(())
        } else {
            Err(ManifoldError::ShapeMismatch { expected, got })
        }
    }
}

/// Thin SVD factors `X = U diag(s) V^T` of a fixed-rank point.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

#[derive(Debug, PartialEq)]
struct PointData {
    ambient: DMatrix<f64>,
    factors: Option<Factors>,
}

/// A point on a manifold. Cloning is cheap; the data is shared.
#[derive(Debug, Clone)]
pub struct Point {
    kind: ManifoldKind,
    data: Arc<PointData>,
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && (Arc::ptr_eq(&self.data, &other.data) || self.data == other.data)
    }
}

impl Point {
    /// Builds a point from its ambient matrix, checking the manifold invariants.
    ///
    /// Fixed-rank points are factored by a thin SVD; a matrix whose numerical
    /// rank is below `p` is rejected.
    pub fn from_ambient(kind: ManifoldKind, ambient: DMatrix<f64>) -> Result<Self> {
        kind.validate()?;
        kind.check_shape(&ambient)?;
        let point = match kind {
            ManifoldKind::FixedRank(_, _, p) => {
                let factors = truncated_svd(&ambient, p)?;
                Point::from_factors_unchecked(kind, factors)
            }
            _ => Point::from_ambient_unchecked(kind, ambient),
        };
        match point.invariant_violation() {
            None => Ok(point),
            Some(msg) => Err(ManifoldError::NotOnManifold(msg)),
        }
    }

    /// Normalizes an ambient matrix onto the manifold (unit vector, unit rows,
    /// or best rank-`p` approximation).
    pub fn project_onto(kind: ManifoldKind, ambient: DMatrix<f64>) -> Result<Self> {
        kind.validate()?;
        kind.check_shape(&ambient)?;
        match kind {
            ManifoldKind::Euclidean(_) => Ok(Point::from_ambient_unchecked(kind, ambient)),
            ManifoldKind::Sphere(_) => {
                let n = ambient.norm();
                if n == 0.0 {
                    return Err(ManifoldError::NotOnManifold("zero vector".into()));
                }
                Ok(Point::from_ambient_unchecked(kind, ambient / n))
            }
            ManifoldKind::Oblique(..) => {
                let normalized = normalize_rows(ambient)?;
                Ok(Point::from_ambient_unchecked(kind, normalized))
            }
            ManifoldKind::FixedRank(_, _, p) => {
                let factors = truncated_svd(&ambient, p)?;
                Ok(Point::from_factors_unchecked(kind, factors))
            }
        }
    }

    pub fn from_factors(kind: ManifoldKind, factors: Factors) -> Result<Self> {
        kind.validate()?;
        let ManifoldKind::FixedRank(q, s, p) = kind else {
            return Err(ManifoldError::Unsupported("from_factors"));
        };
        let dims_ok =
            factors.u.shape() == (q, p) && factors.v.shape() == (s, p) && factors.s.len() == p;
        if !dims_ok {
            return Err(ManifoldError::ShapeMismatch {
                expected: (q, s),
                got: (factors.u.nrows(), factors.v.nrows()),
            });
        }
        let point = Point::from_factors_unchecked(kind, factors);
        match point.invariant_violation() {
            None => Ok(point),
            Some(msg) => Err(ManifoldError::NotOnManifold(msg)),
        }
    }

    /// Wraps an ambient matrix without any check. Intended for diagnostics
    /// that need deliberately invalid points.
    pub fn from_ambient_unchecked(kind: ManifoldKind, ambient: DMatrix<f64>) -> Self {
        Point {
            kind,
            data: Arc::new(PointData {
                ambient,
                factors: None,
            }),
        }
    }

    fn from_factors_unchecked(kind: ManifoldKind, factors: Factors) -> Self {
        let ambient = &factors.u * DMatrix::from_diagonal(&factors.s) * factors.v.transpose();
        Point {
            kind,
            data: Arc::new(PointData {
                ambient,
                factors: Some(factors),
            }),
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ambient(&self) -> &DMatrix<f64> {
        &self.data.ambient
    }

    pub fn factors(&self) -> Option<&Factors> {
        self.data.factors.as_ref()
    }

    pub fn same_anchor(&self, other: &Point) -> bool {
        self == other
    }

    /// Describes the first violated invariant, if any.
    pub fn invariant_violation(&self) -> Option<String> {
        let x = self.ambient();
        if x.iter().any(|v| !v.is_finite()) {
            return Some("non-finite entry".into());
        }
        match self.kind {
            ManifoldKind::Euclidean(_) => None,
            ManifoldKind::Sphere(_) => {
                let err = (x.norm() - 1.0).abs();
                (err > UNIT_NORM_TOL).then(|| format!("| ||x|| - 1 | = {err:e}"))
            }
            ManifoldKind::Oblique(..) => {
                let err = x
                    .row_iter()
                    .map(|r| (r.norm_squared() - 1.0).abs())
                    .fold(0.0, f64::max);
                (err > UNIT_NORM_TOL).then(|| format!("max row |x_i^T x_i - 1| = {err:e}"))
            }
            ManifoldKind::FixedRank(..) => {
                let Some(f) = self.factors() else {
                    return Some("fixed-rank point without factors".into());
                };
                let p = f.s.len();
                let eye = DMatrix::<f64>::identity(p, p);
                let eu = (f.u.transpose() * &f.u - &eye).amax();
                let ev = (f.v.transpose() * &f.v - &eye).amax();
                if eu > FACTOR_ORTHO_TOL || ev > FACTOR_ORTHO_TOL {
                    return Some(format!("factor orthonormality error U {eu:e}, V {ev:e}"));
                }
                let smax = f.s.amax();
                let smin = f.s.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(smin > 0.0) || smin <= RANK_DROP_REL_TOL * smax {
                    return Some(format!("rank deficient: sigma_min {smin:e}"));
                }
                None
            }
        }
    }

    pub fn satisfies_invariants(&self) -> bool {
        self.invariant_violation().is_none()
    }

    /// Size of the violation of the defining equations of the manifold.
    ///
    /// Oblique: `||diag(X X^T) - e||`; sphere: `| ||x||^2 - 1 |`; fixed rank:
    /// deviation of the factors from orthonormality; Euclidean: 0.
    pub fn manifold_violation(&self) -> f64 {
        let x = self.ambient();
        match self.kind {
            ManifoldKind::Euclidean(_) => 0.0,
            ManifoldKind::Sphere(_) => (x.norm_squared() - 1.0).abs(),
            ManifoldKind::Oblique(..) => x
                .row_iter()
                .map(|r| (r.norm_squared() - 1.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            ManifoldKind::FixedRank(..) => match self.factors() {
                Some(f) => {
                    let p = f.s.len();
                    let eye = DMatrix::<f64>::identity(p, p);
                    (f.u.transpose() * &f.u - &eye).norm() + (f.v.transpose() * &f.v - &eye).norm()
                }
                None => f64::INFINITY,
            },
        }
    }
}

/// An ambient matrix anchored at a point and tangent to the manifold there.
#[derive(Debug, Clone)]
pub struct TangentVector {
    anchor: Point,
    data: DMatrix<f64>,
}

impl TangentVector {
    pub fn zero(anchor: &Point) -> Self {
        let (r, c) = anchor.kind().ambient_shape();
        TangentVector {
            anchor: anchor.clone(),
            data: DMatrix::zeros(r, c),
        }
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn scaled(&self, t: f64) -> TangentVector {
        TangentVector {
            anchor: self.anchor.clone(),
            data: &self.data * t,
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// `||data - P_x(data)||`.
    pub fn tangency_residual(&self) -> f64 {
        (&self.data - project_ambient(&self.anchor, &self.data)).norm()
    }
}

/// Ordered orthonormal basis of a tangent space.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    anchor: Point,
    vectors: Vec<TangentVector>,
    seed: u64,
}

impl TangentBasis {
    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn vectors(&self) -> &[TangentVector] {
        &self.vectors
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Coordinates `<a, e_l>` of an ambient matrix in this basis.
    pub fn coordinates(&self, a: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.vectors.len(),
            self.vectors.iter().map(|e| e.data.dot(a)),
        )
    }

    /// The tangent vector `sum_l coords[l] e_l`.
    pub fn combine(&self, coords: &DVector<f64>) -> TangentVector {
        assert_eq!(
            coords.len(),
            self.vectors.len(),
            "coordinate length must match basis size"
        );
        let (r, c) = self.anchor.kind().ambient_shape();
        let mut data = DMatrix::zeros(r, c);
        for (e, &w) in self.vectors.iter().zip(coords.iter()) {
            data += &e.data * w;
        }
        TangentVector {
            anchor: self.anchor.clone(),
            data,
        }
    }

    /// Gram matrix `<e_i, e_j>`.
    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.vectors.len();
        DMatrix::from_fn(d, d, |i, j| self.vectors[i].data.dot(&self.vectors[j].data))
    }
}

fn check_anchor(x: &Point, v: &TangentVector) -> Result<()> {
    if x.same_anchor(&v.anchor) {
        Ok(())
    } else {
        Err(ManifoldError::AnchorMismatch)
    }
}

/// Riemannian metric: the Frobenius inner product of the ambient space.
pub fn inner(x: &Point, u: &TangentVector, v: &TangentVector) -> Result<f64> {
    check_anchor(x, u)?;
    check_anchor(x, v)?;
    Ok(u.data.dot(&v.data))
}

pub fn norm(x: &Point, u: &TangentVector) -> Result<f64> {
    inner(x, u, u).map(f64::sqrt)
}

/// Orthogonal projection of an ambient matrix onto `T_x M`.
pub fn project_tangent(x: &Point, a: &DMatrix<f64>) -> Result<TangentVector> {
    x.kind().check_shape(a)?;
    Ok(TangentVector {
        anchor: x.clone(),
        data: project_ambient(x, a),
    })
}

/// Projection without shape checks; the caller guarantees `a` has the ambient shape.
pub(crate) fn project_ambient(x: &Point, a: &DMatrix<f64>) -> DMatrix<f64> {
    let xm = x.ambient();
    match x.kind() {
        ManifoldKind::Euclidean(_) => a.clone(),
        ManifoldKind::Sphere(_) => {
            let t = xm.dot(a);
            a - xm * t
        }
        ManifoldKind::Oblique(..) => {
            let mut out = a.clone();
            for i in 0..xm.nrows() {
                let t = xm.row(i).dot(&a.row(i));
                let mut row = out.row_mut(i);
                row -= xm.row(i) * t;
            }
            out
        }
        ManifoldKind::FixedRank(..) => {
            let f = x.factors().expect("fixed-rank point carries factors");
            let uta = f.u.transpose() * a; // p x s
            let av = a * &f.v; // q x p
            let utav = &uta * &f.v; // p x p
                                    // U U^T A + A V V^T - U U^T A V V^T
            &f.u * &uta + &av * f.v.transpose() - &f.u * utav * f.v.transpose()
        }
    }
}

/// Curvature part of the embedded Riemannian Hessian.
///
/// For an ambient gradient `g` of a function, the Riemannian Hessian applied to
/// a tangent `u` is `P_x(D^2 f[u]) + curvature_term(x, u, g)`.
pub(crate) fn curvature_term(
    x: &Point,
    u: &DMatrix<f64>,
    egrad: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let xm = x.ambient();
    match x.kind() {
        ManifoldKind::Euclidean(_) => None,
        ManifoldKind::Sphere(_) => Some(u * (-xm.dot(egrad))),
        ManifoldKind::Oblique(..) => {
            let mut out = u.clone();
            for i in 0..xm.nrows() {
                let t = xm.row(i).dot(&egrad.row(i));
                out.row_mut(i).scale_mut(-t);
            }
            Some(out)
        }
        ManifoldKind::FixedRank(..) => {
            let f = x.factors().expect("fixed-rank point carries factors");
            // normal part of the gradient: (I - UU^T) G (I - VV^T)
            let left = egrad - &f.u * (f.u.transpose() * egrad);
            let normal = &left - (&left * &f.v) * f.v.transpose();
            // pseudo-inverse transpose U S^{-1} V^T
            let s_inv = DMatrix::from_diagonal(&f.s.map(|s| 1.0 / s));
            let pinv_t = &f.u * s_inv * f.v.transpose();
            let ut = u.transpose();
            Some(&pinv_t * (&ut * &normal) + &normal * (&ut * &pinv_t))
        }
    }
}

/// Retraction: `x + v` (Euclidean), normalization (sphere, oblique rows), or
/// metric projection by truncated SVD (fixed rank).
pub fn retract(x: &Point, v: &TangentVector) -> Result<Point> {
    check_anchor(x, v)?;
    retract_ambient(x, &v.data)
}

pub(crate) fn retract_ambient(x: &Point, v: &DMatrix<f64>) -> Result<Point> {
    if v.iter().all(|t| *t == 0.0) {
        return Ok(x.clone());
    }
    let kind = x.kind();
    let y = x.ambient() + v;
    match kind {
        ManifoldKind::Euclidean(_) => Ok(Point::from_ambient_unchecked(kind, y)),
        ManifoldKind::Sphere(_) => {
            let n = y.norm();
            Ok(Point::from_ambient_unchecked(kind, y / n))
        }
        ManifoldKind::Oblique(..) => Ok(Point::from_ambient_unchecked(kind, normalize_rows(y)?)),
        ManifoldKind::FixedRank(_, _, p) => {
            let factors = truncated_svd(&y, p)?;
            Ok(Point::from_factors_unchecked(kind, factors))
        }
    }
}

/// Exponential map; available on Euclidean, sphere and oblique manifolds.
pub fn exp_map(x: &Point, v: &TangentVector) -> Result<Point> {
    check_anchor(x, v)?;
    let kind = x.kind();
    let xm = x.ambient();
    match kind {
        ManifoldKind::Euclidean(_) => Ok(Point::from_ambient_unchecked(kind, xm + &v.data)),
        ManifoldKind::Sphere(_) => {
            let y = sphere_geodesic(xm.column(0).into_owned(), v.data.column(0).into_owned());
            Ok(Point::from_ambient_unchecked(
                kind,
                DMatrix::from_column_slice(y.len(), 1, y.as_slice()),
            ))
        }
        ManifoldKind::Oblique(q, s) => {
            let mut out = DMatrix::zeros(q, s);
            for i in 0..q {
                let y = sphere_geodesic(xm.row(i).transpose(), v.data.row(i).transpose());
                out.row_mut(i).copy_from(&y.transpose());
            }
            Ok(Point::from_ambient_unchecked(kind, out))
        }
        ManifoldKind::FixedRank(..) => Err(ManifoldError::Unsupported("exp_map")),
    }
}

fn sphere_geodesic(x: DVector<f64>, v: DVector<f64>) -> DVector<f64> {
    let t = v.norm();
    if t == 0.0 {
        return x;
    }
    let y = x * t.cos() + v * (t.sin() / t);
    let n = y.norm();
    y / n
}

fn normalize_rows(mut y: DMatrix<f64>) -> Result<DMatrix<f64>> {
    for mut row in y.row_iter_mut() {
        let n = row.norm();
        if n == 0.0 {
            return Err(ManifoldError::NotOnManifold("zero row".into()));
        }
        row /= n;
    }
    Ok(y)
}

/// Best rank-`p` approximation of `y` as sorted thin SVD factors.
fn truncated_svd(y: &DMatrix<f64>, p: usize) -> Result<Factors> {
    let (u, sv, v) = jacobi_svd(y);
    let sv = &sv;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if order.len() < p {
        return Err(ManifoldError::RankDrop {
            sigma_min: 0.0,
            sigma_max: sv.amax(),
        });
    }
    let keep = &order[..p];
    let sigma_max = sv[order[0]];
    let sigma_min = sv[keep[p - 1]];
    if !(sigma_min > RANK_DROP_REL_TOL * sigma_max) || !sigma_max.is_finite() {
        return Err(ManifoldError::RankDrop {
            sigma_min,
            sigma_max,
        });
    }
    let uk = u.select_columns(keep.iter());
    let vk = v.select_columns(keep.iter());
    let sk = DVector::from_iterator(p, keep.iter().map(|&i| sv[i]));
    Ok(Factors {
        u: uk,
        s: sk,
        v: vk,
    })
}

/// Thin SVD `y = u diag(s) v^T` by one-sided Jacobi rotations. nalgebra's
/// bidiagonal SVD loses accuracy on nearly rank-deficient inputs, which are
/// exactly the ones the fixed-rank retraction sees for short steps.
fn jacobi_svd(y: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let wide = y.nrows() < y.ncols();
    let mut b = if wide { y.transpose() } else { y.clone() };
    let n = b.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = b.column(i).norm_squared();
                let beta = b.column(j).norm_squared();
                let gamma = b.column(i).dot(&b.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut b, &mut v] {
                    for r in 0..m.nrows() {
                        let (bi, bj) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * bi - s * bj;
                        m[(r, j)] = s * bi + c * bj;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv = DVector::from_fn(n, |k, _| b.column(k).norm());
    let mut u = b;
    for k in 0..n {
        if sv[k] > 0.0 {
            let mut col = u.column_mut(k);
            col /= sv[k];
        }
    }
    if wide {
        (v, sv, u)
    } else {
        (u, sv, v)
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random orthonormal basis of `T_x M` from Gaussian draws, projected and
/// orthonormalized by modified Gram-Schmidt with one reorthogonalization pass.
pub fn orthonormal_basis(x: &Point, seed: u64) -> Result<TangentBasis> {
    let kind = x.kind();
    let d = kind.dim();
    let (r, c) = kind.ambient_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_draws = 10 * d + 10;
    let mut vectors: Vec<TangentVector> = Vec::with_capacity(d);
    let mut draws = 0;
    while vectors.len() < d {
        if draws >= max_draws {
            return Err(ManifoldError::BasisDegenerate { attempts: draws });
        }
        draws += 1;
        let mut w = project_ambient(x, &gaussian_matrix(&mut rng, r, c));
        for _pass in 0..2 {
            for e in &vectors {
                let t = e.data.dot(&w);
                w += &e.data * -t;
            }
        }
        let n = w.norm();
        if n < BASIS_REJECT_NORM {
            continue;
        }
        w /= n;
        vectors.push(TangentVector {
            anchor: x.clone(),
            data: w,
        });
    }
    Ok(TangentBasis {
        anchor: x.clone(),
        vectors,
        seed,
    })
}

/// Random point: Gaussian vector for Euclidean space, uniform on spheres and
/// oblique rows, random orthonormal factors with singular values in `[0.5, 1.5)`
/// for fixed rank.
pub fn random_point(kind: ManifoldKind, seed: u64) -> Result<Point> {
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = kind.ambient_shape();
    match kind {
        ManifoldKind::Euclidean(_) => Ok(Point::from_ambient_unchecked(
            kind,
            gaussian_matrix(&mut rng, r, c),
        )),
        ManifoldKind::Sphere(_) | ManifoldKind::Oblique(..) => loop {
            if let Ok(p) = Point::project_onto(kind, gaussian_matrix(&mut rng, r, c)) {
                return Ok(p);
            }
        },
        ManifoldKind::FixedRank(q, s, p) => {
            let u = gaussian_matrix(&mut rng, q, p).qr().q();
            let v = gaussian_matrix(&mut rng, s, p).qr().q();
            let mut sv: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..1.5)).collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            Point::from_factors(
                kind,
                Factors {
                    u,
                    s: DVector::from_vec(sv),
                    v,
                },
            )
        }
    }
}
