//! Generation of elliptical and contaminated datasets with deterministic,
//! stream-addressed randomness.
//!
//! Every sampling routine draws from a ChaCha12 generator addressed by a
//! [`StreamKey`]: the key's `master_seed` selects the cipher key and the pair
//! `(stream, role)` selects the cipher stream. Realizations therefore own
//! disjoint streams and can be generated in any order, or concurrently, with
//! bit-identical results. Within one key the sphere/Gaussian directions and
//! the scalar multipliers come from separate roles, so two datasets sharing a
//! key but differing in the scalar law share their direction draws exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Symmetry tolerance for `ShapeMatrix` construction, absolute per entry.
const SHAPE_SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance on `trace = p`.
const SHAPE_TRACE_TOL: f64 = 1e-8;
/// A shape matrix may have eigenvalues down to `-1e-10 * |S|` before it is
/// rejected as indefinite.
const SHAPE_PSD_TOL: f64 = 1e-10;
/// Redraw attempts before a degenerate model is reported.
const MAX_REDRAWS: usize = 10_000;

/// Symmetric positive-semidefinite matrix normalized to trace `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMatrix {
    mat: DMatrix<f64>,
}

impl ShapeMatrix {
    /// Validates symmetry (1e-12 per entry), positive semidefiniteness and
    /// the trace-`p` normalization (1e-8 relative).
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let p = mat.nrows();
        if p == 0 || mat.ncols() != p {
            return Err(Error::InvalidShape(format!(
                "expected a square nonempty matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let asym = linalg::max_asymmetry(&mat);
        if asym > SHAPE_SYMMETRY_TOL {
            return Err(Error::InvalidShape(format!(
                "asymmetry {asym:.3e} above 1e-12"
            )));
        }
        let trace = mat.trace();
        if (trace - p as f64).abs() > SHAPE_TRACE_TOL * p as f64 {
            return Err(Error::InvalidShape(format!(
                "trace {trace} differs from p = {p}"
            )));
        }
        let eigen = SymmetricEigen::new(mat.clone());
        let max_abs = eigen.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let min = eigen.eigenvalues.min();
        if min < -SHAPE_PSD_TOL * max_abs {
            return Err(Error::InvalidShape(format!(
                "smallest eigenvalue {min:.3e} below the PSD tolerance"
            )));
        }
        Ok(Self { mat })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            mat: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Lower Cholesky factor, used as the model's matrix square root. Fails
    /// when the shape is not strictly positive definite.
    pub(crate) fn sqrt_factor(&self) -> Result<DMatrix<f64>> {
        nalgebra::Cholesky::new(self.mat.clone())
            .map(|c| c.unpack())
            .ok_or_else(|| Error::InvalidShape("shape is not positive definite".into()))
    }
}

/// Direction law for the elliptical draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMode {
    /// Uniform on the unit sphere.
    SphereUniform,
    /// Standard Gaussian vector (the scale-mixture form).
    StandardGaussian,
}

/// Law of the scalar multiplier `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleLaw {
    /// `u = 1`; with Gaussian directions the samples are exactly Gaussian.
    #[serde(rename = "gaussian", alias = "constant")]
    Constant,
    /// Standard Laplace multiplier, heavy tailed with all moments finite.
    Laplace,
    /// Standard Cauchy multiplier; no mean or covariance exists.
    Cauchy,
}

impl ScaleLaw {
    pub fn name(&self) -> &'static str {
        match self {
            ScaleLaw::Constant => "gaussian",
            ScaleLaw::Laplace => "laplace",
            ScaleLaw::Cauchy => "cauchy",
        }
    }
}

/// Elliptical model `x = mu + u * S^{1/2} * xi`.
#[derive(Debug, Clone)]
pub struct EllipticalModel {
    pub shape: ShapeMatrix,
    pub xi_mode: XiMode,
    pub u_law: ScaleLaw,
    pub location: DVector<f64>,
}

impl EllipticalModel {
    /// Zero-location model.
    pub fn centered(shape: ShapeMatrix, xi_mode: XiMode, u_law: ScaleLaw) -> Self {
        let p = shape.dim();
        Self {
            shape,
            xi_mode,
            u_law,
            location: DVector::zeros(p),
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "elliptical p={} xi={:?} u={}",
            self.shape.dim(),
            self.xi_mode,
            self.u_law.name()
        )
    }
}

/// Record of how a dataset was generated, carried for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenMeta {
    pub master_seed: u64,
    pub stream: u64,
    pub descriptor: String,
}

/// A batch of `n` samples in `R^p`, stored column-wise, with optional
/// outlier labels (`true` marks an outlier).
#[derive(Debug, Clone)]
pub struct DataSet {
    samples: DMatrix<f64>,
    labels: Option<Vec<bool>>,
    meta: Option<GenMeta>,
}

impl DataSet {
    /// Wraps a `p x n` matrix whose columns are samples. Rejects exact zero
    /// columns, which carry no directional information.
    pub fn from_columns(samples: DMatrix<f64>) -> Result<Self> {
        if samples.ncols() == 0 || samples.nrows() == 0 {
            return Err(Error::EmptyInput("dataset without samples"));
        }
        for (i, col) in samples.column_iter().enumerate() {
            if col.iter().all(|v| *v == 0.0) {
                return Err(Error::ZeroSample { index: i });
            }
        }
        Ok(Self {
            samples,
            labels: None,
            meta: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                left: labels.len(),
                right: self.n(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: GenMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn p(&self) -> usize {
        self.samples.nrows()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn meta(&self) -> Option<&GenMeta> {
        self.meta.as_ref()
    }

    /// Dataset restricted to the given sample indices; labels follow.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset of no samples"));
        }
        let mut m = DMatrix::zeros(self.p(), indices.len());
        for (k, &i) in indices.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::DimensionMismatch {
                    left: i,
                    right: self.n(),
                });
            }
            m.set_column(k, &self.samples.column(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(Self {
            samples: m,
            labels,
            meta: self.meta.clone(),
        })
    }
}

/// Roles split one realization's randomness into independent substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    /// Directions of the main (inlier) samples.
    Xi = 0,
    /// Scalar multipliers of the main samples.
    Scale = 1,
    /// Random orthogonal bases.
    Basis = 2,
    /// Diagonal draw for the outlier shape.
    OutlierShape = 3,
    /// Directions of outlier samples.
    OutlierXi = 4,
    /// Scalar multipliers of outlier samples.
    OutlierScale = 5,
    /// Permutation mixing inliers and outliers.
    Shuffle = 6,
}

const ROLE_COUNT: u64 = 8;

/// Address of one deterministic random stream: `(master_seed, stream)`.
///
/// The master seed keys the generator; the stream index (typically the
/// realization index) selects a disjoint ChaCha stream, so realizations can
/// be computed independently and in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        debug_assert!(stream < u64::MAX / ROLE_COUNT, "stream index too large");
        Self {
            master_seed,
            stream,
        }
    }

    /// ChaCha12 generator for one role of this stream.
    pub fn rng(&self, role: StreamRole) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream * ROLE_COUNT + role as u64);
        rng
    }
}

/// Uniform draw from the open interval (0, 1), safe to feed into logarithms
/// and tangents.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

fn draw_scale<R: Rng + ?Sized>(law: ScaleLaw, rng: &mut R) -> f64 {
    match law {
        ScaleLaw::Constant => 1.0,
        ScaleLaw::Laplace => {
            let v = open_unit(rng) - 0.5;
            -v.signum() * (1.0 - 2.0 * v.abs()).ln()
        }
        ScaleLaw::Cauchy => (std::f64::consts::PI * (open_unit(rng) - 0.5)).tan(),
    }
}

fn draw_direction<R: Rng + ?Sized>(p: usize, mode: XiMode, rng: &mut R) -> DVector<f64> {
    loop {
        let mut xi = DVector::zeros(p);
        for i in 0..p {
            xi[i] = rng.sample(StandardNormal);
        }
        match mode {
            XiMode::StandardGaussian => return xi,
            XiMode::SphereUniform => {
                let norm = xi.norm();
                if norm > 0.0 {
                    return xi / norm;
                }
            }
        }
    }
}

/// Shape matrix with entries `rho^{|i - j|}`; the standard banded-decay
/// benchmark shape. Requires `|rho| < 1`.
pub fn ar_shape(p: usize, rho: f64) -> Result<ShapeMatrix> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "|rho| = {} must be below 1 for positive definiteness",
            rho.abs()
        )));
    }
    let mat = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
    ShapeMatrix::new(mat)
}

fn sample_columns<R: Rng + ?Sized>(
    model: &EllipticalModel,
    n: usize,
    rng_xi: &mut R,
    rng_u: &mut R,
) -> Result<DMatrix<f64>> {
    let p = model.shape.dim();
    let l = model.shape.sqrt_factor()?;
    let mut out = DMatrix::zeros(p, n);
    for j in 0..n {
        let mut ok = false;
        for _ in 0..MAX_REDRAWS {
            let xi = draw_direction(p, model.xi_mode, rng_xi);
            let u = draw_scale(model.u_law, rng_u);
            let x = &model.location + &l * xi * u;
            if x.iter().any(|v| *v != 0.0) {
                out.set_column(j, &x);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::InvalidArgument(
                "model keeps producing exact zero samples".into(),
            ));
        }
    }
    Ok(out)
}

/// Draws `n` i.i.d. samples `x = mu + u * S^{1/2} * xi`. Exact zero samples
/// are redrawn so the returned set always has `n` usable samples.
pub fn sample_elliptical(model: &EllipticalModel, n: usize, key: StreamKey) -> Result<DataSet> {
    if n == 0 {
        return Err(Error::EmptyInput("requested zero samples"));
    }
    let mut rng_xi = key.rng(StreamRole::Xi);
    let mut rng_u = key.rng(StreamRole::Scale);
    let cols = sample_columns(model, n, &mut rng_xi, &mut rng_u)?;
    Ok(DataSet::from_columns(cols)?.with_meta(GenMeta {
        master_seed: key.master_seed,
        stream: key.stream,
        descriptor: model.descriptor(),
    }))
}

/// Consecutive pairwise differences `x_i = raw_{2i} - raw_{2i-1}`, which
/// remove an unknown location vector at the cost of halving the sample count.
pub fn pair_differences(raw: &DataSet) -> Result<DataSet> {
    let count = raw.n();
    if !count.is_multiple_of(2) {
        return Err(Error::OddPairCount { count });
    }
    let n = count / 2;
    let mut out = DMatrix::zeros(raw.p(), n);
    for i in 0..n {
        let diff = raw.samples().column(2 * i + 1) - raw.samples().column(2 * i);
        if diff.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroSample { index: i });
        }
        out.set_column(i, &diff);
    }
    let mut ds = DataSet::from_columns(out)?;
    if let Some(meta) = raw.meta() {
        ds = ds.with_meta(GenMeta {
            master_seed: meta.master_seed,
            stream: meta.stream,
            descriptor: format!("{} (pairwise differences)", meta.descriptor),
        });
    }
    Ok(ds)
}

/// Orthogonal matrix distributed with Haar measure: QR of an i.i.d. standard
/// Gaussian matrix with the R-diagonal sign correction.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(p >= 1, "dimension must be positive");
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            g[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Diagonal profile of the outlier shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierDiagSpec {
    /// I.i.d. uniform diagonal entries, producing diffuse outliers. The
    /// benchmark configuration draws from `[1, 5]`.
    Uniform { lo: f64, hi: f64 },
    /// Diagonal `(p, p/2, 1, ..., 1)`: outliers near a random 2-d subspace.
    Spiked,
}

impl OutlierDiagSpec {
    /// The diffuse benchmark profile with entries in `[1, 5]`.
    pub fn uniform_1_5() -> Self {
        OutlierDiagSpec::Uniform { lo: 1.0, hi: 5.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutlierDiagSpec::Uniform { .. } => "uniform",
            OutlierDiagSpec::Spiked => "spiked",
        }
    }
}

/// Random outlier shape `U (p D / tr D) U^T` with `U` Haar-orthogonal and `D`
/// drawn from `spec`. The trace-p normalization is restored exactly after the
/// similarity transform.
pub fn outlier_shape<R: Rng + ?Sized>(
    p: usize,
    spec: &OutlierDiagSpec,
    rng: &mut R,
) -> Result<ShapeMatrix> {
    let d: Vec<f64> = match spec {
        OutlierDiagSpec::Uniform { lo, hi } => {
            let bounds_valid = hi > lo && *lo > 0.0;
            if !bounds_valid {
                return Err(Error::InvalidArgument(format!(
                    "uniform diagonal bounds ({lo}, {hi}) must satisfy 0 < lo < hi"
                )));
            }
            (0..p)
                .map(|_| lo + (hi - lo) * rng.random::<f64>())
                .collect()
        }
        OutlierDiagSpec::Spiked => {
            if p < 2 {
                return Err(Error::InvalidArgument("spiked profile needs p >= 2".into()));
            }
            let mut d = vec![1.0; p];
            d[0] = p as f64;
            d[1] = p as f64 / 2.0;
            d
        }
    };
    let trace: f64 = d.iter().sum();
    let scaled = DVector::from_iterator(p, d.iter().map(|v| p as f64 * v / trace));
    let u = haar_orthogonal(p, rng);
    let mut s = &u * DMatrix::from_diagonal(&scaled) * u.transpose();
    linalg::symmetrize(&mut s);
    let t = s.trace();
    s *= p as f64 / t;
    ShapeMatrix::new(s)
}

/// Mixture of inliers and freshly shaped outliers.
#[derive(Debug, Clone)]
pub struct ContaminationSpec {
    /// Fraction of outliers in `[0, 1)`; the outlier count is `round(eps * n)`.
    pub epsilon: f64,
    pub inlier: EllipticalModel,
    pub outlier_diag: OutlierDiagSpec,
}

/// Draws a labeled `n`-sample contaminated dataset: `round(eps * n)` outliers
/// from an elliptical law with a freshly drawn outlier shape (direction and
/// scale laws inherited from the inlier model), shuffled together with the
/// inliers. Labels mark outliers with `true` and survive the shuffle.
pub fn contaminate(spec: &ContaminationSpec, n: usize, key: StreamKey) -> Result<DataSet> {
    if !(0.0..1.0).contains(&spec.epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {} outside [0, 1)",
            spec.epsilon
        )));
    }
    if n == 0 {
        return Err(Error::EmptyInput("requested zero samples"));
    }
    let n_out = (spec.epsilon * n as f64).round() as usize;
    if n_out > n {
        return Err(Error::InvalidArgument("outlier count exceeds n".into()));
    }
    let n_in = n - n_out;
    let p = spec.inlier.shape.dim();

    let mut cols = DMatrix::zeros(p, n);
    let mut labels = vec![false; n];
    if n_in > 0 {
        let mut rng_xi = key.rng(StreamRole::Xi);
        let mut rng_u = key.rng(StreamRole::Scale);
        let inlier_cols = sample_columns(&spec.inlier, n_in, &mut rng_xi, &mut rng_u)?;
        cols.columns_mut(0, n_in).copy_from(&inlier_cols);
    }
    if n_out > 0 {
        let mut rng_shape = key.rng(StreamRole::OutlierShape);
        let out_shape = outlier_shape(p, &spec.outlier_diag, &mut rng_shape)?;
        let out_model =
            EllipticalModel::centered(out_shape, spec.inlier.xi_mode, spec.inlier.u_law);
        let mut rng_xi = key.rng(StreamRole::OutlierXi);
        let mut rng_u = key.rng(StreamRole::OutlierScale);
        let outlier_cols = sample_columns(&out_model, n_out, &mut rng_xi, &mut rng_u)?;
        cols.columns_mut(n_in, n_out).copy_from(&outlier_cols);
        for label in labels.iter_mut().skip(n_in) {
            *label = true;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut key.rng(StreamRole::Shuffle));
    let mut shuffled = DMatrix::zeros(p, n);
    let mut shuffled_labels = vec![false; n];
    for (dst, &src) in order.iter().enumerate() {
        shuffled.set_column(dst, &cols.column(src));
        shuffled_labels[dst] = labels[src];
    }

    Ok(DataSet::from_columns(shuffled)?
        .with_labels(shuffled_labels)?
        .with_meta(GenMeta {
            master_seed: key.master_seed,
            stream: key.stream,
            descriptor: format!(
                "contaminated eps={} outliers={} {}",
                spec.epsilon,
                spec.outlier_diag.name(),
                spec.inlier.descriptor()
            ),
        }))
}
