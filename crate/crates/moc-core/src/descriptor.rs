//! Extended SPD descriptor built from multi-view feature maps.
//!
//! Pipeline: 4-channel feature maps are compressed to grayscale by a fixed
//! weight vector, pooled into non-overlapping patch samples across all views,
//! reduced to first and second moments, and assembled into the block matrix
//!
//! ```text
//! C = | Σ + εI + μμᵀ   μ |
//!     | μᵀ             1 |
//! ```
//!
//! which is congruent to `diag(Σ + εI, 1)`, hence strictly positive definite
//! with `det(C) = det(Σ + εI)`.
//!
//! Each forward stage has a matching adjoint so a loss gradient with respect
//! to `C` can be pulled back to the feature maps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spd::{SpdMatrix, SymMatrix};

/// Tikhonov constant added to the covariance (and reused by the distance
/// regularizer).
pub const DEFAULT_EPS: f64 = 1e-6;

/// Patch side for sample collection; D = side² = 16.
pub const DEFAULT_PATCH_SIDE: usize = 4;

/// A dense feature map indexed `(channel, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeError("feature map dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeError(format!(
                "feature map data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("feature map contains non-finite values".into()));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Azimuth-tagged stack of same-shape feature maps.
#[derive(Debug, Clone)]
pub struct FeatureMapStack {
    views: Vec<FeatureMap>,
    azimuths: Vec<f64>,
}

impl FeatureMapStack {
    pub fn new(views: Vec<FeatureMap>, azimuths: Vec<f64>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidInput("feature map stack must contain at least one view".into()));
        }
        if views.len() != azimuths.len() {
            return Err(Error::DimMismatch {
                expected: views.len(),
                got: azimuths.len(),
                context: "stack azimuth count",
            });
        }
        let (c, h, w) = (views[0].channels, views[0].height, views[0].width);
        if views.iter().any(|v| v.channels != c || v.height != h || v.width != w) {
            return Err(Error::ShapeError("all maps in a stack must share one shape".into()));
        }
        for pair in azimuths.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidInput("azimuths must be strictly increasing".into()));
            }
        }
        if azimuths.iter().any(|&a| !(0.0..360.0).contains(&a)) {
            return Err(Error::InvalidInput("azimuths must lie in [0, 360)".into()));
        }
        Ok(Self { views, azimuths })
    }

    pub fn views(&self) -> &[FeatureMap] {
        &self.views
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }
}

/// Fixed 4-channel weighting vector, normalized to sum 1 on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuminanceWeights {
    w: [f64; 4],
}

impl LuminanceWeights {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("luminance weights must be finite".into()));
        }
        let sum: f64 = w.iter().sum();
        if sum == 0.0 {
            return Err(Error::InvalidInput("luminance weights must not sum to zero".into()));
        }
        Ok(Self { w: [w[0] / sum, w[1] / sum, w[2] / sum, w[3] / sum] })
    }

    pub fn values(&self) -> [f64; 4] {
        self.w
    }
}

impl Default for LuminanceWeights {
    fn default() -> Self {
        Self { w: [0.25; 4] }
    }
}

/// Single-channel map produced by luminance compression.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `g[y][x] = Σ_c w[c] · map[c][y][x]`.
pub fn luminance_compress(map: &FeatureMap, w: &LuminanceWeights) -> Result<GrayMap> {
    if map.channels != 4 {
        return Err(Error::DimMismatch {
            expected: 4,
            got: map.channels,
            context: "luminance_compress channels",
        });
    }
    let mut out = GrayMap::zeros(map.height, map.width);
    for y in 0..map.height {
        for x in 0..map.width {
            let mut acc = 0.0;
            for (c, wc) in w.w.iter().enumerate() {
                acc += wc * map.at(c, y, x);
            }
            out.data[y * map.width + x] = acc;
        }
    }
    Ok(out)
}

/// Adjoint of [`luminance_compress`]: spreads a grayscale gradient back over
/// the four channels, scaled by the weights.
pub fn luminance_compress_adjoint(grad: &GrayMap, w: &LuminanceWeights) -> FeatureMap {
    let mut out = FeatureMap::zeros(4, grad.height, grad.width);
    for c in 0..4 {
        for y in 0..grad.height {
            for x in 0..grad.width {
                out.data[(c * grad.height + y) * grad.width + x] = w.w[c] * grad.at(y, x);
            }
        }
    }
    out
}

/// Column sample set `X ∈ R^{D×M}`: each column is one flattened patch.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    columns: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if columns.nrows() == 0 || columns.ncols() == 0 {
            return Err(Error::ShapeError("sample matrix must be non-empty".into()));
        }
        Ok(Self { columns })
    }

    pub fn dim_d(&self) -> usize {
        self.columns.nrows()
    }

    pub fn count_m(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }
}

/// Cuts every map into non-overlapping `d×d` patches and stacks them as
/// columns: view-major, then row-major over the patch grid, each patch
/// flattened row-major. `D = d²`, `M = N·(H/d)·(W/d)`.
pub fn collect_patches(grays: &[GrayMap], d: usize) -> Result<SampleMatrix> {
    if grays.is_empty() {
        return Err(Error::InvalidInput("no grayscale maps to collect patches from".into()));
    }
    if d == 0 {
        return Err(Error::ShapeError("patch side must be positive".into()));
    }
    let (h, w) = (grays[0].height, grays[0].width);
    if grays.iter().any(|g| g.height != h || g.width != w) {
        return Err(Error::ShapeError("all grayscale maps must share one shape".into()));
    }
    if h % d != 0 || w % d != 0 {
        return Err(Error::ShapeError(format!(
            "map size {h}x{w} is not divisible by patch side {d}"
        )));
    }
    let (ph, pw) = (h / d, w / d);
    let m = grays.len() * ph * pw;
    let mut columns = DMatrix::zeros(d * d, m);
    let mut col = 0;
    for g in grays {
        for py in 0..ph {
            for px in 0..pw {
                for dy in 0..d {
                    for dx in 0..d {
                        columns[(dy * d + dx, col)] = g.at(py * d + dy, px * d + dx);
                    }
                }
                col += 1;
            }
        }
    }
    SampleMatrix::new(columns)
}

/// Adjoint of [`collect_patches`]: scatters per-column gradients back to
/// per-view grayscale gradients. Patches do not overlap, so this is a pure
/// relayout.
pub fn collect_patches_adjoint(
    grad_columns: &DMatrix<f64>,
    n_views: usize,
    height: usize,
    width: usize,
    d: usize,
) -> Result<Vec<GrayMap>> {
    let (ph, pw) = (height / d, width / d);
    if grad_columns.nrows() != d * d || grad_columns.ncols() != n_views * ph * pw {
        return Err(Error::ShapeError("gradient shape does not match patch layout".into()));
    }
    let mut out = vec![GrayMap::zeros(height, width); n_views];
    let mut col = 0;
    for g in out.iter_mut() {
        for py in 0..ph {
            for px in 0..pw {
                for dy in 0..d {
                    for dx in 0..d {
                        g.data[(py * d + dy) * width + px * d + dx] = grad_columns[(dy * d + dx, col)];
                    }
                }
                col += 1;
            }
        }
    }
    Ok(out)
}

/// First and second moments of a sample set.
#[derive(Debug, Clone)]
pub struct MomentPair {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

/// Mean and population covariance (divisor `M`, not `M−1`: the descriptor is
/// a distribution summary, not an estimator).
///
/// Accumulation runs over a canonically sorted copy of the columns, so the
/// result is bit-identical under any reordering of the samples — this is what
/// makes descriptor view-permutation invariance exact rather than
/// approximate.
pub fn mean_cov(x: &SampleMatrix) -> Result<MomentPair> {
    let (d, m) = (x.dim_d(), x.count_m());
    if m < 2 {
        return Err(Error::InsufficientSamples { got: m, need: 2 });
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        for i in 0..d {
            match x.columns[(i, a)].total_cmp(&x.columns[(i, b)]) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });

    let mut mean = DVector::zeros(d);
    for &k in &order {
        mean += x.columns.column(k);
    }
    mean /= m as f64;

    let mut cov = DMatrix::zeros(d, d);
    for &k in &order {
        let centered = x.columns.column(k) - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= m as f64;

    Ok(MomentPair { mean, cov: SymMatrix::new(cov)? })
}

/// Adjoint of [`mean_cov`]: pulls gradients on `(μ, Σ)` back to the sample
/// columns, `∇xₖ = (2/M)·∇Σ·(xₖ − μ) + (1/M)·∇μ`.
pub fn mean_cov_adjoint(
    x: &SampleMatrix,
    moments: &MomentPair,
    grad_mean: &DVector<f64>,
    grad_cov: &SymMatrix,
) -> DMatrix<f64> {
    let (d, m) = (x.dim_d(), x.count_m());
    let mut out = DMatrix::zeros(d, m);
    let scale_cov = 2.0 / m as f64;
    let scale_mean = 1.0 / m as f64;
    for k in 0..m {
        let centered = x.columns.column(k) - &moments.mean;
        let col = grad_cov.matrix() * centered * scale_cov + grad_mean * scale_mean;
        out.set_column(k, &col);
    }
    out
}

/// The regularized block descriptor with its Tikhonov constant.
#[derive(Debug, Clone)]
pub struct ExtendedDescriptor {
    c: SpdMatrix,
    eps_used: f64,
}

impl ExtendedDescriptor {
    pub fn spd(&self) -> &SpdMatrix {
        &self.c
    }

    pub fn eps_used(&self) -> f64 {
        self.eps_used
    }

    /// Sample dimension D; the descriptor itself is (D+1)×(D+1).
    pub fn dim_d(&self) -> usize {
        self.c.dim() - 1
    }

    /// `(det C, det Σ_reg)` — equal up to round-off by the Schur identity.
    pub fn schur_det_pair(&self) -> (f64, f64) {
        let det_c: f64 = self.c.factorization().eigvals.iter().product();
        let d = self.dim_d();
        let m = self.c.matrix();
        let mu = m.view((0, d), (d, 1)).into_owned();
        let sigma_reg = m.view((0, 0), (d, d)) - &mu * mu.transpose();
        let fact = crate::spd::sym_eig(&SymMatrix::new(sigma_reg).expect("finite block"))
            .expect("eigendecomposition of extracted block");
        (det_c, fact.eigvals.iter().product())
    }
}

/// Assembles `C = [[Σ+εI+μμᵀ, μ],[μᵀ, 1]]` and verifies positive
/// definiteness.
pub fn extended_spd(m: &MomentPair, eps: f64) -> Result<ExtendedDescriptor> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidInput(format!("descriptor eps must be positive, got {eps}")));
    }
    if m.mean.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("moments contain non-finite values".into()));
    }
    let d = m.mean.len();
    if m.cov.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: m.cov.dim(),
            context: "extended_spd covariance dim",
        });
    }
    let mut c = DMatrix::zeros(d + 1, d + 1);
    let top_left = m.cov.matrix() + DMatrix::identity(d, d) * eps + &m.mean * m.mean.transpose();
    c.view_mut((0, 0), (d, d)).copy_from(&top_left);
    for i in 0..d {
        c[(i, d)] = m.mean[i];
        c[(d, i)] = m.mean[i];
    }
    c[(d, d)] = 1.0;
    Ok(ExtendedDescriptor { c: SpdMatrix::new(c)?, eps_used: eps })
}

/// Adjoint of [`extended_spd`]: splits a gradient on the block matrix into
/// gradients on mean and covariance. With `G = [[G₁₁, g₁₂],[g₁₂ᵀ, ·]]`,
/// `∇Σ = G₁₁` and `∇μ = 2·G₁₁·μ + 2·g₁₂`.
pub fn extended_spd_adjoint(m: &MomentPair, grad_c: &SymMatrix) -> (DVector<f64>, SymMatrix) {
    let d = m.mean.len();
    let g = grad_c.matrix();
    let g11 = g.view((0, 0), (d, d)).into_owned();
    let g12 = g.view((0, d), (d, 1)).into_owned();
    let grad_mean = (&g11 * &m.mean + g12) * 2.0;
    let grad_cov = SymMatrix::new(g11).expect("finite gradient block");
    (grad_mean, grad_cov)
}

/// Full pipeline: compress every view, pool patches, take moments, assemble
/// the descriptor.
pub fn build_descriptor(
    stack: &FeatureMapStack,
    w: &LuminanceWeights,
    d: usize,
    eps: f64,
) -> Result<ExtendedDescriptor> {
    let grays = stack
        .views()
        .iter()
        .map(|v| luminance_compress(v, w))
        .collect::<Result<Vec<_>>>()?;
    let samples = collect_patches(&grays, d)?;
    let moments = mean_cov(&samples)?;
    extended_spd(&moments, eps)
}

/// Backward pass of [`build_descriptor`]: given a gradient with respect to
/// the descriptor entries, returns per-view gradients on the feature maps.
pub fn build_descriptor_backward(
    stack: &FeatureMapStack,
    w: &LuminanceWeights,
    d: usize,
    grad_c: &SymMatrix,
) -> Result<Vec<FeatureMap>> {
    let grays = stack
        .views()
        .iter()
        .map(|v| luminance_compress(v, w))
        .collect::<Result<Vec<_>>>()?;
    let samples = collect_patches(&grays, d)?;
    let moments = mean_cov(&samples)?;
    let (grad_mean, grad_cov) = extended_spd_adjoint(&moments, grad_c);
    let grad_columns = mean_cov_adjoint(&samples, &moments, &grad_mean, &grad_cov);
    let grad_grays = collect_patches_adjoint(
        &grad_columns,
        stack.views().len(),
        grays[0].height(),
        grays[0].width(),
        d,
    )?;
    Ok(grad_grays.iter().map(|g| luminance_compress_adjoint(g, w)).collect())
}
