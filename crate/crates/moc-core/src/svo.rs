//! Semantic view-order constraint.
//!
//! A sequence of view embeddings, ordered by azimuth away from a frontal
//! reference, should become monotonically less similar to that reference.
//! The penalty is a margin hinge over consecutive cosine similarities,
//!
//! ```text
//! R = Σ_{i} max(0, s_{i+1} − s_i + δ),   s_j = cos(u_j, u_ref)
//! ```
//!
//! so it is non-zero exactly when some adjacent pair violates the ordering
//! by more than the slack, and its gradient touches only the embeddings of
//! violating pairs.
//!
//! Also hosts the clean-latent estimate `ẑ₀ = (z_t − σ·ε̂)/α` used to decode
//! the embeddings from a noisy optimization state.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default hinge margin on consecutive similarity drops.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Diffusion coefficients `(α, σ)` at one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScheduleCoeffs {
    alpha: f64,
    sigma: f64,
}

impl NoiseScheduleCoeffs {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidCoefficient(format!(
                "alpha must be finite and positive, got {alpha}"
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidCoefficient(format!(
                "sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { alpha, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// `ẑ₀ = (z_t − σ·ε̂)/α`, elementwise.
pub fn estimate_clean_latent(
    z_t: &DVector<f64>,
    eps_pred: &DVector<f64>,
    coeffs: &NoiseScheduleCoeffs,
) -> Result<DVector<f64>> {
    if z_t.len() != eps_pred.len() {
        return Err(Error::DimMismatch {
            expected: z_t.len(),
            got: eps_pred.len(),
            context: "estimate_clean_latent noise prediction",
        });
    }
    Ok((z_t - eps_pred * coeffs.sigma) / coeffs.alpha)
}

/// Azimuth-ordered view embeddings with the frontal (azimuth 0) view first.
///
/// Raw vectors are retained (similarities normalize on the fly), so callers
/// can treat the stored embeddings as the actual optimization variables.
#[derive(Debug, Clone)]
pub struct ViewEmbeddingSequence {
    azimuths: Vec<f64>,
    embeddings: Vec<DVector<f64>>,
    norms: Vec<f64>,
}

impl ViewEmbeddingSequence {
    /// Accepts rows in any order; sorts by azimuth. Exactly one row must sit
    /// at azimuth 0 — that row becomes the reference.
    pub fn new(azimuths: Vec<f64>, embeddings: Vec<DVector<f64>>) -> Result<Self> {
        if azimuths.len() != embeddings.len() {
            return Err(Error::DimMismatch {
                expected: azimuths.len(),
                got: embeddings.len(),
                context: "embedding sequence rows",
            });
        }
        if embeddings.len() < 2 {
            return Err(Error::InvalidInput("need at least two view embeddings".into()));
        }
        let dim = embeddings[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("embeddings must be non-empty vectors".into()));
        }
        for (idx, e) in embeddings.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: e.len(),
                    context: "embedding dimension",
                });
            }
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "embedding {idx} contains non-finite values"
                )));
            }
            if e.norm() == 0.0 {
                return Err(Error::DegenerateEmbedding { index: idx });
            }
        }
        if azimuths.iter().any(|a| !(0.0..360.0).contains(a)) {
            return Err(Error::InvalidInput("azimuths must lie in [0, 360)".into()));
        }
        if azimuths.iter().filter(|&&a| a == 0.0).count() != 1 {
            return Err(Error::MissingReference(
                "sequence must contain exactly one azimuth-0 reference row".into(),
            ));
        }

        let mut order: Vec<usize> = (0..azimuths.len()).collect();
        order.sort_by(|&a, &b| azimuths[a].total_cmp(&azimuths[b]));
        for pair in order.windows(2) {
            if azimuths[pair[0]] == azimuths[pair[1]] {
                return Err(Error::InvalidInput(format!(
                    "duplicate azimuth {}",
                    azimuths[pair[0]]
                )));
            }
        }
        let azimuths: Vec<f64> = order.iter().map(|&i| azimuths[i]).collect();
        let embeddings: Vec<DVector<f64>> = order.iter().map(|&i| embeddings[i].clone()).collect();
        let norms = embeddings.iter().map(|e| e.norm()).collect();
        Ok(Self { azimuths, embeddings, norms })
    }

    pub fn len_k(&self) -> usize {
        self.embeddings.len()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn embeddings(&self) -> &[DVector<f64>] {
        &self.embeddings
    }

    pub fn reference(&self) -> &DVector<f64> {
        &self.embeddings[0]
    }
}

/// Cosine of each embedding against the frontal reference, in azimuth order.
/// The first entry is the reference against itself (1 up to round-off).
pub fn similarities(seq: &ViewEmbeddingSequence) -> Vec<f64> {
    let r = &seq.embeddings[0];
    let rn = seq.norms[0];
    seq.embeddings
        .iter()
        .zip(&seq.norms)
        .map(|(e, n)| e.dot(r) / (n * rn))
        .collect()
}

/// Loss value with its similarity profile.
#[derive(Debug, Clone)]
pub struct SvoResult {
    pub loss: f64,
    pub sims: Vec<f64>,
    /// Which consecutive pairs have a strictly positive hinge term.
    pub active: Vec<bool>,
}

impl SvoResult {
    /// Smallest consecutive similarity drop `s_i − s_{i+1}`; the ordering is
    /// satisfied with full slack exactly when this is ≥ δ.
    pub fn min_gap(&self) -> f64 {
        self.sims
            .windows(2)
            .map(|p| p[0] - p[1])
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_margin(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 2.0 {
        return Err(Error::InvalidMargin { delta });
    }
    Ok(())
}

/// `Σ_i max(0, s_{i+1} − s_i + δ)` over consecutive views. A hinge exactly
/// at zero is treated as inactive (one-sided subgradient).
pub fn svo_loss(seq: &ViewEmbeddingSequence, delta: f64) -> Result<SvoResult> {
    check_margin(delta)?;
    let sims = similarities(seq);
    let mut loss = 0.0;
    let mut active = Vec::with_capacity(sims.len() - 1);
    for pair in sims.windows(2) {
        let term = pair[1] - pair[0] + delta;
        if term > 0.0 {
            loss += term;
            active.push(true);
        } else {
            active.push(false);
        }
    }
    Ok(SvoResult { loss, sims, active })
}

/// Loss plus gradients with respect to every stored embedding (index 0 is
/// the reference).
#[derive(Debug, Clone)]
pub struct SvoGradient {
    pub result: SvoResult,
    pub grads: Vec<DVector<f64>>,
}

/// Analytic gradient of [`svo_loss`].
///
/// With hinge coefficients `g_j = Σ_{active i} ([j = i+1] − [j = i])` and
/// unit vectors `v_j`:
///
/// * `∂R/∂u_j = g_j · (v_ref − s_j·v_j)/‖u_j‖` for `j ≥ 1`;
/// * `∂R/∂u_ref = Σ_{j≥1} g_j · (v_j − s_j·v_ref)/‖u_ref‖` — the `s_0` term
///   drops out because `cos(u, u) ≡ 1`.
pub fn svo_grad(seq: &ViewEmbeddingSequence, delta: f64) -> Result<SvoGradient> {
    let result = svo_loss(seq, delta)?;
    let k = seq.len_k();
    let mut coeff = vec![0.0; k];
    for (i, &on) in result.active.iter().enumerate() {
        if on {
            coeff[i + 1] += 1.0;
            coeff[i] -= 1.0;
        }
    }

    let v_ref = seq.embeddings[0].clone() / seq.norms[0];
    let mut grads = vec![DVector::zeros(seq.dim()); k];
    for j in 1..k {
        if coeff[j] == 0.0 {
            continue;
        }
        let v_j = &seq.embeddings[j] / seq.norms[j];
        let s_j = result.sims[j];
        grads[j] = (&v_ref - &v_j * s_j) * (coeff[j] / seq.norms[j]);
        grads[0] += (&v_j - &v_ref * s_j) * (coeff[j] / seq.norms[0]);
    }
    Ok(SvoGradient { result, grads })
}
