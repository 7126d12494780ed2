//! Deterministic synthetic optimization harness.
//!
//! A toy scene couples the two regularizers to concrete optimization
//! variables:
//!
//! * a texture vector rendered through frozen random linear operators into
//!   per-view feature maps, whose pooled descriptor is pulled toward a
//!   frozen target descriptor by the log-Euclidean term;
//! * a set of view embeddings penalized by the ordering hinge whenever a
//!   view farther from the front looks more like the frontal reference.
//!
//! With `janus_init` the back view starts as a near-copy of the frontal
//! embedding — the classic multi-face failure — so the ordering term begins
//! with a large active violation. Plain gradient descent under scheduled
//! weights drives both terms; the two variable groups interact only through
//! the shared schedule, which keeps the dynamics easy to reason about and
//! bit-reproducible.
//!
//! All randomness flows from one counter-based generator seeded once; the
//! draw order (operators, target texture, initial texture, embeddings) is
//! part of the contract and must not be reordered.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::descriptor::{
    build_descriptor, build_descriptor_backward, ExtendedDescriptor, FeatureMap, FeatureMapStack,
    LuminanceWeights, DEFAULT_EPS,
};
use crate::error::{Error, Result};
use crate::schedule::ScheduleConfig;
use crate::spd::grad_r_spd;
use crate::svo::{svo_grad, ViewEmbeddingSequence, DEFAULT_MARGIN};

/// Scene geometry and variable sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSceneParams", into = "RawSceneParams")]
pub struct SceneParams {
    views: usize,
    azimuths: Vec<f64>,
    d_clip: usize,
    height: usize,
    width: usize,
    patch: usize,
    tex_dim: usize,
    janus_init: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSceneParams {
    views: usize,
    azimuths: Vec<f64>,
    d_clip: usize,
    height: usize,
    width: usize,
    patch: usize,
    tex_dim: usize,
    janus_init: bool,
}

impl TryFrom<RawSceneParams> for SceneParams {
    type Error = Error;

    fn try_from(r: RawSceneParams) -> Result<Self> {
        SceneParams::new(
            r.views, r.azimuths, r.d_clip, r.height, r.width, r.patch, r.tex_dim, r.janus_init,
        )
    }
}

impl From<SceneParams> for RawSceneParams {
    fn from(p: SceneParams) -> Self {
        RawSceneParams {
            views: p.views,
            azimuths: p.azimuths,
            d_clip: p.d_clip,
            height: p.height,
            width: p.width,
            patch: p.patch,
            tex_dim: p.tex_dim,
            janus_init: p.janus_init,
        }
    }
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            views: 5,
            azimuths: vec![0.0, 45.0, 90.0, 135.0, 180.0],
            d_clip: 16,
            height: 8,
            width: 8,
            patch: 4,
            tex_dim: 32,
            janus_init: true,
        }
    }
}

impl SceneParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        views: usize,
        azimuths: Vec<f64>,
        d_clip: usize,
        height: usize,
        width: usize,
        patch: usize,
        tex_dim: usize,
        janus_init: bool,
    ) -> Result<Self> {
        let mut keys: Vec<String> = Vec::new();
        let mut notes: Vec<String> = Vec::new();
        if views < 3 {
            keys.push("scene.views".into());
            notes.push(format!("need at least 3 views for an ordering, got {views}"));
        }
        if azimuths.len() != views {
            keys.push("scene.views".into());
            keys.push("scene.azimuths".into());
            notes.push(format!(
                "views {} does not match azimuth count {}",
                views,
                azimuths.len()
            ));
        }
        let front_ok = azimuths.first() == Some(&0.0);
        let increasing = azimuths.windows(2).all(|p| p[1] > p[0]);
        let in_range = azimuths.iter().all(|a| (0.0..360.0).contains(a));
        if !(front_ok && increasing && in_range) {
            keys.push("scene.azimuths".into());
            notes.push(
                "azimuths must start at 0 and increase strictly within [0, 360)".into(),
            );
        }
        if d_clip < 2 {
            keys.push("scene.d_clip".into());
            notes.push(format!("embedding dimension must be at least 2, got {d_clip}"));
        }
        if patch == 0 {
            keys.push("scene.patch".into());
            notes.push("patch side must be positive".into());
        } else {
            if height == 0 || height % patch != 0 {
                keys.push("scene.height".into());
                notes.push(format!("height {height} must be a positive multiple of patch {patch}"));
            }
            if width == 0 || width % patch != 0 {
                keys.push("scene.width".into());
                notes.push(format!("width {width} must be a positive multiple of patch {patch}"));
            }
        }
        if tex_dim == 0 {
            keys.push("scene.tex_dim".into());
            notes.push("texture dimension must be positive".into());
        }
        if !keys.is_empty() {
            keys.dedup();
            return Err(Error::Config { keys, message: notes.join("; ") });
        }
        Ok(Self { views, azimuths, d_clip, height, width, patch, tex_dim, janus_init })
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn d_clip(&self) -> usize {
        self.d_clip
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn tex_dim(&self) -> usize {
        self.tex_dim
    }

    pub fn janus_init(&self) -> bool {
        self.janus_init
    }
}

/// Gradient-descent parameters. `iterations`, when given, must equal the
/// schedule's `total_steps`; leave it out to inherit that value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerParams {
    pub step_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self { step_size: 1e-2, iterations: None }
    }
}

/// Full harness configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHarnessConfig", into = "RawHarnessConfig")]
pub struct HarnessConfig {
    pub scene: SceneParams,
    pub optimizer: OptimizerParams,
    pub schedule: ScheduleConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHarnessConfig {
    scene: SceneParams,
    optimizer: OptimizerParams,
    schedule: ScheduleConfig,
    seed: u64,
}

impl TryFrom<RawHarnessConfig> for HarnessConfig {
    type Error = Error;

    fn try_from(r: RawHarnessConfig) -> Result<Self> {
        HarnessConfig::new(r.scene, r.optimizer, r.schedule, r.seed)
    }
}

impl From<HarnessConfig> for RawHarnessConfig {
    fn from(c: HarnessConfig) -> Self {
        RawHarnessConfig {
            scene: c.scene,
            optimizer: c.optimizer,
            schedule: c.schedule,
            seed: c.seed,
        }
    }
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            optimizer: OptimizerParams::default(),
            schedule: ScheduleConfig::default(),
            seed: 42,
        }
    }
}

impl HarnessConfig {
    pub fn new(
        scene: SceneParams,
        optimizer: OptimizerParams,
        schedule: ScheduleConfig,
        seed: u64,
    ) -> Result<Self> {
        if !optimizer.step_size.is_finite() || optimizer.step_size <= 0.0 {
            return Err(Error::Config {
                keys: vec!["optimizer.step_size".into()],
                message: format!("step size must be finite and positive, got {}", optimizer.step_size),
            });
        }
        if let Some(n) = optimizer.iterations {
            if n != schedule.total_steps() {
                return Err(Error::Config {
                    keys: vec!["optimizer.iterations".into(), "schedule.total_steps".into()],
                    message: format!(
                        "iterations {n} must match schedule total_steps {}; omit iterations to inherit it",
                        schedule.total_steps()
                    ),
                });
            }
        }
        Ok(Self { scene, optimizer, schedule, seed })
    }

    /// Effective iteration count: always the schedule length.
    pub fn iterations(&self) -> usize {
        self.schedule.total_steps()
    }
}

/// One recorded optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub total: f64,
    pub r_svo: f64,
    pub r_spd: f64,
    pub lambda_svo: f64,
    pub lambda_spd: f64,
    pub min_gap: f64,
    pub lem_dist: f64,
}

/// Row-per-iteration record of a harness run, including the initial state
/// (row 0) and the final state (row `total_steps`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
}

impl OptimizationTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Convergence verdict extracted from a finished trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceReport {
    /// Ordering term exactly zero and every consecutive gap at least δ.
    pub svo_satisfied: bool,
    pub final_r_svo: f64,
    pub final_min_gap: f64,
    pub final_r_spd: f64,
    pub final_lem_dist: f64,
    pub margin: f64,
}

/// Judges the final row of a trace against the ordering margin.
pub fn check_convergence(trace: &OptimizationTrace, margin: f64) -> Result<ConvergenceReport> {
    let last = trace
        .last()
        .ok_or_else(|| Error::InvalidInput("trace has no rows".into()))?;
    Ok(ConvergenceReport {
        svo_satisfied: last.r_svo == 0.0 && last.min_gap >= margin,
        final_r_svo: last.r_svo,
        final_min_gap: last.min_gap,
        final_r_spd: last.r_spd,
        final_lem_dist: last.lem_dist,
        margin,
    })
}

/// The scene with its frozen operators and live optimization variables.
#[derive(Debug, Clone)]
pub struct SceneModel {
    params: SceneParams,
    /// One `(4·H·W) × tex_dim` render operator per view, frozen.
    render_ops: Vec<DMatrix<f64>>,
    target: ExtendedDescriptor,
    weights: LuminanceWeights,
    tex: DVector<f64>,
    embeddings: Vec<DVector<f64>>,
}

fn draw_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Unit vector orthogonal to `axis`, built from a fresh draw; falls back to
/// projected basis vectors in the measure-zero degenerate case.
fn orthogonal_unit(rng: &mut ChaCha8Rng, axis: &DVector<f64>) -> DVector<f64> {
    let raw = draw_vector(rng, axis.len());
    let mut w = &raw - axis * raw.dot(axis);
    if w.norm() < 1e-9 {
        for i in 0..axis.len() {
            let mut e = DVector::zeros(axis.len());
            e[i] = 1.0;
            let cand = &e - axis * e.dot(axis);
            if cand.norm() >= 1e-9 {
                w = cand;
                break;
            }
        }
    }
    w.normalize()
}

impl SceneModel {
    /// Builds the frozen scene. Draw order from the seeded generator:
    /// render operators (view-major, row-major entries), target texture,
    /// initial texture, then embeddings (reference direction first, one
    /// auxiliary direction per remaining view).
    pub fn new(params: &SceneParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 4 * params.height * params.width;
        let scale = 1.0 / (params.tex_dim as f64).sqrt();

        let render_ops: Vec<DMatrix<f64>> = (0..params.views)
            .map(|_| {
                let mut a = DMatrix::zeros(rows, params.tex_dim);
                for r in 0..rows {
                    for c in 0..params.tex_dim {
                        a[(r, c)] = StandardNormal.sample(&mut rng);
                        a[(r, c)] *= scale;
                    }
                }
                a
            })
            .collect();

        let tex_target = draw_vector(&mut rng, params.tex_dim);
        let tex = draw_vector(&mut rng, params.tex_dim);

        // reference embedding is a random unit direction; each other view
        // sits at a widening angle from it so the similarity profile decays
        // monotonically. janus_init overrides the back view with a slightly
        // perturbed copy of the reference, the ordering violation under test.
        let v0 = draw_vector(&mut rng, params.d_clip).normalize();
        let mut embeddings = vec![v0.clone()];
        let last = params.views - 1;
        for i in 1..params.views {
            let w = orthogonal_unit(&mut rng, &v0);
            if params.janus_init && i == last {
                embeddings.push((&v0 + w * 0.05).normalize());
            } else {
                let phi = params.azimuths[i].to_radians() * 0.95;
                embeddings.push(&v0 * phi.cos() + w * phi.sin());
            }
        }

        let weights = LuminanceWeights::default();
        let target_stack = render_stack(params, &render_ops, &tex_target)?;
        let target = build_descriptor(&target_stack, &weights, params.patch, DEFAULT_EPS)?;

        Ok(Self { params: params.clone(), render_ops, target, weights, tex, embeddings })
    }

    pub fn params(&self) -> &SceneParams {
        &self.params
    }

    pub fn tex(&self) -> &DVector<f64> {
        &self.tex
    }

    pub fn embeddings(&self) -> &[DVector<f64>] {
        &self.embeddings
    }

    pub fn target_descriptor(&self) -> &ExtendedDescriptor {
        &self.target
    }

    /// Renders the current texture into the per-view feature-map stack.
    pub fn render_views(&self) -> Result<FeatureMapStack> {
        render_stack(&self.params, &self.render_ops, &self.tex)
    }

    /// Descriptor of the current texture.
    pub fn descriptor(&self) -> Result<ExtendedDescriptor> {
        build_descriptor(&self.render_views()?, &self.weights, self.params.patch, DEFAULT_EPS)
    }

    /// Current embeddings as an ordering sequence.
    pub fn sequence(&self) -> Result<ViewEmbeddingSequence> {
        ViewEmbeddingSequence::new(self.params.azimuths.clone(), self.embeddings.clone())
    }

    /// Runs scheduled gradient descent, recording one trace row per step
    /// plus the final state. The texture follows the weighted geometry
    /// gradient, the embeddings the weighted ordering gradient.
    pub fn run_optimization(
        &mut self,
        schedule: &ScheduleConfig,
        optimizer: &OptimizerParams,
    ) -> Result<OptimizationTrace> {
        let total = schedule.total_steps();
        if let Some(n) = optimizer.iterations {
            if n != total {
                return Err(Error::Config {
                    keys: vec!["optimizer.iterations".into(), "schedule.total_steps".into()],
                    message: format!("iterations {n} must match schedule total_steps {total}"),
                });
            }
        }
        let step = optimizer.step_size;
        let mut rows = Vec::with_capacity(total + 1);

        for t in 0..=total {
            let stack = self.render_views()?;
            let current = build_descriptor(&stack, &self.weights, self.params.patch, DEFAULT_EPS)?;
            let r_spd = crate::spd::lem_distance_sq(current.spd(), self.target.spd(), DEFAULT_EPS)?;

            let seq = self.sequence()?;
            let svo = svo_grad(&seq, DEFAULT_MARGIN)?;

            let breakdown = schedule.total_loss(t, 0.0, svo.result.loss, r_spd)?;
            if !breakdown.total.is_finite() {
                return Err(Error::Diverged { iteration: t });
            }
            rows.push(TraceRow {
                iter: t,
                total: breakdown.total,
                r_svo: breakdown.r_svo,
                r_spd: breakdown.r_spd,
                lambda_svo: breakdown.lambda_svo,
                lambda_spd: breakdown.lambda_spd,
                min_gap: svo.result.min_gap(),
                lem_dist: r_spd.sqrt(),
            });
            if t == total {
                break;
            }

            if breakdown.lambda_spd != 0.0 {
                let grad_c = grad_r_spd(current.spd(), self.target.spd(), DEFAULT_EPS)?;
                let grad_maps =
                    build_descriptor_backward(&stack, &self.weights, self.params.patch, &grad_c)?;
                let mut grad_tex = DVector::zeros(self.params.tex_dim);
                for (a, g) in self.render_ops.iter().zip(&grad_maps) {
                    let gv = DVector::from_column_slice(g.data());
                    grad_tex += a.transpose() * gv;
                }
                self.tex -= grad_tex * (step * breakdown.lambda_spd);
            }
            if breakdown.lambda_svo != 0.0 {
                // sequence order equals embedding order: azimuths are
                // strictly increasing by construction
                for (e, g) in self.embeddings.iter_mut().zip(&svo.grads) {
                    *e -= g * (step * breakdown.lambda_svo);
                }
            }
        }
        Ok(OptimizationTrace { rows })
    }
}

fn render_stack(
    params: &SceneParams,
    ops: &[DMatrix<f64>],
    tex: &DVector<f64>,
) -> Result<FeatureMapStack> {
    let views = ops
        .iter()
        .map(|a| {
            let v = a * tex;
            FeatureMap::new(4, params.height, params.width, v.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMapStack::new(views, params.azimuths.clone())
}

/// Builds the scene from the config and runs the full schedule.
pub fn run_harness(config: &HarnessConfig) -> Result<(SceneModel, OptimizationTrace)> {
    let mut scene = SceneModel::new(&config.scene, config.seed)?;
    let trace = scene.run_optimization(&config.schedule, &config.optimizer)?;
    Ok((scene, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config(janus: bool, seed: u64) -> HarnessConfig {
        let scene = SceneParams::new(
            4,
            vec![0.0, 60.0, 120.0, 180.0],
            8,
            4,
            4,
            2,
            12,
            janus,
        )
        .unwrap();
        let schedule = ScheduleConfig::new(400, 40, 1.0, 0.1, 1.0, 2.0, 200).unwrap();
        HarnessConfig::new(scene, OptimizerParams::default(), schedule, seed).unwrap()
    }

    #[test]
    fn scene_construction_is_deterministic() {
        let p = SceneParams::default();
        let a = SceneModel::new(&p, 7).unwrap();
        let b = SceneModel::new(&p, 7).unwrap();
        assert_eq!(a.tex(), b.tex());
        assert_eq!(a.embeddings(), b.embeddings());
        assert_eq!(a.target_descriptor().spd().matrix(), b.target_descriptor().spd().matrix());

        let c = SceneModel::new(&p, 8).unwrap();
        assert_ne!(a.tex(), c.tex());
    }

    #[test]
    fn janus_init_starts_violated() {
        let p = SceneParams::default();
        let scene = SceneModel::new(&p, 42).unwrap();
        let svo = crate::svo::svo_loss(&scene.sequence().unwrap(), DEFAULT_MARGIN).unwrap();
        assert!(svo.loss > 0.5, "janus violation should be large, got {}", svo.loss);
        // the back view is the violator
        assert!(*svo.active.last().unwrap());
        assert!(svo.sims.last().unwrap() > &0.9);
    }

    #[test]
    fn clean_init_starts_satisfied() {
        let d = SceneParams::default();
        let p = SceneParams::new(
            d.views(),
            d.azimuths().to_vec(),
            d.d_clip(),
            d.height(),
            d.width(),
            d.patch(),
            d.tex_dim(),
            false,
        )
        .unwrap();
        let scene = SceneModel::new(&p, 42).unwrap();
        let svo = crate::svo::svo_loss(&scene.sequence().unwrap(), DEFAULT_MARGIN).unwrap();
        assert_eq!(svo.loss, 0.0);
        assert!(svo.sims.windows(2).all(|w| w[0] - w[1] >= DEFAULT_MARGIN));
    }

    #[test]
    fn harness_resolves_janus_violation() {
        let config = small_config(true, 11);
        let (_, trace) = run_harness(&config).unwrap();
        assert_eq!(trace.rows.len(), 401);
        let report = check_convergence(&trace, DEFAULT_MARGIN).unwrap();
        assert!(
            report.svo_satisfied,
            "final r_svo {} min_gap {}",
            report.final_r_svo, report.final_min_gap
        );
        assert_eq!(report.final_r_svo, 0.0);
        assert!(report.final_min_gap >= DEFAULT_MARGIN);
    }

    #[test]
    fn harness_reduces_geometry_distance() {
        let config = small_config(true, 11);
        let (_, trace) = run_harness(&config).unwrap();
        let first = trace.rows.first().unwrap();
        let last = trace.last().unwrap();
        assert!(
            last.lem_dist < first.lem_dist,
            "lem did not improve: {} -> {}",
            first.lem_dist,
            last.lem_dist
        );
    }

    #[test]
    fn zero_svo_weight_freezes_embeddings() {
        let mut config = small_config(true, 11);
        config.schedule = ScheduleConfig::new(400, 40, 0.0, 0.0, 1.0, 2.0, 200).unwrap();
        let (scene, trace) = run_harness(&config).unwrap();
        let report = check_convergence(&trace, DEFAULT_MARGIN).unwrap();
        assert!(!report.svo_satisfied);
        assert!(report.final_r_svo > 0.0);
        // embeddings literally unchanged from a fresh scene
        let fresh = SceneModel::new(&config.scene, config.seed).unwrap();
        assert_eq!(scene.embeddings(), fresh.embeddings());
    }

    #[test]
    fn zero_spd_weight_freezes_texture() {
        let mut config = small_config(true, 11);
        config.schedule = ScheduleConfig::new(400, 40, 1.0, 0.1, 0.0, 0.0, 200).unwrap();
        let (scene, trace) = run_harness(&config).unwrap();
        let first = trace.rows.first().unwrap();
        let last = trace.last().unwrap();
        assert_eq!(first.lem_dist, last.lem_dist);
        let fresh = SceneModel::new(&config.scene, config.seed).unwrap();
        assert_eq!(scene.tex(), fresh.tex());
    }

    #[test]
    fn traces_are_bit_identical_across_runs() {
        let config = small_config(true, 5);
        let (_, a) = run_harness(&config).unwrap();
        let (_, b) = run_harness(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_weights_follow_schedule() {
        let config = small_config(false, 3);
        let (_, trace) = run_harness(&config).unwrap();
        for row in &trace.rows {
            assert_eq!(row.lambda_svo, config.schedule.lambda_svo(row.iter).unwrap());
            assert_eq!(row.lambda_spd, config.schedule.lambda_spd(row.iter).unwrap());
            assert_relative_eq!(
                row.total,
                row.lambda_svo * row.r_svo + row.lambda_spd * row.r_spd,
                epsilon = 1e-12
            );
            assert_eq!(row.lem_dist, row.r_spd.sqrt());
        }
    }

    #[test]
    fn texture_gradient_matches_finite_differences() {
        // end-to-end chain: tex -> renders -> descriptor -> distance
        let p = SceneParams::new(3, vec![0.0, 90.0, 180.0], 4, 4, 4, 2, 6, true).unwrap();
        let scene = SceneModel::new(&p, 13).unwrap();

        let loss_of = |tex: &DVector<f64>| -> f64 {
            let stack = render_stack(&p, &scene.render_ops, tex).unwrap();
            let c = build_descriptor(&stack, &scene.weights, p.patch(), DEFAULT_EPS).unwrap();
            crate::spd::lem_distance_sq(c.spd(), scene.target.spd(), DEFAULT_EPS).unwrap()
        };

        let stack = scene.render_views().unwrap();
        let current = scene.descriptor().unwrap();
        let grad_c = grad_r_spd(current.spd(), scene.target.spd(), DEFAULT_EPS).unwrap();
        let grad_maps =
            build_descriptor_backward(&stack, &scene.weights, p.patch(), &grad_c).unwrap();
        let mut grad_tex = DVector::zeros(p.tex_dim());
        for (a, g) in scene.render_ops.iter().zip(&grad_maps) {
            grad_tex += a.transpose() * DVector::from_column_slice(g.data());
        }

        let h = 1e-6;
        let mut max_abs = 1e-12_f64;
        let mut max_err = 0.0_f64;
        for i in 0..p.tex_dim() {
            let mut plus = scene.tex.clone();
            let mut minus = scene.tex.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            max_abs = max_abs.max(fd.abs()).max(grad_tex[i].abs());
            max_err = max_err.max((fd - grad_tex[i]).abs());
        }
        assert!(max_err / max_abs < 1e-6, "rel err {}", max_err / max_abs);
    }

    #[test]
    fn config_cross_validation() {
        let err = HarnessConfig::new(
            SceneParams::default(),
            OptimizerParams { step_size: 1e-2, iterations: Some(100) },
            ScheduleConfig::default(),
            1,
        )
        .unwrap_err();
        match err {
            Error::Config { keys, .. } => {
                assert!(keys.contains(&"optimizer.iterations".to_string()));
                assert!(keys.contains(&"schedule.total_steps".to_string()));
            }
            other => panic!("expected Config error, got {other:?}"),
        }

        assert!(HarnessConfig::new(
            SceneParams::default(),
            OptimizerParams { step_size: 0.0, iterations: None },
            ScheduleConfig::default(),
            1
        )
        .is_err());

        // explicit iterations equal to total_steps is accepted
        let ok = HarnessConfig::new(
            SceneParams::default(),
            OptimizerParams { step_size: 1e-2, iterations: Some(2000) },
            ScheduleConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(ok.iterations(), 2000);
    }

    #[test]
    fn scene_param_validation_lists_keys() {
        let err = SceneParams::new(2, vec![10.0, 20.0, 30.0], 1, 7, 8, 4, 0, true).unwrap_err();
        match err {
            Error::Config { keys, .. } => {
                for expect in [
                    "scene.views",
                    "scene.azimuths",
                    "scene.d_clip",
                    "scene.height",
                    "scene.tex_dim",
                ] {
                    assert!(keys.iter().any(|k| k == expect), "missing {expect}: {keys:?}");
                }
            }
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn serde_round_trip() {
        let config = HarnessConfig::default();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: HarnessConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);

        // unknown keys anywhere are rejected
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["scene"]["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<HarnessConfig>(v).is_err());
    }
}
