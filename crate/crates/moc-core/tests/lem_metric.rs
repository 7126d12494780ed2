//! Metric laws of the log-Euclidean distance, checked over a seeded sweep
//! of random SPD matrices up to dimension 8. The distance here is the
//! square root of the squared-distance primitive with no extra
//! regularization shift, since the sampled matrices are genuinely positive
//! definite.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use moc_core::spd::{lem_distance_sq, SpdMatrix};

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(rng) });
    SpdMatrix::new(&a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.2).unwrap()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(rng) });
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix the sign ambiguity so Q is a deterministic function of A
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn dist(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
    lem_distance_sq(a, b, 0.0).unwrap().sqrt()
}

#[test]
fn metric_laws_hold_over_seeded_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = std::time::Instant::now();

    for k in 0..100 {
        let dim = 2 + k % 7; // dimensions 2..=8
        let a = random_spd(&mut rng, dim);
        let b = random_spd(&mut rng, dim);
        let c = random_spd(&mut rng, dim);

        // self-distance and positivity
        assert_eq!(dist(&a, &a), 0.0, "d(A,A) must vanish (dim {dim})");
        let d_ab = dist(&a, &b);
        assert!(d_ab > 0.0, "distinct samples must be separated (dim {dim})");

        // symmetry: the log difference is negated, squared entries agree
        assert_eq!(d_ab, dist(&b, &a), "symmetry violated (dim {dim})");

        // triangle inequality with round-off slack
        let (d_ac, d_cb) = (dist(&a, &c), dist(&c, &b));
        assert!(
            d_ab <= d_ac + d_cb + 1e-9,
            "triangle violated at sample {k}: {d_ab} > {d_ac} + {d_cb}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 10.0, "metric sweep exceeded its budget");
}

#[test]
fn invariances_hold_over_seeded_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(4048);

    for k in 0..100 {
        let dim = 2 + k % 7;
        let a = random_spd(&mut rng, dim);
        let b = random_spd(&mut rng, dim);
        let d_ab = dist(&a, &b);

        // orthogonal congruence: log(QᵀMQ) = Qᵀ log(M) Q
        let q = random_orthogonal(&mut rng, dim);
        let qa = SpdMatrix::new(q.transpose() * a.matrix() * &q).unwrap();
        let qb = SpdMatrix::new(q.transpose() * b.matrix() * &q).unwrap();
        assert!(
            (dist(&qa, &qb) - d_ab).abs() < 1e-9,
            "congruence invariance violated at sample {k}"
        );

        // uniform scaling: log(cM) = ln(c)·I + log(M), the shift cancels
        let c = 0.1 + 9.9 * (k as f64 / 99.0);
        let ca = SpdMatrix::new(a.matrix() * c).unwrap();
        let cb = SpdMatrix::new(b.matrix() * c).unwrap();
        assert!(
            (dist(&ca, &cb) - d_ab).abs() < 1e-9,
            "scale invariance violated at sample {k} (c = {c})"
        );

        // inversion: log(M⁻¹) = −log(M)
        let ia = a.inverse();
        let ib = b.inverse();
        assert!(
            (dist(&ia, &ib) - d_ab).abs() < 1e-9,
            "inversion invariance violated at sample {k}"
        );
    }
}
