//! Semantic conditioning primitives: layer normalization and AdaLN modulation.
//!
//! These operate on an externally supplied feature vector. No feature
//! extractor is bundled; callers pass whatever [`FeatureVector`] they have.

use crate::error::{Error, Result};

/// Dense feature activations.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("feature vector has non-finite entries".into()));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scale, shift and gate vectors for AdaLN.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ModulationParams {
    /// `alpha = 1`, `beta = 0`, `gamma = 1`.
    pub fn identity(dim: usize) -> Self {
        ModulationParams {
            alpha: vec![1.0; dim],
            beta: vec![0.0; dim],
            gamma: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `(x − mean) / sqrt(var + eps)` with population variance.
pub fn layer_norm(x: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    x.iter().map(|v| (v - mean) * inv).collect()
}

/// `block(LN(x) ⊙ alpha + beta) ⊙ gamma`.
pub fn adaln<B>(x: &[f64], params: &ModulationParams, block: B) -> Result<Vec<f64>>
where
    B: FnOnce(Vec<f64>) -> Vec<f64>,
{
    let d = x.len();
    for (name, v) in [("alpha", &params.alpha), ("beta", &params.beta), ("gamma", &params.gamma)] {
        if v.len() != d {
            return Err(Error::dims(format!("{name} of length {d}"), v.len()));
        }
    }
    let modulated = layer_norm(x, LAYER_NORM_EPS)
        .iter()
        .zip(params.alpha.iter().zip(&params.beta))
        .map(|(n, (a, b))| n * a + b)
        .collect();
    let out = block(modulated);
    if out.len() != d {
        return Err(Error::dims(format!("block output of length {d}"), out.len()));
    }
    Ok(out.iter().zip(&params.gamma).map(|(y, g)| y * g).collect())
}

/// Affine map `W·f + bias` with `W` stored row-major as `3D × C`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationProjection {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
}

/// Projects a feature vector to modulation parameters, split into
/// `(alpha, beta, gamma)` thirds in that order.
pub fn project_modulation(f_pred: &FeatureVector, proj: &ModulationProjection) -> Result<ModulationParams> {
    let c = proj.in_dim;
    if f_pred.len() != c {
        return Err(Error::dims(format!("feature of length {c}"), f_pred.len()));
    }
    let out_dim = proj.bias.len();
    if out_dim % 3 != 0 || out_dim == 0 {
        return Err(Error::dims("bias length divisible by 3", out_dim));
    }
    if proj.weights.len() != out_dim * c {
        return Err(Error::dims(format!("{out_dim}x{c} weights"), proj.weights.len()));
    }
    let out: Vec<f64> = proj
        .weights
        .chunks_exact(c.max(1))
        .take(out_dim)
        .zip(&proj.bias)
        .map(|(row, b)| row.iter().zip(f_pred.values()).map(|(w, f)| w * f).sum::<f64>() + b)
        .collect();
    let d = out_dim / 3;
    Ok(ModulationParams {
        alpha: out[..d].to_vec(),
        beta: out[d..2 * d].to_vec(),
        gamma: out[2 * d..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_vector_normalizes_to_zero() {
        assert!(layer_norm(&[3.0; 6], LAYER_NORM_EPS).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_pair() {
        let y = layer_norm(&[-1.0, 1.0], LAYER_NORM_EPS);
        assert!((y[0] + 1.0).abs() < 1e-5 && (y[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn moments_after_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y = layer_norm(&x, LAYER_NORM_EPS);
            let mean = y.iter().sum::<f64>() / 8.0;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-7);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn shift_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let base = layer_norm(&x, LAYER_NORM_EPS);
        let shifted: Vec<f64> = x.iter().map(|v| v + 7.5).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * 3.0).collect();
        for (a, b) in base.iter().zip(layer_norm(&shifted, LAYER_NORM_EPS)) {
            assert!((a - b).abs() < 1e-6);
        }
        // eps breaks exact scale invariance; variance here is ~1 so the drift is tiny.
        for (a, b) in base.iter().zip(layer_norm(&scaled, LAYER_NORM_EPS)) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn adaln_composition_matches_scalar_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = 7;
        let mut v = || (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>();
        let (x, alpha, beta, gamma) = (v(), v(), v(), v());
        let params = ModulationParams { alpha: alpha.clone(), beta: beta.clone(), gamma: gamma.clone() };
        let got = adaln(&x, &params, |h| h.iter().map(|t| t * t).collect()).unwrap();

        let mean = x.iter().sum::<f64>() / d as f64;
        let var = x.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / d as f64;
        for k in 0..d {
            let n = (x[k] - mean) / (var + 1e-5).sqrt();
            let h = n * alpha[k] + beta[k];
            let want = h * h * gamma[k];
            assert!((got[k] - want).abs() < 1e-7);
        }
    }

    #[test]
    fn adaln_rejects_shape_mismatch() {
        let params = ModulationParams::identity(3);
        assert!(adaln(&[1.0, 2.0], &params, |h| h).is_err());
        assert!(adaln(&[1.0, 2.0, 3.0], &params, |_| vec![0.0]).is_err());
    }

    #[test]
    fn projection_bias_only_and_matvec() {
        let d = 4;
        let c = 5;
        let mut bias = vec![1.0; d];
        bias.extend(vec![0.0; d]);
        bias.extend(vec![1.0; d]);
        let proj = ModulationProjection { weights: vec![0.0; 3 * d * c], bias: bias.clone(), in_dim: c };
        let f = FeatureVector::new(vec![0.3; c]).unwrap();
        assert_eq!(project_modulation(&f, &proj).unwrap(), ModulationParams::identity(d));

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let weights: Vec<f64> = (0..3 * d * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let proj = ModulationProjection { weights: weights.clone(), bias: bias.clone(), in_dim: c };
        let zero = FeatureVector::new(vec![0.0; c]).unwrap();
        assert_eq!(project_modulation(&zero, &proj).unwrap(), ModulationParams::identity(d));

        let f = FeatureVector::new((0..c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let got = project_modulation(&f, &proj).unwrap();
        let flat: Vec<f64> = got.alpha.iter().chain(&got.beta).chain(&got.gamma).copied().collect();
        for (row, out) in flat.iter().enumerate() {
            let mut want = bias[row];
            for col in 0..c {
                want += weights[row * c + col] * f.values()[col];
            }
            assert!((out - want).abs() < 1e-7);
        }

        let bad = ModulationProjection { weights: vec![0.0; 5], bias, in_dim: c };
        assert!(project_modulation(&f, &bad).is_err());
    }
}
