use crate::error::{Error, Result};

pub const DEFAULT_LR: f64 = 2e-4;

/// Moment buffers and hyperparameters for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(len: usize, lr: f64) -> Self {
        OptimState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update. Either every parameter is updated or, on error, none are.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::dims(params.len(), grads.len()));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    let t = state.step + 1;
    let bc1 = 1.0 - state.beta1.powf(t as f64);
    let bc2 = 1.0 - state.beta2.powf(t as f64);
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut next = params.to_vec();
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        next[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        if !next[i].is_finite() {
            return Err(Error::NonFiniteParameter(i));
        }
    }
    params.copy_from_slice(&next);
    state.m = m;
    state.v = v;
    state.step = t;
    Ok(())
}

/// Rescales `grads` in place so their L2 norm is at most `max_norm`; returns the original norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0, 3.5];
        let mut s = OptimState::new(3, 0.1);
        adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0];
        let mut s = OptimState::new(1, 0.01);
        adam_step(&mut p, &[5.0], &mut s).unwrap();
        // m̂ = g, v̂ = g², so Δ = lr·g/(|g| + eps).
        assert!((p[0] + 0.01 * 5.0 / (5.0 + 1e-8)).abs() < 1e-15);
        assert!((p[0].abs() - 0.01).abs() < 1e-10);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut x = vec![0.0];
        let mut s = OptimState::new(1, 0.1);
        for _ in 0..100 {
            let g = 2.0 * (x[0] - 3.0);
            adam_step(&mut x, &[g], &mut s).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 0.1, "x = {}", x[0]);
    }

    #[test]
    fn rejects_non_finite_gradient_atomically() {
        let mut p = vec![1.0, 2.0];
        let mut s = OptimState::new(2, 0.1);
        let err = adam_step(&mut p, &[1.0, f64::NAN], &mut s).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(1)));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn rejects_non_finite_result() {
        let mut p = vec![1.0, f64::MAX];
        let mut s = OptimState::new(2, f64::MAX);
        let err = adam_step(&mut p, &[1.0, -1.0], &mut s).unwrap_err();
        assert!(matches!(err, Error::NonFiniteParameter(1)));
        assert_eq!(p, vec![1.0, f64::MAX]);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = OptimState::new(2, 0.1);
        assert!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut s).is_err());
    }

    #[test]
    fn clipping() {
        let mut g = vec![30.0, 40.0];
        assert_eq!(clip_global_norm(&mut g, 10.0), 50.0);
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
        let mut small = vec![0.1, 0.2];
        clip_global_norm(&mut small, 10.0);
        assert_eq!(small, vec![0.1, 0.2]);
    }
}
