//! Gaussian parameters, activations and single-kernel evaluation.
//!
//! Every Gaussian is stored as nine raw scalars:
//!
//! | offset | field          | activation                     |
//! |--------|----------------|--------------------------------|
//! | 0..2   | `mu_bias_raw`  | `anchor + tanh(raw) * scale`   |
//! | 2..5   | `l_params`     | softplus on the diagonal of L  |
//! | 5..8   | `color_raw`    | sigmoid                        |
//! | 8      | `sigma_raw`    | sigmoid                        |
//!
//! Pixel centers sit at integer + 0.5, `x` along columns and `y` along rows.

/// Number of raw scalars per Gaussian.
pub const PARAMS_PER_GAUSSIAN: usize = 9;

/// Ridge added to the covariance diagonal before inversion (pixel²).
pub const COV_RIDGE: f64 = 1e-6;

/// Culling radius in standard deviations of the largest principal axis.
pub const CUTOFF_SIGMAS: f64 = 3.0;

pub type Vec2 = [f64; 2];
pub type Rgb = [f64; 3];

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Inverse of [`sigmoid`]; the input is clamped away from 0 and 1.
pub fn logit(y: f64) -> f64 {
    let y = y.clamp(1e-4, 1.0 - 1e-4);
    (y / (1.0 - y)).ln()
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(&self) -> Sym2 {
        let inv_det = 1.0 / self.det();
        Sym2 {
            xx: self.yy * inv_det,
            xy: -self.xy * inv_det,
            yy: self.xx * inv_det,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (mean - r, mean + r)
    }

    /// `vᵀ M v`
    pub fn quad_form(&self, v: Vec2) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    pub fn to_rows(self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }
}

/// Lower-triangular Cholesky factor `[[a, 0], [l21, b]]` with positive diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CholeskyFactor {
    pub a: f64,
    pub l21: f64,
    pub b: f64,
}

impl CholeskyFactor {
    pub fn from_raw(l_params: [f64; 3]) -> Self {
        CholeskyFactor {
            a: softplus(l_params[0]),
            l21: l_params[1],
            b: softplus(l_params[2]),
        }
    }

    /// `L·Lᵀ` without the ridge.
    pub fn outer(&self) -> Sym2 {
        Sym2 {
            xx: self.a * self.a,
            xy: self.a * self.l21,
            yy: self.l21 * self.l21 + self.b * self.b,
        }
    }
}

/// Σ = L·Lᵀ + εI with the diagonal of L mapped through softplus.
pub fn build_covariance(l_params: [f64; 3]) -> Sym2 {
    let s = CholeskyFactor::from_raw(l_params).outer();
    Sym2 {
        xx: s.xx + COV_RIDGE,
        xy: s.xy,
        yy: s.yy + COV_RIDGE,
    }
}

/// One Gaussian in raw, unconstrained form.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RawGaussian {
    pub mu_bias_raw: Vec2,
    pub l_params: [f64; 3],
    pub color_raw: Rgb,
    pub sigma_raw: f64,
}

impl RawGaussian {
    pub fn from_slice(s: &[f64]) -> Self {
        assert_eq!(s.len(), PARAMS_PER_GAUSSIAN);
        RawGaussian {
            mu_bias_raw: [s[0], s[1]],
            l_params: [s[2], s[3], s[4]],
            color_raw: [s[5], s[6], s[7]],
            sigma_raw: s[8],
        }
    }

    pub fn to_array(&self) -> [f64; PARAMS_PER_GAUSSIAN] {
        [
            self.mu_bias_raw[0],
            self.mu_bias_raw[1],
            self.l_params[0],
            self.l_params[1],
            self.l_params[2],
            self.color_raw[0],
            self.color_raw[1],
            self.color_raw[2],
            self.sigma_raw,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// A Gaussian after activation, ready to be evaluated in pixel space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveGaussian {
    pub mu: Vec2,
    pub cov_inv: Sym2,
    pub color: Rgb,
    pub sigma: f64,
    pub cutoff_radius: f64,
}

pub fn activate(raw: &RawGaussian, anchor: Vec2, offset_scale: Vec2) -> EffectiveGaussian {
    let cov = build_covariance(raw.l_params);
    let (_, max_eig) = cov.eigenvalues();
    EffectiveGaussian {
        mu: [
            anchor[0] + raw.mu_bias_raw[0].tanh() * offset_scale[0],
            anchor[1] + raw.mu_bias_raw[1].tanh() * offset_scale[1],
        ],
        cov_inv: cov.inverse(),
        color: raw.color_raw.map(sigmoid),
        sigma: sigmoid(raw.sigma_raw),
        cutoff_radius: CUTOFF_SIGMAS * max_eig.sqrt(),
    }
}

impl EffectiveGaussian {
    /// Whether `p` lies inside the culling disc.
    #[inline]
    pub fn covers(&self, p: Vec2) -> bool {
        let dx = p[0] - self.mu[0];
        let dy = p[1] - self.mu[1];
        dx * dx + dy * dy <= self.cutoff_radius * self.cutoff_radius
    }

    /// `exp(−½ (p−μ)ᵀ Σ⁻¹ (p−μ))`, ignoring the cutoff.
    #[inline]
    pub fn falloff(&self, p: Vec2) -> f64 {
        let d = [p[0] - self.mu[0], p[1] - self.mu[1]];
        (-0.5 * self.cov_inv.quad_form(d)).exp()
    }

    /// Contribution at `p` without culling.
    #[inline]
    pub fn eval_unculled(&self, p: Vec2) -> Rgb {
        let w = self.sigma * self.falloff(p);
        [self.color[0] * w, self.color[1] * w, self.color[2] * w]
    }

    /// Integer pixel bounds `[x0, x1) × [y0, y1)` whose centers may be covered.
    pub fn pixel_bounds(&self) -> ([i64; 2], [i64; 2]) {
        let r = self.cutoff_radius;
        let lo = |c: f64| (c - r - 0.5).floor() as i64;
        let hi = |c: f64| (c + r - 0.5).ceil() as i64 + 1;
        ([lo(self.mu[0]), hi(self.mu[0])], [lo(self.mu[1]), hi(self.mu[1])])
    }
}

/// Contribution of one Gaussian at pixel position `p`, zero outside the cutoff.
#[inline]
pub fn eval_gaussian(g: &EffectiveGaussian, p: Vec2) -> Rgb {
    if g.covers(p) {
        g.eval_unculled(p)
    } else {
        [0.0; 3]
    }
}

/// Center of pixel `(col, row)`.
#[inline]
pub fn pixel_center(col: i64, row: i64) -> Vec2 {
    [col as f64 + 0.5, row as f64 + 0.5]
}

/// A contiguous block of raw Gaussians with fixed anchor positions.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSet {
    params: Vec<f64>,
    anchors: Vec<Vec2>,
    offset_scale: Vec2,
}

impl GaussianSet {
    pub fn new(anchors: Vec<Vec2>, offset_scale: Vec2) -> Self {
        GaussianSet {
            params: vec![0.0; anchors.len() * PARAMS_PER_GAUSSIAN],
            anchors,
            offset_scale,
        }
    }

    pub fn empty(offset_scale: Vec2) -> Self {
        Self::new(Vec::new(), offset_scale)
    }

    pub fn from_raw(raw: &[RawGaussian], anchors: Vec<Vec2>, offset_scale: Vec2) -> Self {
        assert_eq!(raw.len(), anchors.len());
        let params = raw.iter().flat_map(|g| g.to_array()).collect();
        GaussianSet {
            params,
            anchors,
            offset_scale,
        }
    }

    /// Concatenation of several sets sharing one offset scale.
    pub fn union<'a>(sets: impl IntoIterator<Item = &'a GaussianSet>) -> GaussianSet {
        let mut out: Option<GaussianSet> = None;
        for s in sets {
            match &mut out {
                None => out = Some(s.clone()),
                Some(acc) => {
                    assert_eq!(acc.offset_scale, s.offset_scale);
                    acc.params.extend_from_slice(&s.params);
                    acc.anchors.extend_from_slice(&s.anchors);
                }
            }
        }
        out.unwrap_or_else(|| GaussianSet::empty([1.0, 1.0]))
    }

    pub fn count(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[Vec2] {
        &self.anchors
    }

    pub fn offset_scale(&self) -> Vec2 {
        self.offset_scale
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn raw(&self, i: usize) -> RawGaussian {
        let k = i * PARAMS_PER_GAUSSIAN;
        RawGaussian::from_slice(&self.params[k..k + PARAMS_PER_GAUSSIAN])
    }

    pub fn set_raw(&mut self, i: usize, g: &RawGaussian) {
        let k = i * PARAMS_PER_GAUSSIAN;
        self.params[k..k + PARAMS_PER_GAUSSIAN].copy_from_slice(&g.to_array());
    }

    pub fn activate(&self, i: usize) -> EffectiveGaussian {
        activate(&self.raw(i), self.anchors[i], self.offset_scale)
    }

    pub fn activate_all(&self) -> Vec<EffectiveGaussian> {
        (0..self.count()).map(|i| self.activate(i)).collect()
    }
}
