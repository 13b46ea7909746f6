//! 7-3-3 MLP that maps sensor features to PID gains, trained online.
//!
//! The update law is plain gradient descent on ½e² with the plant Jacobian
//! replaced by its sign, gradient-norm clipping, σ-modification decay and a
//! hard cap on every parameter. [`uub_bound`] and [`lipschitz_estimate`]
//! instantiate the ultimate-bound expression for a running network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pid::PidGains;
use crate::scalar::{clamp, Real};

pub const N_INPUT: usize = 7;
pub const N_HIDDEN: usize = 3;
pub const N_OUTPUT: usize = 3;
pub const PARAM_COUNT: usize = N_HIDDEN * N_INPUT + N_HIDDEN + N_OUTPUT * N_HIDDEN + N_OUTPUT;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunerError {
    #[error("non-finite network parameter at flat index {0}")]
    NonFiniteParam(usize),
    #[error("update called without a preceding forward pass")]
    MissingForward,
    #[error("expected {PARAM_COUNT} parameters, got {0}")]
    WrongParamCount(usize),
    #[error("cannot parse parameter {index}: {text:?}")]
    Parse { index: usize, text: String },
    #[error("minimum proportional gain must be positive, got {0}")]
    NonPositiveKpMin(f64),
    #[error("invalid tuner configuration: {0}")]
    Config(String),
}

/// W₁ (3×7), b₁, W₂ (3×3), b₂.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MlpParams<R = f64> {
    pub w1: [[R; N_INPUT]; N_HIDDEN],
    pub b1: [R; N_HIDDEN],
    pub w2: [[R; N_HIDDEN]; N_OUTPUT],
    pub b2: [R; N_OUTPUT],
}

impl<R: Real> MlpParams<R> {
    pub fn zeros() -> Self {
        Self {
            w1: [[R::zero(); N_INPUT]; N_HIDDEN],
            b1: [R::zero(); N_HIDDEN],
            w2: [[R::zero(); N_HIDDEN]; N_OUTPUT],
            b2: [R::zero(); N_OUTPUT],
        }
    }

    /// Uniform initialization in ±`half_width` from a fixed seed.
    pub fn random(seed: u64, half_width: R) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hw = half_width.as_f64();
        let mut flat = [R::zero(); PARAM_COUNT];
        for v in flat.iter_mut() {
            *v = R::lit(rng.gen_range(-hw..=hw));
        }
        Self::from_flat(&flat).expect("fixed length")
    }

    pub fn param_count(&self) -> usize {
        self.to_flat().len()
    }

    /// Row-major w1, b1, w2, b2.
    pub fn to_flat(&self) -> [R; PARAM_COUNT] {
        let mut out = [R::zero(); PARAM_COUNT];
        let mut i = 0;
        for row in &self.w1 {
            for &v in row {
                out[i] = v;
                i += 1;
            }
        }
        for &v in &self.b1 {
            out[i] = v;
            i += 1;
        }
        for row in &self.w2 {
            for &v in row {
                out[i] = v;
                i += 1;
            }
        }
        for &v in &self.b2 {
            out[i] = v;
            i += 1;
        }
        debug_assert_eq!(i, PARAM_COUNT);
        out
    }

    pub fn from_flat(flat: &[R]) -> Result<Self, TunerError> {
        if flat.len() != PARAM_COUNT {
            return Err(TunerError::WrongParamCount(flat.len()));
        }
        let mut p = Self::zeros();
        let mut it = flat.iter().copied();
        for row in p.w1.iter_mut() {
            for v in row.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for v in p.b1.iter_mut() {
            *v = it.next().unwrap();
        }
        for row in p.w2.iter_mut() {
            for v in row.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for v in p.b2.iter_mut() {
            *v = it.next().unwrap();
        }
        Ok(p)
    }

    pub fn to_csv_line(&self) -> String {
        self.to_flat().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
    }

    pub fn from_csv_line(line: &str) -> Result<Self, TunerError> {
        let values = line
            .trim()
            .split(',')
            .enumerate()
            .map(|(index, s)| {
                s.trim()
                    .parse::<f64>()
                    .map(R::lit)
                    .map_err(|_| TunerError::Parse { index, text: s.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_flat(&values)
    }

    /// Frobenius norm over all 36 parameters.
    pub fn norm(&self) -> R {
        self.to_flat().iter().fold(R::zero(), |a, &v| a + v * v).sqrt()
    }

    pub fn check_finite(&self) -> Result<(), TunerError> {
        match self.to_flat().iter().position(|v| !v.is_finite()) {
            Some(i) => Err(TunerError::NonFiniteParam(i)),
            None => Ok(()),
        }
    }
}

/// Raw sensor features in engineering units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector<R = f64> {
    pub t: R,
    pub rh: R,
    pub t_leaf: R,
    pub co2: R,
    pub ppfd: R,
    pub e_vpd: R,
    pub e_vpd_int: R,
}

impl<R: Real> FeatureVector<R> {
    pub fn as_array(&self) -> [R; N_INPUT] {
        [self.t, self.rh, self.t_leaf, self.co2, self.ppfd, self.e_vpd, self.e_vpd_int]
    }
}

/// Fixed normalization ranges mapping each feature onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRanges<R = f64> {
    pub lo: [R; N_INPUT],
    pub hi: [R; N_INPUT],
}

impl<R: Real> Default for FeatureRanges<R> {
    fn default() -> Self {
        let lo = [10.0, 0.0, 8.0, 300.0, 0.0, -1.5, -900.0];
        let hi = [40.0, 100.0, 38.0, 1500.0, 1500.0, 1.5, 900.0];
        Self { lo: lo.map(R::lit), hi: hi.map(R::lit) }
    }
}

impl<R: Real> FeatureRanges<R> {
    pub fn normalize(&self, x: &FeatureVector<R>, i_max: R) -> [R; N_INPUT] {
        let mut raw = x.as_array();
        raw[6] = clamp(raw[6], -i_max, i_max);
        let mut out = [R::zero(); N_INPUT];
        for k in 0..N_INPUT {
            out[k] = clamp((raw[k] - self.lo[k]) / (self.hi[k] - self.lo[k]), R::zero(), R::one());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig<R = f64> {
    pub eta: R,
    pub clip_c: R,
    pub sigma_m: R,
    pub k_min: [R; 3],
    pub k_max: [R; 3],
    pub weight_cap: R,
    pub i_max: R,
    /// Gains are `gain_offset + gain_scale ⊙ raw` before saturation.
    pub gain_scale: [R; 3],
    pub gain_offset: [R; 3],
    pub ranges: FeatureRanges<R>,
}

impl<R: Real> Default for TunerConfig<R> {
    fn default() -> Self {
        Self {
            eta: R::lit(0.005),
            clip_c: R::lit(1.0),
            sigma_m: R::lit(0.01),
            k_min: [0.05, 1e-4, 0.0].map(R::lit),
            k_max: [10.0, 1.0, 100.0].map(R::lit),
            weight_cap: R::lit(5.0),
            i_max: R::lit(900.0),
            gain_scale: [R::one(); 3],
            gain_offset: [R::zero(); 3],
            ranges: FeatureRanges::default(),
        }
    }
}

impl<R: Real> TunerConfig<R> {
    pub fn validate(&self) -> Result<(), TunerError> {
        if !(self.eta > R::zero()) {
            return Err(TunerError::Config("eta must be positive".into()));
        }
        if !(self.clip_c > R::zero()) {
            return Err(TunerError::Config("clip_c must be positive".into()));
        }
        if !(self.sigma_m >= R::zero()) {
            return Err(TunerError::Config("sigma_m must be non-negative".into()));
        }
        if !(self.weight_cap > R::zero()) {
            return Err(TunerError::Config("weight_cap must be positive".into()));
        }
        for i in 0..3 {
            if !(self.k_min[i] < self.k_max[i]) {
                return Err(TunerError::Config(format!("k_min[{i}] must be below k_max[{i}]")));
            }
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass, needed by the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardPass<R = f64> {
    pub x: [R; N_INPUT],
    pub hidden: [R; N_HIDDEN],
    pub raw: [R; N_OUTPUT],
    pub gains: PidGains<R>,
    /// Output saturated at its band on this pass.
    pub clamped: [bool; N_OUTPUT],
}

#[inline]
fn sigmoid<R: Real>(z: R) -> R {
    R::one() / (R::one() + (-z).exp())
}

/// Network output before the gain affine map and clamp.
pub fn raw_output<R: Real>(params: &MlpParams<R>, x: &[R; N_INPUT]) -> ([R; N_HIDDEN], [R; N_OUTPUT]) {
    let mut hidden = [R::zero(); N_HIDDEN];
    for j in 0..N_HIDDEN {
        let z = (0..N_INPUT).fold(params.b1[j], |acc, k| acc + params.w1[j][k] * x[k]);
        hidden[j] = sigmoid(z);
    }
    let mut raw = [R::zero(); N_OUTPUT];
    for i in 0..N_OUTPUT {
        raw[i] = (0..N_HIDDEN).fold(params.b2[i], |acc, j| acc + params.w2[i][j] * hidden[j]);
    }
    (hidden, raw)
}

/// Forward pass on already-normalized inputs.
pub fn forward_normalized<R: Real>(params: &MlpParams<R>, x: [R; N_INPUT], cfg: &TunerConfig<R>) -> Result<ForwardPass<R>, TunerError> {
    params.check_finite()?;
    let (hidden, raw) = raw_output(params, &x);
    let mut gains = [R::zero(); 3];
    let mut clamped = [false; 3];
    for i in 0..3 {
        let g = cfg.gain_offset[i] + cfg.gain_scale[i] * raw[i];
        clamped[i] = !(g > cfg.k_min[i] && g < cfg.k_max[i]);
        gains[i] = clamp(g, cfg.k_min[i], cfg.k_max[i]);
    }
    Ok(ForwardPass { x, hidden, raw, gains: PidGains::from_array(gains), clamped })
}

pub fn forward_pass<R: Real>(params: &MlpParams<R>, x: &FeatureVector<R>, cfg: &TunerConfig<R>) -> Result<ForwardPass<R>, TunerError> {
    forward_normalized(params, cfg.ranges.normalize(x, cfg.i_max), cfg)
}

/// Gains for a feature vector, saturated to the configured bands.
pub fn forward<R: Real>(params: &MlpParams<R>, x: &FeatureVector<R>, cfg: &TunerConfig<R>) -> Result<PidGains<R>, TunerError> {
    Ok(forward_pass(params, x, cfg)?.gains)
}

/// Unclipped gradient of ½e² with respect to all parameters, flat layout.
///
/// `plant_sign` stands in for ∂VPD/∂u of the channel and `pid_partials`
/// are ∂u/∂(kp, ki, kd) from the live PID step.
pub fn gradient<R: Real>(
    params: &MlpParams<R>,
    pass: &ForwardPass<R>,
    e_vpd: R,
    plant_sign: R,
    pid_partials: [R; 3],
    cfg: &TunerConfig<R>,
) -> [R; PARAM_COUNT] {
    // dL/du = e · de/du, and e = VPD* − VPD so de/du ≈ −plant_sign.
    let dl_du = -e_vpd * plant_sign;
    let mut d_raw = [R::zero(); N_OUTPUT];
    for i in 0..N_OUTPUT {
        if !pass.clamped[i] {
            d_raw[i] = dl_du * pid_partials[i] * cfg.gain_scale[i];
        }
    }
    let mut g = MlpParams::<R>::zeros();
    for i in 0..N_OUTPUT {
        for j in 0..N_HIDDEN {
            g.w2[i][j] = d_raw[i] * pass.hidden[j];
        }
        g.b2[i] = d_raw[i];
    }
    for j in 0..N_HIDDEN {
        let dh = (0..N_OUTPUT).fold(R::zero(), |acc, i| acc + d_raw[i] * params.w2[i][j]);
        let dz = dh * pass.hidden[j] * (R::one() - pass.hidden[j]);
        for k in 0..N_INPUT {
            g.w1[j][k] = dz * pass.x[k];
        }
        g.b1[j] = dz;
    }
    g.to_flat()
}

/// Rescales `g` so its Euclidean norm is at most `cap`.
pub fn clip_gradient<R: Real>(g: &mut [R], cap: R) {
    let norm = g.iter().fold(R::zero(), |a, &v| a + v * v).sqrt();
    if norm > cap {
        let s = cap / norm;
        for v in g.iter_mut() {
            *v = *v * s;
        }
    }
}

/// One update step: θ ← (1 − ησ)θ − η·clip(∇), then cap every parameter.
pub fn update<R: Real>(
    params: &MlpParams<R>,
    pass: &ForwardPass<R>,
    e_vpd: R,
    plant_sign: R,
    pid_partials: [R; 3],
    cfg: &TunerConfig<R>,
) -> Result<MlpParams<R>, TunerError> {
    let mut g = gradient(params, pass, e_vpd, plant_sign, pid_partials, cfg);
    clip_gradient(&mut g, cfg.clip_c);
    Ok(apply_gradient(params, &g, cfg))
}

pub fn apply_gradient<R: Real>(params: &MlpParams<R>, g: &[R; PARAM_COUNT], cfg: &TunerConfig<R>) -> MlpParams<R> {
    let decay = R::one() - cfg.eta * cfg.sigma_m;
    let mut flat = params.to_flat();
    for (v, &gi) in flat.iter_mut().zip(g.iter()) {
        *v = clamp(decay * *v - cfg.eta * gi, -cfg.weight_cap, cfg.weight_cap);
    }
    MlpParams::from_flat(&flat).expect("fixed length")
}

/// Upper bound on the per-step parameter change norm.
pub fn max_step_norm<R: Real>(cfg: &TunerConfig<R>) -> R {
    cfg.eta * (cfg.clip_c + cfg.sigma_m * cfg.weight_cap * R::lit(PARAM_COUNT as f64).sqrt())
}

/// Inputs to the ultimate tracking-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UubInputs<R = f64> {
    pub d_bar: R,
    pub l_w: R,
    pub kp_min: R,
}

/// (d̄ + η·C·L_W) / K_p,min, in kPa.
pub fn uub_bound<R: Real>(inputs: &UubInputs<R>, cfg: &TunerConfig<R>) -> Result<R, TunerError> {
    if !(inputs.kp_min > R::zero()) {
        return Err(TunerError::NonPositiveKpMin(inputs.kp_min.as_f64()));
    }
    Ok((inputs.d_bar + cfg.eta * cfg.clip_c * inputs.l_w) / inputs.kp_min)
}

/// Lipschitz upper bound ‖W₂‖₂·¼·‖W₁‖₂ of the raw network output with
/// respect to the normalized input.
pub fn lipschitz_estimate<R: Real>(params: &MlpParams<R>) -> R {
    spectral_norm(&params.w2) * R::lit(0.25) * spectral_norm(&params.w1)
}

/// Largest singular value of a 3×N matrix via the eigenvalues of A·Aᵀ.
pub fn spectral_norm<R: Real, const N: usize>(a: &[[R; N]; 3]) -> R {
    let mut m = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..N).fold(R::zero(), |acc, k| acc + a[i][k] * a[j][k]);
        }
    }
    symmetric3_max_eigen(m).max(R::zero()).sqrt()
}

// Cyclic Jacobi rotations; converges to machine precision in a few sweeps for 3×3.
fn symmetric3_max_eigen<R: Real>(mut m: [[R; 3]; 3]) -> R {
    for _ in 0..64 {
        let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        if off <= R::epsilon() * R::epsilon() * (m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2]) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q] == R::zero() {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (R::lit(2.0) * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + R::one()).sqrt());
            let c = R::one() / (t * t + R::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let mkp = m[k][p];
                let mkq = m[k][q];
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[p][k];
                let mqk = m[q][k];
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
        }
    }
    m[0][0].max(m[1][1]).max(m[2][2])
}

/// Stateful tuner for one inner loop: parameters plus the cached forward pass.
#[derive(Debug, Clone)]
pub struct GainTuner<R = f64> {
    pub params: MlpParams<R>,
    pub cfg: TunerConfig<R>,
    /// Sign of ∂VPD/∂u for this channel.
    pub plant_sign: R,
    last: Option<ForwardPass<R>>,
}

impl<R: Real> GainTuner<R> {
    pub fn new(params: MlpParams<R>, cfg: TunerConfig<R>, plant_sign: R) -> Result<Self, TunerError> {
        cfg.validate()?;
        params.check_finite()?;
        Ok(Self { params, cfg, plant_sign, last: None })
    }

    /// Sets b₂ so that the all-zero feature vector reproduces `target` gains.
    pub fn warm_start(&mut self, target: PidGains<R>) {
        let (_, raw0) = raw_output(&self.params, &[R::zero(); N_INPUT]);
        let t = target.as_array();
        for i in 0..3 {
            let desired = (t[i] - self.cfg.gain_offset[i]) / self.cfg.gain_scale[i];
            self.params.b2[i] = self.params.b2[i] + desired - raw0[i];
        }
    }

    pub fn forward(&mut self, x: &FeatureVector<R>) -> Result<PidGains<R>, TunerError> {
        let pass = forward_pass(&self.params, x, &self.cfg)?;
        self.last = Some(pass);
        Ok(pass.gains)
    }

    pub fn update(&mut self, e_vpd: R, pid_partials: [R; 3]) -> Result<(), TunerError> {
        let pass = self.last.take().ok_or(TunerError::MissingForward)?;
        self.params = update(&self.params, &pass, e_vpd, self.plant_sign, pid_partials, &self.cfg)?;
        Ok(())
    }

    pub fn lipschitz(&self) -> R {
        lipschitz_estimate(&self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_features() -> FeatureVector {
        FeatureVector { t: 24.0, rh: 60.0, t_leaf: 23.0, co2: 800.0, ppfd: 600.0, e_vpd: 0.1, e_vpd_int: 30.0 }
    }

    #[test]
    fn thirty_six_parameters() {
        assert_eq!(PARAM_COUNT, 36);
        assert_eq!(MlpParams::<f64>::zeros().param_count(), 36);
        assert_eq!(MlpParams::<f64>::random(7, 0.2).param_count(), 36);
    }

    #[test]
    fn zero_network_saturates_to_floor() {
        let cfg = TunerConfig::default();
        let g = forward(&MlpParams::zeros(), &unit_features(), &cfg).unwrap();
        assert_eq!(g.as_array(), cfg.k_min);
    }

    #[test]
    fn hand_computed_forward() {
        let mut p = MlpParams::<f64>::zeros();
        p.w2 = [[1.0; 3]; 3];
        let cfg = TunerConfig { k_min: [0.0; 3], k_max: [10.0; 3], ..TunerConfig::default() };
        let pass = forward_pass(&p, &unit_features(), &cfg).unwrap();
        assert_eq!(pass.raw, [1.5, 1.5, 1.5]);
        assert_eq!(pass.gains.as_array(), [1.5, 1.5, 1.5]);
        let tight = TunerConfig { k_min: [0.0; 3], k_max: [1.0, 2.0, 1.2], ..cfg };
        assert_eq!(forward(&p, &unit_features(), &tight).unwrap().as_array(), [1.0, 1.5, 1.2]);
    }

    #[test]
    fn nan_params_rejected() {
        let mut p = MlpParams::<f64>::zeros();
        p.w2[1][2] = f64::NAN;
        assert_eq!(forward(&p, &unit_features(), &TunerConfig::default()), Err(TunerError::NonFiniteParam(29)));
    }

    #[test]
    fn zero_error_is_pure_decay() {
        let cfg = TunerConfig::default();
        let p = MlpParams::random(3, 0.2);
        let pass = forward_pass(&p, &unit_features(), &cfg).unwrap();
        let next = update(&p, &pass, 0.0, 1.0, [0.3, 20.0, -0.01], &cfg).unwrap();
        let decay = 1.0 - cfg.eta * cfg.sigma_m;
        for (a, b) in next.to_flat().iter().zip(p.to_flat().iter()) {
            assert_eq!(*a, decay * *b);
        }
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = [0.0; PARAM_COUNT];
        g[0] = 6.0;
        g[5] = 8.0;
        clip_gradient(&mut g, 1.0);
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-15);
        let mut small = [0.0; PARAM_COUNT];
        small[3] = 0.5;
        clip_gradient(&mut small, 1.0);
        assert_eq!(small[3], 0.5);
    }

    #[test]
    fn uub_examples() {
        let cfg = TunerConfig { eta: 0.01, clip_c: 1.0, ..TunerConfig::default() };
        let b = uub_bound(&UubInputs { d_bar: 0.1, l_w: 2.0, kp_min: 0.5 }, &cfg).unwrap();
        assert_abs_diff_eq!(b, 0.24, epsilon = 1e-12);
        let zero_eta = TunerConfig { eta: 0.0, ..cfg };
        assert_eq!(uub_bound(&UubInputs { d_bar: 0.0, l_w: 2.0, kp_min: 0.5 }, &zero_eta).unwrap(), 0.0);
        assert!(uub_bound(&UubInputs { d_bar: 0.1, l_w: 2.0, kp_min: 0.0 }, &cfg).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_estimate(&MlpParams::<f64>::zeros()), 0.0);
        let mut p = MlpParams::<f64>::zeros();
        for i in 0..3 {
            p.w1[i][i] = 1.0;
            p.w2[i][i] = 1.0;
        }
        assert_abs_diff_eq!(lipschitz_estimate(&p), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_matches_known_matrix() {
        // diag(3, 2, 1) rotated by a permutation has norm 3.
        let a = [[0.0, 3.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        assert_abs_diff_eq!(spectral_norm(&a), 3.0, epsilon = 1e-12);
        // rank-one u vᵀ has norm |u||v|.
        let b = [[1.0, 2.0, 2.0, 0.0], [2.0, 4.0, 4.0, 0.0], [2.0, 4.0, 4.0, 0.0]];
        assert_abs_diff_eq!(spectral_norm(&b), 9.0, epsilon = 1e-10);
    }

    #[test]
    fn csv_snapshot_restores() {
        let p = MlpParams::<f64>::random(11, 0.2);
        let line = p.to_csv_line();
        assert_eq!(line.split(',').count(), 36);
        assert_eq!(MlpParams::<f64>::from_csv_line(&line).unwrap(), p);
        assert!(matches!(MlpParams::<f64>::from_csv_line("1,2,3"), Err(TunerError::WrongParamCount(3))));
    }

    #[test]
    fn warm_start_reproduces_target() {
        let cfg = TunerConfig { k_min: [0.0; 3], k_max: [100.0; 3], gain_scale: [2.0, 0.01, 5.0], ..TunerConfig::default() };
        let mut t = GainTuner::new(MlpParams::random(5, 0.2), cfg, 1.0).unwrap();
        let target = PidGains::new(3.0, 0.02, 40.0);
        t.warm_start(target);
        let (_, raw) = raw_output(&t.params, &[0.0; N_INPUT]);
        for i in 0..3 {
            assert_abs_diff_eq!(cfg.gain_scale[i] * raw[i], target.as_array()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn update_requires_forward() {
        let mut t = GainTuner::new(MlpParams::random(5, 0.2), TunerConfig::default(), 1.0).unwrap();
        assert_eq!(t.update(0.1, [1.0, 1.0, 1.0]), Err(TunerError::MissingForward));
        t.forward(&unit_features()).unwrap();
        t.update(0.1, [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t.update(0.1, [1.0, 1.0, 1.0]), Err(TunerError::MissingForward));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TunerConfig::<f64> { k_min: [1.0, 0.0, 0.0], k_max: [1.0, 1.0, 1.0], ..TunerConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(TunerConfig::<f64> { eta: 0.0, ..TunerConfig::default() }.validate().is_err());
    }
}
