use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::region::AxisBox;
use crate::error::{PcisError, Result};

/// Number of standard deviations beyond which the Gaussian density is
/// treated as zero when bounding its support.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 9.0;

/// Transition density t(y|x,u).
pub trait TransitionDensity: Send + Sync + fmt::Debug {
    fn density(&self, y: &[f64], x: &[f64], u: &[f64]) -> f64;

    /// A box outside of which the density is negligible, if known.
    fn support(&self, _x: &[f64], _u: &[f64]) -> Option<AxisBox> {
        None
    }

    /// Densities at the points packed in `ys` (stride `x.len()`) into `out`.
    fn density_batch(&self, ys: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        for (y, o) in ys.chunks_exact(x.len()).zip(out.iter_mut()) {
            *o = self.density(y, x, u);
        }
    }
}

/// Draws a successor state distributed as t(·|x,u).
pub trait TransitionSampler: Send + Sync + fmt::Debug {
    fn sample(&self, x: &[f64], u: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;
}

/// State-dependent admissible control sub-box.
pub type AdmissibleControls = Arc<dyn Fn(&[f64]) -> AxisBox + Send + Sync>;

/// Standard normal draw by the Box–Muller transform.
pub fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    TruncatedGaussian,
}

/// Isotropic additive noise; `truncation` is the absolute half-width per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub kind: NoiseKind,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

/// x⁺ = A x + B u + c + w.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamics {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
    pub noise: Noise,
}

fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_fn(r, c, |i, j| rows[i][j]);
    m.singular_values().max()
}

impl LinearDynamics {
    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn control_dim(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.control_dim();
        let field = |f: &str, msg: String| PcisError::Field {
            field: format!("dynamics.{f}"),
            message: msg,
        };
        if n == 0 || self.a.iter().any(|r| r.len() != n) {
            return Err(field("A", "must be a nonempty square matrix".into()));
        }
        if self.b.len() != n || m == 0 || self.b.iter().any(|r| r.len() != m) {
            return Err(field("B", format!("must have {n} rows of equal nonzero length")));
        }
        if !self.c.is_empty() && self.c.len() != n {
            return Err(field("c", format!("must have length {n}")));
        }
        if !(self.noise.sigma > 0.0 && self.noise.sigma.is_finite()) {
            return Err(field("noise.sigma", "must be positive".into()));
        }
        match (self.noise.kind, self.noise.truncation) {
            (NoiseKind::TruncatedGaussian, Some(t)) if t > 0.0 && t.is_finite() => {}
            (NoiseKind::TruncatedGaussian, _) => {
                return Err(field("noise.truncation", "must be positive".into()))
            }
            (NoiseKind::Gaussian, Some(_)) => {
                return Err(field(
                    "noise.truncation",
                    "only allowed for truncated-gaussian noise".into(),
                ))
            }
            (NoiseKind::Gaussian, None) => {}
        }
        Ok(())
    }

    pub fn mean(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.state_dim())
            .map(|i| {
                let ax: f64 = self.a[i].iter().zip(x).map(|(a, x)| a * x).sum();
                let bu: f64 = self.b[i].iter().zip(u).map(|(b, u)| b * u).sum();
                ax + bu + self.c.get(i).copied().unwrap_or(0.0)
            })
            .collect()
    }

    /// Per-axis normalizer of the noise density (1 for untruncated noise).
    fn axis_mass(&self) -> f64 {
        match self.noise.truncation {
            Some(t) => 2.0 * normal_cdf(t / self.noise.sigma) - 1.0,
            None => 1.0,
        }
    }

    /// Lipschitz constant of t(y|·,·) in the sense ‖x−x'‖ + ‖u−u'‖.
    ///
    /// The gradient norm of an isotropic Gaussian density in n dimensions
    /// peaks at e^{-1/2}(2π)^{-n/2}σ^{-(n+1)}; the chain rule contributes
    /// max(‖A‖₂, ‖B‖₂). Truncation rescales the density by the inverse mass.
    pub fn gaussian_lipschitz(&self) -> f64 {
        let n = self.state_dim() as f64;
        let s = self.noise.sigma;
        let grad = (-0.5f64).exp() * (2.0 * PI).powf(-n / 2.0) * s.powf(-(n + 1.0));
        let gain = spectral_norm(&self.a).max(spectral_norm(&self.b));
        grad * gain / self.axis_mass().powf(n)
    }
}

#[derive(Debug)]
struct LinearGaussianKernel {
    dynamics: LinearDynamics,
    log_norm: f64,
}

impl LinearGaussianKernel {
    fn new(dynamics: LinearDynamics) -> Self {
        let n = dynamics.state_dim() as f64;
        let s = dynamics.noise.sigma;
        let log_norm = -n * (s * (2.0 * PI).sqrt() * dynamics.axis_mass()).ln();
        Self { dynamics, log_norm }
    }
}

impl TransitionDensity for LinearGaussianKernel {
    fn density(&self, y: &[f64], x: &[f64], u: &[f64]) -> f64 {
        let mean = self.dynamics.mean(x, u);
        let s = self.dynamics.noise.sigma;
        let mut q = 0.0;
        for (yi, mi) in y.iter().zip(&mean) {
            let d = yi - mi;
            if let Some(t) = self.dynamics.noise.truncation {
                if d.abs() > t {
                    return 0.0;
                }
            }
            q += d * d;
        }
        (self.log_norm - 0.5 * q / (s * s)).exp()
    }

    fn density_batch(&self, ys: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        let mean = self.dynamics.mean(x, u);
        let s = self.dynamics.noise.sigma;
        let inv = 0.5 / (s * s);
        let trunc = self.dynamics.noise.truncation.unwrap_or(f64::INFINITY);
        for (y, o) in ys.chunks_exact(mean.len()).zip(out.iter_mut()) {
            let mut q = 0.0;
            let mut inside = true;
            for (yi, mi) in y.iter().zip(&mean) {
                let d = yi - mi;
                inside &= d.abs() <= trunc;
                q += d * d;
            }
            *o = if inside { (self.log_norm - q * inv).exp() } else { 0.0 };
        }
    }

    fn support(&self, x: &[f64], u: &[f64]) -> Option<AxisBox> {
        let mean = self.dynamics.mean(x, u);
        let r = self
            .dynamics
            .noise
            .truncation
            .unwrap_or(GAUSSIAN_SUPPORT_SIGMAS * self.dynamics.noise.sigma);
        AxisBox::new(
            mean.iter().map(|m| m - r).collect(),
            mean.iter().map(|m| m + r).collect(),
        )
        .ok()
    }
}

impl TransitionSampler for LinearGaussianKernel {
    fn sample(&self, x: &[f64], u: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let s = self.dynamics.noise.sigma;
        let mut y = self.dynamics.mean(x, u);
        for yi in &mut y {
            let w = loop {
                let w = s * standard_normal(rng);
                match self.dynamics.noise.truncation {
                    Some(t) if w.abs() > t => continue,
                    _ => break w,
                }
            };
            *yi += w;
        }
        y
    }
}

/// Markov controlled process on ℝ^{n_x} with a transition density.
#[derive(Clone)]
pub struct ContinuousModel {
    state_dim: usize,
    control_dim: usize,
    density: Arc<dyn TransitionDensity>,
    sampler: Option<Arc<dyn TransitionSampler>>,
    lipschitz: f64,
    control_box: AxisBox,
    admissible: Option<AdmissibleControls>,
    linear: Option<LinearDynamics>,
}

impl fmt::Debug for ContinuousModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousModel")
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("lipschitz", &self.lipschitz)
            .field("control_box", &self.control_box)
            .field("linear", &self.linear)
            .finish_non_exhaustive()
    }
}

impl ContinuousModel {
    pub fn new(
        state_dim: usize,
        control_dim: usize,
        density: Arc<dyn TransitionDensity>,
        lipschitz: f64,
        control_box: AxisBox,
    ) -> Result<Self> {
        if state_dim == 0 || control_dim == 0 {
            return Err(PcisError::InvalidArgument(
                "state and control dimensions must be positive".into(),
            ));
        }
        if control_box.dim() != control_dim {
            return Err(PcisError::Field {
                field: "control_box".into(),
                message: format!("has dimension {}, expected {control_dim}", control_box.dim()),
            });
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(PcisError::Field {
                field: "lipschitz_L".into(),
                message: format!("must be a nonnegative number, got {lipschitz}"),
            });
        }
        Ok(Self {
            state_dim,
            control_dim,
            density,
            sampler: None,
            lipschitz,
            control_box,
            admissible: None,
            linear: None,
        })
    }

    /// Linear dynamics with additive (truncated) Gaussian noise. `lipschitz`
    /// defaults to [`LinearDynamics::gaussian_lipschitz`].
    pub fn linear(
        dynamics: LinearDynamics,
        lipschitz: Option<f64>,
        control_box: AxisBox,
    ) -> Result<Self> {
        dynamics.check()?;
        let lipschitz = lipschitz.unwrap_or_else(|| dynamics.gaussian_lipschitz());
        let kernel = Arc::new(LinearGaussianKernel::new(dynamics.clone()));
        let mut model = Self::new(
            dynamics.state_dim(),
            dynamics.control_dim(),
            kernel.clone(),
            lipschitz,
            control_box,
        )?;
        model.sampler = Some(kernel);
        model.linear = Some(dynamics);
        Ok(model)
    }

    pub fn with_sampler(mut self, sampler: Arc<dyn TransitionSampler>) -> Self {
        self.sampler = Some(sampler);
        self
    }

    pub fn with_admissible_controls(mut self, f: AdmissibleControls) -> Self {
        self.admissible = Some(f);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn control_box(&self) -> &AxisBox {
        &self.control_box
    }

    pub fn linear_dynamics(&self) -> Option<&LinearDynamics> {
        self.linear.as_ref()
    }

    pub fn density(&self, y: &[f64], x: &[f64], u: &[f64]) -> f64 {
        self.density.density(y, x, u)
    }

    /// Batched [`ContinuousModel::density`] over points packed in `ys`.
    pub fn density_batch(&self, ys: &[f64], x: &[f64], u: &[f64], out: &mut [f64]) {
        self.density.density_batch(ys, x, u, out)
    }

    pub fn support(&self, x: &[f64], u: &[f64]) -> Option<AxisBox> {
        self.density.support(x, u)
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    /// Admissible control sub-box at `x`; the full box by default.
    pub fn admissible_box(&self, x: &[f64]) -> AxisBox {
        match &self.admissible {
            Some(f) => f(x),
            None => self.control_box.clone(),
        }
    }

    /// One successor draw; rejects non-finite or mis-sized samples.
    pub fn sample(&self, x: &[f64], u: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let sampler = self
            .sampler
            .as_ref()
            .ok_or_else(|| PcisError::InvalidArgument("model has no sampler".into()))?;
        let y = sampler.sample(x, u, rng);
        if y.len() != self.state_dim || y.iter().any(|v| !v.is_finite()) {
            return Err(PcisError::InvalidArgument(format!(
                "sampler returned {y:?}, expected {} finite values",
                self.state_dim
            )));
        }
        Ok(y)
    }
}
