//! Closed-form desired states on `Q = (0,1)^d` with Sobolev-class metadata.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::SimplexCoords;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SmoothnessClass {
    /// In `H^2(Q)`.
    H2,
    /// In `H^{3/2-eps}(Q)`.
    H32,
    /// In `H^{1/2-eps}(Q)`.
    H12,
}

impl SmoothnessClass {
    /// L2 convergence rate expected under `rho = h^2`.
    pub fn expected_rate(self) -> f64 {
        match self {
            SmoothnessClass::H2 => 2.0,
            SmoothnessClass::H32 => 1.5,
            SmoothnessClass::H12 => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum TargetKind {
    /// `prod_i sin(pi y_i)` over all space-time coordinates.
    Smooth,
    /// Max-norm cone `1 - 2 |y - c|_inf`, one at the center, zero on the boundary.
    Hat,
    /// Indicator of the closed cube `[1/4, 3/4]^d`.
    CubeIndicator,
    /// Cube indicator plus `2 sqrt(2) delta sin(10 pi x1) sin(10 pi x2) sin(10 pi t)`.
    NoisyIndicator { delta: f64 },
    Custom { name: String },
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A desired state `u_bar` together with what is known about its regularity.
#[derive(Clone)]
pub struct TargetSpec {
    kind: TargetKind,
    dim: usize,
    class: SmoothnessClass,
    custom: Option<CustomFn>,
}

impl fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetSpec")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("class", &self.class)
            .finish()
    }
}

const CUBE_LO: f64 = 0.25;
const CUBE_HI: f64 = 0.75;
const NOISE_FREQ: f64 = 10.0 * PI;

fn check_dim(d: usize) -> Result<()> {
    if (2..=4).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

impl TargetSpec {
    /// `sin(pi x1) .. sin(pi xn) sin(pi t)` with `n_space` space dimensions.
    pub fn smooth(n_space: usize) -> Result<Self> {
        check_dim(n_space + 1)?;
        Ok(TargetSpec {
            kind: TargetKind::Smooth,
            dim: n_space + 1,
            class: SmoothnessClass::H2,
            custom: None,
        })
    }

    pub fn hat(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(TargetSpec { kind: TargetKind::Hat, dim, class: SmoothnessClass::H32, custom: None })
    }

    pub fn cube_indicator(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(TargetSpec {
            kind: TargetKind::CubeIndicator,
            dim,
            class: SmoothnessClass::H12,
            custom: None,
        })
    }

    /// Cube indicator in two space dimensions polluted with oscillatory
    /// noise of L2 size `delta`. `delta = 0` gives the clean indicator.
    pub fn noisy_indicator(delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {delta}")));
        }
        Ok(TargetSpec {
            kind: TargetKind::NoisyIndicator { delta },
            dim: 3,
            class: SmoothnessClass::H12,
            custom: None,
        })
    }

    pub fn custom<F>(name: &str, dim: usize, class: SmoothnessClass, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(TargetSpec {
            kind: TargetKind::Custom { name: name.to_string() },
            dim,
            class,
            custom: Some(Arc::new(f)),
        })
    }

    /// Looks a target up by its config name.
    pub fn by_name(name: &str, dim: usize, delta: Option<f64>) -> Result<Self> {
        match name {
            "smooth" => TargetSpec::smooth(dim.saturating_sub(1)),
            "hat" => TargetSpec::hat(dim),
            "cube" | "cube_indicator" => TargetSpec::cube_indicator(dim),
            "noisy" | "noisy_indicator" => {
                if dim != 3 {
                    return Err(Error::InvalidArgument(
                        "the noisy indicator is defined for d = 3 only".into(),
                    ));
                }
                TargetSpec::noisy_indicator(delta.unwrap_or(0.0))
            }
            other => Err(Error::InvalidArgument(format!("unknown target '{other}'"))),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            TargetKind::Smooth => "smooth".into(),
            TargetKind::Hat => "hat".into(),
            TargetKind::CubeIndicator => "cube_indicator".into(),
            TargetKind::NoisyIndicator { .. } => "noisy_indicator".into(),
            TargetKind::Custom { name } => name.clone(),
        }
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness_class(&self) -> SmoothnessClass {
        self.class
    }

    pub fn expected_rate(&self) -> f64 {
        self.class.expected_rate()
    }

    pub fn is_smooth(&self) -> bool {
        self.class == SmoothnessClass::H2
    }

    /// Noise level of a noisy indicator, zero otherwise.
    pub fn noise_level(&self) -> f64 {
        match self.kind {
            TargetKind::NoisyIndicator { delta } => delta,
            _ => 0.0,
        }
    }

    /// The noise-free target a noisy indicator was derived from.
    pub fn clean(&self) -> TargetSpec {
        match self.kind {
            TargetKind::NoisyIndicator { .. } => TargetSpec {
                kind: TargetKind::CubeIndicator,
                dim: 3,
                class: SmoothnessClass::H12,
                custom: None,
            },
            _ => self.clone(),
        }
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        match &self.kind {
            TargetKind::Smooth => y.iter().map(|&c| (PI * c).sin()).product(),
            TargetKind::Hat => {
                let r = y.iter().map(|&c| (c - 0.5).abs()).fold(0.0, f64::max);
                (1.0 - 2.0 * r).max(0.0)
            }
            TargetKind::CubeIndicator => cube(y),
            TargetKind::NoisyIndicator { delta } => {
                let noise = 2.0 * 2.0f64.sqrt() * delta
                    * (NOISE_FREQ * y[0]).sin()
                    * (NOISE_FREQ * y[1]).sin()
                    * (NOISE_FREQ * y[2]).sin();
                cube(y) + noise
            }
            TargetKind::Custom { .. } => (self.custom.as_ref().expect("custom evaluator"))(y),
        }
    }

    /// Whether the target may fail to be smooth (a polynomial-friendly
    /// function) on the simplex with vertices `x`. Used to decide where
    /// subdivided quadrature is needed; conservative answers are safe.
    pub fn may_be_rough_on(&self, x: &SimplexCoords) -> bool {
        let d = self.dim;
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for row in &x[..=d] {
            for c in 0..d {
                lo[c] = lo[c].min(row[c]);
                hi[c] = hi[c].max(row[c]);
            }
        }
        match &self.kind {
            TargetKind::Smooth => false,
            TargetKind::Hat => !hat_is_linear_on(&lo[..d], &hi[..d]),
            TargetKind::CubeIndicator => !cube_is_constant_on(&lo[..d], &hi[..d]),
            TargetKind::NoisyIndicator { delta } => {
                let diameter = (0..d)
                    .map(|c| (hi[c] - lo[c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                !cube_is_constant_on(&lo[..d], &hi[..d])
                    || (*delta > 0.0 && diameter * NOISE_FREQ > 1.0)
            }
            TargetKind::Custom { .. } => !self.is_smooth(),
        }
    }

    /// Closed-form `||u_bar||_{L2(Q)}` where known.
    pub fn l2_norm(&self) -> Option<f64> {
        let d = self.dim as i32;
        match self.kind {
            TargetKind::Smooth => Some(0.5f64.powi(d).sqrt()),
            TargetKind::Hat => Some((2.0 / ((d + 1) * (d + 2)) as f64).sqrt()),
            TargetKind::CubeIndicator => Some(0.5f64.powi(d).sqrt()),
            // the noise is orthogonal to the indicator
            TargetKind::NoisyIndicator { delta } => Some((0.125 + delta * delta).sqrt()),
            TargetKind::Custom { .. } => None,
        }
    }
}

#[inline]
fn cube(y: &[f64]) -> f64 {
    if y.iter().all(|&c| (CUBE_LO..=CUBE_HI).contains(&c)) {
        1.0
    } else {
        0.0
    }
}

/// Constant almost everywhere on the box: inside the closed cube, or
/// separated from the open cube along some axis.
fn cube_is_constant_on(lo: &[f64], hi: &[f64]) -> bool {
    let inside = lo.iter().zip(hi).all(|(&l, &h)| l >= CUBE_LO && h <= CUBE_HI);
    let outside = lo.iter().zip(hi).any(|(&l, &h)| h <= CUBE_LO || l >= CUBE_HI);
    inside || outside
}

/// The cone is linear wherever a single signed coordinate attains the max
/// norm: `s (y_i - 1/2) >= |y_j - 1/2|` for all `j`.
fn hat_is_linear_on(lo: &[f64], hi: &[f64]) -> bool {
    let d = lo.len();
    (0..d).any(|i| {
        [1.0f64, -1.0].iter().any(|&s| {
            let min_active = if s > 0.0 { lo[i] - 0.5 } else { 0.5 - hi[i] };
            (0..d).filter(|&j| j != i).all(|j| {
                let max_other = (lo[j] - 0.5).abs().max((hi[j] - 0.5).abs());
                min_active >= max_other
            })
        })
    })
}
