use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModulationKind {
    /// `gain · p + offset`
    Linear {
        gain: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Zero below `threshold`, quadratic ramp of width `width`, then slope `gain`.
    /// `width = 0` gives the sharp rectifier.
    SmoothedRectifier {
        gain: f64,
        #[serde(default)]
        threshold: f64,
        #[serde(default)]
        width: f64,
    },
    /// `max / (1 + exp(-gain (p - threshold)))`
    Sigmoid {
        max: f64,
        gain: f64,
        #[serde(default)]
        threshold: f64,
    },
    /// Piecewise linear through `(x, y)`, constant beyond the table.
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Nonnegative,
    Nonpositive,
    Mixed,
}

/// Firing-rate modulation `Φ`, optionally multiplied by a positive output scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationFn {
    pub kind: ModulationKind,
    pub scale: f64,
}

const FD_STEP: f64 = 1e-5;

impl ModulationFn {
    pub fn new(kind: ModulationKind) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        match &kind {
            ModulationKind::Linear { gain, offset } => {
                if !ok(*gain) || !ok(*offset) {
                    return Err(Error::InvalidConfig(
                        "linear modulation has non-finite parameters".into(),
                    ));
                }
            }
            ModulationKind::SmoothedRectifier {
                gain,
                threshold,
                width,
            } => {
                if !ok(*gain) || !ok(*threshold) || !ok(*width) || *width < 0.0 {
                    return Err(Error::InvalidConfig(
                        "rectifier needs finite gain/threshold and width >= 0".into(),
                    ));
                }
            }
            ModulationKind::Sigmoid {
                max,
                gain,
                threshold,
            } => {
                if !ok(*max) || !ok(*gain) || !ok(*threshold) {
                    return Err(Error::InvalidConfig(
                        "sigmoid has non-finite parameters".into(),
                    ));
                }
            }
            ModulationKind::Tabulated { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(Error::InvalidConfig(
                        "tabulated modulation needs >= 2 matching points".into(),
                    ));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(y).any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidConfig(
                        "tabulated modulation needs finite, increasing x".into(),
                    ));
                }
            }
        }
        Ok(ModulationFn { kind, scale: 1.0 })
    }

    pub fn linear(gain: f64, offset: f64) -> Self {
        Self::new(ModulationKind::Linear { gain, offset }).unwrap()
    }

    pub fn rectifier(gain: f64, threshold: f64, width: f64) -> Self {
        Self::new(ModulationKind::SmoothedRectifier {
            gain,
            threshold,
            width,
        })
        .unwrap()
    }

    pub fn sigmoid(max: f64, gain: f64, threshold: f64) -> Self {
        Self::new(ModulationKind::Sigmoid {
            max,
            gain,
            threshold,
        })
        .unwrap()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        ModulationFn {
            kind: self.kind.clone(),
            scale: self.scale * factor,
        }
    }

    fn raw(&self, p: f64) -> f64 {
        match &self.kind {
            ModulationKind::Linear { gain, offset } => gain * p + offset,
            ModulationKind::SmoothedRectifier {
                gain,
                threshold,
                width,
            } => {
                let q = p - threshold;
                if q <= 0.0 {
                    0.0
                } else if q < *width {
                    gain * q * q / (2.0 * width)
                } else {
                    gain * (q - 0.5 * width)
                }
            }
            ModulationKind::Sigmoid {
                max,
                gain,
                threshold,
            } => max / (1.0 + (-gain * (p - threshold)).exp()),
            ModulationKind::Tabulated { x, y } => {
                let n = x.len();
                if p <= x[0] {
                    return y[0];
                }
                if p >= x[n - 1] {
                    return y[n - 1];
                }
                let j = x.partition_point(|&v| v <= p) - 1;
                y[j] + (y[j + 1] - y[j]) * (p - x[j]) / (x[j + 1] - x[j])
            }
        }
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        self.scale * self.raw(p)
    }

    pub fn deriv(&self, p: f64) -> f64 {
        let d = match &self.kind {
            ModulationKind::Linear { gain, .. } => *gain,
            ModulationKind::SmoothedRectifier {
                gain,
                threshold,
                width,
            } => {
                let q = p - threshold;
                if q <= 0.0 {
                    0.0
                } else if q < *width {
                    gain * q / width
                } else {
                    *gain
                }
            }
            ModulationKind::Sigmoid {
                max,
                gain,
                threshold,
            } => {
                let s = 1.0 / (1.0 + (-gain * (p - threshold)).exp());
                max * gain * s * (1.0 - s)
            }
            ModulationKind::Tabulated { .. } => {
                (self.raw(p + FD_STEP) - self.raw(p - FD_STEP)) / (2.0 * FD_STEP)
            }
        };
        self.scale * d
    }

    pub fn deriv2(&self, p: f64) -> f64 {
        let d = match &self.kind {
            ModulationKind::Linear { .. } => 0.0,
            ModulationKind::SmoothedRectifier {
                gain,
                threshold,
                width,
            } => {
                let q = p - threshold;
                if q > 0.0 && q < *width {
                    gain / width
                } else {
                    0.0
                }
            }
            ModulationKind::Sigmoid {
                max,
                gain,
                threshold,
            } => {
                let s = 1.0 / (1.0 + (-gain * (p - threshold)).exp());
                max * gain * gain * s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            ModulationKind::Tabulated { .. } => {
                (self.raw(p + FD_STEP) - 2.0 * self.raw(p) + self.raw(p - FD_STEP))
                    / (FD_STEP * FD_STEP)
            }
        };
        self.scale * d
    }

    /// `‖Φ'‖_∞` over the real line.
    pub fn lipschitz(&self) -> f64 {
        let l = match &self.kind {
            ModulationKind::Linear { gain, .. } => gain.abs(),
            ModulationKind::SmoothedRectifier { gain, .. } => gain.abs(),
            ModulationKind::Sigmoid { max, gain, .. } => (max * gain).abs() / 4.0,
            ModulationKind::Tabulated { x, y } => x
                .windows(2)
                .zip(y.windows(2))
                .map(|(a, b)| ((b[1] - b[0]) / (a[1] - a[0])).abs())
                .fold(0.0, f64::max),
        };
        self.scale * l
    }

    pub fn sign(&self) -> Sign {
        match &self.kind {
            ModulationKind::Linear { gain, offset } => {
                if *gain != 0.0 {
                    Sign::Mixed
                } else if *offset >= 0.0 {
                    Sign::Nonnegative
                } else {
                    Sign::Nonpositive
                }
            }
            ModulationKind::SmoothedRectifier { gain, .. } => {
                if *gain >= 0.0 {
                    Sign::Nonnegative
                } else {
                    Sign::Nonpositive
                }
            }
            ModulationKind::Sigmoid { max, .. } => {
                if *max >= 0.0 {
                    Sign::Nonnegative
                } else {
                    Sign::Nonpositive
                }
            }
            ModulationKind::Tabulated { y, .. } => {
                if y.iter().all(|&v| v >= 0.0) {
                    Sign::Nonnegative
                } else if y.iter().all(|&v| v <= 0.0) {
                    Sign::Nonpositive
                } else {
                    Sign::Mixed
                }
            }
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match &self.kind {
            ModulationKind::Linear { gain, .. } => *gain >= 0.0,
            ModulationKind::SmoothedRectifier { gain, .. } => *gain >= 0.0,
            ModulationKind::Sigmoid { max, gain, .. } => max * gain >= 0.0,
            ModulationKind::Tabulated { y, .. } => y.windows(2).all(|w| w[1] >= w[0]),
        }
    }

    /// Largest value of `|Φ|` on `[lo, hi]` (exact for monotone kinds, sampled otherwise).
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.eval(lo).abs().max(self.eval(hi).abs());
        if let ModulationKind::Tabulated { x, .. } = &self.kind {
            for &xi in x {
                if xi > lo && xi < hi {
                    m = m.max(self.eval(xi).abs());
                }
            }
        }
        m
    }

    /// `Φ^{-1}(ω)` for nondecreasing `Φ`, by bisection to `1e-12`.
    pub fn inverse(&self, omega: f64) -> Result<f64> {
        if !self.is_nondecreasing() {
            return Err(Error::NotInvertible(
                "modulation is not nondecreasing".into(),
            ));
        }
        let mut lo = -1.0;
        let mut hi = 1.0;
        let mut k = 0;
        while self.eval(lo) > omega || self.eval(hi) < omega {
            if self.eval(lo) > omega {
                lo *= 2.0;
            }
            if self.eval(hi) < omega {
                hi *= 2.0;
            }
            k += 1;
            if k > 1100 || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NotInvertible(format!(
                    "value {omega} outside the range"
                )));
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < omega {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
