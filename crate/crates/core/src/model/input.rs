use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputForm {
    Constant {
        value: f64,
    },
    /// Piecewise linear in time, held constant outside the table.
    Tabulated {
        t: Vec<f64>,
        values: Vec<f64>,
    },
}

/// External drive `B(t)`; `time_scale` maps the caller's clock to the table's clock.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalInput {
    pub form: InputForm,
    pub time_scale: f64,
}

impl ExternalInput {
    pub fn new(form: InputForm) -> Result<Self> {
        if let InputForm::Tabulated { t, values } = &form {
            if t.is_empty() || t.len() != values.len() {
                return Err(Error::InvalidConfig(
                    "tabulated input needs matching, non-empty tables".into(),
                ));
            }
            if t.windows(2).any(|w| !(w[1] > w[0]))
                || t.iter().chain(values).any(|v| !v.is_finite())
            {
                return Err(Error::InvalidConfig(
                    "tabulated input needs finite, increasing times".into(),
                ));
            }
        }
        if let InputForm::Constant { value } = &form {
            if !value.is_finite() {
                return Err(Error::InvalidConfig("input value is not finite".into()));
            }
        }
        Ok(ExternalInput {
            form,
            time_scale: 1.0,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(InputForm::Constant { value }).unwrap()
    }

    pub fn with_time_scale(&self, factor: f64) -> Self {
        ExternalInput {
            form: self.form.clone(),
            time_scale: self.time_scale * factor,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.form {
            InputForm::Constant { value } => *value,
            InputForm::Tabulated { t: ts, values } => {
                let t = t * self.time_scale;
                let n = ts.len();
                if t <= ts[0] {
                    return values[0];
                }
                if t >= ts[n - 1] {
                    return values[n - 1];
                }
                let j = ts.partition_point(|&v| v <= t) - 1;
                values[j] + (values[j + 1] - values[j]) * (t - ts[j]) / (ts[j + 1] - ts[j])
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.form {
            InputForm::Constant { value } => value.abs(),
            InputForm::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let b = ExternalInput::new(InputForm::Tabulated {
            t: vec![0.0, 1.0, 3.0],
            values: vec![1.0, 2.0, 0.0],
        })
        .unwrap();
        assert_eq!(b.eval(-1.0), 1.0);
        assert!((b.eval(0.5) - 1.5).abs() < 1e-15);
        assert!((b.eval(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(b.eval(10.0), 0.0);
        let slow = b.with_time_scale(2.0);
        assert!((slow.eval(0.25) - 1.5).abs() < 1e-15);
    }
}
