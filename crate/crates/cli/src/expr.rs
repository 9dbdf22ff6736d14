//! Scalar expressions from configuration strings.

use std::sync::Arc;

use exmex::{Express, FlatEx};

/// Compiled expression evaluated against a fixed variable list.
#[derive(Clone)]
pub struct Formula {
    text: String,
    expr: Arc<FlatEx<f64>>,
    // position in `vars` of each variable the expression uses
    slots: Vec<usize>,
}

impl std::fmt::Debug for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Formula({:?})", self.text)
    }
}

impl Formula {
    /// Parses `text`; every variable must appear in `vars`.
    pub fn parse(text: &str, vars: &[&str]) -> Result<Self, String> {
        let expr = exmex::parse::<f64>(text).map_err(|e| format!("cannot parse {text:?}: {e}"))?;
        let slots = expr
            .var_names()
            .iter()
            .map(|name| {
                vars.iter().position(|v| v == name).ok_or_else(|| {
                    format!(
                        "unknown variable `{name}` in {text:?} (allowed: {})",
                        vars.join(", ")
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            text: text.to_string(),
            expr: Arc::new(expr),
            slots,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.slots.is_empty()
    }

    /// Evaluates with `values` ordered as the `vars` given to [`Formula::parse`].
    /// Evaluation failures yield NaN, which the solver reports.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut args = [0.0; 4];
        for (a, &s) in args.iter_mut().zip(&self.slots) {
            *a = values[s];
        }
        self.expr
            .eval(&args[..self.slots.len()])
            .unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_follow_declared_order() {
        let f = Formula::parse("u - 2*x", &["x", "t", "u", "w"]).unwrap();
        assert_eq!(f.eval(&[1.0, 9.0, 5.0, 9.0]), 3.0);
    }

    #[test]
    fn constants_and_functions() {
        let f = Formula::parse("cos(PI*x)/(1+s)", &["x", "s"]).unwrap();
        assert!((f.eval(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!(Formula::parse("2.5", &["t", "u"]).unwrap().is_constant());
    }

    #[test]
    fn unknown_variable_rejected() {
        let err = Formula::parse("y + 1", &["x", "s"]).unwrap_err();
        assert!(err.contains("`y`"));
    }
}
