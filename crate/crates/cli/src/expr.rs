//! User-supplied scalar expressions, e.g. `math::cos(pi*y)^2`.

use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node, Value};

pub struct Expr {
    node: Node,
    var: &'static str,
}

impl Expr {
    /// Parses `src` as a function of `var` and probes it once so unknown
    /// identifiers are reported up front.
    pub fn parse(src: &str, var: &'static str) -> Result<Self, String> {
        let node = build_operator_tree(src).map_err(|e| format!("expression '{src}': {e}"))?;
        let e = Expr { node, var };
        e.try_eval(0.5).map_err(|m| format!("expression '{src}': {m}"))?;
        Ok(e)
    }

    fn try_eval(&self, v: f64) -> Result<f64, String> {
        let mut ctx = HashMapContext::new();
        ctx.set_value(self.var.into(), Value::Float(v)).map_err(|e| e.to_string())?;
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI)).map_err(|e| e.to_string())?;
        match self.node.eval_with_context(&ctx).map_err(|e| e.to_string())? {
            Value::Float(f) => Ok(f),
            Value::Int(i) => Ok(i as f64),
            Value::Boolean(b) => Ok(if b { 1.0 } else { 0.0 }),
            other => Err(format!("evaluates to {other:?}, not a number")),
        }
    }

    /// NaN when evaluation fails at `v`.
    pub fn eval(&self, v: f64) -> f64 {
        self.try_eval(v).unwrap_or(f64::NAN)
    }
}
