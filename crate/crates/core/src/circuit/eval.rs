use super::{Circuit, NodeId, NodeKind, ParamId, SlotId, DIV_FLOOR};
use crate::error::{Error, Result};
use crate::model::Evidence;

/// Bindings and buffers for evaluating one circuit.
///
/// Parameters start at the values stored in the circuit; evidence starts
/// unbound. One context serves one thread; a circuit may be shared by many.
#[derive(Debug, Clone)]
pub struct EvalContext {
    params: Vec<f64>,
    slots: Vec<Option<f64>>,
    values: Vec<f64>,
    adjoints: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl EvalContext {
    pub fn new(c: &Circuit) -> Self {
        EvalContext {
            params: c.params().iter().map(|p| p.value).collect(),
            slots: vec![None; c.evidence_slots().len()],
            values: vec![0.0; c.len()],
            adjoints: vec![0.0; c.len()],
        }
    }

    pub fn param_values(&self) -> &[f64] {
        &self.params
    }

    pub fn set_param_values(&mut self, values: &[f64]) {
        self.params.copy_from_slice(values);
    }

    pub fn set_param_by_id(&mut self, p: ParamId, v: f64) {
        self.params[p.0 as usize] = v;
    }

    pub fn set_param(&mut self, c: &Circuit, name: &str, v: f64) -> Result<()> {
        let p = c.param_id(name)?;
        self.set_param_by_id(p, v);
        Ok(())
    }

    /// Binds the likelihood vector of an evidence variable; checks length, range and sum.
    pub fn set_evidence(&mut self, c: &Circuit, variable: &str, lambda: &[f64]) -> Result<()> {
        let slots = c.slots_of(variable);
        if slots.is_empty() {
            return Err(Error::UnknownVariable(variable.to_string()));
        }
        if slots.len() != lambda.len() {
            return Err(Error::invalid(
                "evidence",
                format!(
                    "`{variable}` has {} states but {} likelihoods were given",
                    slots.len(),
                    lambda.len()
                ),
            ));
        }
        crate::model::evidence::check_vector(variable, lambda)?;
        for (s, l) in slots.into_iter().zip(lambda) {
            self.slots[s.0 as usize] = Some(*l);
        }
        Ok(())
    }

    /// Raw slot binding without validation.
    pub fn set_slot(&mut self, s: SlotId, v: f64) {
        self.slots[s.0 as usize] = Some(v);
    }

    pub fn bind(&mut self, c: &Circuit, evidence: &Evidence) -> Result<()> {
        for (name, lambda) in evidence.iter() {
            self.set_evidence(c, name, lambda)?;
        }
        Ok(())
    }

    pub fn clear_evidence(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }

    /// Node values from the last forward pass.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: NodeId) -> f64 {
        self.values[n.index()]
    }

    /// Node adjoints from the last backward pass.
    pub fn adjoints(&self) -> &[f64] {
        &self.adjoints
    }
}

impl Circuit {
    fn check_bound(&self, ctx: &EvalContext) -> Result<()> {
        for (i, s) in ctx.slots.iter().enumerate() {
            if s.is_none() && self.slot_leaf(SlotId(i as u32)).is_some() {
                let slot = &self.evidence_slots()[i];
                return Err(Error::UnboundSlot(format!("{}={}", slot.variable, slot.state)));
            }
        }
        Ok(())
    }

    /// Forward pass. Returns the output values (unnormalized).
    pub fn evaluate(&self, ctx: &mut EvalContext) -> Result<Vec<f64>> {
        self.check_bound(ctx)?;
        self.forward(ctx);
        Ok(self.outputs().iter().map(|o| ctx.values[o.index()]).collect())
    }

    /// Forward pass without the binding check; unbound slots read as 0.
    pub(crate) fn forward(&self, ctx: &mut EvalContext) {
        let values = &mut ctx.values;
        for i in 0..self.kinds.len() {
            let kids = &self.children[self.offsets[i] as usize..self.offsets[i + 1] as usize];
            let v = match self.kinds[i] {
                NodeKind::Const(c) => c,
                NodeKind::Param(p) => ctx.params[p.0 as usize],
                NodeKind::Evidence(s) => ctx.slots[s.0 as usize].unwrap_or(0.0),
                NodeKind::Add => kids.iter().map(|c| values[c.index()]).sum(),
                NodeKind::Mul => kids.iter().map(|c| values[c.index()]).product(),
                NodeKind::Test => {
                    if values[kids[0].index()] >= values[kids[1].index()] {
                        values[kids[2].index()]
                    } else {
                        values[kids[3].index()]
                    }
                }
                NodeKind::SigSel { gamma } => {
                    let x = values[kids[0].index()];
                    let t = values[kids[1].index()];
                    let tau = sigmoid(gamma * (x - t));
                    tau * values[kids[2].index()] + (1.0 - tau) * values[kids[3].index()]
                }
                NodeKind::Div => values[kids[0].index()] / values[kids[1].index()].max(DIV_FLOOR),
            };
            values[i] = v;
        }
    }

    /// Outputs divided by their sum.
    pub fn posterior(&self, ctx: &mut EvalContext) -> Result<Vec<f64>> {
        let out = self.evaluate(ctx)?;
        normalize(&out)
    }

    /// Reverse pass seeded with `output_adjoints` (one per output). Requires a
    /// preceding forward pass on the same context.
    pub fn backward(&self, ctx: &mut EvalContext, output_adjoints: &[f64]) {
        let adj = &mut ctx.adjoints;
        let values = &ctx.values;
        adj.iter_mut().for_each(|a| *a = 0.0);
        for (o, a) in self.outputs().iter().zip(output_adjoints) {
            adj[o.index()] += a;
        }
        for i in (0..self.kinds.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let kids = &self.children[self.offsets[i] as usize..self.offsets[i + 1] as usize];
            match self.kinds[i] {
                NodeKind::Const(_) | NodeKind::Param(_) | NodeKind::Evidence(_) => {}
                NodeKind::Add => {
                    for c in kids {
                        adj[c.index()] += a;
                    }
                }
                NodeKind::Mul if kids.len() == 2 => {
                    let (l, r) = (kids[0].index(), kids[1].index());
                    adj[l] += a * values[r];
                    adj[r] += a * values[l];
                }
                NodeKind::Mul => {
                    // Product of siblings via prefix and suffix products, safe with zeros.
                    let n = kids.len();
                    let mut suffix = vec![1.0; n + 1];
                    for k in (0..n).rev() {
                        suffix[k] = suffix[k + 1] * values[kids[k].index()];
                    }
                    let mut prefix = 1.0;
                    for k in 0..n {
                        adj[kids[k].index()] += a * prefix * suffix[k + 1];
                        prefix *= values[kids[k].index()];
                    }
                }
                NodeKind::Test => {
                    let chosen = if values[kids[0].index()] >= values[kids[1].index()] {
                        kids[2]
                    } else {
                        kids[3]
                    };
                    adj[chosen.index()] += a;
                }
                NodeKind::SigSel { gamma } => {
                    let x = values[kids[0].index()];
                    let t = values[kids[1].index()];
                    let pos = values[kids[2].index()];
                    let neg = values[kids[3].index()];
                    let tau = sigmoid(gamma * (x - t));
                    let dx = a * (pos - neg) * gamma * tau * (1.0 - tau);
                    adj[kids[0].index()] += dx;
                    adj[kids[1].index()] -= dx;
                    adj[kids[2].index()] += a * tau;
                    adj[kids[3].index()] += a * (1.0 - tau);
                }
                NodeKind::Div => {
                    let x = values[kids[0].index()];
                    let y = values[kids[1].index()];
                    if y > DIV_FLOOR {
                        adj[kids[0].index()] += a / y;
                        adj[kids[1].index()] -= a * x / (y * y);
                    } else {
                        adj[kids[0].index()] += a / DIV_FLOOR;
                    }
                }
            }
        }
    }

    /// Adjoint of every parameter (0 for parameters without a leaf).
    pub fn param_gradient(&self, ctx: &EvalContext) -> Vec<f64> {
        self.param_leaf
            .iter()
            .map(|l| l.map_or(0.0, |n| ctx.adjoints[n.index()]))
            .collect()
    }

    /// Adjoint of every evidence slot (0 for slots without a leaf).
    pub fn slot_gradient(&self, ctx: &EvalContext) -> Vec<f64> {
        self.slot_leaf
            .iter()
            .map(|l| l.map_or(0.0, |n| ctx.adjoints[n.index()]))
            .collect()
    }
}

/// Divides by the sum; a zero sum means the evidence is impossible.
pub fn normalize(out: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = out.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InconsistentEvidence);
    }
    Ok(out.iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, ParamRole, ParamSpec, QueryInfo};

    fn leaf(b: &mut CircuitBuilder, name: &str, v: f64) -> NodeId {
        b.param(ParamSpec {
            name: name.into(),
            value: v,
            trainable: true,
            role: ParamRole::Probability { row: 0 },
        })
    }

    fn single(kind: &str, x: f64, t: f64, pos: f64, neg: f64, gamma: f64) -> f64 {
        let mut b = CircuitBuilder::new();
        let ids: Vec<NodeId> = [("x", x), ("t", t), ("p", pos), ("n", neg)]
            .iter()
            .map(|(n, v)| leaf(&mut b, n, *v))
            .collect();
        let out = if kind == "test" {
            b.test(ids[0], ids[1], ids[2], ids[3])
        } else {
            b.sigsel(ids[0], ids[1], ids[2], ids[3], gamma)
        };
        let c = b.finish(&[out], QueryInfo::default()).unwrap();
        let mut ctx = EvalContext::new(&c);
        c.evaluate(&mut ctx).unwrap()[0]
    }

    #[test]
    fn testing_unit() {
        assert_eq!(single("test", 0.4, 0.25, 0.7, 0.1, 0.0), 0.7);
        assert_eq!(single("test", 0.2, 0.25, 0.7, 0.1, 0.0), 0.1);
        assert_eq!(single("test", 0.25, 0.25, 0.7, 0.1, 0.0), 0.7);
    }

    #[test]
    fn sigmoid_unit() {
        for g in [1.0, 16.0, 1000.0] {
            assert!((single("sig", 0.3, 0.3, 0.7, 0.1, g) - 0.4).abs() < 1e-15);
        }
        let tau = single("sig", 0.5, 0.25, 1.0, 0.0, 16.0);
        assert!((tau - 0.982_013_790_037_908_4).abs() < 1e-12);
    }

    #[test]
    fn product_rule_and_fan_out() {
        let mut b = CircuitBuilder::new();
        let a = leaf(&mut b, "a", 2.0);
        let bb = leaf(&mut b, "b", 3.0);
        let m = b.mul(&[a, bb]);
        let s = b.add(&[a, a]);
        let c = b.finish(&[m, s], QueryInfo::default()).unwrap();
        let mut ctx = EvalContext::new(&c);
        c.evaluate(&mut ctx).unwrap();
        c.backward(&mut ctx, &[1.0, 0.0]);
        assert_eq!(c.param_gradient(&ctx), vec![3.0, 2.0]);
        c.backward(&mut ctx, &[0.0, 1.0]);
        assert_eq!(c.param_gradient(&ctx), vec![2.0, 0.0]);
    }

    #[test]
    fn unbound_slot_and_zero_posterior() {
        let mut b = CircuitBuilder::new();
        let e = b.declare_evidence("E", &["e".into(), "not_e".into()]);
        let c = b.finish(&e, QueryInfo::default()).unwrap();
        let mut ctx = EvalContext::new(&c);
        assert!(matches!(c.evaluate(&mut ctx), Err(Error::UnboundSlot(_))));
        ctx.set_evidence(&c, "E", &[0.25, 0.75]).unwrap();
        assert_eq!(c.posterior(&mut ctx).unwrap(), vec![0.25, 0.75]);
        assert!(ctx.set_evidence(&c, "E", &[0.5, 0.6]).is_err());
        assert!(normalize(&[0.0, 0.0]).is_err());
    }
}
