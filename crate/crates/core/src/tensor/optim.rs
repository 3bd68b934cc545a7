use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Tensor, TensorError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    /// Registers a parameter. Panics on a duplicate name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.values.iter()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names.iter().zip(&self.values).enumerate().map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalar weights.
    pub fn weight_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<ParamEntry> = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, t)| ParamEntry { name: n.clone(), shape: t.shape.clone(), values: t.data.clone() })
            .collect();
        serde_json::json!({ "version": CHECKPOINT_VERSION, "params": entries })
    }

    pub fn from_json(v: &Value) -> Result<ParamStore, TensorError> {
        let bad = |m: String| TensorError::Usage(format!("checkpoint: {m}"));
        let version = v["version"].as_u64().ok_or_else(|| bad("missing version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(bad(format!("unsupported version {version}")));
        }
        let entries: Vec<ParamEntry> = serde_json::from_value(v["params"].clone()).map_err(|e| bad(e.to_string()))?;
        let mut store = ParamStore::new();
        for e in entries {
            if store.id(&e.name).is_some() {
                return Err(bad(format!("duplicate parameter `{}`", e.name)));
            }
            store.add(e.name, Tensor::new(e.shape, e.values)?);
        }
        Ok(store)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Adam {
        let zeros = || params.tensors().map(|t| vec![0.0; t.len()]).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    /// Applies one update. `grads` is consumed, one entry per parameter.
    pub fn update(&mut self, params: &mut ParamStore, grads: Vec<Option<Tensor>>) -> Result<(), TensorError> {
        if grads.len() != params.len() {
            return Err(TensorError::Usage(format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        if let Some(i) = grads.iter().position(Option::is_none) {
            return Err(TensorError::Usage(format!("parameter `{}` has no gradient", params.name(ParamId(i)))));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.into_iter().enumerate() {
            let g = g.expect("checked above");
            let p = params.get_mut(ParamId(i));
            if g.shape != p.shape {
                return Err(TensorError::Shape { op: "adam", left: p.shape.clone(), right: g.shape });
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.data.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g.data[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g.data[j] * g.data[j];
                p.data[j] -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        s.add("b", Tensor::row(vec![0.1 + 0.2, -1e-300]));
        s
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut s = store();
        let before = s.clone();
        let mut adam = Adam::new(&s, 1e-3);
        let grads = s.tensors().map(|t| Some(Tensor { shape: t.shape.clone(), data: vec![0.0; t.len()] })).collect();
        adam.update(&mut s, grads).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store();
        let mut adam = Adam::new(&s, 1e-3);
        let grads = s.tensors().map(|t| Some(Tensor { shape: t.shape.clone(), data: vec![0.7; t.len()] })).collect();
        let before = s.get(ParamId(0)).data[0];
        adam.update(&mut s, grads).unwrap();
        // m̂ = g, v̂ = g², so the step is lr * g / (|g| + eps)
        let expected = 1e-3 * 0.7 / (0.7 + 1e-8);
        assert!((before - s.get(ParamId(0)).data[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut s = store();
        let mut adam = Adam::new(&s, 1e-3);
        let err = adam.update(&mut s, vec![None, None]).unwrap_err();
        assert!(err.to_string().contains("`w`"));
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let s = store();
        let text = serde_json::to_string(&s.to_json()).unwrap();
        let back = ParamStore::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.tensors().zip(s.tensors()) {
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["version"] = 9.into();
        assert!(ParamStore::from_json(&v).is_err());
    }
}
