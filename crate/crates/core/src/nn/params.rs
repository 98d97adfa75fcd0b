use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NnError;

/// How a parameter tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
    Uniform { fan_in: usize, fan_out: usize },
    Zeros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    /// `rows × cols` weight matrix with fan-based uniform init.
    pub fn matrix(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self { name: name.into(), shape: vec![rows, cols], init: Init::Uniform { fan_in: cols, fan_out: rows } }
    }

    pub fn bias(name: impl Into<String>, len: usize) -> Self {
        Self { name: name.into(), shape: vec![len], init: Init::Zeros }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    /// Learning-rate group: the name up to the first `.`.
    pub fn group(&self) -> &str {
        group_of(&self.name)
    }
}

pub fn group_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors with paired gradient buffers, ordered by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

/// Gradient buffers laid out like a [`ParamStore`], used for per-sample
/// accumulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub(crate) bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn zero(&mut self) {
        self.bufs.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|g| g.is_finite())
    }
}

impl ParamStore {
    /// Builds a store from explicit values. Names must be unique and every
    /// value must match its shape.
    pub fn from_values(entries: Vec<(String, Vec<usize>, Vec<f64>)>) -> Result<Self, NnError> {
        let mut params: Vec<Param> = entries
            .into_iter()
            .map(|(name, shape, value)| {
                let n: usize = shape.iter().product();
                if n != value.len() {
                    return Err(NnError::Shape(format!("{name}: shape {shape:?} but {} values", value.len())));
                }
                Ok(Param { name, shape, grad: vec![0.0; n], value })
            })
            .collect::<Result<_, _>>()?;
        params.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = params.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(NnError::DuplicateParam(w[0].name.clone()));
        }
        Ok(Self { params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn id(&self, name: &str) -> Result<ParamId, NnError> {
        self.params
            .binary_search_by(|p| p.name.as_str().cmp(name))
            .map(ParamId)
            .map_err(|_| NnError::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.id(name).is_ok()
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.params[id.0].shape
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients { bufs: self.params.iter().map(|p| vec![0.0; p.value.len()]).collect() }
    }

    /// Copies the stored gradients out.
    pub fn gradients(&self) -> Gradients {
        Gradients { bufs: self.params.iter().map(|p| p.grad.clone()).collect() }
    }

    pub fn accumulate(&mut self, g: &Gradients) {
        for (p, b) in self.params.iter_mut().zip(&g.bufs) {
            for (x, y) in p.grad.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        self.params.iter_mut().flat_map(|p| p.grad.iter_mut()).for_each(|g| *g *= factor);
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad.fill(0.0));
    }

    /// Distinct groups, sorted.
    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.params.iter().map(|p| p.group().to_string()).collect();
        g.dedup();
        g.sort();
        g.dedup();
        g
    }

    /// Plain SGD, `p ← p − lr(group)·grad`, then zeroes every gradient.
    /// Fails without touching anything if a group has no rate.
    pub fn sgd_step(&mut self, rates: &BTreeMap<String, f64>) -> Result<(), NnError> {
        let mut per_param = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let lr = *rates.get(p.group()).ok_or_else(|| NnError::UnknownGroup(p.group().to_string()))?;
            per_param.push(lr);
        }
        for (p, lr) in self.params.iter_mut().zip(per_param) {
            for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
                *v -= lr * *g;
                *g = 0.0;
            }
        }
        Ok(())
    }
}

/// Deterministic initialization: tensors are filled in name order from one
/// ChaCha stream seeded with `seed`; weights uniform in `[-a, a]`,
/// biases zero.
pub fn init_params(specs: &[ParamSpec], seed: u64) -> Result<ParamStore, NnError> {
    let mut sorted: Vec<&ParamSpec> = specs.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = sorted
        .into_iter()
        .map(|s| {
            let n: usize = s.shape.iter().product();
            let value = match s.init {
                Init::Zeros => vec![0.0; n],
                Init::Uniform { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-a..=a)).collect()
                }
            };
            (s.name.clone(), s.shape.clone(), value)
        })
        .collect();
    ParamStore::from_values(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<ParamSpec> {
        vec![
            ParamSpec::matrix("dec.w", 30, 20),
            ParamSpec::bias("dec.b", 30),
            ParamSpec::matrix("cls.w", 3, 20),
            ParamSpec::bias("cls.b", 3),
        ]
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = init_params(&specs(), 42).unwrap();
        let b = init_params(&specs(), 42).unwrap();
        assert_eq!(a, b);
        let c = init_params(&specs(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_zero_weights_in_range() {
        let s = init_params(&specs(), 7).unwrap();
        assert!(s.value(s.id("dec.b").unwrap()).iter().all(|&v| v == 0.0));
        let a = (6.0f64 / 50.0).sqrt();
        let w = s.value(s.id("dec.w").unwrap());
        assert!(w.iter().all(|v| v.abs() <= a));
        // 600 draws should get within 10% of the edges
        assert!(w.iter().cloned().fold(f64::MIN, f64::max) > 0.9 * a);
    }

    #[test]
    fn ordering_and_lookup() {
        let s = init_params(&specs(), 1).unwrap();
        let names: Vec<&str> = s.iter().map(|(_, p)| p.name.as_str()).collect();
        assert_eq!(names, ["cls.b", "cls.w", "dec.b", "dec.w"]);
        assert!(matches!(s.id("nope"), Err(NnError::MissingParam(_))));
        assert_eq!(s.groups(), ["cls", "dec"]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let e = ParamStore::from_values(vec![("a".into(), vec![1], vec![0.0]), ("a".into(), vec![1], vec![1.0])]);
        assert!(matches!(e, Err(NnError::DuplicateParam(_))));
        assert!(ParamStore::from_values(vec![("a".into(), vec![2], vec![0.0])]).is_err());
    }

    #[test]
    fn sgd_scalar_case() {
        let mut s = ParamStore::from_values(vec![("g.p".into(), vec![1], vec![1.0])]).unwrap();
        s.param_mut(ParamId(0)).grad[0] = 0.5;
        s.sgd_step(&BTreeMap::from([("g".to_string(), 0.2)])).unwrap();
        assert!((s.value(ParamId(0))[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.param(ParamId(0)).grad[0], 0.0);
    }

    #[test]
    fn sgd_zero_gradient_is_identity() {
        let mut s = init_params(&specs(), 3).unwrap();
        let before = s.clone();
        let rates = BTreeMap::from([("dec".to_string(), 0.2), ("cls".to_string(), 0.5)]);
        s.sgd_step(&rates).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn sgd_groups_are_independent() {
        let mut s = ParamStore::from_values(vec![
            ("a.x".into(), vec![2], vec![1.0, 2.0]),
            ("b.y".into(), vec![1], vec![3.0]),
        ])
        .unwrap();
        s.param_mut(ParamId(0)).grad.copy_from_slice(&[1.0, -1.0]);
        s.param_mut(ParamId(1)).grad[0] = 2.0;
        s.sgd_step(&BTreeMap::from([("a".to_string(), 0.1), ("b".to_string(), 0.5)])).unwrap();
        assert_eq!(s.value(ParamId(0)), &[0.9, 2.1]);
        assert_eq!(s.value(ParamId(1)), &[2.0]);
    }

    #[test]
    fn sgd_unknown_group_leaves_params_alone() {
        let mut s = init_params(&specs(), 3).unwrap();
        s.param_mut(ParamId(0)).grad[0] = 1.0;
        let before = s.clone();
        let err = s.sgd_step(&BTreeMap::from([("dec".to_string(), 0.2)]));
        assert!(matches!(err, Err(NnError::UnknownGroup(g)) if g == "cls"));
        assert_eq!(s, before);
    }
}
