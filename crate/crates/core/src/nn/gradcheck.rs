use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub step: f64,
    /// Lower bound on the denominator of the relative error, so coordinates
    /// whose true gradient is ~0 are judged on an absolute scale.
    pub floor: f64,
    /// Check at most this many coordinates per tensor (sampled with `seed`).
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, floor: 1e-6, max_per_tensor: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares analytic gradients from `loss` against central differences.
///
/// `loss(params, Some(grads))` must add `∂loss/∂θ` into `grads` and return
/// the loss; with `None` it only evaluates. Parameters are restored exactly
/// after every perturbation.
pub fn grad_check<E, F>(params: &mut ParamStore, cfg: &GradCheckConfig, mut loss: F) -> Result<GradCheckReport, E>
where
    F: FnMut(&ParamStore, Option<&mut Gradients>) -> Result<f64, E>,
{
    let mut grads = params.zeros_like();
    loss(params, Some(&mut grads))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let ids: Vec<ParamId> = params.iter().map(|(id, _)| id).collect();
    for id in ids {
        let n = params.value(id).len();
        let coords: Vec<usize> = match cfg.max_per_tensor {
            Some(m) if m < n => {
                let mut v = sample(&mut rng, n, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = params.value(id)[i];
            params.param_mut(id).value[i] = orig + cfg.step;
            let plus = loss(params, None)?;
            params.param_mut(id).value[i] = orig - cfg.step;
            let minus = loss(params, None)?;
            params.param_mut(id).value[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let analytic = grads.get(id)[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(cfg.floor);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst_param = params.param(id).name.clone();
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NnError;

    #[test]
    fn quadratic_is_exact_and_restores_params() {
        let mut p = ParamStore::from_values(vec![("q.x".into(), vec![3], vec![0.5, -1.0, 2.0])]).unwrap();
        let before = p.clone();
        let id = p.id("q.x").unwrap();
        let r = grad_check(&mut p, &GradCheckConfig::default(), |p, g| {
            let x = p.value(id);
            if let Some(g) = g {
                for (d, v) in g.get_mut(id).iter_mut().zip(x) {
                    *d += 2.0 * v;
                }
            }
            Ok::<_, NnError>(x.iter().map(|v| v * v).sum())
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-8);
        assert_eq!(r.checked, 3);
        assert_eq!(p, before);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let mut p = ParamStore::from_values(vec![("q.x".into(), vec![1], vec![1.5])]).unwrap();
        let id = p.id("q.x").unwrap();
        let r = grad_check(&mut p, &GradCheckConfig::default(), |p, g| {
            let x = p.value(id)[0];
            if let Some(g) = g {
                g.get_mut(id)[0] += 3.0 * x;
            }
            Ok::<_, NnError>(x * x)
        })
        .unwrap();
        assert!(r.max_rel_error > 0.3);
        assert_eq!(r.worst_param, "q.x");
    }

    #[test]
    fn sampling_limits_coordinates() {
        let mut p = ParamStore::from_values(vec![("q.x".into(), vec![50], vec![0.1; 50])]).unwrap();
        let cfg = GradCheckConfig { max_per_tensor: Some(7), ..Default::default() };
        let r = grad_check(&mut p, &cfg, |p, _| Ok::<_, NnError>(p.value(ParamId(0)).iter().sum::<f64>() * 0.0))
            .unwrap();
        assert_eq!(r.checked, 7);
    }
}
