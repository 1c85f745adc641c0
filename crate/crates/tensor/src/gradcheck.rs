//! Central finite-difference gradient checker.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TensorError;
use crate::graph::{Graph, Var};
use crate::params::{Bound, ParamId, ParamStore};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    /// Coordinates sampled per parameter tensor; smaller tensors are checked in full.
    pub samples_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            samples_per_param: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(parameter, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval<F, E>(f: &mut F, params: &ParamStore, seed: u64) -> Result<f64, E>
where
    F: FnMut(&mut Graph, &Bound) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut g = Graph::new(seed);
    let b = g.bind_frozen(params);
    let loss = f(&mut g, &b)?;
    let t = g.value(loss);
    t.item().ok_or_else(|| TensorError::NonScalarLoss(t.shape().to_vec()).into())
}

/// Compares analytic gradients of the scalar built by `f` against
/// fourth-order central differences. Graphs start in train mode; `f` is
/// probed on two graphs with different seeds first and must give
/// bit-identical losses.
pub fn check_gradients<F, E>(
    mut f: F,
    params: &mut ParamStore,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport, E>
where
    F: FnMut(&mut Graph, &Bound) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut g = Graph::new(cfg.seed);
    let bound = g.bind(params);
    let loss = f(&mut g, &bound)?;
    let first = g
        .value(loss)
        .item()
        .ok_or_else(|| TensorError::NonScalarLoss(g.shape(loss).to_vec()))?;
    let second = eval(&mut f, params, cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
    if first.to_bits() != second.to_bits() {
        return Err(TensorError::Nondeterministic { first, second }.into());
    }
    let grads = g.backward(loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let analytic = grads.get(bound[id]);
        let n = params.get(id).numel();
        let coords: Vec<usize> = if n <= cfg.samples_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, cfg.samples_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for i in coords {
            let orig = params.get(id).data()[i];
            let mut at = |offset: f64| {
                params.get_mut(id).data_mut()[i] = orig + offset;
                let v = eval(&mut f, params, cfg.seed);
                params.get_mut(id).data_mut()[i] = orig;
                v
            };
            let h = cfg.epsilon;
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let a = analytic.data()[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((params.name(id).to_string(), i, a, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_is_nearly_exact() {
        let mut p = ParamStore::new();
        let w = p.add("w", Tensor::new(vec![3], vec![0.5, -1.5, 2.0]).unwrap()).unwrap();
        let report = check_gradients(
            |g: &mut Graph, b: &Bound| -> Result<Var, TensorError> {
                let sq = g.mul(b[w], b[w])?;
                let s = g.scale(sq, 3.0);
                Ok(g.sum(s))
            },
            &mut p,
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
        assert_eq!(report.checked, 3);
    }

    #[test]
    fn dropout_closure_is_flagged() {
        let mut p = ParamStore::new();
        let w = p.add("w", Tensor::ones(&[64])).unwrap();
        let res = check_gradients(
            |g: &mut Graph, b: &Bound| -> Result<Var, TensorError> {
                let d = g.dropout(b[w], 0.5)?;
                Ok(g.sum(d))
            },
            &mut p,
            GradCheckConfig::default(),
        );
        assert!(matches!(res, Err(TensorError::Nondeterministic { .. })));
    }
}
