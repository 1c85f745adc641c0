use v2c_tensor::ParamStore;

/// Adam over the gradient slots of a [`ParamStore`]. Parameters are rounded
/// to `f32` precision after every update so checkpoints reload exactly.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Self {
            beta1,
            beta2,
            eps,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Global L2 norm over all parameter gradients.
    pub fn grad_norm(params: &ParamStore) -> f64 {
        params
            .iter()
            .filter_map(|(_, t)| t.grad())
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Applies one update with learning rate `lr`, optionally rescaling the
    /// gradients to `max_norm`, then clears them. Returns the pre-clip norm.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64, max_norm: Option<f64>) -> f64 {
        let norm = Self::grad_norm(params);
        let clip = match max_norm {
            Some(m) if norm > m => m / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((t, m), v) in params.tensors_mut().iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(grad) = t.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            for (i, (x, gr)) in t.data_mut().iter_mut().zip(grad).enumerate() {
                let gr = gr * clip;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gr;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gr * gr;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                *x -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        params.round_to_f32();
        params.zero_grads();
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use v2c_tensor::Tensor;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = ParamStore::new();
        let id = p.add("w", Tensor::from_vec(vec![0.5, -0.25])).unwrap();
        p.get_mut(id).accumulate_grad(&[0.0, 0.0]).unwrap();
        let before = p.get(id).data().to_vec();
        let mut adam = Adam::new(&p, 0.9, 0.98, 1e-9);
        adam.step(&mut p, 1e-3, None);
        assert_eq!(p.get(id).data(), &before[..]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = ParamStore::new();
        let id = p.add("w", Tensor::from_vec(vec![1.0, 1.0])).unwrap();
        p.get_mut(id).accumulate_grad(&[3.0, -0.5]).unwrap();
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-12);
        adam.step(&mut p, 0.125, None);
        assert_eq!(p.get(id).data(), &[0.875, 1.125]);
        assert!(p.get(id).grad().is_none_or(|g| g.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn clipping_reports_norm() {
        let mut p = ParamStore::new();
        let id = p.add("w", Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        p.get_mut(id).accumulate_grad(&[3.0, 4.0]).unwrap();
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-12);
        assert_eq!(adam.step(&mut p, 0.5, Some(1.0)), 5.0);
    }
}
