use super::TrainError;
use crate::autodiff::Scalar;
use crate::dcpnet::ModelParams;
use alloc::string::ToString;
use alloc::vec::Vec;

/// Adam hyper-parameters. Weight decay is decoupled: `θ ← θ − lr·wd·θ` is
/// applied before the moment update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// First and second moments for every trainable array.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .entries()
                .iter()
                .map(|e| alloc::vec![T::zero(); if e.trainable { e.value.numel() } else { 0 }])
                .collect()
        };
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update. `grads[i]` is the gradient of entry `i`; `None` counts as
    /// zero. All gradients are checked before any parameter changes.
    pub fn step(
        &mut self,
        params: &mut ModelParams<T>,
        grads: &[Option<&[T]>],
        lr: f64,
    ) -> Result<(), TrainError> {
        for (e, g) in params.entries().iter().zip(grads) {
            if let Some(g) = g {
                if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                    return Err(TrainError::NonFiniteGradient {
                        param: e.name.to_string(),
                        index: i,
                    });
                }
            }
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bc1 = T::from_f64(1.0 - powu(c.beta1, self.step));
        let bc2 = T::from_f64(1.0 - powu(c.beta2, self.step));
        let lr_t = T::from_f64(lr);
        let decay = T::one() - T::from_f64(lr * c.weight_decay);
        let eps = T::from_f64(c.eps);
        let one = T::one();
        for (i, (e, g)) in params.entries_mut().iter_mut().zip(grads).enumerate() {
            if !e.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, p) in e.value.data_mut().iter_mut().enumerate() {
                let gj = g.map_or(T::zero(), |g| g[j]);
                *p = *p * decay;
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *p -= lr_t * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

fn powu(x: f64, n: u64) -> f64 {
    num_traits::Float::powi(x, n.min(i32::MAX as u64) as i32)
}

/// Piecewise-constant learning rate: `base · gamma^(milestones passed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub gamma: f64,
    pub milestones: Vec<usize>,
}

impl LrSchedule {
    /// 250-epoch schedule: 1e-3, divided by 10 at epochs 75, 150 and 200.
    pub fn full() -> Self {
        Self {
            base: 1e-3,
            gamma: 0.1,
            milestones: alloc::vec![75, 150, 200],
        }
    }

    /// The same shape compressed to 50 epochs.
    pub fn desk() -> Self {
        Self {
            milestones: alloc::vec![15, 30, 40],
            ..Self::full()
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.base * num_traits::Float::powi(self.gamma, passed as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::dcpnet::DcpConfig;

    fn scalar_params(x: f64) -> ModelParams<f64> {
        let mut p = ModelParams::<f64>::init(
            &DcpConfig {
                widths: alloc::vec![1],
                emb_dims: 1,
                k: 1,
                ..DcpConfig::pointnet()
            },
            0,
        )
        .unwrap();
        for e in p.entries_mut() {
            e.trainable = e.name == "emb.0.weight";
        }
        *p.get_mut("emb.0.weight").unwrap() =
            Tensor::new(&[1, 3], alloc::vec![x, 0.0, 0.0]).unwrap();
        p
    }

    fn grads_for(p: &ModelParams<f64>, g: f64) -> Vec<Option<Vec<f64>>> {
        p.entries()
            .iter()
            .map(|e| (e.name == "emb.0.weight").then(|| alloc::vec![g, 0.0, 0.0]))
            .collect()
    }

    fn as_refs(g: &[Option<Vec<f64>>]) -> Vec<Option<&[f64]>> {
        g.iter().map(|x| x.as_deref()).collect()
    }

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let mut p = scalar_params(0.7);
        let before = p.clone();
        let mut s = OptimizerState::new(
            &p,
            AdamConfig {
                weight_decay: 0.0,
                ..AdamConfig::default()
            },
        );
        for _ in 0..5 {
            {
                let g = grads_for(&p, 0.0);
                s.step(&mut p, &as_refs(&g), 1e-3)
            }
            .unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_params(0.7);
        let mut s = OptimizerState::new(
            &p,
            AdamConfig {
                weight_decay: 0.0,
                ..AdamConfig::default()
            },
        );
        {
            let g = grads_for(&p, 1.0);
            s.step(&mut p, &as_refs(&g), 1e-3)
        }
        .unwrap();
        let x = p.get("emb.0.weight").unwrap().data()[0];
        assert!((x - (0.7 - 1e-3)).abs() < 1e-10);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut p = scalar_params(1.0);
        let mut s = OptimizerState::new(
            &p,
            AdamConfig {
                weight_decay: 0.0,
                ..AdamConfig::default()
            },
        );
        for _ in 0..200 {
            let x = p.get("emb.0.weight").unwrap().data()[0];
            {
                let g = grads_for(&p, 2.0 * x);
                s.step(&mut p, &as_refs(&g), 0.01)
            }
            .unwrap();
        }
        assert!(p.get("emb.0.weight").unwrap().data()[0].abs() < 0.5);
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut p = scalar_params(1.0);
        let before = p.clone();
        let mut s = OptimizerState::new(&p, AdamConfig::default());
        let e = {
            let g = grads_for(&p, f64::NAN);
            s.step(&mut p, &as_refs(&g), 1e-3)
        }
        .unwrap_err();
        assert_eq!(
            e,
            TrainError::NonFiniteGradient {
                param: "emb.0.weight".into(),
                index: 0
            }
        );
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::full();
        assert_eq!(s.lr(0), 1e-3);
        assert_eq!(s.lr(74), 1e-3);
        assert!((s.lr(75) - 1e-4).abs() < 1e-18);
        assert!((s.lr(150) - 1e-5).abs() < 1e-19);
        assert!((s.lr(249) - 1e-6).abs() < 1e-20);
        assert!((LrSchedule::desk().lr(40) - 1e-6).abs() < 1e-20);
    }
}
