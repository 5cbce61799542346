//! Adam with decoupled weight decay and global-norm gradient clipping.

use super::params::{Group, Parameters};

#[derive(Debug, Clone)]
pub struct AdamW {
    pub task_lr: f64,
    pub embedding_lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Parameters,
    v: Parameters,
}

pub fn global_norm(grads: &Parameters) -> f64 {
    grads.tensors().iter().flat_map(|(_, _, t)| t.iter()).map(|g| g * g).sum::<f64>().sqrt()
}

impl AdamW {
    pub fn new(params: &Parameters, task_lr: f64, embedding_lr: f64, weight_decay: f64, clip_norm: f64) -> Self {
        AdamW {
            task_lr,
            embedding_lr,
            weight_decay,
            clip_norm,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// Applies one update; returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters) -> f64 {
        let norm = global_norm(grads);
        let clip = if norm > self.clip_norm { self.clip_norm / norm } else { 1.0 };
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let g_all = grads.tensors();
        let m_all = self.m.tensors_mut();
        let v_all = self.v.tensors_mut();
        for ((((_, group, p), (_, _, g)), (_, _, m)), (_, _, v)) in
            params.tensors_mut().into_iter().zip(g_all).zip(m_all).zip(v_all)
        {
            let lr = match group {
                Group::Task => self.task_lr,
                Group::Embedding => self.embedding_lr,
            };
            for k in 0..p.len() {
                let gk = g[k] * clip;
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                p[k] *= 1.0 - lr * wd;
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        norm
    }
}
