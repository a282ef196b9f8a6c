//! Adam-family optimizers over flat parameter lists.
//!
//! Networks expose their parameters as an ordered list of vectors; the
//! optimizer state is positional, so the ordering must be stable across a
//! training run (it is: layout is fixed at construction).

use crate::scalar::{sc, Scalar};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Adam<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rectified variant (RAdam): warms up without adaptive steps until the
    /// variance of the second moment is tractable.
    pub rectified: bool,
    t: u64,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            rectified: false,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// RAdam with the usual (0.9, 0.999) momenta.
    pub fn radam(lr: f64) -> Self {
        Self {
            rectified: true,
            ..Self::new(lr, 0.9, 0.999)
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    fn ensure_state(&mut self, params: &[&mut Vec<S>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![S::zero(); p.len()]).collect();
            self.v = params.iter().map(|p| vec![S::zero(); p.len()]).collect();
        }
        debug_assert_eq!(self.m.len(), params.len(), "optimizer state layout changed");
    }

    pub fn step(&mut self, mut params: Vec<&mut Vec<S>>, grads: &[&Vec<S>]) {
        assert_eq!(params.len(), grads.len(), "params/grads layout mismatch");
        self.ensure_state(&params);
        self.t += 1;
        let t = self.t as f64;
        let b1 = sc::<S>(self.beta1);
        let b2 = sc::<S>(self.beta2);
        let one = S::one();
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);

        // RAdam rectification term (scalar per step)
        let (use_adaptive, r_t) = if self.rectified {
            let rho_inf = 2.0 / (1.0 - self.beta2) - 1.0;
            let beta2_t = self.beta2.powf(t);
            let rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
            if rho_t > 5.0 {
                let r = (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                    / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                    .sqrt();
                (true, r)
            } else {
                (false, 1.0)
            }
        } else {
            (true, 1.0)
        };

        let lr = sc::<S>(self.lr * r_t);
        let lr_plain = sc::<S>(self.lr);
        let inv_bc1 = sc::<S>(1.0 / bc1);
        let inv_bc2_sqrt = sc::<S>(1.0 / bc2.sqrt());
        let eps = sc::<S>(self.eps);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(p.len(), g.len(), "param/grad size mismatch");
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] * inv_bc1;
                if use_adaptive {
                    let v_hat_sqrt = v[i].sqrt() * inv_bc2_sqrt;
                    p[i] -= lr * m_hat / (v_hat_sqrt + eps);
                } else {
                    p[i] -= lr_plain * m_hat;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimizes a quadratic; both variants must converge to the optimum.
    #[test]
    fn adam_and_radam_minimize_quadratic() {
        for rectified in [false, true] {
            let mut opt = if rectified {
                Adam::<f64>::radam(0.05)
            } else {
                Adam::<f64>::new(0.05, 0.9, 0.999)
            };
            let mut p = vec![5.0f64, -3.0];
            for _ in 0..2000 {
                let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 2.0)];
                opt.step(vec![&mut p], &[&g]);
            }
            assert!((p[0] - 1.0).abs() < 1e-3, "rectified={rectified} p={p:?}");
            assert!((p[1] + 2.0).abs() < 1e-3, "rectified={rectified} p={p:?}");
        }
    }

    #[test]
    fn radam_starts_unrectified() {
        // with beta2 = 0.999 the adaptive step only kicks in at t > 4
        let mut opt = Adam::<f64>::radam(0.1);
        let mut p = vec![1.0f64];
        let g = vec![1.0f64];
        opt.step(vec![&mut p], &[&g]);
        // plain momentum step: p -= lr * m_hat = 0.1 * 1.0
        assert!((p[0] - 0.9).abs() < 1e-12);
    }
}
