//! Adam with bias correction, driven by central finite-difference gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learn_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Finite-difference step, in parameter units.
    pub grad_step: f64,
    /// Stop once the gradient norm drops below this.
    pub tol_grad: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learn_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 5000,
            grad_step: 1e-5,
            tol_grad: 1e-9,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return bad("learn rate must be > 0");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.grad_step > 0.0 && self.grad_step.is_finite()) {
            return bad("grad_step must be > 0");
        }
        if !(self.tol_grad >= 0.0) {
            return bad("tol_grad must be >= 0");
        }
        Ok(())
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn central_gradient<F>(f: &mut F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        let g = (up - down) / (2.0 * step);
        if !g.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        grad.push(g);
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Resumable Adam state.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    x: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    converged: bool,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(initial: &[f64], cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            x: initial.to_vec(),
            m: vec![0.0; initial.len()],
            v: vec![0.0; initial.len()],
            t: 0,
            converged: false,
            bounds: None,
        })
    }

    /// Confines the iterate to `[lower, upper]` (projected Adam). Components
    /// pinned at a bound with the gradient pointing outward do not count
    /// toward the convergence test.
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = self.x.len();
        if lower.len() != n || upper.len() != n || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParams("bounds must match the parameter count and satisfy lower <= upper".into()));
        }
        for i in 0..n {
            self.x[i] = self.x[i].clamp(lower[i], upper[i]);
        }
        self.bounds = Some((lower, upper));
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn iterations(&self) -> usize {
        self.t
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Runs until convergence or until `until` total iterations.
    pub fn run<F>(&mut self, f: &mut F, until: usize) -> Result<()>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let until = until.min(self.cfg.max_iters);
        while !self.converged && self.t < until {
            let g = central_gradient(f, &self.x, self.cfg.grad_step)?;
            let norm = self.free_norm(&g);
            if norm < self.cfg.tol_grad {
                self.converged = true;
                break;
            }
            self.t += 1;
            let c = &self.cfg;
            let bias1 = 1.0 - c.beta1.powi(self.t as i32);
            let bias2 = 1.0 - c.beta2.powi(self.t as i32);
            for (((x, m), v), gi) in self.x.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(&g) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * gi;
                *v = c.beta2 * *v + (1.0 - c.beta2) * gi * gi;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *x -= c.learn_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
            if let Some((lo, hi)) = &self.bounds {
                for i in 0..self.x.len() {
                    self.x[i] = self.x[i].clamp(lo[i], hi[i]);
                }
            }
        }
        Ok(())
    }

    fn free_norm(&self, g: &[f64]) -> f64 {
        let pinned = |i: usize| match &self.bounds {
            Some((lo, hi)) => (self.x[i] <= lo[i] && g[i] > 0.0) || (self.x[i] >= hi[i] && g[i] < 0.0),
            None => false,
        };
        (0..g.len())
            .filter(|&i| !pinned(i))
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt()
    }

    pub fn finish<F>(self, f: &mut F) -> Result<AdamOutcome>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let value = f(&self.x);
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        Ok(AdamOutcome {
            x: self.x,
            value,
            iterations: self.t,
            converged: self.converged,
        })
    }
}

/// Minimizes `f` from `initial`.
pub fn adam_minimize<F>(mut f: F, initial: &[f64], cfg: &AdamConfig) -> Result<AdamOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    if !f(initial).is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut adam = Adam::new(initial, *cfg)?;
    adam.run(&mut f, cfg.max_iters)?;
    adam.finish(&mut f)
}
