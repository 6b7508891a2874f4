//! Adam and limited-memory BFGS over flat `f64` parameter vectors.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Minimum `yᵀs` for a curvature pair to be stored.
pub const CURVATURE_GUARD: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Length { expected, found });
    }
    Ok(())
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(what))
    }
}

/// One optimizer update given the gradient at the current parameters.
pub trait Optimizer {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grad.len())?;
        check_finite(grad, "Adam gradient")?;
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// A stored `(s, y)` pair with `rho = 1/(yᵀs)`.
#[derive(Debug, Clone)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

/// Limited-memory BFGS with a bounded curvature-pair history.
///
/// Pairs come from consecutive `(params, grad)` snapshots: the pair ending at
/// the current iterate is only formed once its gradient is known, so each
/// direction uses completed pairs only.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    pub lr: f64,
    capacity: usize,
    len: usize,
    history: VecDeque<CurvaturePair>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    rejected: usize,
}

impl Lbfgs {
    pub fn new(len: usize, lr: f64, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput(
                "L-BFGS history must be at least 1".into(),
            ));
        }
        Ok(Self {
            lr,
            capacity,
            len,
            history: VecDeque::with_capacity(capacity),
            prev: None,
            rejected: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &CurvaturePair> {
        self.history.iter()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Pairs discarded by the curvature guard so far.
    pub fn rejected_pairs(&self) -> usize {
        self.rejected
    }

    /// Stores `(s, y)` directly, subject to the curvature guard. Returns
    /// whether the pair was kept.
    pub fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> Result<bool> {
        check_len(self.len, s.len())?;
        check_len(self.len, y.len())?;
        let ys = dot(&y, &s);
        if !ys.is_finite() {
            return Err(Error::numeric("L-BFGS curvature pair"));
        }
        if ys <= CURVATURE_GUARD {
            self.rejected += 1;
            return Ok(false);
        }
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(CurvaturePair {
            s,
            y,
            rho: 1.0 / ys,
        });
        Ok(true)
    }

    /// Closes the pair started at the previous snapshot and records the new one.
    pub fn observe(&mut self, params: &[f64], grad: &[f64]) -> Result<()> {
        check_len(self.len, params.len())?;
        check_len(self.len, grad.len())?;
        check_finite(params, "L-BFGS parameters")?;
        check_finite(grad, "L-BFGS gradient")?;
        if let Some((p0, g0)) = self.prev.take() {
            let s = params.iter().zip(&p0).map(|(a, b)| a - b).collect();
            let y = grad.iter().zip(&g0).map(|(a, b)| a - b).collect();
            self.push_pair(s, y)?;
        }
        self.prev = Some((params.to_vec(), grad.to_vec()));
        Ok(())
    }

    /// Two-loop recursion: returns `−H·grad` for the implicit inverse
    /// Hessian built from the stored pairs, with `H₀ = γI`.
    pub fn direction(&self, grad: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len, grad.len())?;
        check_finite(grad, "L-BFGS gradient")?;
        let mut q = grad.to_vec();
        let mut alpha = vec![0.0; self.history.len()];
        for (i, pair) in self.history.iter().enumerate().rev() {
            let a = pair.rho * dot(&pair.s, &q);
            alpha[i] = a;
            for (qj, yj) in q.iter_mut().zip(&pair.y) {
                *qj -= a * yj;
            }
        }
        let gamma = match self.history.back() {
            Some(p) => 1.0 / (p.rho * dot(&p.y, &p.y)),
            None => 1.0,
        };
        for qj in &mut q {
            *qj *= gamma;
        }
        for (pair, a) in self.history.iter().zip(&alpha) {
            let b = pair.rho * dot(&pair.y, &q);
            for (rj, sj) in q.iter_mut().zip(&pair.s) {
                *rj += sj * (a - b);
            }
        }
        for r in &mut q {
            *r = -*r;
        }
        Ok(q)
    }

    /// One L-BFGS iteration with a strong-Wolfe line search along the
    /// two-loop direction, starting from a trial step of `lr`. `eval` returns
    /// the loss and gradient at a trial point.
    pub fn step_line_search<F>(
        &mut self,
        params: &mut [f64],
        loss: f64,
        grad: &[f64],
        wolfe: &WolfeParams,
        mut eval: F,
    ) -> Result<LineSearch>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        check_len(self.len, params.len())?;
        self.observe(params, grad)?;
        let mut dir = self.direction(grad)?;
        if dot(&dir, grad) >= 0.0 {
            // stale curvature; restart from steepest descent
            self.history.clear();
            dir = grad.iter().map(|g| -g).collect();
        }
        let found = strong_wolfe(&mut eval, params, loss, grad, &dir, self.lr, wolfe)?;
        for (p, d) in params.iter_mut().zip(&dir) {
            *p += found.step * d;
        }
        Ok(found)
    }
}

impl Optimizer for Lbfgs {
    /// Fixed step: `params ← params + lr·direction`.
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        self.observe(params, grad)?;
        let dir = self.direction(grad)?;
        for (p, d) in params.iter_mut().zip(&dir) {
            *p += self.lr * d;
        }
        check_finite(params, "L-BFGS update")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WolfeParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_evals: usize,
    /// Largest step the bracketing phase may try, as a multiple of the
    /// initial step.
    pub max_growth: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_evals: 25,
            max_growth: 1e4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearch {
    pub step: f64,
    pub loss: f64,
    pub evals: usize,
    /// Whether both strong-Wolfe conditions hold at `step`. When the
    /// evaluation budget runs out the best sufficient-decrease point is used.
    pub satisfied: bool,
}

struct Probe {
    step: f64,
    loss: f64,
    slope: f64,
}

/// Bracketing plus zoom search for a step satisfying the strong Wolfe
/// conditions along `dir`.
pub fn strong_wolfe<F>(
    eval: &mut F,
    x: &[f64],
    loss0: f64,
    grad0: &[f64],
    dir: &[f64],
    initial_step: f64,
    params: &WolfeParams,
) -> Result<LineSearch>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let slope0 = dot(grad0, dir);
    if slope0.is_nan() || slope0 >= 0.0 {
        return Err(Error::InvalidInput(
            "line search direction is not a descent direction".into(),
        ));
    }
    let mut evals = 0usize;
    let mut probe = |step: f64, evals: &mut usize| -> Result<Probe> {
        *evals += 1;
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        let (loss, grad) = eval(&trial)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("line search trial point"));
        }
        Ok(Probe {
            step,
            loss,
            slope: dot(&grad, dir),
        })
    };
    let armijo = |p: &Probe| p.loss <= loss0 + params.c1 * p.step * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -params.c2 * slope0;
    let done = |p: Probe, evals: usize, satisfied: bool| LineSearch {
        step: p.step,
        loss: p.loss,
        evals,
        satisfied,
    };

    let max_step = initial_step * params.max_growth;
    let mut prev = Probe {
        step: 0.0,
        loss: loss0,
        slope: slope0,
    };
    let mut step = initial_step;
    let (mut lo, mut hi) = loop {
        let cur = probe(step, &mut evals)?;
        if !armijo(&cur) || (evals > 1 && cur.loss >= prev.loss) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Ok(done(cur, evals, true));
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        if evals >= params.max_evals || step >= max_step {
            return Ok(done(cur, evals, false));
        }
        prev = cur;
        step = (2.0 * step).min(max_step);
    };

    // zoom: lo always satisfies sufficient decrease and has the lowest loss
    while evals < params.max_evals {
        let width = hi.step - lo.step;
        let mut trial = cubic_min(&lo, &hi).unwrap_or(lo.step + 0.5 * width);
        let (a, b) = if lo.step < hi.step {
            (lo.step, hi.step)
        } else {
            (hi.step, lo.step)
        };
        let margin = 0.1 * (b - a);
        if !(trial > a + margin && trial < b - margin) {
            trial = 0.5 * (a + b);
        }
        let cur = probe(trial, &mut evals)?;
        if !armijo(&cur) || cur.loss >= lo.loss {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(done(cur, evals, true));
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.step - lo.step).abs() <= 1e-14 * lo.step.abs().max(1e-300) {
            break;
        }
    }
    if lo.step == 0.0 {
        return Err(Error::numeric("line search found no decrease"));
    }
    Ok(done(lo, evals, false))
}

/// Minimizer of the cubic interpolating loss and slope at two probes.
fn cubic_min(a: &Probe, b: &Probe) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.loss - b.loss) / (a.step - b.step);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc.is_nan() || disc < 0.0 {
        return None;
    }
    let d2 = (b.step - a.step).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}
