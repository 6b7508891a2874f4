//! The optimization loop: random initial hologram, repeated loss/gradient
//! evaluation and optimizer steps, and per-iteration metrics. Also the
//! binary-phase helpers used for two-level modulators.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Objective;
use crate::error::{Error, Result};
use crate::field::{amplitude, intensity, AmplitudeImage, ComplexField, PhaseMask};
use crate::loss::{mse, LossKind};
use crate::optim::{Adam, Lbfgs, Optimizer, WolfeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Lbfgs => "lbfgs",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "lbfgs" | "l-bfgs" => Ok(OptimizerKind::Lbfgs),
            other => Err(Error::InvalidInput(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Which far-field quantity is compared against the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReconModel {
    /// `|F|²`, what a camera in the replay plane records.
    #[default]
    Intensity,
    /// `|F|`.
    Amplitude,
}

impl ReconModel {
    pub fn apply(self, far_field: &ComplexField) -> AmplitudeImage {
        match self {
            ReconModel::Intensity => intensity(far_field),
            ReconModel::Amplitude => amplitude(far_field),
        }
    }
}

/// How the reconstruction is scaled before the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scaling {
    /// Use the unitary far field as is.
    #[default]
    None,
    /// Rescale to the target's energy with [`normalize_recon`].
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Reconstruction {
    pub model: ReconModel,
    pub scaling: Scaling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `lr` along the search direction every iteration.
    Fixed,
    /// Strong-Wolfe line search starting at `lr` (L-BFGS only).
    StrongWolfe,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub lbfgs_history: usize,
    /// Keep a reconstruction snapshot every this many iterations; 0 keeps none.
    pub save_every: usize,
    pub reconstruction: Reconstruction,
    pub step_rule: StepRule,
}

impl RunConfig {
    pub fn new(optimizer: OptimizerKind, loss: LossKind, size: (usize, usize)) -> Self {
        Self {
            optimizer,
            loss,
            lr: 0.1,
            iterations: 100,
            seed: 0,
            height: size.0,
            width: size.1,
            lbfgs_history: 20,
            save_every: 1,
            reconstruction: Reconstruction::default(),
            step_rule: StepRule::Fixed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if self.lbfgs_history == 0 {
            return Err(Error::InvalidInput(
                "L-BFGS history must be at least 1".into(),
            ));
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::InvalidInput(format!(
                "image must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Training loss at each evaluated iterate, before its update.
    pub loss_history: Vec<f64>,
    /// MSE of the peak-normalized reconstruction against the peak-normalized
    /// target, whatever the training loss.
    pub mse_history: Vec<f64>,
    pub final_phase: PhaseMask,
    pub rejected_pairs: usize,
    /// Iteration at which a non-finite value stopped the run.
    pub diverged_at: Option<usize>,
    /// `(iteration, reconstruction)` every `save_every` iterations.
    pub snapshots: Vec<(usize, AmplitudeImage)>,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn initial_mse(&self) -> Option<f64> {
        self.mse_history.first().copied()
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.mse_history.last().copied()
    }

    /// Converged means finished without diverging and with the final MSE more
    /// than 10% below the initial one.
    pub fn converged(&self) -> bool {
        match (self.diverged(), self.initial_mse(), self.final_mse()) {
            (false, Some(first), Some(last)) => last < 0.9 * first,
            _ => false,
        }
    }
}

/// I.i.d. uniform phases on `[0, 2π)` from ChaCha8 seeded with `seed`.
pub fn initial_phase(dims: (usize, usize), seed: u64) -> Result<PhaseMask> {
    let (h, w) = dims;
    if h < 2 || w < 2 {
        return Err(Error::InvalidInput(format!(
            "initial phase needs at least 2x2, got {h}x{w}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(0.0, TAU).expect("valid range");
    let phase = (0..h * w).map(|_| dist.sample(&mut rng)).collect();
    PhaseMask::new(h, w, phase)
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub image: AmplitudeImage,
    pub scale: f64,
    /// Set when `raw` was all zero and could not be rescaled.
    pub degenerate: bool,
}

/// Scales `raw` so that its energy (sum of squares) equals the target's.
pub fn normalize_recon(raw: &AmplitudeImage, target: &AmplitudeImage) -> Result<Normalized> {
    if raw.dims() != target.dims() {
        return Err(Error::Shape {
            expected: target.dims(),
            found: raw.dims(),
        });
    }
    let raw_energy = raw.energy();
    if raw_energy == 0.0 {
        return Ok(Normalized {
            image: raw.clone(),
            scale: 1.0,
            degenerate: true,
        });
    }
    let scale = (target.energy() / raw_energy).sqrt();
    let (h, w) = raw.dims();
    let image = AmplitudeImage::new(h, w, raw.values().iter().map(|v| v * scale).collect())?;
    Ok(Normalized {
        image,
        scale,
        degenerate: false,
    })
}

/// MSE after dividing each image by its own peak.
pub fn peak_mse(target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<f64> {
    mse(&target.peak_normalized(), &recon.peak_normalized())
}

/// Nearest of `{0, π}` on the circle: π on `[π/2, 3π/2)`, else 0.
pub fn quantize_binary(phase: &PhaseMask) -> PhaseMask {
    let (h, w) = phase.dims();
    let values = phase
        .values()
        .iter()
        .map(|&p| {
            let p = crate::field::canonical_phase(p);
            if (PI / 2.0..3.0 * PI / 2.0).contains(&p) {
                PI
            } else {
                0.0
            }
        })
        .collect();
    PhaseMask::new(h, w, values).expect("quantized phases are finite")
}

/// `(image + rot180(image)) / 2`.
pub fn symmetrize_target(image: &AmplitudeImage) -> AmplitudeImage {
    let (h, w) = image.dims();
    let rot = image.rot180();
    let values = image
        .values()
        .iter()
        .zip(rot.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    AmplitudeImage::new(h, w, values).expect("average of valid images")
}

/// Simulated replay image of a hologram under a reconstruction model, before
/// any rescaling.
pub fn simulate(phase: &PhaseMask, model: ReconModel) -> Result<AmplitudeImage> {
    let far = crate::field::fraunhofer_forward(&crate::field::phase_to_field(phase))?;
    Ok(model.apply(&far))
}

/// Runs `config.iterations` optimizer steps from the seeded random hologram.
///
/// A non-finite loss or gradient ends the run early with `diverged_at` set;
/// the histories then hold the iterations completed so far.
pub fn optimize(target: &AmplitudeImage, config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    if target.dims() != (config.height, config.width) {
        return Err(Error::Shape {
            expected: (config.height, config.width),
            found: target.dims(),
        });
    }
    let start = initial_phase(target.dims(), config.seed)?;
    optimize_from(target, config, start)
}

/// As [`optimize`], from a given starting hologram.
pub fn optimize_from(
    target: &AmplitudeImage,
    config: &RunConfig,
    start: PhaseMask,
) -> Result<RunRecord> {
    config.validate()?;
    if start.dims() != target.dims() {
        return Err(Error::Shape {
            expected: target.dims(),
            found: start.dims(),
        });
    }
    let objective = Objective::new(target.clone(), config.loss, config.reconstruction)?;
    let (h, w) = target.dims();
    let n = h * w;
    let mut params = start.into_values();

    enum State {
        Adam(Adam),
        Lbfgs(Lbfgs),
    }
    let mut state = match config.optimizer {
        OptimizerKind::Adam => State::Adam(Adam::new(n, config.lr)),
        OptimizerKind::Lbfgs => State::Lbfgs(Lbfgs::new(n, config.lr, config.lbfgs_history)?),
    };
    let wolfe = WolfeParams::default();

    let mut record = RunRecord {
        loss_history: Vec::with_capacity(config.iterations),
        mse_history: Vec::with_capacity(config.iterations),
        final_phase: PhaseMask::zeros(h, w)?,
        rejected_pairs: 0,
        diverged_at: None,
        snapshots: Vec::new(),
    };

    for iter in 0..config.iterations {
        let eval = match objective.evaluate_flat(&params) {
            Ok(e) => e,
            Err(Error::Numeric { .. }) => {
                record.diverged_at = Some(iter);
                break;
            }
            Err(e) => return Err(e),
        };
        let peak = peak_mse(target, &eval.recon)?;
        if !peak.is_finite() {
            record.diverged_at = Some(iter);
            break;
        }
        record.loss_history.push(eval.loss);
        record.mse_history.push(peak);
        if config.save_every > 0 && iter % config.save_every == 0 {
            record.snapshots.push((iter, eval.recon.clone()));
        }

        let before = params.clone();
        let stepped = match (&mut state, config.step_rule) {
            (State::Adam(adam), _) => adam.step(&mut params, &eval.grad),
            (State::Lbfgs(lb), StepRule::Fixed) => lb.step(&mut params, &eval.grad),
            (State::Lbfgs(lb), StepRule::StrongWolfe) => lb
                .step_line_search(&mut params, eval.loss, &eval.grad, &wolfe, |p| {
                    objective.evaluate_flat(p).map(|e| (e.loss, e.grad))
                })
                .map(|_| ()),
        };
        let blew_up = match stepped {
            Ok(()) => params.iter().any(|p| !p.is_finite()),
            Err(Error::Numeric { .. }) => true,
            Err(e) => return Err(e),
        };
        if blew_up {
            params = before;
            record.diverged_at = Some(iter);
            break;
        }
    }

    if let State::Lbfgs(lb) = &state {
        record.rejected_pairs = lb.rejected_pairs();
    }
    record.final_phase = PhaseMask::new(h, w, params)?.canonical();
    Ok(record)
}
