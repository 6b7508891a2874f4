//! Loss and exact phase gradient for the hologram → replay-field pipeline.
//!
//! Forward: `h = exp(iφ)`, `F = 𝓕h`, `Q = |F|` or `|F|²`, `R = c·Q`, `L = loss(T, R)`.
//! Backward, for a real loss of a complex field, `dL = Re Σ conj(w)·dF` with
//! `w = (∂L/∂|F|)·F/|F|`. Pulling `w` back through the unitary transform gives
//! `b = 𝓕†w`, and since `dh = i·h·dφ`, `∂L/∂φ_j = Im(conj(h_j)·b_j)`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{phase_to_field, AmplitudeImage, ComplexField, Fraunhofer, PhaseMask};
use crate::loss::LossKind;
use crate::pipeline::{ReconModel, Reconstruction, Scaling};

/// Below this far-field modulus the amplitude derivative is taken as 0.
pub const AMPLITUDE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    /// `∂loss/∂phase`, row-major, same shape as the phase mask.
    pub grad: Vec<f64>,
    /// The reconstruction `R` the loss was evaluated on.
    pub recon: AmplitudeImage,
}

/// A fixed target, loss and reconstruction model, with the transform planned
/// once for the target's size.
#[derive(Debug, Clone)]
pub struct Objective {
    target: AmplitudeImage,
    kind: LossKind,
    recon: Reconstruction,
    plan: Fraunhofer,
}

struct Forward {
    hologram: ComplexField,
    far: ComplexField,
    /// `|F|` or `|F|²`, before scaling.
    raw: AmplitudeImage,
    scale: f64,
    recon: AmplitudeImage,
}

impl Objective {
    pub fn new(target: AmplitudeImage, kind: LossKind, recon: Reconstruction) -> Result<Self> {
        let (h, w) = target.dims();
        let plan = Fraunhofer::new(h, w)?;
        Ok(Self {
            target,
            kind,
            recon,
            plan,
        })
    }

    pub fn target(&self) -> &AmplitudeImage {
        &self.target
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn reconstruction(&self) -> Reconstruction {
        self.recon
    }

    fn check(&self, phase: &PhaseMask) -> Result<()> {
        if phase.dims() != self.target.dims() {
            return Err(Error::Shape {
                expected: self.target.dims(),
                found: phase.dims(),
            });
        }
        Ok(())
    }

    fn forward(&self, phase: &PhaseMask) -> Result<Forward> {
        self.check(phase)?;
        let hologram = phase_to_field(phase);
        let far = self.plan.forward(&hologram)?;
        let raw = self.recon.model.apply(&far);
        let (recon, scale) = match self.recon.scaling {
            Scaling::None => (raw.clone(), 1.0),
            Scaling::Energy => {
                let normalized = crate::pipeline::normalize_recon(&raw, &self.target)?;
                (normalized.image, normalized.scale)
            }
        };
        Ok(Forward {
            hologram,
            far,
            raw,
            scale,
            recon,
        })
    }

    /// Reconstruction `R` for a phase mask, without the gradient.
    pub fn reconstruct(&self, phase: &PhaseMask) -> Result<AmplitudeImage> {
        Ok(self.forward(phase)?.recon)
    }

    /// Loss only.
    pub fn loss(&self, phase: &PhaseMask) -> Result<f64> {
        let fwd = self.forward(phase)?;
        self.kind.value(&self.target, &fwd.recon)
    }

    pub fn evaluate(&self, phase: &PhaseMask) -> Result<LossAndGrad> {
        let fwd = self.forward(phase)?;
        let loss = self.kind.value(&self.target, &fwd.recon)?;
        if !loss.is_finite() {
            return Err(Error::numeric("loss value"));
        }
        let g_recon = self.kind.grad(&self.target, &fwd.recon)?;

        // through R = c·Q; under energy scaling c depends on Q as well
        let q = fwd.raw.values();
        let c = fwd.scale;
        let g_raw: Vec<f64> = match self.recon.scaling {
            Scaling::Energy if fwd.raw.energy() > 0.0 => {
                let q_energy = fwd.raw.energy();
                let proj: f64 = g_recon.iter().zip(q).map(|(g, q)| g * q).sum::<f64>() / q_energy;
                g_recon
                    .iter()
                    .zip(q)
                    .map(|(g, q)| c * (g - proj * q))
                    .collect()
            }
            _ => g_recon.iter().map(|g| c * g).collect(),
        };

        // through Q = |F| or |F|², as the complex cotangent w
        let w: Vec<Complex64> = fwd
            .far
            .values()
            .iter()
            .zip(&g_raw)
            .map(|(f, &g)| match self.recon.model {
                ReconModel::Intensity => f * (2.0 * g),
                ReconModel::Amplitude => {
                    let a = f.norm();
                    if a < AMPLITUDE_CUTOFF {
                        Complex64::new(0.0, 0.0)
                    } else {
                        f * (g / a)
                    }
                }
            })
            .collect();
        let (h, wd) = self.target.dims();
        let w = ComplexField::new(h, wd, w).map_err(|_| Error::numeric("back-propagated field"))?;
        let b = self.plan.adjoint(&w)?;

        let grad: Vec<f64> = fwd
            .hologram
            .values()
            .iter()
            .zip(b.values())
            .map(|(h, b)| (h.conj() * b).im)
            .collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("phase gradient"));
        }
        Ok(LossAndGrad {
            loss,
            grad,
            recon: fwd.recon,
        })
    }

    /// [`evaluate`](Self::evaluate) over a flat parameter vector.
    pub fn evaluate_flat(&self, params: &[f64]) -> Result<LossAndGrad> {
        let (h, w) = self.target.dims();
        let phase = PhaseMask::new(h, w, params.to_vec())
            .map_err(|_| Error::numeric("phase parameters"))?;
        self.evaluate(&phase)
    }
}

/// Loss and phase gradient under the default reconstruction model.
pub fn loss_and_grad(
    phase: &PhaseMask,
    target: &AmplitudeImage,
    kind: LossKind,
) -> Result<LossAndGrad> {
    Objective::new(target.clone(), kind, Reconstruction::default())?.evaluate(phase)
}
