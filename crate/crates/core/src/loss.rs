//! Mean squared error and cross entropy over flattened images.
//!
//! `X` is always the target and `Y` the reconstruction. Sums run in row-major
//! pixel order so results are bit-reproducible.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::AmplitudeImage;

/// Floor applied to the reconstruction inside the CE logarithm.
pub const CE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Mse,
    Ce,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Ce => "ce",
        }
    }

    pub fn value(self, target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<f64> {
        match self {
            LossKind::Mse => mse(target, recon),
            LossKind::Ce => ce(target, recon),
        }
    }

    pub fn grad(self, target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<Vec<f64>> {
        match self {
            LossKind::Mse => mse_grad(target, recon),
            LossKind::Ce => ce_grad(target, recon),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "ce" => Ok(LossKind::Ce),
            other => Err(Error::InvalidInput(format!("unknown loss '{other}'"))),
        }
    }
}

fn pair<'a>(
    target: &'a AmplitudeImage,
    recon: &'a AmplitudeImage,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if target.dims() != recon.dims() {
        return Err(Error::Shape {
            expected: target.dims(),
            found: recon.dims(),
        });
    }
    Ok(target
        .values()
        .iter()
        .copied()
        .zip(recon.values().iter().copied()))
}

/// `(1/n) Σ (X_i − Y_i)²`.
pub fn mse(target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<f64> {
    let n = target.values().len() as f64;
    Ok(pair(target, recon)?
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// `−(1/n) Σ X_i ln(max(Y_i, ε))`.
pub fn ce(target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<f64> {
    let n = target.values().len() as f64;
    let s: f64 = pair(target, recon)?
        .map(|(x, y)| {
            if x == 0.0 {
                0.0
            } else {
                x * y.max(CE_CLAMP).ln()
            }
        })
        .sum();
    Ok(-s / n)
}

/// `∂mse/∂Y_i = (2/n)(Y_i − X_i)`.
pub fn mse_grad(target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<Vec<f64>> {
    let n = target.values().len() as f64;
    Ok(pair(target, recon)?
        .map(|(x, y)| 2.0 * (y - x) / n)
        .collect())
}

/// `∂ce/∂Y_i = −X_i / (n·Y_i)`, and 0 where the clamp is active.
pub fn ce_grad(target: &AmplitudeImage, recon: &AmplitudeImage) -> Result<Vec<f64>> {
    let n = target.values().len() as f64;
    Ok(pair(target, recon)?
        .map(|(x, y)| {
            if x == 0.0 || y <= CE_CLAMP {
                0.0
            } else {
                -x / (n * y)
            }
        })
        .collect())
}
