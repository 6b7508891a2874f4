//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::PathBuf;

use fraunhofer_cgh::{AmplitudeImage, ComplexField, Objective, PhaseMask};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_field(h: usize, w: usize, seed: u64) -> ComplexField {
    let mut r = rng(seed);
    let v = (0..h * w)
        .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    ComplexField::new(h, w, v).unwrap()
}

pub fn random_phase(h: usize, w: usize, seed: u64) -> PhaseMask {
    let mut r = rng(seed);
    PhaseMask::new(h, w, (0..h * w).map(|_| r.random_range(0.0..TAU)).collect()).unwrap()
}

/// Strictly positive pseudo-random image in `[lo, lo + 1)`.
pub fn random_image(h: usize, w: usize, lo: f64, seed: u64) -> AmplitudeImage {
    let mut r = rng(seed);
    AmplitudeImage::new(h, w, (0..h * w).map(|_| lo + r.random::<f64>()).collect()).unwrap()
}

/// `⟨a, b⟩ = Σ conj(a)·b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Direct O(n²) evaluation of the centered unitary DFT:
/// `X[u, v] = (HW)^(-1/2) Σ x[r, c] exp(−2πi((u−cH)r/H + (v−cW)c/W))`.
pub fn naive_centered_dft(field: &ComplexField) -> Vec<Complex64> {
    let (h, w) = field.dims();
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let x = field.values();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ang = -TAU
                        * ((u as f64 - ch) * r as f64 / h as f64
                            + (v as f64 - cw) * c as f64 / w as f64);
                    acc += x[r * w + c] * Complex64::from_polar(1.0, ang);
                }
            }
            out[u * w + v] = acc * scale;
        }
    }
    out
}

/// Central finite differences of the objective's loss w.r.t. every phase pixel.
pub fn fd_phase_gradient(obj: &Objective, phase: &PhaseMask, step: f64) -> Vec<f64> {
    let (h, w) = phase.dims();
    let base = phase.values().to_vec();
    (0..base.len())
        .map(|j| {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[j] += step;
            dn[j] -= step;
            let fu = obj.loss(&PhaseMask::new(h, w, up).unwrap()).unwrap();
            let fd = obj.loss(&PhaseMask::new(h, w, dn).unwrap()).unwrap();
            (fu - fd) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise relative error of `got` against `want`, with the
/// denominator floored at 1e-3 of `want`'s largest component so pixels with a
/// near-zero derivative are judged on an absolute scale.
pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(floor))
        .fold(0.0, f64::max)
}

/// `−H·g` with `H` built densely by the BFGS inverse update applied to the
/// pairs oldest first, starting from `γI` with `γ = sᵀy/yᵀy` of the newest
/// pair (1 if none).
pub fn dense_bfgs_direction(pairs: &[(Vec<f64>, Vec<f64>)], grad: &[f64]) -> Vec<f64> {
    let n = grad.len();
    let gamma = pairs.last().map_or(1.0, |(s, y)| {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        s.dot(&y) / y.dot(&y)
    });
    let mut h = DMatrix::<f64>::identity(n, n) * gamma;
    let eye = DMatrix::<f64>::identity(n, n);
    for (s, y) in pairs {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        let rho = 1.0 / y.dot(&s);
        let left = &eye - (&s * y.transpose()) * rho;
        let right = &eye - (&y * s.transpose()) * rho;
        h = &left * &h * &right + (&s * s.transpose()) * rho;
    }
    let d = -(h * DVector::from_column_slice(grad));
    d.iter().copied().collect()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}
