//! Hologram-plane and replay-plane arrays, and far-field propagation.
//!
//! The far field of a planar-wavefront aperture is modelled as a centered,
//! unitary 2D DFT: the standard DFT scaled by `1/sqrt(H*W)`, with the DC term
//! moved to pixel `(H/2, W/2)` (integer division). [`Fraunhofer::adjoint`] is
//! the exact inverse, so energy is preserved in both directions.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput(format!(
            "degenerate dimensions {height}x{width}"
        )));
    }
    if height * width != len {
        return Err(Error::Length {
            expected: height * width,
            found: len,
        });
    }
    Ok(())
}

/// Per-pixel hologram phase in radians, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    height: usize,
    width: usize,
    phase: Vec<f64>,
}

impl PhaseMask {
    pub fn new(height: usize, width: usize, phase: Vec<f64>) -> Result<Self> {
        check_dims(height, width, phase.len())?;
        if let Some(i) = phase.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "phase pixel {i} is not finite"
            )));
        }
        Ok(Self {
            height,
            width,
            phase,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.phase
    }

    pub fn into_values(self) -> Vec<f64> {
        self.phase
    }

    /// Maps every pixel into `[0, 2π)`.
    pub fn canonicalize(&mut self) {
        for p in &mut self.phase {
            *p = canonical_phase(*p);
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }
}

/// Reduces a finite phase modulo 2π into `[0, 2π)`.
pub fn canonical_phase(p: f64) -> f64 {
    let r = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Complex amplitudes on an H×W grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(height: usize, width: usize, values: Vec<Complex64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "field pixel {i} is not finite"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Sum of squared moduli.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Nonnegative real image: a target or a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl AmplitudeImage {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "image pixel {i} is negative or not finite ({})",
                values[i]
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of squared values.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Copy divided by its own peak; an all-zero image is returned unchanged.
    pub fn peak_normalized(&self) -> Self {
        let peak = self.max();
        if peak == 0.0 {
            return self.clone();
        }
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|v| v / peak).collect(),
        }
    }

    /// Point reflection through the array center: pixel `(r, c)` moves to
    /// `(H-1-r, W-1-c)`.
    pub fn rot180(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            height: self.height,
            width: self.width,
            values,
        }
    }

    /// Reflection through the DC pixel `(H/2, W/2)`: `(u, v)` maps to
    /// `((2·H/2 − u) mod H, (2·W/2 − v) mod W)`. This is the symmetry of a
    /// real field's centered spectrum.
    pub fn rot180_about_dc(&self) -> Self {
        let (h, w) = self.dims();
        let (ch, cw) = (h / 2, w / 2);
        let mut values = vec![0.0; h * w];
        for u in 0..h {
            let pu = (2 * ch + h - u) % h;
            for v in 0..w {
                let pv = (2 * cw + w - v) % w;
                values[pu * w + pv] = self.values[u * w + v];
            }
        }
        Self {
            height: h,
            width: w,
            values,
        }
    }
}

/// `exp(i·phase)` per pixel: a unit-modulus, phase-only field.
pub fn phase_to_field(phase: &PhaseMask) -> ComplexField {
    ComplexField {
        height: phase.height,
        width: phase.width,
        values: phase
            .phase
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect(),
    }
}

/// Per-pixel modulus `|F|`.
pub fn amplitude(field: &ComplexField) -> AmplitudeImage {
    AmplitudeImage {
        height: field.height,
        width: field.width,
        values: field.values.iter().map(|v| v.norm()).collect(),
    }
}

/// Per-pixel squared modulus `|F|²`.
pub fn intensity(field: &ComplexField) -> AmplitudeImage {
    AmplitudeImage {
        height: field.height,
        width: field.width,
        values: field.values.iter().map(|v| v.norm_sqr()).collect(),
    }
}

/// Planned centered unitary 2D DFT for one grid size.
///
/// Plans are shared behind `Arc`, so a `Fraunhofer` is cheap to clone and can
/// be used from several threads at once.
#[derive(Clone)]
pub struct Fraunhofer {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Fraunhofer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fraunhofer")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fraunhofer {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "degenerate dimensions {height}x{width}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            scale: 1.0 / ((height * width) as f64).sqrt(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        if field.dims() != self.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                found: field.dims(),
            });
        }
        Ok(())
    }

    /// Hologram plane to replay plane.
    pub fn forward(&self, field: &ComplexField) -> Result<ComplexField> {
        self.check(field)?;
        let mut data = field.values.clone();
        self.transform(&mut data, &self.row_fwd, &self.col_fwd);
        let values = shift(&data, self.height, self.width, false);
        Ok(ComplexField {
            height: self.height,
            width: self.width,
            values,
        })
    }

    /// Replay plane back to hologram plane; the exact adjoint (and inverse)
    /// of [`forward`](Self::forward).
    pub fn adjoint(&self, field: &ComplexField) -> Result<ComplexField> {
        self.check(field)?;
        let mut data = shift(&field.values, self.height, self.width, true);
        self.transform(&mut data, &self.row_inv, &self.col_inv);
        Ok(ComplexField {
            height: self.height,
            width: self.width,
            values: data,
        })
    }

    fn transform(
        &self,
        data: &mut [Complex64],
        rows: &Arc<dyn Fft<f64>>,
        cols: &Arc<dyn Fft<f64>>,
    ) {
        let (h, w) = (self.height, self.width);
        rows.process(data);
        let mut t = transpose(data, h, w);
        cols.process(&mut t);
        let back = transpose(&t, w, h);
        for (d, b) in data.iter_mut().zip(back) {
            *d = b * self.scale;
        }
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Quadrant swap. Forward moves index 0 to `n/2` along each axis; `inverse`
/// undoes it (they differ for odd sizes).
fn shift(data: &[Complex64], h: usize, w: usize, inverse: bool) -> Vec<Complex64> {
    let (sh, sw) = if inverse {
        (h - h / 2, w - w / 2)
    } else {
        (h / 2, w / 2)
    };
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..h {
        let rr = (r + sh) % h;
        for c in 0..w {
            out[rr * w + (c + sw) % w] = data[r * w + c];
        }
    }
    out
}

/// One-shot forward transform; plans a [`Fraunhofer`] for the field's size.
pub fn fraunhofer_forward(field: &ComplexField) -> Result<ComplexField> {
    Fraunhofer::new(field.height, field.width)?.forward(field)
}

/// One-shot adjoint transform.
pub fn fraunhofer_adjoint(field: &ComplexField) -> Result<ComplexField> {
    Fraunhofer::new(field.height, field.width)?.adjoint(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phase_to_field_examples() {
        let mask = PhaseMask::new(1, 3, vec![0.0, PI, PI / 2.0]).unwrap();
        let f = phase_to_field(&mask);
        let expect = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (got, want) in f.values().iter().zip(expect) {
            assert!((got - want).norm() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn non_finite_phase_rejected() {
        assert!(matches!(
            PhaseMask::new(1, 2, vec![0.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            PhaseMask::new(1, 1, vec![f64::INFINITY]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn degenerate_field_rejected() {
        assert!(matches!(Fraunhofer::new(0, 4), Err(Error::InvalidInput(_))));
        assert!(ComplexField::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn two_by_two_ones_is_centered_delta() {
        let f = ComplexField::new(2, 2, vec![c(1.0, 0.0); 4]).unwrap();
        let out = fraunhofer_forward(&f).unwrap();
        for (i, v) in out.values().iter().enumerate() {
            let want = if i == 3 { 2.0 } else { 0.0 };
            assert!((v - c(want, 0.0)).norm() < 1e-15, "pixel {i}: {v}");
        }
        let back = fraunhofer_adjoint(&out).unwrap();
        for v in back.values() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut vals = vec![c(0.0, 0.0); 16];
        vals[0] = c(1.0, 0.0);
        let out = fraunhofer_forward(&ComplexField::new(4, 4, vals).unwrap()).unwrap();
        for v in out.values() {
            assert!((v.norm() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dc_lands_on_floor_center_for_odd_dims() {
        let f = ComplexField::new(5, 3, vec![c(1.0, 0.0); 15]).unwrap();
        let out = fraunhofer_forward(&f).unwrap();
        let a = amplitude(&out);
        assert!((a.get(2, 1) - 15f64.sqrt()).abs() < 1e-12);
        assert!((a.energy() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let plan = Fraunhofer::new(4, 4).unwrap();
        let f = ComplexField::new(2, 2, vec![c(0.0, 0.0); 4]).unwrap();
        assert!(matches!(plan.forward(&f), Err(Error::Shape { .. })));
    }

    #[test]
    fn amplitude_examples() {
        let f = ComplexField::new(1, 3, vec![c(3.0, 4.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(amplitude(&f).values(), &[5.0, 0.0, 1.0]);
        assert_eq!(intensity(&f).values(), &[25.0, 0.0, 1.0]);
    }

    #[test]
    fn canonical_phase_range() {
        for p in [-1e-300, -TAU, -0.5, 0.0, TAU, 3.0 * TAU + 0.25, 1e6] {
            let q = canonical_phase(p);
            assert!((0.0..TAU).contains(&q), "{p} -> {q}");
        }
        assert!((canonical_phase(-0.5) - (TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn rotations() {
        let img = AmplitudeImage::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(img.rot180().values(), &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let r = img.rot180_about_dc();
        assert_eq!(r.get(1, 1), img.get(1, 1));
        assert_eq!(r.get(0, 2), img.get(0, 0));
        assert_eq!(r.rot180_about_dc(), img);
    }
}
