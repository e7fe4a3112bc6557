use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

type Symbol = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// A Fourier symbol `m(ξ)`, with `ξ` in cycles per unit length.
///
/// Evaluation at `ξ = 0` may produce a non-finite value (e.g. `|ξ|^{-1}`); it is replaced by 0
/// when applied. A non-finite value anywhere else is an error.
#[derive(Clone)]
pub struct FourierMultiplier {
    symbol: Arc<Symbol>,
    label: &'static str,
}

impl fmt::Debug for FourierMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierMultiplier")
            .field("label", &self.label)
            .finish()
    }
}

fn norm_sqr(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum()
}

impl FourierMultiplier {
    pub fn new(f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            symbol: Arc::new(f),
            label: "custom",
        }
    }

    /// Real-valued symbol.
    pub fn real(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |xi| Complex64::new(f(xi), 0.0))
    }

    fn labelled(mut self, label: &'static str) -> Self {
        self.label = label;
        self
    }

    pub fn identity() -> Self {
        Self::real(|_| 1.0).labelled("identity")
    }

    /// `(1 + 4π²|ξ|²)^{s/2}`, the symbol of `(1 − Δ)^{s/2}`.
    pub fn bessel(s: f64) -> Self {
        Self::real(move |xi| (1.0 + 4.0 * PI * PI * norm_sqr(xi)).powf(s / 2.0)).labelled("bessel")
    }

    /// `2πi ξ_axis`, the symbol of `∂/∂x_axis`.
    pub fn derivative(axis: usize) -> Self {
        Self::new(move |xi| Complex64::new(0.0, 2.0 * PI * xi[axis])).labelled("derivative")
    }

    /// `|ξ|^{-1}` with the value at `ξ = 0` set to 0 (removes the mean).
    pub fn inverse_abs() -> Self {
        Self::real(|xi| {
            let r = norm_sqr(xi).sqrt();
            if r == 0.0 {
                0.0
            } else {
                1.0 / r
            }
        })
        .labelled("inverse_abs")
    }

    /// `exp(−4π² τ |ξ|²)`, the heat semigroup `e^{τΔ}`.
    pub fn heat(tau: f64) -> Self {
        Self::real(move |xi| (-4.0 * PI * PI * tau * norm_sqr(xi)).exp()).labelled("heat")
    }

    /// Pointwise product of two symbols.
    pub fn compose(&self, other: &FourierMultiplier) -> Self {
        let a = self.symbol.clone();
        let b = other.symbol.clone();
        Self::new(move |xi| a(xi) * b(xi)).labelled("composite")
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        (self.symbol)(xi)
    }

    pub(crate) fn eval_checked(&self, xi: &[f64]) -> Result<Complex64> {
        let v = (self.symbol)(xi);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else if xi.iter().all(|&c| c == 0.0) {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::NonFiniteSymbol {
                frequency: xi.to_vec(),
            })
        }
    }
}
