use num_complex::Complex64;

use crate::error::{Error, Result};

/// MMSE equalizer and the resulting MSE for effective gain `ĝ^H w` and
/// interference-plus-noise `j`.
///
/// ```
/// use hcran::beamforming::mse_and_equalizer;
/// use num_complex::Complex64;
///
/// let (mse, f) = mse_and_equalizer(Complex64::new(1.0, 0.0), 1.0);
/// assert_eq!(f, Complex64::new(0.5, 0.0));
/// assert_eq!(mse, 0.5);
/// ```
pub fn mse_and_equalizer(gain: Complex64, j: f64) -> (f64, Complex64) {
    debug_assert!(j > 0.0);
    let total = gain.norm_sqr() + j;
    let f = gain / total;
    (mse_at(gain, j, f), f)
}

/// `E|f^* y − s|² = |f^* gain − 1|² + |f|² j` for an arbitrary equalizer `f`.
pub fn mse_at(gain: Complex64, j: f64, f: Complex64) -> f64 {
    (f.conj() * gain - 1.0).norm_sqr() + f.norm_sqr() * j
}

/// Optimal auxiliary variable `u = 1 − ln(mse)`.
pub fn update_u(mse: f64) -> Result<f64> {
    if !(mse > 0.0) || !mse.is_finite() {
        return Err(Error::Domain(format!("MSE must be positive and finite, got {mse}")));
    }
    Ok(1.0 - mse.ln())
}

/// The weight `exp(u − 1)` multiplying the MSE for fixed `u`.
pub fn weight(u: f64) -> f64 {
    (u - 1.0).exp()
}

/// `S(u) = exp(u − 1)·mse − u`, minimized at `u = 1 − ln(mse)` with value `ln(mse)`.
pub fn auxiliary_objective(u: f64, mse: f64) -> f64 {
    weight(u) * mse - u
}
