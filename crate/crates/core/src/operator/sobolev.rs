//! Anisotropic space-time Sobolev norms measured on the discrete spectrum.

use super::calculus::base;
use super::laplace::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::field::Field;
use rustfft::FftPlanner;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobolevForm {
    /// Weight `(1 + |i sigma + |xi|^2|)^a`; identity metric only.
    Symbol,
    /// Weight `(1 + |lambda + i sigma|^2)^{a/2}`.
    Spectral,
}

/// Weighted `l^2` norm of the normalized space-time coefficients. With
/// `a = 0` this is exactly the volume-weighted `L^2` norm.
pub fn sobolev_norm(
    decomp: &SpectralDecomposition,
    u: &Field,
    a: f64,
    form: SobolevForm,
    identity_metric: bool,
) -> Result<f64> {
    let grid = decomp.grid();
    if u.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if form == SobolevForm::Symbol && !identity_metric {
        return Err(Error::NonIdentityMetric("the symbol form of the Sobolev norm"));
    }
    if !(-2.0..=2.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("order {a} outside [-2, 2]")));
    }
    let (nt, ns) = (grid.nt, grid.n_space());
    if a == 0.0 {
        let mut acc = 0.0;
        for j in 0..nt {
            for i in 0..ns {
                acc += decomp.weight(i) * u.at(j, i).norm_sqr();
            }
        }
        return Ok((acc * grid.cell()).sqrt());
    }
    let mut coeffs = decomp.to_coefficients(u.data(), nt);
    let fft = FftPlanner::new().plan_fft_forward(nt);
    let mut series = vec![num_complex::Complex64::new(0.0, 0.0); nt];
    // Parseval: sum_k |DFT_k|^2 = nt sum_j |x_j|^2, and each slice carries dt.
    let scale = grid.dt() / nt as f64;
    let mut acc = 0.0;
    for mode in 0..ns {
        for j in 0..nt {
            series[j] = coeffs[j * ns + mode];
        }
        fft.process(&mut series);
        let lam = decomp.eigenvalue(mode);
        for (k, c) in series.iter().enumerate() {
            let z = if grid.is_time_nyquist(k) {
                num_complex::Complex64::new(lam, std::f64::consts::PI / grid.dt())
            } else {
                base(decomp, lam, k, false)
            };
            let w = match form {
                SobolevForm::Symbol => (1.0 + z.norm()).powf(a),
                SobolevForm::Spectral => (1.0 + z.norm_sqr()).powf(0.5 * a),
            };
            acc += w * c.norm_sqr();
        }
    }
    coeffs.clear();
    Ok((acc * scale).sqrt())
}
