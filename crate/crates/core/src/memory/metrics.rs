use crate::error::{Error, Result};

/// `C_ret / (C_ref / (1 - zeta))`.
pub fn total_efficiency(c_ret: f64, c_ref: f64, insertion_loss: f64) -> Result<f64> {
    if !(c_ref > 0.0) {
        return Err(Error::domain("reference counts must be positive"));
    }
    if !(0.0..1.0).contains(&insertion_loss) {
        return Err(Error::domain("insertion loss must lie in [0, 1)"));
    }
    if !(c_ret >= 0.0) {
        return Err(Error::domain("retrieved counts must be >= 0"));
    }
    Ok((1.0 - insertion_loss) * c_ret / c_ref)
}

/// Signal-to-noise ratio in dB. Zero noise gives `+inf`.
pub fn snr(signal_counts: f64, noise_per_pulse: f64) -> Result<f64> {
    if !(noise_per_pulse >= 0.0) || !(signal_counts >= 0.0) {
        return Err(Error::domain("counts must be >= 0"));
    }
    if noise_per_pulse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal_counts / noise_per_pulse).log10())
}

/// Mean photon number at the memory input from counts detected after a
/// path of the given transmission.
pub fn mean_photon_from_counts(detected: f64, path_transmission: f64) -> Result<f64> {
    if !(path_transmission > 0.0 && path_transmission <= 1.0) {
        return Err(Error::domain(format!(
            "path transmission must lie in (0, 1], got {path_transmission}"
        )));
    }
    if !(detected >= 0.0) {
        return Err(Error::domain("detected counts must be >= 0"));
    }
    Ok(detected / path_transmission)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_normalisation() {
        assert!((total_efficiency(0.84, 1.0, 0.68).unwrap() - 0.2688).abs() < 1e-12);
        assert_eq!(total_efficiency(0.0, 1.0, 0.68).unwrap(), 0.0);
        assert_eq!(total_efficiency(2.0, 2.0, 0.0).unwrap(), 1.0);
        assert!(total_efficiency(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn snr_values() {
        assert!((snr(1.5, 3e-4).unwrap() - 36.99).abs() < 0.01);
        assert_eq!(snr(1.0, 1.0).unwrap(), 0.0);
        assert!((snr(10.0, 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(snr(1.0, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn photon_number() {
        assert_eq!(mean_photon_from_counts(0.4, 0.5).unwrap(), 0.8);
        assert_eq!(mean_photon_from_counts(0.3, 1.0).unwrap(), 0.3);
        assert!(mean_photon_from_counts(0.3, 0.0).is_err());
    }
}
