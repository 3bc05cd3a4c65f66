//! SINR-to-throughput mapping shared by downlink and uplink.

/// Attenuation factor applied to the Shannon bound.
pub const SHANNON_ATTENUATION: f64 = 0.6;
/// Spectral-efficiency cap, bit/s/Hz.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 4.4;

/// `min(0.6 * B * log2(1 + SINR), 4.4 * B)` in bit/s.
pub fn attenuated_shannon_bps(sinr_db: f64, bandwidth_hz: f64) -> f64 {
    let sinr = 10f64.powf(sinr_db / 10.0);
    (SHANNON_ATTENUATION * bandwidth_hz * (1.0 + sinr).log2()).min(MAX_SPECTRAL_EFFICIENCY * bandwidth_hz)
}

/// Same mapping from a linear SINR.
pub fn attenuated_shannon_bps_lin(sinr: f64, bandwidth_hz: f64) -> f64 {
    (SHANNON_ATTENUATION * bandwidth_hz * (1.0 + sinr).log2()).min(MAX_SPECTRAL_EFFICIENCY * bandwidth_hz)
}

pub fn peak_rate_bps(bandwidth_hz: f64) -> f64 {
    MAX_SPECTRAL_EFFICIENCY * bandwidth_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_db_is_sixty_percent_of_bandwidth() {
        assert!((attenuated_shannon_bps(0.0, 1e6) - 0.6e6).abs() < 1e-6);
    }

    #[test]
    fn capped_at_peak() {
        assert_eq!(attenuated_shannon_bps(60.0, 180e3), peak_rate_bps(180e3));
    }

    #[test]
    fn monotone_in_sinr() {
        let r: Vec<f64> = (-20..40).map(|s| attenuated_shannon_bps(s as f64, 1e6)).collect();
        assert!(r.windows(2).all(|w| w[1] >= w[0]));
    }
}
