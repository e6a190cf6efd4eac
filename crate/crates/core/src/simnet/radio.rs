//! Propagation and antenna models.

use crate::num::Scalar;

use super::NetworkConfig;

/// Distances below this are evaluated at this distance, meters.
pub const MIN_DISTANCE_M: f64 = 35.0;

/// Okumura-Hata urban path loss in dB, small/medium city mobile correction.
pub fn path_loss<T: Scalar>(distance_m: T, cfg: &NetworkConfig) -> T {
    let f = T::of(cfg.carrier_freq).log10();
    let hb = T::of(cfg.antenna_height).log10();
    let hm = T::of(cfg.ue_height);
    let d_km = distance_m.max(T::of(MIN_DISTANCE_M)) / T::of(1000.0);
    let mobile = (T::of(1.1) * f - T::of(0.7)) * hm - (T::of(1.56) * f - T::of(0.8));
    T::of(69.55) + T::of(26.16) * f - T::of(13.82) * hb - mobile + (T::of(44.9) - T::of(6.55) * hb) * d_km.log10()
}

/// Sectored antenna pattern parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub horizontal_beamwidth: f64,
    pub vertical_beamwidth: f64,
    pub max_attenuation: f64,
    pub side_lobe_level: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            horizontal_beamwidth: 65.0,
            vertical_beamwidth: 10.0,
            max_attenuation: 25.0,
            side_lobe_level: 20.0,
        }
    }
}

impl AntennaPattern {
    /// Relative gain in dB (0 at boresight, never below `-max_attenuation`).
    ///
    /// `horizontal_offset` is the bearing relative to the azimuth and
    /// `elevation` the angle below the horizon towards the receiver, both in
    /// degrees; the vertical beam points `tilt` degrees below the horizon.
    pub fn gain<T: Scalar>(&self, horizontal_offset: T, elevation: T, tilt: T) -> T {
        let twelve = T::of(12.0);
        let a_max = T::of(self.max_attenuation);
        let h = horizontal_offset / T::of(self.horizontal_beamwidth);
        let v = (elevation - tilt) / T::of(self.vertical_beamwidth);
        let a_h = -(twelve * h * h).min(a_max);
        let a_v = -(twelve * v * v).min(T::of(self.side_lobe_level));
        -(-(a_h + a_v)).min(a_max)
    }
}

/// [`AntennaPattern::gain`] with the default pattern.
pub fn antenna_gain<T: Scalar>(horizontal_offset: T, elevation: T, tilt: T) -> T {
    AntennaPattern::default().gain(horizontal_offset, elevation, tilt)
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_degrees<T: Scalar>(angle: T) -> T {
    let full = T::of(360.0);
    let mut a = angle % full;
    if a > T::of(180.0) {
        a -= full;
    } else if a <= T::of(-180.0) {
        a += full;
    }
    a
}

pub fn db_to_linear<T: Scalar>(db: T) -> T {
    T::of(10.0).powf(db / T::of(10.0))
}

pub fn linear_to_db<T: Scalar>(x: T) -> T {
    T::of(10.0) * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn path_loss_reference_values() {
        // direct evaluation of the Hata expression at 900 MHz, 32 m / 1.5 m
        assert!((path_loss(1000.0f64, &cfg()) - 126.01592952070209).abs() < 1e-9);
        assert!((path_loss(500.0f64, &cfg()) - 115.46745687436903).abs() < 1e-9);
        assert!((path_loss(1000.0f32, &cfg()) - 126.015_93).abs() < 1e-3);
    }

    #[test]
    fn path_loss_slope_and_clamp() {
        let slope = (44.9 - 6.55 * 32f64.log10()) * 2f64.log10();
        for d in [100.0, 700.0, 3000.0] {
            let diff = path_loss(2.0 * d, &cfg()) - path_loss(d, &cfg());
            assert!((diff - slope).abs() < 1e-9);
        }
        assert_eq!(path_loss(10.0, &cfg()), path_loss(35.0f64, &cfg()));
        assert!((path_loss(10.0f64, &cfg()) - 74.99822819423291).abs() < 1e-9);
    }

    #[test]
    fn antenna_pattern_shape() {
        assert_eq!(antenna_gain(0.0f64, 7.0, 7.0), 0.0);
        assert!((antenna_gain(0.0f64, 7.0 + 10.0, 7.0) + 12.0).abs() < 1e-12);
        assert_eq!(antenna_gain(170.0f64, 80.0, 2.0), -25.0);
        assert!((antenna_gain(65.0f32, 3.0, 3.0) + 12.0).abs() < 1e-5);
    }

    #[test]
    fn wraps_angles() {
        assert_eq!(wrap_degrees(270.0f64), -90.0);
        assert_eq!(wrap_degrees(-190.0f64), 170.0);
        assert_eq!(wrap_degrees(180.0f64), 180.0);
    }
}
