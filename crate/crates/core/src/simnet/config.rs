use serde::{Deserialize, Serialize};

use super::SimError;

/// Network and radio parameters. Defaults follow the 7-site, 21-cell urban
/// layout used for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_bs: usize,
    pub cells_per_bs: usize,
    pub num_ues: usize,
    /// Base station antenna height, meters.
    pub antenna_height: f64,
    /// Downtilt bounds, degrees.
    pub tilt_min: f64,
    pub tilt_max: f64,
    /// Tilt change of one non-zero action, degrees.
    pub tilt_step: f64,
    /// MHz; the propagation model is valid on [150, 1500].
    pub carrier_freq: f64,
    pub inter_site_distance: f64,
    pub ue_height: f64,
    /// dBm; UEs served below this are uncovered.
    pub rsrp_coverage_threshold: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    /// Share of UEs moved to fresh positions every step.
    pub resample_fraction: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_bs: 7,
            cells_per_bs: 3,
            num_ues: 2000,
            antenna_height: 32.0,
            tilt_min: 1.0,
            tilt_max: 16.0,
            tilt_step: 1.0,
            carrier_freq: 900.0,
            inter_site_distance: 1500.0,
            ue_height: 1.5,
            rsrp_coverage_threshold: -110.0,
            tx_power_dbm: 46.0,
            noise_dbm: -104.0,
            resample_fraction: 0.1,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn num_cells(&self) -> usize {
        self.num_bs * self.cells_per_bs
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.num_bs == 0 || self.cells_per_bs == 0 {
            return fail("need at least one base station and one cell per site");
        }
        if self.num_ues == 0 {
            return fail("num_ues must be at least 1");
        }
        if self.tilt_min.is_nan() || self.tilt_max.is_nan() || self.tilt_min >= self.tilt_max {
            return fail("tilt_min must be below tilt_max");
        }
        if self.tilt_step.is_nan() || self.tilt_step <= 0.0 {
            return fail("tilt_step must be positive");
        }
        if !(150.0..=1500.0).contains(&self.carrier_freq) {
            return fail("carrier_freq outside the 150-1500 MHz model range");
        }
        if !(self.antenna_height > 0.0 && self.ue_height > 0.0 && self.inter_site_distance > 0.0) {
            return fail("heights and inter-site distance must be positive");
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return fail("resample_fraction outside [0, 1]");
        }
        Ok(())
    }

    pub fn from_toml(src: &str) -> Result<Self, SimError> {
        let cfg: NetworkConfig = toml::from_str(src).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid_and_round_trip() {
        let c = NetworkConfig::default();
        c.validate().unwrap();
        assert_eq!(c.num_cells(), 21);
        assert_eq!(NetworkConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = NetworkConfig::from_toml("num_ues = 200\nseed = 9\n").unwrap();
        assert_eq!(c.num_ues, 200);
        assert_eq!(c.num_bs, 7);
        assert!(NetworkConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            NetworkConfig { tilt_min: 5.0, tilt_max: 3.0, ..Default::default() },
            NetworkConfig { num_ues: 0, ..Default::default() },
            NetworkConfig { carrier_freq: 2600.0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(SimError::InvalidConfig(_))));
        }
    }
}
