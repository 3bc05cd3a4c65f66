//! Model ledger: the auditable set of propagation constants.
//!
//! The shipped ledger lives in `configs/model_ledger.toml` and is embedded at
//! build time, so the built-in defaults and the file are the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const SHIPPED_LEDGER: &str = include_str!("../configs/model_ledger.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmaConstants {
    pub avg_building_height: f64,
    pub street_width: f64,
    pub los_near_m: f64,
    pub los_decay_m: f64,
    pub baseline_max_ue_height: f64,
    pub speed_of_light: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AerialConstants {
    pub interp_floor_altitude: f64,
    pub los_cutoff_altitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowingConstants {
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
    pub decorrelation_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossLimits {
    pub min_d2d: f64,
    pub max_d2d: f64,
    pub min_fc_ghz: f64,
    pub max_fc_ghz: f64,
    pub seam_tolerance_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelLedger {
    pub rma: RmaConstants,
    pub aerial: AerialConstants,
    pub shadowing: ShadowingConstants,
    pub pathloss: PathlossLimits,
}

impl Default for ModelLedger {
    fn default() -> Self {
        Self::parse(SHIPPED_LEDGER, Path::new("<shipped ledger>"))
            .expect("shipped model ledger is valid")
    }
}

impl ModelLedger {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let ledger: ModelLedger = toml::from_str(text).map_err(|e| SimError::Parse {
            path: origin.to_path_buf(),
            location: e
                .span()
                .map(|s| format!("byte {}", s.start))
                .unwrap_or_else(|| "?".into()),
            msg: e.message().to_string(),
        })?;
        ledger.validate()?;
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.aerial;
        if !(a.los_cutoff_altitude > a.interp_floor_altitude && a.interp_floor_altitude > 0.0) {
            return Err(SimError::config(
                "ledger.aerial.los_cutoff_altitude",
                "must exceed interp_floor_altitude > 0",
            ));
        }
        let s = &self.shadowing;
        if s.sigma_los_db < 0.0 || s.sigma_nlos_db < 0.0 || s.decorrelation_m <= 0.0 {
            return Err(SimError::config(
                "ledger.shadowing",
                "sigmas must be >= 0 and decorrelation distance > 0",
            ));
        }
        if self.rma.los_decay_m <= 0.0 || self.rma.avg_building_height <= 0.0 {
            return Err(SimError::config("ledger.rma", "decay and building height must be > 0"));
        }
        let p = &self.pathloss;
        if !(p.min_d2d > 0.0 && p.max_d2d > p.min_d2d && p.max_fc_ghz > p.min_fc_ghz) {
            return Err(SimError::config("ledger.pathloss", "inconsistent domain limits"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ledger serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_ledger_parses() {
        let l = ModelLedger::default();
        assert_eq!(l.shadowing.sigma_nlos_db, 8.0);
        assert_eq!(l.aerial.los_cutoff_altitude, 100.0);
        assert_eq!(l.rma.baseline_max_ue_height, 23.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = SHIPPED_LEDGER.replace("[rma]", "[rma]\nbogus = 1.0");
        assert!(ModelLedger::parse(&text, Path::new("x")).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let l = ModelLedger::default();
        let back = ModelLedger::parse(&l.to_toml(), Path::new("x")).unwrap();
        assert_eq!(l, back);
    }
}
