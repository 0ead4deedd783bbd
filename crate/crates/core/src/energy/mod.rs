//! Renewable-energy availability: wind power from air density, sensor replay, shortfall
//! detection, the false-alarm filter, and the fixed-rate photovoltaic source.

mod filter;
mod trace;

pub use filter::{filter_alarm, FilterAction, FilterState};
pub use trace::{replay_sensor_trace, SensorTrace};

use crate::jobshop::Seconds;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STANDARD_PRESSURE_PA: f64 = 101_325.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("humidity term exceeds pressure (density {density} kg/m3 at T={temperature_c} C, humidity={humidity_pct} %)")]
    NonPositiveDensity {
        density: f64,
        temperature_c: f64,
        humidity_pct: f64,
    },
    #[error("sensor sample out of range: {0}")]
    SampleOutOfRange(String),
    #[error("sensor trace is empty")]
    EmptyTrace,
    #[error("sensor trace timestamps decrease at row {row}")]
    UnorderedTrace { row: usize },
    #[error("sensor trace: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t_s: Seconds,
    pub temperature_c: f64,
    pub humidity_pct: f64,
}

impl SensorSample {
    pub fn new(t_s: Seconds, temperature_c: f64, humidity_pct: f64) -> Result<Self, EnergyError> {
        let s = SensorSample {
            t_s,
            temperature_c,
            humidity_pct,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(0.0..=100.0).contains(&self.humidity_pct) {
            return Err(EnergyError::SampleOutOfRange(format!(
                "humidity {} % at t={} s",
                self.humidity_pct, self.t_s
            )));
        }
        if !(-40.0..=60.0).contains(&self.temperature_c) {
            return Err(EnergyError::SampleOutOfRange(format!(
                "temperature {} C at t={} s",
                self.temperature_c, self.t_s
            )));
        }
        Ok(())
    }
}

/// How the humidity reading enters the density formula.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumidityConvention {
    /// Relative humidity in percent, as read from the sensor.
    #[default]
    Percent,
    /// Relative humidity as a fraction in [0, 1].
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindSourceConfig {
    pub rotor_area_m2: f64,
    pub wind_speed_ms: f64,
    #[serde(default = "default_pressure")]
    pub pressure_pa: f64,
    /// Conditions that define the reference power P(0).
    pub baseline: SensorSample,
    #[serde(default)]
    pub humidity: HumidityConvention,
    /// Ratios within `deadband` of 1 are not reported as a shortfall.
    #[serde(default)]
    pub deadband: f64,
}

fn default_pressure() -> f64 {
    STANDARD_PRESSURE_PA
}

impl WindSourceConfig {
    pub fn new(rotor_area_m2: f64, wind_speed_ms: f64, baseline: SensorSample) -> Self {
        WindSourceConfig {
            rotor_area_m2,
            wind_speed_ms,
            pressure_pa: STANDARD_PRESSURE_PA,
            baseline,
            humidity: HumidityConvention::Percent,
            deadband: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, v) in [
            ("rotor area", self.rotor_area_m2),
            ("wind speed", self.wind_speed_ms),
            ("pressure", self.pressure_pa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnergyError::SampleOutOfRange(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.deadband) {
            return Err(EnergyError::SampleOutOfRange(format!(
                "deadband must lie in [0, 1), got {}",
                self.deadband
            )));
        }
        self.baseline.validate()
    }

    fn density(&self, sample: &SensorSample) -> Result<f64, EnergyError> {
        let humidity = match self.humidity {
            HumidityConvention::Percent => sample.humidity_pct,
            HumidityConvention::Fraction => sample.humidity_pct / 100.0,
        };
        air_density(sample.temperature_c, humidity, self.pressure_pa).map_err(|e| match e {
            EnergyError::NonPositiveDensity { density, .. } => EnergyError::NonPositiveDensity {
                density,
                temperature_c: sample.temperature_c,
                humidity_pct: sample.humidity_pct,
            },
            other => other,
        })
    }
}

/// Moist-air density in kg/m³:
/// `rho = (p - 230.617 * phi * exp(17.5043 T / (241.2 + T))) / (287.06 (T + 273.15))`
/// with T in °C and p in Pa. `humidity` is used exactly as given.
pub fn air_density(
    temperature_c: f64,
    humidity: f64,
    pressure_pa: f64,
) -> Result<f64, EnergyError> {
    let vapour = 230.617 * humidity * (17.5043 * temperature_c / (241.2 + temperature_c)).exp();
    let density = (pressure_pa - vapour) / (287.06 * (temperature_c + 273.15));
    if density > 0.0 && density.is_finite() {
        Ok(density)
    } else {
        Err(EnergyError::NonPositiveDensity {
            density,
            temperature_c,
            humidity_pct: humidity,
        })
    }
}

/// `P = 0.5 * rho * S * V^3`, in watts.
pub fn wind_power(density: f64, config: &WindSourceConfig) -> f64 {
    0.5 * density * config.rotor_area_m2 * config.wind_speed_ms.powi(3)
}

/// Outcome of comparing current to reference power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAlarm {
    pub alarmed: bool,
    /// P(t) / P(0).
    pub ratio: f64,
    /// Announced reduction, `(1 - ratio) * 100` while alarmed, 0 otherwise.
    pub taux_energy_pct: f64,
}

impl EnergyAlarm {
    pub fn from_ratio(ratio: f64, deadband: f64) -> Self {
        let alarmed = ratio < 1.0 - deadband;
        EnergyAlarm {
            alarmed,
            ratio,
            taux_energy_pct: if alarmed { (1.0 - ratio) * 100.0 } else { 0.0 },
        }
    }

    pub fn quiet() -> Self {
        EnergyAlarm {
            alarmed: false,
            ratio: 1.0,
            taux_energy_pct: 0.0,
        }
    }
}

/// Compares the wind power at `sample` with the baseline. Rotor area and wind speed are
/// fixed per source, so the power ratio is the density ratio.
pub fn detect(
    sample: &SensorSample,
    config: &WindSourceConfig,
) -> Result<EnergyAlarm, EnergyError> {
    let reference = wind_power(config.density(&config.baseline)?, config);
    let current = wind_power(config.density(sample)?, config);
    Ok(EnergyAlarm::from_ratio(
        current / reference,
        config.deadband,
    ))
}

/// Photovoltaic provider announcing a constant reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvSourceConfig {
    #[serde(default = "default_pv_taux")]
    pub taux_pct: f64,
}

fn default_pv_taux() -> f64 {
    10.0
}

impl Default for PvSourceConfig {
    fn default() -> Self {
        PvSourceConfig {
            taux_pct: default_pv_taux(),
        }
    }
}

pub fn pv_source_poll(config: &PvSourceConfig) -> EnergyAlarm {
    let taux = config.taux_pct.clamp(0.0, 100.0);
    EnergyAlarm {
        alarmed: taux > 0.0,
        ratio: 1.0 - taux / 100.0,
        taux_energy_pct: taux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(t: u64, temp: f64, hum: f64) -> SensorSample {
        SensorSample::new(t, temp, hum).unwrap()
    }

    #[test]
    fn density_dry_air() {
        let rho = air_density(19.0, 0.0, STANDARD_PRESSURE_PA).unwrap();
        assert_abs_diff_eq!(rho, 101_325.0 / (287.06 * 292.15), epsilon = 1e-12);
        assert_abs_diff_eq!(rho, 1.2082, epsilon = 1e-4);
    }

    #[test]
    fn density_reference_points() {
        // mpmath at 30 digits: 0.852795251186..., 0.628401651645...
        assert_abs_diff_eq!(
            air_density(19.0, 36.0, STANDARD_PRESSURE_PA).unwrap(),
            0.852_795_251_186,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            air_density(28.0, 33.0, STANDARD_PRESSURE_PA).unwrap(),
            0.628_401_651_645,
            epsilon = 1e-10
        );
    }

    #[test]
    fn density_unit_misuse() {
        // Humidity in percent with pressure in hPa drives density negative.
        let err = air_density(28.0, 33.0, 1013.25).unwrap_err();
        assert!(err.to_string().contains("humidity term exceeds pressure"));
    }

    #[test]
    fn density_decreases_with_heat_and_humidity() {
        // With humidity in percent the vapour term overtakes the pressure for hot, humid
        // air (above ~71 % at 28 C), so the sweep covers the region where density exists.
        let rho = |t: f64, h: f64| air_density(t, h, STANDARD_PRESSURE_PA).ok();
        let mut checked = 0;
        for t in -40..60 {
            for h in (0..=100).step_by(5) {
                let (t, h) = (t as f64, h as f64);
                let Some(here) = rho(t, h) else { continue };
                if let Some(warmer) = rho(t + 1.0, h) {
                    assert!(warmer < here, "T={t} h={h}");
                    checked += 1;
                }
                if let Some(wetter) = rho(t, h + 5.0) {
                    assert!(wetter < here, "T={t} h={h}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1500);
        assert!(rho(28.0, 72.0).is_none());
        assert!(rho(28.0, 70.0).is_some());
    }

    #[test]
    fn wind_power_law() {
        let base = WindSourceConfig::new(2.0, 3.0, sample(0, 19.0, 36.0));
        assert_eq!(wind_power(1.0, &base), 27.0);
        let faster = WindSourceConfig {
            wind_speed_ms: 6.0,
            ..base
        };
        assert_eq!(wind_power(1.0, &faster), 8.0 * 27.0);
        assert_abs_diff_eq!(
            wind_power(0.7, &base) / wind_power(1.1, &base),
            0.7 / 1.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn detect_baseline_is_quiet() {
        let cfg = WindSourceConfig::new(10.0, 8.0, sample(0, 19.0, 36.0));
        let a = detect(&sample(5, 19.0, 36.0), &cfg).unwrap();
        assert!(!a.alarmed);
        assert_eq!(a.ratio, 1.0);
        assert_eq!(a.taux_energy_pct, 0.0);
    }

    #[test]
    fn detect_warm_humid_step() {
        let cfg = WindSourceConfig::new(10.0, 8.0, sample(0, 19.0, 36.0));
        let a = detect(&sample(22, 28.0, 33.0), &cfg).unwrap();
        assert!(a.alarmed);
        assert_abs_diff_eq!(a.ratio, 0.736_872_831_75, epsilon = 1e-9);
        assert_abs_diff_eq!(a.taux_energy_pct, 26.312_716_825, epsilon = 1e-7);
    }

    #[test]
    fn detect_ratio_ignores_rotor_and_wind() {
        let s = sample(22, 28.0, 33.0);
        let a = detect(&s, &WindSourceConfig::new(1.0, 1.0, sample(0, 19.0, 36.0))).unwrap();
        let b = detect(
            &s,
            &WindSourceConfig::new(80.0, 12.5, sample(0, 19.0, 36.0)),
        )
        .unwrap();
        assert_abs_diff_eq!(a.ratio, b.ratio, epsilon = 1e-14);
    }

    #[test]
    fn detect_colder_drier_is_quiet() {
        let cfg = WindSourceConfig::new(10.0, 8.0, sample(0, 19.0, 36.0));
        let a = detect(&sample(3, 12.0, 30.0), &cfg).unwrap();
        assert!(a.ratio > 1.0);
        assert!(!a.alarmed);
    }

    #[test]
    fn fraction_convention_is_much_milder() {
        let mut cfg = WindSourceConfig::new(10.0, 8.0, sample(0, 19.0, 36.0));
        cfg.humidity = HumidityConvention::Fraction;
        let a = detect(&sample(22, 28.0, 33.0), &cfg).unwrap();
        assert_abs_diff_eq!(a.ratio, 0.968_463_388_6, epsilon = 1e-9);
    }

    #[test]
    fn deadband_suppresses_small_dips() {
        let mut cfg = WindSourceConfig::new(10.0, 8.0, sample(0, 19.0, 36.0));
        cfg.deadband = 0.3;
        assert!(!detect(&sample(22, 28.0, 33.0), &cfg).unwrap().alarmed);
    }

    #[test]
    fn pv_constant_rate() {
        let a = pv_source_poll(&PvSourceConfig::default());
        assert!(a.alarmed);
        assert_eq!(a.taux_energy_pct, 10.0);
        assert!(!pv_source_poll(&PvSourceConfig { taux_pct: 0.0 }).alarmed);
        assert_eq!(
            pv_source_poll(&PvSourceConfig { taux_pct: 26.0 }).taux_energy_pct,
            26.0
        );
    }

    #[test]
    fn sample_ranges() {
        assert!(SensorSample::new(0, 19.0, 101.0).is_err());
        assert!(SensorSample::new(0, -41.0, 50.0).is_err());
        assert!(SensorSample::new(0, 60.0, 100.0).is_ok());
    }
}
