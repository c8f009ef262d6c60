//! Scenario JSON files.
//!
//! Lengths are centimeters, frequencies megahertz and gains decibels inside
//! the file; [`ScenarioFile::into_scenario`] converts to SI. `"schema": 1` is
//! required and unknown fields are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backscatter::DiodeModel;
use crate::error::{Error, Result};
use crate::model::{
    cm_to_m, m_to_cm, Aabb, AntennaPattern, AntennaRole, AntennaSpec, DevicePlacement, Frequency,
    InterferenceTone, MediumStack, PerHarmonic, Position, Scenario, TissueSlab,
};

pub const SCENARIO_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PatternEntry {
    Omnidirectional,
    Horn { boresight: [f64; 3], beamwidth_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaEntry {
    pub id: String,
    pub role: AntennaRole,
    pub position_cm: [f64; 3],
    pub pattern: PatternEntry,
    pub chain_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabEntry {
    pub material: String,
    pub rel_permittivity: f64,
    pub atten_db_per_m: f64,
    pub ref_frequency_mhz: f64,
    pub freq_exponent: f64,
    pub min_cm: [f64; 3],
    pub max_cm: [f64; 3],
    #[serde(default)]
    pub attached_to_device: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub position_cm: [f64; 3],
    #[serde(default)]
    pub diode: DiodeModel,
    #[serde(default)]
    pub phase_offsets_rad: PerHarmonic<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceEntry {
    #[serde(default)]
    pub rx_id: Option<String>,
    pub offset_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

fn default_tx1() -> String {
    "TX1".into()
}

fn default_tx2() -> String {
    "TX2".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub f1_mhz: f64,
    pub f2_mhz: f64,
    #[serde(default = "default_tx1")]
    pub f1_tx: String,
    #[serde(default = "default_tx2")]
    pub f2_tx: String,
    pub antennas: Vec<AntennaEntry>,
    #[serde(default)]
    pub slabs: Vec<SlabEntry>,
    #[serde(default)]
    pub device: Option<DeviceEntry>,
    #[serde(default)]
    pub tx_amplitudes: BTreeMap<String, f64>,
    /// `null` or absent disables noise.
    #[serde(default)]
    pub noise_psd_dbfs_hz: Option<f64>,
    #[serde(default)]
    pub interference: Vec<InterferenceEntry>,
    #[serde(default)]
    pub seed: u64,
}

fn cm3(p: Position) -> [f64; 3] {
    p.to_cm()
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::SchemaMismatch(format!(
                "scenario schema {} (expected {SCENARIO_SCHEMA})",
                self.schema
            )));
        }
        let antennas = self
            .antennas
            .into_iter()
            .map(|a| {
                let pattern = match a.pattern {
                    PatternEntry::Omnidirectional => AntennaPattern::Omnidirectional,
                    PatternEntry::Horn {
                        boresight,
                        beamwidth_deg,
                    } => AntennaPattern::horn(
                        Position::new(boresight[0], boresight[1], boresight[2]),
                        beamwidth_deg,
                    )?,
                };
                Ok(AntennaSpec {
                    id: a.id,
                    role: a.role,
                    position: Position::from_cm(a.position_cm),
                    pattern,
                    chain_gain_db: a.chain_gain_db,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let slabs = self
            .slabs
            .into_iter()
            .map(|s| {
                Ok(TissueSlab {
                    material: s.material,
                    rel_permittivity: s.rel_permittivity,
                    atten_db_per_m_at_ref: s.atten_db_per_m,
                    ref_frequency: Frequency::from_mhz(s.ref_frequency_mhz)?,
                    freq_exponent: s.freq_exponent,
                    extent: Aabb::new(Position::from_cm(s.min_cm), Position::from_cm(s.max_cm))?,
                    attached_to_device: s.attached_to_device,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            name: self.name,
            antennas,
            medium: MediumStack::new(slabs)?,
            device: self.device.map(|d| DevicePlacement {
                position: Position::from_cm(d.position_cm),
                diode: d.diode,
                phase_offsets: d.phase_offsets_rad,
            }),
            f1: Frequency::from_mhz(self.f1_mhz)?,
            f2: Frequency::from_mhz(self.f2_mhz)?,
            tx_f1: self.f1_tx,
            tx_f2: self.f2_tx,
            tx_amplitudes: self.tx_amplitudes,
            noise_psd_dbfs_hz: self.noise_psd_dbfs_hz.unwrap_or(f64::NEG_INFINITY),
            interference: self
                .interference
                .into_iter()
                .map(|i| InterferenceTone {
                    rx_id: i.rx_id,
                    offset_hz: i.offset_hz,
                    amplitude: i.amplitude,
                    phase: i.phase_rad,
                })
                .collect(),
            rng_seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            schema: SCENARIO_SCHEMA,
            name: s.name.clone(),
            f1_mhz: s.f1.mhz(),
            f2_mhz: s.f2.mhz(),
            f1_tx: s.tx_f1.clone(),
            f2_tx: s.tx_f2.clone(),
            antennas: s
                .antennas
                .iter()
                .map(|a| AntennaEntry {
                    id: a.id.clone(),
                    role: a.role,
                    position_cm: cm3(a.position),
                    pattern: match a.pattern {
                        AntennaPattern::Omnidirectional => PatternEntry::Omnidirectional,
                        AntennaPattern::Horn {
                            boresight,
                            beamwidth_deg,
                        } => PatternEntry::Horn {
                            boresight: boresight.to_array(),
                            beamwidth_deg,
                        },
                    },
                    chain_gain_db: a.chain_gain_db,
                })
                .collect(),
            slabs: s
                .medium
                .slabs
                .iter()
                .map(|t| SlabEntry {
                    material: t.material.clone(),
                    rel_permittivity: t.rel_permittivity,
                    atten_db_per_m: t.atten_db_per_m_at_ref,
                    ref_frequency_mhz: t.ref_frequency.mhz(),
                    freq_exponent: t.freq_exponent,
                    min_cm: cm3(t.extent.min),
                    max_cm: cm3(t.extent.max),
                    attached_to_device: t.attached_to_device,
                })
                .collect(),
            device: s.device.as_ref().map(|d| DeviceEntry {
                position_cm: cm3(d.position),
                diode: d.diode,
                phase_offsets_rad: d.phase_offsets,
            }),
            tx_amplitudes: s.tx_amplitudes.clone(),
            noise_psd_dbfs_hz: s.noise_psd_dbfs_hz.is_finite().then_some(s.noise_psd_dbfs_hz),
            interference: s
                .interference
                .iter()
                .map(|i| InterferenceEntry {
                    rx_id: i.rx_id.clone(),
                    offset_hz: i.offset_hz,
                    amplitude: i.amplitude,
                    phase_rad: i.phase,
                })
                .collect(),
            seed: s.rng_seed,
        }
    }
}

pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(json)?;
    file.into_scenario()
}

pub fn scenario_to_json(s: &Scenario) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(s))?;
    text.push('\n');
    Ok(text)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_json(s)?)?;
    Ok(())
}

/// Converts a file-side length back to meters; exposed for CLI flags.
pub fn length_from_cm(cm: f64) -> f64 {
    cm_to_m(cm)
}

pub fn length_to_cm(m: f64) -> f64 {
    m_to_cm(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn presets_round_trip() {
        for name in presets::PRESET_NAMES {
            let s = presets::by_name(name).unwrap();
            let back = parse_scenario(&scenario_to_json(&s).unwrap()).unwrap();
            assert_eq!(back, s, "{name}");
        }
    }

    #[test]
    fn minimal_file() {
        let json = r#"{
            "schema": 1,
            "f1_mhz": 830, "f2_mhz": 870,
            "antennas": [
                {"id": "TX1", "role": "transmit", "position_cm": [57.5, 0, 9.5], "pattern": {"type": "omnidirectional"}, "chain_gain_db": 70},
                {"id": "TX2", "role": "transmit", "position_cm": [-1.5, 0, 9.5], "pattern": {"type": "horn", "boresight": [0, 2, 0], "beamwidth_deg": 60}, "chain_gain_db": 70},
                {"id": "RX1", "role": "receive", "position_cm": [18, 0, 8], "pattern": {"type": "omnidirectional"}, "chain_gain_db": 30}
            ],
            "device": {"position_cm": [30, 18, 11.1]}
        }"#;
        let s = parse_scenario(json).unwrap();
        assert_eq!(s.f1.hz(), 830e6);
        assert_eq!(s.antennas[0].position.x, 0.575);
        assert_eq!(s.noise_psd_dbfs_hz, f64::NEG_INFINITY);
        assert_eq!(s.device.unwrap().diode, DiodeModel::default());
    }

    #[test]
    fn wrong_schema_rejected() {
        let mut f = ScenarioFile::from_scenario(&presets::air_c1());
        f.schema = 2;
        assert!(matches!(f.into_scenario(), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut f = ScenarioFile::from_scenario(&presets::air_c1());
        f.antennas[1].id = "TX2".into();
        assert!(matches!(f.into_scenario(), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn equal_carriers_rejected() {
        let mut f = ScenarioFile::from_scenario(&presets::air_c1());
        f.f2_mhz = f.f1_mhz;
        assert!(matches!(f.into_scenario(), Err(Error::EqualCarriers(_))));
    }
}
