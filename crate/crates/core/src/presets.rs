//! Shipped scenarios for the bench-top antenna layouts.
//!
//! Antenna coordinates are the measured grid positions (cm). Everything that
//! sets absolute power levels (drive amplitudes, chain gains, diode
//! coefficients, attenuation rates, noise) is a calibration value picked so
//! the simulated harmonics sit a few to a few tens of dB over the noise
//! floor near the antennas and sink into it past ~60 cm. They are not
//! measured hardware constants.

use std::collections::BTreeMap;

use crate::backscatter::DiodeModel;
use crate::model::{
    Aabb, AntennaPattern, AntennaRole, AntennaSpec, DevicePlacement, Frequency, MediumStack,
    PerHarmonic, Position, Scenario, TissueSlab,
};

/// Relative permittivity of muscle.
pub const MUSCLE_PERMITTIVITY: f64 = 54.81;
/// Relative permittivity of fat.
pub const FAT_PERMITTIVITY: f64 = 5.447;

/// Transmit register gain used for both carriers.
pub const TX_CHAIN_GAIN_DB: f64 = 70.0;
/// Drive amplitude that maps the 70 dB register setting onto the simulator's
/// full-scale units.
pub const TX_DRIVE: f64 = 1.5e-2;
pub const RX_CHAIN_GAIN_DB: f64 = 20.0;
pub const NOISE_PSD_DBFS_HZ: f64 = -63.5;
pub const HORN_BEAMWIDTH_DEG: f64 = 90.0;

/// Attenuation reference frequency for the material presets.
pub const ATTEN_REF_MHZ: f64 = 900.0;
pub const FAT_ATTEN_DB_PER_M: f64 = 8.0;
pub const MUSCLE_ATTEN_DB_PER_M: f64 = 30.0;
pub const CHICKEN_ATTEN_DB_PER_M: f64 = 30.0;
pub const PORK_ATTEN_DB_PER_M: f64 = 60.0;

/// Sample dimensions, cm.
pub const CHICKEN_SIZE_CM: [f64; 3] = [16.0, 22.0, 10.0];
pub const PORK_SIZE_CM: [f64; 3] = [8.0, 12.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Horn transmitters, omnidirectional receivers.
    C1,
    /// C1 with both receivers shifted 3 cm toward TX2.
    C1B,
    /// Horn transmitters and receivers.
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tissue {
    Air,
    Chicken,
    Pork,
}

fn mhz(v: f64) -> Frequency {
    Frequency::from_mhz(v).expect("positive preset frequency")
}

fn horn() -> AntennaPattern {
    AntennaPattern::horn(Position::new(0.0, 1.0, 0.0), HORN_BEAMWIDTH_DEG).expect("valid horn")
}

fn antenna(id: &str, role: AntennaRole, cm: [f64; 3], pattern: AntennaPattern) -> AntennaSpec {
    AntennaSpec {
        id: id.into(),
        role,
        position: Position::from_cm(cm),
        pattern,
        chain_gain_db: match role {
            AntennaRole::Transmit => TX_CHAIN_GAIN_DB,
            AntennaRole::Receive => RX_CHAIN_GAIN_DB,
        },
    }
}

/// Antennas of a layout, listed TX2, RX1, RX2, TX1.
pub fn antennas(layout: Layout) -> Vec<AntennaSpec> {
    use AntennaRole::*;
    let (tx2, rx1, rx2, tx1, rx_pattern) = match layout {
        Layout::C1 => ([-1.5, 0.0, 9.5], [18.0, 0.0, 8.0], [36.0, 0.0, 8.0], [57.5, 0.0, 9.5], AntennaPattern::Omnidirectional),
        Layout::C1B => ([-1.5, 0.0, 9.5], [15.0, 0.0, 8.0], [33.0, 0.0, 8.0], [57.5, 0.0, 9.5], AntennaPattern::Omnidirectional),
        Layout::C2 => ([-5.0, 0.0, 9.5], [20.0, 0.0, 9.5], [45.0, 0.0, 9.5], [70.0, 0.0, 9.5], horn()),
    };
    vec![
        antenna("TX2", Transmit, tx2, horn()),
        antenna("RX1", Receive, rx1, rx_pattern),
        antenna("RX2", Receive, rx2, rx_pattern),
        antenna("TX1", Transmit, tx1, horn()),
    ]
}

/// A material box centered on `center_cm`.
pub fn slab(material: &str, eps: f64, atten: f64, center_cm: [f64; 3], size_cm: [f64; 3]) -> TissueSlab {
    // snap to the 1e-9 cm grid the file format round-trips exactly
    let snap = |v: f64| (v * 1e9).round() / 1e9;
    let lo = [0, 1, 2].map(|i| snap(center_cm[i] - size_cm[i] / 2.0));
    let hi = [0, 1, 2].map(|i| snap(center_cm[i] + size_cm[i] / 2.0));
    TissueSlab {
        material: material.into(),
        rel_permittivity: eps,
        atten_db_per_m_at_ref: atten,
        ref_frequency: mhz(ATTEN_REF_MHZ),
        freq_exponent: 1.0,
        extent: Aabb::new(Position::from_cm(lo), Position::from_cm(hi)).expect("positive size"),
        attached_to_device: false,
    }
}

/// The sample the device is embedded in, attached so sweeps carry it along.
pub fn tissue_slab(tissue: Tissue, device_cm: [f64; 3]) -> Option<TissueSlab> {
    let (name, atten, size) = match tissue {
        Tissue::Air => return None,
        Tissue::Chicken => ("chicken", CHICKEN_ATTEN_DB_PER_M, CHICKEN_SIZE_CM),
        Tissue::Pork => ("pork", PORK_ATTEN_DB_PER_M, PORK_SIZE_CM),
    };
    let mut s = slab(name, MUSCLE_PERMITTIVITY, atten, device_cm, size);
    s.attached_to_device = true;
    Some(s)
}

/// A complete scenario with the device at `device_cm`.
pub fn scenario(layout: Layout, tissue: Tissue, device_cm: [f64; 3]) -> Scenario {
    let antennas = antennas(layout);
    let tx_amplitudes: BTreeMap<String, f64> =
        [("TX1".to_string(), TX_DRIVE), ("TX2".to_string(), TX_DRIVE)].into();
    let medium = MediumStack::new(tissue_slab(tissue, device_cm).into_iter().collect())
        .expect("single slab");
    let name = format!(
        "{}/{}",
        match tissue {
            Tissue::Air => "air",
            Tissue::Chicken => "chicken",
            Tissue::Pork => "pork",
        },
        match layout {
            Layout::C1 => "c1",
            Layout::C1B => "c1b",
            Layout::C2 => "c2",
        }
    );
    Scenario {
        name,
        antennas,
        medium,
        device: Some(DevicePlacement {
            position: Position::from_cm(device_cm),
            diode: DiodeModel::default(),
            phase_offsets: PerHarmonic::default(),
        }),
        f1: mhz(830.0),
        f2: mhz(870.0),
        tx_f1: "TX1".into(),
        tx_f2: "TX2".into(),
        tx_amplitudes,
        noise_psd_dbfs_hz: NOISE_PSD_DBFS_HZ,
        interference: Vec::new(),
        rng_seed: 1,
    }
}

/// In-air, configuration 1, device at the best measured placement.
pub fn air_c1() -> Scenario {
    scenario(Layout::C1, Tissue::Air, [30.0, 18.0, 11.1])
}

pub fn air_c2() -> Scenario {
    scenario(Layout::C2, Tissue::Air, [25.0, 18.0, 11.1])
}

pub fn chicken_c1() -> Scenario {
    scenario(Layout::C1, Tissue::Chicken, [30.0, 22.0, 11.0])
}

pub fn pork_c1b() -> Scenario {
    scenario(Layout::C1B, Tissue::Pork, [25.0, 10.5, 6.0])
}

pub fn pork_c2() -> Scenario {
    scenario(Layout::C2, Tissue::Pork, [29.0, 15.5, 12.0])
}

/// Position of the optional third receiver, above the midline between the
/// transmitters so the receivers are no longer collinear.
pub const RX3_CM: [f64; 3] = [28.0, 0.0, 40.0];

/// Adds `RX3` at [`RX3_CM`] with the same pattern and gain as `RX1`.
pub fn with_third_receiver(mut s: Scenario) -> Scenario {
    let template = s.receiver("RX1").expect("presets carry RX1").clone();
    s.antennas.push(AntennaSpec {
        id: "RX3".into(),
        position: Position::from_cm(RX3_CM),
        ..template
    });
    s.name.push_str("+rx3");
    s
}

/// Looks a preset up by its `tissue/layout` name, optionally suffixed with
/// `+rx3` for the three-receiver variant.
pub fn by_name(name: &str) -> Option<Scenario> {
    if let Some(base) = name.strip_suffix("+rx3") {
        return by_name(base).map(with_third_receiver);
    }
    let (tissue, layout) = name.split_once('/')?;
    let tissue = match tissue {
        "air" => Tissue::Air,
        "chicken" => Tissue::Chicken,
        "pork" => Tissue::Pork,
        _ => return None,
    };
    let layout = match layout {
        "c1" => Layout::C1,
        "c1b" => Layout::C1B,
        "c2" => Layout::C2,
        _ => return None,
    };
    let device = match (tissue, layout) {
        (Tissue::Air, Layout::C2) => [25.0, 18.0, 11.1],
        (Tissue::Chicken, _) => [30.0, 22.0, 11.0],
        (Tissue::Pork, Layout::C1B) => [25.0, 10.5, 6.0],
        (Tissue::Pork, Layout::C2) => [29.0, 15.5, 12.0],
        _ => [30.0, 18.0, 11.1],
    };
    Some(scenario(layout, tissue, device))
}

pub const PRESET_NAMES: [&str; 9] = [
    "air/c1", "air/c1b", "air/c2", "chicken/c1", "chicken/c1b", "chicken/c2", "pork/c1", "pork/c1b", "pork/c2",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let s = by_name(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
        assert!(by_name("beef/c1").is_none());
        let three = by_name("pork/c1b+rx3").unwrap();
        three.validate().unwrap();
        assert_eq!(three.receivers().count(), 3);
        assert_eq!(three.name, "pork/c1b+rx3");
    }

    #[test]
    fn table_coordinates() {
        let a = antennas(Layout::C1);
        let cm: Vec<[f64; 3]> = a.iter().map(|a| a.position.to_cm()).collect();
        assert_eq!(cm, vec![[-1.5, 0.0, 9.5], [18.0, 0.0, 8.0], [36.0, 0.0, 8.0], [57.5, 0.0, 9.5]]);
    }

    #[test]
    fn pork_attenuates_more_than_chicken() {
        let c = tissue_slab(Tissue::Chicken, [0.0; 3]).unwrap();
        let p = tissue_slab(Tissue::Pork, [0.0; 3]).unwrap();
        assert!(p.atten_db_per_m_at_ref > c.atten_db_per_m_at_ref);
        assert_eq!(p.rel_permittivity, c.rel_permittivity);
    }
}
