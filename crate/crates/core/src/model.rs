//! Domain types shared by every stage of the pipeline.
//!
//! Everything in here is SI: meters, hertz, radians, linear amplitudes.
//! Centimeters, megahertz and decibels only appear at file and CLI
//! boundaries (see [`crate::scenario_file`]).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backscatter::DiodeModel;
use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A strictly positive frequency in hertz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Frequency(f64);

impl Frequency {
    pub fn from_hz(hz: f64) -> Result<Self> {
        if hz.is_finite() && hz > 0.0 {
            Ok(Self(hz))
        } else {
            Err(Error::InvalidFrequency(hz))
        }
    }

    pub fn from_mhz(mhz: f64) -> Result<Self> {
        Self::from_hz(mhz * 1e6)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        self.0 / 1e6
    }

    /// Free-space wavelength in meters.
    pub fn wavelength(self) -> f64 {
        SPEED_OF_LIGHT / self.0
    }
}

impl TryFrom<f64> for Frequency {
    type Error = Error;

    fn try_from(hz: f64) -> Result<Self> {
        Self::from_hz(hz)
    }
}

impl From<Frequency> for f64 {
    fn from(f: Frequency) -> f64 {
        f.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.mhz())
    }
}

/// Which intermodulation product a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Harmonic {
    /// `2·f2 − f1`, the third-order product.
    Low,
    /// `f1 + f2`, the second-order product.
    High,
}

impl Harmonic {
    pub const BOTH: [Harmonic; 2] = [Harmonic::Low, Harmonic::High];

    pub fn frequency(self, f1: Frequency, f2: Frequency) -> Result<Frequency> {
        let (low, high) = harmonics_of(f1, f2)?;
        Ok(match self {
            Harmonic::Low => low,
            Harmonic::High => high,
        })
    }

    /// Identifies which product `f` is, to within 1 Hz.
    pub fn classify(f: Frequency, f1: Frequency, f2: Frequency) -> Result<Harmonic> {
        let (low, high) = harmonics_of(f1, f2)?;
        if (f.hz() - low.hz()).abs() <= 1.0 {
            Ok(Harmonic::Low)
        } else if (f.hz() - high.hz()).abs() <= 1.0 {
            Ok(Harmonic::High)
        } else {
            Err(Error::InvalidParams(format!(
                "{f} is neither {low} nor {high}"
            )))
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Harmonic::Low => "low",
            Harmonic::High => "high",
        }
    }
}

/// One value per intermodulation product.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerHarmonic<T> {
    pub low: T,
    pub high: T,
}

impl<T> PerHarmonic<T> {
    pub fn new(low: T, high: T) -> Self {
        Self { low, high }
    }
}

impl<T> Index<Harmonic> for PerHarmonic<T> {
    type Output = T;

    fn index(&self, h: Harmonic) -> &T {
        match h {
            Harmonic::Low => &self.low,
            Harmonic::High => &self.high,
        }
    }
}

impl<T> IndexMut<Harmonic> for PerHarmonic<T> {
    fn index_mut(&mut self, h: Harmonic) -> &mut T {
        match h {
            Harmonic::Low => &mut self.low,
            Harmonic::High => &mut self.high,
        }
    }
}

/// Returns `(2·f2 − f1, f1 + f2)`.
pub fn harmonics_of(f1: Frequency, f2: Frequency) -> Result<(Frequency, Frequency)> {
    if f1 == f2 {
        return Err(Error::EqualCarriers(f1.hz()));
    }
    let low = 2.0 * f2.hz() - f1.hz();
    if low <= 0.0 {
        return Err(Error::NonPositiveHarmonic {
            f1: f1.hz(),
            f2: f2.hz(),
        });
    }
    Ok((Frequency(low), Frequency(f1.hz() + f2.hz())))
}

/// A point (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_cm(cm: [f64; 3]) -> Self {
        Self::new(cm_to_m(cm[0]), cm_to_m(cm[1]), cm_to_m(cm[2]))
    }

    pub fn to_cm(self) -> [f64; 3] {
        [m_to_cm(self.x), m_to_cm(self.y), m_to_cm(self.z)]
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Position) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Position {
    type Output = Position;

    fn add(self, o: Position) -> Position {
        Position::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position {
    type Output = Position;

    fn sub(self, o: Position) -> Position {
        Position::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;

    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Centimeters to meters.
pub fn cm_to_m(cm: f64) -> f64 {
    cm / 100.0
}

/// Meters to centimeters, snapped to a 1e-9 cm grid so that values which
/// entered as centimeters with a few decimals come back bit-identical.
pub fn m_to_cm(m: f64) -> f64 {
    let scaled = m * 100.0 * 1e9;
    if scaled.abs() < 9.0e15 {
        scaled.round() / 1e9
    } else {
        m * 100.0
    }
}

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Position,
    pub max: Position,
}

impl Aabb {
    pub fn new(min: Position, max: Position) -> Result<Self> {
        let ok = min.x < max.x && min.y < max.y && min.z < max.z;
        if !ok || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "box {min:?}..{max:?} must have strictly positive volume"
            )));
        }
        Ok(Self { min, max })
    }

    /// The unbounded box, used for the background medium.
    pub fn everywhere() -> Self {
        let inf = f64::INFINITY;
        Self {
            min: Position::new(-inf, -inf, -inf),
            max: Position::new(inf, inf, inf),
        }
    }

    /// Closed containment test.
    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn extent(&self) -> Position {
        self.max - self.min
    }

    pub fn translated(&self, by: Position) -> Self {
        Self {
            min: self.min + by,
            max: self.max + by,
        }
    }

    /// Strict interior overlap (shared faces do not count).
    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
            && self.min.z < other.max.z
            && other.min.z < self.max.z
    }
}

/// A homogeneous dielectric box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueSlab {
    pub material: String,
    pub rel_permittivity: f64,
    /// Attenuation at `ref_frequency`, dB per meter.
    pub atten_db_per_m_at_ref: f64,
    pub ref_frequency: Frequency,
    /// Attenuation scales as `(f / ref_frequency)^freq_exponent`.
    pub freq_exponent: f64,
    pub extent: Aabb,
    /// Moves together with the device when a sweep relocates it.
    #[serde(default)]
    pub attached_to_device: bool,
}

impl TissueSlab {
    pub fn air() -> Self {
        Self {
            material: "air".into(),
            rel_permittivity: 1.0,
            atten_db_per_m_at_ref: 0.0,
            ref_frequency: Frequency(900e6),
            freq_exponent: 0.0,
            extent: Aabb::everywhere(),
            attached_to_device: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_permittivity >= 1.0 && self.rel_permittivity.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "{}: relative permittivity {} must be >= 1",
                self.material, self.rel_permittivity
            )));
        }
        if !(self.atten_db_per_m_at_ref >= 0.0 && self.atten_db_per_m_at_ref.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "{}: attenuation must be >= 0 dB/m",
                self.material
            )));
        }
        if !(self.freq_exponent >= 0.0 && self.freq_exponent.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "{}: frequency exponent must be >= 0",
                self.material
            )));
        }
        Ok(())
    }

    /// Attenuation coefficient at `f`, dB/m.
    pub fn atten_db_per_m(&self, f: Frequency) -> f64 {
        self.atten_db_per_m_at_ref * (f.hz() / self.ref_frequency.hz()).powf(self.freq_exponent)
    }
}

/// Ordered slabs over an air background. First match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumStack {
    pub slabs: Vec<TissueSlab>,
    pub background: TissueSlab,
}

impl Default for MediumStack {
    fn default() -> Self {
        Self::air()
    }
}

impl MediumStack {
    pub fn air() -> Self {
        Self {
            slabs: Vec::new(),
            background: TissueSlab::air(),
        }
    }

    pub fn new(slabs: Vec<TissueSlab>) -> Result<Self> {
        let m = Self {
            slabs,
            background: TissueSlab::air(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.slabs.iter().enumerate() {
            s.validate()?;
            Aabb::new(s.extent.min, s.extent.max)?;
            for t in &self.slabs[..i] {
                if s.extent.overlaps(&t.extent) {
                    return Err(Error::InvalidScenario(format!(
                        "slabs {} and {} overlap",
                        t.material, s.material
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn material_at(&self, p: Position) -> &TissueSlab {
        self.slabs
            .iter()
            .find(|s| s.extent.contains(p))
            .unwrap_or(&self.background)
    }
}

/// Material at `p`: first slab (in list order) whose box contains it, else air.
pub fn material_at(medium: &MediumStack, p: Position) -> &TissueSlab {
    medium.material_at(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaRole {
    Transmit,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AntennaPattern {
    Omnidirectional,
    Horn {
        /// Unit vector.
        boresight: Position,
        /// Full half-power beamwidth, degrees.
        beamwidth_deg: f64,
    },
}

impl AntennaPattern {
    pub fn horn(boresight: Position, beamwidth_deg: f64) -> Result<Self> {
        let n = boresight.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidScenario("horn boresight must be nonzero".into()));
        }
        if !(beamwidth_deg > 0.0 && beamwidth_deg <= 180.0) {
            return Err(Error::InvalidScenario(format!(
                "beamwidth {beamwidth_deg}° must be in (0, 180]"
            )));
        }
        Ok(Self::Horn {
            boresight: boresight * (1.0 / n),
            beamwidth_deg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaSpec {
    pub id: String,
    pub role: AntennaRole,
    pub position: Position,
    pub pattern: AntennaPattern,
    pub chain_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePlacement {
    pub position: Position,
    pub diode: DiodeModel,
    /// Unknown re-radiation phase of each product, radians.
    pub phase_offsets: PerHarmonic<f64>,
}

/// A fixed-offset interference tone added to captures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceTone {
    /// Receiver the tone appears at; `None` means every receiver.
    pub rx_id: Option<String>,
    pub offset_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub antennas: Vec<AntennaSpec>,
    pub medium: MediumStack,
    pub device: Option<DevicePlacement>,
    pub f1: Frequency,
    pub f2: Frequency,
    /// Transmitter radiating `f1`.
    pub tx_f1: String,
    /// Transmitter radiating `f2`.
    pub tx_f2: String,
    /// Linear full-scale drive per transmitter id; missing ids default to 1.
    pub tx_amplitudes: BTreeMap<String, f64>,
    /// Complex noise density, dBFS/Hz. `-inf` disables noise.
    pub noise_psd_dbfs_hz: f64,
    pub interference: Vec<InterferenceTone>,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        harmonics_of(self.f1, self.f2)?;
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.antennas {
            if !ids.insert(a.id.as_str()) {
                return bad(format!("duplicate antenna id `{}`", a.id));
            }
            if !a.position.is_finite() || !a.chain_gain_db.is_finite() {
                return bad(format!("antenna `{}` has non-finite values", a.id));
            }
            if let AntennaPattern::Horn {
                boresight,
                beamwidth_deg,
            } = a.pattern
            {
                if (boresight.norm() - 1.0).abs() > 1e-9 {
                    return bad(format!("antenna `{}` boresight is not unit length", a.id));
                }
                if !(beamwidth_deg > 0.0 && beamwidth_deg <= 180.0) {
                    return bad(format!("antenna `{}` beamwidth out of range", a.id));
                }
            }
        }
        let n_tx = self.transmitters().count();
        let n_rx = self.receivers().count();
        if n_tx < 2 || n_rx < 1 {
            return bad(format!(
                "need >= 2 transmitters and >= 1 receiver, have {n_tx} and {n_rx}"
            ));
        }
        for id in [&self.tx_f1, &self.tx_f2] {
            match self.antenna(id) {
                Some(a) if a.role == AntennaRole::Transmit => {}
                _ => return bad(format!("carrier transmitter `{id}` is not a transmit antenna")),
            }
        }
        if self.tx_f1 == self.tx_f2 {
            return bad("f1 and f2 must come from different transmitters".into());
        }
        for (id, amp) in &self.tx_amplitudes {
            if !(amp.is_finite() && *amp >= 0.0) {
                return bad(format!("tx amplitude for `{id}` must be finite and >= 0"));
            }
        }
        if self.noise_psd_dbfs_hz.is_nan() || self.noise_psd_dbfs_hz == f64::INFINITY {
            return bad("noise PSD must be finite or -inf".into());
        }
        self.medium.validate()?;
        if let Some(d) = &self.device {
            if !d.position.is_finite() {
                return bad("device position must be finite".into());
            }
            d.diode.validate()?;
        }
        Ok(())
    }

    pub fn antenna(&self, id: &str) -> Option<&AntennaSpec> {
        self.antennas.iter().find(|a| a.id == id)
    }

    pub fn transmitters(&self) -> impl Iterator<Item = &AntennaSpec> {
        self.antennas.iter().filter(|a| a.role == AntennaRole::Transmit)
    }

    pub fn receivers(&self) -> impl Iterator<Item = &AntennaSpec> {
        self.antennas.iter().filter(|a| a.role == AntennaRole::Receive)
    }

    pub fn receiver(&self, id: &str) -> Result<&AntennaSpec> {
        self.receivers()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::UnknownReceiver(id.to_string()))
    }

    pub fn tx_amplitude(&self, id: &str) -> f64 {
        self.tx_amplitudes.get(id).copied().unwrap_or(1.0)
    }

    pub fn harmonics(&self) -> Result<(Frequency, Frequency)> {
        harmonics_of(self.f1, self.f2)
    }

    pub fn device(&self) -> Result<&DevicePlacement> {
        self.device.as_ref().ok_or(Error::MissingDevice)
    }

    /// Moves the device and every slab attached to it.
    pub fn relocate_device(&mut self, to: Position) -> Result<()> {
        let dev = self.device.as_mut().ok_or(Error::MissingDevice)?;
        let shift = to - dev.position;
        dev.position = to;
        for s in self.medium.slabs.iter_mut().filter(|s| s.attached_to_device) {
            s.extent = s.extent.translated(shift);
        }
        Ok(())
    }

    /// Short stable content hash, hex.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMetadata {
    pub rx_id: String,
    pub rx_gain_db: f64,
    pub scenario_hash: String,
    pub seed: u64,
    pub timestamp: Option<String>,
}

/// One receiver's complex baseband recording.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub center_frequency: Frequency,
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
    pub metadata: CaptureMetadata,
}

impl IqCapture {
    pub fn new(
        center_frequency: Frequency,
        sample_rate: f64,
        samples: Vec<Complex64>,
        metadata: CaptureMetadata,
    ) -> Result<Self> {
        let c = Self {
            center_frequency,
            sample_rate,
            samples,
            metadata,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if self.samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::InvalidParams("capture holds non-finite samples".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}
