#![allow(dead_code)]

use std::f64::consts::TAU;

use harmloc::backscatter::{DiodeModel, IncidentTones, MixProducts, Tone};
use harmloc::{CaptureMetadata, Frequency, IqCapture};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Brute-force mixer: samples `a2·x² + a3·x³` over one period in which the
/// carriers sit on integer bins 83 and 87, then reads the products off a
/// direct DFT at `2·87 − 83` and `83 + 87`.
pub fn brute_force_mix(d: &DiodeModel, t: &IncidentTones) -> MixProducts {
    const N: usize = 1024;
    const K1: usize = 83;
    const K2: usize = 87;
    let y: Vec<f64> = (0..N)
        .map(|n| {
            let s = n as f64 / N as f64;
            let x = t.f1.amplitude * (TAU * K1 as f64 * s + t.f1.phase).cos()
                + t.f2.amplitude * (TAU * K2 as f64 * s + t.f2.phase).cos();
            d.a2 * x * x + d.a3 * x * x * x
        })
        .collect();
    let bin = |k: usize| -> Tone {
        let acc: Complex64 = y
            .iter()
            .enumerate()
            .map(|(n, v)| Complex64::from_polar(*v, -TAU * ((k * n) % N) as f64 / N as f64))
            .sum();
        let c = acc * (2.0 / N as f64);
        let loss = 10f64.powf(-d.reradiation_loss_db / 20.0);
        Tone {
            amplitude: c.norm() * loss,
            phase: c.arg().rem_euclid(TAU),
        }
    };
    MixProducts {
        low: bin(2 * K2 - K1),
        high: bin(K1 + K2),
    }
}

pub fn random_mix_inputs(r: &mut ChaCha8Rng) -> (DiodeModel, IncidentTones) {
    let d = DiodeModel {
        a2: r.random_range(-1.0..1.0),
        a3: r.random_range(-1.0..1.0),
        reradiation_loss_db: r.random_range(0.0..30.0),
    };
    let t = IncidentTones {
        f1: Tone {
            amplitude: r.random_range(0.01..2.0),
            phase: r.random_range(0.0..TAU),
        },
        f2: Tone {
            amplitude: r.random_range(0.01..2.0),
            phase: r.random_range(0.0..TAU),
        },
    };
    (d, t)
}

/// Absolute angular distance, radians in `[0, π]`.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn capture(samples: Vec<Complex64>, fs: f64) -> IqCapture {
    IqCapture::new(
        Frequency::from_mhz(910.0).unwrap(),
        fs,
        samples,
        CaptureMetadata {
            rx_id: "RX1".into(),
            rx_gain_db: 0.0,
            scenario_hash: "test".into(),
            seed: 0,
            timestamp: None,
        },
    )
    .unwrap()
}

/// `amplitude·e^{j(phase + 2π·k·n/N)}` for `n < N`.
pub fn tone(n: usize, k: f64, amplitude: f64, phase: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(amplitude, phase + TAU * k * i as f64 / n as f64))
        .collect()
}

/// Adds complex white noise of total power `power`.
pub fn add_noise(samples: &mut [Complex64], power: f64, r: &mut ChaCha8Rng) {
    use rand_distr::{Distribution, StandardNormal};
    let sigma = (power / 2.0).sqrt();
    for s in samples {
        let re: f64 = StandardNormal.sample(r);
        let im: f64 = StandardNormal.sample(r);
        *s += Complex64::new(sigma * re, sigma * im);
    }
}

/// Independent check of the library's finite-difference objective gradient
/// in air, where the exact gradient has a closed form: each leg phase
/// `2π·f·|p − a|/c` has gradient `2π·f/c` along the unit vector from `a`.
/// Returns the worst relative error of the finite-difference gradient
/// against the closed form and of the directional secant against `g·u`,
/// over `count` random off-cut points.
pub fn gradient_check(count: usize, seed: u64) -> (f64, f64) {
    use harmloc::localizer::{central_gradient, packed_objective, MeasurementSet, OffsetModel};
    use harmloc::synthesis::device_tone_set;
    use harmloc::{presets, Harmonic, Position};

    const C: f64 = 299_792_458.0;
    let mut r = rng(seed);
    let (mut worst_fd, mut worst_secant) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < count {
        let mut s = presets::with_third_receiver(presets::air_c1());
        let truth = Position::new(r.random_range(0.05..0.65), r.random_range(0.05..0.65), r.random_range(0.0..0.2));
        s.relocate_device(truth).unwrap();
        let ms = MeasurementSet::from_truth(&s, &device_tone_set(&s).unwrap()).unwrap();
        let p = [r.random_range(0.05..0.65), r.random_range(0.05..0.65), r.random_range(0.0..0.2)];
        let pp = Position::new(p[0], p[1], p[2]);

        let ant = |id: &str| s.antenna(id).unwrap().position;
        let (tx1, tx2) = (ant(&s.tx_f1), ant(&s.tx_f2));
        let unit = |from: Position| {
            let d = pp - from;
            d * (1.0 / d.norm())
        };
        let k = |f: harmloc::Frequency| TAU * f.hz() / C;
        let phase = |f: harmloc::Frequency, from: Position| k(f) * pp.distance(from);
        let mut grad = [0.0; 3];
        let mut off_cut = true;
        for e in &ms.entries {
            let h = Harmonic::classify(e.harmonic, s.f1, s.f2).unwrap();
            let rx = ant(&e.rx_id);
            let (model, dmodel) = match h {
                Harmonic::Low => (
                    2.0 * phase(s.f2, tx2) - phase(s.f1, tx1) + phase(e.harmonic, rx),
                    unit(tx2) * (2.0 * k(s.f2)) - unit(tx1) * k(s.f1) + unit(rx) * k(e.harmonic),
                ),
                Harmonic::High => (
                    phase(s.f1, tx1) + phase(s.f2, tx2) + phase(e.harmonic, rx),
                    unit(tx1) * k(s.f1) + unit(tx2) * k(s.f2) + unit(rx) * k(e.harmonic),
                ),
            };
            let res = harmloc::phase::wrap_pi(e.phasor.phase - model);
            if res.abs() > std::f64::consts::PI - 0.05 {
                off_cut = false;
            }
            for (g, d) in grad.iter_mut().zip(dmodel.to_array()) {
                *g += -2.0 * e.weight * res * d;
            }
        }
        if !off_cut {
            continue;
        }
        let f = packed_objective(&ms, OffsetModel::default()).unwrap();
        let mut f = |x: &[f64]| f(x);
        let fd = central_gradient(&mut f, &p, 1e-7).unwrap();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let diff = fd.iter().zip(&grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_fd = worst_fd.max(diff / norm);

        let u = {
            let v = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let n = v.iter().map(|a: &f64| a * a).sum::<f64>().sqrt();
            v.map(|a| a / n)
        };
        let h = 1e-7;
        let plus: Vec<f64> = (0..3).map(|i| p[i] + h * u[i]).collect();
        let minus: Vec<f64> = (0..3).map(|i| p[i] - h * u[i]).collect();
        let secant = (f(&plus) - f(&minus)) / (2.0 * h);
        let dir: f64 = fd.iter().zip(&u).map(|(g, v)| g * v).sum();
        worst_secant = worst_secant.max((secant - dir).abs() / norm);
        done += 1;
    }
    (worst_fd, worst_secant)
}
