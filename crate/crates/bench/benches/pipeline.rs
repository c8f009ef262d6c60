use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use harmloc::backscatter::{mix, DiodeModel, IncidentTones, Tone};
use harmloc::dsp::{estimate_tone, welch_psd_with, WelchConfig};
use harmloc::harness::montecarlo::default_search_box;
use harmloc::localizer::{localize, objective, LocalizerParams, MeasurementSet};
use harmloc::synthesis::{device_tone_set, synthesize_capture, CaptureSettings};
use harmloc::{presets, Frequency, PerHarmonic, Position};

fn forward(c: &mut Criterion) {
    let tones = IncidentTones {
        f1: Tone { amplitude: 0.3, phase: 1.0 },
        f2: Tone { amplitude: 0.4, phase: 2.0 },
    };
    let d = DiodeModel::default();
    c.bench_function("mix", |b| b.iter(|| mix(black_box(&d), black_box(&tones))));

    let s = presets::chicken_c1();
    c.bench_function("device_tone_set", |b| b.iter(|| device_tone_set(black_box(&s)).unwrap()));

    let settings = CaptureSettings::default();
    let f = Frequency::from_mhz(910.0).unwrap();
    c.bench_function("synthesize_capture_100ms", |b| {
        b.iter(|| synthesize_capture(black_box(&s), "RX1", f, &settings).unwrap())
    });
}

fn dsp(c: &mut Criterion) {
    let s = presets::chicken_c1();
    let cap = synthesize_capture(&s, "RX1", Frequency::from_mhz(910.0).unwrap(), &CaptureSettings::default()).unwrap();
    let cfg = WelchConfig::default();
    c.bench_function("welch_psd_4096", |b| b.iter(|| welch_psd_with(black_box(&cap), &cfg).unwrap()));
    c.bench_function("estimate_tone", |b| b.iter(|| estimate_tone(black_box(&cap), 100e3).unwrap()));
}

fn localizer(c: &mut Criterion) {
    let s = presets::with_third_receiver(presets::air_c1());
    let ms = MeasurementSet::from_truth(&s, &device_tone_set(&s).unwrap()).unwrap();
    let p = Position::new(0.3, 0.2, 0.1);
    let zero = PerHarmonic::new(0.0, 0.0);
    c.bench_function("objective", |b| b.iter(|| objective(black_box(&ms), p, zero).unwrap()));

    let mut g = c.benchmark_group("localize");
    g.sample_size(10);
    let search = default_search_box();
    let params = LocalizerParams::default();
    g.bench_function("air_three_receivers", |b| b.iter(|| localize(black_box(&ms), &search, &params).unwrap()));
    g.finish();
}

criterion_group!(benches, forward, dsp, localizer);
criterion_main!(benches);
