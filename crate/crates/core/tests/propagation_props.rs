use harmloc::propagation::{effective_distance, path_attenuation_db, path_phase, trace_path};
use harmloc::{Aabb, Frequency, MediumStack, Position, TissueSlab};
use proptest::prelude::*;

const C: f64 = 299_792_458.0;

fn slab(material: &str, eps: f64, atten: f64, min: [f64; 3], max: [f64; 3]) -> TissueSlab {
    TissueSlab {
        material: material.into(),
        rel_permittivity: eps,
        atten_db_per_m_at_ref: atten,
        ref_frequency: Frequency::from_mhz(900.0).unwrap(),
        freq_exponent: 1.0,
        extent: Aabb::new(Position::new(min[0], min[1], min[2]), Position::new(max[0], max[1], max[2])).unwrap(),
        attached_to_device: false,
    }
}

fn block() -> MediumStack {
    MediumStack::new(vec![slab("muscle", 54.81, 30.0, [0.2, 0.2, 0.0], [0.4, 0.4, 0.1])]).unwrap()
}

fn pos() -> impl Strategy<Value = Position> {
    (0.0f64..0.7, 0.0f64..0.7, 0.0f64..0.2).prop_map(|(x, y, z)| Position::new(x, y, z))
}

#[test]
fn scalar_oracles() {
    let muscle = MediumStack::new(vec![slab("muscle", 54.81, 0.0, [0.0, -1.0, -1.0], [0.1, 1.0, 1.0])]).unwrap();
    let segs = trace_path(&muscle, Position::new(0.0, 0.0, 0.0), Position::new(0.1, 0.0, 0.0)).unwrap();
    assert!((effective_distance(&segs) - 0.1 * 54.81f64.sqrt()).abs() < 1e-12);

    let layered = MediumStack::new(vec![
        slab("fat", 5.447, 0.0, [0.0, -1.0, -1.0], [0.05, 1.0, 1.0]),
        slab("muscle", 54.81, 0.0, [0.05, -1.0, -1.0], [0.1, 1.0, 1.0]),
    ])
    .unwrap();
    let segs = trace_path(&layered, Position::new(0.0, 0.0, 0.0), Position::new(0.1, 0.0, 0.0)).unwrap();
    assert!((effective_distance(&segs) - 0.4868629248).abs() < 1e-9);

    let f = Frequency::from_mhz(910.0).unwrap();
    assert!((path_phase(f, 0.30) - 5.7216569099).abs() < 1e-9);
}

proptest! {
    #[test]
    fn air_is_geometric(a in pos(), b in pos()) {
        prop_assume!(a.distance(b) > 1e-6);
        let air = MediumStack::air();
        let segs = trace_path(&air, a, b).unwrap();
        prop_assert!((effective_distance(&segs) - a.distance(b)).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_and_bounded(a in pos(), b in pos()) {
        prop_assume!(a.distance(b) > 1e-6);
        let m = block();
        let ab = trace_path(&m, a, b).unwrap();
        let ba = trace_path(&m, b, a).unwrap();
        let (dab, dba) = (effective_distance(&ab), effective_distance(&ba));
        prop_assert!((dab - dba).abs() < 1e-12);
        prop_assert!(dab >= a.distance(b) - 1e-12);
        prop_assert!(dab <= 54.81f64.sqrt() * a.distance(b) + 1e-12);
        prop_assert!((ab.geometric_length() - a.distance(b)).abs() < 1e-12);
    }

    #[test]
    fn additive_along_the_ray(a in pos(), b in pos(), t in 0.05f64..0.95) {
        prop_assume!(a.distance(b) > 1e-3);
        let m = block();
        let mid = a + (b - a) * t;
        let whole = effective_distance(&trace_path(&m, a, b).unwrap());
        let split = effective_distance(&trace_path(&m, a, mid).unwrap())
            + effective_distance(&trace_path(&m, mid, b).unwrap());
        prop_assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn phase_is_wrapped_distance(mhz in 100.0f64..3000.0, d in 0.0f64..5.0) {
        let f = Frequency::from_mhz(mhz).unwrap();
        let p = path_phase(f, d);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&p));
        let turns = f.hz() * d / C;
        let expected = std::f64::consts::TAU * (turns - turns.floor());
        prop_assert!((p - expected).abs() < 1e-9 || (p - expected).abs() > std::f64::consts::TAU - 1e-9);
    }

    #[test]
    fn attenuation_non_negative_and_grows_with_tissue(a in pos(), b in pos()) {
        prop_assume!(a.distance(b) > 1e-6);
        let f = Frequency::from_mhz(910.0).unwrap();
        let tissue = path_attenuation_db(&trace_path(&block(), a, b).unwrap(), f);
        let air = path_attenuation_db(&trace_path(&MediumStack::air(), a, b).unwrap(), f);
        prop_assert!(air >= 0.0);
        prop_assert!(tissue >= air - 1e-12);
    }
}
