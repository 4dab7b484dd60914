mod common;

use gpm_core::instance::{validate_instance, Instance};
use gpm_core::synth::{generate, SynthConfig};
use proptest::prelude::*;

#[test]
fn synthetic_instance_round_trips_byte_for_byte() {
    for seed in 0..5 {
        let (inst, _) = generate(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let text = inst.to_json().unwrap();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn save_and_load() {
    let dir = std::env::temp_dir().join(format!("gpm-serial-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("inst.json");
    let (inst, _) = generate(&SynthConfig::default()).unwrap();
    inst.save(&path).unwrap();
    assert_eq!(Instance::load(&path).unwrap(), inst);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_top_level_json_is_rejected() {
    assert!(Instance::from_json("{\"labels\": 3}").is_err());
    assert!(Instance::from_json("not json").is_err());
}

proptest! {
    #[test]
    fn random_instances_round_trip(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 12, 5);
        prop_assert!(validate_instance(&inst).is_valid(), "{}", validate_instance(&inst));
        let text = inst.to_json().unwrap();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}
