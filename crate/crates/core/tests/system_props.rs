mod common;

use common::{random_sigma, random_system};
use cylbill_core::euclid::{sample_spec, SamplingConfig};
use cylbill_core::io;
use cylbill_core::rng::task_rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_and_base_dimensions_add_up(seed in any::<u64>()) {
        let mut rng = task_rng(seed, 0);
        let system = random_system(&mut rng);
        prop_assume!(system.validate().is_valid());
        let d = system.dim();
        for i in 0..system.num_cylinders() {
            let a = system.generator_space(i).unwrap();
            let l = system.base_space(i).unwrap();
            prop_assert_eq!(a.dim() + l.dim(), d);
            prop_assert!(l.dim() >= 2);
            prop_assert!(a.overlap(l) < 1e-10);
        }
    }

    #[test]
    fn system_file_round_trip_keeps_derived_spaces(seed in any::<u64>()) {
        let mut rng = task_rng(seed, 0);
        let system = random_system(&mut rng);
        let text = io::system_to_string(&system).unwrap();
        let back = io::system_from_str(&text).unwrap();
        prop_assert_eq!(back.dim(), system.dim());
        prop_assert_eq!(back.num_cylinders(), system.num_cylinders());
        for i in 0..system.num_cylinders() {
            prop_assert!(back.base_space(i).unwrap().projector_distance(system.base_space(i).unwrap()) < 1e-12);
            prop_assert!(back.generator_space(i).unwrap().projector_distance(system.generator_space(i).unwrap()) < 1e-12);
            prop_assert_eq!(back.radius(i), system.radius(i));
            prop_assert_eq!(back.translation(i), system.translation(i));
        }
        prop_assert_eq!(io::system_to_string(&back).unwrap(), text);
    }

    #[test]
    fn sequence_and_spec_files_round_trip(seed in any::<u64>()) {
        let mut rng = task_rng(seed, 0);
        let system = random_system(&mut rng);
        let sigma = random_sigma(&mut rng, &system, 5);
        let back = io::sigma_from_str(&io::sigma_to_string(&sigma).unwrap(), &system).unwrap();
        prop_assert_eq!(back.labels(), sigma.labels());
        if let Ok(spec) = sample_spec(&system, &sigma, &mut rng, &SamplingConfig::default()) {
            let text = io::spec_to_string(&spec).unwrap();
            let again = io::spec_from_str(&text, &system, &sigma).unwrap();
            prop_assert_eq!(again, spec);
        }
    }
}
