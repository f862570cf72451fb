use exact_core::mask::Matcher;
use exact_core::registry::CHANNEL_COUNT;
use exact_core::sampler::CountRange;
use exact_core::*;
use proptest::prelude::*;

fn sampled(seed: u64) -> MotionProgram {
    sample_program(&SamplerConfig::default().with_seed(seed)).unwrap()
}

fn small(seed: u64, joints: JointSet) -> MotionProgram {
    let config = SamplerConfig {
        seed,
        motions: CountRange::new(1, 4),
        sensors: CountRange::new(1, 3),
        horizon: Horizon::new(64).unwrap(),
        target_decimals: 1,
        joints,
    };
    sample_program(&config).unwrap()
}

#[test]
fn channel_index_is_a_bijection() {
    let mut seen = [false; CHANNEL_COUNT];
    for joint in Joint::ALL {
        for axis in Axis::ALL {
            let channel = JointAxisChannel::new(joint, axis);
            let i = channel_index(channel);
            assert!(!seen[i]);
            seen[i] = true;
            assert_eq!(JointAxisChannel::from_index(i), Some(channel));
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(JointAxisChannel::from_index(CHANNEL_COUNT), None);
}

#[test]
fn surface_names_resolve_to_their_joint() {
    for joint in Joint::ALL {
        assert_eq!(resolve_joint(joint.surface_name()).unwrap(), joint);
        assert_eq!(resolve_joint(joint.name()).unwrap(), joint);
    }
    assert_eq!(resolve_joint("LArm").unwrap(), Joint::LShoulder);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let p = sampled(seed);
        let text = print(&p);
        prop_assert_eq!(parse(&text, Horizon::DEFAULT).unwrap(), p.canonicalize());
        prop_assert_eq!(print(&parse(&text, Horizon::DEFAULT).unwrap()), text);
    }

    #[test]
    fn canonicalize_is_idempotent(seed in any::<u64>(), rot in 0usize..4) {
        let mut p = sampled(seed);
        let k = rot % p.motions.len();
        p.motions.rotate_left(k);
        let c = p.canonicalize();
        prop_assert!(c.is_canonical());
        prop_assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn every_prefix_of_a_program_is_live(seed in any::<u64>()) {
        let text = print(&sampled(seed));
        let matcher = Matcher::new(Language::new(Horizon::DEFAULT));
        let mut state = matcher.start();
        for c in text.chars() {
            state = matcher.advance(&state, c).map_err(|r| TestCaseError::fail(format!("{text}: {r:?}")))?;
        }
        prop_assert!(state.is_accepting());
    }

    #[test]
    fn edit_distance_ignores_order_and_timing(seed in any::<u64>(), shift in 1u32..32) {
        let costs = EditCostConfig::default();
        let p = small(seed, JointSet::all());
        let mut q = p.clone();
        q.motions.reverse();
        for m in &mut q.motions {
            m.t_start = m.t_start.saturating_sub(shift);
        }
        prop_assert_eq!(edit_distance(&to_tree(&p), &to_tree(&q), &costs), 0.0);
    }

    #[test]
    fn edit_distance_is_a_pseudometric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let costs = EditCostConfig::default();
        let joints = JointSet::of(&[Joint::LShoulder, Joint::RShoulder, Joint::LElbow]);
        let [a, b, c] = [a, b, c].map(|s| to_tree(&small(s, joints)));
        let ab = edit_distance(&a, &b, &costs);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - edit_distance(&b, &a, &costs)).abs() < 1e-9);
        prop_assert!(edit_distance(&a, &c, &costs) <= ab + edit_distance(&b, &c, &costs) + 1e-9);
    }

    #[test]
    fn auroc_complements(pos in prop::collection::vec(-1.0f64..1.0, 1..20), neg in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let ab = auroc(&pos, &neg).unwrap();
        let ba = auroc(&neg, &pos).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab + ba - 1.0).abs() < 1e-12);
        prop_assert_eq!(auroc(&pos, &pos).unwrap(), 0.5);
    }

    #[test]
    fn selection_respects_cap(seeds in prop::collection::vec(any::<u64>(), 1..40), cap in 1usize..30) {
        let candidates: Vec<_> = seeds.iter().map(|&s| sampled(s)).collect();
        let chosen = select_diverse(&candidates, cap).unwrap();
        prop_assert_eq!(chosen.len(), cap.min(candidates.len()));
        prop_assert!(chosen.iter().all(|p| candidates.contains(p)));
    }

    #[test]
    fn merge_keeps_every_motion(a in any::<u64>(), b in any::<u64>()) {
        let config = SamplerConfig { horizon: Horizon::new(200).unwrap(), ..SamplerConfig::default() };
        let p = sample_program(&config.with_seed(a)).unwrap();
        let q = sample_program(&config.with_seed(b)).unwrap();
        let merged = merge_sequential(&p, &q, Horizon::new(400).unwrap()).unwrap();
        prop_assert_eq!(merged.len(), p.len() + q.len());
        prop_assert!(merged.is_canonical());
    }
}

#[test]
fn empty_buffer_is_rejected() {
    let p = parse("[0,100]LArm.x(0.3)", Horizon::DEFAULT).unwrap();
    let provider = MockProvider::default();
    assert!(compile_motion(&p.motions[0], &[], &provider, SensorSemantics::AsWritten).is_err());
}

#[test]
fn state_samples_must_match_the_registry() {
    assert!(StateSample::from_pos(vec![0.0; CHANNEL_COUNT]).is_ok());
    assert!(StateSample::from_pos(vec![0.0; CHANNEL_COUNT - 1]).is_err());
    assert!(StateSample::from_pos(vec![f64::NAN; CHANNEL_COUNT]).is_err());
}
