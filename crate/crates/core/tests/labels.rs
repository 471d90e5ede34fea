use bevinst::labelgen::{
    compute_backward_centripetal_flow, generate_labels, LabelConfig, LabelSet,
};
use bevinst::sim::{simulate, ScenarioConfig};
use bevinst::{GridSpec, Pose2D};
use proptest::prelude::*;

fn labels(seed: u64, agents: usize, cfg: &LabelConfig) -> LabelSet {
    let s = simulate(&ScenarioConfig::long_range(agents, 8, seed)).unwrap();
    generate_labels(&s, &GridSpec::long_range(Pose2D::identity()), 2, 4, cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seg_is_foreground_and_flows_vanish_on_background(seed in any::<u64>()) {
        let l = labels(seed, 10, &LabelConfig::default());
        for f in &l.frames {
            for (i, &id) in f.inst.ids().iter().enumerate() {
                let (r, c) = (i / 200, i % 200);
                prop_assert_eq!(f.seg.values()[i], if id != 0 { 1.0 } else { 0.0 });
                if id == 0 {
                    prop_assert_eq!(f.back_flow.get(r, c), (0.0, 0.0));
                    prop_assert_eq!(f.fwd_flow.get(r, c), (0.0, 0.0));
                    prop_assert_eq!(f.offset.get(r, c), (0.0, 0.0));
                    prop_assert_eq!(f.centerness.get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn backward_flow_lands_on_previous_centroid(seed in any::<u64>()) {
        let l = labels(seed, 10, &LabelConfig { flow_threshold: 0.0, ..LabelConfig::default() });
        for pair in l.frames.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let raw = compute_backward_centripetal_flow(&cur.inst, &prev.inst);
            for (i, &id) in cur.inst.ids().iter().enumerate() {
                let Some(c) = prev.centers.get(id) else { continue };
                let (r, col) = (i / 200, i % 200);
                let (dy, dx) = raw.get(r, col);
                let d = ((r as f64 + dy as f64 - c.row).powi(2) + (col as f64 + dx as f64 - c.col).powi(2)).sqrt();
                prop_assert!(d <= 0.5, "distance {}", d);
                prop_assert_eq!(raw.get(r, col), cur.back_flow.get(r, col));
            }
        }
    }

    #[test]
    fn backward_flow_is_offset_plus_instance_constant(seed in any::<u64>()) {
        let l = labels(seed, 10, &LabelConfig { flow_threshold: 0.0, ..LabelConfig::default() });
        for f in &l.frames {
            let mut shift: std::collections::HashMap<u32, (f32, f32)> = Default::default();
            for (i, &id) in f.inst.ids().iter().enumerate() {
                if id == 0 { continue; }
                let (r, c) = (i / 200, i % 200);
                let (by, bx) = f.back_flow.get(r, c);
                let (oy, ox) = f.offset.get(r, c);
                let d = (by - oy, bx - ox);
                let s = *shift.entry(id).or_insert(d);
                prop_assert!((s.0 - d.0).abs() < 1e-4 && (s.1 - d.1).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn ego_translation_by_whole_cells_shifts_footprints(seed in any::<u64>(), dr in -6i64..=6, dc in -6i64..=6) {
        let s = simulate(&ScenarioConfig::long_range(10, 8, seed)).unwrap();
        let spec = GridSpec::long_range(Pose2D::identity());
        let base = generate_labels(&s, &spec, 2, 4, &LabelConfig::default()).unwrap();
        let mut moved = s.clone();
        // Moving the ego forward (left) by one cell moves the scene one row (column) down (right).
        let ego = moved.frames[2].ego;
        prop_assert_eq!(ego.yaw, 0.0);
        moved.frames[2].ego = Pose2D::new(ego.x + dr as f64 * 0.5, ego.y + dc as f64 * 0.5, ego.yaw);
        let shifted = generate_labels(&moved, &spec, 2, 4, &LabelConfig::default()).unwrap();
        for (a, b) in base.frames.iter().zip(&shifted.frames) {
            for r in 0..200i64 {
                for c in 0..200i64 {
                    let (sr, sc) = (r + dr, c + dc);
                    if (0..200).contains(&sr) && (0..200).contains(&sc) {
                        prop_assert_eq!(a.inst.get(r as usize, c as usize), b.inst.get(sr as usize, sc as usize));
                    }
                }
            }
        }
    }
}
