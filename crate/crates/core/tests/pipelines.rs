use std::collections::HashMap;

use bevinst::assoc::{run_pipeline, AssocConfig, AssocMode};
use bevinst::labelgen::{generate_labels, LabelConfig, LabelSet};
use bevinst::metrics::MetricsReport;
use bevinst::sim::{simulate, Prediction, ScenarioConfig};
use bevinst::{GridSpec, InstanceGrid, Pose2D};

fn labels(seed: u64, agents: usize, horizon: usize, short: bool) -> LabelSet {
    let (cfg, spec) = if short {
        (
            ScenarioConfig::short_range(agents, horizon + 4, seed),
            GridSpec::short_range(Pose2D::identity()),
        )
    } else {
        (
            ScenarioConfig::long_range(agents, horizon + 4, seed),
            GridSpec::long_range(Pose2D::identity()),
        )
    };
    let s = simulate(&cfg).unwrap();
    generate_labels(&s, &spec, 2, horizon, &LabelConfig::default()).unwrap()
}

/// True if one bijection between IDs maps `pred` onto `gt` on every frame.
fn equal_up_to_relabeling(pred: &[InstanceGrid], gt: &[InstanceGrid]) -> bool {
    let mut fwd: HashMap<u32, u32> = HashMap::new();
    let mut back: HashMap<u32, u32> = HashMap::new();
    for (p, g) in pred.iter().zip(gt) {
        for (&a, &b) in p.ids().iter().zip(g.ids()) {
            if (a == 0) != (b == 0) {
                return false;
            }
            if a == 0 {
                continue;
            }
            if *fwd.entry(a).or_insert(b) != b || *back.entry(b).or_insert(a) != a {
                return false;
            }
        }
    }
    true
}

#[test]
fn zero_noise_matches_ground_truth_in_both_modes() {
    for seed in 0..6 {
        for short in [false, true] {
            let l = labels(seed, 10, 6, short);
            let gt: Vec<InstanceGrid> = l.future().iter().map(|f| f.inst.clone()).collect();
            let pred = Prediction::from_labels(&l);
            for mode in [AssocMode::Warp, AssocMode::Hm] {
                let cfg = if short {
                    AssocConfig::short_range(mode)
                } else {
                    AssocConfig::long_range(mode)
                };
                let out = run_pipeline((&pred).into(), &cfg).unwrap();
                assert!(
                    equal_up_to_relabeling(&out.instances, &gt),
                    "seed {seed} short {short} {mode:?}"
                );
                let report = MetricsReport::evaluate(&out.instances, &gt).unwrap();
                assert_eq!((report.iou, report.vpq), (1.0, 1.0));
            }
        }
    }
}

#[test]
fn warp_output_mask_equals_thresholded_segmentation() {
    let l = labels(9, 12, 4, false);
    let noise = bevinst::sim::NoiseConfig {
        flow_sigma: 2.0,
        boundary_flip_prob: 0.2,
        false_positive_rate: 1.0,
        seed: 4,
        ..Default::default()
    };
    let pred = bevinst::sim::perturb(&l, &noise).unwrap();
    let cfg = AssocConfig::long_range(AssocMode::Warp);
    let out = run_pipeline((&pred).into(), &cfg).unwrap();
    for (inst, seg) in out.instances.iter().zip(&pred.seg[1..]) {
        let mask = seg.binarize(cfg.seg_binarize_threshold);
        assert!(inst.ids().iter().zip(&mask).all(|(&id, &m)| (id != 0) == m));
    }
}

#[test]
fn pipelines_are_deterministic() {
    let l = labels(5, 10, 4, false);
    let noise = bevinst::sim::NoiseConfig {
        flow_sigma: 1.0,
        boundary_flip_prob: 0.05,
        seed: 5,
        ..Default::default()
    };
    let pred = bevinst::sim::perturb(&l, &noise).unwrap();
    for mode in [AssocMode::Warp, AssocMode::Hm] {
        let a = run_pipeline((&pred).into(), &AssocConfig::long_range(mode)).unwrap();
        let b = run_pipeline((&pred).into(), &AssocConfig::long_range(mode)).unwrap();
        assert_eq!(a.instances, b.instances);
    }
}
