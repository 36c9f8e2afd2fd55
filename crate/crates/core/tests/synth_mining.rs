use std::collections::BTreeSet;

use sts_core::synth::{synth_suite, Label};
use sts_core::{default_catalog, mine_scene, MinerConfig};

fn mined_labels(case: &sts_core::synth::SynthCase) -> BTreeSet<Label> {
    mine_scene(&case.scene, &default_catalog(), &MinerConfig::default())
        .into_iter()
        .map(|i| Label {
            scenario_type: i.scenario_type,
            agents: i.agent_ids,
            frame_start: i.frame_start,
            frame_end: i.frame_end,
        })
        .collect()
}

#[test]
fn every_synth_scene_mines_exactly_its_labels() {
    let mut bad = Vec::new();
    for seed in [0u64, 1, 2] {
        for case in synth_suite(seed) {
            let got = mined_labels(&case);
            let want: BTreeSet<Label> = case.labels.iter().cloned().collect();
            if got != want {
                bad.push(format!(
                    "seed {seed} {}: missing {:?} extra {:?}",
                    case.kind,
                    want.difference(&got).collect::<Vec<_>>(),
                    got.difference(&want).collect::<Vec<_>>()
                ));
            }
            for near in &case.near_misses {
                assert!(!got.contains(near), "{} emitted near miss {near:?}", case.kind);
            }
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
