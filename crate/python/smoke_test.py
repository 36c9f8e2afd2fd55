"""Exercise the sts_py extension end to end on a synthetic scene."""

import json
import sys

import sts_py


def main() -> int:
    kinds = sts_py.synth_kinds()
    assert "agent_overtake_agent" in kinds, kinds

    case = json.loads(sts_py.synth_scene("agent_overtake_agent", 4))
    scene = json.dumps(case["scene"])
    assert sts_py.validate_scene(scene) == []
    assert sts_py.validate_scene("{}") != []

    mined = sts_py.mine_scene(scene)
    instances = [json.loads(line) for line in mined.splitlines()]
    types = {i["type"] for i in instances}
    expected = {label["scenario_type"] for label in case["labels"]}
    assert types == expected, (types, expected)

    kept, report = sts_py.subsample(mined, [scene])
    assert len(kept.splitlines()) == len(instances)
    assert "agent_overtake_agent" in json.loads(report)

    store = sts_py.Store()
    assert store.ingest(mined) == len(instances)
    sid = instances[0]["scenario_id"]
    for reviewer, positive in [("a", True), ("b", True), ("c", False)]:
        store.create_session(reviewer)
        store.submit_review(json.dumps({"scenario_id": sid, "reviewer": reviewer, "positive": positive, "elapsed_ms": 14500}))
    outcome = json.loads(store.merge(3))
    assert [v["scenario_id"] for v in outcome["verified"]] == [sid]
    assert json.loads(store.stats())["seconds_per_sample"] == 14.5
    try:
        store.submit_review(json.dumps({"scenario_id": "missing", "reviewer": "a", "positive": True}))
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scenario accepted")

    bench = sts_py.generate_benchmark(mined, [scene], options=5, seed=7)
    assert bench == sts_py.generate_benchmark(mined, [scene], options=5, seed=7)
    doc = json.loads(bench)
    prompt = sts_py.render_prompt(json.dumps(doc["questions"][0]), "llm_trajectory")
    assert prompt.rstrip().endswith("and nothing else.")

    report = json.loads(sts_py.score(bench, sts_py.ground_truth_answers(bench)))
    assert report["overall"] == 1.0
    assert sts_py.parse_letter("The answer is (C).", 5) == "C"

    print(f"ok: {len(instances)} instances, {len(doc['questions'])} questions")
    return 0


if __name__ == "__main__":
    sys.exit(main())
