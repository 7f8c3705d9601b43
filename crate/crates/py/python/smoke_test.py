"""Smoke test for the hybrid_ei extension module.

Build and install first, e.g. ``maturin develop`` or
``pip install .`` from crates/py, then run ``python python/smoke_test.py``.
"""

import math

import hybrid_ei


def main():
    report = hybrid_ei.certify(-0.1, -0.2, 16.0, 0.36, 3.0, 0.666, -0.293)
    q1, q2 = report["roots"]
    assert abs(q1 - 1.6792) / 1.6792 < 0.005, q1
    assert abs(q2 - 161.62) / 161.62 < 0.005, q2
    assert report["condition_iii"]["passes"]

    bound = hybrid_ei.dwell_bound(-0.1, -0.2)
    assert abs(bound["h_max"] - 10 / (3 * math.e)) < 1e-4, bound

    config = hybrid_ei.parse_config("mode = hybrid\nhorizon = 40")
    sim = hybrid_ei.simulate(config)
    assert sim.mode == "hybrid"
    assert len(sim.times) == len(sim.states) == len(sim.inputs)
    assert all(e["gap"] >= 0.666 - 1e-9 for e in sim.events())
    assert sim.decay_fit()["rate"] > 0

    table = hybrid_ei.compare(config)
    rows = {row["mode"]: row for row in table["rows"]}
    assert rows["hybrid"]["total_updates"] < rows["impulsive_only"]["impulses"] == 60

    config.set("zeno_guard", "500")
    config.set("horizon", "10")
    config.set("mode", "event_only")
    zeno = hybrid_ei.simulate(config)
    assert zeno.termination()["reason"] == "zeno_guard"
    assert zeno.zeno_report()["verdict"] == "zeno_suspected"

    oracle = hybrid_ei.zeno_recursion_oracle(1.0, -0.1, -0.2, 0.36, 16.0, 10.0)
    assert abs(oracle["events"][0]["gap"] - 1.25) < 1e-12

    try:
        hybrid_ei.parse_config("dt = -0.1")
    except ValueError as err:
        assert "dt" in str(err)
    else:
        raise AssertionError("negative dt accepted")

    print("smoke test passed:", sim, f"q1={q1:.4f} q2={q2:.2f}")


if __name__ == "__main__":
    main()
