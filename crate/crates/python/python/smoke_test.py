"""Smoke test for the pyhetcard bindings. Run after `pip install -e crates/python`."""

import pyhetcard as hc


def main():
    assert abs(hc.zeta(3) - 0.6286) < 5e-3
    assert abs(hc.zeta(8, upper=True) - 0.5174) < 5e-3

    cfg = hc.derive_config(0.03, manufactured=[1_000_000] * 4)
    assert (cfg.ell, cfg.m_prime, cfg.blocks) == (3009, 10, 20)

    counts = [300, 1200, 50, 4000]
    base = hc.run_baseline("TxSRCS", counts, cfg, seed=5)
    for variant in (1, 2):
        r = hc.run_hsrc(variant, counts, cfg, seed=5)
        assert r.estimates == base.estimates
        assert r.total == r.stage1 + r.stage2 + r.stage3 + r.bp + r.overhead

    forced = hc.run_hsrc(1, counts, cfg, seed=5, phase2="TRepBB")
    assert forced.phase2_method == "TRepBB" and forced.phase2_slots == 4 * 3009

    rows = hc.simulate(["HSRC-2", "TxSRCS"], 4, nodes_per_type=100, q=0.15, replicates=20)
    assert [r["scheme"] for r in rows] == ["HSRC-2", "TxSRCS"]
    assert rows[0]["mean_slots"] < rows[1]["mean_slots"]

    k, rr = hc.expected_k_r([1000.0] * 4, 3009)
    assert 140 < k < 160 and 125 < rr < 140

    table = hc.thresholds(3, 4)
    assert [t["T"] for t in table] == [3, 4]
    assert table[0]["zeta1"] <= table[0]["n1_star_analytic"] <= table[0]["zeta2"]

    try:
        hc.derive_config(0.07)
    except ValueError as e:
        assert "epsilon" in str(e)
    else:
        raise AssertionError("unsupported epsilon accepted")

    print("pyhetcard smoke test passed")


if __name__ == "__main__":
    main()
