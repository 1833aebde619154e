"""Smoke test for the ising_lab extension module.

Build first:
    cargo build --release -p ising-lab-py --features extension-module
    cp target/release/libising_lab.so python/ising_lab.so
"""
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import ising_lab as il


def main():
    p = il.ModelParams(3, 1.0, 0.05)
    assert abs(p.beta_c - 0.5 * math.log(3.0)) < 1e-12

    # the tree and annealed critical fields coincide
    bc = il.annealed_bc(p)
    assert abs(bc - il.tree_critical_field(p)) < 1e-6

    cp = il.critical_points(p)
    t3 = cp["criticals"][0][0]
    m = il.root_magnetization(30, "minus", p)
    assert abs(m - (2 * t3 - 1)) < 1e-6

    chain = il.BirthDeathChain.annealed(60, p)
    gap = chain.gap()
    bounds = chain.chen_bounds()
    assert bounds["lower"] <= gap <= bounds["upper"]
    assert abs(sum(chain.stationary()) - 1.0) < 1e-12

    hot = il.BirthDeathChain.annealed(64, il.ModelParams(3, 0.3))
    curve = hot.tv(2000)
    assert curve["t_mix_quarter"] is not None
    assert all(a >= b - 1e-12 for a, b in zip(curve["dist"], curve["dist"][1:]))

    g = il.RegularGraph.configuration_model(10, 3, 7)
    assert len(g.edges()) == 15
    logz = il.fixed_spin_partition(g, 0.5)
    assert len(logz) == 11 and abs(logz[3] - logz[7]) < 1e-12

    obs = il.hitting_time_sim(g, il.ModelParams(3, 0.3), steps=100000, replicas=3, seed=1)
    assert len(obs) == 3 and not any(c for _, c in obs)

    verdicts = il.run_acceptance(["A1", "A9"])
    assert all(ok for _, ok, _ in verdicts), verdicts
    failed = il.run_acceptance(["A1"], bc_perturbation=1e-2)
    assert not failed[0][1]

    print("ising_lab", il.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
