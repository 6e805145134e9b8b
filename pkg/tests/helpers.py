"""Shared assertions for the test suite."""

from __future__ import annotations

import math

import numpy as np

from fmab.regret import exact_model_total, recount_comm, recount_explore


def assert_ledger_consistent(res) -> None:
    """Dual-entry check: ledger totals against independent recounts.

    Exploration is recounted from per-arm client-pull counts and the global
    gaps; communication from the recorded spans; for fixed populations the
    exact-model total ``explore + C M T_c`` must agree as well.
    """
    led = res.ledger
    assert math.isclose(recount_explore(led.gaps, res.pull_counts), led.explore_total, rel_tol=1e-12, abs_tol=1e-9)
    assert math.isclose(recount_comm(led.cost, led.comm_spans), led.comm_total, rel_tol=1e-12, abs_tol=1e-9)
    assert math.isclose(led.explore_total + led.comm_total, led.total, rel_tol=1e-12)
    ex, co, tot = led.cumulative()
    assert np.all(np.diff(ex) >= 0) and np.all(np.diff(co) >= 0)
    np.testing.assert_allclose(tot, ex + co, rtol=1e-12)
    ns = {s.n_clients for s in led.comm_spans}
    if len(ns) <= 1:
        exact_model_total(led, ns.pop() if ns else res.n_clients)
