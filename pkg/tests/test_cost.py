import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vranrl import cost as C
from vranrl.actions import Action
from vranrl.cost import CostBreakdown, CostParams, RouteArrays

from support import desk_env, line_topology, oracle_cost, plans_for, random_action, random_cost_case

P = CostParams()
NAN = math.nan


def one_bs(split=0, x=2.0, y=1.0, z=0, zeta=0):
    return Action([split], [x], [y], [z], [zeta])


def routes(len_0m, len_ml=NAN, len_lk=NAN, len_mk=NAN, d_ml=0.0, d_lk=0.0, d_mk=0.0):
    f = lambda v: np.array([v], dtype=float)
    return RouteArrays(f(len_0m), f(len_ml), f(len_lk), f(len_mk),
                       f(d_ml if not math.isnan(len_ml) else NAN), f(d_lk if not math.isnan(len_lk) else NAN),
                       f(d_mk if not math.isnan(len_mk) else NAN))


# -- worked examples ------------------------------------------------------------

def test_computing_example():
    assert C.computing_cost(P, np.array([[1.92, 1.28, 0.80]])) == pytest.approx(2.76, abs=1e-12)
    assert C.computing_cost(P, np.zeros((3, 3))) == 0
    u = np.array([[1.0, 2.0, 3.0]])
    assert C.computing_cost(P, np.vstack([u, u])) == 2 * C.computing_cost(P, u)


def test_overprovisioning_example():
    assert C.overprovisioning_cost(P, [2.0], [1.0], [1.28], [0.80]) == pytest.approx(0.92, abs=1e-12)
    assert C.overprovisioning_cost(P, [1.28], [0.8], [1.28], [0.80]) == 0
    assert C.overprovisioning_cost(P, [1.0], [0.8], [1.28], [0.80]) == 0


def test_fs_capacity_example():
    topo = line_topology()  # FS capacities 20, 20; ES 100
    a = Action([0, 0], [12.0, 12.0], [0.0, 0.0], [0, 0], [0, 0])
    fs_x, es_x = C.capacity_excess(a, topo.fs_capacity, topo.es_capacity)
    assert P.kappa_d * fs_x.sum() == 20.0 and es_x.sum() == 0


def test_underprovision_example():
    a = one_bs(x=6.0, y=5.0)
    assert P.kappa_d * C.underprovision_excess(a, np.array([[0.0, 8.0, 4.0]])).sum() == 10.0


def test_declined_zero_when_everything_met():
    topo = line_topology()
    a = one_bs(x=4.0, y=4.0)
    r = routes(2.0, 1.0, 0.5, d_ml=0.1, d_lk=0.1)
    assert C.declined_cost(P, topo, a, np.array([[1.0, 3.0, 3.0]]), r) == 0


def test_delay_excess_uses_present_segments_only():
    r = routes(1.0, 1.0, 1.0, d_ml=0.5, d_lk=0.3)
    assert C.delay_excess(np.array([2]), r)[0] == pytest.approx(0.25)  # S3: max(0.5-0.25, 0.3-0.25)
    assert C.delay_excess(np.array([0]), r)[0] == pytest.approx(0.05)  # S1: only the LLS leg exceeds
    r4 = routes(1.0, len_mk=1.0, d_mk=0.4)
    assert C.delay_excess(np.array([3]), r4)[0] == pytest.approx(0.15)


def test_change_cost_examples():
    prev = one_bs(x=4.0, y=3.0, z=0)
    new = one_bs(x=6.0, y=3.0, z=1)
    inst, reconf = C.change_costs(P, prev, new)
    assert inst == pytest.approx(0.2) and reconf == pytest.approx(0.8)
    assert C.change_costs(P, new, new) == (0.0, 0.0)
    inst, reconf = C.change_costs(P, one_bs(x=6.0), one_bs(x=4.0))
    assert inst == 0 and reconf == pytest.approx(0.2)


def test_routing_examples():
    r = routes(2.0, 1.0, 0.5)
    assert C.routing_cost(P, r, [2], [1.0]) == pytest.approx(8.57, abs=1e-12)
    assert C.routing_cost(P, routes(0.0, 0.0, 0.0), [1], [3.0]) == 0
    assert C.routing_cost(P, routes(1.0, len_mk=1.0), [3], [1.0]) == pytest.approx(158.3, abs=1e-12)


def test_routing_segment_overrides():
    p = CostParams(kappa_h_segment={"fh": 0.0})
    assert C.routing_cost(p, routes(2.0, 1.0, 0.5), [2], [1.0]) == pytest.approx(2 + 1.52)
    with pytest.raises(ValueError):
        CostParams(kappa_h_segment={"xx": 1.0})


def test_evaluate_sums_worked_examples():
    """One BS carrying the computing, overprovisioning, change and routing examples at once."""
    topo = line_topology()
    prev = one_bs(split=2, x=0.0, y=1.0, z=1)
    act = one_bs(split=2, x=2.0, y=1.0, z=0)
    util = np.array([[1.92, 1.28, 0.80]])
    r = routes(2.0, 1.0, 0.5, d_ml=0.0, d_lk=0.0)
    bd = C.evaluate(P, topo, prev, act, util, r, np.array([1.0]))
    assert bd.computing == pytest.approx(2.76)
    assert bd.overprovisioning == pytest.approx(0.92)
    assert bd.declined == 0
    assert bd.instantiation == pytest.approx(0.2)
    assert bd.reconfiguration == pytest.approx(0.1 * (2 + 2))
    assert bd.routing == pytest.approx(8.57)
    assert bd.total_j == pytest.approx(2.76 + 0.92 + 0.2 + 0.4 + 8.57)
    assert bd.reward == -bd.total_j


def test_all_zero_breakdown():
    bd = CostBreakdown()
    assert bd.total_j == 0 and bd.reward == 0


def test_s4_drops_vdu_terms():
    """Under S4 the carried vDU flavor costs nothing and occupies no FS capacity."""
    topo = line_topology()
    a = one_bs(split=3, x=15.0, y=2.0)
    util = np.array([[0.0, 0.0, 2.0]])
    assert C.overprovisioning_cost(P, a.x_effective, a.y, util[:, 1], util[:, 2]) == 0
    fs_x, _ = C.capacity_excess(Action([3, 3], [15.0, 15.0], [0.0, 0.0], [0, 0], [0, 0]),
                                topo.fs_capacity, topo.es_capacity)
    assert fs_x.sum() == 0
    inst, reconf = C.change_costs(P, one_bs(split=0, x=4.0, z=0), one_bs(split=3, x=4.0, z=1))
    assert inst == 0 and reconf == pytest.approx(0.4)


# -- dual-implementation oracle ----------------------------------------------------

def test_cost_oracle_1000_instances():
    for seed in range(1000):
        topo, params, prev, act, util, demands = random_cost_case(seed)
        plans = plans_for(topo, act)
        want = oracle_cost(params, topo, prev, act, util, plans, demands)
        bd = C.evaluate(params, topo, prev, act, util, plans, demands)
        got = bd.as_dict()
        for key, v in want.items():
            assert abs(got[key] - v) <= 1e-9 * max(1.0, abs(v)), (seed, key, got[key], v)
        if not params.penalize_link_overflow:
            fast = C.evaluate(params, topo, prev, act, util, C.RouteArrays.from_routes(plans), demands)
            assert abs(fast.total_j - want["total"]) <= 1e-9 * max(1.0, want["total"])


def test_link_overflow_needs_plans():
    p = CostParams(penalize_link_overflow=True)
    env = desk_env()
    a = env.initial_action(np.random.default_rng(0))
    with pytest.raises(ValueError):
        C.declined_cost(p, env.topo, a, np.ones((2, 3)), env.route_arrays(a), demands=None)


# -- properties --------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.floats(0.01, 100))
def test_reward_non_positive_and_linear_in_fees(seed, c):
    topo, params, prev, act, util, demands = random_cost_case(seed)
    plans = plans_for(topo, act)
    bd = C.evaluate(params, topo, prev, act, util, plans, demands)
    assert bd.reward <= 0
    assert all(v >= 0 for v in bd.as_dict().values())
    scaled = C.evaluate(params.scaled(c), topo, prev, act, util, plans, demands)
    assert scaled.total_j == pytest.approx(c * bd.total_j, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_previous_action_irrelevant_without_change_fees(seed):
    topo, params, prev, act, util, demands = random_cost_case(seed)
    p = CostParams(params.kappa_ru, params.kappa_fs, params.kappa_es, params.kappa_o, params.kappa_d, 0.0, 0.0,
                   params.kappa_h)
    plans = plans_for(topo, act)
    other = random_action(np.random.default_rng(seed + 1), act.n_bs, 16, len(topo.fs_ids), len(topo.es_ids))
    a = C.evaluate(p, topo, prev, act, util, plans, demands)
    b = C.evaluate(p, topo, other, act, util, plans, demands)
    assert a == b


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_per_bs_additivity_of_separable_terms(seed):
    topo, params, prev, act, util, demands = random_cost_case(seed)
    plans = plans_for(topo, act)
    r = C.RouteArrays.from_routes(plans)
    whole = C.routing_cost(params, r, act.split, demands)
    parts = C.routing_cost_per_bs(params, r, act.split, demands)
    assert whole == pytest.approx(parts.sum(), rel=1e-12)
    assert C.computing_cost(params, util) == pytest.approx(sum(C.computing_cost(params, u[None]) for u in util))
