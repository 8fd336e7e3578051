from types import SimpleNamespace

import numpy as np
import pytest

from compactpf import grid_model
from compactpf.ac_solver import (DispatchSpec, GenSetting, InfeasibleError,
                                 newton_power_flow, slp_acopf,
                                 make_dispatch_spec, check_schedule_logic,
                                 startup_cost_of, commitment_cost,
                                 production_cost, mtp_acopf_check)
from compactpf.case_ingest import UCGen
from compactpf.errors import ValidationError


def _two_bus_spec(p_set=0.6):
    gens = [GenSetting(bus=0, on=True, pmin=0.0, cap_a=1.5, cap_b=1.5,
                       q_lo=-1.0, q_hi=1.0, cost_segments=((1.5, 10.0),))]
    return DispatchSpec(gens=gens, condensers=[],
                        pd=np.array([0.0, 0.5]), qd=np.array([0.0, 0.1]),
                        p_set=np.array([p_set]), v_set=np.array([1.0]))


def test_newton_two_bus(net2):
    spec = _two_bus_spec()
    op = newton_power_flow(net2, spec, np.ones(2), np.zeros(2))
    # load bus balance holds exactly at the solution
    assert op.p_inj[1] == pytest.approx(-0.5, abs=1e-8)
    assert op.q_inj[1] == pytest.approx(-0.1, abs=1e-8)
    assert op.v[0] == pytest.approx(1.0)  # slack magnitude held
    assert op.theta[0] == 0.0
    # lossless line: slack picks up the full load
    assert op.p_inj[0] == pytest.approx(0.5, abs=1e-8)


def test_newton_requires_p_set(net2):
    spec = _two_bus_spec()
    spec.p_set = None
    with pytest.raises(ValidationError):
        newton_power_flow(net2, spec, np.ones(2), np.zeros(2))


def test_slp_acopf_hour1(net14, inst24):
    spec = make_dispatch_spec(net14, inst24, 0)
    op, dispatch = slp_acopf(net14, spec, objective="min-cost")
    # solution respects box and thermal limits
    assert np.all(op.v <= net14.vmax + 1e-7)
    assert np.all(op.v >= net14.vmin - 1e-7)
    assert np.all(op.s_ft <= net14.smax + 1e-6)
    assert np.all(op.s_tf <= net14.smax + 1e-6)
    # nonlinear balance: injections equal generation minus load
    p_bus = -inst24.pd[:, 0].copy()
    q_bus = -inst24.qd[:, 0].copy()
    for gs, pdel, q in zip(spec.gens, dispatch["p_delta"], dispatch["q"]):
        p_bus[gs.bus] += gs.pmin + pdel
        q_bus[gs.bus] += q
    for (bus, _, _), q in zip(spec.condensers, dispatch["q_sc"]):
        q_bus[bus] += q
    assert np.max(np.abs(op.p_inj - p_bus)) < 1e-6
    assert np.max(np.abs(op.q_inj - q_bus)) < 1e-6
    # production covers load plus (nonnegative) losses
    total_gen = sum(gs.pmin + d for gs, d in zip(spec.gens,
                                                 dispatch["p_delta"]))
    assert total_gen >= inst24.pd[:, 0].sum() - 1e-6
    assert dispatch["cost"] > 0


def test_slp_reserve_honored(net14, inst24):
    spec = make_dispatch_spec(net14, inst24, 0)
    spec.reserve = 0.3
    _, dispatch = slp_acopf(net14, spec)
    assert np.sum(dispatch["r"]) >= 0.3 - 1e-6
    for gs, d, r in zip(spec.gens, dispatch["p_delta"], dispatch["r"]):
        assert d + r <= gs.cap_a + 1e-8


def test_slp_infeasible_when_all_units_off(net14, inst24):
    spec = make_dispatch_spec(net14, inst24, 0,
                              off=tuple(range(inst24.ngen)))
    with pytest.raises(InfeasibleError):
        slp_acopf(net14, spec)


def test_slp_rejects_bad_objective(net14, inst24):
    spec = make_dispatch_spec(net14, inst24, 0)
    with pytest.raises(ValidationError):
        slp_acopf(net14, spec, objective="maximize-profit")


def _all_on_schedule(inst):
    G, T = inst.ngen, inst.horizon
    y = np.ones((G, T), dtype=int)
    u = np.zeros((G, T), dtype=int)
    w = np.zeros((G, T), dtype=int)
    for gi, g in enumerate(inst.gens):
        if not g.init_on:
            u[gi, 0] = 1
    return y, u, w


def test_schedule_logic_valid(inst4):
    y, u, w = _all_on_schedule(inst4)
    assert check_schedule_logic(inst4, y, u, w) == []


def test_schedule_logic_catches_transition(inst4):
    y, u, w = _all_on_schedule(inst4)
    y[0, 2] = 0  # off for one hour without a shutdown event
    problems = check_schedule_logic(inst4, y, u, w)
    assert any("y transition" in p for p in problems)


def test_schedule_logic_catches_min_uptime():
    g = _tiered_gen(tu=3, td=1, init_status=-3)
    inst = SimpleNamespace(gens=(g,), horizon=4)
    # start at t=1 then shut down inside the 3-hour min-up window
    y = np.array([[1, 0, 0, 0]])
    u = np.array([[1, 0, 0, 0]])
    w = np.array([[0, 1, 0, 0]])
    problems = check_schedule_logic(inst, y, u, w)
    assert any("min-uptime" in p for p in problems)


def test_schedule_logic_catches_min_downtime():
    g = _tiered_gen(tu=1, td=3, init_status=2, p_init=0.3)
    inst = SimpleNamespace(gens=(g,), horizon=4)
    # shut down at t=1 then restart after only one hour down
    y = np.array([[0, 1, 1, 1]])
    u = np.array([[0, 1, 0, 0]])
    w = np.array([[1, 0, 0, 0]])
    problems = check_schedule_logic(inst, y, u, w)
    assert any("min-downtime" in p for p in problems)


def _tiered_gen(**kw):
    base = dict(name="g", bus=1, pmin=0.1, pmax=0.5, qmin=-0.3, qmax=0.3,
                su=0.5, sd=0.5, ru=0.5, rd=0.5, tu=1, td=1,
                p_init=0.0, init_status=-3,
                cost_segments=((0.4, 20.0),), no_load_cost=5.0,
                startup_tiers=((0, 10.0), (2, 25.0), (5, 60.0)))
    base.update(kw)
    return UCGen(**base)


def test_startup_cost_tiers():
    g = _tiered_gen()
    w_hist = {0: 1}  # shut down one hour before the start

    def w1(t):
        return w_hist.get(t, 0)

    assert startup_cost_of(g, 1, w1) == pytest.approx(10.0)  # 1h down
    w_hist = {-1: 1}
    assert startup_cost_of(g, 1, w1) == pytest.approx(25.0)  # 2h down
    w_hist = {-2: 1}
    # pre-horizon shutdown at t = 1 + init_status: 3 hours down at t=1
    assert startup_cost_of(g, 1, w1) == pytest.approx(25.0)
    assert startup_cost_of(g, 3, w1) == pytest.approx(60.0)  # 5h down
    w_hist = {}
    # no shutdown ever observed: coldest tier
    assert startup_cost_of(g, 1, w1) == pytest.approx(60.0)


def test_commitment_cost():
    g = _tiered_gen()
    inst = SimpleNamespace(gens=(g,), horizon=3)
    y = [[0, 1, 1]]
    u = [[0, 1, 0]]
    w = [[0, 0, 0]]
    # unit down 3 (init) + 1 hours when started at t=2 -> 25.0 tier
    assert commitment_cost(inst, y, u, w) == pytest.approx(2 * 5.0 + 25.0)


def test_production_cost_segments():
    g = _tiered_gen(cost_segments=((0.2, 10.0), (0.2, 30.0)))
    inst = SimpleNamespace(gens=(g,), horizon=1)
    # 0.3 above Pmin: fills the cheap segment then 0.1 of the steep one
    pd = np.array([[0.3]])
    assert production_cost(inst, pd) == pytest.approx(0.2 * 10 + 0.1 * 30)


def test_mtp_check_rejects_bad_logic(net14, inst4):
    y, u, w = _all_on_schedule(inst4)
    y[0, 1] = 0
    sched = SimpleNamespace(y=y, u=u, w=w)
    with pytest.raises(ValidationError):
        mtp_acopf_check(net14, inst4, sched)


def test_mtp_check_all_on_feasible(net14, inst4):
    y, u, w = _all_on_schedule(inst4)
    report = mtp_acopf_check(net14, inst4, SimpleNamespace(y=y, u=u, w=w))
    assert report.verdict == "feasible"
    assert report.max_violation < 1e-6
    assert np.isfinite(report.objective)
    assert len(report.points) == inst4.horizon
    # ramp coupling holds across consecutive periods
    for gi, g in enumerate(inst4.gens):
        for t in range(1, inst4.horizon):
            step = report.p_delta[gi, t] - report.p_delta[gi, t - 1]
            assert step <= g.ru + 1e-6
            assert -step <= g.rd + 1e-6
