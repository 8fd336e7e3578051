import math

import numpy as np
import pytest

from compactpf.case_ingest import (parse_matpower, validate_case,
                                   derate_thermal_limits, write_matpower,
                                   load_uc_instance)
from compactpf.errors import ParseError, ValidationError

from conftest import TWO_BUS_CASE


def test_two_bus_per_unit(case2):
    assert case2.n == 2
    assert case2.m == 1
    # rateA 100 MVA on baseMVA 100 -> 1.0 p.u.
    assert case2.branches[0].rate_a == pytest.approx(1.0)
    assert case2.buses[1].pd == pytest.approx(0.5)
    assert case2.buses[1].qd == pytest.approx(0.1)
    assert case2.ref_bus == 1


def test_case14_counts(case14_raw):
    assert case14_raw.n == 14
    assert case14_raw.m == 20
    assert len(case14_raw.gens) == 5


def test_missing_ref_bus_rejected():
    text = TWO_BUS_CASE.replace("1 3 0  0", "1 1 0  0")
    with pytest.raises(ValidationError):
        validate_case(parse_matpower(text))


def test_malformed_row_reports_line():
    text = TWO_BUS_CASE.replace("1 2 0 0.1", "1 2 zero 0.1")
    with pytest.raises(ParseError) as err:
        parse_matpower(text)
    assert err.value.line is not None


def test_nonpositive_base_mva():
    text = TWO_BUS_CASE.replace("mpc.baseMVA = 100", "mpc.baseMVA = 0")
    with pytest.raises(ValidationError):
        validate_case(parse_matpower(text))


def test_derate():
    case = parse_matpower(TWO_BUS_CASE)
    d = derate_thermal_limits(case, 0.30)
    assert d.branches[0].rate_a == pytest.approx(0.70)
    same = derate_thermal_limits(case, 0.0)
    assert same.branches[0].rate_a == case.branches[0].rate_a
    with pytest.raises(ValidationError):
        derate_thermal_limits(case, 1.0)


def test_write_parse_round_trip(case14_raw):
    text = write_matpower(case14_raw)
    again = parse_matpower(text)
    assert again.base_mva == case14_raw.base_mva
    assert again.n == case14_raw.n and again.m == case14_raw.m
    for a, b in zip(again.buses, case14_raw.buses):
        assert (a.id, a.btype) == (b.id, b.btype)
        for fld in ("pd", "qd", "gs", "bs", "vmin", "vmax"):
            assert getattr(a, fld) == pytest.approx(getattr(b, fld), abs=1e-14)
    for a, b in zip(again.branches, case14_raw.branches):
        assert (a.f, a.t) == (b.f, b.t)
        for fld in ("r", "x", "b", "ratio", "shift", "rate_a",
                    "ang_min", "ang_max"):
            assert getattr(a, fld) == pytest.approx(getattr(b, fld), abs=1e-12)
    for a, b in zip(again.gens, case14_raw.gens):
        assert a.bus == b.bus
        for fld in ("pmin", "pmax", "qmin", "qmax", "vg", "c2", "c1", "c0"):
            assert getattr(a, fld) == pytest.approx(getattr(b, fld),
                                                    rel=1e-12, abs=1e-12)


def test_uc_instance_shape(inst24, net14):
    assert inst24.horizon == 24
    # four committable units plus one condenser at the zero-span unit
    assert inst24.ngen == 4
    assert len(inst24.condensers) == 1
    assert inst24.pd.shape == (net14.n, 24)
    assert inst24.qd.shape == (net14.n, 24)


def test_constant_power_factor(inst24, case14):
    pd0 = np.array([b.pd for b in case14.buses])
    qd0 = np.array([b.qd for b in case14.buses])
    for b in range(len(case14.buses)):
        if pd0[b] == 0.0:
            # zero-base-load buses hold QD = 0
            assert np.all(inst24.qd[b] == 0.0)
            continue
        ratios = inst24.qd[b] / inst24.pd[b]
        assert np.allclose(ratios, qd0[b] / pd0[b], atol=1e-12)


def test_nonconvex_cost_rejected(case14):
    doc = """{
      "horizon": 1, "load_profile": [1.0], "reserve": 0.0,
      "generators": {
        "1": {"pmin": 10, "pmax": 50,
              "cost_segments": [[20, 30.0], [20, 10.0]]}
      }
    }"""
    with pytest.raises(ValidationError):
        load_uc_instance(doc, case14)


def test_defaults_least_restrictive(case14):
    doc = """{
      "horizon": 2, "load_profile": [0.5, 0.5], "reserve": 0.0,
      "generators": {"1": {"pmin": 10, "pmax": 50}}
    }"""
    inst = load_uc_instance(doc, case14)
    g = inst.gens[0]
    assert g.tu == 1 and g.td == 1
    assert g.su == pytest.approx(g.pmax)
    assert g.ru == pytest.approx(g.pmax)
    assert not g.init_on  # OFF long enough to allow startup at t=1
    assert g.init_status <= -g.td
