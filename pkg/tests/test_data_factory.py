import numpy as np
import pytest

from compactpf.data_factory import (SamplerConfig, LoadScheme,
                                    apply_load_scheme, collect_dataset,
                                    verify_dataset, dump_dataset,
                                    load_dataset)
from compactpf.errors import ValidationError


def test_dataset_rows_are_exact_pf_solutions(net14, dataset14):
    assert dataset14.size >= 1
    assert dataset14.X.shape == (dataset14.size, net14.d_in)
    assert dataset14.Y.shape == (dataset14.size, net14.d_out)
    # every row re-evaluates through the exact power flow map
    assert verify_dataset(net14, dataset14, tol=1e-8) < 1e-8


def test_dataset_split_fractions(dataset14):
    Xtr, _ = dataset14.train
    Xte, _ = dataset14.test
    assert Xtr.shape[0] + Xte.shape[0] == dataset14.size
    assert Xte.shape[0] == int(round(0.2 * dataset14.size))


def test_dataset_deterministic(net14, inst24, dataset14):
    again = collect_dataset(net14, inst24, SamplerConfig(combos_per_gen=3),
                            seed=0)
    assert np.array_equal(again.X, dataset14.X)
    assert np.array_equal(again.Y, dataset14.Y)
    assert np.array_equal(again.split, dataset14.split)


def test_dataset_covers_outages(dataset14):
    offs = {m["off"] for m in dataset14.meta}
    assert () in offs            # all-on base per hour
    assert any(len(o) >= 2 for o in offs)  # multi-unit outages drawn


def test_dump_load_round_trip(dataset14, tmp_path):
    path = tmp_path / "ds.txt"
    dump_dataset(dataset14, path)
    again = load_dataset(path)
    assert np.array_equal(again.X, dataset14.X)
    assert np.array_equal(again.Y, dataset14.Y)
    assert np.array_equal(again.split, dataset14.split)
    assert [m["hour"] for m in again.meta] == \
        [m["hour"] for m in dataset14.meta]
    assert [m["off"] for m in again.meta] == \
        [m["off"] for m in dataset14.meta]


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text("hello\n")
    with pytest.raises(ValidationError):
        load_dataset(path)


def test_uniform_scheme(inst24):
    s = apply_load_scheme(inst24, LoadScheme(kind="uniform", scale=1.1))
    assert np.allclose(s.pd, inst24.pd * 1.1)
    assert np.allclose(s.qd, inst24.qd * 1.1)


def test_per_bus_scheme_preserves_power_factor(inst24):
    s = apply_load_scheme(inst24, LoadScheme(kind="per-bus-random",
                                             spread=0.15, seed=7))
    mask = inst24.pd != 0.0
    assert np.allclose(s.qd[mask] / s.pd[mask],
                       inst24.qd[mask] / inst24.pd[mask])
    fac = s.pd[mask] / inst24.pd[mask]
    assert np.all(fac >= 0.85 - 1e-12) and np.all(fac <= 1.15 + 1e-12)
    # the factor is constant over time per bus
    fac2d = np.divide(s.pd, inst24.pd, out=np.ones_like(s.pd),
                      where=inst24.pd != 0)
    assert np.allclose(fac2d, fac2d[:, :1])


def test_sinusoidal_scheme(inst24):
    s = apply_load_scheme(inst24, LoadScheme(kind="sinusoidal",
                                             amplitude=0.1))
    t = np.arange(1, inst24.horizon + 1)
    expect = 1.0 + 0.1 * np.sin(2 * np.pi * t / 24.0)
    mask = inst24.pd[:, 0] != 0
    assert np.allclose(s.pd[mask] / inst24.pd[mask], expect)


def test_scheme_validation():
    with pytest.raises(ValidationError):
        LoadScheme(kind="step")
    with pytest.raises(ValidationError):
        LoadScheme(kind="uniform", scale=1.5)
    with pytest.raises(ValidationError):
        LoadScheme(kind="sinusoidal", amplitude=0.5)
    with pytest.raises(ValidationError):
        LoadScheme(kind="per-bus-random", spread=0.5)
