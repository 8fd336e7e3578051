"""Analytic Jacobians, linearization, and dataset sampling.
============================================================

The surrogate is built on top of a first-order model y = J* x + r*
taken at a base AC-OPF point. This demo checks the analytic Jacobian
against finite differences, then samples a small dataset of exact
power-flow solutions and measures how far the affine model drifts.

Run with:  python3 demos/02_linearize_and_sample.py
"""

import importlib.resources as ir

import numpy as np

from compactpf import case_ingest, grid_model, jacobian
from compactpf.ac_solver import make_dispatch_spec, slp_acopf
from compactpf.data_factory import SamplerConfig, collect_dataset, verify_dataset

DATA = ir.files("compactpf.data")

case = case_ingest.parse_matpower((DATA / "case14.m").read_text())
case = case_ingest.derate_thermal_limits(case, 0.30)
net = grid_model.build_network(case)
inst = case_ingest.load_uc_instance((DATA / "uc14.json").read_text(), case)

# --- base point and linearization -------------------------------------------
op0, _ = slp_acopf(net, make_dispatch_spec(net, inst, hour=0))
lin = jacobian.linearize(net, op0)
print(f"linear model: Jstar {lin.Jstar.shape}, "
      f"{np.count_nonzero(lin.Jstar)} nonzeros")

# The linearization is exact at the base point by construction.
x0 = grid_model.pack_input(op0, net)
y0 = grid_model.pack_output(op0)
print(f"residual at the base point: "
      f"{np.abs(lin.predict(x0) - y0).max():.2e}")

# --- finite-difference cross-check -------------------------------------------
# Central differences of the full power-flow map should agree with the
# analytic Jacobian (which is what Jstar is at the base point).
J_fd = jacobian.finite_difference_jacobian(
    lambda x: grid_model.eval_at_input(net, x), x0, h=1e-6)
print(f"max |analytic - FD| Jacobian entry: "
      f"{np.abs(lin.Jstar - J_fd).max():.2e}")

# --- sampling ----------------------------------------------------------------
# collect_dataset sweeps hours, commitment combinations (units forced off),
# and random voltage pushes, solving an AC-OPF for each and keeping only
# exact power-flow solutions.
cfg = SamplerConfig(combos_per_gen=1)
ds = collect_dataset(net, inst, cfg, seed=0)
print(f"\ndataset: {ds.size} samples "
      f"({(ds.split == 'train').sum()} train / "
      f"{(ds.split == 'val').sum()} val / {(ds.split == 'test').sum()} test)")

# Every row solves the nonlinear equations to tight tolerance.
worst = verify_dataset(net, ds)
print(f"worst power-flow residual across the dataset: {worst:.2e}")

# How good is the affine model away from the base point? This gap is
# exactly what the compact ReLU correction will be trained to close.
err = np.abs(lin.predict(ds.X) - ds.Y).mean(axis=1)
print(f"affine-model mean L1 error: {err.mean():.4f} "
      f"(worst sample {err.max():.4f})")
