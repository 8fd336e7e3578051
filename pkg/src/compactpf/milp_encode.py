"""Exact big-M MILP encoding of the compact model, plus bound tightening
and ReLU pruning.

The encoding introduces, per ReLU i, pre-activation zhat_i, output z_i,
and (unless the ReLU has been fixed by pruning) a binary beta_i with the
four standard big-M inequalities. Valid [Mmin, Mmax] pre-activation
bounds come from interval arithmetic over the input box, and can be
tightened by optimizing zhat_i over the encoded fragment with the LP
relaxation or the exact MILP.
"""

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .milp_model import MILPModel, BINARY, LE, EQ, GE
from . import milp_solve

FREE, FIXED_OFF, FIXED_ON = "free", "fixed_off", "fixed_on"


@dataclass
class BigMBounds:
    m_min: np.ndarray
    m_max: np.ndarray
    status: tuple          # per-ReLU FREE / FIXED_OFF / FIXED_ON
    provenance: tuple      # per-ReLU "interval" / "lp" / "milp"

    def __post_init__(self):
        if np.any(self.m_min > self.m_max + 1e-12):
            raise ValidationError("Mmin > Mmax")
        for st, lo, hi in zip(self.status, self.m_min, self.m_max):
            if st == FIXED_OFF and hi > 0:
                raise ValidationError("fixed_off requires Mmax <= 0")
            if st == FIXED_ON and lo <= 0:
                raise ValidationError("fixed_on requires Mmin > 0")

    @property
    def rho(self):
        return self.m_min.size

    def free_count(self):
        return sum(1 for s in self.status if s == FREE)


@dataclass
class BoundBox:
    """Engineering constraint sets for the surrogate's inputs and outputs.

    x_lo/x_hi box the packed input (voltages then non-ref angles);
    angle_pairs carry the per-line angle-difference constraints as
    (i, j, lo, hi) over x indices, j = None meaning the reference bus;
    y_lo/y_hi bound the packed output (+-inf where unconstrained).
    """
    x_lo: np.ndarray
    x_hi: np.ndarray
    angle_pairs: tuple = ()
    y_lo: np.ndarray = None
    y_hi: np.ndarray = None

    def __post_init__(self):
        if np.any(self.x_lo > self.x_hi):
            raise ValidationError("empty input box")


def _theta_index(bus, net):
    """Index of a bus angle inside the packed input, None for the ref."""
    if bus == net.ref:
        return None
    return net.n + (bus if bus < net.ref else bus - 1)


def bound_box_from_network(net, inst=None):
    """Input box from voltage limits and angle-difference reachability;
    output bounds from UC engineering limits when an instance is given."""
    n, m = net.n, net.m
    d_in, d_out = net.d_in, net.d_out

    # per-bus angle reach: cheapest sum of line angle-limit magnitudes
    # from the reference bus (Dijkstra)
    w = np.maximum(np.abs(net.theta_min), np.abs(net.theta_max))
    adj = [[] for _ in range(n)]
    for k in range(m):
        i = int(np.argmax(net.E[k]))
        j = int(np.argmin(net.E[k]))
        adj[i].append((j, w[k]))
        adj[j].append((i, w[k]))
    reach = np.full(n, np.inf)
    reach[net.ref] = 0.0
    heap = [(0.0, net.ref)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > reach[u]:
            continue
        for vtx, wt in adj[u]:
            nd = d + wt
            if nd < reach[vtx] - 1e-15:
                reach[vtx] = nd
                heapq.heappush(heap, (nd, vtx))

    x_lo = np.empty(d_in)
    x_hi = np.empty(d_in)
    x_lo[:n], x_hi[:n] = net.vmin, net.vmax
    for bus in range(n):
        k = _theta_index(bus, net)
        if k is None:
            continue
        x_lo[k], x_hi[k] = -reach[bus], reach[bus]

    pairs = []
    for k in range(m):
        i = int(np.argmax(net.E[k]))
        j = int(np.argmin(net.E[k]))
        pairs.append((_theta_index(i, net), _theta_index(j, net),
                      net.theta_min[k], net.theta_max[k]))

    y_lo = np.full(d_out, -np.inf)
    y_hi = np.full(d_out, np.inf)
    # apparent flows bounded above by line ratings in both directions
    y_hi[2 * n:2 * n + m] = net.smax
    y_hi[2 * n + m:] = net.smax
    if inst is not None:
        pmax_at = np.zeros(n)
        qmin_at = np.zeros(n)
        qmax_at = np.zeros(n)
        for g in inst.gens:
            b = net.bus_ids.index(g.bus)
            pmax_at[b] += g.pmax
            qmin_at[b] += min(g.qmin, 0.0)
            qmax_at[b] += max(g.qmax, 0.0)
        for c in inst.condensers:
            b = net.bus_ids.index(c.bus)
            qmin_at[b] += min(c.qmin, 0.0)
            qmax_at[b] += max(c.qmax, 0.0)
        # widen the load range by the +-15% alteration envelope so one
        # box stays valid across every load scheme scenario
        env = 0.15
        pd_max = inst.pd.max(axis=1)
        pd_min = inst.pd.min(axis=1)
        qd_max = inst.qd.max(axis=1)
        qd_min = inst.qd.min(axis=1)
        pd_hi = pd_max + env * np.abs(pd_max)
        pd_lo = pd_min - env * np.abs(pd_min)
        qd_hi = qd_max + env * np.abs(qd_max)
        qd_lo = qd_min - env * np.abs(qd_min)
        y_lo[:n] = -pd_hi
        y_hi[:n] = pmax_at - pd_lo
        y_lo[n:2 * n] = qmin_at - qd_hi
        y_hi[n:2 * n] = qmax_at - qd_lo
    return BoundBox(x_lo=x_lo, x_hi=x_hi, angle_pairs=tuple(pairs),
                    y_lo=y_lo, y_hi=y_hi)


def interval_bounds(model, box):
    """Valid pre-activation bounds from interval arithmetic over the box."""
    lo_term = np.minimum(model.w1 * box.x_lo[:, None],
                         model.w1 * box.x_hi[:, None])
    hi_term = np.maximum(model.w1 * box.x_lo[:, None],
                         model.w1 * box.x_hi[:, None])
    m_min = lo_term.sum(axis=0) + model.b
    m_max = hi_term.sum(axis=0) + model.b
    rho = model.rho
    return BigMBounds(m_min=m_min, m_max=m_max,
                      status=(FREE,) * rho,
                      provenance=("interval",) * rho)


@dataclass
class ReluFragment:
    """Variable indices of one encoded network inside a MILPModel."""
    x: list
    y: list
    z: list
    zhat: list
    beta: list  # None where the ReLU is fixed


def encode_relu_network(model, bounds, milp, x_vars, prefix="nn"):
    """Add the exact MILP encoding of `model` to `milp` over given x vars.

    y = Jstar x + rstar + w2 z,  zhat = w1' x + b, and per free ReLU the
    four big-M rows; fixed_off contributes z=0 and fixed_on z=zhat, both
    without a binary.
    """
    rho = model.rho
    if bounds.rho != rho:
        raise ValidationError("bounds/model ReLU count mismatch")
    if len(x_vars) != model.d_in:
        raise ValidationError("x variable count != model input dimension")

    y = milp.add_vars(f"{prefix}.y", model.d_out, lb=-math.inf, ub=math.inf)
    zhat = [milp.add_var(f"{prefix}.zh[{i}]",
                         lb=bounds.m_min[i], ub=bounds.m_max[i])
            for i in range(rho)]
    z = []
    beta = []
    for i in range(rho):
        st = bounds.status[i]
        if st == FIXED_OFF:
            z.append(milp.add_var(f"{prefix}.z[{i}]", lb=0.0, ub=0.0))
            beta.append(None)
        elif st == FIXED_ON:
            zi = milp.add_var(f"{prefix}.z[{i}]",
                              lb=bounds.m_min[i], ub=bounds.m_max[i])
            z.append(zi)
            beta.append(None)
            milp.add_constr({zi: 1.0, zhat[i]: -1.0}, EQ, 0.0,
                            name=f"{prefix}.on[{i}]")
        elif st == FREE:
            zi = milp.add_var(f"{prefix}.z[{i}]",
                              lb=0.0, ub=max(bounds.m_max[i], 0.0))
            bi = milp.add_var(f"{prefix}.beta[{i}]", kind=BINARY,
                              branch_priority=0,
                              annotation="relu_activation")
            z.append(zi)
            beta.append(bi)
            mmin, mmax = bounds.m_min[i], bounds.m_max[i]
            # z <= zhat - Mmin (1 - beta)
            milp.add_constr({zi: 1.0, zhat[i]: -1.0, bi: -mmin}, LE, -mmin,
                            name=f"{prefix}.bm1[{i}]")
            # z >= zhat
            milp.add_constr({zi: 1.0, zhat[i]: -1.0}, GE, 0.0,
                            name=f"{prefix}.bm2[{i}]")
            # z <= Mmax beta
            milp.add_constr({zi: 1.0, bi: -mmax}, LE, 0.0,
                            name=f"{prefix}.bm3[{i}]")
        else:
            raise ValidationError(f"unknown ReLU status {st!r}")

    # zhat = w1' x + b
    for i in range(rho):
        coeffs = {x_vars[j]: -model.w1[j, i] for j in range(model.d_in)}
        coeffs[zhat[i]] = 1.0
        milp.add_constr(coeffs, EQ, model.b[i], name=f"{prefix}.pre[{i}]")

    # y = Jstar x + rstar + w2 z
    J = model.linear.Jstar
    for r in range(model.d_out):
        coeffs = {y[r]: 1.0}
        for j in range(model.d_in):
            if J[r, j] != 0.0:
                coeffs[x_vars[j]] = coeffs.get(x_vars[j], 0.0) - J[r, j]
        for i in range(rho):
            if model.w2[r, i] != 0.0:
                coeffs[z[i]] = -model.w2[r, i]
        milp.add_constr(coeffs, EQ, model.linear.rstar[r],
                        name=f"{prefix}.out[{r}]")

    return ReluFragment(x=list(x_vars), y=y, z=z, zhat=zhat, beta=beta)


def encode_linear_model(lin, milp, x_vars, prefix="lin"):
    """Affine-only counterpart: y = Jstar x + rstar (no ReLU variables)."""
    y = milp.add_vars(f"{prefix}.y", lin.d_out, lb=-math.inf, ub=math.inf)
    for r in range(lin.d_out):
        coeffs = {y[r]: 1.0}
        for j in range(lin.d_in):
            if lin.Jstar[r, j] != 0.0:
                coeffs[x_vars[j]] = coeffs.get(x_vars[j], 0.0) - lin.Jstar[r, j]
        milp.add_constr(coeffs, EQ, lin.rstar[r], name=f"{prefix}.out[{r}]")
    return ReluFragment(x=list(x_vars), y=y, z=[], zhat=[], beta=[])


def add_box_constraints(milp, frag, box, prefix=""):
    """Apply angle-pair and output constraints of a BoundBox to a fragment
    (x bounds are assumed to be set on the variables already)."""
    for k, (i, j, lo, hi) in enumerate(box.angle_pairs):
        if i is None and j is None:
            continue
        coeffs = {}
        if i is not None:
            coeffs[frag.x[i]] = 1.0
        if j is not None:
            coeffs[frag.x[j]] = coeffs.get(frag.x[j], 0.0) - 1.0
        milp.add_constr(coeffs, LE, hi, name=f"{prefix}ang_hi[{k}]")
        milp.add_constr(coeffs, GE, lo, name=f"{prefix}ang_lo[{k}]")
    if box.y_lo is not None:
        for r, (lo, hi) in enumerate(zip(box.y_lo, box.y_hi)):
            v = milp.variables[frag.y[r]]
            v.lb = max(v.lb, lo)
            v.ub = min(v.ub, hi)


def standalone_fragment(model, bounds, box, prefix="nn"):
    """Fresh MILPModel holding just the encoded network over the box."""
    milp = MILPModel(name="nn_fragment")
    x = [milp.add_var(f"x[{j}]", lb=box.x_lo[j], ub=box.x_hi[j])
         for j in range(model.d_in)]
    frag = encode_relu_network(model, bounds, milp, x, prefix=prefix)
    add_box_constraints(milp, frag, box)
    return milp, frag


def tighten_bounds(model, box, mode="lp", budget=120.0, start=None,
                   milp_gap=0.0):
    """Tighten per-ReLU pre-activation bounds by optimizing zhat_i over
    the encoded fragment restricted to the box's constraint sets.

    mode "lp" uses the LP relaxation (valid, looser); mode "milp" solves
    the exact MILP per bound. Resulting bounds are never looser than the
    starting bounds; entries not improved (or skipped once the budget is
    exhausted) keep their starting value and provenance.
    """
    if mode not in ("lp", "milp"):
        raise ValidationError(f"mode must be 'lp' or 'milp', got {mode!r}")
    if start is None:
        start = interval_bounds(model, box)
    milp, frag = standalone_fragment(model, start, box)
    m_min = start.m_min.copy()
    m_max = start.m_max.copy()
    prov = list(start.provenance)
    t0 = time.time()
    for i in range(model.rho):
        if time.time() - t0 > budget:
            break
        improved = False
        for direction in (+1.0, -1.0):
            milp.obj = {frag.zhat[i]: direction}
            milp.obj_constant = 0.0
            if mode == "lp":
                sol = milp_solve.solve_lp(milp)
                if sol.status != "optimal":
                    continue
                val = sol.objective
            else:
                remaining = max(budget - (time.time() - t0), 1.0)
                sol = milp_solve.solve_milp(milp, gap_target=milp_gap,
                                            time_budget=remaining)
                if sol.status not in ("optimal", "gap_reached"):
                    continue
                # the dual bound is the valid side for bound tightening
                val = sol.best_bound
            if direction > 0 and val > m_min[i] + 1e-12:
                m_min[i] = val
                improved = True
            elif direction < 0 and -val < m_max[i] - 1e-12:
                m_max[i] = -val
                improved = True
        if improved:
            prov[i] = mode
    m_min = np.minimum(m_min, m_max)  # guard fp jitter on pinned ReLUs
    return BigMBounds(m_min=m_min, m_max=m_max,
                      status=start.status, provenance=tuple(prov))


def prune(model, bounds):
    """Fix ReLUs whose bounds prove them always or never active."""
    status = []
    for lo, hi in zip(bounds.m_min, bounds.m_max):
        if hi <= 0.0:
            status.append(FIXED_OFF)
        elif lo > 0.0:
            status.append(FIXED_ON)
        else:
            status.append(FREE)
    return BigMBounds(m_min=bounds.m_min.copy(), m_max=bounds.m_max.copy(),
                      status=tuple(status), provenance=bounds.provenance)
