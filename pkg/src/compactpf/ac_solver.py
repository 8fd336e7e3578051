"""Newton power flow, SLP AC-OPF, and the multi-period feasibility oracle.

The OPF engine is sequential linear programming: each major iteration
linearizes the AC power flow map at the current point (reusing the
analytic Jacobians), solves an LP with l1-elastic balance/thermal
slacks inside a trust region, and accepts or rejects the step on an
exact-penalty merit function. A fixed point of the iteration satisfies
the nonlinear constraints exactly, which is re-verified independently
before any point is reported feasible.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ValidationError, ConvergenceError, CompactPFError
from . import grid_model, jacobian


class InfeasibleError(CompactPFError):
    """The (local) SLP phase-1 certifies the dispatch problem infeasible."""


TOL_FEAS = 1e-6
SLACK_PENALTY = 1e5
_DEBUG = bool(os.environ.get("COMPACTPF_SLP_DEBUG"))


@dataclass
class TrustConfig:
    initial_radius: float = 0.1
    shrink: float = 0.5
    expand: float = 2.0
    max_radius: float = 0.2
    min_radius: float = 1e-10
    max_major_iters: int = 60
    step_tol: float = 1e-7


@dataclass
class GenSetting:
    """One generator's limits within a single period (schedule applied)."""
    bus: int              # bus position
    on: bool
    pmin: float           # active floor while committed
    cap_a: float          # p_delta + r <= cap_a
    cap_b: float          # p_delta <= cap_b
    q_lo: float
    q_hi: float
    cost_segments: tuple  # (width, slope) over p_delta
    no_load_cost: float = 0.0


@dataclass
class DispatchSpec:
    """Per-period continuous dispatch problem data."""
    gens: list            # GenSetting, instance order
    condensers: list      # (bus position, q_lo, q_hi)
    pd: np.ndarray        # (n,)
    qd: np.ndarray        # (n,)
    reserve: float = 0.0
    # Newton-specific setpoints (optional)
    p_set: np.ndarray = None
    v_set: np.ndarray = None


@dataclass
class FeasibilityReport:
    verdict: str                  # feasible | infeasible | no_solution
    max_violation: float
    objective: float
    iterations: int
    points: list = None           # OperatingPoint per period when feasible
    p_delta: np.ndarray = None    # (G, T)
    reserve_r: np.ndarray = None  # (G, T)
    q: np.ndarray = None          # (G, T)


def make_dispatch_spec(net, inst, hour, off=()):
    """Single-period DispatchSpec from a UC instance: every unit ON
    except those listed in `off` (instance-order indices)."""
    gens = []
    for gi, g in enumerate(inst.gens):
        on = gi not in off
        bus = net.bus_ids.index(g.bus)
        span = g.pmax - g.pmin
        gens.append(GenSetting(
            bus=bus, on=on,
            pmin=g.pmin if on else 0.0,
            cap_a=span if on else 0.0,
            cap_b=span if on else 0.0,
            q_lo=g.qmin if on else 0.0,
            q_hi=g.qmax if on else 0.0,
            cost_segments=g.cost_segments,
            no_load_cost=g.no_load_cost if on else 0.0,
        ))
    conds = [(net.bus_ids.index(c.bus), c.qmin, c.qmax)
             for c in inst.condensers]
    return DispatchSpec(gens=gens, condensers=conds,
                        pd=inst.pd[:, hour].copy(), qd=inst.qd[:, hour].copy(),
                        reserve=float(inst.reserve[hour]))


# ---------------------------------------------------------------------------
# Newton power flow
# ---------------------------------------------------------------------------

def newton_power_flow(net, spec, v0, theta0, tol=1e-8, max_iter=50):
    """Classic Newton-Raphson with fixed PV/PQ/slack roles.

    Active setpoints come from spec.p_set (per generator); PV voltage
    setpoints from spec.v_set. The slack bus is the network reference.
    """
    n = net.n
    v = np.asarray(v0, dtype=float).copy()
    theta = np.asarray(theta0, dtype=float).copy()
    if spec.p_set is None:
        raise ValidationError("newton_power_flow requires spec.p_set")

    p_spec = -spec.pd.copy()
    q_spec = -spec.qd.copy()
    pv_buses = set()
    for gs, p in zip(spec.gens, spec.p_set):
        if gs.on:
            p_spec[gs.bus] += p
            pv_buses.add(gs.bus)
    for bus, _, _ in spec.condensers:
        pv_buses.add(bus)
    if spec.v_set is not None:
        for gs, vs in zip(spec.gens, spec.v_set):
            if gs.on:
                v[gs.bus] = vs
    pv_buses.discard(net.ref)
    pq = [b for b in range(n) if b != net.ref and b not in pv_buses]
    nonslack = [b for b in range(n) if b != net.ref]

    for it in range(max_iter + 1):
        op = grid_model.eval_power_flow(net, v, theta)
        dp = p_spec[nonslack] - op.p_inj[nonslack]
        dq = q_spec[pq] - op.q_inj[pq]
        mismatch = np.concatenate([dp, dq])
        if mismatch.size == 0 or np.max(np.abs(mismatch)) <= tol:
            return op
        if it == max_iter:
            break
        J = jacobian.injection_jacobian(net, v, theta)
        # unknown ordering: theta[nonslack], v[pq]
        rows = [b for b in nonslack] + [n + b for b in pq]
        cols = [n + b for b in nonslack] + [b for b in pq]
        Jsub = J[np.ix_(rows, cols)]
        try:
            dx = np.linalg.solve(Jsub, mismatch)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular power flow Jacobian")
        if not np.all(np.isfinite(dx)) or np.max(np.abs(dx)) > 1e3:
            raise ConvergenceError("Newton power flow diverged")
        theta[nonslack] += dx[:len(nonslack)]
        v[pq] += dx[len(nonslack):]
        if np.any(v <= 0):
            raise ConvergenceError("Newton power flow diverged (v <= 0)")
    raise ConvergenceError(
        f"Newton power flow did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# SLP engine
# ---------------------------------------------------------------------------

@dataclass
class _Ramps:
    up: np.ndarray       # (G,)
    down: np.ndarray     # (G,)
    p_delta0: np.ndarray  # (G,) pre-horizon production above Pmin


def _period_violation(net, spec, v, theta, p_abs, q_gen, q_sc):
    """Exact nonlinear constraint violation of one period's point."""
    op = grid_model.eval_power_flow(net, v, theta)
    p_bus = -spec.pd.copy()
    q_bus = -spec.qd.copy()
    for gs, p, q in zip(spec.gens, p_abs, q_gen):
        p_bus[gs.bus] += p
        q_bus[gs.bus] += q
    for (bus, _, _), q in zip(spec.condensers, q_sc):
        q_bus[bus] += q
    ep = np.abs(op.p_inj - p_bus)
    eq = np.abs(op.q_inj - q_bus)
    eth = np.concatenate([np.maximum(op.s_ft - net.smax, 0.0),
                          np.maximum(op.s_tf - net.smax, 0.0)])
    viol = max(np.max(ep), np.max(eq), np.max(eth, initial=0.0))
    vsum = float(np.sum(ep) + np.sum(eq) + np.sum(eth))
    return float(viol), vsum, op


def _solve_slp(net, specs, ramps=None, objective="min-cost",
               trust=None, x_init=None):
    """Shared single/multi-period SLP core.

    Returns (verdict, points, p_delta, r, q, q_sc, cost, iterations,
    max_violation).
    """
    trust = trust or TrustConfig()
    T = len(specs)
    n, m = net.n, net.m
    G = len(specs[0].gens)
    C = len(specs[0].condensers)
    nonref = [b for b in range(n) if b != net.ref]

    if x_init is None:
        v = np.tile(np.clip(1.0, net.vmin, net.vmax), (T, 1))
        theta = np.zeros((T, n))
    else:
        v, theta = x_init
        v, theta = v.copy(), theta.copy()

    # LP variable layout per period: dv(n), dth(n-1), p_delta(G), r(G),
    # q(G), q_sc(C), slacks: sp+(n), sp-(n), sq+(n), sq-(n), sth(2m)
    per = n + (n - 1) + 3 * G + C + 4 * n + 2 * m
    off_dv = 0
    off_dth = n
    off_pd = off_dth + (n - 1)
    off_r = off_pd + G
    off_q = off_r + G
    off_qsc = off_q + G
    off_spp = off_qsc + C
    off_spm = off_spp + n
    off_sqp = off_spm + n
    off_sqm = off_sqp + n
    off_sth = off_sqm + n
    nvar = per * T

    def build_lp(radius):
        c = np.zeros(nvar)
        lb = np.zeros(nvar)
        ub = np.full(nvar, np.inf)
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        lin_ctx = []        # per period: (op, Jpq, Jsf, Jst)
        thermal_rows = []   # per period: first thermal row index in A_ub

        for t, spec in enumerate(specs):
            base = per * t
            op = grid_model.eval_power_flow(net, v[t], theta[t])
            Jpq = jacobian.injection_jacobian(net, v[t], theta[t])
            Jsf = jacobian.apparent_flow_jacobian(net, v[t], theta[t], "ft")
            Jst = jacobian.apparent_flow_jacobian(net, v[t], theta[t], "tf")
            lin_ctx.append((op, Jpq, Jsf, Jst))

            # dv within voltage box and trust radius
            lb[base + off_dv:base + off_dv + n] = np.maximum(
                net.vmin - v[t], -radius)
            ub[base + off_dv:base + off_dv + n] = np.minimum(
                net.vmax - v[t], radius)
            lb[base + off_dth:base + off_dth + n - 1] = -radius
            ub[base + off_dth:base + off_dth + n - 1] = radius

            def dx_row(row2n):
                """Map a (2n,) Jacobian row to LP columns (dv, dth)."""
                cols = {}
                for b in range(n):
                    if row2n[b] != 0.0:
                        cols[base + off_dv + b] = row2n[b]
                for k, b in enumerate(nonref):
                    if row2n[n + b] != 0.0:
                        cols[base + off_dth + k] = row2n[n + b]
                return cols

            # active balance: p_inj0 + Jp dx = sum(pmin + p_delta) - pd + sp+ - sp-
            for b in range(n):
                row = dx_row(Jpq[b])
                rhs = -op.p_inj[b] - spec.pd[b]
                for gi, gs in enumerate(spec.gens):
                    if gs.bus == b and gs.on:
                        row[base + off_pd + gi] = row.get(base + off_pd + gi, 0.0) - 1.0
                        rhs += gs.pmin
                row[base + off_spp + b] = row.get(base + off_spp + b, 0.0) - 1.0
                row[base + off_spm + b] = row.get(base + off_spm + b, 0.0) + 1.0
                A_eq.append(row)
                b_eq.append(rhs)
            # reactive balance
            for b in range(n):
                row = dx_row(Jpq[n + b])
                rhs = -op.q_inj[b] - spec.qd[b]
                for gi, gs in enumerate(spec.gens):
                    if gs.bus == b and gs.on:
                        row[base + off_q + gi] = row.get(base + off_q + gi, 0.0) - 1.0
                for ci, (cb, _, _) in enumerate(spec.condensers):
                    if cb == b:
                        row[base + off_qsc + ci] = row.get(base + off_qsc + ci, 0.0) - 1.0
                row[base + off_sqp + b] = row.get(base + off_sqp + b, 0.0) - 1.0
                row[base + off_sqm + b] = row.get(base + off_sqm + b, 0.0) + 1.0
                A_eq.append(row)
                b_eq.append(rhs)
            # thermal limits, elastic
            thermal_rows.append(len(A_ub))
            for k in range(m):
                for Js, s0, soff in ((Jsf, op.s_ft[k], 0), (Jst, op.s_tf[k], m)):
                    row = dx_row(Js[k])
                    row[base + off_sth + soff + k] = -1.0
                    A_ub.append(row)
                    b_ub.append(net.smax[k] - s0)
            # angle-difference limits (linear, hard)
            for k in range(m):
                i = int(np.argmax(net.E[k]))
                j = int(np.argmin(net.E[k]))
                row = {}
                cur = theta[t][i] - theta[t][j]
                for b, sign in ((i, 1.0), (j, -1.0)):
                    if b != net.ref:
                        kk = nonref.index(b)
                        row[base + off_dth + kk] = row.get(base + off_dth + kk, 0.0) + sign
                A_ub.append(dict(row))
                b_ub.append(net.theta_max[k] - cur)
                A_ub.append({c: -x for c, x in row.items()})
                b_ub.append(cur - net.theta_min[k])
            # generator boxes
            for gi, gs in enumerate(spec.gens):
                if not gs.on:
                    ub[base + off_pd + gi] = 0.0
                    ub[base + off_r + gi] = 0.0
                    lb[base + off_q + gi] = 0.0
                    ub[base + off_q + gi] = 0.0
                    continue
                ub[base + off_pd + gi] = gs.cap_b
                lb[base + off_q + gi] = gs.q_lo
                ub[base + off_q + gi] = gs.q_hi
                A_ub.append({base + off_pd + gi: 1.0, base + off_r + gi: 1.0})
                b_ub.append(gs.cap_a)
            for ci, (_, qlo, qhi) in enumerate(spec.condensers):
                lb[base + off_qsc + ci] = qlo
                ub[base + off_qsc + ci] = qhi
            # reserve requirement
            if spec.reserve > 0.0:
                A_ub.append({base + off_r + gi: -1.0 for gi in range(G)})
                b_ub.append(-spec.reserve)
            # costs and penalties
            if objective == "min-cost":
                for gi, gs in enumerate(spec.gens):
                    slope = gs.cost_segments[0][1] if gs.cost_segments else 0.0
                    # single-slope proxy refined below via segments
                    del slope
            for col in range(base + off_spp, base + off_sth + 2 * m):
                c[col] = SLACK_PENALTY

        # cost via piecewise segments requires extra vars; to keep the LP
        # compact we exploit convexity: cost(p_delta) modeled by epigraph
        # constraints cost_g >= slope_k * p_delta - intercept_k
        cost_vars = []
        if objective == "min-cost":
            cost_base = nvar
            extra = 0
            for t, spec in enumerate(specs):
                for gi, gs in enumerate(spec.gens):
                    if not gs.on or not gs.cost_segments:
                        cost_vars.append(None)
                        continue
                    cost_vars.append(cost_base + extra)
                    extra += 1
            total = nvar + extra
            c = np.concatenate([c, np.ones(extra)])
            lb = np.concatenate([lb, np.zeros(extra)])
            ub = np.concatenate([ub, np.full(extra, np.inf)])
            k = 0
            for t, spec in enumerate(specs):
                base = per * t
                for gi, gs in enumerate(spec.gens):
                    cv = cost_vars[t * G + gi]
                    if cv is None:
                        continue
                    # epigraph over cumulative segments
                    acc_w, acc_c = 0.0, 0.0
                    for width, slope in gs.cost_segments:
                        # line through (acc_w, acc_c) with this slope
                        A_ub.append({base + off_pd + gi: slope, cv: -1.0})
                        b_ub.append(slope * acc_w - acc_c)
                        acc_c += slope * width
                        acc_w += width
                    k += 1
        else:
            total = nvar

        # ramp coupling between consecutive periods
        if ramps is not None and T > 1:
            for t in range(T):
                for gi in range(G):
                    cur = per * t + off_pd + gi
                    rcur = per * t + off_r + gi
                    if t == 0:
                        A_ub.append({cur: 1.0, rcur: 1.0})
                        b_ub.append(ramps.up[gi] + ramps.p_delta0[gi])
                        A_ub.append({cur: -1.0})
                        b_ub.append(ramps.down[gi] - ramps.p_delta0[gi])
                    else:
                        prev = per * (t - 1) + off_pd + gi
                        A_ub.append({cur: 1.0, rcur: 1.0, prev: -1.0})
                        b_ub.append(ramps.up[gi])
                        A_ub.append({cur: -1.0, prev: 1.0})
                        b_ub.append(ramps.down[gi])
        elif ramps is not None and T == 1:
            for gi in range(G):
                cur = off_pd + gi
                A_ub.append({cur: 1.0, off_r + gi: 1.0})
                b_ub.append(ramps.up[gi] + ramps.p_delta0[gi])
                A_ub.append({cur: -1.0})
                b_ub.append(ramps.down[gi] - ramps.p_delta0[gi])

        def densify(rows, rhs):
            if not rows:
                return None, None
            A = np.zeros((len(rows), total))
            for r, row in enumerate(rows):
                for cidx, val in row.items():
                    A[r, cidx] = val
            return A, np.array(rhs)

        Aub, bub = densify(A_ub, b_ub)
        Aeq, beq = densify(A_eq, b_eq)
        return c, lb, ub, Aub, bub, Aeq, beq, total, lin_ctx, thermal_rows

    def extract(sol_x):
        dv = np.zeros((T, n))
        dth = np.zeros((T, n))
        pdel = np.zeros((G, T))
        rres = np.zeros((G, T))
        qg = np.zeros((G, T))
        qsc = np.zeros((C, T))
        slack_sum = 0.0
        for t in range(T):
            base = per * t
            dv[t] = sol_x[base + off_dv:base + off_dv + n]
            dth[t][nonref] = sol_x[base + off_dth:base + off_dth + n - 1]
            pdel[:, t] = sol_x[base + off_pd:base + off_pd + G]
            rres[:, t] = sol_x[base + off_r:base + off_r + G]
            qg[:, t] = sol_x[base + off_q:base + off_q + G]
            qsc[:, t] = sol_x[base + off_qsc:base + off_qsc + C]
            slack_sum += float(np.sum(sol_x[base + off_spp:base + off_sth + 2 * m]))
        return dv, dth, pdel, rres, qg, qsc, slack_sum

    def true_cost(pdel):
        total = 0.0
        for t, spec in enumerate(specs):
            for gi, gs in enumerate(spec.gens):
                if not gs.on:
                    continue
                total += gs.no_load_cost
                rem = pdel[gi, t]
                for width, slope in gs.cost_segments:
                    take = min(rem, width)
                    total += slope * max(take, 0.0)
                    rem -= take
        return total

    def total_violation(dv_, dth_, pdel_, qg_, qsc_):
        worst = 0.0
        total = 0.0
        pts = []
        for t, spec in enumerate(specs):
            p_abs = np.array([gs.pmin + pdel_[gi, t] if gs.on else 0.0
                              for gi, gs in enumerate(spec.gens)])
            viol, vsum, op = _period_violation(
                net, spec, v[t] + dv_[t], theta[t] + dth_[t],
                p_abs, qg_[:, t], qsc_[:, t])
            worst = max(worst, viol)
            total += vsum
            pts.append(op)
        return worst, total, pts

    # the LP objective omits the no-load constant of committed units
    noload_const = 0.0
    if objective == "min-cost":
        noload_const = sum(gs.no_load_cost for spec in specs
                           for gs in spec.gens if gs.on)

    def soc_rhs(bub, beq, dv_, dth_, lin_ctx, thermal_rows):
        """Shift balance/thermal RHS by the nonlinear residual at the
        trial point (second-order correction against the Maratos effect)."""
        beq2 = beq.copy()
        bub2 = bub.copy()
        for t, (op, Jpq, Jsf, Jst) in enumerate(lin_ctx):
            d = np.concatenate([dv_[t], dth_[t]])
            opn = grid_model.eval_power_flow(net, v[t] + dv_[t],
                                             theta[t] + dth_[t])
            beq2[2 * n * t:2 * n * t + n] -= \
                opn.p_inj - (op.p_inj + Jpq[:n] @ d)
            beq2[2 * n * t + n:2 * n * (t + 1)] -= \
                opn.q_inj - (op.q_inj + Jpq[n:] @ d)
            base_row = thermal_rows[t]
            bub2[base_row:base_row + 2 * m:2] -= \
                opn.s_ft - (op.s_ft + Jsf @ d)
            bub2[base_row + 1:base_row + 2 * m:2] -= \
                opn.s_tf - (op.s_tf + Jst @ d)
        return bub2, beq2

    radius = trust.initial_radius
    state = None        # (pts, pdel, rres, qg, qsc, cost, viol, merit)
    cur_merit = math.inf
    iters = 0
    converged = False
    for it in range(trust.max_major_iters):
        iters = it + 1
        c, lb, ub, Aub, bub, Aeq, beq, total, lin_ctx, thermal_rows = \
            build_lp(radius)
        bounds = np.column_stack([lb, ub])
        res = linprog(c, A_ub=Aub, b_ub=bub, A_eq=Aeq, b_eq=beq,
                      bounds=bounds, method="highs")
        if res.status == 2:
            # hard (dispatch-side) constraints conflict
            raise InfeasibleError("dispatch constraints are infeasible")
        if res.status != 0:
            raise ConvergenceError(f"SLP subproblem failed (status {res.status})")
        dv, dth, pdel, rres, qg, qsc, slack_sum = extract(res.x)
        viol, vsum, pts = total_violation(dv, dth, pdel, qg, qsc)
        cost = true_cost(pdel)
        cand_merit = (cost if objective == "min-cost" else 0.0) \
            + SLACK_PENALTY * vsum
        model_merit = float(res.fun) + noload_const

        # second-order correction: re-solve the same LP with the RHS
        # shifted by the linearization error at the trial point.  The
        # corrected step must stay in a small box around the first-order
        # step (the shift is only valid there), so restoration costs
        # O(step^2) in the state while cancelling the O(step^2) violation.
        dv2, dth2 = dv, dth
        for _ in range(2):
            bub2, beq2 = soc_rhs(bub, beq, dv2, dth2, lin_ctx, thermal_rows)
            halo = max(10.0 * float(np.max(np.abs(
                np.concatenate([beq2 - beq, bub2 - bub])))), 1e-9)
            lb2, ub2 = lb.copy(), ub.copy()
            for t in range(T):
                base = per * t
                sl = slice(base + off_dv, base + off_dv + n)
                lb2[sl] = np.maximum(lb[sl], dv2[t] - halo)
                ub2[sl] = np.minimum(ub[sl], dv2[t] + halo)
                sl = slice(base + off_dth, base + off_dth + n - 1)
                lb2[sl] = np.maximum(lb[sl], dth2[t][nonref] - halo)
                ub2[sl] = np.minimum(ub[sl], dth2[t][nonref] + halo)
            res2 = linprog(c, A_ub=Aub, b_ub=bub2, A_eq=Aeq, b_eq=beq2,
                           bounds=np.column_stack([lb2, ub2]),
                           method="highs")
            if res2.status != 0:
                break
            dv2, dth2, pdel2, rres2, qg2, qsc2, _ = extract(res2.x)
            viol2, vsum2, pts2 = total_violation(dv2, dth2, pdel2, qg2, qsc2)
            cost2 = true_cost(pdel2)
            cand2 = (cost2 if objective == "min-cost" else 0.0) \
                + SLACK_PENALTY * vsum2
            if cand2 < cand_merit:
                dv, dth, pdel, rres, qg, qsc = \
                    dv2, dth2, pdel2, rres2, qg2, qsc2
                viol, vsum, pts, cost, cand_merit = \
                    viol2, vsum2, pts2, cost2, cand2
        step = max(np.max(np.abs(dv)), np.max(np.abs(dth)))
        if _DEBUG:
            print(f"  slp it={it} radius={radius:.2e} step={step:.2e} "
                  f"viol={viol:.2e} cand={cand_merit:.9g} "
                  f"model={model_merit:.9g} cur={cur_merit:.9g}")

        if state is None:
            # first iterate: take the best the model offers
            v += dv
            theta += dth
            state = (pts, pdel, rres, qg, qsc, cost, viol)
            cur_merit = cand_merit
            continue

        # the LP always contains the current point at its exact merit,
        # so the predicted reduction is nonnegative
        pred = cur_merit - model_merit
        actual = cur_merit - cand_merit
        if pred <= 1e-6 * max(1.0, abs(cur_merit)):
            if actual > 0.0:
                v += dv
                theta += dth
                state = (pts, pdel, rres, qg, qsc, cost, viol)
                cur_merit = cand_merit
            converged = True
            break
        ratio = actual / pred
        if actual > 0.0:
            v += dv
            theta += dth
            state = (pts, pdel, rres, qg, qsc, cost, viol)
            cur_merit = cand_merit
        if ratio < 0.25:
            radius *= trust.shrink
        elif ratio > 0.75 and step >= 0.9 * radius:
            radius = min(radius * trust.expand, trust.max_radius)
        if step <= trust.step_tol or radius < trust.min_radius:
            converged = True
            break

    if state is None:
        return ("no_solution", None, None, None, None, None,
                math.nan, iters, math.inf)
    pts, pdel, rres, qg, qsc, cost, viol = state
    if viol <= TOL_FEAS:
        verdict = "feasible"
    elif converged:
        verdict = "infeasible"
    else:
        verdict = "no_solution"
    return verdict, pts, pdel, rres, qg, qsc, cost, iters, viol


def slp_acopf(net, spec, objective="min-cost", trust=None):
    """Single-period AC-OPF via SLP.

    Returns (OperatingPoint, dispatch dict). Raises InfeasibleError when
    phase-1 certifies (locally) that no feasible dispatch exists, and
    ConvergenceError when the iteration budget is exhausted.
    """
    if objective not in ("min-cost", "feasibility-only"):
        raise ValidationError(f"unknown objective {objective!r}")
    verdict, pts, pdel, rres, qg, qsc, cost, iters, viol = _solve_slp(
        net, [spec], objective=objective, trust=trust)
    if verdict == "infeasible":
        raise InfeasibleError(
            f"AC-OPF infeasible (residual {viol:.3e} after convergence)")
    if verdict != "feasible":
        raise ConvergenceError("SLP AC-OPF exhausted its iteration budget")
    dispatch = {
        "p_delta": pdel[:, 0], "r": rres[:, 0], "q": qg[:, 0],
        "q_sc": qsc[:, 0], "cost": cost, "iterations": iters,
    }
    return pts[0], dispatch


# ---------------------------------------------------------------------------
# Schedule logic checking and the MTP AC-OPF oracle
# ---------------------------------------------------------------------------

def check_schedule_logic(inst, y, u, w):
    """Verify the binary commitment logic independently of any builder.

    Returns a list of violation strings (empty when the schedule is
    logically valid).
    """
    y = np.asarray(y)
    u = np.asarray(u)
    w = np.asarray(w)
    G, T = y.shape
    problems = []
    for gi, g in enumerate(inst.gens):
        hist = g.init_status

        def u_at(t):   # t may be <= 0
            if t >= 1:
                return u[gi, t - 1]
            # unit started at 1 - hist hours before horizon if initially on
            return 1 if (hist > 0 and t == 1 - hist) else 0

        def w_at(t):
            if t >= 1:
                return w[gi, t - 1]
            return 1 if (hist < 0 and t == 1 + hist) else 0

        y_prev = 1 if g.init_on else 0
        for t in range(1, T + 1):
            yt, ut, wt = y[gi, t - 1], u[gi, t - 1], w[gi, t - 1]
            if yt - y_prev != ut - wt:
                problems.append(f"unit {g.name} t={t}: y transition != u - w")
            if ut and wt:
                problems.append(f"unit {g.name} t={t}: simultaneous start/stop")
            if sum(u_at(tp) for tp in range(t - g.tu + 1, t + 1)) > yt:
                problems.append(f"unit {g.name} t={t}: min-uptime violated")
            if sum(w_at(tp) for tp in range(t - g.td + 1, t + 1)) > 1 - yt:
                problems.append(f"unit {g.name} t={t}: min-downtime violated")
            y_prev = yt
        if g.p_init > g.sd and w[gi, 0]:
            problems.append(f"unit {g.name}: shutdown at t=1 exceeds SD limit")
    return problems


def startup_cost_of(g, t, w_lookup):
    """Startup cost for a unit starting at hour t (1-based), given a
    callable w_lookup(t') valid for t' <= t (pre-horizon included)."""
    downtime = None
    limit = t - 1 + (abs(g.init_status) if not g.init_on else 0) + 1
    for lag in range(1, max(limit, t) + 2):
        if w_lookup(t - lag):
            downtime = lag
            break
    if downtime is None:
        downtime = 10 ** 6  # never observed: coldest tier
    if not g.startup_tiers:
        return 0.0
    cost = g.startup_tiers[0][1]  # hottest tier is the floor
    for hours, tier_cost in g.startup_tiers:
        if downtime >= hours:
            cost = tier_cost
    return cost


def commitment_cost(inst, y, u, w):
    """No-load plus startup cost of a binary schedule (independent of the
    MILP builder's tier encoding)."""
    total = 0.0
    G, T = np.asarray(y).shape
    for gi, g in enumerate(inst.gens):
        def w_at(t, gi=gi, g=g):
            if t >= 1:
                return w[gi][t - 1] if t <= T else 0
            return 1 if (g.init_status < 0 and t == 1 + g.init_status) else 0

        for t in range(1, T + 1):
            if y[gi][t - 1]:
                total += g.no_load_cost
            if u[gi][t - 1]:
                total += startup_cost_of(g, t, w_at)
    return total


def production_cost(inst, p_delta):
    total = 0.0
    for gi, g in enumerate(inst.gens):
        for t in range(inst.horizon if p_delta.ndim > 1 else 1):
            rem = p_delta[gi, t] if p_delta.ndim > 1 else p_delta[gi]
            for width, slope in g.cost_segments:
                take = min(max(rem, 0.0), width)
                total += slope * take
                rem -= take
    return total


def specs_from_schedule(net, inst, y, u, w):
    """Per-period DispatchSpecs with the commitment binaries substituted
    into the generation limit constraints."""
    G, T = np.asarray(y).shape
    specs = []
    for t in range(T):
        gens = []
        for gi, g in enumerate(inst.gens):
            on = bool(y[gi][t])
            span = g.pmax - g.pmin
            if not on:
                gens.append(GenSetting(bus=net.bus_ids.index(g.bus), on=False,
                                       pmin=0.0, cap_a=0.0, cap_b=0.0,
                                       q_lo=0.0, q_hi=0.0,
                                       cost_segments=g.cost_segments))
                continue
            ut = u[gi][t]
            wt_next = w[gi][t + 1] if t + 1 < T else 0
            if g.tu >= 2:
                cap = span - (g.pmax - g.su) * ut - (g.pmax - g.sd) * wt_next
                cap_a = cap_b = max(cap, 0.0)
            else:
                cap_a = max(span - (g.pmax - g.su) * ut, 0.0)
                cap_b = max(span - (g.pmax - g.sd) * wt_next, 0.0)
            gens.append(GenSetting(
                bus=net.bus_ids.index(g.bus), on=True, pmin=g.pmin,
                cap_a=cap_a, cap_b=cap_b, q_lo=g.qmin, q_hi=g.qmax,
                cost_segments=g.cost_segments, no_load_cost=g.no_load_cost))
        conds = [(net.bus_ids.index(c.bus), c.qmin, c.qmax)
                 for c in inst.condensers]
        specs.append(DispatchSpec(
            gens=gens, condensers=conds,
            pd=inst.pd[:, t].copy(), qd=inst.qd[:, t].copy(),
            reserve=float(inst.reserve[t])))
    return specs


def mtp_acopf_check(net, inst, sched, trust=None):
    """Multi-time-period AC-OPF feasibility oracle for a fixed schedule.

    The schedule's binary logic is checked first; a logic violation is
    rejected with a diagnostic (ValidationError), which is distinct from
    an AC infeasibility verdict.
    """
    y, u, w = sched.y, sched.u, sched.w
    problems = check_schedule_logic(inst, y, u, w)
    if problems:
        raise ValidationError(
            "schedule violates commitment logic: " + "; ".join(problems[:5]))

    specs = specs_from_schedule(net, inst, y, u, w)
    ramps = _Ramps(
        up=np.array([g.ru for g in inst.gens]),
        down=np.array([g.rd for g in inst.gens]),
        p_delta0=np.array([max(g.p_init - g.pmin, 0.0) if g.init_on else 0.0
                           for g in inst.gens]),
    )
    try:
        verdict, pts, pdel, rres, qg, qsc, cost, iters, viol = _solve_slp(
            net, specs, ramps=ramps, objective="min-cost", trust=trust)
    except InfeasibleError:
        return FeasibilityReport(verdict="infeasible", max_violation=math.inf,
                                 objective=math.nan, iterations=0)
    objective = math.nan
    if verdict == "feasible":
        objective = cost + commitment_cost(inst, y, u, w)
    return FeasibilityReport(
        verdict=verdict, max_violation=viol, objective=objective,
        iterations=iters,
        points=pts if verdict == "feasible" else None,
        p_delta=pdel, reserve_r=rres, q=qg)
