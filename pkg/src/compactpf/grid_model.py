"""Network matrices and exact evaluation of the AC power flow map.

The map of interest is f(v, theta) -> (p_inj, q_inj, s_ft, s_tf):
nodal injections from the bus admittance matrix and bidirectional
apparent line flows from the branch flow matrices. Branches use the
standard pi-model with off-nominal tap ratio and phase shift folded
into the flow matrices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Network:
    n: int
    m: int
    Yb: np.ndarray     # (n, n) complex nodal admittance
    Yft: np.ndarray    # (m, n) complex from-side flow matrix
    Ytf: np.ndarray    # (m, n) complex to-side flow matrix
    E: np.ndarray      # (m, n) signed incidence (+1 from, -1 to)
    E1: np.ndarray     # (m, n) sending-end selector
    E2: np.ndarray     # (m, n) receiving-end selector
    gsh: np.ndarray    # (n,) shunt conductance p.u.
    bsh: np.ndarray    # (n,) shunt susceptance p.u.
    smax: np.ndarray   # (m,) apparent flow limits p.u.
    vmin: np.ndarray   # (n,)
    vmax: np.ndarray   # (n,)
    theta_min: np.ndarray  # (m,) angle-difference bounds, rad
    theta_max: np.ndarray
    branch_r: np.ndarray   # (m,) series resistance
    branch_x: np.ndarray   # (m,) series reactance
    ref: int           # reference bus position
    bus_ids: tuple     # external ids by position
    gen_bus: tuple     # generator bus positions, case order

    @property
    def d_in(self):
        """Surrogate input dimension: v plus theta without the ref angle."""
        return 2 * self.n - 1

    @property
    def d_out(self):
        return 2 * self.n + 2 * self.m


@dataclass(frozen=True)
class OperatingPoint:
    v: np.ndarray
    theta: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    p_ft: np.ndarray
    q_ft: np.ndarray
    p_tf: np.ndarray
    q_tf: np.ndarray
    s_ft: np.ndarray
    s_tf: np.ndarray


def build_network(case):
    """Assemble admittance, flow, and incidence matrices from a RawCase."""
    n, m = case.n, case.m
    idx = case.bus_index()

    E = np.zeros((m, n))
    yff = np.zeros(m, dtype=complex)
    yft = np.zeros(m, dtype=complex)
    ytf = np.zeros(m, dtype=complex)
    ytt = np.zeros(m, dtype=complex)
    for k, br in enumerate(case.branches):
        i, j = idx[br.f], idx[br.t]
        E[k, i] = 1.0
        E[k, j] = -1.0
        ys = 1.0 / complex(br.r, br.x)
        bc = 1j * br.b / 2.0
        tap = br.ratio * np.exp(1j * br.shift)
        ytt[k] = ys + bc
        yff[k] = (ys + bc) / (br.ratio ** 2)
        yft[k] = -ys / np.conj(tap)
        ytf[k] = -ys / tap

    E1 = (np.abs(E) + E) / 2.0
    E2 = (np.abs(E) - E) / 2.0
    Yft = yff[:, None] * E1 + yft[:, None] * E2
    Ytf = ytf[:, None] * E1 + ytt[:, None] * E2
    gsh = np.array([b.gs for b in case.buses])
    bsh = np.array([b.bs for b in case.buses])
    Yb = E1.T @ Yft + E2.T @ Ytf + np.diag(gsh + 1j * bsh)

    _check_connected(E, n)

    from .case_ingest import REF
    ref = next(i for i, b in enumerate(case.buses) if b.btype == REF)
    return Network(
        n=n, m=m, Yb=Yb, Yft=Yft, Ytf=Ytf, E=E, E1=E1, E2=E2,
        gsh=gsh, bsh=bsh,
        smax=np.array([br.rate_a for br in case.branches]),
        vmin=np.array([b.vmin for b in case.buses]),
        vmax=np.array([b.vmax for b in case.buses]),
        theta_min=np.array([br.ang_min for br in case.branches]),
        theta_max=np.array([br.ang_max for br in case.branches]),
        branch_r=np.array([br.r for br in case.branches]),
        branch_x=np.array([br.x for br in case.branches]),
        ref=ref,
        bus_ids=tuple(b.id for b in case.buses),
        gen_bus=tuple(idx[g.bus] for g in case.gens),
    )


def _check_connected(E, n):
    adj = [[] for _ in range(n)]
    for row in E:
        i = int(np.argmax(row))
        j = int(np.argmin(row))
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != n:
        island = sorted(set(range(n)) - seen)
        raise ValidationError(f"network is disconnected; island buses {island}")


def eval_power_flow(net, v, theta):
    """Exact AC power flow evaluation at (v, theta)."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if v.shape != (net.n,) or theta.shape != (net.n,):
        raise ValidationError("v/theta dimension mismatch")
    if np.any(v <= 0):
        raise ValidationError("voltage magnitudes must be positive")

    V = v * np.exp(1j * theta)
    s_inj = V * np.conj(net.Yb @ V)
    sf = (net.E1 @ V) * np.conj(net.Yft @ V)
    st = (net.E2 @ V) * np.conj(net.Ytf @ V)
    return OperatingPoint(
        v=v, theta=theta,
        p_inj=s_inj.real, q_inj=s_inj.imag,
        p_ft=sf.real, q_ft=sf.imag,
        p_tf=st.real, q_tf=st.imag,
        s_ft=np.abs(sf), s_tf=np.abs(st),
    )


def pack_input(op, net):
    """Stack (v, theta) dropping the reference-bus angle: length 2n-1."""
    theta = np.delete(op.theta, net.ref)
    return np.concatenate([op.v, theta])


def pack_output(op):
    """Stack (p_inj, q_inj, s_ft, s_tf): length 2n+2m."""
    return np.concatenate([op.p_inj, op.q_inj, op.s_ft, op.s_tf])


def unpack_input(x, net):
    """Inverse of pack_input; the reference angle is restored as 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d_in,):
        raise ValidationError(f"expected input of length {net.d_in}")
    v = x[:net.n]
    theta = np.insert(x[net.n:], net.ref, 0.0)
    return v, theta


def eval_at_input(net, x):
    """Evaluate the packed map x -> y_pf."""
    v, theta = unpack_input(x, net)
    return pack_output(eval_power_flow(net, v, theta))
