"""Training of the compact piecewise-linear power flow surrogate.

The compact model is y = Jstar x + rstar + w2 relu(w1' x + b): a fixed
physics-based affine feedthrough plus a learned single-hidden-layer
correction. A "direct" variant (no feedthrough) is kept as a baseline.
Training uses in-repo mini-batched ADAM with manual backpropagation;
the model is small enough that a learning framework buys nothing.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .jacobian import LinearPFModel


@dataclass
class TrainConfig:
    lr: float = 2.5e-4
    batch: int = 75
    steps: int = 75000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 500

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")


@dataclass
class CompactPWLModel:
    w1: np.ndarray          # (d_in, rho)
    w2: np.ndarray          # (d_out, rho)
    b: np.ndarray           # (rho,)
    linear: LinearPFModel   # Jstar, rstar feedthrough
    mask1: np.ndarray = None  # boolean, False = frozen at zero
    mask2: np.ndarray = None

    def __post_init__(self):
        if self.mask1 is None:
            self.mask1 = np.ones_like(self.w1, dtype=bool)
        if self.mask2 is None:
            self.mask2 = np.ones_like(self.w2, dtype=bool)
        if self.rho < 1:
            raise ValidationError("model needs at least one ReLU")

    @property
    def rho(self):
        return self.w1.shape[1]

    @property
    def d_in(self):
        return self.w1.shape[0]

    @property
    def d_out(self):
        return self.w2.shape[0]

    def preactivation(self, x):
        return np.asarray(x, dtype=float) @ self.w1 + self.b

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(self.preactivation(x), 0.0)
        return self.linear.predict(x) + z @ self.w2.T


@dataclass
class DirectNNModel:
    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray

    @property
    def rho(self):
        return self.w1.shape[1]

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x @ self.w1 + self.b, 0.0)
        return z @ self.w2.T


@dataclass
class ErrorStats:
    """Per-sample and mean 1-norm prediction errors."""
    linear_l1: np.ndarray
    compact_l1: np.ndarray
    direct_l1: np.ndarray = None

    @property
    def mean_linear(self):
        return float(np.mean(self.linear_l1))

    @property
    def mean_compact(self):
        return float(np.mean(self.compact_l1))

    @property
    def mean_direct(self):
        return float(np.mean(self.direct_l1)) if self.direct_l1 is not None else None


class _Adam:
    def __init__(self, shapes, cfg):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, grads):
        c = self.cfg
        self.t += 1
        out = []
        for k, g in enumerate(grads):
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mh = self.m[k] / (1 - c.beta1 ** self.t)
            vh = self.v[k] / (1 - c.beta2 ** self.t)
            out.append(c.lr * mh / (np.sqrt(vh) + c.eps))
        return out


def _train_core(X, R, w1, w2, b, mask1, mask2, cfg):
    """Minimize ||R - relu(X w1 + b) w2'||^2 over mini-batches.

    R is the residual target (Y for the direct model, Y - linear(X) for
    the compact model). Returns trained parameters and the loss curve.
    """
    nsamp = X.shape[0]
    if nsamp == 0:
        raise ValidationError("empty training set")
    batch = min(cfg.batch, nsamp)
    rng = np.random.default_rng(cfg.seed)
    opt = _Adam([w1.shape, w2.shape, b.shape], cfg)
    curve = []
    order = rng.permutation(nsamp)
    pos = 0
    for step in range(cfg.steps):
        if pos + batch > nsamp:
            order = rng.permutation(nsamp)
            pos = 0
        sel = order[pos:pos + batch]
        pos += batch
        Xb, Rb = X[sel], R[sel]

        zhat = Xb @ w1 + b
        act = zhat > 0
        z = np.where(act, zhat, 0.0)
        err = z @ w2.T - Rb
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise ValidationError(f"training diverged (NaN loss at step {step})")
        if step % cfg.log_every == 0:
            curve.append((step, loss))

        g = (2.0 / err.size) * err
        gw2 = g.T @ z
        dz = (g @ w2) * act
        gw1 = Xb.T @ dz
        gb = dz.sum(axis=0)
        gw1 *= mask1
        gw2 *= mask2
        dw1, dw2, db = opt.step([gw1, gw2, gb])
        w1 -= dw1
        w2 -= dw2
        b -= db
        w1 *= mask1
        w2 *= mask2
    # final full-data loss
    z = np.maximum(X @ w1 + b, 0.0)
    curve.append((cfg.steps, float(np.mean((z @ w2.T - R) ** 2))))
    return w1, w2, b, curve


def train_compact(X, Y, lin, rho, cfg, mask1=None, mask2=None, warm=None):
    """Train the compact model on dataset (X, Y) around linear model lin.

    w2 starts at zero so the initial model is exactly the linear model;
    training can only improve on it (in training loss).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    d_in, d_out = lin.d_in, lin.d_out
    if X.shape[0] == 0:
        raise ValidationError("empty training set")
    if X.shape[1] != d_in or Y.shape[1] != d_out:
        raise ValidationError("dataset/linear-model dimension mismatch")
    rng = np.random.default_rng(cfg.seed)
    if warm is not None:
        w1, w2, b = warm.w1.copy(), warm.w2.copy(), warm.b.copy()
        rho = warm.rho
    else:
        w1 = rng.standard_normal((d_in, rho)) / np.sqrt(d_in)
        w2 = np.zeros((d_out, rho))
        b = np.zeros(rho)
    m1 = np.ones_like(w1, dtype=bool) if mask1 is None else mask1
    m2 = np.ones_like(w2, dtype=bool) if mask2 is None else mask2
    R = Y - lin.predict(X)
    base_loss = float(np.mean(R ** 2))
    w1, w2, b, curve = _train_core(X, R, w1 * m1, w2 * m2, b, m1, m2, cfg)
    if curve[-1][1] > base_loss:
        # never return a model worse than the plain linear feedthrough
        w2 = np.zeros_like(w2)
        curve.append((cfg.steps, base_loss))
    model = CompactPWLModel(w1=w1, w2=w2, b=b, linear=lin, mask1=m1, mask2=m2)
    model.training_curve = curve
    return model


def train_direct(X, Y, rho, cfg):
    """Train the direct mapping y = w2 relu(w1' x + b) (no feedthrough)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    d_in, d_out = X.shape[1], Y.shape[1]
    w1 = rng.standard_normal((d_in, rho)) / np.sqrt(d_in)
    w2 = rng.standard_normal((d_out, rho)) / np.sqrt(rho)
    b = np.zeros(rho)
    ones1 = np.ones_like(w1, dtype=bool)
    ones2 = np.ones_like(w2, dtype=bool)
    w1, w2, b, curve = _train_core(X, Y.copy(), w1, w2, b, ones1, ones2, cfg)
    model = DirectNNModel(w1=w1, w2=w2, b=b)
    model.training_curve = curve
    return model


def sparsify_retrain(model, X, Y, target, cfg):
    """Zero the smallest-magnitude fraction `target` of (w1, w2) entries,
    freeze them, and retrain the surviving weights."""
    if not 0.0 <= target < 1.0:
        raise ValidationError("sparsity target must be in [0, 1)")
    mags = np.concatenate([np.abs(model.w1).ravel(), np.abs(model.w2).ravel()])
    k = int(np.floor(target * mags.size))
    if k == 0:
        mask1 = model.mask1.copy()
        mask2 = model.mask2.copy()
    else:
        cutoff = np.partition(mags, k - 1)[k - 1]
        mask1 = model.mask1 & (np.abs(model.w1) > cutoff)
        mask2 = model.mask2 & (np.abs(model.w2) > cutoff)
    warm = replace(model, w1=model.w1 * mask1, w2=model.w2 * mask2,
                   mask1=mask1, mask2=mask2)
    return train_compact(X, Y, model.linear, model.rho, cfg,
                         mask1=mask1, mask2=mask2, warm=warm)


def evaluate_model(compact, X, Y, direct=None):
    """Per-sample L1 errors of the linear, compact, and direct models."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise ValidationError("empty dataset")
    lin_err = np.abs(Y - compact.linear.predict(X)).sum(axis=1)
    pw_err = np.abs(Y - compact.predict(X)).sum(axis=1)
    nn_err = None
    if direct is not None:
        nn_err = np.abs(Y - direct.predict(X)).sum(axis=1)
    return ErrorStats(linear_l1=lin_err, compact_l1=pw_err, direct_l1=nn_err)


def enumerate_activation_patterns(model, sample_inputs):
    """Observed ReLU on/off patterns and their local Jacobians.

    Returns {pattern tuple -> local Jacobian Jstar + w2 diag(pi) w1'}.
    """
    X = np.atleast_2d(np.asarray(sample_inputs, dtype=float))
    act = (X @ model.w1 + model.b) > 0
    out = {}
    for row in act:
        key = tuple(int(v) for v in row)
        if key not in out:
            pi = np.array(key, dtype=float)
            out[key] = model.linear.Jstar + model.w2 @ np.diag(pi) @ model.w1.T
    return out


# ---------------------------------------------------------------------------
# Serialization (JSON round-trips float64 exactly via repr)
# ---------------------------------------------------------------------------

def model_to_json(model, bounds=None):
    doc = {
        "kind": "compact_pwl",
        "rho": model.rho,
        "d_in": model.d_in,
        "d_out": model.d_out,
        "w1": model.w1.tolist(),
        "w2": model.w2.tolist(),
        "b": model.b.tolist(),
        "mask1": model.mask1.astype(int).tolist(),
        "mask2": model.mask2.astype(int).tolist(),
        "Jstar": model.linear.Jstar.tolist(),
        "rstar": model.linear.rstar.tolist(),
        "x0": model.linear.x0.tolist(),
        "net_id": model.linear.net_id,
    }
    if bounds is not None:
        doc["bounds"] = {
            "m_min": bounds.m_min.tolist(),
            "m_max": bounds.m_max.tolist(),
            "status": list(bounds.status),
            "provenance": bounds.provenance,
        }
    return json.dumps(doc)


def model_from_json(text):
    doc = json.loads(text)
    if doc.get("kind") != "compact_pwl":
        raise ValidationError("not a compact PWL model document")
    lin = LinearPFModel(
        Jstar=np.array(doc["Jstar"]), rstar=np.array(doc["rstar"]),
        x0=np.array(doc["x0"]), net_id=doc.get("net_id", ""))
    model = CompactPWLModel(
        w1=np.array(doc["w1"]), w2=np.array(doc["w2"]), b=np.array(doc["b"]),
        linear=lin,
        mask1=np.array(doc["mask1"], dtype=bool),
        mask2=np.array(doc["mask2"], dtype=bool))
    bounds = None
    if "bounds" in doc:
        from .milp_encode import BigMBounds
        bd = doc["bounds"]
        bounds = BigMBounds(m_min=np.array(bd["m_min"]),
                            m_max=np.array(bd["m_max"]),
                            status=tuple(bd["status"]),
                            provenance=bd["provenance"])
    return model, bounds
