"""Discrete-time algorithms: heavy-ball GDA (simultaneous and alternating)
and the Adam variant that permits negative first-moment momentum.

Update rules, with gradients gx = df/dx and gy = df/dy:

  simultaneous   x+ = x - h gx(x, y) + beta (x - x_prev)
                 y+ = y + h gy(x, y) + beta (y - y_prev)
  alternating    same x+, but gy is evaluated at (x+, y)

beta = 0 reduces both schemes to plain GDA.  Runs start with zero velocity
(the previous iterate is initialized to the starting point).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrajectory, NonFiniteState

SIM = "sim"
ALT = "alt"
SCHEMES = (SIM, ALT)

DIVERGENCE_NORM = 1e12  # max-norm threshold for the Diverged flag


def _canon_scheme(scheme: str) -> str:
    s = str(scheme).lower()
    if s in ("sim", "simultaneous"):
        return SIM
    if s in ("alt", "alternating"):
        return ALT
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class HBParams:
    """Step size h > 0, momentum beta strictly inside (-1, 1), and scheme."""

    h: float
    beta: float
    scheme: str = SIM

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if not -1.0 < self.beta < 1.0:
            raise ValueError(f"momentum must lie in (-1, 1), got {self.beta}")
        object.__setattr__(self, "scheme", _canon_scheme(self.scheme))


@dataclass(frozen=True)
class AdamParams:
    alpha: float
    beta1: float
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("learning rate must be positive")
        if not -1.0 < self.beta1 < 1.0:
            raise ValueError("beta1 must lie in (-1, 1)")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class Trajectory:
    """Recorded states of a discrete run or an ODE integration.

    steps[i] is the iterate index of row i (t = steps * h for discrete
    runs), x has shape (N, n) and y has shape (N, m).  meta carries scheme,
    parameters, integrator tag, game tag, seed and status flags.
    """

    steps: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    def state(self, i):
        return self.x[i], self.y[i]

    def dist_to_origin(self) -> np.ndarray:
        return np.sqrt((self.x**2).sum(axis=1) + (self.y**2).sum(axis=1))

    def tail(self, fraction: float) -> "Trajectory":
        """Final `fraction` of the recorded states (at least two rows)."""
        k = min(len(self) - 2, int(len(self) * (1.0 - fraction)))
        k = max(k, 0)
        return Trajectory(self.steps[k:], self.t[k:], self.x[k:], self.y[k:], dict(self.meta))

    # ---- CSV + sidecar JSON (columns: index,t,x_0..x_{n-1},y_0..y_{m-1}) ----

    def to_csv(self, path, meta_path=None):
        n, m = self.x.shape[1], self.y.shape[1]
        header = ["index", "t"] + [f"x_{i}" for i in range(n)] + [f"y_{j}" for j in range(m)]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(self)):
                row = [f"{int(self.steps[i])}", f"{self.t[i]:.17g}"]
                row += [f"{v:.17g}" for v in self.x[i]]
                row += [f"{v:.17g}" for v in self.y[i]]
                fh.write(",".join(row) + "\n")
        if meta_path:
            with open(meta_path, "w") as fh:
                json.dump(self.meta, fh, indent=2, default=str)

    @classmethod
    def from_csv(cls, path, meta_path=None) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if header[:2] != ["index", "t"]:
            raise ValueError(f"unexpected trajectory header {header[:2]}")
        if data.size == 0:
            raise EmptyTrajectory(f"{path} holds no states")
        n = sum(1 for c in header if c.startswith("x_"))
        m = sum(1 for c in header if c.startswith("y_"))
        meta = {}
        if meta_path:
            with open(meta_path) as fh:
                meta = json.load(fh)
        return cls(
            steps=data[:, 0].astype(int),
            t=data[:, 1],
            x=data[:, 2 : 2 + n],
            y=data[:, 2 + n : 2 + n + m],
            meta=meta,
        )


def _finite_or_raise(x, y, context):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteState(f"{context} produced a non-finite state")


def step_sim_hb(game, params: HBParams, current, previous):
    """One simultaneous step; both gradients use the old (x, y)."""
    x, y = current
    xp, yp = previous
    gx, gy = game.grad(x, y)
    xn = x - params.h * gx + params.beta * (x - xp)
    yn = y + params.h * gy + params.beta * (y - yp)
    _finite_or_raise(xn, yn, "step_sim_hb")
    return xn, yn


def step_alt_hb(game, params: HBParams, current, previous):
    """One alternating step; the y gradient sees the fresh x."""
    x, y = current
    xp, yp = previous
    gx, _ = game.grad(x, y)
    xn = x - params.h * gx + params.beta * (x - xp)
    _, gy = game.grad(xn, y)
    yn = y + params.h * gy + params.beta * (y - yp)
    _finite_or_raise(xn, yn, "step_alt_hb")
    return xn, yn


def _base_meta(game, kind, seed=None):
    return {
        "game": getattr(game, "tag", "game"),
        "kind": kind,
        "seed": seed,
        "diverged": False,
        "left_domain": False,
    }


def run(game, params: HBParams, x0, y0, steps, record_every=1, seed=None) -> Trajectory:
    """Iterate the scheme from (x0, y0) with zero initial velocity.

    Records every `record_every`-th state (plus the initial one); stops
    early with the Diverged flag once the max-norm exceeds 1e12 or a state
    goes non-finite.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x0, y0 = game.check_point(x0, y0)
    meta = _base_meta(game, "discrete", seed)
    meta.update({"scheme": params.scheme, "h": params.h, "beta": params.beta})

    if game.scalar_form and game.n == 1 and game.m == 1:
        rows = _run_scalar(game, params, float(x0[0]), float(y0[0]), steps, record_every, meta)
        idx = np.array([r[0] for r in rows], dtype=int)
        xs = np.array([[r[1]] for r in rows])
        ys = np.array([[r[2]] for r in rows])
    else:
        idx, xs, ys = _run_array(game, params, x0, y0, steps, record_every, meta)
    t = idx * params.h
    return Trajectory(idx, t, xs, ys, meta)


def _run_scalar(game, params, x, y, steps, every, meta):
    h, b, alt = params.h, params.beta, params.scheme == ALT
    grad = game.grad_s
    in_dom = game.in_domain_s
    xp, yp = x, y
    rows = [(0, x, y)]
    left = not in_dom(x, y)
    for k in range(1, steps + 1):
        gx, gy = grad(x, y)
        xn = x - h * gx + b * (x - xp)
        if alt:
            gy = grad(xn, y)[1]
        yn = y + h * gy + b * (y - yp)
        xp, yp, x, y = x, y, xn, yn
        if not (np.isfinite(x) and np.isfinite(y)) or max(abs(x), abs(y)) > DIVERGENCE_NORM:
            meta["diverged"] = True
            if np.isfinite(x) and np.isfinite(y):
                rows.append((k, x, y))
            break
        left = left or not in_dom(x, y)
        if k % every == 0:
            rows.append((k, x, y))
    meta["left_domain"] = bool(left)
    return rows


def _run_array(game, params, x, y, steps, every, meta):
    h, b, alt = params.h, params.beta, params.scheme == ALT
    xp, yp = x.copy(), y.copy()
    idx = [0]
    xs = [x.copy()]
    ys = [y.copy()]
    left = not game.in_domain(x, y)
    for k in range(1, steps + 1):
        gx, gy = game.grad_impl(x, y)
        xn = x - h * gx + b * (x - xp)
        if alt:
            gy = game.grad_impl(xn, y)[1]
        yn = y + h * gy + b * (y - yp)
        xp, yp, x, y = x, y, xn, yn
        finite = np.all(np.isfinite(x)) and np.all(np.isfinite(y))
        if not finite or max(np.abs(x).max(), np.abs(y).max()) > DIVERGENCE_NORM:
            meta["diverged"] = True
            if finite:
                idx.append(k)
                xs.append(x.copy())
                ys.append(y.copy())
            break
        left = left or not game.in_domain(x, y)
        if k % every == 0:
            idx.append(k)
            xs.append(x.copy())
            ys.append(y.copy())
    meta["left_domain"] = bool(left)
    return np.array(idx, dtype=int), np.array(xs), np.array(ys)


def run_adam(game, adam: AdamParams, scheme, x0, y0, steps, record_every=1, seed=None) -> Trajectory:
    """Adam where the x player descends and the y player ascends.

    Both players keep (m, v) moment accumulators with bias correction; the
    first-moment coefficient may be negative.  Under the alternating scheme
    the y player's gradient is evaluated at the freshly updated x.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x, y = game.check_point(x0, y0)
    alt = _canon_scheme(scheme) == ALT
    mx = np.zeros_like(x)
    vx = np.zeros_like(x)
    my = np.zeros_like(y)
    vy = np.zeros_like(y)
    b1, b2, eps, lr = adam.beta1, adam.beta2, adam.epsilon, adam.alpha

    meta = _base_meta(game, "adam", seed)
    meta.update({"scheme": ALT if alt else SIM, "alpha": lr, "beta1": b1, "beta2": b2})
    idx = [0]
    xs = [x.copy()]
    ys = [y.copy()]
    for k in range(1, steps + 1):
        gx, gy = game.grad_impl(x, y)
        mx = b1 * mx + (1 - b1) * gx
        vx = b2 * vx + (1 - b2) * gx * gx
        mhat = mx / (1 - b1**k)
        vhat = vx / (1 - b2**k)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        if alt:
            gy = game.grad_impl(x, y)[1]
        my = b1 * my + (1 - b1) * gy
        vy = b2 * vy + (1 - b2) * gy * gy
        mhat = my / (1 - b1**k)
        vhat = vy / (1 - b2**k)
        y = y + lr * mhat / (np.sqrt(vhat) + eps)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFiniteState("run_adam produced a non-finite state")
        if max(np.abs(x).max(), np.abs(y).max()) > DIVERGENCE_NORM:
            meta["diverged"] = True
            break
        if k % record_every == 0:
            idx.append(k)
            xs.append(x.copy())
            ys.append(y.copy())
    idx = np.array(idx, dtype=int)
    return Trajectory(idx, idx * lr, np.array(xs), np.array(ys), meta)
