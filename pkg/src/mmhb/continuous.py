"""Continuous-time models of the heavy-ball schemes.

The surrogate loss

    F(x, y) = f/(1-beta) + h(1+beta)/(4(1-beta)^3) (|gx|^2 - |gy|^2)

drives the limit fields: the simultaneous model is (dx, dy) =
(-grad_x F, +grad_y F); the alternating model subtracts an extra
h/(2(1-beta)^2) |gx|^2 term from the y player's objective.  The transient
(step-indexed) fields use partial-sum weights gamma_n and delta_n that
converge geometrically to the limit coefficients; their leading factor
follows the (1 - beta^(n+1)) convention.  A second-order baseline drops
every O(h) correction term, and a fixed-step RK4/Euler integrator records
states on the same time grid t_k = k h as the discrete algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete import ALT, DIVERGENCE_NORM, SIM, HBParams, Trajectory, _canon_scheme

FIELD_KINDS = ("sim", "alt", "transient-sim", "transient-alt", "baseline-o2", "gradient-flow")


@dataclass(frozen=True)
class FieldSpec:
    """Which vector field to integrate, with its (h, beta) parameters.

    For the transient kinds, n0 offsets the step index used for the
    interval [t_k, t_{k+1}) (coefficient index = k + n0).
    """

    kind: str
    params: HBParams
    n0: int = 0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}; have {FIELD_KINDS}")
        if self.n0 < 0:
            raise ValueError("n0 must be >= 0")


@dataclass(frozen=True)
class IntegratorConfig:
    """Internal step dt (<= h), method, and the number of h-intervals."""

    dt: float
    records: int
    method: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.records < 1:
            raise ValueError("records must be >= 1")
        if self.method not in ("rk4", "euler"):
            raise ValueError(f"method must be rk4 or euler, got {self.method!r}")


def _limit_coeffs(params):
    h, b = params.h, params.beta
    lead = 1.0 / (1.0 - b)
    c = h * (1.0 + b) / (2.0 * (1.0 - b) ** 3)
    d = h * (3.0 * b - 1.0) / (2.0 * (1.0 - b) ** 3)
    return lead, c, d


def modified_loss(game, params: HBParams, x, y) -> float:
    """Surrogate loss whose gradient field models the discrete scheme."""
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    h, b = params.h, params.beta
    f = game.value_impl(x, y)
    return float(
        f / (1.0 - b)
        + h * (1.0 + b) / (4.0 * (1.0 - b) ** 3) * (gx @ gx - gy @ gy)
    )


def field_sim(game, params: HBParams, x, y):
    """Limit field of the simultaneous scheme: (-grad_x F, +grad_y F)."""
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    Hxx, Hxy, Hyy = game.second_impl(x, y)
    lead, c, _ = _limit_coeffs(params)
    dx = -lead * gx - c * (Hxx @ gx - Hxy @ gy)
    dy = lead * gy + c * (Hxy.T @ gx - Hyy @ gy)
    return dx, dy


def field_alt(game, params: HBParams, x, y):
    """Limit field of the alternating scheme.

    dx agrees with field_sim; in dy the coupling term's coefficient flips
    from h(1+beta)/2(1-beta)^3 to h(3beta-1)/2(1-beta)^3, which crosses
    zero at beta = 1/3.
    """
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    Hxx, Hxy, Hyy = game.second_impl(x, y)
    lead, c, d = _limit_coeffs(params)
    dx = -lead * gx - c * (Hxx @ gx - Hxy @ gy)
    dy = lead * gy - c * (Hyy @ gy) + d * (Hxy.T @ gx)
    return dx, dy


def field_baseline_o2(game, params: HBParams, x, y):
    """Second-order baseline: the limit fields with every correction term
    dropped, i.e. rescaled gradient flow.  On bilinear games its orbits are
    circles, which is exactly the failure the corrected model removes."""
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    lead = 1.0 / (1.0 - params.beta)
    return -lead * gx, lead * gy


def field_gradient_flow(game, x, y):
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    return -gx, gy


def gamma_coeff(beta: float, n: int) -> float:
    """Transient weight of the Hessian-gradient correction term.

    Partial sum over i = 0..n of beta^(n-i) [(1+beta)(1+beta^(2i+1)) -
    4 beta^(i+1)]; equals (1-beta)^2 at n = 0 and tends to
    (1+beta)/(1-beta) as n grows.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0.0
    for i in range(n + 1):
        total += beta ** (n - i) * ((1 + beta) * (1 + beta ** (2 * i + 1)) - 4 * beta ** (i + 1))
    return total


def delta_coeff(beta: float, n: int) -> float:
    """Transient weight of the alternating coupling correction.

    2 sum_{i=0..n} beta^(n-i) (1 - beta^(i+1)) (1 - beta); tends to 2.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0.0
    for i in range(n + 1):
        total += beta ** (n - i) * (1 - beta ** (i + 1)) * (1 - beta)
    return 2.0 * total


def _gamma_closed(beta, n):
    # telescoped form of gamma_coeff; O(1) for the integrator's per-interval use
    return (1 + beta) * (1 - beta ** (2 * n + 2)) / (1 - beta) - 4 * (n + 1) * beta ** (n + 1)


def _delta_closed(beta, n):
    return 2.0 * (1 - beta ** (n + 1)) - 2.0 * (1 - beta) * (n + 1) * beta ** (n + 1)


def _transient_coeffs(params, n):
    h, b = params.h, params.beta
    lead = (1.0 - b ** (n + 1)) / (1.0 - b)
    cn = h * _gamma_closed(b, n) / (2.0 * (1.0 - b) ** 2)
    dn = h * _delta_closed(b, n) / (2.0 * (1.0 - b) ** 2)
    return lead, cn, dn


def field_transient(game, params: HBParams, n: int, scheme, x, y):
    """Step-indexed field valid on [t_n, t_{n+1}).

    Converges to field_sim / field_alt geometrically in n; at beta = 0 it
    equals the limit field for every n.
    """
    x, y = game.check_point(x, y)
    scheme = _canon_scheme(scheme)
    gx, gy = game.grad_impl(x, y)
    Hxx, Hxy, Hyy = game.second_impl(x, y)
    lead, cn, dn = _transient_coeffs(params, n)
    dx = -lead * gx - cn * (Hxx @ gx - Hxy @ gy)
    dy = lead * gy + cn * (Hxy.T @ gx - Hyy @ gy)
    if scheme == ALT:
        dy = dy - dn * (Hxy.T @ gx)
    return dx, dy


def eval_field(game, spec: FieldSpec, x, y, n: int = 0):
    """Evaluate the field named by `spec` at (x, y); n indexes transients."""
    if spec.kind == "sim":
        return field_sim(game, spec.params, x, y)
    if spec.kind == "alt":
        return field_alt(game, spec.params, x, y)
    if spec.kind == "baseline-o2":
        return field_baseline_o2(game, spec.params, x, y)
    if spec.kind == "gradient-flow":
        return field_gradient_flow(game, x, y)
    scheme = SIM if spec.kind == "transient-sim" else ALT
    return field_transient(game, spec.params, n, scheme, x, y)


# ---------------------------------------------------------------------------
# fixed-step integration


def _scalar_field_fn(game, spec):
    """Closure (x, y, n) -> (dx, dy) on floats for 1+1 dim games."""
    grad = game.grad_s
    second = game.second_s
    kind = spec.kind
    params = spec.params
    lead, c, d = _limit_coeffs(params)
    h, b = params.h, params.beta

    if kind == "gradient-flow":
        def f(x, y, n):
            gx, gy = grad(x, y)
            return -gx, gy
        return f

    if kind == "baseline-o2":
        def f(x, y, n):
            gx, gy = grad(x, y)
            return -lead * gx, lead * gy
        return f

    if kind in ("sim", "alt"):
        alt = kind == "alt"

        def f(x, y, n):
            gx, gy = grad(x, y)
            Hxx, Hxy, Hyy = second(x, y)
            dx = -lead * gx - c * (Hxx * gx - Hxy * gy)
            if alt:
                dy = lead * gy - c * Hyy * gy + d * Hxy * gx
            else:
                dy = lead * gy + c * (Hxy * gx - Hyy * gy)
            return dx, dy
        return f

    alt = kind == "transient-alt"

    def f(x, y, n):
        gx, gy = grad(x, y)
        Hxx, Hxy, Hyy = second(x, y)
        lead_n, cn, dn = _transient_coeffs(params, n)
        dx = -lead_n * gx - cn * (Hxx * gx - Hxy * gy)
        dy = lead_n * gy + cn * (Hxy * gx - Hyy * gy)
        if alt:
            dy -= dn * Hxy * gx
        return dx, dy
    return f


def _array_field_fn(game, spec):
    def f(x, y, n):
        return eval_field(game, spec, x, y, n)
    return f


def integrate(game, spec: FieldSpec, cfg: IntegratorConfig, x0, y0, seed=None) -> Trajectory:
    """Integrate `spec` recording states at every multiple of h.

    The internal step is h / round(h / dt), so micro-steps tile each
    recording interval exactly and ODE samples align with the discrete
    iterates.  Transient fields switch their step index at each node
    t_k = k h.  Divergence is flagged as in discrete runs.
    """
    h = spec.params.h
    if cfg.dt > h * (1 + 1e-12):
        raise ValueError(f"dt={cfg.dt} must not exceed the model step h={h}")
    substeps = max(1, round(h / cfg.dt))
    dt = h / substeps
    x0, y0 = game.check_point(x0, y0)

    meta = {
        "game": getattr(game, "tag", "game"),
        "kind": "ode",
        "seed": seed,
        "diverged": False,
        "left_domain": False,
        "scheme": spec.kind,
        "h": h,
        "beta": spec.params.beta,
        "integrator": {
            "method": cfg.method,
            "dt": dt,
            "field": spec.kind,
            "n0": spec.n0,
            "n_convention": "lead factor (1 - beta^(n+1))",
        },
    }

    scalar = game.scalar_form and game.n == 1 and game.m == 1
    fld = _scalar_field_fn(game, spec) if scalar else _array_field_fn(game, spec)
    rk4 = cfg.method == "rk4"

    if scalar:
        x, y = float(x0[0]), float(y0[0])
        rows = [(0, x, y)]
        for k in range(cfg.records):
            n = k + spec.n0
            for _ in range(substeps):
                if rk4:
                    ax, ay = fld(x, y, n)
                    bx, by = fld(x + 0.5 * dt * ax, y + 0.5 * dt * ay, n)
                    cx, cy = fld(x + 0.5 * dt * bx, y + 0.5 * dt * by, n)
                    ex, ey = fld(x + dt * cx, y + dt * cy, n)
                    x += dt / 6.0 * (ax + 2 * bx + 2 * cx + ex)
                    y += dt / 6.0 * (ay + 2 * by + 2 * cy + ey)
                else:
                    ax, ay = fld(x, y, n)
                    x += dt * ax
                    y += dt * ay
            if not (np.isfinite(x) and np.isfinite(y)) or max(abs(x), abs(y)) > DIVERGENCE_NORM:
                meta["diverged"] = True
                break
            rows.append((k + 1, x, y))
        idx = np.array([r[0] for r in rows], dtype=int)
        xs = np.array([[r[1]] for r in rows])
        ys = np.array([[r[2]] for r in rows])
    else:
        x, y = x0.copy(), y0.copy()
        idx_l = [0]
        xs_l = [x.copy()]
        ys_l = [y.copy()]
        for k in range(cfg.records):
            n = k + spec.n0
            for _ in range(substeps):
                if rk4:
                    ax, ay = fld(x, y, n)
                    bx, by = fld(x + 0.5 * dt * ax, y + 0.5 * dt * ay, n)
                    cx, cy = fld(x + 0.5 * dt * bx, y + 0.5 * dt * by, n)
                    ex, ey = fld(x + dt * cx, y + dt * cy, n)
                    x = x + dt / 6.0 * (ax + 2 * bx + 2 * cx + ex)
                    y = y + dt / 6.0 * (ay + 2 * by + 2 * cy + ey)
                else:
                    ax, ay = fld(x, y, n)
                    x = x + dt * ax
                    y = y + dt * ay
            finite = np.all(np.isfinite(x)) and np.all(np.isfinite(y))
            if not finite or max(np.abs(x).max(), np.abs(y).max()) > DIVERGENCE_NORM:
                meta["diverged"] = True
                break
            idx_l.append(k + 1)
            xs_l.append(x.copy())
            ys_l.append(y.copy())
        idx = np.array(idx_l, dtype=int)
        xs = np.array(xs_l)
        ys = np.array(ys_l)

    return Trajectory(idx, idx * h, xs, ys, meta)
