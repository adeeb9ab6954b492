"""Config-driven experiment runner.

    mmhb <simulate|compare-models|heatmap|rates|slopes|optimal-beta|repro>
         --config cfg.json [--out dir] [--jobs N] [--seed S]

Every run is fully determined by the config plus embedded seeds; CSV
outputs are byte-identical across reruns (timestamps live only in the
sidecar meta JSON).  Exit codes: 0 success, 2 config error, 3 assumption
violation, 4 divergence-only result where convergence was requested.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import continuous, discrete, games, regularization, spectral
from .discrete import ALT, SIM, HBParams
from .errors import AssumptionViolated, ConfigError, MMHBError, UnknownExperiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_DIVERGED = 4


# ---------------------------------------------------------------------------
# config parsing

def _need(cfg, key, where="config"):
    if key not in cfg:
        raise ConfigError("missing required field", field=f"{where}.{key}")
    return cfg[key]


def _values(spec, where):
    """Scalar, list, or {"start","stop","count"} linear space."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        for k in ("start", "stop", "count"):
            _need(spec, k, where)
        if int(spec["count"]) < 1:
            raise ConfigError("count must be >= 1", field=f"{where}.count")
        return list(np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["count"])))
    raise ConfigError(f"cannot interpret {spec!r} as value or grid", field=where)


def game_from_config(cfg) -> games.GameModel:
    gcfg = _need(cfg, "game")
    if "builtin" in gcfg:
        name = gcfg["builtin"]
        params = {k: v for k, v in gcfg.items() if k != "builtin"}
        try:
            return games.make_builtin(name, **params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="game.builtin") from exc
    if "quadratic_json" in gcfg:
        try:
            return games.QuadraticGame.load(gcfg["quadratic_json"])
        except OSError as exc:
            raise ConfigError(str(exc), field="game.quadratic_json") from exc
    if "random" in gcfg:
        r = gcfg["random"]
        for k in ("n", "m", "rank_x", "rank_y", "alpha", "seed"):
            _need(r, k, "game.random")
        gen = games.random_quadratic_normalized if r.get("normalized") else games.random_quadratic
        try:
            return gen(r["n"], r["m"], r["rank_x"], r["rank_y"], r["alpha"], r["seed"])
        except (ValueError, MMHBError) as exc:
            raise ConfigError(str(exc), field="game.random") from exc
    raise ConfigError("game must specify builtin, quadratic_json, or random", field="game")


def init_from_config(game, cfg, seed_override=None):
    icfg = cfg.get("init", {})
    if seed_override is not None:
        icfg = {"seed": seed_override}
    if "x0" in icfg or "y0" in icfg:
        x0 = np.asarray(_need(icfg, "x0", "init"), dtype=float)
        y0 = np.asarray(_need(icfg, "y0", "init"), dtype=float)
        return game.check_point(x0, y0)
    seed = icfg.get("seed", 0)
    rng = np.random.default_rng(seed)
    return rng.standard_normal(game.n), rng.standard_normal(game.m)


def _schemes(cfg):
    raw = cfg.get("params", {}).get("scheme", SIM)
    names = raw if isinstance(raw, list) else [raw]
    try:
        return [discrete._canon_scheme(s) for s in names]
    except ValueError as exc:
        raise ConfigError(str(exc), field="params.scheme") from exc


def _steps(cfg):
    steps = _need(cfg, "steps")
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError(f"steps must be a positive integer, got {steps!r}", field="steps")
    return steps


def _hb(h, beta, scheme):
    try:
        return HBParams(h, beta, scheme)
    except ValueError as exc:
        raise ConfigError(str(exc), field="params") from exc


def warmup_steps(h, beta):
    """Steps before the limit model is trusted: ceil(4 ln h / ln |beta|)."""
    if beta == 0.0 or h >= 1.0:
        return 0
    return max(0, math.ceil(4.0 * math.log(h) / math.log(abs(beta))))


def _write_columns(path, header, columns):
    rows = len(columns[0])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _pmap(fn, items, jobs):
    """Run independent sweep points, optionally across threads; output order
    always follows input order."""
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _meta(out_dir, name, payload):
    payload = dict(payload)
    payload["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(Path(out_dir) / name, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    x0, y0 = init_from_config(game, cfg, seed_override)
    steps = _steps(cfg)
    params = cfg.get("params", {})
    hs = _values(_need(params, "h", "params"), "params.h")
    betas = _values(_need(params, "beta", "params"), "params.beta")
    every = int(cfg.get("record_every", 1))
    kind = cfg.get("kind", "discrete")
    if kind not in ("discrete", "ode"):
        raise ConfigError(f"kind must be discrete or ode, got {kind!r}", field="kind")

    cells = [
        (scheme, h, beta) for scheme in _schemes(cfg) for h in hs for beta in betas
    ]

    def one(cell):
        scheme, h, beta = cell
        hb = _hb(h, beta, scheme)
        if kind == "discrete":
            return discrete.run(game, hb, x0, y0, steps, record_every=every)
        spec = continuous.FieldSpec(cfg.get("field", scheme), hb)
        icfg = continuous.IntegratorConfig(dt=h / int(cfg.get("dt_factor", 10)), records=steps)
        return continuous.integrate(game, spec, icfg, x0, y0)

    trajs = _pmap(one, cells, jobs)
    any_converged = False
    for (scheme, h, beta), traj in zip(cells, trajs):
        stem = f"traj_{scheme}_h{h:g}_b{beta:g}"
        traj.to_csv(Path(out_dir) / f"{stem}.csv", Path(out_dir) / f"{stem}.meta.json")
        any_converged = any_converged or not traj.meta["diverged"]
    if cfg.get("require_convergence") and not any_converged:
        return EXIT_DIVERGED
    return EXIT_OK


def _model_distances(game, hb, x0, y0, steps, warmup, dt_factor=10, include_transient=False):
    """Run the algorithm plus its ODE models from matched post-warm-up states.

    Returns (steps array, dict of distance arrays, meta).  The discrete
    trajectory provides the reference; each ODE starts at the discrete
    state reached after `warmup` steps, so the zero-velocity start-up
    transient is excluded from the comparison.
    """
    total = warmup + steps
    traj = discrete.run(game, hb, x0, y0, total)
    if len(traj) <= warmup + 1:
        raise MMHBError("discrete run diverged during warm-up; nothing to compare")
    xw, yw = traj.x[warmup], traj.y[warmup]
    n_rec = len(traj) - 1 - warmup  # available discrete intervals

    icfg = continuous.IntegratorConfig(dt=hb.h / dt_factor, records=n_rec)
    specs = {
        "dist_o3": continuous.FieldSpec(hb.scheme, hb),
        "dist_o2": continuous.FieldSpec("baseline-o2", hb),
    }
    if include_transient:
        specs["dist_transient"] = continuous.FieldSpec(f"transient-{hb.scheme}", hb, n0=warmup)
    dists = {}
    for name, spec in specs.items():
        ode = continuous.integrate(game, spec, icfg, xw, yw)
        k = min(len(ode), n_rec + 1)
        dx = ode.x[:k] - traj.x[warmup : warmup + k]
        dy = ode.y[:k] - traj.y[warmup : warmup + k]
        d = np.sqrt((dx**2).sum(axis=1) + (dy**2).sum(axis=1))
        if k < n_rec + 1:  # ODE diverged first; pad so columns stay rectangular
            d = np.concatenate([d, np.full(n_rec + 1 - k, np.inf)])
        dists[name] = d
    meta = {
        "game": game.tag,
        "scheme": hb.scheme,
        "h": hb.h,
        "beta": hb.beta,
        "warmup": warmup,
        "diverged": traj.meta["diverged"],
    }
    return np.arange(n_rec + 1), dists, meta


def cmd_compare_models(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    x0, y0 = init_from_config(game, cfg, seed_override)
    steps = _steps(cfg)
    params = cfg.get("params", {})
    h = float(_need(params, "h", "params"))
    beta = float(_need(params, "beta", "params"))
    include_tr = bool(cfg.get("include_transient", False))
    for scheme in _schemes(cfg):
        hb = _hb(h, beta, scheme)
        warm = int(cfg.get("warmup", warmup_steps(h, beta)))
        idx, dists, meta = _model_distances(
            game, hb, x0, y0, steps, warm, int(cfg.get("dt_factor", 10)), include_tr
        )
        header = ["step"] + list(dists)
        _write_columns(Path(out_dir) / f"distances_{scheme}.csv", header, [idx] + list(dists.values()))
        _meta(out_dir, f"distances_{scheme}.meta.json", meta)
    return EXIT_OK


def cmd_heatmap(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    params = cfg.get("params", {})
    hs = np.array(_values(_need(params, "h", "params"), "params.h"))
    betas = np.array(_values(_need(params, "beta", "params"), "params.beta"))
    scheme = _schemes(cfg)[0]
    grid = spectral.stability_heatmap(game, hs, betas, scheme, jobs=jobs)
    spectral.heatmap_to_csv(Path(out_dir) / "heatmap.csv", hs, betas, grid)

    # analytic step-size bound overlay, best effort
    J = spectral.jacobian_gf(game, np.zeros(game.n), np.zeros(game.m))
    ev = spectral.eigenvalues(J)
    rows = []
    boundary_error = None
    try:
        for b in betas:
            rows.append((b, spectral.hmax_bound(ev, b)))
    except AssumptionViolated as exc:
        boundary_error = str(exc)
        rows = []
    with open(Path(out_dir) / "boundary.csv", "w") as fh:
        fh.write("beta,hmax\n")
        for b, hm in rows:
            fh.write(f"{b:.17g},{hm:.17g}\n")
    _meta(out_dir, "heatmap.meta.json", {
        "game": game.tag, "scheme": scheme, "boundary_error": boundary_error,
        "h_grid": [float(v) for v in hs], "beta_grid": [float(v) for v in betas],
    })
    return EXIT_OK


def fit_decay_rate(t, d):
    """Least-squares decay rate of log-distance over the final 50%.

    Positive values mean convergence.  Non-finite and zero distances are
    discarded; returns nan if fewer than two usable samples remain.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    k = len(d) // 2
    t, d = t[k:], d[k:]
    good = np.isfinite(d) & (d > 0)
    if good.sum() < 2:
        return float("nan")
    slope = np.polyfit(t[good], np.log(d[good]), 1)[0]
    return float(-slope)


def cmd_rates(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    x0, y0 = init_from_config(game, cfg, seed_override)
    steps = _steps(cfg)
    params = cfg.get("params", {})
    h = float(_need(params, "h", "params"))
    beta = float(_need(params, "beta", "params"))
    every = int(cfg.get("record_every", 1))

    curves = {}
    for scheme in (SIM, ALT):
        traj = discrete.run(game, _hb(h, beta, scheme), x0, y0, steps, record_every=every)
        curves[scheme] = traj
    k = min(len(curves[SIM]), len(curves[ALT]))
    idx = curves[SIM].steps[:k]
    d_sim = curves[SIM].dist_to_origin()[:k]
    d_alt = curves[ALT].dist_to_origin()[:k]
    _write_columns(Path(out_dir) / "rates.csv", ["step", "dist_sim", "dist_alt"], [idx, d_sim, d_alt])

    fits = {
        "rate_sim": fit_decay_rate(idx * h, d_sim),
        "rate_alt": fit_decay_rate(idx * h, d_alt),
        "h": h,
        "beta": beta,
        "diverged_sim": curves[SIM].meta["diverged"],
        "diverged_alt": curves[ALT].meta["diverged"],
    }
    origin = (np.zeros(game.n), np.zeros(game.m))
    g0 = game.grad(*origin)
    stationary = np.hypot(np.linalg.norm(g0[0]), np.linalg.norm(g0[1])) <= 1e-8
    if game.n == game.m and stationary:
        try:
            pred = spectral.alt_rate_prediction(game, h, beta)
            fits["predicted_abscissa_alt"] = float(pred.max())
            ev = spectral.eigenvalues(spectral.jacobian_gf(game, *origin))
            fits["abscissa_sim_model"] = float(spectral.sim_eig_map(ev, h, beta).real.max())
        except MMHBError as exc:
            fits["prediction_error"] = str(exc)
    with open(Path(out_dir) / "rates.json", "w") as fh:
        json.dump(fits, fh, indent=2)
    if cfg.get("require_convergence") and fits["diverged_sim"] and fits["diverged_alt"]:
        return EXIT_DIVERGED
    return EXIT_OK


def _background_grid(game, trajs, path, cells=120):
    """Slope field over the bounding box of the given 2D trajectories."""
    xs = np.concatenate([t.x[:, 0] for t in trajs])
    ys = np.concatenate([t.y[:, 0] for t in trajs])
    pad = 0.1 * max(np.ptp(xs), np.ptp(ys), 1e-6)
    gx = np.linspace(xs.min() - pad, xs.max() + pad, cells)
    gy = np.linspace(ys.min() - pad, ys.max() + pad, cells)
    X, Y = np.meshgrid(gx, gy)
    fx, fy = game.grad_s(X, Y)
    S = np.asarray(fx) ** 2 + np.asarray(fy) ** 2
    with open(path, "w") as fh:
        fh.write("x,y,slope\n")
        for i in range(cells):
            for j in range(cells):
                fh.write(f"{X[i, j]:.17g},{Y[i, j]:.17g},{S[i, j]:.17g}\n")


def cmd_slopes(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    if not (game.scalar_form and game.n == 1 and game.m == 1):
        raise ConfigError("slope sweeps are defined for 2D (1+1 dimensional) games", field="game")
    x0, y0 = init_from_config(game, cfg, seed_override)
    steps = _steps(cfg)
    params = cfg.get("params", {})
    h = float(_need(params, "h", "params"))
    betas = _values(_need(params, "beta", "params"), "params.beta")
    tail = cfg.get("tail")
    every = int(cfg.get("record_every", 1))

    points = [(scheme, beta) for scheme in _schemes(cfg) for beta in betas]
    kept = _pmap(
        lambda p: discrete.run(game, _hb(h, p[1], p[0]), x0, y0, steps, record_every=every),
        points,
        jobs,
    )
    rows = []
    for (scheme, beta), traj in zip(points, kept):
        rep = regularization.avg_slope(game, traj, tail=tail)
        rows.append((beta, scheme, rep.avg_slope))
        steps_arr, running = regularization.cumulative_avg_slope(game, traj)
        regularization.cumulative_to_csv(
            Path(out_dir) / f"cumulative_{scheme}_b{beta:g}.csv", steps_arr, running
        )
    _write_columns(
        Path(out_dir) / "slopes.csv",
        ["beta", "scheme", "avg_slope"],
        [[r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows]],
    )
    _background_grid(game, kept, Path(out_dir) / "background.csv")
    for i, traj in enumerate(kept):
        beta, scheme, _ = rows[i]
        traj.to_csv(Path(out_dir) / f"traj_{scheme}_b{beta:g}.csv")
    _meta(out_dir, "slopes.meta.json", {"game": game.tag, "h": h, "tail": tail})
    return EXIT_OK


def cmd_optimal_beta(cfg, out_dir, jobs=1, seed_override=None):
    game = game_from_config(cfg)
    params = cfg.get("params", {})
    h = float(_need(params, "h", "params"))
    beta = float(params.get("beta", 0.0))
    report = spectral.build_report(game, h, beta)
    with open(Path(out_dir) / "spectral_report.json", "w") as fh:
        fh.write(report.to_json())
    if report.optimal is None or report.hmax is None:
        return EXIT_ASSUMPTION
    return EXIT_OK


# ---------------------------------------------------------------------------
# pinned repro experiments

def _repro_distance_curves(out_dir, jobs):
    runs = [
        ("xy", games.XY(), 0.1, 0.2, 500, (1.0, 1.0)),
        ("octic-saddle", games.OcticSaddle(), 1e-3, -0.5, 10000, (0.5, 0.5)),
        ("forsaken", games.Forsaken(), 1e-3, -0.4, 20000, (0.5, 0.5)),
    ]
    for tag, game, h, beta, steps, init in runs:
        for scheme in (SIM, ALT):
            hb = HBParams(h, beta, scheme)
            warm = warmup_steps(h, beta)
            x0 = np.array([init[0]])
            y0 = np.array([init[1]])
            idx, dists, meta = _model_distances(game, hb, x0, y0, steps, warm)
            header = ["step"] + list(dists)
            _write_columns(
                Path(out_dir) / f"distances_{tag}_{scheme}.csv", header, [idx] + list(dists.values())
            )
            _meta(out_dir, f"distances_{tag}_{scheme}.meta.json", meta)
    return EXIT_OK


def _repro_stability_map(out_dir, jobs):
    cfg = {
        "game": {"random": {"n": 20, "m": 20, "rank_x": 10, "rank_y": 10, "alpha": 1.0, "seed": 7}},
        "params": {
            "h": [float(v) for v in np.geomspace(5e-4, 0.5, 41)],
            "beta": [float(v) for v in np.linspace(-0.9, 0.9, 37)],
            "scheme": SIM,
        },
    }
    return cmd_heatmap(cfg, out_dir, jobs)


def _repro_slope_sweep(out_dir, jobs):
    betas = [-0.5, -0.3, 0.0, 0.3, 0.5]
    sweeps = [
        ("neg-xy2", {"builtin": "neg-xy2"}, 1e-3, 200000, None),
        ("limit-cycle", {"builtin": "limit-cycle"}, 0.02, 20000, 0.5),
    ]
    for tag, gspec, h, steps, tail in sweeps:
        sub = Path(out_dir) / tag
        sub.mkdir(exist_ok=True)
        cfg = {
            "game": gspec,
            "params": {"h": h, "beta": betas, "scheme": [SIM, ALT]},
            "init": {"x0": [1.0], "y0": [1.0]},
            "steps": steps,
            "record_every": 10,
            "tail": tail,
        }
        rc = cmd_slopes(cfg, sub, jobs)
        if rc != EXIT_OK:
            return rc
    return EXIT_OK


def _repro_rate_race(out_dir, jobs):
    cfg = {
        "game": {"random": {"n": 100, "m": 100, "rank_x": 50, "rank_y": 50,
                            "alpha": 0.5, "seed": 7, "normalized": True}},
        "params": {"h": 0.01, "beta": 0.4},
        "init": {"seed": 7},
        "steps": 20000,
        "record_every": 10,
        "require_convergence": True,
    }
    return cmd_rates(cfg, out_dir, jobs)


def _repro_quadratic_race(out_dir, jobs):
    cfg = {
        "game": {"builtin": "scalar-quadratic"},
        "params": {"h": 0.4, "beta": 0.2},
        "init": {"x0": [1.0], "y0": [1.0]},
        "steps": 1000,
    }
    return cmd_rates(cfg, out_dir, jobs)


REPRO_REGISTRY = {
    "distance-curves": _repro_distance_curves,
    "stability-map": _repro_stability_map,
    "slope-sweep": _repro_slope_sweep,
    "rate-race": _repro_rate_race,
    "quadratic-race": _repro_quadratic_race,
}


def cmd_repro(name, out_root, jobs=1):
    if name not in REPRO_REGISTRY:
        raise UnknownExperiment(
            f"unknown experiment {name!r}; registry: {sorted(REPRO_REGISTRY)}"
        )
    out_dir = Path(out_root) / name
    out_dir.mkdir(parents=True, exist_ok=True)
    return REPRO_REGISTRY[name](out_dir, jobs)


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "compare-models": cmd_compare_models,
    "heatmap": cmd_heatmap,
    "rates": cmd_rates,
    "slopes": cmd_slopes,
    "optimal-beta": cmd_optimal_beta,
}


def _resolve_out(args, cfg):
    # MMHB_OUT wins over --out, which wins over the config's own `out`
    out = os.environ.get("MMHB_OUT") or args.out or cfg.get("out") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mmhb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("repro")
    p.add_argument("name")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        if args.command == "repro":
            out = os.environ.get("MMHB_OUT") or args.out or "out"
            return cmd_repro(args.name, out, jobs=args.jobs)
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc), field="config") from exc
        out_dir = _resolve_out(args, cfg)
        return COMMANDS[args.command](cfg, out_dir, jobs=args.jobs, seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnknownExperiment as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolated as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
