"""Acceptance suite: one test per acceptance criterion, each printing a
single PASS/FAIL line with its measured quantities (run with -s to see
them on success).  Tolerances are pinned here, not configurable."""

import math
import time

import numpy as np

from mmhb import continuous, discrete, games, regularization, spectral
from mmhb.continuous import FieldSpec, IntegratorConfig
from mmhb.discrete import ALT, SIM, AdamParams, HBParams

from conftest import fd_grad, fd_second, builtin_instances


def report(name, ok, detail, elapsed, budget):
    status = "PASS" if ok and elapsed < budget else "FAIL"
    print(f"[{status}] {name}: {detail} ({elapsed:.2f}s / budget {budget:.0f}s)")
    assert ok, f"{name}: {detail}"
    assert elapsed < budget, f"{name}: runtime {elapsed:.2f}s exceeded {budget}s"


def sorted_eigs(ev):
    return np.sort_complex(np.asarray(ev, dtype=complex))


# ---------------------------------------------------------------------------
# 1. bilinear closed-form spectra


def test_c1_bilinear_spectra():
    t0 = time.perf_counter()
    worst = 0.0
    worst_sim_re = np.inf
    for rho in (0.25, 1.0, 4.0):
        bil = games.Bilinear([[math.sqrt(rho)]])
        J = spectral.jacobian_gf(bil, [0], [0])
        for h in (0.01, 0.1, 0.5):
            for beta in (-0.5, 0.0, 0.5):
                lam_s = np.array(spectral.bilinear_eigs(rho, h, beta, SIM))
                ev_s = spectral.eigenvalues(spectral.jacobian_sim(J, h, beta))
                worst = max(worst, np.abs(sorted_eigs(lam_s) - sorted_eigs(ev_s)).max())
                worst_sim_re = min(worst_sim_re, ev_s.real.min())

                lam_a = np.array(spectral.bilinear_eigs(rho, h, beta, ALT))
                ev_a = spectral.eigenvalues(spectral.jacobian_alt(bil, [0], [0], h, beta))
                if abs(lam_a[0] - lam_a[1]) > 1e-6:
                    worst = max(worst, np.abs(sorted_eigs(lam_a) - sorted_eigs(ev_a)).max())
                else:
                    # defective double eigenvalue (one grid cell): the dense
                    # solver's split is symmetric, so compare the pair mean,
                    # which is exact
                    worst = max(worst, abs(lam_a.mean() - ev_a.mean()))
    lam_neg = spectral.bilinear_eigs(1.0, 0.01, -0.5, ALT)
    neg_ok = lam_neg[0].real < 0 and lam_neg[1].real < 0
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and worst_sim_re >= -1e-12 and neg_ok
    report(
        "bilinear-spectra",
        ok,
        f"closed-form vs solver max err {worst:.2e}, min sim Re {worst_sim_re:.2e}, "
        f"alt(beta=-0.5, h=0.01) Re {lam_neg[0].real:.2e}",
        elapsed,
        1.0,
    )


# ---------------------------------------------------------------------------
# 2. O(h^3) model fidelity


def _run_scalar_pair(game, scheme, h, beta, x0, y0, steps):
    tr = discrete.run(game, HBParams(h, beta, scheme), [x0], [y0], steps)
    return tr


def test_c2_model_fidelity():
    t0 = time.perf_counter()
    g = games.make_builtin("octic-saddle")
    beta = -0.5
    x0 = y0 = 0.5
    slopes = {}
    for scheme in (SIM, ALT):
        hs = [4e-3, 2e-3, 1e-3]
        devs = []
        for h in hs:
            n0 = math.ceil(4 * math.log(h) / math.log(abs(beta)))
            tr = _run_scalar_pair(g, scheme, h, beta, x0, y0, n0 + 1)
            spec = FieldSpec(scheme, HBParams(h, beta, scheme))
            cfg = IntegratorConfig(dt=h / 10, records=1)
            ode = continuous.integrate(g, spec, cfg, tr.x[n0], tr.y[n0])
            dev = math.hypot(ode.x[1, 0] - tr.x[n0 + 1, 0], ode.y[1, 0] - tr.y[n0 + 1, 0])
            devs.append(dev)
        slopes[scheme] = float(np.polyfit(np.log(hs), np.log(devs), 1)[0])

    h = 1e-3
    steps = 10000
    terminal = {}
    for scheme in (SIM, ALT):
        tr = _run_scalar_pair(g, scheme, h, beta, x0, y0, steps)
        spec = FieldSpec(scheme, HBParams(h, beta, scheme))
        ode = continuous.integrate(g, spec, IntegratorConfig(dt=h / 10, records=steps), [x0], [y0])
        terminal[scheme] = math.hypot(
            ode.x[-1, 0] - tr.x[-1, 0], ode.y[-1, 0] - tr.y[-1, 0]
        )
    elapsed = time.perf_counter() - t0
    ok = all(s >= 2.5 for s in slopes.values()) and all(d <= 1e-3 for d in terminal.values())
    report(
        "model-fidelity",
        ok,
        f"one-step log-log slopes sim {slopes[SIM]:.2f} / alt {slopes[ALT]:.2f} (>= 2.5), "
        f"terminal dist sim {terminal[SIM]:.1e} / alt {terminal[ALT]:.1e} (<= 1e-3)",
        elapsed,
        120.0,
    )


# ---------------------------------------------------------------------------
# 3. step-size bound and its monotone boundary


def _acceptance_games():
    out = []
    for seed in range(10):
        g = games.random_quadratic(20, 20, 10, 10, 1.0, seed=seed)
        ev = spectral.eigenvalues(spectral.jacobian_gf(g, np.zeros(20), np.zeros(20)))
        out.append((seed, g, ev))
    return out


def _sign_change_h(ev, beta, hi=10.0):
    lo = 1e-6
    if spectral.sim_eig_map(ev, hi, beta).real.max() < 0:
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if spectral.sim_eig_map(ev, mid, beta).real.max() < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_c3_step_size_bound():
    t0 = time.perf_counter()
    betas = (-0.5, 0.0, 0.5)
    stable_ok = True
    mono_ok = True
    generic_ok = True
    worst_absc = -np.inf
    for seed, g, ev in _acceptance_games():
        generic_ok &= bool(np.all(ev.real < -1e-12))
        scs = []
        for beta in betas:
            hm = spectral.hmax_bound(ev, beta)
            absc = spectral.sim_eig_map(ev, 0.9 * hm, beta).real.max()
            worst_absc = max(worst_absc, absc)
            stable_ok &= absc < 0
            scs.append(_sign_change_h(ev, beta))
        mono_ok &= scs[0] >= scs[1] >= scs[2]
    elapsed = time.perf_counter() - t0
    ok = stable_ok and mono_ok and generic_ok
    report(
        "step-size-bound",
        ok,
        f"10 seeded games: worst abscissa at 0.9*hmax {worst_absc:.2e} (< 0), "
        f"sign-change h non-increasing in beta: {mono_ok}",
        elapsed,
        60.0,
    )


# ---------------------------------------------------------------------------
# 4. positive optimal momentum


def test_c4_optimal_momentum():
    t0 = time.perf_counter()
    positive_ok = True
    match_ok = True
    checked = 0
    for seed, g, ev in _acceptance_games():
        D = ev.imag**2 - ev.real**2
        mask = D > 0
        h = 0.5 * float(np.min(np.abs(ev.real[mask]) / (2.0 * D[mask])))
        res = spectral.optimal_beta(ev, h)
        positive_ok &= res.global_beta > 0
        if res.binding_unique:
            closed = spectral.optimal_beta_per_eig(res.binding, h)
            match_ok &= abs(closed - res.global_beta) < 5e-3
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = positive_ok and match_ok and checked > 0
    report(
        "optimal-momentum",
        ok,
        f"grid optimum positive on 10 games; closed form matched within 5e-3 "
        f"on {checked} unique-binding games",
        elapsed,
        60.0,
    )


# ---------------------------------------------------------------------------
# 5. alternating-update speedup prediction


def test_c5_alt_speedup_prediction():
    t0 = time.perf_counter()
    cases = {
        "2d": games.QuadraticGame([[0.05]], [[-0.05]], [[1.0]]),
        "20d": games.random_quadratic_normalized(10, 10, 10, 10, 0.05, seed=42),
    }
    mono_ok = True
    rel_ok = True
    worst_rel = 0.0
    for tag, g in cases.items():
        zero = (np.zeros(g.n), np.zeros(g.m))
        for beta in (0.0, 0.4):
            errs = []
            for h in (1e-3, 5e-4, 2.5e-4):
                pred = spectral.alt_rate_prediction(g, h, beta).max()
                exact = spectral.spectral_abscissa(
                    spectral.eigenvalues(spectral.jacobian_alt(g, *zero, h, beta))
                )
                errs.append(abs(pred - exact))
                if h == 1e-3:
                    rel = abs(pred - exact) / abs(exact)
                    worst_rel = max(worst_rel, rel)
                    rel_ok &= rel < 0.10
            mono_ok &= errs[0] > errs[1] > errs[2]
    elapsed = time.perf_counter() - t0
    ok = mono_ok and rel_ok
    report(
        "alt-speedup-prediction",
        ok,
        f"error shrinks monotonically as h halves: {mono_ok}; worst relative "
        f"error at h=1e-3: {worst_rel:.1%} (< 10%)",
        elapsed,
        10.0,
    )


# ---------------------------------------------------------------------------
# 6. potential-heavy counterexample: simultaneous wins


def test_c6_sim_beats_alt_counterexample():
    t0 = time.perf_counter()
    g = games.make_builtin("scalar-quadratic", a=2.537, b=0.0003, c=0.801)
    dist = {}
    for scheme in (SIM, ALT):
        tr = discrete.run(g, HBParams(0.4, 0.2, scheme), [1.0], [1.0], steps=1000)
        dist[scheme] = tr.dist_to_origin()[-1]
    elapsed = time.perf_counter() - t0
    ok = dist[SIM] < dist[ALT]
    report(
        "sim-beats-alt",
        ok,
        f"distance at step 1000: sim {dist[SIM]:.2e} < alt {dist[ALT]:.2e}",
        elapsed,
        1.0,
    )


# ---------------------------------------------------------------------------
# 7. high-dimensional rate race


def test_c7_rate_race():
    t0 = time.perf_counter()
    g = games.random_quadratic_normalized(100, 100, 50, 50, 0.5, seed=7)
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal(100)
    y0 = rng.standard_normal(100)
    rates = {}
    for scheme in (SIM, ALT):
        tr = discrete.run(g, HBParams(0.01, 0.4, scheme), x0, y0, steps=20000, record_every=10)
        d = tr.dist_to_origin()
        from mmhb.cli import fit_decay_rate

        rates[scheme] = fit_decay_rate(tr.t, d)
    elapsed = time.perf_counter() - t0
    ok = rates[ALT] > rates[SIM] > 0
    report(
        "rate-race",
        ok,
        f"fitted decay rates: alt {rates[ALT]:.4f} > sim {rates[SIM]:.4f}",
        elapsed,
        30.0,
    )


# ---------------------------------------------------------------------------
# 8. implicit regularization sweeps


def _nondecreasing(row, rel_tol=0.02, max_violations=1):
    floor = 1e-12 * max(row)
    vals = [0.0 if v < floor else v for v in row]
    bad = 0
    for a, b in zip(vals, vals[1:]):
        if a > b:
            if b == 0.0 or (a - b) / a > rel_tol:
                return False
            bad += 1
    return bad <= max_violations


def test_c8_implicit_regularization():
    t0 = time.perf_counter()
    betas = [-0.5, -0.3, 0.0, 0.3, 0.5]
    sweeps = [
        ("neg-xy2", games.make_builtin("neg-xy2"), 1e-3, 200000, None),
        ("limit-cycle", games.make_builtin("limit-cycle"), 0.02, 20000, 0.5),
    ]
    ok = True
    details = []
    for tag, g, h, steps, tail in sweeps:
        rows = {}
        for scheme in (SIM, ALT):
            row = []
            for beta in betas:
                tr = discrete.run(g, HBParams(h, beta, scheme), [1.0], [1.0], steps=steps)
                row.append(regularization.avg_slope(g, tr, tail=tail).avg_slope)
            rows[scheme] = row
            mono = _nondecreasing(row)
            ok &= mono
            details.append(f"{tag}/{scheme} mono={mono}")
        floor = 1e-12 * max(max(rows[SIM]), max(rows[ALT]))
        for a, s in zip(rows[ALT], rows[SIM]):
            if a > floor:
                ok &= a <= s * 1.05
    elapsed = time.perf_counter() - t0
    report("implicit-regularization", ok, "; ".join(details) + "; alt <= sim + 5%", elapsed, 300.0)


# ---------------------------------------------------------------------------
# 9. always-on property suites


def test_c9a_derivative_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst_g = worst_h = 0.0
    for game in builtin_instances():
        for _ in range(100):
            x = rng.uniform(-1.2, 1.2, game.n)
            y = rng.uniform(-1.2, 1.2, game.m)
            gx, gy = game.grad(x, y)
            fx, fy = fd_grad(game, x, y)
            scale = 1.0 + np.hypot(np.linalg.norm(gx), np.linalg.norm(gy))
            worst_g = max(worst_g, np.hypot(np.linalg.norm(gx - fx), np.linalg.norm(gy - fy)) / scale)
        for _ in range(20):
            x = rng.uniform(-1.2, 1.2, game.n)
            y = rng.uniform(-1.2, 1.2, game.m)
            Hxx, Hxy, Hyy = game.second_derivs(x, y)
            fxx, fxy, fyy = fd_second(game, x, y)
            scale = 1.0 + max(np.abs(Hxx).max(), np.abs(Hxy).max(), np.abs(Hyy).max())
            err = max(np.abs(Hxx - fxx).max(), np.abs(Hxy - fxy).max(), np.abs(Hyy - fyy).max())
            worst_h = max(worst_h, err / scale)
    elapsed = time.perf_counter() - t0
    ok = worst_g < 1e-6 and worst_h < 1e-5
    report(
        "property-derivatives",
        ok,
        f"grad vs FD {worst_g:.1e} (< 1e-6), hessian vs FD {worst_h:.1e} (< 1e-5)",
        elapsed,
        120.0,
    )


def test_c9b_spectral_mapping():
    t0 = time.perf_counter()
    rng = np.random.default_rng(98)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 41))
        J = rng.standard_normal((d, d))
        h = float(rng.uniform(0.01, 0.5))
        b = float(rng.uniform(-0.9, 0.9))
        direct = sorted_eigs(spectral.eigenvalues(spectral.jacobian_sim(J, h, b)))
        mapped = sorted_eigs(spectral.sim_eig_map(spectral.eigenvalues(J), h, b))
        worst = max(worst, np.abs(direct - mapped).max())
    elapsed = time.perf_counter() - t0
    report(
        "property-spectral-mapping",
        worst < 1e-8,
        f"polynomial image vs direct spectrum, max err {worst:.1e} (< 1e-8)",
        elapsed,
        60.0,
    )


def test_c9c_transient_weight_limits():
    t0 = time.perf_counter()
    worst_g = worst_d = 0.0
    for beta in (-0.7, -0.5, -0.3, 0.0, 0.3, 0.5, 0.7):
        worst_g = max(
            worst_g, abs(continuous.gamma_coeff(beta, 200) - (1 + beta) / (1 - beta))
        )
        worst_d = max(worst_d, abs(continuous.delta_coeff(beta, 200) - 2.0))
    elapsed = time.perf_counter() - t0
    ok = worst_g < 1e-10 and worst_d < 1e-10
    report(
        "property-transient-limits",
        ok,
        f"weights at n=200: gamma gap {worst_g:.1e}, delta gap {worst_d:.1e} (< 1e-10)",
        elapsed,
        10.0,
    )


def test_c9d_minimization_stability_boundary():
    t0 = time.perf_counter()
    lam = 1.0
    ok = True
    for a in np.linspace(0.1, 4.0, 20):
        for b in np.linspace(0.025, 0.975, 20):
            if abs(a * lam - (2 + 2 * b)) < 0.05:
                continue
            w, wp = 1.0, 1.0
            for _ in range(2000):
                w, wp = w - a * lam * w + b * (w - wp), w
                if abs(w) > 1e6:
                    break
            ok &= (abs(w) < 1e-6) == spectral.min_hb_stability(a, b, lam)
    elapsed = time.perf_counter() - t0
    report(
        "property-minimization-boundary",
        ok,
        "discrete heavy ball on 1d quadratic converges iff 0 < a*lam < 2+2b "
        "(20x20 grid, 0.05 margin)",
        elapsed,
        60.0,
    )


# ---------------------------------------------------------------------------
# 10. Adam with negative momentum stays bounded (GAN-scale runs are out of
# scope by design; no criterion references them)


def test_c10_adam_negative_momentum_bounded():
    t0 = time.perf_counter()
    g = games.make_builtin("limit-cycle")
    tr = discrete.run_adam(
        g, AdamParams(1e-3, -0.5), ALT, [1.0], [1.0], steps=100000, record_every=1000
    )
    elapsed = time.perf_counter() - t0
    ok = (not tr.meta["diverged"]) and bool(np.isfinite(tr.x).all() and np.isfinite(tr.y).all())
    report(
        "adam-negative-momentum",
        ok,
        f"100000 steps on the cycle game, max |state| "
        f"{max(np.abs(tr.x).max(), np.abs(tr.y).max()):.2f}, no non-finite state",
        elapsed,
        60.0,
    )
