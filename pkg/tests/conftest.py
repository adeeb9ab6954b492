import numpy as np
import pytest

from mmhb import games


def fd_grad(game, x, y, rel_step=1e-6):
    """Central finite differences of the payoff value (test oracle)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx = np.zeros_like(x)
    gy = np.zeros_like(y)
    for i in range(len(x)):
        s = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += s
        xm[i] -= s
        gx[i] = (game.value(xp, y) - game.value(xm, y)) / (2 * s)
    for j in range(len(y)):
        s = rel_step * (1.0 + abs(y[j]))
        yp, ym = y.copy(), y.copy()
        yp[j] += s
        ym[j] -= s
        gy[j] = (game.value(x, yp) - game.value(x, ym)) / (2 * s)
    return gx, gy


def fd_second(game, x, y, rel_step=1e-5):
    """Central finite differences of the analytic gradient (test oracle)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = len(x), len(y)
    Hxx = np.zeros((n, n))
    Hxy = np.zeros((n, m))
    Hyy = np.zeros((m, m))
    for i in range(n):
        s = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += s
        xm[i] -= s
        gp = game.grad(xp, y)
        gm = game.grad(xm, y)
        Hxx[:, i] = (gp[0] - gm[0]) / (2 * s)
    for j in range(m):
        s = rel_step * (1.0 + abs(y[j]))
        yp, ym = y.copy(), y.copy()
        yp[j] += s
        ym[j] -= s
        gp = game.grad(x, yp)
        gm = game.grad(x, ym)
        Hxy[:, j] = (gp[0] - gm[0]) / (2 * s)
        Hyy[:, j] = (gp[1] - gm[1]) / (2 * s)
    return Hxx, Hxy, Hyy


def builtin_instances():
    """One instance of every built-in game (bilinear gets a 3x2 matrix too)."""
    rng = np.random.default_rng(1234)
    out = [games.make_builtin(name) for name in games.BUILTIN_GAMES]
    out.append(games.Bilinear(rng.standard_normal((3, 2))))
    out.append(games.random_quadratic(4, 3, 2, 2, 0.5, seed=5))
    return out


@pytest.fixture(scope="session")
def all_games():
    return builtin_instances()
