"""Payoff functions for two-player min-max games.

Every game exposes the payoff value, both gradients and all second-derivative
blocks at a point, with hand-derived closed forms (finite differences are a
test oracle only).  Points are numpy vectors (x in R^n, y in R^m); the 1+1
dimensional built-ins additionally expose scalar fast paths used by the hot
simulation loops.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DimensionMismatch, InvalidRank


def _vec(v, dim, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.shape != (dim,):
        raise DimensionMismatch(f"{name} has shape {a.shape}, expected ({dim},)")
    if not np.isfinite(a).all():
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return a


class GameModel:
    """Base class: value, gradients and second derivatives of f(x, y).

    Subclasses set n, m and implement the *_impl methods on validated numpy
    vectors.  ``scalar_form`` marks 1+1 dimensional games whose ``*_s``
    methods work directly on floats.
    """

    n: int
    m: int
    scalar_form = False
    tag = "game"

    def check_point(self, x, y):
        return _vec(x, self.n, "x"), _vec(y, self.m, "y")

    def value(self, x, y) -> float:
        x, y = self.check_point(x, y)
        return float(self.value_impl(x, y))

    def grad(self, x, y):
        x, y = self.check_point(x, y)
        return self.grad_impl(x, y)

    def second_derivs(self, x, y):
        """Return (Hxx, Hxy, Hyy); the yx block is always taken as Hxy^T."""
        x, y = self.check_point(x, y)
        return self.second_impl(x, y)

    def in_domain(self, x, y) -> bool:
        return True

    def in_domain_s(self, x, y) -> bool:
        """Scalar-path domain check; mirrors in_domain for 1+1 dim games."""
        return True


class Scalar2DGame(GameModel):
    """1+1 dimensional game defined through scalar closed forms."""

    n = 1
    m = 1
    scalar_form = True

    # scalar API (floats in, floats out)
    def value_s(self, x, y):
        raise NotImplementedError

    def grad_s(self, x, y):
        raise NotImplementedError

    def second_s(self, x, y):
        raise NotImplementedError

    # array API wraps the scalar one
    def value_impl(self, x, y):
        return self.value_s(x[0], y[0])

    def grad_impl(self, x, y):
        gx, gy = self.grad_s(x[0], y[0])
        return np.array([gx]), np.array([gy])

    def second_impl(self, x, y):
        hxx, hxy, hyy = self.second_s(x[0], y[0])
        return np.array([[hxx]]), np.array([[hxy]]), np.array([[hyy]])


class XY(Scalar2DGame):
    """f(x, y) = x * y, the minimal pure-coupling game."""

    tag = "xy"

    def value_s(self, x, y):
        return x * y

    def grad_s(self, x, y):
        return y, x

    def second_s(self, x, y):
        return 0.0, 1.0, 0.0


class NegXY2(Scalar2DGame):
    """f(x, y) = -x * y^2 on x >= 0; every (x, 0) is an equilibrium.

    The domain constraint is not projected; runners flag trajectories that
    leave x >= 0 in their metadata.
    """

    tag = "neg-xy2"

    def value_s(self, x, y):
        return -x * y * y

    def grad_s(self, x, y):
        return -y * y, -2.0 * x * y

    def second_s(self, x, y):
        return 0.0, -2.0 * y, -2.0 * x

    def in_domain(self, x, y):
        return float(np.min(x)) >= 0.0

    def in_domain_s(self, x, y):
        return x >= 0.0


def _well(z):
    # double-well potential z^2/2 - z^4/2 + z^6/6 and derivatives
    z2 = z * z
    return 0.5 * z2 - 0.5 * z2 * z2 + z2 * z2 * z2 / 6.0


def _well_d(z):
    return z - 2.0 * z**3 + z**5


def _well_dd(z):
    return 1.0 - 6.0 * z * z + 5.0 * z**4


class LimitCycle2D(Scalar2DGame):
    """f = 3x(4y - 0.45) + w(x) - w(y) with the double-well w.

    Strongly coupled (cross derivative 12); heavy-ball runs settle on limit
    cycles whose radius grows with the momentum parameter.
    """

    tag = "limit-cycle"

    def value_s(self, x, y):
        return 3.0 * x * (4.0 * y - 0.45) + _well(x) - _well(y)

    def grad_s(self, x, y):
        return 12.0 * y - 1.35 + _well_d(x), 12.0 * x - _well_d(y)

    def second_s(self, x, y):
        return _well_dd(x), 12.0, -_well_dd(y)


class Forsaken(Scalar2DGame):
    """f = x(y - 0.45) + p(x) - p(y), p(z) = z^2/4 - z^4/2 + z^6/6.

    Weakly coupled variant of the limit-cycle construction; trajectories of
    gradient methods are trapped on a cycle away from the equilibrium.
    """

    tag = "forsaken"

    @staticmethod
    def _p_d(z):
        return 0.5 * z - 2.0 * z**3 + z**5

    @staticmethod
    def _p_dd(z):
        return 0.5 - 6.0 * z * z + 5.0 * z**4

    def value_s(self, x, y):
        def p(z):
            return 0.25 * z * z - 0.5 * z**4 + z**6 / 6.0

        return x * (y - 0.45) + p(x) - p(y)

    def grad_s(self, x, y):
        return (y - 0.45) + self._p_d(x), x - self._p_d(y)

    def second_s(self, x, y):
        return self._p_dd(x), 1.0, -self._p_dd(y)


class OcticSaddle(Scalar2DGame):
    """f = xy + q(x) - q(y), q(z) = z^2/2 - z^4/4 + z^6/6 - z^8/8.

    Trajectories started inside |x|,|y| < 1 converge to the equilibrium at
    the origin; the octic term makes y = +-1 a separatrix for the ascent.
    """

    tag = "octic-saddle"

    @staticmethod
    def _q_d(z):
        return z - z**3 + z**5 - z**7

    @staticmethod
    def _q_dd(z):
        return 1.0 - 3.0 * z * z + 5.0 * z**4 - 7.0 * z**6

    def value_s(self, x, y):
        def q(z):
            z2 = z * z
            return 0.5 * z2 - 0.25 * z2 * z2 + z2**3 / 6.0 - z2**4 / 8.0

        return x * y + q(x) - q(y)

    def grad_s(self, x, y):
        return y + self._q_d(x), x - self._q_d(y)

    def second_s(self, x, y):
        return self._q_dd(x), 1.0, -self._q_dd(y)


class ScalarQuadratic(Scalar2DGame):
    """f = a x^2 - b y^2 + c x y with a, b >= 0.

    The default constants pin the regime where the potential term is large
    enough that simultaneous updates beat alternating ones.
    """

    tag = "scalar-quadratic"

    def __init__(self, a=2.537, b=0.0003, c=0.801):
        if a < 0 or b < 0:
            raise ValueError("a and b must be nonnegative")
        self.a, self.b, self.c = float(a), float(b), float(c)

    def value_s(self, x, y):
        return self.a * x * x - self.b * y * y + self.c * x * y

    def grad_s(self, x, y):
        return 2.0 * self.a * x + self.c * y, -2.0 * self.b * y + self.c * x

    def second_s(self, x, y):
        return 2.0 * self.a, self.c, -2.0 * self.b


class Bilinear(GameModel):
    """Matrix game f(x, y) = x^T A y; zero potential part, pure coupling."""

    tag = "bilinear"

    def __init__(self, A):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.n, self.m = self.A.shape
        self.scalar_form = self.A.shape == (1, 1)

    def value_impl(self, x, y):
        return x @ self.A @ y

    def grad_impl(self, x, y):
        return self.A @ y, self.A.T @ x

    def second_impl(self, x, y):
        return (
            np.zeros((self.n, self.n)),
            self.A,
            np.zeros((self.m, self.m)),
        )

    # scalar fast path, valid only for 1x1 payoff matrices
    def value_s(self, x, y):
        return self.A[0, 0] * x * y

    def grad_s(self, x, y):
        a = self.A[0, 0]
        return a * y, a * x

    def second_s(self, x, y):
        return 0.0, self.A[0, 0], 0.0


def _check_sym_semidef(M, name, sign, tol=1e-8):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=tol * (1.0 + np.abs(M).max(initial=0.0))):
        raise ValueError(f"{name} must be symmetric")
    M = 0.5 * (M + M.T)
    if M.size:
        ev = np.linalg.eigvalsh(M)
        scale = 1.0 + np.abs(ev).max()
        if sign > 0 and ev.min() < -tol * scale:
            raise ValueError(f"{name} must be positive semi-definite")
        if sign < 0 and ev.max() > tol * scale:
            raise ValueError(f"{name} must be negative semi-definite")
    return M


class QuadraticGame(GameModel):
    """Explicit quadratic game f = 1/2 x^T Hx x + 1/2 y^T Hy y + x^T C y.

    Hx is PSD and Hy is NSD so the origin is a local Nash equilibrium; the
    Hessian blocks are constant and equal to (Hx, C, Hy) everywhere.
    """

    tag = "quadratic"

    def __init__(self, Hx, Hy, C):
        self.Hx = _check_sym_semidef(Hx, "Hx", +1)
        self.Hy = _check_sym_semidef(Hy, "Hy", -1)
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.n = self.Hx.shape[0]
        self.m = self.Hy.shape[0]
        if self.C.shape != (self.n, self.m):
            raise DimensionMismatch(
                f"C has shape {self.C.shape}, expected ({self.n}, {self.m})"
            )

    def value_impl(self, x, y):
        return 0.5 * x @ self.Hx @ x + 0.5 * y @ self.Hy @ y + x @ self.C @ y

    def grad_impl(self, x, y):
        return self.Hx @ x + self.C @ y, self.Hy @ y + self.C.T @ x

    def second_impl(self, x, y):
        return self.Hx, self.C, self.Hy

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "m": self.m,
            "Hx": self.Hx.tolist(),
            "Hy": self.Hy.tolist(),
            "C": self.C.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "QuadraticGame":
        doc = json.loads(text)
        g = cls(doc["Hx"], doc["Hy"], doc["C"])
        if g.n != doc["n"] or g.m != doc["m"]:
            raise DimensionMismatch("stored (n, m) disagree with matrix shapes")
        return g

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "QuadraticGame":
        with open(path) as fh:
            return cls.from_json(fh.read())


def random_quadratic(n, m, rank_x, rank_y, alpha, seed) -> QuadraticGame:
    """Random quadratic game with controlled potential rank.

    Hx = alpha * A A^T with A an n x rank_x standard-Gaussian matrix (so Hx
    has exactly n - rank_x zero eigenvalues almost surely), Hy = -alpha *
    B B^T analogously, and C a dense standard-Gaussian n x m coupling.
    Deterministic for a fixed seed.
    """
    if not 0 <= rank_x <= n:
        raise InvalidRank(f"rank_x={rank_x} outside [0, {n}]")
    if not 0 <= rank_y <= m:
        raise InvalidRank(f"rank_y={rank_y} outside [0, {m}]")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, rank_x))
    B = rng.standard_normal((m, rank_y))
    C = rng.standard_normal((n, m))
    Hx = alpha * A @ A.T if rank_x else np.zeros((n, n))
    Hy = -alpha * B @ B.T if rank_y else np.zeros((m, m))
    return QuadraticGame(Hx, Hy, C)


def random_quadratic_normalized(n, m, rank_x, rank_y, alpha, seed) -> QuadraticGame:
    """Like random_quadratic but with unit-spectral-norm factors.

    The potential factors A A^T, B B^T and the coupling C are each rescaled
    to spectral norm 1 before alpha is applied, so alpha is the actual
    magnitude of the Hessian blocks.  Raw Wishart scales grow like the
    dimension and push fixed step sizes out of the stable regime, which is
    why the scale-sensitive experiments use this generator.
    """
    g = random_quadratic(n, m, rank_x, rank_y, 1.0, seed)
    Hx, Hy, C = g.Hx, g.Hy, g.C

    def unit(M):
        s = np.linalg.norm(M, 2)
        return M / s if s > 0 else M

    return QuadraticGame(alpha * unit(Hx), -alpha * unit(-Hy), unit(C))


BUILTIN_GAMES = {
    "xy": XY,
    "neg-xy2": NegXY2,
    "limit-cycle": LimitCycle2D,
    "forsaken": Forsaken,
    "octic-saddle": OcticSaddle,
    "scalar-quadratic": ScalarQuadratic,
    "bilinear": Bilinear,
}


def make_builtin(name, **params) -> GameModel:
    """Instantiate a built-in game by its registry id."""
    if name not in BUILTIN_GAMES:
        raise KeyError(f"unknown builtin game {name!r}; have {sorted(BUILTIN_GAMES)}")
    cls = BUILTIN_GAMES[name]
    if cls is Bilinear:
        return Bilinear(params.get("matrix", [[1.0]]))
    return cls(**params)
