"""Jacobians, spectra, and closed-form local-convergence predictions.

The gradient-flow Jacobian at an equilibrium is

    J = [[-Hxx, -Hxy], [Hxy^T, Hyy]]

and splits as J = S + A into a block-diagonal potential part and an
antisymmetric coupling part.  The simultaneous model's Jacobian is the
matrix polynomial J_S = (I/(1-beta) - h(1+beta)/(2(1-beta)^3) J) J, so its
spectrum is the image of Sp(J) under a scalar quadratic; the alternating
model subtracts an h/(1-beta)^2-scaled correction built from the Hessian
blocks.  Everything downstream (step-size bounds, optimal momentum, the
alternating speed-up prediction) is computed from these spectra.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionViolated,
    ConvergenceFailure,
    NotEquilibriumWarning,
    PreconditionViolated,
)

EQUILIBRIUM_TOL = 1e-8
GENERIC_RE_TOL = 1e-12
INTERACTION_TOL = 1e-10
SV_DISTINCT_TOL = 1e-8


def jacobian_gf(game, x, y, tol=EQUILIBRIUM_TOL) -> np.ndarray:
    """Gradient-flow Jacobian [[-Hxx, -Hxy], [Hxy^T, Hyy]] at (x, y).

    Warns (but still evaluates) when (x, y) is not a critical point within
    `tol`; off-equilibrium evaluations are legitimate for field analysis.
    """
    x, y = game.check_point(x, y)
    gx, gy = game.grad_impl(x, y)
    if np.hypot(np.linalg.norm(gx), np.linalg.norm(gy)) > tol:
        warnings.warn(
            f"point is not an equilibrium (|grad| > {tol}); Jacobian formula "
            "evaluated anyway",
            NotEquilibriumWarning,
            stacklevel=2,
        )
    Hxx, Hxy, Hyy = game.second_impl(x, y)
    return np.block([[-Hxx, -Hxy], [Hxy.T, Hyy]])


def decomposition(J: np.ndarray, n: int):
    """Split J into potential (block-diagonal) and coupling (off-diagonal)
    parts; S + A = J exactly."""
    J = np.asarray(J, dtype=float)
    S = np.zeros_like(J)
    A = np.zeros_like(J)
    S[:n, :n] = J[:n, :n]
    S[n:, n:] = J[n:, n:]
    A[:n, n:] = J[:n, n:]
    A[n:, :n] = J[n:, :n]
    return S, A


def jacobian_sim(J: np.ndarray, h: float, beta: float) -> np.ndarray:
    """Jacobian of the simultaneous model as a polynomial in J."""
    J = np.asarray(J, dtype=float)
    I = np.eye(J.shape[0])
    return (I / (1.0 - beta) - h * (1.0 + beta) / (2.0 * (1.0 - beta) ** 3) * J) @ J


def alt_correction(game, x, y) -> np.ndarray:
    """Correction block matrix [[0, 0], [Hxy^T Hxx, Hxy^T Hxy]]."""
    x, y = game.check_point(x, y)
    Hxx, Hxy, Hyy = game.second_impl(x, y)
    n, m = Hxy.shape
    corr = np.zeros((n + m, n + m))
    corr[n:, :n] = Hxy.T @ Hxx
    corr[n:, n:] = Hxy.T @ Hxy
    return corr


def jacobian_alt(game, x, y, h: float, beta: float) -> np.ndarray:
    """Jacobian of the alternating model: J_S minus the scaled correction."""
    J = jacobian_gf(game, x, y)
    return jacobian_sim(J, h, beta) - h / (1.0 - beta) ** 2 * alt_correction(game, x, y)


def eigenvalues(M) -> np.ndarray:
    """Full spectrum (with multiplicity) of a dense real or complex matrix."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc


def spectral_abscissa(M_or_eigs) -> float:
    ev = np.asarray(M_or_eigs)
    if ev.ndim == 2:
        ev = eigenvalues(ev)
    return float(ev.real.max())


def sim_eig_map(eigs, h: float, beta: float):
    """Scalar quadratic lam/(1-beta) - h(1+beta) lam^2 / (2(1-beta)^3).

    By the spectral mapping of matrix polynomials, applying this to Sp(J)
    yields exactly Sp(jacobian_sim(J, h, beta)).
    """
    lam = np.asarray(eigs, dtype=complex)
    return lam / (1.0 - beta) - h * (1.0 + beta) / (2.0 * (1.0 - beta) ** 3) * lam**2


def _as_eigs(J_or_eigs):
    arr = np.asarray(J_or_eigs)
    if arr.ndim == 2:
        return eigenvalues(arr)
    return arr.astype(complex)


@dataclass(frozen=True)
class AssumptionFlags:
    interaction: bool  # |Im| > |Re| for every eigenvalue of J
    generic: bool  # Re < 0 for every eigenvalue of J
    subspace_disjoint: bool  # raw rank test: EigVec(A) intersects Ker(S) trivially


def _subspace_disjoint(S, A, tol=1e-8) -> bool:
    """True when no eigenvector of A lies in the kernel of S."""
    S = np.asarray(S, dtype=float)
    ew, evec = np.linalg.eigh(0.5 * (S + S.T))
    scale = 1.0 + np.abs(ew).max(initial=0.0)
    K = evec[:, np.abs(ew) < tol * scale]
    if K.shape[1] == 0:
        return True
    aw, avec = np.linalg.eig(np.asarray(A, dtype=float))
    # group eigenvectors of A by (clustered) eigenvalue
    order = np.argsort(aw.imag)
    aw, avec = aw[order], avec[:, order]
    groups = []
    start = 0
    for i in range(1, len(aw) + 1):
        if i == len(aw) or abs(aw[i] - aw[start]) > 1e-8 * (1.0 + abs(aw[start])):
            groups.append(avec[:, start:i])
            start = i
    for V in groups:
        Q, _ = np.linalg.qr(V)
        # largest principal cosine between span(Q) and span(K)
        cos = np.linalg.svd(Q.conj().T @ K, compute_uv=False)
        if cos.size and cos.max() > 1.0 - tol:
            return False
    return True


def check_assumptions(J, S, A) -> AssumptionFlags:
    """Evaluate the two spectral assumptions behind the local theory.

    interaction: coupling dominates, witnessed by |Im(lam)| > |Re(lam)| for
    all lam in Sp(J).  generic: Re(lam) < 0 for all lam (the computable
    consequence of the eigenvector/kernel disjointness condition); the raw
    subspace rank test is reported alongside for diagnostics.
    """
    ev = _as_eigs(J)
    interaction = bool(np.all(np.abs(ev.imag) - np.abs(ev.real) > INTERACTION_TOL))
    generic = bool(np.all(ev.real < -GENERIC_RE_TOL))
    return AssumptionFlags(interaction, generic, _subspace_disjoint(S, A))


def hmax_bound(J_or_eigs, beta: float) -> float:
    """Largest provably convergent step size for the simultaneous model.

    min over coupling-dominated eigenvalues (Im^2 > Re^2) of
    2(1-beta)^2/(1+beta) * |Re| / (Im^2 - Re^2).  Eigenvalues with
    Im^2 - Re^2 <= 0 impose no constraint: when Re < 0 their image under
    the J_S polynomial stays in the left half-plane for every h > 0.
    Raises AssumptionViolated when some Re(lam) >= 0 (in particular a
    purely imaginary spectrum gives bound 0: no convergent h exists).
    """
    ev = _as_eigs(J_or_eigs)
    if not np.all(ev.real < -GENERIC_RE_TOL):
        raise AssumptionViolated(
            "spectrum of J has an eigenvalue with Re >= 0; the step-size "
            "bound is 0 and no step size gives local convergence"
        )
    D = ev.imag**2 - ev.real**2
    mask = D > 0
    if not mask.any():
        return float("inf")
    return float(np.min(2.0 * (1.0 - beta) ** 2 / (1.0 + beta) * np.abs(ev.real[mask]) / D[mask]))


def optimal_beta_per_eig(lam: complex, h: float):
    """Momentum minimizing the image real part for one eigenvalue.

    For coupling-dominated lam the optimum is the smaller root of the
    derivative's quadratic; once h exceeds 4|Re|/(Im^2-Re^2) the optimum
    sits at the boundary beta = -1.  Positive optima appear exactly when
    h < |Re| / (2 (Im^2 - Re^2)).  Returns None when Im^2 <= Re^2 (no
    interior optimum; any momentum converges for every h).
    """
    r = abs(lam.real)
    D = lam.imag**2 - lam.real**2
    if D <= 0:
        return None
    if h > 4.0 * r / D:
        return -1.0
    hD = h * D
    return 1.0 + hD / (2.0 * r) - np.sqrt(hD * hD + 12.0 * r * hD) / (2.0 * r)


@dataclass(frozen=True)
class OptimalBetaResult:
    per_eig: list  # (eigenvalue, closed-form beta or None)
    global_beta: float  # grid-search argmin of the J_S abscissa
    binding: complex  # eigenvalue attaining the abscissa at global_beta
    binding_unique: bool  # same eigenvalue binds on both sides of the optimum
    grid_step: float


def optimal_beta(J_or_eigs, h: float, grid_step: float = 1e-3) -> OptimalBetaResult:
    """Per-eigenvalue closed-form optima plus a grid-search global optimum.

    The global optimum minimizes the spectral abscissa of the simultaneous
    model over beta in (-0.999, 0.999); when several eigenvalue curves
    cross at the minimum the closed form does not apply, which is flagged
    through binding_unique.
    """
    ev = _as_eigs(J_or_eigs)
    if not np.all(ev.real < -GENERIC_RE_TOL):
        raise AssumptionViolated("optimal momentum requires Re(lam) < 0 for all lam")
    per = [(lam, optimal_beta_per_eig(lam, h)) for lam in ev]

    grid = np.arange(-0.999, 0.999 + grid_step / 2, grid_step)
    images = np.array([sim_eig_map(ev, h, b).real for b in grid])  # (B, d)
    absc = images.max(axis=1)
    k = int(absc.argmin())
    beta_star = float(grid[k])

    def binder(b):
        vals = sim_eig_map(ev, h, b).real
        i = int(vals.argmax())
        # identify up to conjugation
        return round(abs(ev[i].imag), 9), round(ev[i].real, 9)

    lo = max(0, k - 2)
    hi = min(len(grid) - 1, k + 2)
    unique = binder(grid[lo]) == binder(grid[hi])
    vals = sim_eig_map(ev, h, beta_star).real
    binding = complex(ev[int(vals.argmax())])
    return OptimalBetaResult(per, beta_star, binding, unique, grid_step)


def bilinear_eigs(rho: float, h: float, beta: float, scheme: str):
    """Closed-form eigenvalue pair of the 2x2 coupling block.

    rho >= 0 is an eigenvalue of C C^T (squared singular value of the
    payoff matrix).  Each singular value contributes the roots of

        (lam - a)(lam + b) + rho/(1-beta)^2 = 0,

    with a = h(1+beta) rho / (2(1-beta)^3) and, for the alternating
    scheme, b = h(1-3beta) rho / (2(1-beta)^3) (b = -a for simultaneous).
    Simultaneous: lam = a +- i sqrt(rho)/(1-beta), so Re >= 0 always.
    Alternating: lam = h beta rho/(1-beta)^3 +- sqrt(h^2 rho^2/(4(1-beta)^4)
    - rho/(1-beta)^2); for small h the root term is imaginary and the
    common real part has the sign of beta.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    from .discrete import _canon_scheme

    if _canon_scheme(scheme) == "sim":
        center = h * (1.0 + beta) * rho / (2.0 * (1.0 - beta) ** 3)
        root = 1j * np.sqrt(rho) / (1.0 - beta)
    else:
        center = h * beta * rho / (1.0 - beta) ** 3
        disc = h * h * rho * rho / (4.0 * (1.0 - beta) ** 4) - rho / (1.0 - beta) ** 2
        root = np.sqrt(complex(disc))
    return complex(center + root), complex(center - root)


def alt_rate_prediction(game, h: float, beta: float) -> np.ndarray:
    """First-order perturbation prediction of Sp(J_A)'s real parts.

    Requires a square game whose coupling block has full rank and distinct
    singular values.  Each eigenvalue lam of J is paired with the coupling
    singular value sigma nearest to |Im(lam)|; the prediction is
    Re(p(lam)) - h sigma^2/(1-beta)^2 with p the J_S eigenvalue map.  The
    max entry predicts the abscissa of J_A with a gap that shrinks
    linearly as h goes to 0.
    """
    if game.n != game.m:
        raise PreconditionViolated("prediction requires n == m")
    origin = (np.zeros(game.n), np.zeros(game.m))
    _, C, _ = game.second_impl(*game.check_point(*origin))
    sv = np.sort(np.linalg.svd(C, compute_uv=False))
    scale = max(1.0, sv[-1])
    if sv[0] <= SV_DISTINCT_TOL * scale:
        raise PreconditionViolated("coupling block is (numerically) rank-deficient")
    if np.diff(sv).min(initial=np.inf) <= SV_DISTINCT_TOL * scale:
        raise PreconditionViolated("coupling block has (near-)repeated singular values")
    J = jacobian_gf(game, *origin)
    ev = eigenvalues(J)
    sigma = sv[np.argmin(np.abs(sv[None, :] - np.abs(ev.imag)[:, None]), axis=1)]
    return sim_eig_map(ev, h, beta).real - h * sigma**2 / (1.0 - beta) ** 2


def stability_heatmap(target, h_grid, beta_grid, scheme="sim", jobs=1) -> np.ndarray:
    """Spectral abscissa of the model Jacobian over an (h, beta) grid.

    Returns an array of shape (len(beta_grid), len(h_grid)); cells >= 0
    are divergent.  For the simultaneous scheme the abscissas come from
    the eigenvalue map of Sp(J) (no per-cell solves); the alternating
    scheme eigensolves each cell, optionally across `jobs` threads, with
    deterministic output ordering either way.
    """
    from .discrete import _canon_scheme
    from .games import GameModel

    h_grid = np.asarray(h_grid, dtype=float)
    beta_grid = np.asarray(beta_grid, dtype=float)
    if h_grid.size == 0 or beta_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if isinstance(target, GameModel):
        game = target
        J = jacobian_gf(game, np.zeros(game.n), np.zeros(game.m))
    else:
        game = None
        J = np.asarray(target, dtype=float)

    if _canon_scheme(scheme) == "sim":
        ev = eigenvalues(J)
        out = np.empty((beta_grid.size, h_grid.size))
        for i, b in enumerate(beta_grid):
            for j, h in enumerate(h_grid):
                out[i, j] = sim_eig_map(ev, h, b).real.max()
        return out

    if game is None:
        raise ValueError("alternating heatmap needs a game, not a bare Jacobian")
    corr = alt_correction(game, np.zeros(game.n), np.zeros(game.m))

    def cell(args):
        b, h = args
        JA = jacobian_sim(J, h, b) - h / (1.0 - b) ** 2 * corr
        return spectral_abscissa(eigenvalues(JA))

    cells = [(b, h) for b in beta_grid for h in h_grid]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(cell, cells))
    else:
        flat = [cell(c) for c in cells]
    return np.array(flat).reshape(beta_grid.size, h_grid.size)


def min_hb_stability(alpha: float, beta: float, lam_max: float) -> bool:
    """Heavy-ball stability test for minimization: 0 < alpha lam < 2 + 2 beta.

    lam_max is the largest Hessian eigenvalue at the local minimum; the
    inequalities are strict, so the boundary counts as unstable.
    """
    if not lam_max > 0:
        raise ValueError("lam_max must be positive")
    return 0.0 < alpha * lam_max < 2.0 + 2.0 * beta


# ---------------------------------------------------------------------------
# aggregate report


def _cjson(values):
    return [{"re": float(v.real), "im": float(v.imag)} for v in np.asarray(values, dtype=complex)]


@dataclass
class SpectralReport:
    eigs_j: np.ndarray
    eigs_js: np.ndarray
    eigs_ja: np.ndarray
    abscissa_j: float
    abscissa_js: float
    abscissa_ja: float
    flags: AssumptionFlags
    hmax: float | None
    hmax_error: str | None
    optimal: OptimalBetaResult | None
    optimal_error: str | None
    alt_prediction: list | None
    h: float = 0.0
    beta: float = 0.0

    def to_json(self) -> str:
        doc = {
            "h": self.h,
            "beta": self.beta,
            "eigs_J": _cjson(self.eigs_j),
            "eigs_JS": _cjson(self.eigs_js),
            "eigs_JA": _cjson(self.eigs_ja),
            "abscissa_J": self.abscissa_j,
            "abscissa_JS": self.abscissa_js,
            "abscissa_JA": self.abscissa_ja,
            "assumption_interaction": self.flags.interaction,
            "assumption_generic": self.flags.generic,
            "subspace_disjoint": self.flags.subspace_disjoint,
            "hmax": self.hmax if self.hmax is None or np.isfinite(self.hmax) else "inf",
            "hmax_error": self.hmax_error,
            "optimal_beta_global": None if self.optimal is None else self.optimal.global_beta,
            "optimal_beta_per_eig": None
            if self.optimal is None
            else [
                {"eig": {"re": lam.real, "im": lam.imag}, "beta": b}
                for lam, b in self.optimal.per_eig
            ],
            "optimal_error": self.optimal_error,
            "alt_prediction": self.alt_prediction,
        }
        return json.dumps(doc, indent=2)


def build_report(game, h: float, beta: float, point=None) -> SpectralReport:
    """Compute the full spectral picture of a game at a point (default origin)."""
    if point is None:
        point = (np.zeros(game.n), np.zeros(game.m))
    x, y = point
    J = jacobian_gf(game, x, y)
    JS = jacobian_sim(J, h, beta)
    JA = jacobian_alt(game, x, y, h, beta)
    S, A = decomposition(J, game.n)
    ev_j = eigenvalues(J)
    ev_js = eigenvalues(JS)
    ev_ja = eigenvalues(JA)
    flags = check_assumptions(ev_j, S, A)

    hmax = hmax_err = None
    try:
        hmax = hmax_bound(ev_j, beta)
    except AssumptionViolated as exc:
        hmax_err = str(exc)
    opt = opt_err = None
    try:
        opt = optimal_beta(ev_j, h)
    except AssumptionViolated as exc:
        opt_err = str(exc)
    pred = None
    try:
        pred = [float(v) for v in alt_rate_prediction(game, h, beta)]
    except (PreconditionViolated, AttributeError):
        pred = None

    return SpectralReport(
        ev_j, ev_js, ev_ja,
        spectral_abscissa(ev_j), spectral_abscissa(ev_js), spectral_abscissa(ev_ja),
        flags, hmax, hmax_err, opt, opt_err, pred, h, beta,
    )


def heatmap_to_csv(path, h_grid, beta_grid, abscissas):
    """Write the heatmap as rows `beta,h,abscissa` (beta-major order)."""
    h_grid = np.asarray(h_grid, dtype=float)
    beta_grid = np.asarray(beta_grid, dtype=float)
    with open(path, "w") as fh:
        fh.write("beta,h,abscissa\n")
        for i, b in enumerate(beta_grid):
            for j, h in enumerate(h_grid):
                fh.write(f"{b:.17g},{h:.17g},{abscissas[i, j]:.17g}\n")
