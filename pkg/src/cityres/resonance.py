"""Coupling-frequency solvers.

The ground's response enters through a real N x N force matrix: column l
holds the per-foundation normal-derivative integrals of the field whose
boundary data is the l-th unit vector.  A coupling frequency xi solves

    q_i(xi^2) alpha_i + p_i(xi^2) (Re T(xi) alpha)_i = 0,   i = 1..N.

The force integrals are negative (the ground resists the displacement
driving them), so the p-term enters with a plus sign: it cancels the
positive q-term on the resonant branches.  Identical buildings reduce
the system to scalar secant iterations on p(xi^2) tau_i(xi^2) + q(xi^2)
over the force matrix's eigenvalues (tau_i ascending gives xi_i
ascending); heterogeneous rows solve the pinned nonlinear system with a
damped Newton iteration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bie import FoundationGrid, NearResonanceError, assemble, foundation_force, solve_density
from .citymodel import CityConfig, all_identical, p_of, q_of, replicate
from .greens import TruncationError, WoodAnomalyError

# trial frequencies where the forward model cannot be evaluated (lattice-mode
# degeneracy, kernel-series overflow, near-singular collocation matrix) are
# rejected and the step is halved back toward the last good point
_REJECTABLE = (WoodAnomalyError, NearResonanceError, TruncationError, ValueError)

__all__ = [
    "ConvergenceError",
    "TMatrix",
    "EigenDecomposition",
    "ResonanceResult",
    "ConvergenceStudy",
    "t_matrix",
    "jacobi_eigen",
    "find_identical_finite",
    "find_identical_periodic",
    "find_hetero_finite",
    "find_hetero_periodic",
    "convergence_study",
    "verify_residual",
]

_SYMMETRY_RTOL = 1e-8
_EIGEN_OFF_RTOL = 1e-12
_SECANT_STEP_TOL = 1e-10
_SECANT_SECOND_POINT = 1e-3
_NEWTON_FTOL = 1e-10
_NEWTON_FD_STEP = 1e-6
_MAX_ITERATIONS = 100
_MAX_HALVINGS = 20
_RESULT_RESIDUAL_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """An iteration failed to reach its tolerance within its budget."""


@dataclass(frozen=True)
class TMatrix:
    """Real symmetric foundation-force response matrix at one frequency."""

    xi: float
    entries: np.ndarray
    M: int
    intervals: tuple[tuple[float, float], ...]
    mode: str
    period: float | None = None

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        if not np.all(np.isfinite(entries)):
            raise ValueError("force matrix has non-finite entries")
        scale = np.linalg.norm(entries)
        skew = np.linalg.norm(entries - entries.T)
        if skew > _SYMMETRY_RTOL * max(scale, 1e-300):
            raise ValueError(
                f"force matrix asymmetry {skew:.3e} exceeds "
                f"{_SYMMETRY_RTOL:.0e} * ||T|| = {_SYMMETRY_RTOL * scale:.3e}"
            )

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class ResonanceResult:
    """A coupling frequency with its foundation-displacement vector.

    ``alpha`` is the pinned Newton vector (heterogeneous solvers) or the
    unit eigenvector (identical-building solvers); ``residual`` is the
    max-norm of q_i alpha_i + p_i (Re T alpha)_i from an independent
    re-assembly at the returned frequency.
    """

    xi: float
    alpha: np.ndarray
    residual: float
    iterations: int
    method: str
    index: int
    xi0: float
    M: int

    def __post_init__(self) -> None:
        if not (self.xi > 0.0 and np.isfinite(self.xi)):
            raise ValueError(f"nonphysical frequency {self.xi!r}")
        if self.residual > _RESULT_RESIDUAL_TOL:
            raise ValueError(
                f"residual {self.residual:.3e} exceeds {_RESULT_RESIDUAL_TOL:.0e}"
            )


@dataclass(frozen=True)
class ConvergenceStudy:
    """Finite-city roots per cell count plus the periodic limit."""

    rows: tuple[tuple[int, ResonanceResult], ...]
    periodic: ResonanceResult


def t_matrix(city: CityConfig, xi: float, m: int) -> TMatrix:
    """Assemble the foundation-force response matrix at frequency xi.

    One factorization of the collocation system serves all basis columns.
    """
    grid = FoundationGrid.from_city(city, m)
    mode = "periodic" if city.is_periodic else "free"
    system = assemble(grid, xi, mode=mode, period=city.period)
    n = grid.n_segments
    entries = np.empty((n, n))
    for col in range(n):
        unit = np.zeros(n)
        unit[col] = 1.0
        sol = solve_density(system, unit)
        for row in range(n):
            entries[row, col] = foundation_force(sol, row)
    return TMatrix(
        xi=xi,
        entries=entries,
        M=m,
        intervals=grid.intervals,
        mode=mode,
        period=city.period,
    )


def jacobi_eigen(tmat: TMatrix) -> EigenDecomposition:
    """Cyclic Jacobi diagonalization of the (symmetrized) force matrix."""
    a = 0.5 * (tmat.entries + tmat.entries.T)
    n = a.shape[0]
    vectors = np.eye(n)
    scale = np.linalg.norm(a)
    if n > 1 and scale > 0.0:
        for _ in range(60):
            off = np.sqrt(np.sum(np.square(a - np.diag(np.diag(a)))))
            if off <= _EIGEN_OFF_RTOL * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    if abs(a[p, q]) <= 1e-300:
                        continue
                    angle = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                    c, s = np.cos(angle), np.sin(angle)
                    col_p, col_q = a[:, p].copy(), a[:, q].copy()
                    a[:, p] = c * col_p - s * col_q
                    a[:, q] = s * col_p + c * col_q
                    row_p, row_q = a[p, :].copy(), a[q, :].copy()
                    a[p, :] = c * row_p - s * row_q
                    a[q, :] = s * row_p + c * row_q
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
                    vectors[:, p] = c * vec_p - s * vec_q
                    vectors[:, q] = s * vec_p + c * vec_q
        else:
            raise ConvergenceError("Jacobi sweeps did not reduce off-diagonal mass")
    order = np.argsort(np.diag(a))
    return EigenDecomposition(
        eigenvalues=np.diag(a)[order].copy(), eigenvectors=vectors[:, order].copy()
    )


def _guarded_step(
    evaluate: Callable[[float], float], current: float, proposed: float
) -> tuple[float, float]:
    """Evaluate at ``proposed``, halving the step back toward ``current``
    whenever the point is nonphysical or sits on a lattice-mode degeneracy."""
    target = proposed
    for _ in range(40):
        if target > 0.0:
            try:
                return target, evaluate(target)
            except _REJECTABLE:
                pass
        target = current + 0.5 * (target - current)
    raise ConvergenceError(
        "could not find an admissible frequency: every trial step landed on "
        "a degenerate or unevaluable point or left the physical range"
    )


def _secant_root(
    evaluate: Callable[[float], float], xi0: float
) -> tuple[float, int]:
    """Secant iteration with step-halving around inadmissible points."""
    x_prev, f_prev = _guarded_step(evaluate, xi0 + _SECANT_SECOND_POINT, xi0)
    x_cur, f_cur = _guarded_step(evaluate, xi0, xi0 + _SECANT_SECOND_POINT)
    for iteration in range(1, _MAX_ITERATIONS + 1):
        denominator = f_cur - f_prev
        if denominator == 0.0:
            raise ConvergenceError(
                f"secant stalled at xi = {x_cur} (flat objective)"
            )
        proposed = x_cur - f_cur * (x_cur - x_prev) / denominator
        x_new, f_new = _guarded_step(evaluate, x_cur, proposed)
        x_prev, f_prev, x_cur, f_cur = x_cur, f_cur, x_new, f_new
        if abs(x_cur - x_prev) <= _SECANT_STEP_TOL:
            # Steps can collapse away from a root too (a flat stretch of the
            # objective, or halving against a rejected region); only a small
            # residual makes the contraction a root.
            if abs(f_cur) <= _RESULT_RESIDUAL_TOL:
                return x_cur, iteration
            raise ConvergenceError(
                f"secant contracted at xi = {x_cur} without reaching a root "
                f"(residual {abs(f_cur):.3e}); try another starting frequency"
            )
    raise ConvergenceError(
        f"secant did not converge within {_MAX_ITERATIONS} iterations "
        f"(last xi = {x_cur})"
    )


def _system_residual(
    city: CityConfig, tmat: TMatrix, xi: float, alpha: np.ndarray
) -> np.ndarray:
    """F_i = q_i(xi^2) alpha_i + p_i(xi^2) (Re T alpha)_i."""
    xi_sq = xi * xi
    p = np.array([p_of(b, xi_sq) for b in city.buildings])
    q = np.array([q_of(b, xi_sq) for b in city.buildings])
    return q * alpha + p * (tmat.entries @ alpha)


def verify_residual(
    city: CityConfig, m: int, xi: float, alpha: np.ndarray
) -> float:
    """Max-norm of q alpha + p (Re T alpha) from a fresh re-assembly."""
    tmat = t_matrix(city, xi, m)
    return float(np.max(np.abs(_system_residual(city, tmat, xi, alpha))))


def _finish(
    city: CityConfig,
    m: int,
    xi: float,
    alpha: np.ndarray,
    iterations: int,
    method: str,
    index: int,
    xi0: float,
) -> ResonanceResult:
    residual = verify_residual(city, m, xi, alpha)
    return ResonanceResult(
        xi=xi,
        alpha=alpha,
        residual=residual,
        iterations=iterations,
        method=method,
        index=index,
        xi0=xi0,
        M=m,
    )


def find_identical_finite(
    city: CityConfig, eig_index: int, xi0: float, m: int
) -> ResonanceResult:
    """Root of p(xi^2) tau_i(xi^2) + q(xi^2) = 0 for identical buildings.

    ``eig_index`` selects the i-th smallest eigenvalue (1-based); roots
    come out ascending in the index.
    """
    if city.is_periodic:
        raise ValueError("find_identical_finite expects a finite city")
    if not all_identical(city):
        raise ValueError(
            "buildings differ; use find_hetero_finite for heterogeneous rows"
        )
    n = city.n_buildings
    if not (1 <= eig_index <= n):
        raise ValueError(f"eig_index must be in 1..{n}, got {eig_index}")
    building = city.buildings[0]

    def objective(xi: float) -> float:
        tau = jacobi_eigen(t_matrix(city, xi, m)).eigenvalues[eig_index - 1]
        xi_sq = xi * xi
        return p_of(building, xi_sq) * tau + q_of(building, xi_sq)

    root, iterations = _secant_root(objective, xi0)
    eig = jacobi_eigen(t_matrix(city, root, m))
    alpha = eig.eigenvectors[:, eig_index - 1].copy()
    return _finish(
        city, m, root, alpha, iterations, "identical_finite", eig_index, xi0
    )


def find_identical_periodic(
    city: CityConfig, xi0: float, m: int
) -> ResonanceResult:
    """Root of the scalar periodic equation for one building per cell."""
    if not city.is_periodic:
        raise ValueError("find_identical_periodic expects a periodic city")
    if city.n_buildings != 1:
        raise ValueError(
            "find_identical_periodic handles one building per cell; use "
            "find_hetero_periodic for larger cells"
        )
    building = city.buildings[0]

    def objective(xi: float) -> float:
        tau = t_matrix(city, xi, m).entries[0, 0]
        xi_sq = xi * xi
        return q_of(building, xi_sq) + p_of(building, xi_sq) * tau

    root, iterations = _secant_root(objective, xi0)
    alpha = np.array([1.0])
    return _finish(city, m, root, alpha, iterations, "identical_periodic", 1, xi0)


def _newton_pinned(
    city: CityConfig, pin: int, xi0: float, m: int, method: str
) -> ResonanceResult:
    """Damped Newton on the pinned system with unknowns (xi, alpha_not_pin)."""
    n = city.n_buildings
    if not (1 <= pin <= n):
        raise ValueError(f"pin must be in 1..{n}, got {pin}")
    pin0 = pin - 1
    free = [i for i in range(n) if i != pin0]

    def matrix_at(xi: float) -> TMatrix:
        return t_matrix(city, xi, m)

    def residual(xi: float, alpha: np.ndarray, tmat: TMatrix) -> np.ndarray:
        return _system_residual(city, tmat, xi, alpha)

    xi_cur = float(xi0)
    alpha_cur = np.zeros(n)
    alpha_cur[pin0] = 1.0
    try:
        tmat_cur = matrix_at(xi_cur)
    except WoodAnomalyError as exc:
        raise ConvergenceError(
            f"initial guess xi0 = {xi0} sits on a lattice-mode degeneracy"
        ) from exc
    f_cur = residual(xi_cur, alpha_cur, tmat_cur)

    for iteration in range(1, _MAX_ITERATIONS + 1):
        norm_cur = np.max(np.abs(f_cur))
        if norm_cur <= _NEWTON_FTOL:
            return _finish(
                city, m, xi_cur, alpha_cur, iteration - 1, method, pin, xi0
            )

        jac = np.empty((n, n))
        # frequency column by forward difference (re-assembles the kernel)
        step = _NEWTON_FD_STEP * max(1.0, abs(xi_cur))
        bumped, f_bumped = _guarded_evaluation(
            residual, matrix_at, xi_cur + step, alpha_cur, xi_cur
        )
        jac[:, 0] = (f_bumped - f_cur) / (bumped - xi_cur)
        # displacement columns: the system is linear in alpha at fixed xi
        xi_sq = xi_cur * xi_cur
        p = np.array([p_of(b, xi_sq) for b in city.buildings])
        q = np.array([q_of(b, xi_sq) for b in city.buildings])
        alpha_jacobian = np.diag(q) + p[:, None] * tmat_cur.entries
        jac[:, 1:] = alpha_jacobian[:, free]

        try:
            delta = np.linalg.solve(jac, -f_cur)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                f"singular Jacobian at xi = {xi_cur}; try another pinned index"
            ) from exc
        damping = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            xi_try = xi_cur + damping * delta[0]
            alpha_try = alpha_cur.copy()
            alpha_try[free] += damping * delta[1:]
            if xi_try > 0.0:
                try:
                    tmat_try = matrix_at(xi_try)
                    f_try = residual(xi_try, alpha_try, tmat_try)
                except _REJECTABLE:
                    damping *= 0.5
                    continue
                if np.max(np.abs(f_try)) < norm_cur:
                    break
            damping *= 0.5
        else:
            raise ConvergenceError(
                f"Newton step rejected after {_MAX_HALVINGS} halvings at "
                f"xi = {xi_cur} (residual {norm_cur:.3e}); the pinned "
                "component may vanish on this branch — try another pin"
            )
        xi_cur, alpha_cur, tmat_cur, f_cur = xi_try, alpha_try, tmat_try, f_try

    raise ConvergenceError(
        f"Newton did not converge within {_MAX_ITERATIONS} iterations "
        f"(xi = {xi_cur}, residual = {np.max(np.abs(f_cur)):.3e})"
    )


def _guarded_evaluation(
    residual: Callable[..., np.ndarray],
    matrix_at: Callable[[float], "TMatrix"],
    xi_target: float,
    alpha: np.ndarray,
    xi_fallback: float,
) -> tuple[float, np.ndarray]:
    """Evaluate the residual near xi_target, stepping back from degeneracies."""
    target = xi_target
    for _ in range(40):
        try:
            return target, residual(target, alpha, matrix_at(target))
        except _REJECTABLE:
            target = xi_fallback + 0.5 * (target - xi_fallback)
    raise ConvergenceError(
        "finite-difference probe kept hitting degenerate or unevaluable points"
    )


def find_hetero_finite(
    city: CityConfig, pin: int, xi0: float, m: int
) -> ResonanceResult:
    """Newton solve of the pinned nonlinear system for a finite row."""
    if city.is_periodic:
        raise ValueError("find_hetero_finite expects a finite city")
    return _newton_pinned(city, pin, xi0, m, "hetero_finite")


def find_hetero_periodic(
    city: CityConfig, pin: int, xi0: float, m: int
) -> ResonanceResult:
    """Newton solve of the pinned nonlinear system for one periodic cell."""
    if not city.is_periodic:
        raise ValueError("find_hetero_periodic expects a periodic city")
    return _newton_pinned(city, pin, xi0, m, "hetero_periodic")


def convergence_study(
    pattern: CityConfig,
    cell_counts: Sequence[int],
    pin: int,
    xi0: float,
    m: int,
    workers: int | None = None,
) -> ConvergenceStudy:
    """Finite-city roots for each replication count plus the periodic limit.

    The same building index is pinned in every finite run; the periodic run
    pins the corresponding within-cell index.
    """
    if not pattern.is_periodic:
        raise ValueError("convergence_study expects a periodic pattern")
    cells = pattern.n_buildings
    counts = list(cell_counts)
    if not counts:
        raise ValueError("at least one cell count required")
    for count in counts:
        if count < 1:
            raise ValueError(f"cell counts must be >= 1, got {count}")
        if pin > count * cells:
            raise ValueError(
                f"pin {pin} exceeds the {count * cells} buildings of the "
                f"{count}-cell city"
            )

    def finite_row(count: int) -> tuple[int, ResonanceResult]:
        return count, find_hetero_finite(replicate(pattern, count), pin, xi0, m)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(finite_row, counts))
    else:
        rows = tuple(finite_row(count) for count in counts)
    pin_periodic = (pin - 1) % cells + 1
    periodic = find_hetero_periodic(pattern, pin_periodic, xi0, m)
    return ConvergenceStudy(rows=rows, periodic=periodic)
