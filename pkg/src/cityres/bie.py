"""Nystrom collocation solver for the single-layer boundary integral equations.

The surface displacement potential is represented as a single-layer potential
over the foundation segments with a density carrying the inverse-square-root
edge behaviour psi(s) = phi(s) / sqrt((s - a)(b - s)).  Mapping each segment
to [-1, 1] by its Chebyshev chart makes the edge weight 1/sqrt(1 - t^2) and
cancels the chart Jacobian exactly, so the discrete system collocates

    sum_j  integral_{-1}^{1} kernel(x_k,l - g_j(t)) phi_j(t) / sqrt(1 - t^2) dt
        = alpha_k

at the Chebyshev nodes x_k,l = g_k(t_l).  Smooth blocks use Gauss-Chebyshev
weights; the same-segment blocks split the kernel's logarithmic singularity
out and integrate it with exact Chebyshev log moments (product quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .citymodel import CityConfig
from .greens import (
    EwaldConfig,
    PeriodicCell,
    btilde,
    gper_ewald,
    split_A,
    split_B,
)
from .specfun import hankel0_quarter_i

__all__ = [
    "MIN_SEPARATION",
    "NearResonanceError",
    "FoundationGrid",
    "NystromSystem",
    "DensitySolution",
    "chebyshev_nodes",
    "log_moment_matrix",
    "assemble",
    "solve_density",
    "foundation_force",
    "evaluate_field",
]

#: Distinct foundations (and periodic images) must be at least this far apart;
#: closer geometries collapse the smooth-kernel quadrature accuracy.
MIN_SEPARATION = 1e-6

_RESIDUAL_RTOL = 1e-10
_PIVOT_RTOL = 1e-14


class NearResonanceError(RuntimeError):
    """The assembled collocation matrix is numerically singular."""


def chebyshev_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """First-kind Chebyshev nodes t_k = cos((2k-1) pi / (4m)), k = 1..2m.

    Returns (nodes, angles); the Gauss-Chebyshev weight is pi/(2m) for all.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    k = np.arange(1, 2 * m + 1)
    theta = (2 * k - 1) * np.pi / (4 * m)
    return np.cos(theta), theta


def log_moment_matrix(m: int) -> np.ndarray:
    """Product-quadrature weights for the logarithmic kernel.

    D[l, k] is the weight of f(t_k) in the approximation of
    integral_{-1}^{1} ln|t_l - t| f(t) / sqrt(1 - t^2) dt obtained by
    integrating the degree-(2m-1) Chebyshev interpolant of f exactly:

        D[l, k] = -(pi / 2m) [ ln 2
                    + sum_{n=1}^{2m-1} (2/n) cos(n theta_l) cos(n theta_k) ].
    """
    _, theta = chebyshev_nodes(m)
    orders = np.arange(1, 2 * m)
    cosines = np.cos(np.outer(orders, theta))  # (2m-1, 2m)
    weighted = (2.0 / orders)[:, None] * cosines
    return -(np.pi / (2 * m)) * (np.log(2.0) + cosines.T @ weighted)


@dataclass(frozen=True)
class FoundationGrid:
    """Chebyshev collocation grid over disjoint foundation segments."""

    intervals: tuple[tuple[float, float], ...]
    M: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    angles: np.ndarray = field(init=False, repr=False, compare=False)
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", tuple(map(tuple, self.intervals)))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not self.intervals:
            raise ValueError("at least one foundation required")
        for a, b in self.intervals:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"invalid foundation interval [{a}, {b}]")
        ordered = sorted(self.intervals)
        for (_, b_left), (a_right, _) in zip(ordered, ordered[1:]):
            if a_right - b_left < MIN_SEPARATION:
                raise ValueError(
                    f"foundations separated by {a_right - b_left:.3e} < "
                    f"{MIN_SEPARATION}: near-singular geometry rejected"
                )
        nodes, angles = chebyshev_nodes(self.M)
        half = np.array([(b - a) / 2.0 for a, b in self.intervals])
        center = np.array([(b + a) / 2.0 for a, b in self.intervals])
        points = half[:, None] * nodes[None, :] + center[:, None]
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_city(cls, city: CityConfig, m: int) -> "FoundationGrid":
        return cls(
            intervals=tuple((bl.a, bl.b) for bl in city.buildings), M=m
        )

    @property
    def n_segments(self) -> int:
        return len(self.intervals)

    @property
    def points_per_segment(self) -> int:
        return 2 * self.M

    @property
    def size(self) -> int:
        return self.n_segments * self.points_per_segment


@dataclass
class NystromSystem:
    """Assembled dense collocation system K phi = rhs at one frequency."""

    grid: FoundationGrid
    xi: float
    mode: str
    matrix: np.ndarray
    period: float | None = None
    ewald: EwaldConfig | None = None
    _lu: tuple | None = field(default=None, repr=False)

    def factor(self):
        """LU-factorize once (cached); reject numerically singular systems."""
        if self._lu is None:
            lu, piv = lu_factor(self.matrix)
            scale = np.linalg.norm(self.matrix, np.inf)
            smallest = np.min(np.abs(np.diag(lu)))
            if smallest < _PIVOT_RTOL * scale:
                raise NearResonanceError(
                    f"collocation matrix numerically singular at xi = {self.xi}: "
                    f"pivot {smallest:.3e} < {_PIVOT_RTOL:.0e} * {scale:.3e}"
                )
            self._lu = (lu, piv)
        return self._lu

    @property
    def cell(self) -> PeriodicCell:
        if self.mode != "periodic":
            raise ValueError("free-space system has no periodic cell")
        assert self.period is not None
        return PeriodicCell(P=self.period / 2.0, xi=self.xi)


@dataclass(frozen=True)
class DensitySolution:
    """Solved density values phi_j(g_j(t_k)) with their boundary data."""

    system: NystromSystem
    alpha: np.ndarray
    values: np.ndarray  # (segments, 2M) complex
    residual: float

    @property
    def xi(self) -> float:
        return self.system.xi


def _diagonal_block(
    grid: FoundationGrid,
    xi: float,
    segment: int,
    log_weights: np.ndarray,
    mode: str,
    cell: PeriodicCell | None,
    ewald: EwaldConfig | None,
) -> np.ndarray:
    """Same-segment block: log-split kernel with product quadrature.

    kernel(dx) = A(xi |dx|) ln(xi |dx| / 2) + smooth(dx) and, with
    dx = h (t_l - t_k), ln(xi |dx| / 2) = ln|t_l - t_k| + ln(xi h / 2),
    so the block is  w_gc [smooth + A ln(xi h / 2)] + D A  evaluated
    entrywise, where h is the segment half-length.
    """
    a, b = grid.intervals[segment]
    half = (b - a) / 2.0
    gc_weight = np.pi / (2 * grid.M)
    diff = grid.nodes[:, None] - grid.nodes[None, :]
    z = xi * half * np.abs(diff)
    log_part = split_A(z)
    extra_log = np.log(xi * (b - a) / 4.0)
    if mode == "free":
        smooth = split_B(z)
    else:
        assert cell is not None
        smooth = btilde(cell, half * diff, np.zeros_like(diff), ewald)
    return gc_weight * (smooth + log_part * extra_log) + log_weights * log_part


def assemble(
    grid: FoundationGrid,
    xi: float,
    mode: str = "free",
    period: float | None = None,
    ewald: EwaldConfig | None = None,
) -> NystromSystem:
    """Assemble the dense collocation matrix at frequency xi.

    In periodic mode ``period`` is the full cell width; every block uses the
    quasi-periodic kernel, and only the same-segment blocks need the log
    split (the smooth remainder covers separations up to the image row).
    """
    if not (xi > 0.0) or not np.isfinite(xi):
        raise ValueError(f"xi must be positive and finite, got {xi!r}")
    if mode not in ("free", "periodic"):
        raise ValueError(f"mode must be 'free' or 'periodic', got {mode!r}")

    cell: PeriodicCell | None = None
    if mode == "periodic":
        if period is None or not (period > 0.0):
            raise ValueError("periodic mode requires a positive period")
        span = max(b for _, b in grid.intervals) - min(a for a, _ in grid.intervals)
        if period - span < MIN_SEPARATION:
            raise ValueError(
                f"cell span {span} leaves image separation "
                f"{period - span:.3e} < {MIN_SEPARATION}"
            )
        cell = PeriodicCell(P=period / 2.0, xi=xi)
    elif period is not None:
        raise ValueError("free mode takes no period")

    n_seg = grid.n_segments
    per_seg = grid.points_per_segment
    gc_weight = np.pi / (2 * grid.M)
    log_weights = log_moment_matrix(grid.M)
    flat = grid.points.reshape(-1)
    separation = flat[:, None] - flat[None, :]

    matrix = np.empty((grid.size, grid.size), dtype=complex)
    if mode == "free":
        radius = np.abs(separation)
        same = np.zeros_like(radius, dtype=bool)
        for j in range(n_seg):
            sl = slice(j * per_seg, (j + 1) * per_seg)
            same[sl, sl] = True
        safe = np.where(same, 1.0, radius)
        matrix[:] = gc_weight * hankel0_quarter_i(xi * safe)
    else:
        assert cell is not None
        for k in range(n_seg):
            rows = slice(k * per_seg, (k + 1) * per_seg)
            for j in range(n_seg):
                if j == k:
                    continue
                cols = slice(j * per_seg, (j + 1) * per_seg)
                block_dx = separation[rows, cols]
                matrix[rows, cols] = gc_weight * gper_ewald(
                    cell, block_dx.reshape(-1), 0.0, ewald
                ).reshape(block_dx.shape)

    for j in range(n_seg):
        sl = slice(j * per_seg, (j + 1) * per_seg)
        matrix[sl, sl] = _diagonal_block(
            grid, xi, j, log_weights, mode, cell, ewald
        )

    return NystromSystem(
        grid=grid, xi=xi, mode=mode, matrix=matrix, period=period, ewald=ewald
    )


def solve_density(system: NystromSystem, alpha: Sequence[float]) -> DensitySolution:
    """Solve for the density given per-segment boundary values alpha."""
    alpha_arr = np.asarray(alpha, dtype=float)
    if alpha_arr.shape != (system.grid.n_segments,):
        raise ValueError(
            f"alpha must have one entry per segment "
            f"({system.grid.n_segments}), got shape {alpha_arr.shape}"
        )
    rhs = np.repeat(alpha_arr, system.grid.points_per_segment).astype(complex)
    lu = system.factor()
    phi = lu_solve(lu, rhs)
    residual = float(np.max(np.abs(system.matrix @ phi - rhs)))
    scale = float(np.max(np.abs(alpha_arr)))
    if residual > _RESIDUAL_RTOL * max(scale, 1e-300):
        raise NearResonanceError(
            f"density solve residual {residual:.3e} exceeds "
            f"{_RESIDUAL_RTOL:.0e} * ||alpha||"
        )
    return DensitySolution(
        system=system,
        alpha=alpha_arr,
        values=phi.reshape(system.grid.n_segments, -1),
        residual=residual,
    )


def foundation_force(solution: DensitySolution, segment: int) -> float:
    """Real part of the normal-derivative integral over one foundation.

    The density equals -2 dPsi/dy on the surface and the chart Jacobian
    cancels the edge weight, so the integral reduces to the plain
    Gauss-Chebyshev average  -(1/2) (pi / 2M) sum_k Re phi(t_k).
    """
    grid = solution.system.grid
    if not (0 <= segment < grid.n_segments):
        raise ValueError(f"segment index {segment} out of range")
    return float(
        -0.5 * np.pi / (2 * grid.M) * np.sum(solution.values[segment].real)
    )


def evaluate_field(solution: DensitySolution, x: float, y: float):
    """Evaluate the layer potential at a point strictly above the surface."""
    if not (y > 0.0):
        raise ValueError("evaluate_field requires y > 0")
    system = solution.system
    grid = system.grid
    gc_weight = np.pi / (2 * grid.M)
    dx = x - grid.points.reshape(-1)
    if system.mode == "free":
        kernel = hankel0_quarter_i(system.xi * np.hypot(dx, y))
    else:
        kernel = gper_ewald(system.cell, dx, float(y), system.ewald)
    return complex(gc_weight * np.sum(kernel * solution.values.reshape(-1)))
