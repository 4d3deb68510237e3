"""Half-space Helmholtz kernels: free-space, log-split, and quasi-periodic.

The scattered anti-plane field in the half-space ``y > 0`` is represented by
single-layer potentials whose kernel is the outgoing cylindrical wave

    G(dx, y) = (i/4) H0^(1)( xi * sqrt(dx^2 + y^2) ).

For quadrature of the logarithmic singularity the kernel is split as

    (i/4) H0^(1)(z) = split_A(z) * ln(z/2) + split_B(z),

with ``split_A(z) = -J0(z)/(2 pi)`` and ``split_B`` entire.

For an infinite row of identical cells of period ``2P`` the quasi-periodic
Green's function

    G_per(dx, y) = sum_n G(dx - 2 n P, y)

is evaluated by Ewald summation: a spectral sum over plane-wave modes
(complementary error functions) plus a spatial sum over source images
(exponential integrals), joined by a splitting parameter ``a``.  The mode
wavenumbers are

    gamma_m = sqrt(m^2 p^2 - xi^2),   p = pi / P,

real and positive for evanescent modes.  For propagating modes
(``m^2 p^2 < xi^2``) the public ``gamma_m`` returns ``+i sqrt(xi^2 - m^2 p^2)``
(so that magnitudes are the familiar positive ones), while *inside* the Ewald
formulas the opposite sign ``-i sqrt(xi^2 - m^2 p^2)`` is used: that branch
makes every propagating mode an *outgoing* wave ``exp(+i |gamma| y)``, which
is what the direct lattice sum converges to and what the radiation condition
at large y requires.

``btilde`` is the smooth remainder ``G_per - split_A * ln(xi r / 2)`` whose
value at the source point involves the origin lattice sum
``sum_{n != 0} G(-2 n P, 0)`` (see ``lattice_sum_origin``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .specfun import (
    EULER_GAMMA,
    _erfcx_real,
    _y0_series_sum,
    bessel_j0,
    erfc_complex,
    expint_en,
    hankel0_quarter_i,
)

__all__ = [
    "EwaldConfig",
    "PeriodicCell",
    "WoodAnomalyError",
    "TruncationError",
    "SingularPointError",
    "kernel_free",
    "split_A",
    "split_B",
    "gamma_m",
    "gper_ewald",
    "btilde",
    "lattice_sum_origin",
]

#: Largest argument accepted by split_B: the entire-part series loses all
#: accuracy once its terms reach ~exp(z), so extended precision caps out here.
SPLIT_B_MAX_ARG = 60.0

#: Modes with |gamma_m| below this are treated as Wood anomalies (the
#: spectral term has a 1/gamma_m pole exactly at cut-on).
WOOD_TOL = 1e-8

#: Refuse Ewald evaluation when xi * P / a exceeds this: the spectral and
#: spatial parts then cancel through ~exp((xi P / a)^2) >= e^36, a
#: catastrophic loss of precision in double arithmetic.
MAX_XI_P_OVER_A = 6.0


class WoodAnomalyError(ValueError):
    """A spectral mode is at cut-on (|gamma_m| ~ 0); the row sum is singular."""


class TruncationError(RuntimeError):
    """An Ewald sum hit its term cap before reaching the requested tolerance."""


class SingularPointError(ValueError):
    """Kernel evaluated at a source point (or one of its periodic images)."""


@dataclass(frozen=True)
class EwaldConfig:
    """Tuning knobs for the Ewald evaluation.

    Attributes
    ----------
    a : float
        Splitting parameter balancing spectral against spatial work.
    term_tol : float
        Stop a sum once its next term falls below ``term_tol`` relative to
        the magnitude accumulated so far (absolute when the accumulation is
        still below 1).
    max_spectral, max_spatial, max_inner : int
        Caps on spectral modes, source images, and the inner series of the
        spatial sum.  Exceeding a cap raises :class:`TruncationError`.
        The inner series needs up to ~(xi P / a)^2 + 40 terms before its
        factorial decay kicks in, so the cap must stay comfortably above
        that for the admissible xi P / a <= 6.
    """

    a: float = 2.0
    term_tol: float = 1e-16
    max_spectral: int = 200
    max_spatial: int = 50
    max_inner: int = 120

    def __post_init__(self):
        if not (self.a > 0.0):
            raise ValueError(f"Ewald splitting parameter must be > 0, got {self.a}")
        if not (self.term_tol > 0.0):
            raise ValueError(f"term_tol must be > 0, got {self.term_tol}")
        for name in ("max_spectral", "max_spatial", "max_inner"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class PeriodicCell:
    """One period of an infinite row: half-period P (full period 2P) and
    nondimensional wavenumber xi."""

    P: float
    xi: float

    def __post_init__(self):
        if not (self.P > 0.0):
            raise ValueError(f"half-period P must be > 0, got {self.P}")
        if not (self.xi > 0.0):
            raise ValueError(f"wavenumber xi must be > 0, got {self.xi}")

    @property
    def mode_spacing(self) -> float:
        """Plane-wave mode spacing p = pi / P."""
        return np.pi / self.P


_DEFAULT_CONFIG = EwaldConfig()


# ----------------------------------------------------------------------------
# free-space kernel and its log split
# ----------------------------------------------------------------------------


def kernel_free(xi: float, dx, y):
    """Free-space outgoing kernel (i/4) H0^(1)(xi sqrt(dx^2 + y^2)).

    Raises :class:`SingularPointError` if any evaluation point coincides
    with the source.
    """
    dxa = np.asarray(dx, dtype=float)
    ya = np.asarray(y, dtype=float)
    r = np.hypot(dxa, ya)
    if np.any(r == 0.0):
        raise SingularPointError("kernel_free evaluated at its source point")
    return hankel0_quarter_i(xi * r)


def split_A(z):
    """Coefficient of ln(z/2) in the kernel split: -J0(z) / (2 pi)."""
    return -bessel_j0(z) / (2.0 * np.pi)


def split_B(z):
    """Entire remainder of the kernel split.

    split_B(z) = (i/4 - gamma/(2 pi)) J0(z)
                 + (1/(2 pi)) sum_{m>=1} h_m (-1)^m (z/2)^(2m) / (m!)^2

    with h_m the m-th harmonic number, so that
    split_A(z) ln(z/2) + split_B(z) = (i/4) H0^(1)(z) and
    Im split_B(z) = J0(z)/4 exactly.  Accepts 0 <= z <= SPLIT_B_MAX_ARG.
    """
    arr = np.asarray(z, dtype=float)
    work = np.atleast_1d(arr)
    if np.any(work < 0.0):
        raise ValueError("split_B requires z >= 0")
    if np.any(work > SPLIT_B_MAX_ARG):
        raise ValueError(
            f"split_B argument exceeds {SPLIT_B_MAX_ARG}; the entire-part "
            "series has no accuracy left there"
        )
    j0 = np.asarray(bessel_j0(work), dtype=float)
    series = _y0_series_sum(work).astype(float)
    vals = (0.25j - EULER_GAMMA / (2.0 * np.pi)) * j0 + series / (2.0 * np.pi)
    if arr.ndim == 0:
        return complex(vals[0])
    return vals.reshape(arr.shape)


# ----------------------------------------------------------------------------
# quasi-periodic machinery
# ----------------------------------------------------------------------------


def gamma_m(cell: PeriodicCell, m: int) -> complex:
    """Mode wavenumber gamma_m = sqrt(m^2 p^2 - xi^2), p = pi/P.

    Returns the positive real root for evanescent modes and
    ``+i sqrt(xi^2 - m^2 p^2)`` for propagating ones (Re >= 0, Im >= 0).

    Raises
    ------
    WoodAnomalyError
        If |gamma_m| < 1e-8, i.e. the mode is at cut-on.
    """
    p = cell.mode_spacing
    t = (m * p) ** 2 - cell.xi**2
    mag = np.sqrt(abs(t))
    if mag < WOOD_TOL:
        raise WoodAnomalyError(
            f"mode m={m} is at cut-on: |gamma_m| = {mag:.3e} < {WOOD_TOL}"
        )
    return complex(mag) if t > 0.0 else 1j * mag


def _gamma_outgoing(cell: PeriodicCell, m: int) -> complex:
    """gamma_m with the branch used inside the Ewald formulas.

    Evanescent modes keep the positive real root; propagating modes use
    ``-i sqrt(xi^2 - m^2 p^2)`` so that exp(-gamma y) is the *outgoing* wave.
    (With the +i branch the spectral sum converges to the complex conjugate
    row sum, which violates the radiation condition.)
    """
    g = gamma_m(cell, m)
    return g if g.imag == 0.0 else -g


def _check_wood(cell: PeriodicCell, cfg: EwaldConfig) -> None:
    """Scan all modes that could be near cut-on and raise on an anomaly."""
    p = cell.mode_spacing
    m_top = int(np.ceil(cell.xi / p)) + 1
    for m in range(0, m_top + 1):
        gamma_m(cell, m)  # raises WoodAnomalyError at cut-on


def _require_splitting_ok(cell: PeriodicCell, cfg: EwaldConfig) -> None:
    ratio = cell.xi * cell.P / cfg.a
    if ratio > MAX_XI_P_OVER_A:
        raise ValueError(
            f"xi*P/a = {ratio:.3f} > {MAX_XI_P_OVER_A}: catastrophic "
            "cancellation risk in the Ewald split; increase a or reduce xi*P"
        )


def gper_ewald(cell: PeriodicCell, dx, y, cfg: EwaldConfig | None = None):
    """Quasi-periodic Green's function G_per(dx, y) by Ewald summation.

    Parameters
    ----------
    cell : PeriodicCell
        Period and wavenumber.
    dx, y : float or array_like
        Horizontal separation(s) (any value; reduced into the central
        period) and height(s) y >= 0.
    cfg : EwaldConfig, optional
        Tuning parameters; defaults are suitable for xi * P / a up to ~6.

    Returns
    -------
    complex or ndarray
        G_per = (1/(8P)) sum_m e^{i p m dx} / gamma_m *
                    [e^{gamma_m y} erfc(gamma_m P/a + a y/(2P))
                     + e^{-gamma_m y} erfc(gamma_m P/a - a y/(2P))]
              + (1/(4 pi)) sum_m sum_{n>=0} (xi P/a)^{2n} / n! *
                    E_{n+1}(a^2 r_m^2 / (4 P^2)),
        r_m = sqrt((dx - 2 m P)^2 + y^2), with the outgoing propagating
        branch of gamma_m.

    Raises
    ------
    WoodAnomalyError, SingularPointError, TruncationError, ValueError
    """
    if cfg is None:
        cfg = _DEFAULT_CONFIG
    _require_splitting_ok(cell, cfg)
    _check_wood(cell, cfg)

    dx_arr = np.asarray(dx, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    scalar = dx_arr.ndim == 0 and y_arr.ndim == 0
    dx_b, y_b = np.broadcast_arrays(dx_arr, y_arr)
    dx_b = np.atleast_1d(dx_b).astype(float)
    y_b = np.atleast_1d(y_b).astype(float)
    if np.any(y_b < 0.0):
        raise ValueError("gper_ewald requires y >= 0")
    shape = dx_b.shape
    dxw = dx_b - 2.0 * cell.P * np.round(dx_b / (2.0 * cell.P))

    P = cell.P
    a = cfg.a
    p = cell.mode_spacing
    v = a * y_b / (2.0 * P)

    total = np.zeros(shape, dtype=complex)

    # ---- spectral sum over modes ------------------------------------------
    m_prop = int(np.floor(cell.xi / p))  # largest propagating |m|
    small_streak = 0
    m = 0
    while True:
        if m > cfg.max_spectral:
            raise TruncationError(
                f"spectral sum: cap max_spectral={cfg.max_spectral} hit at "
                f"tol={cfg.term_tol} (xi={cell.xi}, P={P}, a={a})"
            )
        gam = _gamma_outgoing(cell, m)
        u = gam * P / a
        if gam.imag == 0.0:
            ur = gam.real * P / a
            damp = np.exp(-(ur * ur + v * v))
            bracket = damp * _erfcx_real(ur + v) + np.where(
                ur >= v,
                damp * _erfcx_real(np.abs(ur - v)),
                2.0 * np.exp(-2.0 * ur * v) - damp * _erfcx_real(np.abs(v - ur)),
            )
            bracket = bracket.astype(complex)
        else:
            gy = gam * y_b
            bracket = np.exp(gy) * erfc_complex(u + v) + np.exp(-gy) * erfc_complex(
                u - v
            )
        phase = np.exp(1j * p * m * dxw) if m else np.ones(shape)
        if m:
            phase = phase + np.exp(-1j * p * m * dxw)  # +m and -m modes
        term = phase * bracket / (8.0 * P * gam)
        total += term
        tmax = np.max(np.abs(term))
        scale = max(1.0, float(np.max(np.abs(total))))
        if m > m_prop and tmax < cfg.term_tol * scale:
            small_streak += 1
            if small_streak >= 2:
                break
        else:
            small_streak = 0
        m += 1

    # ---- spatial sum over source images ------------------------------------
    b2 = (cell.xi * P / a) ** 2
    factor = 1.0 / (4.0 * np.pi)

    def image_contribution(mimg: int) -> np.ndarray:
        rsq = (dxw - 2.0 * mimg * P) ** 2 + y_b**2
        if np.any(rsq == 0.0):
            raise SingularPointError(
                f"gper_ewald evaluated at image m={mimg} of the source point"
            )
        xarg = (a * a) * rsq / (4.0 * P * P)
        # inner series sum_n b2^n / n! * E_{n+1}(xarg) via the upward
        # recurrence; its absolute rounding (~eps * e^{b2}) matches the
        # intrinsic cancellation level of the Ewald split itself.
        e_cur = np.asarray(expint_en(1, xarg))
        emx = np.exp(-xarg)
        coef = 1.0
        acc = e_cur.copy()
        for n in range(1, cfg.max_inner + 1):
            e_cur = (emx - xarg * e_cur) / n
            coef *= b2 / n
            term = coef * e_cur
            acc += term
            if np.max(np.abs(term)) < cfg.term_tol * max(1.0, float(np.max(np.abs(acc)))):
                return factor * acc
        raise TruncationError(
            f"spatial inner series: cap max_inner={cfg.max_inner} hit "
            f"(xi*P/a = {np.sqrt(b2):.3f}, image m={mimg})"
        )

    total += image_contribution(0)
    for k in range(1, cfg.max_spatial + 1):
        shell = image_contribution(k) + image_contribution(-k)
        total += shell
        if np.max(np.abs(shell)) < cfg.term_tol * max(1.0, float(np.max(np.abs(total)))):
            break
    else:
        raise TruncationError(
            f"spatial sum: cap max_spatial={cfg.max_spatial} hit at "
            f"tol={cfg.term_tol}"
        )

    if scalar:
        return complex(total.reshape(-1)[0])
    return total.reshape(shape)


def lattice_sum_origin(cell: PeriodicCell, cfg: EwaldConfig | None = None) -> complex:
    """The origin lattice sum  sum_{n != 0} (i/4) H0^(1)(2 |n| P xi).

    Evaluated by the Ewald split:

        (1/(4P)) sum_m erfc(gamma_m P / a) / gamma_m
        + (1/(4 pi)) sum_{m != 0} sum_{n>=0} (xi P/a)^{2n}/n! E_{n+1}(a^2 m^2)
        + (1/(4 pi)) sum_{n>=1} (xi P/a)^{2n} / (n n!)
        + (1/(2 pi)) ln(xi P / a) + gamma/(4 pi) - i/4,

    with the outgoing propagating branch of gamma_m.  The two trailing
    constants come from subtracting the free-space kernel's expansion at the
    origin; dropping them (or using the +i branch) is inconsistent with the
    directly accelerated lattice sum.
    """
    if cfg is None:
        cfg = _DEFAULT_CONFIG
    _require_splitting_ok(cell, cfg)
    _check_wood(cell, cfg)

    P = cell.P
    a = cfg.a
    b2 = (cell.xi * P / a) ** 2

    # spectral modes at the origin: bracket reduces to 2 erfc(gamma P / a)
    total = 0.0 + 0.0j
    small_streak = 0
    m = 0
    m_prop = int(np.floor(cell.xi / cell.mode_spacing))
    while True:
        if m > cfg.max_spectral:
            raise TruncationError(
                f"origin spectral sum: cap max_spectral={cfg.max_spectral} hit"
            )
        gam = _gamma_outgoing(cell, m)
        weight = 1.0 if m == 0 else 2.0
        if gam.imag == 0.0:
            term = weight * np.exp(-(gam.real * P / a) ** 2) * float(
                _erfcx_real(np.asarray(gam.real * P / a))
            ) / (4.0 * P * gam.real)
        else:
            term = weight * complex(erfc_complex(gam * P / a)) / (4.0 * P * gam)
        total += term
        if m > m_prop and abs(term) < cfg.term_tol * max(1.0, abs(total)):
            small_streak += 1
            if small_streak >= 2:
                break
        else:
            small_streak = 0
        m += 1

    # spatial images m != 0 (+- pairs are equal)
    for mimg in range(1, cfg.max_spatial + 1):
        xarg = a * a * mimg * mimg
        e_cur = expint_en(1, xarg)
        emx = np.exp(-xarg)
        coef = 1.0
        acc = e_cur
        for n in range(1, cfg.max_inner + 1):
            e_cur = (emx - xarg * e_cur) / n
            coef *= b2 / n
            term = coef * e_cur
            acc += term
            if abs(term) < cfg.term_tol * max(1.0, abs(acc)):
                break
        else:
            raise TruncationError(
                f"origin spatial inner series: cap max_inner={cfg.max_inner} hit"
            )
        contrib = 2.0 * acc / (4.0 * np.pi)
        total += contrib
        if abs(contrib) < cfg.term_tol * max(1.0, abs(total)):
            break
    else:
        raise TruncationError(
            f"origin spatial sum: cap max_spatial={cfg.max_spatial} hit"
        )

    # the n >= 1 series of the m = 0 image (E_{n+1}(0) = 1/n)
    coef = 1.0
    series = 0.0
    for n in range(1, cfg.max_inner + 1):
        coef *= b2 / n
        term = coef / n
        series += term
        if term < cfg.term_tol * max(1.0, series):
            break
    else:
        raise TruncationError(
            f"origin m=0 series: cap max_inner={cfg.max_inner} hit"
        )
    total += series / (4.0 * np.pi)

    # constants from subtracting the free kernel's origin expansion
    total += (
        np.log(cell.xi * P / a) / (2.0 * np.pi)
        + EULER_GAMMA / (4.0 * np.pi)
        - 0.25j
    )
    return complex(total)


def btilde(cell: PeriodicCell, dx, y, cfg: EwaldConfig | None = None):
    """Smooth remainder of the quasi-periodic kernel on the central period.

    btilde(dx, y) = G_per(dx, y) - split_A(xi r) ln(xi r / 2),
    r = sqrt(dx^2 + y^2); at the source point it takes the finite value
    (i pi - 2 gamma)/(4 pi) + lattice_sum_origin.  Smooth for |dx| < 2P
    (the subtraction removes only the source-point log singularity; the
    nearest remaining one sits on the first image row at |dx| = 2P).
    """
    if cfg is None:
        cfg = _DEFAULT_CONFIG
    dx_arr = np.asarray(dx, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    scalar = dx_arr.ndim == 0 and y_arr.ndim == 0
    dx_b, y_b = np.broadcast_arrays(dx_arr, y_arr)
    dx_b = np.atleast_1d(dx_b).astype(float)
    y_b = np.atleast_1d(y_b).astype(float)
    if np.any(np.abs(dx_b) >= 2.0 * cell.P):
        raise ValueError(
            "btilde requires |dx| < 2P (inside the first image row)"
        )
    r = np.hypot(dx_b, y_b)
    out = np.empty(r.shape, dtype=complex)
    at_origin = r == 0.0
    if np.any(at_origin):
        origin_val = (1j * np.pi - 2.0 * EULER_GAMMA) / (4.0 * np.pi) + (
            lattice_sum_origin(cell, cfg)
        )
        out[at_origin] = origin_val
    if np.any(~at_origin):
        sel = ~at_origin
        z = cell.xi * r[sel]
        gper = gper_ewald(cell, dx_b[sel], y_b[sel], cfg)
        out[sel] = gper - np.asarray(split_A(z)) * np.log(z / 2.0)
    if scalar:
        return complex(out.reshape(-1)[0])
    return out.reshape(dx_b.shape)
