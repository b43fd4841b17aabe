"""Closed-form parabolic kernels and kernel inequalities.

Contains the constant-coefficient heat kernel, the half-line Dirichlet Green
function built by reflection with exponential growth factor, its time
derivative and the sign-region threshold t0, a two-sided Gaussian-sandwich
fitter for numerical kernels, and the one-step kernel ratio check
p(tau+1,x;0) >= sigma p(tau,x;0).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grids import Grid, GridFunction
from .model import CoefficientField
from .solver import fundamental_solution

KERNEL_FLOOR = 1e-12


@dataclass(frozen=True)
class HalfLineParams:
    """Diffusivity and linear growth rate of v_t = a v_xx + lam_lin v on x>0.

    lam_lin = 0 is accepted for the pure-heat comparisons; the sign-region
    threshold t0 requires a positive rate.
    """

    a: float
    lam_lin: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.lam_lin < 0:
            raise ValueError("need a > 0 and lam_lin >= 0.")


def gaussian_kernel(D: float, t: float, x, dim: int = 1):
    """Mass-one heat kernel exp(-|x|^2/(4Dt)) / (4 pi D t)^(dim/2).

    ``x`` is the signed position in 1D or the radial distance in general.
    """
    if D <= 0 or t <= 0:
        raise ValueError("D and t must be positive.")
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2.")
    x = np.asarray(x, dtype=float)
    val = np.exp(-(x**2) / (4.0 * D * t)) / (4.0 * math.pi * D * t) ** (dim / 2.0)
    return float(val) if val.ndim == 0 else val


def half_line_green(pp: HalfLineParams, t: float, x, y):
    """Dirichlet Green function on the half-line: reflected Gaussians with
    growth factor exp(lam t); vanishes at x=0 and is symmetric in (x,y)."""
    if t <= 0:
        raise ValueError("t must be positive.")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("x and y must be nonnegative on the half-line.")
    pref = math.exp(pp.lam_lin * t) / math.sqrt(4.0 * math.pi * pp.a * t)
    q = 1.0 / (4.0 * pp.a * t)
    val = pref * (np.exp(-((x - y) ** 2) * q) - np.exp(-((x + y) ** 2) * q))
    return float(val) if np.ndim(val) == 0 else val


def half_line_green_dt(pp: HalfLineParams, t: float, x, y):
    """Exact time derivative of the half-line Green function."""
    if t <= 0:
        raise ValueError("t must be positive.")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("x and y must be nonnegative on the half-line.")
    a, lam = pp.a, pp.lam_lin
    pref = math.exp(lam * t) / math.sqrt(4.0 * math.pi * a * t**3)
    q = 1.0 / (4.0 * a * t)
    sm = (x - y) ** 2 * q
    sp = (x + y) ** 2 * q
    val = pref * (np.exp(-sm) * (lam * t - 0.5 + sm) - np.exp(-sp) * (lam * t - 0.5 + sp))
    return float(val) if np.ndim(val) == 0 else val


def t0_threshold(pp: HalfLineParams) -> float:
    """Time threshold (2 lam)^-1 + e (e-1)^-1 lam^-1 of the sign region."""
    lam = pp.lam_lin
    if lam <= 0:
        raise ValueError("t0 threshold requires a positive linear rate.")
    return 1.0 / (2.0 * lam) + math.e / ((math.e - 1.0) * lam)


def sign_region_x(pp: HalfLineParams, t: float) -> float:
    """Left edge sqrt(8 a t) of the guaranteed positivity region."""
    return math.sqrt(8.0 * pp.a * t)


def halfline_quadrature(
    pp: HalfLineParams, v0: GridFunction, t: float, richardson: bool = False
) -> GridFunction:
    """Trapezoid quadrature of the Green representation of the Dirichlet part:
    w(t,x) = integral of G(t,x,y) v0(y) dy over the truncated half-line.

    ``richardson=True`` extrapolates against the double-spacing trapezoid rule
    on the same samples (requires an even cell count).
    """
    if v0.dim != 1 or abs(v0.origin[0]) > 1e-12:
        raise ValueError("v0 must live on a half-line grid starting at 0.")
    vals = v0.values
    if np.min(vals) < 0:
        raise ValueError("v0 must be nonnegative.")
    if np.max(np.abs(vals[-2:])) > 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        warnings.warn("v0 support touches the truncation edge.", RuntimeWarning, stacklevel=2)
    y = v0.axis(0)
    G = half_line_green(pp, t, y[:, None], y[None, :])  # G[i,j] = G(t, x_i, y_j)

    def trapezoid(sub: slice, h: float) -> np.ndarray:
        weights = np.full(y[sub].size, h)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        return G[:, sub] @ (weights * vals[sub])

    w = trapezoid(slice(None), v0.h)
    if richardson:
        if (y.size - 1) % 2:
            raise ValueError("richardson refinement needs an even cell count.")
        coarse = trapezoid(slice(None, None, 2), 2.0 * v0.h)
        w = (4.0 * w - coarse) / 3.0
    return v0.with_values(w)


@dataclass(frozen=True)
class GreenScanResult:
    n_points: int
    n_violations: int
    min_value: float
    worst: tuple[float, float, float, float, float]  # (a, lam, t, x, y)
    rows: Optional[list[tuple[float, ...]]] = None

    @property
    def passed(self) -> bool:
        return self.n_violations == 0


def scan_green_dt_region(
    a_values: Sequence[float] = (0.5, 1.0, 2.0),
    lam_values: Sequence[float] = (0.5, 1.0, 2.0),
    n_t: int = 20,
    n_x: int = 50,
    n_y: int = 100,
    t_span: tuple[float, float] = (1.0, 5.0),
    x_offset: float = 10.0,
    y_max: float = 20.0,
    keep_rows: bool = False,
) -> GreenScanResult:
    """Scan G_t over the guaranteed region t in [t0, 5 t0], x in
    [sqrt(8at), sqrt(8at)+10], y in (0, 20]; counts sign violations."""
    n_points = 0
    n_viol = 0
    min_val = math.inf
    worst = (math.nan,) * 5
    rows: list[tuple[float, ...]] = []
    ys = np.linspace(y_max / n_y, y_max, n_y)
    for a in a_values:
        for lam in lam_values:
            pp = HalfLineParams(a, lam)
            t0 = t0_threshold(pp)
            for t in np.linspace(t_span[0] * t0, t_span[1] * t0, n_t):
                x_lo = sign_region_x(pp, t)
                xs = np.linspace(x_lo, x_lo + x_offset, n_x)
                vals = half_line_green_dt(pp, float(t), xs[:, None], ys[None, :])
                n_points += vals.size
                n_viol += int(np.count_nonzero(vals <= 0))
                i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
                if vals[i, j] < min_val:
                    min_val = float(vals[i, j])
                    worst = (a, lam, float(t), float(xs[i]), float(ys[j]))
                if keep_rows:
                    for ii in range(0, n_x, max(1, n_x // 5)):
                        for jj in range(0, n_y, max(1, n_y // 5)):
                            rows.append(
                                (
                                    a,
                                    lam,
                                    float(t),
                                    float(xs[ii]),
                                    float(ys[jj]),
                                    float(half_line_green(pp, float(t), xs[ii], ys[jj])),
                                    float(vals[ii, jj]),
                                )
                            )
    return GreenScanResult(
        n_points=n_points,
        n_violations=n_viol,
        min_value=min_val,
        worst=worst,
        rows=rows if keep_rows else None,
    )


@dataclass(frozen=True)
class AronsonFit:
    """Smallest sandwich constants making both two-sided Gaussian bounds hold
    on the window; K is the literal-form constant, K_gaussian the variant with
    the (4 pi t)^(N/2) normalization absorbed (exact Gaussian -> 1)."""

    K: float
    K_gaussian: float
    x_max: float
    times: tuple[float, ...]
    floor: float
    n_points: int
    witness: tuple[float, float]  # (t, distance) of the tightest constraint

    def __post_init__(self) -> None:
        if self.K < 1.0:
            raise ValueError("sandwich constant must be >= 1.")


class AronsonFitError(RuntimeError):
    """No finite sandwich constant certifies the bounds on the window."""


def _collect_kernel_samples(
    kernels: Sequence[tuple[float, GridFunction]],
    source,
    x_max: float,
    floor: float,
):
    ts, ds, ps = [], [], []
    src = np.atleast_1d(np.asarray(source, dtype=float))
    for t, gf in kernels:
        if gf.dim == 1:
            d = np.abs(gf.axis(0) - src[0])
        else:
            X, Y = gf.points()
            d = np.sqrt((X - src[0]) ** 2 + (Y - src[1]) ** 2)
        keep = (d <= x_max) & (gf.values >= floor)
        ts.append(np.full(int(np.count_nonzero(keep)), t))
        ds.append(d[keep].ravel())
        ps.append(gf.values[keep].ravel())
    t = np.concatenate(ts)
    d = np.concatenate(ds)
    p = np.concatenate(ps)
    if t.size == 0:
        raise AronsonFitError("window is empty after floor filtering.")
    return t, d, p


def _bisect_smallest(feasible, k_lo: float, k_hi_start: float, tol: float, k_max: float) -> float:
    hi = k_hi_start
    while not feasible(hi):
        hi *= 2.0
        if hi > k_max:
            raise AronsonFitError(f"no sandwich constant below {k_max:g} fits the window.")
    lo = k_lo
    if feasible(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def fit_aronson_K(
    kernels: Sequence[tuple[float, GridFunction]],
    source,
    x_max: float,
    floor: float = KERNEL_FLOOR,
    dim: int = 1,
    tol: float = 1e-3,
    k_max: float = 1e6,
) -> AronsonFit:
    """Fit the smallest K with
    exp(-K d^2/t)/(K t^(N/2)) <= p(t,x;y) <= K exp(-d^2/(K t))/t^(N/2)
    at every included grid point (d = |x-y|), by bisection to ``tol``."""
    t, d, p = _collect_kernel_samples(kernels, source, x_max, floor)
    d2t = d**2 / t
    tn = t ** (dim / 2.0)
    logp = np.log(p)

    def feasible_literal(K: float) -> bool:
        lower_ok = np.all(-K * d2t - math.log(K) - np.log(tn) <= logp + 1e-12)
        upper_ok = np.all(logp <= math.log(K) - d2t / K - np.log(tn) + 1e-12)
        return bool(lower_ok and upper_ok)

    def feasible_gaussian(K: float) -> bool:
        norm = np.log((4.0 * math.pi * t) ** (dim / 2.0))
        lower_ok = np.all(-K * d2t / 4.0 - math.log(K) - norm <= logp + 1e-12)
        upper_ok = np.all(logp <= math.log(K) - d2t / (4.0 * K) - norm + 1e-12)
        return bool(lower_ok and upper_ok)

    K = _bisect_smallest(feasible_literal, 1.0, 2.0, tol, k_max)
    K_gauss = _bisect_smallest(feasible_gaussian, 1.0, 2.0, tol, k_max)

    slack_lower = logp - (-K * d2t - math.log(K) - np.log(tn))
    slack_upper = (math.log(K) - d2t / K - np.log(tn)) - logp
    slack = np.minimum(slack_lower, slack_upper)
    i = int(np.argmin(slack))
    times = tuple(sorted(set(float(tt) for tt in t)))
    return AronsonFit(
        K=float(K),
        K_gaussian=float(K_gauss),
        x_max=x_max,
        times=times,
        floor=floor,
        n_points=int(t.size),
        witness=(float(t[i]), float(d[i])),
    )


@dataclass(frozen=True)
class KernelRatioReport:
    """Outcome of the one-step kernel ratio check over a window."""

    tau: float
    sigma: float
    min_ratio: float
    passed: bool
    argmin_x: float
    n_points: int
    constant_coeff_prediction: float
    rows: Optional[list[tuple[float, float, float, float]]] = None


def check_kernel_ratio(
    coeff: CoefficientField,
    tau: float,
    sigma: float,
    x_max: float = 15.0,
    half_width: float = 40.0,
    h: float = 0.05,
    dim: int = 1,
    floor: float = KERNEL_FLOOR,
    keep_rows: bool = False,
) -> KernelRatioReport:
    """Evolve the fundamental solution from a point mass at 0 and test
    min over the window of p(tau+1, x; 0) / p(tau, x; 0) against sigma."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0,1).")
    if tau <= 0:
        raise ValueError("tau must be positive.")
    grid = Grid.centered(half_width, h, dim)
    origin = (0.0,) * dim
    result = fundamental_solution(coeff, [tau, tau + 1.0], origin, grid)
    p_tau, p_tau1 = result.kernels[0], result.kernels[1]
    if dim == 1:
        dist = np.abs(p_tau.axis(0))
        coords = p_tau.axis(0)
    else:
        X, Y = p_tau.points()
        dist = np.sqrt(X**2 + Y**2)
        coords = X
    keep = (dist <= x_max) & (p_tau.values >= floor) & (p_tau1.values >= floor)
    if not np.any(keep):
        raise AronsonFitError("window is empty after floor filtering.")
    ratio = p_tau1.values[keep] / p_tau.values[keep]
    i = int(np.argmin(ratio))
    min_ratio = float(ratio[i])
    rows = None
    if keep_rows:
        xs = coords[keep].ravel() if dim == 1 else coords[keep].ravel()
        rows = [(tau, sigma, float(x), float(r)) for x, r in zip(xs, ratio.ravel())]
    return KernelRatioReport(
        tau=tau,
        sigma=sigma,
        min_ratio=min_ratio,
        passed=bool(min_ratio >= sigma),
        argmin_x=float(coords[keep].ravel()[i]),
        n_points=int(np.count_nonzero(keep)),
        constant_coeff_prediction=(tau / (tau + 1.0)) ** (dim / 2.0),
        rows=rows,
    )
