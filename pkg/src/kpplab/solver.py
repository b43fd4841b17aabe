"""Time integration of the reaction-diffusion problem on a truncated grid.

The reference scheme is explicit Euler with a divergence-form flux using
face-centered coefficients; under the CFL restriction the update is monotone,
so discrete comparison and maximum principles hold. An IMEX variant (implicit
diffusion via a banded Cholesky solve, 1D) is available for stiff sweeps.
Boundary nodes are held fixed (Dirichlet truncation; zero for decaying data).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .grids import Grid, GridFunction
from .model import CoefficientField, Problem, Reaction, make_initial, validate_problem

MAXPRINCIPLE_TOL = 1e-12


class NumericalError(RuntimeError):
    """Solver produced values outside its guaranteed range (NaN, overflow, leak)."""


class StabilityError(NumericalError):
    """Requested time step violates the scheme's stability bound."""


@dataclass(frozen=True)
class SolverConfig:
    h: float
    t_final: float
    dt: float | str = "auto"
    scheme: str = "explicit-euler"
    snapshot_every: Optional[float] = None
    snapshot_times: Optional[tuple[float, ...]] = None
    boundary: str = "dirichlet-zero"
    boundary_leak_tolerance: float = 1e-8
    hard_leak_threshold: float = 1e-3

    def __post_init__(self) -> None:
        if self.h <= 0 or self.t_final <= 0:
            raise ValueError("h and t_final must be positive.")
        if self.scheme not in ("explicit-euler", "imex-diffusion-implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}.")
        if self.boundary != "dirichlet-zero":
            raise ValueError(f"unknown boundary treatment {self.boundary!r}.")
        if isinstance(self.dt, str) and self.dt != "auto":
            raise ValueError("dt must be a positive number or 'auto'.")
        if not isinstance(self.dt, str) and self.dt <= 0:
            raise ValueError("dt must be a positive number or 'auto'.")

    def resolved_snapshot_times(self) -> np.ndarray:
        if self.snapshot_times is not None:
            ts = np.asarray(sorted(set(float(t) for t in self.snapshot_times)))
            if ts.size and ts[0] < 0:
                raise ValueError("snapshot times must be nonnegative.")
        else:
            every = self.snapshot_every if self.snapshot_every is not None else self.t_final
            n = int(math.floor(self.t_final / every + 1e-9))
            ts = np.arange(1, n + 1) * every
        ts = ts[ts <= self.t_final + 1e-9]
        return np.concatenate(([0.0], ts[ts > 1e-12]))


@dataclass(frozen=True)
class Snapshot:
    t: float
    u: GridFunction
    rhs: Optional[GridFunction]


@dataclass
class Trajectory:
    problem: Problem
    config: SolverConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    leak_max: float = 0.0

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def snapshot_at(self, t: float, tol: float = 1e-9) -> Snapshot:
        for s in self.snapshots:
            if abs(s.t - t) <= tol:
                return s
        raise KeyError(f"no snapshot at t={t}.")

    def __iter__(self):
        return iter(self.snapshots)


def _compile_reaction(r: Reaction, points) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    """Close over the spatial structure once so stepping only touches u."""
    if r.kind == "zero":
        return None
    if r.kind == "logistic":
        rate = r.rate
        return lambda u: rate * u * (1.0 - u)
    if r.kind == "piecewise-kpp":
        x = points[0] if isinstance(points, (tuple, list)) else points
        w = r.blend_weight(x)
        return lambda u: w * r.tent(u, r.rate_plus) + (1.0 - w) * r.tent(u, r.rate_minus)
    if r.kind == "separable":
        x = points[0] if isinstance(points, (tuple, list)) else points
        rx = np.asarray(r.r_func(np.asarray(x, dtype=float)), dtype=float)
        return lambda u: rx * np.asarray(r.g_func(u), dtype=float)
    raise ValueError(f"unknown reaction kind {r.kind!r}.")


class _Stepper:
    """Precomputed faces and reaction closure for one equation on one grid."""

    def __init__(self, coeff: CoefficientField, reaction: Reaction, grid: Grid):
        self.reaction = reaction
        self.grid = grid
        self.h = grid.h
        self.inv_h2 = 1.0 / grid.h**2
        if grid.dim == 1:
            x = grid.axis(0)
            self.faces = coeff.evaluate(0.5 * (x[:-1] + x[1:]))
            pts = x[1:-1]
            self.a_max = float(np.max(self.faces))
        else:
            x, y = grid.axis(0), grid.axis(1)
            xf = 0.5 * (x[:-1] + x[1:])
            yf = 0.5 * (y[:-1] + y[1:])
            XFx, YFx = np.meshgrid(xf, y, indexing="ij")
            XFy, YFy = np.meshgrid(x, yf, indexing="ij")
            self.faces_x = coeff.evaluate((XFx, YFx))
            self.faces_y = coeff.evaluate((XFy, YFy))
            X, Y = np.meshgrid(x[1:-1], y[1:-1], indexing="ij")
            pts = (X, Y)
            self.a_max = float(max(np.max(self.faces_x), np.max(self.faces_y)))
        self.f_interior = _compile_reaction(reaction, pts)
        self._chol = None
        self._chol_dt = None

    def stability_bound(self) -> float:
        return self.h**2 / (2.0 * self.grid.dim * self.a_max)

    def auto_dt(self) -> float:
        dt = 0.9 * self.stability_bound()
        l_lip = self.reaction.lipschitz_bound()
        if l_lip > 0:
            dt = min(dt, 0.5 / l_lip)
        return dt

    def rhs_interior(self, u: np.ndarray) -> np.ndarray:
        if self.grid.dim == 1:
            flux = self.faces * (u[1:] - u[:-1])
            div = (flux[1:] - flux[:-1]) * self.inv_h2
            inner = u[1:-1]
        else:
            fx = self.faces_x * (u[1:, :] - u[:-1, :])
            fy = self.faces_y * (u[:, 1:] - u[:, :-1])
            div = ((fx[1:, :] - fx[:-1, :])[:, 1:-1] + (fy[:, 1:] - fy[:, :-1])[1:-1, :]) * self.inv_h2
            inner = u[1:-1, 1:-1]
        if self.f_interior is not None:
            div = div + self.f_interior(inner)
        return div

    def rhs(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        if self.grid.dim == 1:
            out[1:-1] = self.rhs_interior(u)
        else:
            out[1:-1, 1:-1] = self.rhs_interior(u)
        return out

    def step_explicit(self, u: np.ndarray, dt: float) -> np.ndarray:
        new = u.copy()
        if self.grid.dim == 1:
            new[1:-1] += dt * self.rhs_interior(u)
        else:
            new[1:-1, 1:-1] += dt * self.rhs_interior(u)
        return new

    def step_imex(self, u: np.ndarray, dt: float) -> np.ndarray:
        """Implicit diffusion, explicit reaction; 1D banded Cholesky solve."""
        if self.grid.dim != 1:
            raise NotImplementedError("IMEX scheme is implemented in 1D only.")
        if self._chol is None or self._chol_dt != dt:
            n_in = self.grid.npoints[0] - 2
            diag = 1.0 + dt * (self.faces[:-1] + self.faces[1:]) * self.inv_h2
            upper = -dt * self.faces[1:-1] * self.inv_h2
            ab = np.zeros((2, n_in))
            ab[0, 1:] = upper
            ab[1, :] = diag
            self._chol = cholesky_banded(ab, lower=False)
            self._chol_dt = dt
        star = u[1:-1].copy()
        if self.f_interior is not None:
            star += dt * self.f_interior(u[1:-1])
        star[0] += dt * self.faces[0] * u[0] * self.inv_h2
        star[-1] += dt * self.faces[-1] * u[-1] * self.inv_h2
        new = u.copy()
        new[1:-1] = cho_solve_banded((self._chol, False), star)
        return new


def _check_solution_range(values: np.ndarray, t: float) -> None:
    mn = float(np.min(values))
    mx = float(np.max(values))
    if math.isnan(mn) or math.isnan(mx):
        raise NumericalError(f"NaN detected at t={t:.6g}.")
    if mn < -MAXPRINCIPLE_TOL or mx > 1.0 + MAXPRINCIPLE_TOL:
        raise NumericalError(
            f"maximum principle violated at t={t:.6g}: range [{mn:.3e}, {mx:.3e}]."
        )


def _resolve_dt(stepper: _Stepper, cfg: SolverConfig) -> float:
    if cfg.dt == "auto":
        return stepper.auto_dt()
    dt = float(cfg.dt)
    if cfg.scheme == "explicit-euler" and dt > stepper.stability_bound() * (1 + 1e-9):
        raise StabilityError(
            f"dt={dt:.3e} exceeds the explicit stability bound "
            f"{stepper.stability_bound():.3e} (h^2/(2*dim*sup a))."
        )
    return dt


def discrete_rhs(state: GridFunction, p: Problem) -> GridFunction:
    """Exact discrete right-hand side div_h(a grad_h u) + f(x,u) of a state."""
    stepper = _Stepper(p.coefficient, p.reaction, state.grid)
    return state.with_values(stepper.rhs(state.values))


def step(state: GridFunction, t: float, p: Problem, cfg: SolverConfig) -> GridFunction:
    """Advance one time step; boundary nodes are held fixed."""
    _check_solution_range(state.values, t)
    stepper = _Stepper(p.coefficient, p.reaction, state.grid)
    dt = _resolve_dt(stepper, cfg)
    if cfg.scheme == "explicit-euler":
        new = stepper.step_explicit(state.values, dt)
    else:
        new = stepper.step_imex(state.values, dt)
    _check_solution_range(new, t + dt)
    return state.with_values(new)


def _boundary_cells_max(values: np.ndarray) -> float:
    """Largest magnitude among the outermost evolving cells (leak monitor)."""
    if values.ndim == 1:
        return float(max(abs(values[1]), abs(values[-2])))
    ring = np.concatenate(
        [values[1, 1:-1], values[-2, 1:-1], values[1:-1, 1], values[1:-1, -2]]
    )
    return float(np.max(np.abs(ring)))


def solve(
    p: Problem,
    cfg: SolverConfig,
    validate: bool = True,
    initial_state: Optional[GridFunction] = None,
    t_start: float = 0.0,
    extra_snapshot_times: Sequence[float] = (),
) -> Trajectory:
    """Run the problem to t_final, recording (t, u, rhs) snapshots.

    Emits a boundary-leak warning past cfg.boundary_leak_tolerance and aborts
    past cfg.hard_leak_threshold (domain too small for the requested horizon).
    """
    if validate:
        report = validate_problem(p)
        if not report.all_pass:
            raise ValueError(
                "problem fails hypothesis validation (pass validate=False to override):\n"
                + report.summary()
            )
    grid = Grid.centered(p.half_width, cfg.h, p.dimension)
    if initial_state is None:
        state = make_initial(p.initial, grid).values
    else:
        if initial_state.grid.npoints != grid.npoints:
            raise ValueError("initial_state does not match the solver grid.")
        state = initial_state.values.copy()
    stepper = _Stepper(p.coefficient, p.reaction, grid)
    dt = _resolve_dt(stepper, cfg)
    explicit = cfg.scheme == "explicit-euler"

    targets = cfg.resolved_snapshot_times() + t_start
    targets = np.unique(np.concatenate([targets, np.asarray(extra_snapshot_times, dtype=float)]))
    targets = targets[(targets >= t_start - 1e-12) & (targets <= t_start + cfg.t_final + 1e-9)]

    traj = Trajectory(problem=p, config=cfg)
    warned = False
    t = t_start
    _check_solution_range(state, t)
    for target in targets:
        while t < target - 1e-12:
            dtk = min(dt, target - t)
            state = stepper.step_explicit(state, dtk) if explicit else stepper.step_imex(state, dtk)
            t += dtk
        t = float(target)
        _check_solution_range(state, t)
        leak = _boundary_cells_max(state)
        traj.leak_max = max(traj.leak_max, leak)
        if leak > cfg.hard_leak_threshold:
            raise NumericalError(
                f"boundary leak {leak:.3e} exceeds hard threshold at t={t:.6g}; "
                "domain too small for the requested t_final."
            )
        if leak > cfg.boundary_leak_tolerance and not warned:
            warnings.warn(
                f"boundary leak {leak:.3e} above tolerance {cfg.boundary_leak_tolerance:.1e} "
                f"at t={t:.6g}",
                RuntimeWarning,
                stacklevel=2,
            )
            warned = True
        gf = GridFunction(state.copy(), grid.h, grid.origin)
        traj.snapshots.append(Snapshot(t=t, u=gf, rhs=gf.with_values(stepper.rhs(state))))
    return traj


@dataclass
class KernelResult:
    """Numerical fundamental solutions of the pure diffusion equation."""

    times: list[float]
    kernels: list[GridFunction]
    masses: list[float]
    source: tuple[float, ...]

    def pairs(self) -> list[tuple[float, GridFunction]]:
        return list(zip(self.times, self.kernels))


def fundamental_solution(
    coeff: CoefficientField,
    t_targets: Sequence[float],
    y,
    grid: Grid,
    mass_tolerance: float = 1e-4,
) -> KernelResult:
    """Evolve a unit point mass at grid point y under pure diffusion.

    The Dirac datum is one cell of value 1/h^dim, so the discrete mass is
    exactly 1 at t=0; mass loss beyond mass_tolerance raises (truncation too
    tight for the requested times).
    """
    t_targets = sorted(float(t) for t in t_targets)
    if not t_targets or t_targets[0] <= 0:
        raise ValueError("t_targets must be positive.")
    idx = grid.nearest_index(y)
    state = np.zeros(grid.npoints)
    state[idx] = grid.h ** (-grid.dim)
    source = tuple(grid.axis(k)[idx[k]] for k in range(grid.dim))

    stepper = _Stepper(coeff, Reaction.zero(), grid)
    dt = 0.9 * stepper.stability_bound()
    cell = grid.h**grid.dim

    result = KernelResult(times=[], kernels=[], masses=[], source=source)
    t = 0.0
    for target in t_targets:
        while t < target - 1e-12:
            dtk = min(dt, target - t)
            state = stepper.step_explicit(state, dtk)
            t += dtk
        t = target
        mn = float(np.min(state))
        if math.isnan(mn):
            raise NumericalError(f"NaN in fundamental solution at t={t:.6g}.")
        if mn < -1e-9 * max(1.0, float(np.max(state))):
            raise NumericalError(f"kernel positivity lost at t={t:.6g} (min {mn:.3e}).")
        mass = float(np.sum(state) * cell)
        if abs(mass - 1.0) > mass_tolerance:
            raise NumericalError(
                f"kernel mass {mass:.8f} drifted beyond {mass_tolerance:g} at t={t:.6g}; "
                "boundary truncation too tight."
            )
        result.times.append(t)
        result.kernels.append(GridFunction(state.copy(), grid.h, grid.origin))
        result.masses.append(mass)
    return result


def solve_linear_halfline(
    a: float,
    lam: float,
    v0: GridFunction,
    g: Callable[[float], float],
    t_targets: Sequence[float],
) -> list[tuple[float, GridFunction, GridFunction]]:
    """Explicit solve of v_t = a v_xx + lam v on (0, X] with v(t,0)=g(t).

    The right end is a Dirichlet-zero truncation; callers restrict their
    conclusions to a reliable window away from it. Returns (t, v, rhs) with
    rhs the discrete a v_xx + lam v.
    """
    if v0.dim != 1 or abs(v0.origin[0]) > 1e-12:
        raise ValueError("v0 must live on a half-line grid starting at 0.")
    if a <= 0 or lam < 0:
        raise ValueError("need a > 0 and lam >= 0.")
    t_targets = sorted(float(t) for t in t_targets)
    h = v0.h
    inv_h2 = 1.0 / h**2
    dt = 0.9 * h**2 / (2.0 * a)
    if lam > 0:
        dt = min(dt, 0.5 / lam)

    v = v0.values.copy()
    v[0] = float(g(0.0))

    def rhs_of(state: np.ndarray) -> np.ndarray:
        out = np.zeros_like(state)
        out[1:-1] = a * (state[2:] - 2.0 * state[1:-1] + state[:-2]) * inv_h2 + lam * state[1:-1]
        return out

    out: list[tuple[float, GridFunction, GridFunction]] = []
    t = 0.0
    for target in t_targets:
        while t < target - 1e-12:
            dtk = min(dt, target - t)
            v[1:-1] += dtk * (
                a * (v[2:] - 2.0 * v[1:-1] + v[:-2]) * inv_h2 + lam * v[1:-1]
            )
            t += dtk
            v[0] = float(g(t))
            if not np.isfinite(v[1]):
                raise NumericalError(f"half-line solve blew up at t={t:.6g}.")
        t = target
        gf = GridFunction(v.copy(), h, v0.origin)
        out.append((t, gf, gf.with_values(rhs_of(v))))
    return out
