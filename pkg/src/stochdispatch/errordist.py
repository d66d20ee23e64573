"""Forecast-error distributions: persistence errors, Student's t fitting,
and gridded densities with trapezoid integration and inverse-CDF sampling.

The error model is fit once over a whole series (no conditioning on power
level or time of day). Gridded distributions represent arbitrary 1-D
densities, in particular the importance distribution q, and sample by
inverting the piecewise cumulative built from running trapezoid sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .errors import InputError, NumericalError

DOF_BOUNDS = (1.5, 200.0)
DEFAULT_GRID_NODES = 2001
DEFAULT_GRID_HALF_WIDTH = 8.0


@runtime_checkable
class ErrorDistribution(Protocol):
    """Anything that can stand in for the nominal error density p."""

    def pdf(self, x): ...

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray: ...

    def std(self) -> float: ...


@dataclass(frozen=True)
class TParams:
    location: float  # MW
    scale: float  # MW
    dof: float

    def __post_init__(self):
        if not (self.scale > 0):
            raise InputError(f"scale must be positive, got {self.scale}")
        if not (self.dof > 1):
            raise InputError(f"dof must exceed 1 (finite mean), got {self.dof}")


def persistence_errors(series) -> np.ndarray:
    """Errors of the persistence forecast: value at t minus value at t-1."""
    s = np.atleast_1d(np.asarray(series, dtype=float))
    if s.shape[0] < 2:
        raise InputError("need at least 2 samples to form persistence errors")
    return np.diff(s)


def _t_logpdf(x: np.ndarray, loc: float, scale: float, dof: float) -> np.ndarray:
    z = (x - loc) / scale
    return (
        math.lgamma((dof + 1.0) / 2.0)
        - math.lgamma(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
        - math.log(scale)
        - 0.5 * (dof + 1.0) * np.log1p(z * z / dof)
    )


def pdf_t(x, params: TParams):
    """Student's t density with location/scale."""
    x = np.asarray(x, dtype=float)
    out = np.exp(_t_logpdf(x, params.location, params.scale, params.dof))
    return float(out) if out.ndim == 0 else out


def cdf_t(x: float, params: TParams) -> float:
    """Student's t cdf by adaptive numeric integration of the density.

    Integrates the standardized tail (symmetry maps the left half onto the
    right), which keeps the quadrature accurate far from the center.
    """
    z = (float(x) - params.location) / params.scale
    if z == 0.0:
        return 0.5
    std = TParams(0.0, 1.0, params.dof)
    tail, _ = quad(
        lambda t: pdf_t(t, std), abs(z), np.inf, epsabs=1e-12, epsrel=1e-12, limit=400
    )
    return float(np.clip(1.0 - tail if z >= 0 else tail, 0.0, 1.0))


def em_location_scale(
    x: np.ndarray, dof: float, tol: float = 1e-8, max_iter: int = 1000
) -> tuple[float, float, list[float]]:
    """Location/scale ML fit at fixed dof by iterative reweighting.

    Returns (location, scale, log-likelihood trace); the trace is
    nondecreasing, which the tests assert.
    """
    loc = float(np.median(x))
    scale = float(np.std(x))
    if scale <= 0:
        raise InputError("zero-variance data cannot be fit")
    trace = [float(np.sum(_t_logpdf(x, loc, scale, dof)))]
    for _ in range(max_iter):
        z2 = ((x - loc) / scale) ** 2
        u = (dof + 1.0) / (dof + z2)
        new_loc = float(np.sum(u * x) / np.sum(u))
        new_scale = float(np.sqrt(np.sum(u * (x - new_loc) ** 2) / x.shape[0]))
        if new_scale <= 0:
            raise NumericalError("scale collapsed during reweighting")
        change = abs(new_loc - loc) + abs(new_scale - scale)
        loc, scale = new_loc, new_scale
        trace.append(float(np.sum(_t_logpdf(x, loc, scale, dof))))
        if change < tol * (1.0 + scale):
            break
    return loc, scale, trace


def fit_student_t(errors) -> TParams:
    """Maximum-likelihood Student's t fit.

    The degrees of freedom are found by a bounded 1-D search over log(dof)
    with location and scale profiled out by em_location_scale at each
    candidate; dof is capped at 200 (indistinguishable from normal).
    """
    x = np.atleast_1d(np.asarray(errors, dtype=float))
    if x.shape[0] < 30:
        raise InputError(f"need at least 30 samples to fit, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InputError("errors contain non-finite values")
    if float(np.std(x)) <= 0:
        raise InputError("zero-variance data cannot be fit")

    def neg_profile(log_dof: float) -> float:
        _, _, trace = em_location_scale(x, math.exp(log_dof))
        return -trace[-1]

    res = minimize_scalar(
        neg_profile,
        bounds=(math.log(DOF_BOUNDS[0]), math.log(DOF_BOUNDS[1])),
        method="bounded",
        options={"xatol": 1e-6},
    )
    dof = min(math.exp(float(res.x)), DOF_BOUNDS[1])
    loc, scale, _ = em_location_scale(x, dof)
    return TParams(location=loc, scale=scale, dof=dof)


@dataclass(frozen=True)
class GridDistribution:
    """Density on an equally spaced grid, trapezoid-normalized.

    cumulative[k] is the running trapezoid integral up to node k; sampling
    inverts it within the bracketing cell, treating the density as linear
    there, so sampled draws have exactly the interpolated density.
    """

    nodes: np.ndarray
    density: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        cum = np.asarray(self.cumulative, dtype=float)
        n = nodes.shape[0]
        if n < 3:
            raise InputError("grid needs at least 3 nodes")
        if dens.shape[0] != n or cum.shape[0] != n:
            raise InputError("nodes, density, cumulative must have equal length")
        steps = np.diff(nodes)
        h = steps[0]
        if h <= 0 or np.any(np.abs(steps - h) > 1e-9 * (1.0 + abs(h))):
            raise InputError("grid nodes must be equally spaced and increasing")
        if np.any(dens < 0):
            raise InputError("density values must be >= 0")
        integral = float(np.trapezoid(dens, nodes))
        if abs(integral - 1.0) > 1e-10:
            raise InputError(f"density integrates to {integral!r}, expected 1")
        if np.any(np.diff(cum) < -1e-12) or abs(cum[0]) > 1e-12 or abs(cum[-1] - 1) > 1e-12:
            raise InputError("cumulative must rise from 0 to 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "cumulative", cum)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def pdf(self, x):
        """Density of sample_grid draws: piecewise constant per cell.

        Inverting the linearly interpolated cumulative spreads each cell's
        trapezoid mass uniformly over the cell, so this (not a linear
        interpolation of the node values) is the density the draws actually
        have; importance weights divide by it and stay exactly consistent.
        """
        x = np.asarray(x, dtype=float)
        a, b = self.support
        k = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.nodes.size - 2)
        cell = 0.5 * (self.density[k] + self.density[k + 1])
        out = np.where((x >= a) & (x <= b), cell, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        """Linear interpolation of the running trapezoid cumulative."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes, self.cumulative, left=0.0, right=1.0)
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return float(np.trapezoid(self.nodes * self.density, self.nodes))

    def std(self) -> float:
        m = self.mean()
        var = float(np.trapezoid((self.nodes - m) ** 2 * self.density, self.nodes))
        return math.sqrt(max(var, 0.0))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return sample_grid(self, rng.random(size))


def build_grid(pdf_fn: Callable, support: tuple[float, float], n_nodes: int) -> GridDistribution:
    """Sample a density on [a, b] and renormalize so the trapezoid integral
    is one; the cumulative is the running trapezoid sum."""
    a, b = float(support[0]), float(support[1])
    if not b > a:
        raise InputError(f"support [{a}, {b}] is empty")
    if n_nodes < 3:
        raise InputError("need at least 3 grid nodes")
    nodes = np.linspace(a, b, n_nodes)
    vals = np.asarray(pdf_fn(nodes), dtype=float)
    if vals.shape != nodes.shape:
        vals = np.array([float(pdf_fn(t)) for t in nodes])
    return grid_from_values(nodes, vals)


def grid_from_values(nodes: np.ndarray, values: np.ndarray) -> GridDistribution:
    """Build a GridDistribution from raw (unnormalized) density values."""
    nodes = np.asarray(nodes, dtype=float)
    vals = np.asarray(values, dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InputError("density values must be finite and >= 0")
    total = float(np.trapezoid(vals, nodes))
    if total <= 0:
        raise InputError("density is zero everywhere on the support")
    dens = vals / total
    steps = np.diff(nodes)
    masses = 0.5 * (dens[1:] + dens[:-1]) * steps
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    cum /= cum[-1]
    cum[-1] = 1.0
    # Tiny renormalization drift between trapz and cumsum is folded into the
    # density so both invariants hold exactly.
    dens = dens / float(np.trapezoid(dens, nodes))
    return GridDistribution(nodes=nodes, density=dens, cumulative=cum)


def sample_grid(grid: GridDistribution, u):
    """Inverse-CDF draw(s): linear interpolation of the cumulative.

    Each u is bracketed in the cumulative and mapped linearly within the
    cell, so the draws are uniform within cells with the cell's trapezoid
    mass, exactly the density reported by GridDistribution.pdf. Zero-mass
    cells are skipped by the right-sided bracket search.
    """
    u_arr = np.asarray(u, dtype=float)
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr)
    if np.any((u_arr < -1e-12) | (u_arr > 1 + 1e-12)):
        raise InputError("u must lie in [0, 1]")
    u_arr = np.clip(u_arr, 0.0, 1.0)
    nodes, cum = grid.nodes, grid.cumulative
    h = grid.spacing
    k = np.clip(np.searchsorted(cum, u_arr, side="right") - 1, 0, nodes.size - 2)
    mass = cum[k + 1] - cum[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(mass > 0, (u_arr - cum[k]) / mass, 0.0)
    out = np.clip(nodes[k] + h * np.clip(frac, 0.0, 1.0), nodes[0], nodes[-1])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class StudentTDistribution:
    """Student's t error model; the usual p(xi) after fitting."""

    params: TParams

    def pdf(self, x):
        return pdf_t(x, self.params)

    def cdf(self, x) -> float:
        return cdf_t(x, self.params)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.params.location + self.params.scale * rng.standard_t(
            self.params.dof, size
        )

    def std(self) -> float:
        nu = self.params.dof
        if nu > 2:
            return self.params.scale * math.sqrt(nu / (nu - 2.0))
        return math.inf

    def std_surrogate(self) -> float:
        """Finite spread proxy used for grid supports when variance blows up."""
        nu = self.params.dof
        if nu > 2:
            return self.params.scale * math.sqrt(nu / (nu - 2.0))
        return 10.0 * self.params.scale

    def to_grid(
        self,
        n_nodes: int = DEFAULT_GRID_NODES,
        half_width: float = DEFAULT_GRID_HALF_WIDTH,
    ) -> GridDistribution:
        half = half_width * self.std_surrogate()
        support = (self.params.location - half, self.params.location + half)
        return build_grid(self.pdf, support, n_nodes)


@dataclass(frozen=True)
class GaussianDensity:
    """Gaussian error model, mainly for closed-form quadrature checks."""

    mean: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise InputError(f"sigma must be positive, got {self.sigma}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.sigma
        out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return float(out) if out.ndim == 0 else out

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mean, self.sigma, size)

    def std(self) -> float:
        return self.sigma

    def to_grid(
        self,
        n_nodes: int = DEFAULT_GRID_NODES,
        half_width: float = DEFAULT_GRID_HALF_WIDTH,
    ) -> GridDistribution:
        half = half_width * self.sigma
        return build_grid(self.pdf, (self.mean - half, self.mean + half), n_nodes)
