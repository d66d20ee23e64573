"""Gaussian-process quadrature of the recourse loss over the error density.

A squared-exponential GP surrogate of the loss curve turns the expected
recourse integral into a weighted sum over a few designed nodes: weights are
gamma = K^-1 w where w is the kernel embedding of the density, and nodes are
picked greedily to shrink the posterior variance of the integral. Embeddings
are closed-form for a Gaussian density and trapezoid sums for gridded ones.

Nodes and weights depend only on the density and kernel, not on the loss, so
one rule is reused across every dispatch step.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar

from .errordist import GaussianDensity, GridDistribution, StudentTDistribution
from .errors import InputError, NumericalError

log = logging.getLogger(__name__)

JITTER = 1e-10
COARSE_CANDIDATES = 257
POLISH_MAX_ROUNDS = 60
POLISH_TOL = 1e-9
# variance at or below this multiple of the jitter scale means further nodes
# are numerically redundant
SATURATION_FACTOR = 50.0
# a negative weight beyond this fraction of the largest weight marks the
# prefix as overcrowded for the kernel's resolving power
NEGATIVITY_TOL = 0.05


@dataclass(frozen=True)
class KernelConfig:
    tau: float  # $ scale of loss values the GP expects
    length_scale: float  # MW scale over which the loss curve bends
    jitter: float = JITTER

    def __post_init__(self):
        if not (self.tau > 0):
            raise InputError(f"tau must be positive, got {self.tau}")
        if not (self.length_scale > 0):
            raise InputError(f"length_scale must be positive, got {self.length_scale}")
        if self.jitter < 0:
            raise InputError("jitter must be >= 0")


def kernel_eval(a, b, config: KernelConfig):
    """Squared-exponential kernel tau^2 exp(-(a-b)^2 / (2 l^2)).

    Arrays broadcast to an outer (len(a), len(b)) matrix; two scalars give a
    scalar back.
    """
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    d = np.subtract.outer(a_arr, b_arr) / config.length_scale
    out = config.tau**2 * np.exp(-0.5 * d * d)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out[0, 0])
    if np.ndim(a) == 0:
        return out[0]
    if np.ndim(b) == 0:
        return out[:, 0]
    return out


def _gram_cho(nodes: np.ndarray, config: KernelConfig):
    k = kernel_eval(nodes, nodes, config)
    k[np.diag_indices_from(k)] += config.jitter * config.tau**2
    try:
        return cho_factor(k, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"gram matrix not positive definite: {exc}") from exc


@dataclass(frozen=True)
class LossSurrogate:
    """GP conditioned on loss evaluations at the quadrature nodes."""

    nodes: np.ndarray
    values: np.ndarray
    config: KernelConfig
    _cho: tuple = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)


def fit_surrogate(nodes, values, config: KernelConfig) -> LossSurrogate:
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if nodes.shape != values.shape:
        raise InputError("nodes and values must have matching shapes")
    if nodes.size == 0:
        raise InputError("need at least one node to fit a surrogate")
    cho = _gram_cho(nodes, config)
    alpha = cho_solve(cho, values)
    return LossSurrogate(nodes=nodes, values=values, config=config, _cho=cho, _alpha=alpha)


def gp_posterior(x, surrogate: LossSurrogate):
    """Posterior mean and variance of the loss at x (vectorized)."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    cfg = surrogate.config
    kx = kernel_eval(x_arr, surrogate.nodes, cfg)
    mean = kx @ surrogate._alpha
    var = cfg.tau**2 - np.sum(kx * cho_solve(surrogate._cho, kx.T).T, axis=1)
    var = np.maximum(var, 0.0)
    if np.ndim(x) == 0:
        return float(mean[0]), float(var[0])
    return mean, var


def _embedding_parts(prior, config: KernelConfig):
    """Normalize the density into the form the embedding integrals need."""
    if isinstance(prior, StudentTDistribution):
        prior = prior.to_grid()
    if isinstance(prior, GaussianDensity):
        return ("gauss", prior.mean, prior.sigma)
    if isinstance(prior, GridDistribution):
        h = prior.spacing
        tw = np.full(prior.nodes.size, h)
        tw[0] = tw[-1] = 0.5 * h
        return ("grid", prior.nodes, tw * prior.density)
    raise InputError(f"no embedding rule for density of type {type(prior).__name__}")


def _embed(x_arr: np.ndarray, parts, config: KernelConfig) -> np.ndarray:
    if parts[0] == "gauss":
        _, m, sig = parts
        l2 = config.length_scale**2
        s2 = sig**2
        amp = config.tau**2 * np.sqrt(l2 / (l2 + s2))
        return amp * np.exp(-0.5 * (x_arr - m) ** 2 / (l2 + s2))
    _, gnodes, v = parts
    return kernel_eval(x_arr, gnodes, config) @ v


def embedding_w(x, prior, config: KernelConfig):
    """Kernel embedding w(x) = integral of k(x, .) against the density."""
    parts = _embedding_parts(prior, config)
    out = _embed(np.atleast_1d(np.asarray(x, dtype=float)), parts, config)
    return float(out[0]) if np.ndim(x) == 0 else out


def _embedding_parts_z(parts, config: KernelConfig) -> float:
    if parts[0] == "gauss":
        _, _, sig = parts
        l2 = config.length_scale**2
        return float(config.tau**2 * np.sqrt(l2 / (l2 + 2.0 * sig**2)))
    _, gnodes, v = parts
    return float(v @ _embed(gnodes, parts, config))


def prior_integral_Z(prior, config: KernelConfig) -> float:
    """Double embedding Z = integral of k against the density twice."""
    return _embedding_parts_z(_embedding_parts(prior, config), config)


def _variance_from_parts(nodes: np.ndarray, parts, z: float, config: KernelConfig) -> float:
    if nodes.size == 0:
        return z
    w = _embed(nodes, parts, config)
    cho = _gram_cho(nodes, config)
    return float(z - w @ cho_solve(cho, w))


def bq_variance(nodes, prior, config: KernelConfig) -> float:
    """Posterior variance of the integral after observing the given nodes."""
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    z = prior_integral_Z(prior, config)
    if nodes.size == 0:
        return z
    w = embedding_w(nodes, prior, config)
    cho = _gram_cho(nodes, config)
    return float(z - w @ cho_solve(cho, w))


@dataclass(frozen=True)
class BQRule:
    """Quadrature nodes and weights; estimate = weights . loss(nodes)."""

    nodes: np.ndarray
    weights: np.ndarray
    variance: float


def bq_weights(nodes, prior, config: KernelConfig) -> BQRule:
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    if nodes.size == 0:
        return BQRule(nodes=nodes, weights=np.zeros(0), variance=prior_integral_Z(prior, config))
    w = embedding_w(nodes, prior, config)
    cho = _gram_cho(nodes, config)
    gamma = cho_solve(cho, w)
    variance = float(prior_integral_Z(prior, config) - w @ gamma)
    return BQRule(nodes=nodes, weights=gamma, variance=variance)


def bq_estimate(rule: BQRule, values) -> float:
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.shape != rule.nodes.shape:
        raise InputError("loss values must match the rule's nodes")
    return float(rule.weights @ values)


def project_weights(weights) -> np.ndarray:
    """Clip negative quadrature weights to zero, rescaling the rest so the
    total weight is preserved; warns because the clipped rule is biased."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.all(w >= 0):
        return w.copy()
    total = float(w.sum())
    clipped = np.maximum(w, 0.0)
    pos = float(clipped.sum())
    if total <= 0 or pos <= 0:
        raise NumericalError(f"cannot project weights with nonpositive mass: {w!r}")
    warnings.warn(
        f"negative quadrature weights clipped (pre-projection {w.tolist()})",
        RuntimeWarning,
        stacklevel=2,
    )
    return clipped * (total / pos)


def _prior_interval(prior) -> tuple[float, float]:
    if isinstance(prior, StudentTDistribution):
        half = 8.0 * prior.std_surrogate()
        return prior.params.location - half, prior.params.location + half
    if isinstance(prior, GaussianDensity):
        return prior.mean - 8.0 * prior.sigma, prior.mean + 8.0 * prior.sigma
    if isinstance(prior, GridDistribution):
        return prior.support
    raise InputError(f"no search interval for density of type {type(prior).__name__}")


def _gain_factory(others: np.ndarray, parts, config: KernelConfig):
    """Variance reduction from adding one node to the fixed set `others`.

    Returns a vectorized gain(x) = residual(x)^2 / posterior_var(x); both
    pieces condition on `others` only.
    """
    tau2 = config.tau**2
    if others.size:
        cho = _gram_cho(others, config)
        w_oth = _embed(others, parts, config)
        beta = cho_solve(cho, w_oth)

        def gain(x):
            x_arr = np.atleast_1d(np.asarray(x, dtype=float))
            kx = kernel_eval(x_arr, others, config)
            resid = _embed(x_arr, parts, config) - kx @ beta
            var = tau2 - np.sum(kx * cho_solve(cho, kx.T).T, axis=1)
            out = np.zeros_like(var)
            ok = var > config.jitter * tau2
            out[ok] = resid[ok] ** 2 / var[ok]
            return out

    else:

        def gain(x):
            x_arr = np.atleast_1d(np.asarray(x, dtype=float))
            return _embed(x_arr, parts, config) ** 2 / tau2

    return gain


def _maximize_gain(gain, lo: float, hi: float) -> float:
    """Deterministic 1-D maximization: coarse scan, local refinement of the
    leading brackets, smallest-argument tie break."""
    grid = np.linspace(lo, hi, COARSE_CANDIDATES)
    vals = gain(grid)
    order = np.argsort(vals)[::-1][:8]
    h = grid[1] - grid[0]
    best_x, best_v = float(grid[order[0]]), float(vals[order[0]])
    for idx in sorted(order):
        a = max(lo, grid[idx] - h)
        b = min(hi, grid[idx] + h)
        res = minimize_scalar(
            lambda t: -float(gain(t)[0]),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-10},
        )
        x_ref, v_ref = float(res.x), float(-res.fun)
        if v_ref > best_v * (1.0 + 1e-12) + 1e-300:
            best_x, best_v = x_ref, v_ref
        elif v_ref >= best_v * (1.0 - 1e-9) and x_ref < best_x:
            # equal-height peaks: prefer the leftmost so selection is stable
            best_x, best_v = x_ref, v_ref
    return best_x


def _greedy_trace(n: int, parts, z: float, config: KernelConfig, lo: float, hi: float):
    """Greedy variance-minimizing node sequence with the variance after each
    addition. Order matters: earlier nodes carry more information."""
    nodes: list[float] = []
    trace = np.empty(n)
    for k in range(n):
        gain = _gain_factory(np.array(nodes), parts, config)
        nodes.append(_maximize_gain(gain, lo, hi))
        trace[k] = _variance_from_parts(np.array(nodes), parts, z, config)
    return np.array(nodes), trace


def _polish(nodes_arr: np.ndarray, parts, z: float, config: KernelConfig, lo: float, hi: float):
    floor = SATURATION_FACTOR * config.jitter * config.tau**2
    for _ in range(POLISH_MAX_ROUNDS):
        # once the variance sits on the jitter floor the gain surface is pure
        # noise and polish would just push nodes onto each other
        if _variance_from_parts(nodes_arr, parts, z, config) <= floor:
            break
        moved = 0.0
        for i in range(nodes_arr.size):
            others = np.delete(nodes_arr, i)
            gain = _gain_factory(others, parts, config)
            new_x = _maximize_gain(gain, lo, hi)
            moved = max(moved, abs(new_x - nodes_arr[i]))
            nodes_arr[i] = new_x
        if moved < POLISH_TOL * max(1.0, hi - lo):
            break
    return nodes_arr


def select_points(n: int, prior, config: KernelConfig) -> np.ndarray:
    """Greedy node design minimizing the quadrature variance, followed by
    rounds of cyclic single-node polish until the set stops moving."""
    if n < 0:
        raise InputError("cannot select a negative number of nodes")
    if n == 0:
        return np.zeros(0)
    parts = _embedding_parts(prior, config)
    lo, hi = _prior_interval(prior)
    z = float(_embedding_parts_z(parts, config))
    nodes_arr, _ = _greedy_trace(n, parts, z, config, lo, hi)
    return np.sort(_polish(nodes_arr, parts, z, config, lo, hi))


def _spread_fillers(count: int, taken: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Deterministic max-min-distance points for redundant quadrature slots."""
    cand = np.linspace(lo, hi, COARSE_CANDIDATES)
    placed = list(taken)
    out = []
    for _ in range(count):
        d = np.min(np.abs(cand[:, None] - np.array(placed)[None, :]), axis=1)
        pick = float(cand[int(np.argmax(d))])
        out.append(pick)
        placed.append(pick)
    return np.array(out)


def _prefix_weights(order: np.ndarray, r: int, parts, config: KernelConfig) -> np.ndarray:
    nodes = order[:r]
    return cho_solve(_gram_cho(nodes, config), _embed(nodes, parts, config))


def quadrature_rule(n: int, prior, config: KernelConfig) -> BQRule:
    """Select n nodes and solve their weights, guarding against saturation.

    Past the point where the posterior variance reaches the jitter floor,
    extra nodes carry no information and the full Gram solve turns into
    noise amplification (large oscillating weights on near-duplicate
    nodes). Well before that floor the weights already start to oscillate
    in sign, and clipping them would misstate where the density's mass
    sits. The weights are therefore solved on the longest greedy prefix
    that stays (essentially) nonnegative; the remaining slots get zero
    weight and are placed by maximal spacing so the scenario set stays
    well separated.
    """
    if n < 1:
        raise InputError("quadrature rule needs at least one node")
    parts = _embedding_parts(prior, config)
    lo, hi = _prior_interval(prior)
    z = float(_embedding_parts_z(parts, config))
    order, trace = _greedy_trace(n, parts, z, config, lo, hi)
    floor = SATURATION_FACTOR * config.jitter * config.tau**2
    saturated = np.flatnonzero(trace <= floor)
    r = int(saturated[0]) + 1 if saturated.size else n
    while r > 1:
        gamma = _prefix_weights(order, r, parts, config)
        if gamma.min() >= -NEGATIVITY_TOL * gamma.max():
            break
        r -= 1
    core = _polish(order[:r].copy(), parts, z, config, lo, hi)
    w_core = _embed(core, parts, config)
    gamma = cho_solve(_gram_cho(core, config), w_core)
    variance = float(z - w_core @ gamma)
    if r < n:
        log.info("quadrature saturated at %d of %d nodes; rest get zero weight", r, n)
        nodes = np.concatenate([core, _spread_fillers(n - r, core, lo, hi)])
        weights = np.concatenate([gamma, np.zeros(n - r)])
    else:
        nodes, weights = core, gamma
    idx = np.argsort(nodes)
    return BQRule(nodes=nodes[idx], weights=weights[idx], variance=variance)
