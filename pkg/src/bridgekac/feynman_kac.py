"""Bridge Monte Carlo for semigroup matrix elements.

The central quantity is the pin-to-pin weight

    Q(x, y; V, t) = E(exp(-integral_0^t V((1-s/t) x + (s/t) y
                                          + sqrt(t) alpha(s/t)) ds)),

estimated by averaging exponential weights over sampled bridges, with
the time integral discretized by the trapezoid rule on the bridge grid.
Matrix elements <phi, e^{-tH} psi> then follow by tensor Gauss-Legendre
quadrature of phi(x) psi(y) K_t(x, y) Q(x, y; V, t) over the declared
supports, where K_t is the free heat kernel.

Units are hbar = m = 1 with kinetic part -(1/2) Laplacian.

Estimates carry a heavy-tail heuristic: when the top_k heaviest samples
hold more than `heavy_fraction` of the total weight, the estimate is
flagged `divergence_suspected`.  Monte Carlo cannot certify an infinite
expectation; the flag marks estimates that behave like one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import backend as _backend
from .potentials import PotentialSpec
from .stochastic import BridgePath, RngSeed, bridge_values

__all__ = [
    "MatrixElementEstimate",
    "McConfig",
    "QEstimate",
    "QuadratureConfig",
    "RefinementReport",
    "Wavefunction",
    "action_integral",
    "bump",
    "estimate_Q",
    "free_kernel",
    "gaussian",
    "l2_norm",
    "matrix_element",
    "refine_steps",
]

_CHUNK = 32768


@dataclass(frozen=True)
class McConfig:
    """Sampling parameters for one Q estimate (per quadrature node)."""

    n_samples: int = 20000
    n_steps: int = 64
    top_k: int = 10
    heavy_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.n_steps < 1:
            raise ValueError("n_samples and n_steps must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not 0.0 < self.heavy_fraction < 1.0:
            raise ValueError("heavy_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class QuadratureConfig:
    """Tensor Gauss-Legendre resolution for spatial integrals."""

    nodes_per_axis: int = 32

    def __post_init__(self) -> None:
        if self.nodes_per_axis < 1:
            raise ValueError("nodes_per_axis must be positive")


@dataclass(frozen=True)
class QEstimate:
    """Monte Carlo estimate of Q(x, y; V, t)."""

    mean: float
    std_error: float
    n_samples: int
    n_steps: int
    divergence_suspected: bool
    heavy_mass_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.mean < 0.0:
            raise ValueError("Q is an expectation of positive weights")
        if self.std_error < 0.0:
            raise ValueError("std_error must be nonnegative")


@dataclass(frozen=True)
class Wavefunction:
    """Real test function with a declared support box.

    `evaluate` is vectorized over points of shape (..., dim).  For kind
    "compact" it vanishes outside the box; for "gaussian-weighted" the
    box is a documented truncation containing all but a declared
    fraction of the L^2 mass.
    """

    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    support_box: tuple[tuple[float, ...], tuple[float, ...]]
    kind: str
    name: str = "wavefunction"

    def __post_init__(self) -> None:
        if self.kind not in ("compact", "gaussian-weighted"):
            raise ValueError("kind must be 'compact' or 'gaussian-weighted'")
        lower, upper = self.support_box
        if len(lower) != self.dim or len(upper) != self.dim:
            raise ValueError("support_box corners must have length dim")
        if any(l > u for l, u in zip(lower, upper)):
            raise ValueError("support_box lower corner must not exceed upper corner")


@dataclass(frozen=True)
class MatrixElementEstimate:
    """Quadrature-plus-Monte-Carlo estimate of <phi, e^{-tH} psi>."""

    value: float
    std_error: float
    quadrature_nodes: int
    mc_samples_per_node: int
    divergence_nodes: int = 0


@dataclass(frozen=True)
class RefinementReport:
    """Successive-difference study of the time-grid discretization bias."""

    mode: str
    schedule: tuple[int, ...]
    estimates: tuple[QEstimate, ...]
    diff_means: tuple[float, ...]
    diff_std_errors: tuple[float, ...]
    fitted_order: float | None


def _point(value, dim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    out = np.ascontiguousarray(np.broadcast_to(arr, (dim,)))
    if not np.all(np.isfinite(out)):
        raise ValueError("endpoints must be finite")
    return out


def free_kernel(x, y, t: float) -> float:
    """Heat kernel (2 pi t)^(-dim/2) exp(-|x - y|^2 / (2 t))."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    yv = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if xv.shape != yv.shape:
        raise ValueError("x and y must have the same dimension")
    d2 = float(np.square(xv - yv).sum())
    dim = xv.size
    return float((2.0 * math.pi * t) ** (-0.5 * dim) * math.exp(-d2 / (2.0 * t)))


def action_integral(path: BridgePath, V: PotentialSpec, x, y, t: float) -> float:
    """Trapezoid approximation of integral_0^t V(path position) ds.

    The path position at grid time u = k/n_steps is
    (1 - u) x + u y + sqrt(t) alpha(u); the s-integral is t times the
    u-integral.
    """
    if path.dim != V.dim:
        raise ValueError("path and potential dimensions differ")
    if t <= 0.0:
        raise ValueError("t must be positive")
    xp = _point(x, V.dim)
    yp = _point(y, V.dim)
    u = path.times
    pos = np.outer(1.0 - u, xp) + np.outer(u, yp) + math.sqrt(t) * path.values
    v = np.asarray(V.evaluate(pos), dtype=np.float64)
    inner = float(v[1:-1].sum()) if path.n_steps > 1 else 0.0
    return float(t * (0.5 * v[0] + inner + 0.5 * v[-1]) / path.n_steps)


def _generic_weights(alpha: np.ndarray, x: np.ndarray, y: np.ndarray, t: float,
                     V: PotentialSpec) -> np.ndarray:
    n_steps = alpha.shape[1] - 1
    u = np.arange(alpha.shape[1], dtype=np.float64) / n_steps
    pos = np.outer(1.0 - u, x)[None, :, :] + np.outer(u, y)[None, :, :]
    pos = pos + math.sqrt(t) * alpha
    v = np.asarray(V.evaluate(pos), dtype=np.float64)
    action = v[:, 1:-1].sum(axis=1) if n_steps > 1 else np.zeros(alpha.shape[0])
    action += 0.5 * (v[:, 0] + v[:, -1])
    action *= -(t / n_steps)
    return np.exp(action)


def _weights(alpha: np.ndarray, x: np.ndarray, y: np.ndarray, t: float,
             V: PotentialSpec, backend: str | None) -> np.ndarray:
    if V.form is not None:
        return _backend.quadratic_weights(alpha, x, y, t, V.form, backend=backend)
    return _generic_weights(alpha, x, y, t, V)


def _chunk_stats(w: np.ndarray, top_k: int):
    n = w.size
    mean = float(w.mean())
    m2 = float(np.square(w - mean).sum())
    k = min(top_k, n)
    top = np.partition(w, n - k)[n - k:]
    return n, mean, m2, float(w.sum()), top


def _merge_stats(a, b):
    na, ma, sa, ta, topa = a
    nb, mb, sb, tb, topb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = sa + sb + delta * delta * (na * nb / n)
    return n, mean, m2, ta + tb, np.concatenate([topa, topb])


def _finalize(stats, top_k: int, heavy_fraction: float, n_steps: int) -> QEstimate:
    n, mean, m2, total, top = stats
    if n > 1:
        std_error = math.sqrt(max(m2, 0.0) / (n - 1)) / math.sqrt(n)
    else:
        std_error = 0.0
    k = min(top_k, top.size)
    top_sum = float(np.sort(top)[-k:].sum())
    fraction = top_sum / total if total > 0.0 else 1.0
    suspected = bool(n > top_k and fraction > heavy_fraction)
    if not math.isfinite(mean) or not math.isfinite(std_error):
        suspected = True
    return QEstimate(
        mean=float(mean),
        std_error=float(std_error),
        n_samples=int(n),
        n_steps=int(n_steps),
        divergence_suspected=suspected,
        heavy_mass_fraction=float(fraction),
    )


def _task_sizes(n_samples: int) -> list[int]:
    sizes = [_CHUNK] * (n_samples // _CHUNK)
    if n_samples % _CHUNK:
        sizes.append(n_samples % _CHUNK)
    return sizes


def _run_ordered(jobs, workers: int):
    """Run callables and return results in submission order."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def estimate_Q(
    x,
    y,
    V: PotentialSpec,
    t: float,
    n_samples: int,
    n_steps: int,
    rng: RngSeed,
    *,
    top_k: int = 10,
    heavy_fraction: float = 0.5,
    workers: int = 1,
    backend: str | None = None,
    key: tuple[int, ...] = (),
    mirror_paths: bool = False,
) -> QEstimate:
    """Monte Carlo mean of exp(-action) over independent bridges.

    Sample streams are keyed by (seed, stream_id, *key, chunk index), so
    results are bit-reproducible for a fixed seed independently of the
    worker count.  `mirror_paths` negates every path; for even
    potentials this realizes the exact pathwise symmetry
    Q(x, y) = Q(-x, -y).
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if n_samples < 1 or n_steps < 1:
        raise ValueError("n_samples and n_steps must be positive")
    xp = _point(x, V.dim)
    yp = _point(y, V.dim)

    def make_job(idx: int, count: int):
        def job():
            gen = rng.generator(*key, idx)
            xi = gen.standard_normal((count, n_steps, V.dim))
            if mirror_paths:
                np.negative(xi, out=xi)
            alpha = bridge_values(xi)
            w = _weights(alpha, xp, yp, t, V, backend)
            return _chunk_stats(w, top_k)
        return job

    jobs = [make_job(i, c) for i, c in enumerate(_task_sizes(n_samples))]
    results = _run_ordered(jobs, workers)
    stats = results[0]
    for r in results[1:]:
        stats = _merge_stats(stats, r)
    return _finalize(stats, top_k, heavy_fraction, n_steps)


@lru_cache(maxsize=32)
def _leggauss(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def _tensor_gauss_legendre(box, nodes_per_axis: int):
    """Gauss-Legendre product rule on a box; returns (points, weights)."""
    lower, upper = (np.asarray(c, dtype=np.float64) for c in box)
    base_x, base_w = _leggauss(nodes_per_axis)
    axes_x = []
    axes_w = []
    for lo, hi in zip(lower, upper):
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        axes_x.append(mid + half * base_x)
        axes_w.append(half * base_w)
    mesh = np.meshgrid(*axes_x, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    weights = axes_w[0]
    for w in axes_w[1:]:
        weights = np.multiply.outer(weights, w)
    return points, np.asarray(weights).reshape(-1)


def bump(center=0.0, width: float = 1.0, dim: int = 1) -> Wavefunction:
    """Smooth radial bump supported on the closed ball |x - center| <= width."""
    if width <= 0.0:
        raise ValueError("width must be positive")
    c = np.ascontiguousarray(np.broadcast_to(np.asarray(center, dtype=np.float64), (dim,)))

    def evaluate(points):
        pts = np.asarray(points, dtype=np.float64)
        r2 = np.square((pts - c) / width).sum(axis=-1)
        inside = r2 < 1.0
        safe = np.where(inside, r2, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0)

    return Wavefunction(
        dim=dim,
        evaluate=evaluate,
        support_box=(tuple(c - width), tuple(c + width)),
        kind="compact",
        name=f"bump(center={center!r}, width={width:g})",
    )


def _erfc_inv(q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ValueError("tail mass must lie in (0, 1)")
    lo, hi = 0.0, 40.0
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid) > q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian(center=0.0, sigma: float = 1.0, dim: int = 1,
             tail_mass: float = 1e-8) -> Wavefunction:
    """Gaussian exp(-|x - center|^2 / (2 sigma^2)) with a truncation box.

    The box extends to the radius where the per-axis L^2 mass outside it
    is below tail_mass / dim, so the total neglected mass is below
    tail_mass.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    c = np.ascontiguousarray(np.broadcast_to(np.asarray(center, dtype=np.float64), (dim,)))
    radius = sigma * _erfc_inv(tail_mass / dim)

    def evaluate(points):
        pts = np.asarray(points, dtype=np.float64)
        r2 = np.square(pts - c).sum(axis=-1)
        return np.exp(-r2 / (2.0 * sigma * sigma))

    return Wavefunction(
        dim=dim,
        evaluate=evaluate,
        support_box=(tuple(c - radius), tuple(c + radius)),
        kind="gaussian-weighted",
        name=f"gaussian(center={center!r}, sigma={sigma:g})",
    )


def l2_norm(psi: Wavefunction, nodes_per_axis: int = 64) -> float:
    """L^2 norm over the support box by Gauss-Legendre quadrature."""
    points, weights = _tensor_gauss_legendre(psi.support_box, nodes_per_axis)
    values = np.asarray(psi.evaluate(points), dtype=np.float64)
    return float(math.sqrt(float(weights @ np.square(values))))


def matrix_element(
    phi: Wavefunction,
    psi: Wavefunction,
    V: PotentialSpec,
    t: float,
    quadrature: QuadratureConfig,
    mc: McConfig,
    rng: RngSeed,
    *,
    workers: int = 1,
    backend: str | None = None,
) -> MatrixElementEstimate:
    """<phi, e^{-tH} psi> by quadrature over supports with per-node Q estimates.

    Every (x, y) node pair owns an independent random stream keyed by
    its index pair, so repeated runs with the same seed reuse identical
    paths node by node.  Calling with truncations of one potential at a
    fixed seed therefore compares the same paths across levels.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if phi.dim != V.dim or psi.dim != V.dim:
        raise ValueError("wavefunction and potential dimensions differ")
    for wf in (phi, psi):
        if not all(math.isfinite(v) for corner in wf.support_box for v in corner):
            raise ValueError("support box must be finite; unbounded supports need a truncation radius")

    x_pts, x_wts = _tensor_gauss_legendre(phi.support_box, quadrature.nodes_per_axis)
    y_pts, y_wts = _tensor_gauss_legendre(psi.support_box, quadrature.nodes_per_axis)
    fx = np.asarray(phi.evaluate(x_pts), dtype=np.float64)
    fy = np.asarray(psi.evaluate(y_pts), dtype=np.float64)
    d2 = np.square(x_pts[:, None, :] - y_pts[None, :, :]).sum(axis=-1)
    kernel = (2.0 * math.pi * t) ** (-0.5 * V.dim) * np.exp(-d2 / (2.0 * t))
    coef = (x_wts * fx)[:, None] * (y_wts * fy)[None, :] * kernel

    n_x = x_pts.shape[0]
    n_y = y_pts.shape[0]

    def make_job(i: int, j: int):
        def job():
            return estimate_Q(
                x_pts[i],
                y_pts[j],
                V,
                t,
                mc.n_samples,
                mc.n_steps,
                rng,
                top_k=mc.top_k,
                heavy_fraction=mc.heavy_fraction,
                workers=1,
                backend=backend,
                key=(i, j),
            )
        return job

    jobs = [make_job(i, j) for i in range(n_x) for j in range(n_y)]
    results = _run_ordered(jobs, workers)

    value = 0.0
    variance = 0.0
    divergence_nodes = 0
    for idx, q in enumerate(results):
        c = coef[idx // n_y, idx % n_y]
        value += c * q.mean
        variance += (c * q.std_error) ** 2
        divergence_nodes += int(q.divergence_suspected)
    return MatrixElementEstimate(
        value=float(value),
        std_error=float(math.sqrt(variance)),
        quadrature_nodes=n_x * n_y,
        mc_samples_per_node=mc.n_samples,
        divergence_nodes=divergence_nodes,
    )


def _fit_order(schedule, diffs) -> float | None:
    if len(diffs) < 2:
        return None
    signs = {math.copysign(1.0, d) for d in diffs if d != 0.0}
    if len(signs) != 1 or any(d == 0.0 for d in diffs):
        return None
    log_n = np.log([float(n) for n in schedule[:-1]])
    log_d = np.log([abs(d) for d in diffs])
    slope = np.polyfit(log_n, log_d, 1)[0]
    return float(-slope)


def refine_steps(
    x,
    y,
    V: PotentialSpec,
    t: float,
    n_samples: int,
    steps_schedule,
    rng: RngSeed,
    *,
    mode: str = "restricted",
    top_k: int = 10,
    heavy_fraction: float = 0.5,
    workers: int = 1,
    backend: str | None = None,
    key: tuple[int, ...] = (),
) -> RefinementReport:
    """Rerun the Q estimate over a schedule of grid resolutions.

    mode "restricted" draws the finest paths once and restricts them to
    the coarser grids (every entry must divide the last), so successive
    differences are coupled path by path and their standard errors come
    from the per-path differences.  mode "independent" gives each
    resolution a fresh stream derived from the same seed; differences
    are then compared through independent-error bars.  Both modes are
    deterministic for a fixed seed.
    """
    schedule = [int(n) for n in steps_schedule]
    if len(schedule) < 2:
        raise ValueError("steps_schedule needs at least two entries")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("steps_schedule must be strictly increasing")
    if mode not in ("restricted", "independent"):
        raise ValueError("mode must be 'restricted' or 'independent'")

    if mode == "independent":
        estimates = [
            estimate_Q(
                x, y, V, t, n_samples, n, rng,
                top_k=top_k, heavy_fraction=heavy_fraction,
                workers=workers, backend=backend, key=(*key, idx),
            )
            for idx, n in enumerate(schedule)
        ]
        diffs = [b.mean - a.mean for a, b in zip(estimates, estimates[1:])]
        errs = [math.hypot(a.std_error, b.std_error)
                for a, b in zip(estimates, estimates[1:])]
        return RefinementReport(
            mode=mode,
            schedule=tuple(schedule),
            estimates=tuple(estimates),
            diff_means=tuple(float(d) for d in diffs),
            diff_std_errors=tuple(float(e) for e in errs),
            fitted_order=_fit_order(schedule, diffs),
        )

    n_max = schedule[-1]
    if any(n_max % n for n in schedule):
        raise ValueError("restricted mode needs every entry to divide the largest")
    xp = _point(x, V.dim)
    yp = _point(y, V.dim)
    n_levels = len(schedule)

    def make_job(idx: int, count: int):
        def job():
            gen = rng.generator(*key, idx)
            alpha = bridge_values(gen.standard_normal((count, n_max, V.dim)))
            per_level = []
            weights = []
            for n in schedule:
                sub = np.ascontiguousarray(alpha[:, :: n_max // n])
                w = _weights(sub, xp, yp, t, V, backend)
                weights.append(w)
                per_level.append(_chunk_stats(w, top_k))
            per_diff = [_chunk_stats(weights[l + 1] - weights[l], 1)
                        for l in range(n_levels - 1)]
            return per_level, per_diff
        return job

    jobs = [make_job(i, c) for i, c in enumerate(_task_sizes(n_samples))]
    results = _run_ordered(jobs, workers)
    level_stats = list(results[0][0])
    diff_stats = list(results[0][1])
    for levels_part, diffs_part in results[1:]:
        level_stats = [_merge_stats(a, b) for a, b in zip(level_stats, levels_part)]
        diff_stats = [_merge_stats(a, b) for a, b in zip(diff_stats, diffs_part)]

    estimates = [_finalize(s, top_k, heavy_fraction, n)
                 for s, n in zip(level_stats, schedule)]
    diff_means = []
    diff_errs = []
    for s in diff_stats:
        n, mean, m2 = s[0], s[1], s[2]
        se = math.sqrt(max(m2, 0.0) / (n - 1)) / math.sqrt(n) if n > 1 else 0.0
        diff_means.append(float(mean))
        diff_errs.append(float(se))
    return RefinementReport(
        mode=mode,
        schedule=tuple(schedule),
        estimates=tuple(estimates),
        diff_means=tuple(diff_means),
        diff_std_errors=tuple(diff_errs),
        fitted_order=_fit_order(schedule, diff_means),
    )
