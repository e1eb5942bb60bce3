"""Spatial-frequency extraction from rank-1 factor vectors.

Each extractor maximises a normalised correlation between the estimated
factor and the codebook-projected steering family, first over a coarse grid
and then over a few zoomed grids centred on the incumbent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import ArrayGeometry, SpatialFreqPair
from .tensor import cp_als_rank1

__all__ = [
    "GridSpec",
    "AngleSet",
    "GridResult",
    "grid_search",
    "correlation",
    "estimate_rx_freqs",
    "estimate_irs_freqs",
    "estimate_tx_freqs",
    "full_angle_pipeline",
]


@dataclass(frozen=True)
class GridSpec:
    """Coarse-to-fine search settings.

    Refinement round ``r`` (1-based) lays ``refine_points_per_dim`` points
    over a window of half-width ``shrink_factor**r`` times half the bound
    interval, centred on the current best point.  ``bounds`` overrides the
    per-array default interval when given as ``((e_lo, e_hi), (a_lo, a_hi))``.
    """

    coarse_points_per_dim: int = 64
    refine_rounds: int = 3
    refine_points_per_dim: int = 11
    shrink_factor: float = 0.1
    bounds: tuple | None = None

    def __post_init__(self):
        if self.coarse_points_per_dim < 8:
            raise ValueError("coarse_points_per_dim must be at least 8")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be non-negative")
        if self.refine_points_per_dim < 2:
            raise ValueError("refine_points_per_dim must be at least 2")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink_factor must lie in (0, 1)")

    def final_pitch(self, width: float) -> float:
        """Grid spacing of the last round for an interval of the given width."""
        if self.refine_rounds == 0:
            return width / (self.coarse_points_per_dim - 1)
        half = self.shrink_factor ** self.refine_rounds * width / 2.0
        return 2.0 * half / (self.refine_points_per_dim - 1)


@dataclass
class AngleSet:
    """Stacked angle parameters; index 0 of the zeta vectors is the TX."""

    zeta_a: np.ndarray
    zeta_e: np.ndarray
    eta_a: np.ndarray
    eta_e: np.ndarray

    def __post_init__(self):
        for name in ("zeta_a", "zeta_e", "eta_a", "eta_e"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        K = self.eta_a.size
        if self.zeta_a.size != K + 1 or self.zeta_e.size != K + 1 or self.eta_e.size != K:
            raise ValueError("inconsistent AngleSet lengths")

    @property
    def K(self) -> int:
        return self.eta_a.size

    def as_vector(self) -> np.ndarray:
        """Gamma ordering: zeta azimuth, zeta elevation, eta azimuth, eta elevation."""
        return np.concatenate([self.zeta_a, self.zeta_e, self.eta_a, self.eta_e])

    @classmethod
    def from_vector(cls, gamma, K: int) -> "AngleSet":
        g = np.asarray(gamma, dtype=float)
        if g.size != 4 * K + 2:
            raise ValueError(f"expected {4 * K + 2} entries, got {g.size}")
        return cls(g[:K + 1], g[K + 1:2 * K + 2], g[2 * K + 2:3 * K + 2], g[3 * K + 2:])

    @staticmethod
    def labels(K: int) -> list:
        return ([f"zeta{k}a" for k in range(K + 1)] + [f"zeta{k}e" for k in range(K + 1)]
                + [f"eta{k}a" for k in range(1, K + 1)] + [f"eta{k}e" for k in range(1, K + 1)])

    def with_eta(self, other: "AngleSet") -> "AngleSet":
        return AngleSet(self.zeta_a, self.zeta_e, other.eta_a, other.eta_e)


@dataclass
class GridResult:
    freqs: SpatialFreqPair
    value: float        # normalised correlation at the returned point
    coarse_value: float  # best value on the coarse grid


def _argmax_first(obj):
    # row-major argmax returns the smallest (elev, azim) among exact ties
    idx = int(np.argmax(obj))
    return np.unravel_index(idx, obj.shape)


def grid_search(g, wh, n1: int, n2: int, bounds, grid: GridSpec, scale: float = 1.0) -> GridResult:
    """Maximise ``|g^H a| / (scale * ||wh a||)`` over the steering family.

    ``a = kron(prog(n1, azim), prog(n2, elev))``.  ``bounds`` is
    ``((e_lo, e_hi), (a_lo, a_hi))``.
    """
    (e_lo, e_hi), (a_lo, a_hi) = bounds
    ev = np.linspace(e_lo, e_hi, grid.coarse_points_per_dim)
    av = np.linspace(a_lo, a_hi, grid.coarse_points_per_dim)
    obj = kernels.corr_grid(g, wh, n1, n2, ev, av) / scale
    ie, ia = _argmax_first(obj)
    best_e, best_a, best = ev[ie], av[ia], float(obj[ie, ia])
    coarse = best
    half_e = (e_hi - e_lo) / 2.0
    half_a = (a_hi - a_lo) / 2.0
    for r in range(1, grid.refine_rounds + 1):
        s = grid.shrink_factor ** r
        ev = np.clip(np.linspace(best_e - s * half_e, best_e + s * half_e, grid.refine_points_per_dim), e_lo, e_hi)
        av = np.clip(np.linspace(best_a - s * half_a, best_a + s * half_a, grid.refine_points_per_dim), a_lo, a_hi)
        obj = kernels.corr_grid(g, wh, n1, n2, ev, av) / scale
        ie, ia = _argmax_first(obj)
        if obj[ie, ia] > best:
            best_e, best_a, best = ev[ie], av[ia], float(obj[ie, ia])
    return GridResult(SpatialFreqPair(float(best_e), float(best_a)), best, coarse)


def correlation(g, wh, n1: int, n2: int, f: SpatialFreqPair, scale: float = 1.0) -> float:
    """The grid-search objective at a single frequency pair."""
    return float(kernels.corr_grid(g, wh, n1, n2, [f.elev], [f.azim])[0, 0]) / scale


def _bounds(grid: GridSpec, limit: float):
    if grid.bounds is not None:
        return grid.bounds
    return ((-limit, limit), (-limit, limit))


def _check_factor(a_hat, cb, name):
    a_hat = np.asarray(a_hat, dtype=complex).ravel()
    cb = np.asarray(cb, dtype=complex)
    if cb.ndim != 2 or cb.shape[1] != a_hat.size:
        raise ValueError(f"{name}: codebook has {cb.shape[-1]} columns, factor has {a_hat.size} entries")
    nrm = np.linalg.norm(a_hat)
    if not nrm > 0:
        raise ValueError(f"{name}: factor vector is zero")
    return a_hat, cb, nrm


def _rx_problem(a_hat_r, W):
    a, W, nrm = _check_factor(a_hat_r, W, "estimate_rx_freqs")
    return W @ a, W.conj().T, nrm


def _irs_problem(a_hat_i, V):
    a, V, nrm = _check_factor(a_hat_i, V, "estimate_irs_freqs")
    return V @ a, V.conj().T, nrm


def _tx_problem(a_hat_t, F):
    # |a_t_hat^H F^T conj(a)| = |(F conj(a_t_hat))^H a| and ||F^T conj(a)|| = ||F^H a||
    a, F, nrm = _check_factor(a_hat_t, F, "estimate_tx_freqs")
    return F @ a.conj(), F.conj().T, nrm


def estimate_rx_freqs(a_hat_r, W_k, array: ArrayGeometry, wavelength: float,
                      grid: GridSpec = GridSpec(), full: bool = False):
    g, wh, nrm = _rx_problem(a_hat_r, W_k)
    res = grid_search(g, wh, array.n_first, array.n_second,
                      _bounds(grid, array.freq_bound(wavelength)), grid, nrm)
    return res if full else res.freqs


def estimate_irs_freqs(a_hat_i, V, array: ArrayGeometry, wavelength: float,
                       grid: GridSpec = GridSpec(), full: bool = False):
    """Cascaded frequencies; the default interval is ``[-4 d_I / lambda, 4 d_I / lambda]``."""
    g, wh, nrm = _irs_problem(a_hat_i, V)
    res = grid_search(g, wh, array.n_first, array.n_second,
                      _bounds(grid, 2.0 * array.freq_bound(wavelength)), grid, nrm)
    return res if full else res.freqs


def estimate_tx_freqs(a_hat_t, F, array: ArrayGeometry, wavelength: float,
                      grid: GridSpec = GridSpec(), full: bool = False):
    g, wh, nrm = _tx_problem(a_hat_t, F)
    res = grid_search(g, wh, array.n_first, array.n_second,
                      _bounds(grid, array.freq_bound(wavelength)), grid, nrm)
    return res if full else res.freqs


@dataclass
class PipelineOutput:
    angles: AngleSet
    zeta0_per_rx: list = field(default_factory=list)
    als_residuals: list = field(default_factory=list)


def full_angle_pipeline(tensors, codebooks, scenario, grid: GridSpec = GridSpec(), seed=0,
                        als_max_iters: int = 200, als_tol: float = 1e-8, als_init: str = "svd",
                        als_restarts: int = 4, full: bool = False):
    """ALS plus the three extractors for every receiver.

    The TX frequencies are estimated once per receiver and averaged.  The
    ALS start defaults to the unfolding singular vectors; ``als_init="random"``
    uses seeded Gaussian starts.  ``als_restarts`` extra Gaussian starts are
    run per tensor and the fit with the lowest objective is kept (earliest on
    ties), which removes most local-optimum outliers at low SNR.
    """
    tensors = np.asarray(tensors)
    K = tensors.shape[0]
    if K < 1:
        raise ValueError("need at least one receiver tensor")
    if als_restarts < 0:
        raise ValueError("als_restarts must be non-negative")
    lam = scenario.wavelength
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(K)
    z0, zk, eta, resid = [], [], [], []
    for k in range(K):
        rng = np.random.default_rng(seeds[k])
        fit = cp_als_rank1(tensors[k], als_max_iters, als_tol, rng, als_init)
        for _ in range(als_restarts):
            alt = cp_als_rank1(tensors[k], als_max_iters, als_tol, rng, "random")
            if alt.objective[-1] < fit.objective[-1]:
                fit = alt
        f = fit.factors
        resid.append(fit.residual)
        zk.append(estimate_rx_freqs(f.a_r, codebooks.W[k], scenario.rx_array, lam, grid))
        z0.append(estimate_tx_freqs(f.a_t, codebooks.F, scenario.tx_array, lam, grid))
        eta.append(estimate_irs_freqs(f.a_i, codebooks.V, scenario.irs_array, lam, grid))
    angles = AngleSet(
        zeta_a=np.array([np.mean([z.azim for z in z0])] + [z.azim for z in zk]),
        zeta_e=np.array([np.mean([z.elev for z in z0])] + [z.elev for z in zk]),
        eta_a=np.array([e.azim for e in eta]),
        eta_e=np.array([e.elev for e in eta]),
    )
    if full:
        return PipelineOutput(angles, z0, resid)
    return angles
