"""Third-order tensor unfoldings and rank-1 CP fitting by alternating least squares.

Tensors are stored as numpy arrays of shape ``(D_RX, D_TX, D_IRS)`` indexed
``[i, j, q]``.  The unfoldings place the fastest-varying column index on the
second factor of the matching Khatri-Rao product, so for a rank-1 tensor

    unfold(Y, 1) = a_r (a_I kr a_t)^T
    unfold(Y, 2) = a_t (a_I kr a_r)^T
    unfold(Y, 3) = a_I (a_t kr a_r)^T
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

# axis permutation applied before the C-order reshape, per mode
_PERM = {1: (0, 2, 1), 2: (1, 2, 0), 3: (2, 1, 0)}


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization (modes are 1, 2, 3)."""
    if mode not in _PERM:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError("unfold expects a third-order tensor")
    p = _PERM[mode]
    return t.transpose(p).reshape(t.shape[p[0]], -1)


def fold(m, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    if mode not in _PERM:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    p = _PERM[mode]
    permuted = tuple(shape[a] for a in p)
    return np.asarray(m).reshape(permuted).transpose(np.argsort(p))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; vectors are treated as single columns."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1 and b.ndim == 1:
        return np.kron(a, b)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    if a.shape[1] != b.shape[1]:
        raise ValueError("Khatri-Rao operands need equal column counts")
    return (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[1])


def outer3(a_r, a_t, a_i) -> np.ndarray:
    return np.einsum("i,j,q->ijq", a_r, a_t, a_i)


@dataclass
class Rank1Factors:
    """Un-normalised rank-1 CP factors (scale/phase gauge is left free)."""

    a_r: np.ndarray
    a_t: np.ndarray
    a_i: np.ndarray

    def full(self) -> np.ndarray:
        return outer3(self.a_r, self.a_t, self.a_i)


def leading_vector(m) -> np.ndarray:
    """Dominant left singular vector, via the small Gram matrix."""
    w, U = np.linalg.eigh(m @ m.conj().T)
    return U[:, -1]


@dataclass
class AlsResult:
    factors: Rank1Factors
    residual: float        # ||Y - model||_F / ||Y||_F
    objective: np.ndarray  # squared residual after every sweep
    iterations: int


def cp_als_rank1(t, max_iters: int = 200, tol: float = 1e-8, seed=0, init: str = "random") -> AlsResult:
    """Best rank-1 fit of a complex third-order tensor by ALS.

    With ``init="random"`` the factors ``a_t`` and ``a_i`` start from complex
    Gaussian draws; ``init="svd"`` uses the leading left singular vectors of
    the mode-2 and mode-3 unfoldings instead.  ``a_r`` is always solved
    first.  Each update is the exact least-squares solution given the other
    two factors (the pseudo-inverse of a Khatri-Rao vector is its conjugate
    over its squared norm).  Iteration stops once the objective changes by
    no more than ``tol * ||Y||^2`` or after ``max_iters`` sweeps.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = np.ascontiguousarray(t, dtype=complex)
    if t.ndim != 3:
        raise ValueError("cp_als_rank1 expects a third-order tensor")
    y2 = float(np.vdot(t, t).real)
    if y2 == 0.0:
        raise ValueError("cannot fit a rank-1 model to an all-zero tensor")
    if init == "random":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        _, n_t, n_i = t.shape
        a_t = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
        a_i = rng.standard_normal(n_i) + 1j * rng.standard_normal(n_i)
    elif init == "svd":
        a_t = leading_vector(unfold(t, 2))
        a_i = leading_vector(unfold(t, 3))
    else:
        raise ValueError(f"unknown init {init!r}")
    a_r, a_t, a_i, trace = kernels.als_rank1(t, a_t, a_i, int(max_iters), float(tol))
    res = float(np.sqrt(max(trace[-1], 0.0) / y2))
    return AlsResult(Rank1Factors(a_r, a_t, a_i), res, trace, len(trace))
