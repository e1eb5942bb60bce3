"""Pure-numpy reference implementations of the hot kernels."""
import numpy as np


def corr_grid(g, wh, n1, n2, elev, azim):
    """Normalised-correlation numerator and denominator over a frequency grid.

    Parameters
    ----------
    g : (N,) complex
        Combined vector such that the numerator is ``|g^H a(elev, azim)|``.
    wh : (D, N) complex
        Codebook projection; the denominator is ``||wh @ a(elev, azim)||``.
    n1, n2 : int
        UPA axis sizes, ``N = n1 * n2``; the outer axis carries ``azim``.
    elev, azim : 1-D float arrays
        Grid coordinates.

    Returns
    -------
    (len(elev), len(azim)) float array of ``numerator / denominator``.
    """
    elev = np.asarray(elev, dtype=float)
    azim = np.asarray(azim, dtype=float)
    X = np.exp(1j * np.pi * np.outer(azim, np.arange(n1)))   # (na, n1)
    Y = np.exp(1j * np.pi * np.outer(elev, np.arange(n2)))   # (ne, n2)
    G = np.asarray(g).reshape(n1, n2)
    num = np.abs(Y @ (G.conj().T @ X.T))
    WH = np.asarray(wh).reshape(-1, n1, n2)
    P = np.einsum("dxb,ax->dab", WH, X, optimize=True)
    S = np.einsum("dab,eb->dea", P, Y, optimize=True)
    den = np.sqrt(np.sum(S.real ** 2 + S.imag ** 2, axis=0))
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _sweep(Y, a_t, a_i):
    nt = np.vdot(a_t, a_t).real
    ni = np.vdot(a_i, a_i).real
    a_r = np.einsum("ijq,j,q->i", Y, a_t.conj(), a_i.conj(), optimize=True) / (nt * ni)
    nr = np.vdot(a_r, a_r).real
    a_t = np.einsum("ijq,i,q->j", Y, a_r.conj(), a_i.conj(), optimize=True) / (nr * ni)
    nt = np.vdot(a_t, a_t).real
    a_i = np.einsum("ijq,i,j->q", Y, a_r.conj(), a_t.conj(), optimize=True) / (nr * nt)
    return a_r, a_t, a_i


def residual_sq(Y, a_r, a_t, a_i):
    R = Y - a_r[:, None, None] * a_t[None, :, None] * a_i[None, None, :]
    return float(np.vdot(R, R).real)


def als_rank1(Y, a_t, a_i, max_iters, tol):
    """Rank-1 alternating least squares.

    Returns ``(a_r, a_t, a_i, trace)`` where ``trace`` holds the squared
    residual after each full sweep.
    """
    Y = np.ascontiguousarray(Y, dtype=complex)
    a_t = np.array(a_t, dtype=complex)
    a_i = np.array(a_i, dtype=complex)
    y2 = float(np.vdot(Y, Y).real)
    trace = []
    prev = None
    a_r = None
    for _ in range(int(max_iters)):
        a_r, a_t, a_i = _sweep(Y, a_t, a_i)
        f = residual_sq(Y, a_r, a_t, a_i)
        trace.append(f)
        if prev is not None and abs(prev - f) <= tol * y2:
            break
        prev = f
    return a_r, a_t, a_i, np.array(trace)
