"""Dense complex-matrix primitives: matrix exponential, Hermitian
eigendecomposition, and adaptive matrix-valued quadrature.

Everything in this module is a pure function of its inputs; results are
freshly allocated arrays.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericsError, QuadratureError

__all__ = [
    "HermitianEig",
    "QuadratureSpec",
    "expm",
    "hermitian_eig",
    "integrate_matrix",
]


def as_square_matrix(M, name="M"):
    """Validate and return a square complex128 2-d array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A.view(float))):
        raise ArgumentError(f"{name} contains non-finite entries")
    return A


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with diagonal Pade approximants.
# Algorithm and theta constants follow Higham, "The scaling and squaring
# method for the matrix exponential revisited" (2005).
# ---------------------------------------------------------------------------

_PADE_COEFFS = {
    3: np.array([120.0, 60.0, 12.0, 1.0]),
    5: np.array([30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]),
    7: np.array([17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0,
                 1512.0, 56.0, 1.0]),
    9: np.array([17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0]),
    13: np.array([64764752532480000.0, 32382376266240000.0,
                  7771770303897600.0, 1187353796428800.0, 129060195264000.0,
                  10559470521600.0, 670442572800.0, 33522128640.0,
                  1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0]),
}

_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(A, m):
    n = A.shape[0]
    c = _PADE_COEFFS[m]
    ident = np.eye(n, dtype=complex)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (c[13] * A6 + c[11] * A4 + c[9] * A2)
                 + c[7] * A6 + c[5] * A4 + c[3] * A2 + c[1] * ident)
        V = (A6 @ (c[12] * A6 + c[10] * A4 + c[8] * A2)
             + c[6] * A6 + c[4] * A4 + c[2] * A2 + c[0] * ident)
        return U, V
    pows = [ident, A2]
    for _ in range((m - 1) // 2 - 1):
        pows.append(pows[-1] @ A2)
    U = sum(c[j] * pows[(j - 1) // 2] for j in range(1, m + 1, 2))
    V = sum(c[j] * pows[j // 2] for j in range(0, m + 1, 2))
    return A @ U, V


def expm(M):
    """Matrix exponential via scaling-and-squaring with diagonal Pade.

    Degrees 3/5/7/9 are used for small norms, degree 13 with repeated
    squaring otherwise.  Raises :class:`NumericsError` when the result
    overflows double precision instead of clamping.
    """
    A = as_square_matrix(M)
    norm1 = np.linalg.norm(A, 1)
    if norm1 == 0.0:
        return np.eye(A.shape[0], dtype=complex)
    result = None
    for m in (3, 5, 7, 9):
        if norm1 <= _PADE_THETA[m]:
            U, V = _pade_uv(A, m)
            result = np.linalg.solve(V - U, V + U)
            break
    if result is None:
        s = max(0, int(np.ceil(np.log2(norm1 / _PADE_THETA[13]))))
        U, V = _pade_uv(A / 2.0 ** s, 13)
        result = np.linalg.solve(V - U, V + U)
        for _ in range(s):
            result = result @ result
    if not np.all(np.isfinite(result.view(float))):
        raise NumericsError(
            f"matrix exponential overflowed (1-norm of input {norm1:.3e})")
    return result


# ---------------------------------------------------------------------------
# Hermitian eigendecomposition
# ---------------------------------------------------------------------------

@dataclass
class HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    Attributes
    ----------
    eigenvalues : (n,) real array, descending.
    eigenvectors : (n, n) unitary array, columns match ``eigenvalues``.
    asymmetry : measured relative deviation ``|M - M*| / |M|`` of the input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    asymmetry: float

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def hermitian_eig(M, sym_tol=1e-8):
    """Eigendecomposition of (the Hermitian part of) ``M``.

    The input is symmetrized as ``(M + M*)/2`` before factoring.  Asymmetry
    above ``1e-12 * |M|`` is reported with a warning; above ``sym_tol * |M|``
    it is an error, since at that point the caller is probably factoring the
    wrong matrix.
    """
    A = as_square_matrix(M)
    scale = np.linalg.norm(A, "fro")
    drift = np.linalg.norm(A - A.conj().T, "fro")
    rel = drift / scale if scale > 0 else 0.0
    if rel > sym_tol:
        raise ArgumentError(
            f"input is not Hermitian: relative asymmetry {rel:.3e} "
            f"exceeds {sym_tol:.1e}")
    if rel > 1e-12:
        warnings.warn(
            f"Hermitian input drift {rel:.3e} above 1e-12; symmetrizing",
            stacklevel=2)
    H = (A + A.conj().T) / 2.0
    w, V = np.linalg.eigh(H)
    return HermitianEig(eigenvalues=w[::-1].copy(),
                        eigenvectors=V[:, ::-1].copy(),
                        asymmetry=rel)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod 7/15 quadrature for matrix-valued integrands
# ---------------------------------------------------------------------------

# QUADPACK dqk15 abscissae and weights (positive half; node 0 last).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point rule on [-1, 1], ascending nodes
GK15_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
GK15_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
# embedded Gauss-7 weights aligned with GK15_NODES (zero on Kronrod-only nodes)
GAUSS7_WEIGHTS = np.zeros(15)
GAUSS7_WEIGHTS[1::2] = np.concatenate([_WG[:-1], [_WG[-1]], _WG[-2::-1]])


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy request for :func:`integrate_matrix`."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 40

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ArgumentError("abs_tol and rel_tol must be positive")
        if self.max_depth < 1:
            raise ArgumentError("max_depth must be at least 1")


def _batched(fn, probe_at):
    """Wrap ``fn`` so it maps a node array to stacked values ``(k, n, n)``.

    Vectorized integrands are used as-is; plain per-point integrands
    (returning one matrix or scalar) are stacked node by node.
    """
    try:
        out = np.asarray(fn(np.array([probe_at, probe_at])), dtype=complex)
        if out.shape and out.shape[0] == 2 and out.ndim in (1, 3):
            return fn
    except Exception:
        pass

    def stacked(nodes):
        return np.stack([np.asarray(fn(u), dtype=complex) for u in nodes])

    return stacked


def _eval_panel(fn, a, b):
    """One GK15 panel on [a, b]: returns (I15, err)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(fn(mid + half * GK15_NODES), dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None, None]
    i15 = half * np.tensordot(GK15_WEIGHTS, vals, axes=(0, 0))
    i7 = half * np.tensordot(GAUSS7_WEIGHTS, vals, axes=(0, 0))
    err = np.linalg.norm(i15 - i7, "fro")
    return i15, err


def integrate_matrix(fn, a, b, spec=QuadratureSpec()):
    """Integrate a matrix-valued function on [a, b].

    ``fn`` must accept a 1-d array of nodes and return the stacked values,
    shape ``(k, n, n)`` (scalar integrands may return shape ``(k,)``).
    Adaptive bisection, Gauss-Kronrod 7/15, error measured in the Frobenius
    norm of the entrywise estimate.  Node placement is deterministic: panels
    are refined worst-error-first with position as tie-break.

    Returns ``(value, error_estimate)``.  Raises :class:`QuadratureError`
    when ``spec.max_depth`` bisection levels do not reach
    ``abs_tol + rel_tol * |value|_F``.
    """
    if not a <= b:
        raise ArgumentError(f"need a <= b, got ({a}, {b})")
    fn = _batched(fn, a)
    if a == b:
        probe = np.atleast_3d(np.asarray(fn(np.array([a])), dtype=complex))
        return np.zeros_like(probe[0]), 0.0

    val, err = _eval_panel(fn, a, b)
    # heap of (-error, left, right, depth, value, error)
    heap = [(-err, a, b, 0, val, err)]
    total = val.copy()
    total_err = err
    while True:
        tol = spec.abs_tol + spec.rel_tol * np.linalg.norm(total, "fro")
        if total_err <= tol:
            return total, total_err
        neg_err, lo, hi, depth, pval, perr = heapq.heappop(heap)
        if depth >= spec.max_depth:
            raise QuadratureError(
                f"quadrature did not converge: error estimate {total_err:.3e} "
                f"vs tolerance {tol:.3e} at depth {depth}",
                result=total, error_estimate=total_err)
        mid = 0.5 * (lo + hi)
        lv, le = _eval_panel(fn, lo, mid)
        rv, re = _eval_panel(fn, mid, hi)
        total += lv + rv - pval
        total_err += le + re - perr
        heapq.heappush(heap, (-le, lo, mid, depth + 1, lv, le))
        heapq.heappush(heap, (-re, mid, hi, depth + 1, rv, re))
