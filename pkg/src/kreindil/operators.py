"""Model objects: generator, semigroup, resolvent, spectrum, numerical range.

An :class:`OperatorSpec` is a complex n-by-n generator ``A`` together with an
optional positive-definite metric ``M0`` defining the equivalent scalar
product ``<x, y>_0 = y* M0 x``.  The semigroup is ``T(t) = exp(t A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, SpectrumProximityError
from .numerics import as_square_matrix, expm, hermitian_eig

__all__ = [
    "OperatorSpec",
    "NumericalRangeBoundary",
    "SemigroupEvaluator",
    "semigroup",
    "resolvent",
    "spectrum",
    "numerical_range_boundary",
    "check_derivative_identity",
]

DEFAULT_N_ANGLES = 256
RESOLVENT_EIG_MARGIN = 1e-8


@dataclass
class OperatorSpec:
    """A finite-dimensional generator with an optional equivalent metric."""

    A: np.ndarray
    metric: np.ndarray | None = None
    dim: int = field(init=False)

    def __post_init__(self):
        self.A = as_square_matrix(self.A, "A")
        self.dim = self.A.shape[0]
        if self.metric is not None:
            M = as_square_matrix(self.metric, "metric")
            if M.shape != self.A.shape:
                raise ArgumentError("metric and A must have the same shape")
            if np.linalg.norm(M - M.conj().T, "fro") > 1e-12 * max(
                    1.0, np.linalg.norm(M, "fro")):
                raise ArgumentError("metric must be Hermitian")
            if np.linalg.eigvalsh((M + M.conj().T) / 2).min() <= 0:
                raise ArgumentError("metric must be positive definite")
            self.metric = M


def semigroup(spec: OperatorSpec, t: float) -> np.ndarray:
    """T(t) = exp(t A).  Negative ``t`` gives the group extension exp(tA)."""
    return expm(t * spec.A)


def spectrum(spec: OperatorSpec) -> np.ndarray:
    """Eigenvalues of the generator (general, non-Hermitian)."""
    return np.linalg.eigvals(spec.A)


def resolvent(spec: OperatorSpec, lam: complex) -> np.ndarray:
    """(lam - A)^{-1}, guarded against spectrum proximity.

    Raises :class:`SpectrumProximityError` when ``lam`` is within
    ``1e-8 * |A|`` of an eigenvalue (conditioning blow-up detection).
    """
    eigs = spectrum(spec)
    margin = RESOLVENT_EIG_MARGIN * max(1.0, np.linalg.norm(spec.A, 2))
    gap = np.abs(eigs - lam).min()
    if gap < margin:
        raise SpectrumProximityError(
            f"lambda={lam} is within {gap:.3e} of the spectrum "
            f"(margin {margin:.3e})")
    n = spec.dim
    return np.linalg.solve(lam * np.eye(n, dtype=complex) - spec.A,
                           np.eye(n, dtype=complex))


class SemigroupEvaluator:
    """Batch evaluator for T(t) = exp(t A) at many time points.

    Uses the spectral representation ``A = V diag(lam) V^{-1}`` when the
    eigenbasis is well conditioned, cross-checked against the Pade
    exponential; falls back to per-point ``expm`` otherwise.  This is a
    performance device for quadrature loops; single evaluations should go
    through :func:`semigroup`.
    """

    def __init__(self, A, cond_limit=1e8, check_tol=1e-9):
        self.A = as_square_matrix(A)
        self.n = self.A.shape[0]
        self._diag = False
        try:
            lam, V = np.linalg.eig(self.A)
            cond = np.linalg.cond(V)
            if np.isfinite(cond) and cond < cond_limit:
                self._lam = lam
                self._V = V
                self._Vinv = np.linalg.inv(V)
                self._diag = True
                for t in (0.37, 1.11):
                    ref = expm(t * self.A)
                    got = self._eval_diag(np.array([t]))[0]
                    if np.linalg.norm(got - ref, "fro") > check_tol * max(
                            1.0, np.linalg.norm(ref, "fro")):
                        self._diag = False
                        break
        except np.linalg.LinAlgError:
            self._diag = False

    def _eval_diag(self, ts):
        phases = np.exp(np.multiply.outer(np.asarray(ts), self._lam))
        return np.einsum("ij,tj,jk->tik", self._V, phases, self._Vinv)

    def __call__(self, ts):
        """Stacked T(t) for a 1-d array of times, shape (k, n, n)."""
        ts = np.asarray(ts, dtype=float)
        if self._diag:
            return self._eval_diag(ts)
        return np.stack([expm(t * self.A) for t in ts])


@dataclass
class NumericalRangeBoundary:
    """Support-function description of the numerical range boundary.

    ``support_values[k]`` is the largest eigenvalue of
    ``(e^{i phi_k} A + e^{-i phi_k} A*) / 2``, the support function of the
    numerical range in direction ``phi_k``.
    """

    angles: np.ndarray
    support_values: np.ndarray


def numerical_range_boundary(spec: OperatorSpec,
                             n_angles: int = DEFAULT_N_ANGLES
                             ) -> NumericalRangeBoundary:
    """Support function of the numerical range at uniform angles.

    Per angle this is exact (largest eigenvalue of the rotated Hermitian
    part); the numerical range is the intersection of the half-planes
    ``Re(e^{i phi} w) <= s(phi)`` up to the angular discretization.
    """
    if n_angles < 8:
        raise ArgumentError("need at least 8 angles")
    A = spec.A
    angles = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    vals = np.empty(n_angles)
    for k, phi in enumerate(angles):
        R = (np.exp(1j * phi) * A + np.exp(-1j * phi) * A.conj().T) / 2
        vals[k] = hermitian_eig(R).eigenvalues[0]
    return NumericalRangeBoundary(angles=angles, support_values=vals)


@dataclass
class DerivativeReport:
    """Residuals of d^n/dt^n T(t) = A^n T(t) against central differences."""

    order: int
    t: float
    step: float
    residual_coarse: float
    residual_fine: float
    convergence_order: float


def check_derivative_identity(spec: OperatorSpec, t: float, order: int,
                              step: float = 1e-4) -> DerivativeReport:
    """Compare A^n T(t) with central finite differences of T at t.

    Runs the difference at ``step`` and ``step / 2``; the Richardson slope
    ``log2(residual(step) / residual(step/2))`` should be close to 2.
    """
    if order not in (1, 2):
        raise ArgumentError("order must be 1 or 2")
    if t <= 0:
        raise ArgumentError("need t > 0")
    if t - step <= 0 or step < 1e-12 * max(t, 1.0):
        raise ArgumentError("step underflow for the requested t")
    A = spec.A
    target = np.linalg.matrix_power(A, order) @ semigroup(spec, t)
    scale = max(1.0, np.linalg.norm(target, "fro"))

    def residual(h):
        if order == 1:
            diff = (semigroup(spec, t + h) - semigroup(spec, t - h)) / (2 * h)
        else:
            diff = (semigroup(spec, t + h) - 2 * semigroup(spec, t)
                    + semigroup(spec, t - h)) / h ** 2
        return np.linalg.norm(diff - target, "fro") / scale

    r1 = residual(step)
    r2 = residual(step / 2)
    if r2 <= 1e-300:
        slope = 2.0 if r1 <= 1e-300 else np.inf
    else:
        slope = float(np.log2(r1 / r2))
    return DerivativeReport(order=order, t=t, step=step, residual_coarse=r1,
                            residual_fine=r2, convergence_order=slope)
