"""The energy form of the semigroup: H with <Hx,y> = <Ax,y> + <x,Ay>, its
polar parts G = J|G|, and the derivative identities they encode.

All inner products here are taken in the active metric
``<x, y> = y* M x``; the plain case is ``M = I``.  In finite dimension the
form construction collapses to the matrix identity ``H = A + M^{-1} A* M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, HypothesisError
from .numerics import as_square_matrix, hermitian_eig
from .operators import OperatorSpec, semigroup

__all__ = [
    "MetricContext",
    "GDecomposition",
    "build_H",
    "build_H_star",
    "polar_parts",
    "check_energy_derivative",
]

KERNEL_CUTOFF = 1e-12
LEMMA_BOUND_TOL = 1e-10


class MetricContext:
    """Inner-product context: plain (M = I) or an equivalent metric M.

    Provides the metric inner product, norm, adjoint, and cached square
    roots of M for transporting decompositions to orthonormal coordinates.
    """

    def __init__(self, metric: np.ndarray | None = None, dim: int | None = None):
        if metric is None:
            if dim is None:
                raise ArgumentError("need dim when metric is None")
            self.M = np.eye(dim, dtype=complex)
            self.is_identity = True
        else:
            self.M = as_square_matrix(metric, "metric")
            self.is_identity = bool(
                np.array_equal(self.M, np.eye(self.M.shape[0], dtype=complex)))
        self.dim = self.M.shape[0]
        w, V = np.linalg.eigh((self.M + self.M.conj().T) / 2)
        if w.min() <= 0:
            raise HypothesisError("metric is not positive definite")
        self._w = w
        self._V = V
        self.Mhalf = (V * np.sqrt(w)) @ V.conj().T
        self.Minvhalf = (V / np.sqrt(w)) @ V.conj().T
        self.Minv = (V / w) @ V.conj().T

    @classmethod
    def for_spec(cls, spec: OperatorSpec) -> "MetricContext":
        return cls(metric=spec.metric, dim=spec.dim)

    def inner(self, x, y):
        """<x, y> = y* M x (linear in the first argument)."""
        if self.is_identity:
            return np.vdot(y, x)
        return np.vdot(y, self.M @ x)

    def norm(self, x):
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def adjoint(self, X):
        """Metric adjoint M^{-1} X* M; plain adjoint when M = I."""
        if self.is_identity:
            return X.conj().T.copy()
        return self.Minv @ X.conj().T @ self.M

    def is_selfadjoint(self, X, tol=1e-10):
        MX = self.M @ X
        scale = max(1.0, np.linalg.norm(MX, "fro"))
        return np.linalg.norm(MX - MX.conj().T, "fro") <= tol * scale


def build_H(spec: OperatorSpec, ctx: MetricContext) -> np.ndarray:
    """H = A + M^{-1} A* M, the operator of the form <Ax,y> + <x,Ay>.

    H is selfadjoint with respect to the metric: ``(M H)* = M H``.
    """
    return spec.A + ctx.adjoint(spec.A)


def build_H_star(spec: OperatorSpec, ctx: MetricContext) -> np.ndarray:
    """Same construction run on the metric adjoint of A.

    Algebraically this equals :func:`build_H` exactly in finite dimension;
    it is computed independently so the equality can be tested.
    """
    A_sharp = ctx.adjoint(spec.A)
    return A_sharp + ctx.adjoint(A_sharp)


@dataclass
class GDecomposition:
    """Polar data of the energy operator G (= H) in the active metric.

    J is the metric-selfadjoint partial isometry sign(G) (zero on ker G),
    absG = |G|, C = |G|^{1/2}, and Gplus/Gminus are the nonnegative and
    nonpositive parts with ``Gplus + Gminus = G``, ``Gplus - Gminus = |G|``.
    """

    G: np.ndarray
    J: np.ndarray
    absG: np.ndarray
    Gplus: np.ndarray
    Gminus: np.ndarray
    C: np.ndarray
    beta: float
    eigenvalues: np.ndarray
    kernel_dim: int


def polar_parts(H, beta: float, ctx: MetricContext) -> GDecomposition:
    """Spectral polar decomposition of G := H in the metric inner product.

    Checks the upper form bound ``<Hx, x> <= 2 beta |x|^2`` first and
    refuses when it fails, naming the offending eigenvalue.  Eigenvalues of
    magnitude below ``1e-12 * |G|`` are treated as kernel (J = 0 there).

    The decomposition is computed in M^{1/2}-coordinates, where the metric
    becomes Euclidean, and transported back; this keeps every part
    genuinely M-selfadjoint.
    """
    G = as_square_matrix(H, "H")
    if not ctx.is_selfadjoint(G):
        raise ArgumentError("H is not selfadjoint in the active metric")
    Gtil = ctx.Mhalf @ G @ ctx.Minvhalf
    eig = hermitian_eig(Gtil)
    lam, V = eig.eigenvalues, eig.eigenvectors
    top = lam[0]
    if top > 2 * beta + LEMMA_BOUND_TOL * max(1.0, abs(lam).max()):
        raise HypothesisError(
            f"energy form bound violated: top eigenvalue {top:.6e} exceeds "
            f"2*beta = {2 * beta:.6e}")
    scale = abs(lam).max() if lam.size else 0.0
    signs = np.sign(lam)
    signs[np.abs(lam) <= KERNEL_CUTOFF * scale] = 0.0
    kernel_dim = int(np.sum(signs == 0.0))
    lam_eff = np.where(signs == 0.0, 0.0, lam)

    def transport(diag):
        return ctx.Minvhalf @ ((V * diag) @ V.conj().T) @ ctx.Mhalf

    absG = transport(np.abs(lam_eff))
    J = transport(signs)
    Gplus = transport(np.maximum(lam_eff, 0.0))
    Gminus = transport(np.minimum(lam_eff, 0.0))
    C = transport(np.sqrt(np.abs(lam_eff)))
    return GDecomposition(G=G, J=J, absG=absG, Gplus=Gplus, Gminus=Gminus,
                          C=C, beta=float(beta), eigenvalues=lam_eff,
                          kernel_dim=kernel_dim)


@dataclass
class EnergyDerivativeReport:
    """Residuals of d/dt |T(t)h|^2 = <G T(t)h, T(t)h> (and the adjoint
    version) against central differences, with the Richardson slope."""

    max_residual: float
    max_residual_adjoint: float
    convergence_order: float
    step: float
    trials: int


def check_energy_derivative(spec: OperatorSpec, decomp: GDecomposition,
                            ctx: MetricContext, t: float, trials: int = 10,
                            step: float = 1e-4, seed: int = 0
                            ) -> EnergyDerivativeReport:
    """Finite-difference check of the energy derivative identities at t > 0.

    For random h compares central differences of ``|T(t)h|^2`` (metric
    norm) with ``<G T(t)h, T(t)h>``, and the same for the metric-adjoint
    semigroup.  Residuals are relative to the scale of the derivative.
    """
    if t <= 0:
        raise ArgumentError("need t > 0")
    rng = np.random.default_rng(seed)
    n = spec.dim
    G = decomp.G

    def T(u):
        return semigroup(spec, u)

    def T_sharp(u):
        return ctx.adjoint(semigroup(spec, u))

    def residuals(h, fwd, hstep):
        def energy(u):
            x = fwd(u) @ h
            return ctx.inner(x, x).real

        x = fwd(t) @ h
        claimed = ctx.inner(G @ x, x).real
        scale = max(1.0, abs(claimed))
        diff = (energy(t + hstep) - energy(t - hstep)) / (2 * hstep)
        return abs(diff - claimed) / scale

    worst = worst_adj = 0.0
    worst_coarse = worst_fine = 0.0
    for _ in range(max(1, trials)):
        h = rng.normal(size=n) + 1j * rng.normal(size=n)
        r_c = residuals(h, T, step)
        r_f = residuals(h, T, step / 2)
        worst = max(worst, r_c)
        worst_adj = max(worst_adj, residuals(h, T_sharp, step))
        if r_c > worst_coarse:
            worst_coarse, worst_fine = r_c, r_f
    if worst_fine <= 1e-300:
        slope = 2.0 if worst_coarse <= 1e-300 else np.inf
    else:
        slope = float(np.log2(worst_coarse / worst_fine))
    return EnergyDerivativeReport(max_residual=worst,
                                  max_residual_adjoint=worst_adj,
                                  convergence_order=slope, step=step,
                                  trials=trials)
