"""Sector predicates, dissipativity margins, shift search, and a generator
of random instances satisfying the dilation hypotheses by construction.

The sector ``S(alpha, theta)`` opens around the negative real direction:
``{lam != alpha : |arg(lam - alpha)| >= pi - theta} + {alpha}`` with vertex
``alpha >= 0`` and semi-angle ``0 < theta < pi/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, HypothesisError
from .numerics import hermitian_eig
from .operators import OperatorSpec, resolvent, spectrum

__all__ = [
    "Sector",
    "SectorMarginReport",
    "SectorialityReport",
    "check_numerical_range_in_sector",
    "check_sectorial",
    "dissipative_margin",
    "find_beta",
    "generate_instance",
]

# angular step used when sampling rotated Hermitian parts; support functions
# are Lipschitz in the angle so this bounds the containment error
ANGLE_STEP = np.pi / 1024
BOUNDARY_BAND = 1e-12


@dataclass(frozen=True)
class Sector:
    """Closed sector with vertex on the real axis, opening leftward."""

    vertex: float
    semi_angle: float

    def __post_init__(self):
        if self.vertex < 0:
            raise ArgumentError("vertex must be >= 0")
        if not 0 < self.semi_angle < np.pi / 2:
            raise ArgumentError("semi_angle must lie in (0, pi/2)")

    def membership(self, lam: complex, scale: float = 1.0):
        """Return (inside, on_boundary) for a point.

        Exact comparison first; a band of ``1e-12 * scale`` around the
        boundary rays is flagged since the sector is closed and roundoff
        can move points across.
        """
        z = complex(lam) - self.vertex
        if z == 0:
            return True, False
        inside = abs(np.angle(z)) >= np.pi - self.semi_angle
        # arc distance from the boundary rays, in absolute units
        boundary = abs(abs(np.angle(z)) - (np.pi - self.semi_angle)) * abs(z) \
            <= BOUNDARY_BAND * max(scale, 1.0)
        return bool(inside or boundary), bool(boundary)


@dataclass
class SectorMarginReport:
    """Result of the numerical-range sector test.

    ``margin`` is the largest eigenvalue of the rotated Hermitian parts
    ``(e^{i psi}(A - alpha) + e^{-i psi}(A - alpha)*) / 2`` over the sampled
    ``psi``; nonpositive means the numerical range is inside the sector.
    """

    inside: bool
    margin: float
    worst_angle: float
    boundary: bool


def check_numerical_range_in_sector(spec: OperatorSpec, sector: Sector,
                                    metric: np.ndarray | None = None
                                    ) -> SectorMarginReport:
    """Test nu(A) within S(alpha, theta) via rotated Hermitian parts.

    With a metric, the Rayleigh quotients are taken in ``<.,.>_0`` and the
    margins are eigenvalues of the corresponding Hermitian pencils.
    """
    A = spec.A - sector.vertex * np.eye(spec.dim)
    half_opening = np.pi / 2 - sector.semi_angle
    n_steps = max(2, int(np.ceil(2 * half_opening / ANGLE_STEP)))
    psis = np.linspace(-half_opening, half_opening, n_steps + 1)
    worst = -np.inf
    worst_psi = 0.0
    for psi in psis:
        R = (np.exp(1j * psi) * A + np.exp(-1j * psi) * A.conj().T) / 2
        if metric is None:
            top = hermitian_eig(R).eigenvalues[0]
        else:
            top = _pencil_top_eig((np.exp(1j * psi) * metric @ A
                                   + np.exp(-1j * psi) * A.conj().T @ metric) / 2,
                                  metric)
        if top > worst:
            worst = top
            worst_psi = psi
    scale = max(1.0, np.linalg.norm(A, 2))
    boundary = abs(worst) <= BOUNDARY_BAND * scale
    return SectorMarginReport(inside=bool(worst <= 0.0 or boundary),
                              margin=float(worst),
                              worst_angle=float(worst_psi),
                              boundary=boundary)


def _pencil_top_eig(S, M):
    """Largest eigenvalue of the Hermitian pencil (S, M), M positive definite."""
    w, V = np.linalg.eigh((M + M.conj().T) / 2)
    if w.min() <= 0:
        raise HypothesisError("metric is not positive definite")
    Minvhalf = (V / np.sqrt(w)) @ V.conj().T
    return hermitian_eig(Minvhalf @ S @ Minvhalf).eigenvalues[0]


def dissipative_margin(spec: OperatorSpec, beta: float,
                       use_metric: bool = False) -> float:
    """Largest Rayleigh quotient of Re<(A - beta)x, x> / |x|^2.

    Plain case: top eigenvalue of ``(A + A*)/2 - beta``.  Metric case: top
    eigenvalue of the pencil ``((M0 A + A* M0)/2 - beta M0, M0)``.
    Nonpositive means ``A - beta`` is dissipative in the chosen product.
    """
    A = spec.A
    if use_metric:
        if spec.metric is None:
            raise ArgumentError("spec has no metric")
        M = spec.metric
        S = (M @ A + A.conj().T @ M) / 2 - beta * M
        return float(_pencil_top_eig(S, M))
    H = (A + A.conj().T) / 2
    return float(hermitian_eig(H).eigenvalues[0] - beta)


@dataclass
class SectorialityReport:
    """Executable form of the sectoriality and dissipativity hypotheses."""

    theta: float
    beta: float
    nr_in_sector: bool
    nr_margin: float
    spectrum_in_sector: bool
    spectrum_boundary: bool
    resolvent_sup: dict
    dissipative_margin: float
    metric_dissipative_margin: float | None
    holomorphy_semi_angle: float
    notes: list = field(default_factory=list)


def check_sectorial(spec: OperatorSpec, beta: float, theta: float,
                    phis=None, n_radii: int = 40, n_rays: int = 9
                    ) -> SectorialityReport:
    """Spectrum containment (exact) and resolvent sup estimates (sampled).

    For each ``phi`` in ``phis`` the quantity
    ``sup |lam R(lam, A - beta)|`` over the complement of S(0, phi) is
    estimated on the boundary rays ``arg lam = +-(pi - phi)`` and interior
    rays, with log-spaced radii spanning ``[1e-3, 1e3] * |A - beta|``.
    The estimate is a sampled lower bound of the sup, labelled as such.
    """
    if not 0 < theta < np.pi / 2:
        raise ArgumentError("theta must lie in (0, pi/2)")
    if phis is None:
        phis = [theta + k * (np.pi - theta) / 4 for k in (1, 2, 3)]
    for phi in phis:
        if not theta < phi < np.pi:
            raise ArgumentError("each phi must lie in (theta, pi)")
    B = spec.A - beta * np.eye(spec.dim)
    Bspec = OperatorSpec(B)
    eigs = spectrum(Bspec)
    scale = max(np.linalg.norm(B, 2), 1e-12)
    sector = Sector(vertex=0.0, semi_angle=theta)
    inside_flags, boundary_flags = [], []
    for lam in eigs:
        ins, bnd = sector.membership(lam, scale=scale)
        inside_flags.append(ins)
        boundary_flags.append(bnd)
    radii = np.geomspace(1e-3 * scale, 1e3 * scale, n_radii)
    sup_map = {}
    for phi in phis:
        best = 0.0
        # boundary rays plus rays strictly inside the complement
        args = np.linspace(-(np.pi - phi), np.pi - phi, n_rays)
        for psi in args:
            for r in radii:
                lam = r * np.exp(1j * psi)
                try:
                    val = abs(lam) * np.linalg.norm(resolvent(Bspec, lam), 2)
                except Exception:
                    continue
                best = max(best, val)
        sup_map[float(phi)] = {"estimate": float(best),
                               "n_samples": int(n_rays * n_radii)}
    notes = []
    if any(boundary_flags):
        notes.append("eigenvalue within boundary band: containment indeterminate")
    nr_report = check_numerical_range_in_sector(
        spec, Sector(max(beta, 0.0), theta))
    return SectorialityReport(
        theta=float(theta),
        beta=float(beta),
        nr_in_sector=nr_report.inside,
        nr_margin=nr_report.margin,
        spectrum_in_sector=bool(all(inside_flags)),
        spectrum_boundary=bool(any(boundary_flags)),
        resolvent_sup=sup_map,
        dissipative_margin=dissipative_margin(spec, beta, use_metric=False),
        metric_dissipative_margin=(
            dissipative_margin(spec, beta, use_metric=True)
            if spec.metric is not None else None),
        holomorphy_semi_angle=float(np.pi / 2 - theta),
        notes=notes,
    )


def find_beta(spec: OperatorSpec, theta: float, tol: float = 1e-8,
              metric: np.ndarray | None = None) -> float:
    """Smallest beta >= 0 with nu(A) inside S(beta, theta), by bisection.

    Feasibility is monotone in beta (the leftward sector grows as the vertex
    moves right).  Raises :class:`HypothesisError` when no beta up to
    ``10 * |A|`` works.
    """
    if not 0 < theta < np.pi / 2:
        raise ArgumentError("theta must lie in (0, pi/2)")

    def feasible(b):
        rep = check_numerical_range_in_sector(
            spec, Sector(vertex=b, semi_angle=theta), metric=metric)
        return rep.margin <= 0.0 or rep.boundary

    if feasible(0.0):
        return 0.0
    beta_max = 10.0 * max(np.linalg.norm(spec.A, 2), 1.0)
    if not feasible(beta_max):
        raise HypothesisError(
            f"no beta <= {beta_max:.3e} brings the numerical range into the "
            f"sector of semi-angle {theta:.4f}")
    lo, hi = 0.0, beta_max
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def generate_instance(dim: int, theta: float, beta: float,
                      with_metric: bool = False, seed: int = 0,
                      angle_margin: float = 0.05,
                      cond_target: float = 3.0) -> OperatorSpec:
    """Random instance satisfying the dilation hypotheses by construction.

    Draws Hermitian positive-definite D and Hermitian W with
    ``|W| <= tan(theta - angle_margin)`` and sets
    ``B = -D^{1/2} (I + iW) D^{1/2}``, so every Rayleigh quotient of B is
    ``-(1 + iw)|y|^2`` with ``|w| <= tan(theta)``: B is dissipative with
    numerical range in S(0, theta).  Returns ``A = beta + B`` in the plain
    case; with a metric, ``A = beta + S B S^{-1}`` and ``M0 = (S S*)^{-1}``
    for a random well-conditioned S, which makes ``A - beta`` dissipative in
    ``<.,.>_0``.  Deterministic per seed.
    """
    if dim < 1:
        raise ArgumentError("dim must be >= 1")
    if not 0 < theta < np.pi / 2:
        raise ArgumentError("theta must lie in (0, pi/2)")
    if not 0 < angle_margin < theta:
        raise ArgumentError("angle_margin must lie in (0, theta)")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    D = X @ X.conj().T / dim + 0.25 * np.eye(dim)
    W = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    W = (W + W.conj().T) / 2
    wnorm = np.linalg.norm(W, 2)
    if wnorm > 0:
        W *= np.tan(theta - angle_margin) / wnorm
    lam, V = np.linalg.eigh(D)
    Dhalf = (V * np.sqrt(lam)) @ V.conj().T
    B = -Dhalf @ (np.eye(dim) + 1j * W) @ Dhalf
    if not with_metric:
        return OperatorSpec(A=beta * np.eye(dim) + B)
    # random S with singular values log-spaced in [1/cond_target, 1]
    Q1, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                         + 1j * rng.normal(size=(dim, dim)))
    Q2, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                         + 1j * rng.normal(size=(dim, dim)))
    svals = np.geomspace(1.0, 1.0 / cond_target, dim)
    S = (Q1 * svals) @ Q2.conj().T
    Sinv = np.linalg.inv(S)
    A = beta * np.eye(dim) + S @ B @ Sinv
    M0 = Sinv.conj().T @ Sinv
    M0 = (M0 + M0.conj().T) / 2
    return OperatorSpec(A=A, metric=M0)
