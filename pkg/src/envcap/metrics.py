"""Entropic and metric functionals on density operators, in bits.

Includes the verified inequality suite relating fidelity, trace distance
and relative entropy that the rest of the package leans on for oracle
checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    BipartiteShape,
    DensityOperator,
    DimensionError,
    DomainError,
    PureStateVector,
    TRACE_TOL,
    partial_trace_matrix,
)

LN2 = float(np.log(2.0))

# Entropic inequality slack: eigenvalue clamping propagates ~1e-9 through logs.
ENT_TOL = 1e-7

# Eigenvalues below this count as outside the support (infinite relative entropy).
SUPPORT_TOL = 1e-10

# Kernel mass above this is a genuine support violation rather than noise.
PSD_MASS_TOL = 1e-9


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)


def shannon_entropy(p) -> float:
    """Entropy of a nonnegative vector in bits, with 0 log 0 = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def binary_entropy(q: float) -> float:
    """H(q, 1-q) in bits."""
    if q < 0.0 or q > 1.0:
        raise DomainError(f"binary entropy argument must be in [0, 1], got {q}")
    return shannon_entropy([q, 1.0 - q])


def von_neumann_entropy(rho) -> float:
    """S(rho) = -tr(rho log2 rho), eigenvalues clamped before the log."""
    mat = _as_matrix(rho)
    w = np.clip(np.linalg.eigvalsh(mat), 0.0, None)
    return shannon_entropy(w)


def entanglement_entropy(psi: PureStateVector) -> float:
    """Entropy of either reduced state of a bipartite pure state, in bits."""
    if not isinstance(psi.space, BipartiteShape):
        raise DimensionError("entanglement is defined for bipartite pure states")
    red = partial_trace_matrix(psi.projector(), psi.space, "b")
    return von_neumann_entropy(red)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (squared-overlap convention), in [0, 1]."""
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sa = _psd_sqrt(a)
    w = np.clip(np.linalg.eigvalsh(sa @ b @ sa), 0.0, None)
    # the sqrt amplifies eigensolver noise near zero; drop it
    if w[-1] > 0:
        w[w < 1e-12 * w[-1]] = 0.0
    f = float(np.sqrt(w).sum() ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of the difference, in [0, 1]."""
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w = np.linalg.eigvalsh(a - b)
    return float(np.abs(w).sum() / 2.0)


def relative_entropy(rho, sigma) -> float:
    """D(rho || sigma) in bits; +inf when rho has weight outside sigma's support."""
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    wa, va = np.linalg.eigh(a)
    wb, vb = np.linalg.eigh(b)
    wa = np.clip(wa, 0.0, None)
    inside = wb >= SUPPORT_TOL
    # weight of rho on the kernel of sigma
    if not inside.all():
        kernel = vb[:, ~inside]
        mass = float(np.real(np.einsum("ij,jk,ki->", kernel.conj().T, a, kernel)))
        if mass > PSD_MASS_TOL:
            return float("inf")
    tr_rho_log_rho = float((wa[wa > 0] * np.log2(wa[wa > 0])).sum())
    overlap = np.abs(va.conj().T @ vb) ** 2  # overlap[i, j] = |<a_i | b_j>|^2
    logb = np.where(inside, np.log2(np.clip(wb, SUPPORT_TOL, None)), 0.0)
    tr_rho_log_sigma = float((wa[:, None] * overlap * logb[None, :]).sum())
    return tr_rho_log_rho - tr_rho_log_sigma


@dataclass(frozen=True)
class MetricInequalityReport:
    """Slacks (>= 0 means satisfied) for the fidelity/trace-distance/relative-entropy chain."""

    fidelity: float
    trace_dist: float
    rel_entropy: float
    lower_slack: float  # T - (1 - sqrt(F))
    upper_slack: float  # sqrt(1 - F) - T
    pinsker_slack: float  # D - T^2 (inf counts as satisfied)

    @property
    def all_satisfied(self) -> bool:
        return (
            self.lower_slack >= -ENT_TOL
            and self.upper_slack >= -ENT_TOL
            and self.pinsker_slack >= -ENT_TOL
        )


def verify_metric_inequalities(rho, sigma) -> MetricInequalityReport:
    """Check both fidelity/trace-distance bounds and the Pinsker bound."""
    f = fidelity(rho, sigma)
    t = trace_distance(rho, sigma)
    d = relative_entropy(rho, sigma)
    pinsker = float("inf") if np.isinf(d) else d - t * t
    return MetricInequalityReport(
        fidelity=f,
        trace_dist=t,
        rel_entropy=d,
        lower_slack=t - (1.0 - np.sqrt(f)),
        upper_slack=float(np.sqrt(max(1.0 - f, 0.0))) - t,
        pinsker_slack=pinsker,
    )


def shannon_mutual_information(joint) -> float:
    """I(X:Y) = H(X) + H(Y) - H(X,Y) of a joint probability matrix, in bits."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise DomainError("joint distribution must be a matrix")
    if p.min() < -TRACE_TOL:
        raise DomainError(f"negative joint probability {p.min()}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > TRACE_TOL:
        raise DomainError(f"joint probabilities sum to {total}, expected 1")
    hx = shannon_entropy(p.sum(axis=1))
    hy = shannon_entropy(p.sum(axis=0))
    hxy = shannon_entropy(p.reshape(-1))
    return max(hx + hy - hxy, 0.0)


@dataclass(frozen=True)
class EntropyTriple:
    """Entropies (bits) of the input, output and environment marginals.

    For triples coming from a tripartite pure state, subadditivity
    s_a <= s_b + s_c and the triangle inequality |s_b - s_c| <= s_a hold.
    """

    s_a: float
    s_b: float
    s_c: float

    def mutual_information(self) -> float:
        return self.s_a + self.s_b - self.s_c

    def consistency_violations(self, tol: float = ENT_TOL) -> list[str]:
        """Names of the purification inequalities this triple breaks, if any."""
        out = []
        if min(self.s_a, self.s_b, self.s_c) < -tol:
            out.append("nonnegativity")
        if self.s_a > self.s_b + self.s_c + tol:
            out.append("subadditivity")
        if abs(self.s_b - self.s_c) > self.s_a + tol:
            out.append("triangle")
        return out
