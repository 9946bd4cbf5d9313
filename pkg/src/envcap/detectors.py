"""Detector analysis for PPT-constrained state discrimination.

A detector is a measurement element 0 <= M <= 1 whose partial transpose is
positive.  Any such element that catches a near-maximally-entangled target
with small error must carry a large trace; the closed-form trace floors
live here together with the Schmidt-tail machinery behind them and a
small-scale convex solver that finds minimum-trace detectors as a
tightness oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import shannon_entropy
from .tensor import (
    BipartiteShape,
    DimensionError,
    DomainError,
    PSD_TOL,
    PureStateVector,
    SchmidtDecomposition,
    as_generator,
    haar_random_state,
    partial_transpose,
    schmidt_decompose,
    schmidt_vector,
)


class InapplicableError(ValueError):
    """The detector hypothesis (PPT element) fails, so the trace floors say nothing."""


@dataclass(frozen=True)
class PovmElement:
    """Measurement element 0 <= M <= 1 on a bipartite space.

    ppt_certificate, when present, is the smallest eigenvalue of the
    partial transpose; nonnegative (up to tolerance) means PPT.
    """

    matrix: np.ndarray
    space: BipartiteShape
    ppt_certificate: float | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        d = self.space.total
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} does not match {self.space}")
        if np.abs(mat - mat.conj().T).max() > 1e-10:
            raise DomainError("measurement element must be Hermitian")
        w = np.linalg.eigvalsh(mat)
        if w[0] < -PSD_TOL or w[-1] > 1.0 + PSD_TOL:
            raise DomainError(
                f"eigenvalues must lie in [0, 1], got range [{w[0]:.3e}, {w[-1]:.6f}]"
            )
        if self.ppt_certificate is not None:
            actual = float(np.linalg.eigvalsh(partial_transpose(mat, self.space))[0])
            if abs(actual - self.ppt_certificate) > 1e-9:
                raise DomainError(
                    f"stale certificate: stored {self.ppt_certificate}, actual {actual}"
                )

    @classmethod
    def certified(cls, matrix, space: BipartiteShape) -> "PovmElement":
        mat = np.asarray(matrix, dtype=complex)
        cert = float(np.linalg.eigvalsh(partial_transpose(mat, space))[0])
        return cls(matrix=mat, space=space, ppt_certificate=cert)

    @property
    def min_transpose_eig(self) -> float:
        if self.ppt_certificate is not None:
            return self.ppt_certificate
        return float(np.linalg.eigvalsh(partial_transpose(self.matrix, self.space))[0])

    @property
    def is_ppt(self) -> bool:
        return self.min_transpose_eig >= -PSD_TOL

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


@dataclass(frozen=True)
class DetectorParams:
    """Parameter block for the detector trace floors."""

    epsilon: float
    delta_cap: float
    k_factor: float = 2.0
    q_mass: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.delta_cap < 0.0:
            raise DomainError(f"delta_cap must be nonnegative, got {self.delta_cap}")
        if not self.k_factor > 1.0:
            raise DomainError(f"k_factor must exceed 1, got {self.k_factor}")
        if not 0.0 <= self.q_mass <= 1.0:
            raise DomainError(f"q_mass must be in [0, 1], got {self.q_mass}")


def _small_deficit_raw(d_b: int, epsilon: float, delta_cap: float) -> float:
    return (1.0 - epsilon - math.sqrt(2.0) * delta_cap**0.25) * d_b


def _large_deficit_raw(d_b: int, epsilon: float, delta_cap: float, k_factor: float) -> float:
    return (1.0 - epsilon - math.sqrt((delta_cap + 1.0) / math.log2(k_factor))) * d_b / k_factor


def detector_bound_small_deficit(d_b: int, epsilon: float, delta_cap: float) -> float:
    """Trace floor (1 - eps - sqrt(2) Delta^(1/4)) d_B, clamped at zero."""
    if not 0.0 <= epsilon <= 1.0 or delta_cap < 0.0:
        raise DomainError("requires epsilon in [0, 1] and delta_cap >= 0")
    return max(0.0, _small_deficit_raw(d_b, epsilon, delta_cap))


def detector_bound_large_deficit(d_b: int, epsilon: float, delta_cap: float, k_factor: float) -> float:
    """Trace floor (1 - eps - sqrt((Delta+1)/log K)) d_B / K, exact plug-in."""
    if not k_factor > 1.0:
        raise DomainError(f"k_factor must exceed 1, got {k_factor}")
    if not 0.0 <= epsilon <= 1.0 or delta_cap < 0.0:
        raise DomainError("requires epsilon in [0, 1] and delta_cap >= 0")
    return _large_deficit_raw(d_b, epsilon, delta_cap, k_factor)


@dataclass(frozen=True)
class TraceBoundSelection:
    value: float
    small_deficit: float
    large_deficit: float
    k_factor: float

    @property
    def winner(self) -> str:
        return "small-deficit" if self.small_deficit >= self.large_deficit else "large-deficit"


def best_detector_bound(d_b: int, epsilon: float, delta_cap: float) -> TraceBoundSelection:
    """The larger of the small-deficit floor and the K-optimized large-deficit floor.

    Both floors are valid for every admissible K, so the pointwise maximum
    is a valid trace floor; the small-deficit form wins for small deficits.
    """
    small = max(0.0, _small_deficit_raw(d_b, epsilon, delta_cap))

    def raw(t):  # t = log2(K) > 0
        return (1.0 - epsilon - math.sqrt((delta_cap + 1.0) / t)) * d_b * 2.0 ** (-t)

    ts = np.geomspace(1e-4, 64.0, 257)
    vals = [raw(t) for t in ts]
    k = int(np.argmax(vals))
    a, b = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = raw(c), raw(d)
    for _ in range(60):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = raw(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = raw(d)
    t_star = (a + b) / 2.0
    large = raw(t_star)
    return TraceBoundSelection(
        value=max(small, large),
        small_deficit=small,
        large_deficit=large,
        k_factor=2.0 ** t_star,
    )


@dataclass(frozen=True)
class SchmidtTailReport:
    q_mass: float
    delta: float
    cap: float  # (delta + 1) / log2(K)

    @property
    def satisfied(self) -> bool:
        return self.q_mass <= self.cap + 1e-12


def schmidt_tail_mass(schmidt: SchmidtDecomposition, d_b: int, k_factor: float) -> SchmidtTailReport:
    """Total weight of Schmidt coefficients strictly exceeding K/d_B.

    Ties at the threshold do not count.  The returned cap (Delta+1)/log K,
    with Delta the entanglement deficit from maximal, always dominates the
    tail mass.
    """
    if not k_factor > 1.0:
        raise DomainError(f"k_factor must exceed 1, got {k_factor}")
    lam = schmidt.coefficients
    threshold = k_factor / d_b
    q = float(lam[lam > threshold].sum())
    delta = max(0.0, math.log2(d_b) - shannon_entropy(lam))
    return SchmidtTailReport(q_mass=q, delta=delta, cap=(delta + 1.0) / math.log2(k_factor))


@dataclass(frozen=True)
class TruncatedState:
    state: PureStateVector
    fidelity: float  # overlap-squared with the original, equals 1 - q
    tail_mass: float


def truncate_state(psi: PureStateVector, d_b: int, k_factor: float) -> TruncatedState:
    """Drop Schmidt coefficients above K/d_B and renormalize.

    The surviving raw coefficients all sit at or below K/d_B, and the
    fidelity with the original state is exactly the surviving mass 1 - q.
    """
    if not isinstance(psi.space, BipartiteShape) or psi.space.dim_b != d_b:
        raise DimensionError(f"state is not on a ({d_b}, *) bipartite space")
    dec = schmidt_decompose(psi)
    lam = dec.coefficients
    keep = lam <= k_factor / d_b
    survive = float(lam[keep].sum())
    if survive <= 1e-12:
        raise DomainError("truncation is degenerate: no Schmidt weight survives")
    new_lam = lam[keep] / survive
    vec = schmidt_vector(new_lam, dec.left_vectors[:, keep], dec.right_vectors[:, keep], psi.space)
    survive = min(survive, 1.0)
    return TruncatedState(
        state=PureStateVector(vec, psi.space),
        fidelity=survive,
        tail_mass=max(1.0 - survive, 0.0),
    )


@dataclass(frozen=True)
class NearestMaximallyEntangled:
    state: PureStateVector
    fidelity: float
    deficit: float  # relative entropy of the reduced state from maximally mixed


def nearest_maximally_entangled(psi: PureStateVector, d_b: int) -> NearestMaximallyEntangled:
    """Closest maximally entangled state, sharing the Schmidt bases.

    The achieved overlap-squared (sum_j sqrt(lambda_j / d_B))^2 is the
    best possible over all maximally entangled states, and is floored by
    (1 - sqrt(D))^2 with D the reduced state's relative entropy from
    maximally mixed.
    """
    if not isinstance(psi.space, BipartiteShape) or psi.space.dim_b != d_b:
        raise DimensionError(f"state is not on a ({d_b}, *) bipartite space")
    if psi.space.dim_b > psi.space.dim_c:
        raise DimensionError("requires dim_b <= dim_c")
    dec = schmidt_decompose(psi)
    lam = np.zeros(d_b)
    lam[: dec.coefficients.shape[0]] = dec.coefficients
    fid = float(np.sqrt(lam / d_b).sum() ** 2)
    vec = schmidt_vector(
        np.full(d_b, 1.0 / d_b), dec.left_vectors[:, :d_b], dec.right_vectors[:, :d_b], psi.space
    )
    deficit = max(0.0, math.log2(d_b) - shannon_entropy(lam))
    floor = max(0.0, 1.0 - math.sqrt(deficit)) ** 2
    if fid < floor - 1e-9:
        raise RuntimeError(f"fidelity {fid} fell below its floor {floor}")
    return NearestMaximallyEntangled(
        state=PureStateVector(vec, psi.space), fidelity=fid, deficit=deficit
    )


@dataclass(frozen=True)
class DetectorCheck:
    epsilon: float
    delta: float
    trace: float
    bound_small: float
    bound_large: float
    k_factor: float
    slack_small: float
    slack_large: float

    @property
    def satisfied(self) -> bool:
        return self.slack_small >= -1e-7 and self.slack_large >= -1e-7


def verify_detector_bounds(psi: PureStateVector, m: PovmElement) -> DetectorCheck:
    """Check a PPT element against both trace floors for a given target state.

    epsilon is defined as 1 - tr(psi M) exactly, delta as the target's
    entanglement deficit from maximal; raises InapplicableError when the
    element is not PPT (the floors assume it is).
    """
    if m.space != psi.space:
        raise DimensionError(f"element space {m.space} does not match state space {psi.space}")
    if not m.is_ppt:
        raise InapplicableError(
            f"element is not PPT (min transpose eigenvalue {m.min_transpose_eig:.3e})"
        )
    d_b = psi.space.dim_b
    vec = psi.amplitudes
    epsilon = 1.0 - float(np.real(np.vdot(vec, m.matrix @ vec)))
    dec = schmidt_decompose(psi)
    delta = max(0.0, math.log2(d_b) - shannon_entropy(dec.coefficients))
    sel = best_detector_bound(d_b, epsilon, delta)
    trace = m.trace()
    return DetectorCheck(
        epsilon=epsilon,
        delta=delta,
        trace=trace,
        bound_small=sel.small_deficit,
        bound_large=sel.large_deficit,
        k_factor=sel.k_factor,
        slack_small=trace - sel.small_deficit,
        slack_large=trace - sel.large_deficit,
    )


# ---------------------------------------------------------------------------
# Minimum-trace PPT detector (convex solver, desk scale)
# ---------------------------------------------------------------------------

_MAX_SOLVER_DIM = 16


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "CLARABEL"
    fallback: str = "SCS"
    residual_tol: float = 1e-6


@dataclass(frozen=True)
class DetectorSolution:
    element: PovmElement
    trace: float
    residuals: dict
    converged: bool

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def _residuals(mat: np.ndarray, space: BipartiteShape, psi: np.ndarray, epsilon: float) -> dict:
    w = np.linalg.eigvalsh(mat)
    wg = np.linalg.eigvalsh(partial_transpose(mat, space))
    fid = float(np.real(np.vdot(psi, mat @ psi)))
    return {
        "negativity": max(0.0, -float(w[0])),
        "excess": max(0.0, float(w[-1]) - 1.0),
        "transpose_negativity": max(0.0, -float(wg[0])),
        "fidelity_deficit": max(0.0, (1.0 - epsilon) - fid),
    }


def min_trace_ppt_detector(
    psi: PureStateVector, epsilon: float, config: SolverConfig | None = None
) -> DetectorSolution:
    """Minimize tr M over PPT elements 0 <= M <= 1 with tr(psi M) >= 1 - eps.

    Solved as a small semidefinite program; the identity is always
    feasible, so the program never fails outright.  The returned element
    satisfies all constraints within the configured residual tolerance, or
    is flagged not converged.
    """
    import cvxpy as cp

    cfg = config or SolverConfig()
    if not isinstance(psi.space, BipartiteShape):
        raise DimensionError("target must live on a bipartite space")
    if psi.space.total > _MAX_SOLVER_DIM:
        raise DomainError(f"solver is desk-scale only (total dim <= {_MAX_SOLVER_DIM})")
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must be in [0, 1], got {epsilon}")

    space = psi.space
    dim = space.total
    target = psi.projector()
    if epsilon <= 1e-12:
        # tr(psi M) = 1 with M <= 1 forces M psi = psi exactly, which pins an
        # eigenvalue at one and destroys strict feasibility; substituting
        # M = psi + Q Y Q* on the orthogonal complement restores it
        q_full, _ = np.linalg.qr(
            np.concatenate([psi.amplitudes[:, None], np.eye(dim, dtype=complex)], axis=1)
        )
        comp = q_full[:, 1:dim]
        y_var = cp.Variable((dim - 1, dim - 1), hermitian=True)
        expr = target + comp @ y_var @ comp.conj().T
        m_var = expr
        constraints = [
            y_var >> 0,
            np.eye(dim - 1) - y_var >> 0,
            cp.partial_transpose(expr, [space.dim_b, space.dim_c], 1) >> 0,
        ]
        problem = cp.Problem(cp.Minimize(1.0 + cp.real(cp.trace(y_var))), constraints)
    else:
        m_var = cp.Variable((dim, dim), hermitian=True)
        constraints = [
            m_var >> 0,
            np.eye(dim) - m_var >> 0,
            cp.partial_transpose(m_var, [space.dim_b, space.dim_c], 1) >> 0,
            cp.real(cp.trace(target @ m_var)) >= 1.0 - epsilon,
        ]
        problem = cp.Problem(cp.Minimize(cp.real(cp.trace(m_var))), constraints)

    def repaired(raw: np.ndarray) -> np.ndarray:
        # blending toward the identity removes solver-level negativity in
        # both pictures and can only raise the fidelity; the box is preserved
        m = (raw + raw.conj().T) / 2.0
        w_min = float(np.linalg.eigvalsh(m)[0])
        wg_min = float(np.linalg.eigvalsh(partial_transpose(m, space))[0])
        s = max(0.0, -w_min, -wg_min)
        if s > 0.0:
            s = min(s * (1.0 + 1e-6) + 1e-15, 1.0)
            m = (1.0 - s) * m + s * np.eye(dim)
        return m

    mat = None
    best = None
    for solver in (cfg.solver, cfg.fallback):
        try:
            # accuracy is judged by our own residuals below, not the solver's
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                if solver == "SCS":
                    problem.solve(solver=solver, eps=1e-9, max_iters=200_000)
                else:
                    problem.solve(solver=solver)
        except cp.error.SolverError:
            continue
        if m_var.value is not None:
            cand = repaired(np.asarray(m_var.value))
            res = _residuals(cand, space, psi.amplitudes, epsilon)
            if max(res.values()) <= cfg.residual_tol:
                mat = cand
                break
            if best is None or max(res.values()) < max(best[1].values()):
                best = (cand, res)

    if mat is None and best is not None:
        mat = best[0]
    if mat is None:
        # identity is always feasible; report it as the non-converged fallback
        mat = np.eye(dim, dtype=complex)

    res = _residuals(mat, space, psi.amplitudes, epsilon)
    converged = max(res.values()) <= cfg.residual_tol
    # tiny eigenvalue clips keep the PovmElement invariants happy without
    # moving any residual past the tolerance
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, 1.0)
    clipped = (v * w) @ v.conj().T
    element = PovmElement.certified(clipped, space)
    return DetectorSolution(
        element=element,
        trace=float(np.real(np.trace(mat))),
        residuals=res,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# PPT sampling utilities (used by the test suites and the CLI sweeps)
# ---------------------------------------------------------------------------


def project_to_ppt_box(mat: np.ndarray, space: BipartiteShape, iters: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Cyclic eigenvalue clipping onto {0 <= M <= 1} and {M^Gamma >= 0}."""

    def clip_box(m):
        w, v = np.linalg.eigh(m)
        return (v * np.clip(w, 0.0, 1.0)) @ v.conj().T

    def clip_ppt(m):
        g = partial_transpose(m, space)
        w, v = np.linalg.eigh(g)
        g = (v * np.clip(w, 0.0, None)) @ v.conj().T
        return partial_transpose(g, space)

    m = (np.asarray(mat, dtype=complex) + np.asarray(mat).conj().T) / 2.0
    for _ in range(iters):
        m = clip_box(m)
        m = clip_ppt(m)
        w = np.linalg.eigvalsh(m)
        wg = np.linalg.eigvalsh(partial_transpose(m, space))
        if w[0] > -tol and w[-1] < 1.0 + tol and wg[0] > -tol:
            break
    return m


def random_ppt_element(space: BipartiteShape, seed) -> PovmElement:
    """Random element that is PPT by construction (clipped in both pictures)."""
    rng = as_generator(seed)
    g = rng.standard_normal((space.total, space.total)) + 1j * rng.standard_normal(
        (space.total, space.total)
    )
    h = (g + g.conj().T) / 2.0
    h = h / max(np.abs(np.linalg.eigvalsh(h)).max(), 1.0)
    m = project_to_ppt_box((h + np.eye(space.total)) / 2.0, space)
    return PovmElement.certified(m, space)


def random_ppt_povm(space: BipartiteShape, n_products: int, seed) -> list:
    """Random separable measurement: weighted product elements plus a PPT completion.

    Products of positive operators are PPT, and the completion inherits
    positivity of its partial transpose because the partial transposes of
    the products are again positive products.
    """
    rng = as_generator(seed)
    dim = space.total
    products = []
    for _ in range(n_products):
        a = haar_random_state(space.dim_b, rng)
        b = haar_random_state(space.dim_c, rng)
        w = rng.uniform(0.2, 1.0)
        products.append(w * np.kron(np.outer(a, a.conj()), np.outer(b, b.conj())))
    total = sum(products)
    total_pt = partial_transpose(total, space)
    lam = max(
        float(np.linalg.eigvalsh(total)[-1]),
        float(np.linalg.eigvalsh(total_pt)[-1]),
    )
    scale = 0.9 / lam
    elements = [PovmElement.certified(scale * p, space) for p in products]
    completion = np.eye(dim) - scale * total
    elements.append(PovmElement.certified(completion, space))
    return elements
