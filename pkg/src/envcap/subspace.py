"""Random subspaces of a bipartite space and their minimum entanglement.

The headline construction: large subspaces in which every unit vector is
highly entangled give embedding channels whose PPT-decoded classical
capacity sits close to the universal half-bandwidth lower bound.  This
module samples subspaces, estimates their minimum entanglement (multistart
descent with a brute-force net oracle at desk scale), evaluates the
guaranteed-dimension and entanglement-floor formulas, and runs the
two-copy additivity probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import StinespringIsometry, make_subspace_embedding_channel
from .metrics import LN2
from .tensor import (
    BipartiteShape,
    DimensionError,
    DomainError,
    PureStateVector,
    UNITARY_TOL,
    as_generator,
    haar_random_state,
)

GAMMA_CONST = 1.0 / 1753.0

# Deficit constant quoted for the equal-dimension example channel; the
# exact formula value is 1/ln2 + alpha, rounded up conservatively.
EXAMPLE_ALPHA = 20.0
EXAMPLE_DEFICIT_QUOTED = 21.5
UPPER_BOUND_FORMULA = "½ log d_A + 2.5 log log d_A + 27"


@dataclass(frozen=True)
class SubspaceSpec:
    """Orthonormal basis of a k-dimensional subspace of a bipartite space."""

    basis: np.ndarray  # (dim_b * dim_c, k), orthonormal columns
    dims: BipartiteShape

    def __post_init__(self):
        mat = np.asarray(self.basis, dtype=complex)
        object.__setattr__(self, "basis", mat)
        total = self.dims.total
        if mat.ndim != 2 or mat.shape[0] != total:
            raise DimensionError(f"basis shape {mat.shape} does not match {self.dims}")
        k = mat.shape[1]
        if not 1 <= k <= total:
            raise DimensionError(f"subspace dimension {k} out of range [1, {total}]")
        gram = mat.conj().T @ mat
        if np.abs(gram - np.eye(k)).max() > UNITARY_TOL:
            raise DomainError("basis columns are not orthonormal within tolerance")

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def vector(self, coords: np.ndarray) -> np.ndarray:
        return self.basis @ np.asarray(coords, dtype=complex)

    def state(self, coords: np.ndarray) -> PureStateVector:
        return PureStateVector(self.vector(coords), self.dims)

    def embedding_channel(self) -> StinespringIsometry:
        return make_subspace_embedding_channel(self.basis.T, self.dims)

    def to_document(self, name: str | None = None) -> dict:
        """Channel-spec document (subspace_embedding payload) for this basis."""
        doc = {
            "type": "subspace_embedding",
            "dims": {"a": self.k, "b": self.dims.dim_b, "c": self.dims.dim_c},
            "basis": [
                [[float(z.real), float(z.imag)] for z in self.basis[:, j]]
                for j in range(self.k)
            ],
        }
        if name:
            doc["name"] = name
        return doc


@dataclass(frozen=True)
class SubspaceParams:
    """Exponent and absolute constant of the guaranteed-dimension formula."""

    alpha: float
    gamma_const: float = GAMMA_CONST

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.gamma_const <= 0:
            raise DomainError(f"gamma_const must be positive, got {self.gamma_const}")

    def within_guarantee(self, d_b: int) -> bool:
        """The dimension/floor guarantee only covers alpha < log d_B."""
        return self.alpha < math.log2(d_b)


def sample_random_subspace(d_b: int, d_c: int, k: int, seed) -> SubspaceSpec:
    """First k columns of a Haar unitary on the product space.

    Implemented as orthonormalized Ginibre columns with the diagonal phase
    fix, which has the same distribution and avoids the full unitary at
    large dimension.
    """
    dims = BipartiteShape(d_b, d_c)
    if not 1 <= k <= dims.total:
        raise DimensionError(f"subspace dimension {k} out of range [1, {dims.total}]")
    rng = as_generator(seed)
    z = (
        rng.standard_normal((dims.total, k)) + 1j * rng.standard_normal((dims.total, k))
    ) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return SubspaceSpec(q * (d / np.abs(d)), dims)


# ---------------------------------------------------------------------------
# Minimum entanglement over a subspace
# ---------------------------------------------------------------------------

_EIG_FLOOR = 1e-14


def _batch_entanglement(coords: np.ndarray, spec: SubspaceSpec) -> np.ndarray:
    """Entanglement entropy of spec.basis @ c for each row c, in bits."""
    psi = coords @ spec.basis.T
    psi = psi.reshape(-1, spec.dims.dim_b, spec.dims.dim_c)
    rho = np.einsum("nbc,ndc->nbd", psi, psi.conj())
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    w = np.where(w > 0, w, 1.0)
    return -(w * np.log2(w)).sum(axis=1)


def _entanglement_and_gradient(c: np.ndarray, spec: SubspaceSpec):
    psi = spec.vector(c).reshape(spec.dims.dim_b, spec.dims.dim_c)
    rho = psi @ psi.conj().T
    w, v = np.linalg.eigh(rho)
    wc = np.clip(w, _EIG_FLOOR, None)
    value = float(-(wc * np.log2(wc)).sum())
    # derivative kernel of -tr(rho log2 rho); at degenerate spectra the
    # eigenbasis returned by the solver picks the subgradient
    kernel = (v * (-np.log2(wc) - 1.0 / LN2)) @ v.conj().T
    grad_psi = kernel @ psi  # (d_b, d_c), gradient wrt conj(psi)
    grad = spec.basis.conj().T @ grad_psi.reshape(-1)
    # tangent component on the coordinate sphere
    grad = grad - np.vdot(c, grad) * c
    return value, grad


@dataclass(frozen=True)
class MinEntanglementConfig:
    starts: int = 50
    iters: int = 1200
    grad_tol: float = 1e-9
    seed: int = 13
    extra_starts: tuple = ()  # coordinate vectors to seed with


@dataclass(frozen=True)
class MinEntanglementResult:
    value: float
    coords: np.ndarray
    converged: bool

    def state(self, spec: SubspaceSpec) -> PureStateVector:
        return spec.state(self.coords)


def _descend(spec: SubspaceSpec, c0: np.ndarray, cfg: MinEntanglementConfig):
    c = np.asarray(c0, dtype=complex)
    c = c / np.linalg.norm(c)
    value, grad = _entanglement_and_gradient(c, spec)
    eta = 0.5
    hit_tol = False
    for _ in range(cfg.iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= cfg.grad_tol:
            hit_tol = True
            break
        stepped = False
        while eta > 1e-14:
            cand = c - eta * grad
            cand = cand / np.linalg.norm(cand)
            cval, cgrad = _entanglement_and_gradient(cand, spec)
            if cval < value - 1e-14:
                c, value, grad = cand, cval, cgrad
                stepped = True
                break
            eta *= 0.5
        if not stepped:
            hit_tol = True
            break
        eta = min(eta * 1.5, 2.0)
    return value, c, hit_tol


def min_entanglement(
    spec: SubspaceSpec, config: MinEntanglementConfig | None = None
) -> MinEntanglementResult:
    """Estimate min E over unit vectors of the subspace by multistart descent.

    The estimate is the exact entanglement of a feasible vector, hence
    always an upper bound on the true minimum; the converged flag reports
    whether the best run terminated at its gradient tolerance.
    """
    cfg = config or MinEntanglementConfig()
    k = spec.k
    starts: list[np.ndarray] = [np.asarray(c, dtype=complex) for c in cfg.extra_starts]
    starts += [np.eye(k, dtype=complex)[:, j] for j in range(min(k, 12))]
    rng = as_generator(cfg.seed)
    while len(starts) < max(cfg.starts, 1):
        starts.append(haar_random_state(k, rng))
    starts = starts[: max(cfg.starts, len(cfg.extra_starts) + 1)]

    best = (np.inf, None, False)
    for c0 in starts:
        value, c, ok = _descend(spec, c0, cfg)
        if value < best[0]:
            best = (value, c, ok)
        if best[0] <= 1e-12:
            break
    value, c, ok = best
    return MinEntanglementResult(value=max(value, 0.0), coords=c, converged=ok)


def net_min_entanglement(
    spec: SubspaceSpec, samples: int = 1_000_000, seed: int = 0, chunk: int = 131_072
) -> float:
    """Brute-force net over the coordinate sphere: min entanglement among samples.

    Half the budget is a scrambled Sobol net pushed through the inverse
    normal map, half is plain Gaussian sampling; feasible in seconds at
    desk scale (k <= 3, product dimension <= 9).
    """
    from scipy.special import ndtri
    from scipy.stats import qmc

    k = spec.k
    rng = as_generator(seed)
    best = np.inf
    # Sobol balance wants powers of two; spend half the budget there
    n_sobol = 2 ** int(math.log2(samples // 2)) if samples >= 2 else 0
    if n_sobol > 0:
        sob = qmc.Sobol(d=2 * k, scramble=True, seed=rng)
        remaining = n_sobol
        while remaining > 0:
            n = min(chunk, remaining)
            pts = sob.random(n)
            z = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
            coords = z[:, :k] + 1j * z[:, k:]
            coords /= np.linalg.norm(coords, axis=1, keepdims=True)
            best = min(best, float(_batch_entanglement(coords, spec).min()))
            remaining -= n
    remaining = samples - n_sobol
    while remaining > 0:
        n = min(chunk, remaining)
        coords = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        coords /= np.linalg.norm(coords, axis=1, keepdims=True)
        best = min(best, float(_batch_entanglement(coords, spec).min()))
        remaining -= n
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# Guaranteed dimension and entanglement floor
# ---------------------------------------------------------------------------


def _check_dims(d_b: int, d_c: int):
    if not (d_c >= d_b >= 3):
        raise DomainError(f"requires d_c >= d_b >= 3, got ({d_b}, {d_c})")


def guaranteed_subspace_dimension(d_b: int, d_c: int, params: SubspaceParams) -> int:
    """floor(d_B d_C Gamma alpha^2.5 / (log d_B)^2.5).

    A random subspace of this dimension has every state's entanglement
    above the floor, provided alpha < log d_B; larger alpha still evaluates
    (the floor is then vacuous) and is reported by params.within_guarantee.
    """
    _check_dims(d_b, d_c)
    coeff = params.gamma_const * params.alpha**2.5 / math.log2(d_b) ** 2.5
    return int(math.floor(d_b * d_c * coeff))


def dimension_coefficient(d_b: int, params: SubspaceParams) -> float:
    """The Gamma alpha^2.5 factor before division by (log d_B)^2.5."""
    return params.gamma_const * params.alpha**2.5


def subspace_entanglement_floor(d_b: int, d_c: int, alpha: float) -> float:
    """log d_B - (1/ln 2)(d_B/d_C) - alpha, in bits (may be negative)."""
    _check_dims(d_b, d_c)
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return math.log2(d_b) - (d_b / d_c) / LN2 - alpha


# ---------------------------------------------------------------------------
# The equal-dimension example channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExampleChannel:
    isometry: StinespringIsometry
    subspace: SubspaceSpec
    dim_a: int
    d: int
    entanglement_floor: float  # exact formula value (may be negative)
    entanglement_floor_clamped: float
    deficit_exact: float  # (1/ln2) + alpha at equal dimensions
    deficit_quoted: float  # conservative rounded deficit
    conditional_upper: float  # log d + quoted deficit, conditional on superadditivity
    upper_bound_formula: str
    trivial_regime: bool
    tags: tuple[str, ...]


def build_example_channel(d: int, seed) -> ExampleChannel:
    """Sample the equal-dimension example: a guaranteed-size random subspace
    embedded as a channel, with its conditional capacity bound metadata.

    Nontrivial only once the subspace dimension exceeds d; smaller d is
    allowed and flagged trivial-regime.
    """
    params = SubspaceParams(alpha=EXAMPLE_ALPHA)
    k = guaranteed_subspace_dimension(d, d, params)
    if k < 1:
        raise DomainError(f"guaranteed dimension formula gives 0 at d={d}")
    spec = sample_random_subspace(d, d, k, seed)
    floor = subspace_entanglement_floor(d, d, params.alpha)
    deficit_exact = 1.0 / LN2 + params.alpha
    tags = ["conditional-on-superadditivity"]
    trivial = k <= d
    if trivial:
        tags.append("trivial-regime")
    if not params.within_guarantee(d):
        tags.append("outside-guarantee")
    return ExampleChannel(
        isometry=spec.embedding_channel(),
        subspace=spec,
        dim_a=k,
        d=d,
        entanglement_floor=floor,
        entanglement_floor_clamped=max(floor, 0.0),
        deficit_exact=deficit_exact,
        deficit_quoted=EXAMPLE_DEFICIT_QUOTED,
        conditional_upper=math.log2(d) + EXAMPLE_DEFICIT_QUOTED,
        upper_bound_formula=UPPER_BOUND_FORMULA,
        trivial_regime=trivial,
        tags=tuple(tags),
    )


# ---------------------------------------------------------------------------
# Two-copy additivity probe
# ---------------------------------------------------------------------------

_MAX_PROBE_TOTAL_SQ = 81


def doubled_subspace(spec: SubspaceSpec) -> SubspaceSpec:
    """Tensor square of the subspace, regrouped across the doubled cut."""
    db, dc = spec.dims.dim_b, spec.dims.dim_c
    k = spec.k
    cols = []
    for i in range(k):
        for j in range(k):
            v = np.kron(spec.basis[:, i], spec.basis[:, j])
            v = v.reshape(db, dc, db, dc).transpose(0, 2, 1, 3).reshape(-1)
            cols.append(v)
    return SubspaceSpec(np.stack(cols, axis=1), BipartiteShape(db * db, dc * dc))


@dataclass(frozen=True)
class TwoCopyProbe:
    single_copy: float
    two_copy: float
    ratio: float  # two_copy / (2 * single_copy); 1 by convention at zero
    tag: str = "estimate-only"

    def consistent_with_superadditivity(self, tol: float = 0.03) -> bool:
        return self.ratio >= 1.0 - tol


def two_copy_superadditivity_probe(
    spec: SubspaceSpec, config: MinEntanglementConfig | None = None
) -> TwoCopyProbe:
    """Compare the doubled subspace's minimum entanglement with twice the
    single-copy minimum.  Both numbers are optimizer estimates (upper
    bounds), so a ratio below one is a counterexample candidate to report,
    never an assertion."""
    if spec.dims.total**2 > _MAX_PROBE_TOTAL_SQ:
        raise DomainError(
            f"two-copy probe is desk-scale only (product dim^2 <= {_MAX_PROBE_TOTAL_SQ})"
        )
    cfg = config or MinEntanglementConfig()
    single = min_entanglement(spec, cfg)
    doubled = doubled_subspace(spec)
    product_start = np.kron(single.coords, single.coords)
    cfg2 = replace(cfg, extra_starts=tuple(cfg.extra_starts) + (product_start,))
    double = min_entanglement(doubled, cfg2)
    if single.value < 1e-6:
        ratio = 1.0
    else:
        ratio = double.value / (2.0 * single.value)
    return TwoCopyProbe(single_copy=single.value, two_copy=double.value, ratio=ratio)


def antisymmetric_subspace(d: int) -> SubspaceSpec:
    """Span of (|ij> - |ji>)/sqrt(2) for i < j inside d x d."""
    cols = []
    for i in range(d):
        for j in range(i + 1, d):
            v = np.zeros(d * d, dtype=complex)
            v[i * d + j] = 1.0 / np.sqrt(2.0)
            v[j * d + i] = -1.0 / np.sqrt(2.0)
            cols.append(v)
    return SubspaceSpec(np.stack(cols, axis=1), BipartiteShape(d, d))
