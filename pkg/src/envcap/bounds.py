"""Capacity bound evaluators and their consistency checks.

The central object is the assisted-capacity chain

    Q <= C(one-way) <= C(two-way) <= C(ppt) <= log d_A,

where Q is the assisted quantum capacity max_rho min{S(rho), S(N(rho))}.
This module computes Q by concave maximization, the entropic lower bounds
on the one-way classical capacity, the ensemble information bound, the
code-size upper bounds for PPT decoders, and a checker that flags any
computed lower bound exceeding a computed upper bound higher up the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import StinespringIsometry, adjoint_channel, apply_channel_matrix
from .metrics import ENT_TOL, LN2, EntropyTriple, shannon_mutual_information, von_neumann_entropy
from .tensor import (
    BipartiteShape,
    DensityOperator,
    DimensionError,
    DomainError,
    TRACE_TOL,
    UNITARY_TOL,
    is_ppt,
    project_to_density,
    random_density_matrix,
)

# Capacity levels in chain order; entries carry one of these (or None).
CHAIN_LEVELS = ("q", "one-way", "two-way", "ppt", "bandwidth")
_LEVEL_INDEX = {name: i for i, name in enumerate(CHAIN_LEVELS)}


def entropy_triple(u: StinespringIsometry, rho: DensityOperator) -> EntropyTriple:
    """Input, output and environment entropies of a channel input, in bits."""
    big = u.matrix @ rho.matrix @ u.matrix.conj().T
    shape = u.output_shape
    t = big.reshape(shape.dim_b, shape.dim_c, shape.dim_b, shape.dim_c)
    out_b = np.einsum("icjc->ij", t)
    out_c = np.einsum("cicj->ij", t)
    return EntropyTriple(
        s_a=von_neumann_entropy(rho.matrix),
        s_b=von_neumann_entropy(out_b),
        s_c=von_neumann_entropy(out_c),
    )


# ---------------------------------------------------------------------------
# Assisted quantum capacity: max_rho min{S(rho), S(N(rho))}
# ---------------------------------------------------------------------------

_EIG_FLOOR = 1e-14  # keeps -log2 finite at the simplex boundary


def entropy_supergradient(rho: np.ndarray) -> np.ndarray:
    """Supergradient of S(rho) in bits: -log2(rho) - I/ln 2."""
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, _EIG_FLOOR, None)
    return (v * (-np.log2(w) - 1.0 / LN2)) @ v.conj().T


def output_entropy_supergradient(u: StinespringIsometry, rho: np.ndarray) -> np.ndarray:
    """Supergradient of S(N(rho)) with respect to rho: the adjoint image."""
    return adjoint_channel(u, entropy_supergradient(apply_channel_matrix(u, rho)))


@dataclass(frozen=True)
class QCapacityConfig:
    seed: int = 7
    outer_iters: int = 44  # golden-section steps on the branch weight
    inner_iters: int = 400  # ascent steps per weighted maximization
    polish_starts: int = 4
    polish_iters: int = 300
    step_scale: float = 0.25  # c in the c/sqrt(t) polish schedule
    tol: float = 1e-3


@dataclass(frozen=True)
class QCapacityResult:
    value: float
    rho_star: np.ndarray
    converged: bool
    certificate: float  # estimated saddle value; value should sit within tol of it
    branch_weight: float
    evaluations: int

    def achiever(self, dim: int) -> DensityOperator:
        return DensityOperator(self.rho_star, dim)


def _entropies(u: StinespringIsometry, rho: np.ndarray):
    out = apply_channel_matrix(u, rho)
    s_a = von_neumann_entropy(rho)
    s_b = von_neumann_entropy(out)
    return s_a, s_b, out


def _weighted_ascent(u, t, rho0, iters):
    """Maximize t*S(rho) + (1-t)*S(N(rho)) by projected gradient with backtracking."""

    def value_grad(rho):
        out = apply_channel_matrix(u, rho)
        s_a = von_neumann_entropy(rho)
        s_b = von_neumann_entropy(out)
        grad = t * entropy_supergradient(rho) + (1.0 - t) * adjoint_channel(
            u, entropy_supergradient(out)
        )
        return t * s_a + (1.0 - t) * s_b, grad, s_a, s_b

    rho = rho0
    val, grad, s_a, s_b = value_grad(rho)
    evals = 1
    eta = 1.0
    for _ in range(iters):
        stepped = False
        while eta > 1e-13:
            cand = project_to_density(rho + eta * grad)
            cval, cgrad, cs_a, cs_b = value_grad(cand)
            evals += 1
            if cval > val + 1e-13:
                rho, val, grad, s_a, s_b = cand, cval, cgrad, cs_a, cs_b
                stepped = True
                break
            eta *= 0.5
        if not stepped:
            break
        eta = min(eta * 1.6, 4.0)
    return val, rho, s_a, s_b, evals


def _min_branches(u, rho):
    s_a, s_b, _ = _entropies(u, rho)
    return min(s_a, s_b)


def _supergradient_polish(u, rho0, iters, c):
    """Projected supergradient ascent on min{S, S o N}, step c/sqrt(t).

    At the branch crossing the equal-weight average of both branch
    gradients is used (any convex combination is a valid supergradient).
    """
    rho = rho0
    best_val = _min_branches(u, rho)
    best_rho = rho
    evals = 1
    for step in range(1, iters + 1):
        out = apply_channel_matrix(u, rho)
        s_a = von_neumann_entropy(rho)
        s_b = von_neumann_entropy(out)
        evals += 1
        f = min(s_a, s_b)
        if f > best_val:
            best_val, best_rho = f, rho
        if s_a < s_b - 1e-9:
            grad = entropy_supergradient(rho)
        elif s_b < s_a - 1e-9:
            grad = adjoint_channel(u, entropy_supergradient(out))
        else:
            grad = 0.5 * (
                entropy_supergradient(rho) + adjoint_channel(u, entropy_supergradient(out))
            )
        rho = project_to_density(rho + (c / math.sqrt(step)) * grad)
    final = _min_branches(u, rho)
    if final > best_val:
        best_val, best_rho = final, rho
    return best_val, best_rho, evals


def q_capacity(u: StinespringIsometry, config: QCapacityConfig | None = None) -> QCapacityResult:
    """Assisted quantum capacity max_rho min{S(rho), S(N(rho))} in bits.

    The objective is a minimum of two concave functions, so the maximum
    equals the saddle value of the weighted problem
    min_t max_rho [t*S(rho) + (1-t)*S(N(rho))]; the outer scalar problem is
    convex and solved by golden section, the inner one by projected
    gradient ascent on the density-operator simplex.  A short projected
    supergradient polish runs from the saddle point; the reported value is
    always re-evaluated from the returned achiever.
    """
    cfg = config or QCapacityConfig()
    d = u.dim_a
    cap = math.log2(d)
    mixed = np.eye(d, dtype=complex) / d
    evals = 0

    best_val = _min_branches(u, mixed)
    best_rho = mixed
    evals += 1
    if best_val >= cap - 1e-9:
        return QCapacityResult(best_val, best_rho, True, cap, 1.0, evals)

    # outer golden section over the branch weight
    warm = {"rho": mixed}

    def eval_weighted(t):
        val, rho, s_a, s_b, used = _weighted_ascent(u, t, warm["rho"], cfg.inner_iters)
        warm["rho"] = rho
        return val, rho, s_a, s_b, used

    phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    t_c, t_d = hi - phi * (hi - lo), lo + phi * (hi - lo)
    f_c, rho_c, sa_c, sb_c, used = eval_weighted(t_c)
    evals += used
    f_d, rho_d, sa_d, sb_d, used = eval_weighted(t_d)
    evals += used
    for _ in range(cfg.outer_iters):
        if f_c < f_d:
            hi, t_d, f_d = t_d, t_c, f_c
            t_c = hi - phi * (hi - lo)
            f_c, rho_c, sa_c, sb_c, used = eval_weighted(t_c)
        else:
            lo, t_c, f_c = t_c, t_d, f_d
            t_d = lo + phi * (hi - lo)
            f_d, rho_d, sa_d, sb_d, used = eval_weighted(t_d)
        evals += used
    t_star = (lo + hi) / 2.0
    certificate, rho_saddle, s_a, s_b, used = eval_weighted(t_star)
    evals += used
    saddle_min = min(s_a, s_b)
    if saddle_min > best_val:
        best_val, best_rho = saddle_min, rho_saddle

    # supergradient polish from the saddle point and a few random restarts
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.polish_starts - 1, 0))
    starts = [best_rho] + [random_density_matrix(d, np.random.default_rng(s)) for s in seeds]
    for rho0 in starts[: max(cfg.polish_starts, 1)]:
        val, rho, used = _supergradient_polish(u, rho0, cfg.polish_iters, cfg.step_scale)
        evals += used
        if val > best_val:
            best_val, best_rho = val, rho
        if best_val >= cap - 1e-9:
            break

    confirmed = _min_branches(u, best_rho)
    evals += 1
    converged = (
        best_val >= cap - 1e-9
        or (certificate - best_val <= cfg.tol and abs(confirmed - best_val) <= cfg.tol)
    )
    return QCapacityResult(confirmed, best_rho, converged, certificate, t_star, evals)


# ---------------------------------------------------------------------------
# Lower bounds on the one-way assisted classical capacity
# ---------------------------------------------------------------------------


def lower_bound_basic(triple: EntropyTriple) -> float:
    """S(A) when S(A) < S(B), otherwise half the mutual information; never negative."""
    if triple.s_a < triple.s_b:
        return max(triple.s_a, 0.0)
    return max(0.5 * triple.mutual_information(), 0.0)


def lower_bound_timeshare(triple: EntropyTriple, triple_prime: EntropyTriple) -> float:
    """Time-sharing rate between environment coding and state merging.

    Block one uses `triple` (needs S(B) < S(C)); block two uses
    `triple_prime` (needs S(B') < S(A')).  With both triples equal this
    reduces to the convex combination (1 - S(B)/S(A)) S(C) + (S(B)/S(A)) S(B),
    which is verified internally.
    """
    if not triple.s_b < triple.s_c:
        raise DomainError(
            f"requires S(B) < S(C), got S(B)={triple.s_b:.6g} >= S(C)={triple.s_c:.6g}"
        )
    if not triple_prime.s_b < triple_prime.s_a:
        raise DomainError(
            f"requires S(B') < S(A'), got S(B')={triple_prime.s_b:.6g} >= "
            f"S(A')={triple_prime.s_a:.6g}"
        )
    x = triple.s_b / (triple_prime.s_a - triple_prime.s_b)
    value = (triple.s_c - triple.s_b + x * triple_prime.s_a) / (1.0 + x)
    if triple == triple_prime:
        ratio = triple.s_b / triple.s_a
        direct = (1.0 - ratio) * triple.s_c + ratio * triple.s_b
        if abs(value - direct) > 1e-9:
            raise RuntimeError(
                f"time-share forms disagree: {value!r} vs {direct!r}"
            )
    return value


@dataclass(frozen=True)
class AggregateLowerBound:
    value: float
    branch: str
    candidates: tuple[str, ...]
    entries: dict = field(default_factory=dict)


def lower_bound_aggregate(
    u: StinespringIsometry,
    extra_inputs=(),
    include_achiever: bool = True,
    achiever_config: QCapacityConfig | None = None,
) -> AggregateLowerBound:
    """Best available lower bound on the one-way assisted classical capacity.

    Candidate inputs are the maximally mixed state, the capacity achiever,
    and any user-supplied states; both the basic branch and all applicable
    time-share pairs are evaluated, and the one-bit floor applies whenever
    the input dimension is at least two.
    """
    d = u.dim_a
    candidates: list[tuple[str, DensityOperator]] = [
        ("mixed", DensityOperator(np.eye(d, dtype=complex) / d, d))
    ]
    if include_achiever:
        cfg = achiever_config or QCapacityConfig(outer_iters=20, inner_iters=150, polish_starts=1, polish_iters=80)
        res = q_capacity(u, cfg)
        candidates.append(("achiever", res.achiever(d)))
    for i, rho in enumerate(extra_inputs):
        state = rho if isinstance(rho, DensityOperator) else DensityOperator(rho, d)
        candidates.append((f"user[{i}]", state))

    triples = [(label, entropy_triple(u, rho)) for label, rho in candidates]
    entries: dict[str, float] = {}
    best = (-np.inf, "none")
    for label, t in triples:
        v = lower_bound_basic(t)
        entries[f"basic[{label}]"] = v
        if v > best[0]:
            best = (v, f"basic[{label}]")
    for label, t in triples:
        if not t.s_b < t.s_c:
            continue
        for label2, t2 in triples:
            if not t2.s_b < t2.s_a:
                continue
            v = lower_bound_timeshare(t, t2)
            entries[f"timeshare[{label},{label2}]"] = v
            if v > best[0]:
                best = (v, f"timeshare[{label},{label2}]")
    value, branch = best
    if d >= 2 and value < 1.0:
        value, branch = 1.0, "one-bit-floor"
        entries["one-bit-floor"] = 1.0
    return AggregateLowerBound(
        value=value,
        branch=branch,
        candidates=tuple(label for label, _ in candidates),
        entries=entries,
    )


# ---------------------------------------------------------------------------
# Ensemble information bound and accessible information
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ensemble:
    """Pure signal states on an output (x) environment product, with priors."""

    probs: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(states) != p.shape[0]:
            raise DimensionError(f"{p.shape[0]} probabilities for {len(states)} states")
        if p.min() < 0 or abs(p.sum() - 1.0) > TRACE_TOL:
            raise DomainError("probs must form a distribution")
        spaces = {s.space for s in states}
        if len(spaces) != 1 or not isinstance(states[0].space, BipartiteShape):
            raise DimensionError("all states must share one bipartite space")

    @property
    def space(self) -> BipartiteShape:
        return self.states[0].space

    def average_matrix(self) -> np.ndarray:
        return sum(p * s.projector() for p, s in zip(self.probs, self.states))

    def average_entanglement(self) -> float:
        from .metrics import entanglement_entropy

        return float(sum(p * entanglement_entropy(s) for p, s in zip(self.probs, self.states)))


def local_information_bound(ensemble: Ensemble) -> float:
    """S(rho_B) + S(rho_C) - mean entanglement: caps the extractable mutual information.

    Valid for measurements implementable with local operations and classical
    communication, and more generally whenever every measurement operator
    has positive partial transpose.
    """
    from .tensor import partial_trace_matrix

    avg = ensemble.average_matrix()
    s_b = von_neumann_entropy(partial_trace_matrix(avg, ensemble.space, "b"))
    s_c = von_neumann_entropy(partial_trace_matrix(avg, ensemble.space, "c"))
    return s_b + s_c - ensemble.average_entanglement()


@dataclass(frozen=True)
class AccessibleInfoResult:
    info: float
    joint: np.ndarray
    element_ppt: tuple[bool, ...]
    element_min_eig: tuple[float, ...]

    @property
    def all_ppt(self) -> bool:
        return all(self.element_ppt)


def accessible_information(ensemble: Ensemble, povm) -> AccessibleInfoResult:
    """Mutual information of the ensemble-vs-outcome joint distribution.

    Also reports the partial-transpose status of every measurement element,
    so callers know whether the local information bound applies.
    """
    mats = [m.matrix if hasattr(m, "matrix") else np.asarray(m, dtype=complex) for m in povm]
    dim = ensemble.space.total
    total = sum(mats)
    if np.abs(total - np.eye(dim)).max() > UNITARY_TOL:
        raise DomainError("measurement operators do not sum to the identity")
    joint = np.empty((len(ensemble.states), len(mats)))
    for i, (p, s) in enumerate(zip(ensemble.probs, ensemble.states)):
        vec = s.amplitudes
        for j, m in enumerate(mats):
            joint[i, j] = p * max(float(np.real(np.vdot(vec, m @ vec))), 0.0)
    flags, eigs = [], []
    for m in mats:
        ok, min_eig = is_ppt(m, ensemble.space)
        flags.append(ok)
        eigs.append(min_eig)
    return AccessibleInfoResult(
        info=shannon_mutual_information(joint),
        joint=joint,
        element_ppt=tuple(flags),
        element_min_eig=tuple(eigs),
    )


# ---------------------------------------------------------------------------
# Code-size upper bounds for PPT decoders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundParams:
    """Shared parameter block for the code-size bounds."""

    epsilon: float = 0.0
    delta: float = 0.0
    gamma: float = 4.0
    deltas: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.delta < 0.0:
            raise DomainError(f"delta must be nonnegative, got {self.delta}")
        if any(d < 0 for d in self.deltas):
            raise DomainError("per-signal deficits must be nonnegative")

    def gamma_floor(self) -> float:
        return 1.0 / (1.0 - self.epsilon) ** 2


def max_code_size_uniform_deficit(d_b: int, d_c: int, epsilon: float, delta: float) -> float:
    """Code-size cap d_C / (1 - eps - sqrt(2) delta^(1/4)) for uniform deficits.

    Applies to codes of pure signals whose entanglement sits within `delta`
    bits of maximal, decoded by measurement elements with positive partial
    transpose.  Callers floor the returned real for integer code sizes.
    """
    if d_b > d_c:
        raise DomainError(f"requires d_b <= d_c, got {d_b} > {d_c}")
    if not 0.0 <= epsilon < 1.0 or delta < 0.0:
        raise DomainError("requires epsilon in [0, 1) and delta >= 0")
    margin = 1.0 - epsilon - math.sqrt(2.0) * delta**0.25
    if margin <= 0.0:
        raise DomainError(
            f"requires epsilon + sqrt(2) delta^(1/4) < 1, got "
            f"{epsilon + math.sqrt(2.0) * delta ** 0.25:.6g}"
        )
    return d_c / margin


@dataclass(frozen=True)
class CodeSizeBound:
    harmonic: float  # bound using the full deficit list
    relaxed: float  # arithmetic-mean relaxation (always >= harmonic)
    gamma: float


def max_code_size_per_signal_deficits(
    d_b: int, d_c: int, epsilon: float, gamma: float, deltas
) -> CodeSizeBound:
    """Code-size cap from per-signal deficits, in both exact and relaxed forms."""
    if d_b > d_c:
        raise DomainError(f"requires d_b <= d_c, got {d_b} > {d_c}")
    dl = np.asarray(deltas, dtype=float)
    if dl.size == 0 or dl.min() < 0:
        raise DomainError("deltas must be a nonempty list of nonnegative deficits")
    floor = 1.0 / (1.0 - epsilon) ** 2
    if not gamma > floor:
        raise DomainError(f"requires gamma > 1/(1-epsilon)^2 = {floor:.6g}, got {gamma}")
    margin = 1.0 - epsilon - math.sqrt(1.0 / gamma)
    mean_pow = float(np.mean(np.exp2(-gamma * (dl + 1.0))))
    harmonic = d_c / (margin * mean_pow)
    relaxed = d_c * float(np.exp2(gamma * float(np.mean(dl + 1.0)))) / margin
    return CodeSizeBound(harmonic=harmonic, relaxed=relaxed, gamma=gamma)


def optimize_gamma(
    d_b: int, d_c: int, epsilon: float, deltas, gamma_max: float = 64.0
) -> CodeSizeBound:
    """Pick the weight exponent minimizing the code-size cap by scalar search.

    Coarse scan over the admissible interval followed by golden-section
    refinement; the admissible interval is (1/(1-eps)^2, gamma_max].
    """
    floor = 1.0 / (1.0 - epsilon) ** 2
    if gamma_max <= floor:
        raise DomainError(f"gamma_max must exceed {floor:.6g}")
    lo = floor + 1e-9 * max(floor, 1.0)

    def value(g):
        return max_code_size_per_signal_deficits(d_b, d_c, epsilon, g, deltas).harmonic

    grid = np.linspace(lo, gamma_max, 129)
    vals = [value(g) for g in grid]
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = value(c), value(d)
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = value(d)
    g_star = (a + b) / 2.0
    return max_code_size_per_signal_deficits(d_b, d_c, epsilon, g_star, deltas)


SUPERADDITIVITY_TAG = "conditional-on-superadditivity"


@dataclass(frozen=True)
class ConditionalBound:
    value: float
    condition: str = SUPERADDITIVITY_TAG


def ppt_capacity_upper_bound(d_c: int, delta: float) -> ConditionalBound:
    """log d_C + delta, valid per copy when the single-copy deficit certifies
    all tensor powers (the superadditivity hypothesis for the entanglement
    of formation).  Always tagged conditional."""
    if delta < 0.0:
        raise DomainError(f"delta must be nonnegative, got {delta}")
    return ConditionalBound(value=math.log2(d_c) + delta)


# ---------------------------------------------------------------------------
# Bound reports and the chain checker
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundEntry:
    name: str
    value: float
    direction: str  # "lower" | "upper" | "exact" | "info"
    level: str | None = None  # one of CHAIN_LEVELS, or None for diagnostics
    params: dict = field(default_factory=dict)
    tags: tuple[str, ...] = ()
    inputs_digest: str = ""

    def __post_init__(self):
        if self.direction not in ("lower", "upper", "exact", "info"):
            raise DomainError(f"unknown direction {self.direction!r}")
        if self.level is not None and self.level not in _LEVEL_INDEX:
            raise DomainError(f"unknown chain level {self.level!r}")


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)

    def add(self, entry: BoundEntry):
        self.entries.append(entry)

    def named(self, name: str) -> list:
        return [e for e in self.entries if e.name == name]


@dataclass(frozen=True)
class ChainViolation:
    lower_name: str
    upper_name: str
    lower_value: float
    upper_value: float

    @property
    def gap(self) -> float:
        return self.lower_value - self.upper_value


def chain_check(u: StinespringIsometry | None, report: BoundReport, tol: float = ENT_TOL):
    """Every lower bound low in the chain must stay below every upper bound
    higher up; returns the list of violations (empty means consistent)."""
    entries = list(report.entries)
    if u is not None:
        entries.append(
            BoundEntry(
                name="input-bandwidth",
                value=math.log2(u.dim_a),
                direction="upper",
                level="bandwidth",
                inputs_digest=u.digest(),
            )
        )
    lowers = [e for e in entries if e.direction in ("lower", "exact") and e.level]
    uppers = [e for e in entries if e.direction in ("upper", "exact") and e.level]
    violations = []
    for lo in lowers:
        for up in uppers:
            if lo is up:
                continue
            # bounds chain only within one channel
            if lo.inputs_digest and up.inputs_digest and lo.inputs_digest != up.inputs_digest:
                continue
            if _LEVEL_INDEX[lo.level] > _LEVEL_INDEX[up.level]:
                continue
            if lo.value > up.value + tol:
                violations.append(
                    ChainViolation(
                        lower_name=lo.name,
                        upper_name=up.name,
                        lower_value=lo.value,
                        upper_value=up.value,
                    )
                )
    return violations
