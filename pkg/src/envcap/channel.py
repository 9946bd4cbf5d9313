"""Channel representations anchored on the output-environment isometry.

A channel here is the isometry U: A -> B (x) C followed by tracing out C;
tracing out B instead gives the complementary channel into the
environment.  Constructors cover explicit matrices, mixtures of random
unitaries, subspace embeddings, and the two standard qubit test channels,
all loadable from a JSON document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .tensor import (
    BipartiteShape,
    DensityOperator,
    DimensionError,
    DomainError,
    TRACE_TOL,
    UNITARY_TOL,
    as_generator,
    haar_random_unitary,
    partial_trace_matrix,
)


class ChannelSpecError(ValueError):
    """A channel document fails validation; carries the offending field path."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class StinespringIsometry:
    """Isometry from the input space into the output (x) environment product."""

    matrix: np.ndarray  # (dim_b * dim_c, dim_a)
    dim_a: int
    dim_b: int
    dim_c: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        if mat.shape != (self.dim_b * self.dim_c, self.dim_a):
            raise DimensionError(
                f"matrix shape {mat.shape} does not match dims "
                f"({self.dim_a}, {self.dim_b}, {self.dim_c})"
            )
        gram = mat.conj().T @ mat
        if np.abs(gram - np.eye(self.dim_a)).max() > UNITARY_TOL:
            raise DomainError("matrix is not an isometry within tolerance")

    @property
    def output_shape(self) -> BipartiteShape:
        return BipartiteShape(self.dim_b, self.dim_c)

    def digest(self) -> str:
        """Stable hash of the dilation for report provenance."""
        h = hashlib.sha256()
        h.update(f"{self.dim_a},{self.dim_b},{self.dim_c};".encode())
        h.update(np.ascontiguousarray(self.matrix).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class KrausSet:
    """Operator-sum form; one operator per environment basis index."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        object.__setattr__(self, "operators", ops)
        if not ops:
            raise DimensionError("need at least one operator")
        db, da = ops[0].shape
        total = sum(k.conj().T @ k for k in ops)
        if np.abs(total - np.eye(da)).max() > UNITARY_TOL:
            raise DomainError("operators do not satisfy the completeness relation")


def _conjugate(u: StinespringIsometry, rho) -> np.ndarray:
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    if mat.shape != (u.dim_a, u.dim_a):
        raise DimensionError(f"input shape {mat.shape} does not match dim_a={u.dim_a}")
    return u.matrix @ mat @ u.matrix.conj().T


def apply_channel(u: StinespringIsometry, rho) -> DensityOperator:
    """Channel output tr_C(U rho U*) on the B factor."""
    out = partial_trace_matrix(_conjugate(u, rho), u.output_shape, "b")
    return DensityOperator(out, u.dim_b)


def complementary_channel(u: StinespringIsometry, rho) -> DensityOperator:
    """Environment marginal tr_B(U rho U*) on the C factor."""
    out = partial_trace_matrix(_conjugate(u, rho), u.output_shape, "c")
    return DensityOperator(out, u.dim_c)


def apply_channel_matrix(u: StinespringIsometry, mat: np.ndarray) -> np.ndarray:
    """Channel action on a raw (not necessarily normalized) operator."""
    return partial_trace_matrix(u.matrix @ mat @ u.matrix.conj().T, u.output_shape, "b")


def kraus_operators(u: StinespringIsometry) -> list[np.ndarray]:
    """Extract one d_B x d_A operator per environment basis index."""
    t = u.matrix.reshape(u.dim_b, u.dim_c, u.dim_a)
    return [np.ascontiguousarray(t[:, c, :]) for c in range(u.dim_c)]


def kraus_set(u: StinespringIsometry) -> KrausSet:
    return KrausSet(tuple(kraus_operators(u)))


def stinespring_from_kraus(operators) -> StinespringIsometry:
    """Dilate an operator-sum representation; environment dim = operator count."""
    ops = [np.asarray(k, dtype=complex) for k in operators]
    db, da = ops[0].shape
    for k in ops:
        if k.shape != (db, da):
            raise DimensionError("all operators must share one shape")
    mat = np.stack(ops, axis=1).reshape(db * len(ops), da)
    return StinespringIsometry(mat, dim_a=da, dim_b=db, dim_c=len(ops))


def adjoint_channel(u: StinespringIsometry, op: np.ndarray) -> np.ndarray:
    """Adjoint map on observables: tr(N(rho) X) = tr(rho N*(X))."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (u.dim_b, u.dim_b):
        raise DimensionError(f"observable shape {op.shape} does not match dim_b={u.dim_b}")
    out = np.zeros((u.dim_a, u.dim_a), dtype=complex)
    for k in kraus_operators(u):
        out += k.conj().T @ op @ k
    return out


def make_random_mixture_of_unitaries(d: int, num_terms: int, probs, seed) -> StinespringIsometry:
    """Channel rho -> sum_i p_i U_i rho U_i* with Haar-sampled unitaries.

    Unital by construction; the environment dimension equals the number
    of mixture terms.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (num_terms,) or p.min() < 0 or abs(p.sum() - 1.0) > TRACE_TOL:
        raise DomainError(f"probs must be a distribution over {num_terms} terms")
    rng = as_generator(seed)
    ops = [np.sqrt(pi) * haar_random_unitary(d, rng) for pi in p]
    return stinespring_from_kraus(ops)


def make_subspace_embedding_channel(basis, shape: BipartiteShape) -> StinespringIsometry:
    """Embed an abstract input space onto the span of orthonormal product-space vectors.

    Computational input i maps exactly onto basis[i]; the channel is the
    embedding followed by the trace over the second factor.
    """
    cols = [np.asarray(v, dtype=complex).reshape(-1) for v in basis]
    for i, v in enumerate(cols):
        if v.shape != (shape.total,):
            raise DimensionError(f"basis vector {i} has length {v.shape[0]}, expected {shape.total}")
    mat = np.stack(cols, axis=1)
    gram = mat.conj().T @ mat
    if np.abs(gram - np.eye(len(cols))).max() > UNITARY_TOL:
        raise DomainError("basis is not orthonormal within tolerance")
    return StinespringIsometry(mat, dim_a=len(cols), dim_b=shape.dim_b, dim_c=shape.dim_c)


def amplitude_damping_isometry(damping: float) -> StinespringIsometry:
    """Qubit amplitude damping with decay probability `damping`."""
    if not 0.0 <= damping <= 1.0:
        raise DomainError(f"damping must be in [0, 1], got {damping}")
    g = float(damping)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - g)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(g)], [0.0, 0.0]], dtype=complex)
    return stinespring_from_kraus([k0, k1])


def _weyl_operators(d: int) -> list[np.ndarray]:
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            ops.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return ops


def depolarizing_isometry(d: int, p: float) -> StinespringIsometry:
    """rho -> (1-p) rho + p I/d via the d^2 shift-and-clock operators."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"noise parameter must be in [0, 1], got {p}")
    weyl = _weyl_operators(d)
    w0 = np.sqrt(1.0 - p + p / d**2)
    ops = [w0 * np.eye(d, dtype=complex)]
    ops += [np.sqrt(p) / d * w for w in weyl[1:]]
    return stinespring_from_kraus(ops)


# Composition and tensor powers are desk-scale probes only.
_MAX_POWER = 3
_MAX_POWER_DIM = 4


def compose_channels(second: StinespringIsometry, first: StinespringIsometry) -> StinespringIsometry:
    """Dilation of (second after first); environment is the pair of environments."""
    if first.dim_b != second.dim_a:
        raise DimensionError(
            f"output dim {first.dim_b} of first does not feed input dim {second.dim_a} of second"
        )
    ops = [k2 @ k1 for k1 in kraus_operators(first) for k2 in kraus_operators(second)]
    return stinespring_from_kraus(ops)


def tensor_product_channel(u1: StinespringIsometry, u2: StinespringIsometry) -> StinespringIsometry:
    """Parallel application on a joint input, with outputs and environments grouped."""
    big = np.kron(u1.matrix, u2.matrix)
    da = u1.dim_a * u2.dim_a
    # regroup output factors (B1 C1 B2 C2) -> (B1 B2 C1 C2)
    big = big.reshape(u1.dim_b, u1.dim_c, u2.dim_b, u2.dim_c, da)
    big = big.transpose(0, 2, 1, 3, 4).reshape(u1.dim_b * u2.dim_b * u1.dim_c * u2.dim_c, da)
    return StinespringIsometry(
        big, dim_a=da, dim_b=u1.dim_b * u2.dim_b, dim_c=u1.dim_c * u2.dim_c
    )


def tensor_power_channel(u: StinespringIsometry, n: int) -> StinespringIsometry:
    """n-fold parallel copies, capped at desk scale."""
    if n < 1 or n > _MAX_POWER:
        raise DomainError(f"tensor powers supported for 1 <= n <= {_MAX_POWER}")
    if max(u.dim_a, u.dim_b, u.dim_c) > _MAX_POWER_DIM:
        raise DomainError(f"tensor powers supported for factor dims <= {_MAX_POWER_DIM}")
    out = u
    for _ in range(n - 1):
        out = tensor_product_channel(out, u)
    return out


# ---------------------------------------------------------------------------
# Channel-spec documents
# ---------------------------------------------------------------------------

CHANNEL_TYPES = (
    "explicit",
    "unitary_mixture",
    "subspace_embedding",
    "depolarizing",
    "amplitude_damping",
)


def _schema():
    import jsonschema

    text = resources.files("envcap").joinpath("schemas/channel.schema.json").read_text()
    return jsonschema.Draft202012Validator(json.loads(text))


def _complex_vector(pairs, length: int, path: str) -> np.ndarray:
    if len(pairs) != length:
        raise ChannelSpecError(f"expected {length} [re, im] pairs, got {len(pairs)}", path)
    arr = np.asarray(pairs, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1]


def load_channel_spec(document: dict) -> StinespringIsometry:
    """Build an isometry from a parsed channel document.

    Raises ChannelSpecError (with the offending field path) on schema
    violations, and DomainError if a well-formed document encodes a
    non-isometry.
    """
    validator = _schema()
    errors = sorted(validator.iter_errors(document), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ChannelSpecError(e.message, e.json_path)

    kind = document["type"]
    dims = document["dims"]
    da, db, dc = int(dims["a"]), int(dims["b"]), int(dims["c"])
    seed = document.get("seed")

    def require(cond: bool, message: str, path: str):
        if not cond:
            raise ChannelSpecError(message, path)

    if kind == "explicit":
        require("matrix" in document, "explicit channels need a 'matrix' payload", "$.matrix")
        vec = _complex_vector(document["matrix"], db * dc * da, "$.matrix")
        mat = vec.reshape(db * dc, da)
        try:
            return StinespringIsometry(mat, dim_a=da, dim_b=db, dim_c=dc)
        except DomainError as exc:
            raise ChannelSpecError(str(exc), "$.matrix") from exc

    if kind == "unitary_mixture":
        require(da == db, f"unitary mixtures need dims.a == dims.b, got {da} != {db}", "$.dims")
        require("probs" in document, "unitary mixtures need a 'probs' payload", "$.probs")
        probs = document["probs"]
        require(len(probs) == dc, f"dims.c = {dc} must equal len(probs) = {len(probs)}", "$.probs")
        require(seed is not None, "unitary mixtures need a 'seed'", "$.seed")
        try:
            return make_random_mixture_of_unitaries(da, dc, probs, seed)
        except DomainError as exc:
            raise ChannelSpecError(str(exc), "$.probs") from exc

    if kind == "subspace_embedding":
        shape = BipartiteShape(db, dc)
        if "basis" in document:
            basis = [
                _complex_vector(v, db * dc, f"$.basis[{i}]")
                for i, v in enumerate(document["basis"])
            ]
            require(len(basis) == da, f"dims.a = {da} must equal len(basis) = {len(basis)}", "$.basis")
            try:
                return make_subspace_embedding_channel(basis, shape)
            except DomainError as exc:
                raise ChannelSpecError(str(exc), "$.basis") from exc
        require(seed is not None, "sampled subspace embeddings need a 'seed'", "$.seed")
        require(da <= db * dc, f"dims.a = {da} exceeds the product dimension {db * dc}", "$.dims")
        cols = haar_random_unitary(db * dc, seed)[:, :da]
        return make_subspace_embedding_channel(cols.T, shape)

    if kind == "depolarizing":
        require(da == db, f"depolarizing needs dims.a == dims.b, got {da} != {db}", "$.dims")
        require(dc == da * da, f"depolarizing needs dims.c == dims.a^2, got {dc}", "$.dims.c")
        require("noise" in document, "depolarizing needs a 'noise' parameter", "$.noise")
        return depolarizing_isometry(da, float(document["noise"]))

    if kind == "amplitude_damping":
        require((da, db, dc) == (2, 2, 2), "amplitude damping is a qubit channel with dims (2, 2, 2)", "$.dims")
        require("noise" in document, "amplitude damping needs a 'noise' parameter", "$.noise")
        return amplitude_damping_isometry(float(document["noise"]))

    raise ChannelSpecError(f"unknown channel type {kind!r}", "$.type")


def load_channel_spec_file(path) -> StinespringIsometry:
    with open(path, "r", encoding="utf-8") as fh:
        document = json.load(fh)
    return load_channel_spec(document)


def preset_path(name: str):
    """Filesystem path of a bundled channel document."""
    return resources.files("envcap").joinpath(f"presets/{name}.json")
