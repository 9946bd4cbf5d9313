"""Linear algebra on bipartite tensor-product spaces.

Everything here works on dense complex numpy arrays at desk scale
(dimensions up to a few dozen per factor).  All entropic quantities
downstream are in bits, so eigenvalue clamping happens here, once,
before anything hits a logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Double-precision eigensolver accuracy at dims <= 64.
HERM_TOL = 1e-10
UNITARY_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
NORM_TOL = 1e-9
RECON_TOL = 1e-10

# Eigenvalues in [-PSD_TOL, 0] are numerical noise; clamp before x*log(x).
EIG_FLOOR = 0.0


class DimensionError(ValueError):
    """Operands live on incompatible or malformed spaces."""


class NormalizationError(ValueError):
    """A state vector or distribution fails its normalization invariant."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a Generator; return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class BipartiteShape:
    """Dimensions of a two-factor tensor product space."""

    dim_b: int
    dim_c: int

    def __post_init__(self):
        if self.dim_b < 1 or self.dim_c < 1:
            raise DimensionError(
                f"factor dimensions must be >= 1, got ({self.dim_b}, {self.dim_c})"
            )

    @property
    def total(self) -> int:
        return self.dim_b * self.dim_c


def _as_total_dim(space) -> int:
    return space.total if isinstance(space, BipartiteShape) else int(space)


@dataclass(frozen=True)
class DensityOperator:
    """Trace-one positive Hermitian operator, optionally on a bipartite space."""

    matrix: np.ndarray
    space: int | BipartiteShape

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        d = _as_total_dim(self.space)
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} does not match dimension {d}")
        if np.abs(mat - mat.conj().T).max() > HERM_TOL:
            raise DomainError("matrix is not Hermitian within tolerance")
        w = np.linalg.eigvalsh(mat)
        if w[0] < -PSD_TOL:
            raise DomainError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
        tr = float(np.real(np.trace(mat)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise NormalizationError(f"trace is {tr}, expected 1")

    @property
    def dim(self) -> int:
        return _as_total_dim(self.space)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues clamped to [0, inf), ascending."""
        return np.clip(np.linalg.eigvalsh(self.matrix), EIG_FLOOR, None)


@dataclass(frozen=True)
class PureStateVector:
    """Unit vector, optionally on a bipartite space."""

    amplitudes: np.ndarray
    space: int | BipartiteShape

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        d = _as_total_dim(self.space)
        if amps.shape != (d,):
            raise DimensionError(f"vector length {amps.shape[0]} does not match dimension {d}")
        nrm = float(np.linalg.norm(amps))
        if abs(nrm - 1.0) > NORM_TOL:
            raise NormalizationError(f"norm is {nrm}, expected 1")

    @property
    def dim(self) -> int:
        return _as_total_dim(self.space)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density_operator(self) -> DensityOperator:
        return DensityOperator(self.projector(), self.space)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt form of a bipartite pure state.

    coefficients are the eigenvalues of either reduced state, sorted
    nonincreasing and summing to one; the state reconstructs as
    sum_j sqrt(coefficients[j]) * left_vectors[:, j] (x) right_vectors[:, j].
    """

    coefficients: np.ndarray
    left_vectors: np.ndarray  # (dim_b, r) orthonormal columns
    right_vectors: np.ndarray  # (dim_c, r) orthonormal columns
    space: BipartiteShape = field(repr=False)

    def __post_init__(self):
        lam = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", lam)
        if np.any(np.diff(lam) > 1e-12):
            raise DomainError("Schmidt coefficients must be sorted nonincreasing")
        if abs(lam.sum() - 1.0) > TRACE_TOL:
            raise NormalizationError(f"Schmidt coefficients sum to {lam.sum()}, expected 1")

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients > 1e-12))

    def reconstruct(self) -> np.ndarray:
        """Reassemble the full state vector from the Schmidt data."""
        return schmidt_vector(self.coefficients, self.left_vectors, self.right_vectors, self.space)


def partial_trace_matrix(mat: np.ndarray, shape: BipartiteShape, keep: str) -> np.ndarray:
    """Partial trace of a raw (dB*dC) x (dB*dC) matrix, keeping factor 'b' or 'c'."""
    db, dc = shape.dim_b, shape.dim_c
    if mat.shape != (db * dc, db * dc):
        raise DimensionError(f"matrix shape {mat.shape} does not match {shape}")
    t = mat.reshape(db, dc, db, dc)
    if keep == "b":
        return np.einsum("icjc->ij", t)
    if keep == "c":
        return np.einsum("cicj->ij", t)
    raise DomainError(f"keep must be 'b' or 'c', got {keep!r}")


def partial_trace(state: DensityOperator, keep: str) -> DensityOperator:
    """Reduced state of a bipartite density operator on the kept factor."""
    if not isinstance(state.space, BipartiteShape):
        raise DimensionError("partial_trace requires a bipartite density operator")
    red = partial_trace_matrix(state.matrix, state.space, keep)
    dim = state.space.dim_b if keep == "b" else state.space.dim_c
    return DensityOperator(red, dim)


def partial_transpose(op: np.ndarray, shape: BipartiteShape) -> np.ndarray:
    """Transpose on the second factor, in the fixed computational product basis."""
    db, dc = shape.dim_b, shape.dim_c
    op = np.asarray(op)
    if op.shape != (db * dc, db * dc):
        raise DimensionError(f"operator shape {op.shape} does not match {shape}")
    t = op.reshape(db, dc, db, dc)
    return t.transpose(0, 3, 2, 1).reshape(db * dc, db * dc)


def is_ppt(op: np.ndarray, shape: BipartiteShape, tol: float = PSD_TOL):
    """Whether the partial transpose is positive semidefinite.

    Returns (flag, min_eigenvalue): flag is True iff the smallest eigenvalue
    of the partially transposed operator is >= -tol.
    """
    w = np.linalg.eigvalsh(partial_transpose(op, shape))
    min_eig = float(w[0])
    return min_eig >= -tol, min_eig


def schmidt_decompose(psi: PureStateVector) -> SchmidtDecomposition:
    """Schmidt decomposition of a bipartite unit vector via SVD."""
    if not isinstance(psi.space, BipartiteShape):
        raise DimensionError("schmidt_decompose requires a bipartite state")
    nrm = float(np.linalg.norm(psi.amplitudes))
    if abs(nrm - 1.0) > NORM_TOL:
        raise NormalizationError(f"norm is {nrm}, expected 1")
    db, dc = psi.space.dim_b, psi.space.dim_c
    coeff = psi.amplitudes.reshape(db, dc)
    u, s, vh = np.linalg.svd(coeff, full_matrices=False)
    lam = np.clip(s**2, 0.0, None)
    lam = lam / lam.sum()
    # coeff = u @ diag(s) @ vh, so the C-side kets are the rows of vh
    return SchmidtDecomposition(
        coefficients=lam,
        left_vectors=u,
        right_vectors=vh.T,
        space=psi.space,
    )


def schmidt_vector(lam, left, right, space: BipartiteShape) -> np.ndarray:
    """Assemble sum_j sqrt(lam_j) left[:,j] (x) right[:,j] as a flat vector."""
    mat = (left * np.sqrt(np.asarray(lam))) @ right.T
    return mat.reshape(space.total)


def haar_random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The diagonal phase correction makes the QR factorization unique, which
    is what gives the exact Haar distribution.
    """
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    rng = as_generator(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_random_state(dim: int, seed) -> np.ndarray:
    """Unit vector uniform on the sphere (Gaussian normalized)."""
    rng = as_generator(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, seed, rank: int | None = None) -> np.ndarray:
    """Random full(ish)-rank density matrix from a Ginibre factor."""
    rng = as_generator(seed)
    r = rank if rank is not None else dim
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    m = g @ g.conj().T
    return m / np.real(np.trace(m))


def reorder_factors(vec: np.ndarray, dims, perm) -> np.ndarray:
    """Permute tensor factors of a flat vector.

    dims are the current factor dimensions; perm[i] gives the index of the
    old factor that lands at position i.
    """
    vec = np.asarray(vec)
    if vec.size != int(np.prod(dims)):
        raise DimensionError(f"vector size {vec.size} does not match factor dims {dims}")
    return vec.reshape(dims).transpose(perm).reshape(-1)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(v) + 1)
    idx = np.nonzero(u - css / ks > 0)[0][-1]
    tau = css[idx] / (idx + 1.0)
    return np.maximum(v - tau, 0.0)


def project_to_density(mat: np.ndarray) -> np.ndarray:
    """Nearest density matrix in Frobenius norm: eigenbasis simplex projection."""
    h = (mat + mat.conj().T) / 2.0
    w, v = np.linalg.eigh(h)
    w = project_to_simplex(w)
    return (v * w) @ v.conj().T
