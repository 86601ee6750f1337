"""Dense finite-dimensional Hilbert-space core.

Composite-system states and observables, tensor embedding, partial trace,
Hilbert-Schmidt inner products and Schatten norms.  Sites are indexed 1..k
with site 1 the most significant tensor factor; everything is a dense complex
matrix, immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 4096


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    trace: float = 1e-10
    norm: float = 1e-10
    unitary: float = 1e-10
    psd: float = 1e-8


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class SystemShape:
    """k sites of local dimension d_l; total dimension d = d_l**k."""

    k: int
    d_l: int
    max_dim: int = MAX_DIM

    def __post_init__(self):
        if self.k < 1 or self.d_l < 1:
            raise ValueError(f"need k >= 1 and d_l >= 1, got k={self.k}, d_l={self.d_l}")
        if self.d_l ** self.k > self.max_dim:
            raise ValueError(
                f"total dimension {self.d_l}**{self.k} exceeds the configured "
                f"maximum {self.max_dim}"
            )

    @property
    def d(self) -> int:
        return self.d_l ** self.k

    def site_axes(self, sites) -> list[int]:
        """0-based tensor axes for 1-based site indices."""
        for s in sites:
            if not 1 <= s <= self.k:
                raise ValueError(f"site {s} outside 1..{self.k}")
        return [s - 1 for s in sites]


def _as_matrix(obj) -> np.ndarray:
    return obj.matrix if hasattr(obj, "matrix") else np.asarray(obj)


def symmetrize(mat: np.ndarray, tol: float = DEFAULT_TOL.herm) -> np.ndarray:
    """(A + A†)/2 when A is Hermitian within tol; hard error otherwise."""
    mat = np.asarray(mat, dtype=complex)
    dev = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(mat))):
        raise ValueError(f"matrix is not Hermitian: deviation {dev:.3e} exceeds {tol:.1e}")
    return (mat + mat.conj().T) / 2


class Observable:
    """Hermitian matrix, optionally Frobenius-normalized (frame element)."""

    def __init__(self, matrix, shape: SystemShape | None = None, normalized: bool = True,
                 tol: Tolerances = DEFAULT_TOL):
        mat = symmetrize(matrix, tol.herm)
        if shape is not None and mat.shape != (shape.d, shape.d):
            raise ValueError(f"matrix shape {mat.shape} does not match d={shape.d}")
        if normalized:
            nrm = np.linalg.norm(mat)
            if abs(nrm - 1.0) > tol.norm:
                raise ValueError(f"observable not normalized: ||w||_2 = {nrm}")
        mat.setflags(write=False)
        self.matrix = mat
        self.shape = shape
        self.normalized = normalized

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    def __init__(self, matrix, shape: SystemShape | None = None, tol: Tolerances = DEFAULT_TOL):
        mat = symmetrize(matrix, tol.herm)
        if shape is not None and mat.shape != (shape.d, shape.d):
            raise ValueError(f"matrix shape {mat.shape} does not match d={shape.d}")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > tol.trace:
            raise ValueError(f"trace {tr} differs from 1 beyond tolerance")
        evals = np.linalg.eigvalsh(mat)
        if evals.min() < -tol.psd:
            raise ValueError(f"negative eigenvalue {evals.min():.3e} below -{tol.psd:.1e}")
        mat.setflags(write=False)
        self.matrix = mat
        self.shape = shape

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class Unitary:
    """Square matrix with U†U = 1 within tolerance."""

    def __init__(self, matrix, shape: SystemShape | None = None, tol: Tolerances = DEFAULT_TOL):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"unitary must be square, got shape {mat.shape}")
        if shape is not None and mat.shape != (shape.d, shape.d):
            raise ValueError(f"matrix shape {mat.shape} does not match d={shape.d}")
        dev = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])))
        if dev > tol.unitary * mat.shape[0]:
            raise ValueError(f"not unitary: max |U†U - 1| = {dev:.3e}")
        mat.setflags(write=False)
        self.matrix = mat
        self.shape = shape

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# scalar products and norms

def hs_inner(a, b):
    """Hilbert-Schmidt scalar product Tr(A†B); real for Hermitian pairs."""
    am, bm = _as_matrix(a), _as_matrix(b)
    if am.shape != bm.shape:
        raise ValueError(f"dimension mismatch: {am.shape} vs {bm.shape}")
    val = np.vdot(am, bm)  # = sum conj(A) * B = Tr(A†B)
    if np.abs(val.imag) < 1e-12 * max(1.0, np.abs(val.real)):
        return val.real
    return val


def schatten_norm(a, p) -> float:
    """Singular-value p-norm for p in {1, 2, inf}."""
    mat = _as_matrix(a)
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix has non-finite entries")
    if p == 2:
        return float(np.linalg.norm(mat))
    sv = np.linalg.svd(mat, compute_uv=False)
    if p == 1:
        return float(sv.sum())
    if p in (np.inf, "inf"):
        return float(sv[0]) if sv.size else 0.0
    raise ValueError(f"unsupported Schatten order {p!r}")


# ---------------------------------------------------------------------------
# tensor structure

def partial_trace(mat, shape: SystemShape, keep) -> np.ndarray:
    """Trace out all sites not in `keep` (1-based, strictly increasing)."""
    keep = list(keep)
    if keep != sorted(set(keep)):
        raise ValueError(f"keep sites must be strictly increasing, got {keep}")
    axes_keep = shape.site_axes(keep)
    mat = _as_matrix(mat)
    k, d_l = shape.k, shape.d_l
    if mat.shape != (shape.d, shape.d):
        raise ValueError(f"matrix shape {mat.shape} does not match d={shape.d}")
    tens = mat.reshape([d_l] * (2 * k))
    # einsum with integer labels: traced sites share row/col label
    row = list(range(k))
    col = [k + i if i in axes_keep else i for i in range(k)]
    out = [i for i in axes_keep] + [k + i for i in axes_keep]
    d_keep = d_l ** len(keep)
    return np.einsum(tens, row + col, out).reshape(d_keep, d_keep)


def embed_site_operator(op: np.ndarray, position: int, shape: SystemShape) -> np.ndarray:
    """1_left ⊗ op ⊗ 1_right with op starting at `position` (1-based), no rescaling."""
    op = np.asarray(op, dtype=complex)
    d_op = op.shape[0]
    m = int(round(np.log(d_op) / np.log(shape.d_l)))
    if shape.d_l ** m != d_op:
        raise ValueError(f"operator dimension {d_op} is not a power of d_l={shape.d_l}")
    if not 1 <= position <= shape.k - m + 1:
        raise ValueError(f"position {position} out of range for {m} sites on k={shape.k}")
    left = shape.d_l ** (position - 1)
    right = shape.d_l ** (shape.k - m - position + 1)
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def embed_local(v, position: int, shape: SystemShape,
                tol: Tolerances = DEFAULT_TOL) -> Observable:
    """Normalized embedding v ⊗ 1 / sqrt(d_l^(k-m)) of a traceless local observable."""
    vm = _as_matrix(v)
    if abs(np.trace(vm)) > tol.trace * vm.shape[0]:
        raise ValueError("local observable must be traceless")
    if abs(np.linalg.norm(vm) - 1.0) > tol.norm:
        raise ValueError("local observable must be Frobenius-normalized")
    m = int(round(np.log(vm.shape[0]) / np.log(shape.d_l)))
    full = embed_site_operator(vm, position, shape)
    full /= np.sqrt(shape.d_l ** (shape.k - m))
    return Observable(full, shape=shape, normalized=True, tol=tol)


# ---------------------------------------------------------------------------
# standard constructions

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. 'XZI'; unnormalized."""
    mat = np.array([[1.0 + 0j]])
    for c in label:
        mat = np.kron(mat, PAULI[c])
    return mat


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of the d x d matrices (d^2 elements).

    First element is 1/sqrt(d); the rest are traceless (generalized
    Gell-Mann style: symmetric, antisymmetric, then diagonal).
    """
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = -1j / np.sqrt(2)
            e[j, i] = 1j / np.sqrt(2)
            basis.append(e)
    for i in range(1, d):
        e = np.zeros((d, d), dtype=complex)
        e[np.arange(i), np.arange(i)] = 1
        e[i, i] = -i
        basis.append(e / np.sqrt(i * (i + 1)))
    return basis


def herm_to_vec(mat: np.ndarray) -> np.ndarray:
    """Isometric real coordinates of a Hermitian matrix (dimension d^2).

    Layout: diagonal, then sqrt(2)*Re and sqrt(2)*Im of the upper triangle.
    Preserves the Hilbert-Schmidt inner product.
    """
    d = mat.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate([
        np.diag(mat).real,
        np.sqrt(2) * mat[iu].real,
        np.sqrt(2) * mat[iu].imag,
    ])


def vec_to_herm(vec: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d, k=1)
    n_off = iu[0].size
    mat = np.zeros((d, d), dtype=complex)
    mat[np.arange(d), np.arange(d)] = vec[:d]
    upper = (vec[d:d + n_off] + 1j * vec[d + n_off:]) / np.sqrt(2)
    mat[iu] = upper
    mat[(iu[1], iu[0])] = upper.conj()
    return mat


def random_hermitian(d: int, rng: np.random.Generator, traceless: bool = False,
                     normalized: bool = False) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (g + g.conj().T) / 2
    if traceless:
        h -= np.trace(h) / d * np.eye(d)
    if normalized:
        h /= np.linalg.norm(h)
    return h


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None,
                          shape: SystemShape | None = None) -> DensityMatrix:
    """Random mixed state from a Ginibre factor of the given rank."""
    r = rank or d
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(rho, shape=shape)


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)
