"""Observable measures, sampling operators, and tight-frame verification.

A measure over normalized observables induces the sampling operator
W = deff^2 * E_w[P_w] with P_w the rank-one projector onto w.  Tight frames
have W equal to the identity map; this module builds W exactly for finite
measures and by seeded Monte Carlo otherwise, and measures the defect
||W - id|| in the superoperator 2->2 norm on the Hermitian space.
"""

from __future__ import annotations

import numpy as np

from .hilbert import hermitian_basis, random_hermitian
from .seeding import KEY_DRAW, spawn_rng

DENSE_SUPEROP_LIMIT = 32   # accumulate dense d^2 x d^2 reps up to this d
JACKKNIFE_LIMIT = 16       # keep per-block partial sums up to this d
DEFAULT_BLOCKS = 20


# ---------------------------------------------------------------------------
# Haar sampling

def haar_unitaries(d: int, n: int, rng: np.random.Generator,
                   special: bool = True) -> np.ndarray:
    """Batch of n Haar-random d x d unitaries (QR of Ginibre, R-diagonal > 0).

    With special=True a determinant phase correction lands the samples in the
    special unitary group; the distribution is exactly invariant either way.
    """
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    q = np.empty_like(z)
    for j in range(d):
        v = z[:, :, j].copy()
        for i in range(j):
            proj = np.einsum("bi,bi->b", q[:, :, i].conj(), v)
            v -= proj[:, None] * q[:, :, i]
        q[:, :, j] = v / np.linalg.norm(v, axis=1, keepdims=True)
    if special:
        q *= np.exp(-1j * np.angle(np.linalg.det(q)) / d)[:, None, None]
    return q


def haar_unitary(d: int, rng: np.random.Generator, special: bool = True) -> np.ndarray:
    return haar_unitaries(d, 1, rng, special)[0]


class UnitaryEnsemble:
    """Seeded distribution over unitaries of a fixed dimension.

    kind is one of 'haar', 'number-haar', 'finite', or 'circuit'; finite
    ensembles carry explicit elements and weights.
    """

    def __init__(self, dim: int, sampler, kind: str, elements=None, weights=None,
                 inversion_closed: bool = False, batch_sampler=None):
        self.dim = dim
        self.kind = kind
        self._sampler = sampler
        self._batch_sampler = batch_sampler
        self.inversion_closed = inversion_closed
        if elements is not None:
            elements = [np.asarray(e, dtype=complex) for e in elements]
            if weights is None:
                weights = np.full(len(elements), 1.0 / len(elements))
            weights = np.asarray(weights, dtype=float)
            if abs(weights.sum() - 1.0) > 1e-12 or (weights < 0).any():
                raise ValueError("finite-ensemble weights must be nonnegative and sum to 1")
        self.elements = elements
        self.weights = weights

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self._sampler(rng)

    def sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self._batch_sampler is not None:
            return self._batch_sampler(rng, n)
        return np.stack([self._sampler(rng) for _ in range(n)])


def haar_ensemble(d: int) -> UnitaryEnsemble:
    return UnitaryEnsemble(
        d,
        sampler=lambda rng: haar_unitary(d, rng),
        kind="haar",
        inversion_closed=True,
        batch_sampler=lambda rng, n: haar_unitaries(d, n, rng),
    )


def finite_ensemble(elements, weights=None) -> UnitaryEnsemble:
    elements = [np.asarray(e, dtype=complex) for e in elements]
    d = elements[0].shape[0]
    if weights is None:
        weights = np.full(len(elements), 1.0 / len(elements))
    weights = np.asarray(weights, dtype=float)

    def sampler(rng):
        return elements[rng.choice(len(elements), p=weights)]

    # closed under inversion iff every inverse appears with equal weight
    closed = all(
        any(np.allclose(e.conj().T, f, atol=1e-12) for f in elements) for e in elements
    )
    return UnitaryEnsemble(d, sampler, "finite", elements, weights, inversion_closed=closed)


def eigenspace_isometry(n_hat: np.ndarray, eigenvalue: float,
                        atol: float = 1e-9) -> np.ndarray:
    """Columns spanning the eigenspace of the Hermitian n_hat at `eigenvalue`."""
    evals, evecs = np.linalg.eigh(np.asarray(n_hat, dtype=complex))
    mask = np.abs(evals - eigenvalue) < atol
    if not mask.any():
        raise ValueError(f"{eigenvalue} is not an eigenvalue of the given operator")
    return evecs[:, mask]


def number_conserving_haar_ensemble(n_hat: np.ndarray, atol: float = 1e-9) -> UnitaryEnsemble:
    """Blockwise Haar on each eigenspace of n_hat, assembled with a global phase fix."""
    n_hat = np.asarray(n_hat, dtype=complex)
    d = n_hat.shape[0]
    evals, evecs = np.linalg.eigh(n_hat)
    # group eigenvector columns by eigenvalue
    blocks: list[np.ndarray] = []
    sorted_vals = np.sort(np.unique(np.round(evals / atol) * atol))
    for v in sorted_vals:
        blocks.append(evecs[:, np.abs(evals - v) < atol / 2 + atol])

    def sampler(rng):
        u = np.zeros((d, d), dtype=complex)
        for vb in blocks:
            db = vb.shape[1]
            ub = haar_unitary(db, rng, special=False)
            u += vb @ ub @ vb.conj().T
        return u * np.exp(-1j * np.angle(np.linalg.det(u)) / d)

    return UnitaryEnsemble(d, sampler, "number-haar", inversion_closed=True)


# ---------------------------------------------------------------------------
# Superoperators

class SuperOperator:
    """Linear map on the space of d x d matrices.

    Dense representations act on C-order vectorized matrices; matrix-free
    maps supply apply (and optionally adjoint) callables.  All maps used here
    send Hermitian inputs to Hermitian outputs.
    """

    def __init__(self, dim: int, dense: np.ndarray | None = None, apply_fn=None,
                 adjoint_fn=None, self_adjoint: bool = False, meta: dict | None = None):
        if dense is None and apply_fn is None:
            raise ValueError("need a dense matrix or an apply callable")
        self.dim = dim
        self.dense = dense
        self._apply_fn = apply_fn
        self._adjoint_fn = adjoint_fn
        self.self_adjoint = self_adjoint
        self.meta = meta or {}

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if self.dense is not None:
            return (self.dense @ x.reshape(-1)).reshape(self.dim, self.dim)
        return self._apply_fn(x)

    def adjoint_apply(self, x: np.ndarray) -> np.ndarray:
        if self.self_adjoint:
            return self.apply(x)
        if self.dense is not None:
            return (self.dense.conj().T @ np.asarray(x, dtype=complex).reshape(-1)
                    ).reshape(self.dim, self.dim)
        if self._adjoint_fn is None:
            raise ValueError("no adjoint available for this superoperator")
        return self._adjoint_fn(x)

    def as_real_matrix(self) -> np.ndarray:
        """Representation on the real space of Hermitian matrices.

        Columns/rows refer to the orthonormal Hermitian basis of hilbert.
        """
        basis = hermitian_basis(self.dim)
        bmat = np.stack([b.reshape(-1) for b in basis], axis=1)  # d^2 x d^2
        if self.dense is not None:
            rep = bmat.conj().T @ self.dense @ bmat
        else:
            cols = [self.apply(b).reshape(-1) for b in basis]
            rep = bmat.conj().T @ np.stack(cols, axis=1)
        if np.max(np.abs(rep.imag)) > 1e-9:
            raise ValueError("superoperator does not preserve Hermiticity")
        return rep.real

    @staticmethod
    def identity(dim: int) -> "SuperOperator":
        return SuperOperator(dim, dense=np.eye(dim * dim, dtype=complex), self_adjoint=True)


def projector_onto(w) -> SuperOperator:
    """Rank-one map P_w : X -> (w, X) w for a normalized observable w."""
    wm = w.matrix if hasattr(w, "matrix") else np.asarray(w, dtype=complex)
    if abs(np.linalg.norm(wm) - 1.0) > 1e-9:
        raise ValueError("projector_onto requires a normalized observable")
    v = wm.reshape(-1)
    return SuperOperator(wm.shape[0], dense=np.outer(v, v.conj()), self_adjoint=True)


def power_iteration_norm(apply_fn, adjoint_fn, dim: int, rng: np.random.Generator,
                         tol: float = 1e-8, max_iter: int = 5000) -> float:
    """Largest singular value of a superoperator on the Hermitian space."""
    x = random_hermitian(dim, rng)
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = adjoint_fn(apply_fn(x))
        y = (y + y.conj().T) / 2
        sigma2 = np.vdot(x.reshape(-1), y.reshape(-1)).real
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
        if abs(sigma2 - prev) < tol * max(abs(sigma2), 1e-30):
            break
        prev = sigma2
    return float(np.sqrt(max(sigma2, 0.0)))


def superop_norm(s: SuperOperator, rng: np.random.Generator | None = None,
                 dense_limit: int = 64) -> float:
    """2->2 norm of a superoperator, dense SVD when small else power iteration."""
    if s.dim <= dense_limit and s.dense is not None:
        return float(np.linalg.svd(s.as_real_matrix(), compute_uv=False)[0])
    rng = rng or np.random.default_rng(0)
    return power_iteration_norm(s.apply, s.adjoint_apply, s.dim, rng)


def tight_frame_defect(w_op: SuperOperator, rng: np.random.Generator | None = None) -> float:
    """||W - id|| in the 2->2 norm over Hermitian matrices."""
    if w_op.dense is not None and w_op.dim <= 64:
        rep = w_op.as_real_matrix() - np.eye(w_op.dim ** 2)
        return float(np.linalg.svd(rep, compute_uv=False)[0])
    rng = rng or np.random.default_rng(0)

    def diff(x):
        return w_op.apply(x) - x

    def diff_adj(x):
        return w_op.adjoint_apply(x) - x

    return power_iteration_norm(diff, diff_adj, w_op.dim, rng)


# ---------------------------------------------------------------------------
# Observable measures

class ObservableMeasure:
    """Probability measure over normalized observables of one dimension.

    eff_dim sets the sampling-operator prefactor eff_dim^2 (equal to dim for
    plain frames; the subspace or block dimension for restricted and reduced
    variants).
    """

    def __init__(self, dim: int, kind: str, sampler=None, elements=None, weights=None,
                 eff_dim: int | None = None, batch_sampler=None):
        self.dim = dim
        self.kind = kind
        self.eff_dim = eff_dim or dim
        self._sampler = sampler
        self._batch_sampler = batch_sampler
        if elements is not None:
            elements = [np.asarray(e, dtype=complex) for e in elements]
            for e in elements:
                if abs(np.linalg.norm(e) - 1.0) > 1e-9:
                    raise ValueError("measure elements must have unit Frobenius norm")
            if weights is None:
                weights = np.full(len(elements), 1.0 / len(elements))
            weights = np.asarray(weights, dtype=float)
            if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-10:
                raise ValueError("weights must be nonnegative and sum to 1")
        self.elements = elements
        self.weights = weights

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.elements is not None:
            return self.elements[rng.choice(len(self.elements), p=self.weights)]
        return self._sampler(rng)

    def sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self._batch_sampler is not None:
            return self._batch_sampler(rng, n)
        return np.stack([self.sample(rng) for _ in range(n)])


def basis_measure(d: int) -> ObservableMeasure:
    """Uniform measure over an orthonormal Hermitian operator basis (a tight frame)."""
    return ObservableMeasure(d, "exact-basis", elements=hermitian_basis(d))


def point_mass(w) -> ObservableMeasure:
    wm = w.matrix if hasattr(w, "matrix") else np.asarray(w, dtype=complex)
    return ObservableMeasure(wm.shape[0], "finite-set", elements=[wm])


def induced_measure(ensemble: UnitaryEnsemble, w0, eff_dim: int | None = None,
                    compress_isometry: np.ndarray | None = None) -> ObservableMeasure:
    """Conjugated-seed measure mixed with an identity atom of weight 1/eff_dim^2.

    With a compression isometry V the ensemble unitaries are restricted to the
    subspace (u = V† U V) and the atom is the subspace identity; eff_dim then
    defaults to the subspace dimension.
    """
    w0m = w0.matrix if hasattr(w0, "matrix") else np.asarray(w0, dtype=complex)
    d_samp = w0m.shape[0]
    if abs(np.trace(w0m)) > 1e-9:
        raise ValueError("seed observable must be traceless")
    if abs(np.linalg.norm(w0m) - 1.0) > 1e-9:
        raise ValueError("seed observable must be normalized")
    if compress_isometry is not None and compress_isometry.shape[1] != d_samp:
        raise ValueError("seed observable must live on the compressed block")
    deff = eff_dim or d_samp
    atom = np.eye(d_samp, dtype=complex) / np.sqrt(d_samp)
    p_atom = 1.0 / deff**2

    def sampler(rng):
        if rng.random() < p_atom:
            return atom
        u = ensemble.sample(rng)
        if compress_isometry is not None:
            u = compress_isometry.conj().T @ u @ compress_isometry
        return u.conj().T @ w0m @ u

    def batch_sampler(rng, n):
        us = ensemble.sample_batch(rng, n)
        if compress_isometry is not None:
            v = compress_isometry
            us = np.einsum("ij,bjk,kl->bil", v.conj().T, us, v)
        ws = np.einsum("bji,jk,bkl->bil", us.conj(), w0m, us)
        hit = rng.random(n) < p_atom
        ws[hit] = atom
        return ws

    meas = ObservableMeasure(d_samp, "induced", sampler=sampler, eff_dim=deff,
                             batch_sampler=batch_sampler)
    meas.atom_probability = p_atom
    meas.seed_observable = w0m
    return meas


# ---------------------------------------------------------------------------
# Sampling operator

class SampledSuperOperator(SuperOperator):
    """Monte-Carlo sampling operator with per-block partial sums for jackknife."""

    def __init__(self, dim: int, dense: np.ndarray, samples: int,
                 block_sums: list[np.ndarray] | None, block_counts: list[int] | None,
                 eff_dim: int):
        super().__init__(dim, dense=dense, self_adjoint=True,
                         meta={"samples": samples, "eff_dim": eff_dim})
        self.samples = samples
        self.block_sums = block_sums
        self.block_counts = block_counts
        self.eff_dim = eff_dim

    def defect(self) -> tuple[float, float | None]:
        """(||W - id||, jackknife standard error or None)."""
        val = tight_frame_defect(self)
        if not self.block_sums:
            return val, None
        total = self.dense * self.samples / self.eff_dim**2
        leave_outs = []
        for bsum, bcount in zip(self.block_sums, self.block_counts):
            rest = (total - bsum) / (self.samples - bcount) * self.eff_dim**2
            leave_outs.append(tight_frame_defect(
                SuperOperator(self.dim, dense=rest, self_adjoint=True)))
        b = len(leave_outs)
        mean = np.mean(leave_outs)
        se = np.sqrt((b - 1) / b * np.sum((np.asarray(leave_outs) - mean) ** 2))
        return val, float(se)


def sampling_operator(measure: ObservableMeasure, mode: str = "exact",
                      samples: int = 0, seed: int = 0,
                      jackknife_blocks: int = DEFAULT_BLOCKS,
                      batch: int = 4096) -> SuperOperator:
    """W = eff_dim^2 * E_w[P_w], exact for finite measures or by Monte Carlo.

    Monte-Carlo results carry the sample count and per-block partial sums for
    a delete-one-block jackknife of the defect's standard error.
    """
    d = measure.dim
    if mode == "exact":
        if measure.elements is None:
            raise ValueError("exact mode requires a finite-set or exact-basis measure")
        dense = np.zeros((d * d, d * d), dtype=complex)
        for wgt, el in zip(measure.weights, measure.elements):
            v = el.reshape(-1)
            dense += wgt * measure.eff_dim**2 * np.outer(v, v.conj())
        return SuperOperator(d, dense=dense, self_adjoint=True,
                             meta={"eff_dim": measure.eff_dim})
    if mode != "monte-carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 1:
        raise ValueError("monte-carlo mode needs samples >= 1")
    if d > DENSE_SUPEROP_LIMIT:
        raise ValueError(
            f"monte-carlo sampling operators are accumulated densely, capped at "
            f"d <= {DENSE_SUPEROP_LIMIT}; got d = {d}")

    keep_blocks = d <= JACKKNIFE_LIMIT and jackknife_blocks > 1
    n_blocks = min(jackknife_blocks, samples) if keep_blocks else 1
    edges = np.linspace(0, samples, n_blocks + 1, dtype=int)
    total = np.zeros((d * d, d * d), dtype=complex)
    block_sums, block_counts = [], []
    for b in range(n_blocks):
        bsum = np.zeros_like(total)
        m = edges[b + 1] - edges[b]
        done = 0
        while done < m:
            take = min(batch, m - done)
            rng = spawn_rng(seed, KEY_DRAW, b, done)
            ws = measure.sample_batch(rng, take)
            vmat = ws.reshape(take, -1)
            bsum += vmat.T @ vmat.conj()
            done += take
        total += bsum
        if keep_blocks:
            block_sums.append(bsum)
            block_counts.append(int(m))
    dense = total * measure.eff_dim**2 / samples
    return SampledSuperOperator(d, dense, samples,
                                block_sums if keep_blocks else None,
                                block_counts if keep_blocks else None,
                                measure.eff_dim)


# ---------------------------------------------------------------------------
# Restricted (symmetry-sector) frames

def restricted_projector(n_hat: np.ndarray, eigenvalue: float,
                         atol: float = 1e-9) -> SuperOperator:
    """Projection superoperator X -> P X P onto an eigenspace of n_hat."""
    iso = eigenspace_isometry(n_hat, eigenvalue, atol)
    p = iso @ iso.conj().T
    d = p.shape[0]
    dense = np.kron(p, p.T)  # vec(P X P) = (P ⊗ P^T) vec(X), P Hermitian
    sop = SuperOperator(d, dense=dense, self_adjoint=True,
                        meta={"isometry": iso, "block_dim": iso.shape[1]})
    return sop


def restricted_frame_defect(ensemble: UnitaryEnsemble, w0_block, isometry: np.ndarray,
                            samples: int, seed: int = 0,
                            jackknife_blocks: int = DEFAULT_BLOCKS):
    """Monte-Carlo defect ||W P_N - P_N|| computed on the symmetry block.

    The ensemble must commute with the symmetry; its unitaries are compressed
    through the isometry and the block-level sampling operator is compared
    against the block identity.  Returns (defect, standard error, W_block).
    """
    meas = induced_measure(ensemble, w0_block, compress_isometry=isometry)
    w_op = sampling_operator(meas, mode="monte-carlo", samples=samples, seed=seed,
                             jackknife_blocks=jackknife_blocks)
    val, se = w_op.defect()
    return val, se, w_op
