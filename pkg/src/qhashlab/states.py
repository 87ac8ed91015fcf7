"""Classical-quantum and classical-classical states, distances, guessing probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numerics as nx
from .errors import DimensionError, NumericalError

DEFAULT_GAP_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000


def as_state_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1 or a.size == 0:
        raise DimensionError(f"state vector must be 1-d and non-empty, got shape {a.shape}")
    if abs(np.linalg.norm(a) - 1.0) > nx.CONSTRUCTION_TOL:
        raise ValueError("state vector is not normalized")
    return a


def as_density_matrix(m, *, normalized: bool = False) -> np.ndarray:
    """Validate a (sub)normalized density matrix and return its symmetrized copy."""
    a = nx.as_hermitian(m)
    tol = nx.CONSTRUCTION_TOL
    if a.shape[0] and np.linalg.eigvalsh(a)[0] < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    tr = np.trace(a).real
    if tr > 1 + tol:
        raise ValueError(f"density matrix trace {tr} exceeds 1")
    if normalized and abs(tr - 1) > tol:
        raise ValueError(f"density matrix trace {tr} is not 1")
    return a


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class JointDistribution:
    """A probability table ``p(x, y)``; rows index X, columns index Y."""

    table: np.ndarray
    x_labels: tuple = ()
    y_labels: tuple = ()

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or 0 in t.shape:
            raise DimensionError(f"joint table must be a non-empty 2-d array, got {t.shape}")
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise ValueError("joint table entries must be finite and nonnegative")
        if abs(t.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint table sums to {t.sum()!r}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        xl = tuple(self.x_labels) or tuple(str(i) for i in range(t.shape[0]))
        yl = tuple(self.y_labels) or tuple(str(i) for i in range(t.shape[1]))
        if len(xl) != t.shape[0] or len(yl) != t.shape[1]:
            raise DimensionError("label lists do not match the table shape")
        object.__setattr__(self, "x_labels", xl)
        object.__setattr__(self, "y_labels", yl)

    @classmethod
    def from_unnormalized(cls, weights, **labels) -> "JointDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), **labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape

    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def marginal_y(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def posterior(self, y: int) -> np.ndarray:
        col = self.table[:, y]
        s = col.sum()
        return col / s if s > 0 else col


@dataclass(frozen=True)
class CqState:
    """``rho_XE = sum_x |x><x| (x) rho_x`` stored as a stack of subnormalized blocks."""

    blocks: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        b = np.array(self.blocks, dtype=complex)
        if b.ndim != 3 or b.shape[1] != b.shape[2] or b.shape[0] == 0:
            raise DimensionError(f"blocks must have shape (N, d, d), got {b.shape}")
        b = np.stack([as_density_matrix(blk) for blk in b])
        total = np.trace(b, axis1=1, axis2=2).real.sum()
        if abs(total - 1.0) > nx.ASSERT_TOL:
            raise ValueError(f"block traces sum to {total!r}, not 1")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)
        labels = tuple(self.labels) or tuple(str(i) for i in range(b.shape[0]))
        if len(labels) != b.shape[0]:
            raise DimensionError("label count does not match block count")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pure(cls, probs, vectors, labels: Sequence = ()) -> "CqState":
        """Build ``sum_x q_x |x><x| (x) |psi_x><psi_x|`` from weights and row vectors."""
        q = np.asarray(probs, dtype=float)
        v = np.asarray(vectors, dtype=complex)
        blocks = q[:, None, None] * np.einsum("xi,xj->xij", v, v.conj())
        return cls(blocks, labels)

    @classmethod
    def from_joint(cls, j: JointDistribution) -> "CqState":
        """Embed classical side information as diagonal blocks ``rho_x = diag(p(x, .))``."""
        t = j.table
        blocks = np.zeros((t.shape[0], t.shape[1], t.shape[1]), dtype=complex)
        idx = np.arange(t.shape[1])
        blocks[:, idx, idx] = t
        return cls(blocks, j.x_labels)

    @property
    def n_labels(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]

    def weights(self) -> np.ndarray:
        return np.trace(self.blocks, axis1=1, axis2=2).real

    def side_state(self) -> np.ndarray:
        """Marginal ``rho_E``."""
        return self.blocks.sum(axis=0)

    def apply_channel(self, kraus: Sequence[np.ndarray]) -> "CqState":
        """Apply a channel on E given by Kraus operators."""
        out = sum(k @ self.blocks @ k.conj().T for k in kraus)
        return CqState(out, self.labels)


# -- distances ----------------------------------------------------------------

def statistical_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def trace_distance(a, b, *, halved: bool = False) -> float:
    """``||a - b||_1``; pass ``halved=True`` for the operational ``1/2 ||a - b||_1``."""
    a = nx.as_matrix(a)
    b = nx.as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = nx.trace_norm(a - b)
    return 0.5 * d if halved else d


# -- guessing probabilities -------------------------------------------------

def guess_prob_classical(j: JointDistribution) -> float:
    """``p_g(X|Y) = sum_y max_x p(x, y)``."""
    return float(j.table.max(axis=0).sum())


def min_entropy(p_guess: float) -> float:
    """Min-entropy in bits for a guessing probability."""
    return -math.log2(p_guess)


def conditional_min_entropy(j: JointDistribution) -> float:
    return min_entropy(guess_prob_classical(j))


@dataclass
class GuessResult:
    """Certified sandwich for ``p_g(X|E)``.

    ``lower`` is the success probability of ``povm``; ``upper`` is ``Tr[sigma]`` for
    the dual-feasible ``sigma`` (``sigma >= rho_x`` for every x).
    """

    lower: float
    upper: float
    povm: np.ndarray
    sigma: np.ndarray
    converged: bool
    iterations: int

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _flush_tiny(a: np.ndarray, floor: float = 1e-150) -> None:
    # POVM weight on abandoned directions decays geometrically; denormals stall BLAS
    a.real[np.abs(a.real) < floor] = 0.0
    a.imag[np.abs(a.imag) < floor] = 0.0


def _complete(povm: np.ndarray) -> np.ndarray:
    """Add the missing ``I - sum_x M_x`` to the first outcome."""
    d = povm.shape[1]
    rest = nx.hermitize(np.eye(d) - povm.sum(axis=0))
    vals, vecs = np.linalg.eigh(rest)
    vals = np.clip(vals, 0.0, None)
    out = povm.copy()
    out[0] += (vecs * vals) @ vecs.conj().T
    return out


def _success(blocks: np.ndarray, povm: np.ndarray) -> float:
    return float(np.einsum("xij,xji->", blocks, povm).real)


def _dual_certificate(blocks: np.ndarray, povm: np.ndarray) -> tuple[float, np.ndarray]:
    z = nx.hermitize(np.einsum("xij,xjk->ik", blocks, povm))
    shift = max(0.0, float(np.linalg.eigvalsh(blocks - z)[:, -1].max()))
    sigma = z + shift * np.eye(z.shape[0])
    return float(np.trace(sigma).real), sigma


def pgm_povm(rho: CqState) -> np.ndarray:
    """Square-root measurement ``M_x = S^{-1/2} rho_x S^{-1/2}`` with ``S = rho_E``."""
    s_inv_half = nx.psd_power(rho.side_state(), -0.5)
    return _complete(s_inv_half @ rho.blocks @ s_inv_half)


def pgm_value(rho: CqState) -> float:
    """Success probability of the pretty-good measurement.

    Pure-state ensembles go through the Gram matrix of ``sqrt(q_x)|psi_x>``:
    the value is ``sum_x ((G^{1/2})_{xx})^2``.  Mixed blocks use the operator form.
    """
    vecs = _pure_vectors(rho)
    if vecs is not None:
        g = vecs.conj() @ vecs.T
        root = nx.psd_power(g, 0.5, cutoff=0.0)
        return float(np.sum(np.abs(np.diag(root)) ** 2))
    return _success(rho.blocks, pgm_povm(rho))


def _pure_vectors(rho: CqState, tol: float = 1e-12):
    """Return rows ``sqrt(q_x)|psi_x>`` if every block has rank <= 1, else None."""
    out = np.zeros((rho.n_labels, rho.dim), dtype=complex)
    for i, blk in enumerate(rho.blocks):
        vals, vecs = np.linalg.eigh(blk)
        if vals[-2:-1].size and vals[-2] > tol:
            return None
        out[i] = vecs[:, -1] * math.sqrt(max(vals[-1], 0.0))
    return out


def guess_prob_quantum(
    rho: CqState,
    gap_tol: float = DEFAULT_GAP_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    check_every: int = 10,
) -> GuessResult:
    """Sandwich ``p_g(X|E)`` between an achieved measurement and a dual certificate.

    Primal side: fixed-point iteration ``M_x <- L^{-1} rho_x M_x rho_x L^{-1}``
    with ``L = (sum_x rho_x M_x rho_x)^{1/2}``, started from the pretty-good
    measurement; the best POVM seen is kept.  Dual side: any ``sigma`` with
    ``sigma >= rho_x`` for all x bounds ``p_g`` by ``Tr[sigma]``.  Two
    certificates are tried: the Hermitian part of ``sum_x rho_x M_x`` shifted
    up by ``max_x lambda_max(rho_x - Z)``, and ``max_x lambda_max(rho_x) I``.
    """
    if not gap_tol > 0:
        raise ValueError("gap_tol must be positive")
    blocks = np.asarray(rho.blocks)
    d = rho.dim

    lam_blocks = float(np.linalg.eigvalsh(blocks)[:, -1].max())
    best_upper = lam_blocks * d
    best_sigma = lam_blocks * np.eye(d, dtype=complex)

    s_inv_half = nx.psd_power(rho.side_state(), -0.5)
    raw = s_inv_half @ blocks @ s_inv_half
    povm = _complete(raw)
    best_povm = povm
    best_lower = _success(blocks, povm)

    it = 0
    converged = False
    while True:
        if it % check_every == 0 or it == max_iter:
            up, sigma = _dual_certificate(blocks, povm)
            if up < best_upper:
                best_upper, best_sigma = up, sigma
            if best_upper - best_lower <= gap_tol:
                converged = True
                break
        if it == max_iter:
            break
        rmr = blocks @ raw @ blocks
        l_inv = nx.psd_power(rmr.sum(axis=0), -0.5)
        raw = l_inv @ rmr @ l_inv
        _flush_tiny(raw)
        povm = _complete(raw)
        it += 1
        val = _success(blocks, povm)
        if val > best_lower:
            best_lower, best_povm = val, povm

    if best_lower > best_upper + nx.ASSERT_TOL:
        raise NumericalError(f"primal {best_lower} exceeds dual {best_upper}")
    # once the gap closes exactly the two traces can differ in the last ulp
    best_upper = max(best_upper, best_lower)
    return GuessResult(best_lower, best_upper, best_povm, best_sigma, converged, it)


def bounded_storage_bound(rho: CqState, k_qubits: int) -> float:
    """``p_g(X) * 2^k``: an upper bound on ``p_g(X|E)`` when E has at most k qubits."""
    if rho.dim > 2**k_qubits:
        raise DimensionError(f"side information of dim {rho.dim} does not fit in {k_qubits} qubits")
    return float(rho.weights().max()) * 2.0**k_qubits


def helstrom_value(p0: float, p1: float, rho0, rho1) -> float:
    """Optimal success for two states: ``(1 + ||p0 rho0 - p1 rho1||_1) / 2``."""
    return 0.5 * (1.0 + nx.trace_norm(p0 * np.asarray(rho0) - p1 * np.asarray(rho1)))
