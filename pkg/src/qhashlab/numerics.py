"""Dense complex linear algebra kernel.

Every matrix is a plain ``numpy.ndarray`` of complex128; the helpers here
validate shapes and Hermiticity at the boundary and otherwise stay out of the
way.  All functions are pure.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, NumericalError

# Construction-time tolerance (Hermiticity, normalization) and the looser
# tolerance used when asserting proved inequalities.
CONSTRUCTION_TOL = 1e-10
ASSERT_TOL = 1e-9


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    return a


def hermitize(m) -> np.ndarray:
    """Return ``(m + m^dagger) / 2``."""
    a = np.asarray(m, dtype=complex)
    return (a + a.conj().T) / 2


def as_hermitian(m, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    """Validate that ``m`` is square and Hermitian within ``tol``; return it symmetrized."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"Hermitian matrix must be square, got {a.shape}")
    if a.size and np.max(np.abs(a - a.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian within tolerance")
    return hermitize(a)


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors)."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem of ``m`` not listed in ``keep``.

    ``dims`` lists the local dimensions in tensor order.  Kept subsystems stay
    in their original relative order.
    """
    a = as_matrix(m)
    dims = [int(d) for d in dims]
    if any(d <= 0 for d in dims):
        raise DimensionError("subsystem dimensions must be positive")
    total = int(np.prod(dims))
    if a.shape != (total, total):
        raise DimensionError(f"dims {dims} do not match matrix shape {a.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} subsystems")

    n = len(dims)
    t = a.reshape(dims + dims)
    # einsum letters: rows 0..n-1, columns n..2n-1; traced columns reuse row letters
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    row = letters[:n]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    spec = "".join(row) + "".join(col) + "->" + "".join(out)
    kd = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(spec, t).reshape(kd, kd)


class Eigenpair(NamedTuple):
    value: float
    vector: np.ndarray


def eig_max(m, tol: float = ASSERT_TOL) -> Eigenpair:
    """Largest eigenvalue of a Hermitian matrix and a unit eigenvector.

    The pair is checked by its residual ``||m v - lambda v||`` rather than
    trusted from LAPACK.
    """
    h = as_hermitian(m)
    vals, vecs = np.linalg.eigh(h)
    lam = float(vals[-1])
    v = vecs[:, -1]
    residual = np.linalg.norm(h @ v - lam * v)
    scale = max(1.0, abs(lam))
    if residual > tol * scale:
        raise NumericalError(f"eigenpair residual {residual:.3e} exceeds {tol:.1e}")
    return Eigenpair(lam, v)


def lambda_max(m) -> float:
    return eig_max(m).value


def schatten_norm(m, p: float = 1.0) -> float:
    """Schatten p-norm: the l_p norm of the singular values (``p=inf`` gives the operator norm)."""
    if not p >= 1:
        raise ValueError(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s**p) ** (1.0 / p))


def trace_norm(m) -> float:
    """Trace norm; uses the spectrum directly when ``m`` is Hermitian."""
    a = as_matrix(m)
    if a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, atol=CONSTRUCTION_TOL):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(a)))))
    return schatten_norm(a, 1)


def swap_operator(d: int) -> np.ndarray:
    """Permutation operator on C^d (x) C^d with SWAP |i,j> = |j,i>."""
    d = int(d)
    if d <= 0:
        raise DimensionError("dimension must be positive")
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def psd_power(m, power: float, cutoff: float = 1e-12) -> np.ndarray:
    """Matrix power of a PSD matrix; eigenvalues below ``cutoff`` are treated as zero.

    Negative powers act as the pseudo-inverse on the support.
    """
    vals, vecs = np.linalg.eigh(hermitize(m))
    keep = vals > cutoff
    scaled = np.zeros_like(vals)
    scaled[keep] = vals[keep] ** power
    return (vecs * scaled) @ vecs.conj().T


def support_projector(m, cutoff: float = 1e-12) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitize(m))
    v = vecs[:, vals > cutoff]
    return v @ v.conj().T


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise NumericalError("cannot normalize the zero vector")
    return v / n


def max_pairwise_overlap(vectors) -> float:
    """``max_{i != j} |<v_i|v_j>|`` over the rows of ``vectors``; 0 for fewer than two."""
    v = np.asarray(vectors, dtype=complex)
    if v.shape[0] < 2:
        return 0.0
    g = np.abs(v.conj() @ v.T)
    np.fill_diagonal(g, 0.0)
    return float(g.max())


class CotlarSteinAudit(NamedTuple):
    lambda_max: float
    bound: float
    holds: bool


def cotlar_stein_bound_audit(vectors, tol: float = ASSERT_TOL) -> CotlarSteinAudit:
    """Compare ``lambda_max(sum_i |psi_i><psi_i|)`` against ``1 + (n-1) delta``.

    ``vectors`` holds one unit vector per row.
    """
    v = np.asarray(vectors, dtype=complex)
    if v.ndim != 2 or v.shape[0] == 0:
        raise DimensionError("need a non-empty 2-d array of row vectors")
    norms = np.linalg.norm(v, axis=1)
    if np.max(np.abs(norms - 1.0)) > CONSTRUCTION_TOL:
        raise ValueError("all vectors must have unit norm")
    n, dim = v.shape
    delta = max_pairwise_overlap(v)
    # the nonzero spectrum of sum |psi><psi| equals that of the n x n Gram matrix
    if n <= dim:
        lam = lambda_max(v.conj() @ v.T)
    else:
        lam = lambda_max(v.T @ v.conj())
    bound = 1.0 + (n - 1) * delta
    return CotlarSteinAudit(lam, bound, bool(lam <= bound + tol))


# -- random instances -------------------------------------------------------

def random_state_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random unit vector in C^d."""
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return z / np.linalg.norm(z)


def random_density_matrix(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Ginibre) measure."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
