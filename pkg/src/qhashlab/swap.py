"""Fingerprint verification by pairwise SWAP tests on t-copy advice.

The verifier holds ``rho_x = phi_x^{(x) t}`` and the prover submits a t-slot
state ``mu``.  Slot i of the advice is SWAP-tested against slot i of ``mu``
and the verifier accepts when all t tests accept, i.e. it measures
``P = prod_i (I + SWAP_i) / 2``.  Expanding the product gives

    Tr[P (rho (x) mu)] = 2^{-t} sum_{T subset [t]} Tr[rho^T mu^T],

with ``rho^T``, ``mu^T`` the marginals on the slots in T.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import numerics as nx
from .attack import LeakageModel
from .errors import AuditViolation, DimensionError
from .fingerprint import FingerprintScheme
from .states import as_density_matrix

MAX_SWAP_QUBITS = 12
MAX_DIRECT_QUBITS = 10
METHODS = ("expansion", "direct", "factorized")


@dataclass(frozen=True)
class SwapScheme:
    """t copies of an m'-qubit fingerprint as verifier advice (k = m = t m')."""

    base: FingerprintScheme
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("need at least one copy")
        if self.t * self.base.m_qubits > MAX_SWAP_QUBITS:
            raise ValueError(f"t * m' = {self.t * self.base.m_qubits} qubits exceeds {MAX_SWAP_QUBITS}")

    @property
    def m_prime(self) -> int:
        return self.base.m_qubits

    @property
    def slot_dim(self) -> int:
        return self.base.dim

    @property
    def qubits(self) -> int:
        return self.t * self.m_prime

    @property
    def dim(self) -> int:
        return self.slot_dim**self.t

    def advice_vector(self, x: int) -> np.ndarray:
        return nx.tensor(*([self.base.state(x)] * self.t))

    def advice(self, x: int) -> np.ndarray:
        v = self.advice_vector(x)
        return np.outer(v, v.conj())

    def honest(self, x: int) -> np.ndarray:
        return self.advice(x)


def subsets(t: int):
    """All subsets of ``range(t)`` as sorted tuples, smallest first."""
    for r in range(t + 1):
        yield from itertools.combinations(range(t), r)


def _slot_permutation(d: int, n_slots: int, perm) -> np.ndarray:
    idx = np.arange(d**n_slots).reshape([d] * n_slots)
    return idx.transpose(perm).ravel()


def pairwise_swap_projector(d: int, t: int) -> np.ndarray:
    """``prod_i (I + SWAP_{i, t+i}) / 2`` on 2t slots of dimension d, as a dense matrix."""
    if 2 * t * math.log2(d) > MAX_DIRECT_QUBITS + 1e-9:
        raise DimensionError(f"dense projector on {2 * t} slots of dim {d} is too large")
    D = d ** (2 * t)
    p = np.eye(D, dtype=complex)
    for i in range(t):
        perm = list(range(2 * t))
        perm[i], perm[t + i] = perm[t + i], perm[i]
        s = np.eye(D, dtype=complex)[_slot_permutation(d, 2 * t, perm)]
        p = p @ (np.eye(D) + s) / 2
    return p


def _check_pair(rho, mu, d: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    D = d**t
    rho = as_density_matrix(rho)
    mu = as_density_matrix(mu)
    if rho.shape != (D, D) or mu.shape != (D, D):
        raise DimensionError(f"expected {t} slots of dim {d} ({D}x{D}); got {rho.shape} and {mu.shape}")
    return rho, mu


def subset_terms(rho, mu, d: int, t: int) -> dict[tuple, float]:
    """``Tr[rho^T mu^T]`` for every subset T of slots."""
    rho, mu = _check_pair(rho, mu, d, t)
    dims = [d] * t
    out = {}
    for T in subsets(t):
        if not T:
            out[T] = float(np.trace(rho).real * np.trace(mu).real)
            continue
        a = nx.partial_trace(rho, dims, T)
        b = nx.partial_trace(mu, dims, T)
        # Tr[SWAP (A (x) B)] = Tr[A B]
        out[T] = float(np.einsum("ij,ji->", a, b).real)
    return out


def pairwise_accept(rho, mu, d: int, t: int, method: str = "expansion") -> float:
    """Acceptance of slot-wise SWAP tests between advice ``rho`` and submission ``mu``."""
    if method == "expansion":
        terms = subset_terms(rho, mu, d, t)
        return sum(terms.values()) / 2**t
    if method == "direct":
        rho, mu = _check_pair(rho, mu, d, t)
        p = pairwise_swap_projector(d, t)
        return float(np.trace(p @ np.kron(rho, mu)).real)
    raise ValueError(f"method {method!r} needs pure product advice; use swap_accept_probability")


def swap_accept_probability(s: SwapScheme, x: int, mu, method: str = "expansion") -> float:
    """Probability that the verifier for message x accepts the t-slot state ``mu``.

    ``factorized`` uses that the advice is a pure product, so the acceptance
    operator seen by ``mu`` is ``((I + phi_x) / 2)^{(x) t}``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "factorized":
        mu = as_density_matrix(mu)
        if mu.shape != (s.dim, s.dim):
            raise DimensionError(f"forgery has shape {mu.shape}, expected ({s.dim}, {s.dim})")
        phi = s.base.state(x)
        local = (np.eye(s.slot_dim) + np.outer(phi, phi.conj())) / 2
        op = nx.tensor(*([local] * s.t))
        return float(np.einsum("ij,ji->", op, mu).real)
    return pairwise_accept(s.advice(x), mu, s.slot_dim, s.t, method)


def product_accept_probability(s: SwapScheme, x: int, nus) -> float:
    """Acceptance for a product forgery ``nu_1 (x) ... (x) nu_t``: ``prod_i (1 + Tr[phi_x nu_i]) / 2``."""
    if len(nus) != s.t:
        raise DimensionError(f"need {s.t} slot states, got {len(nus)}")
    phi = s.base.state(x)
    out = 1.0
    for nu in nus:
        nu = as_density_matrix(nu, normalized=True)
        out *= (1 + float((phi.conj() @ nu @ phi).real)) / 2
    return out


def exact_honest_acceptance(s: SwapScheme, x: int) -> Fraction:
    """Honest acceptance in exact arithmetic via the subset expansion.

    Works with the integer sign vector ``sigma_x = sqrt(M) phi_x`` so every
    term ``Tr[rho^T rho^T] = (<sigma_x|sigma_x> / M)^{2|T|}`` is rational.
    """
    sig = [1 - 2 * int(b) for b in s.base.encode(x)]
    overlap = Fraction(sum(v * v for v in sig), s.base.code_len)
    total = sum(math.comb(s.t, r) * overlap ** (2 * r) for r in range(s.t + 1))
    return Fraction(total, 2**s.t)


# -- adversarial audit --------------------------------------------------------

def _forgery_stack(forgery, n_outcomes: int, dim: int) -> np.ndarray:
    if callable(forgery):
        forgery = [forgery(y) for y in range(n_outcomes)]
    elif isinstance(forgery, dict):
        forgery = [forgery[y] for y in range(n_outcomes)]
    f = np.asarray(forgery, dtype=complex)
    if f.shape != (n_outcomes, dim, dim):
        raise DimensionError(f"forgery has shape {f.shape}, expected {(n_outcomes, dim, dim)}")
    return np.stack([as_density_matrix(m, normalized=True) for m in f])


@dataclass
class SwapAuditReport:
    t: int
    m_prime: int
    acceptance: float
    bound: float
    per_slot_terms: list[float]
    subset_terms: dict
    chain_holds: bool
    holds: bool

    @property
    def margin(self) -> float:
        return self.bound - self.acceptance

    def to_dict(self) -> dict:
        return {
            "t": self.t, "m_prime": self.m_prime, "acceptance": self.acceptance,
            "bound": self.bound, "margin": self.margin,
            "per_slot_terms": list(self.per_slot_terms),
            "subset_terms": {",".join(map(str, T)) or "-": v for T, v in self.subset_terms.items()},
            "chain_holds": self.chain_holds, "holds": self.holds,
        }


def swap_attack_audit(s: SwapScheme, leak: LeakageModel, forgery, prior=None,
                      tol: float = nx.ASSERT_TOL, strict: bool = True) -> SwapAuditReport:
    """Exact acceptance of a forgery ``y -> mu_y`` against ``1/2^t + max_i E Tr[mu_Y^i phi_X]``.

    Every nonempty subset term is also checked against the smallest slot term
    it contains.  Raises :class:`AuditViolation` on failure when ``strict``.
    """
    j = leak.joint(s.base.n_bits, prior).table
    mus = _forgery_stack(forgery, j.shape[1], s.dim)
    phis = s.base.states()
    dims = [s.slot_dim] * s.t

    terms = {T: 0.0 for T in subsets(s.t)}
    terms[()] = 1.0
    lifted = {}
    for T in terms:
        if T:
            r = len(T)
            lifted[T] = phis if r == 1 else np.stack([nx.tensor(*([p] * r)) for p in phis])
    for y in range(j.shape[1]):
        w = j[:, y]
        if not w.any():
            continue
        for T in terms:
            if not T:
                continue
            m_t = nx.partial_trace(mus[y], dims, T)
            v = lifted[T]
            fid = np.einsum("xi,ij,xj->x", v.conj(), m_t, v).real
            terms[T] += float(w @ fid)

    acceptance = sum(terms.values()) / 2**s.t
    per_slot = [terms[(i,)] for i in range(s.t)]
    bound = 2.0**-s.t + max(per_slot)
    chain = all(v <= min(per_slot[i] for i in T) + tol for T, v in terms.items() if T)
    holds = bool(chain and acceptance <= bound + tol)
    report = SwapAuditReport(s.t, s.m_prime, acceptance, bound, per_slot, terms, bool(chain), holds)
    if strict and not holds:
        raise AuditViolation(f"SWAP audit failed: acceptance={acceptance}, bound={bound}", report)
    return report


def random_forgery(rng: np.random.Generator, s: SwapScheme, n_outcomes: int,
                   kind: str = "entangled") -> np.ndarray:
    """Random per-outcome forgeries: ``product`` of slot states, ``entangled`` global pure states, or ``mixed``."""
    out = np.empty((n_outcomes, s.dim, s.dim), dtype=complex)
    for y in range(n_outcomes):
        if kind == "product":
            out[y] = nx.tensor(*[nx.random_density_matrix(rng, s.slot_dim, int(rng.integers(1, s.slot_dim + 1)))
                                 for _ in range(s.t)])
        elif kind == "entangled":
            v = nx.random_state_vector(rng, s.dim)
            out[y] = np.outer(v, v.conj())
        elif kind == "mixed":
            out[y] = nx.random_density_matrix(rng, s.dim, int(rng.integers(1, s.dim + 1)))
        else:
            raise ValueError(f"unknown forgery kind {kind!r}")
    return out


def two_proof_identities(rng: np.random.Generator | None = None, trials: int = 100,
                         max_slot_qubits: int = 1, max_t: int = 2) -> dict:
    """Check the subset expansion against the dense projector, and ``Tr[SWAP(rho (x) sigma)] = Tr[rho sigma]``.

    Returns the worst absolute deviation of each identity over ``trials`` random draws.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst_expansion = 0.0
    worst_swap = 0.0
    for _ in range(trials):
        t = int(rng.integers(1, max_t + 1))
        d = 2 ** int(rng.integers(1, max_slot_qubits + 1))
        D = d**t
        rho = nx.random_density_matrix(rng, D, int(rng.integers(1, D + 1)))
        mu = nx.random_density_matrix(rng, D, int(rng.integers(1, D + 1)))
        a = pairwise_accept(rho, mu, d, t, "expansion")
        b = pairwise_accept(rho, mu, d, t, "direct")
        worst_expansion = max(worst_expansion, abs(a - b))

        r = nx.random_density_matrix(rng, d)
        sg = nx.random_density_matrix(rng, d)
        lhs = np.trace(nx.swap_operator(d) @ np.kron(r, sg)).real
        rhs = np.trace(r @ sg).real
        worst_swap = max(worst_swap, float(abs(lhs - rhs)))
    return {"trials": trials, "expansion_vs_direct": worst_expansion, "swap_trace_identity": worst_swap}
