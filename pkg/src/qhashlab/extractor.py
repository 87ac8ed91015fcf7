"""Seeded extractors audited against classical and quantum side information.

All errors use the unhalved l1 / trace norm, so they lie in [0, 2].  By
default the seed is part of the output (strong extractor); ``strong=False``
traces it out.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import numerics as nx
from .decomposition import (conversion_lower_bound, conversion_lower_bound_additive,
                            min_conversion_error)
from .errors import DimensionError, InfeasibleParameters
from .fingerprint import FingerprintScheme
from .states import CqState, JointDistribution, guess_prob_classical, guess_prob_quantum

MAX_EXTRACTOR_BITS = 12
MAX_TABLE_ENTRIES = 2**22
MAX_FLAT_SOURCES = 200_000


@dataclass(frozen=True)
class SeededExtractor:
    """``Ext: {0,1}^n x {0,1}^d -> {0,1}^m`` with the output table built on first use."""

    n: int
    d: int
    m: int
    fn: Callable[[int, int], int] = field(repr=False)
    family: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if min(self.n, self.d, self.m) < 0:
            raise ValueError("bit lengths must be nonnegative")

    def __call__(self, x: int, s: int) -> int:
        return self.fn(x, s)

    def table(self) -> np.ndarray:
        """Outputs as a ``(2^n, 2^d)`` integer array."""
        if "table" not in self._cache:
            if 2 ** (self.n + self.d) > MAX_TABLE_ENTRIES:
                raise DimensionError(f"2^(n+d) = 2^{self.n + self.d} table entries is beyond desk scale")
            t = np.array([[self.fn(x, s) for s in range(2**self.d)] for x in range(2**self.n)],
                         dtype=np.int64)
            if t.size and (t.min() < 0 or t.max() >= 2**self.m):
                raise ValueError("extractor output out of range")
            t.setflags(write=False)
            self._cache["table"] = t
        return self._cache["table"]


def _parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    out = np.zeros_like(v)
    while np.any(v):
        out ^= v & 1
        v >>= 1
    return out


def build_ip_extractor(n: int, m: int) -> SeededExtractor:
    """Linear extractor ``Ext(x, S) = S x`` over GF(2) with an m x n seed matrix (d = n m).

    Seed row r is ``(s >> (r n)) & (2^n - 1)`` and gives output bit r, counted
    from the most significant end.
    """
    if not 1 <= m <= n <= MAX_EXTRACTOR_BITS:
        raise ValueError(f"need 1 <= m <= n <= {MAX_EXTRACTOR_BITS}, got n={n}, m={m}")
    mask = 2**n - 1

    def fn(x: int, s: int) -> int:
        out = 0
        for r in range(m):
            row = (s >> (r * n)) & mask
            out = (out << 1) | (bin(row & x).count("1") & 1)
        return out

    e = SeededExtractor(n, n * m, m, fn, family=f"ip(n={n},m={m})")
    if 2 ** (n + n * m) <= MAX_TABLE_ENTRIES:
        # vectorized fill of the same map
        x = np.arange(2**n, dtype=np.int64)[:, None]
        s = np.arange(2 ** (n * m), dtype=np.int64)[None, :]
        t = np.zeros((2**n, 2 ** (n * m)), dtype=np.int64)
        for r in range(m):
            t = (t << 1) | _parity(((s >> (r * n)) & mask) & x)
        t.setflags(write=False)
        e._cache["table"] = t
    return e


def _check_source(e: SeededExtractor, n_rows: int) -> None:
    if n_rows != 2**e.n:
        raise DimensionError(f"source has {n_rows} values, extractor expects {2**e.n}")


def output_distribution(e: SeededExtractor, j: JointDistribution) -> np.ndarray:
    """``P(z, s, y) = 2^{-d} sum_x p(x, y) [Ext(x, s) = z]`` as a ``(2^m, 2^d, |Y|)`` array."""
    p = j.table
    _check_source(e, p.shape[0])
    tab = e.table()
    Z, S = 2**e.m, 2**e.d
    flat = (tab * S + np.arange(S)[None, :]).ravel()
    out = np.empty((Z * S, p.shape[1]))
    for y in range(p.shape[1]):
        out[:, y] = np.bincount(flat, weights=np.repeat(p[:, y], S), minlength=Z * S)
    return out.reshape(Z, S, p.shape[1]) / S


def classical_proof_error(e: SeededExtractor, j: JointDistribution, strong: bool = True) -> float:
    """``|| U_m (x) [U_d] (x) P_Y - P_{Ext(X, S) [S] Y} ||_1`` (unhalved)."""
    out = output_distribution(e, j)
    Z, S = 2**e.m, 2**e.d
    py = j.marginal_y()
    if strong:
        ideal = np.broadcast_to(py / (Z * S), out.shape)
        return float(np.abs(out - ideal).sum())
    return float(np.abs(out.sum(axis=1) - py[None, :] / Z).sum())


def quantum_proof_error(e: SeededExtractor, rho: CqState, strong: bool = True) -> float:
    """``|| U_m (x) [U_d] (x) rho_E - (Ext (x) I)(rho_XE) ||_tr`` (unhalved), block by block."""
    blocks = np.asarray(rho.blocks)
    _check_source(e, blocks.shape[0])
    tab = e.table()
    Z, S = 2**e.m, 2**e.d
    D = rho.dim
    flat_blocks = blocks.reshape(blocks.shape[0], D * D)
    rho_e = rho.side_state()
    if strong:
        sums = np.zeros((Z * S, D * D), dtype=complex)
        np.add.at(sums, (tab * S + np.arange(S)[None, :]).ravel(),
                  np.repeat(flat_blocks, S, axis=0))
        diff = sums.reshape(Z * S, D, D) / S - rho_e[None] / (Z * S)
    else:
        sums = np.zeros((Z, D * D), dtype=complex)
        np.add.at(sums, tab.ravel(), np.repeat(flat_blocks, S, axis=0) / S)
        diff = sums.reshape(Z, D, D) - rho_e[None] / Z
    diff = (diff + diff.conj().transpose(0, 2, 1)) / 2
    return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def plain_extractor_error(e: SeededExtractor, source, strong: bool = True) -> float:
    """Error on a source without side information (a 1-d distribution over x)."""
    p = np.asarray(source, dtype=float)
    return classical_proof_error(e, JointDistribution(p[:, None]), strong)


def fixed_seed_error(e: SeededExtractor, source, seed: int) -> float:
    """``|| U_m - Ext(X, seed) ||_1`` for one fixed seed value."""
    p = np.asarray(source, dtype=float)
    _check_source(e, p.shape[0])
    out = np.bincount(e.table()[:, seed], weights=p, minlength=2**e.m)
    return float(np.abs(out - 2.0**-e.m).sum())


def flat_source(n: int, support) -> np.ndarray:
    p = np.zeros(2**n)
    support = list(support)
    p[support] = 1.0 / len(support)
    return p


def worst_flat_error(e: SeededExtractor, k: int, strong: bool = True) -> tuple[float, tuple]:
    """Worst error over every flat source of min-entropy k, by exhaustive enumeration.

    Flat sources are the extreme points of the min-entropy >= k sources, and
    the error is convex in the source, so this is the extractor's error at k.
    Returns ``(error, worst_support)``.
    """
    N, K = 2**e.n, 2**k
    if not 0 <= k <= e.n:
        raise ValueError(f"min-entropy {k} outside [0, {e.n}]")
    if math.comb(N, K) > MAX_FLAT_SOURCES:
        raise InfeasibleParameters(f"C({N}, {K}) flat sources is too many to enumerate")
    best, arg = -1.0, ()
    for support in itertools.combinations(range(N), K):
        err = plain_extractor_error(e, flat_source(e.n, support), strong)
        if err > best:
            best, arg = err, support
    return best, arg


def random_source_with_guess_bound(rng: np.random.Generator, n: int, p_max: float,
                                   n_side: int | None = None) -> JointDistribution:
    """Random joint (X, Y) with ``p_g(X|Y) <= p_max``.

    Each side value y gets a posterior that is flat on a random support of size
    at least ``1 / p_max``; the conditional guessing probability is then the
    weighted average of ``1 / |support_y|``.
    """
    N = 2**n
    need = math.ceil(1.0 / p_max - 1e-12)
    if need > N:
        raise InfeasibleParameters(f"p_g(X|Y) <= {p_max} needs more than {N} values")
    ny = int(rng.integers(1, 5)) if n_side is None else n_side
    py = rng.dirichlet(np.ones(ny))
    t = np.zeros((N, ny))
    for y in range(ny):
        size = int(rng.integers(need, N + 1))
        support = rng.choice(N, size=size, replace=False)
        t[support, y] = py[y] / size
    return JointDistribution(t / t.sum())


@dataclass
class CpextCheck:
    k: int
    epsilon: float
    plain_error: float
    trials: int
    worst_classical_error: float
    holds: bool


def cpext_spot_check(e: SeededExtractor, k: int, epsilon: float | None = None,
                     rng: np.random.Generator | None = None, trials: int = 200,
                     tol: float = nx.ASSERT_TOL) -> CpextCheck:
    """A (k, eps) extractor should have error <= 2 eps on sources with ``p_g(X|Y) <= eps 2^{-k}``.

    Errors here are statistical distances (half the l1 norm).  ``epsilon``
    defaults to the extractor's exact error at k, raised to ``2^{k-n}`` when
    needed so that such sources exist.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    plain = worst_flat_error(e, k)[0] / 2
    eps = max(plain, 2.0 ** (k - e.n)) if epsilon is None else epsilon
    if eps < plain - tol:
        raise ValueError(f"epsilon {eps} is below the extractor's error {plain} at k={k}")
    worst = 0.0
    for _ in range(trials):
        j = random_source_with_guess_bound(rng, e.n, eps * 2.0**-k)
        worst = max(worst, classical_proof_error(e, j) / 2)
    return CpextCheck(k, eps, plain, trials, worst, bool(worst <= 2 * eps + tol))


@dataclass
class ExtractorAuditReport:
    worst_error_classical: float
    error_quantum: float
    k_claimed: float
    family_tag: str
    rows: list = field(default_factory=list)

    CSV_COLUMNS = ("source", "k", "classical_error", "quantum_error")

    def to_dict(self) -> dict:
        return {"worst_error_classical": self.worst_error_classical,
                "error_quantum": self.error_quantum, "k_claimed": self.k_claimed,
                "family_tag": self.family_tag, "rows": list(self.rows)}


def audit_extractor(e: SeededExtractor, sources: dict, strong: bool = True) -> ExtractorAuditReport:
    """Evaluate ``e`` on named sources (``JointDistribution`` or ``CqState``).

    Classical sources are also run through the diagonal embedding so both
    columns are filled; quantum sources report the certified lower end of
    ``-log2 p_g(X|E)`` as k.
    """
    rows = []
    for name, src in sources.items():
        if isinstance(src, JointDistribution):
            k = -math.log2(guess_prob_classical(src))
            c = classical_proof_error(e, src, strong)
            q = quantum_proof_error(e, CqState.from_joint(src), strong)
        elif isinstance(src, CqState):
            k = -math.log2(guess_prob_quantum(src).upper)
            c = float("nan")
            q = quantum_proof_error(e, src, strong)
        else:
            raise TypeError(f"unsupported source type {type(src).__name__}")
        rows.append({"source": name, "k": k, "classical_error": c, "quantum_error": q})
    cl = [r["classical_error"] for r in rows if not math.isnan(r["classical_error"])]
    return ExtractorAuditReport(
        worst_error_classical=max(cl, default=float("nan")),
        error_quantum=max((r["quantum_error"] for r in rows), default=float("nan")),
        k_claimed=min((r["k"] for r in rows), default=float("nan")),
        family_tag=e.family, rows=rows,
    )


# -- CQ vs CC separation witness ---------------------------------------------

def fingerprint_cq_state(scheme: FingerprintScheme) -> CqState:
    """``2^{-n} sum_x |x><x| (x) phi_x``."""
    N = scheme.n_messages
    return CqState.from_pure(np.full(N, 1.0 / N), scheme.states())


@dataclass
class TopsepWitness:
    n: int
    delta: float
    epsilon: float
    cc_k: int
    p_guess_lower: float
    p_guess_upper: float
    cq_k_certified: float
    cc_error_lower_bound: float
    conversion_lower: float
    separated: bool

    @property
    def margin(self) -> float:
        """How far the conversion bound at ``epsilon`` sits above the CC threshold ``2^{-cc_k}``."""
        return self.conversion_lower - 2.0**-self.cc_k

    def to_dict(self) -> dict:
        return {
            "n": self.n, "delta": self.delta, "epsilon": self.epsilon, "cc_k": self.cc_k,
            "p_guess_lower": self.p_guess_lower, "p_guess_upper": self.p_guess_upper,
            "cq_k_certified": self.cq_k_certified,
            "cc_error_lower_bound": self.cc_error_lower_bound,
            "conversion_lower": self.conversion_lower, "separated": self.separated,
            "margin": self.margin,
        }


def topsep_witness(scheme: FingerprintScheme, cc_k: int = 2, epsilon: float = 0.98,
                   gap_tol: float = 1e-9) -> TopsepWitness:
    """Certify that the fingerprint cq state has high quantum min-entropy yet is far from CC(cc_k).

    ``cq_k_certified`` is ``-log2`` of the dual bound on ``p_g(X|E)``.  Any
    classical source with ``p_g(X|Y) <= 2^{-cc_k}`` reproduces the state with
    trace-norm error at least ``2 (1 - delta) (1 - 2^{-cc_k})``.
    """
    rho = fingerprint_cq_state(scheme)
    g = guess_prob_quantum(rho, gap_tol=gap_tol)
    delta = scheme.delta_measured
    threshold = 2.0**-cc_k
    low = conversion_lower_bound(delta, epsilon)
    return TopsepWitness(
        n=scheme.n_bits, delta=delta, epsilon=epsilon, cc_k=cc_k,
        p_guess_lower=g.lower, p_guess_upper=g.upper,
        cq_k_certified=-math.log2(g.upper),
        cc_error_lower_bound=float(min_conversion_error(delta, threshold)),
        conversion_lower=float(low), separated=bool(low > threshold),
    )


def topsep_exact_point(delta=Fraction(1, 50), epsilon=Fraction(49, 50), cc_k: int = 2) -> dict:
    """The separation at a fixed (delta, eps) in exact rational arithmetic."""
    delta, epsilon = Fraction(delta), Fraction(epsilon)
    threshold = Fraction(1, 2**cc_k)
    mult = conversion_lower_bound(delta, epsilon)
    add = conversion_lower_bound_additive(delta, epsilon)
    return {
        "delta": delta, "epsilon": epsilon, "threshold": threshold,
        "conversion_lower": mult, "conversion_lower_additive": add,
        "cc_error_lower_bound": min_conversion_error(delta, threshold),
        "separated": bool(add > threshold and mult > threshold),
    }
