"""Forgery attacks on fingerprint verification under classical leakage.

The verifier holds the message x and measures the submitted m-qubit state
with ``phi_x``; a forger who saw leakage y submits ``mu_y``.  The passing
probability ``e_s = E_{x,y} <phi_x| mu_y |phi_x>`` is linear in each
``mu_y`` separately, so the best forgery for a given y is the top eigenvector
of ``K_y = sum_x p(x, y) phi_x`` and ``e_s* = sum_y lambda_max(K_y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numerics as nx
from .errors import AuditViolation, DimensionError
from .fingerprint import FingerprintScheme
from .states import JointDistribution, as_density_matrix, guess_prob_classical

LEAK_KINDS = ("prefix", "deterministic", "stochastic")


@dataclass(frozen=True)
class LeakageModel:
    """Classical side channel from n-bit messages to a finite alphabet Y.

    ``prefix`` leaks the first k message bits; ``deterministic`` applies a map
    ``x -> y`` given as an integer array; ``stochastic`` uses a row-stochastic
    table ``p(y|x)``.
    """

    kind: str
    k: int | None = None
    mapping: np.ndarray | None = field(default=None, repr=False)
    channel: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in LEAK_KINDS:
            raise ValueError(f"unknown leakage kind {self.kind!r}")
        if self.kind == "prefix" and (self.k is None or self.k < 0):
            raise ValueError("prefix leakage needs k >= 0")
        if self.kind == "deterministic":
            m = np.asarray(self.mapping, dtype=np.int64)
            if m.ndim != 1 or np.any(m < 0):
                raise ValueError("deterministic leakage needs a 1-d array of nonnegative outputs")
            object.__setattr__(self, "mapping", m)
        if self.kind == "stochastic":
            c = np.asarray(self.channel, dtype=float)
            if c.ndim != 2 or np.any(c < 0) or np.max(np.abs(c.sum(axis=1) - 1)) > 1e-12:
                raise ValueError("stochastic leakage needs a row-stochastic p(y|x) table")
            object.__setattr__(self, "channel", c)

    def channel_matrix(self, n_bits: int) -> np.ndarray:
        """``p(y|x)`` as a ``(2^n, |Y|)`` array."""
        N = 2**n_bits
        if self.kind == "prefix":
            if self.k > n_bits:
                raise ValueError(f"cannot leak {self.k} prefix bits of an {n_bits}-bit message")
            y = np.arange(N) >> (n_bits - self.k)
            c = np.zeros((N, 2**self.k))
            c[np.arange(N), y] = 1.0
            return c
        if self.kind == "deterministic":
            if self.mapping.shape[0] != N:
                raise DimensionError(f"leak map covers {self.mapping.shape[0]} messages, expected {N}")
            c = np.zeros((N, int(self.mapping.max()) + 1))
            c[np.arange(N), self.mapping] = 1.0
            return c
        if self.channel.shape[0] != N:
            raise DimensionError(f"leak table covers {self.channel.shape[0]} messages, expected {N}")
        return self.channel

    def joint(self, n_bits: int, prior=None) -> JointDistribution:
        """``p(x, y) = prior(x) p(y|x)``; the prior defaults to uniform."""
        N = 2**n_bits
        q = np.full(N, 1.0 / N) if prior is None else np.asarray(prior, dtype=float)
        if q.shape != (N,):
            raise DimensionError(f"prior has shape {q.shape}, expected ({N},)")
        return JointDistribution(q[:, None] * self.channel_matrix(n_bits))

    def then(self, f) -> "LeakageModel":
        """Post-process the leaked value by ``y -> f[y]`` (a coarser leak)."""
        f = np.asarray(f, dtype=np.int64)
        if self.kind == "stochastic":
            out = np.zeros((self.channel.shape[0], int(f.max()) + 1))
            for y, fy in enumerate(f):
                out[:, fy] += self.channel[:, y]
            return LeakageModel("stochastic", channel=out)
        if self.kind == "deterministic":
            return LeakageModel("deterministic", mapping=f[self.mapping])
        raise ValueError("post-process a prefix leak via deterministic_leak first")

    def describe(self) -> str:
        if self.kind == "prefix":
            return f"prefix:{self.k}"
        return self.kind


def prefix_leak(k: int) -> LeakageModel:
    return LeakageModel("prefix", k=k)


def deterministic_leak(mapping) -> LeakageModel:
    return LeakageModel("deterministic", mapping=mapping)


def stochastic_leak(channel) -> LeakageModel:
    return LeakageModel("stochastic", channel=channel)


def no_leak() -> LeakageModel:
    return LeakageModel("prefix", k=0)


def full_leak(n_bits: int) -> LeakageModel:
    return LeakageModel("prefix", k=n_bits)


def parse_leak(spec: str, n_bits: int) -> LeakageModel:
    """Parse ``none``, ``full`` or ``prefix:K``."""
    spec = spec.strip().lower()
    if spec == "none":
        return no_leak()
    if spec == "full":
        return full_leak(n_bits)
    kind, _, arg = spec.partition(":")
    if kind == "prefix" and arg.isdigit():
        k = int(arg)
        if k > n_bits:
            raise ValueError(f"cannot leak {k} prefix bits of an {n_bits}-bit message")
        return prefix_leak(k)
    raise ValueError(f"unrecognized leakage spec {spec!r}; use none, full or prefix:K")


@dataclass(frozen=True)
class ForgeryStrategy:
    """Per-y forgery states, held either as pure vectors ``(|Y|, d)`` or density matrices ``(|Y|, d, d)``."""

    vectors: np.ndarray | None = field(default=None, repr=False)
    states: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.vectors is None) == (self.states is None):
            raise ValueError("give exactly one of vectors or states")
        if self.vectors is not None:
            v = np.asarray(self.vectors, dtype=complex)
            if np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) > nx.CONSTRUCTION_TOL:
                raise ValueError("forgery vectors must be unit norm")
            object.__setattr__(self, "vectors", v)
        else:
            s = np.stack([as_density_matrix(m, normalized=True) for m in self.states])
            object.__setattr__(self, "states", s)

    @property
    def n_outcomes(self) -> int:
        arr = self.vectors if self.vectors is not None else self.states
        return arr.shape[0]

    @property
    def dim(self) -> int:
        arr = self.vectors if self.vectors is not None else self.states
        return arr.shape[1]

    def mu(self, y: int) -> np.ndarray:
        if self.vectors is not None:
            return np.outer(self.vectors[y], self.vectors[y].conj())
        return self.states[y]

    def fidelities(self, y: int, phis: np.ndarray) -> np.ndarray:
        """``<phi|mu_y|phi>`` for each row of ``phis``."""
        if self.vectors is not None:
            return np.abs(phis.conj() @ self.vectors[y]) ** 2
        return np.einsum("xi,ij,xj->x", phis.conj(), self.states[y], phis).real

    @classmethod
    def constant(cls, state, n_outcomes: int) -> "ForgeryStrategy":
        s = np.asarray(state, dtype=complex)
        if s.ndim == 1:
            return cls(vectors=np.tile(s, (n_outcomes, 1)))
        return cls(states=np.tile(s, (n_outcomes, 1, 1)))


def passing_probability(scheme: FingerprintScheme, leak: LeakageModel,
                        forgery: ForgeryStrategy, prior=None) -> float:
    """Exact ``e_s = sum_{x,y} p(x, y) <phi_x| mu_y |phi_x>``."""
    j = leak.joint(scheme.n_bits, prior)
    t = j.table
    if forgery.dim != scheme.dim:
        raise DimensionError(f"forgery dim {forgery.dim} does not match scheme dim {scheme.dim}")
    if forgery.n_outcomes < t.shape[1]:
        raise DimensionError("forgery does not cover every leakage outcome")
    phis = scheme.states()
    total = 0.0
    for y in range(t.shape[1]):
        xs = np.flatnonzero(t[:, y])
        if xs.size:
            total += float(t[xs, y] @ forgery.fidelities(y, phis[xs]))
    return total


def _top_eigen(weights: np.ndarray, gram_sub: np.ndarray, phis_sub: np.ndarray | None):
    """``lambda_max`` of ``sum_x w_x |phi_x><phi_x|`` via the weighted Gram matrix.

    The nonzero spectrum of ``A^dag A`` (A = diag(sqrt w) Phi) equals that of
    ``A A^dag``; the eigenvector lifts as ``A^dag u / sqrt(lambda)``.
    """
    r = np.sqrt(weights)
    k = r[:, None] * gram_sub * r[None, :]
    # sqrt(w)^2 can miss w by an ulp; keep the diagonal exact
    idx = np.arange(k.shape[0])
    k[idx, idx] = weights * gram_sub[idx, idx]
    lam, u = nx.eig_max(k)
    if phis_sub is None:
        return lam, None
    v = phis_sub.conj().T @ (r * u)
    return lam, v / np.linalg.norm(v)


def optimal_forgery(scheme: FingerprintScheme, leak: LeakageModel, prior=None,
                    with_states: bool = True) -> tuple[ForgeryStrategy | None, float]:
    """Best forgery and its passing probability ``e_s*``.

    For each y the forger submits the top eigenvector of
    ``sum_x p(x, y) phi_x``; because ``e_s`` is a sum of terms each linear in
    one ``mu_y``, this is optimal over all forgeries (mixed or not).
    """
    t = leak.joint(scheme.n_bits, prior).table
    gram = scheme.gram()
    phis = scheme.states() if with_states else None
    vectors = np.zeros((t.shape[1], scheme.dim), dtype=complex)
    vectors[:, 0] = 1.0
    e_star = 0.0
    for y in range(t.shape[1]):
        xs = np.flatnonzero(t[:, y])
        if not xs.size:
            continue
        lam, v = _top_eigen(t[xs, y], gram[np.ix_(xs, xs)],
                            None if phis is None else phis[xs])
        e_star += lam
        if v is not None:
            vectors[y] = v
    strategy = ForgeryStrategy(vectors=vectors) if with_states else None
    return strategy, float(e_star)


def baseline_strategies(scheme: FingerprintScheme, leak: LeakageModel, prior=None) -> dict[str, float]:
    """Passing probabilities of the simple cheating strategies.

    ``guess_then_hash``: submit ``phi`` of the most likely message given y.
    ``fixed_fingerprint``: ignore y and submit the single best ``phi_x0``.
    ``fixed_state``: ignore y and submit the best state overall (top eigenvector
    of ``E_x phi_x``).
    """
    t = leak.joint(scheme.n_bits, prior).table
    g2 = scheme.gram() ** 2
    guesses = t.argmax(axis=0)
    guess_then_hash = float(np.einsum("xy,xy->", t, g2[:, guesses]))
    q = t.sum(axis=1)
    fixed_fp = float((q @ g2).max())
    xs = np.flatnonzero(q)
    fixed_state, _ = _top_eigen(q[xs], scheme.gram()[np.ix_(xs, xs)], None)
    return {
        "guess_then_hash": guess_then_hash,
        "fixed_fingerprint": fixed_fp,
        "fixed_state": float(fixed_state),
    }


def separation_bound(p_guess: float, delta: float) -> float:
    """``(1 - delta) p_g + delta``."""
    return (1.0 - delta) * p_guess + delta


@dataclass
class AttackReport:
    n: int
    m: int
    delta: float
    k_leak: float
    p_g: float
    e_s_star: float
    separation_bound: float
    lower_bounds: dict
    holds: bool
    leak: str = ""
    construction: str = ""

    @property
    def margin(self) -> float:
        return self.separation_bound - self.e_s_star

    CSV_COLUMNS = ("n", "m", "delta", "k_leak", "p_g", "e_s_star", "bound", "margin")

    def csv_row(self) -> dict:
        return {"n": self.n, "m": self.m, "delta": self.delta, "k_leak": self.k_leak,
                "p_g": self.p_g, "e_s_star": self.e_s_star, "bound": self.separation_bound,
                "margin": self.margin}

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "delta": self.delta, "k_leak": self.k_leak,
            "p_g": self.p_g, "e_s_star": self.e_s_star,
            "separation_bound": self.separation_bound, "margin": self.margin,
            "lower_bounds": dict(self.lower_bounds), "holds": self.holds,
            "leak": self.leak, "construction": self.construction,
        }


def separation_audit(scheme: FingerprintScheme, leak: LeakageModel, prior=None,
                     tol: float = nx.ASSERT_TOL, strict: bool = True) -> AttackReport:
    """Check ``max(baselines) <= e_s* <= (1 - delta) p_g + delta`` on one instance.

    Raises :class:`AuditViolation` when the sandwich fails and ``strict`` is set.
    """
    j = leak.joint(scheme.n_bits, prior)
    pg = guess_prob_classical(j)
    delta = scheme.delta_measured
    _, e_star = optimal_forgery(scheme, leak, prior, with_states=False)
    base = baseline_strategies(scheme, leak, prior)
    bound = separation_bound(pg, delta)
    holds = (e_star <= bound + tol
             and e_star >= max(base.values()) - tol
             and e_star >= pg - tol)
    report = AttackReport(
        n=scheme.n_bits, m=scheme.m_qubits, delta=delta,
        k_leak=scheme.n_bits + math.log2(pg), p_g=pg, e_s_star=e_star,
        separation_bound=bound, lower_bounds=base, holds=bool(holds),
        leak=leak.describe(), construction=scheme.construction,
    )
    if strict and not holds:
        raise AuditViolation(f"separation audit failed: e_s*={e_star}, bound={bound}, "
                             f"baselines={base}", report)
    return report


# -- classical hashes ---------------------------------------------------------

def classical_hash_attack(tags, leak: LeakageModel, n_bits: int, prior=None) -> float:
    """Optimal forging probability ``sum_y max_t sum_{x: h(x)=t} p(x, y)`` for a classical tag."""
    if callable(tags):
        tags = [tags(x) for x in range(2**n_bits)]
    tags = np.asarray(tags, dtype=np.int64)
    t = leak.joint(n_bits, prior).table
    if tags.shape != (t.shape[0],):
        raise DimensionError("need one tag per message")
    per_tag = np.zeros((int(tags.max()) + 1, t.shape[1]))
    np.add.at(per_tag, tags, t)
    return float(per_tag.max(axis=0).sum())


def truncation_hash(n_bits: int, m_bits: int) -> np.ndarray:
    """Tags ``h(x)`` = first m bits of x."""
    return np.arange(2**n_bits) >> (n_bits - m_bits)


def truncation_prefix_guess(n_bits: int, m_bits: int, k_bits: int) -> float:
    """Success of the forger who learns the first k tag bits and guesses the rest uniformly.

    Evaluated by enumerating every message and every guess of the missing bits.
    """
    if not 0 <= k_bits <= m_bits <= n_bits:
        raise ValueError("need 0 <= k <= m <= n")
    tags = truncation_hash(n_bits, m_bits)
    free = m_bits - k_bits
    guesses = np.arange(2**free)
    hits = 0
    for tag in tags:
        known = (tag >> free) << free
        hits += np.count_nonzero((known | guesses) == tag)
    return hits / (2**n_bits * 2**free)


def random_instance(rng: np.random.Generator, max_n: int = 8,
                    builder: Callable | None = None) -> tuple[FingerprintScheme, LeakageModel, np.ndarray | None]:
    """Random (scheme, leak, prior) triple for property sweeps."""
    from .fingerprint import build_hadamard, build_random_linear

    n = int(rng.integers(1, max_n + 1))
    if builder is not None:
        scheme = builder(n, rng)
    elif rng.random() < 0.3:
        scheme = build_hadamard(n)
    else:
        M = int(2 ** rng.integers(1, n + 2))
        scheme = build_random_linear(n, M, 1.0, int(rng.integers(2**31)))
    N = 2**n
    roll = rng.random()
    if roll < 0.4:
        leak = prefix_leak(int(rng.integers(0, n + 1)))
    elif roll < 0.7:
        leak = deterministic_leak(rng.integers(0, int(rng.integers(1, N + 1)), size=N))
    else:
        ny = int(rng.integers(1, 9))
        leak = stochastic_leak(rng.dirichlet(np.full(ny, 0.5), size=N))
    prior = None if rng.random() < 0.6 else rng.dirichlet(np.ones(N))
    return scheme, leak, prior
