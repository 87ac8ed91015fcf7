"""Quantum fingerprints built from binary codes.

A code ``E: {0,1}^n -> {0,1}^M`` gives the phase states

    |phi_x> = M^{-1/2} sum_i (-1)^{E(x)_i} |i>,

embedded in ``m = ceil(log2 M)`` qubits.  Two fingerprints overlap by
``1 - 2 d_H(E(x), E(x')) / M``, so the collision parameter delta is read
off the code's distance profile.

Messages are indexed by integers whose big-endian bit strings are the
messages: ``x = 1`` with ``n = 2`` is the string ``01``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import InfeasibleParameters

MAX_MESSAGE_BITS = 12
MAX_CODE_LEN = 4096
RETRY_CAP = 100

CONSTRUCTIONS = ("hadamard", "random_linear", "external")


def message_bits(n: int) -> np.ndarray:
    """All n-bit messages as rows of a ``(2^n, n)`` 0/1 array, big-endian."""
    x = np.arange(2**n)[:, None]
    shifts = np.arange(n - 1, -1, -1)[None, :]
    return ((x >> shifts) & 1).astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def linear_codewords(generator: np.ndarray) -> np.ndarray:
    """Codeword table ``x G mod 2`` for every message x, by XOR doubling."""
    g = np.asarray(generator, dtype=np.uint8)
    n, m = g.shape
    words = np.zeros((1, m), dtype=np.uint8)
    # the last row is the least significant message bit
    for r in reversed(range(n)):
        words = np.concatenate([words, words ^ g[r]], axis=0)
    return words


def hadamard_generator(n: int) -> np.ndarray:
    """Generator of the length-2^n Hadamard code: ``E(x)_i = <x, i> mod 2``."""
    return message_bits(n).T.copy()


@dataclass(frozen=True)
class FingerprintScheme:
    n_bits: int
    code_len: int
    codewords: np.ndarray = field(repr=False)
    construction: str
    generator: np.ndarray | None = field(default=None, repr=False)
    seed: int | None = None
    delta_measured: float = float("nan")

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.uint8)
        if cw.shape != (2**self.n_bits, self.code_len):
            raise ValueError(f"codeword table has shape {cw.shape}, "
                             f"expected {(2**self.n_bits, self.code_len)}")
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"unknown construction {self.construction!r}")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        if math.isnan(self.delta_measured):
            object.__setattr__(self, "delta_measured", delta_of(self))

    @property
    def m_qubits(self) -> int:
        return max(0, math.ceil(math.log2(self.code_len)))

    @property
    def dim(self) -> int:
        return 2**self.m_qubits

    @property
    def n_messages(self) -> int:
        return 2**self.n_bits

    @property
    def is_linear(self) -> bool:
        return self.generator is not None

    def encode(self, x: int) -> np.ndarray:
        return self.codewords[x]

    def signs(self, dtype=np.float64) -> np.ndarray:
        """``(-1)^{E(x)_i}`` as a ``(2^n, M)`` table."""
        return 1 - 2 * self.codewords.astype(dtype)

    def state(self, x: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[: self.code_len] = (1.0 - 2.0 * self.codewords[x]) / math.sqrt(self.code_len)
        return v

    def states(self) -> np.ndarray:
        """All fingerprints as rows of a ``(2^n, 2^m)`` array."""
        v = np.zeros((self.n_messages, self.dim), dtype=complex)
        v[:, : self.code_len] = self.signs() / math.sqrt(self.code_len)
        return v

    def gram(self) -> np.ndarray:
        """Exact overlap matrix ``<phi_x|phi_x'>`` (real for phase states)."""
        s = self.signs()
        return (s @ s.T) / self.code_len

    def to_dict(self) -> dict:
        out = {
            "n_bits": self.n_bits,
            "code_len": self.code_len,
            "m_qubits": self.m_qubits,
            "construction": self.construction,
            "seed": self.seed,
            "delta_measured": self.delta_measured,
        }
        if self.generator is not None:
            out["generator"] = [bits_to_str(row) for row in self.generator]
        else:
            out["codewords"] = [bits_to_str(row) for row in self.codewords]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FingerprintScheme":
        n, m = int(d["n_bits"]), int(d["code_len"])
        if "generator" in d:
            g = np.array([[int(c) for c in row] for row in d["generator"]], dtype=np.uint8)
            if g.shape != (n, m):
                raise ValueError(f"generator shape {g.shape} does not match ({n}, {m})")
            return cls(n, m, linear_codewords(g), d["construction"], g, d.get("seed"))
        cw = np.array([[int(c) for c in row] for row in d["codewords"]], dtype=np.uint8)
        return cls(n, m, cw, d.get("construction", "external"), None, d.get("seed"))


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_MESSAGE_BITS:
        raise ValueError(f"message length must be in 1..{MAX_MESSAGE_BITS}, got {n}")


def build_hadamard(n: int) -> FingerprintScheme:
    """Hadamard code of length 2^n: all distinct fingerprints are orthogonal."""
    _check_n(n)
    g = hadamard_generator(n)
    cw = linear_codewords(g)
    return FingerprintScheme(n, 2**n, cw, "hadamard", g, None, weight_delta(cw))


def weight_delta(codewords: np.ndarray) -> float:
    """delta of a linear code from its nonzero codeword weights.

    For linear codes the overlap of (x, x') depends only on ``x XOR x'``, so
    the extreme bias over nonzero messages is the all-pairs maximum.
    """
    cw = np.asarray(codewords)
    if cw.shape[0] < 2:
        return 0.0
    m = cw.shape[1]
    w = cw[1:].sum(axis=1, dtype=np.int64)
    return float(np.max(np.abs(m - 2 * w)) / m)


def build_random_linear(n: int, M: int, delta_target: float, seed: int,
                        max_attempts: int = RETRY_CAP) -> FingerprintScheme:
    """Sample random n x M generator matrices until the code's bias is at most ``delta_target``.

    Raises ``InfeasibleParameters`` when ``max_attempts`` samples all fail.
    """
    _check_n(n)
    if not 1 <= M <= MAX_CODE_LEN:
        raise ValueError(f"code length must be in 1..{MAX_CODE_LEN}, got {M}")
    if not 0 <= delta_target <= 1:
        raise ValueError("delta_target must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        g = rng.integers(0, 2, size=(n, M), dtype=np.uint8)
        cw = linear_codewords(g)
        delta = weight_delta(cw)
        if delta <= delta_target:
            return FingerprintScheme(n, M, cw, "random_linear", g, seed, delta)
    raise InfeasibleParameters(
        f"no random linear [{M}, {n}] code with bias <= {delta_target} in {max_attempts} attempts"
    )


def from_codewords(codewords, construction: str = "external") -> FingerprintScheme:
    cw = np.asarray(codewords, dtype=np.uint8)
    n = int(round(math.log2(cw.shape[0])))
    if 2**n != cw.shape[0]:
        raise ValueError("number of codewords must be a power of two")
    return FingerprintScheme(n, cw.shape[1], cw, construction)


def delta_of(scheme: FingerprintScheme, block: int = 1024) -> float:
    """Exact ``max_{x != x'} |<phi_x|phi_x'>|`` by enumerating every pair.

    Uses the +-1 sign table; float32 products of +-1 entries are exact
    integers for M < 2^24.
    """
    s = scheme.signs(np.float32)
    n = s.shape[0]
    if n < 2:
        return 0.0
    best = 0.0
    for start in range(0, n, block):
        g = np.abs(s[start:start + block] @ s.T)
        rows = np.arange(g.shape[0])
        g[rows, start + rows] = 0.0
        best = max(best, float(g.max()))
    return best / scheme.code_len


def smallest_random_linear(n: int, delta_target: float, seed: int,
                           max_len: int = MAX_CODE_LEN) -> FingerprintScheme:
    """Random linear scheme with the smallest power-of-two code length that meets ``delta_target``."""
    M = 2
    while M <= max_len:
        try:
            return build_random_linear(n, M, delta_target, seed)
        except InfeasibleParameters:
            M *= 2
    raise InfeasibleParameters(f"no code length up to {max_len} reaches bias {delta_target} for n={n}")


@dataclass(frozen=True)
class ProfileRow:
    n: int
    m: int
    code_len: int
    delta: float


@dataclass(frozen=True)
class NegligibilityProfile:
    rows: tuple[ProfileRow, ...]

    def delta_trend(self, key: str = "n") -> str:
        """'nondecreasing', 'nonincreasing', 'constant' or 'mixed' as ``key`` grows."""
        ordered = sorted(self.rows, key=lambda r: (getattr(r, key), r.n))
        d = np.diff([r.delta for r in ordered])
        if d.size == 0 or np.all(d == 0):
            return "constant"
        if np.all(d >= 0):
            return "nondecreasing"
        if np.all(d <= 0):
            return "nonincreasing"
        return "mixed"

    def as_table(self) -> list[dict]:
        return [{"n": r.n, "m": r.m, "code_len": r.code_len, "delta": r.delta} for r in self.rows]


def negligibility_profile(family: Callable[[int], FingerprintScheme],
                          n_range: Iterable[int]) -> NegligibilityProfile:
    """Tabulate (n, m, delta) for ``family(n)``; delta is recomputed over all pairs."""
    rows = []
    for n in n_range:
        s = family(n)
        rows.append(ProfileRow(n, s.m_qubits, s.code_len, delta_of(s)))
    return NegligibilityProfile(tuple(rows))
