"""Subset-uniform canonical form of classical side information, and conversion bounds.

Any joint distribution p(x, y) can be rewritten so that the side information
names a subset S of messages on which X is uniform, with weights p_S, and
the original Y is recovered through a channel C(y | S).  Two constructions
are provided:

* :func:`canonicalize_lattice` runs the top-down recursion over the subset
  lattice, ``p_S(y) = min_{x in S} p(x, y) - sum_{S' > S} p_S'(y)``.
* :func:`canonicalize_levelsets` uses the fact that for fixed y the nonzero
  atoms form a chain: they are the level sets ``{x : p(x, y) >= v}`` weighted
  by consecutive gaps between the distinct values of the column.

Subsets are bitmasks over the row index of the table (bit i <-> x_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import numerics as nx
from .errors import NumericalError
from .states import CqState, JointDistribution, guess_prob_classical

MAX_LATTICE_ALPHABET = 12
CLAMP_TOL = 1e-12
INVARIANT_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_members(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def members_to_mask(members: Iterable[int]) -> int:
    out = 0
    for i in members:
        out |= 1 << int(i)
    return out


@dataclass(frozen=True)
class SubsetDecomposition:
    """Weighted subsets ``{(S, p_S)}`` with per-y contributions ``p_S(y)``.

    ``parts[S]`` is the length-|Y| vector ``p_S(y)``; the atom weight is its
    sum and the reconstruction channel is ``C(y|S) = p_S(y) / p_S``.
    """

    n_x: int
    n_y: int
    parts: dict = field(repr=False)

    @property
    def atoms(self) -> dict[int, float]:
        return {S: float(v.sum()) for S, v in sorted(self.parts.items())}

    def weight(self, mask: int) -> float:
        v = self.parts.get(mask)
        return 0.0 if v is None else float(v.sum())

    def channel(self, mask: int) -> np.ndarray:
        v = self.parts[mask]
        return v / v.sum()

    def guessing_probability(self) -> float:
        """``p_g(X|S) = sum_S p_S``."""
        return float(sum(v.sum() for v in self.parts.values()))

    def x_marginal(self) -> np.ndarray:
        q = np.zeros(self.n_x)
        for S, v in self.parts.items():
            q[mask_members(S)] += v.sum()
        return q

    def reconstruct(self) -> np.ndarray:
        """Push the canonical state through its channel: ``p''(x,y) = sum_{S ∋ x} p_S C(y|S)``."""
        out = np.zeros((self.n_x, self.n_y))
        for S, v in self.parts.items():
            w = v.sum()
            if w <= 0:
                continue
            out[mask_members(S)] += w * (v / w)
        return out

    def canonical_table(self) -> np.ndarray:
        """The canonical cc state as a dense ``(|X|, 2^|X|)`` table ``p'(x, S)``."""
        out = np.zeros((self.n_x, 2**self.n_x))
        for S, v in self.parts.items():
            out[mask_members(S), S] = v.sum()
        return out

    def chains_per_y(self) -> bool:
        """Whether, for every y, the subsets with ``p_S(y) > 0`` are totally ordered by inclusion."""
        for y in range(self.n_y):
            masks = sorted((S for S, v in self.parts.items() if v[y] > 0), key=popcount)
            for a, b in zip(masks, masks[1:]):
                if a & b != a:
                    return False
        return True

    def perturbed(self, mask: int, delta: float) -> "SubsetDecomposition":
        """Copy with atom ``mask``'s weight scaled so it changes by ``delta`` (fault injection)."""
        parts = {S: v.copy() for S, v in self.parts.items()}
        v = parts[mask]
        parts[mask] = v * (1.0 + delta / v.sum())
        return SubsetDecomposition(self.n_x, self.n_y, parts)

    def to_dict(self, x_labels: Sequence | None = None, y_labels: Sequence | None = None) -> dict:
        y_labels = list(y_labels) if y_labels is not None else [str(i) for i in range(self.n_y)]
        atoms = [{"mask": S, "members": mask_members(S), "weight": w}
                 for S, w in self.atoms.items()]
        channel = {
            str(S): {y_labels[y]: float(p) for y, p in enumerate(self.channel(S)) if p > 0}
            for S in sorted(self.parts) if self.weight(S) > 0
        }
        out = {"n_x": self.n_x, "n_y": self.n_y, "atoms": atoms, "channel": channel}
        if x_labels is not None:
            out["x_labels"] = list(x_labels)
        out["y_labels"] = y_labels
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SubsetDecomposition":
        n_y = int(d["n_y"])
        y_index = {lab: i for i, lab in enumerate(d.get("y_labels") or range(n_y))}
        parts = {}
        for atom in d["atoms"]:
            S, w = int(atom["mask"]), float(atom["weight"])
            v = np.zeros(n_y)
            for lab, p in d["channel"].get(str(S), {}).items():
                v[y_index[lab]] = w * float(p)
            parts[S] = v
        return cls(int(d["n_x"]), n_y, parts)


def _clamp(v: np.ndarray) -> np.ndarray:
    if np.any(v < -CLAMP_TOL):
        raise NumericalError(f"subset weight {v.min():.3e} is negative beyond clamp tolerance")
    return np.where(v < 0, 0.0, v)


def canonicalize_lattice(j: JointDistribution) -> SubsetDecomposition:
    """Top-down recursion over all nonempty subsets (exact, ``O(3^|X| |Y|)``)."""
    t = j.table
    n_x, n_y = t.shape
    if n_x > MAX_LATTICE_ALPHABET:
        raise ValueError(f"lattice recursion enumerates 2^|X| subsets; |X|={n_x} exceeds "
                         f"{MAX_LATTICE_ALPHABET}")
    full = (1 << n_x) - 1
    masks = sorted(range(1, full + 1), key=popcount, reverse=True)
    p = {}
    for S in masks:
        members = mask_members(S)
        val = t[members].min(axis=0)
        rest = full & ~S
        sub = rest
        while sub:
            val = val - p[S | sub]
            sub = (sub - 1) & rest
        p[S] = _clamp(val)
    parts = {S: v for S, v in p.items() if np.any(v > 0)}
    return SubsetDecomposition(n_x, n_y, parts)


def canonicalize_levelsets(j: JointDistribution) -> SubsetDecomposition:
    """Chain construction: per column, level sets weighted by gaps between distinct values."""
    t = j.table
    n_x, n_y = t.shape
    parts: dict[int, np.ndarray] = {}
    for y in range(n_y):
        col = t[:, y]
        order = np.argsort(-col, kind="stable")
        values = col[order]
        mask = 0
        for pos, x in enumerate(order):
            if values[pos] <= 0:
                break
            mask |= 1 << int(x)
            nxt = values[pos + 1] if pos + 1 < n_x else 0.0
            gap = values[pos] - nxt
            if gap > 0:
                parts.setdefault(mask, np.zeros(n_y))[y] += gap
    return SubsetDecomposition(n_x, n_y, parts)


def atoms_match(a: SubsetDecomposition, b: SubsetDecomposition, tol: float = 1e-10) -> bool:
    """Atom multisets agree within ``tol`` (missing atoms count as weight zero)."""
    wa, wb = a.atoms, b.atoms
    return all(abs(wa.get(S, 0.0) - wb.get(S, 0.0)) <= tol for S in set(wa) | set(wb))


@dataclass
class CanonicalReport:
    guessing_preserved: bool
    reconstructs_source: bool
    subset_uniform: bool
    invariants: dict
    max_reconstruction_error: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_canonical_properties(j: JointDistribution, d: SubsetDecomposition) -> CanonicalReport:
    """Check the three properties of the canonical form against its source table.

    1. ``sum_S p_S`` equals ``p_g(X|Y)`` of the source.
    2. Pushing the canonical state through ``C(y|S)`` reproduces ``p(x, y)``.
    3. The state is subset-uniform: nonnegative atoms on nonempty subsets of X,
       each channel row a probability vector.
    """
    violations = []
    pg = guess_prob_classical(j)
    p1 = abs(d.guessing_probability() - pg) <= INVARIANT_TOL
    if not p1:
        violations.append("guessing probability not preserved")

    if (d.n_x, d.n_y) != j.shape:
        violations.append("shape mismatch")
        return CanonicalReport(p1, False, False, {}, float("inf"), violations)
    err = float(np.max(np.abs(d.reconstruct() - j.table)))
    p2 = err <= RECONSTRUCTION_TOL
    if not p2:
        violations.append("channel does not reconstruct source")

    full = (1 << d.n_x) - 1
    p3 = True
    for S, v in d.parts.items():
        if not (0 < S <= full) or np.any(v < 0):
            p3 = False
        elif v.sum() > 0 and abs(d.channel(S).sum() - 1.0) > INVARIANT_TOL:
            p3 = False
    if not p3:
        violations.append("not subset-uniform")

    size_sum = sum(popcount(S) * w for S, w in d.atoms.items())
    invariants = {
        "sum_weight_times_size": abs(size_sum - 1.0) <= INVARIANT_TOL,
        "x_marginal": bool(np.max(np.abs(d.x_marginal() - j.marginal_x())) <= INVARIANT_TOL),
        "sum_weight_is_pg": p1,
    }
    for name, good in invariants.items():
        if not good:
            violations.append(f"invariant {name} violated")
    return CanonicalReport(p1, p2, p3, invariants, err, violations)


# -- conversion parameter ---------------------------------------------------

def _check_overlap(delta) -> None:
    if not 0 <= delta < 1:
        raise ValueError(f"overlap delta must lie in [0, 1), got {delta}")


def conversion_lower_bound(delta, epsilon):
    """Certified lower bound ``(1 - eps/2 - delta) / (1 - delta)`` on the smooth conversion parameter.

    Holds for any pure-state ensemble with maximum overlap ``delta``.  Accepts
    ``Fraction`` inputs for exact arithmetic.
    """
    _check_overlap(delta)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    val = (1 - epsilon / 2 - delta) / (1 - delta)
    return min(max(val, 0), 1)


def conversion_lower_bound_additive(delta, epsilon):
    """The looser form ``1 - delta - eps/2`` (also clamped to [0, 1])."""
    _check_overlap(delta)
    val = 1 - delta - epsilon / 2
    return min(max(val, 0), 1)


def min_conversion_error(delta, p_guess):
    """Smallest trace-norm error compatible with guessing probability ``p_guess``.

    Rearranging ``1 - eps/2 <= (1 - delta) p + delta`` gives
    ``eps >= 2 (1 - delta - (1 - delta) p)``.
    """
    _check_overlap(delta)
    val = 2 * (1 - delta - (1 - delta) * p_guess)
    return max(val, 0)


@dataclass
class ConversionPoint:
    """A feasible ``(p, eps)`` pair: side information of guessing probability ``p``
    reproduces the cq state within trace-norm error ``eps``."""

    p: float
    epsilon: float
    clusters: list
    weights: list


def cluster_by_fidelity(rho: CqState, threshold: float) -> list[list[int]]:
    """Greedy partition of labels: each label joins the first cluster whose seed
    has fidelity ``|<psi_seed|psi_x>| >= threshold`` with it (pure blocks assumed;
    mixed blocks use their top eigenvector)."""
    vecs = [nx.eig_max(b).vector for b in rho.blocks]
    clusters: list[list[int]] = []
    for x, v in enumerate(vecs):
        for c in clusters:
            if abs(np.vdot(vecs[c[0]], v)) >= threshold:
                c.append(x)
                break
        else:
            clusters.append([x])
    return clusters


def conversion_upper_bound(rho: CqState, clustering=None, *, threshold: float | None = None
                           ) -> ConversionPoint:
    """Evaluate one feasible point of the conversion trade-off.

    ``clustering`` is either a list of label-index collections (the subsets S)
    or a :class:`SubsetDecomposition`; alternatively pass ``threshold`` to
    cluster by fidelity.  Each subset gets ``p_S`` = mean block trace over S and
    ``rho_hat_S`` = normalized block sum, so the X marginal is kept on average.
    The error ``sum_x ||sum_{S ∋ x} p_S rho_hat_S - rho_x||_1`` is exact.
    """
    if clustering is None:
        if threshold is None:
            raise ValueError("pass a clustering or a fidelity threshold")
        clustering = cluster_by_fidelity(rho, threshold)
    if isinstance(clustering, SubsetDecomposition):
        subsets = [mask_members(S) for S, w in clustering.atoms.items() if w > 0]
    else:
        subsets = [sorted(set(int(x) for x in c)) for c in clustering]
    subsets = [s for s in subsets if s]
    if not subsets:
        raise ValueError("empty clustering")
    if any(x < 0 or x >= rho.n_labels for s in subsets for x in s):
        raise ValueError("clustering refers to unknown labels")

    blocks = rho.blocks
    approx = np.zeros_like(blocks)
    weights = []
    for s in subsets:
        block_sum = blocks[s].sum(axis=0)
        tr = np.trace(block_sum).real
        p_s = tr / len(s)
        weights.append(float(p_s))
        if tr > 0:
            approx[s] += p_s * block_sum / tr
    eps = sum(nx.trace_norm(approx[x] - blocks[x]) for x in range(rho.n_labels))
    return ConversionPoint(float(sum(weights)), float(eps), subsets, weights)


def separation_consistent(point: ConversionPoint, delta: float, tol: float = nx.ASSERT_TOL) -> bool:
    """``1 - eps/2 <= (1 - delta) p + delta`` for a feasible point."""
    return 1 - point.epsilon / 2 <= (1 - delta) * point.p + delta + tol


def exact(value) -> Fraction:
    """Decimal-exact ``Fraction`` for a float or string literal such as ``"0.02"``."""
    return Fraction(str(value)) if isinstance(value, float) else Fraction(value)
