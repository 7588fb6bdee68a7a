"""Principal minors of the lifted Hermitian matrix: enumeration, exact
evaluation and derivatives, separation of violated determinant cuts, and
an eigenvalue-based PSD oracle for cross-checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .graph import Bag
from .poly import Poly, W_entry, to_real_parts

__all__ = [
    "MinorIndex",
    "DeterminantCut",
    "UnassignedEntry",
    "enumerate_minors",
    "hermitian_matrix",
    "hermitian_det",
    "adjugate",
    "det_value",
    "det_gradient",
    "determinant_polynomial",
    "minors_nonnegative",
    "separate",
    "psd_check_oracle",
    "prerequisites",
]


class UnassignedEntry(KeyError):
    pass


@dataclass(frozen=True)
class MinorIndex:
    bag: Bag
    subset: tuple

    def __post_init__(self):
        subset = tuple(sorted(self.subset))
        object.__setattr__(self, "subset", subset)
        if not subset or not set(subset) <= set(self.bag.nodes):
            raise ValueError(f"subset {subset} is not a nonempty part of bag {self.bag.nodes}")

    @property
    def dim(self):
        return len(self.subset)


@dataclass(frozen=True)
class DeterminantCut:
    minor: MinorIndex
    value: float
    prerequisites: tuple = field(default=())
    kind: str = "determinant-polynomial"

    @property
    def subset(self):
        return self.minor.subset

    def variables(self):
        out = [("w", i) for i in self.subset]
        for k, l in combinations(self.subset, 2):
            out += [("wr", k, l), ("wi", k, l)]
        return out


def enumerate_minors(bag, max_dim=None):
    """All principal minors of the bag up to ``max_dim``, ordered by (size, lexicographic)."""
    n = len(bag.nodes)
    max_dim = n if max_dim is None else max_dim
    if max_dim > n:
        raise ValueError(f"max_dim {max_dim} exceeds bag size {n}")
    return [MinorIndex(bag, s) for k in range(1, max_dim + 1) for s in combinations(bag.nodes, k)]


def _entry(point, k, l):
    try:
        if ("wr", k, l) in point:
            return complex(point[("wr", k, l)], point[("wi", k, l)])
        if ("wr", l, k) in point:
            return complex(point[("wr", l, k)], -point[("wi", l, k)])
    except KeyError as exc:
        raise UnassignedEntry(f"W[{k},{l}] is only partially assigned") from exc
    raise UnassignedEntry(f"W[{k},{l}] is not assigned")


def hermitian_matrix(subset, point):
    k = len(subset)
    A = np.zeros((k, k), dtype=complex)
    for a, i in enumerate(subset):
        if ("w", i) not in point:
            raise UnassignedEntry(f"w[{i}] is not assigned")
        A[a, a] = point[("w", i)]
        for b in range(a + 1, k):
            z = _entry(point, i, subset[b])
            A[a, b] = z
            A[b, a] = z.conjugate()
    return A


def hermitian_det(A):
    """Determinant of Hermitian matrices stacked along leading axes.

    Closed-form expansions up to 3x3, LU beyond.
    """
    A = np.asarray(A)
    k = A.shape[-1]
    if k == 1:
        return A[..., 0, 0].real
    if k == 2:
        return (A[..., 0, 0] * A[..., 1, 1]).real - np.abs(A[..., 0, 1]) ** 2
    if k == 3:
        a, d, e = A[..., 0, 0].real, A[..., 1, 1].real, A[..., 2, 2].real
        b, c, f = A[..., 0, 1], A[..., 0, 2], A[..., 1, 2]
        return (
            a * d * e
            + 2 * (b * f * np.conj(c)).real
            - a * np.abs(f) ** 2
            - d * np.abs(c) ** 2
            - e * np.abs(b) ** 2
        )
    det = np.linalg.det(A)
    return det.real


def adjugate(A):
    """Adjugate via signed cofactors; valid for singular matrices too."""
    k = A.shape[0]
    if k == 1:
        return np.ones((1, 1), dtype=A.dtype)
    adj = np.empty_like(A)
    idx = np.arange(k)
    for i in range(k):
        for j in range(k):
            sub = A[np.ix_(idx != j, idx != i)]
            adj[i, j] = (-1) ** (i + j) * np.linalg.det(sub)
    return adj


def det_value(minor, point):
    """Real determinant of the Hermitian submatrix selected by ``minor``."""
    subset = minor.subset if isinstance(minor, MinorIndex) else tuple(minor)
    A = hermitian_matrix(subset, point)
    if len(subset) >= 4:
        det = np.linalg.det(A)
        scale = max(1.0, float(np.prod(np.abs(np.diag(A)))))
        if abs(det.imag) > 1e-12 * scale:
            raise ArithmeticError(f"Hermitian determinant has imaginary part {det.imag:.3e}")
        return float(det.real)
    return float(hermitian_det(A))


def det_gradient(minor, point):
    """Exact gradient of the determinant over its real variables.

    Keys follow the orientation found in ``point``; uses the adjugate, so it
    is well defined at singular (e.g. rank-one) points.
    """
    subset = minor.subset if isinstance(minor, MinorIndex) else tuple(minor)
    A = hermitian_matrix(subset, point)
    adj = adjugate(A)
    grad = {}
    for a, i in enumerate(subset):
        grad[("w", i)] = float(adj[a, a].real)
    for a, b in combinations(range(len(subset)), 2):
        i, j = subset[a], subset[b]
        if ("wr", i, j) in point:
            c = adj[a, b]
            grad[("wr", i, j)] = 2 * c.real
            grad[("wi", i, j)] = 2 * c.imag
        else:
            c = adj[b, a]
            grad[("wr", j, i)] = 2 * c.real
            grad[("wi", j, i)] = 2 * c.imag
    return grad


def determinant_polynomial(subset, oriented):
    """Real polynomial of ``det(W_S)`` over w / wr / wi symbols (Leibniz expansion)."""
    subset = tuple(sorted(subset))
    k = len(subset)
    entries = [[W_entry(subset[a], subset[b], oriented) for b in range(k)] for a in range(k)]
    total = Poly()
    for perm in permutations(range(k)):
        sign = _perm_sign(perm)
        term = Poly.const(sign)
        for a in range(k):
            term = term * entries[a][perm[a]]
        total = total + term
    re, im = to_real_parts(total)
    if im.terms:
        raise ArithmeticError("Hermitian determinant expansion left an imaginary part")
    return re


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def minors_nonnegative(A, tol=0.0, max_dim=None):
    """Batched principal-minor PSD test for an array of Hermitian matrices (..., k, k)."""
    A = np.asarray(A)
    k = A.shape[-1]
    max_dim = k if max_dim is None else max_dim
    ok = np.ones(A.shape[:-2], dtype=bool)
    for d in range(1, max_dim + 1):
        for s in combinations(range(k), d):
            sub = A[..., list(s), :][..., :, list(s)]
            ok &= hermitian_det(sub) >= -tol
    return ok


def prerequisites(subset, active):
    """Sub-minors of dimension 2..k-1 that are not in ``active`` (a set of sorted tuples)."""
    out = []
    for d in range(2, len(subset)):
        for s in combinations(subset, d):
            if s not in active:
                out.append(s)
    return out


def separate(bags, point, tol=1e-6, max_dim=3, active=frozenset(), max_cuts=None):
    """Violated determinant cuts of dimension 3..max_dim, most violated first.

    Each cut carries the lower-dimensional minors it needs that are not yet
    in ``active``.  A subset shared by several bags is reported once.
    """
    active = {tuple(sorted(s)) for s in active}
    seen = set()
    found = []
    for bag in bags:
        top = min(max_dim, len(bag.nodes))
        for d in range(3, top + 1):
            for s in combinations(bag.nodes, d):
                if s in seen or s in active:
                    continue
                seen.add(s)
                minor = MinorIndex(bag, s)
                val = det_value(minor, point)
                if val < -tol:
                    found.append((val, s, minor))
    found.sort(key=lambda t: (t[0], t[1]))
    if max_cuts is not None:
        found = found[:max_cuts]
    cuts = []
    for val, s, minor in found:
        pre = tuple(MinorIndex(minor.bag, p) for p in prerequisites(s, active))
        cuts.append(DeterminantCut(minor, val, pre))
    return cuts


def psd_check_oracle(bag, point, tol=1e-8):
    """Smallest eigenvalue of the bag submatrix is at least ``-tol`` (dense eigensolver)."""
    nodes = bag.nodes if isinstance(bag, Bag) else tuple(bag)
    A = hermitian_matrix(nodes, point)
    return bool(np.linalg.eigvalsh(A).min() >= -tol)
