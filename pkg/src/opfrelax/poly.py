"""Sparse multivariate polynomials with exact symbolic manipulation and a
compiled numeric form (value, gradient, Hessian) for the solver.

Symbols are hashable, orderable tuples.  The lifted model uses
``("w", i)`` for squared magnitudes, ``("wr", k, l)`` / ``("wi", k, l)`` for
the real and imaginary parts of ``W_kl``, and, during symbolic work,
``("Z", k, l)`` / ``("Zc", k, l)`` for ``W_kl`` and its conjugate.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

__all__ = ["Poly", "CompiledPoly", "w_sym", "W_entry", "to_real_parts"]


def _mono_mul(a, b):
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for s, e in b:
        acc[s] = acc.get(s, 0) + e
    return tuple(sorted(acc.items()))


class Poly:
    """Polynomial as ``{monomial: coefficient}``; a monomial is a sorted tuple of ``(symbol, power)``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for m, c in terms.items():
                if c != 0:
                    self.terms[m] = c

    @classmethod
    def var(cls, sym):
        return cls({((sym, 1),): 1})

    @classmethod
    def const(cls, c):
        return cls({(): c})

    def copy(self):
        return Poly(self.terms)

    def _coerce(self, other):
        return other if isinstance(other, Poly) else Poly.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0) + c
        return Poly(acc)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        acc = defaultdict(complex)
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                acc[_mono_mul(ma, mb)] += ca * cb
        return Poly(_tidy(acc))

    __rmul__ = __mul__

    def __pow__(self, n):
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        return _tidy(self.terms) == _tidy(other.terms)

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda t: str(t[0])):
            mono = "*".join(_sym_str(s) + (f"^{e}" if e > 1 else "") for s, e in m) or "1"
            parts.append(f"{c}*{mono}")
        return "Poly(" + " + ".join(parts) + ")"

    def symbols(self):
        return sorted({s for m in self.terms for s, _ in m})

    def degree(self):
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def subs(self, mapping):
        """Substitute symbols by polynomials (or constants)."""
        out = Poly()
        cache = {}
        for m, c in self.terms.items():
            term = Poly.const(c)
            for s, e in m:
                if s in mapping:
                    key = (s, e)
                    if key not in cache:
                        cache[key] = Poly._coerce(self, mapping[s]) ** e
                    term = term * cache[key]
                else:
                    term = term * Poly({((s, e),): 1})
            out = out + term
        return out

    def real(self):
        return Poly({m: complex(c).real for m, c in self.terms.items()})

    def imag(self):
        return Poly({m: complex(c).imag for m, c in self.terms.items()})

    def conj(self, swap):
        """Complex conjugate, where ``swap`` maps each symbol to its conjugate symbol."""
        acc = {}
        for m, c in self.terms.items():
            mono = tuple(sorted((swap(s), e) for s, e in m))
            acc[mono] = complex(c).conjugate()
        return Poly(_tidy(acc))

    def evaluate(self, values):
        total = 0
        for m, c in self.terms.items():
            t = c
            for s, e in m:
                t = t * values[s] ** e
            total += t
        return total

    def divide_monomial(self, mono):
        """Exact division by a monomial; raises if some term is not divisible."""
        need = dict(mono)
        acc = {}
        for m, c in self.terms.items():
            have = dict(m)
            for s, e in need.items():
                if have.get(s, 0) < e:
                    raise ValueError("not divisible")
                have[s] -= e
            acc[tuple(sorted((s, e) for s, e in have.items() if e))] = c
        return Poly(acc)

    def split_divisible(self, sym):
        """Split into (terms divisible by ``sym`` already divided, remainder)."""
        div, rest = {}, {}
        for m, c in self.terms.items():
            have = dict(m)
            if have.get(sym, 0) >= 1:
                have[sym] -= 1
                div[tuple(sorted((s, e) for s, e in have.items() if e))] = c
            else:
                rest[m] = c
        return Poly(div), Poly(rest)

    def monomial_content(self, kind=None):
        """Largest monomial dividing every term (restricted to symbols whose tag is ``kind``)."""
        if not self.terms:
            return ()
        common = None
        for m in self.terms:
            d = {s: e for s, e in m if kind is None or s[0] == kind}
            if common is None:
                common = d
            else:
                common = {s: min(e, d[s]) for s, e in common.items() if s in d}
        return tuple(sorted(common.items()))

    def compile(self, index_of):
        return CompiledPoly.from_poly(self, index_of)


def _tidy(acc, eps=0.0):
    out = {}
    for m, c in acc.items():
        c = complex(c)
        if c.imag == 0:
            c = c.real
            if float(c).is_integer():
                c = int(c)
        if c != 0 and abs(c) > eps:
            out[m] = c
    return out


def _sym_str(s):
    tag, *idx = s
    return f"{tag}[{','.join(map(str, idx))}]"


# ---------------------------------------------------------------------------
# lifted-variable helpers

def w_sym(i):
    return ("w", i)


def W_entry(k, l, oriented):
    """Symbolic ``W_kl``.  ``oriented(k, l)`` tells whether ``(k, l)`` is the stored orientation."""
    if k == l:
        return Poly.var(("w", k))
    if oriented(k, l):
        return Poly.var(("Z", k, l))
    return Poly.var(("Zc", l, k))


def conj_symbol(s):
    if s[0] == "Z":
        return ("Zc",) + s[1:]
    if s[0] == "Zc":
        return ("Z",) + s[1:]
    return s


def reduce_modulus(poly):
    """Rewrite every ``Z_kl * Zc_kl`` as ``w_k * w_l`` (exact on rank-one points)."""
    acc = defaultdict(complex)
    for m, c in poly.terms.items():
        d = dict(m)
        changed = True
        while changed:
            changed = False
            for s in list(d):
                if s[0] == "Z" and d.get(("Zc",) + s[1:], 0) > 0 and d[s] > 0:
                    k, l = s[1], s[2]
                    d[s] -= 1
                    d[("Zc", k, l)] -= 1
                    d[("w", k)] = d.get(("w", k), 0) + 1
                    d[("w", l)] = d.get(("w", l), 0) + 1
                    changed = True
        acc[tuple(sorted((s, e) for s, e in d.items() if e))] += c
    return Poly(_tidy(acc))


def to_real_parts(poly):
    """Expand ``Z = wr + i wi`` and ``Zc = wr - i wi``; return (real, imaginary) polynomials."""
    mapping = {}
    for s in poly.symbols():
        if s[0] in ("Z", "Zc"):
            k, l = s[1], s[2]
            wr, wi = Poly.var(("wr", k, l)), Poly.var(("wi", k, l))
            mapping[s] = wr + wi * 1j if s[0] == "Z" else wr - wi * 1j
    expanded = poly.subs(mapping)
    return expanded.real(), expanded.imag()


# ---------------------------------------------------------------------------
# numeric form

class CompiledPoly:
    """Dense exponent-matrix form over a subset of global variables."""

    def __init__(self, idx, exps, coefs):
        self.idx = np.asarray(idx, dtype=int)
        self.exps = np.asarray(exps, dtype=int).reshape(len(coefs), len(self.idx))
        self.coefs = np.asarray(coefs, dtype=float)
        nv = len(self.idx)
        eye = np.eye(nv, dtype=int)
        e = self.exps
        # gradient: coef * e_v * x^(e - d_v)
        self._gfac = e.astype(float)
        self._gexp = np.clip(e[:, None, :] - eye[None, :, :], 0, None)
        # Hessian: coef * e_v * (e_u - d_uv) * x^(e - d_v - d_u)
        fac = e[:, :, None] * (e[:, None, :] - eye[None, :, :])
        self._hfac = np.clip(fac, 0, None).astype(float)
        self._hexp = np.clip(e[:, None, None, :] - eye[None, :, None, :] - eye[None, None, :, :], 0, None)

    @classmethod
    def from_poly(cls, poly, index_of):
        syms = poly.symbols()
        idx = [index_of(s) for s in syms]
        pos = {s: k for k, s in enumerate(syms)}
        exps = np.zeros((len(poly.terms), len(syms)), dtype=int)
        coefs = np.zeros(len(poly.terms))
        for r, (m, c) in enumerate(poly.terms.items()):
            if complex(c).imag != 0:
                raise ValueError("cannot compile a polynomial with complex coefficients")
            coefs[r] = complex(c).real
            for s, e in m:
                exps[r, pos[s]] = e
        return cls(idx, exps, coefs)

    def value(self, x):
        xl = x[self.idx]
        return float(self.coefs @ np.prod(xl ** self.exps, axis=1))

    def gradient(self, x):
        xl = x[self.idx]
        mon = np.prod(xl ** self._gexp, axis=2)
        return (self.coefs[:, None] * self._gfac * mon).sum(axis=0)

    def hessian(self, x):
        xl = x[self.idx]
        mon = np.prod(xl ** self._hexp, axis=3)
        return np.einsum("m,muv->uv", self.coefs, self._hfac * mon)
