"""Autonomous polynomial vector fields as graded coefficient tables.

A field on R^n is stored as a mapping (component, exponent multi-index) ->
coefficient.  Zero coefficients are never stored.  Fields are immutable by
convention; every operation returns a fresh object.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PolyField", "NearSingularMatrixError", "lie_bracket", "linear_pushforward",
    "invert_checked", "check_invertible", "field_to_dict", "field_from_dict",
    "format_field", "MAX_DEGREE",
]

_SV_RATIO = 1e-12

#: Degree cap for stored fields; coefficient tables grow combinatorially, so
#: desk-scale work stays small by default.  Raise it for bigger experiments.
MAX_DEGREE = 6


class NearSingularMatrixError(ValueError):
    """Matrix failed the invertibility threshold (smallest/largest singular value)."""


def check_invertible(A: np.ndarray, ratio: float = _SV_RATIO) -> None:
    A = np.asarray(A, dtype=float)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= ratio * sv[0]:
        raise NearSingularMatrixError(
            f"matrix is numerically singular (sv ratio {sv[-1] / sv[0] if sv[0] else 0.0:.3e})")


def invert_checked(A: np.ndarray, ratio: float = _SV_RATIO) -> np.ndarray:
    """Inverse via a solve against the identity, after the singular-value check."""
    A = np.asarray(A, dtype=float)
    check_invertible(A, ratio)
    return np.linalg.solve(A, np.eye(A.shape[0]))


class PolyField:
    """Polynomial vector field: sum of coeff * x^alpha unit-vector terms.

    terms maps (component, alpha) to a float coefficient, alpha a tuple of
    len dim; entries that are exactly zero are dropped on construction.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict | None = None,
                 max_degree: int | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        cap = MAX_DEGREE if max_degree is None else max_degree
        self.dim = dim
        clean = {}
        for (comp, exps), coeff in (terms or {}).items():
            exps = tuple(int(k) for k in exps)
            if not (0 <= comp < dim):
                raise ValueError(f"component {comp} out of range for dim {dim}")
            if len(exps) != dim:
                raise ValueError(f"multi-index {exps} has length {len(exps)}, expected {dim}")
            if any(k < 0 for k in exps):
                raise ValueError(f"negative exponent in {exps}")
            if sum(exps) > cap:
                raise ValueError(
                    f"term {exps} exceeds the degree cap {cap} "
                    "(pass max_degree or raise polyfield.MAX_DEGREE)")
            c = float(coeff)
            if c != 0.0:
                clean[(int(comp), exps)] = c
        self.terms = clean

    # -- constructors --------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "PolyField":
        return cls(dim, {})

    @classmethod
    def from_constant(cls, b) -> "PolyField":
        b = np.asarray(b, dtype=float)
        dim = b.shape[0]
        zero = (0,) * dim
        return cls(dim, {(i, zero): b[i] for i in range(dim)})

    @classmethod
    def from_linear(cls, M) -> "PolyField":
        M = np.asarray(M, dtype=float)
        dim = M.shape[0]
        terms = {}
        for i in range(dim):
            for j in range(dim):
                e = [0] * dim
                e[j] = 1
                terms[(i, tuple(e))] = M[i, j]
        return cls(dim, terms)

    # -- basic algebra --------------------------------------------------

    def __add__(self, other: "PolyField") -> "PolyField":
        self._check_dim(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0.0) + c
        return PolyField(self.dim, out)

    def __sub__(self, other: "PolyField") -> "PolyField":
        return self + other.scale(-1.0)

    def __neg__(self) -> "PolyField":
        return self.scale(-1.0)

    def scale(self, c: float) -> "PolyField":
        return PolyField(self.dim, {key: c * v for key, v in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def coeff_distance(self, other: "PolyField") -> float:
        """Max absolute coefficient difference."""
        self._check_dim(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) for k in keys),
                   default=0.0)

    def degrees(self) -> list[int]:
        return sorted({sum(exps) for (_, exps) in self.terms})

    def max_degree(self) -> int:
        return max((sum(exps) for (_, exps) in self.terms), default=0)

    def grade(self, j: int) -> "PolyField":
        """Homogeneous part of total degree j (zero field if absent)."""
        return PolyField(self.dim, {key: c for key, c in self.terms.items()
                                    if sum(key[1]) == j})

    def linear_matrix(self) -> np.ndarray:
        """The matrix of the degree-1 part."""
        M = np.zeros((self.dim, self.dim))
        for (i, exps), c in self.grade(1).terms.items():
            M[i, exps.index(1)] = c
        return M

    def constant_vector(self) -> np.ndarray:
        b = np.zeros(self.dim)
        for (i, _), c in self.grade(0).terms.items():
            b[i] = c
        return b

    # -- evaluation ------------------------------------------------------

    def eval(self, x) -> np.ndarray:
        """Value at x; supports real and complex points."""
        x = np.asarray(x)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        out = np.zeros(self.dim, dtype=x.dtype if x.dtype.kind == "c" else float)
        for (i, exps), c in self.terms.items():
            m = c
            for k, p in enumerate(exps):
                if p:
                    m = m * x[k] ** p
            out[i] += m
        return out

    def jacobian(self, x) -> np.ndarray:
        """Matrix of partial derivatives at x, from exact coefficient differentiation."""
        x = np.asarray(x)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        J = np.zeros((self.dim, self.dim), dtype=x.dtype if x.dtype.kind == "c" else float)
        for (i, exps), c in self.terms.items():
            for k, p in enumerate(exps):
                if p == 0:
                    continue
                m = c * p
                for l, q in enumerate(exps):
                    q_eff = q - 1 if l == k else q
                    if q_eff:
                        m = m * x[l] ** q_eff
                J[i, k] += m
        return J

    # -- misc -------------------------------------------------------------

    def _check_dim(self, other: "PolyField") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __eq__(self, other) -> bool:
        return (isinstance(other, PolyField) and self.dim == other.dim
                and self.terms == other.terms)

    def __repr__(self) -> str:
        return f"PolyField(dim={self.dim}, {format_field(self)})"


# ---------------------------------------------------------------------------
# Scalar-polynomial helpers (dicts alpha -> coeff)
# ---------------------------------------------------------------------------

def _component_poly(f: PolyField, i: int) -> dict:
    return {exps: c for (comp, exps), c in f.terms.items() if comp == i}


def _poly_diff(p: dict, k: int) -> dict:
    out = {}
    for exps, c in p.items():
        if exps[k] == 0:
            continue
        e = list(exps)
        e[k] -= 1
        key = tuple(e)
        out[key] = out.get(key, 0.0) + c * exps[k]
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(i + j for i, j in zip(ea, eb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _poly_add_into(acc: dict, p: dict) -> None:
    for exps, c in p.items():
        acc[exps] = acc.get(exps, 0.0) + c


# ---------------------------------------------------------------------------
# Lie bracket
# ---------------------------------------------------------------------------

def lie_bracket(f: PolyField, g: PolyField) -> PolyField:
    """[f, g](x) = Dg(x) f(x) - Df(x) g(x), at exact coefficient level.

    For a matrix B read as the linear field Bx this gives
    [B, p](x) = Dp(x) Bx - B p(x).
    """
    f._check_dim(g)
    n = f.dim
    f_comps = [_component_poly(f, k) for k in range(n)]
    g_comps = [_component_poly(g, k) for k in range(n)]
    terms = {}
    for i in range(n):
        # accumulate Dg_i . f and Df_i . g separately, subtract once:
        # this keeps lie_bracket(f, g) == -lie_bracket(g, f) bitwise
        pos: dict = {}
        neg: dict = {}
        for k in range(n):
            _poly_add_into(pos, _poly_mul(_poly_diff(g_comps[i], k), f_comps[k]))
            _poly_add_into(neg, _poly_mul(_poly_diff(f_comps[i], k), g_comps[k]))
        for exps in pos.keys() | neg.keys():
            c = pos.get(exps, 0.0) - neg.get(exps, 0.0)
            if c != 0.0:
                terms[(i, exps)] = c
    return PolyField(n, terms)


# ---------------------------------------------------------------------------
# Pushforward by an invertible matrix
# ---------------------------------------------------------------------------

def _linear_form(row: np.ndarray, dim: int) -> dict:
    out = {}
    for l in range(dim):
        if row[l] != 0.0:
            e = [0] * dim
            e[l] = 1
            out[tuple(e)] = float(row[l])
    return out


def _poly_pow(p: dict, k: int, dim: int) -> dict:
    result = {(0,) * dim: 1.0}
    base = p
    while k:
        if k & 1:
            result = _poly_mul(result, base)
        k >>= 1
        if k:
            base = _poly_mul(base, base)
    return result


def linear_pushforward(A, f: PolyField) -> PolyField:
    """The field x -> A f(A^{-1} x), with exact multinomial expansion.

    Degree-preserving on each graded part.  A must pass the invertibility
    threshold; its inverse is obtained by a solve, not an inverse formula.
    """
    A = np.asarray(A, dtype=float)
    n = f.dim
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match field dim {n}")
    Minv = invert_checked(A)
    lin_forms = [_linear_form(Minv[k], n) for k in range(n)]
    cache: dict = {}

    def expand(exps: tuple) -> dict:
        if exps not in cache:
            prod = {(0,) * n: 1.0}
            for k, p in enumerate(exps):
                if p:
                    prod = _poly_mul(prod, _poly_pow(lin_forms[k], p, n))
            cache[exps] = prod
        return cache[exps]

    terms: dict = {}
    for (j, exps), c in f.terms.items():
        expanded = expand(exps)
        for i in range(n):
            aij = A[i, j]
            if aij == 0.0:
                continue
            for e, v in expanded.items():
                key = (i, e)
                terms[key] = terms.get(key, 0.0) + aij * c * v
    return PolyField(n, terms)


# ---------------------------------------------------------------------------
# JSON schema and display
# ---------------------------------------------------------------------------

def field_to_dict(f: PolyField) -> dict:
    entries = [{"component": comp, "exponents": list(exps), "coeff": c}
               for (comp, exps), c in sorted(f.terms.items())]
    return {"dim": f.dim, "terms": entries}


def as_index(value, what: str) -> int:
    """Strict integer for JSON schema fields; rejects bools, floats, junk."""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValueError(f"{what} must be an integer, got {value!r}")
    return int(value)


def field_from_dict(d: dict) -> PolyField:
    if not isinstance(d, dict) or "dim" not in d:
        raise ValueError("field object must have a 'dim' entry")
    dim = as_index(d["dim"], "dim")
    entries = d.get("terms", [])
    if not isinstance(entries, list):
        raise ValueError("'terms' must be a list")
    terms = {}
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ValueError(f"bad field term #{k}: expected an object")
        try:
            comp = as_index(entry["component"], "component")
            exps = tuple(as_index(v, "exponent") for v in entry["exponents"])
            coeff = float(entry["coeff"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad field term #{k}: {exc}") from exc
        if not np.isfinite(coeff):
            raise ValueError(f"bad field term #{k}: non-finite coefficient")
        terms[(comp, exps)] = terms.get((comp, exps), 0.0) + coeff
    return PolyField(dim, terms)


def _format_monomial(exps: tuple) -> str:
    parts = []
    for k, p in enumerate(exps):
        if p == 1:
            parts.append(f"x{k + 1}")
        elif p > 1:
            parts.append(f"x{k + 1}^{p}")
    return "*".join(parts)


def format_field(f: PolyField, digits: int = 12) -> str:
    """Human-readable rendering, one polynomial per component."""
    comps = []
    for i in range(f.dim):
        entries = sorted(((exps, c) for (comp, exps), c in f.terms.items() if comp == i),
                         key=lambda it: (sum(it[0]), tuple(-e for e in it[0])))
        if not entries:
            comps.append("0")
            continue
        out = ""
        for exps, c in entries:
            mono = _format_monomial(exps)
            mag = abs(c)
            coeff = f"{mag:.{digits}g}"
            if mono and coeff == "1":
                body = mono
            else:
                body = f"{coeff}*{mono}" if mono else coeff
            if not out:
                out = ("-" if c < 0 else "") + body
            else:
                out += (" - " if c < 0 else " + ") + body
        comps.append(out)
    return "(" + ", ".join(comps) + ")"
