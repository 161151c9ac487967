"""Invertible matrix curves A(t): closed-form, one-parameter exponential, and ODE flows.

Also provides the matrix exponential and the linear matrix ODE
A' = C(t) A - A B that underpins gauge identification.
"""

from __future__ import annotations

import math

import numpy as np

from . import timexpr as tx
from ._rk import DenseSolution, IntegrationError, integrate_dense
from .polyfield import NearSingularMatrixError, check_invertible, invert_checked

__all__ = [
    "MatrixCurve", "ClosedFormCurve", "ExponentialCurve", "FlowCurve",
    "LiftedCurve", "mat_exp", "solve_gauge_ode", "second_order_lift",
    "curve_to_dict", "curve_from_dict", "IntegrationError",
]


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with diagonal Pade approximants
# ---------------------------------------------------------------------------

_PADE_B = {
    3: [120.0, 60.0, 12.0, 1.0],
    5: [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
    7: [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
    9: [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0],
    13: [64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
         33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0],
}

_PADE_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
               7: 9.504178996162932e-1, 9: 2.097847961257068e0,
               13: 5.371920351148152e0}


def _pade_uv(A: np.ndarray, m: int):
    b = _PADE_B[m]
    n = A.shape[0]
    eye = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye)
        return U, V
    powers = {0: eye, 2: A2}
    for k in range(4, m, 2):
        powers[k] = powers[k - 2] @ A2
    U = A @ sum(b[k] * powers[k - 1] for k in range(1, m + 1, 2))
    V = sum(b[k] * powers[k] for k in range(0, m + 1, 2))
    return U, V


def mat_exp(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Pade approximants.

    Accurate to ~1e-13 relative in operator norm at desk scale
    (n <= 8, ||M|| <= 50).
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    norm = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm <= _PADE_THETA[m]:
            U, V = _pade_uv(A, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm / _PADE_THETA[13]))))
    U, V = _pade_uv(A / 2.0 ** s, 13)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


# ---------------------------------------------------------------------------
# Matrix curves
# ---------------------------------------------------------------------------

class MatrixCurve:
    """A(t) in GL(n, R).  Subclasses implement value/derivative; inverse and
    second derivative have generic fallbacks."""

    dim: int

    def value(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def second_derivative(self, t: float) -> np.ndarray:
        h = 1e-6
        return (self.derivative(t + h) - self.derivative(t - h)) / (2 * h)

    def inverse(self, t: float) -> np.ndarray:
        return invert_checked(self.value(t))


def _diff_entries(entries):
    return [[tx.diff_expr(e) for e in row] for row in entries]


def _compile_entries(entries):
    return [[tx.compile_expr(e) for e in row] for row in entries]


def _eval_compiled(fns, t: float) -> np.ndarray:
    return np.array([[fn(t) for fn in row] for row in fns])


def _adjugate_inverse(entries):
    """Symbolic inverse via adjugate/determinant; only for n <= 3."""
    n = len(entries)
    if n == 1:
        return [[tx.ediv(tx.lit(1.0), entries[0][0])]]

    def det2(a, b, c, d):
        return tx.esub(tx.emul(a, d), tx.emul(b, c))

    if n == 2:
        (a, b), (c, d) = entries
        det = det2(a, b, c, d)
        return [[tx.ediv(d, det), tx.ediv(tx.eneg(b), det)],
                [tx.ediv(tx.eneg(c), det), tx.ediv(a, det)]]
    if n == 3:
        def minor(i, j):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            return det2(entries[rows[0]][cols[0]], entries[rows[0]][cols[1]],
                        entries[rows[1]][cols[0]], entries[rows[1]][cols[1]])

        cof = [[minor(i, j) if (i + j) % 2 == 0 else tx.eneg(minor(i, j))
                for j in range(3)] for i in range(3)]
        det = tx.eadd(
            tx.eadd(tx.emul(entries[0][0], cof[0][0]), tx.emul(entries[0][1], cof[0][1])),
            tx.emul(entries[0][2], cof[0][2]))
        return [[tx.ediv(cof[j][i], det) for j in range(3)] for i in range(3)]
    raise ValueError("symbolic inverse is only built for n <= 3")


class ClosedFormCurve(MatrixCurve):
    """Curve with TimeExpr entries; derivative is exact.

    If no inverse table is supplied, one is built symbolically by
    adjugate/determinant for n <= 3; larger curves invert numerically per t.
    """

    def __init__(self, entries, inverse_entries=None):
        self.entries = [[_as_expr(e) for e in row] for row in entries]
        self.dim = len(self.entries)
        if any(len(row) != self.dim for row in self.entries):
            raise ValueError("entries must form a square table")
        self._dentries = _diff_entries(self.entries)
        self._fns = _compile_entries(self.entries)
        self._dfns = _compile_entries(self._dentries)
        self._ddfns = None
        if inverse_entries is not None:
            self.inverse_entries = [[_as_expr(e) for e in row] for row in inverse_entries]
            if len(self.inverse_entries) != self.dim or any(
                    len(r) != self.dim for r in self.inverse_entries):
                raise ValueError("inverse table must match the curve dimension")
        elif self.dim <= 3:
            try:
                self.inverse_entries = _adjugate_inverse(self.entries)
            except ZeroDivisionError:
                self.inverse_entries = None
        else:
            self.inverse_entries = None
        self._inv_fns = (_compile_entries(self.inverse_entries)
                         if self.inverse_entries is not None else None)
        check_invertible(self.value(0.0))
        if inverse_entries is not None:
            # a user-supplied inverse table must actually invert the curve
            for t in (0.0, 0.5, 1.0):
                try:
                    prod = self.value(t) @ _eval_compiled(self._inv_fns, t)
                except tx.EvalError:
                    continue
                if np.max(np.abs(prod - np.eye(self.dim))) > 1e-8:
                    raise ValueError(
                        f"supplied inverse table does not invert the curve at t={t}")

    def value(self, t: float) -> np.ndarray:
        return _eval_compiled(self._fns, t)

    def derivative(self, t: float) -> np.ndarray:
        return _eval_compiled(self._dfns, t)

    def second_derivative(self, t: float) -> np.ndarray:
        if self._ddfns is None:
            self._ddfns = _compile_entries(_diff_entries(self._dentries))
        return _eval_compiled(self._ddfns, t)

    def inverse(self, t: float) -> np.ndarray:
        if self._inv_fns is not None:
            try:
                return _eval_compiled(self._inv_fns, t)
            except tx.EvalError as exc:
                raise NearSingularMatrixError(str(exc)) from exc
        return invert_checked(self.value(t))


class ExponentialCurve(MatrixCurve):
    """A(t) = exp(sign * t * M): a one-parameter matrix group."""

    def __init__(self, generator, sign: int = 1):
        self.generator = np.asarray(generator, dtype=float)
        if self.generator.ndim != 2 or self.generator.shape[0] != self.generator.shape[1]:
            raise ValueError("generator must be square")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = int(sign)
        self.dim = self.generator.shape[0]

    def value(self, t: float) -> np.ndarray:
        return mat_exp(self.sign * t * self.generator)

    def derivative(self, t: float) -> np.ndarray:
        return self.sign * self.generator @ self.value(t)

    def second_derivative(self, t: float) -> np.ndarray:
        G = self.sign * self.generator
        return G @ G @ self.value(t)

    def inverse(self, t: float) -> np.ndarray:
        return mat_exp(-self.sign * t * self.generator)


class FlowCurve(MatrixCurve):
    """Solution of A' = C(t) A - A B, A(0) = A0, via dense-output integration.

    The requested span is integrated eagerly and memoized; evaluation
    outside it extends the integration from the nearest endpoint (or
    raises when extend=False).  Reads inside an integrated span are safe to
    share across threads; extending the span mutates the cache, so integrate
    the full span up front before evaluating in parallel.
    """

    def __init__(self, C_entries, B, A0, t_span=(0.0, 1.0), tol: float = 1e-10,
                 extend: bool = True):
        self.C_entries = ([[_as_expr(e) for e in row] for row in C_entries]
                          if C_entries is not None else None)
        self.B = np.asarray(B, dtype=float)
        self.A0 = np.asarray(A0, dtype=float)
        self.dim = self.A0.shape[0]
        if self.B.shape != (self.dim, self.dim) or self.A0.shape != (self.dim, self.dim):
            raise ValueError("B and A0 must be square matrices of the same dimension")
        if self.C_entries is not None and (
                len(self.C_entries) != self.dim
                or any(len(r) != self.dim for r in self.C_entries)):
            raise ValueError("C table must match the curve dimension")
        check_invertible(self.A0)
        self.tol = float(tol)
        self.extend = bool(extend)
        self._C_fns = (_compile_entries(self.C_entries)
                       if self.C_entries is not None else None)
        self._dC_fns = (_compile_entries(_diff_entries(self.C_entries))
                        if self.C_entries is not None else None)
        self._fwd: DenseSolution | None = None
        self._bwd: DenseSolution | None = None
        lo, hi = float(min(t_span)), float(max(t_span))
        if hi > 0:
            self._fwd = self._integrate(0.0, hi)
        if lo < 0:
            self._bwd = self._integrate(0.0, lo)

    def _C_at(self, t: float) -> np.ndarray | None:
        if self._C_fns is None:
            return None
        return _eval_compiled(self._C_fns, t)

    def _rhs(self, t: float, a: np.ndarray) -> np.ndarray:
        A = a.reshape(self.dim, self.dim)
        C = self._C_at(t)
        dA = -A @ self.B
        if C is not None:
            dA = dA + C @ A
        return dA.ravel()

    def _integrate(self, t_from: float, t_to: float,
                   y_from: np.ndarray | None = None) -> DenseSolution:
        y0 = (self.A0 if y_from is None else y_from).ravel()
        sol = integrate_dense(self._rhs, t_from, t_to, y0,
                              rtol=self.tol, atol=self.tol)
        return sol

    @property
    def span(self) -> tuple[float, float]:
        lo = self._bwd.t_end if self._bwd is not None else 0.0
        hi = self._fwd.t_end if self._fwd is not None else 0.0
        return lo, hi

    def _solution_for(self, t: float) -> DenseSolution:
        lo, hi = self.span
        if t > hi + 1e-12:
            if not self.extend:
                raise IntegrationError(f"t={t!r} outside integrated span [{lo}, {hi}]")
            start = (hi, self._fwd.y_end.reshape(self.dim, self.dim)) \
                if self._fwd is not None else (0.0, self.A0)
            ext = self._integrate(start[0], t, start[1])
            self._fwd = _concat(self._fwd, ext)
        elif t < lo - 1e-12:
            if not self.extend:
                raise IntegrationError(f"t={t!r} outside integrated span [{lo}, {hi}]")
            start = (lo, self._bwd.y_end.reshape(self.dim, self.dim)) \
                if self._bwd is not None else (0.0, self.A0)
            ext = self._integrate(start[0], t, start[1])
            self._bwd = _concat(self._bwd, ext)
        if t >= 0 and self._fwd is not None:
            return self._fwd
        if t < 0 and self._bwd is not None:
            return self._bwd
        return self._fwd if self._fwd is not None else self._bwd

    def value(self, t: float) -> np.ndarray:
        if t == 0.0:
            return self.A0.copy()
        return self._solution_for(t)(t).reshape(self.dim, self.dim)

    def derivative(self, t: float) -> np.ndarray:
        return self._rhs(t, self.value(t).ravel()).reshape(self.dim, self.dim)

    def second_derivative(self, t: float) -> np.ndarray:
        A = self.value(t)
        dA = self.derivative(t)
        out = -dA @ self.B
        C = self._C_at(t)
        if C is not None:
            out = out + C @ dA
            out = out + _eval_compiled(self._dC_fns, t) @ A
        return out

    def checkpoints(self) -> list[float]:
        """The accepted step times of the dense output (plus the endpoints)."""
        out = []
        for sol in (self._bwd, self._fwd):
            if sol is not None:
                out.extend(sol.t_starts)
                out.append(sol.t_end)
        return sorted(out)

    def residual_max(self, ts=None) -> float:
        """max of ||A'_interp - (C A - A B)|| / (1 + ||A||) over the given times
        (default: the dense-output checkpoints)."""
        worst = 0.0
        for t in (self.checkpoints() if ts is None else ts):
            t = float(t)
            sol = self._solution_for(t)
            a = sol(t)
            lhs = sol.derivative(t)
            rhs = self._rhs(t, a)
            A = a.reshape(self.dim, self.dim)
            worst = max(worst, np.linalg.norm((lhs - rhs).reshape(self.dim, self.dim))
                        / (1.0 + np.linalg.norm(A)))
        return worst

    def assert_invertible_on_span(self):
        """Determinant must keep its sign at every dense-output checkpoint."""
        sign0 = math.copysign(1.0, np.linalg.det(self.A0))
        for sol in (self._fwd, self._bwd):
            if sol is None:
                continue
            for y in sol.y_olds + [sol.y_end]:
                A = y.reshape(self.dim, self.dim)
                det = np.linalg.det(A)
                if det == 0.0 or math.copysign(1.0, det) != sign0:
                    raise NearSingularMatrixError(
                        "flow curve lost invertibility inside the integrated span")


def _concat(base: DenseSolution | None, ext: DenseSolution) -> DenseSolution:
    if base is None:
        return ext
    base.t_starts += ext.t_starts
    base.hs += ext.hs
    base.y_olds += ext.y_olds
    base.Qs += ext.Qs
    base.t_end, base.y_end, base.status = ext.t_end, ext.y_end, ext.status
    return base


class LiftedCurve(MatrixCurve):
    """Block curve [[A, 0], [A', A]] used to lift second-order dynamics."""

    def __init__(self, base: MatrixCurve):
        self.base = base
        self.dim = 2 * base.dim

    def value(self, t: float) -> np.ndarray:
        n = self.base.dim
        out = np.zeros((2 * n, 2 * n))
        A = self.base.value(t)
        out[:n, :n] = A
        out[n:, n:] = A
        out[n:, :n] = self.base.derivative(t)
        return out

    def derivative(self, t: float) -> np.ndarray:
        n = self.base.dim
        out = np.zeros((2 * n, 2 * n))
        dA = self.base.derivative(t)
        out[:n, :n] = dA
        out[n:, n:] = dA
        out[n:, :n] = self.base.second_derivative(t)
        return out

    def inverse(self, t: float) -> np.ndarray:
        n = self.base.dim
        Ainv = self.base.inverse(t)
        dA = self.base.derivative(t)
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = Ainv
        out[n:, n:] = Ainv
        out[n:, :n] = -Ainv @ dA @ Ainv
        return out


def second_order_lift(A: MatrixCurve) -> LiftedCurve:
    """The 2n x 2n curve [[A, 0], [A', A]]; invertible wherever A is."""
    return LiftedCurve(A)


def solve_gauge_ode(C, B, A0, t_span=(0.0, 1.0), tol: float = 1e-10) -> FlowCurve:
    """Solve A' = C(t) A - A B with A(0) = A0 over t_span.

    C is an n x n table of TimeExpr (or expression strings), or None for
    C identically zero.
    """
    return FlowCurve(C, B, A0, t_span=t_span, tol=tol)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def _as_expr(e) -> tx.TimeExpr:
    if isinstance(e, str):
        return tx.parse_expr(e)
    if isinstance(e, (int, float)):
        return tx.lit(float(e))
    return e


def curve_to_dict(curve: MatrixCurve) -> dict:
    if isinstance(curve, ClosedFormCurve):
        d = {"dim": curve.dim, "kind": "closed_form",
             "entries": [[tx.format_expr(e) for e in row] for row in curve.entries]}
        if curve.inverse_entries is not None:
            d["inverse"] = [[tx.format_expr(e) for e in row]
                            for row in curve.inverse_entries]
        return d
    if isinstance(curve, ExponentialCurve):
        return {"dim": curve.dim, "kind": "exp",
                "generator": [[float(v) for v in row] for row in curve.generator],
                "sign": curve.sign}
    raise ValueError(f"cannot serialize curve of type {type(curve).__name__}")


def _expr_table(obj, what: str) -> list:
    if not isinstance(obj, list) or not all(isinstance(row, list) for row in obj):
        raise ValueError(f"{what} must be a table (list of lists)")
    for row in obj:
        for e in row:
            if not isinstance(e, (str, int, float)) or isinstance(e, bool):
                raise ValueError(f"{what} entries must be expression strings "
                                 f"or numbers, got {e!r}")
    return obj


def curve_from_dict(d: dict) -> MatrixCurve:
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError("curve object must have a 'kind' entry")
    kind = d["kind"]
    if kind == "closed_form":
        entries = d.get("entries")
        if not entries:
            raise ValueError("closed_form curve needs an 'entries' table")
        inverse = d.get("inverse")
        return ClosedFormCurve(
            _expr_table(entries, "'entries'"),
            _expr_table(inverse, "'inverse'") if inverse is not None else None)
    if kind == "exp":
        if "generator" not in d:
            raise ValueError("exp curve needs a 'generator' matrix")
        gen = _expr_table(d["generator"], "'generator'")
        sign = d.get("sign", 1)
        if sign not in (1, -1):
            raise ValueError("'sign' must be 1 or -1")
        try:
            return ExponentialCurve(np.asarray(gen, dtype=float), int(sign))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"bad generator matrix: {exc}") from exc
    raise ValueError(f"unknown curve kind {kind!r}")
