"""Deciding whether a nonautonomous system is a gauge transform of an autonomous one.

Pipeline: extract the jet at t=0, solve the linear system for the candidate
matrix B, then certify the candidate by residuals over a time grid.  The
idempotent finder corroborates uniqueness of B for generic nonlinearities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import timexpr as tx
from ._rk import IntegrationError
from .matcurve import FlowCurve, mat_exp, solve_gauge_ode
from .polyfield import (
    NearSingularMatrixError, PolyField, field_to_dict, lie_bracket,
    linear_pushforward,
)

__all__ = [
    "NonAutoSystem", "JetData", "CandidateFamily", "VerificationReport",
    "GaugeCertificate", "IdempotentSet", "ReducedSystem",
    "extract_jet", "solve_candidate_B", "verify_candidate", "identify",
    "remove_linear_part", "find_idempotents", "default_grid",
]

DEFAULT_GRID_POINTS = 33
_SV_CUTOFF = 1e-10
_SOLVE_RESIDUAL_TOL = 1e-8
_ZERO_COEFF_TOL = 1e-12


def default_grid(t0: float = 0.0, t1: float = 1.0,
                 points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if not (t1 > t0) or points < 2:
        raise ValueError("grid needs t1 > t0 and at least 2 points")
    return np.linspace(t0, t1, points)


def _as_expr(e) -> tx.TimeExpr:
    if isinstance(e, str):
        return tx.parse_expr(e)
    if isinstance(e, (int, float)):
        return tx.lit(float(e))
    return e


class NonAutoSystem:
    """Analytic nonautonomous system x' = c(t) + C(t) x + sum_j q_j(t, x).

    Coefficients are TimeExpr; `terms` holds the parts homogeneous of degree
    >= 2, keyed by (component, exponent multi-index).
    """

    def __init__(self, dim: int, constant=None, linear=None, terms=None):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        zero = tx.Lit(0.0)
        self.constant = ([_as_expr(e) for e in constant]
                         if constant is not None else [zero] * dim)
        if len(self.constant) != dim:
            raise ValueError("constant part must have one entry per component")
        self.linear = ([[_as_expr(e) for e in row] for row in linear]
                       if linear is not None else [[zero] * dim for _ in range(dim)])
        if len(self.linear) != dim or any(len(r) != dim for r in self.linear):
            raise ValueError("linear part must be an n x n table")
        self.terms: dict = {}
        from . import polyfield
        for (comp, exps), e in (terms or {}).items():
            exps = tuple(int(v) for v in exps)
            if not (0 <= comp < dim) or len(exps) != dim:
                raise ValueError(f"bad term key ({comp}, {exps}) for dim {dim}")
            if sum(exps) < 2:
                raise ValueError(
                    f"term {exps} has total degree {sum(exps)}; "
                    "degrees 0 and 1 belong to the constant/linear tables")
            if sum(exps) > polyfield.MAX_DEGREE:
                raise ValueError(
                    f"term {exps} exceeds the degree cap {polyfield.MAX_DEGREE}")
            self.terms[(int(comp), exps)] = _as_expr(e)
        # structural zeros are skipped during evaluation; everything else is
        # compiled once (grid tables and integrators evaluate these a lot)
        self._lin_nonzero = [(i, j, tx.compile_expr(e))
                             for i, row in enumerate(self.linear)
                             for j, e in enumerate(row) if e != zero]
        self._const_nonzero = [(i, tx.compile_expr(e))
                               for i, e in enumerate(self.constant) if e != zero]
        self._term_fns = {key: tx.compile_expr(e) for key, e in self.terms.items()}

    # -- structure -------------------------------------------------------

    def degrees(self) -> list[int]:
        return sorted({sum(exps) for (_, exps) in self.terms})

    def max_degree(self) -> int:
        return max((sum(exps) for (_, exps) in self.terms), default=1)

    def diff_t(self) -> "NonAutoSystem":
        return NonAutoSystem(
            self.dim,
            [tx.diff_expr(e) for e in self.constant],
            [[tx.diff_expr(e) for e in row] for row in self.linear],
            {key: tx.diff_expr(e) for key, e in self.terms.items()})

    # -- evaluation --------------------------------------------------------

    def constant_at(self, t: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for i, fn in self._const_nonzero:
            out[i] = fn(t)
        return out

    def linear_at(self, t: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for i, j, fn in self._lin_nonzero:
            out[i, j] = fn(t)
        return out

    def degree_part_at(self, t: float, j: int) -> PolyField:
        terms = {}
        for (comp, exps), fn in self._term_fns.items():
            if sum(exps) == j:
                v = fn(t)
                if v != 0.0:
                    terms[(comp, exps)] = v
        return PolyField(self.dim, terms)

    def freeze(self, t: float) -> PolyField:
        """The autonomous field obtained by evaluating all coefficients at t."""
        out = PolyField.from_constant(self.constant_at(t)) \
            + PolyField.from_linear(self.linear_at(t))
        terms = {}
        for (comp, exps), fn in self._term_fns.items():
            v = fn(t)
            if v != 0.0:
                terms[(comp, exps)] = v
        return out + PolyField(self.dim, terms)

    def eval(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.constant_at(t)
        for i, j, fn in self._lin_nonzero:
            out[i] += fn(t) * x[j]
        for (i, exps), fn in self._term_fns.items():
            c = fn(t)
            if c == 0.0:
                continue
            m = c
            for k, p in enumerate(exps):
                if p:
                    m *= x[k] ** p
            out[i] += m
        return out

    def rhs(self, t: float, x) -> np.ndarray:
        return self.eval(t, x)

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "constant": [tx.format_expr(e) for e in self.constant],
            "linear": [[tx.format_expr(e) for e in row] for row in self.linear],
            "terms": [{"component": comp, "exponents": list(exps),
                       "coeff": tx.format_expr(e)}
                      for (comp, exps), e in sorted(self.terms.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NonAutoSystem":
        from .polyfield import as_index
        if not isinstance(d, dict) or "dim" not in d:
            raise ValueError("system object must have a 'dim' entry")
        dim = as_index(d["dim"], "dim")

        def parse_at(src, where):
            if isinstance(src, bool) or not isinstance(src, (str, int, float)):
                raise ValueError(f"{where}: expected an expression string or number")
            try:
                return tx.parse_expr(src) if isinstance(src, str) else tx.lit(float(src))
            except (tx.ParseError, ValueError) as exc:
                raise ValueError(f"{where}: {exc}") from exc

        constant_src = d.get("constant", ["0"] * dim)
        if not isinstance(constant_src, list):
            raise ValueError("'constant' must be a list")
        constant = [parse_at(e, f"constant[{i}]") for i, e in enumerate(constant_src)]
        linear_src = d.get("linear", [["0"] * dim for _ in range(dim)])
        if not isinstance(linear_src, list) or not all(
                isinstance(row, list) for row in linear_src):
            raise ValueError("'linear' must be a table (list of lists)")
        linear = [[parse_at(e, f"linear[{i}][{j}]") for j, e in enumerate(row)]
                  for i, row in enumerate(linear_src)]
        terms_src = d.get("terms", [])
        if not isinstance(terms_src, list):
            raise ValueError("'terms' must be a list")
        terms = {}
        for k, entry in enumerate(terms_src):
            if not isinstance(entry, dict):
                raise ValueError(f"bad system term #{k}: expected an object")
            try:
                comp = as_index(entry["component"], "component")
                exps = tuple(as_index(v, "exponent") for v in entry["exponents"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"bad system term #{k}: {exc}") from exc
            terms[(comp, exps)] = parse_at(entry.get("coeff", "0"), f"terms[{k}].coeff")
        return cls(dim, constant, linear, terms)


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------

@dataclass
class JetData:
    """t=0 data of a nonautonomous system: values and first t-derivatives."""
    dim: int
    c0: np.ndarray
    cdot0: np.ndarray
    C0: np.ndarray
    p: dict            # degree j >= 2 -> PolyField q_j(0, .)
    r: dict            # degree j >= 2 -> PolyField  D_t q_j(t, .)|_{t=0}


def extract_jet(q: NonAutoSystem) -> JetData:
    """Exact jet at t=0 from expression evaluation and differentiation."""
    c0 = q.constant_at(0.0)
    cdot0 = np.array([tx.eval_expr(tx.diff_expr(e), 0.0) for e in q.constant])
    C0 = q.linear_at(0.0)
    p: dict = {}
    r: dict = {}
    for j in q.degrees():
        p[j] = q.degree_part_at(0.0, j)
        r_terms = {}
        for (comp, exps), e in q.terms.items():
            if sum(exps) == j:
                v = tx.eval_expr(tx.diff_expr(e), 0.0)
                if v != 0.0:
                    r_terms[(comp, exps)] = v
        r[j] = PolyField(q.dim, r_terms)
    return JetData(q.dim, c0, cdot0, C0, p, r)


# ---------------------------------------------------------------------------
# Candidate solve
# ---------------------------------------------------------------------------

@dataclass
class CandidateFamily:
    """Affine solution set M_min + span(kernel) of the first-order conditions;
    B = C(0) + M."""
    B: np.ndarray
    M: np.ndarray
    kernel: list
    residual: float
    unconstrained: bool = False

    @property
    def kernel_dim(self) -> int:
        return len(self.kernel)


def _basis_matrix(n: int, idx: int) -> np.ndarray:
    E = np.zeros((n, n))
    E[idx // n, idx % n] = 1.0
    return E


def _stack_constraints(jet: JetData):
    """Rows of the linear system over the n^2 entries of M = B - C(0):
    [M, p_j] = r_j for each degree, and M c(0) = -c'(0)."""
    n = jet.dim
    rows, rhs = [], []
    for j in sorted(set(jet.p) | set(jet.r)):
        p_j = jet.p.get(j, PolyField.zero(n))
        r_j = jet.r.get(j, PolyField.zero(n))
        if p_j.is_zero() and r_j.is_zero():
            continue
        cols = [lie_bracket(PolyField.from_linear(_basis_matrix(n, a)), p_j)
                for a in range(n * n)]
        keys = set(r_j.terms)
        for col in cols:
            keys |= set(col.terms)
        for key in sorted(keys):
            rows.append([col.terms.get(key, 0.0) for col in cols])
            rhs.append(r_j.terms.get(key, 0.0))
    if np.any(jet.c0 != 0.0) or np.any(jet.cdot0 != 0.0):
        for i in range(n):
            row = [0.0] * (n * n)
            for b in range(n):
                row[i * n + b] = jet.c0[b]
            rows.append(row)
            rhs.append(-jet.cdot0[i])
    return np.array(rows, dtype=float), np.array(rhs, dtype=float)


def solve_candidate_B(jet: JetData, sv_cutoff: float = _SV_CUTOFF,
                      residual_tol: float = _SOLVE_RESIDUAL_TOL) -> CandidateFamily | None:
    """Solve the stacked first-order conditions for B.

    Returns the affine solution set (minimum-norm representative plus a
    kernel basis), or None when the best least-squares fit leaves a residual
    above `residual_tol` * (1 + ||rhs||).
    """
    n = jet.dim
    G, rhs = _stack_constraints(jet)
    if G.size == 0:
        kernel = [_basis_matrix(n, a) for a in range(n * n)]
        return CandidateFamily(B=jet.C0.copy(), M=np.zeros((n, n)), kernel=kernel,
                               residual=0.0, unconstrained=True)
    m, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    residual = float(np.linalg.norm(G @ m - rhs))
    if residual > residual_tol * (1.0 + np.linalg.norm(rhs)):
        return None
    sv = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(sv > sv_cutoff * sv[0])) if sv.size and sv[0] > 0 else 0
    _, _, Vt = np.linalg.svd(G, full_matrices=True)
    kernel = [Vt[k].reshape(n, n) for k in range(rank, n * n)]
    M = m.reshape(n, n)
    return CandidateFamily(B=jet.C0 + M, M=M, kernel=kernel, residual=residual)


# ---------------------------------------------------------------------------
# Grid verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    passed: bool
    status: str                  # "ok" or "undetermined"
    residuals: dict
    scales: dict
    grid: np.ndarray
    diagnostics: list = field(default_factory=list)


class _GridTables:
    """All coefficient data of q evaluated on the grid, computed once."""

    def __init__(self, q: NonAutoSystem, ts: np.ndarray):
        self.ts = np.asarray(ts, dtype=float)
        self.c = np.array([q.constant_at(t) for t in self.ts])
        self.C = np.array([q.linear_at(t) for t in self.ts])
        self.fields = {j: [q.degree_part_at(t, j) for t in self.ts]
                       for j in q.degrees()}

    @property
    def linear_max(self) -> float:
        return float(np.max(np.abs(self.C))) if self.C.size else 0.0

    def degree_max(self, j: int) -> float:
        return max((f.max_abs_coeff() for f in self.fields[j]), default=0.0)

    def constant_max(self) -> float:
        return float(np.max(np.abs(self.c))) if self.c.size else 0.0


def _candidate_curve_values(q: NonAutoSystem, B: np.ndarray, tables: _GridTables,
                            ode_tol: float):
    """A(t) on the grid: exp(-tB) when C == 0, else the flow of A' = CA - AB."""
    if tables.linear_max <= _ZERO_COEFF_TOL:
        return [mat_exp(-t * B) for t in tables.ts], None
    curve = solve_gauge_ode(q.linear, B, np.eye(q.dim),
                            t_span=(float(tables.ts.min()), float(tables.ts.max())),
                            tol=ode_tol)
    return [curve.value(float(t)) for t in tables.ts], curve


def verify_candidate(q: NonAutoSystem, B: np.ndarray, grid=None, tol: float = 1e-6,
                     ode_tol: float = 1e-10, jet: JetData | None = None,
                     tables: _GridTables | None = None) -> VerificationReport:
    """Certify B against the full coefficient identities on the grid.

    Checks ||c(t) - A(t) c(0)|| and, per degree j, the coefficient distance
    between q_j(t, .) and the pushforward of q_j(0, .) by A(t), where A is
    exp(-tB) (vanishing linear part) or the solution of A' = CA - AB.
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    jet = jet if jet is not None else extract_jet(q)
    tables = tables if tables is not None else _GridTables(q, ts)
    diagnostics: list[str] = []

    try:
        A_vals, curve = _candidate_curve_values(q, B, tables, ode_tol)
        for A_t in A_vals:
            sv = np.linalg.svd(A_t, compute_uv=False)
            if sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]:
                raise NearSingularMatrixError("A(t) numerically singular on the grid")
        if curve is not None:
            curve.assert_invertible_on_span()
        pushed = {j: [linear_pushforward(A_t, jet.p[j]) for A_t in A_vals]
                  for j in sorted(jet.p)}
    except (IntegrationError, NearSingularMatrixError, tx.EvalError) as exc:
        diagnostics.append(f"verification aborted: {exc}")
        return VerificationReport(False, "undetermined", {}, {}, ts, diagnostics)

    const_res = max((float(np.linalg.norm(tables.c[k] - A_vals[k] @ jet.c0))
                     for k in range(len(ts))), default=0.0)
    residuals = {"constant": const_res, "per_degree": {}}
    scales = {"constant": tables.constant_max(), "per_degree": {}}
    ok = const_res <= tol * (1.0 + scales["constant"])
    for j in sorted(jet.p):
        res_j = max(tables.fields[j][k].coeff_distance(pushed[j][k])
                    for k in range(len(ts)))
        residuals["per_degree"][j] = res_j
        scales["per_degree"][j] = tables.degree_max(j)
        ok = ok and res_j <= tol * (1.0 + scales["per_degree"][j])
    return VerificationReport(ok, "ok", residuals, scales, ts, diagnostics)


# ---------------------------------------------------------------------------
# Refinement over the affine family
# ---------------------------------------------------------------------------

def _residual_vector(q: NonAutoSystem, B: np.ndarray, jet: JetData,
                     tables: _GridTables, ode_tol: float) -> np.ndarray:
    A_vals, _ = _candidate_curve_values(q, B, tables, ode_tol)
    parts = []
    for k in range(len(tables.ts)):
        parts.append(tables.c[k] - A_vals[k] @ jet.c0)
    key_order = {j: sorted({key for f in tables.fields[j] for key in f.terms}
                           | set(jet.p[j].terms)) for j in sorted(jet.p)}
    for j in sorted(jet.p):
        for k, A_t in enumerate(A_vals):
            pf = linear_pushforward(A_t, jet.p[j])
            q_t = tables.fields[j][k]
            parts.append(np.array([q_t.terms.get(key, 0.0) - pf.terms.get(key, 0.0)
                                   for key in key_order[j]]))
    return np.concatenate(parts) if parts else np.zeros(0)


def _refine_candidate(q: NonAutoSystem, cand: CandidateFamily, jet: JetData,
                      tables: _GridTables, ode_tol: float,
                      max_iter: int = 50) -> tuple[np.ndarray, list[str]]:
    """Bounded Gauss-Newton over the kernel directions of the affine family."""
    notes = []
    theta = np.zeros(len(cand.kernel))

    def B_of(th):
        M = cand.M + sum(c * K for c, K in zip(th, cand.kernel))
        return jet.C0 + M

    def r_of(th):
        return _residual_vector(q, B_of(th), jet, tables, ode_tol)

    try:
        r = r_of(theta)
    except (IntegrationError, NearSingularMatrixError, tx.EvalError):
        return B_of(theta), ["refinement aborted at the starting point"]
    best = float(r @ r)
    delta = 1e-7
    for it in range(max_iter):
        J = np.empty((r.size, theta.size))
        for i in range(theta.size):
            step = theta.copy()
            step[i] += delta
            try:
                J[:, i] = (r_of(step) - r) / delta
            except (IntegrationError, NearSingularMatrixError, tx.EvalError):
                J[:, i] = 0.0
        try:
            d, *_ = np.linalg.lstsq(J, -r, rcond=None)
        except np.linalg.LinAlgError:
            break
        improved = False
        for damp in (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125):
            trial = theta + damp * d
            try:
                r_trial = r_of(trial)
            except (IntegrationError, NearSingularMatrixError, tx.EvalError):
                continue
            val = float(r_trial @ r_trial)
            if val < best:
                theta, r, best = trial, r_trial, val
                improved = True
                break
        if not improved or best <= 1e-24:
            notes.append(f"refinement stopped after {it + 1} iterations")
            break
    else:
        notes.append(f"refinement exhausted {max_iter} iterations")
    return B_of(theta), notes


# ---------------------------------------------------------------------------
# Certificates and the full pipeline
# ---------------------------------------------------------------------------

@dataclass
class GaugeCertificate:
    status: str                       # gauge | not_gauge | linear_family | undetermined
    B: np.ndarray | None
    kernel_basis: list
    b: np.ndarray
    f: PolyField | None
    residuals: dict | None
    grid: np.ndarray
    diagnostics: list

    @property
    def kernel_dim(self) -> int:
        return len(self.kernel_basis)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "B": None if self.B is None else [[float(v) for v in row] for row in self.B],
            "kernel_dim": self.kernel_dim,
            "kernel_basis": [[[float(v) for v in row] for row in K]
                             for K in self.kernel_basis],
            "b": [float(v) for v in self.b],
            "f": None if self.f is None else field_to_dict(self.f),
            "residuals": self.residuals,
            "grid": {"t0": float(self.grid[0]), "t1": float(self.grid[-1]),
                     "points": int(len(self.grid))},
            "diagnostics": list(self.diagnostics),
        }


def _reconstructed_field(jet: JetData, B: np.ndarray) -> PolyField:
    f = PolyField.from_constant(jet.c0) + PolyField.from_linear(B)
    for j in sorted(jet.p):
        f = f + jet.p[j]
    return f


def identify(q: NonAutoSystem, grid=None, tol: float = 1e-6,
             ode_tol: float = 1e-10,
             solve_residual_tol: float = _SOLVE_RESIDUAL_TOL,
             refine_max_iter: int = 50) -> GaugeCertificate:
    """Full identification pipeline; returns a GaugeCertificate.

    Statuses: gauge (certified, residuals within tol), linear_family (purely
    linear system; every B works), not_gauge, undetermined (numerical
    failure, not a verdict).
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    tables = _GridTables(q, ts)  # also validates evaluability on the grid
    jet = extract_jet(q)
    diagnostics: list[str] = []

    # degrees with vanishing t=0 part must vanish identically
    for j in sorted(jet.p):
        if jet.p[j].max_abs_coeff() <= _ZERO_COEFF_TOL:
            scale_j = tables.degree_max(j)
            if scale_j > 10.0 * _ZERO_COEFF_TOL:
                diagnostics.append(
                    f"degree {j} vanishes at t=0 but not on the grid "
                    f"(max coefficient {scale_j:.3e}); rejected without integration")
                return GaugeCertificate("not_gauge", None, [], jet.c0, None, None,
                                        ts, diagnostics)

    nonlinear_active = any(tables.degree_max(j) > _ZERO_COEFF_TOL for j in jet.p)
    constant_active = (tables.constant_max() > _ZERO_COEFF_TOL
                       or np.max(np.abs(jet.cdot0), initial=0.0) > _ZERO_COEFF_TOL)

    if not nonlinear_active and not constant_active:
        # purely linear in x: a gauge transform of any linear autonomous system
        B = jet.C0.copy()
        report = verify_candidate(q, B, ts, tol=tol, ode_tol=ode_tol,
                                  jet=jet, tables=tables)
        if report.status == "undetermined":
            return GaugeCertificate("undetermined", B, [], jet.c0, None,
                                    report.residuals, ts,
                                    diagnostics + report.diagnostics)
        kernel = [_basis_matrix(q.dim, a) for a in range(q.dim * q.dim)]
        diagnostics.append("purely linear system: every constant matrix B is admissible")
        return GaugeCertificate("linear_family", B, kernel, jet.c0,
                                PolyField.from_linear(B), report.residuals, ts,
                                diagnostics + report.diagnostics)

    cand = solve_candidate_B(jet, residual_tol=solve_residual_tol)
    if cand is None:
        diagnostics.append("first-order conditions at t=0 are inconsistent")
        return GaugeCertificate("not_gauge", None, [], jet.c0, None, None,
                                ts, diagnostics)

    report = verify_candidate(q, cand.B, ts, tol=tol, ode_tol=ode_tol,
                              jet=jet, tables=tables)
    B = cand.B
    if report.status == "undetermined":
        return GaugeCertificate("undetermined", B, cand.kernel, jet.c0, None,
                                report.residuals, ts, diagnostics + report.diagnostics)
    if not report.passed and cand.kernel:
        diagnostics.append(
            f"minimum-norm candidate failed; refining over the "
            f"{cand.kernel_dim}-dimensional solution family")
        B, notes = _refine_candidate(q, cand, jet, tables, ode_tol,
                                     max_iter=refine_max_iter)
        diagnostics.extend(notes)
        report = verify_candidate(q, B, ts, tol=tol, ode_tol=ode_tol,
                                  jet=jet, tables=tables)
        if report.status == "undetermined":
            return GaugeCertificate("undetermined", B, cand.kernel, jet.c0, None,
                                    report.residuals, ts,
                                    diagnostics + report.diagnostics)

    if report.passed:
        return GaugeCertificate("gauge", B, cand.kernel, jet.c0,
                                _reconstructed_field(jet, B), report.residuals,
                                ts, diagnostics + report.diagnostics)
    diagnostics.append("grid verification failed at the stated tolerance")
    return GaugeCertificate("not_gauge", B, cand.kernel, jet.c0, None,
                            report.residuals, ts, diagnostics + report.diagnostics)


# ---------------------------------------------------------------------------
# Linear-part removal (diagnostic reduction)
# ---------------------------------------------------------------------------

@dataclass
class ReducedSystem:
    """Sampled data of T^{-1} q(t, T y) with T' = C T, T(0) = I, plus the
    exact t=0 jet of the reduced system."""
    grid: np.ndarray
    constant_samples: np.ndarray
    field_samples: dict
    jet: JetData
    T: FlowCurve


def remove_linear_part(q: NonAutoSystem, grid=None, ode_tol: float = 1e-10) -> ReducedSystem:
    """Strip the linear part using the fundamental matrix T.

    The sampled tables are numeric; the returned jet is exact:
    reduced r_j = r_j + [C(0), p_j] and the reduced linear part is zero.
    """
    ts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    jet = extract_jet(q)
    T = solve_gauge_ode(q.linear, np.zeros((q.dim, q.dim)), np.eye(q.dim),
                        t_span=(float(ts.min()), float(ts.max())), tol=ode_tol)
    const_samples = np.empty((len(ts), q.dim))
    field_samples: dict = {j: [] for j in q.degrees()}
    for k, t in enumerate(ts):
        t = float(t)
        Tinv = T.inverse(t)
        const_samples[k] = Tinv @ q.constant_at(t)
        for j in q.degrees():
            field_samples[j].append(linear_pushforward(Tinv, q.degree_part_at(t, j)))
    C0_field = PolyField.from_linear(jet.C0)
    reduced_jet = JetData(
        dim=q.dim,
        c0=jet.c0.copy(),
        cdot0=jet.cdot0 - jet.C0 @ jet.c0,
        C0=np.zeros((q.dim, q.dim)),
        p={j: jet.p[j] for j in jet.p},
        r={j: jet.r[j] + lie_bracket(C0_field, jet.p[j]) for j in jet.r},
    )
    return ReducedSystem(ts, const_samples, field_samples, reduced_jet, T)


# ---------------------------------------------------------------------------
# Idempotents
# ---------------------------------------------------------------------------

@dataclass
class IdempotentSet:
    points: list
    spanning: bool
    conclusive: bool
    message: str

    @property
    def count(self) -> int:
        return len(self.points)


def find_idempotents(p: PolyField, starts: int = 200, seed: int = 0,
                     newton_iters: int = 60) -> IdempotentSet:
    """Complex solutions of p(c) = c, c != 0, by multistart Newton.

    A spanning set of idempotents certifies that B -> [B, p] is injective,
    so the candidate matrix in the identification step is unique.  An empty
    result is inconclusive, never a proof of nonexistence; so is a haul
    exceeding the Bezout bound (positive-dimensional solution set).
    """
    if p.dim > 3:
        raise ValueError("idempotent search is built for dim <= 3")
    if p.is_zero():
        return IdempotentSet([], False, False, "none found (inconclusive)")
    degs = p.degrees()
    if degs != [degs[0]] or degs[0] < 2:
        raise ValueError("field must be homogeneous of a single degree >= 2")
    m, n = degs[0], p.dim
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    found: list[np.ndarray] = []
    for _ in range(starts):
        c = rng.normal(size=n) + 1j * rng.normal(size=n)
        ok = False
        for _ in range(newton_iters):
            F = p.eval(c) - c
            if np.linalg.norm(F) <= 1e-12:
                ok = True
                break
            J = p.jacobian(c) - eye
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            c = c + step
            if not np.all(np.isfinite(c)) or np.linalg.norm(c) > 1e8:
                break
        if not ok and np.linalg.norm(p.eval(c) - c) > 1e-8:
            continue
        if np.linalg.norm(c) < 1e-8:
            continue
        for other in found:
            if np.linalg.norm(c - other) <= 1e-6:
                break
        else:
            found.append(c)
    # quantize the sort key above the dedup radius so rounding noise
    # cannot flip the reported order
    found.sort(key=lambda v: tuple(round(x, 5) for c in v for x in (c.real, c.imag)))

    if not found:
        return IdempotentSet([], False, False, "none found (inconclusive)")
    bezout = m ** n
    if len(found) > bezout:
        return IdempotentSet(found, False, False,
                             f"{len(found)} distinct solutions exceed the Bezout "
                             f"bound {bezout}; solution set looks positive-dimensional")
    sv = np.linalg.svd(np.array(found), compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0])) if sv[0] > 0 else 0
    spanning = rank == n
    return IdempotentSet(found, spanning, True,
                         f"{len(found)} idempotents, rank {rank} of {n}")
