"""Chart data ``(Lambda, Gamma, Omega)``: validation, torsion, curvature, presets."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .scalars import ONE, ZERO, GaussianRational, as_scalar, parse_scalar
from .series import EXACT, GradedSeries, SeriesError, VariableProfile, make_series, monomial, xv
from .weyl import WeylBundle

__all__ = [
    "ChartError",
    "ChartGeometry",
    "CheckResult",
    "ValidationReport",
    "PRESETS",
    "compatible_connection",
    "load_chart",
    "parse_chart_json",
    "preset",
]

HALF = GaussianRational(1, 0) / 2


class ChartError(ValueError):
    """Malformed or invalid chart input."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def first_failure(self) -> CheckResult | None:
        return next((c for c in self.checks if not c.passed), None)


def _invert_constant(mat: list[list[GaussianRational]]) -> list[list[GaussianRational]]:
    """Gauss-Jordan inverse over Q[i]; raises ``ZeroDivisionError`` if singular."""
    n = len(mat)
    aug = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _constant_term(s: GradedSeries) -> GaussianRational:
    n = s.n
    return s.coeff((0, (0,) * n, (0,) * n, ()))


class ChartGeometry:
    """Geometric input on one chart, with jets at the origin.

    ``lam[j][k]`` is ``Lambda^{jk}``, ``gamma[l][j][k]`` is ``Gamma^l_{jk}``
    (fiber-free series), ``omega2`` a fiber-free nu-formal 2-form.  ``x_order``,
    ``fiber_order`` and ``nu_order`` are the default truncations.
    """

    def __init__(self, n, lam, gamma, omega2=None, *, x_order=10, fiber_order=4, nu_order=5, name="chart"):
        self.n = n
        self.x_order = x_order
        self.fiber_order = fiber_order
        self.nu_order = nu_order
        self.name = name
        self.base_profile = VariableProfile(n, x_order, max(2, 2 * nu_order), "y")
        conv = self._to_base
        if len(lam) != n or any(len(row) != n for row in lam):
            raise ChartError(f"lambda must be an {n}x{n} table")
        if len(gamma) != n or any(len(m) != n or any(len(r) != n for r in m) for m in gamma):
            raise ChartError(f"gamma must be an {n}x{n}x{n} table")
        self.lam = [[conv(c) for c in row] for row in lam]
        self.gamma = [[[conv(c) for c in row] for row in mat] for mat in gamma]
        self.omega2 = conv(omega2) if omega2 is not None else GradedSeries.zero(self.base_profile)
        self._bundles: dict = {}

    def _to_base(self, c) -> GradedSeries:
        if isinstance(c, GradedSeries):
            if c.n != self.n:
                raise ChartError("jet dimension does not match the chart")
            if not c.is_fiber_free():
                raise ChartError("geometric jets must not depend on fiber variables")
            return c.retag(self.base_profile)
        return GradedSeries.constant(self.base_profile, as_scalar(c))

    # derived tables ---------------------------------------------------

    def in_profile(self, s: GradedSeries, profile: VariableProfile) -> GradedSeries:
        return s.retag(profile)

    def bundle(self, profile: VariableProfile) -> WeylBundle:
        if profile not in self._bundles:
            self._bundles[profile] = WeylBundle(profile, self.lam, self.gamma)
        return self._bundles[profile]

    def weyl_profile(self, K: int) -> VariableProfile:
        """Profile for Fedosov computations to total degree ``K`` (headroom 2)."""
        return VariableProfile(self.n, self.x_order, K + 2, "y")

    def symbol_profile(self, tag: str = "xi", fiber_order: int | None = None) -> VariableProfile:
        return VariableProfile(self.n, self.x_order, fiber_order or self.fiber_order, tag)

    def omega_upper(self) -> list[list[GradedSeries]]:
        n = self.n
        return [[(self.lam[j][k] - self.lam[k][j]).scale(HALF) for k in range(n)] for j in range(n)]

    def omega_lower(self) -> list[list[GradedSeries]]:
        """Jet inverse ``omega_{jk}`` of ``omega^{jk}``."""
        n = self.n
        up = self.omega_upper()
        c0 = [[_constant_term(up[j][k]) for k in range(n)] for j in range(n)]
        try:
            a0 = _invert_constant(c0)
        except ZeroDivisionError:
            raise ChartError("omega^{jk} has a singular constant term") from None
        prof = self.base_profile
        A0 = [[GradedSeries.constant(prof, a0[j][k]) for k in range(n)] for j in range(n)]
        N = [[up[j][k] - c0[j][k] for k in range(n)] for j in range(n)]
        if all(not N[j][k].terms and N[j][k].valid_x == EXACT for j in range(n) for k in range(n)):
            return A0
        # (w0 + N)^-1 = sum_m (-A0 N)^m A0
        step = _matmul([[-e for e in row] for row in A0], N)
        term, total = A0, A0
        for _ in range(self.x_order + 1):
            term = _matmul(step, term)
            if all(not e.terms for row in term for e in row):
                break
            total = [[total[j][k] + term[j][k] for k in range(n)] for j in range(n)]
        return total

    def torsion(self) -> list[list[list[GradedSeries]]]:
        """``T^j_{kl} = Gamma^j_{kl} - Gamma^j_{lk}`` as ``T[j][k][l]``."""
        n, g = self.n, self.gamma
        return [[[g[j][k][l] - g[j][l][k] for l in range(n)] for k in range(n)] for j in range(n)]

    def curvature(self) -> list[list[list[list[GradedSeries]]]]:
        """``R^s_{tkl} = d_k G^s_{lt} - d_l G^s_{kt} + G^s_{kq} G^q_{lt} - G^s_{lq} G^q_{kt}``."""
        n, g = self.n, self.gamma
        R = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for s in range(n):
            for t in range(n):
                for k in range(n):
                    for l in range(n):
                        v = g[s][l][t].deriv(xv(k)) - g[s][k][t].deriv(xv(l))
                        for q in range(n):
                            v = v + g[s][k][q] * g[q][l][t] - g[s][l][q] * g[q][k][t]
                        R[s][t][k][l] = v
        return R

    def element_T(self, profile: VariableProfile) -> GradedSeries:
        """``(1/2) omega_{sa} T^a_{kl} y^s dx^k dx^l``."""
        n = self.n
        wl = self.omega_lower()
        T = self.torsion()
        out = GradedSeries.zero(profile)
        for s in range(n):
            for k in range(n):
                for l in range(n):
                    if k == l:
                        continue
                    c = GradedSeries.zero(self.base_profile)
                    for a in range(n):
                        c = c + wl[s][a] * T[a][k][l]
                    if c.terms or c.valid_x != EXACT:
                        out = out + c.retag(profile) * monomial(profile, HALF, f={s: 1}, odd=(k, l))
        return out

    def element_R(self, profile: VariableProfile) -> GradedSeries:
        """``(1/4) omega_{sa} R^a_{tkl} y^s y^t dx^k dx^l``."""
        n = self.n
        wl = self.omega_lower()
        R = self.curvature()
        quarter = HALF * HALF
        out = GradedSeries.zero(profile)
        for s in range(n):
            for t in range(n):
                for k in range(n):
                    for l in range(n):
                        if k == l:
                            continue
                        c = GradedSeries.zero(self.base_profile)
                        for a in range(n):
                            c = c + wl[s][a] * R[a][t][k][l]
                        if c.terms or c.valid_x != EXACT:
                            f = {s: 1}
                            f[t] = f.get(t, 0) + 1
                            out = out + c.retag(profile) * monomial(profile, quarter, f=f, odd=(k, l))
        return out

    def omega_element(self, profile: VariableProfile) -> GradedSeries:
        return self.omega2.retag(profile)

    # validation -------------------------------------------------------

    def validate(self) -> ValidationReport:
        n = self.n
        lam, g = self.lam, self.gamma
        checks = []

        first = None
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    v = lam[j][k].deriv(xv(l))
                    for m in range(n):
                        v = v + g[j][l][m] * lam[m][k] + g[k][l][m] * lam[j][m]
                    if v.terms and first is None:
                        first = (j + 1, k + 1, l + 1, v.render())
        checks.append(
            CheckResult(
                "lambda-parallel",
                first is None,
                "" if first is None else f"(j,k,l)=({first[0]},{first[1]},{first[2]}) residual {first[3]}",
            )
        )

        up = self.omega_upper()
        first = None
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    v = up[j][k].deriv(xv(l))
                    for m in range(n):
                        v = v + g[j][l][m] * up[m][k] + g[k][l][m] * up[j][m]
                    if v.terms and first is None:
                        first = (j + 1, k + 1, l + 1)
        checks.append(
            CheckResult("omega-parallel", first is None, "" if first is None else "(j,k,l)=(%d,%d,%d)" % first)
        )

        c0 = [[_constant_term(up[j][k]) for k in range(n)] for j in range(n)]
        try:
            _invert_constant(c0)
            checks.append(CheckResult("omega-nondegenerate", True))
        except ZeroDivisionError:
            checks.append(CheckResult("omega-nondegenerate", False, "constant term of omega^{jk} is singular"))

        om = self.omega2
        bad_form = [k for k in om.terms if len(k[3]) != 2 or any(k[2])]
        d_om = GradedSeries.zero(self.base_profile)
        if om.valid_x > 0:
            for j in range(n):
                d_om = d_om + om.deriv(xv(j)).wedge_left(j)
        if bad_form:
            checks.append(CheckResult("Omega-closed", False, "Omega is not a fiber-free 2-form"))
        else:
            checks.append(
                CheckResult(
                    "Omega-closed",
                    d_om.is_zero(),
                    "" if d_om.is_zero() else f"first term of dOmega: {d_om.sorted_terms()[0][0]}",
                )
            )
        bad_nu = [k for k in om.terms if k[0] == 0]
        checks.append(
            CheckResult(
                "Omega-divisible-by-nu",
                not bad_nu,
                "" if not bad_nu else f"nu-free term {sorted(bad_nu)[0]}",
            )
        )
        return ValidationReport(tuple(checks))

    def validated(self) -> "ChartGeometry":
        rep = self.validate()
        if not rep.ok:
            raise ChartError(f"chart {self.name!r} failed validation: {rep.first_failure().line()}")
        return self


def _matmul(A, B):
    n = len(A)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = A[i][0] * B[0][j]
            for k in range(1, n):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------- construction helpers


def compatible_connection(omega_upper_const, A):
    """``Gamma^j_{lm} = A^{jk}_l omega_{km}`` for constant ``omega^{jk}``.

    ``A[j][k][l]`` must be symmetric in ``(j, k)``; entries are scalars or
    fiber-free series.  Returns ``gamma[j][l][m]``.
    """
    n = len(omega_upper_const)
    wl = _invert_constant([[as_scalar(v) for v in row] for row in omega_upper_const])
    for j in range(n):
        for k in range(n):
            for l in range(n):
                if A[j][k][l] != A[k][j][l]:
                    raise ChartError("A^{jk}_l must be symmetric in (j, k)")
    return [
        [[sum(A[j][k][l] * wl[k][m] for k in range(n)) for m in range(n)] for l in range(n)]
        for j in range(n)
    ]


def _zeros3(n):
    return [[[0] * n for _ in range(n)] for _ in range(n)]


def _moyal_lam():
    return [[0, 1], [-1, 0]]


def _preset_moyal(**orders):
    return ChartGeometry(2, _moyal_lam(), _zeros3(2), name="moyal2", **orders)


def _preset_wick(**orders):
    return ChartGeometry(2, [[0, 2], [0, 0]], _zeros3(2), name="wick2", **orders)


def _preset_torsion(**orders):
    g = _zeros3(2)
    g[0][0][1] = 1  # Gamma^1_{12}
    return ChartGeometry(2, _moyal_lam(), g, name="torsion2", **orders)


def _preset_moyal_omega(**orders):
    geo = ChartGeometry(2, _moyal_lam(), _zeros3(2), name="moyal2-omega", **orders)
    geo.omega2 = monomial(geo.base_profile, nu=1, odd=(0, 1))
    return geo


def _preset_curved(**orders):
    # A^{11}_2 = x^1 gives Gamma^1_{22} = -x^1: nonzero curvature, zero torsion
    geo = ChartGeometry(2, _moyal_lam(), _zeros3(2), name="curved2", **orders)
    x1 = monomial(geo.base_profile, x={0: 1})
    A = [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]
    A[0][0][1] = x1
    gamma = compatible_connection(_moyal_lam(), A)
    return ChartGeometry(2, _moyal_lam(), gamma, name="curved2", **orders)


PRESETS = {
    "moyal2": _preset_moyal,
    "wick2": _preset_wick,
    "torsion2": _preset_torsion,
    "moyal2-omega": _preset_moyal_omega,
    "curved2": _preset_curved,
}


def preset(name: str, **orders) -> ChartGeometry:
    try:
        return PRESETS[name](**orders)
    except KeyError:
        raise ChartError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


# ---------------------------------------------------------------- JSON ingestion


def _parse_poly(obj, path: str, prof: VariableProfile) -> GradedSeries:
    if not isinstance(obj, list):
        raise ChartError(f"{path}: expected a list of terms")
    terms = []
    seen = set()
    for i, t in enumerate(obj):
        p = f"{path}[{i}]"
        if not isinstance(t, dict) or "coeff" not in t:
            raise ChartError(f"{p}: expected an object with 'coeff' and 'exp'")
        try:
            c = parse_scalar(str(t["coeff"]))
        except ValueError as exc:
            raise ChartError(f"{p}.coeff: {exc}") from None
        exp = t.get("exp", [0] * prof.n)
        if not isinstance(exp, list) or len(exp) != prof.n or not all(isinstance(e, int) and e >= 0 for e in exp):
            raise ChartError(f"{p}.exp: expected {prof.n} non-negative integers")
        key = tuple(exp)
        if key in seen:
            raise ChartError(f"{p}: duplicate monomial {exp}")
        seen.add(key)
        terms.append(({"x": key}, c))
    try:
        return make_series(prof, terms, exact=True)
    except SeriesError as exc:
        raise ChartError(f"{path}: {exc}") from None


def _parse_form(obj, path: str, prof: VariableProfile) -> GradedSeries:
    if not isinstance(obj, list):
        raise ChartError(f"{path}: expected a list of form terms")
    out = GradedSeries.zero(prof)
    for i, t in enumerate(obj):
        p = f"{path}[{i}]"
        if not isinstance(t, dict) or "coeff" not in t or "dx" not in t:
            raise ChartError(f"{p}: expected an object with 'coeff', 'dx' and optional 'exp', 'nu'")
        try:
            c = parse_scalar(str(t["coeff"]))
        except ValueError as exc:
            raise ChartError(f"{p}.coeff: {exc}") from None
        exp = t.get("exp", [0] * prof.n)
        if not isinstance(exp, list) or len(exp) != prof.n:
            raise ChartError(f"{p}.exp: expected {prof.n} non-negative integers")
        nu = t.get("nu", 1)
        dx = t["dx"]
        if not isinstance(nu, int) or nu < 0:
            raise ChartError(f"{p}.nu: expected a non-negative integer")
        if not isinstance(dx, list) or not all(isinstance(d, int) and 1 <= d <= prof.n for d in dx):
            raise ChartError(f"{p}.dx: expected 1-based form indices")
        try:
            out = out + monomial(prof, c, x=tuple(exp), nu=nu, odd=tuple(d - 1 for d in dx))
        except SeriesError as exc:
            raise ChartError(f"{p}: {exc}") from None
    return out


def parse_chart_json(text: str, name: str = "chart") -> ChartGeometry:
    """Build a chart from its JSON description (not validated)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChartError(f"{name}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ChartError(f"{name}: top level must be an object")
    n = doc.get("n")
    if not isinstance(n, int) or n < 2 or n % 2:
        raise ChartError(f"{name}.n: expected an even integer >= 2")
    orders = doc.get("orders", {})
    if not isinstance(orders, dict):
        raise ChartError(f"{name}.orders: expected an object")
    kw = {}
    for key, arg in (("x", "x_order"), ("fiber", "fiber_order"), ("nu", "nu_order")):
        if key in orders:
            v = orders[key]
            if not isinstance(v, int) or v < 1:
                raise ChartError(f"{name}.orders.{key}: expected a positive integer")
            kw[arg] = v
    geo = ChartGeometry(n, [[0] * n] * n, _zeros3(n), name=name, **kw)
    prof = geo.base_profile
    lam = doc.get("lambda")
    if not isinstance(lam, list) or len(lam) != n:
        raise ChartError(f"{name}.lambda: expected an {n}x{n} table")
    lam_s = []
    for j, row in enumerate(lam):
        if not isinstance(row, list) or len(row) != n:
            raise ChartError(f"{name}.lambda[{j}]: expected {n} entries")
        lam_s.append([_parse_poly(c, f"{name}.lambda[{j}][{k}]", prof) for k, c in enumerate(row)])
    gam = doc.get("gamma", None)
    if gam is None:
        gam_s = _zeros3(n)
    else:
        if not isinstance(gam, list) or len(gam) != n:
            raise ChartError(f"{name}.gamma: expected an {n}x{n}x{n} table")
        gam_s = []
        for l, mat in enumerate(gam):
            if not isinstance(mat, list) or len(mat) != n:
                raise ChartError(f"{name}.gamma[{l}]: expected {n} rows")
            rows = []
            for j, row in enumerate(mat):
                if not isinstance(row, list) or len(row) != n:
                    raise ChartError(f"{name}.gamma[{l}][{j}]: expected {n} entries")
                rows.append([_parse_poly(c, f"{name}.gamma[{l}][{j}][{k}]", prof) for k, c in enumerate(row)])
            gam_s.append(rows)
    om = _parse_form(doc.get("omega2", []), f"{name}.omega2", prof)
    return ChartGeometry(n, lam_s, gam_s, om, name=name, **kw)


def load_chart(ref: str, **orders) -> ChartGeometry:
    """Preset name, path, or a file in ``$FEDFORGE_CHART_DIR``."""
    if ref in PRESETS:
        return preset(ref, **orders)
    path = Path(ref)
    if not path.exists():
        base = os.environ.get("FEDFORGE_CHART_DIR")
        if base:
            for cand in (Path(base) / ref, Path(base) / f"{ref}.json"):
                if cand.exists():
                    path = cand
                    break
    if not path.exists():
        raise ChartError(f"no preset or chart file named {ref!r}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ChartError(f"cannot read {path}: {exc}") from None
    geo = parse_chart_json(text, name=path.name)
    if orders:
        geo = ChartGeometry(
            geo.n, geo.lam, geo.gamma, geo.omega2, name=geo.name,
            x_order=orders.get("x_order", geo.x_order),
            fiber_order=orders.get("fiber_order", geo.fiber_order),
            nu_order=orders.get("nu_order", geo.nu_order),
        )
    return geo
