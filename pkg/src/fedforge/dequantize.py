"""Dequantization: ``xi(zeta)``, ``zeta(xi)``, the source/target maps and their checks."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .fedosov import FedosovData, Verdict, zero_verdict
from .geometry import HALF
from .quantizer import kappa, tau_classical
from .scalars import ONE, GaussianRational
from .series import (
    EXACT,
    GradedSeries,
    SeriesError,
    VariableProfile,
    fv,
    monomial,
    reverse_fiber_system,
    xv,
)
from .symbols import op_L, op_R, sigma_symbol, tstar_bracket, zeta

__all__ = [
    "DequantizationResult",
    "S_of",
    "T_of",
    "dequantize",
    "source_target",
    "verify_morphisms",
    "verify_symplectic",
    "xi_of_zeta",
    "zeta_of_xi",
]


def _profiles(data: FedosovData, fiber_order: int | None):
    geo = data.geometry
    N = fiber_order or geo.fiber_order
    if N > data.K:
        raise SeriesError(f"fiber order {N} exceeds the computed degree {data.K}")
    return VariableProfile(geo.n, geo.x_order, N, "zeta"), VariableProfile(geo.n, geo.x_order, N, "xi")


def _half_lambda_sub(data: FedosovData, prof: VariableProfile, transpose: bool) -> dict:
    """``y^k <- (1/2) Lambda^{kj} v_j`` (or ``Lambda^{jk}`` when ``transpose``)."""
    geo = data.geometry
    n = geo.n
    sub = {}
    for k in range(n):
        acc = GradedSeries.zero(prof)
        for j in range(n):
            lam = geo.lam[j][k] if transpose else geo.lam[k][j]
            acc = acc + _jet(lam, prof).scale(HALF) * monomial(prof, f={j: 1})
        sub[fv(k)] = acc
    return sub


def _jet(c: GradedSeries, prof: VariableProfile) -> GradedSeries:
    n = prof.n
    return GradedSeries._build(prof, {(k[0], k[1], (0,) * n, k[3]): v for k, v in c.terms.items()}, c.valid_x, EXACT)


def _to_symbol(w: GradedSeries, sub: dict, prof: VariableProfile) -> GradedSeries:
    """Substitute the fiber variables of a nu-free Weyl 0-form into a symbol profile."""
    return w.substitute(sub, prof)


def xi_of_zeta(data: FedosovData, fiber_order: int | None = None) -> list[GradedSeries]:
    """``xi_p = zeta_p - r_p(x, (1/2)Lambda^{.j} zeta_j) + r_p(x, (1/2)Lambda^{j.} zeta_j)`` with ``r = r^v``."""
    zprof, _ = _profiles(data, fiber_order)
    n = zprof.n
    first = _half_lambda_sub(data, zprof, transpose=False)
    second = _half_lambda_sub(data, zprof, transpose=True)
    out = []
    for p in range(n):
        rp = data.r_component(p, classical=True)
        val = monomial(zprof, f={p: 1}) - _to_symbol(rp, first, zprof) + _to_symbol(rp, second, zprof)
        out.append(val)
    return out


def zeta_of_xi(data: FedosovData, fiber_order: int | None = None, xi_z=None) -> list[GradedSeries]:
    """Inverse of :func:`xi_of_zeta`: ``zeta_p`` as series in ``xi``."""
    xi_z = xi_z or xi_of_zeta(data, fiber_order)
    return reverse_fiber_system(xi_z)


def source_target(
    data: FedosovData,
    fiber_order: int | None = None,
    presentation: str = "xi",
    *,
    zeta_xi: list[GradedSeries] | None = None,
    swap_source: bool = False,
) -> tuple[list[GradedSeries], list[GradedSeries]]:
    """``s^k = kappa^k(x, (1/2)Lambda^{.j} zeta_j)``, ``t^k = kappa^k(x, (1/2)Lambda^{j.} zeta_j)``.

    ``presentation="xi"`` substitutes ``zeta = zeta(xi)`` afterwards.
    ``swap_source`` builds ``s`` with the transposed Lambda (a negative control).
    """
    zprof, xprof = _profiles(data, fiber_order)
    kap = kappa(data)
    first = _half_lambda_sub(data, zprof, transpose=swap_source)
    second = _half_lambda_sub(data, zprof, transpose=True)
    s = [_to_symbol(k, first, zprof) for k in kap]
    t = [_to_symbol(k, second, zprof) for k in kap]
    if presentation == "zeta":
        return s, t
    if presentation != "xi":
        raise SeriesError(f"unknown presentation {presentation!r}")
    zx = zeta_xi or zeta_of_xi(data, fiber_order)
    assign = {fv(p): zx[p] for p in range(zprof.n)}
    return [a.substitute(assign, xprof) for a in s], [a.substitute(assign, xprof) for a in t]


def _compose(f: GradedSeries, maps: list[GradedSeries]) -> GradedSeries:
    """``f(maps)`` for a fiber-free ``f(x)``."""
    prof = maps[0].profile
    fj = _jet(f, prof)
    return fj.substitute({xv(k): maps[k] for k in range(prof.n)})


def S_of(f: GradedSeries, s: list[GradedSeries]) -> GradedSeries:
    """``Sf = f(s)``."""
    return _compose(f, s)


def T_of(f: GradedSeries, t: list[GradedSeries]) -> GradedSeries:
    """``Tf = f(t)``."""
    return _compose(f, t)


def base_poisson(data: FedosovData, f: GradedSeries, g: GradedSeries) -> GradedSeries:
    """``{f, g} = omega^{jk} d_j f d_k g`` on the base."""
    up = data.geometry.omega_upper()
    n = data.geometry.n
    out = GradedSeries.zero(f.profile)
    for j in range(n):
        for k in range(n):
            c = up[j][k]
            if c.terms:
                out = out + c.retag(f.profile) * f.deriv(xv(j)) * g.deriv(xv(k))
    return out


def random_polys(data: FedosovData, count: int, degree: int, seed: int) -> list[GradedSeries]:
    rng = random.Random(seed)
    prof = data.profile
    n = prof.n
    out = []
    for _ in range(count):
        p = GradedSeries.zero(prof)
        for _ in range(rng.randint(1, 4)):
            exp = [0] * n
            for _ in range(rng.randint(1, degree)):
                exp[rng.randrange(n)] += 1
            p = p + monomial(prof, rng.choice((-3, -2, -1, 1, 2, 3)), x=tuple(exp))
        out.append(p)
    return out


def verify_morphisms(
    data: FedosovData,
    s: list[GradedSeries],
    t: list[GradedSeries],
    pairs: list[tuple[GradedSeries, GradedSeries]],
) -> list[Verdict]:
    """Multiplicativity and (anti-)Poisson property of ``S`` and ``T``, and ``{Sf, Tg} = 0``."""
    names = [
        "S(fg) = Sf Sg",
        "S{f,g} = {Sf,Sg}",
        "T(fg) = Tf Tg",
        "T{f,g} = -{Tf,Tg}",
        "{Sf,Tg} = 0",
    ]
    worst = {nm: EXACT for nm in names}
    failed: dict[str, Verdict] = {}
    for f, g in pairs:
        Sf, Sg, Tf, Tg = S_of(f, s), S_of(g, s), T_of(f, t), T_of(g, t)
        fg = f * g
        pb = base_poisson(data, f, g)
        residuals = [
            S_of(fg, s) - Sf * Sg,
            S_of(pb, s) - tstar_bracket(Sf, Sg),
            T_of(fg, t) - Tf * Tg,
            T_of(pb, t) + tstar_bracket(Tf, Tg),
            tstar_bracket(Sf, Tg),
        ]
        for nm, res in zip(names, residuals):
            if nm in failed:
                continue
            v = zero_verdict(nm, res)
            if not v.passed:
                failed[nm] = Verdict(nm, False, v.valid, f"f={f.render()}, g={g.render()}: {v.detail}")
            worst[nm] = min(worst[nm], v.valid)
    return [failed.get(nm) or Verdict(nm, True, worst[nm]) for nm in names]


def _d(F: GradedSeries) -> GradedSeries:
    """Exterior derivative in ``(x, zeta)``: ``dzeta_m`` is odd generator ``n + m``."""
    n = F.profile.n
    out = GradedSeries.zero(F.profile, F.valid_x - 1, F.valid - 1)
    for m in range(n):
        out = out + F.deriv(xv(m)).wedge_left(m) + F.deriv(fv(m)).wedge_left(n + m)
    return out


def verify_symplectic(
    data: FedosovData,
    fiber_order: int | None = None,
    *,
    swap_source: bool = False,
    xi_z: list[GradedSeries] | None = None,
) -> tuple[Verdict, GradedSeries]:
    """``omega_{jk}(s) ds^j ds^k - omega_{jk}(t) dt^j dt^k = 2 dx^p dxi_p`` in ``(x, zeta)``.

    Returns the verdict and the left-hand side.
    """
    zprof, _ = _profiles(data, fiber_order)
    n = zprof.n
    wide = VariableProfile(n, zprof.x_order, zprof.order, "zeta", odd=2 * n)
    s, t = source_target(data, fiber_order, presentation="zeta", swap_source=swap_source)
    s = [a.retag(wide) for a in s]
    t = [a.retag(wide) for a in t]
    xi = [a.retag(wide) for a in (xi_z or xi_of_zeta(data, fiber_order))]
    wl = data.geometry.omega_lower()

    def side(maps):
        dm = [_d(m) for m in maps]
        acc = GradedSeries.zero(wide)
        for j in range(n):
            for k in range(n):
                w = _jet(wl[j][k], wide)
                if not w.terms and w.valid_x == EXACT:
                    continue
                wc = w.substitute({xv(m): maps[m] for m in range(n)})
                acc = acc + wc * dm[j] * dm[k]
        return acc

    lhs = side(s) - side(t)
    rhs = GradedSeries.zero(wide)
    for p in range(n):
        rhs = rhs + monomial(wide, 2, odd=(p,)) * _d(xi[p])
    v = zero_verdict("symplectic identity", lhs - rhs)
    return v, lhs


@dataclass
class DequantizationResult:
    zeta_of_xi: list[GradedSeries]
    xi_of_zeta: list[GradedSeries]
    s: list[GradedSeries]
    t: list[GradedSeries]
    verdicts: list[Verdict] = field(default_factory=list)
    t_minus_s_constant: GaussianRational | None = None

    @property
    def ok(self) -> bool:
        return all(v.passed for v in self.verdicts)


def first_order_checks(data: FedosovData, s, t) -> tuple[list[Verdict], GaussianRational | None]:
    """First-order parts of ``s, t``, their zero-section restriction, and the ``t - s`` constant."""
    geo = data.geometry
    prof = s[0].profile
    n = prof.n
    out = []
    lin_s, lin_t, diff = [], [], []
    for k in range(n):
        xk = monomial(prof, x={k: 1})
        es = xk
        et = xk
        for l in range(n):
            xil = monomial(prof, f={l: 1})
            es = es + _jet(geo.lam[k][l], prof).scale(HALF) * xil
            et = et + _jet(geo.lam[l][k], prof).scale(HALF) * xil
        lin_s.append(_fiber_upto(s[k], 1) - es)
        lin_t.append(_fiber_upto(t[k], 1) - et)
        diff.append(_fiber_upto(t[k] - s[k], 1))
    out.append(_all_zero("s = x + (1/2)Lambda^{k.}xi mod xi^2", lin_s))
    out.append(_all_zero("t = x + (1/2)Lambda^{.k}xi mod xi^2", lin_t))
    out.append(
        _all_zero(
            "s|xi=0 = t|xi=0 = x",
            [s[k].at_fiber_zero() - monomial(prof, x={k: 1}) for k in range(n)]
            + [t[k].at_fiber_zero() - monomial(prof, x={k: 1}) for k in range(n)],
        )
    )
    # t - s = c omega^{kl} xi_l mod xi^2; find c
    up = geo.omega_upper()
    const = None
    ok = True
    for k in range(n):
        for l in range(n):
            wkl = _jet(up[k][l], prof)
            if not wkl.terms:
                continue
            key = (0, (0,) * n, tuple(1 if i == l else 0 for i in range(n)), ())
            w0 = wkl.coeff((0, (0,) * n, (0,) * n, ()))
            if w0:
                const = diff[k].coeff(key) / w0
                break
        if const is not None:
            break
    if const is None or not const:
        ok = False
    else:
        for k in range(n):
            target = GradedSeries.zero(prof)
            for l in range(n):
                target = target + _jet(up[k][l], prof).scale(const) * monomial(prof, f={l: 1})
            if not (diff[k] - target).is_zero():
                ok = False
    out.append(Verdict("t - s = c omega^{kl} xi_l mod xi^2, c != 0", ok, detail=f"c = {const.render() if const is not None else '?'}"))
    return out, const


def _fiber_upto(s: GradedSeries, d: int) -> GradedSeries:
    return GradedSeries(s.profile, {k: c for k, c in s.terms.items() if sum(k[2]) <= d}, s.valid_x, EXACT)


def _all_zero(name: str, residuals: list[GradedSeries]) -> Verdict:
    worst = EXACT
    for r in residuals:
        v = zero_verdict(name, r)
        if not v.passed:
            return v
        worst = min(worst, v.valid)
    return Verdict(name, True, worst)


def joint_linear_part_invertible(data: FedosovData, s, t) -> Verdict:
    """The ``2n x 2n`` fiber-linear part of ``(s - x, t - x)`` together with the base shift is invertible."""
    from .geometry import _invert_constant

    prof = s[0].profile
    n = prof.n
    # Jacobian of (x, xi) -> (s, t) at the zero section and base point
    rows = []
    for maps in (s, t):
        for k in range(n):
            row = []
            for m in range(n):
                row.append(maps[k].deriv(xv(m)).coeff((0, (0,) * n, (0,) * n, ())))
            for m in range(n):
                key = (0, (0,) * n, tuple(1 if i == m else 0 for i in range(n)), ())
                row.append(maps[k].coeff(key))
            rows.append(row)
    try:
        _invert_constant(rows)
        return Verdict("(s, t) fiber-linear part invertible", True)
    except ZeroDivisionError:
        return Verdict("(s, t) fiber-linear part invertible", False, detail="singular Jacobian")


def check_pipeline_agreement(data: FedosovData, zx: list[GradedSeries], fiber_order=None) -> Verdict:
    """``zeta(xi)`` from inversion equals ``sigma(Z_p)`` from probing."""
    probed = zeta(data, fiber_order)
    res = [zx[p] - probed[p].retag(zx[p].profile) for p in range(len(zx))]
    v = _all_zero("zeta: inversion = sigma(Z_p)", res)
    if v.passed and min(r.valid for r in res) < (fiber_order or data.geometry.fiber_order):
        return Verdict(v.name, False, v.valid, "agreement not justified to the full fiber order")
    return v


def check_S_symbol(data: FedosovData, s, t, f: GradedSeries) -> list[Verdict]:
    """``Sf = sigma(L_f)`` and ``Tf = sigma(R_f)``."""
    from .quantizer import tau

    prof = s[0].profile
    tf = tau(f, data)
    L = sigma_symbol(op_L(tf, data), prof)
    R = sigma_symbol(op_R(tf, data), prof)
    return [
        zero_verdict("Sf = sigma(L_f)", S_of(f, s) - L),
        zero_verdict("Tf = sigma(R_f)", T_of(f, t) - R),
    ]


def dequantize(data: FedosovData, fiber_order: int | None = None, *, seed: int = 0, samples: int = 3) -> DequantizationResult:
    """Compute ``zeta(xi)``, ``xi(zeta)``, ``s``, ``t`` and run the structural checks."""
    xz = xi_of_zeta(data, fiber_order)
    zx = zeta_of_xi(data, fiber_order, xz)
    s, t = source_target(data, fiber_order, zeta_xi=zx)
    verdicts = []
    # round trip: xi(zeta(xi)) = xi
    back = [xz[p].substitute({fv(q): zx[q] for q in range(len(zx))}, zx[0].profile) for p in range(len(xz))]
    verdicts.append(
        _all_zero("xi(zeta(xi)) = xi", [back[p] - monomial(zx[0].profile, f={p: 1}) for p in range(len(zx))])
    )
    verdicts.append(check_pipeline_agreement(data, zx, fiber_order))
    fo, const = first_order_checks(data, s, t)
    verdicts += fo
    verdicts.append(joint_linear_part_invertible(data, s, t))
    fs = random_polys(data, 2 * samples, 3, seed)
    pairs = list(zip(fs[::2], fs[1::2]))
    verdicts += verify_morphisms(data, s, t, pairs)
    verdicts.append(verify_symplectic(data, fiber_order, xi_z=xz)[0])
    return DequantizationResult(zx, xz, s, t, verdicts, const)
