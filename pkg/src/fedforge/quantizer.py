"""Flat sections ``tau(f)``, the star product, and the nu-free lift ``kappa``."""

from __future__ import annotations

from dataclasses import dataclass

from .fedosov import FedosovData, Verdict, apply_D, apply_D_classical, zero_verdict
from .scalars import ONE, GaussianRational
from .series import EXACT, GradedSeries, SeriesError, fv, monomial, xv

__all__ = [
    "StarSeries",
    "UncertifiedOrder",
    "extract_C",
    "kappa",
    "kappa_linear_part",
    "star",
    "tau",
    "tau_classical",
    "verify_natural",
]


class UncertifiedOrder(SeriesError):
    """A nu-order beyond what the truncation justifies was requested."""


def _as_jet(f, data: FedosovData) -> GradedSeries:
    prof = data.profile
    if isinstance(f, GradedSeries):
        if not f.is_fiber_free() or any(k[3] for k in f.terms):
            raise SeriesError("tau expects a fiber-free function of x")
        return f.retag(prof)
    return GradedSeries.constant(prof, f)


def tau(f, data: FedosovData) -> GradedSeries:
    """The flat section with ``tau(f)|_{y=0} = f``, to total degree ``K``.

    nu-formal inputs are handled coefficientwise.
    """
    f = _as_jet(f, data)
    key = ("tau", f)
    hit = data.tau_cache.get(key)
    if hit is not None:
        return hit
    out = GradedSeries.zero(data.profile)
    for m, fm in f.nu_coefficients().items():
        if 2 * m > data.K:
            continue
        out = out + _tau_nu_free(fm, data, data.K - 2 * m).times_nu(m)
    out = out.truncate(order=data.K)
    data.tau_cache[key] = out
    return out


def _tau_nu_free(f: GradedSeries, data: FedosovData, K: int) -> GradedSeries:
    W = data.bundle
    r_parts = data.r_parts
    f = GradedSeries(f.profile, f.terms, f.valid_x, EXACT)
    parts = [f]
    zero = GradedSeries.zero(data.profile)
    for k in range(0, K):
        rhs = W.nabla(parts[k]).component("Deg", k)
        acc = zero
        for l in range(0, k):
            rp = r_parts.get(l + 2)
            if rp is not None and rp.terms and parts[k - l].terms:
                acc = acc + W.scaled_commutator(rp, parts[k - l])
        if acc.terms:
            rhs = rhs + acc.component("Deg", k)
        parts.append(W.delta_inv(rhs).component("Deg", k + 1))
    total = zero
    for p in parts:
        total = total + p
    return total.truncate(order=K)


def tau_classical(f, data: FedosovData) -> GradedSeries:
    """nu-free flat section of ``D^v`` with value ``f`` on the zero section."""
    if data.r_classical is None:
        raise SeriesError("classical part not computed")
    f = _as_jet(f, data)
    if any(k[0] for k in f.terms):
        raise SeriesError("tau_classical expects a nu-free function")
    key = ("tau_classical", f)
    hit = data.tau_cache.get(key)
    if hit is not None:
        return hit
    W = data.bundle
    parts = [GradedSeries(f.profile, f.terms, f.valid_x, EXACT)]
    zero = GradedSeries.zero(data.profile)
    cp = data.classical_parts
    for k in range(0, data.K):
        rhs = W.nabla(parts[k]).component("deg_s", k)
        for l in range(0, k):
            rp = cp.get(l + 2)
            if rp is not None and rp.terms and parts[k - l].terms:
                rhs = rhs + W.poisson(rp, parts[k - l]).component("deg_s", k)
        parts.append(_exact(W.delta_inv(rhs.component("deg_s", k)).component("deg_s", k + 1)))
    total = zero
    for p in parts:
        total = total + p
    total = total.truncate(order=data.K)
    data.tau_cache[key] = total
    return total


def _exact(s: GradedSeries) -> GradedSeries:
    return GradedSeries(s.profile, s.terms, s.valid_x, EXACT)


@dataclass(frozen=True)
class StarSeries:
    """``f * g = sum_r nu^r C_r(f, g)`` with the certified nu-orders."""

    value: GradedSeries
    certified_order: int

    def coefficient(self, r: int) -> GradedSeries:
        if r > self.certified_order:
            raise UncertifiedOrder(f"C_{r} is beyond the certified order {self.certified_order}")
        v = self.value
        return v.nu_coefficients().get(r, GradedSeries.zero(v.profile, v.valid_x, v.valid - 2 * r))

    @property
    def coefficients(self) -> list[GradedSeries]:
        return [self.coefficient(r) for r in range(self.certified_order + 1)]

    def render(self) -> str:
        return self.value.render()

    def __str__(self) -> str:
        return self.render()


def star(f, g, data: FedosovData) -> StarSeries:
    """``(tau(f) o tau(g))|_{y=0}``."""
    val = data.bundle.pairing(tau(f, data), tau(g, data))
    cert = int(min(val.valid, data.K)) // 2 if val.valid != EXACT else data.K // 2
    return StarSeries(val, cert)


def star_value(f, g, data: FedosovData) -> GradedSeries:
    """The star product as a nu-formal jet (validity carried along)."""
    return star(f, g, data).value


def extract_C(data: FedosovData, r: int, f, g) -> GradedSeries:
    return star(f, g, data).coefficient(r)


def kappa(data: FedosovData) -> list[GradedSeries]:
    """``kappa^k = tau(x^k)^v``."""
    return [tau_classical(monomial(data.profile, x={k: 1}), data) for k in range(data.profile.n)]


def kappa_linear_part(data: FedosovData, kap: list[GradedSeries] | None = None):
    """Matrix ``chi^m_k`` of the fiber-linear part of ``kappa^m`` at the base point."""
    kap = kap or kappa(data)
    n = data.profile.n
    mat = []
    for m in range(n):
        row = []
        for k in range(n):
            key = (0, (0,) * n, tuple(1 if i == k else 0 for i in range(n)), ())
            row.append(kap[m].coeff(key))
        mat.append(row)
    return mat


# ---------------------------------------------------------------- checks


def check_tau(f, data: FedosovData) -> list[Verdict]:
    t = tau(f, data)
    fj = _as_jet(f, data)
    return [
        zero_verdict("tau(f)|y=0 = f", t.at_fiber_zero() - fj),
        zero_verdict("D tau(f) = 0", apply_D(t, data)),
    ]


def check_tau_classical(f, data: FedosovData) -> list[Verdict]:
    t = tau_classical(f, data)
    fj = _as_jet(f, data)
    return [
        zero_verdict("tau^v(f)|y=0 = f", t.at_fiber_zero() - fj),
        zero_verdict("D^v tau^v(f) = 0", apply_D_classical(t, data)),
        zero_verdict("tau(f)|nu=0 = tau^v(f)", tau(f, data).at_nu_zero() - t),
    ]


def check_kappa_poisson(data: FedosovData) -> Verdict:
    """``(d kappa^p/d y^k) omega_{pq}(kappa) (d kappa^q/d y^l) = omega_{kl}(x)``."""
    geo = data.geometry
    prof = data.profile
    n = prof.n
    kap = kappa(data)
    wl = [[geo.omega_lower()[p][q].retag(prof) for q in range(n)] for p in range(n)]
    assign = {xv(m): kap[m] for m in range(n)}
    wl_k = [[wl[p][q].substitute(assign) for q in range(n)] for p in range(n)]
    dk = [[kap[p].deriv(fv(k)) for k in range(n)] for p in range(n)]
    resid = GradedSeries.zero(prof)
    worst = EXACT
    for k in range(n):
        for l in range(n):
            acc = -wl[k][l]
            for p in range(n):
                for q in range(n):
                    acc = acc + dk[p][k] * wl_k[p][q] * dk[q][l]
            worst = min(worst, acc.valid)
            if acc.terms:
                v = zero_verdict("kappa Poisson identity", acc)
                return Verdict(v.name, False, v.valid, f"(k,l)=({k + 1},{l + 1}) {v.detail}")
    return Verdict("kappa Poisson identity", True, worst)


def verify_natural(data: FedosovData, k: int, l: int, seed: int = 0) -> Verdict:
    """``f -> tau(f)^{(k)}_{k-2l}`` is a differential operator of order ``<= k - l``."""
    from .symbols import reconstruct

    if not 0 <= l <= (k - 1) // 2:
        raise SeriesError(f"l={l} outside 0..{(k - 1) // 2} for k={k}")
    if k > data.K:
        raise SeriesError(f"k={k} exceeds the computed degree {data.K}")
    n = data.profile.n
    fdeg = k - 2 * l
    name = f"order(tau^({k})_{fdeg}) <= {k - l}"
    betas = [b for b in _multi(n, fdeg)]
    bound = k - l
    max_order = k
    for beta in betas:
        key_f = beta

        def action(f, key_f=key_f):
            t = tau(f, data).component("Deg", k)
            out = {}
            for (nu, x, fe, odd), c in t.terms.items():
                if fe == key_f and nu == l:
                    out[(0, x, (0,) * n, odd)] = c
            return GradedSeries._build(data.profile, out, t.valid_x, EXACT)

        try:
            op = reconstruct(action, data.profile, max_order=max_order, seed=seed, nu_orders=0)
        except SeriesError as exc:
            return Verdict(name, False, detail=str(exc))
        for (r, gamma), c in op.coeffs.items():
            if sum(gamma) > bound and c.terms:
                return Verdict(name, False, detail=f"y^{beta}: derivative {gamma} has coefficient {c.render()}")
    return Verdict(name, True)


def _multi(n: int, k: int):
    if n == 1:
        yield (k,)
        return
    for v in range(k, -1, -1):
        for tail in _multi(n - 1, k - v):
            yield (v,) + tail
