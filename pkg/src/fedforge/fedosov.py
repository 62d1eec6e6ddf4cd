"""The Fedosov element ``r``, its nu-free part, and the connections ``D`` and ``D^v``."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as _iproduct

from .geometry import ChartGeometry
from .scalars import I, GaussianRational
from .series import EXACT, GradedSeries, SeriesError, monomial
from .weyl import WeylBundle

__all__ = [
    "FedosovData",
    "InvariantViolation",
    "Verdict",
    "apply_D",
    "apply_D_classical",
    "compute_r",
    "compute_r_classical",
    "fedosov_data",
    "probe_basis",
]


class InvariantViolation(RuntimeError):
    """An identity that holds by construction failed: an engine bug."""


@dataclass(frozen=True)
class Verdict:
    """Outcome of an exact check.  ``valid`` is the degree through which it was verified."""

    name: str
    passed: bool
    valid: float = EXACT
    detail: str = ""

    def line(self) -> str:
        v = "exact" if self.valid == EXACT else f"Deg<={self.valid}"
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} [{v}]" + (f": {self.detail}" if self.detail else "")


def zero_verdict(name: str, residual: GradedSeries, min_valid=None) -> Verdict:
    """Pass iff ``residual`` has no stored terms (and is justified to ``min_valid``)."""
    ok = residual.is_zero()
    detail = ""
    if not ok:
        key, c = residual.sorted_terms()[0]
        one = GradedSeries(residual.profile, {key: c})
        detail = f"first offending term {one.render()}"
    elif min_valid is not None and residual.valid < min_valid:
        ok = False
        detail = f"only verified to degree {residual.valid}, needed {min_valid}"
    return Verdict(name, ok, residual.valid, detail)


@dataclass
class FedosovData:
    geometry: ChartGeometry
    K: int
    bundle: WeylBundle
    r_parts: dict[int, GradedSeries]
    r: GradedSeries
    classical_parts: dict[int, GradedSeries] = field(default_factory=dict)
    r_classical: GradedSeries | None = None
    tau_cache: dict = field(default_factory=dict, repr=False)

    @property
    def profile(self):
        return self.bundle.profile

    @property
    def certified_order(self) -> int:
        return self.K // 2

    def embed(self, s: GradedSeries) -> GradedSeries:
        """Move a fiber-free jet into the Weyl profile of this data."""
        return s.retag(self.profile)

    def r_component(self, p: int, classical: bool = False) -> GradedSeries:
        """Coefficient ``r_p`` of ``dx^p`` (a 0-form)."""
        src = self.r_classical if classical else self.r
        if src is None:
            raise SeriesError("classical part not computed")
        comps = src.odd_components()
        return comps.get((p,), GradedSeries.zero(self.profile, src.valid_x, src.valid))


def _rhs_sources(geometry: ChartGeometry, bundle: WeylBundle):
    prof = bundle.profile
    T = geometry.element_T(prof)
    R = geometry.element_R(prof)
    Om = geometry.omega_element(prof)
    return T, R, Om


def compute_r(geometry: ChartGeometry, K: int = 8, *, reverse_order: bool = False) -> FedosovData:
    """Solve ``delta r = T + R + nabla r - (i/nu) r o r + Omega`` degree by degree in ``Deg``.

    ``reverse_order`` accumulates the right-hand side in the opposite order
    (used only to confirm the answer does not depend on it).
    """
    if K < 2:
        raise SeriesError("K must be at least 2")
    prof = geometry.weyl_profile(K)
    W = geometry.bundle(prof)
    T, R, Om = _rhs_sources(geometry, W)
    T_parts, R_parts, Om_parts = T.graded_parts("Deg"), R.graded_parts("Deg"), Om.graded_parts("Deg")
    zero = GradedSeries.zero(prof)
    parts: dict[int, GradedSeries] = {0: zero, 1: zero}
    for k in range(1, K):
        rhs = T_parts.get(k, zero) + R_parts.get(k, zero) + Om_parts.get(k, zero)
        rhs = rhs + W.nabla(parts[k]).component("Deg", k)
        quad = zero
        for a in (range(k, 1, -1) if reverse_order else range(2, k + 1)):
            b = k + 2 - a
            if b < 2:
                continue
            if parts[a].terms and parts[b].terms:
                quad = quad + W.product(parts[a], parts[b])
        if quad.terms:
            rhs = rhs + _minus_i_over_nu(quad.component("Deg", k + 2))
        parts[k + 1] = W.delta_inv(rhs.component("Deg", k)).component("Deg", k + 1)
    r = zero
    for k in range(2, K + 1):
        r = r + parts[k]
    r = r.truncate(order=K)
    return FedosovData(geometry, K, W, parts, r)


def _minus_i_over_nu(s: GradedSeries) -> GradedSeries:
    try:
        return s.exact_div_nu().scale(-I)
    except SeriesError as exc:
        raise InvariantViolation(f"r o r is not divisible by nu: {exc}") from None


def compute_r_classical(data_or_geometry, K_s: int | None = None) -> FedosovData:
    """Solve ``delta r = T + R + nabla r + (1/2){r, r}`` degree by degree in ``deg_s``."""
    if isinstance(data_or_geometry, FedosovData):
        data = data_or_geometry
    else:
        data = compute_r(data_or_geometry, K_s or 8)
    K_s = K_s or data.K
    if K_s > data.K:
        raise SeriesError("classical degree exceeds the computed profile")
    W = data.bundle
    prof = W.profile
    T, R, _ = _rhs_sources(data.geometry, W)
    T_parts, R_parts = T.graded_parts("deg_s"), R.graded_parts("deg_s")
    zero = GradedSeries.zero(prof)
    half = GaussianRational(1) / 2
    parts: dict[int, GradedSeries] = {0: zero, 1: zero}
    for k in range(1, K_s):
        rhs = T_parts.get(k, zero) + R_parts.get(k, zero)
        rhs = rhs + W.nabla(parts[k]).component("deg_s", k)
        for a in range(2, k + 1):
            b = k + 2 - a
            if b >= 2 and parts[a].terms and parts[b].terms:
                rhs = rhs + W.poisson(parts[a], parts[b]).component("deg_s", k).scale(half)
        parts[k + 1] = _exact(W.delta_inv(rhs.component("deg_s", k)).component("deg_s", k + 1))
    rc = zero
    for k in range(2, K_s + 1):
        rc = rc + parts[k]
    data.classical_parts = parts
    data.r_classical = rc.truncate(order=K_s)
    return data


def _exact(s: GradedSeries) -> GradedSeries:
    return GradedSeries(s.profile, s.terms, s.valid_x, EXACT)


def fedosov_data(geometry: ChartGeometry, K: int = 8) -> FedosovData:
    """Both recursions at total degree ``K``."""
    return compute_r_classical(compute_r(geometry, K), K)


# ---------------------------------------------------------------- connections


def apply_D(w: GradedSeries, data: FedosovData) -> GradedSeries:
    """``-delta w + nabla w - (i/nu)[r, w]``."""
    W = data.bundle
    return -W.delta(w) + W.nabla(w) + W.scaled_commutator(data.r, w)


def apply_D_classical(w: GradedSeries, data: FedosovData) -> GradedSeries:
    """``-delta w + nabla w + {r^v, w}_TM``."""
    W = data.bundle
    if data.r_classical is None:
        raise SeriesError("classical part not computed")
    return -W.delta(w) + W.nabla(w) + W.poisson(data.r_classical, w)


def probe_basis(data: FedosovData, max_degree: int = 2) -> list[GradedSeries]:
    """Monomials ``y^alpha`` with ``|alpha| <= max_degree``."""
    n = data.profile.n
    out = []
    for alpha in _iproduct(range(max_degree + 1), repeat=n):
        if sum(alpha) <= max_degree:
            out.append(monomial(data.profile, f=alpha))
    return out


# ---------------------------------------------------------------- checks


def residual_r(data: FedosovData) -> GradedSeries:
    """``delta r - (T + R + nabla r - (i/nu) r o r + Omega)``."""
    W = data.bundle
    T, R, Om = _rhs_sources(data.geometry, W)
    r = data.r
    rr = W.product(r, r)
    return W.delta(r) - (T + R + W.nabla(r) + _minus_i_over_nu(rr) + Om)


def residual_r_classical(data: FedosovData) -> GradedSeries:
    W = data.bundle
    T, R, _ = _rhs_sources(data.geometry, W)
    rc = data.r_classical
    # the nu-free recursion only sees deg_s, and T, R have no nu
    return W.delta(rc) - (T + R + W.nabla(rc) + W.poisson(rc, rc).scale(GaussianRational(1) / 2))


def check_side_conditions(data: FedosovData) -> list[Verdict]:
    W = data.bundle
    out = []
    r = data.r
    out.append(zero_verdict("r has no Deg 0/1 part", r.component("Deg", 0) + r.component("Deg", 1)))
    out.append(zero_verdict("delta^-1 r = 0", W.delta_inv(r)))
    out.append(Verdict("r is a 1-form", all(len(k[3]) == 1 for k in r.terms)))
    if data.r_classical is not None:
        rc = data.r_classical
        out.append(Verdict("r^v is nu-free", all(k[0] == 0 for k in rc.terms)))
        out.append(zero_verdict("delta^-1 r^v = 0", W.delta_inv(rc)))
    return out


def check_flatness(data: FedosovData, classical: bool = False, max_degree: int = 2) -> Verdict:
    """``D^2 = 0`` (or ``(D^v)^2 = 0``) on the probe basis."""
    D = apply_D_classical if classical else apply_D
    name = "(D^v)^2 = 0 on probes" if classical else "D^2 = 0 on probes"
    worst = EXACT
    for w in probe_basis(data, max_degree):
        v = zero_verdict(name, D(D(w, data), data))
        worst = min(worst, v.valid)
        if not v.passed:
            return Verdict(name, False, v.valid, f"probe {w.render()}: {v.detail}")
    return Verdict(name, True, worst)


def check_classical_limit(data: FedosovData) -> Verdict:
    """``r|_{nu=0} = r^v``."""
    diff = data.r.at_nu_zero() - data.r_classical
    return zero_verdict("r|nu=0 = r^v", diff)


def check_T_R_identities(data: FedosovData) -> list[Verdict]:
    W = data.bundle
    T, R, _ = _rhs_sources(data.geometry, W)
    return [
        zero_verdict("delta T = 0", W.delta(T)),
        zero_verdict("delta R = nabla T", W.delta(R) - W.nabla(T)),
    ]


def fedosov_checks(data: FedosovData) -> list[Verdict]:
    out = [
        zero_verdict("Fedosov equation residual", residual_r(data), data.K - 1),
        zero_verdict("classical Fedosov equation residual", residual_r_classical(data), data.K - 1),
    ]
    out += check_side_conditions(data)
    out.append(check_flatness(data))
    out.append(check_flatness(data, classical=True))
    out.append(check_classical_limit(data))
    out += check_T_R_identities(data)
    return out
