"""Natural nu-formal differential operators, recovered by probing, and their symbols.

An operator is stored as ``A = sum_r (i nu)^r A_r`` with
``A_r = sum_gamma a_{r,gamma}(x) d^gamma``.  It is natural when ``|gamma| <= r``
whenever ``a_{r,gamma} != 0``; its symbol is
``sigma(A) = sum_r sum_{|gamma| = r} a_{r,gamma}(x) xi^gamma``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable

from .scalars import I, ONE, GaussianRational
from .series import EXACT, GradedSeries, SeriesError, VariableProfile, fv, monomial, xv

__all__ = [
    "NaturalDiffOp",
    "NaturalityError",
    "ReconstructionError",
    "compose",
    "op_L",
    "op_R",
    "op_Z",
    "reconstruct",
    "scaled_op_commutator",
    "sigma_symbol",
    "tstar_bracket",
    "zeta",
]


class ReconstructionError(SeriesError):
    """Held-out verification failed: the action is not an operator of the probed order."""


class NaturalityError(SeriesError):
    """``A_r`` has a derivative of order above ``r``."""


def _multi_upto(n: int, k: int):
    """Multi-indices of total degree ``<= k``, by degree."""
    out = []
    for d in range(k + 1):
        out.extend(_multi(n, d))
    return out


def _multi(n: int, k: int):
    if n == 1:
        return [(k,)]
    res = []
    for v in range(k, -1, -1):
        for tail in _multi(n - 1, k - v):
            res.append((v,) + tail)
    return res


def _leq(g, b) -> bool:
    return all(x <= y for x, y in zip(g, b))


def _fact(b) -> int:
    out = 1
    for v in b:
        out *= math.factorial(v)
    return out


@dataclass
class NaturalDiffOp:
    """Coefficient table ``(r, gamma) -> a_{r,gamma}(x)`` with certified nu-orders ``0..nu_valid``."""

    profile: VariableProfile
    coeffs: dict
    nu_valid: int
    max_order: int
    meta: dict = field(default_factory=dict)

    def order_bound(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (r, gamma), c in self.coeffs.items():
            if c.terms:
                out[r] = max(out.get(r, 0), sum(gamma))
        return out

    def naturality_violations(self) -> list[tuple[int, tuple]]:
        return sorted((r, g) for (r, g), c in self.coeffs.items() if c.terms and sum(g) > r)

    def check_natural(self) -> "NaturalDiffOp":
        bad = self.naturality_violations()
        if bad:
            r, g = bad[0]
            raise NaturalityError(
                f"coefficient of (i nu)^{r} d^{g} is {self.coeffs[(r, g)].render()}, order {sum(g)} > {r}"
            )
        return self

    def coefficient(self, r: int, gamma: tuple) -> GradedSeries:
        return self.coeffs.get((r, tuple(gamma)), GradedSeries.zero(self.profile))

    def apply(self, f: GradedSeries) -> GradedSeries:
        """``A f``, valid through ``nu^nu_valid``."""
        f = f.retag(self.profile) if f.profile != self.profile else f
        n = self.profile.n
        derivs = {(0,) * n: f}

        def d(gamma):
            if gamma not in derivs:
                j = next(i for i, v in enumerate(gamma) if v)
                lower = gamma[:j] + (gamma[j] - 1,) + gamma[j + 1 :]
                derivs[gamma] = d(lower).deriv(xv(j))
            return derivs[gamma]

        out = GradedSeries.zero(self.profile)
        for (r, gamma), c in sorted(self.coeffs.items()):
            if not c.terms:
                continue
            out = out + (c * d(gamma)).scale(I**r).times_nu(r)
        return out.truncate(order=2 * self.nu_valid + 1)

    def __call__(self, f):
        return self.apply(f)

    def equals(self, other: "NaturalDiffOp") -> bool:
        """Coefficientwise equality on the common certified range."""
        top = min(self.nu_valid, other.nu_valid)
        keys = {k for k in self.coeffs if k[0] <= top} | {k for k in other.coeffs if k[0] <= top}
        return all((self.coefficient(*k) - other.coefficient(*k)).is_zero() for k in keys)

    def difference(self, other: "NaturalDiffOp") -> list[tuple]:
        top = min(self.nu_valid, other.nu_valid)
        keys = {k for k in self.coeffs if k[0] <= top} | {k for k in other.coeffs if k[0] <= top}
        return sorted(k for k in keys if not (self.coefficient(*k) - other.coefficient(*k)).is_zero())


def _random_poly(profile: VariableProfile, degree: int, rng: random.Random) -> GradedSeries:
    n = profile.n
    out = GradedSeries.zero(profile)
    for beta in _multi_upto(n, degree):
        c = rng.randint(-3, 3)
        if c:
            out = out + monomial(profile, c, x=beta)
    if not out.terms:
        out = monomial(profile, x={0: degree})
    return out


def reconstruct(
    action: Callable[[GradedSeries], GradedSeries],
    profile: VariableProfile,
    max_order: int,
    *,
    seed: int = 0,
    nu_orders: int | None = None,
    holdout: int = 2,
) -> NaturalDiffOp:
    """Recover ``A`` from its action on the monomials ``x^beta``, ``|beta| <= max_order``.

    ``nu_orders`` caps the certified nu-orders (``0`` treats the output as
    nu-free).  The result is checked against ``holdout`` seeded random
    polynomials of degree ``max_order + 1``.
    """
    n = profile.n
    coeffs: dict = {}
    nu_valid = nu_orders if nu_orders is not None else 10**9
    outputs = {}
    for beta in _multi_upto(n, max_order):
        out = action(monomial(profile, x=beta))
        if out.profile != profile:
            out = out.retag(profile)
        outputs[beta] = out
        if out.valid != EXACT:
            nu_valid = min(nu_valid, int(out.valid) // 2)
    if nu_valid == 10**9:
        nu_valid = max((k[0] for o in outputs.values() for k in o.terms), default=0)
    for beta in _multi_upto(n, max_order):
        ob = outputs[beta]
        parts = ob.nu_coefficients()
        bf = _fact(beta)
        for m in range(nu_valid + 1):
            val = parts.get(m, GradedSeries.zero(profile, ob.valid_x)).scale(ONE / (I**m))
            for gamma in _multi_upto(n, sum(beta) - 1):
                if not _leq(gamma, beta):
                    continue
                a = coeffs.get((m, gamma))
                if a is None or not a.terms:
                    continue
                fall = _fact(beta) // _fact(tuple(b - g for b, g in zip(beta, gamma)))
                val = val - (a * monomial(profile, fall, x=tuple(b - g for b, g in zip(beta, gamma))))
            a_beta = val.scale(GaussianRational(1) / bf)
            a_beta = GradedSeries(profile, a_beta.terms, a_beta.valid_x, EXACT)
            if a_beta.terms or a_beta.valid_x != EXACT:
                coeffs[(m, beta)] = a_beta
    op = NaturalDiffOp(profile, coeffs, nu_valid, max_order)
    rng = random.Random(seed)
    for _ in range(holdout):
        p = _random_poly(profile, max_order + 1, rng)
        lhs = action(p)
        if lhs.profile != profile:
            lhs = lhs.retag(profile)
        diff = (lhs - op.apply(p)).truncate(order=2 * nu_valid + 1)
        if not diff.is_zero():
            key, c = diff.sorted_terms()[0]
            raise ReconstructionError(
                f"held-out probe {p.render()} disagrees at {GradedSeries(profile, {key: c}).render()}"
            )
    return op


def sigma_symbol(A: NaturalDiffOp, profile: VariableProfile) -> GradedSeries:
    """``sum_r sum_{|gamma| = r} a_{r,gamma} xi^gamma`` in a ``xi``-tagged profile."""
    A.check_natural()
    if profile.tag == "y":
        raise SeriesError("symbols live in a xi or zeta profile")
    out = GradedSeries.zero(profile)
    for (r, gamma), c in A.coeffs.items():
        if sum(gamma) != r or r > profile.order:
            continue
        out = out + _jet_to(c, profile) * monomial(profile, f=gamma)
    top = min(A.nu_valid, A.max_order)
    return out.truncate(order=top)


def _jet_to(c: GradedSeries, profile: VariableProfile) -> GradedSeries:
    n = profile.n
    raw = {(0, k[1], (0,) * n, ()): v for k, v in c.terms.items()}
    return GradedSeries._build(profile, raw, c.valid_x, EXACT)


def tstar_bracket(F: GradedSeries, G: GradedSeries) -> GradedSeries:
    """``{F, G} = dF/dxi_k dG/dx^k - dG/dxi_k dF/dx^k``."""
    out = GradedSeries.zero(F.profile, min(F.valid_x, G.valid_x) - 1, min(F.valid, G.valid) - 1)
    for k in range(F.profile.n):
        out = out + F.deriv(fv(k)) * G.deriv(xv(k)) - G.deriv(fv(k)) * F.deriv(xv(k))
    return out


def compose(A: NaturalDiffOp, B: NaturalDiffOp, *, seed: int = 0) -> NaturalDiffOp:
    order = A.max_order + B.max_order
    op = reconstruct(lambda f: A.apply(B.apply(f)), A.profile, order, seed=seed, nu_orders=min(A.nu_valid, B.nu_valid))
    return op


def scaled_op_commutator(A: NaturalDiffOp, B: NaturalDiffOp, *, seed: int = 0) -> NaturalDiffOp:
    """``(1/(i nu)) [A, B]``."""

    def action(f):
        c = A.apply(B.apply(f)) - B.apply(A.apply(f))
        return c.exact_div_nu().scale(-I)

    order = A.max_order + B.max_order
    return reconstruct(action, A.profile, order, seed=seed, nu_orders=min(A.nu_valid, B.nu_valid) - 1)


# ---------------------------------------------------------------- operators from Fedosov data


def default_max_order(data) -> int:
    return data.K // 2 + 1


def op_L(w: GradedSeries, data, max_order: int | None = None, seed: int = 0) -> NaturalDiffOp:
    """``L[w] f = <w, tau(f)>``."""
    from .quantizer import tau

    W = data.bundle
    if any(k[3] for k in w.terms):
        raise SeriesError("L[w] needs a 0-form")
    op = reconstruct(
        lambda f: W.pairing(w, tau(f, data)),
        data.profile,
        max_order if max_order is not None else default_max_order(data),
        seed=seed,
    )
    return op.check_natural()


def op_R(w: GradedSeries, data, max_order: int | None = None, seed: int = 0) -> NaturalDiffOp:
    """``R[w] f = <tau(f), w>``."""
    from .quantizer import tau

    W = data.bundle
    if any(k[3] for k in w.terms):
        raise SeriesError("R[w] needs a 0-form")
    op = reconstruct(
        lambda f: W.pairing(tau(f, data), w),
        data.profile,
        max_order if max_order is not None else default_max_order(data),
        seed=seed,
    )
    return op.check_natural()


def op_Z(p: int, data, max_order: int | None = None, seed: int = 0) -> NaturalDiffOp:
    """``Z_p f = i nu (d tau(f)/d y^p)|_{y=0}``."""
    from .quantizer import tau

    def action(f):
        return tau(f, data).deriv(fv(p)).at_fiber_zero().scale(I).times_nu(1)

    op = reconstruct(
        action,
        data.profile,
        max_order if max_order is not None else default_max_order(data),
        seed=seed,
    )
    return op.check_natural()


def zeta(data, fiber_order: int | None = None) -> list[GradedSeries]:
    """``zeta_p = sigma(Z_p)`` in the ``xi`` presentation."""
    prof = data.geometry.symbol_profile("xi", fiber_order)
    return [sigma_symbol(op_Z(p, data), prof) for p in range(data.profile.n)]
