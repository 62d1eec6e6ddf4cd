"""``fedforge`` command line.

Exit codes: 0 ok, 1 usage, 2 chart or input rejected, 3 internal invariant
violated, 4 a verification failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .checks import SECTIONS, run_suite
from .dequantize import dequantize
from .fedosov import InvariantViolation, Verdict, check_flatness, fedosov_data, residual_r, residual_r_classical, zero_verdict
from .geometry import ChartError, load_chart
from .polyparse import PolyParseError, parse_poly
from .quantizer import (
    check_kappa_poisson,
    check_tau,
    check_tau_classical,
    kappa,
    star,
    tau,
    tau_classical,
    verify_natural,
)
from .series import EXACT, SeriesError
from .symbols import NaturalityError, ReconstructionError, zeta
from .weyl import DivisibilityError

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL, EXIT_VERIFY = 0, 1, 2, 3, 4

COMMANDS = ("r", "tau", "star", "kappa", "zeta", "dequantize", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    chart: str
    K: int = 8
    fiber_order: int | None = None
    x_order: int | None = None
    nu_order: int | None = None
    f: str | None = None
    g: str | None = None
    classical: bool = False
    check: bool = False
    format: str = "text"
    seed: int = 0

    def __post_init__(self):
        # symbols are certified through fiber degree K//2
        if self.fiber_order is None:
            self.fiber_order = max(1, min(4, self.K // 2))
        if self.x_order is None:
            self.x_order = self.K + 2
        if self.nu_order is None:
            self.nu_order = self.K // 2 + 1
        for name in ("K", "fiber_order", "x_order", "nu_order"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1")
        if self.K < 2:
            raise UsageError("--deg must be at least 2")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fedforge", description="Exact Fedosov quantization and dequantization on a chart.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--chart", required=True, help="preset name, JSON path, or a file in $FEDFORGE_CHART_DIR")
    p.add_argument("--deg", type=int, default=8, dest="K", help="maximal total degree K (default 8)")
    p.add_argument("--fiber-order", type=int, default=None, help="symbol fiber order N_f (default min(4, K//2))")
    p.add_argument("--x-order", type=int, default=None, help="x-jet order (default K+2)")
    p.add_argument("--nu-order", type=int, default=None, help="nu-order of chart data (default K//2+1)")
    p.add_argument("--f", help="polynomial, e.g. 'x1^2 - 1/2*x2'")
    p.add_argument("--g", help="second polynomial (star)")
    p.add_argument("--classical", action="store_true", help="nu-free variant (r, tau)")
    p.add_argument("--check", action="store_true", help="append verdicts")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int, default=0)
    return p


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    return RunConfig(**vars(ns))


# ---------------------------------------------------------------- output


class Report:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.items: list[tuple[str, str]] = []
        self.verdicts: list[tuple[str, Verdict]] = []
        self.notes: dict[str, str] = {}

    def item(self, label: str, value: str):
        self.items.append((label, value))

    def verdict(self, v: Verdict, section: str = ""):
        self.verdicts.append((section, v))

    @property
    def ok(self) -> bool:
        return all(v.passed for _, v in self.verdicts)

    def text(self) -> str:
        lines = []
        bare = self.cfg.command == "star" and len(self.items) == 1
        for label, value in self.items:
            lines.append(value if bare else f"{label} = {value}")
        for key, val in self.notes.items():
            lines.append(f"{key}: {val}")
        if self.verdicts:
            if self.cfg.command == "verify":
                lines.append(f"checklist ({len(self.verdicts)} checks):")
            for section, v in self.verdicts:
                lines.append((f"[{section}] " if section else "") + v.line())
            failed = [v for _, v in self.verdicts if not v.passed]
            if self.cfg.command == "verify":
                lines.append(f"{len(self.verdicts) - len(failed)} passed, {len(failed)} failed")
            if failed:
                lines.append(f"first failure: {failed[0].name}: {failed[0].detail}")
        return "\n".join(lines)

    def json(self) -> str:
        doc = {
            "command": self.cfg.command,
            "chart": self.cfg.chart,
            "K": self.cfg.K,
            "fiber_order": self.cfg.fiber_order,
            "x_order": self.cfg.x_order,
            "nu_order": self.cfg.nu_order,
            "results": [{"name": k, "value": v} for k, v in self.items],
            "notes": self.notes,
            "verdicts": [
                {
                    "section": s,
                    "name": v.name,
                    "passed": v.passed,
                    "valid": "exact" if v.valid == EXACT else int(v.valid),
                    "detail": v.detail,
                }
                for s, v in self.verdicts
            ],
            "ok": self.ok,
        }
        return json.dumps(doc, indent=2)


# ---------------------------------------------------------------- commands


def _poly(text, flag, data):
    if text is None:
        raise UsageError(f"{flag} is required")
    return parse_poly(text, data.profile)


def _cmd_r(cfg, data, rep):
    if cfg.classical:
        rep.item("r^v", data.r_classical.render())
        if cfg.check:
            rep.verdict(zero_verdict("classical Fedosov equation residual", residual_r_classical(data)))
            rep.verdict(check_flatness(data, classical=True))
    else:
        rep.item("r", data.r.render())
        if cfg.check:
            rep.verdict(zero_verdict("Fedosov equation residual", residual_r(data)))
            rep.verdict(check_flatness(data))


def _cmd_tau(cfg, data, rep):
    f = _poly(cfg.f, "--f", data)
    if cfg.classical:
        rep.item("tau^v(f)", tau_classical(f, data).render())
        checks = check_tau_classical(f, data) if cfg.check else []
    else:
        rep.item("tau(f)", tau(f, data).render())
        checks = check_tau(f, data) if cfg.check else []
    for v in checks:
        rep.verdict(v)


def _cmd_star(cfg, data, rep):
    f, g = _poly(cfg.f, "--f", data), _poly(cfg.g, "--g", data)
    s = star(f, g, data)
    rep.item("f*g", s.render())
    if cfg.check or cfg.format == "json":
        rep.notes["certified through"] = f"nu^{s.certified_order}"
    if cfg.check:
        from .checks import star_axioms

        for v in star_axioms(data, [(f, g)]):
            rep.verdict(v)


def _cmd_kappa(cfg, data, rep):
    for k, s in enumerate(kappa(data), 1):
        rep.item(f"kappa^{k}", s.render())
    if cfg.check:
        rep.verdict(check_kappa_poisson(data))


def _cmd_zeta(cfg, data, rep):
    for p, s in enumerate(zeta(data, cfg.fiber_order), 1):
        rep.item(f"zeta_{p}", s.render())
    for k in range(1, data.K + 1):
        for l in range(0, (k - 1) // 2 + 1):
            rep.verdict(verify_natural(data, k, l, seed=cfg.seed))


def _cmd_dequantize(cfg, data, rep):
    res = dequantize(data, cfg.fiber_order, seed=cfg.seed)
    for p, s in enumerate(res.zeta_of_xi, 1):
        rep.item(f"zeta_{p}(xi)", s.render())
    for p, s in enumerate(res.xi_of_zeta, 1):
        rep.item(f"xi_{p}(zeta)", s.render())
    for k, s in enumerate(res.s, 1):
        rep.item(f"s^{k}", s.render())
    for k, s in enumerate(res.t, 1):
        rep.item(f"t^{k}", s.render())
    if res.t_minus_s_constant is not None:
        rep.notes["t - s = c omega^{kl} xi_l, c"] = res.t_minus_s_constant.render()
    for v in res.verdicts:
        rep.verdict(v)


def _cmd_verify(cfg, geo, rep):
    for section, v in run_suite(geo, cfg.K, cfg.fiber_order, cfg.seed, sections=SECTIONS):
        rep.verdict(v, section)


_DISPATCH = {
    "r": _cmd_r,
    "tau": _cmd_tau,
    "star": _cmd_star,
    "kappa": _cmd_kappa,
    "zeta": _cmd_zeta,
    "dequantize": _cmd_dequantize,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute ``cfg``; returns the exit status and the text to print."""
    geo = load_chart(cfg.chart, x_order=cfg.x_order, fiber_order=cfg.fiber_order, nu_order=cfg.nu_order)
    geo = geo.validated()
    rep = Report(cfg)
    if cfg.fiber_order > cfg.K // 2 and cfg.command in ("zeta", "dequantize", "verify"):
        raise SeriesError(f"--fiber-order {cfg.fiber_order} exceeds the certified order {cfg.K // 2} of --deg {cfg.K}")
    if cfg.command == "verify":
        _cmd_verify(cfg, geo, rep)
    else:
        _DISPATCH[cfg.command](cfg, fedosov_data(geo, cfg.K), rep)
    out = rep.json() if cfg.format == "json" else rep.text()
    return (EXIT_OK if rep.ok else EXIT_VERIFY), out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
        code, out = run(cfg)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"fedforge: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChartError, PolyParseError) as exc:
        print(f"fedforge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, ReconstructionError, NaturalityError, DivisibilityError) as exc:
        print(f"fedforge: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except SeriesError as exc:
        print(f"fedforge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
