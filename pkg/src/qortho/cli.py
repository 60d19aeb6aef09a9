"""Command-line front end.

    qortho recurrence --q 1/2 --alpha 0 --weight unit --n-max 12
    qortho rhp-series --q 1/2 --alpha 0 --j-max 60 --det-check
    qortho verify theorem2 --q 1/2 --weight unit --n-max 16

Exit codes: 0 pass, 1 a verified claim failed, 2 bad input, 3 numeric failure.
Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

from . import __version__
from .errors import DomainError, NumericFailure, QOrthoError, ResonanceError
from .modelrhp import MODEL_POLICY, build_model, build_series_A, build_series_B, build_series_C, compute_C0
from .numerics import PrecisionPolicy, format_value, parse_rational, to_fraction_or_mp
from .orthopoly import build_recurrence
from .qcalc import QParams
from .verify import (
    bn_decay_check,
    connection_report,
    det_report,
    painleve_report,
    recurrence_policy,
    smallest_zero_scaling,
    theorem1_report,
    theorem2_report,
)
from .weights import check_admissibility, parse_weight

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

CLAIMS = ("theorem1", "theorem2", "connection", "painleve", "zeros", "admissible", "bn")

# per-command default for --n-max
DEFAULT_N_MAX = {"recurrence": 12, "theorem1": 12, "theorem2": 16, "painleve": 16, "zeros": 16, "bn": 16}


@dataclass(frozen=True)
class RunConfig:
    command: str
    q: str
    alpha: str
    weight: str
    n_max: int
    precision_bits: str
    tail_eps: Optional[str]
    output: Optional[str]
    format: str
    claim: Optional[str] = None
    j_max: Optional[int] = None
    det_check: bool = False

    @property
    def q_value(self):
        return parse_rational(self.q)

    @property
    def alpha_value(self):
        try:
            return parse_rational(self.alpha)
        except DomainError:
            return to_fraction_or_mp(self.alpha)

    def params(self) -> QParams:
        return QParams(self.q_value, self.alpha_value)

    def policy(self, n_max: int, floor_bits: int = 0) -> PrecisionPolicy:
        if self.precision_bits == "auto":
            base = recurrence_policy(self.q_value, self.alpha_value, n_max)
            bits = max(base.work_bits, floor_bits)
            eps = self.tail_eps or (base.tail_eps if bits == base.work_bits else Fraction(1, 2 ** (bits - 32)))
        else:
            try:
                bits = int(self.precision_bits)
            except ValueError as exc:
                raise DomainError(f"--precision-bits must be an integer or 'auto', got {self.precision_bits!r}") from exc
            eps = self.tail_eps or PrecisionPolicy().tail_eps
        return PrecisionPolicy(work_bits=bits, tail_eps=eps)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", default="1/2", help="q in (0, 1) as 'p/r' or a decimal literal")
    p.add_argument("--alpha", default="0", help="exponent of |x|^alpha, alpha > -1")
    p.add_argument("--weight", default="unit",
                   help="unit | qhermite1 | littleqjacobi:b=<r> | polyperturbation:c=<r> | table:<path.json>")
    p.add_argument("--n-max", type=int, default=None, help="largest degree")
    p.add_argument("--precision-bits", default="auto", help="working bits or 'auto'")
    p.add_argument("--tail-eps", default=None, help="truncation tolerance, e.g. 1e-40")
    p.add_argument("--output", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timings", action="store_true", help="add wall-clock per stage (breaks byte-identical output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qortho", description="q-orthogonal polynomials and their asymptotics")
    parser.add_argument("--version", action="version", version=f"qortho {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recurrence", help="recurrence coefficients a_n, b_n, gamma_n")
    _add_common(p)

    p = sub.add_parser("rhp-series", help="series solutions S_A, S_B, S_C and C0 of the model problem")
    _add_common(p)
    p.add_argument("--j-max", type=int, default=60)
    p.add_argument("--det-check", action="store_true", help="report max |psi rho - phi varphi - 1| on the test grid")

    p = sub.add_parser("verify", help="run one numerical check")
    p.add_argument("claim", choices=CLAIMS)
    _add_common(p)
    return parser


def _config(args) -> RunConfig:
    key = args.claim if args.command == "verify" else args.command
    n_max = args.n_max if args.n_max is not None else DEFAULT_N_MAX.get(key, 16)
    if n_max < 0:
        raise DomainError("--n-max must be non-negative")
    return RunConfig(
        command=args.command, q=args.q, alpha=args.alpha, weight=args.weight, n_max=n_max,
        precision_bits=str(args.precision_bits), tail_eps=args.tail_eps, output=args.output, format=args.format,
        claim=getattr(args, "claim", None), j_max=getattr(args, "j_max", None),
        det_check=getattr(args, "det_check", False),
    )


class _Stages:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.ms = {}

    def run(self, name, fn):
        t0 = time.perf_counter()
        out = fn()
        if self.enabled:
            self.ms[name] = round((time.perf_counter() - t0) * 1000, 3)
        return out


def _eps_text(policy: PrecisionPolicy) -> str:
    eps = policy.tail_eps
    if isinstance(eps, Fraction) and eps.numerator == 1 and eps.denominator & (eps.denominator - 1) == 0:
        return f"2^-{eps.denominator.bit_length() - 1}"
    return str(eps)


def _artifact(cfg: RunConfig, policy: PrecisionPolicy, exact: bool, result, stages: _Stages, passed=None) -> dict:
    out = {
        "tool": "qortho",
        "version": __version__,
        "config": {k: v for k, v in asdict(cfg).items() if k != "output"},
        "precision": {"work_bits": policy.work_bits, "tail_eps": _eps_text(policy),
                      "mode": "exact" if exact else "multiprecision"},
        "truncation": {"status": "ok"},
    }
    if passed is not None:
        out["passed"] = bool(passed)
    out["result"] = result
    if stages.enabled:
        out["timings_ms"] = stages.ms
    return out


def _csv_with_header(cfg: RunConfig, policy: PrecisionPolicy, body: str) -> str:
    head = {"config": {k: v for k, v in asdict(cfg).items() if k != "output"},
            "precision": {"work_bits": policy.work_bits, "tail_eps": _eps_text(policy)}}
    return f"# {json.dumps(head, sort_keys=True)}\n{body}"


def cmd_recurrence(cfg: RunConfig, stages: _Stages):
    params = cfg.params()
    spec = parse_weight(cfg.weight, params.q, params.alpha)
    policy = cfg.policy(cfg.n_max)
    rec = stages.run("recurrence", lambda: build_recurrence(spec, cfg.n_max, policy))
    if cfg.format == "csv":
        return _csv_with_header(cfg, policy, rec.to_csv()), True
    return _artifact(cfg, policy, rec.exact, rec.to_dict(), stages), True


def cmd_rhp_series(cfg: RunConfig, stages: _Stages):
    params = cfg.params()
    j_max = cfg.j_max
    if j_max is None or j_max < 2:
        raise DomainError("--j-max must be at least 2")
    policy = cfg.policy(0, floor_bits=MODEL_POLICY.work_bits)
    if cfg.tail_eps is None:
        policy = policy.with_eps(MODEL_POLICY.tail_eps)
    series = stages.run("series", lambda: [
        build_series_A(params, j_max, policy), build_series_B(params, j_max, policy), build_series_C(params, j_max, policy)])
    with policy.workprec():
        c0, gap = stages.run("C0", lambda: compute_C0(series[0], policy))
        result = {"series": [s.to_dict(c0) for s in series], "C0": format_value(c0, policy.work_bits),
                  "C0_gap": format_value(gap, 64)}
        passed = True
        alpha = params.alpha
        if -1 < alpha < 1:
            sol = stages.run("model", lambda: build_model(params, max(j_max, 40), policy))
            result["model"] = {k: v for k, v in sol.to_dict().items() if k != "series"}
            if cfg.det_check:
                rep = stages.run("det_check", lambda: det_report(sol))
                result["det_check"] = rep
                passed = rep["passed"]
        elif cfg.det_check:
            raise DomainError("--det-check needs the full model solution, i.e. -1 < alpha < 1")
    if cfg.format == "csv":
        lines = ["label,component,power,value"]
        for s in result["series"]:
            lines += [f"{s['label']},{c['component']},{c['power']},{c['value']}" for c in s["coeffs"]]
        return _csv_with_header(cfg, policy, "\n".join(lines) + "\n"), passed
    exact = all(s.exact for s in series)
    return _artifact(cfg, policy, exact, result, stages, passed), passed


def cmd_verify(cfg: RunConfig, stages: _Stages):
    params = cfg.params()
    claim = cfg.claim
    spec = parse_weight(cfg.weight, params.q, params.alpha)
    params = QParams(spec.q, spec.alpha)
    timings = stages.enabled

    if claim == "admissible":
        policy = cfg.policy(0)
        rep = stages.run("admissibility", lambda: check_admissibility(spec, policy=policy))
        return _finish(cfg, policy, False, rep.to_dict(), stages, True, _adm_csv(rep))

    if claim == "connection":
        policy = cfg.policy(0, floor_bits=MODEL_POLICY.work_bits)
        if cfg.tail_eps is None:
            policy = policy.with_eps(MODEL_POLICY.tail_eps)
        sol = stages.run("model", lambda: build_model(params, 80, policy))
        conn = stages.run("connection", lambda: connection_report(sol))
        det = stages.run("det", lambda: det_report(sol))
        ok = conn["passed"] and det["passed"]
        body = {"connection": conn, "det": det, "model": {k: v for k, v in sol.to_dict().items() if k != "series"}}
        csv_body = "check,t,residual\n" + "".join(
            f"{name},{t},{r}\n" for name, rep in (("connection", conn), ("det", det)) for t, r in zip(rep["grid"], rep["residuals"]))
        return _finish(cfg, policy, False, body, stages, ok, csv_body)

    extra = 1 if claim in ("painleve", "bn") else 0
    n_top = cfg.n_max + extra
    policy = cfg.policy(n_top)
    rec = stages.run("recurrence", lambda: build_recurrence(spec, n_top, policy))
    evens = [n for n in range(4, cfg.n_max + 1, 2)]

    if claim == "theorem2":
        if len(evens) < 4:
            raise DomainError("theorem2 needs --n-max >= 10")
        res = stages.run("theorem2", lambda: theorem2_report(rec, params, evens, timings=timings))
        return _finish(cfg, policy, rec.exact, res.to_dict(), stages, res.passed,
                       res.gamma.to_csv() + res.a.to_csv())
    if claim == "theorem1":
        ns = [n for n in evens if n >= 8]
        if len(ns) < 3:
            raise DomainError("theorem1 needs --n-max >= 12")
        sol = stages.run("model", lambda: build_model(params, 80, MODEL_POLICY))
        reps = stages.run("theorem1", lambda: theorem1_report(rec, sol, ns, timings=timings))
        ok = all(r.passed for r in reps)
        return _finish(cfg, policy, rec.exact, {"reports": [r.to_dict() for r in reps]}, stages, ok,
                       "".join(f"# {r.claim}\n{r.to_csv()}" for r in reps))
    if claim == "painleve":
        ns = list(range(4, cfg.n_max + 1))
        reps = stages.run("painleve", lambda: painleve_report(rec, ns, timings=timings))
        ok = all(r.passed for r in reps)
        return _finish(cfg, policy, rec.exact, {"reports": [r.to_dict() for r in reps]}, stages, ok,
                       "".join(f"# {r.claim}\n{r.to_csv()}" for r in reps))
    if claim == "zeros":
        sol = stages.run("model", lambda: build_model(params, 80, MODEL_POLICY))
        rep = stages.run("zeros", lambda: smallest_zero_scaling(rec, sol, evens, timings=timings))
        return _finish(cfg, policy, rec.exact, rep.to_dict(), stages, rep.passed, rep.to_csv())
    if claim == "bn":
        rep = stages.run("bn", lambda: bn_decay_check(rec, evens, timings=timings))
        return _finish(cfg, policy, rec.exact, rep.to_dict(), stages, rep.passed, rep.to_csv())
    raise DomainError(f"unknown claim {claim!r}")


def _adm_csv(rep) -> str:
    return "n,deviation\n" + "".join(f"{n},{format_value(d, 64)}\n" for n, d in rep.deviations)


def _finish(cfg, policy, exact, body, stages, passed, csv_body):
    if cfg.format == "csv":
        return _csv_with_header(cfg, policy, csv_body), passed
    return _artifact(cfg, policy, exact, body, stages, passed), passed


COMMANDS = {"recurrence": cmd_recurrence, "rhp-series": cmd_rhp_series, "verify": cmd_verify}


def _error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ResonanceError):
        payload["kind"] = "resonance"
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        stages = _Stages(args.timings)
        artifact, passed = COMMANDS[args.command](cfg, stages)
    except NumericFailure as exc:
        return _error(exc, EXIT_NUMERIC)
    except (QOrthoError, ValueError, KeyError, OSError) as exc:
        return _error(exc, EXIT_INPUT)
    text = artifact if isinstance(artifact, str) else json.dumps(artifact, indent=2) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
