"""Command-line entry point: reproducible experiments written as JSON or CSV.

Every JSON artifact carries ``schema``, the command, its validated parameters,
the seed and library versions.  The wall-clock timestamp lives under
``sidecar`` so that two runs of the same manifest compare equal once that key
is dropped.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy
import sympy

import expforge
from expforge._budget import BudgetExceeded
from expforge.channel import Dmc, bsc, parse_channel, qsc
from expforge.ensemble import CodeEnsembleSpec
from expforge.exponents import (
    delta_cr,
    exponent_curve,
    log_scale,
    poltyrev_curve,
    slope_fit,
    slope_fit_log,
    write_curve_csv,
)
from expforge.lattice import lattice_config, run_lattice_experiment
from expforge.oracle import (
    exact_average_error,
    verify_conditional_laws,
    verify_ensemble_bounds,
)

SCHEMA = 1
COMMANDS = ("exponents", "verify-ensemble", "verify-bounds", "exact-pe", "mc-lattice", "slope")


class ManifestError(ValueError):
    pass


@dataclass
class ExperimentManifest:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ManifestError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not isinstance(self.params, dict):
            raise ManifestError("params must be a mapping")
        self.seed = int(self.seed)

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "params": self.params, "seed": self.seed,
                           "output_path": self.output_path}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentManifest":
        obj = json.loads(text)
        return cls(obj["command"], obj.get("params", {}), obj.get("seed", 0), obj.get("output_path"))


def versions() -> dict:
    return {"expforge": expforge.__version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "sympy": sympy.__version__}


def parse_range(text: str) -> list[float]:
    """``start:step:stop`` (inclusive of ``stop``) or a comma list."""
    if ":" in text:
        a, s, b = (float(v) for v in text.split(":"))
        if s <= 0:
            raise ManifestError("range step must be positive")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return [round(a + i * s, 12) for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _channel_for(params: dict, q: int) -> Dmc:
    text = params.get("channel")
    if text is None:
        return bsc(Fraction(1, 10)) if q == 2 else qsc(q, Fraction(1, 10))
    ch = parse_channel(text) if isinstance(text, str) else parse_channel(json.dumps(text))
    if ch.q != q:
        raise ManifestError(f"channel has {ch.q} inputs but q={q}")
    return ch


def _spec(params: dict) -> CodeEnsembleSpec:
    try:
        return CodeEnsembleSpec(int(params["N"]), int(params["K"]), int(params["q"]))
    except KeyError as exc:
        raise ManifestError(f"missing parameter {exc.args[0]}") from None


def _base_of(params: dict, q: int | None = None):
    base = params.get("log_base", "e")
    if base == "q":
        if q is None:
            raise ManifestError("log base q needs an alphabet size")
        return q
    if base in ("e", "2", 2):
        return "e" if base == "e" else 2
    raise ManifestError(f"unsupported log base {base!r}")


def _run_exponents(m: ExperimentManifest) -> dict:
    p = m.params
    if "sigma2" in p:
        deltas = parse_range(str(p["deltas"]))
        curve = poltyrev_curve(float(p["sigma2"]), deltas, p.get("variant", "continuous"))
        base = _base_of(p)
    else:
        ch = _channel_for(p, parse_channel(p["channel"]).q if "channel" in p else 2)
        curve = exponent_curve(ch, parse_range(str(p.get("rates", "0:0.05:0.7"))))
        base = _base_of(p, ch.q)
    scale = log_scale(base)
    if m.output_path and str(m.output_path).endswith(".csv"):
        header = {"schema": SCHEMA, "command": m.command, "seed": m.seed,
                  "params": json.dumps(m.params, sort_keys=True),
                  "versions": json.dumps(versions(), sort_keys=True)}
        write_curve_csv(curve, m.output_path, base, header)
        return {"csv": str(m.output_path), "points": len(curve.points)}
    rows = [{"x": x / scale, "exponent": e / scale, "rho_star": r}
            for (x, e), r in zip(curve.points, curve.rho_at_point)]
    for k, vals in curve.extra.items():
        for row, v in zip(rows, vals):
            row[k] = v / scale
    params = {k: (v / scale if k in ("R_cr", "capacity", "delta_star", "delta_cr") else v)
              for k, v in curve.params.items()}
    return {"curve": rows, "curve_params": params}


def _run_verify_ensemble(m: ExperimentManifest) -> dict:
    spec = _spec(m.params)
    ks = tuple(int(k) for k in m.params.get("ks", (1, 2, 3)))
    report = verify_conditional_laws(spec, ks)
    report["pass"] = report["n_mismatches"] == 0
    return report


def _run_verify_bounds(m: ExperimentManifest) -> dict:
    spec = _spec(m.params)
    ch = _channel_for(m.params, spec.q)
    rhos = [float(r) for r in m.params.get("rhos", (1.0, 1.5, 2.0))]
    report = verify_ensemble_bounds(spec, ch, rhos)
    report["pass"] = report["intersection_violations"] == 0 and report["sandwich_violations"] == 0
    return report


def _run_exact_pe(m: ExperimentManifest) -> dict:
    spec = _spec(m.params)
    ch = _channel_for(m.params, spec.q)
    res = exact_average_error(spec, ch, int(m.params.get("m", 0)))
    return {"exact": {"num": str(res.value.numerator), "den": str(res.value.denominator)},
            "float": res.float_view}


def _run_mc_lattice(m: ExperimentManifest) -> dict:
    p = dict(m.params)
    N = int(p["N"])
    sigma2 = float(p.get("sigma2", 1.0 / (2 * math.pi * math.e)))
    if "delta_offset" in p:
        if "delta" in p or "gamma" in p:
            raise ManifestError("give only one of delta, gamma, delta_offset")
        p["delta"] = delta_cr(sigma2) + float(p.pop("delta_offset"))
    q = p.get("q", "auto")
    config = lattice_config(N, sigma2, R=p.get("R"), K=p.get("K"), delta=p.get("delta"),
                            gamma=p.get("gamma"), q=q if q == "auto" else int(q),
                            slack=float(p.get("slack", 0.0)))
    trials = int(p.get("trials", 10000))
    out = run_lattice_experiment(config, trials, m.seed, workers=int(p.get("threads", 1))).to_dict()
    scale = log_scale(_base_of(p, config.spec.q))
    for k in ("delta", "delta_star", "delta_cr", "exponent_predicted"):
        out[k] = out[k] / scale
    return out


def _read_points(path) -> list[tuple[int, float]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read input: {exc}") from exc
    if text.lstrip().startswith(("[", "{")):
        obj = json.loads(text)
        pts = obj["points"] if isinstance(obj, dict) else obj
        return [(int(a), float(b)) for a, b in pts]
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line[0].isalpha():
            continue
        a, b = line.replace(",", " ").split()[:2]
        out.append((int(float(a)), float(b)))
    return out


def _run_slope(m: ExperimentManifest) -> dict:
    p = m.params
    pts = [(int(a), float(b)) for a, b in p["points"]] if "points" in p else _read_points(p["input"])
    fit = slope_fit_log(pts) if p.get("log_input") else slope_fit(pts)
    scale = log_scale(_base_of(p))
    out = {"slope": fit.estimate / scale, "stderr": fit.stderr / scale,
           "intercept": fit.intercept / scale, "n_range": list(fit.n_range)}
    if "predicted" in p:
        out["predicted"] = float(p["predicted"])
        out["gap"] = out["slope"] - out["predicted"]
    return out


_HANDLERS = {
    "exponents": _run_exponents,
    "verify-ensemble": _run_verify_ensemble,
    "verify-bounds": _run_verify_bounds,
    "exact-pe": _run_exact_pe,
    "mc-lattice": _run_mc_lattice,
    "slope": _run_slope,
}


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_body(m: ExperimentManifest, result: dict) -> dict:
    return {"schema": SCHEMA, "command": m.command, "params": m.params, "seed": m.seed,
            "versions": versions(), "result": result}


def _emit(obj: dict, path, stream) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path:
        Path(path).write_text(text + "\n")
    else:
        stream.write(text + "\n")


def dispatch(manifest: ExperimentManifest, stream=None, err=None) -> int:
    """Run a manifest and write its artifact; returns the process exit status."""
    stream = stream or sys.stdout
    err = err or sys.stderr
    try:
        result = _HANDLERS[manifest.command](manifest)
    except BudgetExceeded as exc:
        _emit({"schema": SCHEMA, "error": "budget_exceeded", "what": exc.what,
               "estimate": exc.estimate, "budget": exc.budget, "hint": exc.hint or
               "shrink N, K or q, or raise EXPFORGE_BUDGET"}, None, err)
        return 3
    except (ManifestError, ValueError, KeyError, IndexError) as exc:
        _emit({"schema": SCHEMA, "error": "invalid_parameters", "command": manifest.command,
               "message": str(exc)}, None, err)
        return 2
    except OSError as exc:
        # only the CSV writer touches the filesystem inside a handler
        _emit({"schema": SCHEMA, "error": "unwritable_output", "message": str(exc)}, None, err)
        return 4
    if "csv" in result:
        return 0
    body = report_body(manifest, result)
    body["sidecar"] = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    try:
        _emit(body, manifest.output_path, stream)
    except OSError as exc:
        _emit({"schema": SCHEMA, "error": "unwritable_output", "message": str(exc)}, None, err)
        return 4
    return 0


def load_report(path) -> dict:
    """Read an artifact back and check that its header is complete."""
    obj = json.loads(Path(path).read_text())
    for key in ("schema", "command", "params", "seed", "versions", "result"):
        if key not in obj:
            raise ManifestError(f"artifact is missing {key!r}")
    if obj["schema"] != SCHEMA:
        raise ManifestError(f"unsupported schema {obj['schema']}")
    ExperimentManifest(obj["command"], obj["params"], obj["seed"])
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expforge", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", help="run a JSON manifest instead of a subcommand")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", dest="output_path", help="output file (stdout if omitted)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--log-base", choices=("e", "2", "q"), default="e")
    common.add_argument("--threads", type=int, default=1, help="worker processes, 0 for all cores")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("exponents", parents=[common], help="E_r / E_sp curve or the lattice exponent")
    p.add_argument("--channel", help="bsc:P, qsc:Q:EPS or a JSON matrix")
    p.add_argument("--rates", default="0:0.05:0.7", help="start:step:stop or a comma list, nats")
    p.add_argument("--sigma2", type=float, help="switch to the lattice exponent at this noise variance")
    p.add_argument("--deltas", default="-2:0.1:0", help="log densities for --sigma2")
    p.add_argument("--variant", choices=("continuous", "printed"), default="continuous")

    for name, helptext in (("verify-ensemble", "exact check of the conditional codeword laws"),
                           ("verify-bounds", "exact check of intersections and the sandwich"),
                           ("exact-pe", "exact ensemble-average error probability")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--K", type=int, required=True)
        if name != "verify-ensemble":
            p.add_argument("--channel")
        if name == "exact-pe":
            p.add_argument("--m", type=int, default=0)
        if name == "verify-bounds":
            p.add_argument("--rhos", default="1,1.5,2")

    p = sub.add_parser("mc-lattice", parents=[common], help="Monte Carlo for Construction-A lattices")
    p.add_argument("--N", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--R", type=float)
    g.add_argument("--K", type=int)
    d = p.add_mutually_exclusive_group(required=True)
    d.add_argument("--delta", type=float)
    d.add_argument("--gamma", type=float)
    d.add_argument("--delta-offset", type=float, help="log density relative to the critical one")
    p.add_argument("--sigma2", type=float, default=1.0 / (2 * math.pi * math.e))
    p.add_argument("--q", default="auto")
    p.add_argument("--slack", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=10000)

    p = sub.add_parser("slope", parents=[common], help="fit -log p against N")
    p.add_argument("--input", required=True, help="CSV/whitespace pairs N,p or a JSON list")
    p.add_argument("--log-input", action="store_true", help="second column is log p")
    p.add_argument("--predicted", type=float)
    return parser


_NOT_PARAMS = {"command", "output_path", "seed", "manifest"}


def manifest_from_args(args: argparse.Namespace) -> ExperimentManifest:
    params = {k: v for k, v in vars(args).items() if k not in _NOT_PARAMS and v is not None}
    if "rhos" in params:
        params["rhos"] = parse_range(params["rhos"])
    if params.get("log_input") is False:
        del params["log_input"]
    return ExperimentManifest(args.command, params, args.seed, args.output_path)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest:
        try:
            manifest = ExperimentManifest.from_json(Path(args.manifest).read_text())
        except (OSError, ValueError, KeyError) as exc:
            print(json.dumps({"schema": SCHEMA, "error": "invalid_manifest", "message": str(exc)}),
                  file=sys.stderr)
            return 2
    elif args.command is None:
        parser.print_help(sys.stderr)
        return 2
    else:
        manifest = manifest_from_args(args)
    return dispatch(manifest)


if __name__ == "__main__":
    sys.exit(main())
