"""Command-line entry point: ``sampled-ioss <command> [options]``.

Exit status: 0 when the command completed without a violation witness, 2 when
the report contains one, 1 on errors.  Every artifact carries the tool
version, the fully resolved configuration and the seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, certify, compfn, sampling, synth, sysmodel
from .experiments import GrowthConfig, figure1_experiment
from .falsify import SearchSpace, Target, falsify

COMMANDS = ("simulate", "check", "classify", "assumption2", "falsify", "synth", "scheme",
            "pathological", "figure1")

EXIT_OK, EXIT_ERROR, EXIT_WITNESS = 0, 1, 2

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["command", "seed"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "system": {"type": ["string", "null"]},
        "scheme": {"type": ["object", "null"]},
        "cert": {"type": ["string", "null"]},
        "horizon": {"type": "integer", "minimum": 1},
        "budget": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "format": {"enum": ["csv", "json"]},
        "out": {"type": ["string", "null"]},
        "options": {"type": "object"},
    },
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# parsing


def _vec(text):
    if text is None:
        return None
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with a (partial) run configuration")
    common.add_argument("--system", help="catalog call like 'spiral(rho=1.04, theta_deg=25)', a file, or inline equations")
    common.add_argument("--scheme", help="sampling scheme as JSON text or a JSON file")
    common.add_argument("--cert", help="certificate JSON file (or inline JSON)")
    common.add_argument("--horizon", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])

    p = argparse.ArgumentParser(prog="sampled-ioss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a trajectory pair")
    s.add_argument("--x01")
    s.add_argument("--x02")

    s = sub.add_parser("check", parents=[common], help="check a bound or condition on pairs")
    s.add_argument("--x01")
    s.add_argument("--x02")
    s.add_argument("--set-index", type=int, default=1)
    s.add_argument("--input-radius", type=float, default=0.0,
                   help="draw independent random inputs in [-r, r] (default: zero inputs)")

    s = sub.add_parser("classify", parents=[common], help="classify pairs against a pair-i-ISS certificate")
    s.add_argument("--x01")
    s.add_argument("--x02")
    s.add_argument("--input-radius", type=float, default=0.0)

    s = sub.add_parser("assumption2", parents=[common], help="probe the uniform violation-time assumption")
    s.add_argument("--sampler", choices=sorted(certify.SAMPLERS), default="uniform")
    s.add_argument("--t-beta", type=int, default=1)

    s = sub.add_parser("falsify", parents=[common], help="search for a violating pair")
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--w-radius", type=float, default=1.0)
    s.add_argument("--tie-inputs", action="store_true")
    s.add_argument("--set-index", type=int, default=1)
    s.add_argument("--refine", action="store_true", help="keep deepening the witness after the first violation")

    s = sub.add_parser("synth", parents=[common], help="build a certificate from another one")
    s.add_argument("--theorem", choices=sorted(synth.BUILDERS), required=False)
    s.add_argument("--cond", help="condition11 certificate JSON (file or inline)")
    s.add_argument("--t-beta-bar", type=int)

    s = sub.add_parser("scheme", parents=[common], help="materialize and audit a sampling scheme")
    s.add_argument("--index", type=int, default=1)
    s.add_argument("--probes", type=int, default=1000)
    s.add_argument("--shift", help="i,j,k for a shift-property check")

    s = sub.add_parser("pathological", parents=[common], help="pathological sampling periods of a linear system")
    s.add_argument("--p-max", type=int, default=8)

    s = sub.add_parser("figure1", parents=[common], help="undersampled growth experiment")
    s.add_argument("--rho", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--delta-max", type=int)
    s.add_argument("--stable", action="store_true")
    s.add_argument("--full-sampling", action="store_true")
    return p


_COMMON = ("system", "scheme", "cert", "horizon", "budget", "trials", "seed", "out", "format")
_DEFAULTS = {"horizon": 50, "budget": 10_000, "trials": 100, "format": "json"}


def _read_json_arg(text):
    if text is None:
        return None
    if os.path.isfile(text):
        return json.loads(Path(text).read_text())
    return json.loads(text)


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge ``--config`` file, flags and defaults into one validated dict."""
    cfg = {"command": args.command}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        if not isinstance(base, dict):
            raise ConfigError("config error at /: expected an object")
        cfg.update(base)
        cfg["command"] = args.command
    opts = dict(cfg.get("options", {}))
    for k, v in vars(args).items():
        if k in ("command", "config", "func"):
            continue
        if k in _COMMON:
            if v is not None:
                cfg[k] = v
        elif v is not None and v is not False:
            opts[k] = v
        elif k not in opts:
            opts[k] = v
    for k, v in _DEFAULTS.items():
        cfg.setdefault(k, v)
    if cfg.get("seed") is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (2 ** 32))
    if isinstance(cfg.get("scheme"), str):
        try:
            cfg["scheme"] = _read_json_arg(cfg["scheme"])
        except json.JSONDecodeError as e:
            raise ConfigError(f"config error at /scheme: not valid JSON ({e})") from e
    cfg["options"] = opts
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        raise ConfigError("; ".join(f"config error at /{'/'.join(map(str, e.path))}: {e.message}" for e in errors))
    if cfg.get("scheme") is not None:
        try:
            jsonschema.validate(cfg["scheme"], sampling.SCHEME_SCHEMA)
        except jsonschema.ValidationError as e:
            path = "/".join(["scheme", *map(str, e.path)])
            raise ConfigError(f"config error at /{path}: {e.message}") from e
    return cfg


# --------------------------------------------------------------------------
# helpers


def _system(cfg, default=None):
    source = cfg.get("system") or default
    if source is None:
        raise ConfigError("config error at /system: a system is required")
    return sysmodel.load_system(source)


def _scheme(cfg, required=True):
    d = cfg.get("scheme")
    if d is None:
        if required:
            raise ConfigError("config error at /scheme: a sampling scheme is required")
        return None
    return sampling.scheme_from_dict(d)


def _cert(text, field="cert"):
    if text is None:
        raise ConfigError(f"config error at /{field}: a certificate is required")
    try:
        return certify.Certificate.from_dict(_read_json_arg(text))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"config error at /{field}: {e}") from e


def _pairs(sys, cfg, rng):
    """The explicit pair if ``--x01/--x02`` were given, else ``trials`` random pairs."""
    o, T = cfg["options"], cfg["horizon"]
    r = float(o.get("input_radius") or 0.0)
    if o.get("x01") is not None or o.get("x02") is not None:
        x1 = _vec(o.get("x01")) or [0.0] * sys.n
        x2 = _vec(o.get("x02")) or [0.0] * sys.n
        yield sysmodel.simulate_pair(sys, x1, x2, T=T)
        return
    for _ in range(cfg["trials"]):
        x1, x2 = rng.uniform(-1, 1, sys.n), rng.uniform(-1, 1, sys.n)
        w1 = w2 = None
        if r > 0 and sys.q:
            w1, w2 = rng.uniform(-r, r, (T, sys.q)), rng.uniform(-r, r, (T, sys.q))
        yield sysmodel.simulate_pair(sys, x1, x2, w1, w2, T)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def _artifact(cfg, result) -> str:
    doc = {"tool": {"name": "sampled-ioss", "version": __version__}, "config": cfg, "seed": cfg["seed"],
           "result": result}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _csv_artifact(cfg, body: str) -> str:
    head = (f"# sampled-ioss {__version__}\n"
            f"# config: {json.dumps(_jsonable(cfg), sort_keys=True)}\n")
    return head + body


def _emit(cfg, text: str, out=None):
    path = out if out is not None else cfg.get("out")
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg):
    s = _system(cfg)
    rng = np.random.default_rng(cfg["seed"])
    pair = next(_pairs(s, {**cfg, "trials": 1}, rng))
    if cfg["format"] == "csv":
        _emit(cfg, _csv_artifact(cfg, sysmodel.pair_to_csv(pair)))
    else:
        _emit(cfg, _artifact(cfg, {"dx": pair.dx, "dy": pair.dy, "dw": pair.dw,
                                   "x01": pair.x01, "x02": pair.x02}))
    return EXIT_OK


def cmd_check(cfg):
    s = _system(cfg)
    cert = _cert(cfg.get("cert"))
    T = cfg["horizon"]
    needs_set = cert.kind in ("sampled", "sampled_discounted", "condition11")
    K = sampling.materialize(_scheme(cfg), cfg["options"].get("set_index", 1), T) if needs_set else None
    rng = np.random.default_rng(cfg["seed"])
    worst, worst_pair, n = None, None, 0
    for pair in _pairs(s, cfg, rng):
        r = (certify.check_condition11(pair, cert, K, T) if cert.kind == "condition11"
             else certify.check_bound(pair, cert, K, T))
        n += 1
        if worst is None or r.min_margin < worst.min_margin:
            worst, worst_pair = r, pair
    if cfg["format"] == "csv":
        _emit(cfg, _csv_artifact(cfg, worst.margin_csv()))
    else:
        rep = worst.to_dict()
        rep["pairs"] = n
        rep["witness"].update({"x01": worst_pair.x01, "x02": worst_pair.x02,
                               "w1": worst_pair.w1, "w2": worst_pair.w2})
        if not worst.violated:
            rep["witness"] = {"t": worst.witness_t, "x01": worst_pair.x01, "x02": worst_pair.x02,
                              "note": "tightest pair, not a violation"}
        rep["violation"] = worst.violated
        _emit(cfg, _artifact(cfg, rep))
    return EXIT_WITNESS if worst.violated else EXIT_OK


def cmd_classify(cfg):
    s = _system(cfg)
    cert = _cert(cfg.get("cert"))
    rng = np.random.default_rng(cfg["seed"])
    rows = [certify.classify_pair(p, cert, cfg["horizon"]).to_dict() for p in _pairs(s, cfg, rng)]
    counts = {"in_lambda": sum(r["label"] == "in_lambda" for r in rows)}
    counts["in_psi"] = len(rows) - counts["in_lambda"]
    _emit(cfg, _artifact(cfg, {"scope": f"horizon {cfg['horizon']}", "counts": counts,
                               "psi_rate": counts["in_psi"] / len(rows), "pairs": rows[:200]}))
    return EXIT_OK


def cmd_assumption2(cfg):
    s = _system(cfg)
    cert = _cert(cfg.get("cert"))
    o = cfg["options"]
    sampler_cls = certify.SAMPLERS[o.get("sampler") or "uniform"]
    sampler = sampler_cls() if sampler_cls is certify.StabilizingPairs else sampler_cls(horizon=cfg["horizon"])
    rep = certify.check_assumption2(s, cert, sampler, int(o.get("t_beta") or 1), cfg["trials"], cfg["seed"])
    _emit(cfg, _artifact(cfg, rep.to_dict()))
    return EXIT_OK


def cmd_falsify(cfg):
    s = _system(cfg)
    cert = _cert(cfg.get("cert"))
    o = cfg["options"]
    scheme = _scheme(cfg, required=cert.kind in ("sampled", "sampled_discounted", "condition11"))
    target = Target(cert, cfg["horizon"], scheme, (int(o.get("set_index") or 1),))
    space = SearchSpace.box(s.n, s.q, float(o.get("radius") or 1.0), float(o.get("w_radius") or 1.0),
                            tie_inputs=bool(o.get("tie_inputs")))
    res = falsify(s, target, space, cfg["budget"], cfg["seed"], stop_on_violation=not o.get("refine"))
    _emit(cfg, _artifact(cfg, res.to_dict()))
    return EXIT_WITNESS if res.found else EXIT_OK


def cmd_synth(cfg):
    o = cfg["options"]
    thm = o.get("theorem")
    if thm is None:
        raise ConfigError("config error at /options/theorem: choose one of " + ", ".join(sorted(synth.BUILDERS)))
    base = _cert(cfg.get("cert"))
    if thm == "lemma1":
        out = synth.project_discounted(base)
    else:
        s = _system(cfg) if cfg.get("system") else None
        cond = _cert(o.get("cond"), "options/cond") if o.get("cond") else None
        alpha_h = s.alpha_h if s is not None else None
        at = None
        if thm == "thm1":
            if s is None or cond is None:
                raise ConfigError("config error at /system: thm1 needs --system and --cond")
            at = synth.alpha_tilde_h(s.alpha_h, s.alpha_f, int(cond["t_star"]))
        scheme = _scheme(cfg, required=False)
        inp = synth.SynthesisInput(base=base, alpha_h=alpha_h, alpha_tilde_h=at, cond=cond,
                                   T_beta_bar=o.get("t_beta_bar"), scheme=scheme)
        out = synth.BUILDERS[thm](inp)
    _emit(cfg, _artifact(cfg, {"certificate": out.to_dict()}))
    return EXIT_OK


def cmd_scheme(cfg):
    sch = _scheme(cfg)
    o = cfg["options"]
    K = sampling.materialize(sch, int(o.get("index") or 1), cfg["horizon"])
    if cfg["format"] == "csv":
        _emit(cfg, _csv_artifact(cfg, K.to_csv()))
        return EXIT_OK
    rep = {"set": {"i": K.i, "times": list(K.times), "horizon": K.horizon},
           "validation": sampling.scheme_validate(sch, int(o.get("probes") or 1000)).to_dict()}
    if o.get("shift"):
        i, j, k = (int(v) for v in _vec(o["shift"]))
        rep["shift"] = {"i": i, "j": j, "k": k, "holds": sampling.shift_check(sch, i, j, k, cfg["horizon"])}
    _emit(cfg, _artifact(cfg, rep))
    return EXIT_OK


def cmd_pathological(cfg):
    s = _system(cfg, default="rotation8")
    if not s.is_linear:
        raise ConfigError("config error at /system: pathological periods need a linear system")
    rep = sampling.period_report(s.A, s.C, int(cfg["options"].get("p_max") or 8))
    _emit(cfg, _artifact(cfg, {"pathological": rep.pathological, "marginal": rep.marginal,
                               "smallest_relative_sv": rep.smallest_sv}))
    return EXIT_OK


def cmd_figure1(cfg):
    o = cfg["options"]
    gc = GrowthConfig(seed=cfg["seed"], horizon=max(cfg["horizon"], 150))
    if o.get("stable"):
        gc = replace(gc, rho=0.9)
    if o.get("rho") is not None:
        gc = replace(gc, rho=float(o["rho"]))
    if o.get("theta") is not None:
        gc = replace(gc, theta_deg=float(o["theta"]))
    if o.get("delta_max") is not None:
        gc = replace(gc, delta_max=int(o["delta_max"]))
    if o.get("full_sampling"):
        gc = replace(gc, full_sampling=True)
    run = figure1_experiment(gc)
    if cfg["format"] == "csv":
        _emit(cfg, _csv_artifact(cfg, run.to_csv()))
        if cfg.get("out"):
            _emit(cfg, _artifact(cfg, run.summary()), out=str(Path(cfg["out"]).with_suffix(".summary.json")))
    else:
        _emit(cfg, _artifact(cfg, run.summary()))
    return EXIT_OK


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg["command"]](cfg)
    except (ConfigError, sysmodel.DimensionMismatch, sampling.SchemeError, certify.CertificateError,
            synth.SynthesisError, compfn.ComparisonError, certify.InconclusiveError,
            sampling.UnobservableError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
