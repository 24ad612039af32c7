"""Command-line runner: ``randroots <command> [--config FILE] [flags]``.

Flags override values from the JSON config.  The whole config is validated
before any computation; a bad config produces one JSON error object on
stderr and exit status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .atoms import AtomSpec, parse_atom, parse_seed
from .coeff_profiles import CoefficientProfile, parse_profile
from .mc import config_hash

COMMANDS = ("density", "expect", "mc-count", "mc-var", "mc-corr", "probe-repulsion", "probe-anticonc",
            "compare", "slopes", "selftest")
WORKERS_ENV = "RANDROOTS_WORKERS"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------- parsing

def parse_float(s) -> float:
    t = str(s).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(t)


def parse_interval(spec) -> tuple[float, float]:
    if isinstance(spec, (list, tuple)):
        if len(spec) != 2:
            raise ConfigError("interval needs two endpoints")
        a, b = (parse_float(v) for v in spec)
    else:
        s = str(spec).strip().lower()
        if s in ("all", "r", "real"):
            return (-math.inf, math.inf)
        sep = ":" if ":" in s else ","
        parts = s.split(sep)
        if len(parts) != 2:
            raise ConfigError(f"cannot parse interval {spec!r}; use a:b or 'all'")
        a, b = (parse_float(p) for p in parts)
    if not a <= b:
        raise ConfigError("interval must satisfy a <= b")
    return (a, b)


def parse_n_grid(spec) -> list[int]:
    """``256:16384:x2`` (geometric), ``10:50:+10`` (arithmetic) or ``16,64,256``."""
    if isinstance(spec, (list, tuple)):
        out = [int(v) for v in spec]
    else:
        s = str(spec).replace(" ", "")
        if s.count(":") == 2:
            lo, hi, step = s.split(":")
            lo, hi = int(lo), int(hi)
            out = []
            if step.startswith("x"):
                r = float(step[1:])
                if r <= 1:
                    raise ConfigError("geometric grid ratio must exceed 1")
                v = float(lo)
                while round(v) <= hi:
                    out.append(int(round(v)))
                    v *= r
            else:
                d = int(step.lstrip("+"))
                if d <= 0:
                    raise ConfigError("grid step must be positive")
                out = list(range(lo, hi + 1, d))
        else:
            out = [int(v) for v in s.split(",") if v]
    if not out or any(n < 1 for n in out):
        raise ConfigError("degree grid must be a nonempty list of positive integers")
    return out


def parse_list(spec, conv=str) -> list:
    if spec is None:
        return []
    if isinstance(spec, (list, tuple)):
        return [conv(v) for v in spec]
    return [conv(v) for v in str(spec).split(",") if v.strip()]


def parse_weights(spec) -> list[float]:
    """Weight vector: a list, ``1,1,2`` or ``ones:16``."""
    if isinstance(spec, str) and spec.startswith("ones:"):
        return [1.0] * int(spec.split(":", 1)[1])
    return parse_list(spec, float)


# -------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    command: str
    profile: CoefficientProfile | None = None
    atom: AtomSpec | None = None
    n: int | None = None
    n_grid: list = field(default_factory=list)
    interval: tuple = (-math.inf, math.inf)
    samples: int = 1000
    root_seed: int = 0
    workers: int = 1
    out_dir: str | None = None
    options: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("profile", "atom", "out_dir", "workers")}
        d["profile"] = self.profile.to_dict() if self.profile else None
        d["atom"] = self.atom.to_dict() if self.atom else None
        d["interval"] = [_num(v) for v in self.interval]
        return d


def _num(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


# keys that the config file and the flags share
FIELDS = ("profile", "atom", "n", "n_grid", "interval", "samples", "root_seed", "workers", "out_dir",
          "method", "mu", "t", "t_range", "delta", "centers", "support", "rescale", "orders", "x", "gammas",
          "scale", "weights", "z", "radius", "profiles", "atoms", "fixture", "rtol")


def merged_settings(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(FIELDS) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if cfg.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
    for k in FIELDS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _positive_int(v, name):
    try:
        i = int(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be an integer") from exc
    if i < 1 or i != float(v):
        raise ConfigError(f"{name} must be a positive integer")
    return i


def build_config(command: str, s: dict) -> ExperimentConfig:
    """Validate everything up front; raises ConfigError with a readable message."""
    cfg = ExperimentConfig(command)
    try:
        if "profile" in s:
            cfg.profile = parse_profile(s["profile"])
        if "atom" in s:
            cfg.atom = parse_atom(s["atom"])
        if s.get("n") is not None:
            cfg.n = _positive_int(s["n"], "n")
        if s.get("n_grid") is not None:
            cfg.n_grid = parse_n_grid(s["n_grid"])
        if s.get("interval") is not None:
            cfg.interval = parse_interval(s["interval"])
        if s.get("samples") is not None:
            cfg.samples = _positive_int(s["samples"], "samples")
        if s.get("root_seed") is not None:
            cfg.root_seed = parse_seed(s["root_seed"])
        w = s.get("workers", os.environ.get(WORKERS_ENV, 1))
        cfg.workers = _positive_int(w, "workers")
        cfg.out_dir = s.get("out_dir")
        o = cfg.options
        o["mu"] = float(s.get("mu", 0.0))
        if "method" in s:
            o["method"] = str(s["method"])
        if "rtol" in s:
            o["rtol"] = float(s["rtol"])
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    needs_profile = command not in ("probe-anticonc", "selftest", "compare")
    needs_atom = command in ("mc-count", "mc-var", "mc-corr", "probe-repulsion", "probe-anticonc")
    needs_n = command in ("density", "expect", "mc-count", "mc-var", "mc-corr", "probe-repulsion")
    if needs_profile and cfg.profile is None:
        raise ConfigError(f"{command} needs --profile")
    if needs_atom and cfg.atom is None:
        cfg.atom = parse_atom("gaussian")
    if needs_n and cfg.n is None:
        raise ConfigError(f"{command} needs --n")
    try:
        if needs_atom and cfg.profile is not None:
            from .mc import SampleSpec

            # rejects atom/profile pairs the sampler cannot build
            SampleSpec(cfg.profile, cfg.atom, cfg.n)
        _command_options(command, cfg, s)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _command_options(command, cfg, s):
    o = cfg.options
    if command == "density":
        from .density import METHODS

        o.setdefault("method", "ek_logvar" if o["mu"] == 0 else "kacrice_mean")
        if o["method"] not in METHODS:
            raise ConfigError(f"unknown density method {o['method']!r}; choose from {list(METHODS)}")
        if "t" in s:
            o["t"] = parse_list(s["t"], float)
        else:
            a, b, m = str(s.get("t_range", "-3:3:601")).split(":")
            o["t_range"] = [float(a), float(b), int(m)]
    elif command in ("mc-count", "mc-var"):
        if command == "mc-var" and cfg.samples < 30:
            raise ConfigError("mc-var needs samples >= 30")
        if command == "mc-count" and cfg.samples < 2:
            raise ConfigError("mc-count needs samples >= 2")
    elif command == "mc-corr":
        o["orders"] = parse_list(s.get("orders", "1,0"), int)
        if len(o["orders"]) != 2:
            raise ConfigError("orders must be k,l")
        o["delta"] = float(s.get("delta", 0.05))
        o["support"] = float(s.get("support", 1e-3))
        o["rescale"] = float(s["rescale"]) if s.get("rescale") is not None else None
        o["centers"] = [complex(str(c).replace(" ", "")) for c in parse_list(s.get("centers"))]
        if not o["centers"]:
            raise ConfigError("mc-corr needs --centers")
        from .mc import CorrelationWindow

        CorrelationWindow(o["delta"], tuple(o["centers"]), o["support"], o["rescale"])
        o["centers"] = [[c.real, c.imag] for c in o["centers"]]
    elif command == "probe-repulsion":
        if "x" not in s:
            raise ConfigError("probe-repulsion needs --x")
        o["x"] = float(s["x"])
        o["gammas"] = parse_list(s.get("gammas", "0.02,0.01,0.005,0.0025"), float)
        o["scale"] = float(s["scale"]) if s.get("scale") is not None else None
        from .mc import delta_for_center

        delta_for_center(o["x"])
    elif command == "probe-anticonc":
        if "weights" not in s:
            raise ConfigError("probe-anticonc needs --weights")
        o["weights"] = parse_weights(s["weights"])
        if not o["weights"]:
            raise ConfigError("weights must be nonempty")
        o["z"] = float(s.get("z", 0.0))
        o["radius"] = float(s.get("radius", 0.5))
    elif command == "compare":
        o["profiles"] = [parse_profile(p).to_dict() for p in
                         (parse_list(s["profiles"], str) if "profiles" in s else
                          [s["profile"]] if "profile" in s else [])]
        o["atoms"] = [parse_atom(a).to_dict() for a in parse_list(s.get("atoms", "gaussian,rademacher"))]
        if not o["profiles"]:
            raise ConfigError("compare needs --profiles")
        if len(o["atoms"]) < 2:
            raise ConfigError("compare needs at least two atoms")
        if not cfg.n_grid:
            if cfg.n is None:
                raise ConfigError("compare needs --n or --n-grid")
            cfg.n_grid = [cfg.n]
        from .mc import SampleSpec

        for p in o["profiles"]:
            for a in o["atoms"]:
                SampleSpec(parse_profile(p), parse_atom(a), min(cfg.n_grid))
    elif command == "slopes":
        if not cfg.n_grid:
            raise ConfigError("slopes needs --n-grid")
        if len(cfg.n_grid) < 3:
            raise ConfigError("slopes needs at least 3 grid points")
    elif command == "selftest":
        o["fixture"] = s.get("fixture")


# ------------------------------------------------------------- outputs

def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def csv_text(header, rows, chash) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def versions() -> dict:
    import numba
    import scipy

    try:
        from importlib.metadata import version

        pkg = version("artifact")
    except Exception:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "randroots": pkg}


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


# ------------------------------------------------------------ commands

def _kernel(cfg, n=None):
    from .variance_kernel import VarianceKernel

    return VarianceKernel.from_profile(cfg.profile, cfg.n if n is None else n)


def cmd_density(cfg):
    from .density import density_curve

    o = cfg.options
    t = np.asarray(o["t"]) if "t" in o else np.linspace(*o["t_range"][:2], o["t_range"][2])
    kern = None if o["method"] in ("kac_closed", "limiting") else _kernel(cfg)
    if o["method"] == "kac_closed":
        if cfg.profile.kind != "kac":
            raise ConfigError("kac_closed needs the kac profile")
        from .density import kac_density_closed

        rho = kac_density_closed(cfg.n, t)
    else:
        rho = density_curve(o["method"], kern, t, mu=o["mu"], profile=cfg.profile).rho
    rows = [(ti, ri, o["method"], cfg.n) for ti, ri in zip(t, rho)]
    return {"points": len(t), "method": o["method"]}, (["t", "rho", "method", "n"], rows)


def cmd_expect(cfg):
    from .density import expected_count

    o = cfg.options
    r = expected_count(_kernel(cfg), cfg.interval, o.get("method"), mu=o["mu"], rtol=o.get("rtol", 1e-9))
    return {"expected_count": r.value, "abserr": r.abserr, "converged": r.converged, "method": r.method}, None


def _stats_output(rep):
    rows = [(k, v.estimate, v.se, v.count, v.excluded) for k, v in rep.stats.items()]
    return ({"stats": {k: v.to_dict() for k, v in rep.stats.items()}},
            (["stat", "estimate", "se", "count", "excluded"], rows))


def cmd_mc_count(cfg):
    from .mc import mc_expected_count

    rep = mc_expected_count(cfg.profile, cfg.atom, cfg.n, cfg.interval, cfg.samples, cfg.root_seed, cfg.workers)
    return _stats_output(rep)


def cmd_mc_var(cfg):
    from .mc import mc_variance_count

    rep = mc_variance_count(cfg.profile, cfg.atom, cfg.n, cfg.samples, cfg.root_seed, cfg.workers)
    return _stats_output(rep)


def cmd_mc_corr(cfg):
    from .mc import CorrelationWindow, correlation_estimate

    o = cfg.options
    w = CorrelationWindow(o["delta"], tuple(complex(*c) for c in o["centers"]), o["support"], o["rescale"])
    r = correlation_estimate(cfg.profile, cfg.atom, cfg.n, w, tuple(o["orders"]), cfg.samples, cfg.root_seed,
                             workers=cfg.workers)
    return {"estimate": r.estimate, "se": r.se, "samples": r.samples, "excluded": r.excluded,
            "scale": w.scale}, None


def cmd_probe_repulsion(cfg):
    from .mc import repulsion_probe

    o = cfg.options
    r = repulsion_probe(cfg.profile, cfg.atom, cfg.n, o["x"], o["gammas"], cfg.samples, cfg.root_seed,
                        o["scale"], cfg.workers)
    out = {"scale": r.scale, "delta": r.delta, "samples": r.samples, "excluded": r.excluded}
    try:
        b, se = r.slope()
        out["slope"] = {"estimate": b, "se": se}
    except ValueError as exc:
        out["slope"] = {"error": str(exc)}
    rows = [(g, rad, int(h), p, e) for g, rad, h, p, e in zip(r.gammas, r.radii, r.hits, r.probability, r.se)]
    return out, (["gamma", "radius", "hits", "probability", "se"], rows)


def cmd_probe_anticonc(cfg):
    from .mc import anticoncentration_probe

    o = cfg.options
    atom = cfg.atom
    r = anticoncentration_probe(atom, o["weights"], o["z"], o["radius"], cfg.samples, cfg.root_seed)
    return {"probability": r.estimate, "se": r.se, "samples": r.samples,
            "scaled": r.estimate * math.sqrt(len(o["weights"]))}, None


def cmd_compare(cfg):
    from .mc import mc_expected_count

    o = cfg.options
    rows = []
    gaps = []
    for pd in o["profiles"]:
        prof = parse_profile(pd)
        for n in cfg.n_grid:
            base = None
            for j, ad in enumerate(o["atoms"]):
                atom = parse_atom(ad)
                # each atom reads its own seed stream so the estimates are independent
                seed = (cfg.root_seed + j) % 2**64
                st = mc_expected_count(prof, atom, n, cfg.interval, cfg.samples, seed, cfg.workers)["count"]
                rows.append((prof.label, atom.label, n, st.estimate, st.se, st.count, st.excluded))
                if base is None:
                    base = (atom.label, st)
                else:
                    gaps.append({"profile": prof.label, "n": n, "atoms": [base[0], atom.label],
                                 "gap": st.estimate - base[1].estimate,
                                 "se": math.hypot(st.se, base[1].se)})
    return {"gaps": gaps}, (["profile", "atom", "n", "estimate", "se", "count", "excluded"], rows)


def cmd_slopes(cfg):
    from .density import DensityError, expected_count, predicted_slope
    from .mc import slope_fit

    o = cfg.options
    counts = [expected_count(_kernel(cfg, n), mu=o["mu"], rtol=o.get("rtol", 1e-9)).value for n in cfg.n_grid]
    fit = slope_fit(cfg.n_grid, counts)
    try:
        pred = predicted_slope(cfg.profile, o["mu"])
    except DensityError:
        pred = None
    rows = [(n, c, r) for n, c, r in zip(cfg.n_grid, counts, fit.residuals)]
    return {"slope": fit.slope, "intercept": fit.intercept, "predicted_slope": pred,
            "pairwise_slopes": fit.pairwise.tolist()}, (["n", "expected_count", "residual"], rows)


def cmd_selftest(cfg):
    from .acceptance import run_fast

    results = run_fast(cfg.options.get("fixture"))
    for r in results:
        print(r.line(), file=sys.stderr)
    summary = {"passed": all(r.passed for r in results),
               "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail}
                            for r in results]}
    return summary, None


HANDLERS = {
    "density": cmd_density, "expect": cmd_expect, "mc-count": cmd_mc_count, "mc-var": cmd_mc_var,
    "mc-corr": cmd_mc_corr, "probe-repulsion": cmd_probe_repulsion, "probe-anticonc": cmd_probe_anticonc,
    "compare": cmd_compare, "slopes": cmd_slopes, "selftest": cmd_selftest,
}


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    t0 = time.perf_counter()
    echo = cfg.echo()
    chash = config_hash(echo)
    result, table = HANDLERS[cfg.command](cfg)
    wall = time.perf_counter() - t0
    out = {"command": cfg.command, "config_hash": chash, "root_seed": cfg.root_seed, **result}
    if cfg.out_dir:
        d = Path(cfg.out_dir)
        stem = f"{cfg.command}-{chash}"
        artifacts = []
        if table is not None:
            atomic_write(d / f"{stem}.csv", csv_text(table[0], table[1], chash))
            artifacts.append(f"{stem}.csv")
        atomic_write(d / f"{stem}.json", json.dumps(_jsonable(out), indent=2, sort_keys=True) + "\n")
        artifacts.append(f"{stem}.json")
        manifest = {"config": echo, "config_hash": chash, "root_seed": cfg.root_seed,
                    "workers": cfg.workers, "versions": versions(), "wall_time": wall,
                    "artifacts": artifacts}
        atomic_write(d / f"manifest-{chash}.json", json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
        out["artifacts"] = [str(d / a) for a in artifacts]
    elif table is not None:
        out["table"] = {"header": table[0], "rows": table[1]}
    status = 0
    if cfg.command == "selftest" and not result["passed"]:
        status = 1
    return status, out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--profile", help="e.g. kac, hyperbolic:L=4, kac_derivative:d=1")
    common.add_argument("--atom", help="gaussian, gaussian:mu=1, rademacher, uniform, complex_gaussian")
    common.add_argument("--n", type=int)
    common.add_argument("--n-grid", dest="n_grid", help="256:16384:x2, 10:50:+10 or 16,64,256")
    common.add_argument("--interval", help="a:b or 'all'")
    common.add_argument("--samples", type=int)
    common.add_argument("--root-seed", dest="root_seed")
    common.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    common.add_argument("--out-dir", dest="out_dir", help="write CSV/JSON artifacts and a manifest here")
    common.add_argument("--method")
    common.add_argument("--mu", type=float)
    common.add_argument("--rtol", type=float)

    p = argparse.ArgumentParser(prog="randroots", description="Real and complex roots of random polynomials.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = {c: sub.add_parser(c, parents=[common]) for c in COMMANDS}
    sp["density"].add_argument("--t", help="comma list of points")
    sp["density"].add_argument("--t-range", dest="t_range", help="a:b:points (default -3:3:601)")
    c = sp["mc-corr"]
    c.add_argument("--delta", type=float)
    c.add_argument("--centers", help="comma list, e.g. 0.93j,0.6+0.7j")
    c.add_argument("--support", type=float, help="bump radius in rescaled units")
    c.add_argument("--rescale", type=float, help="rescale factor (default 1e-3 delta)")
    c.add_argument("--orders", help="k,l")
    r = sp["probe-repulsion"]
    r.add_argument("--x", type=float)
    r.add_argument("--gammas")
    r.add_argument("--scale", type=float, help="ball radius = gamma * scale (default 1e-3 delta)")
    a = sp["probe-anticonc"]
    a.add_argument("--weights", help="comma list or ones:N")
    a.add_argument("--z", type=float)
    a.add_argument("--radius", type=float)
    cp = sp["compare"]
    cp.add_argument("--profiles")
    cp.add_argument("--atoms")
    sp["selftest"].add_argument("--fixture", help="frozen-constant fixture (default: packaged)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args.command, merged_settings(args))
        status, out = run(cfg)
    except ConfigError as exc:
        print(json.dumps({"error": {"kind": "config", "command": args.command, "message": str(exc)}}),
              file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(json.dumps({"error": {"kind": type(exc).__name__, "command": args.command, "message": str(exc)}}),
              file=sys.stderr)
        return 3
    print(json.dumps(_jsonable(out), indent=2, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
