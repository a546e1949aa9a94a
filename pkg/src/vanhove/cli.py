"""Command line: ``vanhove run <config.toml>``, ``vanhove verify <suite>``, ``vanhove list-suites``.

Exit codes: 0 success, 1 failed verification, 2 parse error (or unknown
suite), 3 validation error, 4 resource error (t_max = tau/lambda^2 over budget).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .charfunc import ComponentEngine, SystemInitState, check_correlated_state, eval_charfunc
from .markov import (PROTOTYPES, QUANTITIES, ResourceError, Setup, free_factorization_scan,
                     prototype_check, vanhove_scan)
from .observables import coherence_t, correlation_witness, mixing_witness, occupation_t, squeezing_t
from .propagator import StabilityError, TimeGrid, solve
from .reservoir import CorrelationVector, GridFunction, MixingState, Perturbation, TestFunction
from .spectral import FrequencyGrid, SpectralModel

log = logging.getLogger("vanhove")

EXIT_FAIL, EXIT_PARSE, EXIT_INVALID, EXIT_RESOURCE = 1, 2, 3, 4


class ParseError(Exception):
    pass


class ValidationError(Exception):
    pass


# -- config --------------------------------------------------------------

_SPEC = {
    # block -> {field: type}; a tuple means "one of"
    "spectral": {"kind": str, "eta": float, "omega_c": float, "omega_max": float, "n_points": int,
                 "center": float, "width": float, "values": list},
    "reservoir": {"beta": float, "W": (float, list), "bumps": list, "xi": dict},
    "system": {"alpha": list, "n0": float, "omega_s": float},
    "probes": {"bumps": list},
    "time": {"t_max": float, "dt": float},
    "run": {"mode": str, "lambda": float, "times": list, "lambdas": list, "tau_max": float,
            "n_tau": int, "quantities": list, "kinds": list, "max_steps": int, "random_probes": int},
}
_TOP = {"name": str, "variant": str, "output": str, "seed": int}
_REQUIRED = ("spectral", "reservoir", "system", "run")


def _check_type(where, value, typ):
    types = typ if isinstance(typ, tuple) else (typ,)
    for t in types:
        if t is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return
        if t is int and isinstance(value, int) and not isinstance(value, bool):
            return
        if t not in (float, int) and isinstance(value, t):
            return
    names = " or ".join(t.__name__ for t in types)
    raise ParseError(f"{where}: expected {names}, got {type(value).__name__} ({value!r})")


def _line_of(text, block, key):
    """1-based line of ``key = ...`` inside ``[block]`` (or at top level), 0 if not found."""
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
        elif current == block and line.split("=", 1)[0].strip() == key:
            return n
    return 0


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for key, value in cfg.items():
        if key in _SPEC:
            if not isinstance(value, dict):
                raise ParseError(f"field {key}: expected a [{key}] table")
            for fk, fv in value.items():
                where = f"{key}.{fk} (line {_line_of(text, key, fk)})"
                if fk not in _SPEC[key]:
                    raise ParseError(f"{path}: field {where}: unknown key")
                _check_type(f"{path}: field {where}", fv, _SPEC[key][fk])
        elif key in _TOP:
            _check_type(f"{path}: field {key} (line {_line_of(text, None, key)})", value, _TOP[key])
        else:
            raise ParseError(f"{path}: field {key} (line {_line_of(text, None, key)}): unknown key")
    for block in _REQUIRED:
        if block not in cfg:
            raise ValidationError(f"[{block}] block missing")
    cfg.setdefault("name", path.stem)
    cfg.setdefault("variant", "RWA")
    cfg.setdefault("seed", 0)
    cfg.setdefault("output", str(path.parent / "out"))
    return cfg


@dataclass
class Scenario:
    name: str
    variant: str
    model: SpectralModel
    state: MixingState
    pert: Perturbation
    xi: GridFunction
    sys: SystemInitState
    omega_s: float
    probes: tuple
    run: dict
    time: dict
    seed: int
    output: Path


class _Block:
    """Turns ValueErrors raised while building a block into validation errors naming it."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if typ is not None and issubclass(typ, (ValueError, TypeError, KeyError, IndexError)):
            msg = str(exc)
            if msg.startswith(f"{self.name}: "):
                msg = msg[len(self.name) + 2:]
            raise ValidationError(f"[{self.name}] {msg}") from exc
        return False


def build_scenario(cfg: dict) -> Scenario:
    variant = cfg["variant"]
    if variant not in ("RWA", "CR"):
        raise ValidationError(f"variant must be RWA or CR, got {variant!r}")
    with _Block("spectral"):
        sp = dict(cfg["spectral"])
        kind = sp.pop("kind", "ohmic")
        omega_max = sp.pop("omega_max", 20.0 * sp.get("omega_c", 1.0))
        grid = FrequencyGrid(omega_max, sp.pop("n_points", 2048))
        model = SpectralModel(kind, sp, grid)
    with _Block("reservoir"):
        rs = cfg["reservoir"]
        if "beta" in rs and "W" in rs:
            raise ValueError("give either beta or W, not both")
        if "W" in rs:
            W = rs["W"]
            W = np.full(grid.n_points, float(W)) if np.isscalar(W) else np.asarray(W, float)
            if np.any(W <= 0):
                raise ValueError(f"W must be positive, got min W = {W.min():g}")
            state = MixingState(grid, W=W)
        else:
            state = MixingState.thermal(grid, float(rs.get("beta", 1.0)))
        bumps = [tuple(b) for b in rs.get("bumps", [])]
        pert = Perturbation.gaussian_bumps(grid, bumps) if bumps else Perturbation.none(grid)
        x = rs.get("xi")
        if x:
            xi = CorrelationVector.gaussian(grid, x["center"], x["width"], x.get("amplitude", 1.0),
                                            normalized=x.get("normalized", False))
        else:
            xi = CorrelationVector.zeros(grid)
        pert.check_positive(state)
    with _Block("system"):
        sc = cfg["system"]
        a = sc.get("alpha", [0.0, 0.0])
        if len(a) != 2:
            raise ValueError("alpha must be [re, im]")
        sys_ = SystemInitState(complex(a[0], a[1]), sc.get("n0", 0.0))
        omega_s = float(sc.get("omega_s", 1.0))
        grid.check_domain(omega_s, open_interval=True)
    with _Block("probes"):
        probes = tuple(TestFunction.gaussian(grid, c, w, normalized=True)
                       for c, w in cfg.get("probes", {}).get("bumps", []))
    with _Block("reservoir"):
        check_correlated_state(sys_, state, pert, xi)
    run = dict(cfg["run"])
    with _Block("run"):
        mode = run.setdefault("mode", "single")
        if mode not in ("single", "vanhove", "free", "prototypes"):
            raise ValueError(f"unknown mode {mode!r}")
        lams = run.get("lambdas", [0.4, 0.2, 0.1])
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambdas must be strictly decreasing")
        bad = set(run.get("quantities", [])) - set(QUANTITIES)
        if bad:
            raise ValueError(f"unknown quantities {sorted(bad)}")
        bad = set(run.get("kinds", [])) - set(PROTOTYPES)
        if bad:
            raise ValueError(f"unknown prototype kinds {sorted(bad)}")
        if mode in ("prototypes",) and not probes:
            raise ValueError("prototype checks need at least one probe")
        if mode == "free" and not probes:
            raise ValueError("free-evolution scan needs a probe")
    out = Path(cfg["output"]) / cfg["name"]
    return Scenario(cfg["name"], variant, model, state, pert, xi, sys_, omega_s, probes, run,
                    dict(cfg.get("time", {})), cfg["seed"], out)


# -- writers -------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])


GNUPLOT = """# gnuplot template: gnuplot -p {name}.gp
set datafile separator ','
set key autotitle columnhead
{body}
"""


def write_gnuplot(path: Path, csv_name: str, columns):
    body = "plot " + ", \\\n     ".join(f"'{csv_name}' using 1:{c} with lines" for c in columns)
    path.write_text(GNUPLOT.format(name=path.stem, body=body))


# -- modes ---------------------------------------------------------------

def _time_grid(sc: Scenario):
    omax = sc.model.grid.omega_max
    t_max = float(sc.time.get("t_max", 50.0))
    dt = float(sc.time.get("dt", 0.5 / omax))
    times = sc.run.get("times")
    tg = TimeGrid.fitting(t_max, dt)
    if times is not None and max(times) > t_max:
        raise ValidationError(f"[run] requested time {max(times)} beyond [time] t_max = {t_max}")
    return tg


def run_single(sc: Scenario, files: list):
    tg = _time_grid(sc)
    lam = float(sc.run.get("lambda", 0.2))
    prop = solve(sc.model, lam, sc.omega_s, tg, sc.variant)
    eng = ComponentEngine(sc.model, sc.state, sc.pert, sc.xi, prop, sc.probes)
    times = sc.run.get("times")
    idx = range(tg.n_steps + 1) if times is None else [tg.index(t) for t in times]
    occ_rows, traj_rows = [], []
    for j in idx:
        cs = eng.at_index(j)
        n, a, aa = occupation_t(cs, sc.sys), coherence_t(cs, sc.sys), squeezing_t(cs, sc.sys)
        occ_rows.append((cs.t, n, a.real, a.imag))
        wit = [correlation_witness(cs, i) for i in range(len(sc.probes))]
        mix = [mixing_witness(cs, sc.state, i) for i in range(len(sc.probes))]
        traj_rows.append((cs.t, n, a.real, a.imag, *wit, *mix, aa.real, aa.imag))
    write_csv(sc.output / "occupation.csv", ["t", "occupation", "re_coherence", "im_coherence"], occ_rows)
    p = len(sc.probes)
    header = (["t", "occupation", "re_coherence", "im_coherence"]
              + [f"correlation_witness_{i}" for i in range(p)] + [f"mixing_witness_{i}" for i in range(p)]
              + ["re_squeezing", "im_squeezing"])
    write_csv(sc.output / "trajectory.csv", header, traj_rows)
    prop.to_csv(sc.output / "propagator.csv")
    write_gnuplot(sc.output / "occupation.gp", "occupation.csv", [2, 3, 4])
    files += ["occupation.csv", "trajectory.csv", "propagator.csv", "occupation.gp"]
    n_rand = int(sc.run.get("random_probes", 0))
    if n_rand:
        rng = np.random.default_rng(sc.seed)
        cs = eng.at_index(idx[-1] if times is not None else tg.n_steps)
        rows = []
        for _ in range(n_rand):
            ja = complex(*rng.normal(size=2))
            c = rng.normal(size=p) + 1j * rng.normal(size=p)
            gv = eval_charfunc(cs, sc.sys, ja, c)
            rows.append((ja.real, ja.imag, *np.ravel(np.column_stack([c.real, c.imag])), gv.real, gv.imag))
        hdr = ["re_ja", "im_ja"] + [f"{part}_c{i}" for i in range(p) for part in ("re", "im")] + ["re_g", "im_g"]
        write_csv(sc.output / "charfunc_samples.csv", hdr, rows)
        files.append("charfunc_samples.csv")
    return {"lambda": lam, "n_steps": tg.n_steps, "dt": tg.dt}


def _setup(sc: Scenario):
    s = Setup(sc.model, sc.state, sc.pert, sc.xi, sc.sys, sc.omega_s, sc.probes, sc.variant,
              dt_max=sc.time.get("dt"))
    if "max_steps" in sc.run:
        s.max_steps = int(sc.run["max_steps"])
    return s


def run_vanhove(sc: Scenario, files: list):
    s = _setup(sc)
    default_q = ["A_aa", "h_a"] + (["correlation", "mixing"] if sc.probes else [])
    qs = sc.run.get("quantities", default_q)
    if any(q in ("correlation", "mixing") for q in qs) and not sc.probes:
        raise ValidationError("[run] correlation/mixing quantities need a probe")
    scan = vanhove_scan(s, sc.run.get("lambdas", [0.4, 0.2, 0.1]), sc.run.get("tau_max"),
                        int(sc.run.get("n_tau", 24)), qs)
    write_csv(sc.output / "convergence.csv", ["quantity", "lambda", "tau", "error"], scan.rows())
    summary = {q: scan.verdict(q) for q in qs}
    (sc.output / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files += ["convergence.csv", "summary.json"]
    return {"lambdas": scan.lambdas, "tau_max": float(scan.taus[-1])}


def run_prototypes(sc: Scenario, files: list):
    s = _setup(sc)
    lams = sc.run.get("lambdas", [0.4, 0.2, 0.1])
    tau_max = sc.run.get("tau_max") or 3.0 / s.rates()[0]
    n_tau = int(sc.run.get("n_tau", 12))
    for lam in lams:
        s.time_grid(lam, tau_max, n_tau)
    rows, summary = [], {}
    for kind in sc.run.get("kinds", list(PROTOTYPES)):
        sup = []
        for lam in lams:
            taus, err = prototype_check(kind, s, lam, tau_max, n_tau)
            rows += [(f"prototype-{kind}", lam, t, e) for t, e in zip(taus, err)]
            sup.append(float(err.max()))
        mono = all(b < a for a, b in zip(sup, sup[1:]))
        summary[f"prototype-{kind}"] = {"sup_errors": sup, "monotone": mono, "final": sup[-1],
                                        "pass": mono and sup[-1] < 0.05}
    write_csv(sc.output / "convergence.csv", ["quantity", "lambda", "tau", "error"], rows)
    (sc.output / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files += ["convergence.csv", "summary.json"]
    return {"lambdas": lams, "tau_max": tau_max}


def run_free(sc: Scenario, files: list):
    tg = _time_grid(sc)
    fr = free_factorization_scan(sc.state, sc.pert, sc.xi, sc.sys, sc.probes[0], sc.model, tg, sc.omega_s)
    write_csv(sc.output / "free.csv", ["t", "correlation_witness", "mixing_witness"],
              zip(fr.times, fr.correlation, fr.mixing))
    summary = {k: getattr(fr, k) for k in ("fitted_correlation_time", "predicted_correlation_time",
                                           "fitted_mixing_time", "predicted_mixing_time")}
    (sc.output / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_gnuplot(sc.output / "free.gp", "free.csv", [2, 3])
    files += ["free.csv", "summary.json", "free.gp"]
    return {"n_steps": tg.n_steps}


MODES = {"single": run_single, "vanhove": run_vanhove, "prototypes": run_prototypes, "free": run_free}


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        sc = build_scenario(cfg)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sc.output.mkdir(parents=True, exist_ok=True)
    files: list = []
    try:
        info = MODES[sc.run["mode"]](sc, files)
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StabilityError as exc:
        print(f"validation error: [run] {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = {"scenario": sc.name, "config": cfg, "version": __version__, "mode": sc.run["mode"],
                "seconds": round(time.perf_counter() - t0, 3), "files": files, "info": info}
    (sc.output / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    log.info("wrote %s", sc.output)
    print(sc.output)
    return 0


def cmd_verify(args) -> int:
    from .suites import SUITES
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if names[0] not in SUITES:
        print(f"unknown suite {args.suite!r}; see 'vanhove list-suites'", file=sys.stderr)
        return EXIT_PARSE
    ok = True
    for name in names:
        t0 = time.perf_counter()
        res = SUITES[name]()
        ok &= res.passed
        print(f"{name:<18} {res.line()}  ({time.perf_counter() - t0:.1f} s)", flush=True)
    return 0 if ok else EXIT_FAIL


def cmd_list(args) -> int:
    from .suites import SUITES
    for name, fn in SUITES.items():
        print(f"{name:<18} {fn.__name__}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="vanhove", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run a scenario from a TOML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="run a built-in acceptance suite ('all' for every suite)")
    p.add_argument("suite")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("list-suites", help="list the built-in suites")
    p.set_defaults(func=cmd_list)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
