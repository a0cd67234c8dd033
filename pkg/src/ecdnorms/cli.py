"""Command-line front end.

Experiments are described by a YAML file; any leaf can be overridden from
the command line with ``--override dotted.path=value`` (the value is parsed
as YAML). Each run writes ``report.json``, one CSV per sweep and, unless
``plots: false``, one SVG per sweep into the output directory.

Exit codes: 0 when every hard check passed, 1 when a hard check failed,
2 on a configuration or input error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import verify
from .enorm import enorm
from .errors import InvalidInputError
from .operators import make_discrete, operator_family
from .plotting import line_plot_svg
from .semigroups import SemigroupSpec, random_gkls
from .superop import Superoperator, ecd_lower

SCHEMA_VERSION = 1
EXPERIMENTS = ("enorm", "ecd", "semigroup", "verify-suite", "threshold-sweep", "series")
RUNTIME_KEYS = ("runtime_ms", "runtime_s")


class ConfigError(InvalidInputError):
    """Invalid experiment configuration; maps to exit code 2."""


class MatrixFormatError(ConfigError):
    """Malformed matrix file."""


# -- matrix files -------------------------------------------------------------


def _cell(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise MatrixFormatError(f"row {row}, column {col}: not a number: {text!r}") from None


def import_matrix(path):
    """Read a square complex matrix from ``.csv`` or ``.json``.

    CSV: one line per matrix row holding ``2d`` numbers, the real and
    imaginary part of each entry in turn. JSON: ``{"dim": d, "entries":
    [[re, im], ...]}`` with ``d*d`` entries in row-major order.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"matrix file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise MatrixFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
        if not isinstance(data, dict) or "dim" not in data or "entries" not in data:
            raise MatrixFormatError(f"{path}: expected an object with 'dim' and 'entries'")
        d = data["dim"]
        entries = data["entries"]
        if not isinstance(d, int) or d < 1:
            raise MatrixFormatError(f"{path}: 'dim' must be a positive integer")
        if not isinstance(entries, list) or len(entries) != d * d:
            raise MatrixFormatError(f"{path}: expected {d * d} entries")
        M = np.empty((d, d), dtype=complex)
        for n, e in enumerate(entries):
            r, c = divmod(n, d)
            if not isinstance(e, list) or len(e) != 2 or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in e
            ):
                raise MatrixFormatError(f"{path}: row {r}, column {c}: entry must be [re, im]")
            M[r, c] = complex(e[0], e[1])
        return M
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    d = len(rows)
    if d == 0:
        raise MatrixFormatError(f"{path}: empty matrix file")
    M = np.empty((d, d), dtype=complex)
    for r, row in enumerate(rows):
        if len(row) != 2 * d:
            raise MatrixFormatError(f"{path}: row {r} has {len(row)} columns, expected {2 * d}")
        for c in range(d):
            M[r, c] = complex(_cell(row[2 * c], r, 2 * c), _cell(row[2 * c + 1], r, 2 * c + 1))
    return M


def export_matrix(M, path):
    """Write ``M`` in the format implied by the suffix; values round-trip exactly."""
    M = np.asarray(M, dtype=complex)
    path = Path(path)
    if path.suffix.lower() == ".json":
        entries = [[float(z.real), float(z.imag)] for z in M.reshape(-1)]
        path.write_text(json.dumps({"dim": M.shape[0], "entries": entries}) + "\n")
        return
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


# -- configuration ------------------------------------------------------------


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: {where}: {exc.problem}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


def apply_override(cfg, item):
    """Set ``cfg[a][b]... = value`` from ``'a.b=value'``."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override {item!r} has an empty key component")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigError(f"override {item!r}: value does not parse") from None
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def _positive_list(cfg, key, default=None):
    val = cfg.get(key, default)
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"field {key!r}: must be a nonempty list of positive numbers")
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
            raise ConfigError(f"field {key!r}[{i}]: must be a positive number, got {v!r}")
    return [float(v) for v in val]


def _int(cfg, key, default, minimum=0):
    val = cfg.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise ConfigError(f"field {key!r}: must be an integer >= {minimum}, got {val!r}")
    return val


def _parse_G(spec):
    """``'number 16'``, ``{kind: number, dim: 16}`` or ``{kind: custom, eigenvalues: [...]}``."""
    if isinstance(spec, str):
        parts = spec.split()
        if len(parts) != 2 or parts[0] != "number":
            raise ConfigError(f"field 'G': expected 'number <dim>', got {spec!r}")
        try:
            spec = {"kind": "number", "dim": int(parts[1])}
        except ValueError:
            raise ConfigError(f"field 'G': dimension is not an integer in {spec!r}") from None
    if not isinstance(spec, dict):
        raise ConfigError("field 'G': must be a string or a mapping")
    try:
        return make_discrete(spec.get("kind", "number"), spec.get("dim"), spec.get("eigenvalues"))
    except InvalidInputError as exc:
        raise ConfigError(f"field 'G': {exc}") from None


def _parse_operator(spec, G, field="A"):
    """``'power 0.5'``, ``'sqrt_log'``, ``{family, alpha}`` or ``{file: path}``."""
    if isinstance(spec, str):
        parts = spec.split()
        if parts[0] == "sqrt_log" and len(parts) == 1:
            spec = {"family": "sqrt_log"}
        elif parts[0] == "power" and len(parts) == 2:
            try:
                spec = {"family": "power", "alpha": float(parts[1])}
            except ValueError:
                raise ConfigError(f"field {field!r}: exponent is not a number in {spec!r}") from None
        else:
            raise ConfigError(f"field {field!r}: unknown operator {spec!r}")
    if not isinstance(spec, dict):
        raise ConfigError(f"field {field!r}: must be a string or a mapping")
    if "file" in spec:
        M = import_matrix(spec["file"])
        label = f"file {spec['file']}"
    else:
        try:
            M = operator_family(G, spec.get("family"), spec.get("alpha"))
        except InvalidInputError as exc:
            raise ConfigError(f"field {field!r}: {exc}") from None
        label = spec["family"] if spec.get("alpha") is None else f"{spec['family']} {spec['alpha']}"
    if M.shape[0] != G.dim:
        raise ConfigError(f"field {field!r}: operator dimension {M.shape[0]} does not match G dimension {G.dim}")
    return M, label


# -- experiments --------------------------------------------------------------


def _exp_enorm(cfg):
    G = _parse_G(cfg.get("G", "number 16"))
    A, label = _parse_operator(cfg.get("A", "power 0.5"), G)
    E_list = _positive_list(cfg, "E")
    checks, pts = [], []
    for E in E_list:
        start = time.perf_counter()
        res = enorm(A, G, E)
        pts.append((E, res.value, res.gap))
        checks.append(verify._result("enorm.duality_gap", "dual gap of the E-norm solver",
                                     {"A": label, "d": G.dim, "E": E, "value": res.value},
                                     res.gap, 1e-7 * (1 + res.value**2), 0.0, start))
    return checks, [verify._sweep("enorm", "E", pts, {"A": label, "d": G.dim})]


def _parse_map(cfg, G):
    spec = cfg.get("phi")
    if not isinstance(spec, dict):
        raise ConfigError("field 'phi': must be a mapping")
    if "choi_file" in spec:
        J = import_matrix(spec["choi_file"])
        if J.shape[0] % G.dim:
            raise ConfigError(f"field 'phi.choi_file': dimension {J.shape[0]} is not a multiple of {G.dim}")
        try:
            return Superoperator.from_choi(J, G.dim), f"choi {spec['choi_file']}"
        except InvalidInputError as exc:
            raise ConfigError(f"field 'phi': {exc}") from None
    sg = _parse_semigroup(spec, G, "phi")
    t = spec.get("t")
    if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
        raise ConfigError("field 'phi.t': must be a nonnegative number")
    chan = sg.channel_at(float(t))
    if spec.get("minus_identity", True):
        return chan - Superoperator.identity(G.dim), f"{sg.kind} t={t} minus identity"
    return chan, f"{sg.kind} t={t}"


def _parse_semigroup(spec, G, field):
    kind = spec.get("kind")
    try:
        if kind in ("unitary", "gaussian"):
            A, _ = _parse_operator(spec.get("A", "power 0.5"), G, f"{field}.A")
            return SemigroupSpec(kind, A=A)
        if kind == "gkls":
            rng = np.random.default_rng(spec.get("instance_seed", 0))
            V, K = random_gkls(G.dim, int(spec.get("n_ops", 2)), rng)
            return SemigroupSpec("gkls", V=V, K=K)
    except InvalidInputError as exc:
        raise ConfigError(f"field {field!r}: {exc}") from None
    raise ConfigError(f"field '{field}.kind': must be unitary, gaussian or gkls, got {kind!r}")


def _exp_ecd(cfg):
    G = _parse_G(cfg.get("G", "number 8"))
    phi, label = _parse_map(cfg, G)
    E_list = _positive_list(cfg, "E")
    seed = _int(cfg, "seed", 0)
    restarts = _int(cfg, "restarts", 16, 1)
    pts = []
    for E in E_list:
        est = ecd_lower(phi, G, E, restarts=restarts, seed=seed)
        pts.append((E, est.value, max(est.restart_values) - min(est.restart_values)))
    return [], [verify._sweep("ecd", "E", pts, {"phi": label, "d": G.dim, "seed": seed, "restarts": restarts})]


def _exp_semigroup(cfg):
    G = _parse_G(cfg.get("G", "number 16"))
    spec = cfg.get("semigroup", {"kind": "unitary", "A": "power 0.5"})
    if not isinstance(spec, dict):
        raise ConfigError("field 'semigroup': must be a mapping")
    sg = _parse_semigroup(spec, G, "semigroup")
    E_list = _positive_list(cfg, "E")
    t_grid = _positive_list(cfg, "t")
    seed = _int(cfg, "seed", 0)
    restarts = _int(cfg, "restarts", 8, 1)
    checks, sweeps = [], []
    for E in E_list:
        if sg.kind == "gkls":
            c = verify.check_gkls_bounds(sg.V, sg.K, G, E, t_grid, restarts=restarts, seed=seed, label="gkls")
        else:
            c = verify.check_continuity_bounds(sg.A, G, E, t_grid, kinds=(sg.kind,), restarts=restarts, seed=seed,
                                               label=str(spec.get("A")))
        checks.extend(c)
        pts = [(r.parameters["t"], r.lhs, r.margin) for r in c if r.check_id.startswith("bound.continuity.") and not r.advisory]
        sweeps.append(verify._sweep(f"semigroup.{sg.kind}.E{E:g}", "time t", pts, {"d": G.dim, "E": E}))
    return checks, sweeps


def _exp_threshold(cfg):
    alpha = cfg.get("alpha", [0.25, 0.5, 0.75])
    if not isinstance(alpha, list) or not alpha:
        raise ConfigError("field 'alpha': must be a nonempty list")
    d_list = cfg.get("d", [16, 32, 64, 128])
    if not isinstance(d_list, list) or len(d_list) < 2 or any(not isinstance(d, int) or d < 2 for d in d_list):
        raise ConfigError("field 'd': must be a list of at least two integers >= 2")
    if sorted(set(d_list)) != d_list:
        raise ConfigError("field 'd': must be strictly increasing")
    scale = _int(cfg, "exponent_scale", 1, 1)
    sweeps, checks = verify.check_threshold_sweep(tuple(alpha), tuple(d_list), tuple(_positive_list(cfg, "E")), scale)
    return checks, sweeps


def _exp_series(cfg):
    G = _parse_G(cfg.get("G", "number 32"))
    A, label = _parse_operator(cfg.get("A", "sqrt_log"), G)
    E = _positive_list(cfg, "E", [4.0])
    t = _positive_list(cfg, "t", [1.0])
    sweep, checks = verify.check_series_convergence(
        A, G, E[0], t[0], _int(cfg, "n_max", 20), restarts=_int(cfg, "restarts", 8, 1),
        seed=_int(cfg, "seed", 0), label=label)
    return checks, [sweep]


def _exp_suite(cfg):
    suite = copy.deepcopy(cfg.get("suite") or {})
    if not isinstance(suite, dict):
        raise ConfigError("field 'suite': must be a mapping")
    suite.setdefault("seed", _int(cfg, "seed", 0))
    if "restarts" in cfg:
        suite.setdefault("restarts", _int(cfg, "restarts", 8, 1))
    try:
        checks, sweeps, resolved = verify.run_suite(suite, only=cfg.get("only"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"field 'suite': malformed entry ({exc})") from None
    cfg["suite"] = resolved
    return checks, sweeps


RUNNERS = {
    "enorm": _exp_enorm,
    "ecd": _exp_ecd,
    "semigroup": _exp_semigroup,
    "verify-suite": _exp_suite,
    "threshold-sweep": _exp_threshold,
    "series": _exp_series,
}


# -- outputs ------------------------------------------------------------------


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def build_report(cfg, checks, sweeps, runtime_s):
    hard = [c for c in checks if not c.advisory]
    return _json_safe({
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg["experiment"],
        "config": cfg,
        "checks": [c.to_dict() for c in checks],
        "sweeps": [s.to_dict() for s in sweeps],
        "summary": {
            "n_checks": len(checks),
            "n_hard_failed": sum(not c.passed for c in hard),
            "n_advisory_failed": sum(not c.passed for c in checks if c.advisory),
            "passed": all(c.passed for c in hard),
        },
        "runtime_s": round(runtime_s, 3),
    })


def strip_runtime(report):
    """Copy of a report without its runtime fields."""
    if isinstance(report, dict):
        return {k: strip_runtime(v) for k, v in report.items() if k not in RUNTIME_KEYS}
    if isinstance(report, list):
        return [strip_runtime(v) for v in report]
    return report


def write_outputs(report, sweeps, out_dir, plots=True):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for sw in sweeps:
        with (out_dir / f"{sw.sweep_id}.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis", "value", "margin"])
            for x, y, m in sw.points:
                w.writerow([repr(x), repr(y), repr(m)])
        if plots:
            loglog = sw.fitted_slope is not None or sw.axis == "time t"
            svg = line_plot_svg([p[0] for p in sw.points], [p[1] for p in sw.points],
                                title=sw.sweep_id, xlabel=sw.axis, ylabel="value", loglog=loglog)
            (out_dir / f"{sw.sweep_id}.svg").write_text(svg)


def run(cfg, out_dir=None):
    """Execute a resolved config dict; returns ``(exit_code, report)``."""
    cfg = copy.deepcopy(cfg)
    exp = cfg.get("experiment")
    if exp not in RUNNERS:
        raise ConfigError(f"field 'experiment': must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    cfg.setdefault("seed", 0)
    _int(cfg, "seed", 0)
    start = time.perf_counter()
    try:
        checks, sweeps = RUNNERS[exp](cfg)
    except ConfigError:
        raise
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    report = build_report(cfg, checks, sweeps, time.perf_counter() - start)
    out_dir = out_dir or cfg.get("out_dir", "out")
    write_outputs(report, sweeps, out_dir, plots=cfg.get("plots", True))
    return (0 if report["summary"]["passed"] else 1), report


def _parser():
    p = argparse.ArgumentParser(prog="ecdnorms", description="Energy-constrained norms and semigroup bound checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        sp.add_argument("--out-dir", default=None, help="output directory (default: out)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a config leaf by dotted path; repeatable")

    sp = sub.add_parser("run", help="run the experiment described by a config file")
    sp.add_argument("config")
    common(sp)
    for name, exp in (("enorm", "enorm"), ("ecd", "ecd"), ("semigroup", "semigroup"), ("verify", "verify-suite")):
        sp = sub.add_parser(name, help=f"run the {exp} experiment")
        sp.add_argument("config", nargs="?", default=None)
        sp.set_defaults(experiment=exp)
        common(sp)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        if getattr(args, "experiment", None):
            cfg["experiment"] = args.experiment
        for item in args.override:
            apply_override(cfg, item)
        if args.seed is not None:
            cfg["seed"] = args.seed
        code, report = run(cfg, args.out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    s = report["summary"]
    print(f"{report['experiment']}: {s['n_checks']} checks, {s['n_hard_failed']} hard failures, "
          f"{s['n_advisory_failed']} advisory failures, {report['runtime_s']:.1f} s")
    return code


if __name__ == "__main__":
    sys.exit(main())
