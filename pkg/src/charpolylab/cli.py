"""Batch runner: configuration, seeding, parallel execution, and CSV/JSON
emission for the verification and experiment commands.

Every command is a pure function of its RunConfig (seed included): outputs
are byte-identical across repeated runs and thread counts.  Files are
written atomically (temp file + rename).  Exit codes: 0 success, 1 a
--check assertion failed, 2 configuration error.
"""

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from ._rng import substream, task_seed
from . import charpoly, ensemble, extremes, gaussfield, momentlab, orthopoly
from .gaussfield import BiasSpec

__all__ = ["RunConfig", "run", "emit", "main", "validate_against_schema",
           "summary_schema"]

COMMANDS = ("gen-spectrum", "max-experiment", "fs-verify", "mem-verify",
            "branch-verify", "matching-verify", "lowerbound-sim",
            "upperbound-verify", "brw-verify")


@dataclass
class RunConfig:
    command: str
    model: str = "gue"
    N: int = 64
    n: int = 8
    n_samples: int = 100
    seed: int = 1
    threads: int = 0  # 0 -> CHARPOLY_THREADS or 1
    out_path: str = None
    check: bool = False
    delta: float = 0.2
    eta: int = 3
    y: float = 2.0
    epsilon: float = 0.3
    k: int = 1
    ell: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.model != "gue":
            raise ConfigError(f"unknown model {self.model!r}")
        if self.threads == 0:
            self.threads = int(os.environ.get("CHARPOLY_THREADS", "1"))
        for name, lo in (("N", 1), ("n", 2), ("n_samples", 1), ("threads", 1),
                         ("eta", 1), ("k", 0), ("ell", 0), ("stride", 1)):
            if getattr(self, name) < lo:
                raise ConfigError(f"{name} must be >= {lo}")
        if not 0.0 < self.delta < 0.5:
            raise ConfigError("delta must lie in (0, 1/2)")


class ConfigError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _atomic_write(path, text):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit(records, path, format, header=None):
    """Write records atomically; floats carry 17 significant digits.

    csv: records is a list of rows, header a list of column names.
    json: records is a JSON-serializable object.
    """
    if format == "csv":
        import io
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in records:
            w.writerow([_fmt(v) for v in row])
        _atomic_write(path, buf.getvalue())
    elif format == "json":
        _atomic_write(path, json.dumps(records, indent=1, sort_keys=True,
                                       default=_fmt) + "\n")
    else:
        raise ConfigError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# JSON summary schemas (shipped next to the package)
# ---------------------------------------------------------------------------

def summary_schema():
    path = os.path.join(os.path.dirname(__file__), "schemas", "summaries.json")
    with open(path) as fh:
        return json.load(fh)


def validate_against_schema(obj, schema):
    """Minimal structural validation: required keys and scalar/array types."""
    def check(value, spec, where):
        t = spec["type"] if isinstance(spec, dict) else spec
        if t == "object":
            if not isinstance(value, dict):
                raise ValueError(f"{where}: expected object")
            for key, sub in spec.get("properties", {}).items():
                if key in spec.get("required", list(spec.get("properties", {}))):
                    if key not in value:
                        raise ValueError(f"{where}: missing key {key!r}")
                if key in value:
                    check(value[key], sub, f"{where}.{key}")
        elif t == "array":
            if not isinstance(value, list):
                raise ValueError(f"{where}: expected array")
            if "items" in spec:
                for i, item in enumerate(value):
                    check(item, spec["items"], f"{where}[{i}]")
        elif t == "number":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"{where}: expected number, got {value!r}")
        elif t == "integer":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{where}: expected integer, got {value!r}")
        elif t == "string":
            if not isinstance(value, str):
                raise ValueError(f"{where}: expected string")
        elif t == "boolean":
            if not isinstance(value, bool):
                raise ValueError(f"{where}: expected boolean")
        else:
            raise ValueError(f"{where}: unknown schema type {t!r}")
    check(obj, schema, "$")
    return True


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_gen_spectrum(cfg):
    spec = ensemble.sample_spectrum_gue(cfg.N, cfg.seed)
    checks = [("sorted", bool(np.all(np.diff(spec.eigenvalues) >= 0))),
              ("length", len(spec.eigenvalues) == cfg.N)]
    if cfg.out_path:
        ensemble.save_spectrum(spec, cfg.out_path)
    return None, checks


def _cmd_max_experiment(cfg):
    model = ensemble.gue_model()
    records, summary = extremes.max_experiment(model, cfg.N, cfg.n_samples,
                                               cfg.y, cfg.seed, threads=cfg.threads)
    if cfg.out_path:
        emit(extremes.experiment_rows(records), cfg.out_path, "csv",
             header=extremes.EXPERIMENT_CSV_FIELDS)
        validate_against_schema(summary, summary_schema()["max_experiment"])
        emit(summary, str(cfg.out_path) + ".summary.json", "json")
    med = summary["ratio_quartiles"][1]
    med2 = summary["second_order_quartiles"][1]
    checks = [("median_ratio_band", 0.55 <= med <= 1.1),
              ("median_second_order_band", -3.0 <= med2 <= 4.0)]
    return summary, checks


def _cmd_fs_verify(cfg):
    model = ensemble.gue_model()
    cases = []
    checks = []
    fixed = [((0.3 + 0.4j,), (-0.2 + 0.5j,)),
             ((-0.35 + 0.45j,), (0.25 + 0.6j,))]
    for i, (p, q) in enumerate(fixed):
        table = orthopoly.recurrence_table(model, cfg.N, cfg.N + 16)
        f = charpoly.fs_balanced(table, p, q)
        mc, se = charpoly.mc_char_ratio(cfg.N, p, q, cfg.n_samples,
                                        task_seed(cfg.seed, i))
        cases.append(charpoly.VerificationCase(
            case_id=f"balanced_l1_case{i}", N=cfg.N,
            formula_value=float(f.real), mc_value=float(mc.real),
            mc_stderr=float(se)))
        # the deviation is complex; se applies per real component
        z = abs(mc - f) / (se * math.sqrt(2.0))
        checks.append((f"balanced_l1_case{i}", z <= 3.0))
    if cfg.out_path:
        charpoly.write_verification_report(cases, cfg.out_path)
    return cases, checks


def _mem_suite(seed, n_values=(64, 128, 256, 512)):
    model = ensemble.gue_model()
    rows = []
    for N in n_values:
        rr = 1.0 - N ** -0.5
        z = 1j * rr
        w = 1j * rr * np.exp(1j * 0.4 * N ** -0.5)
        bias = BiasSpec(plus_points=(z,), minus_points=(w,))
        table = orthopoly.recurrence_table(model, N, N + 8)
        ratio = momentlab.mem_ratio(table, model, bias)
        rows.append([N, "singleton_pair_ray", ratio, abs(ratio - 1.0)])
    return rows


def _cmd_mem_verify(cfg):
    rows = _mem_suite(cfg.seed)
    if cfg.out_path:
        emit(rows, cfg.out_path, "csv", header=["N", "bias_id", "ratio", "abs_error"])
    errs = [r[3] for r in rows]
    checks = [("strictly_decreasing", all(a > b for a, b in zip(errs, errs[1:]))),
              ("final_below_quarter", errs[-1] < 0.25)]
    return rows, checks


def _cmd_branch_verify(cfg):
    from .hyperbolic import branch_profile_grid
    thetas = np.linspace(-math.pi, math.pi, 10001)[1:-1]
    max_abs = 0.0
    max_c = 0.0
    rows = []
    for h in range(0, 26):
        for j in range(0, 26):
            errors, refined = branch_profile_grid(h, j, thetas)
            worst = float(np.abs(errors).max())
            max_abs = max(max_abs, worst)
            max_c = max(max_c, float(refined.max()))
            rows.append([h, j, worst])
    if cfg.out_path:
        emit(rows, cfg.out_path, "csv", header=["h", "j", "max_abs_error"])
    checks = [("uniform_error_bound", max_abs <= 1.0),
              ("refined_constant", max_c <= 10.0)]
    return {"max_abs_error": max_abs, "refined_constant": max_c}, checks


def _cmd_matching_verify(cfg):
    rng = substream(cfg.seed, 0)
    sups = []
    for t in range(cfg.n_samples):
        k = int(rng.integers(0, 3))
        ell = int(rng.integers(0, 6 - k))
        if k + ell == 0:
            k = 1
        config = momentlab.random_pair_configuration(k, ell, cfg.epsilon, rng)
        sups.append(momentlab.matching_subset_sup(config))
    sups = np.array(sups)
    half = sups[: len(sups) // 2].max()
    full = sups.max()
    rows = [[i, s] for i, s in enumerate(sups)]
    if cfg.out_path:
        emit(rows, cfg.out_path, "csv", header=["config_index", "subset_sup"])
    checks = [("finite", bool(np.isfinite(full))),
              ("stable", full <= 2.0 * half)]
    return {"sup_first_half": float(half), "sup_full": float(full)}, checks


def _cmd_lowerbound_sim(cfg):
    params = momentlab.LowerBoundParams(n=cfg.n, delta=cfg.delta, eta=cfg.eta,
                                        stride=cfg.stride)
    res = momentlab.lower_bound_mc(params, cfg.n_samples, cfg.seed)
    doc = res.to_json_dict()
    if cfg.out_path:
        validate_against_schema(doc, summary_schema()["lowerbound_sim"])
        emit(doc, cfg.out_path, "json")
    br = params.b[params.r]
    small = [b for b in res.per_m_bins if b["m"] <= 0.75 * br]
    checks = [
        ("cauchy_schwarz", res.p_z_positive >= res.cs_ratio - 2.0 *
         math.hypot(res.p_z_se, res.cs_ratio_se)),
        ("bias_max_exceeds", res.bias_max_exceed_frac >= 0.5),
        ("small_m_factorization",
         all(abs(b["factorization_ratio"] - 1.0) <= 0.3 for b in small)),
    ]
    return doc, checks


def _cmd_upperbound_verify(cfg):
    model = ensemble.gue_model()
    # tail fraction of the grid maximum
    records, _ = extremes.max_experiment(model, cfg.N, cfg.n_samples, None,
                                         cfg.seed, threads=cfg.threads)
    thresh = math.log(cfg.N) + 3.0 * math.log(math.log(cfg.N))
    tail = float(np.mean([r.m_star > thresh for r in records]))
    # Chebyshev-grid factor on random polynomials
    rng = substream(cfg.seed, 1)
    worst_ratio = 0.0
    for t in range(50):
        deg = int(rng.integers(4, 257))
        roots = rng.uniform(-1.1, 1.1, deg) + 1j * rng.uniform(-0.3, 0.3, deg)
        worst_ratio = max(worst_ratio,
                          extremes.factor14_check(deg, roots=roots)["max_ratio"])
    # Laplace transform bound over the verification grid
    tab = orthopoly.recurrence_table(model, 64, 64 + 16)
    c_emp = 0.0
    for x in (-0.6, -0.2, 0.0, 0.3, 0.7):
        for im in (1.0 / 64, 0.05, 0.2, 1.0):
            q = x + 1j * im
            for sign in (+1, -1):
                v = charpoly.exp_pm2_moment(tab, model, q, sign)
                bound = v * im / ((1.0 + im) * orthopoly.r_weight(model, q) ** 2)
                c_emp = max(c_emp, bound)
    doc = {"tail_fraction": tail, "worst_factor_ratio": worst_ratio,
           "laplace_bound_constant": c_emp}
    if cfg.out_path:
        emit(doc, cfg.out_path, "json")
    checks = [("tail_below_5pct", tail < 0.05),
              ("factor14", worst_ratio <= 14.0),
              ("laplace_bound", c_emp <= 100.0)]
    return doc, checks


def _cmd_brw_verify(cfg):
    from .hyperbolic import ray_point
    grid = []
    for h in range(2, 9):
        for th in np.linspace(-0.5, 0.5, 9):
            grid.append(ray_point(h) * np.exp(1j * th))
    res_g = gaussfield.brw_check(grid, gaussfield.kernel_g())
    res_t = gaussfield.brw_check(grid, gaussfield.kernel_t())
    lo, hi = res_g["k_offset_range"]
    center = -0.5 * math.log(2.0)
    doc = {"G": {"c_b": res_g["c_b"], "c_c": res_g["c_c"],
                 "k_offset_range": [lo, hi]},
           "T": {"c_b": res_t["c_b"], "c_c": res_t["c_c"],
                 "k_offset_range": list(res_t["k_offset_range"])}}
    if cfg.out_path:
        emit(doc, cfg.out_path, "json")
    checks = [("k_offset_width", hi - lo <= 2.0),
              ("k_offset_around_center", lo >= center - 1.0 and hi <= center + 1.0),
              ("c_b_finite", math.isfinite(res_g["c_b"]))]
    return doc, checks


_RUNNERS = {
    "gen-spectrum": _cmd_gen_spectrum,
    "max-experiment": _cmd_max_experiment,
    "fs-verify": _cmd_fs_verify,
    "mem-verify": _cmd_mem_verify,
    "branch-verify": _cmd_branch_verify,
    "matching-verify": _cmd_matching_verify,
    "lowerbound-sim": _cmd_lowerbound_sim,
    "upperbound-verify": _cmd_upperbound_verify,
    "brw-verify": _cmd_brw_verify,
}


def run(config):
    """Execute a command; returns the process exit code."""
    try:
        _, checks = _RUNNERS[config.command](config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if config.check:
        failed = [name for name, ok in checks if not ok]
        for name, ok in checks:
            print(f"check {name}: {'pass' if ok else 'FAIL'}")
        return 1 if failed else 0
    return 0


def _parse_config_file(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                key, _, val = line.partition("=")
            else:
                key, _, val = line.partition(" ")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"N", "n", "n_samples", "seed", "threads", "eta", "k", "ell", "stride"}
_FLOAT_KEYS = {"delta", "y", "epsilon"}
_ALIAS = {"samples": "n_samples", "l": "ell", "out": "out_path"}


def _coerce(key, val):
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    return val


def build_config(command, file_values, flag_values):
    kwargs = {"command": command}
    for source in (file_values, flag_values):
        for key, val in source.items():
            key = _ALIAS.get(key, key)
            if key == "command":
                continue
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(key, val) if isinstance(val, str) else val
    return RunConfig(**kwargs)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="charpolylab",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--model", default=None)
    parser.add_argument("--N", type=int, default=None)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--samples", type=int, default=None, dest="n_samples")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default=None, dest="out_path")
    parser.add_argument("--check", action="store_true", default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--eta", type=int, default=None)
    parser.add_argument("--y", type=float, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--l", type=int, default=None, dest="ell")
    parser.add_argument("--stride", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        file_values = _parse_config_file(args.config) if args.config else {}
        flag_values = {k: v for k, v in vars(args).items()
                       if v is not None and k not in ("command", "config")}
        config = build_config(args.command, file_values, flag_values)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
