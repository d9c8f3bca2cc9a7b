"""Command-line interface.

    chanmagic monotone  --channel ch.json [--measure all]
    chanmagic simulate  --circuit circ.json [--method static|dynamic]
    chanmagic reproduce {state_counts,affine_counts,subspaces,third_level,multicontrol,tensor_powers,ampdamp}
    chanmagic cache     {build,verify,info} --n N

Exit codes: 0 ok, 2 parse error, 3 size limit, 4 solver failure, 5 cache error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import channels as chmod
from . import lp
from . import monotones as mono
from . import simulators as sim
from . import stab_catalog as sc
from .pauli_tableau import tableau_to_dense

EXIT_OK, EXIT_PARSE, EXIT_LIMIT, EXIT_SOLVER, EXIT_CACHE = 0, 2, 3, 4, 5
MEASURES = ("rphi", "cap", "rstar", "rcpr")
TABLES = ("state_counts", "affine_counts", "subspaces", "third_level", "multicontrol", "tensor_powers", "ampdamp")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str = ""
    channel: str | None = None
    circuit: str | None = None
    measure: str = "all"
    samples: int | None = None
    delta: float = 0.1
    epsilon: float = 0.05
    seed: int = 0
    method: str = "static"
    cache_dir: str | None = None
    out: str | None = None
    format: str = "json"
    jobs: int = 1
    extended: bool = False
    scale: int | None = None
    tol: float = 1e-9
    max_iter: int = 500000
    backend: str = "simplex"
    export: str | None = None
    table: str | None = None
    action: str | None = None
    n: int | None = None
    block: int = 0

    def validate(self):
        if self.measure not in MEASURES + ("all",):
            raise ConfigError(f"unknown measure {self.measure!r}")
        if self.method not in ("static", "dynamic"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.backend not in lp.BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if not self.delta > 0 or not 0 < self.epsilon < 1:
            raise ConfigError("need delta > 0 and 0 < epsilon < 1")
        if not 0 <= self.block <= 5:
            raise ConfigError("block must be in 0..5")
        if self.table is not None and self.table not in TABLES:
            raise ConfigError(f"unknown table {self.table!r}")
        return self


FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config_file(path) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return {k.replace("-", "_"): v for k, v in data.items()}


def merge_config(file_values: dict, flag_values: dict) -> RunConfig:
    """Defaults, then config file, then explicit flags."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if k in FIELDS}}
    try:
        cfg = RunConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    for f in dataclasses.fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name in ("samples", "seed", "jobs", "scale", "max_iter", "n", "block"):
            setattr(cfg, f.name, int(v))
        elif f.name in ("delta", "epsilon", "tol"):
            setattr(cfg, f.name, float(v))
    return cfg.validate()


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", default=S, help="JSON file with option values (flags win)")
    g.add_argument("--cache-dir", dest="cache_dir", default=S,
                   help="catalogue cache directory (overrides MAGIC_CACHE_DIR)")
    g.add_argument("--out", default=S, help="write results to FILE instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), default=S, help="output format (default json)")
    g.add_argument("--jobs", type=int, default=S, help="worker processes (default 1)")
    g.add_argument("--seed", type=int, default=S, help="RNG seed (default 0)")
    g.add_argument("--tol", type=float, default=S, help="simplex reduced-cost tolerance (default 1e-9)")
    g.add_argument("--max-iter", dest="max_iter", type=int, default=S, help="simplex iteration limit")
    g.add_argument("--backend", choices=tuple(lp.BACKENDS), default=S,
                   help="LP backend: simplex (default) or highs (cross-check)")

    p = argparse.ArgumentParser(prog="chanmagic", description="Magic monotones and simulators for quantum channels.",
                                epilog="exit codes: 0 ok, 2 parse, 3 size limit, 4 solver, 5 cache")
    sub = p.add_subparsers(dest="subcommand", required=True)

    m = sub.add_parser("monotone", parents=[common], help="compute R_phi, C, R* (and R_CPR)")
    m.add_argument("--channel", default=S, help="channel JSON file")
    m.add_argument("--measure", choices=MEASURES + ("all",), default=S,
                   help="measure to compute; 'all' = rphi, cap, rstar (default all)")
    m.add_argument("--export", default=S, help="write the Choi-state decomposition JSON to FILE")

    s = sub.add_parser("simulate", parents=[common], help="estimate a Pauli expectation by Monte Carlo")
    s.add_argument("--circuit", default=S, help="circuit JSON file")
    s.add_argument("--method", choices=("static", "dynamic"), default=S, help="simulator (default static)")
    s.add_argument("--samples", type=int, default=S, help="sample count (default: Hoeffding forecast)")
    s.add_argument("--delta", type=float, default=S, help="target additive error (default 0.1)")
    s.add_argument("--epsilon", type=float, default=S, help="failure probability (default 0.05)")
    s.add_argument("--block", type=int, default=S,
                   help="merge runs of 1-qubit diagonal gates into blocks of at most K qubits (0 = off)")

    r = sub.add_parser("reproduce", parents=[common], help="write a results table as CSV/JSON")
    r.add_argument("table", choices=TABLES)
    r.add_argument("--extended", action="store_true", default=S, help="include 5-qubit rows (slow)")
    r.add_argument("--scale", type=int, default=S, help="largest qubit count in sweeps")

    c = sub.add_parser("cache", parents=[common], help="manage stabiliser catalogue caches")
    c.add_argument("action", choices=("build", "verify", "info"))
    c.add_argument("--n", type=int, default=S, help="qubit count 1..5")
    return p


# ---------------------------------------------------------------------------
# output


def fmt(v):
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return f"{v:.6f}"
    return v


def write_rows(rows: list, cfg: RunConfig, meta: dict | None = None):
    if cfg.format == "csv":
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: fmt(v) for k, v in row.items()})
        text = buf.getvalue()
    else:
        obj = dict(meta or {})
        obj["rows"] = [{k: (round(v, 6) if isinstance(v, float) and math.isfinite(v) else v)
                        for k, v in row.items()} for row in rows]
        text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    emit(text, cfg)


def emit(text: str, cfg: RunConfig):
    if cfg.out:
        with open(cfg.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def note(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def load_channel(path) -> chmod.KrausChannel:
    if not path:
        raise ConfigError("--channel is required")
    try:
        with open(path) as f:
            obj = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read channel {path}: {e}") from e
    return chmod.channel_from_json(obj)


def cmd_monotone(cfg: RunConfig) -> int:
    ch = load_channel(cfg.channel)
    measures = ("rphi", "cap", "rstar") if cfg.measure == "all" else (cfg.measure,)
    row = {"channel": ch.name or "channel", "n": ch.n, "diagonal": ch.is_diagonal}
    diag = {}
    for m in measures:
        if m == "rphi":
            row["R_phi"] = mono.choi_robustness(ch, cfg.backend)
        elif m == "cap":
            cap = mono.magic_capacity(ch, cfg.backend, cfg.jobs)
            row["C"] = cap.value
            diag["capacity_argmax"] = cap.argmax.to_text()
        elif m == "rstar":
            dec = mono.channel_robustness(ch, cfg.backend)
            row["R_star"] = dec.value
            diag["rstar_iterations"] = dec.iterations
        elif m == "rcpr":
            if ch.n > 1:
                raise mono.SizeLimitError("R_CPR is supported for 1-qubit channels")
            row["R_cpr"] = mono.r_cpr(ch, backend=cfg.backend)
    if cfg.export:
        if ch.is_diagonal:
            res = mono.robustness_of_magic(ch(mono.plus_state_density(ch.n)), cfg.backend)
        else:
            res = mono.choi_robustness_full(ch, cfg.backend)
        with open(cfg.export, "w") as f:
            json.dump(mono.export_decomposition(res), f, indent=2)
    write_rows([row], cfg, {"solver": {"backend": cfg.backend, **diag}})
    return EXIT_OK


def forecast_l1(circuit, method, backend="simplex") -> float:
    """prod R* (static) or prod C (dynamic; R* where C is too costly, as C <= R*)."""
    out = 1.0
    for ch, _ in circuit.elements:
        if method == "dynamic" and (ch.is_diagonal or ch.n == 1):
            out *= mono.capacity_value(ch, backend)
        else:
            out *= mono.channel_robustness_value(ch, backend)
    return out


def cmd_simulate(cfg: RunConfig) -> int:
    if not cfg.circuit:
        raise ConfigError("--circuit is required")
    try:
        circuit = sim.CircuitSpec.load(cfg.circuit)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read circuit: {e}") from e
    except ValueError as e:
        if isinstance(e, mono.SizeLimitError):
            raise
        raise ConfigError(str(e)) from e
    if cfg.block:
        circuit = sim.block_diagonal_elements(circuit, cfg.block)
    t0 = time.perf_counter()
    if cfg.method == "static":
        decomps = sim.precompute_static(circuit, cfg.backend)
        l1 = sim.static_l1(decomps)
    else:
        l1 = forecast_l1(circuit, "dynamic", cfg.backend)
    n = cfg.samples or sim.required_samples(max(l1, 1.0), cfg.delta, cfg.epsilon)
    if cfg.method == "static":
        res = sim.static_simulate(circuit, decomps, n, cfg.seed, cfg.jobs)
    else:
        res = sim.dynamic_simulate(circuit, n, cfg.seed, jobs=cfg.jobs, backend=cfg.backend)
    res.l1_total = l1
    ms = (time.perf_counter() - t0) * 1000
    note(f"estimate {res.estimate:.6f} +- {res.stderr:.6f} from {n} samples (l1 {l1:.6f}); runtime_ms {ms:.1f}")
    row = res.to_json()
    if cfg.format == "json":
        obj = {k: (round(v, 12) if isinstance(v, float) else v) for k, v in row.items()}
        emit(json.dumps(obj, indent=2) + "\n", cfg)
    else:
        write_rows([row], cfg)
    return EXIT_OK


# reproduction tables ---------------------------------------------------------


def table_state_counts(cfg):
    top = 5 if cfg.extended else 4
    if cfg.extended:
        note("note: building the five-qubit catalogue takes under a minute")
    return [{"n": n, "states": len(sc.enumerate_states(n, cfg.cache_dir))} for n in range(1, top + 1)]


def table_affine_counts(cfg):
    rows = []
    for n in range(1, 6):
        tot, nt = sc.affine_counts(n)
        rows.append({"n": n, "affine_total": tot, "affine_nontrivial": nt})
    return rows


def table_subspaces(cfg):
    ns = [min(cfg.scale or 4, 4)]
    if cfg.extended:
        ns.append(5)
        note("note: five-qubit rows take a few minutes")
    rows = []
    for n in ns:
        ch = chmod.multicontrol_phase(2, n)
        for k in range(1, n + 1):
            t, _ = sc.affine_state(sc.subspace_representative(n, k))
            v = tableau_to_dense(t)
            r = mono.robustness_of_magic(ch(np.outer(v, v.conj())), cfg.backend, witness=False).value
            rows.append({"n": n, "k": k, "robustness": r})
    return rows


def _three(ch, cfg):
    return {"R_phi": mono.choi_robustness(ch, cfg.backend),
            "C": mono.capacity_value(ch, cfg.backend, cfg.jobs),
            "R_star": mono.channel_robustness_value(ch, cfg.backend)}


def table_third_level(cfg):
    top = 5 if cfg.extended else min(cfg.scale or 3, 4)
    gates = [("T", 1, chmod.t_gate()), ("CS", 2, chmod.cs()), ("CCZ", 3, chmod.ccz())]
    rows = []
    for name, n, ch in gates:
        if n <= top:
            rows.append({"gate": name, "n": n, "t": "", **_three(ch, cfg)})
    for t in (1, 2):
        for n in range(2, top + 1):
            rows.append({"gate": f"M_{t},{n}", "n": n, "t": t, **_three(chmod.multicontrol_phase(t, n), cfg)})
    return rows


def table_multicontrol(cfg):
    top = 5 if cfg.extended else min(cfg.scale or 3, 4)
    rows = []
    for t in range(0, 4):
        for n in range(1, top + 1):
            if t == 0 and n == 1:
                continue
            rows.append({"t": t, "n": n, **_three(chmod.multicontrol_phase(t, n), cfg)})
    return rows


def table_tensor_powers(cfg):
    top = min(cfg.scale or 3, 5 if cfg.extended else 4)
    rows = []
    for j in range(1, 9):
        theta = j * np.pi / 32
        u = chmod.z_rotation(theta)
        row = {"theta": float(theta)}
        ch = u
        for k in range(1, top + 1):
            if k > 1:
                ch = chmod.tensor(ch, u)
            row[f"k{k}"] = mono.channel_robustness_value(ch, cfg.backend) ** (1 / k)
        rows.append(row)
    return rows


def table_ampdamp(cfg):
    theta = np.pi / 8
    u = chmod.x_rotation(theta)
    rows = []
    for j in range(0, 11):
        p = j / 20
        ad = chmod.amplitude_damping(p)
        row = {"p": p, "theta": float(theta)}
        for tag, ch in (("noise_after", chmod.compose(ad, u)), ("noise_before", chmod.compose(u, ad))):
            row[f"C_{tag}"] = mono.capacity_value(ch, cfg.backend)
            row[f"R_star_{tag}"] = mono.channel_robustness_value(ch, cfg.backend)
            row[f"R_cpr_{tag}"] = mono.r_cpr(ch, backend=cfg.backend)
        rows.append(row)
    return rows


TABLE_FUNCS = {"state_counts": table_state_counts, "affine_counts": table_affine_counts,
               "subspaces": table_subspaces, "third_level": table_third_level,
               "multicontrol": table_multicontrol, "tensor_powers": table_tensor_powers,
               "ampdamp": table_ampdamp}


def cmd_reproduce(cfg: RunConfig) -> int:
    rows = TABLE_FUNCS[cfg.table](cfg)
    if cfg.format == "json":
        write_rows(rows, cfg, {"table": cfg.table})
    else:
        write_rows(rows, cfg)
    return EXIT_OK


def cmd_cache(cfg: RunConfig) -> int:
    n = cfg.n
    if n is None or not 1 <= n <= 5:
        raise ConfigError("--n must be in 1..5")
    cache_dir = cfg.cache_dir
    if cfg.action == "info":
        tot, nt = sc.affine_counts(n)
        row = {"n": n, "states": sc.stabilizer_state_count(n), "affine_total": tot, "affine_nontrivial": nt}
        if cache_dir and sc.cache_path(cache_dir, n).exists():
            row["cached"] = True
        write_rows([row], cfg)
        return EXIT_OK
    if not cache_dir:
        raise ConfigError("cache build/verify needs --cache-dir or MAGIC_CACHE_DIR")
    path = sc.cache_path(cache_dir, n)
    if cfg.action == "build":
        os.makedirs(cache_dir, exist_ok=True)
        cat = sc.enumerate_states(n)
        sc.cache_write(cat, path)
        write_rows([{"n": n, "states": len(cat), "path": str(path)}], cfg)
        return EXIT_OK
    if not path.exists():
        raise sc.CacheError(f"no cache file at {path}")
    hdr = sc.cache_verify(path)
    write_rows([{"n": hdr["n"], "states": hdr["count"], "status": "ok"}], cfg)
    return EXIT_OK


COMMANDS = {"monotone": cmd_monotone, "simulate": cmd_simulate, "reproduce": cmd_reproduce, "cache": cmd_cache}


def main(argv=None) -> int:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    try:
        file_values = load_config_file(ns.pop("config")) if "config" in ns else {}
        if "cache_dir" not in ns and "cache_dir" not in file_values and os.environ.get("MAGIC_CACHE_DIR"):
            file_values["cache_dir"] = os.environ["MAGIC_CACHE_DIR"]
        cfg = merge_config(file_values, ns)
        if cfg.cache_dir:
            os.environ["MAGIC_CACHE_DIR"] = cfg.cache_dir
        lp.configure(cfg.tol, cfg.max_iter)
        return COMMANDS[cfg.subcommand](cfg)
    except (ConfigError, chmod.ChannelParseError) as e:
        note(f"error: {e}")
        return EXIT_PARSE
    except mono.SizeLimitError as e:
        note(f"size limit: {e}")
        return EXIT_LIMIT
    except (mono.SolverError, lp.LPError, sim.SimulationError) as e:
        note(f"solver failure: {e}")
        return EXIT_SOLVER
    except sc.CacheError as e:
        note(f"cache error: {e}")
        return EXIT_CACHE


if __name__ == "__main__":
    sys.exit(main())
