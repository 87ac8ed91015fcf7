"""Command-line harness: ``qhashlab <command> [--config FILE] [flags]``.

Config files are YAML mappings whose keys mirror :class:`ExperimentConfig`;
flags override file values.  Exit codes: 0 ok, 2 config error, 3 audit
violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import reporting
from .attack import parse_leak, separation_audit
from .decomposition import (canonicalize_lattice, canonicalize_levelsets, atoms_match,
                            verify_canonical_properties)
from .errors import AuditViolation, InfeasibleParameters, NumericalError
from .extractor import (audit_extractor, build_ip_extractor, fingerprint_cq_state,
                        topsep_witness)
from .fingerprint import MAX_MESSAGE_BITS, build_hadamard, build_random_linear, smallest_random_linear
from .states import guess_prob_classical
from .swap import SwapScheme, exact_honest_acceptance, random_forgery, swap_attack_audit

log = logging.getLogger("qhashlab")

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("fingerprint", "decompose", "attack", "swap", "extractor")
WORKERS_ENV = "QHASHLAB_WORKERS"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SchemeConfig(_Strict):
    n: int = Field(4, ge=1, le=MAX_MESSAGE_BITS)
    construction: Literal["hadamard", "random_linear"] = "hadamard"
    M: int | None = Field(None, ge=1, le=4096)
    delta_target: float = Field(1.0, ge=0.0, le=1.0)


class SwapConfig(_Strict):
    t: int = Field(2, ge=1, le=4)
    forgery: Literal["product", "entangled", "mixed", "honest"] = "entangled"


class ExtractorConfig(_Strict):
    m: int = Field(1, ge=1)
    cc_k: int = Field(2, ge=0)
    epsilon: float = Field(0.98, ge=0.0, le=2.0)


class SweepConfig(_Strict):
    command: Literal["fingerprint", "attack", "swap", "extractor"] = "attack"
    grid: dict[str, list[Any]] = Field(default_factory=dict)
    master_seed: int = Field(0, ge=0, lt=2**64)


class ExperimentConfig(_Strict):
    command: Literal["fingerprint", "decompose", "attack", "swap", "extractor", "sweep"]
    seed: int = Field(0, ge=0, lt=2**64)
    output: str | None = None
    scheme: SchemeConfig = Field(default_factory=SchemeConfig)
    leak: str = "none"
    swap: SwapConfig = Field(default_factory=SwapConfig)
    extractor: ExtractorConfig = Field(default_factory=ExtractorConfig)
    input: str | None = None
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    @model_validator(mode="after")
    def _check(self):
        if self.command == "decompose" and not self.input:
            raise ValueError("decompose needs an input file")
        if self.scheme.construction == "random_linear" and self.scheme.M is not None \
                and self.scheme.M & (self.scheme.M - 1):
            raise ValueError("scheme.M must be a power of two")
        return self


# -- single commands ----------------------------------------------------------

def _rng_seed(seed: int) -> int:
    return seed % 2**63


def build_scheme(cfg: ExperimentConfig):
    sc = cfg.scheme
    if sc.construction == "hadamard":
        return build_hadamard(sc.n)
    if sc.M is None:
        return smallest_random_linear(sc.n, sc.delta_target, _rng_seed(cfg.seed))
    return build_random_linear(sc.n, sc.M, sc.delta_target, _rng_seed(cfg.seed))


def cmd_fingerprint(cfg: ExperimentConfig) -> dict:
    s = build_scheme(cfg)
    out = s.to_dict()
    out["row"] = {"n": s.n_bits, "construction": s.construction, "code_len": s.code_len,
                  "m": s.m_qubits, "delta": s.delta_measured}
    return out


def cmd_attack(cfg: ExperimentConfig) -> dict:
    s = build_scheme(cfg)
    rep = separation_audit(s, parse_leak(cfg.leak, s.n_bits))
    out = rep.to_dict()
    out["row"] = rep.csv_row()
    return out


def cmd_decompose(cfg: ExperimentConfig) -> dict:
    j = reporting.load_joint(cfg.input)
    d = canonicalize_lattice(j)
    check = verify_canonical_properties(j, d)
    agree = atoms_match(d, canonicalize_levelsets(j))
    out = {
        "decomposition": d.to_dict(list(j.x_labels) or None, list(j.y_labels) or None),
        "p_g": guess_prob_classical(j),
        "sum_p_S": d.guessing_probability(),
        "levelsets_agree": agree,
        "checks": {"guessing_preserved": check.guessing_preserved,
                   "reconstructs_source": check.reconstructs_source,
                   "subset_uniform": check.subset_uniform,
                   "max_reconstruction_error": check.max_reconstruction_error},
    }
    if not (check.ok and agree):
        raise AuditViolation(f"canonical form check failed: {check.violations}", out)
    out["row"] = {"p_g": out["p_g"], "sum_p_S": out["sum_p_S"], "atoms": len(d.atoms)}
    return out


def cmd_swap(cfg: ExperimentConfig) -> dict:
    s = SwapScheme(build_scheme(cfg), cfg.swap.t)
    leak = parse_leak(cfg.leak, s.base.n_bits)
    n_out = leak.channel_matrix(s.base.n_bits).shape[1]
    if cfg.swap.forgery == "honest":
        # replay the advice of a fixed message regardless of the leak
        forgery = np.stack([s.advice(0)] * n_out)
    else:
        rng = np.random.default_rng(cfg.seed)
        forgery = random_forgery(rng, s, n_out, cfg.swap.forgery)
    rep = swap_attack_audit(s, leak, forgery)
    honest = [exact_honest_acceptance(s, x) for x in range(s.base.n_messages)]
    out = rep.to_dict()
    out["honest_acceptance_exact"] = all(h == 1 for h in honest)
    out["row"] = {"n": s.base.n_bits, "t": s.t, "m_prime": s.m_prime,
                  "acceptance": rep.acceptance, "bound": rep.bound, "margin": rep.margin}
    return out


def cmd_extractor(cfg: ExperimentConfig) -> dict:
    s = build_scheme(cfg)
    e = build_ip_extractor(s.n_bits, cfg.extractor.m)
    leak = parse_leak(cfg.leak, s.n_bits)
    sources = {f"leak:{leak.describe()}": leak.joint(s.n_bits),
               "fingerprint": fingerprint_cq_state(s)}
    rep = audit_extractor(e, sources)
    w = topsep_witness(s, cfg.extractor.cc_k, cfg.extractor.epsilon)
    out = {"audit": rep.to_dict(), "witness": w.to_dict()}
    rows = {r["source"]: r for r in rep.rows}
    out["row"] = {"n": s.n_bits, "m_out": e.m, "delta": s.delta_measured,
                  "classical_error": rows[f"leak:{leak.describe()}"]["classical_error"],
                  "quantum_error": rows["fingerprint"]["quantum_error"],
                  "cq_k_certified": w.cq_k_certified,
                  "cc_error_lower_bound": w.cc_error_lower_bound}
    return out


HANDLERS = {"fingerprint": cmd_fingerprint, "attack": cmd_attack, "decompose": cmd_decompose,
            "swap": cmd_swap, "extractor": cmd_extractor}

ROW_COLUMNS = {
    "fingerprint": ("n", "construction", "code_len", "m", "delta"),
    "attack": ("n", "m", "delta", "k_leak", "p_g", "e_s_star", "bound", "margin"),
    "swap": ("n", "t", "m_prime", "acceptance", "bound", "margin"),
    "extractor": ("n", "m_out", "delta", "classical_error", "quantum_error",
                  "cq_k_certified", "cc_error_lower_bound"),
}


def execute(cfg: ExperimentConfig) -> dict:
    out = HANDLERS[cfg.command](cfg)
    out = {k: v for k, v in out.items() if k != "row"}
    out["command"] = cfg.command
    out["seed"] = cfg.seed
    return out


# -- sweeps -------------------------------------------------------------------

def point_seed(master_seed: int, index: int) -> int:
    """64-bit seed for grid point ``index``: the first 8 bytes of sha256("master:index")."""
    digest = hashlib.sha256(f"{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def expand_grid(base: dict, grid: dict[str, list]) -> list[dict]:
    """Cartesian product of the grid axes applied to ``base``.

    The leak value ``prefix:*`` expands to ``prefix:0 .. prefix:n-2`` for each point.
    """
    keys = sorted(grid)
    points = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        p = yaml.safe_load(yaml.safe_dump(base))
        for k, v in zip(keys, combo):
            _set_path(p, k, v)
        if p.get("leak") == "prefix:*":
            n = p.get("scheme", {}).get("n", SchemeConfig().n)
            for k in range(max(n - 1, 1)):
                q = yaml.safe_load(yaml.safe_dump(p))
                q["leak"] = f"prefix:{k}"
                points.append(q)
        else:
            points.append(p)
    return points


def run_point(args: tuple[int, dict]) -> dict:
    index, raw = args
    row = {"index": index, "seed": raw.get("seed"), "status": "ok", "error": ""}
    try:
        cfg = ExperimentConfig.model_validate(raw)
        out = HANDLERS[cfg.command](cfg)
        row.update(out["row"])
    except AuditViolation as exc:
        row.update(status="audit_violation", error=str(exc))
    except (NumericalError, ArithmeticError) as exc:
        row.update(status="numerical_failure", error=str(exc))
    except (ValidationError, ValueError, InfeasibleParameters) as exc:
        row.update(status="config_error", error=str(exc).splitlines()[0])
    return row


def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    base = cfg.model_dump(exclude={"sweep", "output"})
    base["command"] = cfg.sweep.command
    points = expand_grid(base, cfg.sweep.grid)
    for i, p in enumerate(points):
        p["seed"] = point_seed(cfg.sweep.master_seed, i)
    return points


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list[dict], list[str]]:
    """Evaluate every grid point and merge the rows in point order."""
    points = sweep_points(cfg)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    jobs = list(enumerate(points))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [run_point(j) for j in jobs]
    rows.sort(key=lambda r: r["index"])
    columns = ["index", "seed", "status", "error"] + list(ROW_COLUMNS[cfg.sweep.command])
    return rows, columns


def sweep_csv(cfg: ExperimentConfig, workers: int | None = None) -> str:
    rows, columns = run_sweep(cfg, workers)
    return reporting.csv_text(rows, columns)


# -- argument handling ----------------------------------------------------------

def _parse_grid(items: list[str] | None) -> dict[str, list]:
    grid = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        if not sep:
            raise ValueError(f"grid axis {item!r} must look like key=v1,v2 or key=lo..hi")
        if ".." in values and "," not in values:
            lo, hi = values.split("..")
            grid[key] = list(range(int(lo), int(hi) + 1))
        else:
            grid[key] = [yaml.safe_load(v) for v in values.split(",")]
    return grid


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qhashlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file; flags override its values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--output", "-o", help="report path (default: stdout)")
        sp.add_argument("--n", type=int, dest="scheme.n")
        sp.add_argument("--construction", choices=["hadamard", "random_linear"], dest="scheme.construction")
        sp.add_argument("--M", type=int, dest="scheme.M", help="code length for random_linear")
        sp.add_argument("--delta-target", type=float, dest="scheme.delta_target")
        sp.add_argument("--leak", help="none, full or prefix:K")

    for name in ("fingerprint", "attack"):
        common(sub.add_parser(name))
    sp = sub.add_parser("decompose")
    common(sp)
    sp.add_argument("--input", help="JSON joint distribution {table, x_labels, y_labels}")
    sp = sub.add_parser("swap")
    common(sp)
    sp.add_argument("--t", type=int, dest="swap.t")
    sp.add_argument("--forgery", choices=["product", "entangled", "mixed", "honest"], dest="swap.forgery")
    sp = sub.add_parser("extractor")
    common(sp)
    sp.add_argument("--m-out", type=int, dest="extractor.m", help="extractor output bits")
    sp.add_argument("--cc-k", type=int, dest="extractor.cc_k")
    sp.add_argument("--epsilon", type=float, dest="extractor.epsilon")
    sp = sub.add_parser("sweep")
    common(sp)
    sp.add_argument("--over", dest="sweep.command", choices=["fingerprint", "attack", "swap", "extractor"])
    sp.add_argument("--grid", action="append", metavar="KEY=VALUES",
                    help="grid axis such as scheme.n=4..10 or leak=prefix:*")
    sp.add_argument("--master-seed", type=int, dest="sweep.master_seed")
    sp.add_argument("--t", type=int, dest="swap.t")
    sp = sub.add_parser("run", help="run the command named in a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--output", "-o")
    return p


def load_config(ns: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if getattr(ns, "config", None):
        with open(ns.config, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a mapping")
        raw = loaded
    if ns.command != "run":
        raw["command"] = ns.command
    for key, value in vars(ns).items():
        if key in ("command", "config", "verbose", "grid") or value is None:
            continue
        _set_path(raw, key, value)
    if getattr(ns, "grid", None):
        raw.setdefault("sweep", {})["grid"] = _parse_grid(ns.grid)
    return ExperimentConfig.model_validate(raw)


def _emit(text: str, path: str | None) -> None:
    if path:
        reporting.atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(ns)
    except ValidationError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.command == "sweep":
            text = sweep_csv(cfg)
        else:
            text = reporting.dumps_canonical(execute(cfg)) + "\n"
    except AuditViolation as exc:
        print(f"audit violation: {exc}", file=sys.stderr)
        if exc.report is not None:
            _emit(reporting.dumps_canonical(exc.report) + "\n", cfg.output)
        return EXIT_AUDIT
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InfeasibleParameters, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, cfg.output)
    log.debug("wrote %s", cfg.output or "stdout")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
