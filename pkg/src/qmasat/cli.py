"""Command-line front end: ``qmasat {reduce,simulate,lemmas,sweep}``.

Every run writes machine-readable outputs into ``--out`` and a
``summary.json`` that embeds the resolved config and its sha256 hash.
Outputs carry no timestamps, so identical configs give identical bytes.
A ``--config`` JSON file overrides any flag.

Exit codes: 0 success, 2 parse/config error, 3 precondition or cap refusal,
4 a check failed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import PreconditionError
from .experiments import (
    STRATEGIES,
    SWEEP_COLUMNS,
    SWEEP_STRATEGIES,
    build_bundle,
    lemma_battery,
    load_matching_defaults,
    run_protocol_trials,
    run_sweep,
    substream,
    summarize,
)
from .merlin import default_K, min_overlap
from .quantum_state import StateError
from .reduction import ReductionCertificate, measure_gap, reduce_full
from .sat_core import (
    DEFAULT_BRUTE_FORCE_CAP,
    DEFAULT_ELIMINATION_WIDTH_CAP,
    CapExceededError,
    InstanceError,
    ParseError,
    ThreeSatInstance,
    TwoOutOfFourInstance,
    brute_force_max_sat,
    exact_max_sat,
    loads_instance,
)
from .verifier import partition_blocks, satisfiability_test_exact, symmetry_test_prob

log = logging.getLogger("qmasat")

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("reduce", "simulate", "lemmas", "sweep")
# fields that name files rather than science parameters; excluded from the config hash
NON_SCIENCE = ("out", "config")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    out: str = "out"
    config: str | None = None
    instance: str | None = None
    certificate: str | None = None
    occurrence_cap: int = 8
    width_cap: int = DEFAULT_ELIMINATION_WIDTH_CAP
    strategy: str = "honest"
    K: int | None = None
    beta: float = 2.0
    trials: int = 1000
    sigma: float = math.pi / 2
    support_frac: float = 0.5
    delta: float = 0.05
    scale: float = 1.0
    matching_c: float | None = None
    matching_d: float | None = None
    matching_eps: dict | None = None
    Ns: list = field(default_factory=lambda: [64, 256])
    betas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    strategies: list = field(default_factory=lambda: list(SWEEP_STRATEGIES))

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.command in COMMANDS, f"unknown command {self.command!r}")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed must be a nonnegative integer")
        need(isinstance(self.occurrence_cap, int) and self.occurrence_cap >= 8,
             "occurrence_cap must be an integer >= 8")
        need(isinstance(self.width_cap, int) and 1 <= self.width_cap <= 30,
             "width_cap must lie in [1, 30]")
        need(self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}")
        need(self.K is None or (isinstance(self.K, int) and self.K >= 2), "K must be >= 2")
        need(self.beta > 0, "beta must be positive")
        need(isinstance(self.trials, int) and self.trials >= 1, "trials must be >= 1")
        need(self.sigma >= 0, "sigma must be nonnegative")
        need(0 < self.support_frac <= 1, "support_frac must lie in (0, 1]")
        need(0 <= self.delta < 1, "delta must lie in [0, 1)")
        need(self.scale > 0, "scale must be positive")
        need(self.matching_c is None or self.matching_c > 0, "matching_c must be positive")
        need(self.matching_d is None or self.matching_d > 0, "matching_d must be positive")
        need(self.matching_eps is None or all(0 < v <= 1 for v in self.matching_eps.values()),
             "matching_eps values must lie in (0, 1]")
        need(bool(self.Ns) and all(isinstance(n, int) and n >= 2 and n % 2 == 0 for n in self.Ns),
             "Ns must be even integers >= 2")
        need(bool(self.betas) and all(b > 0 for b in self.betas), "betas must be positive")
        need(bool(self.strategies) and all(s in SWEEP_STRATEGIES for s in self.strategies),
             f"sweep strategies must be drawn from {SWEEP_STRATEGIES}")
        if self.command in ("reduce",):
            need(self.instance is not None, "reduce needs an instance")
        if self.command == "simulate":
            need((self.instance is None) != (self.certificate is None),
                 "simulate needs exactly one of instance or certificate")

    def science(self) -> dict:
        d = dataclasses.asdict(self)
        for k in NON_SCIENCE:
            d.pop(k)
        return d

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.science()).encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def canonical_json(obj, indent: int | None = None) -> str:
    return json.dumps(obj, sort_keys=True, indent=indent, default=_jsonable)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _summary(cfg: ExperimentConfig, results: dict) -> str:
    doc = {"command": cfg.command, "config": cfg.science(), "config_sha256": cfg.digest(),
           "results": results}
    return canonical_json(doc, indent=2) + "\n"


# Commands ---------------------------------------------------------------------------

def _read_instance(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return loads_instance(text)


def cmd_reduce(cfg: ExperimentConfig) -> int:
    inst = _read_instance(cfg.instance)
    if not isinstance(inst, ThreeSatInstance):
        raise ParseError("reduce expects a 3sat instance")
    cert = reduce_full(inst, cfg.occurrence_cap)
    report = {"sizes": cert.sizes(), "padded": cert.padded}
    try:
        report["gap"] = measure_gap(cert, cfg.width_cap)
        report["gap_method"] = "elimination"
    except CapExceededError as exc:
        report["gap"] = None
        report["gap_refused"] = str(exc)
    if inst.num_vars <= DEFAULT_BRUTE_FORCE_CAP:
        best, _ = brute_force_max_sat(inst)
        report["source_satisfiable"] = best == 1.0
    out = Path(cfg.out)
    _write(out / "certificate.json", cert.dumps())
    _write(out / "summary.json", _summary(cfg, report))
    log.info("reduced to N=%d M=%d, gap=%s", cert.target.num_vars, cert.target.m, report["gap"])
    return EXIT_OK if report["gap"] is not None else EXIT_PRECONDITION


def _simulation_target(cfg: ExperimentConfig) -> tuple[TwoOutOfFourInstance, tuple[int, ...], dict]:
    """Target instance, the prover's assignment, and provenance notes."""
    if cfg.certificate is not None:
        try:
            cert = ReductionCertificate.loads(Path(cfg.certificate).read_text())
        except (OSError, KeyError, ValueError) as exc:
            raise ParseError(f"cannot load certificate: {exc}") from None
    else:
        inst = _read_instance(cfg.instance)
        if isinstance(inst, TwoOutOfFourInstance):
            best, a = exact_max_sat(inst, cfg.width_cap)
            return inst, a, {"source": "2in4", "best_fraction": best}
        cert = reduce_full(inst, cfg.occurrence_cap)
    best, a_src = brute_force_max_sat(cert.source)
    return cert.target, cert.lift(a_src), {"source": "3sat", "source_best_fraction": best}


def cmd_simulate(cfg: ExperimentConfig) -> int:
    inst, a, notes = _simulation_target(cfg)
    N = inst.num_vars
    K = cfg.K if cfg.K is not None else max(2, default_K(N, cfg.beta))
    bundle = build_bundle(cfg.strategy, a, K, substream(cfg.seed, 1), sigma=cfg.sigma,
                          support_frac=cfg.support_frac, delta=cfg.delta)
    part = partition_blocks(inst)
    reports = run_protocol_trials(bundle, inst, cfg.trials, cfg.seed, part)
    lines = [canonical_json({"trial": t, **r.to_record()}) for t, r in enumerate(reports)]
    _write(Path(cfg.out) / "trials.jsonl", "\n".join(lines) + "\n")
    results = summarize(reports)
    results.update({
        "N": N, "M": inst.m, "K": K, "blocks": part.s, "strategy": cfg.strategy, **notes,
        "exact": {"satisfiability_accept": satisfiability_test_exact(bundle.witnesses[0], inst, part),
                  "symmetry_accept": symmetry_test_prob(bundle),
                  "min_overlap": min_overlap(bundle)},
    })
    _write(Path(cfg.out) / "summary.json", _summary(cfg, results))
    log.info("acceptance %.4f over %d trials", results["acceptance"]["rate"], cfg.trials)
    return EXIT_OK


def _matching_overrides(cfg: ExperimentConfig) -> dict | None:
    if cfg.matching_c is None and cfg.matching_d is None and cfg.matching_eps is None:
        return None
    d = load_matching_defaults()
    if cfg.matching_c is not None:
        d["c"] = cfg.matching_c
    if cfg.matching_d is not None:
        d["d"] = cfg.matching_d
    if cfg.matching_eps is not None:
        d["eps"] = {**d["eps"], **cfg.matching_eps}
    return d


def cmd_lemmas(cfg: ExperimentConfig) -> int:
    results = lemma_battery(cfg.seed, cfg.scale, _matching_overrides(cfg))
    lines = [canonical_json(r.to_record()) for r in results]
    _write(Path(cfg.out) / "lemmas.jsonl", "\n".join(lines) + "\n")
    counts = {s: sum(r.status == s for r in results) for s in ("pass", "fail", "skip")}
    _write(Path(cfg.out) / "summary.json", _summary(cfg, {
        "counts": counts, "status": {r.name: r.status for r in results}}))
    for r in results:
        log.info("%-32s %s", r.name, r.status)
    return EXIT_CHECK if counts["fail"] else EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    rows = run_sweep(cfg.Ns, cfg.betas, cfg.strategies, cfg.trials, cfg.seed)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    _write(Path(cfg.out) / "sweep.csv", buf.getvalue())
    _write(Path(cfg.out) / "summary.json", _summary(cfg, {"rows": len(rows)}))
    return EXIT_OK


HANDLERS = {"reduce": cmd_reduce, "simulate": cmd_simulate, "lemmas": cmd_lemmas,
            "sweep": cmd_sweep}


# Argument parsing ---------------------------------------------------------------------

def _csv_list(kind):
    def parse(text: str) -> list:
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmasat", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, help="master seed (mandatory, here or in --config)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="JSON file whose keys override flags")

    p = sub.add_parser("reduce", help="reduce a 3SAT file and measure the gap")
    common(p)
    p.add_argument("--instance")
    p.add_argument("--occurrence-cap", dest="occurrence_cap", type=int)
    p.add_argument("--width-cap", dest="width_cap", type=int)

    p = sub.add_parser("simulate", help="run protocol trials against one prover strategy")
    common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance")
    src.add_argument("--certificate")
    p.add_argument("--occurrence-cap", dest="occurrence_cap", type=int)
    p.add_argument("--width-cap", dest="width_cap", type=int)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--K", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--support-frac", dest="support_frac", type=float)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("lemmas", help="run the lemma-check battery")
    common(p)
    p.add_argument("--scale", type=float, help="multiplier on trial counts")
    p.add_argument("--matching-c", dest="matching_c", type=float)
    p.add_argument("--matching-d", dest="matching_d", type=float)

    p = sub.add_parser("sweep", help="uniformity-test rejection over (N, beta, strategy)")
    common(p)
    p.add_argument("--Ns", type=_csv_list(int))
    p.add_argument("--betas", type=_csv_list(float))
    p.add_argument("--strategies", type=_csv_list(str))
    p.add_argument("--trials", type=int)
    return ap


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k != "verbose"}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("config file must hold a JSON object")
        if overrides.get("command", args.command) != args.command:
            raise ConfigError("config file command disagrees with the subcommand")
        values.update(overrides)
    if "seed" not in values:
        raise ConfigError("a master seed is mandatory (--seed or config 'seed')")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (PreconditionError, CapExceededError, InstanceError, StateError) as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
