"""Batch front end: JSON config in, JSON/CSV reports out.

Subcommands: build, verify, correlate, sweep, sample.  Outputs are fully
deterministic for a fixed config and seed (stable key order, no timestamps),
so repeated runs are byte-identical and diffable in CI.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .classical import (
    ENUMERATION_CAP,
    ClassicalPotential,
    estimate_from_samples,
    metropolis_samples,
    spin_product,
    squared_magnetization,
)
from .errors import ConfigError, GibbsGroundError
from .lattice import DEFAULT_SITE_CAP, Lattice, build_hypercube
from .models import CouplingTable, ModelInstance
from .operators import QUANTUM_SITE_CAP
from .verify import order_parameter_scan, groundstate_hypotheses, verify_model

SCHEMA_VERSION = 1

_SWEEP_COLUMNS = [
    "alpha", "x", "y",
    "sx_sx", "sx_sx_se", "sz_sz", "sz_sz_se",
    "mz_sq", "mz_sq_se", "mx", "mx_se",
    "method",
]
_CORRELATE_COLUMNS = [
    "alpha", "x", "y", "sx_sx", "sx_sx_se", "sz_sz", "sz_sz_se", "method",
]


@dataclass
class Caps:
    lattice_sites: int = DEFAULT_SITE_CAP
    quantum_sites: int = QUANTUM_SITE_CAP
    enumeration_sites: int = ENUMERATION_CAP
    dense_sites: int = 12


@dataclass
class RunConfig:
    lattice: Lattice
    table: CouplingTable
    potential: ClassicalPotential
    alphas: list[float]
    pairs: list[tuple[int, int]] = field(default_factory=list)
    sweeps: int = 20000
    burn_in: int | None = None
    mc_seed: int = 0
    check_trials: int = 20
    check_seed: int = 0
    caps: Caps = field(default_factory=Caps)


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _get(section: dict, key: str, kind, where: str, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing required field '{where}.{key}'")
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"field '{where}.{key}' has the wrong type")
    return value


def _site_list(raw, where: str, n_sites: int) -> list[int]:
    _require(isinstance(raw, list), f"field '{where}' must be a list of site indices")
    sites = []
    for v in raw:
        _require(isinstance(v, int) and not isinstance(v, bool), f"field '{where}' must hold integers")
        _require(0 <= v < n_sites, f"site index {v} in '{where}' outside the lattice")
        sites.append(v)
    return sites


def _parse_couplings(raw, lattice: Lattice) -> CouplingTable:
    _require(isinstance(raw, dict), "field 'couplings' must be an object")
    if "preset" in raw:
        preset = raw["preset"]
        j = _get(raw, "J", float, "couplings", required=True)
        if preset in ("xx", "xxz"):
            return CouplingTable.xx_nearest_neighbor(lattice, j)
        raise ConfigError(f"unknown couplings preset '{preset}'")
    entries_raw = raw.get("entries")
    _require(
        isinstance(entries_raw, list),
        "field 'couplings' needs either 'preset' or an 'entries' list",
    )
    entries = []
    for k, entry in enumerate(entries_raw):
        where = f"couplings.entries[{k}]"
        _require(isinstance(entry, dict), f"field '{where}' must be an object")
        a = _site_list(entry.get("x_sites", []), f"{where}.x_sites", lattice.n_sites)
        b = _site_list(entry.get("y_sites", []), f"{where}.y_sites", lattice.n_sites)
        phi = _get(entry, "phi", float, where, required=True)
        _require(not set(a) & set(b), f"'{where}' has overlapping x_sites and y_sites")
        entries.append((a, b, phi))
    try:
        return CouplingTable.from_site_lists(lattice.n_sites, entries)
    except GibbsGroundError as exc:
        raise ConfigError(f"invalid coupling entries: {exc}") from exc


def _parse_potential(raw, lattice: Lattice) -> ClassicalPotential:
    if raw is None:
        return ClassicalPotential.zero(lattice.n_sites)
    _require(isinstance(raw, dict), "field 'potential' must be an object")
    if "preset" in raw:
        preset = raw["preset"]
        if preset == "ising-nn":
            k = _get(raw, "K", float, "potential", required=True)
            return ClassicalPotential.ising_nn(lattice, k)
        if preset == "linear-height":
            return ClassicalPotential.linear_height(lattice)
        raise ConfigError(f"unknown potential preset '{preset}'")
    terms_raw = raw.get("terms")
    _require(
        isinstance(terms_raw, list),
        "field 'potential' needs either 'preset' or a 'terms' list",
    )
    terms = []
    for k, term in enumerate(terms_raw):
        where = f"potential.terms[{k}]"
        _require(isinstance(term, dict), f"field '{where}' must be an object")
        sites = _site_list(term.get("sites", []), f"{where}.sites", lattice.n_sites)
        coeff = _get(term, "coeff", float, where, required=True)
        terms.append((sites, coeff))
    try:
        return ClassicalPotential.from_terms(lattice.n_sites, terms)
    except GibbsGroundError as exc:
        raise ConfigError(f"invalid potential terms: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from exc
    _require(isinstance(doc, dict), "config root must be a JSON object")
    schema = doc.get("schema")
    _require(
        schema == SCHEMA_VERSION,
        f"config field 'schema' must be {SCHEMA_VERSION}, got {schema!r}",
    )

    caps_raw = doc.get("caps", {})
    _require(isinstance(caps_raw, dict), "field 'caps' must be an object")
    caps = Caps(
        lattice_sites=_get(caps_raw, "lattice_sites", int, "caps", DEFAULT_SITE_CAP),
        quantum_sites=_get(caps_raw, "quantum_sites", int, "caps", QUANTUM_SITE_CAP),
        enumeration_sites=_get(caps_raw, "enumeration_sites", int, "caps", ENUMERATION_CAP),
        dense_sites=_get(caps_raw, "dense_sites", int, "caps", 12),
    )

    lat_raw = doc.get("lattice")
    _require(isinstance(lat_raw, dict), "missing required object 'lattice'")
    d = _get(lat_raw, "d", int, "lattice", required=True)
    side = _get(lat_raw, "L", int, "lattice", required=True)
    try:
        lattice = build_hypercube(d, side, site_cap=caps.lattice_sites)
    except GibbsGroundError as exc:
        raise ConfigError(f"invalid lattice: {exc}") from exc

    potential_raw = doc.get("potential")
    couplings_raw = doc.get("couplings")
    _require(couplings_raw is not None, "missing required object 'couplings'")
    if (
        isinstance(couplings_raw, dict)
        and couplings_raw.get("preset") == "xxz"
    ):
        if potential_raw is None:
            potential_raw = {"preset": "linear-height"}
        elif potential_raw.get("preset") != "linear-height":
            raise ConfigError(
                "the 'xxz' preset requires the 'linear-height' potential"
            )
    table = _parse_couplings(couplings_raw, lattice)
    potential = _parse_potential(potential_raw, lattice)

    _require(
        ("alpha" in doc) != ("alphas" in doc),
        "exactly one of 'alpha' or 'alphas' is required",
    )
    if "alpha" in doc:
        alphas = [_get(doc, "alpha", float, "config", required=True)]
    else:
        raw_alphas = doc["alphas"]
        _require(
            isinstance(raw_alphas, list) and raw_alphas,
            "field 'alphas' must be a nonempty list",
        )
        alphas = []
        for k, a in enumerate(raw_alphas):
            _require(
                isinstance(a, (int, float)) and not isinstance(a, bool),
                f"field 'alphas[{k}]' must be a number",
            )
            alphas.append(float(a))
    for a in alphas:
        _require(a >= 0, f"alpha values must be nonnegative, got {a}")

    pairs = []
    for k, pair in enumerate(doc.get("pairs", [])):
        where = f"pairs[{k}]"
        _require(
            isinstance(pair, list) and len(pair) == 2,
            f"field '{where}' must be a two-element list",
        )
        x, y = _site_list(pair, where, lattice.n_sites)
        _require(x != y, f"field '{where}' repeats a site")
        pairs.append((x, y))

    mc_raw = doc.get("mc", {})
    _require(isinstance(mc_raw, dict), "field 'mc' must be an object")
    sweeps = _get(mc_raw, "sweeps", int, "mc", 20000)
    burn_in = _get(mc_raw, "burn_in", int, "mc", None)
    mc_seed = _get(mc_raw, "seed", int, "mc", 0)
    _require(sweeps > 0, "field 'mc.sweeps' must be positive")

    checks_raw = doc.get("checks", {})
    _require(isinstance(checks_raw, dict), "field 'checks' must be an object")
    check_trials = _get(checks_raw, "trials", int, "checks", 20)
    check_seed = _get(checks_raw, "seed", int, "checks", 0)

    return RunConfig(
        lattice=lattice,
        table=table,
        potential=potential,
        alphas=alphas,
        pairs=pairs,
        sweeps=sweeps,
        burn_in=burn_in,
        mc_seed=mc_seed,
        check_trials=check_trials,
        check_seed=check_seed,
        caps=caps,
    )


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _model(config: RunConfig, alpha: float) -> ModelInstance:
    return ModelInstance(
        lattice=config.lattice,
        table=config.table,
        potential=config.potential,
        alpha=alpha,
    )


def _check_quantum(config: RunConfig):
    n = config.lattice.n_sites
    if n > config.caps.quantum_sites:
        raise GibbsGroundError(
            f"this command builds 2^{n}-dimensional operators, above the "
            f"quantum cap of {config.caps.quantum_sites} sites"
        )


def _cmd_build(config: RunConfig, out: Path, threads: int) -> int:
    hypotheses = groundstate_hypotheses(config.table)
    warnings = []
    if hypotheses.odd_entries:
        warnings.append("ground-state hypotheses violated: odd y-sets present")
    if hypotheses.positive_couplings:
        warnings.append("ground-state hypotheses violated: positive diagonal couplings")
    payload = {
        "command": "build",
        "schema": SCHEMA_VERSION,
        "lattice": {
            "d": config.lattice.dimension,
            "L": config.lattice.side,
            "n_sites": config.lattice.n_sites,
        },
        "alphas": config.alphas,
        "couplings": {
            "entries": len(config.table.entries),
            "odd_y_sets": [list(e[:2]) for e in hypotheses.odd_entries],
        },
        "potential_terms": len(config.potential.terms),
        "hypotheses_satisfied": hypotheses.satisfied,
        "warnings": warnings,
    }
    if config.lattice.n_sites <= config.caps.quantum_sites:
        matrices = []
        for alpha in config.alphas:
            model = _model(config, alpha)
            matrices.append(
                {
                    "alpha": alpha,
                    "dimension": model.h.dim,
                    "nnz": int(model.h.mat.nnz),
                    "hermitian": bool(model.h.is_hermitian),
                    "h_norm_max": model.h.norm_max,
                    "two_route_gap": model.two_path_diff,
                    "two_route_tolerance": 1e-12 * model.h.norm_max,
                }
            )
        payload["matrices"] = matrices
    else:
        payload["matrices"] = None
        payload["warnings"].append(
            "matrix summary skipped: lattice above the quantum cap"
        )
    _write_json(out / "summary.json", payload)
    for line in warnings:
        print(f"warning: {line}")
    print(f"wrote {out / 'summary.json'}")
    return 0


def _cmd_verify(config: RunConfig, out: Path, threads: int) -> int:
    _check_quantum(config)

    def one(alpha: float):
        model = _model(config, alpha)
        return verify_model(
            model,
            trials=config.check_trials,
            seed=config.check_seed,
            pairs=config.pairs or None,
            dense_dim_cap=1 << config.caps.dense_sites,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, config.alphas))
    else:
        reports = [one(alpha) for alpha in config.alphas]

    all_passed = all(r.all_passed for r in reports)
    payload = {
        "command": "verify",
        "schema": SCHEMA_VERSION,
        "all_passed": all_passed,
        "reports": [r.to_payload() for r in reports],
    }
    _write_json(out / "report.json", payload)
    for report in reports:
        for record in report.records:
            status = "PASS" if record.passed else "FAIL"
            kind = "asserted" if record.asserted else "info"
            print(f"alpha={report.alpha:g} {record.name}: {status} ({kind})")
    print(f"wrote {out / 'report.json'}")
    return 0 if all_passed else 1


def _scan_rows(config: RunConfig) -> list:
    if not config.pairs:
        raise GibbsGroundError("this command needs a nonempty 'pairs' list")
    model = _model_for_scan(config)
    return order_parameter_scan(
        model,
        config.pairs,
        config.alphas,
        sweeps=config.sweeps,
        burn_in=config.burn_in,
        seed=config.mc_seed,
        enumeration_cap=config.caps.enumeration_sites,
    )


def _model_for_scan(config: RunConfig) -> ModelInstance:
    # The scan observables depend only on the potential; reuse the model
    # container without building any matrices.
    return ModelInstance(
        lattice=config.lattice,
        table=config.table,
        potential=config.potential,
        alpha=config.alphas[0],
    )


def _cmd_correlate(config: RunConfig, out: Path, threads: int) -> int:
    rows = _scan_rows(config)
    path = out / "correlations.csv"
    _write_csv(
        path,
        _CORRELATE_COLUMNS,
        [{k: getattr(r, k) for k in _CORRELATE_COLUMNS} for r in rows],
    )
    print(f"wrote {path}")
    return 0


def _cmd_sweep(config: RunConfig, out: Path, threads: int) -> int:
    rows = _scan_rows(config)
    path = out / "sweep.csv"
    _write_csv(
        path,
        _SWEEP_COLUMNS,
        [{k: getattr(r, k) for k in _SWEEP_COLUMNS} for r in rows],
    )
    print(f"wrote {path}")
    return 0


def _cmd_sample(config: RunConfig, out: Path, threads: int) -> int:
    burn_in = (
        max(1, config.sweeps // 10) if config.burn_in is None else config.burn_in
    )
    results = []
    for alpha in config.alphas:
        samples, acceptance = metropolis_samples(
            config.potential,
            alpha,
            sweeps=config.sweeps,
            burn_in=burn_in,
            seed=config.mc_seed,
        )
        mz_sq, mz_sq_se = estimate_from_samples(squared_magnetization(), samples)
        pair_stats = []
        for x, y in config.pairs:
            est, se = estimate_from_samples(spin_product(x, y), samples)
            pair_stats.append({"x": x, "y": y, "sz_sz": est, "sz_sz_se": se})
        results.append(
            {
                "alpha": alpha,
                "acceptance_rate": acceptance,
                "mz_sq": mz_sq,
                "mz_sq_se": mz_sq_se,
                "pairs": pair_stats,
            }
        )
    payload = {
        "command": "sample",
        "schema": SCHEMA_VERSION,
        "seed": config.mc_seed,
        "sweeps": config.sweeps,
        "burn_in": burn_in,
        "results": results,
    }
    _write_json(out / "samples.json", payload)
    print(f"wrote {out / 'samples.json'}")
    return 0


_COMMANDS = {
    "build": _cmd_build,
    "verify": _cmd_verify,
    "correlate": _cmd_correlate,
    "sweep": _cmd_sweep,
    "sample": _cmd_sample,
}


def run(command: str, config: RunConfig, out_dir: str = ".", threads: int = 1) -> int:
    """Dispatch one command; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[command](config, out, threads)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gibbs-ground",
        description=(
            "Build spin-1/2 lattice models with Boltzmann-amplitude ground "
            "states, verify their defining properties, and tabulate order "
            "parameters. Default caps: 14 sites for operator work, 12 for "
            "dense eigensolves, 24 for exact Gibbs sums (configurable via "
            "the 'caps' config object)."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("build", "model summary and hypothesis flags as JSON"),
        ("verify", "full check suite; exit 1 if any asserted check fails"),
        ("correlate", "two-point x/z correlations per pair as CSV"),
        ("sweep", "order-parameter table over the alpha grid as CSV"),
        ("sample", "Metropolis estimates with standard errors as JSON"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
        if args.seed is not None:
            config.mc_seed = args.seed
            config.check_seed = args.seed
        return run(args.command, config, out_dir=args.out, threads=args.threads)
    except GibbsGroundError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
