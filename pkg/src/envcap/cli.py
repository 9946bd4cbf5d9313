"""Batch front end: load channel documents, run analyses, emit reports.

Reports are deterministic given (config, seed): analysis RNG streams are
derived from the seed and the wall-clock time is kept out of the JSON
serialization.

Exit codes: 0 success, 2 config error, 3 input error, 4 analysis
non-convergence (partial report), 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import bounds as bd
from . import subspace as sub
from .channel import ChannelSpecError, StinespringIsometry, load_channel_spec
from .detectors import min_trace_ppt_detector
from .metrics import verify_metric_inequalities
from .tensor import (
    DimensionError,
    DomainError,
    PureStateVector,
    random_density_matrix,
)

SCHEMA_ID = "envcap-report/1"

ANALYSES = (
    "q_capacity",
    "lower_bounds",
    "badziag",
    "detector",
    "upper_bounds",
    "subspace_example",
    "metric_suite",
)
_CHANNEL_FREE = {"metric_suite"}

_TOL_KEYS = {
    "detector_epsilon": 0.05,
    "upper_epsilon": 0.05,
    "metric_pairs": 10000.0,
    "chain_slack": 1e-7,
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NONCONVERGED = 4
EXIT_INVARIANT = 5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    spec_paths: tuple[str, ...]
    analyses: tuple[str, ...]
    seed: int = 0
    fmt: str = "json"
    out: str | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.analyses:
            raise ConfigError("select at least one analysis")
        unknown = [a for a in self.analyses if a not in ANALYSES]
        if unknown:
            raise ConfigError(f"unknown analyses: {', '.join(unknown)}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit value, got {self.seed}")
        if self.fmt not in ("json", "csv", "markdown"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        bad = [k for k in self.tolerances if k not in _TOL_KEYS]
        if bad:
            raise ConfigError(f"unknown tolerance keys: {', '.join(bad)}")
        needs_channel = [a for a in self.analyses if a not in _CHANNEL_FREE]
        if needs_channel and not self.spec_paths:
            raise ConfigError(f"analyses {needs_channel} need at least one --spec")

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, _TOL_KEYS[key]))


def _round12(x):
    """12 significant digits: reproducible without false precision."""
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            return repr(x)
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _round12(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round12(v) for v in x]
    return x


def _entry_dict(e: bd.BoundEntry) -> dict:
    return {
        "name": e.name,
        "value": e.value,
        "direction": e.direction,
        "level": e.level,
        "params": e.params,
        "tags": list(e.tags),
        "inputs_digest": e.inputs_digest,
    }


def _seed_for(config: RunConfig, analysis: str, spec_index: int) -> np.random.Generator:
    key = (ANALYSES.index(analysis), spec_index)
    return np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=key))


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------


def _image_states(u: StinespringIsometry, count: int) -> list[PureStateVector]:
    shape = u.output_shape
    return [PureStateVector(u.matrix[:, i], shape) for i in range(min(u.dim_a, count))]


def _run_q_capacity(u, config, spec_index, report):
    rng = _seed_for(config, "q_capacity", spec_index)
    cfg = bd.QCapacityConfig(seed=int(rng.integers(2**31)))
    res = bd.q_capacity(u, cfg)
    tags = () if res.converged else ("non-converged",)
    report.add(
        bd.BoundEntry(
            name="assisted-quantum-capacity",
            value=res.value,
            direction="exact",
            level="q",
            params={"certificate": res.certificate, "branch_weight": res.branch_weight},
            tags=tags,
            inputs_digest=u.digest(),
        )
    )
    return res.converged


def _run_lower_bounds(u, config, spec_index, report):
    agg = bd.lower_bound_aggregate(u)
    report.add(
        bd.BoundEntry(
            name="classical-capacity-lower-bound",
            value=agg.value,
            direction="lower",
            level="one-way",
            params={"branch": agg.branch, "candidates": list(agg.candidates)},
            inputs_digest=u.digest(),
        )
    )
    return True


def _image_ensemble(u: StinespringIsometry) -> bd.Ensemble:
    states = _image_states(u, u.dim_a)
    probs = np.full(u.dim_a, 1.0 / u.dim_a)
    return bd.Ensemble(probs=probs, states=tuple(states))


def _run_badziag(u, config, spec_index, report):
    ens = _image_ensemble(u)
    value = bd.local_information_bound(ens)
    report.add(
        bd.BoundEntry(
            name="ensemble-information-bound",
            value=value,
            direction="info",
            params={
                "ensemble": "uniform-channel-images",
                "mean_entanglement": ens.average_entanglement(),
            },
            inputs_digest=u.digest(),
        )
    )
    return True


def _run_detector(u, config, spec_index, report):
    eps = config.tol("detector_epsilon")
    ok = True
    for i, psi in enumerate(_image_states(u, 2)):
        sol = min_trace_ppt_detector(psi, eps)
        ok = ok and sol.converged
        tags = () if sol.converged else ("non-converged",)
        report.add(
            bd.BoundEntry(
                name=f"min-trace-ppt-detector[{i}]",
                value=sol.trace,
                direction="info",
                params={
                    "epsilon": eps,
                    "max_residual": sol.max_residual,
                    "target": f"image[{i}]",
                },
                tags=tags,
                inputs_digest=u.digest(),
            )
        )
    return ok


def _image_min_entanglement(u, rng) -> float:
    spec = sub.SubspaceSpec(u.matrix, u.output_shape)
    cfg = sub.MinEntanglementConfig(starts=12, iters=400, seed=int(rng.integers(2**31)))
    return sub.min_entanglement(spec, cfg).value


def _run_upper_bounds(u, config, spec_index, report):
    eps = config.tol("upper_epsilon")
    rng = _seed_for(config, "upper_bounds", spec_index)
    d_b, d_c = u.dim_b, u.dim_c
    swapped = d_b > d_c
    if swapped:
        d_b, d_c = d_c, d_b
    if u.output_shape.total > 64:
        raise DomainError("upper_bounds analysis is desk-scale only (product dim <= 64)")
    min_e = _image_min_entanglement(u, rng)
    delta = max(0.0, math.log2(d_b) - min_e)
    base_tags = ("estimate-only",) + (("sides-swapped",) if swapped else ())

    n_uniform = bd.max_code_size_uniform_deficit(d_b, d_c, eps, delta) if (
        eps + math.sqrt(2.0) * delta**0.25 < 1.0
    ) else None
    if n_uniform is not None:
        report.add(
            bd.BoundEntry(
                name="uniform-deficit-code-bound",
                value=math.log2(n_uniform),
                direction="info",
                params={"epsilon": eps, "delta": delta, "code_size": n_uniform},
                tags=base_tags,
                inputs_digest=u.digest(),
            )
        )
    per_signal = bd.optimize_gamma(d_b, d_c, eps, [delta])
    report.add(
        bd.BoundEntry(
            name="per-signal-deficit-code-bound",
            value=math.log2(per_signal.harmonic),
            direction="info",
            params={
                "epsilon": eps,
                "delta": delta,
                "gamma": per_signal.gamma,
                "code_size": per_signal.harmonic,
                "code_size_relaxed": per_signal.relaxed,
            },
            tags=base_tags,
            inputs_digest=u.digest(),
        )
    )
    cond = bd.ppt_capacity_upper_bound(d_c, delta)
    report.add(
        bd.BoundEntry(
            name="ppt-capacity-upper-bound",
            value=cond.value,
            direction="upper",
            level="ppt",
            params={"delta": delta, "min_entanglement": min_e},
            tags=base_tags + (cond.condition,),
            inputs_digest=u.digest(),
        )
    )
    return True


def _run_subspace_example(u, config, spec_index, report):
    if u.dim_b != u.dim_c:
        raise DomainError("subspace_example needs equal output and environment dimensions")
    rng = _seed_for(config, "subspace_example", spec_index)
    ex = sub.build_example_channel(u.dim_b, int(rng.integers(2**31)))
    digest = ex.isometry.digest()
    report.add(
        bd.BoundEntry(
            name="example-subspace-dimension",
            value=float(ex.dim_a),
            direction="info",
            params={"d": ex.d, "alpha": sub.EXAMPLE_ALPHA},
            tags=ex.tags,
            inputs_digest=digest,
        )
    )
    report.add(
        bd.BoundEntry(
            name="example-entanglement-floor",
            value=ex.entanglement_floor_clamped,
            direction="info",
            params={"exact": ex.entanglement_floor},
            tags=ex.tags,
            inputs_digest=digest,
        )
    )
    report.add(
        bd.BoundEntry(
            name="example-conditional-upper",
            value=ex.conditional_upper,
            direction="upper",
            level="ppt",
            params={
                "formula": ex.upper_bound_formula,
                "deficit_exact": ex.deficit_exact,
                "deficit_quoted": ex.deficit_quoted,
            },
            tags=ex.tags,
            inputs_digest=digest,
        )
    )
    return True


def _run_metric_suite(config, report):
    rng = _seed_for(config, "metric_suite", 0)
    pairs = int(config.tol("metric_pairs"))
    violations = 0
    worst = 0.0
    for _ in range(pairs):
        d = int(rng.integers(2, 9))
        rho = random_density_matrix(d, rng)
        sigma = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
        rep = verify_metric_inequalities(rho, sigma)
        slacks = [rep.lower_slack, rep.upper_slack]
        if not math.isinf(rep.pinsker_slack):
            slacks.append(rep.pinsker_slack)
        worst = min(worst, min(slacks))
        if not rep.all_satisfied:
            violations += 1
    report.add(
        bd.BoundEntry(
            name="metric-inequality-suite",
            value=float(violations),
            direction="info",
            params={"pairs": pairs, "dims": "2..8", "worst_slack": worst},
        )
    )
    return violations == 0


# ---------------------------------------------------------------------------
# run + emit
# ---------------------------------------------------------------------------


def run(config: RunConfig):
    """Execute the selected analyses; returns (report dict, exit status)."""
    t0 = time.perf_counter()
    inputs = []
    channels: list[tuple[str, StinespringIsometry, str | None]] = []
    for path in config.spec_paths:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            u = load_channel_spec(doc)
        except (OSError, json.JSONDecodeError, ChannelSpecError, DimensionError, DomainError) as exc:
            return {"error": f"{path}: {exc}"}, EXIT_INPUT
        channels.append((path, u, doc.get("name")))
        inputs.append(
            {
                "path": str(path),
                "name": doc.get("name"),
                "digest": u.digest(),
                "dims": {"a": u.dim_a, "b": u.dim_b, "c": u.dim_c},
            }
        )

    report = bd.BoundReport()
    all_converged = True
    invariant_ok = True
    runners = {
        "q_capacity": _run_q_capacity,
        "lower_bounds": _run_lower_bounds,
        "badziag": _run_badziag,
        "detector": _run_detector,
        "upper_bounds": _run_upper_bounds,
        "subspace_example": _run_subspace_example,
    }
    try:
        for analysis in config.analyses:
            if analysis == "metric_suite":
                invariant_ok = _run_metric_suite(config, report) and invariant_ok
                continue
            for spec_index, (_path, u, _name) in enumerate(channels):
                ok = runners[analysis](u, config, spec_index, report)
                all_converged = all_converged and ok
    except (DimensionError, DomainError) as exc:
        return {"error": str(exc)}, EXIT_INPUT
    except RuntimeError as exc:
        return {"error": f"internal invariant violation: {exc}"}, EXIT_INVARIANT

    violations = []
    for _path, u, _name in channels:
        violations.extend(bd.chain_check(u, report, tol=config.tol("chain_slack")))
    seen = set()
    chain = []
    for v in violations:
        key = (v.lower_name, v.upper_name, v.lower_value, v.upper_value)
        if key not in seen:
            seen.add(key)
            chain.append(
                {
                    "lower": v.lower_name,
                    "upper": v.upper_name,
                    "lower_value": v.lower_value,
                    "upper_value": v.upper_value,
                }
            )

    doc = {
        "schema": SCHEMA_ID,
        "seed": config.seed,
        "analyses": list(config.analyses),
        "tolerances": {k: config.tolerances[k] for k in sorted(config.tolerances)},
        "inputs": inputs,
        "entries": [_entry_dict(e) for e in report.entries],
        "chain": {"violations": chain},
        "wall_time_s": time.perf_counter() - t0,
    }
    if chain or not invariant_ok:
        return doc, EXIT_INVARIANT
    if not all_converged:
        return doc, EXIT_NONCONVERGED
    return doc, EXIT_OK


def report_schema() -> dict:
    text = resources.files("envcap").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def emit(report: dict, fmt: str) -> str:
    """Serialize a report; JSON omits wall time so equal seeds give equal bytes."""
    if fmt == "json":
        doc = {k: v for k, v in report.items() if k != "wall_time_s"}
        return json.dumps(_round12(doc), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _emit_csv(report)
    if fmt == "markdown":
        return _emit_markdown(report)
    raise ConfigError(f"unknown format {fmt!r}")


def _emit_csv(report: dict) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "value", "direction", "level", "tags", "inputs_digest", "params"])
    for e in report.get("entries", []):
        writer.writerow(
            [
                e["name"],
                f"{e['value']:.12g}",
                e["direction"],
                e["level"] or "",
                ";".join(e["tags"]),
                e["inputs_digest"],
                json.dumps(_round12(e["params"]), sort_keys=True),
            ]
        )
    return buf.getvalue()


_LEVEL_ORDER = {lvl: i for i, lvl in enumerate(bd.CHAIN_LEVELS)}


def _emit_markdown(report: dict) -> str:
    lines = ["# Capacity bound report", ""]
    if report.get("inputs"):
        lines.append("## Inputs")
        lines.append("")
        lines.append("| path | name | dims (a, b, c) | digest |")
        lines.append("| --- | --- | --- | --- |")
        for inp in report["inputs"]:
            dims = inp["dims"]
            lines.append(
                f"| {inp['path']} | {inp.get('name') or ''} | "
                f"({dims['a']}, {dims['b']}, {dims['c']}) | {inp['digest']} |"
            )
        lines.append("")

    def table(title, entries):
        if not entries:
            return
        lines.append(f"## {title}")
        lines.append("")
        lines.append("| name | value (bits) | level | tags | digest |")
        lines.append("| --- | --- | --- | --- | --- |")
        for e in entries:
            lines.append(
                f"| {e['name']} | {e['value']:.6g} | {e['level'] or ''} | "
                f"{';'.join(e['tags'])} | {e['inputs_digest']} |"
            )
        lines.append("")

    entries = report.get("entries", [])
    level = lambda e: _LEVEL_ORDER.get(e["level"], 99)
    # chain order: lower bounds first, then diagnostics, then upper bounds
    table("Lower bounds", sorted([e for e in entries if e["direction"] in ("lower", "exact")], key=level))
    table("Diagnostics", [e for e in entries if e["direction"] == "info"])
    table("Upper bounds", sorted([e for e in entries if e["direction"] == "upper"], key=level))

    lines.append("## Chain check")
    lines.append("")
    violations = report.get("chain", {}).get("violations", [])
    if violations:
        for v in violations:
            lines.append(
                f"- VIOLATION: {v['lower']} = {v['lower_value']:.6g} exceeds "
                f"{v['upper']} = {v['upper_value']:.6g}"
            )
    else:
        lines.append("- consistent: every lower bound sits below every comparable upper bound")
    lines.append("")
    if "wall_time_s" in report:
        lines.append(f"_wall time: {report['wall_time_s']:.3f} s_")
        lines.append("")
    return "\n".join(lines)


def _parse_tolerances(items) -> dict:
    tols = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        key, _, val = item.partition("=")
        try:
            tols[key.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"--tol {key}: {val!r} is not a number") from exc
    return tols


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envcap",
        description="Evaluate capacity bounds and discrimination checks on channel specs.",
    )
    parser.add_argument("--spec", action="append", default=[], metavar="PATH",
                        help="channel document (JSON); repeatable")
    parser.add_argument("--analyses", default="", metavar="LIST",
                        help="comma-separated subset of: " + ", ".join(ANALYSES))
    parser.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    parser.add_argument("--format", dest="fmt", default="json",
                        choices=["json", "csv", "markdown"])
    parser.add_argument("--out", default=None, metavar="PATH", help="write report here")
    parser.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                        help="tolerance override; repeatable")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            spec_paths=tuple(args.spec),
            analyses=tuple(a.strip() for a in args.analyses.split(",") if a.strip()),
            seed=args.seed,
            fmt=args.fmt,
            out=args.out,
            tolerances=_parse_tolerances(args.tol),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report, status = run(config)
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
        return status

    text = emit(report, config.fmt)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
