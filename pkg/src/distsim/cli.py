"""Command-line driver: every analysis as a subcommand emitting JSON or CSV data."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import counterexample as cx
from . import covering as cov
from .distributions import (
    DEFAULT_CAP_CELLS,
    CapExceededError,
    ConditionalKernel,
    ProbabilityTable,
    entropy,
    gk_common_information,
    load_table,
    maximal_correlation,
    mutual_information,
    wyner_dsbs,
)
from .report import ExperimentReport, ReportRow
from .schemes import (
    DeterministicScheme,
    best_scalar_approximation,
    expected_hamming,
    hamming_lower_bound,
    induced_cube,
    is_signed_permutation,
    level_profile,
    load_scheme,
    simulation_divergence,
)

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3

# defaults applied after the config file; flags override both
DEFAULTS = {
    "seed": 0,
    "trials": 100,
    "n": 8,
    "n_list": "2,4,6,8",
    "p": 0.1,
    "q": None,
    "delta": 0.05,
    "block_len": 4,
    "mu": None,
    "variant": "delta",
    "preset": None,
    "format": "json",
    "threads": 1,
    "cap_cells": DEFAULT_CAP_CELLS,
    "out": None,
    "table": None,
    "scheme": None,
    "instance": None,
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags take precedence")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--n-list", dest="n_list", help="comma-separated block lengths")
    common.add_argument("--p", type=float, help="source DSBS crossover")
    common.add_argument("--q", type=float, help="target crossover or channel parameter")
    common.add_argument("--delta", type=float, help="target_delta for the counterexample")
    common.add_argument("--block-len", dest="block_len", type=int)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--threads", type=int, help="worker cap for trial loops")
    common.add_argument("--cap-cells", dest="cap_cells", type=int, help="largest dense table allowed")

    ap = argparse.ArgumentParser(prog="distsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    info = sub.add_parser("info", parents=[common], help="information measures of a joint table")
    info.add_argument("table", nargs="?", help="table JSON over (U, V); omit to use DSBS(--p)")
    an = sub.add_parser("analyze-scheme", parents=[common], help="exact analysis of a scheme file")
    an.add_argument("scheme")
    sc = sub.add_parser("soft-cover", parents=[common], help="random-codebook covering experiment")
    sc.add_argument("instance", nargs="?", help="instance JSON; omit to use --preset")
    sc.add_argument("--preset", choices=("positive", "negative"))
    hy = sub.add_parser("hybrid", parents=[common], help="common-part plus soft-covering experiment")
    hy.add_argument("instance", nargs="?", help="instance JSON with a 'target' table; omit to use --preset")
    hy.add_argument("--preset", choices=("cross", "common-bit"))
    ce = sub.add_parser("counterexample", parents=[common], help="block-parity construction metrics")
    ce.add_argument("--variant", choices=("delta", "epsilon"))
    ce.add_argument("--mu", type=float, help="parity activation probability (epsilon variant)")
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: expected a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"{args.config}: unknown keys {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            cfg[key] = value
    if isinstance(cfg["n_list"], str):
        try:
            cfg["n_list"] = [int(t) for t in cfg["n_list"].split(",") if t.strip()]
        except ValueError:
            raise ValueError(f"--n-list must be comma-separated integers, got {cfg['n_list']!r}") from None
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["trials"] < 1:
        raise ValueError("--trials must be >= 1")
    if cfg["threads"] < 1:
        raise ValueError("--threads must be >= 1")
    if cfg["cap_cells"] < 1:
        raise ValueError("--cap-cells must be >= 1")
    if not cfg["n_list"] or any(n < 1 for n in cfg["n_list"]):
        raise ValueError("--n-list needs positive integers")
    if cfg["n"] < 1:
        raise ValueError("--n must be >= 1")
    if not 0.0 <= cfg["p"] <= 0.5:
        raise ValueError("--p must be in [0, 1/2]")
    if cfg["q"] is not None and not 0.0 <= cfg["q"] <= 0.5:
        raise ValueError("--q must be in [0, 1/2]")


def _cap_n(cap_cells: int) -> int:
    # the cube joint has 4^n cells
    return max(1, int(math.log2(cap_cells)) // 2)


def _finite(x: float) -> float | str:
    return x if math.isfinite(x) else "inf"


def cmd_info(cfg: dict) -> ExperimentReport:
    from .distributions import dsbs

    joint = load_table(cfg["table"]) if cfg.get("table") else dsbs(cfg["p"])
    if joint.arity != 2:
        raise ValueError("info needs a two-coordinate table")
    gk = gk_common_information(joint)
    metrics = {
        "entropy_bits": entropy(joint),
        "mutual_information_bits": mutual_information(joint),
        "maximal_correlation": maximal_correlation(joint),
        "c_gk_bits": gk.entropy_bits,
        "gk_components": len(gk.k_dist.probs),
    }
    dsbs_q = _dsbs_crossover(joint)
    if dsbs_q is not None:
        metrics["dsbs_crossover"] = dsbs_q
        metrics["wyner_bits"] = wyner_dsbs(min(dsbs_q, 1 - dsbs_q))
    return ExperimentReport({"command": "info", "table": cfg.get("table"), "p": cfg["p"]}, None, [], metrics)


def _dsbs_crossover(joint: ProbabilityTable) -> float | None:
    a = joint.probs
    if a.shape != (2, 2):
        return None
    if abs(a[0, 0] - a[1, 1]) > 1e-12 or abs(a[0, 1] - a[1, 0]) > 1e-12:
        return None
    return float(2 * a[0, 1])


def cmd_analyze_scheme(cfg: dict) -> ExperimentReport:
    s = load_scheme(cfg["scheme"])
    p = cfg["p"]
    q = p if cfg["q"] is None else cfg["q"]
    cap_n = _cap_n(cfg["cap_cells"])
    if s.n > cap_n:
        raise CapExceededError(f"scheme has n={s.n}, cap allows n <= {cap_n}")
    kx, ky = s.kernels()
    metrics = {
        "n": s.n,
        "divergence_bits": _finite(simulation_divergence(s, p, q, cap_n)),
        "expected_hamming": expected_hamming(s, p, cap_n),
    }
    if isinstance(s, DeterministicScheme):
        sf, sg = is_signed_permutation(s.f), is_signed_permutation(s.g)
        metrics["signed_permutation"] = sf is not None and sf == sg
        metrics["bijections"] = s.f.is_bijection() and s.g.is_bijection()
        if 0.0 < q < 1.0:
            metrics["hamming_lower_bound_bits"] = hamming_lower_bound(s, p, q, cap_n)
            metrics["bound_equals_divergence"] = bool(
                math.isclose(metrics["hamming_lower_bound_bits"], simulation_divergence(s, p, q, cap_n),
                             rel_tol=0, abs_tol=1e-10))
        prof = level_profile(s, p, cap_n)
        metrics["level_profile"] = {
            "w0_sum": prof.w0_sum,
            "w1_deficit": prof.w1_deficit,
            "w0_bound": _finite(prof.w0_bound),
            "w1_bound": _finite(prof.w1_bound),
        }
    else:
        metrics["signed_permutation"] = False
    for side, k in (("alice", kx), ("bob", ky)):
        approx = best_scalar_approximation(ConditionalKernel(k), cap_n)
        metrics[f"scalar_{side}"] = {"sigma": list(approx.sigma), "expected_tv": approx.expected_tv,
                                     **approx.tv_quantiles}
    cube = induced_cube(s, p, cap_n)
    metrics["total_mass"] = float(cube.sum())
    params = {"command": "analyze-scheme", "scheme": cfg["scheme"], "p": p, "q": q}
    return ExperimentReport(params, None, [], metrics)


def _soft_instance(cfg: dict) -> cov.SoftCoveringInstance:
    if cfg.get("instance"):
        return cov.SoftCoveringInstance.from_json(cov.load_json(cfg["instance"]))
    if cfg["preset"] == "negative":
        return cov.starved_instance()
    if cfg["preset"] in (None, "positive"):
        return cov.wyner_soft_cover_instance()
    raise ValueError(f"unknown soft-cover preset {cfg['preset']!r}")


def cmd_soft_cover(cfg: dict) -> ExperimentReport:
    inst = _soft_instance(cfg)
    params = {"instance": cfg.get("instance") or cfg["preset"] or "positive"}
    return cov.covering_experiment(inst, cfg["n_list"], cfg["trials"], cfg["seed"], cfg["threads"],
                                   cap_cells=cfg["cap_cells"], params=params)


def cmd_hybrid(cfg: dict) -> ExperimentReport:
    if cfg.get("instance"):
        obj = cov.load_json(cfg["instance"])
        if "target" not in obj:
            raise ValueError(f"{cfg['instance']}: hybrid instance needs a 'target' table")
        h, target = cov.HybridInstance.from_json(obj), ProbabilityTable.from_json(obj["target"])
        label = cfg["instance"]
    else:
        q = 0.4 if cfg["q"] is None else cfg["q"]
        preset = cfg["preset"] or "common-bit"
        build = cov.cross_hybrid if preset == "cross" else cov.common_bit_hybrid
        h, target = build(q)
        label = f"{preset}(q={q!r})"
    report = cov.hybrid_experiment(h, target, cfg["n_list"], cfg["trials"], cfg["seed"], cfg["threads"],
                                   cfg["cap_cells"])
    report.params["instance"] = label
    return report


def cmd_counterexample(cfg: dict) -> ExperimentReport:
    n, L, p = cfg["n"], cfg["block_len"], cfg["p"]
    if cfg["variant"] == "epsilon":
        if cfg["q"] is None or cfg["mu"] is None:
            raise ValueError("the epsilon variant needs --q and --mu")
        s = cx.build_epsilon_variant(n, L, p, cfg["q"], cfg["mu"])
    else:
        s = cx.build_scheme(n, L, p, cfg["delta"])
    cap_n = min(cx.CAP_N, _cap_n(cfg["cap_cells"]))
    m = cx.exact_metrics(s, cap_n)
    params = {"command": "counterexample", "variant": s.variant, "n": n, "block_len": L, "p": p,
              "q": s.q, "mu": s.mu, "target_crossover": s.target_q}
    d = m.divergence_bits
    return ExperimentReport(params, None, [ReportRow(n, d, d, d, d, 1)], m.as_dict())


COMMANDS = {
    "info": cmd_info,
    "analyze-scheme": cmd_analyze_scheme,
    "soft-cover": cmd_soft_cover,
    "hybrid": cmd_hybrid,
    "counterexample": cmd_counterexample,
}


def render(report: ExperimentReport, fmt: str) -> str:
    if fmt == "csv" and not report.rows:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for key, value in _flatten(report.metrics):
            w.writerow([key, repr(value) if isinstance(value, float) else value])
        return buf.getvalue()
    return report.dumps(fmt)


def _flatten(obj, prefix: str = ""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list):
        yield prefix[:-1], " ".join(repr(v) if isinstance(v, float) else str(v) for v in obj)
    else:
        yield prefix[:-1], obj


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = resolve(args)
        text = render(COMMANDS[args.command](cfg), cfg["format"])
    except CapExceededError as exc:
        print(f"distsim: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, OSError) as exc:
        print(f"distsim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
