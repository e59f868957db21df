"""Command-line front end.

Each subcommand prints a short table to stdout, or writes a self-describing
CSV/JSON table plus a manifest when ``--out`` is given (or when the
``OPTINC_OUT_DIR`` environment variable names a default directory).

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .core import (
    ImperfectionModel,
    OptIncError,
    SolverError,
    ValidationError,
    helstrom_error,
    homodyne_error,
    idp_bound,
)
from .evolution import evolve
from .export import format_value, write_manifest, write_table
from .montecarlo import run_ensemble
from .mpsk import MpskConfig, heterodyne_baseline, hybrid_tpsk, min_inconclusive_prob, scaling_study
from .rng import generate_seed
from .solver import gap_scaling, solve_strategy, tradeoff_curve
from .waveform import build_waveform

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4
OUT_DIR_ENV = "OPTINC_OUT_DIR"

# not part of the embedded configuration: they do not change results
_UNRECORDED = {"config", "out", "workers", "func", "dump_detections"}


# -- argument types ---------------------------------------------------------


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _float_list(text: str) -> list[float]:
    """Comma-separated numbers, or ``start:stop:count`` for an inclusive linear grid."""
    text = str(text).strip()
    if text.count(":") == 2:
        start, stop, count = text.split(":")
        try:
            n = int(count)
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid count must be an integer: {text!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError(f"grid count must be >= 1: {text!r}")
        return [float(x) for x in np.linspace(_float(start), _float(stop), n)]
    return [_float(part) for part in text.split(",") if part.strip()]


def _int_range(text: str) -> list[int]:
    """``a:b`` (inclusive) or comma-separated integers."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer range: {text!r}") from None


def _bits(text: str) -> int | None:
    if str(text).lower() in ("none", "off", "0"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a bit count: {text!r}") from None


# -- parser -----------------------------------------------------------------


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values (flags take precedence)")
    p.add_argument("--out", help="output file; a manifest is written next to it")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_device(p: argparse.ArgumentParser, n_bins: int = 1024) -> None:
    g = p.add_argument_group("device model")
    g.add_argument("--device", choices=("ideal", "experiment"), default="ideal",
                   help="preset: ideal devices or eta=0.72, xi=0.998, nu=0.03, R=50, 8-bit DAC")
    g.add_argument("--eta", type=_float, help="detection efficiency")
    g.add_argument("--xi", type=_float, help="interference visibility")
    g.add_argument("--nu", type=_float, help="dark counts per pulse")
    g.add_argument("--r-max", type=_float, help="maximum LO-to-signal power ratio ('inf' for none)")
    g.add_argument("--dac-bits", type=_bits, default=argparse.SUPPRESS, help="DAC resolution ('none' to disable)")
    g.add_argument("--n-bins", type=int, default=n_bins)


def _add_random(p: argparse.ArgumentParser, trials: int = 50_000, batches: int = 5) -> None:
    g = p.add_argument_group("Monte-Carlo")
    g.add_argument("--trials", type=int, default=trials, help="trials per batch")
    g.add_argument("--batches", type=int, default=batches)
    g.add_argument("--seed", type=int, help="master seed (generated and recorded if omitted)")
    g.add_argument("--workers", type=int, default=1, help="threads; results do not depend on it")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="optinc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"optinc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, func: Callable, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        _add_output(p)
        subs[name] = p
        return p

    p = add("bounds", cmd_bounds, "Helstrom, IDP and homodyne reference values")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--p", type=_float, default=0.5, help="prior of the state +alpha (Helstrom column)")

    p = add("tradeoff", cmd_tradeoff, "error vs inconclusive probability of the optimal strategy")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--p", type=_float, default=0.5)
    p.add_argument("--pi-grid", type=_float_list, help="targets; default 20 points up to 95%% of the IDP bound")
    p.add_argument("--tol", type=_float, default=1e-6)
    _add_device(p)

    p = add("montecarlo", cmd_montecarlo, "Monte-Carlo ensemble of a solved strategy")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--p", type=_float, default=0.5)
    p.add_argument("--pi", type=_float, default=0.31, help="target inconclusive probability")
    p.add_argument("--dump-detections", help="save bit-packed per-trial click records (.npy)")
    _add_device(p)
    _add_random(p)

    p = add("dolinar", cmd_dolinar, "Dolinar receiver (no inconclusive outcome) vs energy")
    p.add_argument("--alpha-sq", type=_float_list, default=_float_list("0.1:1.0:10"))
    _add_device(p)
    _add_random(p)

    p = add("waveform", cmd_waveform, "LO magnitude waveform of the optimal strategy")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--p", type=_float, default=0.5)
    p.add_argument("--pi", type=_float, default=0.19)
    _add_device(p)

    p = add("evolve", cmd_evolve, "time-resolved probabilities of one strategy")
    p.add_argument("--alpha-sq", type=_float, default=0.2)
    p.add_argument("--p", type=_float, default=0.5)
    p.add_argument("--pi", type=_float, default=0.31)
    p.add_argument("--scheme", choices=("euler", "exact"), default="euler")
    _add_device(p)
    _add_random(p, trials=0, batches=1)

    p = add("tpsk", cmd_tpsk, "hybrid three-state receiver vs heterodyne detection")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--f", type=_float_list, default=[0.66, 0.90])
    p.add_argument("--points", type=int, default=12, help="binary-stage budgets per curve")
    p.add_argument("--priors", choices=("posterior", "equal"), default="posterior")
    p.add_argument("--n-bins", type=int, default=1024)

    p = add("mpsk-scaling", cmd_mpsk_scaling, "maximum conclusive probability of the elimination stage vs M")
    p.add_argument("--m-range", type=_int_range, default=list(range(3, 9)))
    p.add_argument("--alpha-sq-per-bit", type=_float_list, default=[0.2, 0.5, 1.0])

    p = add("gap", cmd_gap, "frontier gap caused by a finite LO power ratio")
    p.add_argument("--alpha-sq", type=_float_list, default=[0.2, 0.4, 0.6])
    p.add_argument("--p", type=_float, default=0.5)
    p.add_argument("--r-values", type=_float_list, default=[10, 30, 100, 300, 1000])
    p.add_argument("--n-bins", type=int, default=8192)
    p.add_argument("--design-bins", type=int, default=1024)
    return parser, subs


# -- helpers ----------------------------------------------------------------


def _apply_config_file(sub: argparse.ArgumentParser, path: str) -> None:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config", f"{path} must contain a JSON object")
    actions = {a.dest: a for a in sub._actions}
    values = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest in ("config", "command", "func") or dest not in actions:
            raise ValidationError(dest, "unknown option in config file")
        action = actions[dest]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if action.type is not None and value is not None and not isinstance(value, bool):
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ValidationError(dest, str(exc)) from None
        values[dest] = value
    sub.set_defaults(**values)


def _device(args) -> ImperfectionModel:
    base = ImperfectionModel.experiment(args.n_bins) if args.device == "experiment" else ImperfectionModel.ideal(args.n_bins)
    fields = {}
    for name in ("eta", "xi", "nu", "r_max"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    if hasattr(args, "dac_bits"):
        fields["dac_bits"] = args.dac_bits
    return ImperfectionModel(**{**base.__dict__, **fields})


def _check_positive_int(name: str, value: int, minimum: int = 1) -> None:
    if value < minimum:
        raise ValidationError(name, f"must be >= {minimum}, got {value}")


def _resolved_config(args, extra: dict | None = None) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in _UNRECORDED}
    if hasattr(args, "eta"):
        imp = _device(args)
        config["device_model"] = imp.to_dict()
    config.update(extra or {})
    return config


def _out_path(args) -> Path | None:
    if args.out:
        return Path(args.out)
    directory = os.environ.get(OUT_DIR_ENV)
    if directory:
        return Path(directory) / f"{args.command}.{args.format}"
    return None


def _print_table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    cells = [list(columns)] + [[format_value(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    for r in cells:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))


def _emit(args, columns, rows, config, summary: tuple[Sequence[str], Sequence[Sequence[Any]]] | None = None) -> Path | None:
    """Write the table (and its manifest) or print it; ``summary`` replaces long tables on stdout."""
    path = _out_path(args)
    if path is not None:
        write_table(path, columns, rows, config, args.format)
        write_manifest(path.with_name(path.stem + ".manifest.json"), config, [path.name])
    head, body = summary if summary is not None else (columns, rows)
    _print_table(head, body)
    if path is None:
        if summary is not None:
            print("(use --out for the full table)")
    else:
        print(f"wrote {path}")
    return path


def _seed(args) -> int:
    if args.seed is None:
        args.seed = generate_seed()
        print(f"generated seed {args.seed}", file=sys.stderr)
    if args.seed < 0:
        raise ValidationError("seed", f"must be >= 0, got {args.seed}")
    return args.seed


# -- commands ---------------------------------------------------------------


def cmd_bounds(args) -> int:
    rows = []
    for e in args.alpha_sq:
        rows.append((e, helstrom_error(e, args.p), idp_bound(e), homodyne_error(e)))
    _emit(args, ("alpha_sq", "helstrom", "idp", "homodyne"), rows, _resolved_config(args))
    return EXIT_OK


def cmd_tradeoff(args) -> int:
    imp = _device(args)
    rows = []
    failed = 0
    for e in args.alpha_sq:
        grid = args.pi_grid if args.pi_grid is not None else np.linspace(0, 0.95 * idp_bound(e), 20).tolist()
        for pt in tradeoff_curve(e, args.p, grid, imp, tol=args.tol):
            if not pt.ok:
                failed += 1
                print(f"alpha_sq={e} target_pi={pt.target_pi}: {pt.error}", file=sys.stderr)
            rows.append((e, pt.target_pi, pt.achieved_pi, pt.achieved_pe, pt.t1, pt.v, pt.n0))
    columns = ("alpha_sq", "target_pi", "achieved_pi", "achieved_pe", "t1", "v", "n0")
    _emit(args, columns, rows, _resolved_config(args))
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_montecarlo(args) -> int:
    imp = _device(args)
    seed = _seed(args)
    _check_positive_int("trials", args.trials)
    _check_positive_int("batches", args.batches)
    _check_positive_int("workers", args.workers)
    rows = []
    for i, e in enumerate(args.alpha_sq):
        spec = solve_strategy(e, args.p, args.pi, n_bins=imp.n_bins)
        wf = build_waveform(spec, imp)
        final = evolve(spec, wf, imp).final
        keep = args.dump_detections is not None
        st = run_ensemble(spec, wf, imp, args.trials, seed, args.batches, args.workers, keep_detections=keep)
        if keep:
            target = Path(args.dump_detections)
            if len(args.alpha_sq) > 1:
                target = target.with_name(f"{target.stem}_{i}{target.suffix or '.npy'}")
            target.parent.mkdir(parents=True, exist_ok=True)
            np.save(target, st.detections)
        sd = st.batch_sd
        rows.append((e, args.pi, st.p_i, st.p_e, st.se_i, st.se_e, st.n_trials, seed,
                     final.p_i, final.p_e, sd[2], sd[1]))
    columns = ("alpha_sq", "target_pi", "achieved_pi", "achieved_pe", "se_pi", "se_pe", "n_trials", "master_seed",
               "evolution_pi", "evolution_pe", "batch_sd_pi", "batch_sd_pe")
    _emit(args, columns, rows, _resolved_config(args))
    return EXIT_OK


def cmd_dolinar(args) -> int:
    imp = _device(args)
    seed = _seed(args)
    _check_positive_int("trials", args.trials)
    _check_positive_int("batches", args.batches)
    _check_positive_int("workers", args.workers)
    rows = []
    for e in args.alpha_sq:
        spec = solve_strategy(e, 0.5, 0.0, n_bins=imp.n_bins)
        wf = build_waveform(spec, imp)
        final = evolve(spec, wf, imp).final
        st = run_ensemble(spec, wf, imp, args.trials, seed, args.batches, args.workers)
        rows.append((e, final.p_e, st.p_e, st.se_e, st.batch_sd[1], helstrom_error(e), st.n_trials, seed))
    columns = ("alpha_sq", "pe_evolution", "pe_mc", "se_pe", "batch_sd_pe", "helstrom", "n_trials", "master_seed")
    _emit(args, columns, rows, _resolved_config(args))
    return EXIT_OK


def cmd_waveform(args) -> int:
    imp = _device(args)
    rows = []
    summary = []
    for e in args.alpha_sq:
        spec = solve_strategy(e, args.p, args.pi, n_bins=imp.n_bins)
        wf = build_waveform(spec, imp)
        for k, t, ideal, applied, mode in wf.rows():
            rows.append((e, k, t, ideal, applied, mode))
        k = wf.n_first
        before = wf.mag_applied[k - 1] if k > 0 else math.nan
        after = wf.mag_applied[k] if k < wf.n_bins else math.nan
        summary.append((e, spec.t1, spec.v, spec.n0, before, after))
    columns = ("alpha_sq", "bin", "t_mid", "mag_ideal", "mag_applied", "mode")
    head = ("alpha_sq", "t1", "v", "n0", "mag_before_switch", "mag_after_switch")
    _emit(args, columns, rows, _resolved_config(args), summary=(head, summary))
    return EXIT_OK


def cmd_evolve(args) -> int:
    imp = _device(args)
    spec = solve_strategy(args.alpha_sq, args.p, args.pi, n_bins=imp.n_bins)
    wf = build_waveform(spec, imp)
    trace = evolve(spec, wf, imp, args.scheme)
    columns = ["bin", "t", "p_c", "p_e", "p_i"]
    rows = [list(r) for r in trace.rows()]
    extra = {"t1": spec.t1, "v": spec.v, "n0": spec.n0}
    if args.trials > 0:
        seed = _seed(args)
        _check_positive_int("batches", args.batches)
        _check_positive_int("workers", args.workers)
        st = run_ensemble(spec, wf, imp, args.trials, seed, args.batches, args.workers)
        columns += ["mc_p_c", "mc_p_e", "mc_p_i"]
        for row, mc in zip(rows, st.trace_p):
            row.extend(mc.tolist())
    f = trace.final
    head = ("alpha_sq", "target_pi", "t1", "v", "n0", "p_c", "p_e", "p_i")
    summary = [(args.alpha_sq, args.pi, spec.t1, spec.v, spec.n0, f.p_c, f.p_e, f.p_i)]
    _emit(args, columns, rows, _resolved_config(args, extra), summary=(head, summary))
    return EXIT_OK


def cmd_tpsk(args) -> int:
    _check_positive_int("points", args.points)
    rows = []
    for e in args.alpha_sq:
        for f in args.f:
            p_i1 = min_inconclusive_prob(3, e, f)
            for t2 in np.linspace(0.0, 0.95 * (1.0 - p_i1), args.points).tolist():
                r = hybrid_tpsk(MpskConfig(3, e, f, t2, args.priors, args.n_bins))
                base = heterodyne_baseline(3, e, min(r.p_i_total, 1.0 - 1e-12))
                rows.append((3, e, f, t2, r.p_i_total, r.conditional_error, base))
    columns = ("m", "alpha_sq", "f", "target_pi2", "p_i_total", "conditional_error", "baseline_conditional_error")
    _emit(args, columns, rows, _resolved_config(args))
    return EXIT_OK


def cmd_mpsk_scaling(args) -> int:
    rows = []
    for e in args.alpha_sq_per_bit:
        for m, value in scaling_study(args.m_range, e):
            rows.append((m, e, value))
    _emit(args, ("m", "alpha_sq_per_bit", "log10_p_conc_max"), rows, _resolved_config(args))
    return EXIT_OK


def cmd_gap(args) -> int:
    rows = []
    for e in args.alpha_sq:
        result = gap_scaling(e, args.r_values, args.p, args.n_bins, args.design_bins)
        rows.extend((e, r, g) for r, g in result)
        finite = [(r, g) for r, g in result if math.isfinite(r) and g > 0]
        if len(finite) >= 2:
            slope = np.polyfit(np.log([r for r, _ in finite]), np.log([g for _, g in finite]), 1)[0]
            print(f"alpha_sq={format_value(e)}: log-log slope of g^2 vs R = {slope:.3f}", file=sys.stderr)
    _emit(args, ("alpha_sq", "r_max", "g_sq"), rows, _resolved_config(args))
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config_file(subs[args.command], args.config)
            args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"optinc: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"optinc: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"optinc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OptIncError as exc:
        print(f"optinc: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
