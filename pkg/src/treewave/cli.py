"""Command-line surface: ``treewave <command> CONFIG [options]``.

Every command reads one INI configuration (see :mod:`treewave.config`),
writes its artifacts under the configured output directory and prints a
JSON summary. Every JSON document carries the configuration fingerprint and
the seed. Exit status: 0 on success, 1 on a module error, 2 on bad usage,
3 when an oracle comparison fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback

import numpy as np

from . import analysis, mc, params, spectrum, synth, tree
from .config import RunConfig, load_config, parse_event_args
from .errors import TreewaveError

COMMANDS = ("simulate", "params", "spectrum", "synth", "analyze", "construct-point", "verify")
EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_ORACLE = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(doc) -> str:
    # json writes floats with repr, the shortest string that round-trips
    return json.dumps(_clean(doc), sort_keys=True, indent=1) + "\n"


def _envelope(config: RunConfig, command: str, result: dict, files=()) -> dict:
    return {"command": command, "fingerprint": config.fingerprint(), "seed": config.seed,
            "files": list(files), "result": result}


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _tree(config, tree_file=None):
    if tree_file:
        t = tree.TreeSample.load(tree_file)
        if t.fingerprint != config.schedule.fingerprint():
            raise TreewaveError(f"{tree_file} was sampled from a different schedule")
        return t
    return tree.sample_tree(config.schedule, config.J, config.seed)


def _derived(config):
    return params.derive(config.schedule, config.h_low, config.h_high, J=max(64, config.J))


def _states_from_path(config, coeffs):
    """Recover the large-coefficient pattern of an analyzed path.

    A coefficient counts as large when it sits nearer to ``2^{-h_low j}``
    than to ``2^{-h_high j}`` on a log scale.
    """
    states = []
    for j in range(coeffs.J + 1):
        c = np.abs(coeffs.values(j))
        big = -config.h_low * j
        small = -config.h_high * j if math.isfinite(config.h_high) else -math.inf
        with np.errstate(divide="ignore"):
            lc = np.log2(c)
        cut = (big + small) / 2 if math.isfinite(small) else big - 8.0
        states.append((lc > cut).astype(np.uint8) if j else np.ones(1, np.uint8))
    return synth.CoefficientField(coeffs.J, coeffs.base, config.h_low, config.h_high, tuple(states))


# ----------------------------------------------------------------------------
# commands


def cmd_simulate(config, out, args):
    t = _tree(config)
    path = os.path.join(out, f"tree_{config.seed}.hmtt")
    t.save(path)
    result = {"J": t.J, "counts": t.counts.tolist(),
              "fresh": [int(tree.fresh_ones(t, j).size) for j in range(1, t.J + 1)]}
    return _envelope(config, "simulate", result, [path]), EXIT_OK


def cmd_params(config, out, args):
    d = _derived(config)
    doc = _envelope(config, "params", {**d.to_dict(), "regime": params.classify_regime(d).to_dict()})
    return doc, EXIT_OK


def cmd_spectrum(config, out, args):
    pred = spectrum.predict_spectrum(_derived(config))
    return _envelope(config, "spectrum", pred.to_dict()), EXIT_OK


def cmd_synth(config, out, args):
    coeffs = synth.coefficients(_tree(config, args.tree), config.h_low, config.h_high)
    path = synth.synthesize(coeffs, config.wavelet, N=1 << config.m, guard=config.guard,
                            probe_ceiling=config.probe_ceiling or analysis.DEFAULT_CEILING_FACTOR * config.h_low)
    path.meta.update({"fingerprint": config.fingerprint(), "seed": config.seed})
    if args.format == "csv":
        fname = os.path.join(out, f"path_{config.seed}.csv")
        path.save_csv(fname)
        files = [fname]
    else:
        fname = os.path.join(out, f"path_{config.seed}.f64")
        path.save_raw(fname)
        files = [fname, fname + ".json"]
    result = {"N": path.N, "tail_bound": path.tail_bound, "min": float(path.values.min()),
              "max": float(path.values.max())}
    return _envelope(config, "synth", result, files), EXIT_OK


def cmd_analyze(config, out, args):
    if args.path:
        sp = synth.SamplePath.load_raw(args.path)
        coeffs = _states_from_path(config, synth.analyze(sp, config.wavelet, J=config.J))
    else:
        coeffs = synth.coefficients(_tree(config, args.tree), config.h_low, config.h_high)
    f = analysis.holder_field(coeffs, j_min=config.j_min, probe_ceiling=config.probe_ceiling,
                              N=1 << config.m)
    csv_path = os.path.join(out, f"holder_{config.seed}.csv")
    rows = ["x,h,clamped,witness_level,witness_offset"]
    rows += [f"{x!r},{h!r},{int(c)},{wl},{wo}" for x, h, c, wl, wo in
             zip(f.x.tolist(), f.h.tolist(), f.clamped.tolist(), f.witness_level.tolist(), f.witness_offset.tolist())]
    _write(csv_path, "\n".join(rows) + "\n")
    result = {"N": f.N, "j_min": f.j_min, "J": f.J, "ceiling": f.ceiling,
              "median": float(np.median(f.h)), "quantiles": np.quantile(f.h, [0.1, 0.25, 0.75, 0.9]).tolist(),
              "clamped_fraction": float(f.clamped.mean())}
    h = config.analysis.get("h")
    if h is not None:
        iso = analysis.iso_holder_sets(f, h, config.analysis.get("eps", 0.1))
        for name, counts in (("E", iso.counts_E), ("E_tilde", iso.counts_E_tilde)):
            try:
                bd = analysis.box_dimension(counts)
                result[f"box_dimension_{name}"] = {"slope": bd.slope, "r2": bd.r2}
            except TreewaveError as exc:
                result[f"box_dimension_{name}"] = {"error": str(exc)}
    return _envelope(config, "analyze", result, [csv_path]), EXIT_OK


def cmd_construct(config, out, args):
    h = args.h if args.h is not None else config.analysis.get("h")
    if h is None:
        raise TreewaveError("construct-point needs a target exponent: [analysis] h or --h")
    t = _tree(config, args.tree)
    pc = analysis.construct_point(t, _derived(config), h, J=config.J,
                                  rho_mode=config.analysis.get("rho_mode", "constant"),
                                  rho0=config.analysis.get("rho0", 0.25))
    result = {"h": h, "status": pc.status, "reason": pc.reason, "depth": pc.depth, "j0": pc.j0, "y": pc.y,
              "steps": [{"level": s.level, "left": s.left, "length": s.length, "rho": s.rho} for s in pc.steps]}
    if pc.ok:
        coeffs = synth.coefficients(t, config.h_low, config.h_high)
        result["estimate"] = analysis.estimate_holder(coeffs, pc.y, j_min=pc.j0, probe_ceiling=config.probe_ceiling)
    return _envelope(config, "construct-point", result), EXIT_OK if pc.ok else EXIT_ORACLE


def _oracle(config, event, ev_args):
    """Exact probability of ``event`` at depth ``J`` when one is available, else None."""
    sch, J = config.schedule, config.J
    if event == "s-empty":
        return params.phi0(sch, ev_args.get("j", J))
    no_fresh = sch.eta_zero_from() == 0
    if no_fresh and event in ("theta-absent", "theta-cover-nonempty") and ev_args.get("min_run", J) == J:
        # without fresh vertices every state-1 vertex ends an all-1 chain from the root
        p = params.phi0(sch, J)
        return p if event == "theta-absent" else 1.0 - p
    if no_fresh and event == "subtree-survival" and ev_args.get("j", 0) == 0:
        return 1.0 - params.phi0(sch, J)
    return None


def cmd_verify(config, out, args):
    event = args.event or config.verify.get("event")
    if event is None:
        raise TreewaveError("verify needs an event: [verify] event or --event")
    ev_args = dict(config.verify.get("args", {}))
    if args.args:
        ev_args.update(parse_event_args(args.args))
    trials = args.trials or config.verify.get("trials", mc.DEFAULT_TRIALS)
    res = mc.mc_probability(config.schedule, config.J, event, trials, config.seed, **ev_args)
    exact = _oracle(config, event, ev_args)
    result = res.to_dict()
    result["oracle"] = exact
    result["pass"] = None if exact is None else res.covers(exact)
    status = EXIT_OK if result["pass"] in (None, True) else EXIT_ORACLE
    return _envelope(config, "verify", result), status


HANDLERS = {"simulate": cmd_simulate, "params": cmd_params, "spectrum": cmd_spectrum, "synth": cmd_synth,
            "analyze": cmd_analyze, "construct-point": cmd_construct, "verify": cmd_verify}


def run_pipeline(config: RunConfig, command: str, args=None, out=None):
    """Run one command; returns ``(json_document, exit_status)``.

    Module errors propagate; :func:`main` turns them into exit status 1.
    """
    if command not in HANDLERS:
        raise TreewaveError(f"unknown command {command!r}; known: {COMMANDS}")
    args = args or build_parser().parse_args([command, "-"])
    out = out or config.output
    os.makedirs(out, exist_ok=True)
    doc, status = HANDLERS[command](config, out, args)
    _write(os.path.join(out, f"{command}_{config.seed}.json"), dumps(doc))
    return doc, status


def _origin(exc):
    """Module tag of an error: its declared tag, else the package module that raised it."""
    if type(exc).module != "treewave":
        return type(exc).module
    tb, tag = exc.__traceback__, "treewave"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("treewave.") and name != "treewave.cli":
            tag = name.split(".", 1)[1]
        tb = tb.tb_next
    return tag


def build_parser():
    ap = argparse.ArgumentParser(prog="treewave", description="Random wavelet series on hidden Markov trees.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--out", help="override [run] output directory")
        if name in ("synth", "analyze", "construct-point"):
            p.add_argument("--tree", help="tree file written by simulate (default: resample from the seed)")
        if name == "synth":
            p.add_argument("--format", choices=("raw", "csv"), default="raw")
        if name == "analyze":
            p.add_argument("--path", help="raw path file written by synth; coefficients are recovered from it")
        if name == "construct-point":
            p.add_argument("--h", type=float, help="target exponent")
        if name == "verify":
            p.add_argument("--event", choices=sorted(mc.EVENTS))
            p.add_argument("--trials", type=int)
            p.add_argument("--args", help="event arguments as key=value,key=value")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = RunConfig(**{**config.__dict__, "seed": args.seed})
        doc, status = run_pipeline(config, args.command, args, args.out)
    except TreewaveError as exc:
        print(f"treewave [{_origin(exc)}] {type(exc).__name__}: {exc}", file=sys.stderr)
        if os.environ.get("TREEWAVE_TRACEBACK"):
            traceback.print_exc()
        return EXIT_ERROR
    except OSError as exc:
        print(f"treewave [io] {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(dumps(doc))
    return status


if __name__ == "__main__":
    sys.exit(main())
