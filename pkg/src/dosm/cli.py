"""Command-line driver: ``spectrum``, ``run``, ``sweep``, ``verify``, ``plot``.

Exit codes: 0 success, 1 runtime failure, 2 invalid config or input.
The log level comes from the ``DOSM_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as config_mod
from .errors import ConfigError, DisconnectedGraphError, InvariantError

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("dosm")


def _setup_logging():
    level = os.environ.get("DOSM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_config(args):
    if not args.config:
        raise ConfigError("--config is required")
    return config_mod.load(args.config)


def _seed(args, cfg):
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


# ---------------------------------------------------------------------------


def cmd_spectrum(args):
    from .doco import default_params
    from .network import build_lazy_metropolis, make_topology, read_edge_list, spectral
    from .seeding import Streams

    T = args.T
    if args.config:
        cfg = _load_config(args)
        from .runner import build_topology

        topo = build_topology(cfg, Streams(_seed(args, cfg)))
        T = T or cfg["T"]
        d = cfg["d"]
    elif args.edges:
        topo = read_edge_list(args.edges)
        d = args.d
    elif args.topology:
        spec = {"kind": args.topology, "n": args.n}
        topo = make_topology(spec, Streams(args.seed or 0).rng("net"))
        d = args.d
    else:
        raise ConfigError("spectrum needs --config, --edges or --topology")
    T = T or 1024
    A = build_lazy_metropolis(topo)
    prof = spectral(A)
    out = {
        "n": prof.n,
        "sigma2": prof.sigma2,
        "rho": prof.rho,
        "C": prof.C,
        "theta": prof.theta,
        "T": T,
        "dftpl_L": prof.dftpl_block(T),
        "defaults": {},
    }
    for role in ("smooth-doco", "linear-doco", "dftpl", "dmfw-inner"):
        p = default_params(prof, 1.0, d, T, role)
        out["defaults"][role] = {"L": p.L, "K": p.K, "theta": p.theta, "eta_per_G": p.eta}
    out["c_prime"] = {"L": out["defaults"]["dmfw-inner"]["L"], "value": out["defaults"]["dmfw-inner"]["K"]}
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        print(f"n={prof.n} sigma2={prof.sigma2:.12g} rho={prof.rho:.12g} C={prof.C} theta={prof.theta:.12g}")
        print(f"T={T} C'(L={out['c_prime']['L']})={out['c_prime']['value']} dftpl_L={out['dftpl_L']}")
        for role, p in out["defaults"].items():
            print(f"  {role}: L={p['L']} K={p['K']} theta={p['theta']} eta/G={p['eta_per_G']:.6g}")
    return EXIT_OK


def cmd_run(args):
    from .evaluation import write_decisions, write_trace
    from .runner import simulate

    cfg = _load_config(args)
    seed = _seed(args, cfg)
    output = cfg.get("output", {})
    out_dir = Path(args.out or output.get("dir", "out"))
    h = config_mod.config_hash(cfg, seed)
    run = simulate(cfg, seed)
    trace_path = out_dir / output.get("trace", "trace.csv")
    write_trace(run.trace, trace_path, h)
    if output.get("decisions", False):
        write_decisions(run.X, out_dir / "decisions.csv", h)
    summary = run.summary()
    summary["config_hash"] = h
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    regrets = " ".join(f"{r:.6g}" for r in summary["final_alpha_regret"])
    print(
        f"algo={summary['algo']} alpha={summary['alpha']:.6g} T={summary['T']} (nominal {summary['nominal_T']}) "
        f"final_alpha_regret=[{regrets}] max_consensus_err={summary['max_consensus_err']:.3e} "
        f"exchanges_per_round={summary['exchanges_per_round']:.3g} trace={trace_path}"
    )
    return EXIT_OK


def cmd_sweep(args):
    from .evaluation import _atomic_write
    from .runner import MIN_SLOPE_POINTS, sweep, sweep_csv

    cfg = _load_config(args)
    sw = cfg.get("sweep", {})
    Ts = args.T or sw.get("T")
    if not Ts:
        raise ConfigError("sweep needs horizons (--T or config sweep.T)")
    if args.seeds is not None:
        base = _seed(args, cfg)
        seeds = [base + k for k in range(args.seeds)]
    else:
        seeds = sw.get("seeds") or cfg.get("seeds") or [_seed(args, cfg)]
    rows = sweep(cfg, Ts, seeds, jobs=args.jobs)
    h = config_mod.config_hash({**cfg, "sweep": {"T": sorted(Ts), "seeds": list(seeds)}})
    out = Path(args.out or cfg.get("output", {}).get("dir", "out")) / "sweep.csv"
    _atomic_write(out, sweep_csv(rows, h))
    sys.stdout.write(sweep_csv(rows))
    if len(rows) < MIN_SLOPE_POINTS:
        print(f"slope omitted: {len(rows)} horizons < {MIN_SLOPE_POINTS}", file=sys.stderr)
    elif rows[-1].slope_so_far is None:
        print("slope omitted: fewer than two positive mean regrets", file=sys.stderr)
    else:
        print(f"slope={rows[-1].slope_so_far:.4f}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suites

    outcomes = run_suites(args.suites, scale="full" if args.full else "quick")
    for o in outcomes:
        print(o.line())
    return EXIT_OK if all(o.ok for o in outcomes) else EXIT_RUNTIME


def cmd_plot(args):
    from .plot import plot_csv

    src = Path(args.csv)
    if not src.exists():
        raise ConfigError(f"no such CSV: {src}")
    out = Path(args.out) if args.out and args.out.endswith(".svg") else Path(args.out or src.parent) / (src.stem + ".svg")
    plot_csv(src, out)
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="dosm", description="Decentralized online DR-submodular maximization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="run-config JSON")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    sp = sub.add_parser("spectrum", help="spectral profile and default parameters")
    common(sp)
    sp.add_argument("--edges", help="edge-list file (one 'i j' pair per line)")
    sp.add_argument("--topology", choices=["path", "ring", "complete", "star", "random"])
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--T", type=int)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("run", help="run one configured experiment")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="regret growth over horizons and seeds")
    common(sp)
    sp.add_argument("--T", type=int, nargs="+")
    sp.add_argument("--seeds", type=int, help="number of consecutive seeds from --seed")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run property suites")
    common(sp, config=False)
    sp.add_argument("suites", nargs="*", default=["all"])
    sp.add_argument("--full", action="store_true", help="use acceptance-scale trial counts")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="render a trace or sweep CSV to SVG")
    common(sp, config=False)
    sp.add_argument("csv")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DisconnectedGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, InvariantError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
