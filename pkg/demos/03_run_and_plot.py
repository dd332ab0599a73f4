"""Run one configured experiment end to end and plot its trace."""

# %%
import json
from pathlib import Path

from dosm.config import config_hash, load
from dosm.evaluation import write_trace
from dosm.plot import plot_csv
from dosm.runner import simulate

here = Path(__file__).parent
out = here / "out"

# %%
for name in ("ring_boost_dogd", "path_dmfw_dftpl"):
    cfg = load(here / "configs" / f"{name}.json")
    run = simulate(cfg)
    s = run.summary()
    trace = write_trace(run.trace, out / f"{name}.csv", config_hash(cfg, s["seed"]))
    svg = plot_csv(out / f"{name}.csv", out / f"{name}.svg")
    print(name, json.dumps({k: s[k] for k in ("algo", "alpha", "T", "max_consensus_err", "exchanges_per_round")}))
    print("  final alpha-regret per node:", [round(r, 2) for r in s["final_alpha_regret"]], "->", svg)
