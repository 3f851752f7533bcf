"""Command-line front end.

    chiralwalk evolve [options]
    chiralwalk figure {fig1,fig1b,fig2,fig3,fig4,fig5} [options]

Output is CSV with ``#`` comment lines recording the version and every
parameter, or the same content as a JSON document with ``--json``.  Settings
come from flags, then a flat JSON ``--config`` file, then defaults.

Exit status: 0 on success, 2 for invalid configuration, 3 when a quadrature
fails its resolution check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .core import (
    CoinAngles,
    CoinParams,
    LatticeSizeError,
    ResolutionError,
    bloch_from_angles,
    orthogonal_partner,
)
from .kspace import NoiseParams, asymptotic_distance, kspace_series
from .mc import (
    FULL_STATE_MAX_T,
    MIN_TRAJECTORIES,
    RULES,
    ensemble_chiral,
    ensemble_full_distance,
    exact_full_distance,
)
from .nonmarkov import (
    ENGINES,
    accumulate,
    distance_series,
    nmax_curve,
    reference_fit,
    resolve_engine,
    sigma_series,
)
from .walk import chirality_series

FIGURES = ("fig1", "fig1b", "fig2", "fig3", "fig4", "fig5")

_FIGURE_DEFAULTS = {
    "fig1": {"gamma": 0.0, "phi": 0.0},
    "fig1b": {"gamma": math.pi / 4, "phi": math.pi},
    "fig2": {"steps": 100, "p_list": [0.0, 0.05, 0.1, 0.3]},
    "fig3": {"steps": 200},
    "fig4": {"steps": 200, "p_list": [0.0, 0.01, 0.05, 0.1, 0.3]},
    "fig5": {"steps": 200, "p_list": [0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3]},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "evolve"
    figure: str | None = None
    theta: float = math.pi / 4
    gamma: float = 0.0
    phi: float = 0.0
    gamma2: float | None = None
    phi2: float | None = None
    p: float = 0.0
    p_list: list | None = None
    steps: int = 100
    engine: str | None = None
    rule: str = "uniform"
    nk: int | None = None
    ntraj: int = 1000
    seed: int = 0
    out: str | None = None
    json: bool = False

    def coin(self) -> CoinParams:
        return CoinParams(self.theta)

    def first(self) -> CoinAngles:
        return CoinAngles(self.gamma, self.phi)

    def second(self) -> CoinAngles:
        if self.gamma2 is None and self.phi2 is None:
            return orthogonal_partner(self.first())
        return CoinAngles(self.gamma2 if self.gamma2 is not None else math.pi - self.gamma,
                          self.phi2 if self.phi2 is not None else self.phi + math.pi)

    def engine_name(self) -> str:
        if self.engine is None:
            return "kspace" if self.coin().is_hadamard else "position"
        return resolve_engine(self.engine)

    def validate(self):
        try:
            coin = self.coin()
            self.first()
            self.second()
            for p in [self.p] + list(self.p_list or []):
                NoiseParams(p)
            engine = self.engine_name()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if self.nk is not None and self.nk < 1:
            raise ConfigError("nk must be positive")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}")
        if engine == "mc" and self.ntraj < MIN_TRAJECTORIES:
            raise ConfigError(f"ntraj must be at least {MIN_TRAJECTORIES}")
        if engine == "kspace" and not coin.is_hadamard:
            raise ConfigError("the kspace engine needs theta = pi/4")
        noisy = self.p > 0 or any(p > 0 for p in (self.p_list or []))
        if engine == "position" and noisy:
            raise ConfigError("the position engine needs p = 0")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--theta", type=float, help="coin angle (default pi/4)")
    common.add_argument("--gamma", type=float, help="polar angle of the first state")
    common.add_argument("--phi", type=float, help="azimuth of the first state")
    common.add_argument("--gamma2", type=float, help="polar angle of the second state")
    common.add_argument("--phi2", type=float, help="azimuth of the second state")
    common.add_argument("--p", type=float, help="link-breaking probability")
    common.add_argument("--p-list", dest="p_list", type=_float_list,
                        help="comma-separated probabilities for multi-p figures")
    common.add_argument("--steps", type=int, help="number of time steps T")
    common.add_argument("--engine", choices=ENGINES, help="evolution engine")
    common.add_argument("--rule", choices=RULES, help="trajectory rule for the mc engine")
    common.add_argument("--nk", type=int, help="quadrature nodes for the kspace engine")
    common.add_argument("--ntraj", type=int, help="trajectories for the mc engine")
    common.add_argument("--seed", type=int, help="root seed for the mc engine")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    common.add_argument("--config", dest="config_path", help="flat JSON file of defaults")

    parser = argparse.ArgumentParser(prog="chiralwalk", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="reduced coin state per step")
    fig = sub.add_parser("figure", parents=[common], help="data behind a figure")
    fig.add_argument("figure", choices=FIGURES)
    return parser


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)} - {"command", "figure"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def build_config(argv=None) -> RunConfig:
    ns = vars(_parser().parse_args(argv))
    settings = {}
    command, figure = ns.pop("command"), ns.pop("figure", None)
    settings.update(_FIGURE_DEFAULTS.get(figure, {}))
    if "config_path" in ns:
        settings.update(_load_config(ns.pop("config_path")))
    settings.update(ns)
    try:
        cfg = RunConfig(command=command, figure=figure, **settings)
        cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_evolve(cfg: RunConfig):
    engine = cfg.engine_name()
    a, coin, noise, T = cfg.first(), cfg.coin(), NoiseParams(cfg.p), cfg.steps
    se = None
    if T == 0:
        rows = bloch_from_angles(a).as_array()[None]
        se = np.zeros_like(rows) if engine == "mc" else None
    elif engine == "kspace":
        rows = kspace_series(bloch_from_angles(a), T, noise, cfg.nk)
    elif engine == "position":
        rows = chirality_series(a, coin, T)
    else:
        est = ensemble_chiral(a, coin, noise, T, cfg.ntraj, cfg.seed, cfg.rule)
        rows, se = est.mean, est.stderr
    cols = ["t", "pL", "pR", "re_q", "im_q"]
    table = [
        [t, r[0] + r[3], r[0] - r[3], r[1], -r[2]] for t, r in enumerate(rows)
    ]
    if se is not None:
        cols += ["se_pL", "se_pR", "se_re_q", "se_im_q"]
        for row, s in zip(table, se):
            row += [s[3], s[3], s[1], s[2]]
    return cols, table


def _asymptotic_grid(cfg: RunConfig):
    a1 = cfg.first()
    gammas = np.linspace(0.0, math.pi, 33)
    phis = np.arange(64) * (2.0 * math.pi / 64)
    table = [[g, f, asymptotic_distance(a1, CoinAngles(g, f))] for g in gammas for f in phis]
    return ["gamma2", "phi2", "distance"], table


def _reduced(cfg: RunConfig, p: float):
    return distance_series(cfg.first(), cfg.second(), cfg.coin(), NoiseParams(p), cfg.steps,
                           engine=cfg.engine_name(), nk=cfg.nk, n_traj=cfg.ntraj,
                           seed=cfg.seed, rule=cfg.rule)


def _fig2(cfg: RunConfig):
    cols = ["p", "t", "reduced", "full", "full_se"]
    table = []
    t_full = min(cfg.steps, FULL_STATE_MAX_T)
    for p in cfg.p_list:
        red = _reduced(cfg, p).values
        if cfg.engine_name() == "mc":
            full = ensemble_full_distance(cfg.first(), cfg.second(), cfg.coin(), NoiseParams(p),
                                          t_full, cfg.ntraj, cfg.seed, cfg.rule)
        else:
            full = exact_full_distance(cfg.first(), cfg.second(), cfg.coin(), NoiseParams(p), t_full)
        for t, d in enumerate(red):
            f = full.values[t] if t <= t_full else None
            fse = full.stderr[t] if (full.stderr is not None and t <= t_full) else None
            table.append([p, t, d, f, fse])
    return cols, table


def _n_series(cfg: RunConfig, p: float):
    d = _reduced(cfg, p)
    return d.values, np.concatenate([sigma_series(d), [np.nan]]), accumulate(sigma_series(d))


def _fig3(cfg: RunConfig):
    d, s, n = _n_series(cfg, cfg.p)
    table = [[t, d[t], None if t == len(d) - 1 else s[t], n[t]] for t in range(len(d))]
    return ["t", "distance", "sigma", "accumulated"], table


def _fig4(cfg: RunConfig):
    table = []
    for p in cfg.p_list:
        _, _, n = _n_series(cfg, p)
        table += [[p, t, v] for t, v in enumerate(n)]
    return ["p", "t", "accumulated"], table


def _fig5(cfg: RunConfig):
    curve = nmax_curve(cfg.p_list, cfg.coin(), cfg.steps, cfg.nk)
    return ["p", "n_max", "fit"], [[p, n, float(reference_fit(p))] for p, n in curve]


def cmd_figure(cfg: RunConfig):
    if cfg.figure in ("fig1", "fig1b"):
        return _asymptotic_grid(cfg)
    if cfg.steps < 1:
        raise ConfigError("figures need steps >= 1")
    return {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5}[cfg.figure](cfg)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v) + 0.0)


def _json_cell(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v) + 0.0
    return None if math.isnan(v) else v


def render(cfg: RunConfig, cols, table) -> str:
    meta = {"version": __version__, **asdict(cfg)}
    meta.pop("out")
    if cfg.json:
        doc = {"meta": meta, "columns": cols,
               "rows": [[_json_cell(v) for v in row] for row in table]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# chiralwalk {__version__}\n")
    for key, value in meta.items():
        if key != "version":
            buf.write(f"# {key}={json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    writer.writerows([[_cell(v) for v in row] for row in table])
    return buf.getvalue()


def run(cfg: RunConfig) -> str:
    cols, table = cmd_evolve(cfg) if cfg.command == "evolve" else cmd_figure(cfg)
    return render(cfg, cols, table)


def main(argv=None) -> int:
    try:
        cfg = build_config(argv)
        text = run(cfg)
    except (ConfigError, LatticeSizeError) as exc:
        print(f"chiralwalk: error: {exc}", file=sys.stderr)
        return 2
    except ResolutionError as exc:
        print(f"chiralwalk: resolution failure: {exc}", file=sys.stderr)
        return 3
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
