"""Command-line front end: ``rydrepeater {analytics,verify,simulate,figures}``.

Parameters resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then command-line flags.  Every
summary written by ``simulate`` starts with the fully resolved config, so it
can be passed back through ``--config`` to reproduce the run; its
``result.*`` lines are ignored on input.

Exit codes: 0 success, 1 invalid input, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analytics, chainsim, verification
from . import linkprotocol as lp

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2


class ConfigError(ValueError):
    pass


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], object]
    default: object
    help: str


SCHEMA: tuple[Key, ...] = (
    Key("n_nodes", int, 10, "number of nodes N"),
    Key("l0_km", float, 100.0, "node spacing L0 in km"),
    Key("l_att_km", float, 22.0, "fiber attenuation length in km"),
    Key("gamma_hz", float, 1e3, "Rydberg decay rate in 1/s"),
    Key("omega_rad_s", float, 2 * math.pi * 1e6, "Rabi frequency in rad/s"),
    Key("eta_ion", float, 0.99, "ion detection efficiency"),
    Key("chi_r_hz", float, 1e10, "direct-transmission source rate in Hz"),
    Key("c_m_s", float, lp.C_FIBER, "signal speed in the fiber in m/s"),
    Key("pulse_duration_s", float, 1e-6, "duration of one pulse slot in s"),
    Key("omega_over_delta_dd", float, 0.0, "double-excitation ratio, 0 disables"),
    Key("eta_t", _optional_float, None, "fiber transmission override (none: exp(-L0/L_att))"),
    Key("p0", _optional_float, None, "per-round link success override for the chain (none: closed form)"),
    Key("schedule", _choice("symmetric", "physical"), "symmetric", "links per generation phase"),
    Key("level", _choice("link", "chain"), "chain", "simulate one link or the whole chain"),
    Key("mode", _choice("fast", "faithful"), "fast", "chain generation rounds"),
    Key("trials", int, 1000, "Monte Carlo trials"),
    Key("seed", int, 42, "root seed"),
)
_BY_NAME = {k.name: k for k in SCHEMA}
RESULT_PREFIX = "result."


def defaults() -> dict:
    return {k.name: k.default for k in SCHEMA}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith(RESULT_PREFIX):
            continue
        if key not in _BY_NAME:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _BY_NAME[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def format_config(cfg: dict, keys: Sequence[str] | None = None) -> str:
    keys = [k.name for k in SCHEMA] if keys is None else keys
    return "".join(f"{k} = {_fmt(cfg[k])}\n" for k in keys)


def noise_from(cfg: dict) -> lp.NoiseParams:
    return lp.NoiseParams(gamma=cfg["gamma_hz"], omega=cfg["omega_rad_s"], eta_ion=cfg["eta_ion"],
                          L0=cfg["l0_km"], L_att=cfg["l_att_km"],
                          omega_over_delta_dd=cfg["omega_over_delta_dd"],
                          pulse_duration=cfg["pulse_duration_s"], c=cfg["c_m_s"], eta_t=cfg["eta_t"])


def chain_from(cfg: dict) -> chainsim.ChainParams:
    return chainsim.ChainParams(n_nodes=cfg["n_nodes"], noise=noise_from(cfg), chi_r=cfg["chi_r_hz"],
                                p0=cfg["p0"], schedule=cfg["schedule"])


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _report(pairs: Sequence[tuple[str, object]]) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in pairs)


# -- analytics --------------------------------------------------------------


def analytics_report(cfg: dict) -> list[tuple[str, object]]:
    params = chain_from(cfg)
    budget = analytics.p0(params.noise)
    p0 = analytics.chain_p0(params)
    rounds = analytics.n_bar(p0, params.n_nodes)
    return [
        ("eta_t", budget.eta_t),
        ("n_r", budget.n_r),
        ("p_no_decay", budget.p_no_decay),
        ("p_ion4", budget.p_ion4),
        ("p0_budget", budget.p0),
        ("p0", p0),
        ("p1", analytics.p1(params.n_nodes, params.noise)),
        ("K", rounds.K),
        ("n_bar", rounds.n_bar),
        ("n_max", rounds.n_max),
        ("truncation_n", rounds.truncation_n),
        ("tail_bound", rounds.tail_bound),
        ("T_s", analytics.total_time(params)),
        ("L_total_km", params.L_total),
        ("direct_time_s", analytics.direct_time(params.L_total, params.L_att, params.chi_r)),
        # N * L0, the rounded length quoted for a chain of N nodes
        ("L_nominal_km", params.n_nodes * params.L0),
        ("direct_time_nominal_s", analytics.direct_time(params.n_nodes * params.L0, params.L_att, params.chi_r)),
    ]


def cmd_analytics(cfg: dict, out: Path | None) -> int:
    pairs = analytics_report(cfg)
    text = _report(pairs)
    if out is not None:
        _write_csv(out, ("quantity", "value"), pairs)
    sys.stdout.write(text)
    return EXIT_OK


# -- verify -----------------------------------------------------------------


def cmd_verify(cfg: dict, out: Path | None, mutate_plr: bool = False) -> int:
    # the replay is noiseless by construction, so physical overrides are ignored
    gate = None
    if mutate_plr:
        plr = chainsim.P_LR.copy()
        plr[2, 2] = -plr[2, 2]
        gate = chainsim.swap_gate_matrix(plr)
    checks = verification.run_all(gate=gate)
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.detail}\n" for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"checks = {len(checks)}\nfailed = {n_fail}\n")
    text = "".join(lines)
    if out is not None:
        out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK if n_fail == 0 else EXIT_VERIFY


# -- simulate ---------------------------------------------------------------

LINK_HEADER = ("trial", "success", "failure_cause", "verdict", "elapsed_s")
CHAIN_HEADER = ("trial", "rounds_phase1", "rounds_phase2", "protocol_repeats", "first_pass_rounds",
                "total_time_s", "end_state", "correction")


def _link_rows(cfg: dict, start: int, stop: int) -> list[tuple]:
    noise = noise_from(cfg)
    rows = []
    for j in range(start, stop):
        o = lp.attempt_link(noise, chainsim.trial_rng(cfg["seed"], j))
        rows.append((j, o.success, o.failure_cause or "", o.verdict.value, o.elapsed))
    return rows


def _chain_rows(cfg: dict, start: int, stop: int) -> list[tuple]:
    params = chain_from(cfg)
    rows = []
    for j in range(start, stop):
        r = chainsim.run_trial(params, chainsim.trial_rng(cfg["seed"], j), cfg["mode"])
        rows.append((j, r.rounds_phase1, r.rounds_phase2, r.protocol_repeats, r.first_pass_rounds,
                     r.total_time, r.end_state.value, r.correction))
    return rows


def _rows_job(args):
    level, cfg, start, stop = args
    return (_link_rows if level == "link" else _chain_rows)(cfg, start, stop)


def run_trials(cfg: dict, workers: int = 1) -> list[tuple]:
    """All trial rows in index order; trial ``j`` always draws from stream ``j``."""
    n = cfg["trials"]
    if workers <= 1:
        return _rows_job((cfg["level"], cfg, 0, n))
    chunk = max(1, math.ceil(n / (4 * workers)))
    jobs = [(cfg["level"], cfg, a, min(n, a + chunk)) for a in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [row for part in pool.map(_rows_job, jobs) for row in part]


def _z(observed: float, expected: float, sem: float) -> float:
    return (observed - expected) / sem if sem > 0 else (0.0 if observed == expected else math.inf)


def link_summary(cfg: dict, rows: list[tuple]) -> list[tuple[str, object]]:
    noise = noise_from(cfg)
    n = len(rows)
    k = sum(bool(r[1]) for r in rows)
    frac = k / n
    predicted = lp.predicted_success_probability(noise)
    sem = math.sqrt(predicted * (1 - predicted) / n)
    p0 = analytics.p0(noise).p0
    out = [("trials", n), ("successes", k), ("success_fraction", frac),
           ("predicted_success", predicted), ("z_predicted", _z(frac, predicted, sem)),
           ("analytic_p0", p0), ("rel_diff_p0", frac / p0 - 1 if p0 > 0 else math.nan)]
    causes: dict[str, int] = {}
    for r in rows:
        if not r[1]:
            causes[r[2]] = causes.get(r[2], 0) + 1
    out += [(f"failures_{c}", causes[c]) for c in sorted(causes)]
    return out


def chain_summary(cfg: dict, rows: list[tuple]) -> list[tuple[str, object]]:
    params = chain_from(cfg)
    n = len(rows)
    first = np.array([r[4] for r in rows], dtype=float)
    times = np.array([r[5] for r in rows], dtype=float)
    repeats = sum(r[3] for r in rows)
    ddof = 1 if n > 1 else 0
    n_bar = analytics.n_bar(analytics.chain_p0(params), params.n_nodes).n_bar
    T = analytics.total_time(params)
    p1 = analytics.p1(params.n_nodes, params.noise)
    swap_frac = n / repeats
    swap_sem = math.sqrt(p1 * (1 - p1) / repeats)
    return [
        ("trials", n),
        ("mean_first_pass_rounds", float(first.mean())),
        ("sem_first_pass_rounds", math.sqrt(first.var(ddof=ddof) / n)),
        ("n_bar", n_bar),
        ("z_rounds", _z(float(first.mean()), n_bar, math.sqrt(first.var(ddof=ddof) / n))),
        ("mean_total_time_s", float(times.mean())),
        ("sem_total_time_s", math.sqrt(times.var(ddof=ddof) / n)),
        ("T_s", T),
        ("z_time", _z(float(times.mean()), T, math.sqrt(times.var(ddof=ddof) / n))),
        ("swap_attempts", repeats),
        ("swap_success_fraction", swap_frac),
        ("p1", p1),
        ("z_swap", _z(swap_frac, p1, swap_sem)),
    ]


def _check_writable(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if path.is_dir():
        raise ConfigError(f"output path {path} is a directory")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write to {path}")
    if path.exists() and not os.access(path, os.W_OK):
        raise ConfigError(f"cannot write to {path}")


def summary_path(out: Path) -> Path:
    return out.with_name(out.name + ".summary")


def cmd_simulate(cfg: dict, out: Path | None, workers: int = 1) -> int:
    if cfg["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    out = Path(f"simulate_{cfg['level']}.csv") if out is None else out
    _check_writable(out)
    _check_writable(summary_path(out))
    # validate the physics before spending time on trials
    chain_from(cfg)
    rows = run_trials(cfg, workers)
    if cfg["level"] == "link":
        _write_csv(out, LINK_HEADER, rows)
        results = link_summary(cfg, rows)
    else:
        _write_csv(out, CHAIN_HEADER, rows)
        results = chain_summary(cfg, rows)
    text = format_config(cfg) + _report([(RESULT_PREFIX + k, v) for k, v in results])
    summary_path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# -- figures ----------------------------------------------------------------

FIG3_GRID = tuple(float(x) for x in range(100, 2001, 50))
FIG_P0S = (0.1, 0.2, 0.3)


def cmd_figures(cfg: dict, out: Path | None) -> int:
    out = Path("figures") if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    noise = noise_from(cfg)
    L, direct, protocol = analytics.fig3_series(16, FIG3_GRID, noise, cfg["chi_r_hz"])
    _write_csv(out / "fig3.csv", ("L_km", "log10_direct_s", "log10_protocol_s"), zip(L, direct, protocol))
    n, curves = analytics.fig_a1_series(1000, FIG_P0S)
    _write_csv(out / "figA1.csv", ("n",) + tuple(f"p_K_p0={p:g}" for p in FIG_P0S),
               zip(n, *(curves[p] for p in FIG_P0S)))
    N, series = analytics.fig_a2_series(range(4, 65, 2), FIG_P0S)
    cols = [c for p in FIG_P0S for c in series[p]]
    header = ("N",) + tuple(f"{name}_p0={p:g}" for p in FIG_P0S for name in ("n_bar", "two_n_max"))
    _write_csv(out / "figA2.csv", header, zip(N, *cols))
    sys.stdout.write(f"wrote {out / 'fig3.csv'}\nwrote {out / 'figA1.csv'}\nwrote {out / 'figA2.csv'}\n")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


FLAG_KEYS = ("n_nodes", "l0_km", "l_att_km", "gamma_hz", "omega_rad_s", "eta_ion", "chi_r_hz",
             "seed", "trials", "mode")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value file")
    common.add_argument("--out", type=Path, help="output file or directory")
    for name in FLAG_KEYS:
        key = _BY_NAME[name]
        kwargs = {"choices": ("fast", "faithful")} if name == "mode" else {"type": key.parse}
        common.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=key.help, **kwargs)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")

    parser = _Parser(prog="rydrepeater", description="Rydberg-ensemble quantum repeater model")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analytics", parents=[common], help="closed-form report")
    p = sub.add_parser("verify", parents=[common], help="noiseless state and swap checks")
    p.add_argument("--mutate-plr", action="store_true", help="flip one sign of P_LR (should fail)")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo runs")
    p.add_argument("--level", choices=("link", "chain"), default=None)
    p.add_argument("--workers", type=int, default=1)
    sub.add_parser("figures", parents=[common], help="plot-ready CSV series")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = defaults()
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        cfg.update(parse_config(text, str(args.config)))
    cfg.update(parse_config("\n".join(args.set), "--set"))
    for name in FLAG_KEYS + ("level",):
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "analytics":
            return cmd_analytics(cfg, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.mutate_plr)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.workers)
        return cmd_figures(cfg, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"rydrepeater: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
