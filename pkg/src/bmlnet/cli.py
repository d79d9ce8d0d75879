"""Command-line entry point: ``bml simulate|verify|spectrum|sweep|render``.

Exit codes: 0 success, 1 usage or configuration error, 2 budget exceeded,
3 counterexample found.  Every payload file gets a ``<file>.meta.json``
sidecar holding the timestamp, runtime and RNG algorithm; payloads
themselves carry nothing time-dependent.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .buslaev import spectrum
from .diagonal import FreeMovementMonitor, verify_theorem1
from .dynamics import SwitchPolicy, mean_velocity, simulate
from .errors import BMLError, BudgetExceededError, CounterexampleError
from .lattice import LatticeShape, random_configuration
from .render import write_frames
from .rng import make_rng, rng_metadata
from .serialize import REPORT_SCHEMA, config_from_dict, dumps, steps_csv, steps_jsonl, sweep_csv
from .sweep import SweepSpec, resolve_m, run_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_COUNTEREXAMPLE = 3

DEFAULTS = {
    "shape": None,
    "m": None,
    "q": 0.0,
    "seed": 0,
    "steps": None,
    "out": None,
    "format": "csv",
    "workers": 1,
    "budget": None,
    "init": None,
    "override_hypothesis": False,
    "switch_samples": 16,
    "mode": "exhaustive",
    "samples": 1000,
    "style": "ascii",
    "scale": 1,
    "m_grid": None,
    "q_grid": "0",
    "trajectories": 8,
    "tail": 0.25,
}

STEP_DEFAULTS = {"simulate": 100, "verify": 10_000, "render": 10, "sweep": 1000, "spectrum": None}


class UsageError(BMLError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    shape: LatticeShape
    m: int | None
    q: float
    seed: int
    steps: int | None
    out: str | None
    format: str
    workers: int
    options: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return {
            "command": self.command, "shape": str(self.shape), "m": self.m, "q": self.q,
            "seed": self.seed, "steps": self.steps, "format": self.format, **self.options,
        }


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag values; flags given here override it")
    p.add_argument("--shape", help="lattice dims, e.g. 4x4 or 2x2x2")
    p.add_argument("-m", "--particles", dest="m", help="particle count, or density in (0,1)")
    p.add_argument("--q", type=float, help="type switching probability per step, 0 <= q < 1")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--workers", type=int)
    p.add_argument("--budget", type=int, help="cap on enumerated states")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one trajectory and write per-step records")
    _common(p)
    p.add_argument("--init", help="JSON configuration file for the initial state")

    p = sub.add_parser("verify", help="exhaustively check free movement for m <= d/2")
    _common(p)
    p.add_argument("--override-hypothesis", action="store_true", default=None)
    p.add_argument("--switch-samples", type=int)

    p = sub.add_parser("spectrum", help="long-run velocity set of the q = 0 system")
    _common(p)
    p.add_argument("--mode", choices=["exhaustive", "sampled"])
    p.add_argument("--samples", type=int)

    p = sub.add_parser("sweep", help="velocity/free-movement table over densities and q")
    _common(p)
    p.add_argument("--m-grid", help="comma list of counts/densities, or a range like 1-15")
    p.add_argument("--q-grid", help="comma list of q values")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--tail", type=float, help="fraction of steps in the velocity tail window")

    p = sub.add_parser("render", help="write ASCII or PPM frames of a 2-D trajectory")
    _common(p)
    p.add_argument("--init")
    p.add_argument("--style", choices=["ascii", "ppm"])
    p.add_argument("--scale", type=int)
    return parser


def _merge(args: argparse.Namespace) -> dict:
    values = dict(DEFAULTS)
    values["steps"] = STEP_DEFAULTS[args.command]
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a flat JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key == "particles":
                key = "m"
            if key not in values:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = value
    for key, value in vars(args).items():
        if key in values and value is not None:
            values[key] = value
    return values


def make_run_config(args: argparse.Namespace) -> RunConfig:
    v = _merge(args)
    if v["shape"] is None:
        if v["init"]:
            v["shape"] = json.loads(Path(v["init"]).read_text())["shape"]
        else:
            raise UsageError("--shape is required")
    shape = LatticeShape.parse(str(v["shape"]))
    q = float(v["q"])
    if not 0.0 <= q < 1.0:
        raise UsageError(f"q must lie in [0, 1), got {q}")
    m = v["m"]
    if m is not None and args.command != "sweep":
        m = resolve_m(m, shape.cell_count)
        if not 1 <= m <= shape.cell_count:
            raise UsageError(f"m={m} outside [1, {shape.cell_count}]")
    elif m is None and args.command not in ("sweep",) and not v["init"]:
        raise UsageError("-m/--particles is required")
    if v["steps"] is not None and v["steps"] < 0:
        raise UsageError("--steps must be non-negative")
    if int(v["workers"]) < 1:
        raise UsageError("--workers must be positive")
    if int(v["scale"]) < 1:
        raise UsageError("--scale must be positive")
    options = {k: v[k] for k in DEFAULTS if k not in ("shape", "m", "q", "seed", "steps", "out", "format", "workers")}
    return RunConfig(args.command, shape, m, q, int(v["seed"]), v["steps"], v["out"], v["format"],
                     int(v["workers"]), options)


def _write_payload(path: str | Path, content: str | bytes, cfg: RunConfig, extra: dict | None = None) -> None:
    path = Path(path)
    if isinstance(content, bytes):
        path.write_bytes(content)
    else:
        path.write_text(content)
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "rng": rng_metadata(),
        "package": __version__,
        "config": cfg.resolved(),
        **(extra or {}),
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _initial(cfg: RunConfig):
    if cfg.options.get("init"):
        config = config_from_dict(json.loads(Path(cfg.options["init"]).read_text()))
        if config.shape != cfg.shape:
            raise UsageError(f"initial state shape {config.shape} differs from --shape {cfg.shape}")
        return config
    return random_configuration(cfg.shape, cfg.m, rng=make_rng(cfg.seed, 1), allow_full=True)


def cmd_simulate(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    config = _initial(cfg)
    policy = SwitchPolicy(cfg.q)
    mon = FreeMovementMonitor(config, policy.deterministic, stop=False)
    start = time.perf_counter()
    traj = simulate(config, policy, cfg.steps, cfg.seed, [mon])
    runtime = time.perf_counter() - start
    body = steps_csv(traj.stats) if cfg.format == "csv" else steps_jsonl(traj.stats)
    onset = mon.onset
    summary = {
        "shape": str(cfg.shape), "m": config.m, "q": cfg.q, "steps": traj.steps,
        "mean_velocity": mean_velocity(traj) if traj.steps else None,
        "final_velocity": traj.stats[-1].velocity_instant if traj.steps else None,
        "free_onset": onset,
    }
    text = (
        f"shape {summary['shape']} m {summary['m']} q {cfg.q:g} steps {traj.steps}\n"
        f"mean velocity {summary['mean_velocity']}\n"
        f"final velocity {summary['final_velocity']}\n"
        f"free movement onset {'none' if onset is None else onset}\n"
    )
    if cfg.out:
        _write_payload(cfg.out, body, cfg, {"runtime": runtime, "summary": summary})
        stdout.write(text)
    else:
        stdout.write(body)
        sys.stderr.write(text)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    opts = cfg.options
    policy = SwitchPolicy(cfg.q)
    kw = {} if opts["budget"] is None else {"budget": int(opts["budget"])}
    override = bool(opts["override_hypothesis"])
    try:
        report = verify_theorem1(
            cfg.shape, cfg.m, policy, override_hypothesis=override,
            switch_samples=int(opts["switch_samples"]), t_max=cfg.steps, seed=cfg.seed,
            workers=cfg.workers, **kw,
        )
        code = EXIT_OK
    except CounterexampleError as exc:
        report, code = exc.report, EXIT_COUNTEREXAMPLE
    if override and report.within_hypothesis and not report.all_free:
        code = EXIT_COUNTEREXAMPLE
    doc = {"schema": REPORT_SCHEMA, "kind": "verification", **report.payload()}
    text = dumps(doc)
    if cfg.out:
        _write_payload(cfg.out, text, cfg, {"runtime": report.runtime})
    else:
        stdout.write(text)
    status = "all free" if report.all_free else f"{report.nonfree_states} not free"
    sys.stderr.write(
        f"{report.shape} m={report.m} d={report.d} q={report.q:g}: {report.realizations} runs, {status}\n"
    )
    return code


def format_value_set(values) -> str:
    return "{" + ", ".join(str(v) for v in values) + "}"


def cmd_spectrum(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if cfg.q != 0.0:
        raise UsageError("the spectrum is defined for the deterministic system only; use --q 0")
    opts = cfg.options
    kw = {} if opts["budget"] is None else {"budget": int(opts["budget"])}
    start = time.perf_counter()
    rep = spectrum(cfg.shape, cfg.m, opts["mode"], cfg.seed, int(opts["samples"]), workers=cfg.workers, **kw)
    runtime = time.perf_counter() - start
    if cfg.out:
        _write_payload(cfg.out, dumps(rep.payload()), cfg, {"runtime": runtime})
    stdout.write(format_value_set(rep.values) + "\n")
    return EXIT_OK


def parse_m_grid(text: str, cells: int) -> tuple[int, ...]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part and "." not in part:
            lo, hi = (int(v) for v in part.split("-"))
            out.extend(range(lo, hi + 1))
        else:
            out.append(resolve_m(part, cells))
    return tuple(out)


def cmd_sweep(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    opts = cfg.options
    cells = cfg.shape.cell_count
    grid = opts["m_grid"] if opts["m_grid"] is not None else cfg.m
    if grid is None:
        raise UsageError("--m-grid (or -m) is required")
    try:
        spec = SweepSpec(
            cfg.shape, parse_m_grid(grid, cells),
            tuple(float(v) for v in str(opts["q_grid"]).split(",")),
            int(opts["trajectories"]), int(cfg.steps), cfg.seed, float(opts["tail"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    start = time.perf_counter()
    rows = run_sweep(spec, workers=cfg.workers)
    body = sweep_csv(rows)
    if cfg.out:
        _write_payload(cfg.out, body, cfg, {"runtime": time.perf_counter() - start})
    else:
        stdout.write(body)
    return EXIT_OK


def cmd_render(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if cfg.shape.n != 2:
        raise UsageError(f"render needs a 2-D lattice, got {cfg.shape}")
    if not cfg.out:
        raise UsageError("--out directory is required for render")
    config = _initial(cfg)
    traj = simulate(config, SwitchPolicy(cfg.q), cfg.steps, cfg.seed, snapshot_stride=1)
    frames = [traj.snapshots[t] for t in range(traj.steps + 1)]
    try:
        paths = write_frames(frames, cfg.out, cfg.options["style"], int(cfg.options["scale"]))
    except OSError as exc:
        raise UsageError(f"cannot write frames to {cfg.out}: {exc}") from None
    stdout.write(f"wrote {len(paths)} frames to {cfg.out}\n")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_run_config(args)
        return COMMANDS[cfg.command](cfg)
    except BudgetExceededError as exc:
        sys.stderr.write(f"bml: budget exceeded: {exc}\n")
        return EXIT_BUDGET
    except (BMLError, ValueError, OSError) as exc:
        sys.stderr.write(f"bml: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
