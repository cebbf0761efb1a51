"""Command-line runner: configuration, orchestration and run archives.

Configuration files are flat ``key = value`` lines with dotted keys::

    scenario.family = perturbed_lens
    scenario.n = 400
    scenario.amplitude = -0.45
    policy.dt_factor = 80
    stops.gap_min = 1e-4
    run.sample_every = 20
    run.frames_every = 5

Sections: ``scenario`` (family, n and family parameters), ``policy`` (step
policy fields), ``stops`` (stop thresholds), ``mesh`` (graph family:
``h_min``, ``ratio``), ``run`` (``sample_every``, ``frames_every``,
``g_every``, ``classify``, ``hamilton_rungs``) and, for ``sweep`` only,
``sweep.<dotted key> = v1, v2, ...`` giving the grid axes.

An archive directory holds ``config.txt`` (the resolved configuration),
``series.csv``, ``frames/frame_NNNNN.txt``, ``manifest.txt`` and, after
classification, ``report.txt``.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import flow, graph_flow, singularity
from .diagnostics import GRAPH_COLUMNS, SERIES_COLUMNS, huisken_functional
from .geometry import PlanarCurve
from .initial_data import (
    DEFAULTS,
    InvalidScenarioError,
    ScenarioSpec,
    bc_angles,
    build,
    shrinker_profile,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_config",
    "cmd_run",
    "cmd_classify",
    "cmd_shrinker",
    "cmd_sweep",
    "read_frame",
    "write_frame",
    "read_series",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_UNRESOLVED = 0, 2, 3, 4
ABORT_REASONS = ("dt_underflow", "collapse", "angle_drift", "mesh tangling", "max_steps")
RUN_DEFAULTS = {"sample_every": 10, "frames_every": 0, "g_every": 10, "classify": False,
                "hamilton_rungs": 8}
MESH_DEFAULTS = {"h_min": 5e-6, "ratio": 1.03}


class ConfigError(ValueError):
    pass


def _value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return float("inf")
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    scenario: ScenarioSpec
    policy: object
    stops: object
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    mesh: dict = field(default_factory=lambda: dict(MESH_DEFAULTS))
    sweep: dict = field(default_factory=dict)

    @property
    def is_graph(self) -> bool:
        return self.scenario.family == "graph_example1"

    def items(self) -> list[tuple[str, object]]:
        """Fully resolved configuration as (dotted key, value) pairs."""
        out = [("scenario.family", self.scenario.family), ("scenario.n", self.scenario.n)]
        merged = dict(DEFAULTS[self.scenario.family], **self.scenario.params)
        out += [(f"scenario.{k}", merged[k]) for k in sorted(merged)]
        out += [(f"policy.{f.name}", getattr(self.policy, f.name)) for f in fields(self.policy)]
        out += [(f"stops.{f.name}", getattr(self.stops, f.name)) for f in fields(self.stops)]
        if self.is_graph:
            out += [(f"mesh.{k}", self.mesh[k]) for k in sorted(self.mesh)]
        out += [(f"run.{k}", self.run[k]) for k in sorted(self.run)]
        return out

    def text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.items())


def _build_dataclass(cls, values: dict, section: str):
    known = {f.name: f for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field (expected one of {sorted(known)})")
    kwargs = {}
    for key, value in values.items():
        default = known[key].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{section}.{key}: expected true or false, got {value!r}")
        elif isinstance(default, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
            if isinstance(default, int):
                if not float(value).is_integer() or value < 0:
                    raise ConfigError(f"{section}.{key}: expected a nonnegative integer, got {value!r}")
                value = int(value)
            elif not value > 0:
                raise ConfigError(f"{section}.{key}: must be positive, got {value!r}")
            else:
                value = float(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse flat dotted ``key = value`` text into a ``RunConfig``."""
    sections = {"scenario": {}, "policy": {}, "stops": {}, "run": {}, "mesh": {}, "sweep": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        head, _, rest = key.partition(".")
        if head not in sections or not rest:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if head == "sweep":
            sections["sweep"][rest] = [_value(v) for v in value.split(",") if v.strip()]
        else:
            sections[head][rest] = _value(value)

    scen = dict(sections["scenario"])
    family = scen.pop("family", None)
    if family is None:
        raise ConfigError("scenario.family: missing")
    n = scen.pop("n", 1600 if family == "graph_example1" else 400)
    if not isinstance(n, int):
        raise ConfigError(f"scenario.n: expected an integer, got {n!r}")
    try:
        spec = ScenarioSpec(family, scen, n)
    except InvalidScenarioError as exc:
        raise ConfigError(f"scenario: {exc}") from None
    graph = family == "graph_example1"
    policy = _build_dataclass(graph_flow.GraphPolicy if graph else flow.StepPolicy,
                              sections["policy"], "policy")
    stops = _build_dataclass(graph_flow.GraphStops if graph else flow.Stops,
                             sections["stops"], "stops")
    run = dict(RUN_DEFAULTS)
    for key, value in sections["run"].items():
        if key not in run:
            raise ConfigError(f"run.{key}: unknown field (expected one of {sorted(run)})")
        if isinstance(run[key], bool) != isinstance(value, bool):
            raise ConfigError(f"run.{key}: wrong type {value!r}")
        if not isinstance(value, bool) and (not isinstance(value, int) or value < 0):
            raise ConfigError(f"run.{key}: expected a nonnegative integer, got {value!r}")
        run[key] = value
    if run["sample_every"] < 1:
        raise ConfigError("run.sample_every: must be at least 1")
    mesh = dict(MESH_DEFAULTS)
    for key, value in sections["mesh"].items():
        if key not in mesh:
            raise ConfigError(f"mesh.{key}: unknown field (expected one of {sorted(mesh)})")
        if not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"mesh.{key}: expected a positive number, got {value!r}")
        mesh[key] = float(value)
    return RunConfig(spec, policy, stops, run, mesh, sections["sweep"])


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


# ------------------------------------------------------------------ archives

def write_frame(path, t: float, nodes) -> None:
    nodes = np.asarray(nodes, dtype=float)
    lines = [f"{len(nodes)} {t!r}"] + [f"{x!r} {y!r}" for x, y in nodes.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_frame(path) -> tuple[float, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    count, t = lines[0].split()
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=float)
    if len(nodes) != int(count):
        raise ValueError(f"{path}: header says {count} nodes, found {len(nodes)}")
    return float(t), nodes


def _cell(v) -> str:
    return "" if v is None else repr(float(v))


def write_series(path, records, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_cell(getattr(r, c)) for c in columns])


def read_series(path) -> list:
    """Rows of ``series.csv`` as records with attribute access."""
    from .diagnostics import DiagnosticsRecord

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        vals = {k: (float(v) if v != "" else None) for k, v in row.items()}
        out.append(DiagnosticsRecord(**vals))
    return out


def _write_kv(path, pairs) -> None:
    Path(path).write_text("".join(f"{k} = {_format(v)}\n" for k, v in pairs))


def _read_kv(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# ------------------------------------------------------------------ commands

def _simulate(cfg: RunConfig, frames_every: int):
    spec = cfg.scenario
    datum = build(spec)
    if cfg.is_graph:
        m = spec.n + spec.n % 2
        state = graph_flow.initial_state(datum, m, cfg.mesh["h_min"], cfg.mesh["ratio"])
        return graph_flow.run_graph(state, cfg.policy, cfg.stops, cfg.run["sample_every"],
                                    frames_every)
    state = flow.FlowState(datum, bc_angles=bc_angles(spec.family))
    return flow.run(state, cfg.policy, cfg.stops, cfg.run["sample_every"], frames_every,
                    cfg.run["g_every"])


def _fill_rescaled(records, halt_reason, frames=()):
    """Add rescaled_sup to every record and, at stored frames, the Gaussian
    weighted length of the type-I rescaled network."""
    try:
        est = singularity.estimate_T(records, halt_reason)
    except singularity.UnresolvedError:
        return records
    T = est.T_est
    early = [f for f in frames if f[0] < T]
    gauss = {}
    if early:
        for b in singularity.rescale_typeI(early, T):
            gauss[b.source_t] = huisken_functional(b.curve, network=True)
    return [r.with_(rescaled_sup=float(np.sqrt(2 * (T - r.t)) * r.max_abs_kappa),
                    huisken=gauss.get(r.t))
            if r.t < T else r for r in records]


def cmd_run(cfg: RunConfig, out, frames_every: int | None = None) -> int:
    """Run one scenario into the archive directory ``out``; returns the exit code."""
    out = Path(out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    every = cfg.run["frames_every"] if frames_every is None else frames_every
    cfg.run["frames_every"] = every
    (out / "config.txt").write_text(cfg.text())
    traj = _simulate(cfg, every)
    records = _fill_rescaled(traj.records, traj.halt_reason, traj.frames)
    columns = SERIES_COLUMNS + (GRAPH_COLUMNS if cfg.is_graph else ())
    write_series(out / "series.csv", records, columns)
    for old in (out / "frames").glob("frame_*.txt"):
        old.unlink()
    names = []
    for k, (t, nodes) in enumerate(traj.frames):
        name = f"frame_{k:05d}.txt"
        write_frame(out / "frames" / name, t, nodes)
        names.append(name)
    last = records[-1]
    pairs = [("family", cfg.scenario.family), ("halt_reason", traj.halt_reason),
             ("halt_time", last.t), ("steps", traj.steps), ("rows", len(records)),
             ("frames", len(names)), ("frame_files", " ".join(names)),
             ("wall_time", round(traj.wall_time, 3))]
    if cfg.is_graph and last.v_minus is not None:
        pairs += [("v_plus_final", last.v_plus), ("v_minus_final", last.v_minus)]
    _write_kv(out / "manifest.txt", pairs)
    if traj.halt_reason in ABORT_REASONS:
        return EXIT_ABORT
    if cfg.run["classify"]:
        return cmd_classify(out)
    return EXIT_OK


def load_archive(path):
    path = Path(path)
    manifest = _read_kv(path / "manifest.txt")
    records = read_series(path / "series.csv")
    names = manifest.get("frame_files", "").split()
    frames = [read_frame(path / "frames" / n) for n in names]
    return manifest, records, frames


def cmd_classify(path, hamilton_rungs: int | None = None) -> int:
    """Classify an archive and write ``report.txt``; returns the exit code."""
    path = Path(path)
    try:
        manifest, records, frames = load_archive(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot load archive {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not frames:
        print(f"error: archive {path} has no frames", file=sys.stderr)
        return EXIT_CONFIG
    cfg = _read_kv(path / "config.txt") if (path / "config.txt").exists() else {}
    if hamilton_rungs is None:
        hamilton_rungs = int(cfg.get("run.hamilton_rungs", RUN_DEFAULTS["hamilton_rungs"]))
    family = manifest.get("family", "")
    profile = shrinker_profile() if family in ("convex_lens", "perturbed_lens") else None
    halt = manifest.get("halt_reason", "")
    if len(frames) < 3:
        rep = singularity.SingularityReport("Unresolved", None, note="fewer than 3 frames")
    else:
        rep = singularity.classify(records, frames, halt, profile=profile,
                                   hamilton_rungs=hamilton_rungs if family == "graph_example1" else 0)
    pairs = [("verdict", rep.verdict), ("T_est", rep.T_est), ("drift", rep.drift),
             ("note", rep.note)]
    if rep.estimate is not None:
        e = rep.estimate
        pairs += [("T_area", e.T_area), ("T_fit", e.T_fit), ("T_halt", e.T_halt),
                  ("T_source", e.source), ("before_extinction", e.before_extinction),
                  ("halt_time", records[-1].t)]
    for key in ("rescaled_sup", "shrinker_distance", "translator_residual", "hamilton_mu"):
        if key in rep.evidence and len(rep.evidence[key]):
            vals = np.asarray(rep.evidence[key], dtype=float)
            pairs.append((f"{key}_last", float(vals[-1])))
            pairs.append((f"{key}_series", " ".join(repr(float(v)) for v in vals)))
    _write_kv(path / "report.txt", pairs)
    return EXIT_UNRESOLVED if rep.verdict == "Unresolved" else EXIT_OK


def cmd_shrinker(out, n: int = 400) -> int:
    """Solve the shrinker and write its node list with metadata lines."""
    prof = shrinker_profile()
    curve = prof.curve(n)
    meta = [("y0", prof.y0), ("half_length", prof.half_length), ("half_width", prof.half_width),
            ("residual", prof.residual), ("area", prof.area())]
    lines = [f"# {k} = {v!r}" for k, v in meta] + [f"{len(curve.nodes)} {0.0!r}"]
    lines += [f"{x!r} {y!r}" for x, y in curve.nodes.tolist()]
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def read_shrinker(path) -> tuple[dict, PlanarCurve]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") and "=" in line:
            k, v = line[1:].split("=", 1)
            meta[k.strip()] = float(v)
    return meta, PlanarCurve(read_frame(path)[1])


def convexification_time(records) -> float | None:
    """First sample time after which interior max kappa stays negative."""
    t = np.array([r.t for r in records])
    mk = np.array([r.max_kappa for r in records])
    bad = np.flatnonzero(mk >= 0)
    if bad.size == 0:
        return float(t[0])
    k = int(bad[-1]) + 1
    return float(t[k]) if k < t.size else None


def _sweep_cell(args):
    index, text, out = args
    cell = Path(out) / f"cell_{index:03d}"
    row = {"cell": cell.name, "halt_reason": "", "halt_time": "", "verdict": "",
           "convexification_time": "", "v_minus_final": "", "error": ""}
    try:
        cfg = parse_config(text)
        code = cmd_run(cfg, cell)
        manifest = _read_kv(cell / "manifest.txt")
        row["halt_reason"] = manifest["halt_reason"]
        row["halt_time"] = manifest["halt_time"]
        row["v_minus_final"] = manifest.get("v_minus_final", "")
        if code != EXIT_ABORT:
            cmd_classify(cell)
            row["verdict"] = _read_kv(cell / "report.txt")["verdict"]
        if cfg.scenario.family == "perturbed_lens":
            ct = convexification_time(read_series(cell / "series.csv"))
            row["convexification_time"] = "" if ct is None else repr(ct)
    except Exception as exc:  # recorded per cell; the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_cells(cfg_text: str) -> tuple[list[str], list[dict]]:
    """Expand ``sweep.*`` axes into per-cell config texts (cartesian product)."""
    base = parse_config(cfg_text)
    axes = sorted(base.sweep.items())
    lines = [ln for ln in cfg_text.splitlines() if not ln.strip().startswith("sweep.")]
    keys = [k for k, _ in axes]
    cells, params = [], []
    for combo in itertools.product(*[v for _, v in axes]):
        extra = [f"{k} = {_format(v)}" for k, v in zip(keys, combo)]
        cells.append("\n".join(lines + extra) + "\n")
        params.append(dict(zip(keys, combo)))
    return cells, params


def cmd_sweep(cfg_text: str, out, parallel: int = 1) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cells, params = sweep_cells(cfg_text)
    jobs = [(i, text, str(out)) for i, text in enumerate(cells)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    keys = sorted({k for p in params for k in p})
    columns = ["cell", *keys, "halt_reason", "halt_time", "verdict", "convexification_time",
               "v_minus_final", "error"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row, p in zip(rows, params):
            row.update({k: _format(v) for k, v in p.items()})
            w.writerow([row.get(c, "") for c in columns])
    return EXIT_OK


# ------------------------------------------------------------------ entry

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lensflow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "graph-run"):
        p = sub.add_parser(name, help="run one scenario into an archive directory")
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--frames-every", type=int, default=None)
    p = sub.add_parser("classify", help="classify the singularity of an archive")
    p.add_argument("archive")
    p = sub.add_parser("shrinker", help="solve the shrinker profile and write it")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=400)
    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command in ("run", "graph-run"):
            cfg = load_config(args.config)
            if args.command == "graph-run" and not cfg.is_graph:
                raise ConfigError("scenario.family: graph-run needs graph_example1")
            if args.frames_every is not None and args.frames_every < 0:
                raise ConfigError("--frames-every: must be nonnegative")
            return cmd_run(cfg, args.out, args.frames_every)
        if args.command == "classify":
            return cmd_classify(args.archive)
        if args.command == "shrinker":
            return cmd_shrinker(args.out, args.n)
        if args.command == "sweep":
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            parse_config(text)
            return cmd_sweep(text, args.out, args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
