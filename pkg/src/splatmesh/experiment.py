"""Experiment presets, oracle verification, and report files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .arch import TABLE_COLUMNS, KernelCostProfile
from .errors import CapacityError, ConfigurationError, HeightError, InvalidInputError
from .kernels.ops import compute_features
from .kernels.staged import run_staged
from .kernels.types import CameraParams
from .sim import SimReport, method_config, placement_for, simulate, with_overrides
from .workload import GaussianFile

VERIFY_TOLERANCE = 1e-5
DEFAULT_WORKLOAD = 10_000

SUMMARY_COLUMNS = (
    "preset", "method", "n_units", "mode", "profile_source", "interface",
    "n_gaussians", "total_cycles", "throughput_mb_s", "speedup_vs_naive1",
    "bottleneck_kernel", "effective_parallel_efficiency",
)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    method: str
    unit_counts: tuple
    profile_source: str = "calibrated"
    n_gaussians: int = DEFAULT_WORKLOAD
    seed: int = 0


def _grid_presets() -> dict:
    cells = [("naive", 1), ("stream", 1)] + [("window", n) for n in (1, 4, 8, 25, 50)]
    return {f"{m}-{n}": ExperimentPreset(f"{m}-{n}", m, (n,)) for m, n in cells}


PRESETS = _grid_presets()
# the throughput-comparison grid: one row per preset
SWEEPS = {"full": tuple(PRESETS.values())}


def get_presets(name: str) -> tuple:
    if name in SWEEPS:
        return SWEEPS[name]
    if name in PRESETS:
        return (PRESETS[name],)
    raise ConfigurationError(f"unknown preset {name!r}; known: {sorted(PRESETS) + sorted(SWEEPS)}")


# -- verification ------------------------------------------------------------


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Max abs difference scaled by the oracle field's max magnitude."""
    scale = float(np.max(np.abs(b)))
    diff = float(np.max(np.abs(a - b)))
    if scale == 0.0:
        return diff
    return diff / scale


@dataclass
class VerifyReport:
    n_records: int
    n_checked: int
    max_deviation: dict
    invalid: list = field(default_factory=list)
    culled: int = 0
    degenerate: int = 0
    tolerance: float = VERIFY_TOLERANCE

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.max_deviation.values())

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["passed"] = self.passed
        return doc

    def summary(self) -> str:
        lines = [f"{self.n_checked}/{self.n_records} records checked, tolerance {self.tolerance:g}"]
        for name, dev in self.max_deviation.items():
            lines.append(f"  {name:<6} max deviation {dev:.3e}")
        for index, msg in self.invalid:
            lines.append(f"  record {index}: invalid input: {msg}")
        lines.append(f"  culled {self.culled}, degenerate {self.degenerate}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify(gfile: GaussianFile, cam: CameraParams, tolerance: float = VERIFY_TOLERANCE) -> VerifyReport:
    """Compare the 7-kernel vectorized path against the scalar oracle, record by record."""
    worst: dict = {}
    invalid = []
    checked = culled = degenerate = 0
    for i in range(gfile.count):
        try:
            g = gfile.gaussian(i)
        except InvalidInputError as exc:
            invalid.append((i, str(exc)))
            continue
        ref = compute_features(g, cam)
        out = run_staged(g, cam, partitioned=True, vectorized=True)
        for name, value in out.fields().items():
            dev = _deviation(value, ref.fields()[name])
            worst[name] = max(worst.get(name, 0.0), dev)
        checked += 1
        culled += ref.culled
        degenerate += ref.degenerate
    return VerifyReport(gfile.count, checked, worst, invalid, culled, degenerate, tolerance)


# -- experiments ---------------------------------------------------------------


@dataclass
class ExperimentResult:
    rows: list
    reports: list

    def to_dict(self) -> dict:
        return {
            "schema": "splatmesh.experiment/1",
            "rows": self.rows,
            "reports": [r.to_dict() for r in self.reports],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _run_cell(preset: ExperimentPreset, n_units: int, mode: str, overrides: dict) -> SimReport:
    cfg = method_config(
        preset.method,
        n_units,
        profile_source=preset.profile_source,
        mode=mode,
        n_gaussians=preset.n_gaussians,
        seed=preset.seed,
        fifo_depth=overrides.get("fifo_depth"),
        external_cap=overrides.get("external_cap"),
        transfer=overrides.get("transfer", True),
        jitter=overrides.get("jitter", False),
        pipelined=overrides.get("pipelined", True),
    )
    if overrides.get("profile") is not None:
        cfg = with_overrides(cfg, profile=overrides["profile"])
    try:
        placement = placement_for(cfg)
    except (CapacityError, HeightError) as exc:
        raise type(exc)(f"preset {preset.name!r}: {exc}") from None
    return simulate(cfg, placement)


def run_presets(presets, modes=("analytic", "event"), **overrides) -> ExperimentResult:
    """Simulate every preset cell in every mode, with speedup over a matching naive-1 run.

    ``overrides``: ``fifo_depth``, ``external_cap`` (bytes/s), ``transfer``,
    ``jitter``, ``pipelined``, ``profile`` (a :class:`KernelCostProfile`
    replacing the preset's own).
    """
    rows, reports = [], []
    baselines: dict = {}
    for preset in presets:
        for n in preset.unit_counts:
            for mode in modes:
                report = _run_cell(preset, n, mode, overrides)
                key = (mode, preset.n_gaussians, preset.seed, preset.profile_source)
                if key not in baselines:
                    base = ExperimentPreset("naive-1", "naive", (1,), preset.profile_source, preset.n_gaussians, preset.seed)
                    base_overrides = {k: v for k, v in overrides.items() if k != "profile"}
                    baselines[key] = _run_cell(base, 1, mode, base_overrides)
                speedup = report.throughput_bytes_per_sec / baselines[key].throughput_bytes_per_sec
                rows.append(
                    {
                        "preset": preset.name,
                        "method": preset.method,
                        "n_units": n,
                        "mode": mode,
                        "profile_source": report.profile_source,
                        "interface": report.interface,
                        "n_gaussians": report.n_gaussians,
                        "total_cycles": report.total_cycles,
                        "throughput_mb_s": report.throughput_mb_per_sec,
                        "speedup_vs_naive1": speedup,
                        "bottleneck_kernel": report.bottleneck_kernel,
                        "effective_parallel_efficiency": report.effective_parallel_efficiency,
                    }
                )
                reports.append(report)
    return ExperimentResult(rows, reports)


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(row[k]) for k in SUMMARY_COLUMNS})
    return buf.getvalue()


def rows_to_markdown(rows: list) -> str:
    cols = ("preset", "mode", "throughput_mb_s", "speedup_vs_naive1", "bottleneck_kernel")
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for row in rows:
        lines.append("| " + " | ".join(_cell(row[c], 2) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def _cell(v, digits: int = 6) -> str:
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def kernel_table(reports: list) -> str:
    """Markdown table shaped like the per-kernel cycle comparison: Avg and min-max per method.

    ``profile`` rows are the cost profile fed to the simulator; ``event`` rows
    are the per-kernel cycles the event model observed (blocking included
    for stream links) for the first event run of that method.
    """
    header = "| Method | Source | Metric | " + " | ".join(TABLE_COLUMNS) + " |"
    lines = [header, "|" + "---|" * (len(TABLE_COLUMNS) + 3)]
    seen = set()
    for r in reports:
        for origin, stats in (("profile", r.profile), ("event", r.kernels)):
            if origin == "event" and r.mode != "event":
                continue
            key = (r.method, r.profile_source, origin)
            if key in seen:
                continue
            seen.add(key)
            label = f"| {r.method} ({r.profile_source}) | {origin} |"
            avg = [_num(stats[k]["avg"]) if k in stats else "-" for k in TABLE_COLUMNS]
            span = [f"{stats[k]['min']}-{stats[k]['max']}" if k in stats else "-" for k in TABLE_COLUMNS]
            lines.append(f"{label} Avg | " + " | ".join(avg) + " |")
            lines.append(f"{label} min-max | " + " | ".join(span) + " |")
    return "\n".join(lines) + "\n"


def _num(v) -> str:
    if isinstance(v, float) and not v.is_integer():
        return f"{v:.1f}"
    return str(int(v))


def kernels_csv(reports: list) -> str:
    chunks = [r.to_csv() for r in reports]
    if not chunks:
        return ""
    header, _, _ = chunks[0].partition("\n")
    body = [c.partition("\n")[2] for c in chunks]
    return header + "\n" + "".join(body)


def run_experiment(presets, out, name: str | None = None, modes=("analytic", "event"), **overrides) -> dict:
    """Run presets and write ``<name>.json``, ``<name>.csv``, ``<name>_kernels.csv``, ``<name>_table.md``.

    Returns the mapping of artifact kind to written path.
    """
    if isinstance(presets, ExperimentPreset):
        presets = (presets,)
    presets = tuple(presets)
    name = name or (presets[0].name if len(presets) == 1 else "sweep")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_presets(presets, modes, **overrides)
    paths = {
        "json": out / f"{name}.json",
        "csv": out / f"{name}.csv",
        "kernels": out / f"{name}_kernels.csv",
        "table": out / f"{name}_table.md",
    }
    paths["json"].write_text(result.to_json() + "\n")
    paths["csv"].write_text(rows_to_csv(result.rows))
    paths["kernels"].write_text(kernels_csv(result.reports))
    paths["table"].write_text(kernel_table(result.reports))
    return paths


def report_from_json(path, fmt: str = "csv") -> str:
    doc = json.loads(Path(path).read_text())
    if "rows" not in doc:
        raise ConfigurationError(f"{path} is not an experiment report")
    if fmt == "csv":
        return rows_to_csv(doc["rows"])
    if fmt == "markdown":
        return rows_to_markdown(doc["rows"])
    raise ConfigurationError(f"unknown format {fmt!r}")


def load_profile_arg(value: str, method: str) -> KernelCostProfile | None:
    """``calibrated``/``analytic`` select a built-in source; anything else is a profile file."""
    if value in ("calibrated", "analytic"):
        return None
    path = Path(value)
    if not path.exists():
        raise ConfigurationError(f"profile {value!r} is neither a source name nor a file")
    return KernelCostProfile.load(path)
