"""Acceptance criteria A1-A11, one test each, each logging a PASS/FAIL line."""

import hashlib
import time

import numpy as np
from oracles import batch_rotations, brute_force_color, fd_jacobian, random_unit_vectors

from splatmesh.arch import TABLE_COLUMNS, InterfaceSpec, method_profile
from splatmesh.cli import main
from splatmesh.errors import CapacityError
from splatmesh.experiment import PRESETS, ExperimentPreset, run_experiment
from splatmesh.kernels import (
    LaneVector,
    compute_features,
    cov3d_naive,
    cov3d_vectorized,
    jacobian,
    quat_to_rotation,
    sh_basis,
    sh_color,
)
from splatmesh.mapper import build_task_graph, place
from splatmesh.sim import SimConfig, method_config, simulate
from splatmesh.workload import GaussianFile, default_camera, generate

WINDOW_UNITS = (1, 4, 8, 25, 50)


def test_a1_oracle_equivalence(acceptance):
    n = 100_000
    rng = np.random.default_rng(2024)
    R = batch_rotations(rng.normal(size=(n, 4)))
    s = 10.0 ** rng.uniform(-2.0, 0.0, size=(n, 3))
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(n):
        Ri = R[i]
        ref = cov3d_naive(Ri, s[i]).as_tuple()
        got = cov3d_vectorized(LaneVector(Ri[0]), LaneVector(Ri[1]), LaneVector(Ri[2]), LaneVector(s[i])).as_tuple()
        scale = max(abs(v) for v in ref)
        dev = max(abs(a - b) for a, b in zip(got, ref)) / scale
        if dev > worst:
            worst = dev
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 10.0
    acceptance("A1", ok, f"max relative deviation {worst:.2e} over {n} Gaussians in {elapsed:.1f} s")
    assert ok


def test_a2_covariance_properties(acceptance):
    cam = default_camera()
    gf = generate(10_000, seed=7)
    worst_sym = worst_eig = worst_inv = 0.0
    checked_inv = 0
    for i in range(gf.count):
        g = gf.gaussian(i)
        out = compute_features(g, cam)
        S = cov3d_naive(quat_to_rotation(g.rotation), g.scale).matrix()
        S2 = out.cov2d.matrix()
        for M in (S, S2):
            worst_sym = max(worst_sym, float(np.max(np.abs(M - M.T))))
            worst_eig = max(worst_eig, float(-np.min(np.linalg.eigvalsh(M)) / np.trace(M)))
        if out.cov2d.det > 1e-9:
            checked_inv += 1
            worst_inv = max(worst_inv, float(np.max(np.abs(out.cov2d.conic_matrix() @ S2 - np.eye(2)))))
    ok = worst_sym == 0.0 and worst_eig <= 1e-6 and worst_inv <= 1e-4 and checked_inv > 0
    acceptance(
        "A2", ok,
        f"asymmetry {worst_sym:.1e}, worst -eig/trace {worst_eig:.1e}, "
        f"conic*cov - I {worst_inv:.1e} over {checked_inv} invertible",
    )
    assert ok


def test_a3_jacobian(acceptance):
    rng = np.random.default_rng(3)
    n = 10_000
    z = rng.uniform(1.0, 50.0, n)
    fx, fy = 800.0, 800.0
    # inside a 90-degree frustum: |x|, |y| < z
    x = rng.uniform(-1.0, 1.0, n) * z
    y = rng.uniform(-1.0, 1.0, n) * z
    worst = 0.0
    for p in np.stack([x, y, z], axis=1):
        J = jacobian(p, (fx, fy))
        ref = fd_jacobian(p, (fx, fy))
        worst = max(worst, float(np.max(np.abs(J - ref)) / np.max(np.abs(ref))))
    ok = worst <= 1e-3
    acceptance("A3", ok, f"max relative deviation from central differences {worst:.2e} on {n} points")
    assert ok


def test_a4_spherical_harmonics(acceptance):
    rng = np.random.default_rng(4)
    dirs = random_unit_vectors(rng, 2000)
    worst = y00 = unsold = 0.0
    for d in dirs:
        sh = rng.normal(0.0, 0.5, 48)
        basis = sh_basis(d)
        worst = max(worst, float(np.max(np.abs(sh_color(sh, basis) - brute_force_color(sh, d)))))
        y00 = max(y00, abs(basis.values[0] - 0.5 / np.sqrt(np.pi)))
        unsold = max(unsold, abs(float(np.sum(basis.values ** 2)) - 4.0 / np.pi))
    ok = worst <= 1e-5 and y00 <= 1e-12 and unsold <= 1e-9
    acceptance("A4", ok, f"color deviation {worst:.1e}, Y00 deviation {y00:.1e}, square-sum deviation {unsold:.1e}")
    assert ok


TABLE_ROWS = {
    "naive": ("1822", "-", "1342", "-", "1180", "670", "276"),
    "stream": ("433", "262", "225", "135", "230", "79", "210"),
    "window": ("371", "83", "184", "130", "57", "89", "194"),
}


def _avg_row(text, method):
    for line in text.splitlines():
        cells = [c.strip() for c in line.strip("|").split("|")]
        if cells[:3] == [f"{method} (calibrated)", "profile", "Avg"]:
            return tuple(cells[3:])
    return None


def test_a5_calibration_fidelity(acceptance, capsys):
    got = {}
    for method in TABLE_ROWS:
        main(["run", "--method", method, "--profile", "calibrated", "--mode", "analytic", "--n-gaussians", "100"])
        got[method] = _avg_row(capsys.readouterr().out, method)
    ok = got == TABLE_ROWS
    acceptance("A5", ok, "per-kernel Avg rows (" + ", ".join(TABLE_COLUMNS) + "): " + "; ".join(
        f"{m} {' '.join(v or ())}" for m, v in got.items()))
    assert ok


def test_a6_in_tile_speedup(acceptance):
    t0 = time.perf_counter()
    naive = simulate(method_config("naive", 1, mode="analytic", transfer=True))
    window = simulate(method_config("window", 1, mode="analytic", transfer=True))
    ratio = window.throughput_bytes_per_sec / naive.throughput_bytes_per_sec
    elapsed = time.perf_counter() - t0
    ok = 4.5 <= ratio <= 7.5 and elapsed < 1.0
    acceptance("A6", ok, f"window-1 / naive-1 = {ratio:.2f} in {elapsed * 1000:.0f} ms")
    assert ok


def test_a7_scaling_shape(acceptance):
    base = simulate(method_config("window", 1))
    naive = simulate(method_config("naive", 1))
    worst, cap_free = 0.0, True
    for n in range(1, 26):
        r = simulate(method_config("window", n))
        cap_free &= r.throughput_bytes_per_sec < r.cap_bytes_per_sec
        worst = max(worst, abs(r.throughput_bytes_per_sec / (n * base.throughput_bytes_per_sec) - 1.0))
    w50 = simulate(method_config("window", 50))
    speedup = w50.throughput_bytes_per_sec / naive.throughput_bytes_per_sec
    ok = worst <= 0.10 and cap_free and 200 <= speedup <= 255
    acceptance("A7", ok, f"1-25 units linear within {worst:.1%} (cap non-binding: {cap_free}); window-50 / naive-1 = {speedup:.1f}")
    assert ok


def test_a8_interface_ordering(acceptance):
    failures = []
    for source in ("calibrated", "analytic"):
        for profile_method in ("stream", "window"):
            profile = method_profile(profile_method, source)
            for n in WINDOW_UNITS:
                for mode in ("analytic", "event"):
                    thr = {}
                    for kind in ("window", "stream"):
                        cfg = SimConfig(profile=profile, iface=InterfaceSpec(kind), n_units=n, mode=mode, n_gaussians=2000)
                        thr[kind] = simulate(cfg).throughput_bytes_per_sec
                    if thr["window"] < thr["stream"]:
                        failures.append((source, profile_method, n, mode))
    ok = not failures
    acceptance("A8", ok, f"window >= stream in all 40 cells; failures: {failures or 'none'}")
    assert ok


def test_a9_model_consistency(acceptance):
    worst, where = 0.0, ""
    for preset in PRESETS.values():
        n = preset.unit_counts[0]
        a = simulate(method_config(preset.method, n, mode="analytic", n_gaussians=preset.n_gaussians))
        e = simulate(method_config(preset.method, n, mode="event", fifo_depth=64, n_gaussians=preset.n_gaussians))
        dev = abs(e.throughput_bytes_per_sec / a.throughput_bytes_per_sec - 1.0)
        if dev > worst:
            worst, where = dev, preset.name
    shallow = simulate(method_config("stream", 1, mode="event", fifo_depth=2, n_gaussians=2000))
    spreads = {k: v["max"] - v["min"] for k, v in shallow.kernels.items()}
    spread_ok = any(s > 0 for s in spreads.values())
    ok = worst <= 0.05 and spread_ok
    acceptance(
        "A9", ok,
        f"event vs analytic worst {worst:.2%} ({where}); shallow-FIFO stream spreads "
        + ", ".join(f"{k} {v}" for k, v in spreads.items()),
    )
    assert ok


def test_a10_saturation_knob(acceptance):
    cap = 45.8e6
    worst, bad = 0.0, []
    for n in WINDOW_UNITS:
        for mode in ("analytic", "event"):
            r = simulate(method_config("window", n, mode=mode, external_cap=cap, n_gaussians=10_000))
            quantum = r.throughput_bytes_per_sec / r.n_gaussians
            err = abs(r.throughput_bytes_per_sec - cap)
            worst = max(worst, err / quantum)
            if err > quantum:
                bad.append((n, mode))
    ok = not bad
    acceptance("A10", ok, f"all window presets at 45.8 MB/s, worst error {worst:.2f} Gaussian-quanta")
    assert ok


def _digest(paths):
    return {k: hashlib.sha256(p.read_bytes()).hexdigest() for k, p in paths.items()}


def test_a11_determinism_and_formats(acceptance, tmp_path):
    preset = ExperimentPreset("window-8", "window", (8,), n_gaussians=2000, seed=5)
    first = _digest(run_experiment(preset, tmp_path / "a", jitter=True))
    second = _digest(run_experiment(preset, tmp_path / "b", jitter=True))
    reports_same = first == second
    gf = generate(1000, seed=5)
    round_trip = GaussianFile.from_bytes(gf.to_bytes()).to_bytes() == gf.to_bytes()
    graph = build_task_graph(partitioned=True)
    try:
        place(graph, 51)
        capacity = False
    except CapacityError:
        capacity = True
    tiles = place(graph, 50).tiles_used
    ok = reports_same and round_trip and capacity and tiles == 350
    acceptance(
        "A11", ok,
        f"repeat reports identical {reports_same}; file round trip {round_trip}; "
        f"N=51 capacity error {capacity}; N=50 uses {tiles} tiles",
    )
    assert ok
