import pytest

from splatmesh.arch import (
    NAIVE_KERNELS,
    PARTITIONED_KERNELS,
    MEASURED_CYCLES,
    ContentionModel,
    InterfaceSpec,
    KernelCost,
    KernelCostProfile,
    MeshConfig,
    PlioSpec,
    analytic_profile,
    calibrated_profile,
    method_interface,
    method_profile,
    transfer_cycles,
)
from splatmesh.errors import ConfigurationError
from splatmesh.kernels.staged import stage_op_counts


def test_mesh_defaults():
    m = MeshConfig()
    assert (m.rows, m.cols, m.tiles) == (8, 50, 400)
    assert m.local_mem_bytes == 32768
    with pytest.raises(ConfigurationError):
        MeshConfig(rows=0)


def test_transfer_cycles_by_hand():
    window, stream = InterfaceSpec("window"), InterfaceSpec("stream")
    # 236 bytes = 1888 bits: 4 cycles through two 256-bit loads, 8 through one store
    assert transfer_cycles(236, window, "load") == 4
    assert transfer_cycles(236, window, "store") == 8
    assert transfer_cycles(236, window) == 8
    assert transfer_cycles(236, stream) == 59
    assert transfer_cycles(0, stream) == 0
    with pytest.raises(ValueError):
        transfer_cycles(10, window, "sideways")


def test_interface_validation():
    with pytest.raises(ConfigurationError):
        InterfaceSpec("carrier-pigeon")
    with pytest.raises(ConfigurationError):
        InterfaceSpec(fifo_depth=0)
    assert method_interface("naive").kind == "stream"
    assert method_interface("window", 16).fifo_depth == 16


def test_plio_validation():
    with pytest.raises(ConfigurationError):
        PlioSpec(external_cap_bytes_per_sec=0)


def test_kernel_cost_validation():
    with pytest.raises(ConfigurationError):
        KernelCost(10, 11, 12)
    with pytest.raises(ConfigurationError):
        KernelCost(0, 0, 0)


@pytest.mark.parametrize("method", ["naive", "stream", "window"])
def test_calibrated_profiles_mirror_table(method):
    p = calibrated_profile(method)
    for k, (avg, lo, hi) in MEASURED_CYCLES[method].items():
        assert (p[k].avg, p[k].min, p[k].max) == (avg, lo, hi)
    assert p.bottleneck() == "color"
    assert p.kernels == (NAIVE_KERNELS if method == "naive" else PARTITIONED_KERNELS)


def test_profile_ini_round_trip(tmp_path):
    p = calibrated_profile("stream")
    path = tmp_path / "stream.ini"
    p.save(path)
    q = KernelCostProfile.load(path)
    assert q.costs == p.costs and q.name == p.name and q.source == p.source


def test_profile_rejects_unknown_kernel_set():
    with pytest.raises(ConfigurationError):
        KernelCostProfile("x", {"color": KernelCost.fixed(1)})
    with pytest.raises(ConfigurationError):
        KernelCostProfile.from_ini("[color]\navg = 1\nmin = 1\nmax = 1\n")


def test_analytic_profile_formula():
    counts = stage_op_counts(partitioned=True, vectorized=True)
    p = analytic_profile(counts)
    for k, c in counts.items():
        assert p[k].avg == c.scalar_ops + c.vector_cycles(8) + 20
    assert p.source == "analytic"


def test_analytic_profile_missing_kernel():
    counts = stage_op_counts(partitioned=True, vectorized=True)
    del counts["color"]
    with pytest.raises(ConfigurationError):
        analytic_profile(counts, kernels=PARTITIONED_KERNELS)


def test_analytic_profiles_keep_bottleneck_and_order():
    naive = method_profile("naive", "analytic")
    window = method_profile("window", "analytic")
    assert naive.bottleneck() == window.bottleneck() == "color"
    assert naive["color"].avg > window["color"].avg


def test_unknown_method_or_source():
    with pytest.raises(ConfigurationError):
        method_profile("warp")
    with pytest.raises(ConfigurationError):
        method_profile("window", "guess")


def test_contention_factor():
    m = ContentionModel(25, 0.01)
    assert m.factor(1) == m.factor(25) == 1.0
    assert m.factor(35) == pytest.approx(1 / 1.1)
    with pytest.raises(ConfigurationError):
        ContentionModel(0, 0.1)
