import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import UNIT_SQUARE, random_rotation, random_shape
from oracles import naive_inner_product
from shape_currents.errors import DegeneratePointCloud, DimensionMismatch, EmptySample, ValidationError
from shape_currents.geometry import Polyline2D, ShapeAtoms, curve_to_atoms, mesh_to_atoms, transform_shape
from shape_currents.rkhs import (
    GramMatrix,
    KernelConfig,
    WeightedAtoms,
    distance,
    gram_matrix,
    inner_product,
    kernel_scalar,
    lambda_heuristic,
    mean_field,
    read_gram_binary,
    read_gram_csv,
    write_gram_binary,
    write_gram_csv,
)
from shape_currents.synth import gen_contour, gen_mesh

# closed forms of exp(-r^2 / lambda^2)
E_MINUS_1 = 0.36787944117144233
E_MINUS_100 = 3.720075976020836e-44


def atom(center, tau):
    return ShapeAtoms([center], [tau])


def test_kernel_scalar_values():
    cfg = KernelConfig(2.5, 2)
    assert kernel_scalar([1, 1], [1, 1], cfg) == 1.0
    assert kernel_scalar([0, 0], [2.5, 0], cfg) == pytest.approx(E_MINUS_1, rel=1e-15)
    v = kernel_scalar([0, 0], [0, 25], cfg)
    assert v == pytest.approx(E_MINUS_100, rel=1e-12) and not math.isnan(v)
    assert kernel_scalar([0, 0], [0, 1e6], cfg) == 0.0


def test_kernel_config_validation():
    for bad in (0, -1, float("inf"), float("nan")):
        with pytest.raises(ValidationError):
            KernelConfig(bad, 2)
    with pytest.raises(ValidationError):
        KernelConfig(1.0, 4)


def test_inner_product_examples():
    cfg3 = KernelConfig(0.7, 3)
    a = atom([3, -1, 2], [1, 0, 0])
    assert inner_product(a, a, cfg3) == 1.0
    cfg = KernelConfig(1.3, 2)
    assert inner_product(atom([0, 0], [1, 0]), atom([0, 0], [0, 1]), cfg) == 0.0
    near = inner_product(atom([0, 0], [1, 0]), atom([1.3, 0], [1, 0]), cfg)
    assert near == pytest.approx(E_MINUS_1, rel=1e-15)


def test_distance_examples():
    cfg = KernelConfig(1.0, 2)
    a, b = atom([0, 0], [1, 0]), atom([0, 0], [0, 1])
    assert distance(a, b, cfg) == pytest.approx(math.sqrt(2), rel=1e-15)
    sq = curve_to_atoms(Polyline2D(UNIT_SQUARE, closed=True))
    assert distance(sq, sq, cfg) == 0.0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        inner_product(atom([0, 0], [1, 0]), atom([0, 0, 0], [1, 0, 0]), KernelConfig(1, 2))


@pytest.mark.parametrize("dim", [2, 3])
def test_matches_naive_oracle(rng, dim):
    for _ in range(10):
        a, b = random_shape(rng, dim, 40), random_shape(rng, dim, 25)
        lam = float(rng.uniform(0.5, 3))
        ref = naive_inner_product(a.centers.tolist(), a.taus.tolist(), b.centers.tolist(), b.taus.tolist(), lam)
        assert inner_product(a, b, KernelConfig(lam, dim)) == pytest.approx(ref, rel=1e-12)


def test_symmetry_and_orientation(rng):
    cfg = KernelConfig(1.1, 3)
    for _ in range(10):
        a, b = random_shape(rng, 3, 30), random_shape(rng, 3, 30)
        assert inner_product(a, b, cfg) == pytest.approx(inner_product(b, a, cfg), rel=1e-13)
        assert inner_product(-a, b, cfg) == -inner_product(a, b, cfg)
        assert distance(a, b, cfg) == pytest.approx(distance(b, a, cfg), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-3, 3), beta=st.floats(-3, 3))
def test_bilinearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b, c = (random_shape(rng, 2, 15) for _ in range(3))
    cfg = KernelConfig(1.0, 2)
    combo = WeightedAtoms.combine([(alpha, a), (beta, b)])
    lhs = inner_product(combo, c, cfg)
    rhs = alpha * inner_product(a, c, cfg) + beta * inner_product(b, c, cfg)
    scale = abs(alpha * inner_product(a, c, cfg)) + abs(beta * inner_product(b, c, cfg))
    assert abs(lhs - rhs) <= 1e-10 * max(scale, 1e-300)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_cauchy_schwarz_and_triangle(seed):
    rng = np.random.default_rng(seed)
    cfg = KernelConfig(float(rng.uniform(0.3, 3)), 3)
    a, b, c = (random_shape(rng, 3, 20) for _ in range(3))
    ab = inner_product(a, b, cfg)
    assert ab * ab <= inner_product(a, a, cfg) * inner_product(b, b, cfg) + 1e-10
    assert distance(a, c, cfg) <= distance(a, b, cfg) + distance(b, c, cfg) + 1e-9


def test_joint_rigid_motion_invariance(rng):
    cfg = KernelConfig(0.9, 3)
    for _ in range(10):
        a, b = random_shape(rng, 3, 30), random_shape(rng, 3, 30)
        R, t = random_rotation(rng, 3), rng.normal(size=3) * 5
        moved = inner_product(transform_shape(a, R, t), transform_shape(b, R, t), cfg)
        assert moved == pytest.approx(inner_product(a, b, cfg), rel=1e-9)


def test_large_lambda_flushes_closed_shapes():
    for a, b in [(curve_to_atoms(gen_contour("ellipse", seed=1)), curve_to_atoms(gen_contour("star", seed=2))),
                 (mesh_to_atoms(gen_mesh("pear", n_triangles=200)), mesh_to_atoms(gen_mesh("sphere", n_triangles=200)))]:
        pts = np.vstack([a.centers, b.centers])
        diag = float(np.linalg.norm(pts.max(0) - pts.min(0)))
        cfg = KernelConfig(1e6 * diag, a.dim)
        bound = 1e-6 * np.linalg.norm(a.taus, axis=1).sum() * np.linalg.norm(b.taus, axis=1).sum()
        assert abs(inner_product(a, b, cfg)) <= bound


def test_mean_field(rng):
    cfg = KernelConfig(1.0, 2)
    s1, s2, t = (random_shape(rng, 2, 12) for _ in range(3))
    single = mean_field([s1])
    assert single.weight == 1.0
    assert inner_product(single, t, cfg) == inner_product(s1, t, cfg)
    mean = mean_field([s1, s2])
    assert mean.weight == 0.5
    assert inner_product(mean, t, cfg) == pytest.approx(
        0.5 * (inner_product(s1, t, cfg) + inner_product(s2, t, cfg)), rel=1e-12)
    with pytest.raises(EmptySample):
        mean_field([])


def test_mean_norm_equals_gram_average(rng):
    cfg = KernelConfig(1.5, 3)
    shapes = [random_shape(rng, 3, 10) for _ in range(5)]
    G = gram_matrix(shapes, cfg).entries
    # expanding |(1/m) sum phi_l|^2 bilinearly gives the Gram average
    assert inner_product(mean_field(shapes), mean_field(shapes), cfg) == pytest.approx(
        G.sum() / 25, rel=1e-10)


def test_lambda_heuristic():
    two = [atom([-1, 0], [1, 0]), atom([1, 0], [1, 0])]
    assert lambda_heuristic(two) == 1.0
    with pytest.raises(DegeneratePointCloud):
        lambda_heuristic([atom([2, 2], [1, 0]), atom([2, 2], [0, 1])])
    with pytest.raises(DegeneratePointCloud):
        lambda_heuristic([atom([2, 2], [1, 0])])
    # axis-mean reads the standard deviation per coordinate
    pts = ShapeAtoms([[0, 0], [2, 0], [0, 4], [2, 4]], np.ones((4, 2)))
    assert lambda_heuristic([pts], "axis-mean") == pytest.approx(1.5)
    assert lambda_heuristic([pts]) == pytest.approx(math.sqrt(5))


def test_lambda_heuristic_rotation_invariant(rng):
    shapes = [random_shape(rng, 3, 20) for _ in range(4)]
    R = random_rotation(rng, 3)
    moved = [transform_shape(s, R, [1, 2, 3]) for s in shapes]
    assert lambda_heuristic(moved) == pytest.approx(lambda_heuristic(shapes), rel=1e-12)


def test_gram_small_cases(rng):
    cfg = KernelConfig(1.0, 2)
    s = random_shape(rng, 2, 10)
    g1 = gram_matrix([s], cfg)
    assert g1.entries.shape == (1, 1)
    assert g1.entries[0, 0] == inner_product(s, s, cfg)
    g2 = gram_matrix([s, s], cfg)
    assert np.all(g2.entries == g2.entries[0, 0])
    assert g2.distances()[0, 1] == 0.0


def test_gram_matches_naive_loop_and_is_psd(rng):
    cfg = KernelConfig(1.2, 2)
    shapes = [random_shape(rng, 2, int(rng.integers(5, 30))) for _ in range(10)]
    G = gram_matrix(shapes, cfg)
    for i in range(10):
        for j in range(10):
            a, b = shapes[i], shapes[j]
            ref = naive_inner_product(a.centers.tolist(), a.taus.tolist(), b.centers.tolist(), b.taus.tolist(), 1.2)
            assert G.entries[i, j] == pytest.approx(ref, rel=1e-12)
    assert G.check() == []


def test_gram_thread_count_is_invisible(rng):
    cfg = KernelConfig(0.8, 3)
    shapes = [random_shape(rng, 3, 50) for _ in range(6)]
    one = gram_matrix(shapes, cfg, threads=1).entries
    four = gram_matrix(shapes, cfg, threads=4).entries
    assert one.tobytes() == four.tobytes()


def test_block_size_is_invisible(rng, monkeypatch):
    import shape_currents.rkhs as rk
    cfg = KernelConfig(0.8, 3)
    a, b = random_shape(rng, 3, 60), random_shape(rng, 3, 70)
    whole = inner_product(a, b, cfg)
    monkeypatch.setattr(rk, "_BLOCK_ELEMS", 7 * 70)
    assert inner_product(a, b, cfg) == whole


def test_gram_check_flags_invalid():
    assert "not symmetric" in GramMatrix([[1.0, 0.5], [0.4, 1.0]], 1.0).check()
    assert any("semi-definite" in p for p in GramMatrix([[1.0, 2.0], [2.0, 1.0]], 1.0).check())


def test_gram_serialization_roundtrip(tmp_path, rng):
    cfg = KernelConfig(1.7, 3)
    shapes = [random_shape(rng, 3, 8) for _ in range(4)]
    G = gram_matrix(shapes, cfg, ["a", "b", "c", "d"])
    write_gram_binary(G, tmp_path / "g.bin")
    raw = (tmp_path / "g.bin").read_bytes()
    assert raw[:5] == b"GRAM1"
    assert len(raw) == 5 + 4 + 8 + 4 + 8 * 16
    back = read_gram_binary(tmp_path / "g.bin")
    assert back.lam == 1.7 and back.dim == 3 and back.m == 4
    assert back.entries.tobytes() == G.entries.tobytes()
    write_gram_csv(G, tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "a,b,c,d"
    back = read_gram_csv(tmp_path / "g.csv", 1.7, 3)
    assert back.shape_ids == ("a", "b", "c", "d")
    assert back.entries.tobytes() == G.entries.tobytes()
