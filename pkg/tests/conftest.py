import numpy as np
import pytest

from shape_currents.geometry import ShapeAtoms


def random_shape(rng, dim, n=None, spread=1.0, label=None):
    n = n if n is not None else int(rng.integers(10, 201))
    return ShapeAtoms(rng.normal(scale=spread, size=(n, dim)), rng.normal(size=(n, dim)), label)


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_gram(rng, m, rank=4):
    x = rng.normal(size=(m, rank))
    return x @ x.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def height_sample(seed=0, per_band=10, bands=((1190, 1250), (1250, 1310), (1310, 1370), (1370, 1430))):
    """Contours with a 'height' (mm) and a 'waist' measurement, spread over the given bands.

    Within each band half the shapes are slim ellipses and half are wide ones.
    """
    from shape_currents.geometry import curve_to_atoms, transform_geometry
    from shape_currents.synth import gen_contour

    rng = np.random.default_rng(seed)
    shapes, ids = [], []
    for lo, hi in bands:
        for i in range(per_band):
            h = float(rng.uniform(lo, hi))
            wide = i % 2
            poly = gen_contour("ellipse", {"a": 1.0, "b": 0.5 if wide else 0.25}, 60, seed=int(rng.integers(2**31)))
            poly = transform_geometry(poly, scale=h / 2000.0)
            waist = round(h * (0.5 if wide else 0.25), 3)
            shapes.append(curve_to_atoms(poly, meta={"height": round(h, 3), "waist": waist}))
            ids.append(f"s{len(ids):03d}")
    return shapes, ids


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
