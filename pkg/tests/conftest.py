import numpy as np
import pytest

from fbms.ambient import immerse, unit_ball
from fbms.mesh import builtin_surface, make_surface, refine_mesh


def shifted_disk(height=0.6, resolution=6):
    """Planar disk at height ``height`` whose boundary lies on the unit sphere.

    It meets the sphere at the angle with cosine ``sqrt(1 - height**2)``, so
    it is minimal but not free-boundary.
    """
    s = builtin_surface("flat_disk", resolution)
    V = s.vertices.copy()
    r = np.sqrt(1.0 - height**2)
    V[:, :2] *= r
    V[:, 2] = height
    return make_surface(V, s.triangles)


def annulus_grid(n_theta=12, n_r=3, r0=0.5, r1=1.0):
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    rs = np.linspace(r0, r1, n_r + 1)
    V = np.array([[r * np.cos(t), r * np.sin(t), 0.0] for r in rs for t in th])
    T = []
    for i in range(n_r):
        for j in range(n_theta):
            a = i * n_theta + j
            b = i * n_theta + (j + 1) % n_theta
            c, d = a + n_theta, b + n_theta
            T += [[a, b, d], [a, d, c]]
    return V, np.array(T)


def torus_minus_face(n=6, m=4):
    """Torus grid with one triangle removed: genus 1, one boundary loop."""
    V, T = [], []
    for i in range(n):
        for j in range(m):
            u, v = 2 * np.pi * i / n, 2 * np.pi * j / m
            V.append([(2 + np.cos(v)) * np.cos(u), (2 + np.cos(v)) * np.sin(u), np.sin(v)])
    for i in range(n):
        for j in range(m):
            a = i * m + j
            b = ((i + 1) % n) * m + j
            c = i * m + (j + 1) % m
            d = ((i + 1) % n) * m + (j + 1) % m
            T += [[a, b, d], [a, d, c]]
    return np.array(V), np.array(T[1:])


@pytest.fixture(scope="session")
def disk8():
    return immerse(builtin_surface("flat_disk", 8), unit_ball())


@pytest.fixture(scope="session")
def disk4_l3():
    return immerse(refine_mesh(builtin_surface("flat_disk", 4), 3), unit_ball())


@pytest.fixture(scope="session")
def catenoid8():
    return immerse(builtin_surface("critical_catenoid", 8), unit_ball())


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
