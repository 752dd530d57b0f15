import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fbms.bounds import (ReportInputs, acs_lower_bound, fraser_li_cap, geometric_area_bounds,
                         riemann_roch, theorem_d_bound, upsilon, verify_inequalities)
from fbms.errors import InputMismatchError, ParameterError, RankError, SignError

TABLE = list(itertools.product(range(20), range(1, 11)))


def _upsilon_oracle(g, m):
    # case split keyed on chi alone
    chi = (2 - 2 * g) - m
    table = {1: 0, 2: 0, 0: 1}
    return table.get(chi, -3 * chi)


def test_table_size():
    assert len(TABLE) == 200


@pytest.mark.parametrize("g,m", TABLE)
def test_exact_table(g, m):
    chi = 2 - 2 * g - m
    assert upsilon(g, m) == _upsilon_oracle(g, m)
    assert acs_lower_bound(g, m) == Fraction(2 * g + m - 1, 3)
    rr = riemann_roch(1, chi, 2 * chi)
    assert rr["index"] == 3 * chi
    assert rr["h0_difference"] == 3 * chi
    assert rr["maslov_antiholomorphic"] == 2 * chi
    if chi < 0:
        assert -rr["h0_difference"] == 6 * g - 6 + 3 * m == upsilon(g, m)
        assert rr["obstruction_2h0"] == upsilon(g, m)


def test_upsilon_examples():
    assert (upsilon(0, 1), upsilon(0, 2), upsilon(1, 2)) == (0, 1, 6)


def test_riemann_roch_examples():
    d = riemann_roch(1, 1, 2)
    assert d["index"] == 3 and d["surjective_hint"] and d["h0_difference"] == 3
    assert d["obstruction_2h0"] == 0
    h = riemann_roch(1, -3, -6)
    assert h["h0_difference"] == -9 and h["obstruction_2h0"] == 9
    a = riemann_roch(1, 0, 0)
    assert a["index"] == 0 and a["obstruction_2h0"] == 1
    assert riemann_roch(1, 2, -1)["injective_hint"]


def test_rank_error():
    with pytest.raises(RankError):
        riemann_roch(2, 1, 2)
    assert riemann_roch(2, 1, 2, hints=False)["index"] == 4


def test_acs_examples():
    assert acs_lower_bound(0, 1) == 0
    assert acs_lower_bound(0, 2) == Fraction(1, 3)
    assert acs_lower_bound(2, 3) == 2


def test_invalid_topology():
    with pytest.raises(ParameterError):
        upsilon(-1, 1)
    with pytest.raises(ParameterError):
        acs_lower_bound(0, 0)


def test_area_bounds():
    r = geometric_area_bounds(0, 1, math.pi, 2 * math.pi, c1=1.0, alpha=1.0)["convex"]
    assert r["rhs"] == 4 * math.pi and r["pass"]
    assert fraser_li_cap(0, 2) == 8 * math.pi
    c = geometric_area_bounds(0, 1, math.pi, 2 * math.pi, kappa=1.0, concave_alpha=0.5)["concave"]
    assert not c["applicable"]
    with pytest.raises(SignError):
        geometric_area_bounds(0, 1, 1.0, 1.0, alpha=-1.0)


@given(st.integers(0, 30), st.integers(1, 30))
def test_floor_bracket(g, m):
    assert fraser_li_cap(g, m) == min(4 * math.pi * (g + m), 16 * math.pi * ((g + 3) // 2))


def test_theorem_d():
    assert theorem_d_bound(0, 2, 1.0) == 8 * math.pi + 1


def _inputs(**kw):
    base = dict(surface_id="s", g=0, m=2, ind_area=4, nul_area=2, ind_energy=3, nul_energy=4,
                nul_tangential=1, beta=7, area=5.2, boundary_length=5.0, c_empirical=0.5,
                c1=0.5, c2=0.5, convex_alpha=1.0)
    base.update(kw)
    return ReportInputs(**base)


def test_verify_catenoid_counts():
    rep = verify_inequalities(_inputs())
    names = {c.name: c for c in rep.checks}
    assert names["energy_index_le_area_index"].passed
    assert names["area_index_le_energy_index_plus_upsilon"].passed
    assert names["nullity_difference_le_upsilon"].lhs == 1
    assert rep.passed
    assert rep.composite["c_min_tight"] == (4 + 2 - 1) / (8 * math.pi)


def test_verify_detects_violation():
    rep = verify_inequalities(_inputs(ind_area=6))
    assert not rep.passed


def test_verify_deterministic():
    assert verify_inequalities(_inputs()).to_json() == verify_inequalities(_inputs()).to_json()


def test_input_mismatch():
    with pytest.raises(InputMismatchError):
        verify_inequalities(_inputs(signatures={"area": "a", "energy": "b"}))


def test_table_rendering():
    t = verify_inequalities(_inputs()).table()
    assert "energy_index_le_area_index" in t and "(report)" in t
