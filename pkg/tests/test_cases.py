import numpy as np
import pytest

from dislag.cases import builtin, ieee14, ieee118, load_case, save_case
from dislag.dual import check_slater
from dislag.errors import InvariantViolation, ParseError

CASE_TEXT = """dislag-case v1
# two generators
name tiny
total_demand 10
node 0
  cost quadratic2 a=0.5 b=1
  lo 0
  hi 8
  b 4
end
node 1
  cost quadratic3 a=2 b=1 c=0.25
  lo 1
  hi 9
  b 6
end
"""


def test_ieee14_table_values():
    p = ieee14()
    third = p.nodes[2].cost
    assert (third.a, third.b) == (0.035, 4.0)
    assert p.b.sum() == 300.0
    assert p.hi.sum() == 390.0
    assert check_slater(p)


def test_ieee118_shape_and_determinism():
    p = ieee118(1)
    assert p.n == 54
    assert p.b.sum() == pytest.approx(6000.0, rel=1e-12)
    np.testing.assert_allclose(p.b, 6000.0 / 54)
    coef = np.array([(nd.cost.a, nd.cost.b, nd.cost.c) for nd in p.nodes])
    again = np.array([(nd.cost.a, nd.cost.b, nd.cost.c) for nd in ieee118(1).nodes])
    np.testing.assert_array_equal(coef, again)
    assert not np.array_equal(coef, np.array([(nd.cost.a, nd.cost.b, nd.cost.c) for nd in ieee118(2).nodes]))
    assert np.all((coef[:, 0] >= 6.78) & (coef[:, 0] <= 74.33))
    assert np.all((coef[:, 1] >= 8.3391) & (coef[:, 1] <= 37.6968))
    assert np.all((coef[:, 2] >= 0.0024) & (coef[:, 2] <= 0.0697))
    assert np.all((p.lo >= 5) & (p.lo <= 150) & (p.hi >= 150) & (p.hi <= 400))
    assert check_slater(p)


def test_builtin_lookup():
    assert builtin("ieee14").name == "ieee14"
    assert builtin("ieee118", seed=3).seed == 3
    with pytest.raises(KeyError):
        builtin("ieee30")


@pytest.mark.parametrize("problem", [ieee14(), ieee118(4)], ids=["ieee14", "ieee118"])
def test_save_load_round_trip(problem, tmp_path):
    path = tmp_path / "case.txt"
    save_case(problem, path, name="rt", seed=4)
    case = load_case(path)
    assert case.problem == problem
    assert case.name == "rt" and case.seed == 4


def test_load_handwritten_case(tmp_path):
    path = tmp_path / "tiny.txt"
    path.write_text(CASE_TEXT)
    case = load_case(path)
    assert case.name == "tiny"
    assert case.seed is None
    assert case.problem.nodes[1].cost.c == 0.25
    assert case.total_demand == 10.0


def test_demand_mismatch_is_invariant_violation(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(CASE_TEXT.replace("total_demand 10", "total_demand 11"))
    with pytest.raises(InvariantViolation):
        load_case(path)


def test_missing_coefficient_names_field(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(CASE_TEXT.replace("a=0.5 b=1", "a=0.5"))
    with pytest.raises(ParseError) as err:
        load_case(path)
    assert err.value.field == "b"
    assert err.value.line == 6


@pytest.mark.parametrize(
    "old, new, field",
    [
        ("  lo 0\n", "", "lo"),
        ("hi 8", "hi eight", "hi"),
        ("quadratic2", "cubic", "cost"),
    ],
)
def test_parse_errors(tmp_path, old, new, field):
    path = tmp_path / "bad.txt"
    path.write_text(CASE_TEXT.replace(old, new, 1))
    with pytest.raises(ParseError) as err:
        load_case(path)
    assert err.value.field == field


def test_bad_magic_and_unclosed_block(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(CASE_TEXT.replace("dislag-case v1", "case v0"))
    with pytest.raises(ParseError):
        load_case(path)
    path.write_text(CASE_TEXT.rsplit("end", 1)[0])
    with pytest.raises(ParseError, match="not closed"):
        load_case(path)


def test_invalid_box_is_invariant_violation(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(CASE_TEXT.replace("hi 8", "hi -1"))
    with pytest.raises(InvariantViolation):
        load_case(path)
