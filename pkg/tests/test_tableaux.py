import numpy as np
import pytest

from erlogse.config import ALL_TABLEAUX
from erlogse.errors import TableauError
from erlogse.tableaux import (
    REGISTRY, DoubleButcherTableau, format_tableau, load_tableau, parse_tableau, validate_tableau,
)

MIDPOINT = """\
# comment line
name mid
stages 2
order 2
A_I
0 0
0 1/2
b_I
0 1
A_E
0 0
1/2 0
b_E
0 1
"""


class TestShipped:
    @pytest.mark.parametrize("name", ALL_TABLEAUX)
    def test_loads_and_validates(self, name):
        t = load_tableau(name)
        report = validate_tableau(t)
        assert report.ok, report.summary()
        assert report.passes_order(min(t.order, 4))

    @pytest.mark.parametrize("name,stages,order,implicit", [
        ("RK(1,2)", 2, 2, 1), ("RK(2,3)", 3, 3, 2), ("RK(6,4)", 6, 4, 5), ("RK(8,5)", 8, 5, 7),
    ])
    def test_shapes(self, name, stages, order, implicit):
        t = load_tableau(name)
        assert (t.stages, t.order, t.implicit_stages) == (stages, order, implicit)

    def test_rk85_order_five(self):
        assert validate_tableau(load_tableau("RK(8,5)")).passes_order(5)

    def test_rk64_is_not_order_five(self):
        assert not validate_tableau(load_tableau("RK(6,4)")).passes_order(5)

    def test_explicit_part_strictly_lower(self):
        for name in REGISTRY:
            t = load_tableau(name)
            assert np.all(np.triu(t.A_E) == 0)
            assert np.all(np.triu(t.A_I, 1) == 0)


class TestParsing:
    def test_fractions(self):
        t = parse_tableau(MIDPOINT)
        assert t.A_I[1, 1] == 0.5
        np.testing.assert_array_equal(t.c_E, [0, 0.5])

    def test_roundtrip_through_format(self):
        t = load_tableau("RK(6,4)")
        back = parse_tableau(format_tableau(t))
        for attr in ("A_I", "b_I", "A_E", "b_E", "c_I", "c_E"):
            np.testing.assert_array_equal(getattr(back, attr), getattr(t, attr))

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "mid.tab"
        path.write_text(MIDPOINT)
        assert load_tableau(path).name == "mid"

    @pytest.mark.parametrize("mutate,msg", [
        (lambda s: s.replace("stages 2", "stages two"), "integers"),
        (lambda s: s.replace("0 1/2\n", "0\n", 1), "entries"),
        (lambda s: s.replace("b_E\n0 1\n", ""), "missing block b_E"),
        (lambda s: s.replace("1/2 0", "1/2 zz"), "line"),
        (lambda s: s.replace("A_E", "A_X"), "unknown block"),
        (lambda s: s.replace("name mid\n", ""), "name"),
    ])
    def test_malformed(self, mutate, msg):
        with pytest.raises(TableauError, match=msg):
            parse_tableau(mutate(MIDPOINT))

    def test_unknown_source(self):
        with pytest.raises(TableauError, match="unknown tableau"):
            load_tableau("RK(9,9)")


class TestValidation:
    def test_detects_perturbed_weight(self):
        bad = MIDPOINT.replace("b_I\n0 1", "b_I\n0 1.001")
        with pytest.raises(TableauError, match="failed validation"):
            parse_tableau(bad)
        report = validate_tableau(parse_tableau(bad, validate=False))
        assert not report.ok
        assert any(c.part == "I" and c.order == 1 for c in report.failures)

    def test_detects_implicit_upper_entry(self):
        t = parse_tableau(MIDPOINT)
        A_I = t.A_I.copy()
        A_I[0, 1] = 0.1
        broken = DoubleButcherTableau("x", 2, 2, A_I, t.b_I, t.A_E, t.b_E, c_I=t.c_I)
        report = validate_tableau(broken)
        assert any(c.part == "structure" for c in report.failures)

    def test_overclaimed_order_fails(self):
        report = validate_tableau(parse_tableau(MIDPOINT.replace("order 2", "order 3"), validate=False))
        assert not report.ok
        assert all(c.order == 3 for c in report.failures)

    def test_summary_mentions_status(self):
        assert "OK" in validate_tableau(load_tableau("RK(2,3)")).summary()
