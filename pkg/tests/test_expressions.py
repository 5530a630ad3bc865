import numpy as np
import pytest

from turnpike.expressions import ExpressionError, compile_expression


def ev(text, y=(0.0,), u=(0.0,), n=None, p=None):
    fn = compile_expression(text, n or len(y), p or len(u))
    return fn(np.asarray(y, dtype=float), np.asarray(u, dtype=float))


def test_precedence():
    assert ev("1 + 2*3^2") == 19.0
    assert ev("2*3 + 4") == 10.0
    assert ev("(1 + 2)*3") == 9.0


def test_power_right_associative():
    assert ev("2^3^2") == 512.0  # 2^(3^2), not (2^3)^2


def test_unary_minus_binds_below_power():
    assert ev("-y1^2", y=(3.0,)) == -9.0
    assert ev("(-y1)^2", y=(3.0,)) == 9.0


def test_division_and_literals():
    assert ev("y1/u1", y=(1.0,), u=(4.0,)) == 0.25
    assert ev(".5 + 2.5e-1") == 0.75
    assert ev("1e3") == 1000.0


def test_variables_and_functions():
    assert ev("y2 - u1", y=(0.0, 7.0), u=(2.0,)) == 5.0
    assert ev("sin(y1)", y=(0.0,)) == 0.0
    assert ev("cos(y1)", y=(0.0,)) == 1.0
    assert ev("exp(u1)", u=(1.0,)) == pytest.approx(np.e)
    assert ev("log(y1)", y=(np.e,)) == pytest.approx(1.0)


def test_out_of_domain_is_nonfinite_not_raise():
    # numpy semantics: a diverging rollout surfaces as a blow-up downstream
    # instead of an exception mid-integration
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        assert not np.isfinite(ev("log(y1)", y=(-1.0,)))
        assert not np.isfinite(ev("exp(y1)", y=(1e9,)))


@pytest.mark.parametrize("bad", [
    "",
    "y1 +",
    "2 ** 3",
    "__import__('os')",
    "foo(1)",
    "y3",        # state index out of range for n=2
    "u2",        # control index out of range for p=1
    "1..2",
    "y1 @ u1",
    "(y1",
    "y1)",
    "y0",        # indices are 1-based
])
def test_rejects_malformed(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad, 2, 1)


def test_source_attribute_records_compiled_form():
    fn = compile_expression(".5*y1", 1, 1)
    assert isinstance(fn.source, str)
    assert "y[0]" in fn.source


def test_whitespace_insensitive():
    a = ev("y1^2+u1", y=(2.0,), u=(3.0,))
    b = ev(" y1 ^ 2 + u1 ", y=(2.0,), u=(3.0,))
    assert a == b == 7.0
