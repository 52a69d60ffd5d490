import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonnoether.dsl.expr import (
    BinOp,
    CompiledExpressions,
    DomainError,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifier,
    Var,
    eval_expression,
    parse_expression,
    to_source,
)
from nonnoether.dsl.system import (
    DocumentError,
    catalog_document,
    catalog_names,
    document_from_mapping,
    load,
    load_document,
    load_system,
    parse_document,
    resolve_document,
)
from nonnoether.errors import ValidationError

CORPUS = [
    "1", "x", "-x", "--x", "x + y", "x - y - z", "x - (y - z)", "x * y / z", "x / (y * z)", "x / y / z",
    "x^2", "x^y^z", "(x^y)^z", "-x^2", "(-x)^2", "x^-2", "x^-y^2", "2^(x + 1)", "x * -y", "x - -y",
    "sin(x)", "cos(x + y)", "exp(-x^2/2)", "ln(1 + x^2)", "sqrt(x^2 + y^2)", "sin(cos(exp(x)))",
    "pi * x", "2 * pi / x", "1.5e-3 * x", "0.25", "3.0", "1e10", ".5 * x",
    "(x + y) * (x - y)", "(x + y)^2", "x^2 + 2*x*y + y^2", "-(x + y)", "-(x * y)", "-sin(x)",
    "I^2", "sin(th)*p1 + 2", "q^2/2 + p^2/2", "(q^2 + p^2)/2", "I1^2 + I2^2", "th1 - th2",
    "x*(y*(z*w))", "((x))", "x/(-y)", "exp(ln(x))", "sqrt(sqrt(x))^4",
]


def test_corpus_has_fifty_entries():
    assert len(CORPUS) == 50 and len(set(CORPUS)) == 50


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_round_trip(src):
    ast = parse_expression(src)
    printed = to_source(ast)
    again = parse_expression(printed)
    assert again == ast
    assert to_source(again) == printed


def test_precedence():
    assert parse_expression("-x^2") == Neg(BinOp("^", Var("x"), Num(2.0)))
    assert parse_expression("x^y^z") == BinOp("^", Var("x"), BinOp("^", Var("y"), Var("z")))
    assert parse_expression("x - y - z") == BinOp("-", BinOp("-", Var("x"), Var("y")), Var("z"))
    assert parse_expression("x^-2") == BinOp("^", Var("x"), Neg(Num(2.0)))
    assert eval_expression("-2^2") == -4.0
    assert eval_expression("2^3^2") == 512.0


def test_examples():
    ast = parse_expression("I^2", ["I"])
    assert isinstance(ast, BinOp) and ast.op == "^"
    assert eval_expression(ast, [0.5], ["I"]) == 0.25
    assert eval_expression(parse_expression("sin(th)*p1 + 2", ["th", "p1"]), [0.0, 7.0], ["th", "p1"]) == 2.0
    assert eval_expression("q^2/2 + p^2/2", [1.0, 0.0], ["q", "p"]) == 0.5
    assert eval_expression("exp(0)*3") == 3.0


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expression("q +* p")
    assert info.value.offset == 3
    assert "number" in info.value.expected


@pytest.mark.parametrize("src, offset", [("", 0), ("(x", 2), ("x)", 1), ("2 x", 2), ("sin x", 4), ("x $ y", 2)])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expression(src)
    assert info.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        parse_expression("q + r", ["q", "p"])
    assert info.value.name == "r" and info.value.offset == 4
    with pytest.raises(UnknownIdentifier):
        parse_expression("tan(q)")


@pytest.mark.parametrize("src, x", [("ln(q)", -1.0), ("sqrt(q)", -4.0), ("1/q", 0.0), ("q^0.5", -1.0), ("exp(q)", 1e4)])
def test_domain_errors(src, x):
    with pytest.raises(DomainError) as info:
        eval_expression(src, [x, 0.0], ["q", "p"])
    assert info.value.source is not None


def test_domain_error_names_subexpression():
    with pytest.raises(DomainError) as info:
        eval_expression("p + 3 * ln(q - 1)", [0.5, 0.0], ["q", "p"])
    assert info.value.source == "ln(q - 1)"
    assert info.value.offset == 8


def test_compiled_matches_interpreter_and_batch():
    coords = ["q", "p"]
    srcs = ["sin(q)*p + 2", "q^2/2 + p^2/2", "exp(-q^2) * cos(p)", "sqrt(1 + q^2) - p^3"]
    comp = CompiledExpressions([parse_expression(s) for s in srcs], coords)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))
    batch = comp.batch(pts)
    for row, x in zip(batch, pts):
        interp = [eval_expression(s, x, coords) for s in srcs]
        assert np.array_equal(comp(x), interp)
        assert np.allclose(row, interp, rtol=1e-15, atol=0)


def test_compiled_reports_domain_errors():
    comp = CompiledExpressions([parse_expression("ln(q)")], ["q", "p"])
    with pytest.raises(DomainError):
        comp([-1.0, 0.0])
    with pytest.raises(DomainError):
        comp.batch([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(UnknownIdentifier):
        CompiledExpressions([parse_expression("k * q")], ["q", "p"])
    assert CompiledExpressions([parse_expression("k * q")], ["q", "p"], {"k": 3.0})([2.0, 0.0]) == 6.0


atoms = st.sampled_from(["x", "y", "2", "0.5", "pi"])


def _expr_strategy():
    return st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*", "/", "^"]), inner).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
            inner.map(lambda s: f"-({s})"),
            st.tuples(st.sampled_from(["sin", "cos", "exp"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
        ),
        max_leaves=12,
    )


@settings(max_examples=200, deadline=None)
@given(_expr_strategy())
def test_printing_round_trips_generated_expressions(src):
    ast = parse_expression(src)
    assert parse_expression(to_source(ast)) == ast


@settings(max_examples=200, deadline=None)
@given(_expr_strategy(), st.floats(-2, 2), st.floats(-2, 2))
def test_printed_form_evaluates_identically(src, x, y):
    ast = parse_expression(src)
    try:
        a = eval_expression(ast, [x, y], ["x", "y"])
    except DomainError:
        return
    assert eval_expression(to_source(ast), [x, y], ["x", "y"]) == a or (math.isnan(a))


# --------------------------------------------------------------------------
# system documents


def _osc_doc(**over):
    doc = {"name": "osc", "n": 1, "coordinates": ["q", "p"], "h": "(q^2 + p^2)/2"}
    doc.update(over)
    return doc


def test_catalog_minimum_contents():
    names = catalog_names()
    for required in ("aa-oscillator", "aa-2oscillator", "qp-oscillator", "neg-control"):
        assert required in names


def test_aa_oscillator_document_matches_worked_example():
    doc = catalog_document("aa-oscillator")
    assert doc.n == 1 and doc.coordinates == ["th", "I"] and doc.omega == "canonical"
    assert doc.h == "I" and doc.E == ["0", "I^2"]
    sys = load_system(doc)
    assert sys.gate_report["symmetry"]["max_residual"] <= 1e-7
    assert "warning" not in sys.gate_report["symmetry"]


def test_antisymmetry_failure():
    doc = document_from_mapping(_osc_doc(omega=[["0", "q"], ["q", "0"]]))
    with pytest.raises(ValidationError) as info:
        load_system(doc)
    assert [f["gate"] for f in info.value.failures] == ["antisymmetry"]
    assert "at [" in info.value.failures[0]["detail"]


def test_non_symmetry_loads_with_warning():
    sys = load_system(document_from_mapping(_osc_doc(E=["q", "0"])))
    entry = sys.gate_report["symmetry"]
    assert entry["max_residual"] > 0.1 and "warning" in entry


def test_every_failing_gate_is_listed():
    doc = document_from_mapping({
        "name": "bad", "n": 2, "coordinates": ["a", "b", "c", "d"], "h": "ln(a - 5)",
        "omega": [["0", "1 + c^2", "0", "0"], ["-1 - c^2", "0", "0", "0"],
                  ["0", "0", "0", "1"], ["0", "0", "-1", "0"]],
    })
    with pytest.raises(ValidationError) as info:
        load_system(doc)
    assert [f["gate"] for f in info.value.failures] == ["closedness", "hamiltonian"]


def test_non_closed_omega_fails():
    # d(omega) has a dc ^ da ^ db component from the c-dependence of omega_ab
    doc = document_from_mapping({
        "name": "open", "n": 2, "coordinates": ["a", "b", "c", "d"], "h": "a",
        "omega": [["0", "1 + c^2", "0", "0"], ["-1 - c^2", "0", "0", "0"],
                  ["0", "0", "0", "1"], ["0", "0", "-1", "0"]],
    })
    with pytest.raises(ValidationError) as info:
        load_system(doc)
    assert [f["gate"] for f in info.value.failures] == ["closedness"]


def test_degenerate_constant_omega_fails():
    doc = document_from_mapping(_osc_doc(omega=[["0", "0"], ["0", "0"]]))
    with pytest.raises(ValidationError) as info:
        load_system(doc)
    assert info.value.failures[0]["gate"] == "nondegeneracy"


def test_non_canonical_constant_omega():
    sys = load_system(document_from_mapping(_osc_doc(omega=[["0", "2"], ["-2", "0"]])))
    assert sys.omega.constant
    assert np.allclose(sys.omega.inverse_at(np.zeros(2)), [[0, -0.5], [0.5, 0]])


def test_variable_closed_omega_loads():
    sys = load_system(document_from_mapping(_osc_doc(omega=[["0", "1 + q^2"], ["-1 - q^2", "0"]])))
    assert not sys.omega.constant
    assert sys.gate_report["closedness"]["max_residual"] == 0.0


@pytest.mark.parametrize("bad, msg", [
    ({"n": 0}, "positive"),
    ({"coordinates": ["q"]}, "coordinates"),
    ({"coordinates": ["q", "q"]}, "coordinates"),
    ({"E": ["q"]}, "components"),
    ({"omega": "weird"}, "canonical"),
    ({"omega": [["0"]]}, "matrix"),
    ({"x0": [1.0]}, "x0"),
    ({"domain": {"lo": 0}}, "domain"),
    ({"extra": 1}, "unknown"),
    ({"constants": {"q": 1.0}}, "shadow"),
])
def test_document_errors(bad, msg):
    with pytest.raises(DocumentError, match=msg):
        document_from_mapping(_osc_doc(**bad))


def test_missing_key():
    with pytest.raises(DocumentError, match="missing"):
        document_from_mapping({"name": "x", "n": 1, "coordinates": ["q", "p"]})


def test_constants_and_json_input(tmp_path):
    doc = _osc_doc(h="k * (q^2 + p^2)", constants={"k": 0.5}, domain={"lo": -2, "hi": 2})
    path = tmp_path / "osc.json"
    path.write_text(json.dumps(doc))
    sys = load_system(load_document(path))
    assert sys.h(np.array([1.0, 1.0])) == 1.0
    assert np.array_equal(sys.box[1], [2.0, 2.0])


def test_toml_file_and_resolution(tmp_path):
    text = catalog_document("qp-oscillator")
    path = tmp_path / "mine.toml"
    path.write_text('name = "mine"\nn = 1\ncoordinates = ["q", "p"]\nh = "p^2/2 + q^4"\n')
    assert resolve_document(str(path)).name == "mine"
    assert resolve_document("qp-oscillator").name == text.name
    with pytest.raises(FileNotFoundError):
        resolve_document(str(tmp_path / "missing.toml"))


def test_malformed_toml():
    with pytest.raises(DocumentError):
        parse_document("name = ", "toml")


def test_unknown_identifier_in_document():
    with pytest.raises(UnknownIdentifier):
        load_system(document_from_mapping(_osc_doc(h="q + r")))


@pytest.mark.parametrize("name", catalog_names())
def test_every_catalog_system_loads(name):
    sys = load(name)
    assert sys.name == name and sys.gate_report["nondegeneracy"]["min_abs_det"] > 0
