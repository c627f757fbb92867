import json

import numpy as np
import pytest

from credev.documents import (
    ResultDocument,
    dump_evidence,
    dump_network,
    emit_result,
    parse_evidence,
    parse_network,
    parse_result,
    run_query,
)
from credev.errors import DocumentError, InvalidEvidenceError, OverlappingEvidenceError, ValidationError
from credev.evidence import (
    CredalSoftEvidence,
    CredalVirtualEvidence,
    HardEvidence,
    IncompleteObservation,
    SoftEvidence,
    VirtualEvidence,
)
from credev.model import CCPT, ECPT, BayesianNetwork, CredalNetwork
from credev.pooling import OpinionSet

NETWORKS = ["traffic_light.json", "declan.json", "alarm_polytree.json", "diamond.json"]
EVIDENCE = [
    ("traffic_light.json", "example1_ve.json"),
    ("traffic_light.json", "example1_se.json"),
    ("traffic_light.json", "example1_point_cve.json"),
    ("traffic_light.json", "example3_cse.json"),
    ("traffic_light.json", "example3_cve.json"),
    ("traffic_light.json", "pool_sharp.json"),
    ("declan.json", "pool_credal.json"),
    ("alarm_polytree.json", "alarm_call.json"),
    ("diamond.json", "diamond_evidence.json"),
]


def load(fixtures, name):
    return (fixtures / name).read_text()


def test_traffic_light(fixtures):
    net = parse_network(load(fixtures, "traffic_light.json"))
    assert isinstance(net, BayesianNetwork)
    assert np.allclose(net.cpts["X"].table, [[0.8, 0.0, 0.2]])


def test_credal_blocks(fixtures):
    net = parse_network(load(fixtures, "diamond.json"))
    assert isinstance(net, CredalNetwork)
    assert isinstance(net.local["B"], CCPT) and isinstance(net.local["C"], ECPT)
    assert net.parents("E") == ("B", "C")


def test_row_sum_diagnostic(fixtures):
    with pytest.raises(ValidationError) as err:
        parse_network(load(fixtures, "bad_rowsum.json"))
    v = err.value.violations[0]
    assert v.node == "X" and v.row == 0 and v.rule == "normalization"
    assert "line 4" in str(err.value)


def test_unknown_field_and_syntax_errors(fixtures):
    with pytest.raises(DocumentError) as err:
        parse_network(load(fixtures, "unknown_field.json"))
    assert err.value.path == "colour" and err.value.line == 5
    with pytest.raises(DocumentError) as err:
        parse_network(load(fixtures, "syntax_error.json"))
    assert err.value.line == 4


def _doc(**extra):
    base = {"version": "1", "variables": [{"name": "A", "states": ["a0", "a1"]}], "cpts": {"A": [[0.5, 0.5]]}}
    base.update(extra)
    return json.dumps(base, indent=1)


def test_structural_document_errors():
    with pytest.raises(DocumentError, match="version"):
        parse_network(_doc(version="2"))
    with pytest.raises(DocumentError, match="unknown parent"):
        parse_network(_doc(parents={"A": ["Z"]}))
    with pytest.raises(DocumentError, match="more than one"):
        parse_network(_doc(ccpts={"A": [{"lower": [0.4, 0.4], "upper": [0.6, 0.6]}]}))
    with pytest.raises(DocumentError, match="unknown variable"):
        parse_network(_doc(cpts={"A": [[0.5, 0.5]], "B": [[1.0]]}))
    with pytest.raises(ValidationError, match="missing-model"):
        parse_network(_doc(cpts={}, variables=[{"name": "A", "states": ["a0", "a1"]}]))
    with pytest.raises(ValidationError, match="shape"):
        parse_network(_doc(cpts={"A": [[0.5, 0.25, 0.25]]}))


def test_every_evidence_kind(fixtures):
    net = parse_network(load(fixtures, "traffic_light.json"))
    items = [
        {"variable": "X", "kind": "hard", "state": "g"},
        {"variable": "X", "kind": "virtual", "likelihoods": [1, 1, 5]},
        {"variable": "X", "kind": "soft", "probs": {"g": 0.5, "y": 0, "r": 0.5}},
        {"variable": "X", "kind": "credal-virtual", "lower": [1, 1, 2], "upper": [2, 1, 3]},
        {"variable": "X", "kind": "credal-soft", "lower": [0.4, 0, 0.4], "upper": [0.6, 0, 0.6]},
        {"variable": "X", "kind": "vacuous"},
        {"variable": "X", "kind": "incomplete", "possible": ["g", "r"]},
        {"variable": "X", "kind": "idm", "counts": {"g": {"n": 3, "N": 4}, "y": {"n": 0, "N": 0}, "r": {"n": 1, "N": 5}}},
        {"variable": "X", "kind": "opinion-pool", "opinions": [[0.5, 0, 0.5], {"probs": [0.9, 0, 0.1]}]},
    ]
    types = [HardEvidence, VirtualEvidence, SoftEvidence, CredalVirtualEvidence, CredalSoftEvidence,
             CredalVirtualEvidence, IncompleteObservation, CredalVirtualEvidence, OpinionSet]
    for item, kind in zip(items, types):
        (ev,) = parse_evidence(json.dumps({"version": "1", "items": [item]}), net)
        assert isinstance(ev, kind), item["kind"]


def test_idm_document(fixtures):
    net = parse_network(load(fixtures, "declan.json"))
    (cve,) = parse_evidence(load(fixtures, "declan_idm.json"), net)
    assert np.allclose(cve.lower, [17 / 24, 3 / 18]) and np.allclose(cve.upper, [18 / 24, 4 / 18])


def test_evidence_errors(fixtures):
    net = parse_network(load(fixtures, "traffic_light.json"))

    def parse(*items):
        return parse_evidence(json.dumps({"version": "1", "items": list(items)}), net)

    with pytest.raises(DocumentError, match="unknown variable"):
        parse({"variable": "Q", "kind": "hard", "state": "g"})
    with pytest.raises(DocumentError, match="unknown state"):
        parse({"variable": "X", "kind": "virtual", "likelihoods": {"blue": 1}})
    with pytest.raises(InvalidEvidenceError, match="lower > upper"):
        parse({"variable": "X", "kind": "credal-virtual", "lower": [2, 1, 1], "upper": [1, 1, 1]})
    with pytest.raises(DocumentError, match="unknown field"):
        parse({"variable": "X", "kind": "hard", "state": "g", "weight": 2})
    with pytest.raises(DocumentError, match="unknown evidence kind"):
        parse({"variable": "X", "kind": "rumour"})
    with pytest.raises(OverlappingEvidenceError):
        parse({"variable": "X", "kind": "hard", "state": "g"}, {"variable": "X", "kind": "vacuous"})


@pytest.mark.parametrize("name", NETWORKS)
def test_network_round_trip(fixtures, name):
    text = load(fixtures, name)
    net = parse_network(text)
    again = parse_network(dump_network(net))
    assert again.names == net.names
    for n in net.names:
        assert again.parents(n) == net.parents(n)
        a, b = net.models[n], again.models[n]
        assert type(a) is type(b)
    assert json.loads(dump_network(again)) == json.loads(dump_network(net))


@pytest.mark.parametrize("net_name,ev_name", EVIDENCE)
def test_evidence_round_trip(fixtures, net_name, ev_name):
    net = parse_network(load(fixtures, net_name))
    items = parse_evidence(load(fixtures, ev_name), net)
    again = parse_evidence(dump_evidence(items), net)
    assert dump_evidence(again) == dump_evidence(items)


def test_vacuous_and_incomplete_serialize_by_kind(fixtures):
    net = parse_network(load(fixtures, "traffic_light.json"))
    x = net.variable("X")
    vac = json.loads(dump_evidence([CredalVirtualEvidence.make_vacuous(x)]))["items"][0]
    inc = json.loads(dump_evidence([IncompleteObservation(x, ("g",)).to_cve()]))["items"][0]
    assert vac["kind"] == "vacuous"
    assert inc == {"variable": "X", "kind": "incomplete", "possible": ["g"]}


def test_emit_and_parse_result():
    doc = ResultDocument("X", "oracle", [("g", 4 / 9, 4 / 9), ("y", 0.0, 0.0), ("r", 0.1, 0.2)], None, ["note"])
    text = emit_result(doc, "json")
    back = parse_result(text)
    assert back.target == "X" and back.warnings == ["note"]
    assert back.states[0][1] == pytest.approx(4 / 9, rel=1e-12)
    assert emit_result(back, "json") == text
    table = emit_result(doc, "table")
    assert "g      = 0.444444444444" in table
    assert "[0.1, 0.2]" in table
    assert "warning: note" in table


def test_run_query_examples(fixtures):
    doc = run_query(fixtures / "traffic_light.json", fixtures / "example1_point_cve.json", "X", method="oracle")
    assert [round(a, 12) for _, a, _ in doc.states] == [round(4 / 9, 12), 0.0, round(5 / 9, 12)]
    assert all(a == b for _, a, b in doc.states)
    declan = run_query(fixtures / "declan.json", fixtures / "declan_idm.json", "D")
    assert declan.method == "two_u"
    assert declan.states[0][2] == pytest.approx(0.5294, abs=5e-3)
    assert len(declan.warnings) == 1


def test_missing_file(tmp_path):
    with pytest.raises(DocumentError, match="cannot read"):
        run_query(tmp_path / "none.json", None, "X")
