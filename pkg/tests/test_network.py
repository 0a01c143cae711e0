import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from claritas.network import (FinancialNetwork, NetworkValidationError, Scenario, ScenarioFileError,
                              admissible, load_scenario, pro_rata_matrix, save_scenario,
                              scenario_from_dict, scenario_to_dict, validate, validate_scenario)
from conftest import random_network

# reference pro-rata matrix and clearing figures for the six-bank example
A_REFERENCE = np.array([
    [0, 0.4857, 0, 0, 0, 0, 0.5143],
    [0, 0, 0.5, 0, 0, 0, 0.5],
    [0.375, 0, 0, 0.4375, 0.1875, 0, 0],
    [0.5085, 0, 0, 0, 0, 0, 0.4915],
    [0, 0, 0, 0, 0, 1.0, 0],
    [0, 0, 0.7222, 0, 0, 0, 0.2778],
    [0, 0, 0, 0, 0, 0, 1],
])
ROW_SUMS_REFERENCE = np.array([338.9, 189.62, 229.77, 290.5, 53.09, 173.08])
RESIDUALS_REFERENCE = np.array([11.08, 10.38, 10.18, 4.45, 6.91, 6.91])


def test_bundled_network_valid(single):
    assert validate(single.network) == []
    assert validate_scenario(single) == []


def test_bundled_network_reconstruction(single):
    # rebuild Pbar from the reference A and the nominal outflows recovered from the
    # reference clearing round (payments plus residuals)
    pbar = np.round(ROW_SUMS_REFERENCE + RESIDUALS_REFERENCE)
    np.testing.assert_allclose(pbar, [350, 200, 240, 295, 60, 180])
    rebuilt = np.diag(np.append(pbar, 0.0)) @ A_REFERENCE
    np.testing.assert_allclose(single.network.liabilities, rebuilt, atol=0.05)
    np.testing.assert_allclose(single.network.nominal_outflows[:6], pbar)


def test_diagonal_violation_named():
    L = np.zeros((3, 3))
    L[0, 0] = 3
    L[0, 1] = 1
    report = validate(FinancialNetwork(L))
    assert [v.code for v in report] == ["diagonal"]
    assert report[0].index == (0, 0)


def test_negative_entry_named():
    L = np.zeros((3, 3))
    L[1, 0] = -2
    report = validate(FinancialNetwork(L))
    assert [(v.code, v.index) for v in report] == [("negative", (1, 0))]
    assert "liability[1,0]" in report[0].message


def test_report_collects_everything():
    L = np.zeros((3, 3))
    L[0, 0] = 1
    L[1, 2] = -1
    L[2, 0] = 4
    L[0, 1] = np.nan
    codes = sorted(v.code for v in validate(FinancialNetwork(L)))
    assert codes == ["diagonal", "negative", "non_finite", "sink_row"]


def test_prorata_reference_rows(single):
    A = pro_rata_matrix(single.network)
    np.testing.assert_allclose(A[0], [0, 0.4857, 0, 0, 0, 0, 0.5143], atol=5e-5)
    np.testing.assert_allclose(A, A_REFERENCE, atol=5e-5)


def test_prorata_zero_outflow_row():
    L = np.zeros((3, 3))
    L[0, 1] = 5
    A = pro_rata_matrix(FinancialNetwork(L))
    np.testing.assert_array_equal(A[1], [0, 1, 0])
    np.testing.assert_array_equal(A[2], [0, 0, 1])


def test_prorata_single_creditor():
    net = FinancialNetwork.from_banks([[0, 10], [0, 0]], [0, 0])
    assert pro_rata_matrix(net)[0, 1] == 1.0


def test_prorata_rejects_invalid():
    L = np.zeros((2, 2))
    L[0, 1] = -1
    with pytest.raises(NetworkValidationError):
        pro_rata_matrix(FinancialNetwork(L))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.01, 1000))
def test_prorata_properties(n, seed, lam):
    net = random_network(np.random.default_rng(seed), n)
    A = pro_rata_matrix(net)
    np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-9)
    pbar = net.nominal_outflows
    pos = pbar > 0
    np.testing.assert_allclose((np.diag(pbar) @ A)[pos], net.liabilities[pos], atol=1e-9 * max(1, pbar.max()))
    np.testing.assert_allclose(pro_rata_matrix(net.scaled(lam)), A, atol=1e-9)


def test_admissible(single, robust_single):
    assert not admissible(single.network, single.inflows[0])
    assert admissible(robust_single.network, robust_single.inflows[0])
    net = single.network
    assert admissible(net, np.append(net.nominal_outflows[:-1], 0.0))


def test_scenario_roundtrip(tmp_path, multi):
    path = tmp_path / "s.json"
    save_scenario(multi, path)
    back = load_scenario(path)
    np.testing.assert_array_equal(back.network.liabilities, multi.network.liabilities)
    np.testing.assert_array_equal(back.inflows, multi.inflows)
    np.testing.assert_array_equal(back.budget, multi.budget)
    assert (back.alpha, back.eta, back.gamma) == (multi.alpha, multi.eta, multi.gamma)
    assert scenario_to_dict(back) == scenario_to_dict(multi)


def test_loader_appends_sink(single):
    net = single.network
    assert net.size == net.n + 1 == 7
    assert np.all(net.liabilities[-1] == 0)
    np.testing.assert_array_equal(single.inflows[:, -1], 0)


def _doc(multi):
    return scenario_to_dict(multi)


def test_unknown_field_rejected(multi):
    doc = _doc(multi)
    doc["budgets"] = [1, 2, 3]
    with pytest.raises(ScenarioFileError, match="budgets"):
        scenario_from_dict(doc)
    doc = _doc(multi)
    doc["params"]["rate"] = 0.1
    with pytest.raises(ScenarioFileError, match="params"):
        scenario_from_dict(doc)


def test_missing_and_misshaped_fields(multi):
    doc = _doc(multi)
    del doc["params"]
    with pytest.raises(ScenarioFileError):
        scenario_from_dict(doc)
    doc = _doc(multi)
    doc["inflows"][1] = doc["inflows"][1][:-1]
    with pytest.raises(ScenarioFileError, match="inflows/1"):
        scenario_from_dict(doc)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "banks": [1,,]\n}')
    with pytest.raises(ScenarioFileError, match="line 2 column"):
        load_scenario(path)


def test_scenario_semantic_validation(multi):
    bad = multi.replace(budget=np.array([30.0, 15.0, 50.0]), alpha=0.9,
                        inflows=multi.inflows * np.where(np.arange(7) == 0, -1, 1))
    codes = {v.code for v in validate_scenario(bad)}
    assert {"budget_decreasing", "alpha", "negative_inflow"} <= codes
    assert any(v.code == "shape" for v in validate_scenario(multi.replace(budget=np.ones(2))))


def test_bundled_files_document_provenance():
    from claritas.network import bundled_path
    for name in ("six_bank_single_period.json", "six_bank_multi_period.json",
                 "six_bank_robust_single.json", "six_bank_robust_multi.json"):
        doc = json.loads(bundled_path(name).read_text())
        assert "reconstruct" in doc["description"].lower()


def test_network_immutable(single):
    with pytest.raises(ValueError):
        single.network.liabilities[0, 1] = 1.0
    assert isinstance(single, Scenario)
