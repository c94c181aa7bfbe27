from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from deploybench.economics import (
    cost_of_energy,
    lifecycle_costs,
    load_economic_model,
    save_economic_model,
)
from deploybench.metrics import break_even
from deploybench.model import NEVER, EconomicModel, J_PER_KWH
from conftest import make_record


class TestCostOfEnergy:
    def test_reference_training_cost(self):
        model = EconomicModel(C_api=0.1, electricity_price=0.30)
        assert cost_of_energy(0.039, model) == pytest.approx(0.0117)

    def test_zero_energy(self):
        assert cost_of_energy(0.0, EconomicModel(C_api=0.1, electricity_price=0.5)) == 0.0

    def test_zero_price(self):
        assert cost_of_energy(1.0, EconomicModel(C_api=0.1, electricity_price=0.0)) == 0.0

    def test_negative_energy_rejected(self):
        with pytest.raises(ValueError):
            cost_of_energy(-0.1, EconomicModel(C_api=0.1))


class TestLifecycleCosts:
    def test_pure_energy_costing(self):
        model = EconomicModel(C_api=0.1, electricity_price=0.30)
        record = make_record(E_train=0.039)
        costs = lifecycle_costs(record, model)
        assert costs.C_train == pytest.approx(0.0117)
        assert costs.C_infer == pytest.approx(record.E_infer / J_PER_KWH * 0.30)

    def test_zero_model_zero_costs(self):
        model = EconomicModel(C_api=0.1, electricity_price=0.0)
        costs = lifecycle_costs(make_record(), model)
        assert costs.C_train == 0.0
        assert costs.C_infer == 0.0
        assert costs.carbon_train == 0.0

    def test_carbon_scaling(self):
        model = EconomicModel(C_api=0.1, carbon_intensity=0.4)
        costs = lifecycle_costs(make_record(E_train=0.5), model)
        assert costs.carbon_train == pytest.approx(0.2)

    def test_amortization_enters_training_cost(self):
        model = EconomicModel(C_api=0.1, electricity_price=0.0, amortization=2.0)
        costs = lifecycle_costs(make_record(), model, wall_hours=1.5)
        assert costs.C_train == pytest.approx(3.0)

    def test_amortized_request_share(self):
        model = EconomicModel(C_api=0.1, electricity_price=0.0, amortization=3600.0)
        costs = lifecycle_costs(make_record(), model, request_seconds=2.0)
        assert costs.C_infer == pytest.approx(2.0)

    def test_negative_wall_hours_rejected(self):
        with pytest.raises(ValueError, match="wall_hours"):
            lifecycle_costs(make_record(), EconomicModel(C_api=0.1), wall_hours=-1.0)

    @given(
        st.floats(min_value=0.0, max_value=10.0),
        st.floats(min_value=0.0, max_value=5.0),
        st.floats(min_value=1.0, max_value=3.0),
    )
    def test_linearity_in_energy_and_price(self, e_train, price, k):
        base_model = EconomicModel(C_api=0.1, electricity_price=price)
        scaled_model = EconomicModel(C_api=0.1, electricity_price=price * k)
        base = lifecycle_costs(make_record(E_train=e_train), base_model)
        energy_scaled = lifecycle_costs(make_record(E_train=e_train * k), base_model)
        price_scaled = lifecycle_costs(make_record(E_train=e_train), scaled_model)
        assert energy_scaled.C_train == pytest.approx(base.C_train * k, abs=1e-12)
        assert price_scaled.C_train == pytest.approx(base.C_train * k, abs=1e-12)

    @given(st.floats(min_value=1e-4, max_value=1.0), st.floats(min_value=1.0, max_value=4.0))
    def test_break_even_monotone_in_api_price(self, c_api, k):
        model = EconomicModel(C_setup=1.0, C_api=c_api, electricity_price=0.30)
        record = make_record()
        costs = lifecycle_costs(record, model)
        n1 = break_even(costs.C_train, costs.C_setup, c_api, costs.C_infer)
        n2 = break_even(costs.C_train, costs.C_setup, c_api * k, costs.C_infer)
        if n1 != NEVER:
            assert n2 != NEVER and n2 <= n1


class TestEconFile:
    def test_roundtrip(self, tmp_path):
        model = EconomicModel(
            C_setup=2.5,
            C_api=0.08,
            electricity_price=0.31,
            carbon_intensity=0.42,
            amortization=0.9,
        )
        path = tmp_path / "econ.cfg"
        save_economic_model(model, path)
        assert load_economic_model(path) == model

    def test_file_has_unit_comments(self, tmp_path):
        path = tmp_path / "econ.cfg"
        save_economic_model(EconomicModel(C_api=0.1), path)
        text = path.read_text()
        assert "currency per kWh" in text
        assert "kg CO2 per kWh" in text

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "econ.cfg"
        path.write_text("bogus = 1.0\n")
        with pytest.raises(ValueError, match="unknown economic model key"):
            load_economic_model(path)
