from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from deploybench.metrics import (
    IPWInput,
    adaptation_energy_ratio,
    break_even,
    cold_start_tax,
    deployment_metrics,
    intelligence_per_watt,
    quantization_fidelity,
    speedup_and_savings,
    std_delta,
    system_density,
)
from deploybench.model import (
    NEVER,
    Adaptation,
    EconomicModel,
    Family,
    PrecisionScorePair,
    Task,
    Tier,
)
from conftest import make_config, make_record

prices = st.floats(min_value=0.0, max_value=100.0, allow_nan=False)


class TestBreakEven:
    def test_reference_magnitude(self):
        # 1.30 / 0.097 = 13.40..., ceiled to whole requests.
        assert break_even(1.30, 0.0, 0.10, 0.003) == 14

    def test_equal_prices_never(self):
        assert break_even(1.0, 0.0, 0.05, 0.05) == NEVER

    def test_zero_upfront_is_immediate(self):
        assert break_even(0.0, 0.0, 0.10, 0.01) == 0

    def test_api_cheaper_than_local_never(self):
        assert break_even(1.0, 1.0, 0.01, 0.05) == NEVER

    def test_negative_input_rejected(self):
        with pytest.raises(ValueError, match="C_train"):
            break_even(-1.0, 0.0, 0.1, 0.01)

    @given(prices, prices, st.floats(min_value=1e-6, max_value=100.0), prices)
    def test_monotone_in_api_price(self, c_train, c_setup, c_api, c_infer):
        n1 = break_even(c_train, c_setup, c_api, c_infer)
        n2 = break_even(c_train, c_setup, c_api * 2, c_infer)
        if n1 != NEVER:
            assert n2 != NEVER
            assert n2 <= n1

    @given(prices, prices, st.floats(min_value=1e-6, max_value=100.0), prices)
    def test_monotone_in_upfront_cost(self, c_train, c_setup, c_api, c_infer):
        n1 = break_even(c_train, c_setup, c_api, c_infer)
        n2 = break_even(c_train + 1.0, c_setup, c_api, c_infer)
        if n1 == NEVER:
            assert n2 == NEVER
        else:
            assert n2 >= n1


class TestIntelligencePerWatt:
    def test_unit_scale_arithmetic(self):
        assert intelligence_per_watt(IPWInput(S_task=0.8, task_scale_max=1.0, E_req=2.0)) == 0.4

    def test_zero_score(self):
        assert intelligence_per_watt(IPWInput(S_task=0.0, task_scale_max=1.0, E_req=2.0)) == 0.0

    def test_chat_scale_normalized(self):
        ten = intelligence_per_watt(IPWInput(S_task=7.5, task_scale_max=10.0, E_req=3.0))
        unit = intelligence_per_watt(IPWInput(S_task=0.75, task_scale_max=1.0, E_req=3.0))
        assert ten == pytest.approx(unit)

    def test_zero_energy_rejected(self):
        with pytest.raises(ValueError, match="E_req"):
            IPWInput(S_task=0.5, task_scale_max=1.0, E_req=0.0)

    def test_score_above_scale_rejected(self):
        with pytest.raises(ValueError, match="S_task"):
            IPWInput(S_task=1.5, task_scale_max=1.0, E_req=1.0)

    @given(
        st.floats(min_value=0.01, max_value=1.0),
        st.floats(min_value=0.1, max_value=1e4),
        st.floats(min_value=0.1, max_value=100.0),
    )
    def test_doubling_energy_halves_ipw(self, score, e_req, k):
        base = intelligence_per_watt(IPWInput(S_task=score, task_scale_max=1.0, E_req=e_req))
        scaled = intelligence_per_watt(
            IPWInput(S_task=score, task_scale_max=1.0, E_req=e_req * k)
        )
        assert scaled == pytest.approx(base / k, rel=1e-9)


class TestSystemDensity:
    def test_simple_ratio(self):
        assert system_density(100.0, 2.0) == 50.0

    def test_reference_density(self):
        # Back-solved memory footprint reproduces the published density.
        assert system_density(4331.0, 0.625) == pytest.approx(6929.6)

    def test_zero_throughput(self):
        assert system_density(0.0, 1.0) == 0.0

    def test_zero_vram_rejected(self):
        with pytest.raises(ValueError, match="M_vram"):
            system_density(10.0, 0.0)

    @given(
        st.floats(min_value=0.1, max_value=1e5),
        st.floats(min_value=0.01, max_value=100.0),
        st.floats(min_value=0.1, max_value=10.0),
    )
    def test_homogeneity(self, t_put, m_vram, k):
        assert system_density(k * t_put, m_vram) == pytest.approx(
            k * system_density(t_put, m_vram), rel=1e-9
        )
        assert system_density(t_put, k * m_vram) == pytest.approx(
            system_density(t_put, m_vram) / k, rel=1e-9
        )


class TestColdStartTax:
    def test_reference_tax(self):
        assert cold_start_tax(457.5, 2.50) == 183.0

    def test_zero_load(self):
        assert cold_start_tax(0.0, 5.0) == 0.0

    def test_equal_energies(self):
        assert cold_start_tax(5.0, 5.0) == 1.0

    def test_zero_inference_energy_rejected(self):
        with pytest.raises(ValueError, match="E_infer"):
            cold_start_tax(1.0, 0.0)

    @given(
        st.floats(min_value=0.1, max_value=1e5),
        st.floats(min_value=0.01, max_value=100.0),
        st.floats(min_value=0.1, max_value=10.0),
    )
    def test_homogeneity(self, e_load, e_infer, k):
        base = cold_start_tax(e_load, e_infer)
        assert cold_start_tax(k * e_load, e_infer) == pytest.approx(k * base, rel=1e-9)
        assert cold_start_tax(e_load, k * e_infer) == pytest.approx(base / k, rel=1e-9)


class TestQuantizationFidelity:
    def test_chat_pair(self):
        pair = PrecisionScorePair(S_FP16=7.31, S_INT4=7.32)
        assert round(quantization_fidelity(pair), 1) == 100.1

    def test_identity_is_100(self):
        assert quantization_fidelity(PrecisionScorePair(2.0, 2.0)) == 100.0

    def test_summarization_pair_from_printed_scores(self):
        # Printed two-decimal inputs give 98.8; source-table checks carry
        # a +-0.5 pp tolerance for unrounded-input drift.
        pair = PrecisionScorePair(S_FP16=0.86, S_INT4=0.85)
        assert round(quantization_fidelity(pair), 1) == 98.8

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError, match="S_FP16"):
            quantization_fidelity(PrecisionScorePair(0.0, 1.0))

    @given(st.floats(min_value=0.01, max_value=100.0))
    def test_equal_scores_always_100(self, s):
        assert quantization_fidelity(PrecisionScorePair(s, s)) == 100.0


class TestStdDelta:
    def test_forty_percent_increase(self):
        pair = PrecisionScorePair(1.0, 1.0, std_FP16=0.10, std_INT4=0.14)
        assert std_delta(pair) == pytest.approx(40.0)

    def test_equal_stds(self):
        pair = PrecisionScorePair(1.0, 1.0, std_FP16=0.10, std_INT4=0.10)
        assert std_delta(pair) == 0.0

    def test_collapsed_std_is_minus_100(self):
        pair = PrecisionScorePair(1.0, 1.0, std_FP16=0.10, std_INT4=0.0)
        assert std_delta(pair) == -100.0

    def test_zero_baseline_std_rejected(self):
        pair = PrecisionScorePair(1.0, 1.0, std_FP16=0.0, std_INT4=0.1)
        with pytest.raises(ValueError, match="variance shift undefined"):
            std_delta(pair)


class TestSpeedupAndSavings:
    def _pair(self, fp16_tput, int4_tput, fp16_e, int4_e):
        fp16 = make_record(
            config=make_config(adaptation=Adaptation.LORA_FP16),
            T_put=fp16_tput,
            E_infer=fp16_e,
        )
        int4 = make_record(
            config=make_config(adaptation=Adaptation.LORA_INT4_PTQ),
            T_put=int4_tput,
            E_infer=int4_e,
        )
        return fp16, int4

    def test_reference_speedup(self):
        fp16, int4 = self._pair(2235.0, 4331.0, 6.45, 2.50)
        speedup, savings = speedup_and_savings(fp16, int4)
        assert speedup == pytest.approx(1.94, abs=0.005)
        assert savings == pytest.approx(61.2, abs=0.05)

    def test_identical_records(self):
        fp16, _ = self._pair(100.0, 100.0, 5.0, 5.0)
        speedup, savings = speedup_and_savings(fp16, fp16)
        assert speedup == 1.0
        assert savings == 0.0

    def test_mismatched_configs_rejected(self):
        fp16 = make_record(config=make_config(adaptation=Adaptation.LORA_FP16))
        other = make_record(
            config=make_config(family=Family.QWEN, adaptation=Adaptation.LORA_INT4_PTQ)
        )
        with pytest.raises(ValueError, match="mismatched"):
            speedup_and_savings(fp16, other)

    @given(
        st.floats(min_value=1.0, max_value=1e4), st.floats(min_value=1.0, max_value=1e4)
    )
    def test_swap_inverts_speedup(self, a, b):
        fp16, int4 = self._pair(a, b, 5.0, 4.0)
        s_forward, _ = speedup_and_savings(fp16, int4)
        # Swapped comparison runs through the same formula with roles reversed.
        s_backward = fp16.T_put / int4.T_put
        assert s_forward * s_backward == pytest.approx(1.0, rel=1e-9)


class TestAdaptationEnergyRatio:
    def _pair(self, lora_kwh, qlora_kwh):
        lora = make_record(
            config=make_config(adaptation=Adaptation.LORA_FP16), E_train=lora_kwh
        )
        qlora = make_record(
            config=make_config(adaptation=Adaptation.QLORA_INT4), E_train=qlora_kwh
        )
        return lora, qlora

    @pytest.mark.parametrize(
        "lora,qlora,expected",
        [(0.039, 0.251, 6.4), (0.171, 0.511, 3.0)],
    )
    def test_reference_ratios(self, lora, qlora, expected):
        rec_l, rec_q = self._pair(lora, qlora)
        assert adaptation_energy_ratio(rec_l, rec_q) == pytest.approx(expected, abs=0.05)

    def test_equal_energies(self):
        rec_l, rec_q = self._pair(0.1, 0.1)
        assert adaptation_energy_ratio(rec_l, rec_q) == 1.0

    def test_zero_baseline_rejected(self):
        rec_l, rec_q = self._pair(0.0, 0.1)
        with pytest.raises(ValueError, match="E_train"):
            adaptation_energy_ratio(rec_l, rec_q)


class TestDeploymentMetricsBundle:
    def test_bundle_fields(self):
        econ = EconomicModel(C_setup=1.0, C_api=0.10, electricity_price=0.30)
        record = make_record()
        bundle = deployment_metrics(record, econ)
        assert bundle.rho_sys == pytest.approx(4331.0 / 0.625)
        assert bundle.C_tax == pytest.approx(183.0)
        assert bundle.Q_ret is None
        assert bundle.speedup is None
        assert isinstance(bundle.N_break, int)

    def test_bundle_with_baseline_and_pair(self):
        econ = EconomicModel(C_setup=1.0, C_api=0.10, electricity_price=0.30)
        fp16 = make_record(
            config=make_config(adaptation=Adaptation.LORA_FP16), T_put=2235.0, E_infer=6.45
        )
        int4 = make_record(T_put=4331.0, E_infer=2.50)
        pair = PrecisionScorePair(7.31, 7.32, 0.04, 0.04)
        bundle = deployment_metrics(int4, econ, fp16_baseline=fp16, score_pair=pair)
        assert bundle.speedup == pytest.approx(1.94, abs=0.005)
        assert bundle.energy_savings == pytest.approx(61.2, abs=0.05)
        assert round(bundle.Q_ret, 1) == 100.1
        assert bundle.std_delta == pytest.approx(0.0)

    def test_purity_bit_identical(self):
        econ = EconomicModel(C_setup=1.0, C_api=0.10, electricity_price=0.30)
        record = make_record()
        assert deployment_metrics(record, econ) == deployment_metrics(record, econ)

    def test_chat_scale_used_for_ipw(self):
        econ = EconomicModel(C_api=0.10)
        chat = make_record(config=make_config(task=Task.CHAT), S_task=7.5, E_infer=3.0)
        bundle = deployment_metrics(chat, econ)
        assert bundle.IPW == pytest.approx(0.75 / 3.0)
