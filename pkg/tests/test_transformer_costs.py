import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inferwatt.bundled import bundled_model, qwen_family
from inferwatt.errors import ConfigError
from inferwatt.kvconfig import parse_kv
from inferwatt.roofline import Boundedness, boundedness, total_latency
from inferwatt.transformer_costs import (
    ModelSpec,
    decode_step_costs,
    kv_cache_bytes,
    model_from_kv,
    predict_decode_latency,
    predict_prefill_latency,
    prefill_costs,
    size_scaling_curve,
    weight_bytes,
)


def tiny_model(**overrides):
    kwargs = dict(n_layers=4, hidden=256, n_heads=4, head_dim=64, ffn_dim=1024, vocab=1000)
    kwargs.update(overrides)
    return ModelSpec(**kwargs)


def by_label(costs):
    return {c.label: c for c in costs}


class TestModelSpec:
    def test_llama_8b_parameter_count(self, llama8b):
        # embed + 32 * (qkv + out + gated ffn) + head, norms omitted
        expect = (
            128256 * 4096
            + 32 * (4096 * 4096 + 2 * 4096 * 1024 + 4096 * 4096 + 3 * 4096 * 14336)
            + 128256 * 4096
        )
        assert llama8b.n_params == expect == 8029995008

    def test_head_geometry_enforced(self):
        with pytest.raises(ValueError):
            tiny_model(n_heads=3)

    def test_kv_heads_must_divide(self):
        with pytest.raises(ValueError):
            tiny_model(kv_heads=3)
        assert tiny_model(kv_heads=2).kv_dim == 128

    def test_dimensions_must_be_positive_integers(self):
        with pytest.raises(ValueError):
            tiny_model(vocab=0)
        with pytest.raises(ValueError):
            tiny_model(hidden=256.0, n_heads=4)

    def test_tied_embeddings_counted_once(self):
        untied = tiny_model()
        tied = tiny_model(tied_embeddings=True)
        assert untied.n_params - tied.n_params == untied.vocab * untied.hidden

    def test_bundled_family_sizes_match_names(self):
        # each spec's parameter count should round to its nameplate size
        sizes = {"qwen25-0.5b-fp32": 0.5e9, "qwen25-1.5b-fp32": 1.5e9,
                 "qwen25-3b-fp32": 3e9, "qwen25-7b-fp32": 7e9, "qwen25-14b-fp32": 14e9}
        for spec in qwen_family():
            assert spec.n_params == pytest.approx(sizes[spec.name], rel=0.15)

    def test_config_round_trip(self):
        kv = parse_kv(
            "n_layers = 4\nhidden = 256\nn_heads = 4\nhead_dim = 64\n"
            "ffn_dim = 1024\nvocab = 1000\nkv_heads = 2\ngated_ffn = true\n"
        )
        spec = model_from_kv(kv)
        assert spec.kv_heads == 2 and spec.gated_ffn

    def test_unknown_config_key_rejected(self):
        with pytest.raises(ConfigError):
            model_from_kv(parse_kv("n_layers = 4\nbogus = 1\n"))


class TestPrefillCosts:
    def test_matmul_counting_rule(self):
        # attn_out_proj is a bare (s x h) @ (h x h) matmul per layer:
        # 2*m*n*k with no folded constants
        m = tiny_model()
        s = 17
        cost = by_label(prefill_costs(m, s))["attn_out_proj"]
        assert cost.flops == m.n_layers * 2 * s * m.hidden * m.hidden

    def test_per_token_flops_close_to_twice_param_count(self, llama8b):
        # brute-force class sum at s=1 vs the 2*n_params rule of thumb
        # (the embedding contributes parameters but no multiply-adds)
        flops = sum(c.flops for c in prefill_costs(llama8b, 1))
        assert flops == pytest.approx(2 * llama8b.n_params, rel=0.10)

    def test_doubling_hidden_quadruples_projection_flops(self, llama8b):
        wide = ModelSpec(n_layers=32, hidden=8192, n_heads=64, head_dim=128,
                         kv_heads=16, ffn_dim=28672, vocab=128256, gated_ffn=True)
        s = 64
        for label in ("qkv_proj", "attn_out_proj", "ffn"):
            a = by_label(prefill_costs(llama8b, s))[label].flops
            b = by_label(prefill_costs(wide, s))[label].flops
            # the folded norm constants are linear in h, hence the loose digit
            assert b / a == pytest.approx(4.0, rel=1e-3)

    def test_rejects_empty_prompt(self):
        with pytest.raises(ValueError):
            prefill_costs(tiny_model(), 0)

    def test_flops_linear_in_s_except_attention(self, llama8b):
        s_grid = np.array([128, 256, 512, 1024, 2048], dtype=float)
        per_class = {}
        for s in s_grid:
            for c in prefill_costs(llama8b, int(s)):
                per_class.setdefault(c.label, []).append(c.flops)
        for label, flops in per_class.items():
            y = np.array(flops)
            if label == "embed":
                continue
            if label == "attn":
                # pure quadratic: zero residual against s^2 alone
                coef = np.vstack([s_grid**2]).T
                beta, *_ = np.linalg.lstsq(coef, y, rcond=None)
                assert np.allclose(coef @ beta, y, rtol=1e-12)
            else:
                coef = np.vstack([s_grid, np.ones_like(s_grid)]).T
                beta, *_ = np.linalg.lstsq(coef, y, rcond=None)
                assert np.allclose(coef @ beta, y, rtol=1e-12)
                assert beta[1] == pytest.approx(0.0, abs=1e-3)


class TestDecodeStepCosts:
    def test_kv_cache_for_single_token_context(self):
        m = tiny_model()  # kv_heads defaults to n_heads, so kv_dim == hidden
        assert kv_cache_bytes(m, 1) == 2 * m.n_layers * m.hidden * m.bytes_per_param

    def test_kv_cache_respects_grouped_heads(self):
        m = tiny_model(kv_heads=2)
        assert kv_cache_bytes(m, 10) == 2 * 10 * m.n_layers * 2 * 64 * m.bytes_per_param

    def test_weight_read_is_parameter_footprint(self, llama8b):
        assert weight_bytes(llama8b) == llama8b.n_params * 4
        assert weight_bytes(llama8b) == pytest.approx(3.2e10, rel=5e-3)

    def test_step_bytes_contain_full_weight_read(self, llama8b):
        total = sum(c.bytes for c in decode_step_costs(llama8b, 1000))
        assert total > weight_bytes(llama8b)
        # everything beyond weights is KV cache plus context-free activations
        overhead = total - weight_bytes(llama8b) - kv_cache_bytes(llama8b, 1000)
        assert 0 < overhead < 0.01 * weight_bytes(llama8b)

    def test_cache_term_linear_in_context(self, llama8b):
        b1 = sum(c.bytes for c in decode_step_costs(llama8b, 1000))
        b2 = sum(c.bytes for c in decode_step_costs(llama8b, 2000))
        assert b2 - b1 == kv_cache_bytes(llama8b, 1000)

    def test_weight_and_activation_bytes_context_free(self, llama8b):
        # subtracting the cache leaves the same bytes at any context length
        for ctx in (1, 500, 5000):
            residue = sum(c.bytes for c in decode_step_costs(llama8b, ctx)) - kv_cache_bytes(llama8b, ctx)
            if ctx == 1:
                base = residue
            assert residue == pytest.approx(base, rel=1e-12)

    def test_rejects_zero_context(self):
        with pytest.raises(ValueError):
            decode_step_costs(tiny_model(), 0)


class TestBoundednessOnReferenceHardware:
    @pytest.mark.parametrize("s", [100, 1000, 4000])
    def test_prefill_matmul_classes_compute_bound(self, llama8b, hw, s):
        for cost in prefill_costs(llama8b, s):
            if cost.flops > 0:
                assert boundedness(cost, hw) is Boundedness.COMPUTE_BOUND, cost.label

    @pytest.mark.parametrize("ctx", [1, 100, 1000, 8000])
    def test_decode_classes_all_memory_bound(self, llama8b, hw, ctx):
        for cost in decode_step_costs(llama8b, ctx):
            assert boundedness(cost, hw) is Boundedness.MEMORY_BOUND, cost.label


class TestPredictPrefill:
    def test_total_is_roofline_sum_over_classes(self, llama8b, hw):
        s = 777
        breakdown = predict_prefill_latency(llama8b, hw, s)
        assert breakdown.total_seconds == pytest.approx(
            total_latency(prefill_costs(llama8b, s), hw), rel=1e-12
        )
        assert breakdown.total_seconds == pytest.approx(
            sum(c.seconds for c in breakdown.classes), rel=1e-12
        )

    def test_per_token_slope_near_reference_alpha(self, llama8b, hw, coeffs):
        t_lo = predict_prefill_latency(llama8b, hw, 900).total_seconds
        t_hi = predict_prefill_latency(llama8b, hw, 1100).total_seconds
        slope = (t_hi - t_lo) / 200
        assert abs(slope / coeffs.prefill_latency.alpha - 1) < 0.25

    def test_nearly_linear_in_the_linear_regime(self, llama8b, hw):
        t1 = predict_prefill_latency(llama8b, hw, 1000).total_seconds
        t2 = predict_prefill_latency(llama8b, hw, 2000).total_seconds
        assert t2 < 2.2 * t1

    def test_dominant_class_is_a_matmul(self, llama8b, hw):
        assert predict_prefill_latency(llama8b, hw, 2000).dominant_class in ("ffn", "qkv_proj")


class TestPredictDecode:
    def test_single_step_matches_step_costs(self, llama8b, hw):
        one = predict_decode_latency(llama8b, hw, 1000, 1)
        assert one.total_seconds == pytest.approx(
            total_latency(decode_step_costs(llama8b, 1000), hw), rel=1e-12
        )

    def test_per_token_cost_near_reference_eta(self, llama8b, hw, coeffs):
        per_token = predict_decode_latency(llama8b, hw, 1000, 100).total_seconds / 100
        assert abs(per_token / coeffs.decode_latency.eta - 1) < 0.25

    def test_strictly_increasing_in_g(self, llama8b, hw):
        totals = [predict_decode_latency(llama8b, hw, 500, g).total_seconds for g in (1, 2, 8, 32)]
        assert all(b > a for a, b in zip(totals, totals[1:]))

    def test_convex_in_g_from_growing_context(self, llama8b, hw):
        t = {g: predict_decode_latency(llama8b, hw, 1000, g).total_seconds for g in (100, 200, 300)}
        assert t[300] - t[200] > t[200] - t[100]

    def test_step_latency_nondecreasing_in_context(self, llama8b, hw):
        steps = [total_latency(decode_step_costs(llama8b, ctx), hw) for ctx in (1, 10, 100, 1000, 10000)]
        assert all(b >= a for a, b in zip(steps, steps[1:]))

    def test_latency_lies_in_the_polynomial_family(self, llama8b, hw):
        # fitting {g, s*g, g^2, 1} reproduces the analytic totals to
        # floating-point precision: the model really is that polynomial
        s = 1000
        g_grid = np.arange(8, 257, 8, dtype=float)
        y = np.array([predict_decode_latency(llama8b, hw, s, int(g)).total_seconds for g in g_grid])
        basis = np.column_stack([g_grid, s * g_grid, g_grid**2, np.ones_like(g_grid)])
        beta, *_ = np.linalg.lstsq(basis, y, rcond=None)
        residual = np.max(np.abs(y - basis @ beta))
        assert residual < 1e-3 * np.max(y) * 0.001  # 0.1% of 0.1% headroom


class TestSizeScaling:
    def test_single_model_single_row(self, llama8b, hw):
        rows = size_scaling_curve([llama8b], hw, 128, 16)
        assert len(rows) == 1 and rows[0].n_params == llama8b.n_params

    def test_rows_ordered_by_parameter_count(self, hw):
        fam = qwen_family()
        rows = size_scaling_curve(fam[::-1], hw, 128, 16)
        params = [r.n_params for r in rows]
        assert params == sorted(params)

    def test_decode_energy_scales_quadratically_with_width(self, hw):
        hs = [2048, 4096, 8192]
        family = [
            ModelSpec(n_layers=32, hidden=h, n_heads=h // 128, head_dim=128,
                      ffn_dim=4 * h, vocab=16000, name=f"h{h}")
            for h in hs
        ]
        rows = size_scaling_curve(family, hw, 128, 64)
        slope = np.polyfit(np.log(hs), np.log([r.decode_wh for r in rows]), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_doubling_depth_doubles_decode_latency(self, hw):
        # weights and cache both scale with depth; a minimal vocabulary keeps
        # the depth-independent embedding/head traffic at the 1e-6 level
        shallow = ModelSpec(n_layers=32, hidden=4096, n_heads=32, head_dim=128,
                            ffn_dim=16384, vocab=1)
        deep = ModelSpec(n_layers=64, hidden=4096, n_heads=32, head_dim=128,
                         ffn_dim=16384, vocab=1)
        ratio = predict_decode_latency(deep, hw, 128, 16).total_seconds \
            / predict_decode_latency(shallow, hw, 128, 16).total_seconds
        assert ratio == pytest.approx(2.0, abs=1e-5)


@settings(max_examples=25, deadline=None)
@given(s=st.integers(min_value=1, max_value=2048))
def test_prefill_costs_positive_and_labeled(s):
    costs = prefill_costs(tiny_model(), s)
    assert [c.label for c in costs] == ["embed", "qkv_proj", "attn", "attn_out_proj", "ffn", "lm_head"]
    assert all(c.bytes > 0 for c in costs)
    assert all(c.flops >= 0 for c in costs)
