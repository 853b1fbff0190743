# Copyright 2026 The cimfault Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import cimfault


def test_bf16_codec():
    assert cimfault.encode_bf16(1.0) == 0x3F80
    assert cimfault.encode_bf16(0.028) == 0x3CE5
    assert cimfault.decode_bf16(0x3CF1) == 0.0294189453125
    assert cimfault.encode_bf16_saturating(1e39) == 0x7F7F
    with pytest.raises(cimfault.CodecError):
        cimfault.decode_bf16(0x7FC0)


def test_fault_injection_is_deterministic_and_bounded():
    rng = np.random.default_rng(0)
    w = rng.normal(0.0, 0.02, size=(96, 80)).astype(np.float32)
    a = cimfault.program_weights(w, sigma=0.02, p=0.01, seed=3)
    b = cimfault.program_weights(w, sigma=0.02, p=0.01, seed=3)
    assert a.shape == w.shape
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, cimfault.program_weights(w, sigma=0.02, p=0.01, seed=4))
    clean = cimfault.program_weights(w, sigma=0.0, p=0.0)
    np.testing.assert_array_equal(clean, np.vectorize(cimfault.round_to_bf16)(w).astype(np.float32))


def test_saf_keeps_sign_and_exponent():
    w = np.linspace(-2.0, 2.0, 64 * 64, dtype=np.float32).reshape(64, 64)
    w = cimfault.program_weights(w, sigma=0.0, p=0.0)  # bf16-exact input
    out = cimfault.apply_saf(w, p=0.5, seed=1)
    assert not np.array_equal(out, w)
    hi_in = w.view(np.uint32) >> 23
    hi_out = out.view(np.uint32) >> 23
    np.testing.assert_array_equal(hi_in, hi_out)


def test_toy_model_and_metrics():
    cfg = cimfault.ModelConfig()
    cfg.n_layers, cfg.d_model, cfg.n_heads, cfg.head_dim, cfg.d_ffn, cfg.vocab = 2, 32, 2, 16, 64, 64
    tokens = [1, 5, 9, 2]
    clean = cimfault.toy_logits(tokens, cfg)
    assert clean.shape == (4, 64)
    assert cimfault.compare_outputs(clean, clean) == (0.0, 1.0)
    faulted = cimfault.toy_logits(tokens, cfg, sigma=0.02, p=0.01, fault_seed=7)
    err, agree = cimfault.compare_outputs(clean, faulted)
    assert err > 0.0 and 0.0 <= agree <= 1.0
    redundant = cimfault.toy_logits(tokens, cfg, sigma=0.02, p=0.01, fault_seed=7, redundancy="ffn:4")
    assert redundant.shape == clean.shape


def test_cost_model():
    assert cimfault.estimate_area("none") == 75.0
    assert abs(cimfault.estimate_area("attention:4") - 160.0) <= 2.0
    assert cimfault.estimate_area("layers:0-6:2") == pytest.approx(91.75)
    fit = cimfault.calibrate_area([("none", 28, 75.0), ("attention:2", 28, 103.0), ("ffn:2", 28, 114.0)])
    assert fit["area_base"] == pytest.approx(75.0)
    assert fit["area_attn_copy"] == pytest.approx(28.0)
    assert fit["area_ffn_copy"] == pytest.approx(39.0)
    assert cimfault.estimate_energy("none", 0, 0) == 0.0
    assert cimfault.estimate_energy("ffn:4", 4, 8) > cimfault.estimate_energy("none", 4, 8)


def test_run_experiment_and_cli():
    text = (
        "[model]\nn_layers = 2\nd_model = 32\nn_heads = 2\nhead_dim = 16\nd_ffn = 64\nvocab = 64\n"
        "[noise]\nsigma_grid = 0, 0.02\ntile = 16x16\nsaf_p = 0\n[experiment]\nn_runs = 2\nmax_new_tokens = 2\n"
    )
    csv = cimfault.run_experiment(text, format="csv")
    lines = csv.strip().splitlines()
    assert lines[0].startswith("run_seed,sigma,saf_p,redundancy")
    assert len(lines) == 5
    assert cimfault.run_experiment(text, workers=2) == cimfault.run_experiment(text)
    with pytest.raises(cimfault.ConfigError):
        cimfault.run_experiment("[noise]\nsaf_p = 2\n")
    code, out, _ = cimfault.cli_main(["--help"])
    assert code == 0 and "calibrate-area" in out
