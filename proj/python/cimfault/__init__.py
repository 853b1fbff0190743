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

"""Weight fault injection and redundancy analysis for compute-in-memory transformer inference."""

from ._core import (
    CodecError,
    ConfigError,
    IoError,
    ModelConfig,
    ShapeError,
    __version__,
    apply_saf,
    calibrate_area,
    cli_main,
    compare_outputs,
    decode_bf16,
    encode_bf16,
    encode_bf16_saturating,
    estimate_area,
    estimate_energy,
    inject_block_gaussian,
    program_weights,
    round_to_bf16,
    run_experiment,
    toy_logits,
)

__all__ = [
    "CodecError",
    "ConfigError",
    "IoError",
    "ModelConfig",
    "ShapeError",
    "__version__",
    "apply_saf",
    "calibrate_area",
    "cli_main",
    "compare_outputs",
    "decode_bf16",
    "encode_bf16",
    "encode_bf16_saturating",
    "estimate_area",
    "estimate_energy",
    "inject_block_gaussian",
    "program_weights",
    "round_to_bf16",
    "run_experiment",
    "toy_logits",
]
