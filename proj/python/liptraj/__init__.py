# Copyright 2026 The liptraj Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Text-driven lip landmark trajectories: Python bindings to the C++ core."""

from ._core import (
    Dataset,
    LiptrajError,
    Model,
    __version__,
    manhattan_error,
    one_cycle_lr,
    run_cli,
    synth_corpus,
    trajectory_from_csv,
    trajectory_to_csv,
)

__all__ = [
    "Dataset",
    "LiptrajError",
    "Model",
    "manhattan_error",
    "one_cycle_lr",
    "run_cli",
    "synth_corpus",
    "trajectory_from_csv",
    "trajectory_to_csv",
]
