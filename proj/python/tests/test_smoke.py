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


import json

import numpy as np
import pytest

import liptraj


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    for name, contents in liptraj.synth_corpus(seed=42, clips=10):
        (root / name).write_text(contents)
    return root


@pytest.fixture(scope="module")
def dataset(corpus_dir):
    ds, rejected = liptraj.Dataset.build(str(corpus_dir))
    assert rejected == []
    return ds


def test_synth_is_deterministic():
    assert liptraj.synth_corpus(7, 4) == liptraj.synth_corpus(7, 4)
    assert liptraj.synth_corpus(7, 4) != liptraj.synth_corpus(8, 4)


def test_dataset_views(dataset, tmp_path):
    assert len(dataset) == 10
    assert dataset.landmark_set == "lips"
    clip = dataset.clip_ids[0]
    assert dataset.text(clip) == "HELLO WORLD"
    disp = dataset.displacements(clip)
    assert disp.shape[1] == 60
    pos = dataset.positions(clip)
    assert pos.shape == disp.shape
    assert np.array_equal(dataset.positions(clip, disp), pos)
    path = tmp_path / "d.ltds"
    dataset.save(str(path))
    again = liptraj.Dataset.load(str(path))
    assert np.array_equal(again.displacements(clip), disp)
    with pytest.raises(KeyError):
        dataset.text("nope")


def test_model_train_infer_and_checkpoint(dataset, tmp_path):
    config = liptraj.Model.preset("toy")
    config["output_width"] = 60
    model = liptraj.Model(config, seed=1)
    assert model.parameter_count > 0
    result = model.train(dataset, {"epochs": 3, "step_size": 10, "validation_interval": 1})
    assert len(result["epoch_losses"]) == 3
    assert np.isfinite(result["best_validation_loss"])
    frames, _ = model.infer("HELLO WORLD", dataset, max_frames=30)
    assert frames.shape[1] == 60 and 1 <= frames.shape[0] <= 30
    path = tmp_path / "m.ckpt"
    model.save(str(path))
    loaded = liptraj.Model.load(str(path))
    again, _ = loaded.infer("HELLO WORLD", dataset, max_frames=30)
    assert np.array_equal(frames, again)


def test_metrics_and_schedule():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 60))
    b = a.copy()
    b[:, 0] += 1.0
    b[:, 1] -= 2.0
    b[:, 2] += 3.0
    assert liptraj.manhattan_error(a, a)["mean_manhattan"] == 0.0
    assert liptraj.manhattan_error(b, a)["mean_manhattan"] == pytest.approx(6.0)
    assert liptraj.one_cycle_lr(4000) == pytest.approx(0.002)
    assert liptraj.one_cycle_lr(0) == pytest.approx(0.002 / 25)
    assert np.array_equal(liptraj.trajectory_from_csv(liptraj.trajectory_to_csv(a)), a)


def test_errors_carry_their_kind():
    with pytest.raises(liptraj.LiptrajError) as info:
        liptraj.manhattan_error(np.zeros((2, 60)), np.zeros((2, 204)))
    assert info.value.kind == "shape error" or "shape" in str(info.value)


def test_cli_pipeline(corpus_dir, tmp_path):
    code, out, err = liptraj.run_cli(["prepare", "--input", str(corpus_dir), "--out", str(tmp_path / "prep")])
    assert code == 0, err
    assert "dataset.ltds" in out
    manifest = json.loads((tmp_path / "prep" / "manifest.json").read_text())
    assert manifest["command"] == "prepare"
    code, _, err = liptraj.run_cli(["bogus"])
    assert code == 2 and "unknown subcommand" in err
