# Copyright 2026 The maskflow Authors
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
"""The numpy writer against the committed golden bytes."""

import json

import numpy as np
import pytest

from maskflow import formats


def test_feature_golden(fixtures):
  values = (np.arange(24, dtype=np.float32) - 10) * 0.25
  data = formats.encode_feature_map(values.reshape(2, 3, 4))
  assert data == (fixtures / "golden_2x3x4.fmap").read_bytes()
  np.testing.assert_array_equal(formats.decode_feature_map(data), values.reshape(2, 3, 4))


def test_mask_golden(fixtures):
  labels = np.array([[(y * 4 + x) % 5 for x in range(4)] for y in range(3)])
  data = formats.encode_mask(labels, 5)
  assert data == (fixtures / "golden_3x4_k5.lmsk").read_bytes()
  back, k = formats.decode_mask(data)
  assert k == 5
  np.testing.assert_array_equal(back, labels)


def test_one_by_one(fixtures):
  np.testing.assert_array_equal(formats.read_feature_map(fixtures / "one_1x1x1.fmap"), [[[1.5]]])


@pytest.mark.parametrize("name, message", [
    ("bad_magic.fmap", "not a feature file"),
    ("truncated_4x4x8.fmap", "expected 512"),
    ("bad_dtype.fmap", "unsupported"),
    ("bad_version.fmap", "unsupported"),
    ("nan_1x1x2.fmap", "non-finite"),
])
def test_broken_feature_files(fixtures, name, message):
  with pytest.raises(formats.FormatError, match=message):
    formats.read_feature_map(fixtures / name)


def test_writer_rejects_bad_input():
  with pytest.raises(formats.FormatError, match="non-finite"):
    formats.encode_feature_map(np.array([[[0.0, np.inf]]]))
  with pytest.raises(formats.FormatError, match="label out of range"):
    formats.encode_mask(np.array([[0, 5]]), 2)
  with pytest.raises(formats.FormatError):
    formats.encode_feature_map(np.zeros((2, 2)))


def test_float64_input_is_stored_as_float32():
  a = np.random.default_rng(0).normal(size=(3, 2, 5))
  back = formats.decode_feature_map(formats.encode_feature_map(a))
  assert back.dtype == np.float32
  np.testing.assert_array_equal(back, a.astype(np.float32))


def test_manifest_matches_fixture_layout(tmp_path, fixtures):
  path = formats.write_manifest(
      tmp_path / "manifest.json", "min",
      [("background", (0, 0, 0)), ("tool", (255, 0, 0))],
      {"v1": [formats.frame_entry(0, "features/f0.fmap", mask="masks/m0.lmsk"),
              formats.frame_entry(1, "features/f1.fmap"),
              formats.frame_entry(2, "features/f2.fmap")]})
  assert json.loads(path.read_text()) == json.loads((fixtures / "dataset_min" / "manifest.json").read_text())


def test_manifest_rejects_unordered_frames(tmp_path):
  with pytest.raises(formats.FormatError, match="strictly increasing"):
    formats.write_manifest(tmp_path / "m.json", "d", [("bg", (0, 0, 0))],
                           {"v": [formats.frame_entry(1, "a.fmap"), formats.frame_entry(1, "b.fmap")]})
