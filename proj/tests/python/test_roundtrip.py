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
"""Files written by the numpy side are read by the C++ side, and back."""

import json
import subprocess

import numpy as np
import pytest

import maskflow
from maskflow import formats


def _dataset(root, rng, frames=4, h=6, w=7, c=5, k=13):
  """Writes a small extractor-style dataset and returns its arrays."""
  feats = [rng.normal(size=(h, w, c)).astype(np.float32) for _ in range(frames)]
  masks = [rng.integers(0, k, size=(h, w)) for _ in range(frames)]
  entries = []
  for i in range(frames):
    formats.write_feature_map(root / "features" / ("frame_%05d.fmap" % i), feats[i])
    formats.write_mask(root / "masks" / ("frame_%05d.lmsk" % i), masks[i], k)
    entries.append(formats.frame_entry(i, root / "features" / ("frame_%05d.fmap" % i),
                                       mask=root / "masks" / ("frame_%05d.lmsk" % i)))
  palette = [("class_%d" % i, (i * 19, 0, 0)) for i in range(k)]
  video = {"frames": entries, "preprocess": {"pad": [0, 0, 0, 0], "scale": 1.0}}
  manifest = formats.write_manifest(root / "manifest.json", "roundtrip", palette, {"clip": video})
  return manifest, feats, masks


def test_cpp_reads_python_bytes(tmp_path):
  rng = np.random.default_rng(7)
  manifest, feats, masks = _dataset(tmp_path, rng)
  doc = maskflow.load_manifest(manifest)
  assert doc["dataset"] == "roundtrip"
  assert len(doc["palette"]) == 13
  frames = doc["videos"][0]["frames"]
  assert [f["index"] for f in frames] == [0, 1, 2, 3]
  for f, a, m in zip(frames, feats, masks):
    got = maskflow.read_feature_map(f["features"])
    assert got.dtype == np.float32
    np.testing.assert_array_equal(got, a)
    labels, k = maskflow.read_mask(f["mask"])
    assert k == 13
    np.testing.assert_array_equal(labels, m)


def test_encoders_agree_byte_for_byte():
  rng = np.random.default_rng(3)
  for shape in [(1, 1, 1), (3, 4, 2), (8, 5, 17)]:
    a = rng.normal(size=shape).astype(np.float32)
    assert maskflow.encode_feature_map(a) == formats.encode_feature_map(a)
    np.testing.assert_array_equal(maskflow.decode_feature_map(formats.encode_feature_map(a)), a)
  m = rng.integers(0, 300, size=(4, 9))
  assert maskflow.encode_mask(m, 300) == formats.encode_mask(m, 300)


def test_python_reads_cpp_bytes(tmp_path):
  a = np.linspace(-2, 2, 2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
  maskflow.write_feature_map(tmp_path / "a.fmap", a)
  np.testing.assert_array_equal(formats.read_feature_map(tmp_path / "a.fmap"), a)
  m = np.array([[0, 1], [2, 1]])
  maskflow.write_mask(tmp_path / "m.lmsk", m, 3)
  back, k = formats.read_mask(tmp_path / "m.lmsk")
  assert k == 3
  np.testing.assert_array_equal(back, m)


def test_cpp_rejects_what_python_rejects(fixtures):
  for name in ["bad_magic.fmap", "truncated_4x4x8.fmap", "nan_1x1x2.fmap"]:
    with pytest.raises(maskflow.MaskflowError) as err:
      maskflow.read_feature_map(fixtures / name)
    assert err.value.category == "format"
    with pytest.raises(formats.FormatError):
      formats.read_feature_map(fixtures / name)


def test_cli_tracks_python_dataset(tmp_path, cli):
  rng = np.random.default_rng(11)
  manifest, _, _ = _dataset(tmp_path / "data", rng)
  out = tmp_path / "pred"
  subprocess.run([cli, "track", "--manifest", str(manifest), "--out", str(out), "--window", "4"],
                 check=True, capture_output=True)
  names = sorted(p.name for p in out.glob("*.lmsk"))
  assert names == ["frame_00001.lmsk", "frame_00002.lmsk", "frame_00003.lmsk"]
  for n in names:
    labels, k = formats.read_mask(out / n)
    assert k == 13 and labels.shape == (6, 7)
  record = json.loads((out / "runs.jsonl").read_text().splitlines()[-1])
  assert record["command"] == "track"
  result = subprocess.run([cli, "eval", "--gt", str(tmp_path / "data" / "masks"), "--pred", str(out)],
                          capture_output=True, text=True)
  assert result.returncode == 0, result.stderr
  assert result.stdout.startswith("J_m=")
