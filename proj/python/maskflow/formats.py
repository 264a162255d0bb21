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
"""Feature, mask and manifest files written with numpy alone.

This is the producer side of the on-disk contract. Feature extractors use it
to emit files the tracker reads, so it deliberately does not depend on the
compiled extension.
"""

import json
import os
import struct

import numpy as np

FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_FMAP_HEADER = struct.Struct("<4sBBBBIII")
_LMSK_HEADER = struct.Struct("<4sBHII")


class FormatError(ValueError):
  pass


def encode_feature_map(features):
  """Serialises a (H, W, C) array; values must be finite."""
  a = np.asarray(features)
  if a.ndim != 3 or min(a.shape) < 1:
    raise FormatError("feature map must be a non-empty (H, W, C) array, got shape %s" % (a.shape,))
  a = np.ascontiguousarray(a, dtype="<f4")
  if not np.isfinite(a).all():
    raise FormatError("non-finite value")
  h, w, c = a.shape
  return _FMAP_HEADER.pack(b"FMAP", FORMAT_VERSION, DTYPE_FLOAT32, 3, 0, h, w, c) + a.tobytes()


def decode_feature_map(data):
  if len(data) < _FMAP_HEADER.size:
    raise FormatError("length mismatch: %d bytes is shorter than the header" % len(data))
  magic, version, dtype, ndim, _, h, w, c = _FMAP_HEADER.unpack_from(data)
  if magic != b"FMAP":
    raise FormatError("not a feature file")
  if version != FORMAT_VERSION or dtype != DTYPE_FLOAT32 or ndim != 3:
    raise FormatError("unsupported version %d / dtype %d / ndim %d" % (version, dtype, ndim))
  expected = 4 * h * w * c
  if len(data) - _FMAP_HEADER.size != expected:
    raise FormatError("length mismatch: expected %d payload bytes, got %d" %
                      (expected, len(data) - _FMAP_HEADER.size))
  a = np.frombuffer(data, dtype="<f4", offset=_FMAP_HEADER.size).reshape(h, w, c)
  if not np.isfinite(a).all():
    raise FormatError("non-finite value")
  return a.astype(np.float32)


def encode_mask(labels, num_classes):
  """Serialises a (H, W) integer array with every label below num_classes."""
  a = np.asarray(labels)
  if a.ndim != 2 or min(a.shape) < 1:
    raise FormatError("mask must be a non-empty (H, W) array, got shape %s" % (a.shape,))
  if not 1 <= num_classes <= 0xFFFF:
    raise FormatError("num_classes out of range: %d" % num_classes)
  if a.min() < 0 or a.max() >= num_classes:
    raise FormatError("label out of range")
  h, w = a.shape
  header = _LMSK_HEADER.pack(b"LMSK", FORMAT_VERSION, num_classes, h, w)
  return header + np.ascontiguousarray(a, dtype="<u2").tobytes()


def decode_mask(data):
  """Returns (labels, num_classes)."""
  if len(data) < _LMSK_HEADER.size:
    raise FormatError("length mismatch: %d bytes is shorter than the header" % len(data))
  magic, version, k, h, w = _LMSK_HEADER.unpack_from(data)
  if magic != b"LMSK":
    raise FormatError("not a mask file")
  if version != FORMAT_VERSION:
    raise FormatError("unsupported version %d" % version)
  if len(data) - _LMSK_HEADER.size != 2 * h * w:
    raise FormatError("length mismatch: expected %d payload bytes, got %d" %
                      (2 * h * w, len(data) - _LMSK_HEADER.size))
  a = np.frombuffer(data, dtype="<u2", offset=_LMSK_HEADER.size).reshape(h, w)
  if k < 1 or (a >= k).any():
    raise FormatError("label out of range")
  return a.astype(np.uint16), k


def _write(path, data):
  os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
  with open(path, "wb") as f:
    f.write(data)


def write_feature_map(path, features):
  _write(path, encode_feature_map(features))


def read_feature_map(path):
  with open(path, "rb") as f:
    return decode_feature_map(f.read())


def write_mask(path, labels, num_classes):
  _write(path, encode_mask(labels, num_classes))


def read_mask(path):
  with open(path, "rb") as f:
    return decode_mask(f.read())


def frame_entry(index, features, mask=None, image=None):
  entry = {"index": int(index), "features": str(features)}
  if mask is not None:
    entry["mask"] = str(mask)
  if image is not None:
    entry["image"] = str(image)
  return entry


def write_manifest(path, dataset, palette, videos):
  """Writes a dataset manifest.

  `palette` is a list of (name, (r, g, b)) with ids 0..K-1 in order.
  `videos` maps a video id to its frame entries (see frame_entry), and may
  carry extra keys such as preprocessing records; readers ignore them.
  Absolute paths under the manifest's directory are made relative to it.
  """
  root = os.path.dirname(os.path.abspath(path))

  def rel(p):
    if os.path.isabs(p) and os.path.commonpath([root, os.path.abspath(p)]) == root:
      return os.path.relpath(p, root)
    return p

  doc_videos = []
  for vid, frames in videos.items():
    if isinstance(frames, dict):
      video = dict(frames)
      frames = video.pop("frames")
    else:
      video = {}
    last = None
    out = []
    for f in frames:
      if last is not None and f["index"] <= last:
        raise FormatError("frame order not strictly increasing in video %s" % vid)
      last = f["index"]
      out.append({k: rel(v) if k in ("features", "mask", "image") else v for k, v in f.items()})
    video.update({"id": vid, "frames": out})
    doc_videos.append(video)
  doc = {
      "dataset": dataset,
      "palette": [{"id": i, "name": name, "color": [int(c) for c in color]}
                  for i, (name, color) in enumerate(palette)],
      "videos": doc_videos,
  }
  _write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
  return path
