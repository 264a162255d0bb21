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
"""Training-free mask tracking over per-frame feature maps."""

from maskflow import formats
from maskflow._maskflow import (
    MaskflowError,
    Tracker,
    TrackerConfig,
    __version__,
    decode_feature_map,
    decode_mask,
    encode_feature_map,
    encode_mask,
    gen_sequence,
    load_manifest,
    normalize_features,
    read_feature_map,
    read_mask,
    score_frame,
    track_video,
    write_feature_map,
    write_mask,
)

__all__ = [
    "MaskflowError",
    "Tracker",
    "TrackerConfig",
    "decode_feature_map",
    "decode_mask",
    "encode_feature_map",
    "encode_mask",
    "formats",
    "gen_sequence",
    "load_manifest",
    "normalize_features",
    "read_feature_map",
    "read_mask",
    "score_frame",
    "track_video",
    "write_feature_map",
    "write_mask",
]
