# Copyright 2026 The RC-Flow Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds a small time-conditioned U-Net with PyTorch, writes it in the
rcflow weight-file format and evaluates parity fixtures with torch.

Usage: python make_parity_fixtures.py [out_dir]
"""

import base64
import json
import math
import struct
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

N_R, N_T = 4, 16
TEMB = 16
BASE = 8
GROUPS = 4
N_FIXTURES = 24


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def make_params(gen):
    shapes = {
        "conv_in.weight": (BASE, 2, 3, 3),
        "conv_in.bias": (BASE,),
        "norm1.weight": (BASE,),
        "norm1.bias": (BASE,),
        "temb_proj.weight": (2 * BASE, TEMB),
        "temb_proj.bias": (2 * BASE,),
        "down.weight": (2 * BASE, BASE, 3, 3),
        "down.bias": (2 * BASE,),
        "mid.weight": (2 * BASE, 2 * BASE, 1, 1),
        "mid.bias": (2 * BASE,),
        "dec.weight": (BASE, 3 * BASE, 3, 3),
        "dec.bias": (BASE,),
        "conv_out.weight": (2, BASE, 1, 1),
        "conv_out.bias": (2,),
    }
    params = {}
    for name, shape in shapes.items():
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 4
        scale = 1.0 / math.sqrt(fan_in)
        if name.startswith("norm1.weight"):
            t = 1.0 + 0.1 * torch.randn(shape, generator=gen)
        else:
            t = scale * torch.randn(shape, generator=gen)
        params[name] = t.to(torch.float32)
    return params


GRAPH = [
    {"kind": "conv2d", "name": "h0", "inputs": ["input"], "in_channels": 2,
     "out_channels": BASE, "kernel": 3, "weight": "conv_in.weight", "bias": "conv_in.bias",
     "out_shape": [BASE, N_R, N_T]},
    {"kind": "group_norm", "name": "n1", "inputs": ["h0"], "channels": BASE,
     "groups": GROUPS, "eps": 1e-5, "weight": "norm1.weight", "bias": "norm1.bias"},
    {"kind": "silu", "name": "a1", "inputs": ["n1"]},
    {"kind": "linear", "name": "e", "inputs": ["temb"], "in_features": TEMB,
     "out_features": 2 * BASE, "weight": "temb_proj.weight", "bias": "temb_proj.bias"},
    {"kind": "scale_shift", "name": "s1", "inputs": ["a1", "e"]},
    {"kind": "downsample", "name": "d1", "inputs": ["s1"], "in_channels": BASE,
     "out_channels": 2 * BASE, "weight": "down.weight", "bias": "down.bias",
     "out_shape": [2 * BASE, N_R // 2, N_T // 2]},
    {"kind": "gelu", "name": "g1", "inputs": ["d1"]},
    {"kind": "conv2d", "name": "m1", "inputs": ["g1"], "in_channels": 2 * BASE,
     "out_channels": 2 * BASE, "kernel": 1, "weight": "mid.weight", "bias": "mid.bias"},
    {"kind": "upsample", "name": "u1", "inputs": ["m1"]},
    {"kind": "concat", "name": "c1", "inputs": ["u1", "s1"]},
    {"kind": "conv2d", "name": "r1", "inputs": ["c1"], "in_channels": 3 * BASE,
     "out_channels": BASE, "kernel": 3, "weight": "dec.weight", "bias": "dec.bias"},
    {"kind": "add", "name": "res", "inputs": ["r1", "h0"]},
    {"kind": "conv2d", "name": "out", "inputs": ["res"], "in_channels": BASE,
     "out_channels": 2, "kernel": 1, "weight": "conv_out.weight", "bias": "conv_out.bias",
     "out_shape": [2, N_R, N_T]},
]


def time_embedding(t: float) -> torch.Tensor:
    half = TEMB // 2
    k = torch.arange(half, dtype=torch.float64)
    freq = 10000.0 ** (-k / half)
    return torch.cat([torch.sin(t * freq), torch.cos(t * freq)])


def forward(p, h: np.ndarray, t: float) -> np.ndarray:
    p = {k: v.to(torch.float64) for k, v in p.items()}
    x = torch.from_numpy(np.stack([h.real, h.imag]))[None]
    h0 = F.conv2d(x, p["conv_in.weight"], p["conv_in.bias"], padding=1)
    a1 = F.silu(F.group_norm(h0, GROUPS, p["norm1.weight"], p["norm1.bias"], eps=1e-5))
    e = F.linear(time_embedding(t), p["temb_proj.weight"], p["temb_proj.bias"])
    s1 = a1 * (1.0 + e[:BASE, None, None]) + e[BASE:, None, None]
    d1 = F.conv2d(s1, p["down.weight"], p["down.bias"], stride=2, padding=1)
    g1 = F.gelu(d1)
    m1 = F.conv2d(g1, p["mid.weight"], p["mid.bias"])
    u1 = F.interpolate(m1, scale_factor=2, mode="nearest")
    r1 = F.conv2d(torch.cat([u1, s1], dim=1), p["dec.weight"], p["dec.bias"], padding=1)
    out = F.conv2d(r1 + h0, p["conv_out.weight"], p["conv_out.bias"])[0].numpy()
    return out[0] + 1j * out[1]


def write_weights(params, path: Path):
    blob = bytearray()
    tensors = []
    for name, t in params.items():
        tensors.append({"name": name, "shape": list(t.shape), "offset": len(blob),
                        "dtype": "f32"})
        blob += t.numpy().astype("<f4").tobytes()
    header = {
        "format": "rcflow-nn",
        "input_shape": [2, N_R, N_T],
        "time_embed_dim": TEMB,
        "output": "out",
        "checksum": "fnv1a64:%016x" % fnv1a64(bytes(blob)),
        "graph": GRAPH,
        "tensors": tensors,
    }
    text = json.dumps(header, indent=1).encode("utf-8")
    path.write_bytes(b"RCFLOWNN" + bytes([1]) + struct.pack("<I", len(text)) + text + blob)


def b64_complex(m: np.ndarray) -> str:
    inter = np.empty(m.size * 2, dtype="<f8")
    inter[0::2] = m.real.ravel()
    inter[1::2] = m.imag.ravel()
    return base64.b64encode(inter.tobytes()).decode("ascii")


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    gen = torch.Generator().manual_seed(2026)
    params = make_params(gen)
    write_weights(params, out_dir / "tiny_unet.rcnn")

    rng = np.random.default_rng(7)
    fixtures = []
    times = [0.0, 1.0] + list(rng.uniform(0.0, 1.0, N_FIXTURES - 2))
    for t in times:
        h = (rng.standard_normal((N_R, N_T)) + 1j * rng.standard_normal((N_R, N_T))) / math.sqrt(2)
        v = forward(params, h, float(t))
        fixtures.append({"shape": [N_R, N_T], "input": b64_complex(h), "t": float(t),
                         "expected": b64_complex(v)})
    (out_dir / "tiny_unet_fixtures.json").write_text(json.dumps(fixtures, indent=1) + "\n")


if __name__ == "__main__":
    main()
