#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
#
# llm4cp - channel prediction benchmark toolkit
# Copyright (C) 2026 The llm4cp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ------------------------------------------------------------------------
"""Convert a Hugging Face GPT-2 checkpoint into a CPWT backbone archive.

Writes wpe.weight and the first N transformer blocks under the canonical
names read by the C++ backbone loader. Conv1D weights are stored in x out
by Hugging Face and are transposed to out x in; c_attn is split into q, k, v.

    python3 tools/gpt2_to_cpwt.py gpt2 gpt2_6.cpwt --layers 6
"""

import argparse
import struct
import sys

import numpy as np


def _record(name, array):
    array = np.ascontiguousarray(array, dtype="<f4")
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    head = struct.pack("<I", len(name)) + name.encode()
    head += struct.pack("<BB", 0, array.ndim)
    head += b"".join(struct.pack("<Q", d) for d in array.shape)
    return head + array.tobytes()


def convert(state, layers):
    def get(key):
        for k in (key, "transformer." + key):
            if k in state:
                return state[k].detach().cpu().float().numpy()
        raise KeyError(key)

    out = [("wpe.weight", get("wpe.weight"))]
    for i in range(layers):
        p = f"h.{i}."
        width = get(p + "attn.c_attn.weight").shape[0]
        w_attn = get(p + "attn.c_attn.weight")
        b_attn = get(p + "attn.c_attn.bias")
        for j, part in enumerate("qkv"):
            out.append((f"{p}attn.{part}.weight", w_attn[:, j * width:(j + 1) * width].T))
            out.append((f"{p}attn.{part}.bias", b_attn[j * width:(j + 1) * width]))
        out.append((p + "attn.o.weight", get(p + "attn.c_proj.weight").T))
        out.append((p + "attn.o.bias", get(p + "attn.c_proj.bias")))
        for ln in ("ln_1", "ln_2"):
            out.append((f"{p}{ln}.weight", get(f"{p}{ln}.weight")))
            out.append((f"{p}{ln}.bias", get(f"{p}{ln}.bias")))
        out.append((p + "mlp.fc.weight", get(p + "mlp.c_fc.weight").T))
        out.append((p + "mlp.fc.bias", get(p + "mlp.c_fc.bias")))
        out.append((p + "mlp.proj.weight", get(p + "mlp.c_proj.weight").T))
        out.append((p + "mlp.proj.bias", get(p + "mlp.c_proj.bias")))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model", help="model id or local directory")
    ap.add_argument("output", help="destination .cpwt file")
    ap.add_argument("--layers", type=int, default=6)
    args = ap.parse_args()

    from transformers import GPT2Model

    state = GPT2Model.from_pretrained(args.model).state_dict()
    available = sum(1 for k in state if k.endswith("ln_1.weight"))
    if not 1 <= args.layers <= available:
        sys.exit(f"--layers must be in [1, {available}]")

    records = convert(state, args.layers)
    with open(args.output, "wb") as f:
        f.write(b"CPWT" + struct.pack("<HI", 1, len(records)))
        for name, array in records:
            f.write(_record(name, array))
    print(f"wrote {len(records)} tensors to {args.output}")


if __name__ == "__main__":
    main()
