#!/usr/bin/env python3
# Copyright 2026 The predserve Authors.
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

"""Writes the golden wire vectors. Encodes by hand with struct, independently
of the C++ encoder; the C++ tests check the encoder against these files."""
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))


def u32(v):
    return struct.pack("<I", v)


def frame(msg_type, payload):
    return u32(msg_type) + u32(len(payload)) + payload


def lp(b):
    return u32(len(b)) + b


VECTORS = {
    "heartbeat.bin": frame(4, b""),
    # model "noop", version 1, input type doubles (3)
    "handshake.bin": frame(1, lp(b"noop") + u32(1) + u32(3)),
    # request_id 1, one Doubles input [1.0]
    "predict_request.bin": frame(2, u32(1) + u32(1) + lp(struct.pack("<d", 1.0))),
    # request_id 1, outputs [["cat"], ["dog", "0.5"]]
    "predict_response.bin": frame(
        3, u32(1) + u32(2) + u32(1) + lp(b"cat") + u32(2) + lp(b"dog") + lp(b"0.5")),
    # request_id 7, message "boom"
    "error.bin": frame(5, u32(7) + lp(b"boom")),
}

if __name__ == "__main__":
    for name, data in VECTORS.items():
        with open(os.path.join(HERE, name), "wb") as f:
            f.write(data)
        print(name, data.hex(" "))
