#!/usr/bin/env python3
"""Writes net_fixture.cdnn and net_fixture.json.

A small CDNN checkpoint with dyadic-rational parameters, built byte by byte in
little-endian order, plus forward outputs computed here in exact arithmetic.
"""
import json
import struct
from fractions import Fraction
from pathlib import Path

widths = [3, 4, 2]
height = len(widths) - 1
output_bound = 1.5


def param(i):
    # k/8 with k in [-12, 12]; every value and every product is exact in binary.
    return Fraction(((i * 7 + 3) % 25) - 12, 8)


layers = []
k = 0
for fan_in, fan_out in zip(widths[:-1], widths[1:]):
    w = [[param(k + r * fan_out + c) for c in range(fan_out)] for r in range(fan_in)]
    k += fan_in * fan_out
    b = [param(k + c) for c in range(fan_out)]
    k += fan_out
    layers.append((w, b))

blob = bytearray(b"CDNN")
blob += struct.pack("<H", 1)
blob += struct.pack("<I", height)
for width in widths:
    blob += struct.pack("<I", width)
blob += struct.pack("<q", -1)
blob += struct.pack("<d", float("inf"))
blob += struct.pack("<d", output_bound)
for w, b in layers:
    for row in w:
        for v in row:
            blob += struct.pack("<d", float(v))
    for v in b:
        blob += struct.pack("<d", float(v))


def forward(x):
    h = [Fraction(v) for v in x]
    for i, (w, b) in enumerate(layers):
        h = [sum(h[r] * w[r][c] for r in range(len(h))) + b[c] for c in range(len(b))]
        if i + 1 < len(layers):
            h = [max(v, Fraction(0)) for v in h]
    return [float(min(max(v, -Fraction(output_bound)), Fraction(output_bound))) for v in h]


inputs = [[0.5, -1.0, 2.0], [0.0, 0.0, 0.0], [-0.25, 0.75, -1.5], [1.0, 1.0, 1.0]]
here = Path(__file__).resolve().parent
(here / "net_fixture.cdnn").write_bytes(bytes(blob))
(here / "net_fixture.json").write_text(
    json.dumps({"inputs": inputs, "outputs": [forward(x) for x in inputs]}, indent=1) + "\n")
