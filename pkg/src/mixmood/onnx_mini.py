"""Embedded inference runner for ONNX model files.

Parses the protobuf wire format directly (no protobuf dependency) and
executes the graph with numpy.  Supported operators:

    MatMul, Gemm, Add, Sub, Mul, Relu, Tanh, Sigmoid, Flatten,
    Reshape, Identity

which covers fully-connected feature extractors.  Anything else raises
``ExtractorError`` naming the offending node.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ExtractorError, FormatError

# --- protobuf wire-format primitives ---------------------------------------


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise FormatError("truncated varint in ONNX file")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise FormatError("malformed varint in ONNX file")


def _fields(buf: bytes):
    """Yield (field_number, wire_type, value) triples from a message."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        field, wire = key >> 3, key & 0x7
        if wire == 0:  # varint
            value, pos = _read_varint(buf, pos)
        elif wire == 1:  # 64-bit
            value = buf[pos : pos + 8]
            pos += 8
        elif wire == 2:  # length-delimited
            length, pos = _read_varint(buf, pos)
            value = buf[pos : pos + length]
            if len(value) != length:
                raise FormatError("truncated length-delimited field in ONNX file")
            pos += length
        elif wire == 5:  # 32-bit
            value = buf[pos : pos + 4]
            pos += 4
        else:
            raise FormatError(f"unsupported wire type {wire} in ONNX file")
        yield field, wire, value


def _packed_varints(buf: bytes) -> list[int]:
    out, pos = [], 0
    while pos < len(buf):
        v, pos = _read_varint(buf, pos)
        out.append(v)
    return out


def _signed(v: int) -> int:
    return v - (1 << 64) if v >= (1 << 63) else v


# --- message decoders (field numbers from the ONNX schema) ------------------

_F32, _F64, _I32, _I64 = 1, 11, 6, 7  # TensorProto.DataType values we accept


def _decode_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    dtype = None
    name = ""
    raw = None
    floats: list[float] = []
    int64s: list[int] = []
    for field, wire, value in _fields(buf):
        if field == 1:  # dims
            if wire == 0:
                dims.append(_signed(value))
            else:
                dims.extend(_signed(v) for v in _packed_varints(value))
        elif field == 2:
            dtype = value
        elif field == 4:  # float_data
            if wire == 5:
                floats.append(struct.unpack("<f", value)[0])
            else:
                floats.extend(struct.unpack(f"<{len(value) // 4}f", value))
        elif field == 7:  # int64_data
            if wire == 0:
                int64s.append(_signed(value))
            else:
                int64s.extend(_signed(v) for v in _packed_varints(value))
        elif field == 8:
            name = value.decode("utf-8")
        elif field == 9:
            raw = value
    if dtype == _F32:
        data = (
            np.frombuffer(raw, dtype="<f4")
            if raw is not None
            else np.array(floats, dtype=np.float32)
        )
    elif dtype == _F64:
        data = (
            np.frombuffer(raw, dtype="<f8")
            if raw is not None
            else np.array(floats, dtype=np.float64)
        )
    elif dtype == _I64:
        data = (
            np.frombuffer(raw, dtype="<i8")
            if raw is not None
            else np.array(int64s, dtype=np.int64)
        )
    elif dtype == _I32:
        data = (
            np.frombuffer(raw, dtype="<i4")
            if raw is not None
            else np.array(int64s, dtype=np.int32)
        )
    else:
        raise FormatError(f"unsupported tensor data type {dtype} in ONNX file")
    return name, data.reshape(dims) if dims else data


def _decode_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    value: object = None
    for field, wire, raw in _fields(buf):
        if field == 1:
            name = raw.decode("utf-8")
        elif field == 2:
            value = struct.unpack("<f", raw)[0]
        elif field == 3:
            value = _signed(raw)
        elif field == 4:
            value = raw
        elif field == 5:
            value = _decode_tensor(raw)[1]
        elif field == 8:
            ints = [_signed(raw)] if wire == 0 else [_signed(v) for v in _packed_varints(raw)]
            value = value + ints if isinstance(value, list) else ints
    return name, value


def _decode_node(buf: bytes) -> dict:
    node = {"inputs": [], "outputs": [], "op": "", "name": "", "attrs": {}}
    for field, _wire, value in _fields(buf):
        if field == 1:
            node["inputs"].append(value.decode("utf-8"))
        elif field == 2:
            node["outputs"].append(value.decode("utf-8"))
        elif field == 3:
            node["name"] = value.decode("utf-8")
        elif field == 4:
            node["op"] = value.decode("utf-8")
        elif field == 5:
            k, v = _decode_attribute(value)
            node["attrs"][k] = v
    return node


def _decode_value_info(buf: bytes) -> str:
    for field, _wire, value in _fields(buf):
        if field == 1:
            return value.decode("utf-8")
    return ""


def _decode_graph(buf: bytes) -> dict:
    graph = {"nodes": [], "initializers": {}, "inputs": [], "outputs": []}
    for field, _wire, value in _fields(buf):
        if field == 1:
            graph["nodes"].append(_decode_node(value))
        elif field == 5:
            name, tensor = _decode_tensor(value)
            graph["initializers"][name] = tensor
        elif field == 11:
            graph["inputs"].append(_decode_value_info(value))
        elif field == 12:
            graph["outputs"].append(_decode_value_info(value))
    return graph


def _decode_model(buf: bytes) -> dict:
    graph = None
    for field, _wire, value in _fields(buf):
        if field == 7:
            graph = _decode_graph(value)
    if graph is None:
        raise FormatError("ONNX file holds no graph")
    return graph


# --- executor ----------------------------------------------------------------


class OnnxModelRunner:
    """Load an ONNX model file and run single-input inference with numpy."""

    def __init__(self, path):
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise ExtractorError(f"cannot read model file {path}: {exc}") from exc
        self.graph = _decode_model(data)
        feeds = [n for n in self.graph["inputs"] if n not in self.graph["initializers"]]
        if len(feeds) != 1:
            raise ExtractorError(
                f"{path}: expected exactly one graph input, found {feeds!r}"
            )
        if len(self.graph["outputs"]) != 1:
            raise ExtractorError(
                f"{path}: expected exactly one graph output, "
                f"found {self.graph['outputs']!r}"
            )
        self.input_name = feeds[0]
        self.output_name = self.graph["outputs"][0]

    def run(self, x: np.ndarray) -> np.ndarray:
        values: dict[str, np.ndarray] = dict(self.graph["initializers"])
        values[self.input_name] = np.asarray(x)
        for node in self.graph["nodes"]:
            try:
                args = [values[name] for name in node["inputs"] if name]
            except KeyError as exc:
                raise ExtractorError(
                    f"node {node['name']!r} references unknown tensor {exc}"
                ) from exc
            values[node["outputs"][0]] = self._apply(node, args)
        return np.asarray(values[self.output_name], dtype=np.float64)

    @staticmethod
    def _apply(node: dict, args: list[np.ndarray]) -> np.ndarray:
        op = node["op"]
        attrs = node["attrs"]
        if op == "MatMul":
            return args[0] @ args[1]
        if op == "Gemm":
            a, b = args[0], args[1]
            if attrs.get("transA", 0):
                a = a.T
            if attrs.get("transB", 0):
                b = b.T
            y = attrs.get("alpha", 1.0) * (a @ b)
            if len(args) > 2:
                y = y + attrs.get("beta", 1.0) * args[2]
            return y
        if op == "Add":
            return args[0] + args[1]
        if op == "Sub":
            return args[0] - args[1]
        if op == "Mul":
            return args[0] * args[1]
        if op == "Relu":
            return np.maximum(args[0], 0)
        if op == "Tanh":
            return np.tanh(args[0])
        if op == "Sigmoid":
            return 1.0 / (1.0 + np.exp(-args[0]))
        if op == "Flatten":
            axis = attrs.get("axis", 1)
            lead = int(np.prod(args[0].shape[:axis], dtype=np.int64)) if axis else 1
            return args[0].reshape(lead, -1)
        if op == "Reshape":
            return args[0].reshape([int(v) for v in args[1]])
        if op == "Identity":
            return args[0]
        raise ExtractorError(f"unsupported ONNX operator {op!r} (node {node['name']!r})")
