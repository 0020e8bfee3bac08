"""Network assembly from a textual layer spec, plus checkpoint I/O.

A layer spec is a comma- or whitespace-separated token list, e.g.::

    conv3d:3x3x3x16 relu maxpool:1x2x2 conv3d:3x3x3x32 relu maxpool:2x2x2
    flatten dense:128 relu dropout:0.5 dense:8 softmax

Exactly one ``softmax`` token is required and it must be terminal.
Checkpoints are a binary file: magic line, length-prefixed canonical spec
text (including the input shape), then raw little-endian float32 blobs for
every parameter (and batch-norm running statistics) in layer order.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from ..errors import InvalidInputError, NumericError
from . import layers as L

MAGIC = b"TACGRASPNET1\n"

DEFAULT_CLASSIFIER_SPEC = (
    "conv3d:3x3x3x16 relu maxpool:1x2x2 conv3d:3x3x3x32 relu maxpool:2x2x2 "
    "flatten dense:128 relu dropout:{dropout:g} dense:{classes} softmax"
)


def default_spec(classes: int, dropout: float = 0.5) -> str:
    return DEFAULT_CLASSIFIER_SPEC.format(dropout=dropout, classes=classes)


def _parse_ints(text: str, n: int, token: str):
    parts = text.split("x")
    if len(parts) != n or not all(p.isdigit() for p in parts):
        raise InvalidInputError(f"malformed layer token {token!r}")
    return tuple(int(p) for p in parts)


def parse_spec(spec: str):
    """Token list -> fresh (unbuilt) layer objects."""
    tokens = spec.replace(",", " ").split()
    if not tokens:
        raise InvalidInputError("empty network spec")
    built = []
    for token in tokens:
        name, _, arg = token.partition(":")
        try:
            if name == "conv3d":
                arg, _, stride_arg = arg.partition(":s")
                kt, kh, kw, out = _parse_ints(arg, 4, token)
                stride = _parse_ints(stride_arg, 3, token) if stride_arg \
                    else (1, 1, 1)
                built.append(L.Conv3D(out, (kt, kh, kw), stride))
            elif name == "relu":
                built.append(L.ReLU())
            elif name == "maxpool":
                built.append(L.MaxPool3D(_parse_ints(arg, 3, token)))
            elif name == "flatten":
                built.append(L.Flatten())
            elif name == "dense":
                built.append(L.Dense(int(arg)))
            elif name == "dropout":
                built.append(L.Dropout(float(arg)))
            elif name == "batchnorm":
                built.append(L.BatchNorm())
            elif name == "softmax":
                built.append(L.Softmax())
            else:
                raise InvalidInputError(f"unknown layer token {token!r}")
        except ValueError as err:
            raise InvalidInputError(f"malformed layer token {token!r}") from err
    softmax_positions = [i for i, l in enumerate(built) if isinstance(l, L.Softmax)]
    if softmax_positions != [len(built) - 1]:
        raise InvalidInputError("spec must contain exactly one terminal softmax")
    return built


class Network:
    """An ordered layer stack bound to a fixed input shape."""

    def __init__(self, spec: str, input_shape, seed: int = 0,
                 init_std: float = 0.01, dtype=np.float32):
        self.spec = " ".join(spec.replace(",", " ").split())
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = np.dtype(dtype)
        self.layers = parse_spec(self.spec)
        if isinstance(self.layers[0], L.Conv3D):
            # nothing consumes the gradient w.r.t. the raw input
            self.layers[0].skip_input_grad = True
        rng = np.random.default_rng(seed)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape, rng, init_std, self.dtype)
        self.output_shape = shape
        self._rng = np.random.default_rng(seed + 1)

    # -- passes ----------------------------------------------------------

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.shape[1:] != self.input_shape:
            raise InvalidInputError(
                f"input shape {x.shape[1:]} != network input {self.input_shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=self._rng)
        return x

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray, training=True):
        """Mean cross-entropy plus parameter gradients for one batch."""
        probs = self.forward(x, training=training)
        loss = L.cross_entropy(probs, labels)
        grad = L.softmax_xent_grad(probs, labels)
        # the fused grad above is w.r.t. logits, so skip the softmax layer
        for layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)
        for g in self.grads():
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite gradient")
        return loss, probs

    # -- parameters -------------------------------------------------------

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def state_arrays(self):
        """Params plus persistent non-trainable state, in layer order."""
        out = []
        for layer in self.layers:
            out.extend(layer.params())
            out.extend(layer.extra_state())
        return out

    def snapshot(self):
        return [a.copy() for a in self.state_arrays()]

    def restore(self, snapshot):
        current = self.state_arrays()
        if len(current) != len(snapshot):
            raise InvalidInputError("snapshot does not match network")
        for dst, src in zip(current, snapshot):
            dst[...] = src

    def seed_dropout(self, seed: int):
        """Re-seed the generator that drives dropout masks."""
        self._rng = np.random.default_rng(seed)

    # -- serialization -----------------------------------------------------

    def save(self, path) -> None:
        header = "input " + "x".join(str(d) for d in self.input_shape)
        text = (header + "\n" + self.spec + "\n").encode("utf-8")
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<I", len(text)))
        buf.write(text)
        for arr in self.state_arrays():
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path) -> "Network":
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(MAGIC):
            raise InvalidInputError(f"{path}: not a tacgrasp checkpoint")
        offset = len(MAGIC)
        (text_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        text = blob[offset : offset + text_len].decode("utf-8")
        offset += text_len
        lines = text.strip().splitlines()
        if len(lines) != 2 or not lines[0].startswith("input "):
            raise InvalidInputError(f"{path}: malformed checkpoint header")
        input_shape = tuple(int(d) for d in lines[0][len("input "):].split("x"))
        net = cls(lines[1], input_shape, seed=0)
        for arr in net.state_arrays():
            n = arr.size * 4
            if offset + n > len(blob):
                raise InvalidInputError(f"{path}: truncated parameter blob")
            arr[...] = np.frombuffer(blob, dtype="<f4", count=arr.size,
                                     offset=offset).reshape(arr.shape)
            offset += n
        if offset != len(blob):
            raise InvalidInputError(f"{path}: trailing bytes in checkpoint")
        return net
