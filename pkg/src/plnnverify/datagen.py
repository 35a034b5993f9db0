"""Instance generation and ingestion.

Covers the constant-output twin-stream synthetics, the two-unit running
example, ACAS-style NNet files, random Glorot networks for oracle testing
and a dense expansion of 2-d convolutions (used both for ingestion and for
the sparse-layer classification in branching).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from plnnverify.network import (
    RELU,
    ActivationLayer,
    Atom,
    Box,
    LinearLayer,
    Network,
    PropertyFormula,
)


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


@dataclass(frozen=True)
class TwinStreamSpec:
    """One stream's architecture; the generated network duplicates it."""

    input_dim: int
    widths: tuple          # hidden widths of one stream, length depth-1
    depth: int             # number of linear layers per stream, >= 2
    margin: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.depth < 2:
            raise ValueError("twin-stream depth must be at least 2")
        if len(self.widths) != self.depth - 1:
            raise ValueError("need one hidden width per non-final stream layer")
        if any(w < 1 for w in self.widths):
            raise ValueError("stream widths must be positive")


def gen_twinstream(spec: TwinStreamSpec) -> tuple[Network, Box, PropertyFormula]:
    """Duplicated-stream network whose output is identically the margin.

    The first layer feeds both copies the same input, the middle layers are
    block-diagonal, and the final layer subtracts one stream from the other
    and adds the margin, so the streams cancel at every input.
    """
    rng = np.random.default_rng(spec.seed)
    dims = [spec.input_dim] + list(spec.widths) + [1]
    stream = [glorot_uniform(rng, dims[i + 1], dims[i]) for i in range(spec.depth)]

    layers: list = []
    w1 = np.vstack([stream[0], stream[0]])
    layers.append(LinearLayer(w1, np.zeros(w1.shape[0])))
    for i in range(1, spec.depth - 1):
        layers.append(ActivationLayer(RELU))
        h_out, h_in = stream[i].shape
        w = np.zeros((2 * h_out, 2 * h_in))
        w[:h_out, :h_in] = stream[i]
        w[h_out:, h_in:] = stream[i]
        layers.append(LinearLayer(w, np.zeros(2 * h_out)))
    layers.append(ActivationLayer(RELU))
    w_last = np.hstack([stream[-1], -stream[-1]])
    layers.append(LinearLayer(w_last, np.array([float(spec.margin)])))

    net = Network(tuple(layers))
    box = Box(-np.ones(spec.input_dim), np.ones(spec.input_dim))
    prop = Atom(np.array([1.0]), 0.0)
    return net, box, prop


def toy_network() -> tuple[Network, Box, PropertyFormula]:
    """The two-unit running example: y = -relu(x1+x2) - relu(-x1-x2) on
    [-2,2]^2, asked to stay above -5."""
    net = Network(
        (
            LinearLayer(np.array([[1.0, 1.0], [-1.0, -1.0]]), np.zeros(2)),
            ActivationLayer(RELU),
            LinearLayer(np.array([[-1.0, -1.0]]), np.zeros(1)),
        )
    )
    box = Box(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
    prop = Atom(np.array([1.0]), -5.0)
    return net, box, prop


def gen_random_net(
    input_dim: int, widths, seed: int, bias_scale: float = 0.0
) -> Network:
    """Glorot-uniform test network; widths give the full width chain
    starting at the input. Biases are zero unless a scale is requested."""
    widths = tuple(int(w) for w in widths)
    if not widths or widths[0] != input_dim:
        raise ValueError("widths must start with the input dimension")
    if any(w < 1 for w in widths):
        raise ValueError("widths must be positive")
    rng = np.random.default_rng(seed)
    layers: list = []
    for i in range(1, len(widths)):
        if i > 1:
            layers.append(ActivationLayer(RELU))
        w = glorot_uniform(rng, widths[i], widths[i - 1])
        if bias_scale > 0.0:
            b = rng.uniform(-bias_scale, bias_scale, size=widths[i])
        else:
            b = np.zeros(widths[i])
        layers.append(LinearLayer(w, b))
    return Network(tuple(layers))


class NNetError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _nnet_fields(text: str):
    """(lineno, numeric fields) per data line; '//' lines are comments."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        fields = [f for f in line.replace(",", " ").split() if f]
        yield lineno, fields


def parse_nnet(text: str) -> tuple[Network, Box]:
    """ACAS-style NNet text: header, layer sizes, input ranges, normalization
    constants, then row-major weights and biases per layer.

    Input normalization is folded into the first linear layer and output
    denormalization into the last one, so the returned network acts on raw
    inputs; the box comes from the file's input ranges.
    """
    lines = list(_nnet_fields(text))
    pos = 0

    def take(what, expect=None):
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise NNetError(last + 1, f"unexpected end of file, wanted {what}")
        lineno, fields = lines[pos]
        pos += 1
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise NNetError(lineno, f"expected numbers for {what}") from exc
        if expect is not None and len(vals) != expect:
            raise NNetError(
                lineno, f"{what}: expected {expect} values, got {len(vals)}"
            )
        return lineno, vals

    lineno, header = take("header counts", expect=4)
    n_layers, in_size, out_size = int(header[0]), int(header[1]), int(header[2])
    if n_layers < 1 or in_size < 1 or out_size < 1:
        raise NNetError(lineno, "non-positive size in header")
    lineno, sizes = take("layer sizes", expect=n_layers + 1)
    sizes = [int(s) for s in sizes]
    if sizes[0] != in_size or sizes[-1] != out_size:
        raise NNetError(lineno, "layer sizes disagree with header counts")
    take("symmetric flag")
    _, mins = take("input minimums", expect=in_size)
    _, maxes = take("input maximums", expect=in_size)
    _, means = take("normalization means", expect=in_size + 1)
    _, ranges = take("normalization ranges", expect=in_size + 1)
    if any(r == 0 for r in ranges):
        raise NNetError(lineno, "zero normalization range")

    weights, biases = [], []
    for layer in range(n_layers):
        rows, cols = sizes[layer + 1], sizes[layer]
        w = np.empty((rows, cols))
        for r in range(rows):
            ln, vals = take(f"layer {layer} weight row {r}")
            if len(vals) != cols:
                raise NNetError(ln, f"weight row has {len(vals)} values, wanted {cols}")
            w[r] = vals
        b = np.empty(rows)
        for r in range(rows):
            ln, vals = take(f"layer {layer} bias {r}", expect=1)
            b[r] = vals[0]
        weights.append(w)
        biases.append(b)
    if pos != len(lines):
        raise NNetError(lines[pos][0], "trailing data after final layer")

    in_mean = np.asarray(means[:in_size])
    in_range = np.asarray(ranges[:in_size])
    out_mean, out_range = means[in_size], ranges[in_size]
    weights[0] = weights[0] / in_range[None, :]
    biases[0] = biases[0] - weights[0] @ in_mean
    weights[-1] = weights[-1] * out_range
    biases[-1] = biases[-1] * out_range + out_mean

    layers: list = []
    for i in range(n_layers):
        if i > 0:
            layers.append(ActivationLayer(RELU))
        layers.append(LinearLayer(weights[i], biases[i]))
    return Network(tuple(layers)), Box(np.asarray(mins), np.asarray(maxes))


def write_nnet(net: Network, box: Box) -> str:
    """Fixture writer with identity normalization; parse_nnet inverts it."""
    linears = [l for l in net.layers if isinstance(l, LinearLayer)]
    sizes = [net.input_dim] + [l.out_width for l in linears]
    out = ["// plnnverify nnet fixture"]
    out.append(f"{len(linears)},{net.input_dim},{linears[-1].out_width},{max(sizes)},")
    out.append(",".join(str(s) for s in sizes) + ",")
    out.append("0,")
    out.append(",".join(repr(float(v)) for v in box.lower) + ",")
    out.append(",".join(repr(float(v)) for v in box.upper) + ",")
    out.append(",".join(["0.0"] * (net.input_dim + 1)) + ",")
    out.append(",".join(["1.0"] * (net.input_dim + 1)) + ",")
    for lin in linears:
        for r in range(lin.out_width):
            out.append(",".join(repr(float(v)) for v in lin.weights[r]) + ",")
        for r in range(lin.out_width):
            out.append(repr(float(lin.bias[r])) + ",")
    return "\n".join(out) + "\n"


def conv_to_linear(
    kernel: np.ndarray,
    input_hw: tuple[int, int],
    stride: int = 1,
    padding: int = 0,
    bias: np.ndarray | None = None,
) -> LinearLayer:
    """Dense matrix form of a 2-d convolution.

    kernel has shape (out_channels, in_channels, kh, kw); inputs and outputs
    are flattened channel-major (channel, row, column).
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 4:
        raise ValueError("kernel must have shape (out_c, in_c, kh, kw)")
    out_c, in_c, kh, kw = kernel.shape
    h, w = input_hw
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError("kernel does not fit the padded input")
    mat = np.zeros((out_c * oh * ow, in_c * h * w))
    for oc in range(out_c):
        for oy in range(oh):
            for ox in range(ow):
                row = (oc * oh + oy) * ow + ox
                for ic in range(in_c):
                    for ky in range(kh):
                        iy = oy * stride + ky - padding
                        if not 0 <= iy < h:
                            continue
                        for kx in range(kw):
                            ix = ox * stride + kx - padding
                            if not 0 <= ix < w:
                                continue
                            col = (ic * h + iy) * w + ix
                            mat[row, col] = kernel[oc, ic, ky, kx]
    if bias is None:
        b = np.zeros(out_c * oh * ow)
    else:
        bias = np.asarray(bias, dtype=float)
        if bias.shape != (out_c,):
            raise ValueError("bias must have one entry per output channel")
        b = np.repeat(bias, oh * ow)
    return LinearLayer(mat, b)


def sparsity(layer: LinearLayer) -> float:
    """Fraction of exact zeros in the weight matrix."""
    return float(np.mean(layer.weights == 0.0))
