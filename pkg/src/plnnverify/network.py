"""Piecewise-linear networks, properties and problem canonicalization.

A network alternates dense linear layers with activation layers (ReLU or
MaxPool) and both starts and ends with a linear layer.  Properties are
Boolean trees over linear inequalities on the network output; they get
rewritten into a single scalar-output network whose positivity over the
input box is equivalent to the property.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

RELU = "relu"
MAXPOOL = "maxpool"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LinearLayer:
    """y = weights @ x + bias, rows index outputs."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _freeze(np.atleast_2d(self.weights))
        b = _freeze(np.atleast_1d(self.bias))
        if b.shape[0] != w.shape[0]:
            raise ValueError(
                f"bias length {b.shape[0]} does not match {w.shape[0]} weight rows"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("linear layer entries must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ActivationLayer:
    """Either an elementwise ReLU or a grouped MaxPool.

    MaxPool groups must partition the input indices; output j is the max
    over group j.  ReLU layers carry no groups and preserve width.
    """

    kind: str
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in (RELU, MAXPOOL):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == MAXPOOL:
            if not self.groups:
                raise ValueError("maxpool layer needs at least one group")
            groups = tuple(tuple(int(i) for i in g) for g in self.groups)
            seen = [i for g in groups for i in g]
            if any(len(g) == 0 for g in groups):
                raise ValueError("empty maxpool group")
            if len(set(seen)) != len(seen):
                raise ValueError("maxpool groups must be disjoint")
            object.__setattr__(self, "groups", groups)
        elif self.groups is not None:
            raise ValueError("relu layer takes no groups")

    def out_width(self, in_width: int) -> int:
        if self.kind == RELU:
            return in_width
        return len(self.groups)

    def check_width(self, in_width: int) -> None:
        if self.kind == MAXPOOL:
            seen = sorted(i for g in self.groups for i in g)
            if seen != list(range(in_width)):
                raise ValueError(
                    f"maxpool groups must cover indices 0..{in_width - 1} exactly"
                )


@dataclass(frozen=True)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one linear layer")
        if not isinstance(layers[0], LinearLayer) or not isinstance(
            layers[-1], LinearLayer
        ):
            raise ValueError("network must begin and end with a linear layer")
        width = layers[0].in_width
        for i, layer in enumerate(layers):
            if isinstance(layer, LinearLayer):
                if i > 0 and isinstance(layers[i - 1], LinearLayer):
                    raise ValueError("adjacent linear layers must be composed")
                if layer.in_width != width:
                    raise ValueError(
                        f"layer {i} expects width {layer.in_width}, got {width}"
                    )
                width = layer.out_width
            elif isinstance(layer, ActivationLayer):
                if i == 0 or not isinstance(layers[i - 1], LinearLayer):
                    raise ValueError("activation layers must follow a linear layer")
                layer.check_width(width)
                width = layer.out_width(width)
            else:
                raise TypeError(f"unsupported layer type {type(layer)!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_width

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_width

    def stages(self) -> list[tuple[LinearLayer, ActivationLayer | None]]:
        """Pairs of (linear layer, following activation or None for the last)."""
        out = []
        i = 0
        while i < len(self.layers):
            lin = self.layers[i]
            act = None
            if i + 1 < len(self.layers) and isinstance(
                self.layers[i + 1], ActivationLayer
            ):
                act = self.layers[i + 1]
                i += 2
            else:
                i += 1
            out.append((lin, act))
        return out

    def has_maxpool(self) -> bool:
        return any(
            isinstance(l, ActivationLayer) and l.kind == MAXPOOL for l in self.layers
        )


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _freeze(np.atleast_1d(self.lower))
        hi = _freeze(np.atleast_1d(self.upper))
        if lo.shape != hi.shape:
            raise ValueError("box bound vectors differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lower.shape:
            return False
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class Atom:
    """c . y > b on the network output y."""

    c: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "c", _freeze(np.atleast_1d(self.c)))
        object.__setattr__(self, "b", float(self.b))


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("empty conjunction")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("empty disjunction")


PropertyFormula = Union[Atom, And, Or]


@dataclass(frozen=True)
class CanonicalProblem:
    """Scalar-output network that is positive on the domain iff the property holds."""

    net: Network
    domain: Box

    def __post_init__(self):
        if self.net.output_dim != 1:
            raise ValueError("canonical network must have a single scalar output")
        if self.net.input_dim != self.domain.dim:
            raise ValueError("domain dimension does not match network input")


def eval_network(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    v = x
    for layer in net.layers:
        if isinstance(layer, LinearLayer):
            v = layer.weights @ v + layer.bias
        elif layer.kind == RELU:
            v = np.maximum(v, 0.0)
        else:
            v = np.array([v[list(g)].max() for g in layer.groups])
    return v


def eval_property(prop: PropertyFormula, y: np.ndarray) -> bool:
    """Truth value of the formula at a concrete output vector."""
    if isinstance(prop, Atom):
        return bool(prop.c @ y > prop.b)
    if isinstance(prop, And):
        return all(eval_property(ch, y) for ch in prop.children)
    return any(eval_property(ch, y) for ch in prop.children)


def compose(first: LinearLayer, second: LinearLayer) -> LinearLayer:
    """The linear layer computing second(first(x))."""
    return LinearLayer(
        second.weights @ first.weights, second.weights @ first.bias + second.bias
    )


def _identity_layer(width: int) -> LinearLayer:
    return LinearLayer(np.eye(width), np.zeros(width))


def _negate_last(stack: list) -> list:
    last = stack[-1]
    return stack[:-1] + [LinearLayer(-last.weights, -last.bias)]


def _stack_depth(stack: list) -> int:
    return sum(1 for l in stack if isinstance(l, LinearLayer))


def _pad_stack(stack: list, depth: int) -> list:
    """Append singleton-maxpool/identity pairs until the stack has `depth` linears.

    A maxpool over a single element is the identity, so padding preserves the
    stack's function while aligning alternation across siblings.
    """
    out = list(stack)
    width = out[-1].out_width
    for _ in range(depth - _stack_depth(stack)):
        out.append(ActivationLayer(MAXPOOL, tuple((j,) for j in range(width))))
        out.append(_identity_layer(width))
    return out


def _merge_parallel(stacks: list[list]) -> list:
    """Combine same-depth sibling stacks over a shared input, stage by stage."""
    depth = _stack_depth(stacks[0])
    merged: list = []
    positions = [0] * len(stacks)  # per stack, index into its layer list
    for stage in range(depth):
        lins = []
        for s, stack in enumerate(stacks):
            lins.append(stack[positions[s]])
            positions[s] += 1
        if stage == 0:
            w = np.vstack([l.weights for l in lins])
        else:
            total_in = sum(l.in_width for l in lins)
            total_out = sum(l.out_width for l in lins)
            w = np.zeros((total_out, total_in))
            ro, co = 0, 0
            for l in lins:
                w[ro : ro + l.out_width, co : co + l.in_width] = l.weights
                ro += l.out_width
                co += l.in_width
        merged.append(LinearLayer(w, np.concatenate([l.bias for l in lins])))
        if stage < depth - 1:
            groups = []
            offset = 0
            for s, stack in enumerate(stacks):
                act = stack[positions[s]]
                positions[s] += 1
                for g in act.groups:
                    groups.append(tuple(offset + i for i in g))
                offset += lins[s].out_width
            merged.append(ActivationLayer(MAXPOOL, tuple(groups)))
    return merged


def _encode_property(prop: PropertyFormula, out_dim: int) -> list:
    """Layer stack mapping the network output to a scalar that is positive iff
    the formula holds.

    Atoms become a single linear layer; a disjunction feeds its children's
    scalars through one max-pool group; a conjunction is the negated
    disjunction of the negated children.
    """
    if isinstance(prop, Atom):
        if prop.c.shape[0] != out_dim:
            raise ValueError(
                f"atom has {prop.c.shape[0]} coefficients for {out_dim} outputs"
            )
        return [LinearLayer(prop.c.reshape(1, -1), np.array([-prop.b]))]
    stacks = [_encode_property(ch, out_dim) for ch in prop.children]
    if isinstance(prop, And):
        stacks = [_negate_last(s) for s in stacks]
    depth = max(_stack_depth(s) for s in stacks)
    stacks = [_pad_stack(s, depth) for s in stacks]
    merged = _merge_parallel(stacks)
    k = len(stacks)
    merged.append(ActivationLayer(MAXPOOL, (tuple(range(k)),)))
    final = np.array([[-1.0 if isinstance(prop, And) else 1.0]])
    merged.append(LinearLayer(final, np.zeros(1)))
    return merged


def canonicalize(net: Network, prop: PropertyFormula, domain: Box) -> CanonicalProblem:
    """Rewrite (net, prop, domain) into a scalar minimization problem.

    The returned network g satisfies: g(x) > 0 for all x in the domain iff
    the property holds for net over the domain.
    """
    if domain.dim != net.input_dim:
        raise ValueError("domain dimension does not match network input")
    stack = _encode_property(prop, net.output_dim)
    layers = list(net.layers[:-1])
    layers.append(compose(net.layers[-1], stack[0]))
    layers.extend(stack[1:])
    # Collapse any adjacent linear pairs introduced by the splice.
    collapsed: list = []
    for layer in layers:
        if (
            collapsed
            and isinstance(layer, LinearLayer)
            and isinstance(collapsed[-1], LinearLayer)
        ):
            collapsed[-1] = compose(collapsed[-1], layer)
        else:
            collapsed.append(layer)
    return CanonicalProblem(Network(tuple(collapsed)), domain)


BoundsProvider = Callable[[tuple], np.ndarray]


def maxpool_to_relu(net: Network, lower_bounds: BoundsProvider) -> Network:
    """Rewrite every MaxPool into linear+ReLU layers, pointwise equal on the
    region the bounds are valid for.

    Each group is reduced by a balanced tree of pairwise maximums, and each
    pairwise maximum  max(p, q) = max(p - q, 0) + max(q - lq, 0) + lq  needs a
    finite lower bound lq on its second argument; `lower_bounds` must map a
    prefix layer tuple (alternating, ending linear) to a lower-bound vector of
    its output.
    """
    if not net.has_maxpool():
        return net
    new_layers: list = []
    for lin, act in net.stages():
        if not new_layers:
            new_layers.append(lin)
        elif isinstance(new_layers[-1], LinearLayer):
            new_layers[-1] = compose(new_layers[-1], lin)
        else:
            new_layers.append(lin)
        if act is None or act.kind == RELU:
            if act is not None:
                new_layers.append(act)
            continue

        # Reduce this maxpool stage level by level.
        entries = [list(g) for g in act.groups]
        while max(len(e) for e in entries) > 1:
            lows = lower_bounds(tuple(new_layers))
            if not np.all(np.isfinite(lows)):
                raise ValueError("unbounded intermediate value in maxpool lowering")
            width = new_layers[-1].out_width
            d_rows, d_bias = [], []
            r_rows, r_bias = [], []  # reconstruction, applied after the relu
            new_entries = []
            pos = 0

            def _unit(idx, width=width):
                row = np.zeros(width)
                row[idx] = 1.0
                return row

            for e in entries:
                grp_positions = []
                i = 0
                while i + 1 < len(e):
                    p, q = e[i], e[i + 1]
                    lq = lows[q]
                    d_rows.append(_unit(p) - _unit(q))
                    d_bias.append(0.0)
                    d_rows.append(_unit(q))
                    d_bias.append(-lq)
                    r_rows.append((pos, pos + 1))
                    r_bias.append(lq)
                    grp_positions.append(len(r_rows) - 1)
                    pos += 2
                    i += 2
                if i < len(e):  # odd element passes through
                    v = e[i]
                    d_rows.append(_unit(v))
                    d_bias.append(-lows[v])
                    r_rows.append((pos,))
                    r_bias.append(lows[v])
                    grp_positions.append(len(r_rows) - 1)
                    pos += 1
                new_entries.append(grp_positions)

            d_layer = LinearLayer(np.vstack(d_rows), np.array(d_bias))
            relu_width = d_layer.out_width
            rec = np.zeros((len(r_rows), relu_width))
            for r, cols in enumerate(r_rows):
                for cidx in cols:
                    rec[r, cidx] = 1.0
            r_layer = LinearLayer(rec, np.array(r_bias))

            new_layers[-1] = compose(new_layers[-1], d_layer)
            new_layers.append(ActivationLayer(RELU))
            new_layers.append(r_layer)
            entries = new_entries

        # Select each group's sole survivor, in group order.
        sel = np.zeros((len(entries), new_layers[-1].out_width))
        for g, e in enumerate(entries):
            sel[g, e[0]] = 1.0
        new_layers[-1] = compose(new_layers[-1], LinearLayer(sel, np.zeros(len(entries))))
    return Network(tuple(new_layers))


def validate_counterexample(problem: CanonicalProblem, x: np.ndarray, tol: float) -> bool:
    """A point disproves the property iff it sits in the box and drives the
    canonical output to zero or below (both checked within tol)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.net.input_dim,):
        return False
    if not problem.domain.contains(x, tol=tol):
        return False
    return bool(eval_network(problem.net, x)[0] <= tol)
