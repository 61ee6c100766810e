"""Per-layer memory and operation counts.

Symbols follow the usual layer notation: ``k`` kernels of ``c x w x h``
with stride ``s`` over an ``M x N`` input; dense layers map ``n`` inputs to
``m_o`` outputs; ``p`` is the element size in bytes.

Quotients such as ``(M - w + s)(N - h + s) / s^2`` are generally not
integral.  Integer results are floored once, after the full product.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..exceptions import InvalidInputError

FLOAT64_BYTES = 8


@dataclass(frozen=True)
class LayerCostInputs:
    kind: str
    k: int = 0
    c: int = 0
    w: int = 0
    h: int = 0
    s: int = 1
    M: int = 0
    N: int = 0
    n: int = 0
    m_o: int = 0
    p: int = FLOAT64_BYTES

    def __post_init__(self):
        if self.kind not in ("conv", "dense"):
            raise InvalidInputError(f"kind must be 'conv' or 'dense', got {self.kind!r}")
        if self.kind == "conv":
            if min(self.k, self.c, self.w, self.h, self.s, self.p) < 1:
                raise InvalidInputError("conv inputs need positive k, c, w, h, s and p")
        elif min(self.n, self.m_o, self.p) < 1:
            raise InvalidInputError("dense inputs need positive n, m_o and p")

    @classmethod
    def conv(cls, k, c, w, h, s, M=1, N=1, p=FLOAT64_BYTES):
        return cls("conv", k=k, c=c, w=w, h=h, s=s, M=M, N=N, p=p)

    @classmethod
    def dense(cls, n, m_o, p=FLOAT64_BYTES):
        return cls("dense", n=n, m_o=m_o, p=p)


def _require(inputs, kind):
    if inputs.kind != kind:
        raise InvalidInputError(f"expected a {kind} layer, got {inputs.kind}")


def _effective(inputs):
    rows = inputs.M - inputs.w + inputs.s
    cols = inputs.N - inputs.h + inputs.s
    if rows < 1 or cols < 1:
        raise InvalidInputError(f"non-positive effective dims ({rows}, {cols}); input smaller than kernel")
    return rows, cols


def parameter_count(inputs: LayerCostInputs) -> int:
    if inputs.kind == "conv":
        return inputs.k * (inputs.c * inputs.w * inputs.h + 1)
    return inputs.n * inputs.m_o + inputs.m_o


def weight_memory(inputs: LayerCostInputs) -> int:
    """Bytes for a conv layer's kernels and biases, ``k(c*w*h + 1) * p``."""
    _require(inputs, "conv")
    return parameter_count(inputs) * inputs.p


def model_space(inputs: LayerCostInputs) -> int:
    """Parameter bytes for either layer kind."""
    return parameter_count(inputs) * inputs.p


def input_image_memory(inputs: LayerCostInputs) -> int:
    _require(inputs, "conv")
    if inputs.M < 1 or inputs.N < 1:
        raise InvalidInputError("M and N must be positive")
    return inputs.c * inputs.M * inputs.N * inputs.p


def generated_output_memory(inputs: LayerCostInputs) -> int:
    """``k (M-w+s)(N-h+s) p / s^2``, floored."""
    _require(inputs, "conv")
    rows, cols = _effective(inputs)
    return inputs.k * rows * cols * inputs.p // (inputs.s ** 2)


def total_operational_space(inputs: LayerCostInputs) -> int:
    """Input memory + weight memory + twice the output memory."""
    return input_image_memory(inputs) + weight_memory(inputs) + 2 * generated_output_memory(inputs)


def dense_space(inputs: LayerCostInputs, variant: str = "standard") -> int:
    """Weights, weight gradients and activations of a dense layer, in bytes.

    ``standard`` counts ``2n + 2m_o`` activation slots; ``table_compat``
    counts ``2m_o + 2m_o``, which matches the reference table's dense rows.
    """
    _require(inputs, "dense")
    weights = parameter_count(inputs)
    if variant == "standard":
        acts = 2 * inputs.n + 2 * inputs.m_o
    elif variant == "table_compat":
        acts = 4 * inputs.m_o
    else:
        raise InvalidInputError(f"unknown dense_space variant {variant!r}")
    return (2 * weights + acts) * inputs.p


def conv_ops_exact(inputs: LayerCostInputs, per_kernel: bool = False) -> Fraction:
    """Unrounded conv operation count.

    ``per_kernel=False`` gives the multiply-or-add count across all ``k``
    kernels; ``per_kernel=True`` gives the kernel-independent total
    ``2 (c w h)(M-w+s)(N-h+s) / s^2``.
    """
    _require(inputs, "conv")
    rows, cols = _effective(inputs)
    base = inputs.c * inputs.w * inputs.h * rows * cols
    if per_kernel:
        return Fraction(2 * base, inputs.s ** 2)
    return Fraction(base * inputs.k, inputs.s ** 2)


def nopl(inputs: LayerCostInputs) -> int:
    return int(conv_ops_exact(inputs) // 1)


def topl(inputs: LayerCostInputs) -> int:
    return int(conv_ops_exact(inputs, per_kernel=True) // 1)


def ops_per_layer(inputs: LayerCostInputs) -> int:
    """Operation count: the kernel-inclusive count for conv, ``2 n m_o`` for dense."""
    if inputs.kind == "dense":
        return 2 * inputs.n * inputs.m_o
    return nopl(inputs)


def asymptotic_check(inputs: LayerCostInputs, dimension: str = "M", d: Optional[int] = None):
    """Probe how the per-kernel op count grows along one input dimension.

    Evaluates the count at ``d, 2d, 3d, 4d`` with the other dimension
    fixed.  Since the count has the form ``G (M - a)(N - b)`` it is affine
    in each dimension: the slope is ``G * (N - b)`` along ``M`` (resp.
    ``G * (M - a)`` along ``N``) and second differences vanish.
    """
    _require(inputs, "conv")
    if dimension not in ("M", "N"):
        raise InvalidInputError("dimension must be 'M' or 'N'")
    d = d or getattr(inputs, dimension)
    from dataclasses import replace

    values = [conv_ops_exact(replace(inputs, **{dimension: d * i}), per_kernel=True) for i in (1, 2, 3, 4)]
    g = Fraction(2 * inputs.c * inputs.w * inputs.h, inputs.s ** 2)
    a, b = inputs.w - inputs.s, inputs.h - inputs.s
    other = (inputs.N - b) if dimension == "M" else (inputs.M - a)
    slope = g * other
    first = [values[i + 1] - values[i] for i in range(3)]
    second = [first[i + 1] - first[i] for i in range(2)]
    return {
        "dimension": dimension,
        "points": [d, 2 * d, 3 * d, 4 * d],
        "values": values,
        "first_differences": first,
        "second_differences": second,
        "slope_per_unit": slope,
        "G": g,
        "a": a,
        "b": b,
        "affine": all(x == 0 for x in second) and all(f == slope * d for f in first),
    }
