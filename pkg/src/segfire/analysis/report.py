"""Per-layer complexity of a built model, and its comparison with the
reference memory table."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..exceptions import InvalidInputError
from ..nn import ConvLayer, DenseLayer, FlattenLayer, ModelGraph, PoolLayer
from .cost import (
    FLOAT64_BYTES,
    LayerCostInputs,
    dense_space,
    input_image_memory,
    generated_output_memory,
    model_space,
    nopl,
    ops_per_layer,
    parameter_count,
    topl,
    total_operational_space,
)

# Reference values, one row per weighted layer of the default
# architecture.  Bump the version if the rows are ever corrected.
REFERENCE_TABLE_VERSION = 1
REFERENCE_INPUT_SHAPE = (240, 320, 3)
REFERENCE_COLUMNS = ("parameters", "model_space", "operational_space", "operations")
REFERENCE_TABLE = (
    ("conv1", (896, 7_168, 2_889_856, 8_242_560)),
    ("conv2", (18_496, 147_968, 1_322_752, 4_095_360)),
    ("conv3", (73_856, 590_848, 636_544, 2_021_760)),
    ("dense1", (2_457_616, 18_530_432, 39_322_368, 4_915_200)),
    ("dense2", (272, 2_176, 4_864, 512)),
    ("output", (17, 136, 1_024, 32)),
)


def reference_column_totals() -> Dict[str, int]:
    """Column sums of the reference table."""
    return {col: sum(row[i] for _, row in REFERENCE_TABLE) for i, col in enumerate(REFERENCE_COLUMNS)}


@dataclass(frozen=True)
class LayerComplexity:
    """Cost figures of one weighted layer.

    Conv cells that depend on ``(M - w + s)(N - h + s)`` are ``None`` when
    that extent is not positive (a kernel wider than its unpadded input),
    since the formulas do not apply there.  ``macs`` is the count
    of multiply-accumulates the layer actually executes, independent of the
    formulas.
    """

    name: str
    kind: str
    parameters: int
    model_space: int
    input_image_memory: Optional[int]
    generated_output_memory: Optional[int]
    operational_space: Optional[int]
    operations: Optional[int]
    macs: int = 0
    # alternative readings of the same quantity, keyed by label
    variants: Dict[str, int] = field(default_factory=dict)


@dataclass
class ComplexityReport:
    layers: List[LayerComplexity]
    element_bytes: int = FLOAT64_BYTES

    @property
    def total_parameters(self):
        return sum(r.parameters for r in self.layers)

    @property
    def total_operational_space(self):
        return sum(r.operational_space or 0 for r in self.layers)

    @property
    def total_operations(self):
        return sum(r.operations or 0 for r in self.layers)

    @property
    def total_macs(self):
        return sum(r.macs for r in self.layers)

    @property
    def complete(self):
        """True when every formula cell could be evaluated."""
        return all(r.operations is not None for r in self.layers)

    def layer(self, name) -> LayerComplexity:
        for row in self.layers:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "kind", "parameters", "model_space", "input_image_memory",
                    "generated_output_memory", "operational_space", "operations", "macs"])
        blank = lambda v: "" if v is None else v
        for r in self.layers:
            w.writerow([r.name, r.kind, r.parameters, r.model_space, blank(r.input_image_memory),
                        blank(r.generated_output_memory), blank(r.operational_space), blank(r.operations),
                        r.macs])
        w.writerow(["total", "", self.total_parameters, sum(r.model_space for r in self.layers), "", "",
                    self.total_operational_space, self.total_operations, self.total_macs])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'layer':<8} {'kind':<6} {'params':>12} {'model_B':>14} {'oper_B':>14} {'ops':>14}"
        lines = [head]
        fmt = lambda v: "n/a" if v is None else f"{v:,}"
        for r in self.layers:
            lines.append(f"{r.name:<8} {r.kind:<6} {r.parameters:>12,} {r.model_space:>14,} "
                         f"{fmt(r.operational_space):>14} {fmt(r.operations):>14}")
        lines.append(f"{'total':<8} {'':<6} {self.total_parameters:>12,} "
                     f"{sum(r.model_space for r in self.layers):>14,} "
                     f"{self.total_operational_space:>14,} {self.total_operations:>14,}")
        return "\n".join(lines) + "\n"


def layer_cost_inputs(model: ModelGraph, p: int = FLOAT64_BYTES):
    """``(name, LayerCostInputs)`` for every conv and dense layer of ``model``."""
    shapes = model.shape_trace()
    out = []
    for layer, in_shape in zip(model.layers, shapes):
        if isinstance(layer, ConvLayer):
            k, c, kh, kw = layer.kernels.shape
            # M x N is the input's height x width; w x h the kernel's
            out.append((layer.name, LayerCostInputs.conv(k, c, kh, kw, layer.stride,
                                                         M=in_shape[0], N=in_shape[1], p=p)))
        elif isinstance(layer, DenseLayer):
            n, m = layer.weights.shape
            out.append((layer.name, LayerCostInputs.dense(n, m, p=p)))
        elif not isinstance(layer, (PoolLayer, FlattenLayer)):
            raise InvalidInputError(f"unsupported layer kind {type(layer).__name__}")
    return out


def layer_complexity(name: str, inputs: LayerCostInputs, macs: int = 0) -> LayerComplexity:
    params = parameter_count(inputs)
    if inputs.kind == "conv":
        try:
            gom, space = generated_output_memory(inputs), total_operational_space(inputs)
            ops, per_kernel = nopl(inputs), {"operations:per_kernel_total": topl(inputs)}
        except InvalidInputError:
            gom = space = ops = None
            per_kernel = {}
        return LayerComplexity(name, "conv", params, model_space(inputs), input_image_memory(inputs),
                               gom, space, ops, macs, variants=per_kernel)
    return LayerComplexity(
        name, "dense", params, model_space(inputs), None, None,
        dense_space(inputs), ops_per_layer(inputs), macs,
        variants={"operational_space:compat": dense_space(inputs, "table_compat")},
    )


def executed_macs(model: ModelGraph):
    """Multiply-accumulates per conv and dense layer for one input, keyed by layer name."""
    shapes = model.shape_trace()
    out = {}
    for layer, in_shape, out_shape in zip(model.layers, shapes, shapes[1:]):
        if isinstance(layer, ConvLayer):
            k, c, kh, kw = layer.kernels.shape
            out[layer.name] = k * c * kh * kw * out_shape[0] * out_shape[1]
        elif isinstance(layer, DenseLayer):
            out[layer.name] = int(np.prod(layer.weights.shape))
    return out


def complexity_report(model: ModelGraph, p: int = FLOAT64_BYTES) -> ComplexityReport:
    macs = executed_macs(model)
    return ComplexityReport([layer_complexity(n, i, macs[n]) for n, i in layer_cost_inputs(model, p)], p)


@dataclass(frozen=True)
class DiscrepancyCell:
    layer: str
    column: str
    formula_value: int
    reference_value: int
    match: bool
    matching_variant: Optional[str] = None

    @property
    def abs_diff(self):
        return abs(self.formula_value - self.reference_value)

    @property
    def rel_diff(self):
        return self.abs_diff / self.reference_value if self.reference_value else float("inf")


@dataclass
class DiscrepancyReport:
    cells: List[DiscrepancyCell]
    table_version: int = REFERENCE_TABLE_VERSION

    @property
    def matches(self):
        return [c for c in self.cells if c.match]

    @property
    def mismatches(self):
        return [c for c in self.cells if not c.match]

    def cell(self, layer, column) -> DiscrepancyCell:
        for c in self.cells:
            if c.layer == layer and c.column == column:
                return c
        raise KeyError((layer, column))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "column", "formula_value", "reference_value", "abs_diff", "rel_diff",
                    "match", "matching_variant"])
        for c in self.cells:
            w.writerow([c.layer, c.column, c.formula_value, c.reference_value, c.abs_diff,
                        f"{c.rel_diff:.6g}", "yes" if c.match else "no", c.matching_variant or ""])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"reference table v{self.table_version}: "
                 f"{len(self.matches)} matching, {len(self.mismatches)} differing of {len(self.cells)} cells"]
        for c in self.cells:
            status = "match" if c.match else "DIFF"
            extra = f" (variant {c.matching_variant} matches)" if c.matching_variant else ""
            lines.append(f"{c.layer:<8} {c.column:<18} formula={c.formula_value:>12,} "
                         f"reference={c.reference_value:>12,} {status}{extra}")
        return "\n".join(lines) + "\n"


def discrepancy_report(report: ComplexityReport) -> DiscrepancyReport:
    """Compare ``report`` cell by cell with the reference table.

    Rows are paired with the model's weighted layers by name, so the model
    must have exactly the default layer list.  A cell matches when the
    default formula agrees; a matching alternative reading is noted but
    does not change the verdict.
    """
    names = [r.name for r in report.layers]
    expected = [name for name, _ in REFERENCE_TABLE]
    if names != expected:
        raise InvalidInputError(f"reference table covers layers {expected}; model has {names}")
    cells = []
    for (name, ref_row), row in zip(REFERENCE_TABLE, report.layers):
        for column, ref in zip(REFERENCE_COLUMNS, ref_row):
            value = getattr(row, column)
            variant = None
            if value != ref:
                for label, alt in row.variants.items():
                    if label.split(":")[0] == column and alt == ref:
                        variant = label
            cells.append(DiscrepancyCell(name, column, value, ref, value == ref, variant))
    return DiscrepancyReport(cells)


def model_complexity_report(model: ModelGraph, p: int = FLOAT64_BYTES):
    """Return ``(ComplexityReport, DiscrepancyReport or None)``.

    The discrepancy report is only produced for models with the default
    six weighted layers at the tabulated 240 x 320 x 3 input.
    """
    report = complexity_report(model, p)
    if tuple(model.input_shape) != REFERENCE_INPUT_SHAPE or not report.complete:
        return report, None
    try:
        diff = discrepancy_report(report)
    except InvalidInputError:
        diff = None
    return report, diff


def report_dict(report: ComplexityReport) -> dict:
    return {"element_bytes": report.element_bytes, "layers": [asdict(r) for r in report.layers],
            "totals": {"parameters": report.total_parameters,
                       "operational_space": report.total_operational_space,
                       "operations": report.total_operations,
                       "macs": report.total_macs}}
