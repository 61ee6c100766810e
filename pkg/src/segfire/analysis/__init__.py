"""Classification metrics and the layer cost model."""

from .cost import (
    FLOAT64_BYTES,
    LayerCostInputs,
    asymptotic_check,
    conv_ops_exact,
    dense_space,
    generated_output_memory,
    input_image_memory,
    model_space,
    nopl,
    ops_per_layer,
    parameter_count,
    topl,
    total_operational_space,
    weight_memory,
)
from .metrics import ConfusionCounts, MetricsReport, confusion, metrics
from .report import (
    REFERENCE_COLUMNS,
    REFERENCE_TABLE,
    REFERENCE_TABLE_VERSION,
    ComplexityReport,
    DiscrepancyCell,
    DiscrepancyReport,
    LayerComplexity,
    complexity_report,
    discrepancy_report,
    executed_macs,
    layer_complexity,
    layer_cost_inputs,
    model_complexity_report,
    reference_column_totals,
    report_dict,
)

__all__ = [name for name in dir() if not name.startswith("_")]
