"""Porous-structure CT analysis toolkit.

Pipeline: edge-preserving slice-wise filtering, unbalanced-Otsu
binarization, levitating-stone detection, distortion-constrained filter
selection and stone post-processing, with synthetic phantoms for
verification.
"""

from .volume import (
    Volume,
    BinaryVolume,
    load_volume,
    save_volume,
    load_binary_volume,
    save_binary_volume,
    extract_slice,
    insert_slice,
)
from .filters import (
    MedianFilter,
    AnisotropicDiffusionFilter,
    BilateralFilter,
    GuidedFilter,
    SliceFilter,
    apply_filter,
    diffusion_coefficient,
    filter_from_string,
    filter_to_string,
    FILTER_FAMILIES,
    FAMILY_ORDER,
)
from .segmentation import (
    Histogram,
    intensity_histogram,
    criterion_curve,
    unbalanced_otsu_threshold,
    binarize,
    UnbalancedOtsu,
)
from .components import (
    LabelField,
    Component,
    StoneReport,
    label_components,
    extract_components,
    stone_counts,
    stone_report,
    distance_to_bulk,
    stone_distances,
)
from .selection import (
    Evaluation,
    SelectionResult,
    SweepTable,
    distortion,
    calibrate_delta_max,
    evaluate_filter,
    default_grids,
    build_grid_filters,
    grid_search,
    FilterGridSearch,
    param_sweep,
)
from .postprocess import StoneDecision, stone_metric, resolve_stones
from .phantom import (
    PhantomSpec,
    GaussianNoise,
    SaltPepperNoise,
    generate_phantom,
    add_noise,
    porosity,
)
from .validation import check_binary_volume, check_volume

__version__ = "0.1.0"

__all__ = [
    "Volume",
    "BinaryVolume",
    "load_volume",
    "save_volume",
    "load_binary_volume",
    "save_binary_volume",
    "extract_slice",
    "insert_slice",
    "MedianFilter",
    "AnisotropicDiffusionFilter",
    "BilateralFilter",
    "GuidedFilter",
    "SliceFilter",
    "apply_filter",
    "diffusion_coefficient",
    "filter_from_string",
    "filter_to_string",
    "FILTER_FAMILIES",
    "FAMILY_ORDER",
    "Histogram",
    "intensity_histogram",
    "criterion_curve",
    "unbalanced_otsu_threshold",
    "binarize",
    "UnbalancedOtsu",
    "LabelField",
    "Component",
    "StoneReport",
    "label_components",
    "extract_components",
    "stone_counts",
    "stone_report",
    "distance_to_bulk",
    "stone_distances",
    "Evaluation",
    "SelectionResult",
    "SweepTable",
    "distortion",
    "calibrate_delta_max",
    "evaluate_filter",
    "default_grids",
    "build_grid_filters",
    "grid_search",
    "FilterGridSearch",
    "param_sweep",
    "StoneDecision",
    "stone_metric",
    "resolve_stones",
    "PhantomSpec",
    "GaussianNoise",
    "SaltPepperNoise",
    "generate_phantom",
    "add_noise",
    "porosity",
    "check_binary_volume",
    "check_volume",
]
