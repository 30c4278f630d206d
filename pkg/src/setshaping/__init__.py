"""Set shaping: order-preserving maps onto the lowest-information strings, with error detection."""
from .cache import get_class_table
from .shaping import (
    NotInImage,
    PrefixDetector,
    ShapingConfig,
    count_in_image_with_prefix,
    first_infeasible_position,
    is_in_image,
    rank,
    shape,
    unrank,
    unshape,
)
from .source_model import (
    CountVector,
    Ensemble,
    count_vector,
    empirical_information,
    entropy,
    model_information,
    string_probability,
)
from .typeclasses import (
    EMPIRICAL,
    MODEL,
    ClassTable,
    EnumerationCapExceeded,
    TieGroup,
    build_class_table,
    class_info,
    compare_classes,
    enumerate_classes,
    multinomial,
)

__version__ = "0.1.0"
