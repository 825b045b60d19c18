"""Knowledge-collapse simulation and output-diversity toolkit."""

# defined before the submodule imports: persist reads it at import time
__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    TrueDistribution,
    TruncationSpec,
    dist_std,
    rescale_distribution,
    t_pdf,
    t_sample,
    truncated_sample,
)
from .density import (  # noqa: E402
    GridSpec,
    GriddedPdf,
    KdeSpec,
    eval_grid,
    fit_kde,
    hellinger,
    pdf_variance,
)
from .diversity import (  # noqa: E402
    FrequencyTable,
    GroupPartition,
    VectorSet,
    dbscan,
    frequency_table,
    group_proportional_deviation,
    minimal_representativeness,
    pielou_evenness,
    proportional_deviation,
    resolve_entities,
    shannon_index,
)
from .errors import ConfigError, UsageError  # noqa: E402
from .simulation import (  # noqa: E402
    Action,
    SimConfig,
    SimResult,
    collapse_metrics,
    run_simulation,
)
from .sweep import SweepGrid, aggregate, run_sweep  # noqa: E402

__all__ = [
    "Action", "ConfigError", "FrequencyTable", "GridSpec", "GriddedPdf", "GroupPartition", "KdeSpec",
    "SimConfig", "SimResult", "SweepGrid", "TrueDistribution", "TruncationSpec", "UsageError",
    "VectorSet", "aggregate", "collapse_metrics", "dbscan", "dist_std", "eval_grid", "fit_kde",
    "frequency_table", "group_proportional_deviation", "hellinger", "minimal_representativeness",
    "pdf_variance", "pielou_evenness", "proportional_deviation", "rescale_distribution",
    "resolve_entities", "run_simulation", "run_sweep", "shannon_index", "t_pdf", "t_sample",
    "truncated_sample",
]
