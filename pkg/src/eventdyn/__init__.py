"""Event dynamics, category prevalence and clustering for longitudinal event logs."""

from .cluster import (
    ClusterAssignment,
    Dendrogram,
    DistanceMatrix,
    cluster_profiles,
    compare_cluster_indicators,
    cut_dendrogram,
    euclidean_distances,
    ward_cluster,
)
from .dynamics import (
    CountryMetrics,
    burstiness,
    category_diversity,
    compute_country_metrics,
    cumulative_category_timeline,
    overall_stats,
    persistence,
    temporal_windows,
)
from .errors import DegenerateDataError, EventDynError, ValidationError
from .ingest import (
    EventLog,
    EventRecord,
    IndicatorTable,
    Transaction,
    TransactionTable,
    build_transactions,
    filter_countries,
    load_country_summary,
    load_taxonomy,
    parse_events,
    parse_indicators,
)
from .prevalence import RankMatrix, build_rank_matrix, select_countries, top_k_union, zscore_ranks
from .stats import correlate_all, jarque_bera, pearson, qq_points
from .synth import GapDistribution, SynthSpec, generate

__version__ = "0.1.0"
