"""CVE triage toolkit: feed ingestion, asset matching, ticket grouping,
and feed-completeness analytics."""

from .analytics import (
    CompletionDelay,
    CompletionField,
    DailyCompleteness,
    DelayReport,
    RankMethod,
    RankTestResult,
    ScoreTable,
    VendorStats,
    mann_whitney_u,
    severity_bucket,
)
from .errors import SentinelError, ValidationError
from .ingest import (
    CpeDictionary,
    Snapshot,
    diff_snapshots,
    load_snapshot,
    parse_asset_inventory,
    parse_cpe_dictionary,
    parse_feed,
    store_snapshot,
)
from .matcher import (
    AssetIndex,
    EvalReport,
    FpFilter,
    MatchResult,
    SummaryTerms,
    build_fp_filter,
    evaluate_corpus,
    extract_summary_terms,
    match_corpus,
    match_cve,
)
from .model import (
    AssetRecord,
    CpeUri,
    CveRecord,
    MatchVia,
    SeverityLevel,
    SnapshotDiff,
    Ticket,
    WellFormedName,
)
from .normalize import (
    StopWordList,
    standardize,
    tokenize,
    well_formed_from_cpe,
    well_formed_from_raw,
)
from .ticketer import emit_tickets, group_matches, parse_ticket_line

__version__ = "0.1.0"

__all__ = [
    "AssetIndex",
    "AssetRecord",
    "CompletionDelay",
    "CompletionField",
    "CpeDictionary",
    "CpeUri",
    "CveRecord",
    "DailyCompleteness",
    "DelayReport",
    "EvalReport",
    "FpFilter",
    "MatchResult",
    "MatchVia",
    "RankMethod",
    "RankTestResult",
    "ScoreTable",
    "SentinelError",
    "SeverityLevel",
    "Snapshot",
    "SnapshotDiff",
    "StopWordList",
    "SummaryTerms",
    "Ticket",
    "ValidationError",
    "VendorStats",
    "WellFormedName",
    "build_fp_filter",
    "diff_snapshots",
    "emit_tickets",
    "evaluate_corpus",
    "extract_summary_terms",
    "group_matches",
    "load_snapshot",
    "mann_whitney_u",
    "match_corpus",
    "match_cve",
    "parse_asset_inventory",
    "parse_cpe_dictionary",
    "parse_feed",
    "parse_ticket_line",
    "severity_bucket",
    "standardize",
    "store_snapshot",
    "tokenize",
    "well_formed_from_cpe",
    "well_formed_from_raw",
]
