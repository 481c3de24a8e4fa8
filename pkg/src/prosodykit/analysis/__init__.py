"""Statistical analysis: perception tests, decision kernels, word-error reports."""

from prosodykit.analysis.kernels import (
    Kernel,
    KernelError,
    KernelKind,
    KernelTrial,
    WindowTest,
    group_kernel,
    group_kernel_tests,
    participant_kernel,
    participant_option_means,
    trials_from_manifest,
)
from prosodykit.analysis.stats import (
    AnalysisError,
    PairedTResult,
    StatTestResult,
    TukeyPair,
    anova_from_summary,
    bootstrap_ci,
    chi_square_gof,
    one_way_anova,
    paired_t,
    pearson_r,
    tukey_hsd,
)
from prosodykit.analysis.wer import (
    DEFAULT_STYLES,
    StyleWer,
    SubstitutionBreakdown,
    WerReport,
    load_homophones,
    load_minimal_pairs,
    load_wer_fixture,
    read_responses_csv,
    wer_report,
)

__all__ = [
    "AnalysisError",
    "DEFAULT_STYLES",
    "Kernel",
    "KernelError",
    "KernelKind",
    "KernelTrial",
    "PairedTResult",
    "StatTestResult",
    "StyleWer",
    "SubstitutionBreakdown",
    "TukeyPair",
    "WerReport",
    "WindowTest",
    "anova_from_summary",
    "bootstrap_ci",
    "chi_square_gof",
    "group_kernel",
    "group_kernel_tests",
    "load_homophones",
    "load_minimal_pairs",
    "load_wer_fixture",
    "one_way_anova",
    "paired_t",
    "participant_kernel",
    "participant_option_means",
    "pearson_r",
    "read_responses_csv",
    "tukey_hsd",
    "trials_from_manifest",
    "wer_report",
]
