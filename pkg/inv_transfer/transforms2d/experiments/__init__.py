from .config import ExperimentConfig, ExperimentKind, build_config
from .factors import run_factor_comparison, run_full_finetune
from .irrelevant import run_irrelevant_features, run_relevance_availability
from .nested import run_nested_mismatch
from .ood import run_ood_invariance
from .report import RunReport

RUNNERS = {
    ExperimentKind.FACTOR_COMPARISON: run_factor_comparison,
    ExperimentKind.IRRELEVANT_FEATURES: run_irrelevant_features,
    ExperimentKind.RELEVANCE_AVAILABILITY: run_relevance_availability,
    ExperimentKind.OOD_INVARIANCE: run_ood_invariance,
    ExperimentKind.NESTED_MISMATCH: run_nested_mismatch,
    ExperimentKind.FULL_FINETUNE: run_full_finetune,
}


def run_experiment(cfg):
    return RUNNERS[cfg.kind](cfg)
