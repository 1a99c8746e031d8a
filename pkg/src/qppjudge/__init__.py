# public api
# flake8: noqa

from .baselines import BaselineSpec, predict_baseline, predict_direct
from .evaluation import (
    PairedSeries,
    cohen_kappa,
    depth_sweep,
    evaluate,
    kendall_tau_b,
    pearson,
    smare,
    spearman,
)
from .judges import (
    JudgeConfig,
    judge_list,
    llm_judge,
    make_judge,
    oracle_judge,
    threshold_judge,
)
from .metrics import MetricSpec, predict_many, predict_run
from .store import JudgmentStore
from .trec import parse_qrels, parse_run
