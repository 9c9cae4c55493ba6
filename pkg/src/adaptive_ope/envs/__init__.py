from .environment_classification import (
    ClassificationEnvironment,
    ClassificationEpisode,
    classification_to_bandit,
    split_rows,
)
from .environment_synthetic import SyntheticEnvironment, make_synthetic_env
from .environment_utils import (
    BanditEnvironment,
    EnvironmentEpisode,
    EnvironmentSupport,
    EvaluationCovariates,
    generate_log,
    load_log_jsonl,
    save_log_jsonl,
    true_policy_value,
)
