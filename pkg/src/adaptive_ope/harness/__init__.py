from .acceptance import SUITES, SuiteResult, run_acceptance
from .experiment_config import (
    DEFAULT_ESTIMATORS,
    ExperimentConfig,
    load_experiment_config,
)
from .experiment_runner import (
    RESULT_COLUMNS,
    ReplicationError,
    ResultRow,
    ResultTable,
    aggregate,
    emit_table,
    load_table_json,
    prepare_experiment,
    run_experiment,
    run_replication,
    run_replications,
    summarize_estimates,
    table_to_csv,
    table_to_json,
)
