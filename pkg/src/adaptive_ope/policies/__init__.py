from .policy_linucb import LinUCBPolicy, LinUCBSnapshot, linucb_policy
from .policy_logistic import (
    LinearArgmaxPolicy,
    LogisticRegressionClassifier,
    fit_evaluation_policy,
    policy_accuracy,
)
from .policy_random_walk import RandomWalkPolicy, random_walk_policy
from .policy_utils import (
    AdaptivePolicy,
    CyclicPolicy,
    MixturePolicy,
    MixturePolicyFunction,
    StaticPolicy,
    load_policy,
    mixture_policy,
    policy_from_dict,
    save_policy,
    uniform_policy,
)
