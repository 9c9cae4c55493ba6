from .nuisance_knn import KNNRegressor, knn_fit
from .nuisance_nadaraya_watson import NadarayaWatsonRegressor, median_heuristic_bandwidth, nw_fit, scott_bandwidth
from .nuisance_utils import (
    VARIANCE_FLOOR,
    ConstantNuisancePair,
    FittedNuisancePair,
    NuisancePair,
    NuisanceRegressor,
    NuisanceSequence,
    OracleNuisancePair,
    ZeroMeanNuisancePair,
    make_regressor,
    nuisance_error,
    oracle_nuisance,
    sequential_nuisance,
    zero_nuisance,
)
