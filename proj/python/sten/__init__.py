"""Python bindings for the sten CTR laboratory.

Thin re-export of the _sten extension module. The extension must be on
sys.path (the CMake tree arranges this for tests; an installed wheel
places it next to this package).
"""

from _sten import (
    auc,
    evaluate,
    gen_data,
    geohash_encode,
    hash_feature,
    logloss,
    period_name,
    period_of_day,
    predict,
    relaimpr,
    train,
)

__all__ = [
    "auc",
    "evaluate",
    "gen_data",
    "geohash_encode",
    "hash_feature",
    "logloss",
    "period_name",
    "period_of_day",
    "predict",
    "relaimpr",
    "train",
]
