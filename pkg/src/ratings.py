"""
Ratings-file loading and train/test splitting for the real-data protocol.

Both MovieLens layouts are accepted: tab-separated ``user item rating [timestamp]``
(100k ``u.data``) and ``user::item::rating::timestamp`` (1M ``ratings.dat``).
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd

from .errors import ArgumentError, DataWarning, RatingsParseError
from .model import ObservationSet, make_rng

logger = logging.getLogger(__name__)

COLUMNS = ["user", "item", "rating", "timestamp"]
RATING_RANGE = (1.0, 5.0)


def _lookup(ids: np.ndarray, value: int, kind: str) -> int:
    # ids are sorted and unique
    index = int(np.searchsorted(ids, value))
    if index == len(ids) or ids[index] != value:
        raise KeyError(f"unknown {kind} id {value}")
    return index


@dataclass
class RatingsData:
    """Observations plus the map from matrix indices back to the file's ids."""

    obs: ObservationSet
    user_ids: np.ndarray
    item_ids: np.ndarray
    duplicates_dropped: int = 0
    out_of_range: int = 0

    def user_index(self, user_id: int) -> int:
        return _lookup(self.user_ids, user_id, "user")

    def item_index(self, item_id: int) -> int:
        return _lookup(self.item_ids, item_id, "item")

    def dimension_map(self) -> Dict[str, Any]:
        return {
            "p": self.obs.p,
            "q": self.obs.q,
            "user_ids": [int(u) for u in self.user_ids],
            "item_ids": [int(i) for i in self.item_ids],
        }

    def save_dimension_map(self, path: str):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.dimension_map(), f)


def _read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            sep=r"\t|::",
            engine="python",
            header=None,
            names=COLUMNS,
            dtype=str,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except pd.errors.ParserError as e:
        raise RatingsParseError(f"malformed record: {e}", _line_from_parser_error(e)) from e
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=COLUMNS, dtype=str)


def _line_from_parser_error(error: Exception) -> int:
    words = str(error).replace(",", " ").split()
    for a, b in zip(words, words[1:]):
        if a.lower() == "line" and b.isdigit():
            return int(b)
    return 0


def _first_bad_line(mask: pd.Series) -> int:
    return int(np.flatnonzero(mask.to_numpy())[0]) + 1


def parse_ratings(path: str) -> RatingsData:
    """
    Parse a ratings file into an ObservationSet with contiguous 0-based indices.

    Args:
        path: Path to the ratings file

    Returns:
        RatingsData with observations and the id maps

    Raises:
        FileNotFoundError: If the file does not exist
        RatingsParseError: On the first malformed line
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"ratings file not found: {path}")

    table = _read_table(path)
    blank = table.isna().all(axis=1)
    table = table.assign(line=np.arange(1, len(table) + 1))[~blank]

    fields = table[["user", "item", "rating"]].apply(lambda col: col.str.strip())
    missing = fields.isna().any(axis=1)
    if missing.any():
        raise RatingsParseError("expected at least 3 fields", int(table["line"][missing].iloc[0]))

    users = pd.to_numeric(fields["user"], errors="coerce")
    items = pd.to_numeric(fields["item"], errors="coerce")
    values = pd.to_numeric(fields["rating"], errors="coerce")
    bad_id = users.isna() | items.isna() | (users % 1 != 0) | (items % 1 != 0)
    bad_value = values.isna() | ~np.isfinite(values.fillna(0.0))
    bad = bad_id | bad_value
    if bad.any():
        line = int(table["line"][bad].iloc[0])
        column = "user/item id" if bad_id[bad].iloc[0] else "rating"
        raise RatingsParseError(f"non-numeric {column}", line)

    frame = pd.DataFrame({"user": users.astype(np.int64), "item": items.astype(np.int64), "rating": values})
    if frame.empty:
        raise ArgumentError(f"no ratings in {path}")

    duplicated = frame.duplicated(subset=["user", "item"], keep="first")
    n_dup = int(duplicated.sum())
    if n_dup:
        warnings.warn(f"{n_dup} duplicate (user, item) ratings dropped, first kept", DataWarning, stacklevel=2)
        frame = frame[~duplicated]

    lo, hi = RATING_RANGE
    outside = int(((frame["rating"] < lo) | (frame["rating"] > hi)).sum())
    if outside:
        warnings.warn(f"{outside} ratings outside [{lo:g}, {hi:g}]", DataWarning, stacklevel=2)

    user_ids, rows = np.unique(frame["user"].to_numpy(), return_inverse=True)
    item_ids, cols = np.unique(frame["item"].to_numpy(), return_inverse=True)
    obs = ObservationSet(rows, cols, frame["rating"].to_numpy(dtype=np.float64), len(user_ids), len(item_ids))
    logger.info("parsed %d ratings: %d users x %d items", obs.n, obs.p, obs.q)
    return RatingsData(obs, user_ids, item_ids, duplicates_dropped=n_dup, out_of_range=outside)


def split_train_test(obs: ObservationSet, n_train: int, seed: int) -> Tuple[ObservationSet, ObservationSet]:
    """Random train/test partition drawn without replacement; entry order is preserved in both parts."""
    if not 1 <= n_train <= obs.n:
        raise ArgumentError(f"n_train must lie in [1, {obs.n}], got {n_train}")
    perm = make_rng(seed).permutation(obs.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return obs.subset(train_idx), obs.subset(test_idx)
