# coding=utf-8
# Copyright 2022 The adaptive-ope Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Package-wide logging. Every module logs through `get_logger(__name__)`, so all records end up under the
`adaptive_ope` logger, which writes to stderr at WARNING unless `ADAPTIVE_OPE_VERBOSITY` says otherwise.

Replication loops wrap their iterators in `tqdm`; bars can be switched off for a whole run (`ope -q ...`).
"""

import logging
import os
import sys
import threading
from logging import DEBUG, ERROR, INFO, WARNING  # NOQA
from typing import Optional

from tqdm import auto as tqdm_lib


VERBOSITY_ENV = "ADAPTIVE_OPE_VERBOSITY"
LOG_LEVELS = {"debug": DEBUG, "info": INFO, "warning": WARNING, "error": ERROR, "critical": logging.CRITICAL}

_PACKAGE = __name__.split(".")[0]
_handler_lock = threading.Lock()
_handler: Optional[logging.Handler] = None
_progress_bars = True


def _level_from_env() -> int:
    requested = os.getenv(VERBOSITY_ENV, "").strip().lower()
    if not requested:
        return WARNING
    if requested not in LOG_LEVELS:
        logging.getLogger().warning(
            f"Ignoring {VERBOSITY_ENV}={requested}: expected one of {', '.join(LOG_LEVELS)}"
        )
        return WARNING
    return LOG_LEVELS[requested]


def _package_logger() -> logging.Logger:
    global _handler

    package_logger = logging.getLogger(_PACKAGE)
    with _handler_lock:
        if _handler is None:
            _handler = logging.StreamHandler(sys.stderr)
            _handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
            package_logger.addHandler(_handler)
            package_logger.setLevel(_level_from_env())
            package_logger.propagate = False
    return package_logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Logger for `name`, a module path inside the package; the package logger itself when `None`."""
    _package_logger()
    return logging.getLogger(name or _PACKAGE)


def get_verbosity() -> int:
    return _package_logger().getEffectiveLevel()


def set_verbosity(verbosity: int) -> None:
    """
    Args:
        verbosity (`int`):
            A `logging` level such as `adaptive_ope.logging.INFO`.
    """
    _package_logger().setLevel(verbosity)


def set_verbosity_info():
    set_verbosity(INFO)


def set_verbosity_warning():
    set_verbosity(WARNING)


def enable_propagation() -> None:
    """Lets records reach the root logger, e.g. for pytest's `caplog`."""
    _package_logger().propagate = True


class _SilentProgress:
    """Stand-in for a disabled bar: iterates like the wrapped iterable and ignores every bar method."""

    def __init__(self, iterable=None, *args, **kwargs):
        self._iterable = iterable

    def __iter__(self):
        return iter(self._iterable)

    def __getattr__(self, _):
        return lambda *args, **kwargs: None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def tqdm(*args, **kwargs):
    """`tqdm.auto.tqdm`, or a silent pass-through when progress bars are disabled."""
    if _progress_bars:
        return tqdm_lib.tqdm(*args, **kwargs)
    return _SilentProgress(*args, **kwargs)


def is_progress_bar_enabled() -> bool:
    return _progress_bars


def enable_progress_bar():
    global _progress_bars
    _progress_bars = True


def disable_progress_bar():
    global _progress_bars
    _progress_bars = False
