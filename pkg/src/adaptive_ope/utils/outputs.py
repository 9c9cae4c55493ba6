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
Result containers returned by estimators, experiments and acceptance suites.
"""

from collections import OrderedDict
from dataclasses import fields
from typing import Any, Dict, Tuple

import numpy as np


def to_json_safe(value):
    """Recursively turns numpy arrays and scalars into lists and python numbers, so `json.dumps` accepts them."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): to_json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_json_safe(v) for v in value]
    return value


class BaseOutput(OrderedDict):
    """
    Dataclass-backed result container, readable three ways: `out.theta_hat`, `out["theta_hat"]` and `out[0]`.
    Fields left at `None` are not mapping keys, so integer indexing and [`~BaseOutput.to_tuple`] skip them, while
    [`~BaseOutput.to_dict`] keeps every field for a stable JSON schema. Keys cannot be removed.
    """

    def __post_init__(self):
        names = [f.name for f in fields(self)]
        if not names:
            raise ValueError(f"{self.__class__.__name__} declares no fields")
        for name in names:
            value = getattr(self, name)
            if value is not None:
                self[name] = value

    def _read_only(self, operation):
        raise TypeError(f"`{operation}` would drop a field of {self.__class__.__name__}")

    def __delitem__(self, key):
        self._read_only("del")

    def pop(self, *args, **kwargs):
        self._read_only("pop")

    def popitem(self, *args, **kwargs):
        self._read_only("popitem")

    def setdefault(self, *args, **kwargs):
        self._read_only("setdefault")

    def update(self, *args, **kwargs):
        self._read_only("update")

    def __getitem__(self, key):
        if isinstance(key, str):
            return super().__getitem__(key)
        return self.to_tuple()[key]

    # attribute and key views stay in sync
    def __setattr__(self, name, value):
        if value is not None and name in self.__dataclass_fields__:
            super().__setitem__(name, value)
        super().__setattr__(name, value)

    def __setitem__(self, key, value):
        super().__setitem__(key, value)
        super().__setattr__(key, value)

    def to_tuple(self) -> Tuple[Any]:
        """Values of the fields that are not `None`, in declaration order."""
        return tuple(super(BaseOutput, self).__getitem__(k) for k in self.keys())

    def to_dict(self) -> Dict[str, Any]:
        """Every field, `None` included, converted with [`to_json_safe`]."""
        return {f.name: to_json_safe(getattr(self, f.name)) for f in fields(self)}
