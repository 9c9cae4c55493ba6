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
Frozen, JSON-serializable configuration shared by environments, policies, outcome models, estimators and
experiments.

A class opts in by deriving from [`ConfigMixin`], naming the file it is saved under in `config_name` and decorating
its `__init__` with [`register_to_config`]. Every constructor argument, defaults included, then lands in
`self.config`, and `cls.from_config(saved)` rebuilds an equivalent object.
"""
import functools
import inspect
import json
import os
from collections import OrderedDict
from typing import Any, Dict, Union

import numpy as np

from . import __version__
from .utils import logging
from .utils.outputs import to_json_safe


logger = logging.get_logger(__name__)

PathOrDict = Union[str, os.PathLike, Dict[str, Any]]


class FrozenDict(OrderedDict):
    """Read-only mapping whose keys are also readable as attributes (`config.num_periods`)."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        for key, value in self.items():
            object.__setattr__(self, key, value)
        object.__setattr__(self, "_frozen", True)

    def _refuse(self, operation):
        raise TypeError(f"{self.__class__.__name__} is read-only, `{operation}` is not supported")

    def __delitem__(self, *args, **kwargs):
        self._refuse("del")

    def pop(self, *args, **kwargs):
        self._refuse("pop")

    def popitem(self, *args, **kwargs):
        self._refuse("popitem")

    def setdefault(self, *args, **kwargs):
        self._refuse("setdefault")

    def update(self, *args, **kwargs):
        self._refuse("update")

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            self._refuse(f"{name} = ...")
        super().__setattr__(name, value)


class ConfigMixin:
    r"""
    Base class of every configurable component.

    Class attributes:
        - **config_name** (`str`) -- File name used by [`~ConfigMixin.save_config`]; subclasses must set it.
        - **ignore_for_config** (`List[str]`) -- Constructor arguments that are not recorded, such as a live
          random generator.
    """
    config_name = None
    ignore_for_config = []

    @property
    def config(self) -> FrozenDict:
        return self._internal_dict

    def register_to_config(self, **kwargs):
        if self.config_name is None:
            raise NotImplementedError(f"{self.__class__.__name__} must define `config_name` to be configurable")
        kwargs.pop("kwargs", None)
        for key, value in kwargs.items():
            setattr(self, key, value)

        recorded = dict(getattr(self, "_internal_dict", {}))
        if recorded:
            logger.debug(f"{self.__class__.__name__}: updating config keys {sorted(kwargs)}")
        recorded.update(kwargs)
        recorded["_class_name"] = self.__class__.__name__
        recorded["_adaptive_ope_version"] = __version__
        self._internal_dict = FrozenDict(recorded)

    def to_json_string(self) -> str:
        return json.dumps(to_json_safe(dict(getattr(self, "_internal_dict", {}))), indent=2, sort_keys=True) + "\n"

    def to_json_file(self, json_file_path: Union[str, os.PathLike]):
        with open(json_file_path, "w", encoding="utf-8") as writer:
            writer.write(self.to_json_string())

    def save_config(self, save_directory: Union[str, os.PathLike]):
        """
        Writes `config_name` inside `save_directory`, creating the directory when needed.

        Args:
            save_directory (`str` or `os.PathLike`):
                Target directory. Passing an existing file is an error.
        """
        if os.path.isfile(save_directory):
            raise ValueError(f"{save_directory} is a file; `save_config` expects a directory")
        os.makedirs(save_directory, exist_ok=True)
        path = os.path.join(save_directory, self.config_name)
        self.to_json_file(path)
        logger.info(f"{self.__class__.__name__} config written to {path}")

    @classmethod
    def from_config(cls, config: PathOrDict, **overrides):
        r"""
        Builds an instance from a saved configuration.

        Parameters:
            config (`str`, `os.PathLike` or `dict`):
                A JSON file, a directory holding `config_name`, or an already-parsed dictionary.
            overrides:
                Constructor arguments taking precedence over the stored values (command line flags, seeds).
        """
        config_dict = dict(config) if isinstance(config, dict) else cls.get_config_dict(config)
        return cls(**cls.extract_init_dict(config_dict, **overrides))

    @classmethod
    def get_config_dict(cls, config_path: Union[str, os.PathLike]) -> Dict[str, Any]:
        """Reads the JSON behind `config_path`. Raises `EnvironmentError` when there is no readable config there."""
        if cls.config_name is None:
            raise ValueError(
                f"{cls.__name__} has no `config_name`; load configs through a configurable subclass instead"
            )
        config_path = str(config_path)
        if os.path.isdir(config_path):
            config_file = os.path.join(config_path, cls.config_name)
            if not os.path.isfile(config_file):
                raise EnvironmentError(f"no {cls.config_name} in directory {config_path}")
        elif os.path.isfile(config_path):
            config_file = config_path
        else:
            raise EnvironmentError(f"{config_path} is neither a config file nor a directory")

        try:
            with open(config_file, "r", encoding="utf-8") as reader:
                return json.load(reader)
        except (json.JSONDecodeError, UnicodeDecodeError) as err:
            raise EnvironmentError(f"{config_file} is not valid JSON: {err}")

    @classmethod
    def extract_init_dict(cls, config_dict: Dict[str, Any], **overrides) -> Dict[str, Any]:
        """Constructor arguments from `config_dict` and `overrides`; unknown public keys are logged and dropped."""
        parameters = inspect.signature(cls.__init__).parameters
        accepted = {
            name
            for name, p in parameters.items()
            if name != "self" and p.kind not in (p.VAR_KEYWORD, p.VAR_POSITIONAL)
        } - set(cls.ignore_for_config)

        init_dict = {key: config_dict[key] for key in accepted if key in config_dict}
        init_dict.update({key: value for key, value in overrides.items() if key in accepted})

        unexpected = sorted(k for k in {**config_dict, **overrides} if k not in accepted and not k.startswith("_"))
        if unexpected:
            logger.warning(f"{cls.__name__} ignores unknown config keys {unexpected}")
        missing = accepted - set(init_dict)
        if missing:
            logger.debug(f"{cls.__name__}: defaults used for {sorted(missing)}")
        return init_dict

    def __repr__(self):
        return f"{self.__class__.__name__} {self.to_json_string()}"


def register_to_config(init):
    r"""
    Decorator for the `__init__` of a [`ConfigMixin`] subclass: records every argument, positional or keyword,
    explicit or defaulted, except those named in `ignore_for_config`. Array arguments are stored as lists.
    """
    signature = inspect.signature(init)

    @functools.wraps(init)
    def inner_init(self, *args, **kwargs):
        init(self, *args, **kwargs)
        if not isinstance(self, ConfigMixin):
            raise RuntimeError(f"@register_to_config needs {self.__class__.__name__} to derive from ConfigMixin")

        bound = signature.bind(self, *args, **kwargs)
        bound.apply_defaults()
        ignore = set(getattr(self, "ignore_for_config", []))
        recorded = {
            name: value.tolist() if isinstance(value, np.ndarray) else value
            for name, value in list(bound.arguments.items())[1:]
            if name not in ignore
        }
        self.register_to_config(**recorded)

    return inner_init
