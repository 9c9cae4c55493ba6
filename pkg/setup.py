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
Release checklist:

1. Change the version in `src/adaptive_ope/__init__.py` and in this file, removing the `.dev0` suffix.
2. Run `black --check`, `isort --check-only` and `flake8` on `src tests`, then `python -m pytest -n auto tests`
   and `RUN_SLOW=1 python -m pytest tests/test_acceptance.py` for the acceptance suites.
3. Commit with the message "Release: <VERSION>", tag it (`git tag v<VERSION>`) and push the tag.
4. Build the sources and the wheel: `python setup.py bdist_wheel && python setup.py sdist`.
5. Upload to the test server first (`twine upload dist/* -r pypitest`), install it in a fresh virtualenv and run
   `ope env` and `ope accept reductions`.
6. Upload to pypi (`twine upload dist/* -r pypi`) and bump the version to the next `.dev0`.
"""

import os
import re
from setuptools import Command, find_packages, setup


# Every pinned requirement lives in `_deps`. After editing it, regenerate
# src/adaptive_ope/dependency_versions_table.py with `python setup.py deps_table_update`;
# `ope env` reports installed versions against that table.
_deps = [
    "black==22.8",
    "flake8==6.0.0",
    "isort==5.10.1",
    "numpy==1.23.5",
    "pytest==7.2.0",
    "pytest-timeout==2.1.0",
    "pytest-xdist==3.0.2",
    "scipy==1.9.3",
    "tqdm==4.64.1",
]

# package name -> pinned requirement, e.g. "scipy" -> "scipy==1.9.3"
deps = {re.split(r"[!=<>~]", requirement, maxsplit=1)[0]: requirement for requirement in _deps}


def deps_list(*pkgs):
    return [deps[pkg] for pkg in pkgs]


class DepsTableUpdateCommand(Command):
    """`python setup.py deps_table_update`: rewrites the dependency table shipped with the package."""

    description = "regenerate src/adaptive_ope/dependency_versions_table.py from _deps"
    user_options = []
    target = os.path.join("src", "adaptive_ope", "dependency_versions_table.py")

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        lines = [
            "# THIS FILE HAS BEEN AUTOGENERATED. To update:",
            "# 1. modify the `_deps` dict in setup.py",
            "# 2. run `python setup.py deps_table_update`",
            "deps = {",
            *(f'    "{name}": "{requirement}",' for name, requirement in sorted(deps.items())),
            "}",
            "",
        ]
        print(f"writing {self.target}")
        with open(self.target, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines))


extras = {
    "quality": deps_list("black", "isort", "flake8"),
    "test": deps_list("pytest", "pytest-timeout", "pytest-xdist"),
}
extras["dev"] = extras["quality"] + extras["test"]

install_requires = deps_list("numpy", "scipy", "tqdm")

setup(
    name="adaptive-ope",
    version="0.1.0.dev0",
    description="Off-policy evaluation with confidence intervals from adaptively logged bandit data",
    long_description=open("README.md", "r", encoding="utf-8").read() if os.path.isfile("README.md") else "",
    long_description_content_type="text/markdown",
    keywords="off-policy evaluation contextual bandits causal inference",
    license="Apache",
    author="The adaptive-ope authors",
    package_dir={"": "src"},
    packages=find_packages("src"),
    include_package_data=True,
    python_requires=">=3.8.0",
    install_requires=install_requires,
    extras_require=extras,
    entry_points={"console_scripts": ["ope=adaptive_ope.commands.ope_cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    cmdclass={"deps_table_update": DepsTableUpdateCommand},
)
