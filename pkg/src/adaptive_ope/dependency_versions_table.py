# THIS FILE HAS BEEN AUTOGENERATED. To update:
# 1. modify the `_deps` dict in setup.py
# 2. run `python setup.py deps_table_update`
deps = {
    "black": "black==22.8",
    "flake8": "flake8==6.0.0",
    "isort": "isort==5.10.1",
    "numpy": "numpy==1.23.5",
    "pytest": "pytest==7.2.0",
    "pytest-timeout": "pytest-timeout==2.1.0",
    "pytest-xdist": "pytest-xdist==3.0.2",
    "scipy": "scipy==1.9.3",
    "tqdm": "tqdm==4.64.1",
}
