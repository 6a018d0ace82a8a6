#!/usr/bin/env python3
from pathlib import Path

from setuptools import find_packages, setup

HERE = Path(__file__).parent

# test-only pins stay in requirements.txt
TEST_PACKAGES = {"pytest", "iniconfig", "pluggy", "pygments"}


def read_requirements():
    requirements = []
    for line in (HERE / "requirements.txt").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name = line.split("==")[0].strip().lower()
        if name not in TEST_PACKAGES:
            requirements.append(line)
    return requirements


def read_version():
    for line in (HERE / "gsema" / "__init__.py").read_text(encoding="utf-8").splitlines():
        if line.startswith("__version__"):
            return line.split("=")[1].strip().strip('"')
    return "0.0.0"


setup(
    name="gsema",
    version=read_version(),
    description="pathway-level gene expression meta-analysis",
    long_description=(HERE / "README.md").read_text(encoding="utf-8"),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.10",
    install_requires=read_requirements(),
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["gsema=gsema.cli:main"]},
)
