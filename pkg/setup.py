# type: ignore

from setuptools import setup, find_packages

import re

with open("matching_sparsifier/__init__.py") as file:
    __version__ = re.search(r'__version__(?:: str)? = "([^"]+)"', file.read()).group(1)

with open("README.md") as file:
    long_description = file.read()

install_requirements = [
    "tqdm>=4.55.0",
    "scipy>=1.6.0",
    "numpy>=1.20.0",
]

setup(
    name="msp",
    version=__version__,
    description="Stochastic weighted matching sparsifiers with exact audits",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    entry_points={"console_scripts": ["msp = matching_sparsifier.main:driver"]},
    install_requires=install_requirements,
    extras_require={"test": ["pytest>=7.0"]},
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.11",
    zip_safe=True,
)
