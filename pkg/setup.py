from setuptools import setup, find_packages

setup(
    name="vakonomic-integrators",
    version="0.1",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "matplotlib",
        "pydantic>=2",
        "python-dotenv",
    ],
    extras_require={
        "test": ["pytest", "pytest-cov", "pytest-mock"],
    },
    entry_points={
        "console_scripts": ["vakonomic=src.main:main"],
    },
)
