from setuptools import setup, find_packages

setup(
    name="asg1-surface-analysis",
    version="1.0.0",
    description="Analysis-suitable G1 multi-patch spline surfaces and C1 isogeometric solvers",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "xmltodict>=0.13.0",
        "pandas>=2.0.0,<3.0.0",
        "plotly>=5.15.0",
        "numpy>=1.21.0,<2.0.0",
        "scipy>=1.8.0",
        "openpyxl>=3.1.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": ["asg1=asg1.cli:main"],
    },
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
