"""Setup file for tt-contrastive package."""

from setuptools import setup, find_packages

setup(
    name="tt-contrastive",
    version="0.1.0",
    description="Tensor-train factorized projection heads for contrastive self-supervised learning",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "pandas>=1.5",
        "python-dotenv",
        "tqdm",
        "psutil"
    ],
    extras_require={
        "jpeg": [
            "Pillow"
        ],
        "dev": [
            "pytest"
        ]
    },
    entry_points={
        "console_scripts": [
            "tt-contrastive=tt_contrastive.main:main"
        ]
    }
)
