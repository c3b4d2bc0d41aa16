from setuptools import find_packages, setup

setup(
    name='uav-isac',
    version='0.1',
    license='MIT',
    description='Robust sensing and communication power allocation for multi-UAV integrated sensing and communication',
    python_requires=">=3.10",
    packages=find_packages(include=["uav_isac", "uav_isac.*"]),
    package_data={"uav_isac": ["scenarios/*.json"]},
    install_requires=[
        "torch",
        "numpy",
        "scipy",
        "cvxpy>=1.4",
        "clarabel",
        "pandas",
        "tqdm",
        "wandb",
    ],
    extras_require={"tests": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["uav-isac=uav_isac.cli:main"]},
)
