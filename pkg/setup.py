from pathlib import Path

from setuptools import find_packages, setup

requirements = [line.strip() for line in Path(__file__).with_name('requirements.txt').read_text().splitlines()
                if line.strip() and not line.startswith('#')]

setup(
    name='dicke-sim',
    version='1.0.0',
    description='Two-qubit superradiance lab: master equation, detection chain and field tomography',
    packages=find_packages(include=['dicke_sim', 'dicke_sim.*', 'experiment_dashboard']),
    py_modules=['app', 'config'],
    python_requires='>=3.9',
    install_requires=requirements,
    entry_points={'console_scripts': ['dicke-sim=dicke_sim.cli:main']},
)
