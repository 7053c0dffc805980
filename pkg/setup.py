from setuptools import find_packages, setup

setup(
    packages=find_packages(exclude=['test', 'test.*']),
    name='srv_sim',
    version='0.1.0',
    description='Simulator of speculative vectorization with selective '
                'replay and the covert channels it opens.',
    install_requires=[
        'numpy',
        'pandas',
        'wandb',
        'pyyaml',
        'joblib',
        'scipy'
    ],
    extras_require={'test': ['pytest']},
)
