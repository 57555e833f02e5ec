from setuptools import setup, find_packages

setup(
    name='terrawind',
    version='0.1.0',
    description='Downscales coarse wind-resource fields with a terrain-conditioned diffusion model and blends sparse station observations into the result.',
    author='terrawind developers',
    packages=find_packages(exclude=['tests', 'tests.*']),
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.8',
        'tqdm>=4.64',
    ],
    entry_points={
        'console_scripts': ['terrawind=terrawind.cli:main'],
    },
)
