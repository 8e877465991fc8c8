import sys
from setuptools import setup

if sys.version_info.major != 3:
    raise RuntimeError('bayesnbs requires Python 3')

# get version
with open('src/bayesnbs/version.py') as f:
    exec(f.read())

# Set README as project description
with open("README.md", "r") as fh:
    long_description = fh.read()


setup(name='bayesnbs',
      version=__version__,
      description='bayesnbs - noisy binary search with the Bayesian screening search, baselines and benchmark harness',
      long_description=long_description,
      long_description_content_type="text/markdown",
      keywords=['Noisy Binary Search', 'Bayesian Search', 'Channel Capacity', 'Monte Carlo'],
      package_dir={'': 'src'},
      packages=['bayesnbs'],
      python_requires='>=3.8',
      install_requires=[
          'numpy>=1.17',
          'pandas>=1.5',
          'scipy>=1.7',
          'scikit-learn',
          'joblib',
      ],
      extras_require={
          'test': ['pytest'],
      },
      entry_points={
          'console_scripts': ['bayesnbs=bayesnbs.cli:main'],
      },
      )
