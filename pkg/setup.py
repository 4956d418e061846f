from setuptools import setup, find_packages

setup(name='inv_transfer',
      packages=find_packages(exclude=['tests']),
      version='0.1.0',
      install_requires=[
      'matplotlib',
      'numpy',
      'pandas',
      'pyyaml',
      'scipy',
      'torch',
      'torchvision',
      ],
      extras_require={'test': ['pytest']})
