"""
pysga setup.

For development installation:
    pip install -e /path/to/pysga
"""

from setuptools import setup

with open('README.rst') as f:
    long_description = f.read()

# Whereas install_requires metadata is automatically analyzed by pip during an
# install (i.e. also when installing from pypi), requirements files are not,
# and only are used when a user specifically installs them using pip install
# -r. Therefore, we give lower bounds here and pin versions in
# requirements.txt.

setup(name='pysga',
      version='1.0.0',
      description=('A free & open source python tool for scene graph \
                    anticipation with learned differential equations.'),
      license='GNU General Public License Version 3',
      python_requires='>=3.8',
      install_requires=['numpy>=1.22', 'scipy>=1.8',
                        'tomli>=1.1.0; python_version < "3.11"',
                        'tomli-w>=1.0.0'],
      extras_require={'test': ['pytest>=7.0', 'pytest-cov>=3.0',
                               'hypothesis>=6.0']},
      keywords=['scene graph', 'anticipation', 'neural ODE', 'neural SDE'],
      long_description=long_description,
      packages=['pysga', 'pysga.analysis', 'pysga.analysis.testing'],
      package_data={'pysga.analysis': ['config_default.toml']},
      entry_points={
          'console_scripts': [
              'pysga = pysga.analysis.__main__:main',
              ]},
      )
