import os
import re

from setuptools import setup

# Load the package's __version__.py to get version string
here = os.path.abspath(os.path.dirname(__file__))
init_py = os.path.join(here, 'foliapyn', '__init__.py')
with open(init_py) as f:
    VERSION = re.search("__version__ = \'(.*?)\'", f.read()).group(1)

DESC = 'A python package to build leafwise de Rham complexes of model ' \
       'foliations, deform them by a potential (Witten deformation) and ' \
       'check kernel dimension invariance and tangential Morse theory ' \
       'numerically.'

readme_rst = os.path.join(here, 'README.rst')
with open(readme_rst) as f:
    LONG_DESC = f.read()

DEPENDENCIES = [
        'numpy >= 1.17',
        'scipy >= 1.5',
        'pandas >= 1.5',
]

TEST_DEPENDENCIES = [
        'pytest >= 7',
]

setup(
    name='foliapyn',
    version=VERSION,
    description=DESC,
    long_description=LONG_DESC,
    author='foliapyn developers',
    keywords=['Foliation', 'Hodge theory', 'Witten deformation', 'Morse theory',
              'Discrete exterior calculus', 'Spectral geometry'],
    license='GPL',
    classifiers=[
        # Trove classifiers
        # Full list: https://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License (GPL)',
        'Operating System :: OS Independent',
        'Topic :: Software Development :: Libraries :: Python Modules',
        'Topic :: Scientific/Engineering :: Mathematics'
    ],

    packages=['foliapyn'],
    package_data={
        'foliapyn': ['githash'],
    },
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'foliapyn = foliapyn.cli:main'
        ]
    },

    python_requires='>=3.8',
    install_requires=DEPENDENCIES,
    extras_require={
        'test': TEST_DEPENDENCIES,
    },
)
