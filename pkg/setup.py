import glob
import re
from setuptools import setup, find_packages

VERSIONFILE = "src/mfto/conf/Version.py"
verstr      = "unknown"
try:
    verstrline = open(VERSIONFILE, "rt").read()
    VSRE       = r"^__version__ = ['\"]([^'\"]*)['\"]"
    mo         = re.search(VSRE, verstrline, re.M)
    if mo:
        verstr = mo.group(1)
except EnvironmentError:
    print("unable to find version in %s" % (VERSIONFILE,))
    raise RuntimeError("if %s exists, it is required to be well-formed" % (VERSIONFILE,))

setup(
    name='mfto',
    version=verstr,
    description='Full and mean-field spatial transfer operators',
    long_description="""\
      Ulam discretisations of spatial transfer operators of Hamiltonian
      molecular models, their mean-field (statistical independence)
      approximation via a Roothaan-type self-consistent iteration, and
      tools to compare the dominant eigenfunctions of both.
      """,

    packages=find_packages(
        'src',
         exclude=["*.tests"]
    ),
    package_dir = {'':'src'},

    # The experiment schema is read at run time to validate config files.
    data_files=[
        (
            'mfto/schemas', glob.glob("schemas/*.json")
        )
    ],

    # Yes, we pin versions.
    install_requires=[
        "gevent==22.10.2",
        "jsonschema==4.17.3",
        "numpy==1.26.4",
        "scipy==1.11.4",
        "simplejson==3.19.1",
    ],

    extras_require={
        'test': [
            "pytest==7.4.3",
        ],
    },

    entry_points={
        'console_scripts': [
            'mfto = mfto.Experiment:main',
        ],
    }
)
