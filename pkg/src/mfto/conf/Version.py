# This should be a version number as understood by setuptools
__version__ = "0.1"
