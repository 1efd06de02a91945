# coding: utf8

import logging
import os

import simplejson
from mfto.conf.Version import __version__ as version

logger = logging.getLogger(__name__)


class _Settings(object):

    MFTO_VERSION = version

    ###############################################################################
    # Output settings
    ###############################################################################

    OUTPUT_DIR                              = os.environ.get('MFTO_OUTPUT_DIR', 'mfto-output')

    # Values are written with 17 significant digits so re-reads are bit exact
    FLOAT_FORMAT                            = '%.17g'

    ###############################################################################
    # Assembly settings
    ###############################################################################

    THREADS                                 = 1

    # Cells handed to one worker at a time
    ASSEMBLY_CHUNK_CELLS                    = 256

    # A column losing more than this fraction of its samples is logged as a warning
    LOST_MASS_WARN_FRACTION                 = 0.01

    ###############################################################################
    # Spectral settings
    ###############################################################################

    EIGEN_TOLERANCE                         = 1e-8
    EIGEN_MAX_ITER                          = 100000

    # Below this size (and for k >= n - 1) the dense solver is used
    DENSE_EIGEN_MAX_N                       = 256

    PERRON_TOLERANCE                        = 1e-10
    PERRON_MAX_ITER                         = 100000

    ###############################################################################
    # Mean-field settings
    ###############################################################################

    MOMENTUM_SIGMAS                         = 6.0
    MOMENTUM_NODES                          = 32

    MASS_DRIFT_TOLERANCE                    = 1e-6

    ROOTHAAN_DAMPING                        = 1.0
    ROOTHAAN_ORDER                          = 'forward'

    def loadFrom(self, fileName):
        with open(fileName, 'r') as f:
            conf = simplejson.load(f)
        for key, value in conf.items():
            if key in dir(self):
                self.__setattr__(key, value)
            else:
                logger.warning("Ignoring unknown setting {0}".format(key))

Settings = _Settings()


def loadConfig(cl_args):
    """
    Load in a commandline-specified settings file, if applicable.

    A convenience method if you don't need other things specified as commandline
    options. Otherwise, point the filename to Settings.loadFrom().

    :param cl_args: An `argparse.parse_args()` return.
    """
    if getattr(cl_args, 'settings', None):
        Settings.loadFrom(cl_args.settings)
