# -*- coding: utf-8 -*-
"""Shared helper functions, config namespace and exception classes."""

# Part of pysga library
#
# This program is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# This program is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details.
#
# You should have received a copy of the GNU General Public License along with
# this program.  If not, see <http://www.gnu.org/licenses/>.

import os
import json
import hashlib
import tempfile
import numpy as np


# *****************************************************************************
# *** Exceptions

class SgaError(Exception):
    """Base class of all errors raised by pysga."""

    pass


class ShapeError(SgaError):
    """Operands of a tensor operation have incompatible shapes."""

    pass


class ContractError(SgaError):
    """A precondition of a public operation is violated."""

    pass


class CorpusError(SgaError):
    """Annotation file cannot be parsed or violates an index invariant."""

    pass


class TrackingError(SgaError):
    """Objects cannot be tracked by category (duplicate category)."""

    pass


class ConfigError(SgaError):
    """Invalid configuration parameter."""

    pass


class CompatibilityError(SgaError):
    """Checkpoint and corpus (or two checkpoints) do not fit together."""

    pass


class NumericalError(SgaError):
    """Training produced a non-finite loss."""

    pass
# *****************************************************************************


class cls_set_config(object):
    """
    Set config parameters from dictionary into local namespace.

    Parameters
    ----------
    dicCnfg : dict
        Dictionary containing parameter names (as keys) and parameter values
        (as values). For example, `dicCnfg['varEpochs']` contains an int, such
        as `20`.
    """

    def __init__(self, dicCnfg):
        """Set config parameters from dictionary into local namespace."""
        self.__dict__.update(dicCnfg)


def hash_config(dicCnfg):
    """
    Hash a config dictionary.

    Parameters
    ----------
    dicCnfg : dict
        Config dictionary (JSON serialisable values only).

    Returns
    -------
    strHash : str
        Hex SHA-256 digest of the canonical (sorted, compact) JSON encoding.
    """
    strJsn = json.dumps(dicCnfg, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(strJsn.encode('utf-8')).hexdigest()


def write_atomic(strPath, bytData):
    """
    Write bytes to a file atomically.

    Parameters
    ----------
    strPath : str
        Destination path.
    bytData : bytes
        File content.

    Notes
    -----
    The data are written to a temporary file in the destination directory,
    which then replaces the destination. Readers never see a partial file.
    """
    strDir = os.path.dirname(os.path.abspath(strPath))
    varFd, strTmp = tempfile.mkstemp(dir=strDir, prefix='.tmp_')
    try:
        with os.fdopen(varFd, 'wb') as fleTmp:
            fleTmp.write(bytData)
        os.replace(strTmp, strPath)
    except BaseException:
        if os.path.isfile(strTmp):
            os.remove(strTmp)
        raise


def derive_seed(*lstPrts):
    """
    Derive a reproducible 32 bit seed from integer parts.

    Parameters
    ----------
    *lstPrts : int
        Components, e.g. (base seed, epoch, video index).

    Returns
    -------
    varSeed : int
        Seed in [0, 2**32).
    """
    objSeq = np.random.SeedSequence([int(varPrt) for varPrt in lstPrts])
    return int(objSeq.generate_state(1, dtype=np.uint32)[0])


def print_progress(varCnt, varTtl, strUnit, varNumStp=10):
    """
    Print a status message at fixed percentages of a loop.

    Parameters
    ----------
    varCnt : int
        Number of items done so far (1-based).
    varTtl : int
        Total number of items.
    strUnit : str
        Name of the items (e.g. 'videos').
    varNumStp : int
        Number of status messages over the whole loop.
    """
    # Counts at which to give status feedback:
    vecStat = np.ceil(np.linspace(0, varTtl, num=(varNumStp + 1),
                                  endpoint=True)).astype(int)
    if varCnt in vecStat[1:]:
        varPrc = int(np.around(100.0 * varCnt / max(varTtl, 1)))
        print('------------Progress: ' + str(varPrc) + ' % --- '
              + str(varCnt) + ' ' + strUnit + ' out of ' + str(varTtl))
