# -*- coding: utf-8 -*-
"""Binary checkpoint format for named tensors and optimiser state."""

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

import json
import struct
from dataclasses import dataclass
import numpy as np

from pysga.analysis import autodiff as ad
from pysga.analysis.utilities import (CompatibilityError, hash_config,
                                      write_atomic)


# Version of the file layout:
varFmtVer = 1

# Storage type of the body (little-endian 32 bit float):
strDtype = '<f4'

# Name prefixes of the optimiser moments:
strPfxM = 'adam.m.'
strPfxV = 'adam.v.'


@dataclass
class Checkpoint:
    """Content of a checkpoint file."""

    dicPrm: dict
    objAdam: ad.AdamState
    dicHdr: dict

    @property
    def config(self):
        return self.dicHdr['config']

    @property
    def epoch(self):
        return self.dicHdr['epoch']


def taxonomy_header(objTax):
    """Taxonomy entry of the checkpoint header."""
    return {'num_classes': objTax.num_classes,
            'num_predicates': objTax.num_predicates,
            'object_classes': list(objTax.object_classes),
            'predicate_classes': list(objTax.predicate_classes)}


def checkpoint_bytes(dicPrm, objAdam, dicCnfg, objTax, varEpoch):
    """
    Serialise a model into the checkpoint layout.

    Layout: 8 byte little-endian header length, UTF-8 JSON header (sorted
    keys), then the contiguous little-endian float32 body. The header holds
    format version, config hash, resolved config, taxonomy, epoch, optimiser
    step, and the manifest of named tensors (shape, byte offset, byte count).
    """
    lstTns = [(strKey, dicPrm[strKey].data) for strKey in sorted(dicPrm)]
    for strKey in sorted(objAdam.dicM):
        lstTns.append((strPfxM + strKey, objAdam.dicM[strKey]))
        lstTns.append((strPfxV + strKey, objAdam.dicV[strKey]))

    lstMan = []
    lstBdy = []
    varOff = 0
    for strKey, aryTns in lstTns:
        bytTns = np.ascontiguousarray(aryTns, dtype=strDtype).tobytes()
        lstMan.append({'name': strKey, 'shape': list(aryTns.shape),
                       'offset': varOff, 'nbytes': len(bytTns)})
        lstBdy.append(bytTns)
        varOff += len(bytTns)

    dicHdr = {'format_version': varFmtVer,
              'config_hash': hash_config(dicCnfg),
              'config': dicCnfg,
              'taxonomy': taxonomy_header(objTax),
              'epoch': int(varEpoch),
              'adam_step': int(objAdam.varStep),
              'tensors': lstMan}
    bytHdr = json.dumps(dicHdr, sort_keys=True,
                        separators=(',', ':')).encode('utf-8')
    return struct.pack('<Q', len(bytHdr)) + bytHdr + b''.join(lstBdy)


def save_checkpoint(strPath, dicPrm, objAdam, dicCnfg, objTax, varEpoch):
    """Write a checkpoint atomically (see `checkpoint_bytes`)."""
    write_atomic(strPath, checkpoint_bytes(dicPrm, objAdam, dicCnfg, objTax,
                                           varEpoch))


def load_checkpoint(strPath):
    """
    Read a checkpoint file.

    Parameters
    ----------
    strPath : str
        Path of the checkpoint.

    Returns
    -------
    objCkpt : Checkpoint
        Parameters (requiring gradients), optimiser state and header.

    Raises
    ------
    OSError
        If the file is missing or corrupt.
    CompatibilityError
        If the format version is not supported.
    """
    with open(strPath, 'rb') as fleCkpt:
        bytAll = fleCkpt.read()
    if len(bytAll) < 8:
        raise OSError('Corrupt checkpoint (no header): ' + str(strPath))
    varLenHdr = struct.unpack('<Q', bytAll[:8])[0]
    if 8 + varLenHdr > len(bytAll):
        raise OSError('Corrupt checkpoint (header length): ' + str(strPath))
    try:
        dicHdr = json.loads(bytAll[8:8 + varLenHdr].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise OSError('Corrupt checkpoint (header): ' + str(strPath))
    if dicHdr.get('format_version') != varFmtVer:
        raise CompatibilityError('Unsupported checkpoint version: '
                                 + str(dicHdr.get('format_version')))

    bytBdy = bytAll[8 + varLenHdr:]
    dicPrm = {}
    objAdam = ad.AdamState()
    objAdam.varStep = int(dicHdr['adam_step'])
    varEnd = 0
    for dicMan in dicHdr['tensors']:
        varOff = dicMan['offset']
        varNum = dicMan['nbytes']
        if varOff != varEnd or varOff + varNum > len(bytBdy):
            raise OSError('Corrupt checkpoint (manifest): tensor '
                          + dicMan['name'])
        varEnd = varOff + varNum
        aryTns = np.frombuffer(bytBdy[varOff:varEnd], dtype=strDtype)
        aryTns = aryTns.astype(np.float32).reshape(dicMan['shape'])
        strKey = dicMan['name']
        if strKey.startswith(strPfxM):
            objAdam.dicM[strKey[len(strPfxM):]] = aryTns
        elif strKey.startswith(strPfxV):
            objAdam.dicV[strKey[len(strPfxV):]] = aryTns
        else:
            dicPrm[strKey] = ad.parameter(aryTns, strKey)
    if varEnd != len(bytBdy):
        raise OSError('Corrupt checkpoint (trailing bytes): ' + str(strPath))
    return Checkpoint(dicPrm=dicPrm, objAdam=objAdam, dicHdr=dicHdr)


def check_taxonomy(dicHdr, objTax, strCtx='corpus'):
    """Raise a compatibility error unless checkpoint and taxonomy agree."""
    dicTax = taxonomy_header(objTax)
    if dicHdr['taxonomy'] != dicTax:
        raise CompatibilityError(
            'Checkpoint taxonomy (' + str(dicHdr['taxonomy']['num_classes'])
            + ' classes, ' + str(dicHdr['taxonomy']['num_predicates'])
            + ' predicates) does not match ' + strCtx + ' ('
            + str(dicTax['num_classes']) + ' classes, '
            + str(dicTax['num_predicates']) + ' predicates)')
