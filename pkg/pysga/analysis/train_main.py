# -*- coding: utf-8 -*-
"""Train a scene graph anticipation model on a corpus."""

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
import io
import csv
import numpy as np

from pysga.analysis import autodiff as ad
from pysga.analysis.scene_graph import check_video_lengths
from pysga.analysis.encoders import prepare_video
from pysga.analysis.heads_losses import window_starts
from pysga.analysis.model_creation import (create_params, model_loss,
                                           loss_weights)
from pysga.analysis.checkpoint import (save_checkpoint, load_checkpoint,
                                       check_taxonomy)
from pysga.analysis.utilities import (cls_set_config, derive_seed,
                                      print_progress, write_atomic,
                                      ConfigError, CompatibilityError,
                                      NumericalError)


# File names inside the output directory:
strFleCkpt = 'checkpoint.sga'
strFleLog = 'train_log.csv'

# Columns of the training log:
lstLogCol = ['epoch', 'loss', 'loss_gen', 'loss_object', 'loss_ant',
             'loss_boxes', 'loss_recon', 'ant_accuracy']

# Config entries that define the model; a resumed run must match them:
lstArchKeys = ['strModel', 'varDimCat', 'varDimProj', 'varDimSem',
               'varNumLyr', 'varNumHead', 'varDimFfn', 'varDimHid',
               'varMaxFrm', 'strSolver', 'varStepSize', 'varActorCat']


def _format_row(lstVal):
    """Training log row with fixed float formatting."""
    return [str(lstVal[0])] + ['{:.8e}'.format(varVal)
                               for varVal in lstVal[1:]]


def _write_log(strPath, lstRow):
    """Write the training log (header + rows) atomically."""
    objBuf = io.StringIO()
    objWrt = csv.writer(objBuf, lineterminator='\n')
    objWrt.writerow(lstLogCol)
    for lstRow_ in lstRow:
        objWrt.writerow(lstRow_)
    write_atomic(strPath, objBuf.getvalue().encode('utf-8'))


def _read_log(strPath, varMaxEpc):
    """Rows of an existing log up to epoch `varMaxEpc`."""
    if not os.path.isfile(strPath):
        return []
    with open(strPath, 'r', newline='') as fleLog:
        lstRow = list(csv.reader(fleLog))
    return [lstRow_ for lstRow_ in lstRow[1:] if int(lstRow_[0]) <= varMaxEpc]


def train(lstVid, dicCnfg, strPathOut):
    """
    Train a model with sliding anticipation windows.

    Parameters
    ----------
    lstVid : list of VideoAnnotation
        Training corpus (non-empty, one taxonomy).
    dicCnfg : dict
        Resolved config.
    strPathOut : str
        Output directory for checkpoint and training log.

    Returns
    -------
    strPathCkpt : str
        Path of the checkpoint of the last epoch.

    Notes
    -----
    Each epoch visits the videos in a seeded random order. Per video, all
    frames are encoded once; every window T = 3 .. N - H anticipates frames
    T + 1 .. T + H from the representations at frame T, and the weighted
    losses of all windows are summed with the observed-frame losses before a
    single optimiser step. A checkpoint is written after every epoch; with
    zero epochs, the untrained model is written.
    """
    print('------Training')

    cfg = cls_set_config(dicCnfg)

    if len(lstVid) == 0:
        raise ConfigError('Training corpus contains no videos.')
    objTax = lstVid[0].taxonomy
    for objVid in lstVid:
        if objVid.taxonomy != objTax:
            raise ConfigError('Videos of the corpus use different '
                              + 'taxonomies.')
    check_video_lengths(lstVid, cfg.varMaxFrm)

    if not os.path.isdir(strPathOut):
        os.makedirs(strPathOut)
    strPathCkpt = os.path.join(strPathOut, strFleCkpt)
    strPathLog = os.path.join(strPathOut, strFleLog)

    # -------------------------------------------------------------------------
    # *** Prepare videos

    print('---------Prepare ' + str(len(lstVid)) + ' videos')
    lstVt = [prepare_video(objVid, varActorCat=cfg.varActorCat)
             for objVid in lstVid]
    varNumWin = int(np.sum([len(window_starts(objVt.num_frames,
                                              cfg.varTrnHrz))
                            for objVt in lstVt]))
    print('---------Number of anticipation windows per epoch: '
          + str(varNumWin))

    objLmb = loss_weights(cfg)
    print('---------Loss weights: ' + str(objLmb.as_list()))

    # -------------------------------------------------------------------------
    # *** Initialise or resume

    if cfg.lgcResume and os.path.isfile(strPathCkpt):
        print('---------Resume from ' + strPathCkpt)
        objCkpt = load_checkpoint(strPathCkpt)
        check_taxonomy(objCkpt.dicHdr, objTax)
        for strKey in lstArchKeys:
            if objCkpt.config.get(strKey) != dicCnfg.get(strKey):
                raise CompatibilityError('Cannot resume: ' + strKey
                                         + ' differs from checkpoint ('
                                         + str(objCkpt.config.get(strKey))
                                         + ' vs ' + str(dicCnfg.get(strKey))
                                         + ')')
        dicPrm = objCkpt.dicPrm
        objAdam = objCkpt.objAdam
        varEpcStr = int(objCkpt.epoch)
        lstLog = _read_log(strPathLog, varEpcStr)
    else:
        dicPrm = create_params(cfg, objTax.num_classes, objTax.num_predicates)
        objAdam = ad.AdamState()
        varEpcStr = 0
        lstLog = []
        save_checkpoint(strPathCkpt, dicPrm, objAdam, dicCnfg, objTax, 0)
        _write_log(strPathLog, lstLog)

    lstPrm = list(dicPrm.values())
    objTape = ad.get_tape()

    # -------------------------------------------------------------------------
    # *** Epoch loop

    for varEpc in range(varEpcStr + 1, cfg.varEpochs + 1):

        print('---------Epoch ' + str(varEpc) + ' of ' + str(cfg.varEpochs))

        objRng = np.random.default_rng(derive_seed(cfg.varSeed, varEpc))
        vecOrd = objRng.permutation(len(lstVt))

        varSumLss = 0.0
        dicSumTrm = {'gen': 0.0, 'object': 0.0, 'ant': 0.0, 'boxes': 0.0,
                     'recon': 0.0}
        varNumHit = 0
        varNumAnt = 0

        for idxCnt, idxVid in enumerate(vecOrd):

            objVt = lstVt[idxVid]
            objTape.reset()
            ad.zero_grad(lstPrm)

            objLoss, dicTrm, tplAcc = model_loss(
                objVt, dicPrm, cfg, objLmb,
                varSeed=derive_seed(cfg.varSeed, varEpc, idxVid))

            varLss = float(objLoss.data)
            if not np.isfinite(varLss):
                lstObs = window_starts(objVt.num_frames, cfg.varTrnHrz)
                raise NumericalError(
                    'Non-finite loss (' + str(varLss) + ') at epoch '
                    + str(varEpc) + ', video ' + objVt.video_id
                    + ', windows T = ' + str(lstObs) + ', terms '
                    + str(dicTrm))

            ad.backward(objLoss)
            ad.adam_step(lstPrm, objAdam, varLr=cfg.varLr,
                         tplBetas=(cfg.varBeta1, cfg.varBeta2),
                         varEps=cfg.varEps)

            varSumLss += varLss
            for strKey in dicSumTrm:
                dicSumTrm[strKey] += dicTrm[strKey]
            varNumHit += tplAcc[0]
            varNumAnt += tplAcc[1]

            print_progress(idxCnt + 1, len(lstVt), 'videos')

        objTape.reset()

        varNumVid = float(len(lstVt))
        varAcc = varNumHit / float(max(varNumAnt, 1))
        lstLog.append(_format_row(
            [varEpc, varSumLss / varNumVid]
            + [dicSumTrm[strKey] / varNumVid for strKey in
               ('gen', 'object', 'ant', 'boxes', 'recon')]
            + [varAcc]))
        print('------------Mean loss: '
              + '{:.6f}'.format(varSumLss / varNumVid)
              + ', anticipation accuracy: ' + '{:.4f}'.format(varAcc))

        save_checkpoint(strPathCkpt, dicPrm, objAdam, dicCnfg, objTax,
                        varEpc)
        _write_log(strPathLog, lstLog)

    return strPathCkpt
